//! Dense symmetric eigensolver, per-block spectra and the truncation sweep.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::blocks::{build_blocks, Block, SectorKey};
use crate::error::{Error, Result};
use crate::occupation::binomial;
use crate::truncate::{delta_norm, lift_error_bound, truncate};
use crate::twobody::DummyMatrix;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenResult {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// `max_i ‖A v_i − λ_i v_i‖`.
    pub residual: f64,
    pub sweeps: usize,
}

/// Largest `|A_ij − A_ji|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i + 1..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Flip `v` so its first component above `1e-10` in magnitude is positive.
pub fn fix_sign(v: &mut DVector<f64>) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-10).copied() {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Cyclic Jacobi diagonalization.
pub fn eigensolve(a: &DMatrix<f64>, tol: f64) -> Result<EigenResult> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("{}x{} is not square", n, a.ncols())));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let skew = asymmetry(a);
    if skew > 1e-10 || skew.is_nan() {
        let (row, col, deviation) = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, (a[(i, j)] - a[(j, i)]).abs()))
            .fold((0, 0, 0.0f64), |best, cur| if cur.2 > best.2 || cur.2.is_nan() { cur } else { best });
        return Err(Error::NotSymmetric { row, col, deviation });
    }

    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        if off_diagonal_norm(&m) <= 1e-15 * scale {
            break;
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 || apq.abs() <= 1e-18 * scale {
                    continue;
                }
                rotated = true;
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]).then(i.cmp(&j)));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut vec = v.column(i).into_owned();
        fix_sign(&mut vec);
        eigenvectors.set_column(col, &vec);
    }

    let mut residual = 0.0f64;
    for i in 0..n {
        let vi = eigenvectors.column(i);
        residual = residual.max((a * vi - vi * eigenvalues[i]).norm());
    }
    if residual > tol || residual.is_nan() {
        return Err(Error::EigenNotConverged { sweeps, residual });
    }
    Ok(EigenResult { eigenvalues, eigenvectors, residual, sweeps })
}

/// One eigenvalue with its sector and in-block index.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumEntry {
    pub key: SectorKey,
    pub index: usize,
    pub eigenvalue: f64,
}

/// All block eigenvalues plus run metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub modes: usize,
    pub particles: usize,
    pub alpha_bar: usize,
    pub delta: Option<f64>,
    pub bound: Option<f64>,
    pub entries: Vec<SpectrumEntry>,
    pub max_residual: f64,
}

impl SpectrumReport {
    /// All eigenvalues, ascending.
    pub fn sorted_eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.entries.iter().map(|e| e.eigenvalue).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Attach `δ` and the lifted error bound `C(N,2)·δ`.
    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.bound = Some(lift_error_bound(self.particles, delta)?);
        self.delta = Some(delta);
        Ok(self)
    }

    /// CSV with header `tail,beta,index,eigenvalue`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tail,beta,index,eigenvalue\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{:e}\n", e.key.tail_label(), e.key.beta, e.index, e.eigenvalue));
        }
        out
    }
}

/// Diagonalize every block, in parallel, keeping partition order.
pub fn solve_blocks(blocks: &[Block], tol: f64) -> Result<SpectrumReport> {
    let first = blocks.first().ok_or_else(|| Error::InvalidParameter("no blocks to solve".into()))?;
    let results: Vec<EigenResult> = blocks
        .par_iter()
        .map(|b| {
            eigensolve(&b.matrix, tol).map_err(|e| Error::Block { sector: b.key.to_string(), source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let mut entries = Vec::new();
    let mut max_residual = 0.0f64;
    for (b, r) in blocks.iter().zip(&results) {
        max_residual = max_residual.max(r.residual);
        for (index, &eigenvalue) in r.eigenvalues.iter().enumerate() {
            entries.push(SpectrumEntry { key: b.key, index, eigenvalue });
        }
    }
    Ok(SpectrumReport {
        modes: first.key.modes,
        particles: first.key.particles(),
        alpha_bar: first.key.alpha_bar,
        delta: None,
        bound: None,
        entries,
        max_residual,
    })
}

/// Truncate, split into blocks and diagonalize.
pub fn spectrum(e: &DummyMatrix, particles: usize, alpha_bar: usize, tol: f64) -> Result<SpectrumReport> {
    let t = truncate(e, alpha_bar)?;
    let blocks = build_blocks(&t, particles, true)?;
    solve_blocks(&blocks, tol)?.with_delta(delta_norm(e, alpha_bar)?)
}

/// One sweep row: the truncation error data and the eigenvalue drift against
/// the untruncated spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub alpha_bar: usize,
    pub delta: f64,
    pub bound: f64,
    /// Largest drift over the whole spectrum (sorted pairing).
    pub max_eig_shift: f64,
    /// Drift of each of the lowest levels.
    pub drifts: Vec<f64>,
}

impl SweepRow {
    /// Whether the drift respects `C(N,2)·δ`, allowing `slack` for rounding.
    pub fn within_bound(&self, slack: f64) -> bool {
        self.max_eig_shift <= self.bound + slack
    }
}

/// Spectrum drift for each `alpha_bar` in `alphas` against `alpha_bar = R`.
pub fn sweep(e: &DummyMatrix, particles: usize, alphas: &[usize], levels: usize, tol: f64) -> Result<Vec<SweepRow>> {
    let r = e.modes();
    if let Some(&bad) = alphas.iter().find(|&&a| a < 2 || a > r) {
        return Err(Error::InvalidParameter(format!("alpha_bar {bad} outside 2..={r}")));
    }
    let reference = spectrum(e, particles, r, tol)?.sorted_eigenvalues();
    let k = levels.min(binomial(r, particles));
    alphas
        .iter()
        .map(|&alpha| {
            let report = spectrum(e, particles, alpha, tol)?;
            let eig = report.sorted_eigenvalues();
            let shifts: Vec<f64> = eig.iter().zip(&reference).map(|(a, b)| (a - b).abs()).collect();
            Ok(SweepRow {
                alpha_bar: alpha,
                delta: report.delta.unwrap_or(0.0),
                bound: report.bound.unwrap_or(0.0),
                max_eig_shift: shifts.iter().copied().fold(0.0, f64::max),
                drifts: shifts[..k].to_vec(),
            })
        })
        .collect()
}

/// CSV with header `alpha,delta,bound,max_eig_shift,drift_0,…`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let k = rows.first().map_or(0, |r| r.drifts.len());
    let mut out = String::from("alpha,delta,bound,max_eig_shift");
    for i in 0..k {
        out.push_str(&format!(",drift_{i}"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{},{:e},{:e},{:e}", row.alpha_bar, row.delta, row.bound, row.max_eig_shift));
        for d in &row.drifts {
            out.push_str(&format!(",{d:e}"));
        }
        out.push('\n');
    }
    out
}
