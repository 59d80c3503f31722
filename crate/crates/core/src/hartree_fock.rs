//! Two-particle Hartree-Fock for the dummy Hamiltonian.
//!
//! The Fock operator of a reference orbital `χ` is
//! `F(χ)_ab = K_ab + Σ_cd χ_c χ_d ⟨c∧a| W |d∧b⟩`, the direct minus exchange
//! term written through the antisymmetrized pair interaction. It acts on the
//! orthogonal complement of `χ`. The self-consistent pair `(φ₁, φ₂)` solves
//! `F(φ₂)φ₁ = e₂₁φ₁`, `F(φ₁)φ₂ = e₁₂φ₂` with `e₁₂ ≤ e₂₁`, and the remaining
//! orbitals are the eigenvectors of `F(φ₁)` orthogonal to `φ₁`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectra::{self, fix_sign};
use crate::twobody::{check_orthonormal, DummyMatrix, DummyModel, PairInteraction};

const EIGEN_TOL: f64 = 1e-11;

/// Inputs of one Fock operator.
#[derive(Clone, Copy, Debug)]
pub struct FockContext<'a> {
    pub one_body: &'a DMatrix<f64>,
    pub interaction: &'a PairInteraction,
    pub chi: &'a DVector<f64>,
}

/// `F(χ)` as a full `d×d` matrix.
pub fn fock_matrix(ctx: &FockContext<'_>) -> Result<DMatrix<f64>> {
    let d = ctx.one_body.nrows();
    if ctx.one_body.ncols() != d || ctx.interaction.modes() != d || ctx.chi.len() != d {
        return Err(Error::Dimension("one-body, interaction and orbital sizes differ".into()));
    }
    let norm = ctx.chi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("reference orbital has norm {norm}")));
    }
    let chi = ctx.chi;
    let w = ctx.interaction;
    let mut f = ctx.one_body.clone();
    for a in 0..d {
        for b in a..d {
            let mut s = 0.0;
            for c in 0..d {
                if chi[c] == 0.0 {
                    continue;
                }
                for e in 0..d {
                    s += chi[c] * chi[e] * w.antisymmetrized(c, a, e, b);
                }
            }
            f[(a, b)] += s;
            if a != b {
                f[(b, a)] += s;
            }
        }
    }
    Ok(f)
}

/// Orthonormal basis (`d×(d-1)`) of the complement of the unit vector `chi`,
/// from the Householder reflection that maps `chi` to a coordinate axis.
pub fn complement_basis(chi: &DVector<f64>) -> DMatrix<f64> {
    let d = chi.len();
    let mut u = chi.clone();
    let sign = if chi[0] >= 0.0 { 1.0 } else { -1.0 };
    u[0] += sign;
    let un = u.norm_squared();
    let reflector = DMatrix::<f64>::identity(d, d) - (&u * u.transpose()) * (2.0 / un);
    reflector.columns(1, d - 1).into_owned()
}

/// Eigenpairs of `F` restricted to the complement of `chi`, ascending, each
/// vector sign-fixed.
fn complement_eigen(f: &DMatrix<f64>, chi: &DVector<f64>) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let q = complement_basis(chi);
    let mut reduced = q.transpose() * f * &q;
    let rt = reduced.transpose();
    reduced = (reduced + rt) * 0.5;
    let eig = spectra::eigensolve(&reduced, EIGEN_TOL * f.amax().max(1.0))?;
    let mut vectors = Vec::with_capacity(eig.eigenvalues.len());
    for i in 0..eig.eigenvalues.len() {
        let mut v = &q * eig.eigenvectors.column(i);
        v /= v.norm();
        fix_sign(&mut v);
        vectors.push(v);
    }
    Ok((eig.eigenvalues.iter().copied().collect(), vectors))
}

/// Lowest eigenpair of `F` on the complement of `chi`.
fn lowest_on_complement(f: &DMatrix<f64>, chi: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let (values, mut vectors) = complement_eigen(f, chi)?;
    Ok((values[0], vectors.swap_remove(0)))
}

/// `‖P F P φ − ⟨φ,Fφ⟩ φ‖` with `P` the projector onto the complement of `chi`.
fn projected_residual(f: &DMatrix<f64>, chi: &DVector<f64>, phi: &DVector<f64>) -> (f64, f64) {
    let project = |v: DVector<f64>| &v - chi * chi.dot(&v);
    let pphi = project(phi.clone());
    let fp = project(f * &pphi);
    let e = phi.dot(&(f * phi));
    ((fp - phi * e).norm(), e)
}

/// Iteration controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HfOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Weight of the new candidate in linear mixing.
    pub mixing: f64,
}

impl Default for HfOptions {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-8, mixing: 0.3 }
    }
}

/// A converged orbital pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSolution {
    pub phi1: DVector<f64>,
    pub phi2: DVector<f64>,
    pub e21: f64,
    pub e12: f64,
    pub iterations: usize,
    /// `max(r₁, r₂)` after each iteration.
    pub residual_history: Vec<f64>,
    /// Whether the residual never increased.
    pub monotone: bool,
}

fn align(candidate: DVector<f64>, old: &DVector<f64>) -> DVector<f64> {
    if candidate.dot(old) < 0.0 {
        -candidate
    } else {
        candidate
    }
}

fn mix(old: &DVector<f64>, candidate: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let v = old * (1.0 - lambda) + candidate * lambda;
    let n = v.norm();
    v / n
}

/// Damped alternating solution of the orbital pair equations.
pub fn solve_pair(one_body: &DMatrix<f64>, interaction: &PairInteraction, options: &HfOptions) -> Result<PairSolution> {
    let d = one_body.nrows();
    if d < 2 {
        return Err(Error::Dimension(format!("need at least 2 modes, got {d}")));
    }
    if options.tolerance.is_nan()
        || options.tolerance <= 0.0
        || options.mixing.is_nan()
        || options.mixing <= 0.0
        || options.mixing > 1.0
        || options.max_iterations == 0
    {
        return Err(Error::InvalidParameter(format!("invalid SCF options {options:?}")));
    }
    let start = spectra::eigensolve(one_body, EIGEN_TOL * one_body.amax().max(1.0))?;
    let mut phi1: DVector<f64> = start.eigenvectors.column(0).into_owned();
    let mut phi2: DVector<f64> = start.eigenvectors.column(1).into_owned();
    let fock = |chi: &DVector<f64>| fock_matrix(&FockContext { one_body, interaction, chi });

    let mut history = Vec::new();
    let mut last = (f64::INFINITY, f64::INFINITY);
    for iteration in 1..=options.max_iterations {
        let f2 = fock(&phi2)?;
        let (_, cand1) = lowest_on_complement(&f2, &phi2)?;
        phi1 = mix(&phi1, &align(cand1, &phi1), options.mixing);

        let f1 = fock(&phi1)?;
        let (_, cand2) = lowest_on_complement(&f1, &phi1)?;
        let mixed = mix(&phi2, &align(cand2, &phi2), options.mixing);
        let orth = &mixed - &phi1 * phi1.dot(&mixed);
        phi2 = orth.normalize();

        let f2 = fock(&phi2)?;
        let f1 = fock(&phi1)?;
        let (r1, e21) = projected_residual(&f2, &phi2, &phi1);
        let (r2, e12) = projected_residual(&f1, &phi1, &phi2);
        last = (r1, r2);
        history.push(r1.max(r2));
        if r1 <= options.tolerance && r2 <= options.tolerance {
            let monotone = history.windows(2).all(|w| w[1] <= w[0]);
            let (phi1, phi2, e21, e12) = if e12 <= e21 { (phi1, phi2, e21, e12) } else { (phi2, phi1, e12, e21) };
            return Ok(PairSolution {
                phi1,
                phi2,
                e21,
                e12,
                iterations: iteration,
                residual_history: history,
                monotone,
            });
        }
    }
    Err(Error::ScfNotConverged { iterations: options.max_iterations, residual_1: last.0, residual_2: last.1 })
}

/// Eigenvectors of `F(φ₁)` orthogonal to `φ₁`, ascending, with their
/// eigenvalues `e_{1κ}`.
pub fn residual_orbitals(
    one_body: &DMatrix<f64>,
    interaction: &PairInteraction,
    phi1: &DVector<f64>,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let f = fock_matrix(&FockContext { one_body, interaction, chi: phi1 })?;
    let (values, vectors) = complement_eigen(&f, phi1)?;
    Ok((DMatrix::from_columns(&vectors), values))
}

/// The Hartree-Fock orbital set.
#[derive(Clone, Debug, PartialEq)]
pub struct HfBasis {
    /// Columns `φ₁` followed by the residual orbitals.
    pub orbitals: DMatrix<f64>,
    pub e21: f64,
    pub e12: f64,
    /// `e_{1κ}` for the residual orbitals, ascending.
    pub orbital_energies: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub monotone: bool,
}

/// Run the pair iteration on the dummy model (`γ₀K` and `W`) and complete the
/// orbital set.
pub fn hartree_fock(model: &DummyModel, options: &HfOptions) -> Result<HfBasis> {
    let k = model.scaled_one_body();
    let pair = solve_pair(&k, &model.interaction, options)?;
    let (rest, energies) = residual_orbitals(&k, &model.interaction, &pair.phi1)?;
    let d = k.nrows();
    let mut orbitals = DMatrix::zeros(d, d);
    orbitals.set_column(0, &pair.phi1);
    for j in 0..d - 1 {
        orbitals.set_column(j + 1, &rest.column(j));
    }
    check_orthonormal(&orbitals, 1e-8)?;
    Ok(HfBasis {
        orbitals,
        e21: pair.e21,
        e12: pair.e12,
        orbital_energies: energies,
        iterations: pair.iterations,
        residual_history: pair.residual_history,
        monotone: pair.monotone,
    })
}

/// The diagonal approximation: `E` with its off-diagonal entries dropped.
/// `e` must already be expressed in the orbitals of `basis`.
pub fn hf_diagonal_approx(basis: &HfBasis, e: &DummyMatrix) -> Result<DummyMatrix> {
    if basis.orbitals.ncols() != e.modes() {
        return Err(Error::Dimension(format!(
            "basis has {} orbitals, pair matrix {} modes",
            basis.orbitals.ncols(),
            e.modes()
        )));
    }
    Ok(e.diagonal_only())
}

/// `(κ, λ, E_κλ)` with 1-based `κ < λ`, in canonical order.
pub fn pair_energies(e: &DummyMatrix) -> Vec<(usize, usize, f64)> {
    e.labels()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let idx = l.to_indices();
            (idx.as_slice()[0], idx.as_slice()[1], e.matrix()[(i, i)])
        })
        .collect()
}
