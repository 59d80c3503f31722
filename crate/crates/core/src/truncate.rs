//! Truncation of the dummy matrix at a mode index `alpha_bar`.
//!
//! `Ê(k, m)` keeps every diagonal entry and every off-diagonal entry whose
//! labels both lie within modes `1..=alpha_bar`; all other entries become
//! zero. The discarded part `D = E - Ê` controls the error of the lifted
//! operator through `‖H - Ĥ‖ ≤ C(N,2)·‖D‖`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::occupation::binomial;
use crate::spectra;
use crate::twobody::DummyMatrix;

/// `E` together with its truncation `Ê` at `alpha_bar`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedDummyMatrix {
    base: DummyMatrix,
    alpha_bar: usize,
    ehat: DMatrix<f64>,
}

fn check_alpha(alpha_bar: usize, modes: usize) -> Result<()> {
    if alpha_bar < 2 || alpha_bar > modes {
        return Err(Error::InvalidParameter(format!("alpha_bar {alpha_bar} outside 2..={modes}")));
    }
    Ok(())
}

/// Whether entry `(i, j)` of the pair matrix survives truncation.
fn kept(base: &DummyMatrix, i: usize, j: usize, alpha_bar: usize) -> bool {
    let labels = base.labels();
    i == j || (labels[i].max_index().unwrap() <= alpha_bar && labels[j].max_index().unwrap() <= alpha_bar)
}

/// Build `Ê` from `E`.
pub fn truncate(e: &DummyMatrix, alpha_bar: usize) -> Result<TruncatedDummyMatrix> {
    check_alpha(alpha_bar, e.modes())?;
    let p = e.dim();
    let ehat = DMatrix::from_fn(p, p, |i, j| if kept(e, i, j, alpha_bar) { e.matrix()[(i, j)] } else { 0.0 });
    Ok(TruncatedDummyMatrix { base: e.clone(), alpha_bar, ehat })
}

impl TruncatedDummyMatrix {
    pub fn base(&self) -> &DummyMatrix {
        &self.base
    }

    pub fn alpha_bar(&self) -> usize {
        self.alpha_bar
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.ehat
    }

    /// `Ê` as a plain dummy matrix.
    pub fn to_dummy(&self) -> Result<DummyMatrix> {
        DummyMatrix::from_matrix(self.base.modes(), self.ehat.clone())
    }

    /// `Ê(k, m)` by pair bit words.
    #[inline]
    pub fn value_bits(&self, k: u64, m: u64) -> f64 {
        let limit = self.alpha_bar;
        let top = |s: u64| 64 - s.leading_zeros() as usize;
        if k != m && (top(k) > limit || top(m) > limit) {
            return 0.0;
        }
        self.base.value_bits(k, m)
    }

    /// Order of the retained off-diagonal window, `C(alpha_bar, 2)`.
    pub fn window_order(&self) -> usize {
        binomial(self.alpha_bar, 2)
    }

    /// `D = E - Ê`.
    pub fn difference(&self) -> DMatrix<f64> {
        self.base.matrix() - &self.ehat
    }
}

/// Spectral norm of `D(alpha) = E - Ê(alpha)`. `D` is symmetric, so this is
/// its largest absolute eigenvalue.
pub fn delta_norm(e: &DummyMatrix, alpha_bar: usize) -> Result<f64> {
    let t = truncate(e, alpha_bar)?;
    let d = t.difference();
    if d.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let eig = spectra::eigensolve(&d, 1e-10 * d.amax().max(1.0))?;
    Ok(eig.eigenvalues.iter().fold(0.0f64, |acc, x| acc.max(x.abs())))
}

/// `C(N,2)·δ`.
pub fn lift_error_bound(particles: usize, delta: f64) -> Result<f64> {
    if particles < 2 {
        return Err(Error::InvalidParameter(format!("particle count {particles} < 2")));
    }
    Ok(binomial(particles, 2) as f64 * delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupation::pair_positions;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_e(r: usize, seed: u64) -> DummyMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = binomial(r, 2);
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        DummyMatrix::from_matrix(r, (&a + a.transpose()) * 0.5).unwrap()
    }

    #[test]
    fn full_alpha_keeps_everything() {
        let e = random_e(6, 1);
        let t = truncate(&e, 6).unwrap();
        assert_eq!(t.matrix(), e.matrix());
        assert_eq!(delta_norm(&e, 6).unwrap(), 0.0);
    }

    #[test]
    fn alpha_two_keeps_diagonal_only() {
        for r in [3, 5, 7] {
            let e = random_e(r, 2);
            let t = truncate(&e, 2).unwrap();
            assert_eq!(t.matrix(), e.diagonal_only().matrix());
        }
    }

    #[test]
    fn zero_pattern_matches_predicate() {
        for r in 2..=8 {
            let e = random_e(r, r as u64);
            for alpha in 2..=r {
                let t = truncate(&e, alpha).unwrap();
                for (i, k) in e.labels().iter().enumerate() {
                    for (j, m) in e.labels().iter().enumerate() {
                        let (_, kb) = pair_positions(k).unwrap();
                        let (_, mb) = pair_positions(m).unwrap();
                        let zeroed = i != j && (kb + 1 > alpha || mb + 1 > alpha);
                        let expect = if zeroed { 0.0 } else { e.matrix()[(i, j)] };
                        assert_eq!(t.matrix()[(i, j)], expect);
                        assert_eq!(t.value_bits(k.bits(), m.bits()), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn delta_vanishes_for_diagonal_e() {
        let e = random_e(6, 3).diagonal_only();
        for alpha in 2..=6 {
            assert_eq!(delta_norm(&e, alpha).unwrap(), 0.0);
        }
    }

    #[test]
    fn delta_matches_singular_values() {
        let e = random_e(6, 4);
        for alpha in 2..=6 {
            let d = truncate(&e, alpha).unwrap().difference();
            let sv = d.clone().singular_values().max();
            assert!((delta_norm(&e, alpha).unwrap() - sv).abs() < 1e-10);
        }
    }

    #[test]
    fn bounds() {
        assert_eq!(lift_error_bound(2, 0.5).unwrap(), 0.5);
        assert!((lift_error_bound(4, 0.1).unwrap() - 0.6).abs() < 1e-15);
        assert!(lift_error_bound(1, 0.1).is_err());
        assert!(truncate(&random_e(4, 5), 1).is_err());
        assert!(truncate(&random_e(4, 5), 5).is_err());
    }
}
