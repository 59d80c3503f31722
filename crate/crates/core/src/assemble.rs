//! `N`-particle matrix elements `⟨n'| H |n⟩` from a dummy pair matrix.
//!
//! Every element reduces to `𝓔(n, n' - n)`: a sum of pair-matrix entries
//! weighted by sign coefficients. Only differences in D0, D1 and D2 couple;
//! anything else is structurally zero. Matrices are real, so the conjugation
//! in the symmetry law `𝓔(n', n - n') = conj 𝓔(n, n' - n)` is the identity.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::occupation::{
    binomial, classify_difference, enumerate_bzf, BitPositions, DifferenceSequence, OccupationSequence,
};
use crate::signcoeff::coefficient_bits;
use crate::truncate::TruncatedDummyMatrix;
use crate::twobody::DummyMatrix;

/// Default cap on the dense dimension `C(R, N)`.
pub const DEFAULT_DENSE_GUARD: usize = 100_000;

/// Anything that supplies pair-matrix entries `E(k, m)` by weight-2 bit words.
pub trait PairSource: Sync {
    fn modes(&self) -> usize;

    /// `E(k, m)`; both words have exactly two bits set.
    fn pair_value(&self, k: u64, m: u64) -> f64;
}

impl PairSource for DummyMatrix {
    fn modes(&self) -> usize {
        DummyMatrix::modes(self)
    }

    fn pair_value(&self, k: u64, m: u64) -> f64 {
        self.value_bits(k, m)
    }
}

impl PairSource for TruncatedDummyMatrix {
    fn modes(&self) -> usize {
        self.base().modes()
    }

    fn pair_value(&self, k: u64, m: u64) -> f64 {
        self.value_bits(k, m)
    }
}

/// `𝓔(n, d)` on bit words; `plus`/`minus` are the +1/-1 masks of `d`, which
/// must lie in D0, D1 or D2 with `n + d` a valid sequence.
pub(crate) fn script_e_bits<S: PairSource + ?Sized>(n: u64, plus: u64, minus: u64, source: &S) -> f64 {
    match plus.count_ones() {
        0 => {
            let mut sum = 0.0;
            let mut outer = n;
            while outer != 0 {
                let a = outer & outer.wrapping_neg();
                outer &= outer - 1;
                for b in BitPositions(outer) {
                    let pair = a | 1 << b;
                    sum += source.pair_value(pair, pair);
                }
            }
            sum
        }
        1 => {
            let mut sum = 0.0;
            for alpha in BitPositions(n & !minus) {
                let bit = 1u64 << alpha;
                let m = bit | minus;
                let k = bit | plus;
                let c = coefficient_bits(n, k, m);
                sum += c as f64 * source.pair_value(k, m);
            }
            sum
        }
        _ => coefficient_bits(n, plus, minus) as f64 * source.pair_value(plus, minus),
    }
}

/// `𝓔(n, d)` for a difference of class D0, D1 or D2.
pub fn script_e<S: PairSource + ?Sized>(n: &OccupationSequence, d: &DifferenceSequence, source: &S) -> Result<f64> {
    if n.modes() != source.modes() {
        return Err(Error::LengthMismatch { left: n.modes(), right: source.modes() });
    }
    if d.class().is_none() {
        return Err(Error::InvalidParameter(format!("{d:?} couples more than two modes")));
    }
    if n.try_apply(d)?.is_none() {
        return Err(Error::NotBzf);
    }
    Ok(script_e_bits(n.bits(), d.plus(), d.minus(), source))
}

/// Element on bit words of equal weight; zero outside D0 ∪ D1 ∪ D2.
#[inline]
pub(crate) fn element_bits<S: PairSource + ?Sized>(n_prime: u64, n: u64, source: &S) -> f64 {
    let plus = n_prime & !n;
    if plus.count_ones() > 2 {
        return 0.0;
    }
    script_e_bits(n, plus, n & !n_prime, source)
}

/// `⟨n'| H |n⟩`.
pub fn matrix_element<S: PairSource + ?Sized>(
    n_prime: &OccupationSequence,
    n: &OccupationSequence,
    source: &S,
) -> Result<f64> {
    if n.modes() != source.modes() {
        return Err(Error::LengthMismatch { left: n.modes(), right: source.modes() });
    }
    match classify_difference(n_prime, n)? {
        None => Ok(0.0),
        Some(d) => Ok(script_e_bits(n.bits(), d.plus(), d.minus(), source)),
    }
}

/// Options for [`full_matrix_with`].
#[derive(Clone, Copy, Debug)]
pub struct DenseOptions {
    /// Largest admitted `C(R, N)`.
    pub guard: usize,
    /// Compute both triangles and fail on any asymmetry above `1e-12`.
    pub check_symmetry: bool,
}

impl Default for DenseOptions {
    fn default() -> Self {
        Self { guard: DEFAULT_DENSE_GUARD, check_symmetry: false }
    }
}

/// The dense `C(R,N)×C(R,N)` matrix in canonical order.
pub fn full_matrix<S: PairSource + ?Sized>(source: &S, n: usize) -> Result<DMatrix<f64>> {
    full_matrix_with(source, n, DenseOptions::default())
}

pub fn full_matrix_with<S: PairSource + ?Sized>(source: &S, n: usize, options: DenseOptions) -> Result<DMatrix<f64>> {
    let r = source.modes();
    if n < 2 || n > r {
        return Err(Error::InvalidWeight { weight: n, modes: r });
    }
    let dim = binomial(r, n);
    if dim > options.guard {
        return Err(Error::GuardExceeded { guard: "dense dimension C(R,N)", requested: dim, limit: options.guard });
    }
    let labels: Vec<u64> = enumerate_bzf(n, r)?.map(|s| s.bits()).collect();
    let start = |i: usize| if options.check_symmetry { 0 } else { i };
    let rows: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|i| (start(i)..dim).map(|j| element_bits(labels[i], labels[j], source)).collect())
        .collect();

    let mut m = DMatrix::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            m[(i, start(i) + offset)] = v;
        }
    }
    if options.check_symmetry {
        for i in 0..dim {
            for j in i + 1..dim {
                let dev = (m[(i, j)] - m[(j, i)]).abs();
                if dev > 1e-12 {
                    return Err(Error::NotSymmetric { row: i, col: j, deviation: dev });
                }
            }
        }
    } else {
        for i in 0..dim {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupation::{enumerate_bzf, DifferenceSequence};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn random_e(r: usize, seed: u64) -> DummyMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = binomial(r, 2);
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        DummyMatrix::from_matrix(r, (&a + a.transpose()) * 0.5).unwrap()
    }

    struct Counting<'a> {
        inner: &'a DummyMatrix,
        lookups: AtomicUsize,
    }

    impl PairSource for Counting<'_> {
        fn modes(&self) -> usize {
            self.inner.modes()
        }

        fn pair_value(&self, k: u64, m: u64) -> f64 {
            self.lookups.fetch_add(1, Ordering::Relaxed);
            self.inner.value_bits(k, m)
        }
    }

    fn bzf(s: &str) -> OccupationSequence {
        s.parse().unwrap()
    }

    #[test]
    fn term_counts() {
        let e = random_e(6, 1);
        let counter = Counting { inner: &e, lookups: AtomicUsize::new(0) };
        let n = bzf("110100");
        let zero = DifferenceSequence::between(&bzf("110000"), &bzf("110000")).unwrap();
        script_e(&n, &zero, &counter).unwrap();
        assert_eq!(counter.lookups.swap(0, Ordering::Relaxed), 3);

        let d1 = DifferenceSequence::transposition(2, 3, 6).unwrap();
        script_e(&n, &d1, &counter).unwrap();
        assert_eq!(counter.lookups.swap(0, Ordering::Relaxed), 2);

        // three moved particles: no lookup at all
        let v = matrix_element(&bzf("000111"), &bzf("111000"), &counter).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(counter.lookups.load(Ordering::Relaxed), 0);
    }

    #[test]
    fn no_lookup_outside_coupling_classes() {
        let e = random_e(7, 2);
        let counter = Counting { inner: &e, lookups: AtomicUsize::new(0) };
        let all: Vec<_> = enumerate_bzf(4, 7).unwrap().collect();
        for a in &all {
            for b in &all {
                if classify_difference(a, b).unwrap().is_none() {
                    assert_eq!(matrix_element(a, b, &counter).unwrap(), 0.0);
                }
            }
        }
        assert_eq!(counter.lookups.load(Ordering::Relaxed), 0);
    }

    #[test]
    fn two_particles_reproduce_e() {
        let e = random_e(5, 3);
        let h = full_matrix(&e, 2).unwrap();
        assert_eq!(&h, e.matrix());
        let n = bzf("01100");
        let zero = DifferenceSequence::between(&n, &n).unwrap();
        assert_eq!(script_e(&n, &zero, &e).unwrap(), e.value(&n, &n).unwrap());
    }

    #[test]
    fn diagonal_source_gives_diagonal_result() {
        let e = random_e(7, 4).diagonal_only();
        let h = full_matrix(&e, 3).unwrap();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                if i != j {
                    assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn fully_occupied_is_sum_of_diagonal() {
        let e = random_e(5, 5);
        let h = full_matrix(&e, 5).unwrap();
        assert_eq!(h.nrows(), 1);
        assert!((h[(0, 0)] - e.matrix().trace()).abs() < 1e-12);
    }

    #[test]
    fn trace_identity() {
        for (r, n) in [(6, 3), (7, 4), (8, 2)] {
            let e = random_e(r, 6);
            let h = full_matrix(&e, n).unwrap();
            let expect = binomial(r - 2, n - 2) as f64 * e.matrix().trace();
            assert!((h.trace() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn both_triangles_agree() {
        let e = random_e(7, 7);
        let opts = DenseOptions { check_symmetry: true, ..Default::default() };
        let checked = full_matrix_with(&e, 3, opts).unwrap();
        assert_eq!(checked, full_matrix(&e, 3).unwrap());
    }

    #[test]
    fn guard_and_precondition_errors() {
        let e = random_e(8, 8);
        let opts = DenseOptions { guard: 10, ..Default::default() };
        assert!(matches!(full_matrix_with(&e, 3, opts), Err(Error::GuardExceeded { requested: 56, .. })));
        let n = bzf("11000000");
        let d = DifferenceSequence::transposition(2, 5, 8).unwrap();
        assert!(matches!(script_e(&n, &d, &e), Err(Error::NotBzf)));
    }
}
