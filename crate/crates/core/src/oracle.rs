//! Brute-force tensor-space reference implementation.
//!
//! Everything here works on dense vectors of length `d^N` in the full product
//! space. Permutations act as index maps, signs come from explicit inversion
//! counts and matrix elements are plain inner products. Nothing is shared with
//! the combinatorial code paths in [`crate::signcoeff`] or [`crate::assemble`].
//!
//! Basis vectors are indexed with factor 1 as the most significant digit:
//! `φ_{κ1…κN}` lives at `Σ κ_j d^(N-j)` with 0-based `κ_j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::occupation::{binomial, enumerate_bzf, OccupationSequence};

/// Default bound on `d^N`.
pub const DEFAULT_GUARD: usize = 1_000_000;

/// Environment variable overriding [`DEFAULT_GUARD`].
pub const GUARD_ENV: &str = "FERMI_BLOCKS_GUARD";

/// The active tensor-space guard.
pub fn tensor_guard() -> usize {
    std::env::var(GUARD_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_GUARD)
}

/// The `N`-fold tensor product of a `d`-dimensional one-particle space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorSpace {
    d: usize,
    n: usize,
    dim: usize,
}

impl TensorSpace {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        Self::with_guard(d, n, tensor_guard())
    }

    pub fn with_guard(d: usize, n: usize, limit: usize) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!("tensor space {d}^{n}")));
        }
        let dim = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(d));
        match dim {
            Some(dim) if dim <= limit => Ok(Self { d, n, dim }),
            _ => {
                Err(Error::GuardExceeded { guard: "tensor dimension d^N", requested: dim.unwrap_or(usize::MAX), limit })
            }
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn factors(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Split a flat index into its per-factor mode indices.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for slot in out.iter_mut().rev() {
            *slot = index % self.d;
            index /= self.d;
        }
        out
    }

    pub fn flat(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &k| acc * self.d + k)
    }

    /// The product vector `φ_{κ1} ⊗ … ⊗ φ_{κN}` for orthonormal unit vectors.
    pub fn unit(&self, digits: &[usize]) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        v[self.flat(digits)] = 1.0;
        v
    }
}

/// A permutation of `{0, …, N-1}`, stored as its image list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || seen[i] {
                return Err(Error::InvalidParameter(format!("not a permutation: {images:?}")));
            }
            seen[i] = true;
        }
        Ok(Self(images))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        Self(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Self(inv)
    }

    /// `+1` for even, `-1` for odd, by counting inversions.
    pub fn sign(&self) -> f64 {
        let mut inversions = 0;
        for i in 0..self.0.len() {
            for j in i + 1..self.0.len() {
                if self.0[i] > self.0[j] {
                    inversions += 1;
                }
            }
        }
        if inversions % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// All `n!` permutations in lexicographic order.
    pub fn all(n: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (0..n).collect();
        loop {
            out.push(Self(current.clone()));
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
            current.swap(i, j);
            current[i + 1..].reverse();
        }
        out
    }
}

/// Particle exchange `U(P)`: moves the content of factor `j` to factor `P(j)`,
/// so `U(P) φ_{κ1…κN} = φ_{κ_{P⁻¹(1)}…κ_{P⁻¹(N)}}`.
pub fn permutation_op(space: &TensorSpace, p: &Permutation, v: &DVector<f64>) -> Result<DVector<f64>> {
    if p.len() != space.factors() || v.len() != space.dim() {
        return Err(Error::Dimension("permutation or vector does not match tensor space".into()));
    }
    let mut out = DVector::zeros(space.dim());
    let mut target = vec![0; space.factors()];
    for (i, &x) in v.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let digits = space.digits(i);
        for (j, &k) in digits.iter().enumerate() {
            target[p.apply(j)] = k;
        }
        out[space.flat(&target)] += x;
    }
    Ok(out)
}

/// `S⁻ v = (1/N!) Σ_P σ(P) U(P) v`.
pub fn antisymmetrize(space: &TensorSpace, v: &DVector<f64>) -> Result<DVector<f64>> {
    let perms = Permutation::all(space.factors());
    let scale = 1.0 / perms.len() as f64;
    let mut out = DVector::zeros(space.dim());
    for p in &perms {
        out += permutation_op(space, p, v)? * (p.sign() * scale);
    }
    Ok(out)
}

/// Orthonormal antisymmetric basis `Ψ⁻(n) = √(N!) S⁻ φ_ν` over weight-`N`
/// occupation sequences, in canonical order.
#[derive(Clone, Debug)]
pub struct AntisymBasis {
    pub space: TensorSpace,
    pub labels: Vec<OccupationSequence>,
    pub vectors: Vec<DVector<f64>>,
}

impl AntisymBasis {
    pub fn new(space: TensorSpace) -> Result<Self> {
        let labels: Vec<_> = enumerate_bzf(space.factors(), space.d())?.collect();
        let norm = (Permutation::all(space.factors()).len() as f64).sqrt();
        let mut vectors = Vec::with_capacity(labels.len());
        for label in &labels {
            let digits: Vec<usize> = label.positions().collect();
            vectors.push(antisymmetrize(&space, &space.unit(&digits))? * norm);
        }
        Ok(Self { space, labels, vectors })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.vectors[i].dot(&self.vectors[j]))
    }

    /// Matrix `⟨Ψ(a), op Ψ(b)⟩` for an operator given as a vector map.
    pub fn project<F>(&self, mut op: F) -> Result<DMatrix<f64>>
    where
        F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let image = op(&self.vectors[j])?;
            for i in 0..n {
                m[(i, j)] = self.vectors[i].dot(&image);
            }
        }
        Ok(m)
    }
}

/// Apply a two-factor operator (d²×d², row index `a·d + b`) to factors `j`, `k`.
pub fn apply_two_factor(space: &TensorSpace, op: &DMatrix<f64>, j: usize, k: usize, v: &DVector<f64>) -> DVector<f64> {
    let d = space.d();
    let mut out = DVector::zeros(space.dim());
    for (i, &x) in v.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let mut digits = space.digits(i);
        let col = digits[j] * d + digits[k];
        for a in 0..d {
            for b in 0..d {
                let w = op[(a * d + b, col)];
                if w != 0.0 {
                    digits[j] = a;
                    digits[k] = b;
                    out[space.flat(&digits)] += w * x;
                }
            }
        }
    }
    out
}

/// Apply a one-factor operator to factor `j`.
pub fn apply_one_factor(space: &TensorSpace, op: &DMatrix<f64>, j: usize, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(space.dim());
    for (i, &x) in v.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let mut digits = space.digits(i);
        let col = digits[j];
        for a in 0..space.d() {
            let w = op[(a, col)];
            if w != 0.0 {
                digits[j] = a;
                out[space.flat(&digits)] += w * x;
            }
        }
    }
    out
}

/// Two-particle antisymmetric vectors `(ψ_a⊗ψ_b − ψ_b⊗ψ_a)/√2` for all pairs
/// `a < b` of the columns of `orbitals`, in canonical pair order.
pub fn pair_states(orbitals: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let d = orbitals.nrows();
    let cols = orbitals.ncols();
    let mut out = Vec::new();
    for a in 0..cols {
        for b in a + 1..cols {
            let mut v = DVector::zeros(d * d);
            for x in 0..d {
                for y in 0..d {
                    v[x * d + y] =
                        (orbitals[(x, a)] * orbitals[(y, b)] - orbitals[(x, b)] * orbitals[(y, a)]) / 2f64.sqrt();
                }
            }
            out.push(v);
        }
    }
    out
}

/// The operator `Σ E(k,m) |Ψ₂(k)⟩⟨Ψ₂(m)|` on the full `d²` space.
pub fn pair_operator(pair_matrix: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let p = binomial(d, 2);
    if pair_matrix.nrows() != p || pair_matrix.ncols() != p {
        return Err(Error::Dimension(format!("pair matrix must be {p}x{p} for d = {d}")));
    }
    let states = pair_states(&DMatrix::identity(d, d));
    let mut op = DMatrix::zeros(d * d, d * d);
    for (k, sk) in states.iter().enumerate() {
        for (m, sm) in states.iter().enumerate() {
            let e = pair_matrix[(k, m)];
            if e != 0.0 {
                op += sk * sm.transpose() * e;
            }
        }
    }
    Ok(op)
}

/// `Ω⁻_N(A₂) = C(N,2) S⁻ (A₂ ⊗ 1 ⊗ … ⊗ 1) S⁻` in the antisymmetric basis,
/// with `A₂` given by its matrix over canonical pair labels.
pub fn lift(pair_matrix: &DMatrix<f64>, d: usize, n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("lift needs N >= 2, got {n}")));
    }
    let space = TensorSpace::new(d, n)?;
    let op = pair_operator(pair_matrix, d)?;
    let basis = AntisymBasis::new(space)?;
    let factor = binomial(n, 2) as f64;
    basis.project(|v| {
        let sv = antisymmetrize(&space, v)?;
        let av = apply_two_factor(&space, &op, 0, 1, &sv);
        Ok(antisymmetrize(&space, &av)? * factor)
    })
}

/// `Σ_j K_j + ½ Σ_{j≠k} W_jk` projected onto the antisymmetric basis.
/// `two_body` is the `d²×d²` operator of one particle pair.
pub fn direct_hamiltonian(one_body: &DMatrix<f64>, two_body: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    let d = one_body.nrows();
    if one_body.ncols() != d || two_body.nrows() != d * d || two_body.ncols() != d * d {
        return Err(Error::Dimension("one- and two-body operators disagree on d".into()));
    }
    let space = TensorSpace::new(d, n)?;
    let basis = AntisymBasis::new(space)?;
    basis.project(|v| {
        let mut out = DVector::zeros(space.dim());
        for j in 0..n {
            out += apply_one_factor(&space, one_body, j, v);
        }
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    out += apply_two_factor(&space, two_body, j, k, v) * 0.5;
                }
            }
        }
        Ok(out)
    })
}

/// `⟨Ψ₂(k), op Ψ₂(m)⟩` with pair states built from the columns of `orbitals`.
pub fn two_particle_matrix(op: &DMatrix<f64>, orbitals: &DMatrix<f64>) -> DMatrix<f64> {
    let states = pair_states(orbitals);
    let p = states.len();
    let images: Vec<DVector<f64>> = states.iter().map(|s| op * s).collect();
    DMatrix::from_fn(p, p, |i, j| states[i].dot(&images[j]))
}

/// `γ(K⊗1 + 1⊗K) + W` as a `d²×d²` matrix.
pub fn dummy_operator(one_body: &DMatrix<f64>, two_body: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let d = one_body.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    (one_body.kronecker(&id) + id.kronecker(one_body)) * gamma + two_body
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    #[test]
    fn permutation_group_laws() {
        let space = TensorSpace::new(3, 3).unwrap();
        let perms = Permutation::all(3);
        assert_eq!(perms.len(), 6);
        for p in &perms {
            for q in &perms {
                let pq = p.compose(q);
                assert_eq!(pq.sign(), p.sign() * q.sign());
                for i in 0..space.dim() {
                    let e = space.unit(&space.digits(i));
                    let lhs = permutation_op(&space, &pq, &e).unwrap();
                    let rhs = permutation_op(&space, p, &permutation_op(&space, q, &e).unwrap()).unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
            let e = space.unit(&[0, 1, 2]);
            let back = permutation_op(&space, &p.inverse(), &permutation_op(&space, p, &e).unwrap()).unwrap();
            assert_eq!(back, e);
        }
        let id = Permutation::identity(3);
        let e = space.unit(&[2, 0, 1]);
        assert_eq!(permutation_op(&space, &id, &e).unwrap(), e);
    }

    #[test]
    fn exchange_moves_factor_contents() {
        let space = TensorSpace::new(3, 3).unwrap();
        // P: 0 -> 1, 1 -> 2, 2 -> 0
        let p = Permutation::new(vec![1, 2, 0]).unwrap();
        let out = permutation_op(&space, &p, &space.unit(&[0, 1, 2])).unwrap();
        assert_eq!(out, space.unit(&[2, 0, 1]));
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn antisymmetrizer_is_projection_with_binomial_rank() {
        for (d, n) in [(2, 2), (3, 2), (4, 3), (3, 3)] {
            let space = TensorSpace::new(d, n).unwrap();
            let mut trace = 0.0;
            for i in 0..space.dim() {
                let e = space.unit(&space.digits(i));
                let s = antisymmetrize(&space, &e).unwrap();
                let ss = antisymmetrize(&space, &s).unwrap();
                assert!((&s - &ss).amax() < 1e-12);
                trace += s[i];
            }
            assert!((trace - binomial(d, n) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn antisymmetrizer_absorbs_exchanges() {
        let space = TensorSpace::new(3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = DVector::from_fn(space.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let sv = antisymmetrize(&space, &v).unwrap();
        for p in Permutation::all(3) {
            let lhs = antisymmetrize(&space, &permutation_op(&space, &p, &v).unwrap()).unwrap();
            assert!((lhs - &sv * p.sign()).amax() < 1e-12);
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let basis = AntisymBasis::new(TensorSpace::new(5, 3).unwrap()).unwrap();
        assert_eq!(basis.len(), 10);
        let g = basis.gram();
        assert!((g - DMatrix::identity(10, 10)).amax() < 1e-12);
        let single = AntisymBasis::new(TensorSpace::new(2, 2).unwrap()).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn lift_identity_counts_pairs() {
        for (d, n) in [(4, 2), (5, 3), (5, 4)] {
            let p = binomial(d, 2);
            let l = lift(&DMatrix::identity(p, p), d, n).unwrap();
            let c = binomial(d, n);
            assert!((l - DMatrix::identity(c, c) * binomial(n, 2) as f64).amax() < 1e-12);
        }
    }

    #[test]
    fn lift_at_two_particles_is_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_symmetric(10, &mut rng);
        let l = lift(&e, 5, 2).unwrap();
        assert!((l - &e).amax() < 1e-12);
    }

    #[test]
    fn lift_is_idempotent_on_pair_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = random_symmetric(6, &mut rng);
        let once = lift(&e, 4, 2).unwrap();
        let twice = lift(&once, 4, 2).unwrap();
        assert!((once - twice).amax() < 1e-12);
    }

    #[test]
    fn lift_norm_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let e = random_symmetric(10, &mut rng);
            let l = lift(&e, 5, 3).unwrap();
            let norm = |m: DMatrix<f64>| m.symmetric_eigenvalues().amax();
            assert!(norm(l) <= 3.0 * norm(e) + 1e-12);
        }
    }

    #[test]
    fn direct_hamiltonian_special_cases() {
        // non-interacting, diagonal K: N-subset sums
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -1.0, 2.0, 3.5]));
        let h = direct_hamiltonian(&k, &DMatrix::zeros(16, 16), 3).unwrap();
        let labels: Vec<_> = enumerate_bzf(3, 4).unwrap().collect();
        for (i, l) in labels.iter().enumerate() {
            let expect: f64 = l.positions().map(|p| k[(p, p)]).sum();
            assert!((h[(i, i)] - expect).abs() < 1e-12);
        }
        assert!((h.clone() - DMatrix::from_diagonal(&h.diagonal())).amax() < 1e-12);

        // two particles: K⊗1 + 1⊗K + W on the antisymmetric space
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = random_symmetric(4, &mut rng);
        let w = pair_operator(&random_symmetric(6, &mut rng), 4).unwrap();
        let h = direct_hamiltonian(&k, &w, 2).unwrap();
        let expect = two_particle_matrix(&dummy_operator(&k, &w, 1.0), &DMatrix::identity(4, 4));
        assert!(max_abs(&(h - expect)) < 1e-12);
    }

    #[test]
    fn guard_is_enforced() {
        assert!(matches!(TensorSpace::with_guard(10, 4, 9_999), Err(Error::GuardExceeded { requested: 10_000, .. })));
        assert!(TensorSpace::with_guard(10, 4, 10_000).is_ok());
    }
}
