//! One- and two-particle model systems, the dummy two-particle Hamiltonian
//! `γ₀(K⊗1 + 1⊗K) + W` with `γ₀ = 1/(N-1)`, and its matrix `E` over
//! antisymmetric pair states.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::occupation::{binomial, enumerate_bzf, pair_index, pair_positions, OccupationSequence};
use crate::oracle;

/// Absolute symmetry tolerance scaled by the matrix magnitude.
fn check_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let tol = rel_tol * m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            let dev = (m[(i, j)] - m[(j, i)]).abs();
            if dev > tol || dev.is_nan() {
                return Err(Error::NotSymmetric { row: i, col: j, deviation: dev });
            }
        }
    }
    Ok(())
}

/// Fail unless `basisᵀ basis = 1` to within `tol`.
pub fn check_orthonormal(basis: &DMatrix<f64>, tol: f64) -> Result<()> {
    let dev = (basis.transpose() * basis - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
    if dev > tol || dev.is_nan() {
        return Err(Error::NotOrthonormal(dev));
    }
    Ok(())
}

/// The one-particle operator `K` (kinetic energy plus external field).
#[derive(Clone, Debug, PartialEq)]
pub struct OneBodyModel {
    k: DMatrix<f64>,
}

impl OneBodyModel {
    pub fn new(k: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&k, 1e-12)?;
        Ok(Self { k })
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }
}

/// The pair interaction `W` as a matrix over canonical antisymmetric pair
/// labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PairInteraction {
    modes: usize,
    w: DMatrix<f64>,
}

impl PairInteraction {
    pub fn from_pair_matrix(modes: usize, w: DMatrix<f64>) -> Result<Self> {
        let p = binomial(modes, 2);
        if w.nrows() != p || w.ncols() != p {
            return Err(Error::Dimension(format!(
                "pair matrix is {}x{}, expected {p}x{p} for {modes} modes",
                w.nrows(),
                w.ncols()
            )));
        }
        check_symmetric(&w, 1e-12)?;
        Ok(Self { modes, w })
    }

    pub fn zero(modes: usize) -> Self {
        let p = binomial(modes, 2);
        Self { modes, w: DMatrix::zeros(p, p) }
    }

    /// Project a product-basis kernel `V(a,b,c,e) = ⟨φ_a φ_b| W |φ_c φ_e⟩`
    /// onto antisymmetric pair states.
    pub fn from_tensor(modes: usize, v: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let p = binomial(modes, 2);
        let mut w = DMatrix::zeros(p, p);
        let pairs: Vec<(usize, usize)> = (0..modes).flat_map(|a| (a + 1..modes).map(move |b| (a, b))).collect();
        for (i, &(a, b)) in pairs.iter().enumerate() {
            for (j, &(c, e)) in pairs.iter().enumerate() {
                w[(i, j)] = 0.5 * (v(a, b, c, e) - v(a, b, e, c) - v(b, a, c, e) + v(b, a, e, c));
            }
        }
        Self::from_pair_matrix(modes, w)
    }

    /// A local interaction `w(x_a, x_b)` on grid points; diagonal in pair space.
    pub fn from_local_potential(modes: usize, w: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let p = binomial(modes, 2);
        let mut m = DMatrix::zeros(p, p);
        for a in 0..modes {
            for b in a + 1..modes {
                let i = pair_index(a, b, modes);
                m[(i, i)] = w(a, b);
            }
        }
        Self::from_pair_matrix(modes, m)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn pair_matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().all(|&x| x == 0.0)
    }

    /// Antisymmetrized element `⟨a∧b| W |c∧e⟩` for arbitrary index order,
    /// zero when either pair repeats an index.
    #[inline]
    pub fn antisymmetrized(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        if a == b || c == e {
            return 0.0;
        }
        let (row, s1) = if a < b { (pair_index(a, b, self.modes), 1.0) } else { (pair_index(b, a, self.modes), -1.0) };
        let (col, s2) = if c < e { (pair_index(c, e, self.modes), 1.0) } else { (pair_index(e, c, self.modes), -1.0) };
        s1 * s2 * self.w[(row, col)]
    }

    /// `W` restricted to the antisymmetric subspace, as a `d²×d²` operator
    /// with row index `a·d + b`.
    pub fn operator(&self) -> DMatrix<f64> {
        let d = self.modes;
        DMatrix::from_fn(d * d, d * d, |r, c| 0.5 * self.antisymmetrized(r / d, r % d, c / d, c % d))
    }
}

/// `K`, `W` and the particle count that fixes `γ₀ = 1/(N-1)`.
///
/// `one_body` is the physical `K`; [`DummyModel::scaled_one_body`] gives the
/// `γ₀ K` term that enters the dummy Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct DummyModel {
    pub one_body: OneBodyModel,
    pub interaction: PairInteraction,
    particles: usize,
}

impl DummyModel {
    pub fn new(one_body: OneBodyModel, interaction: PairInteraction, particles: usize) -> Result<Self> {
        if one_body.dim() != interaction.modes() {
            return Err(Error::Dimension(format!(
                "K has dimension {}, W has {} modes",
                one_body.dim(),
                interaction.modes()
            )));
        }
        if particles < 2 {
            return Err(Error::InvalidParameter(format!("particle count {particles} < 2")));
        }
        Ok(Self { one_body, interaction, particles })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn modes(&self) -> usize {
        self.one_body.dim()
    }

    pub fn gamma0(&self) -> f64 {
        1.0 / (self.particles - 1) as f64
    }

    pub fn scaled_one_body(&self) -> DMatrix<f64> {
        self.one_body.matrix() * self.gamma0()
    }
}

/// The real symmetric matrix `E(k, m)` over weight-2 labels in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct DummyMatrix {
    modes: usize,
    e: DMatrix<f64>,
    labels: Vec<OccupationSequence>,
}

impl DummyMatrix {
    pub fn from_matrix(modes: usize, e: DMatrix<f64>) -> Result<Self> {
        let p = binomial(modes, 2);
        if modes < 2 || e.nrows() != p || e.ncols() != p {
            return Err(Error::Dimension(format!(
                "dummy matrix is {}x{}, expected {p}x{p} for {modes} modes",
                e.nrows(),
                e.ncols()
            )));
        }
        check_symmetric(&e, 1e-12)?;
        let labels = enumerate_bzf(2, modes)?.collect();
        Ok(Self { modes, e, labels })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn labels(&self) -> &[OccupationSequence] {
        &self.labels
    }

    /// `E(k, m)` for weight-2 labels.
    pub fn value(&self, k: &OccupationSequence, m: &OccupationSequence) -> Result<f64> {
        let index = |s: &OccupationSequence| -> Result<usize> {
            if s.modes() != self.modes {
                return Err(Error::LengthMismatch { left: s.modes(), right: self.modes });
            }
            let (a, b) = pair_positions(s).ok_or(Error::WeightMismatch { left: s.weight(), right: 2 })?;
            Ok(pair_index(a, b, self.modes))
        };
        Ok(self.e[(index(k)?, index(m)?)])
    }

    /// `E` by pair bit words; both must have weight 2.
    #[inline]
    pub fn value_bits(&self, k: u64, m: u64) -> f64 {
        let idx = |s: u64| {
            let a = s.trailing_zeros() as usize;
            let b = 63 - s.leading_zeros() as usize;
            pair_index(a, b, self.modes)
        };
        self.e[(idx(k), idx(m))]
    }

    /// Only the diagonal of `E`.
    pub fn diagonal_only(&self) -> Self {
        Self { modes: self.modes, e: DMatrix::from_diagonal(&self.e.diagonal()), labels: self.labels.clone() }
    }
}

/// `⟨Ψ₂(ab), (K⊗1 + 1⊗K) Ψ₂(ce)⟩` over canonical pairs.
pub fn one_body_pair_matrix(k: &DMatrix<f64>) -> DMatrix<f64> {
    let d = k.nrows();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a + 1..d).map(move |b| (a, b))).collect();
    let delta = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
    DMatrix::from_fn(pairs.len(), pairs.len(), |i, j| {
        let (a, b) = pairs[i];
        let (c, e) = pairs[j];
        k[(a, c)] * delta(b, e) + k[(b, e)] * delta(a, c) - k[(a, e)] * delta(b, c) - k[(b, c)] * delta(a, e)
    })
}

/// Change of basis on pair space: column `k` holds the coordinates of the
/// pair state built from basis columns `(k₁, k₂)` in the original pair basis.
pub fn pair_transform(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let d = basis.nrows();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a + 1..d).map(move |b| (a, b))).collect();
    DMatrix::from_fn(pairs.len(), pairs.len(), |i, j| {
        let (c, e) = pairs[i];
        let (k1, k2) = pairs[j];
        basis[(c, k1)] * basis[(e, k2)] - basis[(c, k2)] * basis[(e, k1)]
    })
}

/// `E` for `γ(K⊗1 + 1⊗K) + W` in the orbital basis given by the columns of
/// `basis`.
pub fn build_dummy_hamiltonian_with_gamma(model: &DummyModel, basis: &DMatrix<f64>, gamma: f64) -> Result<DummyMatrix> {
    let d = model.modes();
    if basis.nrows() != d || basis.ncols() != d {
        return Err(Error::Dimension(format!("basis is {}x{}, model has {d} modes", basis.nrows(), basis.ncols())));
    }
    check_orthonormal(basis, 1e-10)?;
    let h = one_body_pair_matrix(model.one_body.matrix()) * gamma + model.interaction.pair_matrix();
    let t = pair_transform(basis);
    let mut e = t.transpose() * h * &t;
    // remove rounding asymmetry
    let et = e.transpose();
    e = (e + et) * 0.5;
    DummyMatrix::from_matrix(d, e)
}

/// `E` of the dummy Hamiltonian with `γ = γ₀`.
pub fn build_dummy_hamiltonian(model: &DummyModel, basis: &DMatrix<f64>) -> Result<DummyMatrix> {
    build_dummy_hamiltonian_with_gamma(model, basis, model.gamma0())
}

/// Outcome of comparing the direct `N`-particle Hamiltonian with the lift of
/// the dummy Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionReport {
    pub max_diff: f64,
    pub alternate_gamma: f64,
    pub alternate_diff: f64,
    pub tolerance: f64,
}

impl ReductionReport {
    /// Equality at `γ₀` within tolerance and a visible mismatch at the
    /// alternate `γ`.
    pub fn passed(&self) -> bool {
        self.max_diff <= self.tolerance && self.alternate_diff > self.tolerance
    }
}

/// Build `Σ K_j + ½ Σ W_jk` and the lift of the dummy Hamiltonian in tensor
/// space and compare them; also compare at `γ = 2γ₀`.
pub fn check_reduction(model: &DummyModel, tolerance: f64) -> Result<ReductionReport> {
    let d = model.modes();
    let n = model.particles();
    let id = DMatrix::identity(d, d);
    let direct = oracle::direct_hamiltonian(model.one_body.matrix(), &model.interaction.operator(), n)?;
    let diff_at = |gamma: f64| -> Result<f64> {
        let e = build_dummy_hamiltonian_with_gamma(model, &id, gamma)?;
        let lifted = oracle::lift(e.matrix(), d, n)?;
        Ok((&direct - lifted).amax())
    };
    let alternate_gamma = 2.0 * model.gamma0();
    Ok(ReductionReport {
        max_diff: diff_at(model.gamma0())?,
        alternate_gamma,
        alternate_diff: diff_at(alternate_gamma)?,
        tolerance,
    })
}

/// Model generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    DummyHelium1d,
    DummyLattice1d,
    Synthetic,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dummy_helium_1d" => Ok(Self::DummyHelium1d),
            "dummy_lattice_1d" => Ok(Self::DummyLattice1d),
            "synthetic" => Ok(Self::Synthetic),
            other => Err(Error::InvalidParameter(format!("unknown model kind {other:?}"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DummyHelium1d => "dummy_helium_1d",
            Self::DummyLattice1d => "dummy_lattice_1d",
            Self::Synthetic => "synthetic",
        })
    }
}

/// Parameters for [`generate_model`]. Grid models use `grid_spacing`, `mass`,
/// `charge` (`e₀`), `softening` (in grid units), `nuclear_charge` and
/// `lattice_spacing`; the synthetic model uses `seed`, `decay`, `coupling`
/// and `level_spacing`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub modes: usize,
    pub particles: usize,
    pub grid_spacing: f64,
    pub mass: f64,
    pub charge: f64,
    pub softening: f64,
    pub nuclear_charge: f64,
    pub lattice_spacing: f64,
    pub seed: u64,
    pub decay: f64,
    pub coupling: f64,
    pub level_spacing: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            modes: 8,
            particles: 3,
            grid_spacing: 1.0,
            mass: 1.0,
            charge: 1.0,
            softening: 1.0,
            nuclear_charge: 2.0,
            lattice_spacing: 2.0,
            seed: 1,
            decay: 0.5,
            coupling: 0.2,
            level_spacing: 1.0,
        }
    }
}

impl ModelParams {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.modes < 2 {
            return bad(format!("mode count {} < 2", self.modes));
        }
        if self.particles < 2 || self.particles > self.modes {
            return bad(format!("particle count {} outside 2..={}", self.particles, self.modes));
        }
        let positive = [("grid_spacing", self.grid_spacing), ("mass", self.mass), ("softening", self.softening)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let non_negative =
            [("decay", self.decay), ("coupling", self.coupling), ("lattice_spacing", self.lattice_spacing)];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !self.charge.is_finite() || !self.nuclear_charge.is_finite() || !self.level_spacing.is_finite() {
            return bad("non-finite model constant".into());
        }
        Ok(())
    }

    /// Grid coordinates `x_i = (i - (d-1)/2) h`.
    pub fn grid(&self) -> Vec<f64> {
        let centre = (self.modes as f64 - 1.0) / 2.0;
        (0..self.modes).map(|i| (i as f64 - centre) * self.grid_spacing).collect()
    }

    fn soft_coulomb(&self, r: f64) -> f64 {
        let a = self.softening * self.grid_spacing;
        1.0 / (r * r + a * a).sqrt()
    }

    fn kinetic(&self) -> DMatrix<f64> {
        let d = self.modes;
        let scale = 1.0 / (2.0 * self.mass * self.grid_spacing * self.grid_spacing);
        DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                2.0 * scale
            } else if i.abs_diff(j) == 1 {
                -scale
            } else {
                0.0
            }
        })
    }

    fn electron_repulsion(&self) -> Result<PairInteraction> {
        let x = self.grid();
        let e2 = self.charge * self.charge;
        PairInteraction::from_local_potential(self.modes, |a, b| e2 * self.soft_coulomb(x[a] - x[b]))
    }
}

/// Build one of the model systems.
///
/// `dummy_helium_1d`: kinetic energy by second differences with Dirichlet
/// ends, a soft-Coulomb nucleus of charge `nuclear_charge` at the origin and
/// soft-Coulomb repulsion between grid points.
/// `dummy_lattice_1d`: as above, but with `N` unit nuclei spaced
/// `lattice_spacing` apart around the origin.
/// `synthetic`: `K = diag(level_spacing · κ)` and a seeded random pair matrix
/// `W` with `|W(k,m)| ≤ coupling · decay^dist(k,m)` off the diagonal, where
/// `dist` is the summed index distance of the two pair labels.
pub fn generate_model(kind: ModelKind, params: &ModelParams) -> Result<DummyModel> {
    params.validate()?;
    let d = params.modes;
    let (k, w) = match kind {
        ModelKind::DummyHelium1d => {
            let x = params.grid();
            let e2 = params.charge * params.charge;
            let mut k = params.kinetic();
            for i in 0..d {
                k[(i, i)] -= params.nuclear_charge * e2 * params.soft_coulomb(x[i]);
            }
            (k, params.electron_repulsion()?)
        }
        ModelKind::DummyLattice1d => {
            let x = params.grid();
            let e2 = params.charge * params.charge;
            let n = params.particles;
            let sites: Vec<f64> =
                (0..n).map(|s| (s as f64 - (n as f64 - 1.0) / 2.0) * params.lattice_spacing).collect();
            let mut k = params.kinetic();
            for i in 0..d {
                k[(i, i)] -= sites.iter().map(|&y| e2 * params.soft_coulomb(x[i] - y)).sum::<f64>();
            }
            (k, params.electron_repulsion()?)
        }
        ModelKind::Synthetic => {
            let k = DMatrix::from_fn(d, d, |i, j| if i == j { params.level_spacing * (i + 1) as f64 } else { 0.0 });
            let labels: Vec<(usize, usize)> = (0..d).flat_map(|a| (a + 1..d).map(move |b| (a, b))).collect();
            let p = labels.len();
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let mut w = DMatrix::zeros(p, p);
            for i in 0..p {
                for j in i..p {
                    let u: f64 = rng.gen_range(-1.0..=1.0);
                    let bound = if i == j {
                        params.coupling
                    } else {
                        let dist = labels[i].0.abs_diff(labels[j].0) + labels[i].1.abs_diff(labels[j].1);
                        params.coupling * params.decay.powi(dist as i32)
                    };
                    w[(i, j)] = u * bound;
                    w[(j, i)] = u * bound;
                }
            }
            (k, PairInteraction::from_pair_matrix(d, w)?)
        }
    };
    DummyModel::new(OneBodyModel::new(k)?, w, params.particles)
}
