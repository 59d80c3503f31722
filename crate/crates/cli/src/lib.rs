//! Subcommand implementations for the `fermi-blocks` binary.
//!
//! Every command reads a [`RunConfig`], writes its artifacts into the output
//! directory and prints a short report. Failures map onto stable exit codes
//! through [`CliError::exit_code`].

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fermi_blocks::assemble::{full_matrix_with, matrix_element, DenseOptions};
use fermi_blocks::blocks::{self, build_blocks, partition, stats, structural_candidates, SectorKey};
use fermi_blocks::hartree_fock::{hartree_fock, pair_energies, HfBasis, HfOptions};
use fermi_blocks::io;
use fermi_blocks::occupation::enumerate_bzf;
use fermi_blocks::spectra::{self, eigensolve, solve_blocks, sweep, sweep_csv};
use fermi_blocks::truncate::{delta_norm, truncate};
use fermi_blocks::twobody::{build_dummy_hamiltonian, check_reduction, generate_model, ModelKind, ModelParams};
use fermi_blocks::{
    binomial, coefficient, oracle, parity_oracle, DummyMatrix, DummyModel, Error, OccupationSequence, OneBodyModel,
    PairInteraction,
};

/// Errors with their process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("SCF failure: {0}")]
    Scf(String),
    #[error("guard exceeded: {0}")]
    Guard(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Verify(_) => 1,
            Self::Config(_) => 2,
            Self::Io(_) => 3,
            Self::Scf(_) => 4,
            Self::Guard(_) => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Parse { .. } => Self::Io(e.to_string()),
            Error::ScfNotConverged { .. } => Self::Scf(e.to_string()),
            Error::GuardExceeded { .. } => Self::Guard(e.to_string()),
            Error::Block { ref source, .. } if matches!(**source, Error::GuardExceeded { .. }) => {
                Self::Guard(e.to_string())
            }
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Orbital basis for the dummy matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisChoice {
    HartreeFock,
    Model,
}

/// Parameters of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub modes: usize,
    pub particles: usize,
    pub alpha_bar: usize,
    pub model: ModelKind,
    pub params: ModelParams,
    pub hf: HfOptions,
    pub solver_tol: f64,
    pub basis: BasisChoice,
    pub sweep: bool,
    pub levels: usize,
    pub block_guard: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            modes: 8,
            particles: 3,
            alpha_bar: 8,
            model: ModelKind::Synthetic,
            params: ModelParams::default(),
            hf: HfOptions::default(),
            solver_tol: 1e-9,
            basis: BasisChoice::Model,
            sweep: false,
            levels: 10,
            block_guard: fermi_blocks::assemble::DEFAULT_DENSE_GUARD,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> CliResult<T> {
    value.parse().map_err(|_| CliError::Config(format!("line {line}: bad value {value:?} for {key}")))
}

impl RunConfig {
    /// Parse a flat `key = value` file; `#` starts a comment.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {line_no}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            let p = &mut c.params;
            match key {
                "modes" => c.modes = parse_value(key, value, line_no)?,
                "particles" => c.particles = parse_value(key, value, line_no)?,
                "alpha_bar" => c.alpha_bar = parse_value(key, value, line_no)?,
                "model" => {
                    c.model = value
                        .parse()
                        .map_err(|_| CliError::Config(format!("line {line_no}: unknown model {value:?}")))?
                }
                "grid_spacing" => p.grid_spacing = parse_value(key, value, line_no)?,
                "mass" => p.mass = parse_value(key, value, line_no)?,
                "charge" => p.charge = parse_value(key, value, line_no)?,
                "softening" => p.softening = parse_value(key, value, line_no)?,
                "nuclear_charge" => p.nuclear_charge = parse_value(key, value, line_no)?,
                "lattice_spacing" => p.lattice_spacing = parse_value(key, value, line_no)?,
                "decay" => p.decay = parse_value(key, value, line_no)?,
                "coupling" => p.coupling = parse_value(key, value, line_no)?,
                "level_spacing" => p.level_spacing = parse_value(key, value, line_no)?,
                "seed" => p.seed = parse_value(key, value, line_no)?,
                "hf_tol" => c.hf.tolerance = parse_value(key, value, line_no)?,
                "hf_max_iter" => c.hf.max_iterations = parse_value(key, value, line_no)?,
                "hf_mixing" => c.hf.mixing = parse_value(key, value, line_no)?,
                "solver_tol" => c.solver_tol = parse_value(key, value, line_no)?,
                "basis" => {
                    c.basis = match value {
                        "hf" => BasisChoice::HartreeFock,
                        "model" => BasisChoice::Model,
                        _ => return Err(CliError::Config(format!("line {line_no}: basis must be hf or model"))),
                    }
                }
                "sweep" => c.sweep = parse_value(key, value, line_no)?,
                "levels" => c.levels = parse_value(key, value, line_no)?,
                "block_guard" => c.block_guard = parse_value(key, value, line_no)?,
                "out" => c.out = PathBuf::from(value),
                _ => return Err(CliError::Config(format!("line {line_no}: unknown key {key:?}"))),
            }
        }
        c.params.modes = c.modes;
        c.params.particles = c.particles;
        Ok(c)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.modes < 2 || self.modes > 64 {
            return bad(format!("modes = {} outside 2..=64", self.modes));
        }
        if self.particles < 2 || self.particles > self.modes {
            return bad(format!("particles = {} outside 2..={}", self.particles, self.modes));
        }
        if self.alpha_bar < 2 || self.alpha_bar > self.modes {
            return bad(format!("alpha_bar = {} outside 2..={}", self.alpha_bar, self.modes));
        }
        for (name, v) in [("hf_tol", self.hf.tolerance), ("solver_tol", self.solver_tol)] {
            if v.is_nan() || v <= 0.0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.hf.mixing.is_nan() || self.hf.mixing <= 0.0 || self.hf.mixing > 1.0 {
            return bad("hf_mixing must lie in (0, 1]".into());
        }
        if self.hf.max_iterations == 0 {
            return bad("hf_max_iter must be positive".into());
        }
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

const K_FILE: &str = "K.mat";
const K_DUMMY_FILE: &str = "K_dummy.mat";
const W_FILE: &str = "W.pairmat";
const HF_ORBITALS_FILE: &str = "hf_orbitals.mat";
const HF_ENERGIES_FILE: &str = "hf_energies.txt";

fn ensure_out(config: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(&config.out).map_err(|e| CliError::Io(format!("{}: {e}", config.out.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn io_context(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| match e {
        Error::Io(inner) => CliError::Io(format!("{}: {inner}", path.display())),
        Error::Parse { .. } => CliError::Io(format!("{}: {e}", path.display())),
        other => CliError::from(other),
    }
}

/// Generate the configured model.
pub fn build_model(config: &RunConfig) -> CliResult<DummyModel> {
    config.validate()?;
    Ok(generate_model(config.model, &config.params)?)
}

/// Write `K.mat`, `K_dummy.mat` (the `γ₀`-scaled one-body term) and `W.pairmat`.
pub fn cmd_gen_model(config: &RunConfig, out: &mut dyn Write) -> CliResult<DummyModel> {
    let model = build_model(config)?;
    ensure_out(config)?;
    write_model(config, &model)?;
    writeln!(
        out,
        "model {} with {} modes for {} particles (gamma0 = {})",
        config.model,
        model.modes(),
        model.particles(),
        model.gamma0()
    )?;
    Ok(model)
}

fn write_model(config: &RunConfig, model: &DummyModel) -> CliResult<()> {
    let k_path = config.path(K_FILE);
    io::write_mat_file(&k_path, model.one_body.matrix(), &[]).map_err(io_context(&k_path))?;
    let kd_path = config.path(K_DUMMY_FILE);
    io::write_mat_file(&kd_path, &model.scaled_one_body(), &[]).map_err(io_context(&kd_path))?;
    let w_path = config.path(W_FILE);
    io::write_pairmat_file(&w_path, model.modes(), model.interaction.pair_matrix()).map_err(io_context(&w_path))?;
    Ok(())
}

/// Read the model files written by `gen-model`.
pub fn read_model(config: &RunConfig) -> CliResult<DummyModel> {
    config.validate()?;
    let k_path = config.path(K_FILE);
    let k = io::read_mat_file(&k_path).map_err(io_context(&k_path))?;
    let w_path = config.path(W_FILE);
    let (modes, w) = io::read_pairmat_file(&w_path).map_err(io_context(&w_path))?;
    let model = DummyModel::new(OneBodyModel::new(k)?, PairInteraction::from_pair_matrix(modes, w)?, config.particles)?;
    Ok(model)
}

fn run_hf(config: &RunConfig, model: &DummyModel, out: &mut dyn Write) -> CliResult<HfBasis> {
    let basis = hartree_fock(model, &config.hf).map_err(|e| {
        let _ = writeln!(out, "hf: {e}");
        CliError::from(e)
    })?;
    writeln!(
        out,
        "hf: converged in {} iterations, residual {:e}, e12 = {}, e21 = {}{}",
        basis.iterations,
        basis.residual_history.last().copied().unwrap_or(0.0),
        basis.e12,
        basis.e21,
        if basis.monotone { "" } else { " (residuals not monotone)" }
    )?;
    Ok(basis)
}

fn energies_text(e: &DummyMatrix) -> String {
    let mut s = String::new();
    for (k, l, v) in pair_energies(e) {
        let _ = writeln!(s, "{k} {l} {v:e}");
    }
    s
}

fn write_hf(config: &RunConfig, basis: &HfBasis, e: &DummyMatrix) -> CliResult<()> {
    let path = config.path(HF_ORBITALS_FILE);
    io::write_mat_file(&path, &basis.orbitals, &[]).map_err(io_context(&path))?;
    write_text(&config.path(HF_ENERGIES_FILE), &energies_text(e))
}

/// Hartree-Fock on the model files in the output directory.
pub fn cmd_hf(config: &RunConfig, out: &mut dyn Write) -> CliResult<HfBasis> {
    let model = read_model(config)?;
    let basis = run_hf(config, &model, out)?;
    let e = build_dummy_hamiltonian(&model, &basis.orbitals)?;
    write_hf(config, &basis, &e)?;
    Ok(basis)
}

/// Dummy matrix in the configured basis, writing intermediate files.
fn dummy_matrix(config: &RunConfig, model: &DummyModel, out: &mut dyn Write) -> CliResult<DummyMatrix> {
    let d = model.modes();
    let e = match config.basis {
        BasisChoice::Model => build_dummy_hamiltonian(model, &DMatrix::identity(d, d))?,
        BasisChoice::HartreeFock => {
            let basis = run_hf(config, model, out)?;
            let e = build_dummy_hamiltonian(model, &basis.orbitals)?;
            write_hf(config, &basis, &e)?;
            e
        }
    };
    Ok(e)
}

fn check_block_guard(config: &RunConfig, keys: &[SectorKey]) -> CliResult<()> {
    if let Some(largest) = keys.iter().map(SectorKey::size).max() {
        if largest > config.block_guard {
            return Err(CliError::Guard(format!(
                "block dimension: largest block {largest} exceeds {}",
                config.block_guard
            )));
        }
    }
    Ok(())
}

/// Summary of a pipeline run.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineSummary {
    pub sectors: usize,
    pub largest_block: usize,
    pub lowest: Vec<f64>,
    pub delta: f64,
    pub bound: f64,
    pub spectrum_len: usize,
}

/// Model, dummy matrix, truncation, blocks, spectra and optional sweep.
pub fn cmd_pipeline(config: &RunConfig, out: &mut dyn Write) -> CliResult<PipelineSummary> {
    let model = cmd_gen_model(config, out)?;
    let e = dummy_matrix(config, &model, out)?;
    let r = e.modes();
    let e_path = config.path("E.pairmat");
    io::write_pairmat_file(&e_path, r, e.matrix()).map_err(io_context(&e_path))?;

    let t = truncate(&e, config.alpha_bar)?;
    let ehat_path = config.path("Ehat.pairmat");
    io::write_pairmat_file(&ehat_path, r, t.matrix()).map_err(io_context(&ehat_path))?;

    let keys = partition(r, config.particles, config.alpha_bar)?;
    check_block_guard(config, &keys)?;
    write_text(&config.path("blocks.csv"), &blocks::inventory_csv(&keys)?)?;

    let built = build_blocks(&t, config.particles, true)?;
    let delta = delta_norm(&e, config.alpha_bar)?;
    let report = solve_blocks(&built, config.solver_tol)?.with_delta(delta)?;
    write_text(&config.path("spectrum.csv"), &report.to_csv())?;

    if config.sweep {
        run_sweep(config, &e, out)?;
    }

    let sorted = report.sorted_eigenvalues();
    let summary = PipelineSummary {
        sectors: keys.len(),
        largest_block: keys.iter().map(SectorKey::size).max().unwrap_or(0),
        lowest: sorted.iter().take(config.levels).copied().collect(),
        delta,
        bound: report.bound.unwrap_or(0.0),
        spectrum_len: sorted.len(),
    };
    let text = summary_text(config, &summary);
    write_text(&config.path("summary.txt"), &text)?;
    out.write_all(text.as_bytes())?;
    Ok(summary)
}

fn summary_text(config: &RunConfig, s: &PipelineSummary) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "R = {}, N = {}, alpha_bar = {}", config.modes, config.particles, config.alpha_bar);
    let _ = writeln!(t, "sectors: {}", s.sectors);
    let _ = writeln!(t, "largest block: {}", s.largest_block);
    let _ = writeln!(t, "eigenvalues: {}", s.spectrum_len);
    let _ = writeln!(t, "delta: {:e}", s.delta);
    let _ = writeln!(t, "bound: {:e}", s.bound);
    let _ = writeln!(t, "lowest levels:");
    for (i, v) in s.lowest.iter().enumerate() {
        let _ = writeln!(t, "  {i} {v:.12}");
    }
    t
}

fn run_sweep(config: &RunConfig, e: &DummyMatrix, out: &mut dyn Write) -> CliResult<Vec<spectra::SweepRow>> {
    let alphas: Vec<usize> = (2..=e.modes()).collect();
    let keys = partition(e.modes(), config.particles, e.modes())?;
    check_block_guard(config, &keys)?;
    let rows = sweep(e, config.particles, &alphas, config.levels, config.solver_tol)?;
    write_text(&config.path("sweep.csv"), &sweep_csv(&rows))?;
    let slack = 1e-9 * e.matrix().amax().max(1.0);
    if let Some(bad) = rows.iter().find(|r| !r.within_bound(slack)) {
        writeln!(out, "sweep: bound violated at alpha_bar = {}", bad.alpha_bar)?;
        return Err(CliError::Verify(format!(
            "eigenvalue shift {:e} exceeds bound {:e} at alpha_bar = {}",
            bad.max_eig_shift, bad.bound, bad.alpha_bar
        )));
    }
    Ok(rows)
}

/// The truncation sweep alone.
pub fn cmd_sweep(config: &RunConfig, out: &mut dyn Write) -> CliResult<Vec<spectra::SweepRow>> {
    let model = build_model(config)?;
    ensure_out(config)?;
    let e = dummy_matrix(config, &model, out)?;
    let rows = run_sweep(config, &e, out)?;
    out.write_all(sweep_csv(&rows).as_bytes())?;
    Ok(rows)
}

/// Load a pair matrix, reporting asymmetry as a verification failure.
pub fn load_pairmat(path: &Path) -> CliResult<DummyMatrix> {
    let (modes, m) = io::read_pairmat_file(path).map_err(io_context(path))?;
    let skew = spectra::asymmetry(&m);
    if skew > 1e-12 * m.amax().max(1.0) {
        let (mut row, mut col, mut worst) = (0, 0, -1.0);
        for i in 0..m.nrows() {
            for j in i + 1..m.ncols() {
                let dev = (m[(i, j)] - m[(j, i)]).abs();
                if dev > worst {
                    (row, col, worst) = (i, j, dev);
                }
            }
        }
        return Err(CliError::Verify(format!(
            "symmetry violation in {}: |E[{row},{col}] - E[{col},{row}]| = {worst:e}",
            path.display()
        )));
    }
    Ok(DummyMatrix::from_matrix(modes, m)?)
}

/// One matrix element `⟨n'| H |n⟩`.
pub fn cmd_element(
    config: &RunConfig,
    n_prime: &str,
    n: &str,
    pairmat: Option<&Path>,
    alpha_bar: Option<usize>,
    out: &mut dyn Write,
) -> CliResult<f64> {
    let e = match pairmat {
        Some(p) => load_pairmat(p)?,
        None => {
            let model = build_model(config)?;
            ensure_out(config)?;
            dummy_matrix(config, &model, out)?
        }
    };
    let parse =
        |s: &str| -> CliResult<OccupationSequence> { s.parse().map_err(|e: Error| CliError::Config(e.to_string())) };
    let (np, nn) = (parse(n_prime)?, parse(n)?);
    let value = match alpha_bar {
        Some(a) => matrix_element(&np, &nn, &truncate(&e, a)?)?,
        None => matrix_element(&np, &nn, &e)?,
    };
    writeln!(out, "{value:e}")?;
    Ok(value)
}

/// Suites run by `verify`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Signs,
    Assembly,
    Blocks,
    Reduction,
    Hf,
    All,
}

impl std::str::FromStr for Scope {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "signs" => Self::Signs,
            "assembly" => Self::Assembly,
            "blocks" => Self::Blocks,
            "reduction" | "prop21" => Self::Reduction,
            "hf" => Self::Hf,
            "all" => Self::All,
            _ => return Err(CliError::Config(format!("unknown scope {s:?}"))),
        })
    }
}

/// Result of one verification suite.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub counterexample: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }

    pub fn line(&self) -> String {
        format!(
            "suite={} cases={} max_error={:e} status={}",
            self.suite,
            self.cases,
            self.max_error,
            if self.passed() { "pass" } else { "fail" }
        )
    }
}

/// Size caps for `verify`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifyCaps {
    pub modes: Option<usize>,
    pub particles: Option<usize>,
}

fn random_pair_matrix(modes: usize, seed: u64) -> CliResult<DummyMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = binomial(modes, 2);
    let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
    Ok(DummyMatrix::from_matrix(modes, (&a + a.transpose()) * 0.5)?)
}

/// Exhaustive comparison of the sign coefficient with the permutation oracle.
pub fn verify_signs(modes: usize, particles: usize) -> CliResult<SuiteReport> {
    let mut cases = 0;
    let mut counterexample = None;
    let weights: Vec<usize> = (2..=particles.min(3)).collect();
    'outer: for &w in &weights {
        let pairs: Vec<_> = enumerate_bzf(w, modes)?.collect();
        for n in enumerate_bzf(particles, modes)? {
            for k in &pairs {
                for m in &pairs {
                    cases += 1;
                    let fast = coefficient(&n, k, m)?;
                    let slow = parity_oracle(&n, k, m)?;
                    if fast != slow {
                        counterexample =
                            Some(format!("n={n} k={k} m={m}: coefficient {} vs oracle {}", fast.value(), slow.value()));
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(SuiteReport {
        suite: "signs",
        cases,
        max_error: if counterexample.is_some() { 1.0 } else { 0.0 },
        counterexample,
    })
}

/// Assembled matrix against the tensor-space lift.
pub fn verify_assembly(e: &DummyMatrix, particles: usize) -> CliResult<SuiteReport> {
    let opts = DenseOptions { check_symmetry: true, ..Default::default() };
    let assembled = full_matrix_with(e, particles, opts)?;
    let lifted = oracle::lift(e.matrix(), e.modes(), particles)?;
    let labels: Vec<_> = enumerate_bzf(particles, e.modes())?.collect();
    let mut worst = (0.0f64, 0, 0);
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            let dev = (assembled[(i, j)] - lifted[(i, j)]).abs();
            if dev > worst.0 {
                worst = (dev, i, j);
            }
        }
    }
    let counterexample = (worst.0 > 1e-10)
        .then(|| format!("n'={} n={}: assembled vs lift differ by {:e}", labels[worst.1], labels[worst.2], worst.0));
    Ok(SuiteReport { suite: "assembly", cases: labels.len() * labels.len(), max_error: worst.0, counterexample })
}

/// Block decomposition checks for every truncation index.
pub fn verify_blocks(e: &DummyMatrix, particles: usize, solver_tol: f64) -> CliResult<SuiteReport> {
    let r = e.modes();
    let labels: Vec<_> = enumerate_bzf(particles, r)?.collect();
    let mut cases = 0;
    let mut max_error = 0.0f64;
    let fail = |cases, max_error, msg: String| {
        Ok(SuiteReport { suite: "blocks", cases, max_error, counterexample: Some(msg) })
    };
    for alpha in 2..=r {
        let t = truncate(e, alpha)?;
        let keys = partition(r, particles, alpha)?;
        let total: usize = keys.iter().map(SectorKey::size).sum();
        cases += 1;
        if total != binomial(r, particles) {
            return fail(cases, max_error, format!("alpha_bar={alpha}: block sizes sum to {total}"));
        }
        for key in &keys {
            let expect = stats(alpha, key.beta)?.tau + 1;
            cases += 1;
            if let Some(c) = structural_candidates(key)?.into_iter().find(|&c| c != expect) {
                return fail(cases, max_error, format!("sector {key}: {c} structural candidates, expected {expect}"));
            }
        }
        let sector: Vec<SectorKey> = labels.iter().map(|l| SectorKey::of(l, alpha)).collect::<Result<_, _>>()?;
        for (i, a) in labels.iter().enumerate() {
            for (j, b) in labels.iter().enumerate() {
                if sector[i] != sector[j] {
                    cases += 1;
                    let v = matrix_element(a, b, &t)?;
                    if v != 0.0 {
                        return fail(
                            cases,
                            max_error,
                            format!("alpha_bar={alpha}: cross-sector element <{a}|H|{b}> = {v:e}"),
                        );
                    }
                }
            }
        }
        let replication = blocks::verify_replication(&t, particles)?;
        max_error = max_error.max(replication);
        if replication > 1e-12 {
            return fail(cases, max_error, format!("alpha_bar={alpha}: replicated blocks differ by {replication:e}"));
        }
        let report = solve_blocks(&build_blocks(&t, particles, true)?, solver_tol)?;
        let dense = eigensolve(&full_matrix_with(&t, particles, DenseOptions::default())?, solver_tol)?;
        for (a, b) in report.sorted_eigenvalues().iter().zip(dense.eigenvalues.iter()) {
            cases += 1;
            max_error = max_error.max((a - b).abs());
        }
        if max_error > 1e-9 {
            return fail(
                cases,
                max_error,
                format!("alpha_bar={alpha}: block and dense spectra differ by {max_error:e}"),
            );
        }
    }
    Ok(SuiteReport { suite: "blocks", cases, max_error, counterexample: None })
}

fn random_model(d: usize, n: usize, rng: &mut ChaCha8Rng) -> CliResult<DummyModel> {
    let k = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    let p = binomial(d, 2);
    let w = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
    Ok(DummyModel::new(
        OneBodyModel::new((&k + k.transpose()) * 0.5)?,
        PairInteraction::from_pair_matrix(d, (&w + w.transpose()) * 0.5)?,
        n,
    )?)
}

/// Direct `N`-particle Hamiltonian against the lifted dummy Hamiltonian on
/// `instances` random models.
pub fn verify_reduction(modes: usize, particles: usize, instances: usize, seed: u64) -> CliResult<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error = 0.0f64;
    for i in 0..instances {
        let model = random_model(modes, particles, &mut rng)?;
        let report = check_reduction(&model, 1e-10)?;
        max_error = max_error.max(report.max_diff);
        if !report.passed() {
            return Ok(SuiteReport {
                suite: "reduction",
                cases: i + 1,
                max_error,
                counterexample: Some(format!(
                    "instance {i}: diff {:e} at gamma0, {:e} at gamma = {}",
                    report.max_diff, report.alternate_diff, report.alternate_gamma
                )),
            });
        }
    }
    Ok(SuiteReport { suite: "reduction", cases: instances, max_error, counterexample: None })
}

/// Largest deviation between each orbital and its best-matching reference
/// column, up to sign.
pub fn orbital_mismatch(orbitals: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..orbitals.ncols() {
        let o: DVector<f64> = orbitals.column(j).into_owned();
        let best = (0..reference.ncols())
            .max_by(|&a, &b| o.dot(&reference.column(a)).abs().total_cmp(&o.dot(&reference.column(b)).abs()))
            .unwrap();
        let r = reference.column(best);
        let dev = (&o - r).amax().min((&o + r).amax());
        worst = worst.max(dev);
    }
    worst
}

/// Hartree-Fock on the configured model: convergence, orthonormality and the
/// non-interacting limit.
pub fn verify_hf(config: &RunConfig) -> CliResult<SuiteReport> {
    let model = build_model(config)?;
    let basis = match hartree_fock(&model, &config.hf) {
        Ok(b) => b,
        Err(e) => {
            return Ok(SuiteReport {
                suite: "hf",
                cases: 1,
                max_error: f64::INFINITY,
                counterexample: Some(e.to_string()),
            })
        }
    };
    let d = model.modes();
    let gram = (basis.orbitals.transpose() * &basis.orbitals - DMatrix::identity(d, d)).amax();
    let free = DummyModel::new(model.one_body.clone(), PairInteraction::zero(d), model.particles())?;
    let free_basis = hartree_fock(&free, &config.hf)?;
    let k_eig = eigensolve(&free.scaled_one_body(), 1e-12 * free.scaled_one_body().amax().max(1.0))?;
    let mismatch = orbital_mismatch(&free_basis.orbitals, &k_eig.eigenvectors);
    let residual = basis.residual_history.last().copied().unwrap_or(0.0);
    let counterexample = if gram > 1e-8 {
        Some(format!("orbital Gram deviation {gram:e}"))
    } else if mismatch > 1e-10 {
        Some(format!("non-interacting orbitals deviate from eigenvectors of K by {mismatch:e}"))
    } else {
        None
    };
    Ok(SuiteReport { suite: "hf", cases: 3, max_error: gram.max(mismatch).max(residual), counterexample })
}

/// Run the selected suites; fails with exit code 1 on the first failing suite
/// after printing every report line.
pub fn cmd_verify(
    config: &RunConfig,
    scope: Scope,
    caps: VerifyCaps,
    pairmat: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<Vec<SuiteReport>> {
    let loaded = match pairmat {
        Some(p) => match load_pairmat(p) {
            Ok(e) => Some(e),
            Err(err) => {
                writeln!(out, "suite=input cases=1 max_error=inf status=fail")?;
                writeln!(out, "counterexample: {err}")?;
                return Err(err);
            }
        },
        None => None,
    };
    let seed = config.params.seed;
    let n_or = |default: usize| caps.particles.unwrap_or(default);
    let r_or = |default: usize| loaded.as_ref().map(|e| e.modes()).or(caps.modes).unwrap_or(default);
    let pair_matrix = |r: usize| -> CliResult<DummyMatrix> {
        match &loaded {
            Some(e) => Ok(e.clone()),
            None => random_pair_matrix(r, seed),
        }
    };

    let mut reports = Vec::new();
    let wants = |s: Scope| scope == s || scope == Scope::All;
    if wants(Scope::Signs) {
        reports.push(verify_signs(caps.modes.unwrap_or(6), n_or(3))?);
    }
    if wants(Scope::Assembly) {
        reports.push(verify_assembly(&pair_matrix(r_or(6))?, n_or(3))?);
    }
    if wants(Scope::Blocks) {
        reports.push(verify_blocks(&pair_matrix(r_or(7))?, n_or(3), config.solver_tol)?);
    }
    if wants(Scope::Reduction) {
        reports.push(verify_reduction(caps.modes.unwrap_or(4), n_or(3), 5, seed)?);
    }
    if wants(Scope::Hf) {
        reports.push(verify_hf(config)?);
    }
    for r in &reports {
        writeln!(out, "{}", r.line())?;
        if let Some(c) = &r.counterexample {
            writeln!(out, "counterexample: {c}")?;
        }
    }
    if let Some(bad) = reports.iter().find(|r| !r.passed()) {
        return Err(CliError::Verify(format!("suite {}: {}", bad.suite, bad.counterexample.as_deref().unwrap_or(""))));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let text = "# run\nmodes = 6\nparticles = 3 # comment\nalpha_bar = 4\nmodel = dummy_helium_1d\nbasis = hf\nsweep = true\nseed = 9\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!((c.modes, c.particles, c.alpha_bar), (6, 3, 4));
        assert_eq!(c.model, ModelKind::DummyHelium1d);
        assert_eq!(c.basis, BasisChoice::HartreeFock);
        assert!(c.sweep);
        assert_eq!(c.params.seed, 9);
        assert_eq!(c.params.modes, 6);
        c.validate().unwrap();
    }

    #[test]
    fn config_errors_are_exit_two() {
        for text in ["modes 6", "colour = red", "modes = six", "basis = other", "model = helium"] {
            assert_eq!(RunConfig::parse(text).unwrap_err().exit_code(), 2, "{text}");
        }
        let c = RunConfig::parse("modes = 4\nalpha_bar = 5").unwrap();
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let c = RunConfig::parse("hf_tol = 0").unwrap();
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn error_mapping() {
        let guard = Error::GuardExceeded { guard: "x", requested: 2, limit: 1 };
        assert_eq!(CliError::from(guard).exit_code(), 5);
        let scf = Error::ScfNotConverged { iterations: 1, residual_1: 1.0, residual_2: 1.0 };
        assert_eq!(CliError::from(scf).exit_code(), 4);
        let io = Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "gone"));
        assert_eq!(CliError::from(io).exit_code(), 3);
    }

    #[test]
    fn sign_suite_passes() {
        let r = verify_signs(6, 3).unwrap();
        assert!(r.passed());
        assert_eq!(r.cases, 20 * 15 * 15 + 20 * 20 * 20);
    }

    #[test]
    fn orbital_mismatch_ignores_order_and_sign() {
        let q = DMatrix::from_row_slice(2, 2, &[0.6, 0.8, 0.8, -0.6]);
        let swapped = DMatrix::from_row_slice(2, 2, &[-0.8, 0.6, 0.6, 0.8]);
        assert!(orbital_mismatch(&swapped, &q) < 1e-15);
    }
}
