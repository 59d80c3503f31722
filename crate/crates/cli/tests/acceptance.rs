//! Acceptance criteria, one line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fermi_blocks::assemble::full_matrix;
use fermi_blocks::blocks::{self, partition, stats, structural_candidates, SectorKey};
use fermi_blocks::hartree_fock::{hartree_fock, HfOptions};
use fermi_blocks::occupation::enumerate_bzf;
use fermi_blocks::spectra::sweep;
use fermi_blocks::truncate::{delta_norm, lift_error_bound, truncate};
use fermi_blocks::twobody::{check_reduction, generate_model, ModelKind, ModelParams};
use fermi_blocks::{
    binomial, coefficient, oracle, parity_oracle, DummyMatrix, DummyModel, OneBodyModel, PairInteraction,
};
use fermi_blocks_cli::orbital_mismatch;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<u64>);

fn symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

fn random_e(r: usize, seed: u64) -> DummyMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DummyMatrix::from_matrix(r, symmetric(binomial(r, 2), &mut rng)).unwrap()
}

fn reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut weakest_alt, mut count) = (0.0f64, f64::INFINITY, 0);
    for d in 4..=6 {
        for n in 3..=4 {
            for _ in 0..20 {
                let model = DummyModel::new(
                    OneBodyModel::new(symmetric(d, &mut rng)).unwrap(),
                    PairInteraction::from_pair_matrix(d, symmetric(binomial(d, 2), &mut rng)).unwrap(),
                    n,
                )
                .unwrap();
                let r = check_reduction(&model, 1e-10).map_err(|e| e.to_string())?;
                worst = worst.max(r.max_diff);
                weakest_alt = weakest_alt.min(r.alternate_diff);
                count += 1;
            }
        }
    }
    let detail = format!("{count} instances, max diff {worst:.2e}, min diff at 2*gamma0 {weakest_alt:.2e}");
    if worst <= 1e-10 && weakest_alt > 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn signs() -> Outcome {
    let mut cases = 0;
    for (r, n, m) in [(6, 3, 2), (7, 4, 3)] {
        let pairs: Vec<_> = enumerate_bzf(m, r).unwrap().collect();
        for nn in enumerate_bzf(n, r).unwrap() {
            for k in &pairs {
                for mm in &pairs {
                    cases += 1;
                    let fast = coefficient(&nn, k, mm).unwrap();
                    let slow = parity_oracle(&nn, k, mm).unwrap();
                    if fast != slow {
                        return Err(format!("mismatch at n={nn} k={k} m={mm}"));
                    }
                }
            }
        }
    }
    Ok(format!("{cases} triples, 0 mismatches"))
}

fn assembly() -> Outcome {
    let mut worst = 0.0f64;
    for (r, n) in [(6, 3), (7, 3)] {
        for seed in 0..3 {
            let e = random_e(r, seed);
            let diff = (full_matrix(&e, n).unwrap() - oracle::lift(e.matrix(), r, n).unwrap()).amax();
            worst = worst.max(diff);
        }
    }
    let detail = format!("max diff {worst:.2e}");
    if worst <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn block_structure() -> Outcome {
    let (r, n) = (8, 4);
    let e = random_e(r, 7);
    let labels: Vec<_> = enumerate_bzf(n, r).unwrap().collect();
    if stats(4, 2).unwrap().tau != 5 {
        return Err("tau(4,2) != 5".into());
    }
    for alpha in 4..=6 {
        let anchor = stats(alpha, alpha - 2).unwrap().tau;
        if anchor != binomial(alpha, 2) - 1 {
            return Err(format!("tau({alpha},{}) = {anchor}", alpha - 2));
        }
        for beta in 0..=alpha.min(n) {
            let tau2 = stats(alpha, beta).unwrap().tau2;
            let expect = if beta >= 2 && alpha - beta >= 2 { binomial(beta, 2) * binomial(alpha - beta, 2) } else { 0 };
            if tau2 != expect {
                return Err(format!("tau2({alpha},{beta}) = {tau2}, expected {expect}"));
            }
        }
        let keys = partition(r, n, alpha).unwrap();
        let total: usize = keys.iter().map(SectorKey::size).sum();
        if total != binomial(8, 4) {
            return Err(format!("alpha_bar={alpha}: sizes sum to {total}"));
        }
        for key in &keys {
            let expect = stats(alpha, key.beta).unwrap().tau + 1;
            if structural_candidates(key).unwrap().iter().any(|&c| c != expect) {
                return Err(format!("alpha_bar={alpha}: candidate count off in sector {key}"));
            }
        }
        let t = truncate(&e, alpha).unwrap();
        let h = full_matrix(&t, n).unwrap();
        let sector: Vec<_> = labels.iter().map(|l| SectorKey::of(l, alpha).unwrap()).collect();
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                if sector[i] != sector[j] && h[(i, j)] != 0.0 {
                    return Err(format!("alpha_bar={alpha}: nonzero cross-sector element at ({i},{j})"));
                }
            }
        }
    }
    Ok("70 states per alpha_bar, cross-sector zeros exact, candidate counts tau+1".into())
}

fn replication() -> Outcome {
    let t = truncate(&random_e(8, 5), 5).unwrap();
    let worst = blocks::verify_replication(&t, 4).map_err(|e| e.to_string())?;
    let detail = format!("max off-diagonal deviation {worst:.2e}");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spectral_sweep() -> Outcome {
    let (r, n) = (8, 3);
    let params = ModelParams { modes: r, particles: n, ..Default::default() };
    let model = generate_model(ModelKind::Synthetic, &params).unwrap();
    let e = fermi_blocks::twobody::build_dummy_hamiltonian(&model, &DMatrix::identity(r, r)).unwrap();
    let alphas: Vec<usize> = (2..=r).collect();
    let rows = sweep(&e, n, &alphas, 10, 1e-10).map_err(|err| err.to_string())?;
    let reference = SymmetricEigen::new(full_matrix(&e, n).unwrap()).eigenvalues;
    let mut reference: Vec<f64> = reference.iter().copied().collect();
    reference.sort_by(f64::total_cmp);
    for row in &rows {
        let bound = lift_error_bound(n, delta_norm(&e, row.alpha_bar).unwrap()).unwrap();
        let mut truncated: Vec<f64> =
            SymmetricEigen::new(full_matrix(&truncate(&e, row.alpha_bar).unwrap(), n).unwrap())
                .eigenvalues
                .iter()
                .copied()
                .collect();
        truncated.sort_by(f64::total_cmp);
        let drift = truncated.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if (drift - row.max_eig_shift).abs() > 1e-9 {
            return Err(format!("alpha_bar={}: drift {drift:e} vs reported {:e}", row.alpha_bar, row.max_eig_shift));
        }
        if drift > bound + 1e-12 || !row.within_bound(1e-12) {
            return Err(format!("alpha_bar={}: drift {drift:e} exceeds bound {bound:e}", row.alpha_bar));
        }
    }
    let last = rows.last().unwrap();
    if last.alpha_bar != r || last.max_eig_shift != 0.0 {
        return Err(format!("drift at alpha_bar={r} is {:e}", last.max_eig_shift));
    }
    Ok(format!("{} truncation levels within bound, drift 0 at alpha_bar=8", rows.len()))
}

fn hartree_fock_criterion() -> Outcome {
    let params = ModelParams { modes: 16, particles: 2, ..Default::default() };
    let model = generate_model(ModelKind::DummyHelium1d, &params).unwrap();
    let opts = HfOptions::default();
    let basis = hartree_fock(&model, &opts).map_err(|e| e.to_string())?;
    let residual = basis.residual_history.last().copied().unwrap_or(f64::INFINITY);
    let gram = (basis.orbitals.transpose() * &basis.orbitals - DMatrix::identity(16, 16)).amax();
    let free = DummyModel::new(model.one_body.clone(), PairInteraction::zero(16), 2).unwrap();
    let free_basis = hartree_fock(&free, &opts).map_err(|e| e.to_string())?;
    let k_vectors = SymmetricEigen::new(free.one_body.matrix().clone()).eigenvectors;
    let mismatch = orbital_mismatch(&free_basis.orbitals, &k_vectors);
    let detail = format!(
        "{} iterations, residual {residual:.2e}, Gram {gram:.2e}, free orbitals vs K {mismatch:.2e}",
        basis.iterations
    );
    if basis.iterations <= 200 && residual <= 1e-8 && gram <= 1e-8 && mismatch <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn diagonal_lift() -> Outcome {
    let (r, n) = (7, 3);
    let e = random_e(r, 3).diagonal_only();
    let h = full_matrix(&e, n).unwrap();
    let labels: Vec<_> = enumerate_bzf(n, r).unwrap().collect();
    for (i, label) in labels.iter().enumerate() {
        let occupied: Vec<usize> = label.positions().collect();
        let mut expect = 0.0;
        for a in 0..occupied.len() {
            for b in a + 1..occupied.len() {
                let pair = (1u64 << occupied[a]) | (1u64 << occupied[b]);
                expect += e.value_bits(pair, pair);
            }
        }
        for j in 0..labels.len() {
            let want = if i == j { expect } else { 0.0 };
            if h[(i, j)] != want {
                return Err(format!("entry ({i},{j}) = {:e}, expected {want:e}", h[(i, j)]));
            }
        }
    }
    Ok(format!("{} diagonal entries exact, off-diagonal exactly 0", labels.len()))
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("run.cfg");
    std::fs::write(
        &config,
        "modes = 8\nparticles = 3\nalpha_bar = 5\nmodel = synthetic\nbasis = hf\nsweep = true\nseed = 42\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_fermi-blocks"))
            .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "pipeline"])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("pipeline exited with {}", status.status));
        }
        outputs.push(read_dir_sorted(&out));
    }
    if outputs[0] != outputs[1] {
        return Err("artifacts differ between runs".into());
    }
    Ok(format!("{} artifact files byte-identical", outputs[0].len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 two-particle reduction", reduction, Some(10)),
        ("2 sign coefficient", signs, Some(30)),
        ("3 assembly vs lift", assembly, Some(60)),
        ("4 block structure", block_structure, Some(30)),
        ("5 block replication", replication, None),
        ("6 truncation sweep", spectral_sweep, Some(60)),
        ("7 hartree-fock", hartree_fock_criterion, None),
        ("8 diagonal lift", diagonal_lift, None),
        ("9 determinism", determinism, None),
    ];
    let mut failures = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let (Ok(detail), Some(secs)) = (&outcome, limit) {
            if elapsed > Duration::from_secs(secs) {
                outcome = Err(format!("{detail}; took {elapsed:.2?}, limit {secs} s"));
            }
        }
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {name}: {detail} [{elapsed:.2?}]");
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
