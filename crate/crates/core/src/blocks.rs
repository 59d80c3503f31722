//! Block decomposition of the truncated `N`-particle operator.
//!
//! Split each occupation sequence at `alpha_bar` into a head (modes
//! `1..=alpha_bar`) and a tail. The truncated operator never changes the tail,
//! so every tail `r` with weight `N - β` labels an invariant sector holding
//! the `C(alpha_bar, β)` sequences with that tail. Sectors with tails of equal
//! weight share their off-diagonal entries; only diagonals differ.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::assemble::element_bits;
use crate::error::{Error, Result};
use crate::occupation::{binomial, enumerate_bzf, OccupationSequence};
use crate::truncate::TruncatedDummyMatrix;

/// A sector: the truncation index, the tail beyond it and the head weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SectorKey {
    pub alpha_bar: usize,
    pub modes: usize,
    /// `None` when `alpha_bar` equals the mode count.
    pub tail: Option<OccupationSequence>,
    pub beta: usize,
}

impl SectorKey {
    /// The sector containing `n`.
    pub fn of(n: &OccupationSequence, alpha_bar: usize) -> Result<Self> {
        let (head, tail) = n.split_at(alpha_bar)?;
        Ok(Self { alpha_bar, modes: n.modes(), tail, beta: head.weight() })
    }

    /// Number of members, `C(alpha_bar, β)`.
    pub fn size(&self) -> usize {
        binomial(self.alpha_bar, self.beta)
    }

    pub fn particles(&self) -> usize {
        self.beta + self.tail.map_or(0, |t| t.weight())
    }

    /// Members ordered by head in canonical order.
    pub fn members(&self) -> Result<Vec<OccupationSequence>> {
        enumerate_bzf(self.beta, self.alpha_bar)?.map(|head| head.concat(self.tail.as_ref())).collect()
    }

    /// Tail as text, `-` when there is none.
    pub fn tail_label(&self) -> String {
        self.tail.map_or_else(|| "-".to_string(), |t| t.to_string())
    }
}

impl fmt::Display for SectorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha_bar={} tail={} beta={}", self.alpha_bar, self.tail_label(), self.beta)
    }
}

/// All sectors for `(R, N, alpha_bar)`, ordered by tail weight and then by
/// tail in canonical order.
pub fn partition(modes: usize, particles: usize, alpha_bar: usize) -> Result<Vec<SectorKey>> {
    if alpha_bar < 2 || alpha_bar > modes {
        return Err(Error::InvalidParameter(format!("alpha_bar {alpha_bar} outside 2..={modes}")));
    }
    if particles < 2 || particles > modes {
        return Err(Error::InvalidWeight { weight: particles, modes });
    }
    let tail_modes = modes - alpha_bar;
    if tail_modes == 0 {
        return Ok(vec![SectorKey { alpha_bar, modes, tail: None, beta: particles }]);
    }
    let mut keys = Vec::new();
    let lightest = particles.saturating_sub(alpha_bar);
    for tail_weight in lightest..=particles.min(tail_modes) {
        for tail in enumerate_bzf(tail_weight, tail_modes)? {
            keys.push(SectorKey { alpha_bar, modes, tail: Some(tail), beta: particles - tail_weight });
        }
    }
    Ok(keys)
}

/// Counting data for a block: `τ₁ = β(ᾱ-β)` one-transposition neighbours,
/// `τ₂ = C(β,2)·C(ᾱ-β,2)` two-transposition neighbours, `τ = τ₁ + τ₂` and
/// `Z`, the number of structurally zero off-diagonal entries per row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockStats {
    pub tau1: usize,
    pub tau2: usize,
    pub tau: usize,
    pub zeros: usize,
}

pub fn stats(alpha_bar: usize, beta: usize) -> Result<BlockStats> {
    if beta > alpha_bar {
        return Err(Error::InvalidWeight { weight: beta, modes: alpha_bar });
    }
    let holes = alpha_bar - beta;
    let tau1 = beta * holes;
    let tau2 = binomial(beta, 2) * binomial(holes, 2);
    let tau = tau1 + tau2;
    Ok(BlockStats { tau1, tau2, tau, zeros: binomial(alpha_bar, beta) - tau - 1 })
}

/// Per-row count of members reachable by a difference of class D0, D1 or D2.
pub fn structural_candidates(key: &SectorKey) -> Result<Vec<usize>> {
    let members = key.members()?;
    Ok(members.iter().map(|a| members.iter().filter(|b| (a.bits() & !b.bits()).count_ones() <= 2).count()).collect())
}

/// A sector with its dense block matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub key: SectorKey,
    pub members: Vec<OccupationSequence>,
    pub matrix: DMatrix<f64>,
}

impl Block {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Largest element-wise difference of the off-diagonal parts.
    pub fn off_diagonal_deviation(&self, other: &Block) -> Result<f64> {
        if self.size() != other.size() {
            return Err(Error::Dimension(format!("blocks of size {} and {}", self.size(), other.size())));
        }
        let mut dev = 0.0f64;
        for i in 0..self.size() {
            for j in 0..self.size() {
                if i != j {
                    dev = dev.max((self.matrix[(i, j)] - other.matrix[(i, j)]).abs());
                }
            }
        }
        Ok(dev)
    }
}

fn check_key(key: &SectorKey, source: &TruncatedDummyMatrix) -> Result<()> {
    let modes = source.base().modes();
    let tail_ok = match key.tail {
        None => key.alpha_bar == modes,
        Some(t) => t.modes() + key.alpha_bar == modes,
    };
    if key.alpha_bar != source.alpha_bar() || key.modes != modes || !tail_ok || key.beta > key.alpha_bar {
        return Err(Error::InvalidParameter(format!(
            "sector {key} does not fit a source with {modes} modes truncated at {}",
            source.alpha_bar()
        )));
    }
    Ok(())
}

fn entry(a: &OccupationSequence, b: &OccupationSequence, source: &TruncatedDummyMatrix) -> f64 {
    element_bits(a.bits(), b.bits(), source)
}

/// Assemble the block of one sector.
pub fn block_matrix(key: &SectorKey, source: &TruncatedDummyMatrix) -> Result<Block> {
    check_key(key, source)?;
    let members = key.members()?;
    let z = members.len();
    let mut m = DMatrix::zeros(z, z);
    for i in 0..z {
        for j in i..z {
            let v = entry(&members[i], &members[j], source);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(Block { key: *key, members, matrix: m })
}

/// Rebuild only the diagonal of `template` for another sector of equal `β`.
pub fn replicate_block(template: &Block, key: &SectorKey, source: &TruncatedDummyMatrix) -> Result<Block> {
    check_key(key, source)?;
    if key.beta != template.key.beta || key.alpha_bar != template.key.alpha_bar {
        return Err(Error::InvalidParameter(format!("cannot replicate {} into {key}", template.key)));
    }
    let members = key.members()?;
    let mut m = template.matrix.clone();
    for (i, n) in members.iter().enumerate() {
        m[(i, i)] = entry(n, n, source);
    }
    Ok(Block { key: *key, members, matrix: m })
}

/// Sectors sharing `β`, in order of first appearance.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationGroup {
    pub beta: usize,
    pub keys: Vec<SectorKey>,
}

pub fn replication_groups(keys: &[SectorKey]) -> Result<Vec<ReplicationGroup>> {
    if let Some(first) = keys.first() {
        if keys.iter().any(|k| k.alpha_bar != first.alpha_bar || k.modes != first.modes) {
            return Err(Error::InvalidParameter("sectors from different truncations".into()));
        }
    }
    let mut groups: BTreeMap<std::cmp::Reverse<usize>, Vec<SectorKey>> = BTreeMap::new();
    for k in keys {
        groups.entry(std::cmp::Reverse(k.beta)).or_default().push(*k);
    }
    Ok(groups.into_iter().map(|(beta, keys)| ReplicationGroup { beta: beta.0, keys }).collect())
}

/// Build every block of the partition, in partition order. With
/// `share_replicas`, off-diagonal parts are computed once per `β`.
pub fn build_blocks(source: &TruncatedDummyMatrix, particles: usize, share_replicas: bool) -> Result<Vec<Block>> {
    let keys = partition(source.base().modes(), particles, source.alpha_bar())?;
    if !share_replicas {
        return keys.par_iter().map(|k| block_matrix(k, source)).collect();
    }
    let groups = replication_groups(&keys)?;
    let templates: Vec<Block> = groups.par_iter().map(|g| block_matrix(&g.keys[0], source)).collect::<Result<_>>()?;
    let by_beta: BTreeMap<usize, &Block> = templates.iter().map(|b| (b.key.beta, b)).collect();
    keys.par_iter()
        .map(|k| {
            let template = by_beta[&k.beta];
            if template.key == *k {
                Ok(template.clone())
            } else {
                replicate_block(template, k, source)
            }
        })
        .collect()
}

/// Largest off-diagonal disagreement between independently assembled blocks
/// of equal `β`.
pub fn verify_replication(source: &TruncatedDummyMatrix, particles: usize) -> Result<f64> {
    let blocks = build_blocks(source, particles, false)?;
    let keys: Vec<SectorKey> = blocks.iter().map(|b| b.key).collect();
    let mut worst = 0.0f64;
    for group in replication_groups(&keys)? {
        let members: Vec<&Block> = blocks.iter().filter(|b| b.key.beta == group.beta).collect();
        for pair in members.windows(2) {
            worst = worst.max(pair[0].off_diagonal_deviation(pair[1])?);
        }
    }
    Ok(worst)
}

/// Inventory CSV with header `tail,beta,size,tau,Z`.
pub fn inventory_csv(keys: &[SectorKey]) -> Result<String> {
    let mut out = String::from("tail,beta,size,tau,Z\n");
    for k in keys {
        let s = stats(k.alpha_bar, k.beta)?;
        out.push_str(&format!("{},{},{},{},{}\n", k.tail_label(), k.beta, k.size(), s.tau, s.zeros));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::{full_matrix, matrix_element};
    use crate::truncate::truncate;
    use crate::twobody::DummyMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_e(r: usize, seed: u64) -> DummyMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = binomial(r, 2);
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        DummyMatrix::from_matrix(r, (&a + a.transpose()) * 0.5).unwrap()
    }

    fn bzf(s: &str) -> OccupationSequence {
        s.parse().unwrap()
    }

    #[test]
    fn partition_example() {
        let keys = partition(5, 3, 3).unwrap();
        let summary: Vec<(String, usize, usize)> = keys.iter().map(|k| (k.tail_label(), k.beta, k.size())).collect();
        assert_eq!(
            summary,
            vec![
                ("00".to_string(), 3, 1),
                ("10".to_string(), 2, 3),
                ("01".to_string(), 2, 3),
                ("11".to_string(), 1, 3),
            ]
        );
        let single = partition(6, 3, 6).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].size(), 20);
        assert!(single[0].tail.is_none());
    }

    #[test]
    fn partition_is_complete_and_disjoint() {
        for r in 2..=12 {
            for n in 2..=r {
                for alpha in 2..=r {
                    let keys = partition(r, n, alpha).unwrap();
                    let total: usize = keys.iter().map(|k| k.size()).sum();
                    assert_eq!(total, binomial(r, n), "R={r} N={n} alpha={alpha}");
                    if r <= 8 {
                        let mut seen = std::collections::HashSet::new();
                        for k in &keys {
                            assert!(k.beta <= alpha.min(n));
                            for m in k.members().unwrap() {
                                assert_eq!(SectorKey::of(&m, alpha).unwrap(), *k);
                                assert!(seen.insert(m));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn stats_anchors() {
        assert_eq!(stats(4, 2).unwrap(), BlockStats { tau1: 4, tau2: 1, tau: 5, zeros: 0 });
        let s = stats(6, 3).unwrap();
        assert_eq!((s.tau, s.zeros), (18, 1));
        for alpha in 2..=10 {
            assert_eq!(stats(alpha, alpha - 1).unwrap().tau, alpha - 1);
            if alpha >= 2 {
                assert_eq!(stats(alpha, alpha - 2).unwrap().tau, binomial(alpha, 2) - 1);
            }
        }
        assert!(stats(3, 4).is_err());
    }

    #[test]
    fn structural_candidate_counts_match_stats() {
        for r in 4..=9 {
            for n in 2..=4.min(r) {
                for alpha in 2..=r {
                    for key in partition(r, n, alpha).unwrap() {
                        let expect = stats(alpha, key.beta).unwrap().tau + 1;
                        assert!(structural_candidates(&key).unwrap().iter().all(|&c| c == expect));
                    }
                }
            }
        }
    }

    #[test]
    fn blocks_reproduce_dense_truncated_operator() {
        let e = random_e(7, 1);
        for alpha in 2..=7 {
            let t = truncate(&e, alpha).unwrap();
            let dense = full_matrix(&t, 3).unwrap();
            let labels: Vec<_> = enumerate_bzf(3, 7).unwrap().collect();
            let index = |s: &OccupationSequence| labels.iter().position(|l| l == s).unwrap();
            for b in build_blocks(&t, 3, true).unwrap() {
                for (i, a) in b.members.iter().enumerate() {
                    for (j, c) in b.members.iter().enumerate() {
                        assert!((b.matrix[(i, j)] - dense[(index(a), index(c))]).abs() < 1e-14);
                    }
                }
            }
            // across sectors the truncated operator is exactly zero
            for a in &labels {
                for c in &labels {
                    if SectorKey::of(a, alpha).unwrap() != SectorKey::of(c, alpha).unwrap() {
                        assert_eq!(matrix_element(a, c, &t).unwrap(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn closure_under_window_differences() {
        let (r, n, alpha) = (7, 3, 4);
        for n_seq in enumerate_bzf(n, r).unwrap() {
            let key = SectorKey::of(&n_seq, alpha).unwrap();
            for other in enumerate_bzf(n, r).unwrap() {
                let d = crate::occupation::classify_difference(&other, &n_seq).unwrap();
                if let Some(d) = d {
                    if d.within(alpha) {
                        assert_eq!(SectorKey::of(&other, alpha).unwrap(), key);
                    }
                }
            }
        }
    }

    #[test]
    fn small_block_shapes() {
        let e = random_e(6, 2);
        let t = truncate(&e, 4).unwrap();
        let full_head = SectorKey::of(&bzf("111100"), 4).unwrap();
        let b = block_matrix(&full_head, &t).unwrap();
        assert_eq!(b.size(), 1);
        let empty_head = SectorKey::of(&bzf("000011"), 4).unwrap();
        let t2 = truncate(&e, 4).unwrap();
        assert_eq!(block_matrix(&empty_head, &t2).unwrap().size(), 1);
        let near_full = SectorKey::of(&bzf("111001"), 4).unwrap();
        assert_eq!(block_matrix(&near_full, &t).unwrap().size(), 4);
    }

    #[test]
    fn replication_is_exact() {
        let e = random_e(8, 3);
        let t = truncate(&e, 5).unwrap();
        assert!(verify_replication(&t, 4).unwrap() <= 1e-12);
        let shared = build_blocks(&t, 4, true).unwrap();
        let direct = build_blocks(&t, 4, false).unwrap();
        for (a, b) in shared.iter().zip(&direct) {
            assert_eq!(a.key, b.key);
            assert!((&a.matrix - &b.matrix).amax() <= 1e-12);
        }
    }

    #[test]
    fn groups_by_beta() {
        let keys = partition(8, 4, 5).unwrap();
        let groups = replication_groups(&keys).unwrap();
        assert_eq!(groups.iter().map(|g| g.beta).collect::<Vec<_>>(), vec![4, 3, 2, 1]);
        assert_eq!(groups.iter().map(|g| g.keys.len()).sum::<usize>(), keys.len());
        assert_eq!(replication_groups(&keys[..1]).unwrap().len(), 1);
        let other = partition(8, 4, 6).unwrap();
        assert!(replication_groups(&[keys[0], other[0]]).is_err());
    }

    #[test]
    fn inventory_format() {
        let csv = inventory_csv(&partition(5, 3, 3).unwrap()).unwrap();
        assert_eq!(csv, "tail,beta,size,tau,Z\n00,3,1,0,0\n10,2,3,2,0\n01,2,3,2,0\n11,1,3,2,0\n");
    }

    #[test]
    fn rejects_foreign_keys() {
        let e = random_e(6, 4);
        let t = truncate(&e, 4).unwrap();
        let key = partition(6, 3, 3).unwrap()[0];
        assert!(block_matrix(&key, &t).is_err());
    }
}
