//! Sign coefficients `C(n, k, m)` relating antisymmetrized states of different
//! particle number.
//!
//! For an `N`-particle state `n` and `M`-particle states `k`, `m`, the
//! coefficient is nonzero only when `m ⊆ n` and `n - m + k` is again an
//! occupation sequence. Its sign is the parity of the two sorting permutations
//! that bring `(m, n - m)` into the order of `n` and `(k, n - m)` into the
//! order of `n - m + k`.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::occupation::OccupationSequence;

/// A value in `{-1, 0, +1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SignCoefficient(i8);

impl SignCoefficient {
    pub const ZERO: Self = Self(0);
    pub const PLUS: Self = Self(1);
    pub const MINUS: Self = Self(-1);

    #[inline]
    pub fn value(self) -> i8 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

fn validate(n: &OccupationSequence, k: &OccupationSequence, m: &OccupationSequence) -> Result<()> {
    for other in [k, m] {
        if other.modes() != n.modes() {
            return Err(Error::LengthMismatch { left: n.modes(), right: other.modes() });
        }
    }
    if k.weight() != m.weight() {
        return Err(Error::WeightMismatch { left: k.weight(), right: m.weight() });
    }
    if m.weight() == 0 || m.weight() > n.weight() {
        return Err(Error::InvalidWeight { weight: m.weight(), modes: n.weight() });
    }
    Ok(())
}

/// Sum over the chosen positions of the number of `set` bits below each.
#[inline]
fn rank_sum(set: u64, chosen: u64) -> u32 {
    let mut total = 0;
    let mut rest = chosen;
    while rest != 0 {
        let p = rest.trailing_zeros();
        total += (set & ((1u64 << p) - 1)).count_ones();
        rest &= rest - 1;
    }
    total
}

/// Raw coefficient on bit words; no validation.
#[inline]
pub(crate) fn coefficient_bits(n: u64, k: u64, m: u64) -> i8 {
    if m & !n != 0 {
        return 0;
    }
    let rest = n & !m;
    if rest & k != 0 {
        return 0;
    }
    // Each chosen mode is preceded in the sorted list by the chosen modes
    // below it (always in order) and by the rest modes below it (inversions).
    let inv_s = rank_sum(rest, m);
    let inv_t = rank_sum(rest, k);
    if (inv_s + inv_t).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// `C(n, k, m)` by counting inversions against the sorted occupied indices.
pub fn coefficient(n: &OccupationSequence, k: &OccupationSequence, m: &OccupationSequence) -> Result<SignCoefficient> {
    validate(n, k, m)?;
    Ok(SignCoefficient(coefficient_bits(n.bits(), k.bits(), m.bits())))
}

/// Inversion counts `(J(S), J(T))` for an admissible triple, `None` when the
/// coefficient vanishes.
pub fn inversion_counts(
    n: &OccupationSequence,
    k: &OccupationSequence,
    m: &OccupationSequence,
) -> Result<Option<(usize, usize)>> {
    validate(n, k, m)?;
    let (n, k, m) = (n.bits(), k.bits(), m.bits());
    if m & !n != 0 || (n & !m) & k != 0 {
        return Ok(None);
    }
    let big_m = m.count_ones() as usize;
    let offset = big_m * (big_m + 1) / 2;
    let target = (n & !m) | k;
    let locate = |set: u64, chosen: u64| -> usize {
        let mut acc = 0;
        let mut rest = chosen;
        while rest != 0 {
            let p = rest.trailing_zeros();
            acc += 1 + (set & ((1u64 << p) - 1)).count_ones() as usize;
            rest &= rest - 1;
        }
        acc
    };
    Ok(Some((locate(n, m) - offset, locate(target, k) - offset)))
}

fn bubble_sort_swaps(list: &mut [usize]) -> usize {
    let mut swaps = 0;
    for end in (1..list.len()).rev() {
        for i in 0..end {
            if list[i] > list[i + 1] {
                list.swap(i, i + 1);
                swaps += 1;
            }
        }
    }
    swaps
}

/// `C(n, k, m)` by explicitly sorting the lists `(μ…, ρ…)` and `(κ…, ρ…)`
/// with adjacent transpositions.
pub fn parity_oracle(
    n: &OccupationSequence,
    k: &OccupationSequence,
    m: &OccupationSequence,
) -> Result<SignCoefficient> {
    validate(n, k, m)?;
    let n_idx = n.to_indices();
    let m_idx = m.to_indices();
    let k_idx = k.to_indices();

    if !m_idx.as_slice().iter().all(|i| n_idx.as_slice().contains(i)) {
        return Ok(SignCoefficient::ZERO);
    }
    let rho: Vec<usize> = n_idx.as_slice().iter().copied().filter(|i| !m_idx.as_slice().contains(i)).collect();
    if k_idx.as_slice().iter().any(|i| rho.contains(i)) {
        return Ok(SignCoefficient::ZERO);
    }

    let mut s_list: Vec<usize> = m_idx.as_slice().iter().chain(&rho).copied().collect();
    let mut t_list: Vec<usize> = k_idx.as_slice().iter().chain(&rho).copied().collect();
    let swaps = bubble_sort_swaps(&mut s_list) + bubble_sort_swaps(&mut t_list);
    Ok(if swaps.is_multiple_of(2) { SignCoefficient::PLUS } else { SignCoefficient::MINUS })
}

/// Thread-safe memo table for coefficients. Results are identical to
/// [`coefficient`].
#[derive(Debug, Default)]
pub struct SignCache {
    table: RwLock<HashMap<(u64, u64, u64, u8), i8>>,
}

impl SignCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn coefficient(
        &self,
        n: &OccupationSequence,
        k: &OccupationSequence,
        m: &OccupationSequence,
    ) -> Result<SignCoefficient> {
        validate(n, k, m)?;
        let key = (n.bits(), k.bits(), m.bits(), n.modes() as u8);
        if let Some(&v) = self.table.read().expect("sign cache poisoned").get(&key) {
            return Ok(SignCoefficient(v));
        }
        let v = coefficient_bits(key.0, key.1, key.2);
        self.table.write().expect("sign cache poisoned").insert(key, v);
        Ok(SignCoefficient(v))
    }

    pub fn len(&self) -> usize {
        self.table.read().expect("sign cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
