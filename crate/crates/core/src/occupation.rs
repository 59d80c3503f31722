//! Occupation-number sequences over a finite set of `R` one-particle modes.
//!
//! An [`OccupationSequence`] labels one antisymmetrized basis state: bit `κ`
//! (mode `κ + 1` in the 1-based numbering used by [`IndexSequence`] and the
//! text form) is set when the mode is occupied. The canonical ordering of all
//! sequences of a fixed weight is lexicographic on their index sequences; every
//! matrix in this crate is laid out in that order.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported mode count; sequences are packed into one `u64`.
pub const MAX_MODES: usize = 64;

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

fn check_modes(modes: usize) -> Result<()> {
    if modes == 0 || modes > MAX_MODES {
        return Err(Error::ModeCount(modes));
    }
    Ok(())
}

fn mask(modes: usize) -> u64 {
    if modes == 64 {
        u64::MAX
    } else {
        (1u64 << modes) - 1
    }
}

/// A finite sequence of fermionic occupation numbers (each 0 or 1).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationSequence {
    bits: u64,
    modes: u8,
}

impl OccupationSequence {
    /// All modes empty.
    pub fn empty(modes: usize) -> Result<Self> {
        check_modes(modes)?;
        Ok(Self { bits: 0, modes: modes as u8 })
    }

    /// Build from a raw bit word; bit `κ` is mode `κ + 1`.
    pub fn from_bits(bits: u64, modes: usize) -> Result<Self> {
        check_modes(modes)?;
        if bits & !mask(modes) != 0 {
            return Err(Error::IndexOutOfRange { index: 64 - bits.leading_zeros() as usize, modes });
        }
        Ok(Self { bits, modes: modes as u8 })
    }

    /// Build from a slice of 0/1 values.
    pub fn from_slice(values: &[u8]) -> Result<Self> {
        check_modes(values.len())?;
        let mut bits = 0u64;
        for (pos, &v) in values.iter().enumerate() {
            match v {
                0 => {}
                1 => bits |= 1 << pos,
                _ => return Err(Error::ParseBits(format!("{values:?}"))),
            }
        }
        Ok(Self { bits, modes: values.len() as u8 })
    }

    /// Occupation sequence with ones exactly at the given 1-based indices.
    pub fn from_indices(indices: &IndexSequence, modes: usize) -> Result<Self> {
        check_modes(modes)?;
        let mut bits = 0u64;
        for &index in indices.as_slice() {
            if index == 0 || index > modes {
                return Err(Error::IndexOutOfRange { index, modes });
            }
            bits |= 1 << (index - 1);
        }
        Ok(Self { bits, modes: modes as u8 })
    }

    /// The strictly increasing 1-based indices of occupied modes.
    pub fn to_indices(&self) -> IndexSequence {
        IndexSequence(self.positions().map(|p| p + 1).collect())
    }

    /// 0-based positions of occupied modes, ascending.
    pub fn positions(&self) -> BitPositions {
        BitPositions(self.bits)
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.modes as usize
    }

    #[inline]
    pub fn weight(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Occupation of the 0-based position `pos`.
    #[inline]
    pub fn get(&self, pos: usize) -> u8 {
        ((self.bits >> pos) & 1) as u8
    }

    pub fn to_vec(&self) -> Vec<u8> {
        (0..self.modes()).map(|p| self.get(p)).collect()
    }

    /// Largest occupied 1-based index, `None` for the empty sequence.
    pub fn max_index(&self) -> Option<usize> {
        if self.bits == 0 {
            None
        } else {
            Some(64 - self.bits.leading_zeros() as usize)
        }
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.modes != other.modes {
            return Err(Error::LengthMismatch { left: self.modes(), right: other.modes() });
        }
        Ok(())
    }

    /// Component-wise sum, `None` when some component would be 2.
    pub fn try_add(&self, other: &Self) -> Result<Option<Self>> {
        self.check_len(other)?;
        if self.bits & other.bits != 0 {
            return Ok(None);
        }
        Ok(Some(Self { bits: self.bits | other.bits, modes: self.modes }))
    }

    /// Component-wise difference, `None` when some component would be -1.
    pub fn try_sub(&self, other: &Self) -> Result<Option<Self>> {
        self.check_len(other)?;
        if other.bits & !self.bits != 0 {
            return Ok(None);
        }
        Ok(Some(Self { bits: self.bits & !other.bits, modes: self.modes }))
    }

    /// Apply a difference sequence, `None` if the result is not a bzf.
    pub fn try_apply(&self, d: &DifferenceSequence) -> Result<Option<Self>> {
        if self.modes() != d.modes() {
            return Err(Error::LengthMismatch { left: self.modes(), right: d.modes() });
        }
        if d.minus & !self.bits != 0 || d.plus & self.bits != 0 {
            return Ok(None);
        }
        Ok(Some(Self { bits: (self.bits & !d.minus) | d.plus, modes: self.modes }))
    }

    /// Split into the first `alpha` modes (head) and the rest (tail).
    pub fn split_at(&self, alpha: usize) -> Result<(Self, Option<Self>)> {
        let r = self.modes();
        if alpha == 0 || alpha > r {
            return Err(Error::InvalidParameter(format!("split point {alpha} outside 1..={r}")));
        }
        let head = Self { bits: self.bits & mask(alpha), modes: alpha as u8 };
        let tail = if alpha == r { None } else { Some(Self { bits: self.bits >> alpha, modes: (r - alpha) as u8 }) };
        Ok((head, tail))
    }

    /// Concatenate `self` (head) with an optional tail.
    pub fn concat(&self, tail: Option<&Self>) -> Result<Self> {
        match tail {
            None => Ok(*self),
            Some(t) => {
                let modes = self.modes() + t.modes();
                check_modes(modes)?;
                Ok(Self { bits: self.bits | (t.bits << self.modes), modes: modes as u8 })
            }
        }
    }
}

impl fmt::Display for OccupationSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in 0..self.modes() {
            f.write_str(if self.get(p) == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for OccupationSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bzf({self})")
    }
}

impl FromStr for OccupationSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::ParseBits(s.to_string()));
        }
        let values: Vec<u8> = s.bytes().map(|b| b - b'0').collect();
        Self::from_slice(&values)
    }
}

/// Iterator over set bit positions of a word, ascending.
#[derive(Clone, Copy, Debug)]
pub struct BitPositions(pub(crate) u64);

impl Iterator for BitPositions {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let p = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for BitPositions {}

/// Strictly increasing 1-based mode indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexSequence(Vec<usize>);

impl IndexSequence {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::DuplicateIndex(w[1]));
            }
        }
        if indices.first() == Some(&0) {
            return Err(Error::IndexOutOfRange { index: 0, modes: 0 });
        }
        Ok(Self(indices))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The three classes of two-particle differences `k - m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DifferenceClass {
    D0,
    D1,
    D2,
}

/// A {-1, 0, +1} vector `n' - n` between equal-weight sequences, stored as
/// the masks of its +1 and -1 entries.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct DifferenceSequence {
    plus: u64,
    minus: u64,
    modes: u8,
}

impl DifferenceSequence {
    /// A single transposition: +1 at 0-based `to`, -1 at 0-based `from`.
    pub fn transposition(to: usize, from: usize, modes: usize) -> Result<Self> {
        check_modes(modes)?;
        if to >= modes || from >= modes || to == from {
            return Err(Error::InvalidParameter(format!("transposition {from}->{to} invalid for {modes} modes")));
        }
        Ok(Self { plus: 1 << to, minus: 1 << from, modes: modes as u8 })
    }

    /// `k - m` for two weight-2 sequences.
    pub fn between(k: &OccupationSequence, m: &OccupationSequence) -> Result<Self> {
        k.check_len(m)?;
        Ok(Self { plus: k.bits & !m.bits, minus: m.bits & !k.bits, modes: k.modes })
    }

    pub fn entries(&self) -> Vec<i8> {
        (0..self.modes()).map(|p| ((self.plus >> p) & 1) as i8 - ((self.minus >> p) & 1) as i8).collect()
    }

    /// Mask of +1 entries.
    #[inline]
    pub fn plus(&self) -> u64 {
        self.plus
    }

    /// Mask of -1 entries.
    #[inline]
    pub fn minus(&self) -> u64 {
        self.minus
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.modes as usize
    }

    /// Number of +1 entries.
    pub fn order(&self) -> usize {
        self.plus.count_ones() as usize
    }

    /// Class tag, `None` if outside D0 ∪ D1 ∪ D2.
    pub fn class(&self) -> Option<DifferenceClass> {
        match (self.plus.count_ones(), self.minus.count_ones()) {
            (0, 0) => Some(DifferenceClass::D0),
            (1, 1) => Some(DifferenceClass::D1),
            (2, 2) => Some(DifferenceClass::D2),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.plus == 0 && self.minus == 0
    }

    /// True when every nonzero entry sits at a 1-based index ≤ `alpha`.
    pub fn within(&self, alpha: usize) -> bool {
        let outside = if alpha >= 64 { 0 } else { !mask(alpha) };
        (self.plus | self.minus) & outside == 0
    }

    /// Component-wise sum of two differences, `None` if some entry leaves {-1,0,1}.
    pub fn try_add(&self, other: &Self) -> Option<Self> {
        if self.modes != other.modes {
            return None;
        }
        // +1 and -1 at the same place cancel.
        let cancel_a = self.plus & other.minus;
        let cancel_b = self.minus & other.plus;
        if self.plus & other.plus != 0 || self.minus & other.minus != 0 {
            return None;
        }
        Some(Self {
            plus: (self.plus | other.plus) & !(cancel_a | cancel_b),
            minus: (self.minus | other.minus) & !(cancel_a | cancel_b),
            modes: self.modes,
        })
    }
}

impl fmt::Debug for DifferenceSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{:?}", self.entries())
    }
}

/// Classify `n' - n`. Returns `None` (not in D) when more than two modes move.
pub fn classify_difference(n_prime: &OccupationSequence, n: &OccupationSequence) -> Result<Option<DifferenceSequence>> {
    n_prime.check_len(n)?;
    if n_prime.weight() != n.weight() {
        return Err(Error::WeightMismatch { left: n_prime.weight(), right: n.weight() });
    }
    let d = DifferenceSequence { plus: n_prime.bits & !n.bits, minus: n.bits & !n_prime.bits, modes: n.modes };
    Ok(if d.order() <= 2 { Some(d) } else { None })
}

/// A chain of single transpositions leading from `n` to `n'`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecompositionResult {
    pub steps: Vec<DifferenceSequence>,
}

impl DecompositionResult {
    /// The number `L` of transpositions.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Write `n' = n + d_1 + … + d_L` with each `d_j` of class D1, pairing the
/// j-th gained mode with the j-th lost mode in ascending order.
pub fn decompose(n_prime: &OccupationSequence, n: &OccupationSequence) -> Result<DecompositionResult> {
    n_prime.check_len(n)?;
    if n_prime.weight() != n.weight() {
        return Err(Error::WeightMismatch { left: n_prime.weight(), right: n.weight() });
    }
    let gained = BitPositions(n_prime.bits & !n.bits);
    let lost = BitPositions(n.bits & !n_prime.bits);
    let steps = gained
        .zip(lost)
        .map(|(to, from)| DifferenceSequence { plus: 1 << to, minus: 1 << from, modes: n.modes })
        .collect();
    Ok(DecompositionResult { steps })
}

/// All weight-`weight` sequences over `modes` modes, in canonical order
/// (lexicographic on the index sequence).
pub fn enumerate_bzf(weight: usize, modes: usize) -> Result<BzfIter> {
    check_modes(modes)?;
    if weight > modes {
        return Err(Error::InvalidWeight { weight, modes });
    }
    Ok(BzfIter { current: Some((0..weight).collect()), modes })
}

/// Iterator returned by [`enumerate_bzf`].
#[derive(Clone, Debug)]
pub struct BzfIter {
    current: Option<Vec<usize>>,
    modes: usize,
}

impl Iterator for BzfIter {
    type Item = OccupationSequence;

    fn next(&mut self) -> Option<OccupationSequence> {
        let combo = self.current.as_mut()?;
        let bits = combo.iter().fold(0u64, |acc, &p| acc | 1 << p);
        let out = OccupationSequence { bits, modes: self.modes as u8 };

        // advance to the next combination in lexicographic order
        let m = combo.len();
        let mut i = m;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if combo[i] < self.modes - m + i {
                combo[i] += 1;
                for j in i + 1..m {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Canonical basis of fixed-weight sequences with a reverse lookup.
#[derive(Clone, Debug)]
pub struct BzfBasis {
    labels: Vec<OccupationSequence>,
    lookup: std::collections::HashMap<u64, usize>,
    weight: usize,
    modes: usize,
}

impl BzfBasis {
    pub fn new(weight: usize, modes: usize) -> Result<Self> {
        let labels: Vec<_> = enumerate_bzf(weight, modes)?.collect();
        let lookup = labels.iter().enumerate().map(|(i, s)| (s.bits(), i)).collect();
        Ok(Self { labels, lookup, weight, modes })
    }

    pub fn labels(&self) -> &[OccupationSequence] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.weight
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn index_of(&self, s: &OccupationSequence) -> Option<usize> {
        if s.modes() != self.modes {
            return None;
        }
        self.lookup.get(&s.bits()).copied()
    }
}

/// Canonical index of the pair `(a, b)`, `a < b`, 0-based, among all pairs
/// of `modes` modes.
#[inline]
pub fn pair_index(a: usize, b: usize, modes: usize) -> usize {
    debug_assert!(a < b && b < modes);
    a * (2 * modes - a - 1) / 2 + (b - a - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_from_index(index: usize, modes: usize) -> (usize, usize) {
    let mut a = 0;
    let mut start = 0;
    loop {
        let row = modes - a - 1;
        if index < start + row {
            return (a, a + 1 + index - start);
        }
        start += row;
        a += 1;
    }
}

/// The two occupied positions of a weight-2 sequence.
pub fn pair_positions(s: &OccupationSequence) -> Option<(usize, usize)> {
    if s.weight() != 2 {
        return None;
    }
    let mut it = s.positions();
    Some((it.next()?, it.next()?))
}
