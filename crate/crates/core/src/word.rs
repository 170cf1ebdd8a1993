//! Binary strings, contiguous subwords and gapped patterns.
//!
//! Strings are indexed from 0. A gapped pattern `w0 *^a1 w1 ... *^a(k-1) w(k-1)`
//! fixes the symbols of `w` and leaves `a_i` wildcard positions between
//! consecutive fixed symbols.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A string over `{0, 1}`.
///
/// The text form is ASCII `'0'`/`'1'` with no separators; the empty string
/// prints as nothing. Ordering is lexicographic on the bit sequence.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BitString(Vec<u8>);

impl BitString {
    /// Builds a string from symbols that must each be 0 or 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(invalid(format!(
                "symbol {} at position {pos} is not binary",
                bits[pos]
            )));
        }
        Ok(Self(bits))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// `0101...` of length `n`, starting with 0.
    pub fn alternating(n: usize) -> Self {
        Self((0..n).map(|i| (i % 2) as u8).collect())
    }

    /// The `n` low-order bits of `value`, most significant first.
    pub fn from_index(value: u64, n: usize) -> Self {
        Self(
            (0..n)
                .map(|i| ((value >> (n - 1 - i)) & 1) as u8)
                .collect(),
        )
    }

    /// Inverse of [`BitString::from_index`]; `None` above 64 bits.
    pub fn to_index(&self) -> Option<u64> {
        if self.0.len() > 64 {
            return None;
        }
        Some(self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
    }

    /// All `2^n` strings of length `n` in lexicographic order.
    pub fn all_of_length(n: usize) -> impl Iterator<Item = BitString> {
        assert!(n < 64, "enumeration of 2^{n} strings");
        (0..1u64 << n).map(move |v| Self::from_index(v, n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        self.0.push(bit);
    }

    /// The window `x[start .. start + len]`.
    pub fn window(&self, start: usize, len: usize) -> &[u8] {
        &self.0[start..start + len]
    }

    pub fn substring(&self, start: usize, len: usize) -> BitString {
        Self(self.window(start, len).to_vec())
    }

    pub fn with_appended(&self, bit: u8) -> BitString {
        let mut v = self.0.clone();
        v.push(bit);
        Self(v)
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn hamming_distance(&self, other: &BitString) -> usize {
        assert_eq!(self.len(), other.len(), "hamming distance of unequal lengths");
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl From<BitString> for Vec<u8> {
    fn from(s: BitString) -> Self {
        s.0
    }
}

impl AsRef<[u8]> for BitString {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.bytes()
            .enumerate()
            .map(|(i, c)| match c {
                b'0' => Ok(0),
                b'1' => Ok(1),
                _ => Err(Error::Parse {
                    line: 1,
                    column: i + 1,
                    message: format!("expected '0' or '1', found {:?}", c as char),
                }),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Self)
    }
}

impl TryFrom<String> for BitString {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BitString> for String {
    fn from(s: BitString) -> Self {
        s.to_string()
    }
}

/// A word `w` of length `k` with `k - 1` wildcard gaps between its symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GappedPattern {
    word: BitString,
    gaps: Vec<usize>,
}

impl GappedPattern {
    pub fn new(word: BitString, gaps: Vec<usize>) -> Result<Self> {
        if word.is_empty() {
            return Err(invalid("gapped pattern needs a non-empty word"));
        }
        if gaps.len() + 1 != word.len() {
            return Err(invalid(format!(
                "word of length {} needs {} gaps, got {}",
                word.len(),
                word.len() - 1,
                gaps.len()
            )));
        }
        Ok(Self { word, gaps })
    }

    /// The contiguous pattern (all gaps zero).
    pub fn contiguous(word: BitString) -> Result<Self> {
        let k = word.len();
        Self::new(word, vec![0; k.saturating_sub(1)])
    }

    pub fn word(&self) -> &BitString {
        &self.word
    }

    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    pub fn total_gap(&self) -> usize {
        self.gaps.iter().sum()
    }

    /// Distance from the first to the last fixed symbol, inclusive.
    pub fn span(&self) -> usize {
        self.word.len() + self.total_gap()
    }

    /// Offsets of the fixed symbols relative to the start position.
    pub fn offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.word.len());
        let mut at = 0;
        offsets.push(0);
        for &g in &self.gaps {
            at += g + 1;
            offsets.push(at);
        }
        offsets
    }
}

/// Number of start positions `a` with `x[a .. a + |w|] == w`.
pub fn count_subword(x: &BitString, w: &BitString) -> Result<usize> {
    if w.len() > x.len() {
        return Err(invalid(format!(
            "subword of length {} longer than string of length {}",
            w.len(),
            x.len()
        )));
    }
    Ok(count_contiguous(x.bits(), w.bits()))
}

pub(crate) fn count_contiguous(x: &[u8], w: &[u8]) -> usize {
    if w.len() > x.len() {
        return 0;
    }
    if w.is_empty() {
        return x.len() + 1;
    }
    x.windows(w.len()).filter(|win| *win == w).count()
}

/// Occurrences of a gapped pattern in `x`; zero when the span exceeds `|x|`.
pub fn count_gapped(x: &BitString, pattern: &GappedPattern) -> usize {
    count_gapped_raw(x.bits(), pattern.word.bits(), &pattern.offsets())
}

pub(crate) fn count_gapped_raw(x: &[u8], w: &[u8], offsets: &[usize]) -> usize {
    let span = offsets.last().map_or(0, |&o| o + 1);
    if span > x.len() {
        return 0;
    }
    (0..=x.len() - span)
        .filter(|&i| offsets.iter().zip(w).all(|(&o, &b)| x[i + o] == b))
        .count()
}

/// The two strings `w[1..] + b` for `b` in {0, 1}.
pub fn right_extensions(w: &BitString) -> Result<[BitString; 2]> {
    if w.is_empty() {
        return Err(invalid("extensions of the empty word"));
    }
    let stem = &w.bits()[1..];
    Ok([0u8, 1].map(|b| {
        let mut v = stem.to_vec();
        v.push(b);
        BitString(v)
    }))
}

/// The two strings `b + w[..k-1]` for `b` in {0, 1}.
pub fn left_extensions(w: &BitString) -> Result<[BitString; 2]> {
    if w.is_empty() {
        return Err(invalid("extensions of the empty word"));
    }
    let stem = &w.bits()[..w.len() - 1];
    Ok([0u8, 1].map(|b| {
        let mut v = Vec::with_capacity(w.len());
        v.push(b);
        v.extend_from_slice(stem);
        BitString(v)
    }))
}

/// All gap vectors with `parts` entries and total at most `max_total`,
/// grouped by total and in colexicographic order within a total.
pub fn gap_vectors(parts: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=max_total {
        if parts == 0 {
            if total == 0 {
                out.push(Vec::new());
            }
            continue;
        }
        let mut v = vec![0; parts];
        v[0] = total;
        loop {
            out.push(v.clone());
            // Colex successor: move one unit from the lowest nonzero slot
            // to the next slot and reset the remainder to the front.
            let Some(i) = v[..parts - 1].iter().position(|&c| c > 0) else {
                break;
            };
            let carry = v[i] - 1;
            v[i] = 0;
            v[i + 1] += 1;
            v[0] = carry;
        }
    }
    out
}
