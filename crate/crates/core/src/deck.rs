//! The k-subword deck: the multiset of all contiguous length-k windows.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::word::{left_extensions, right_extensions, BitString};

/// Multiset of length-`k` words with multiplicities.
///
/// Zero counts are never stored. The text form is one `word count` line per
/// distinct word in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordDeck {
    k: usize,
    counts: BTreeMap<BitString, usize>,
}

impl SubwordDeck {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: BTreeMap::new(),
        }
    }

    /// Builds a deck from `(word, count)` pairs, summing repeated words.
    pub fn from_counts<I>(k: usize, counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BitString, usize)>,
    {
        let mut deck = Self::new(k);
        for (w, c) in counts {
            deck.add(w, c)?;
        }
        Ok(deck)
    }

    pub fn add(&mut self, w: BitString, count: usize) -> Result<()> {
        if w.len() != self.k {
            return Err(invalid(format!(
                "deck word {w} has length {}, expected {}",
                w.len(),
                self.k
            )));
        }
        if count > 0 {
            *self.counts.entry(w).or_insert(0) += count;
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn count(&self, w: &BitString) -> usize {
        self.counts.get(w).copied().unwrap_or(0)
    }

    /// Sum of all multiplicities.
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BitString, usize)> {
        self.counts.iter().map(|(w, &c)| (w, c))
    }

    /// Total multiplicity of deck words that right-extend `w`.
    pub fn right_extension_count(&self, w: &BitString) -> usize {
        right_extensions(w)
            .map(|ext| ext.iter().map(|e| self.count(e)).sum())
            .unwrap_or(0)
    }

    /// Total multiplicity of deck words that left-extend `w`.
    pub fn left_extension_count(&self, w: &BitString) -> usize {
        left_extensions(w)
            .map(|ext| ext.iter().map(|e| self.count(e)).sum())
            .unwrap_or(0)
    }

    /// Parses the `word count` text form. Blank lines and `#` comments are
    /// skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut k = None;
        let mut deck = Self::new(0);
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let col = |s: &str| s.as_ptr() as usize - raw.as_ptr() as usize + 1;
            let mut fields = line.split_whitespace();
            let (word, count) = match (fields.next(), fields.next(), fields.next()) {
                (Some(w), Some(c), None) => (w, c),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        column: col(line),
                        message: "expected `word count`".into(),
                    })
                }
            };
            let w: BitString = word.parse().map_err(|e| match e {
                Error::Parse { column, message, .. } => Error::Parse {
                    line: line_no,
                    column: col(word) + column - 1,
                    message,
                },
                other => other,
            })?;
            let c: usize = count.parse().map_err(|_| Error::Parse {
                line: line_no,
                column: col(count),
                message: format!("invalid count {count:?}"),
            })?;
            match k {
                None => {
                    k = Some(w.len());
                    deck.k = w.len();
                }
                Some(k) if k != w.len() => {
                    return Err(Error::Parse {
                        line: line_no,
                        column: col(word),
                        message: format!("word length {} differs from {k}", w.len()),
                    })
                }
                Some(_) => {}
            }
            deck.add(w, c)?;
        }
        Ok(deck)
    }
}

impl fmt::Display for SubwordDeck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (w, c) in &self.counts {
            writeln!(f, "{w} {c}")?;
        }
        Ok(())
    }
}

impl FromStr for SubwordDeck {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_text(s)
    }
}

/// All `n - k + 1` windows of length `k`, counted with multiplicity.
pub fn build_deck(x: &BitString, k: usize) -> Result<SubwordDeck> {
    check_k(x, k)?;
    let mut deck = SubwordDeck::new(k);
    for window in x.bits().windows(k) {
        *deck
            .counts
            .entry(BitString::new(window.to_vec())?)
            .or_insert(0) += 1;
    }
    Ok(deck)
}

/// Whether the greedy assembler recovers `x` from its k-deck.
///
/// Every window at positions `1..=n-k` has exactly one left-extension in
/// the deck (counting multiplicity), and the last window has none to the
/// right.
pub fn is_k_good(x: &BitString, k: usize) -> Result<bool> {
    check_k(x, k)?;
    let deck = build_deck(x, k)?;
    let n = x.len();
    let last = x.substring(n - k, k);
    if deck.right_extension_count(&last) != 0 {
        return Ok(false);
    }
    Ok((1..=n - k).all(|j| deck.left_extension_count(&x.substring(j, k)) == 1))
}

/// The sufficient condition used for perturbed strings: all `(k-1)`-windows
/// are pairwise distinct.
pub fn has_distinct_windows(x: &BitString, len: usize) -> bool {
    if len == 0 {
        return x.len() == 0;
    }
    if len > x.len() {
        return true;
    }
    let mut seen: Vec<&[u8]> = x.bits().windows(len).collect();
    seen.sort_unstable();
    seen.windows(2).all(|p| p[0] != p[1])
}

fn check_k(x: &BitString, k: usize) -> Result<()> {
    if k == 0 || k > x.len() {
        return Err(invalid(format!(
            "k = {k} out of range 1..={} for the string length",
            x.len()
        )));
    }
    Ok(())
}
