//! Greedy assembly of a string from its k-deck, and the k-goodness of
//! perturbed strings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Perturbation;
use crate::deck::{is_k_good, SubwordDeck};
use crate::error::{invalid, Result};
use crate::rng;
use crate::word::{left_extensions, BitString};

/// Default constant in `k = ⌈C·log₂(n/η)/σ⌉`.
pub const DEFAULT_K_CONSTANT: f64 = 6.0;

/// Why the greedy assembler gave up.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum AssemblyFailure {
    /// Deck multiplicities do not sum to `n - k + 1`.
    WrongTotal { expected: usize, found: usize },
    /// The words without a right-extension do not have total multiplicity 1.
    NoUniqueEnd { candidates: usize },
    /// The window starting at `position` does not have exactly one
    /// left-extension.
    AmbiguousLeftExtension { position: usize, candidates: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assembly {
    Success(BitString),
    Fail(AssemblyFailure),
}

impl Assembly {
    pub fn string(&self) -> Option<&BitString> {
        match self {
            Assembly::Success(x) => Some(x),
            Assembly::Fail(_) => None,
        }
    }
}

/// Rebuilds a length-`n` string from its k-deck, right to left.
///
/// The last window is the unique deck word with no right-extension in the
/// deck; every earlier bit comes from the unique left-extension of the
/// current leftmost window. Correct whenever the source is k-good.
pub fn assemble_from_deck(deck: &SubwordDeck, n: usize) -> Result<Assembly> {
    let k = deck.k();
    if k == 0 || k > n {
        return Err(invalid(format!("deck word length {k} out of range 1..={n}")));
    }
    let expected = n - k + 1;
    if deck.total() != expected {
        return Ok(Assembly::Fail(AssemblyFailure::WrongTotal {
            expected,
            found: deck.total(),
        }));
    }
    let ends: Vec<(&BitString, usize)> = deck
        .iter()
        .filter(|(w, _)| deck.right_extension_count(w) == 0)
        .collect();
    let candidates: usize = ends.iter().map(|(_, c)| c).sum();
    if candidates != 1 {
        return Ok(Assembly::Fail(AssemblyFailure::NoUniqueEnd { candidates }));
    }
    // Bits are collected in reverse and flipped at the end.
    let mut window = ends[0].0.clone();
    let mut reversed: Vec<u8> = window.bits().iter().rev().copied().collect();
    for position in (1..=n - k).rev() {
        let candidates = deck.left_extension_count(&window);
        if candidates != 1 {
            return Ok(Assembly::Fail(AssemblyFailure::AmbiguousLeftExtension {
                position,
                candidates,
            }));
        }
        let next = left_extensions(&window)?
            .into_iter()
            .find(|e| deck.count(e) > 0)
            .expect("one left-extension is present");
        reversed.push(next.get(0));
        window = next;
    }
    reversed.reverse();
    Ok(Assembly::Success(BitString::new(reversed)?))
}

/// `⌈c·log₂(n/η)/σ⌉`, clipped to `1..=n-1` (to 1 when `n = 1`).
pub fn choose_k(n: usize, eta: f64, sigma: f64, c: f64) -> Result<usize> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if !(eta > 0.0 && eta < 1.0) || !(sigma > 0.0 && sigma <= 1.0) || !(c > 0.0) {
        return Err(invalid(format!("bad parameters eta={eta} sigma={sigma} c={c}")));
    }
    let raw = (c * (n as f64 / eta).log2() / sigma).ceil();
    Ok((raw.max(1.0) as usize).min(n.saturating_sub(1).max(1)))
}

/// Fraction of `trials` σ-perturbations of `x` that are k-good. Trial `t`
/// uses random stream `t` under `seed`.
pub fn goodness_rate(x: &BitString, sigma: f64, k: usize, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    if k == 0 || k > x.len() {
        return Err(invalid(format!("k = {k} out of range for n = {}", x.len())));
    }
    let perturb = Perturbation::with_closed_range(sigma)?;
    let good = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, t as u64);
            is_k_good(&perturb.apply(x, &mut rng), k)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&g| g)
        .count();
    Ok(good as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deck::build_deck;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn worked_examples() {
        let deck: SubwordDeck = "001 1\n011 1\n110 1\n".parse().unwrap();
        assert_eq!(assemble_from_deck(&deck, 5).unwrap(), Assembly::Success(bs("00110")));
        let deck = build_deck(&bs("1101011"), 3).unwrap();
        assert!(matches!(
            assemble_from_deck(&deck, 7).unwrap(),
            Assembly::Fail(AssemblyFailure::NoUniqueEnd { candidates: 0 })
        ));
        let x = bs("10110");
        let deck = build_deck(&x, 5).unwrap();
        assert_eq!(assemble_from_deck(&deck, 5).unwrap(), Assembly::Success(x));
    }

    #[test]
    fn failures_are_values() {
        let deck: SubwordDeck = "001 1\n011 1\n".parse().unwrap();
        assert!(matches!(
            assemble_from_deck(&deck, 5).unwrap(),
            Assembly::Fail(AssemblyFailure::WrongTotal { expected: 3, found: 2 })
        ));
        let deck = build_deck(&bs("0000"), 2).unwrap();
        assert!(matches!(assemble_from_deck(&deck, 4).unwrap(), Assembly::Fail(_)));
        assert!(assemble_from_deck(&deck, 1).is_err());
    }

    #[test]
    fn round_trip_on_good_strings() {
        for n in 1..=10 {
            for x in BitString::all_of_length(n) {
                for k in 1..=n {
                    let deck = build_deck(&x, k).unwrap();
                    let out = assemble_from_deck(&deck, n).unwrap();
                    if is_k_good(&x, k).unwrap() {
                        assert_eq!(out, Assembly::Success(x.clone()), "{x} k={k}");
                    } else {
                        assert!(matches!(out, Assembly::Fail(_)), "{x} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn k_choice() {
        assert_eq!(choose_k(64, 0.1, 1.0, 6.0).unwrap(), 56);
        assert_eq!(choose_k(64, 0.1, 0.5, 6.0).unwrap(), 63);
        assert_eq!(choose_k(1, 0.1, 0.5, 6.0).unwrap(), 1);
        assert!(choose_k(64, 0.0, 0.5, 6.0).is_err());
    }

    #[test]
    fn goodness_rates() {
        let x = BitString::zeros(32);
        assert_eq!(goodness_rate(&x, 1.0, 32, 50, 1).unwrap(), 1.0 - goodness_rate_constant_fraction(32, 50, 1));
        assert_eq!(goodness_rate(&x, 0.0, 4, 20, 1).unwrap(), 0.0);
        assert!(goodness_rate(&x, 0.5, 4, 0, 1).is_err());
        let a = goodness_rate(&x, 0.5, 12, 200, 3).unwrap();
        let b = goodness_rate(&x, 0.5, 12, 200, 3).unwrap();
        assert_eq!(a, b);
    }

    /// At `k = n` only constant perturbations fail to be good.
    fn goodness_rate_constant_fraction(n: usize, trials: usize, seed: u64) -> f64 {
        let p = Perturbation::new(1.0).unwrap();
        let constant = (0..trials)
            .filter(|&t| {
                let y = p.apply(&BitString::zeros(n), &mut rng::stream(seed, t as u64));
                y.weight() == 0 || y.weight() == n
            })
            .count();
        constant as f64 / trials as f64
    }
}
