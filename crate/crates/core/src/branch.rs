//! Branch-and-prune reconstruction of the k-deck from multiplicity queries.
//!
//! A word of length `m` can occur in `x` only if its `(m-1)`-prefix does, so
//! each stage extends the surviving words by one bit and drops the ones
//! with multiplicity zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deck::SubwordDeck;
use crate::error::{invalid, Result};
use crate::estimate::BudgetPolicy;
use crate::large::{multiplicity_large, LargeParams, SwSource};
use crate::rng;
use crate::small::{multiplicity_small, SmallParams, SmallVariant};
use crate::word::{count_subword, BitString};

/// Answers `#(w, x)` queries at failure probability `tau`; `None` is an
/// algorithmic failure.
pub trait MultiplicityOracle: Sync {
    fn multiplicity(&self, w: &BitString, tau: f64) -> Result<Option<usize>>;
}

/// Exact counts in a known string.
#[derive(Clone, Debug)]
pub struct ExactOracle<'a> {
    pub x: &'a BitString,
}

impl MultiplicityOracle for ExactOracle<'_> {
    fn multiplicity(&self, w: &BitString, _tau: f64) -> Result<Option<usize>> {
        Ok(Some(count_subword(self.x, w)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    /// Small for `δ < 1/2`, large otherwise.
    Auto,
    Small,
    Large,
}

/// Settings shared by every multiplicity call of a trace oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceOracleConfig {
    pub algo: Algo,
    pub small_variant: SmallVariant,
    pub policy: BudgetPolicy,
    /// Template for large-rate calls; `n`, `k`, `δ` and `τ` are overwritten.
    pub large: LargeParams,
}

impl TraceOracleConfig {
    pub fn new(n: usize, delta: f64) -> Self {
        Self {
            algo: Algo::Auto,
            small_variant: SmallVariant::Strong,
            policy: BudgetPolicy::default(),
            large: LargeParams::new(n, 1, delta, 0.1),
        }
    }
}

/// Multiplicities estimated from one shared trace pool.
#[derive(Clone, Debug)]
pub struct TraceOracle<'a> {
    pub traces: &'a [BitString],
    pub n: usize,
    pub delta: f64,
    pub seed: u64,
    pub config: TraceOracleConfig,
}

impl TraceOracle<'_> {
    pub fn uses_small(&self) -> bool {
        match self.config.algo {
            Algo::Auto => self.delta < 0.5,
            Algo::Small => true,
            Algo::Large => false,
        }
    }
}

impl MultiplicityOracle for TraceOracle<'_> {
    fn multiplicity(&self, w: &BitString, tau: f64) -> Result<Option<usize>> {
        if self.uses_small() {
            let params = SmallParams {
                n: self.n,
                k: w.len(),
                delta: self.delta,
                tau,
                variant: self.config.small_variant,
                policy: self.config.policy,
            };
            Ok(Some(multiplicity_small(w, self.traces, &params)?.value))
        } else {
            let mut params = self.config.large;
            params.n = self.n;
            params.k = w.len();
            params.delta = self.delta;
            params.tau = tau;
            params.policy = self.config.policy;
            let label = w.to_index().unwrap_or(0) ^ (w.len() as u64) << 56;
            let source = SwSource::Traces {
                traces: self.traces,
                seed: rng::derive(self.seed, label),
            };
            Ok(multiplicity_large(w, source, &params)?.value)
        }
    }
}

/// A reconstructed deck and what happened on the way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeckReport {
    pub deck: SubwordDeck,
    /// No failed call, no inconsistent stage, no early stop.
    pub valid: bool,
    pub calls: usize,
    pub failed_calls: usize,
    /// Word lengths whose multiplicities did not sum to `n - m + 1`.
    pub inconsistent_lengths: Vec<usize>,
    /// Set when a stage kept more words than a genuine deck can hold.
    pub stopped_at: Option<usize>,
    /// `⌊log₂ n⌋`, the length enumerated in full.
    pub base_length: usize,
    pub per_call_tau: f64,
}

/// `⌊log₂ n⌋` for `n ≥ 1`.
pub fn base_length(n: usize) -> usize {
    (usize::BITS - 1 - n.leading_zeros()) as usize
}

/// Builds `subword(x, k)` by querying `oracle`.
///
/// Words up to length `ℓ = ⌊log₂ n⌋` are enumerated in full; longer ones
/// are grown one bit per stage from the survivors. Per-call failure
/// probability is `τ'/2^k` when `k ≤ ℓ` and `τ'/(2nk)` otherwise.
pub fn reconstruct_deck<O: MultiplicityOracle + ?Sized>(
    oracle: &O,
    n: usize,
    k: usize,
    tau_prime: f64,
) -> Result<DeckReport> {
    if k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= n, got n={n} k={k}")));
    }
    if !(tau_prime > 0.0 && tau_prime < 1.0) {
        return Err(invalid(format!("failure probability {tau_prime} outside (0, 1)")));
    }
    let ell = base_length(n);
    let (start, per_call_tau) = if k <= ell {
        (k, tau_prime / 2f64.powi(k as i32))
    } else {
        (ell.max(1), tau_prime / (2.0 * n as f64 * k as f64))
    };
    let mut report = DeckReport {
        deck: SubwordDeck::new(k),
        valid: true,
        calls: 0,
        failed_calls: 0,
        inconsistent_lengths: Vec::new(),
        stopped_at: None,
        base_length: ell,
        per_call_tau,
    };
    let candidates: Vec<BitString> = BitString::all_of_length(start).collect();
    let mut survivors = query_stage(oracle, candidates, start, per_call_tau, n, &mut report)?;
    for m in start + 1..=k {
        if survivors.len() > n - (m - 1) + 1 {
            report.stopped_at = Some(m - 1);
            report.valid = false;
            break;
        }
        let candidates: Vec<BitString> = survivors
            .iter()
            .flat_map(|(w, _)| [w.with_appended(0), w.with_appended(1)])
            .collect();
        survivors = query_stage(oracle, candidates, m, per_call_tau, n, &mut report)?;
    }
    if report.stopped_at.is_none() {
        for (w, c) in survivors {
            report.deck.add(w, c)?;
        }
    }
    report.valid &= report.failed_calls == 0 && report.inconsistent_lengths.is_empty();
    Ok(report)
}

fn query_stage<O: MultiplicityOracle + ?Sized>(
    oracle: &O,
    candidates: Vec<BitString>,
    m: usize,
    tau: f64,
    n: usize,
    report: &mut DeckReport,
) -> Result<Vec<(BitString, usize)>> {
    let answers: Vec<Option<usize>> = candidates
        .par_iter()
        .map(|w| oracle.multiplicity(w, tau))
        .collect::<Result<_>>()?;
    report.calls += candidates.len();
    report.failed_calls += answers.iter().filter(|a| a.is_none()).count();
    let survivors: Vec<(BitString, usize)> = candidates
        .into_iter()
        .zip(answers)
        .filter_map(|(w, a)| a.filter(|&c| c > 0).map(|c| (w, c)))
        .collect();
    let total: usize = survivors.iter().map(|(_, c)| c).sum();
    if total != n + 1 - m {
        report.inconsistent_lengths.push(m);
    }
    Ok(survivors)
}
