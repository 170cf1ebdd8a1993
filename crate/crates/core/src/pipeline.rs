//! End-to-end smoothed reconstruction: deck reconstruction, greedy assembly
//! and a majority vote over independent repetitions.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assemble::{assemble_from_deck, choose_k, Assembly, DEFAULT_K_CONSTANT};
use crate::branch::{reconstruct_deck, MultiplicityOracle, TraceOracle, TraceOracleConfig};
use crate::channel::{DeletionChannel, TracePool};
use crate::error::{invalid, resource, Result};
use crate::rng;
use crate::word::BitString;

/// Failure probability allowed to a single deck reconstruction.
pub const UNIT_TAU: f64 = 0.4;

/// `⌈50·ln(1/τ)⌉` repetitions.
pub fn default_repetitions(tau: f64) -> usize {
    (50.0 * (1.0 / tau).ln()).ceil().max(1.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub n: usize,
    pub sigma: f64,
    pub delta: f64,
    pub eta: f64,
    pub tau: f64,
    pub k_constant: f64,
    /// Overrides `⌈50·ln(1/τ)⌉`.
    pub repetitions: Option<usize>,
    /// Traces drawn per repetition when simulating.
    pub traces_per_unit: usize,
    pub oracle: TraceOracleConfig,
}

impl PipelineParams {
    pub fn new(n: usize, sigma: f64, delta: f64, eta: f64, tau: f64) -> Self {
        let oracle = TraceOracleConfig::new(n, delta);
        Self {
            n,
            sigma,
            delta,
            eta,
            tau,
            k_constant: DEFAULT_K_CONSTANT,
            repetitions: None,
            traces_per_unit: oracle.policy.cap(),
            oracle,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("deletion rate {} outside (0, 1)", self.delta)));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(invalid(format!("perturbation rate {} outside (0, 1]", self.sigma)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(invalid(format!("failure probability {} outside (0, 1)", self.tau)));
        }
        if self.traces_per_unit == 0 || self.repetitions == Some(0) {
            return Err(invalid("repetitions and traces per unit must be positive"));
        }
        Ok(())
    }

    pub fn k(&self) -> Result<usize> {
        choose_k(self.n, self.eta, self.sigma, self.k_constant)
    }

    pub fn repetition_count(&self) -> usize {
        self.repetitions.unwrap_or_else(|| default_repetitions(self.tau))
    }
}

/// Where each repetition's traces come from.
#[derive(Clone, Copy, Debug)]
pub enum TraceSource<'a> {
    /// Fresh traces of `x` for every repetition.
    Simulate { x: &'a BitString, seed: u64 },
    /// A fixed pool split into disjoint consecutive batches.
    Pool(&'a TracePool),
}

/// What one repetition produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitOutcome {
    pub answer: Option<BitString>,
    pub deck_valid: bool,
    pub calls: usize,
    pub failed_calls: usize,
    pub traces: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    /// The majority answer; `None` on a tie or when every unit failed.
    pub output: Option<BitString>,
    pub k: usize,
    pub votes: usize,
    pub units: Vec<UnitOutcome>,
}

/// Fails every query once `deadline` has passed.
struct Deadline<'a, O> {
    inner: &'a O,
    deadline: Option<Instant>,
}

impl<O: MultiplicityOracle> MultiplicityOracle for Deadline<'_, O> {
    fn multiplicity(&self, w: &BitString, tau: f64) -> Result<Option<usize>> {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(resource("wall-clock deadline reached"));
        }
        self.inner.multiplicity(w, tau)
    }
}

/// Runs `R` independent deck-and-assemble units and returns the majority.
///
/// A `deadline` turns overlong runs into a resource-limit error.
pub fn reconstruct(
    source: TraceSource<'_>,
    params: &PipelineParams,
    deadline: Option<Instant>,
) -> Result<Reconstruction> {
    params.validate()?;
    let k = params.k()?;
    let reps = params.repetition_count();
    if let TraceSource::Pool(pool) = source {
        if pool.n != params.n {
            return Err(invalid(format!("pool is for n={}, expected {}", pool.n, params.n)));
        }
        if pool.len() < reps {
            return Err(invalid(format!(
                "{} traces cannot be split into {reps} batches",
                pool.len()
            )));
        }
    }
    let units: Vec<UnitOutcome> = (0..reps)
        .into_par_iter()
        .map(|r| run_unit(source, params, k, r, deadline))
        .collect::<Result<_>>()?;
    let mut tally: BTreeMap<&BitString, usize> = BTreeMap::new();
    for answer in units.iter().filter_map(|u| u.answer.as_ref()) {
        *tally.entry(answer).or_default() += 1;
    }
    let best = tally.values().copied().max().unwrap_or(0);
    let leaders: Vec<&BitString> = tally
        .iter()
        .filter(|(_, &v)| v == best)
        .map(|(s, _)| *s)
        .collect();
    let output = match leaders.as_slice() {
        [single] if best > 0 => Some((*single).clone()),
        _ => None,
    };
    Ok(Reconstruction {
        output,
        k,
        votes: best,
        units,
    })
}

fn run_unit(
    source: TraceSource<'_>,
    params: &PipelineParams,
    k: usize,
    r: usize,
    deadline: Option<Instant>,
) -> Result<UnitOutcome> {
    if deadline.is_some_and(|d| Instant::now() >= d) {
        return Err(resource("wall-clock deadline reached"));
    }
    let owned;
    let (traces, seed): (&[BitString], u64) = match source {
        TraceSource::Simulate { x, seed } => {
            if x.len() != params.n {
                return Err(invalid(format!("source has length {}, expected {}", x.len(), params.n)));
            }
            let unit_seed = rng::derive(seed, r as u64);
            owned = DeletionChannel::new(params.delta)?.sample_pool(x, params.traces_per_unit, unit_seed);
            (&owned.traces, rng::derive(unit_seed, 1))
        }
        TraceSource::Pool(pool) => {
            let reps = params.repetition_count();
            let size = pool.len() / reps;
            let base = pool.seed.unwrap_or(0);
            (&pool.traces[r * size..(r + 1) * size], rng::derive(base, r as u64))
        }
    };
    let oracle = TraceOracle {
        traces,
        n: params.n,
        delta: params.delta,
        seed,
        config: params.oracle,
    };
    let guarded = Deadline {
        inner: &oracle,
        deadline,
    };
    let report = reconstruct_deck(&guarded, params.n, k, UNIT_TAU)?;
    let answer = if report.stopped_at.is_some() {
        None
    } else {
        match assemble_from_deck(&report.deck, params.n)? {
            Assembly::Success(x) => Some(x),
            Assembly::Fail(_) => None,
        }
    };
    Ok(UnitOutcome {
        answer,
        deck_valid: report.valid,
        calls: report.calls,
        failed_calls: report.failed_calls,
        traces: traces.len(),
    })
}
