//! Monte-Carlo estimators over trace pools and Hoeffding sample planning.
//!
//! Every estimator reduces per-trace statistics in trace order with
//! compensated summation, so results are identical for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{resample_trace, TRACE_CHUNK};
use crate::error::{invalid, resource, Result};
use crate::poly::degree_counts;
use crate::rng;
use crate::sum::KahanSum;
use crate::word::{count_contiguous, count_gapped_raw, BitString, GappedPattern};

/// A Hoeffding sample plan for `union_count` simultaneous statistics, each
/// bounded in `[0, range]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationBudget {
    pub epsilon: f64,
    pub tau: f64,
    pub union_count: f64,
    pub range: f64,
    /// Saturates at `u64::MAX`.
    pub samples: u64,
}

/// `ceil((n²/(2ε²))·ln(2u/τ))` traces, for statistics bounded in `[0, n]`.
pub fn plan_budget(n: usize, epsilon: f64, tau: f64, union_count: f64) -> Result<EstimationBudget> {
    plan_budget_with_range(n as f64, epsilon, tau, union_count)
}

pub fn plan_budget_with_range(
    range: f64,
    epsilon: f64,
    tau: f64,
    union_count: f64,
) -> Result<EstimationBudget> {
    if !(epsilon > 0.0) {
        return Err(invalid(format!("accuracy {epsilon} must be positive")));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid(format!("failure probability {tau} outside (0, 1)")));
    }
    if !(union_count >= 1.0) {
        return Err(invalid(format!("union count {union_count} must be at least 1")));
    }
    if !(range >= 0.0 && range.is_finite()) {
        return Err(invalid(format!("statistic range {range} must be finite")));
    }
    let raw = (range * range / (2.0 * epsilon * epsilon)) * (2.0 * union_count / tau).ln();
    let samples = if !raw.is_finite() || raw >= u64::MAX as f64 {
        u64::MAX
    } else {
        (raw.ceil() as u64).max(1)
    };
    Ok(EstimationBudget {
        epsilon,
        tau,
        union_count,
        range,
        samples,
    })
}

/// What to do when a plan asks for more traces than allowed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BudgetPolicy {
    /// Plans above `cap` are a resource-limit error.
    Strict { cap: usize },
    /// Plans above `cap` run with `cap` traces and are flagged.
    Capped { cap: usize },
}

impl Default for BudgetPolicy {
    fn default() -> Self {
        BudgetPolicy::Capped { cap: 20_000 }
    }
}

/// The number of traces a call actually uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedBudget {
    pub planned: u64,
    pub used: usize,
    /// `used < planned`.
    pub capped: bool,
}

impl BudgetPolicy {
    pub fn cap(&self) -> usize {
        match *self {
            BudgetPolicy::Strict { cap } | BudgetPolicy::Capped { cap } => cap,
        }
    }

    /// Resolves a plan against the policy and the `available` pool size.
    pub fn resolve(&self, planned: u64, available: usize) -> Result<ResolvedBudget> {
        match *self {
            BudgetPolicy::Strict { cap } => {
                if planned > cap as u64 {
                    return Err(resource(format!(
                        "plan needs {planned} traces, cap is {cap}"
                    )));
                }
                if planned > available as u64 {
                    return Err(resource(format!(
                        "plan needs {planned} traces, pool has {available}"
                    )));
                }
                Ok(ResolvedBudget {
                    planned,
                    used: planned as usize,
                    capped: false,
                })
            }
            BudgetPolicy::Capped { cap } => {
                let used = planned.min(cap as u64).min(available as u64) as usize;
                if used == 0 {
                    return Err(resource("no traces available"));
                }
                Ok(ResolvedBudget {
                    planned,
                    used,
                    capped: (used as u64) < planned,
                })
            }
        }
    }
}

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Mean and standard error of `values` with compensated two-pass sums.
pub fn mean_estimate(values: &[f64]) -> Result<MeanEstimate> {
    if values.is_empty() {
        return Err(invalid("empty sample"));
    }
    let m = values.len() as f64;
    let mean = values.iter().copied().collect::<KahanSum>().value() / m;
    let var = if values.len() > 1 {
        values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .collect::<KahanSum>()
            .value()
            / (m - 1.0)
    } else {
        0.0
    };
    Ok(MeanEstimate {
        mean,
        std_error: (var / m).sqrt(),
        samples: values.len(),
    })
}

/// Ẽ_α: the mean count of the gapped pattern over the traces.
pub fn estimate_e_alpha(traces: &[BitString], p: &GappedPattern) -> Result<f64> {
    if traces.is_empty() {
        return Err(invalid("empty trace batch"));
    }
    let offsets = p.offsets();
    let values: Vec<f64> = traces
        .par_iter()
        .map(|y| count_gapped_raw(y.bits(), p.word().bits(), &offsets) as f64)
        .collect();
    Ok(mean_estimate(&values)?.mean)
}

/// ŜW(δ'): resamples every trace from `δ` down to `δ'`, averages `#(w, y')`
/// and divides by `(1-δ')^k`.
///
/// Chunk `c` of the traces resamples with stream `c` under `seed`, so grid
/// points estimated with different seeds are independent.
pub fn estimate_sw_at(
    traces: &[BitString],
    delta: f64,
    w: &BitString,
    delta_prime: f64,
    seed: u64,
) -> Result<MeanEstimate> {
    if traces.is_empty() {
        return Err(invalid("empty trace batch"));
    }
    if delta_prime < delta {
        return Err(invalid(format!(
            "target rate {delta_prime} below batch rate {delta}"
        )));
    }
    if delta_prime >= 1.0 {
        return Err(invalid("target rate must be below 1"));
    }
    let scale = (1.0 - delta_prime).powi(w.len() as i32);
    let values: Vec<f64> = traces
        .par_chunks(TRACE_CHUNK)
        .enumerate()
        .map(|(c, chunk)| -> Result<Vec<f64>> {
            let mut rng = rng::stream(seed, c as u64);
            chunk
                .iter()
                .map(|y| {
                    let thinned = resample_trace(y, delta, delta_prime, &mut rng)?;
                    Ok(count_contiguous(thinned.bits(), w.bits()) as f64 / scale)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    mean_estimate(&values)
}

/// Empirical moments of the coefficient vectors of `SW_{y,w}` over traces.
///
/// `mean[ℓ]` estimates `Σ_{|α|=ℓ} E_α`, so `Σ_ℓ mean[ℓ]·ξ^ℓ / (1-δ)^k`
/// estimates `SW_{x,w}(δ + ξ(1-δ))`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeMoments {
    pub k: usize,
    pub delta: f64,
    pub samples: usize,
    pub mean: Vec<f64>,
    /// Row-major sample covariance of the coefficient vectors.
    pub covariance: Vec<f64>,
}

impl DegreeMoments {
    pub fn degree(&self) -> usize {
        self.mean.len().saturating_sub(1)
    }

    /// The point estimate alone, without the covariance pass.
    pub fn mean_at(&self, zeta: f64) -> f64 {
        let xi = (zeta - self.delta) / (1.0 - self.delta);
        let v = self.mean.iter().rev().fold(0.0, |acc, m| acc * xi + m);
        v / (1.0 - self.delta).powi(self.k as i32)
    }

    /// The estimate of `SW_{x,w}(ζ)` for `ζ ≥ δ`.
    pub fn sw_at(&self, zeta: f64) -> MeanEstimate {
        let xi = (zeta - self.delta) / (1.0 - self.delta);
        let scale = (1.0 - self.delta).powi(self.k as i32);
        let powers = powers(xi, self.mean.len());
        let mean = powers
            .iter()
            .zip(&self.mean)
            .map(|(p, m)| p * m)
            .collect::<KahanSum>()
            .value();
        let dim = self.mean.len();
        let mut var = KahanSum::new();
        for i in 0..dim {
            for j in 0..dim {
                var.add(powers[i] * powers[j] * self.covariance[i * dim + j]);
            }
        }
        MeanEstimate {
            mean: mean / scale,
            std_error: (var.value().max(0.0) / self.samples as f64).sqrt() / scale,
            samples: self.samples,
        }
    }
}

fn powers(x: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut p = 1.0;
    for _ in 0..len {
        out.push(p);
        p *= x;
    }
    out
}

/// Coefficient moments of `SW_{y,w}` up to `max_degree` over the traces.
pub fn degree_moments(
    traces: &[BitString],
    delta: f64,
    w: &BitString,
    max_degree: usize,
) -> Result<DegreeMoments> {
    if traces.is_empty() {
        return Err(invalid("empty trace batch"));
    }
    if w.is_empty() {
        return Err(invalid("pattern must be non-empty"));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(invalid(format!("deletion rate {delta} outside [0, 1)")));
    }
    let dim = max_degree + 1;
    let rows: Vec<Vec<f64>> = traces
        .par_iter()
        .map(|y| {
            let mut row = vec![0.0; dim];
            let counts = degree_counts(y.bits(), w.bits(), max_degree)
                .ok_or_else(|| resource("subword counts overflow 64 bits"))?;
            for (r, c) in row.iter_mut().zip(counts) {
                *r = c as f64;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let m = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for (l, v) in mean.iter_mut().enumerate() {
        *v = rows.iter().map(|r| r[l]).collect::<KahanSum>().value() / m;
    }
    let mut covariance = vec![0.0; dim * dim];
    if rows.len() > 1 {
        for i in 0..dim {
            for j in i..dim {
                let c = rows
                    .iter()
                    .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                    .collect::<KahanSum>()
                    .value()
                    / (m - 1.0);
                covariance[i * dim + j] = c;
                covariance[j * dim + i] = c;
            }
        }
    }
    Ok(DegreeMoments {
        k: w.len(),
        delta,
        samples: rows.len(),
        mean,
        covariance,
    })
}
