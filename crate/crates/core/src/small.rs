//! Multiplicity from the Taylor expansion of the subword polynomial, for
//! deletion rates below one half.
//!
//! `#(w, x) = SW_{x,w}(0) = (1-δ)^{-k} Σ_α E_α·ξ^{|α|}` with `ξ = -δ/(1-δ)`.
//! By linearity the sum of the per-α means equals the mean over traces of
//! `SW_{y,w}(ξ)`, so one pass per trace evaluates the whole series.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimate::{mean_estimate, plan_budget, BudgetPolicy, EstimationBudget};
use crate::poly::{binomial_f64, degree_counts, eval_subword_scalar, truncation_threshold, TruncationMode};
use crate::word::BitString;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmallVariant {
    /// All gap vectors with `|α| ≤ n - k`, per-term accuracy `(1/3)((1-δ)/n)^k`.
    Weak,
    /// Gap vectors with `|α| ≤ d`, per-term accuracy `0.2/(2^k·M)`.
    Strong,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallParams {
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub tau: f64,
    pub variant: SmallVariant,
    pub policy: BudgetPolicy,
}

/// A rounded multiplicity together with the diagnostics behind it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityEstimate {
    pub value: usize,
    /// The series value before rounding.
    pub raw: f64,
    pub std_error: f64,
    /// The rounded value fell outside `[0, n-k+1]`.
    pub clamped: bool,
    pub planned_samples: u64,
    pub used_samples: usize,
    pub capped: bool,
    /// Highest degree kept in the series.
    pub degree: usize,
}

impl SmallParams {
    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(invalid(format!("need 1 <= k <= n, got n={} k={}", self.n, self.k)));
        }
        let ok = match self.variant {
            SmallVariant::Weak => self.delta > 0.0 && self.delta <= 0.5,
            SmallVariant::Strong => self.delta > 0.0 && self.delta < 0.5,
        };
        if !ok {
            return Err(invalid(format!(
                "deletion rate {} out of range for the {:?} variant",
                self.delta, self.variant
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(invalid(format!("failure probability {} outside (0, 1)", self.tau)));
        }
        Ok(())
    }

    /// Highest degree of the series: `n - k`, or `min(d, n - k)` when strong.
    pub fn degree(&self) -> Result<usize> {
        self.validate()?;
        let full = self.n - self.k;
        Ok(match self.variant {
            SmallVariant::Weak => full,
            SmallVariant::Strong => {
                truncation_threshold(self.n, self.k, self.delta, TruncationMode::Small, 1.0)?
                    .d
                    .min(full)
            }
        })
    }

    /// The per-term Hoeffding plan, with a union bound over all terms.
    pub fn budget(&self) -> Result<EstimationBudget> {
        self.validate()?;
        let (n, k) = (self.n, self.k);
        let (epsilon, terms) = match self.variant {
            SmallVariant::Weak => (
                ((1.0 - self.delta) / n as f64).powi(k as i32) / 3.0,
                binomial_f64(n - 1, k - 1),
            ),
            SmallVariant::Strong => {
                let d = truncation_threshold(n, k, self.delta, TruncationMode::Small, 1.0)?.d;
                let m = binomial_f64(d + k - 1, k - 1);
                (0.2 / (2f64.powi(k as i32) * m), m)
            }
        };
        plan_budget(n, epsilon, self.tau, terms.max(1.0))
    }
}

/// `SW_{y,w}(ξ)` restricted to degrees `≤ degree`.
fn trace_statistic(y: &[u8], w: &[u8], xi: f64, degree: usize) -> Result<f64> {
    if y.len() < w.len() {
        return Ok(0.0);
    }
    if degree >= y.len() - w.len() {
        return Ok(eval_subword_scalar(y, w, xi));
    }
    let counts = degree_counts(y, w, degree)
        .ok_or_else(|| crate::error::resource("subword counts overflow 64 bits"))?;
    Ok(counts.iter().rev().fold(0.0, |acc, &c| acc * xi + c as f64))
}

/// Estimates `#(w, x)` from traces drawn at rate `params.delta`.
///
/// Uses the first `used_samples` traces of the pool.
pub fn multiplicity_small(
    w: &BitString,
    traces: &[BitString],
    params: &SmallParams,
) -> Result<MultiplicityEstimate> {
    params.validate()?;
    if w.len() != params.k {
        return Err(invalid(format!("pattern length {} differs from k={}", w.len(), params.k)));
    }
    let budget = params.budget()?;
    let resolved = params.policy.resolve(budget.samples, traces.len())?;
    let degree = params.degree()?;
    let xi = -params.delta / (1.0 - params.delta);
    let values: Vec<f64> = traces[..resolved.used]
        .par_iter()
        .map(|y| trace_statistic(y.bits(), w.bits(), xi, degree))
        .collect::<Result<_>>()?;
    let est = mean_estimate(&values)?;
    let scale = (1.0 - params.delta).powi(params.k as i32);
    let raw = est.mean / scale;
    let (value, clamped) = round_clamped(raw, params.n - params.k + 1);
    Ok(MultiplicityEstimate {
        value,
        raw,
        std_error: est.std_error / scale,
        clamped,
        planned_samples: budget.samples,
        used_samples: resolved.used,
        capped: resolved.capped,
        degree,
    })
}

/// Nearest integer (halves away from zero) clamped to `[0, max]`.
pub(crate) fn round_clamped(raw: f64, max: usize) -> (usize, bool) {
    let r = raw.round();
    if r.is_nan() || r < 0.0 {
        (0, true)
    } else if r > max as f64 {
        (max, true)
    } else {
        (r as usize, false)
    }
}
