//! Flags of every subcommand.
//!
//! Each struct doubles as the matching config-file table, so every field is
//! optional here and defaults are applied after merging.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tracerec::branch::Algo;
use tracerec::estimate::BudgetPolicy;
use tracerec::experiment::WorstCase;
use tracerec::large::{Evaluator, LargeMode};
use tracerec::small::SmallVariant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoArg {
    Auto,
    Small,
    Large,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Auto => Algo::Auto,
            AlgoArg::Small => Algo::Small,
            AlgoArg::Large => Algo::Large,
        }
    }
}

/// Weak or strong flavour of either estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Weak,
    Strong,
}

impl From<Strength> for SmallVariant {
    fn from(s: Strength) -> Self {
        match s {
            Strength::Weak => SmallVariant::Weak,
            Strength::Strong => SmallVariant::Strong,
        }
    }
}

impl From<Strength> for LargeMode {
    fn from(s: Strength) -> Self {
        match s {
            Strength::Weak => LargeMode::Weak,
            Strength::Strong => LargeMode::Strong,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorArg {
    Taylor,
    Resample,
}

impl From<EvaluatorArg> for Evaluator {
    fn from(e: EvaluatorArg) -> Self {
        match e {
            EvaluatorArg::Taylor => Evaluator::Taylor,
            EvaluatorArg::Resample => Evaluator::Resample,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyArg {
    /// Refuse plans above the cap.
    Strict,
    /// Run plans above the cap with the cap.
    Capped,
}

pub fn budget_policy(policy: Option<PolicyArg>, cap: Option<usize>) -> BudgetPolicy {
    let cap = cap.unwrap_or_else(|| BudgetPolicy::default().cap());
    match policy.unwrap_or(PolicyArg::Capped) {
        PolicyArg::Strict => BudgetPolicy::Strict { cap },
        PolicyArg::Capped => BudgetPolicy::Capped { cap },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorstArg {
    Zeros,
    Alternating,
    Random,
}

impl From<WorstArg> for WorstCase {
    fn from(w: WorstArg) -> Self {
        match w {
            WorstArg::Zeros => WorstCase::Zeros,
            WorstArg::Alternating => WorstCase::Alternating,
            WorstArg::Random => WorstCase::Random,
        }
    }
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SimulateArgs {
    /// Source string.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Number of traces.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trace file to write instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PerturbArgs {
    /// String to perturb; otherwise a worst case of length `n`.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long, value_enum)]
    pub worst_case: Option<WorstArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DeckArgs {
    /// Trace file; without it traces of `--x` are sampled.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    #[arg(long)]
    pub x: Option<String>,
    /// Traces to sample when reading none.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Needed when sampling; must match the trace file header otherwise.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Failure probability of the whole deck.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum)]
    pub algo: Option<AlgoArg>,
    /// Variant of the small-rate estimator.
    #[arg(long, value_enum)]
    pub variant: Option<Strength>,
    /// Mode of the large-rate estimator.
    #[arg(long, value_enum)]
    pub mode: Option<Strength>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Largest trace budget of one call.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// JSON run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AssembleArgs {
    /// Deck file in `word count` form.
    #[arg(long)]
    pub deck: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MultiplicityArgs {
    /// The word to count.
    #[arg(long)]
    pub w: Option<String>,
    #[arg(long)]
    pub traces: Option<PathBuf>,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum)]
    pub algo: Option<AlgoArg>,
    #[arg(long, value_enum)]
    pub variant: Option<Strength>,
    #[arg(long, value_enum)]
    pub mode: Option<Strength>,
    /// Exponent constant of the formula separation.
    #[arg(long)]
    pub c_kappa: Option<f64>,
    /// Use the formula separation and grid instead of calibrating.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub formula: Option<bool>,
    /// Report the `[min q₀, max q₀]` interval.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub certify: Option<bool>,
    #[arg(long, value_enum)]
    pub evaluator: Option<EvaluatorArg>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ReconstructArgs {
    /// Trace file; without it a perturbed source is simulated.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Source to simulate; otherwise a perturbed worst case.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long, value_enum)]
    pub worst_case: Option<WorstArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Constant in `k = ⌈c·log₂(n/η)/σ⌉`.
    #[arg(long)]
    pub k_constant: Option<f64>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub traces_per_unit: Option<usize>,
    #[arg(long, value_enum)]
    pub algo: Option<AlgoArg>,
    #[arg(long, value_enum)]
    pub variant: Option<Strength>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long)]
    pub cap: Option<usize>,
    /// Wall-clock limit; exceeding it exits with the resource code.
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentArgs {
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub delta: Option<Vec<f64>>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub worst_case: Option<WorstArg>,
    #[arg(long)]
    pub k_constant: Option<f64>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub traces_per_unit: Option<usize>,
    #[arg(long, value_enum)]
    pub algo: Option<AlgoArg>,
    #[arg(long, value_enum)]
    pub variant: Option<Strength>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long)]
    pub cap: Option<usize>,
    /// Per-trial wall-clock limit.
    #[arg(long)]
    pub trial_timeout_secs: Option<f64>,
    /// Report file instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DistributionArgs {
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PolyArgs {
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub w: Option<String>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExpectationArgs {
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub w: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Gaps between consecutive letters of `w`; contiguous by default.
    #[arg(long, value_delimiter = ',')]
    pub gaps: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GammaBetaArgs {
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<usize>>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TaylorArgs {
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub w: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Real evaluation points.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub zeta: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GoodnessArgs {
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long, value_enum)]
    pub worst_case: Option<WorstArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Window length; derived from `eta` and `k-constant` when absent.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub k_constant: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}
