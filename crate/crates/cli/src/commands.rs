use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde_json::json;
use tracerec::assemble::{assemble_from_deck, choose_k, goodness_rate, Assembly, DEFAULT_K_CONSTANT};
use tracerec::branch::{reconstruct_deck, Algo, TraceOracle, TraceOracleConfig};
use tracerec::channel::{DeletionChannel, Perturbation, TracePool};
use tracerec::deck::SubwordDeck;
use tracerec::experiment::{run_experiment, ExperimentConfig, WorstCase};
use tracerec::large::{multiplicity_large, LargeParams, SwSource};
use tracerec::oracle::{
    exact_gamma_to_beta, exact_pattern_expectation, exact_trace_distribution,
    gamma_to_beta_by_enumeration, verify_taylor_identity,
};
use tracerec::pipeline::{reconstruct, PipelineParams, TraceSource, UNIT_TAU};
use tracerec::poly::exact_subword_poly;
use tracerec::rng;
use tracerec::small::{multiplicity_small, SmallParams};
use tracerec::word::{BitString, GappedPattern};

use crate::args::*;
use crate::config::need;
use crate::error::{in_file, CliError};
use crate::report::{persist_report, render, RunReport};

pub const DEFAULT_DECK_TAU: f64 = 0.1;
pub const DEFAULT_TAU: f64 = 0.05;
pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_GOODNESS_TRIALS: usize = 1000;

fn bits(value: &Option<String>, key: &str) -> Result<BitString, CliError> {
    need(value, key)?
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid `{key}`: {e}")))
}

/// The given seed, or a fresh one announced on stderr.
fn seed_or_fresh(seed: &mut Option<u64>) -> u64 {
    *seed.get_or_insert_with(|| {
        let s = rng::fresh_seed();
        eprintln!("seed: {s}");
        s
    })
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}"))),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_pool(path: &Path) -> Result<TracePool, CliError> {
    TracePool::parse_text(&read(path)?).map_err(|e| in_file(path, e))
}

/// Traces from a file, or sampled from `x` when no file is given. Fills in
/// `delta` and `count` so the report shows what was used.
fn trace_input(
    traces: &Option<PathBuf>,
    x: &Option<String>,
    count: &mut Option<usize>,
    delta: &mut Option<f64>,
    default_count: usize,
    seed: u64,
) -> Result<TracePool, CliError> {
    if let Some(path) = traces {
        if x.is_some() {
            return Err(CliError::Usage("give either `traces` or `x`, not both".into()));
        }
        let pool = load_pool(path)?;
        if delta.is_some_and(|d| d != pool.delta) {
            return Err(CliError::Usage(format!(
                "`delta` differs from the trace file header ({})",
                pool.delta
            )));
        }
        *delta = Some(pool.delta);
        *count = Some(pool.len());
        return Ok(pool);
    }
    if x.is_none() {
        return Err(CliError::Usage("missing required key `traces` (or `x` to sample)".into()));
    }
    let x = bits(x, "x")?;
    let d = need(delta, "delta")?;
    let m = *count.get_or_insert(default_count);
    Ok(DeletionChannel::new(d)?.sample_pool(&x, m, rng::derive(seed, 0)))
}

pub fn simulate(mut a: SimulateArgs) -> Result<(), CliError> {
    let x = bits(&a.x, "x")?;
    let delta = need(&a.delta, "delta")?;
    let count = need(&a.count, "count")?;
    let seed = seed_or_fresh(&mut a.seed);
    let pool = DeletionChannel::with_closed_range(delta)?.sample_pool(&x, count, seed);
    emit(&pool.to_text(), a.output.as_deref())
}

/// `x` itself, or a worst case of length `n` (built from `seed`).
fn source_or_worst(
    x: &Option<String>,
    worst: Option<WorstArg>,
    n: Option<usize>,
    seed: u64,
) -> Result<(BitString, bool), CliError> {
    if x.is_some() {
        return Ok((bits(x, "x")?, false));
    }
    let n = need(&n, "n")?;
    let worst: WorstCase = worst.unwrap_or(WorstArg::Zeros).into();
    Ok((worst.build(n, rng::derive(seed, 0)), true))
}

pub fn perturb(mut a: PerturbArgs) -> Result<(), CliError> {
    let sigma = need(&a.sigma, "sigma")?;
    let seed = seed_or_fresh(&mut a.seed);
    let (x, _) = source_or_worst(&a.x, a.worst_case, a.n, seed)?;
    let y = Perturbation::with_closed_range(sigma)?.apply(&x, &mut rng::stream(seed, 1));
    emit(&format!("{y}\n"), a.output.as_deref())
}

pub fn deck(mut a: DeckArgs) -> Result<(), CliError> {
    let k = need(&a.k, "k")?;
    let seed = seed_or_fresh(&mut a.seed);
    let policy = budget_policy(a.policy, a.cap);
    a.policy.get_or_insert(PolicyArg::Capped);
    a.cap = Some(policy.cap());
    let pool = trace_input(&a.traces, &a.x, &mut a.count, &mut a.delta, policy.cap(), seed)?;
    let tau = *a.tau.get_or_insert(DEFAULT_DECK_TAU);
    let mut config = TraceOracleConfig::new(pool.n, pool.delta);
    config.algo = (*a.algo.get_or_insert(AlgoArg::Auto)).into();
    config.small_variant = (*a.variant.get_or_insert(Strength::Strong)).into();
    config.large.mode = (*a.mode.get_or_insert(Strength::Strong)).into();
    config.policy = policy;
    let oracle = TraceOracle {
        traces: &pool.traces,
        n: pool.n,
        delta: pool.delta,
        seed: rng::derive(seed, 1),
        config,
    };
    let report = reconstruct_deck(&oracle, pool.n, k, tau)?;
    emit(&report.deck.to_string(), a.output.as_deref())?;
    if let Some(path) = &a.report {
        let derived = json!({
            "n": pool.n,
            "k": k,
            "estimator": if oracle.uses_small() { "small" } else { "large" },
            "base_length": report.base_length,
            "per_call_tau": report.per_call_tau,
            "traces": pool.len(),
        });
        persist_report(&RunReport::new("deck", Some(seed), &a, derived, &report)?, path)?;
    }
    if !report.valid {
        return Err(CliError::Algorithmic(format!(
            "deck is not valid: {} failed calls, inconsistent lengths {:?}, stopped at {:?}",
            report.failed_calls, report.inconsistent_lengths, report.stopped_at
        )));
    }
    Ok(())
}

pub fn assemble(a: AssembleArgs) -> Result<(), CliError> {
    let path = need(&a.deck, "deck")?;
    let n = need(&a.n, "n")?;
    let deck = SubwordDeck::parse_text(&read(&path)?).map_err(|e| in_file(&path, e))?;
    match assemble_from_deck(&deck, n)? {
        Assembly::Success(x) => emit(&format!("{x}\n"), a.output.as_deref()),
        Assembly::Fail(reason) => Err(CliError::Algorithmic(format!("assembly failed: {reason:?}"))),
    }
}

pub fn multiplicity(mut a: MultiplicityArgs) -> Result<(), CliError> {
    let w = bits(&a.w, "w")?;
    let seed = seed_or_fresh(&mut a.seed);
    let policy = budget_policy(a.policy, a.cap);
    a.policy.get_or_insert(PolicyArg::Capped);
    a.cap = Some(policy.cap());
    let pool = trace_input(&a.traces, &a.x, &mut a.count, &mut a.delta, policy.cap(), seed)?;
    let tau = *a.tau.get_or_insert(DEFAULT_TAU);
    let algo: Algo = (*a.algo.get_or_insert(AlgoArg::Auto)).into();
    let small = match algo {
        Algo::Auto => pool.delta < 0.5,
        Algo::Small => true,
        Algo::Large => false,
    };
    if small {
        let params = SmallParams {
            n: pool.n,
            k: w.len(),
            delta: pool.delta,
            tau,
            variant: (*a.variant.get_or_insert(Strength::Strong)).into(),
            policy,
        };
        let derived = json!({
            "estimator": "small",
            "degree": params.degree()?,
            "budget": params.budget()?,
            "traces": pool.len(),
        });
        let est = multiplicity_small(&w, &pool.traces, &params)?;
        emit(&format!("{}\n", est.value), None)?;
        if let Some(path) = &a.report {
            persist_report(&RunReport::new("multiplicity", Some(seed), &a, derived, &est)?, path)?;
        }
        if est.clamped {
            eprintln!("warning: estimate {} was clamped to {}", est.raw, est.value);
        }
        return Ok(());
    }
    let mut params = LargeParams::new(pool.n, w.len(), pool.delta, tau);
    params.mode = (*a.mode.get_or_insert(Strength::Strong)).into();
    params.c_kappa = *a.c_kappa.get_or_insert(params.c_kappa);
    params.calibrated = !*a.formula.get_or_insert(false);
    params.certify = *a.certify.get_or_insert(params.certify);
    params.evaluator = (*a.evaluator.get_or_insert(EvaluatorArg::Taylor)).into();
    params.policy = policy;
    let est = multiplicity_large(
        &w,
        SwSource::Traces {
            traces: &pool.traces,
            seed: rng::derive(seed, 1),
        },
        &params,
    )?;
    if let Some(path) = &a.report {
        let derived = json!({
            "estimator": "large",
            "degree": est.degree,
            "kappa": est.kappa,
            "step": est.step,
            "grid_points": est.grid_points,
            "planned_samples": est.planned_samples,
            "used_samples": est.used_samples,
            "traces": pool.len(),
        });
        persist_report(&RunReport::new("multiplicity", Some(seed), &a, derived, &est)?, path)?;
    }
    let Some(value) = est.value else {
        return Err(CliError::Algorithmic("the LP at the first separation is infeasible".into()));
    };
    let mut text = format!("{value}\n");
    if let Some([lo, hi]) = est.interval {
        let tag = if est.certified { "certified" } else { "uncertified" };
        text.push_str(&format!("interval {lo} {hi} {tag}\n"));
    }
    emit(&text, None)
}

pub fn reconstruct_cmd(mut a: ReconstructArgs) -> Result<(), CliError> {
    let seed = seed_or_fresh(&mut a.seed);
    let sigma = need(&a.sigma, "sigma")?;
    let eta = *a.eta.get_or_insert(DEFAULT_ETA);
    let tau = *a.tau.get_or_insert(DEFAULT_TAU);
    let policy = budget_policy(a.policy, a.cap);
    a.policy.get_or_insert(PolicyArg::Capped);
    a.cap = Some(policy.cap());
    let pool = match &a.traces {
        Some(path) => Some(load_pool(path)?),
        None => None,
    };
    let mut source = None;
    let (n, delta) = if let Some(pool) = &pool {
        if a.x.is_some() {
            return Err(CliError::Usage("give either `traces` or `x`, not both".into()));
        }
        if a.n.is_some_and(|n| n != pool.n) || a.delta.is_some_and(|d| d != pool.delta) {
            return Err(CliError::Usage("`n` or `delta` differs from the trace file header".into()));
        }
        (pool.n, pool.delta)
    } else {
        let (x, worst) = source_or_worst(&a.x, a.worst_case, a.n, seed)?;
        let x = if worst {
            Perturbation::new(sigma)?.apply(&x, &mut rng::stream(seed, 1))
        } else {
            x
        };
        source = Some(x);
        (source.as_ref().map_or(0, BitString::len), need(&a.delta, "delta")?)
    };
    a.n = Some(n);
    a.delta = Some(delta);
    let mut params = PipelineParams::new(n, sigma, delta, eta, tau);
    params.k_constant = *a.k_constant.get_or_insert(DEFAULT_K_CONSTANT);
    params.repetitions = a.repetitions;
    params.traces_per_unit = *a.traces_per_unit.get_or_insert(policy.cap());
    params.oracle.algo = (*a.algo.get_or_insert(AlgoArg::Auto)).into();
    params.oracle.small_variant = (*a.variant.get_or_insert(Strength::Strong)).into();
    params.oracle.policy = policy;
    let deadline = a.timeout_secs.map(|s| Instant::now() + Duration::from_secs_f64(s));
    let trace_source = match (&pool, &source) {
        (Some(pool), _) => TraceSource::Pool(pool),
        (None, Some(x)) => TraceSource::Simulate {
            x,
            seed: rng::derive(seed, 2),
        },
        (None, None) => unreachable!("a source is simulated when no traces are given"),
    };
    let out = reconstruct(trace_source, &params, deadline)?;
    let correct = source.as_ref().map(|x| out.output.as_ref() == Some(x));
    if let Some(path) = &a.report {
        let derived = json!({
            "k": out.k,
            "repetitions": params.repetition_count(),
            "traces_per_unit": params.traces_per_unit,
            "unit_tau": UNIT_TAU,
        });
        let result = json!({
            "source": source,
            "output": out.output,
            "correct": correct,
            "votes": out.votes,
            "units": out.units,
        });
        persist_report(&RunReport::new("reconstruct", Some(seed), &a, derived, &result)?, path)?;
    }
    let Some(output) = &out.output else {
        return Err(CliError::Algorithmic("no majority among the repetitions".into()));
    };
    emit(&format!("{output}\n"), None)?;
    if correct == Some(false) {
        return Err(CliError::Algorithmic("output differs from the simulated source".into()));
    }
    Ok(())
}

pub fn experiment(mut a: ExperimentArgs) -> Result<(), CliError> {
    let seed = seed_or_fresh(&mut a.seed);
    let base = ExperimentConfig::default();
    let config = ExperimentConfig {
        n: need(&a.n, "n")?,
        sigma: need(&a.sigma, "sigma")?,
        delta: need(&a.delta, "delta")?,
        eta: a.eta.unwrap_or(base.eta),
        tau: a.tau.unwrap_or(base.tau),
        trials: a.trials.unwrap_or(base.trials),
        seed,
        worst_case: a.worst_case.map_or(base.worst_case, Into::into),
        k_constant: a.k_constant.unwrap_or(base.k_constant),
        repetitions: a.repetitions,
        traces_per_unit: a.traces_per_unit.unwrap_or(budget_policy(a.policy, a.cap).cap()),
        algo: a.algo.map_or(base.algo, Into::into),
        small_variant: a.variant.map_or(base.small_variant, Into::into),
        policy: budget_policy(a.policy, a.cap),
        trial_timeout_secs: a.trial_timeout_secs,
    };
    let report = run_experiment(&config)?;
    emit(&render(&report)?, a.output.as_deref())
}

pub fn distribution(a: DistributionArgs) -> Result<(), CliError> {
    let x = bits(&a.x, "x")?;
    let delta = need(&a.delta, "delta")?;
    let mut text = String::new();
    for (y, p) in exact_trace_distribution(&x, delta)? {
        let y = if y.is_empty() { "-".to_string() } else { y.to_string() };
        text.push_str(&format!("{y} {p:e}\n"));
    }
    emit(&text, None)
}

pub fn poly(a: PolyArgs) -> Result<(), CliError> {
    let p = exact_subword_poly(&bits(&a.x, "x")?, &bits(&a.w, "w")?)?;
    emit(&format!("{p}\n"), None)
}

pub fn expectation(a: ExpectationArgs) -> Result<(), CliError> {
    let x = bits(&a.x, "x")?;
    let w = bits(&a.w, "w")?;
    let delta = need(&a.delta, "delta")?;
    let gaps = a.gaps.unwrap_or_else(|| vec![0; w.len().saturating_sub(1)]);
    let pattern = GappedPattern::new(w, gaps)?;
    let e = exact_pattern_expectation(&x, &pattern, delta)?;
    emit(&format!("{e}\n"), None)
}

pub fn gamma_beta(a: GammaBetaArgs) -> Result<(), CliError> {
    let gamma = need(&a.gamma, "gamma")?;
    let beta = need(&a.beta, "beta")?;
    let delta = need(&a.delta, "delta")?;
    let closed = exact_gamma_to_beta(&gamma, &beta, delta)?;
    let enumerated = gamma_to_beta_by_enumeration(&gamma, &beta, delta)?;
    emit(&format!("closed {closed:e}\nenumerated {enumerated:e}\n"), None)
}

pub fn taylor(a: TaylorArgs) -> Result<(), CliError> {
    let x = bits(&a.x, "x")?;
    let w = bits(&a.w, "w")?;
    let delta = need(&a.delta, "delta")?;
    let zetas: Vec<Complex64> = need(&a.zeta, "zeta")?.into_iter().map(|z| Complex64::new(z, 0.0)).collect();
    let gap = verify_taylor_identity(&x, &w, delta, &zetas)?;
    emit(&format!("{gap:e}\n"), None)
}

pub fn goodness(mut a: GoodnessArgs) -> Result<(), CliError> {
    let sigma = need(&a.sigma, "sigma")?;
    let seed = seed_or_fresh(&mut a.seed);
    let (x, _) = source_or_worst(&a.x, a.worst_case, a.n, seed)?;
    let k = match a.k {
        Some(k) => k,
        None => choose_k(
            x.len(),
            a.eta.unwrap_or(DEFAULT_ETA),
            sigma,
            a.k_constant.unwrap_or(DEFAULT_K_CONSTANT),
        )?,
    };
    let trials = a.trials.unwrap_or(DEFAULT_GOODNESS_TRIALS);
    let rate = goodness_rate(&x, sigma, k, trials, rng::derive(seed, 1))?;
    emit(&format!("k={k} trials={trials} rate={rate}\n"), None)
}
