//! Multiplicity by LP inversion, for any deletion rate below one.
//!
//! `SW_{x,w}` is estimated on a grid `S ⊂ [δ, (1+δ)/2]`; any polynomial with
//! admissible coefficients that stays within `κ/5` of those estimates has a
//! constant term close to `#(w, x)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, resource, Result};
use crate::estimate::{
    degree_moments, estimate_sw_at, plan_budget_with_range, BudgetPolicy, MeanEstimate,
};
use crate::lp::{solve, LinearProgram, LpOutcome, Sense, SimplexOptions};
use crate::poly::{coefficient_cap, truncation_threshold, SubwordPolynomial, TruncationMode};
use crate::rng;
use crate::small::round_clamped;
use crate::word::BitString;

/// Smallest admissible grid step.
pub const STEP_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LargeMode {
    /// Coefficients in `[0, n^k]`, `κ = n^{-c·k/(1-δ)}`, `Δ = κ/(2n^{k+2})`.
    Weak,
    /// Coefficients in `[0, m_ℓ]`, truncated at degree `d`,
    /// `κ = ((1/n)((1-δ)/2)^k)^{c/(1-δ)}`, `Δ = κ/(2d²·m_d)`.
    Strong,
}

/// How `SW_{x,w}(ζ)` is estimated at the grid points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluator {
    /// Mean coefficients of `SW_{y,w}`, re-expanded at every `ζ`.
    Taylor,
    /// Thin every trace from `δ` to `ζ` and count `w`.
    Resample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeParams {
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub tau: f64,
    pub mode: LargeMode,
    /// Exponent constant in `κ`.
    pub c_kappa: f64,
    /// The constant `c` of the large-rate truncation degree.
    pub c_trunc: f64,
    /// Pick `κ` empirically instead of from the formula.
    pub calibrated: bool,
    /// Solve for both `min q₀` and `max q₀`.
    pub certify: bool,
    pub evaluator: Evaluator,
    pub policy: BudgetPolicy,
    /// Grid size used in calibrated mode.
    pub calibration_points: usize,
    pub max_halvings: usize,
    /// Smallest `κ` tried in calibrated mode.
    pub kappa_min: f64,
    pub grid_cap: usize,
}

impl LargeParams {
    pub fn new(n: usize, k: usize, delta: f64, tau: f64) -> Self {
        Self {
            n,
            k,
            delta,
            tau,
            mode: LargeMode::Strong,
            c_kappa: 1.0,
            c_trunc: 1.0,
            calibrated: true,
            certify: true,
            evaluator: Evaluator::Taylor,
            policy: BudgetPolicy::default(),
            calibration_points: 513,
            max_halvings: 40,
            kappa_min: 1e-10,
            grid_cap: 1 << 20,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(invalid(format!("need 1 <= k <= n, got n={} k={}", self.n, self.k)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("deletion rate {} outside (0, 1)", self.delta)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(invalid(format!("failure probability {} outside (0, 1)", self.tau)));
        }
        if !(self.c_kappa > 0.0 && self.c_kappa.is_finite()) {
            return Err(invalid("c_kappa must be positive"));
        }
        if self.calibration_points < 2 {
            return Err(invalid("calibration needs at least two grid points"));
        }
        Ok(())
    }

    /// Highest degree in the model: `n - k`, or `min(d, n - k)` when strong.
    pub fn degree(&self) -> Result<usize> {
        self.validate()?;
        let full = self.n - self.k;
        Ok(match self.mode {
            LargeMode::Weak => full,
            LargeMode::Strong => {
                truncation_threshold(self.n, self.k, self.delta, TruncationMode::Large, self.c_trunc)?
                    .d
                    .min(full)
            }
        })
    }

    /// Upper bounds on `q_0..=q_degree`.
    pub fn coefficient_bounds(&self) -> Result<Vec<f64>> {
        let degree = self.degree()?;
        Ok(match self.mode {
            LargeMode::Weak => vec![(self.n as f64).powi(self.k as i32); degree + 1],
            LargeMode::Strong => (0..=degree).map(|l| coefficient_cap(self.n, self.k, l)).collect(),
        })
    }

    fn truncated(&self) -> Result<bool> {
        Ok(self.degree()? < self.n - self.k)
    }

    /// Per-point slack for separation `κ`.
    pub fn slack(&self, kappa: f64) -> Result<f64> {
        Ok(if self.truncated()? {
            kappa / 5.0 + kappa / 100.0
        } else {
            kappa / 5.0
        })
    }
}

/// The evaluation grid `ζ_j = δ + jΔ`, `j = 0..=L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kappa: f64,
    pub step: f64,
    pub points: Vec<f64>,
}

impl GridSpec {
    /// `L + 1` points with `L = ⌊((1-δ)/2)/Δ⌋`.
    pub fn with_step(delta: f64, kappa: f64, step: f64, cap: usize) -> Result<Self> {
        if !(step >= STEP_FLOOR) {
            return Err(resource(format!(
                "grid step {step:.3e} below the floor {STEP_FLOOR:.0e}"
            )));
        }
        let last = ((1.0 - delta) / 2.0 / step).floor();
        if last + 1.0 > cap as f64 {
            return Err(resource(format!(
                "grid step {step:.3e} needs {:.3e} points, cap is {cap}",
                last + 1.0
            )));
        }
        let points = (0..=last as usize).map(|j| delta + j as f64 * step).collect();
        Ok(Self {
            kappa,
            step,
            points,
        })
    }

    /// `count` evenly spaced points covering `[δ, (1+δ)/2]`.
    pub fn uniform(delta: f64, kappa: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(invalid("a grid needs at least two points"));
        }
        let step = (1.0 - delta) / 2.0 / (count - 1) as f64;
        let points = (0..count).map(|j| delta + j as f64 * step).collect();
        Ok(Self {
            kappa,
            step,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `κ` and `Δ` from the mode's formulas.
pub fn formula_kappa_step(params: &LargeParams) -> Result<(f64, f64)> {
    params.validate()?;
    let (n, k, delta) = (params.n as f64, params.k as i32, params.delta);
    let power = params.c_kappa / (1.0 - delta);
    Ok(match params.mode {
        LargeMode::Weak => {
            let kappa = n.powf(-(k as f64) * power);
            (kappa, kappa / (2.0 * n.powi(k + 2)))
        }
        LargeMode::Strong => {
            let kappa = ((1.0 / n) * ((1.0 - delta) / 2.0).powi(k)).powf(power);
            let d = params.degree()?.max(1) as f64;
            let m_d = coefficient_cap(params.n, params.k, params.degree()?);
            (kappa, kappa / (2.0 * d * d * m_d))
        }
    })
}

pub fn build_grid(params: &LargeParams) -> Result<GridSpec> {
    let (kappa, step) = formula_kappa_step(params)?;
    GridSpec::with_step(params.delta, kappa, step, params.grid_cap)
}

/// Variables `q_0..=q_D` in `[0, bounds_ℓ]` and, for every grid point,
/// `|Σ q_ℓ ζ^ℓ - target| ≤ slack`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpModel {
    pub bounds: Vec<f64>,
    pub points: Vec<f64>,
    pub targets: Vec<f64>,
    pub slack: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Feasible,
    MinQ0,
    MaxQ0,
}

impl LpModel {
    pub fn new(bounds: Vec<f64>, points: Vec<f64>, targets: Vec<f64>, slack: f64) -> Result<Self> {
        if bounds.is_empty() || points.len() != targets.len() || points.is_empty() {
            return Err(invalid("model needs variables and one target per grid point"));
        }
        if !(slack >= 0.0) || targets.iter().any(|t| !t.is_finite()) {
            return Err(invalid("slack and targets must be finite"));
        }
        Ok(Self {
            bounds,
            points,
            targets,
            slack,
        })
    }

    fn monomials(&self, zeta: f64) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.bounds.len());
        let mut p = 1.0;
        for _ in 0..self.bounds.len() {
            row.push(p);
            p *= zeta;
        }
        row
    }

    /// Signed amount by which `q` leaves the band at point `i`.
    fn violation(&self, q: &[f64], i: usize) -> f64 {
        let v = self.monomials(self.points[i]).iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
        (v - self.targets[i]).abs() - self.slack
    }

    /// Largest constraint violation of `q` over the whole grid.
    pub fn max_violation(&self, q: &[f64]) -> f64 {
        (0..self.points.len())
            .map(|i| self.violation(q, i))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Solves the model over every grid row.
///
/// Returns `None` when the model is infeasible.
pub fn solve_feasibility(model: &LpModel, objective: Objective) -> Result<Option<Vec<f64>>> {
    let dim = model.bounds.len();
    let mut lp = LinearProgram::new(vec![0.0; dim], model.bounds.clone())?;
    for (&z, &t) in model.points.iter().zip(&model.targets) {
        lp.add_row(model.monomials(z), t - model.slack, t + model.slack)?;
    }
    let mut c = vec![0.0; dim];
    c[0] = 1.0;
    let objective = match objective {
        Objective::Feasible => None,
        Objective::MinQ0 => Some((Sense::Minimize, c.as_slice())),
        Objective::MaxQ0 => Some((Sense::Maximize, c.as_slice())),
    };
    Ok(match solve(&lp, objective, &SimplexOptions::default())? {
        LpOutcome::Infeasible { .. } => None,
        LpOutcome::Optimal { x, .. } => Some(x),
    })
}

/// Where the grid targets come from.
#[derive(Clone, Copy, Debug)]
pub enum SwSource<'a> {
    /// Zero-noise values of a known polynomial.
    Exact(&'a SubwordPolynomial),
    /// Traces drawn at the parameter rate; `seed` drives resampling.
    Traces {
        traces: &'a [BitString],
        seed: u64,
    },
}

/// Outcome of one LP-inversion call; `value` is `None` on failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeEstimate {
    pub value: Option<usize>,
    /// The constant term the answer was rounded from.
    pub raw: Option<f64>,
    /// `[min q₀, max q₀]` of the final model, when both were solved.
    pub interval: Option<[f64; 2]>,
    /// Both ends of the interval round to the same integer.
    pub certified: bool,
    pub clamped: bool,
    pub kappa: f64,
    pub step: f64,
    pub grid_points: usize,
    pub degree: usize,
    /// Largest standard error of the grid estimates.
    pub noise: f64,
    pub halvings: usize,
    pub planned_samples: u64,
    pub used_samples: usize,
    pub capped: bool,
    /// Set when the calibration search stopped on a numerical breakdown.
    pub solver_error: Option<String>,
}

struct Targets {
    values: Vec<f64>,
    noise: f64,
    planned: u64,
    used: usize,
    capped: bool,
}

fn grid_targets(
    w: &BitString,
    source: SwSource<'_>,
    params: &LargeParams,
    grid: &GridSpec,
    per_point_eps: f64,
    want_noise: bool,
) -> Result<Targets> {
    match source {
        SwSource::Exact(poly) => {
            if poly.k() != params.k || poly.n() != params.n {
                return Err(invalid("polynomial shape differs from the parameters"));
            }
            Ok(Targets {
                values: grid.points.iter().map(|&z| poly.eval_real(z)).collect(),
                noise: 0.0,
                planned: 0,
                used: 0,
                capped: false,
            })
        }
        SwSource::Traces { traces, seed } => {
            let zeta_max = grid.points.last().copied().unwrap_or(params.delta);
            let range = params.n as f64 / (1.0 - zeta_max).powi(params.k as i32);
            let budget = plan_budget_with_range(range, per_point_eps, params.tau, grid.len() as f64)?;
            let resolved = params.policy.resolve(budget.samples, traces.len())?;
            let pool = &traces[..resolved.used];
            let estimates: Vec<MeanEstimate> = match params.evaluator {
                Evaluator::Taylor => {
                    let moments = degree_moments(pool, params.delta, w, params.n - params.k)?;
                    if want_noise {
                        grid.points.par_iter().map(|&z| moments.sw_at(z)).collect()
                    } else {
                        grid.points
                            .par_iter()
                            .map(|&z| MeanEstimate {
                                mean: moments.mean_at(z),
                                std_error: 0.0,
                                samples: pool.len(),
                            })
                            .collect()
                    }
                }
                Evaluator::Resample => grid
                    .points
                    .iter()
                    .enumerate()
                    .map(|(j, &z)| estimate_sw_at(pool, params.delta, w, z, rng::derive(seed, j as u64)))
                    .collect::<Result<_>>()?,
            };
            Ok(Targets {
                noise: estimates.iter().map(|e| e.std_error).fold(0.0, f64::max),
                values: estimates.into_iter().map(|e| e.mean).collect(),
                planned: budget.samples,
                used: resolved.used,
                capped: resolved.capped,
            })
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Solved {
    Infeasible,
    Point(f64),
    Interval(f64, f64),
}

fn solve_model(model: &LpModel, both: bool) -> Result<Solved> {
    if !both {
        return Ok(match solve_feasibility(model, Objective::Feasible)? {
            None => Solved::Infeasible,
            Some(q) => Solved::Point(q[0]),
        });
    }
    let Some(lo) = solve_feasibility(model, Objective::MinQ0)? else {
        return Ok(Solved::Infeasible);
    };
    let Some(hi) = solve_feasibility(model, Objective::MaxQ0)? else {
        return Ok(Solved::Infeasible);
    };
    Ok(Solved::Interval(lo[0], hi[0].max(lo[0])))
}

/// Estimates `#(w, x)` by LP inversion.
///
/// In calibrated mode `κ` starts at `max(1, 5·z·noise)` on a uniform grid
/// and is halved while the `q₀` interval straddles a rounding boundary; the
/// search stops at the noise floor, at `kappa_min`, after `max_halvings` or
/// at the last feasible level, and an interval that never resolves is
/// answered by its rounded midpoint with `certified = false`.
///
/// Shrinking `κ` shrinks the feasible region, so feasibility and
/// certification are both monotone along the halving ladder and the level
/// sequential halving would stop at is found by bisection.
pub fn multiplicity_large(
    w: &BitString,
    source: SwSource<'_>,
    params: &LargeParams,
) -> Result<LargeEstimate> {
    params.validate()?;
    if w.len() != params.k {
        return Err(invalid(format!("pattern length {} differs from k={}", w.len(), params.k)));
    }
    let degree = params.degree()?;
    let bounds = params.coefficient_bounds()?;
    let max_value = params.n - params.k + 1;
    if !params.calibrated {
        let grid = build_grid(params)?;
        let targets = grid_targets(w, source, params, &grid, grid.kappa / 5.0, false)?;
        let model = LpModel::new(bounds, grid.points.clone(), targets.values, params.slack(grid.kappa)?)?;
        let solved = solve_model(&model, params.certify)?;
        let mut out = LargeEstimate {
            value: None,
            raw: None,
            interval: None,
            certified: false,
            clamped: false,
            kappa: grid.kappa,
            step: grid.step,
            grid_points: grid.len(),
            degree,
            noise: targets.noise,
            halvings: 0,
            planned_samples: targets.planned,
            used_samples: targets.used,
            capped: targets.capped,
            solver_error: None,
        };
        apply_solution(&mut out, &solved, max_value);
        return Ok(out);
    }

    let grid = GridSpec::uniform(params.delta, 1.0, params.calibration_points)?;
    let targets = grid_targets(w, source, params, &grid, 0.2, true)?;
    let z = (2.0 * (2.0 * grid.len() as f64 / params.tau).ln()).sqrt();
    let floor = (5.0 * z * targets.noise).max(params.kappa_min);
    let kappa0 = floor.max(1.0);
    let mut last = 0;
    while last < params.max_halvings && kappa0 / 2f64.powi(last as i32 + 1) >= floor {
        last += 1;
    }
    let mut out = LargeEstimate {
        value: None,
        raw: None,
        interval: None,
        certified: false,
        clamped: false,
        kappa: kappa0,
        step: grid.step,
        grid_points: grid.len(),
        degree,
        noise: targets.noise,
        halvings: 0,
        planned_samples: targets.planned,
        used_samples: targets.used,
        capped: targets.capped,
        solver_error: None,
    };
    let mut cache: Vec<Option<Solved>> = vec![None; last + 1];
    let mut level = |i: usize, out: &mut LargeEstimate| -> Result<Solved> {
        if let Some(s) = cache[i] {
            return Ok(s);
        }
        let kappa = kappa0 / 2f64.powi(i as i32);
        let model = LpModel::new(bounds.clone(), grid.points.clone(), targets.values.clone(), params.slack(kappa)?)?;
        let solved = match solve_model(&model, true) {
            Ok(s) => s,
            // A numerical breakdown below the first level ends the search
            // like infeasibility would.
            Err(crate::Error::Solver(msg)) if i > 0 => {
                out.solver_error = Some(msg);
                Solved::Infeasible
            }
            Err(e) => return Err(e),
        };
        cache[i] = Some(solved);
        Ok(solved)
    };
    let first = level(0, &mut out)?;
    if let Solved::Infeasible = first {
        return Ok(out);
    }
    // Deepest feasible level.
    let (mut lo, mut hi) = (0, last + 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if let Solved::Infeasible = level(mid, &mut out)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // First certified level at or above it.
    let certified = |s: Solved| matches!(s, Solved::Interval(a, b) if a.round() == b.round());
    let mut pick = lo;
    if certified(level(lo, &mut out)?) && lo > 0 {
        if certified(first) {
            pick = 0;
        } else {
            // Not certified at `a`, certified at `b`.
            let (mut a, mut b) = (0, lo);
            while b - a > 1 {
                let mid = (a + b) / 2;
                if certified(level(mid, &mut out)?) {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            pick = b;
        }
    }
    let solved = level(pick, &mut out)?;
    out.kappa = kappa0 / 2f64.powi(pick as i32);
    out.halvings = pick;
    apply_solution(&mut out, &solved, max_value);
    Ok(out)
}

fn apply_solution(out: &mut LargeEstimate, solved: &Solved, max_value: usize) {
    let (raw, certified, interval) = match *solved {
        Solved::Infeasible => {
            out.value = None;
            out.raw = None;
            out.interval = None;
            out.certified = false;
            out.clamped = false;
            return;
        }
        Solved::Point(q0) => (q0, false, None),
        Solved::Interval(lo, hi) => (0.5 * (lo + hi), lo.round() == hi.round(), Some([lo, hi])),
    };
    let (value, clamped) = round_clamped(raw, max_value);
    out.value = Some(value);
    out.raw = Some(raw);
    out.interval = interval;
    out.certified = certified;
    out.clamped = clamped;
}
