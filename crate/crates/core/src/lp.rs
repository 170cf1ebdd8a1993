//! A dense dual simplex for linear programs with few variables, box bounds
//! and many ranged rows.
//!
//! A vertex is described by a working set of `n` tight constraints (bounds
//! or rows, each at one side) whose normals form the square basis `B`. The
//! start is the box corner picked by the cost signs, which is dual feasible;
//! each step brings the most violated constraint into the working set and
//! drops the one whose multiplier hits zero first. A violated constraint that
//! nothing can make room for proves infeasibility. `B⁻¹` is kept explicitly
//! and rebuilt every few steps, so a step costs `O(n·(m + n))`.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

/// Variables with finite box bounds and ranged rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid("bound vectors differ in length"));
        }
        for (j, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(invalid(format!("variable {j} has bounds [{l}, {u}]")));
            }
        }
        Ok(Self {
            lower,
            upper,
            rows: Vec::new(),
        })
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, lower: f64, upper: f64) -> Result<()> {
        if coeffs.len() != self.lower.len() {
            return Err(invalid(format!(
                "row has {} coefficients for {} variables",
                coeffs.len(),
                self.lower.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) || lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(invalid(format!("malformed row with range [{lower}, {upper}]")));
        }
        self.rows.push(Row {
            coeffs,
            lower,
            upper,
        });
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Largest bound or row-range violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let a: f64 = row.coeffs.iter().zip(x).map(|(c, v)| c * v).sum();
            worst = worst.max(row.lower - a).max(a - row.upper);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        objective: f64,
        iterations: usize,
    },
    /// `residual` is the violation of the constraint that proved it, in
    /// scaled units.
    Infeasible { residual: f64, iterations: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub max_iterations: usize,
    pub refactor_every: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-11,
            max_iterations: 50_000,
            refactor_every: 40,
        }
    }
}

/// Solves the program; with no objective any feasible point is returned.
pub fn solve(
    lp: &LinearProgram,
    objective: Option<(Sense, &[f64])>,
    opts: &SimplexOptions,
) -> Result<LpOutcome> {
    if let Some((_, c)) = objective {
        if c.len() != lp.num_vars() {
            return Err(invalid("objective length differs from the variable count"));
        }
    }
    let mut state = match DualSimplex::build(lp, objective, opts) {
        Ok(s) => s,
        Err(residual) => {
            return Ok(LpOutcome::Infeasible {
                residual,
                iterations: 0,
            })
        }
    };
    if let Some(residual) = state.run()? {
        return Ok(LpOutcome::Infeasible {
            residual,
            iterations: state.iterations,
        });
    }
    let x = state.structural_values(lp);
    let violation = lp.max_violation(&x);
    let scale = lp
        .rows
        .iter()
        .map(|r| r.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs())))
        .fold(1.0f64, f64::max)
        * lp.upper.iter().chain(&lp.lower).fold(1.0f64, |m, u| m.max(u.abs()));
    if violation > 1e3 * opts.feasibility_tol * scale {
        return Err(Error::Solver(format!(
            "final point violates constraints by {violation:.3e} after {} iterations",
            state.iterations
        )));
    }
    let objective = objective.map_or(0.0, |(_, c)| c.iter().zip(&x).map(|(a, b)| a * b).sum());
    Ok(LpOutcome::Optimal {
        x,
        objective,
        iterations: state.iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

/// Steps without dual progress before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

struct DualSimplex {
    n: usize,
    /// Constraint normals in scaled variables, row-major; the first `n` are
    /// the variable bounds.
    g: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    /// Working set: one constraint and side per basis row.
    work: Vec<(usize, Side)>,
    in_work: Vec<bool>,
    binv: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    col_scale: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    opts: SimplexOptions,
}

impl DualSimplex {
    /// Scales the program to `z ∈ [0, 1]^n` with unit-norm rows. Rows with
    /// no coefficients are checked here; `Err` carries their violation.
    fn build(
        lp: &LinearProgram,
        objective: Option<(Sense, &[f64])>,
        opts: &SimplexOptions,
    ) -> std::result::Result<Self, f64> {
        let n = lp.num_vars();
        let col_scale: Vec<f64> = (0..n)
            .map(|j| {
                let w = lp.upper[j] - lp.lower[j];
                if w > 0.0 {
                    w
                } else {
                    1.0
                }
            })
            .collect();
        let mut g = Vec::with_capacity(n * (n + lp.rows.len()));
        let mut lo = Vec::with_capacity(n + lp.rows.len());
        let mut hi = Vec::with_capacity(n + lp.rows.len());
        for j in 0..n {
            g.extend((0..n).map(|i| f64::from(u8::from(i == j))));
            lo.push(0.0);
            hi.push(if lp.upper[j] > lp.lower[j] { 1.0 } else { 0.0 });
        }
        for row in &lp.rows {
            let coeffs: Vec<f64> = row.coeffs.iter().zip(&col_scale).map(|(c, s)| c * s).collect();
            let shift: f64 = row.coeffs.iter().zip(&lp.lower).map(|(c, l)| c * l).sum();
            let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm == 0.0 {
                let excess = (row.lower - shift).max(shift - row.upper);
                if excess > opts.feasibility_tol * shift.abs().max(1.0) {
                    return Err(excess);
                }
                continue;
            }
            g.extend(coeffs.iter().map(|c| c / norm));
            lo.push((row.lower - shift) / norm);
            hi.push((row.upper - shift) / norm);
        }
        let mut cost: Vec<f64> = match objective {
            Some((sense, c)) => {
                let sign = match sense {
                    Sense::Minimize => 1.0,
                    Sense::Maximize => -1.0,
                };
                c.iter().zip(&col_scale).map(|(v, s)| sign * v * s).collect()
            }
            // Any bounded objective will do; a generic one avoids ties.
            None => vec![1.0; n],
        };
        let cmax = cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if cmax > 0.0 {
            cost.iter_mut().for_each(|c| *c /= cmax);
        }
        let work: Vec<(usize, Side)> = cost
            .iter()
            .enumerate()
            .map(|(j, &c)| (j, if c >= 0.0 { Side::Lower } else { Side::Upper }))
            .collect();
        let mut in_work = vec![false; lo.len()];
        in_work[..n].iter_mut().for_each(|b| *b = true);
        let mut binv = vec![0.0; n * n];
        for j in 0..n {
            binv[j * n + j] = 1.0;
        }
        let mut s = Self {
            n,
            g,
            lo,
            hi,
            cost,
            work,
            in_work,
            binv,
            x: vec![0.0; n],
            y: vec![0.0; n],
            col_scale,
            iterations: 0,
            since_refactor: 0,
            opts: *opts,
        };
        s.update_point();
        Ok(s)
    }

    fn normal(&self, i: usize) -> &[f64] {
        &self.g[i * self.n..(i + 1) * self.n]
    }

    fn bound(&self, (i, side): (usize, Side)) -> f64 {
        match side {
            Side::Lower => self.lo[i],
            Side::Upper => self.hi[i],
        }
    }

    /// `x = B⁻¹ b` and `y = B⁻ᵀ c` from the current inverse.
    fn update_point(&mut self) {
        let n = self.n;
        let b: Vec<f64> = self.work.iter().map(|&w| self.bound(w)).collect();
        for r in 0..n {
            self.x[r] = (0..n).map(|k| self.binv[r * n + k] * b[k]).sum();
        }
        for k in 0..n {
            self.y[k] = (0..n).map(|r| self.binv[r * n + k] * self.cost[r]).sum();
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.n;
        let b = DMatrix::from_fn(n, n, |r, c| self.g[self.work[r].0 * n + c]);
        let inv = b
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Solver("working-set basis became singular".into()))?;
        for r in 0..n {
            for c in 0..n {
                self.binv[r * n + c] = inv[(r, c)];
            }
        }
        self.since_refactor = 0;
        self.update_point();
        Ok(())
    }

    /// Most violated constraint outside the working set, or the first one
    /// under Bland's rule.
    fn entering(&self, bland: bool) -> Option<(usize, Side, f64)> {
        let mut best: Option<(usize, Side, f64)> = None;
        for i in 0..self.lo.len() {
            if self.in_work[i] {
                continue;
            }
            let r: f64 = self.normal(i).iter().zip(&self.x).map(|(a, b)| a * b).sum();
            let (side, excess, bound) = if r < self.lo[i] {
                (Side::Lower, self.lo[i] - r, self.lo[i])
            } else if r > self.hi[i] {
                (Side::Upper, r - self.hi[i], self.hi[i])
            } else {
                continue;
            };
            if excess <= self.opts.feasibility_tol * bound.abs().max(1.0) {
                continue;
            }
            if bland {
                return Some((i, side, excess));
            }
            if best.map_or(true, |(_, _, e)| excess > e) {
                best = Some((i, side, excess));
            }
        }
        best
    }

    /// Runs to optimality; `Some(residual)` means infeasible.
    fn run(&mut self) -> Result<Option<f64>> {
        let n = self.n;
        let mut degenerate = 0;
        loop {
            let bland = degenerate > DEGENERATE_LIMIT;
            let Some((p, side, excess)) = self.entering(bland) else {
                return Ok(None);
            };
            if self.iterations >= self.opts.max_iterations {
                return Err(Error::Solver(format!(
                    "no convergence after {} iterations",
                    self.iterations
                )));
            }
            let s = match side {
                Side::Lower => 1.0,
                Side::Upper => -1.0,
            };
            // d = B⁻ᵀ a_p
            let a = self.normal(p).to_vec();
            let d: Vec<f64> = (0..n)
                .map(|k| (0..n).map(|r| self.binv[r * n + k] * a[r]).sum())
                .collect();
            let mut leave: Option<(usize, f64)> = None;
            for k in 0..n {
                let (i, wside) = self.work[k];
                if self.lo[i] == self.hi[i] {
                    continue;
                }
                let sd = s * d[k];
                let ratio = match wside {
                    Side::Lower if sd > self.opts.pivot_tol => self.y[k].max(0.0) / sd,
                    Side::Upper if sd < -self.opts.pivot_tol => self.y[k].min(0.0) / sd,
                    _ => continue,
                };
                let better = match leave {
                    None => true,
                    Some((q, r)) => {
                        let tie = (ratio - r).abs() <= self.opts.optimality_tol;
                        if bland {
                            ratio < r - self.opts.optimality_tol || (tie && i < self.work[q].0)
                        } else {
                            ratio < r - self.opts.optimality_tol || (tie && d[k].abs() > d[q].abs())
                        }
                    }
                };
                if better {
                    leave = Some((k, ratio));
                }
            }
            let Some((q, ratio)) = leave else {
                return Ok(Some(excess));
            };
            if ratio <= self.opts.optimality_tol {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.in_work[self.work[q].0] = false;
            self.in_work[p] = true;
            self.work[q] = (p, side);
            // Row q of B becomes a_p: column q of B⁻¹ is divided by d_q and
            // eliminated from the others.
            let dq = d[q];
            for r in 0..n {
                let cq = self.binv[r * n + q] / dq;
                for (j, &dj) in d.iter().enumerate() {
                    if j != q {
                        self.binv[r * n + j] -= cq * dj;
                    }
                }
                self.binv[r * n + q] = cq;
            }
            self.iterations += 1;
            self.since_refactor += 1;
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            } else {
                self.update_point();
            }
        }
    }

    fn structural_values(&self, lp: &LinearProgram) -> Vec<f64> {
        (0..self.n)
            .map(|j| (lp.lower[j] + self.col_scale[j] * self.x[j]).clamp(lp.lower[j], lp.upper[j]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(out: LpOutcome) -> (Vec<f64>, f64) {
        match out {
            LpOutcome::Optimal { x, objective, .. } => (x, objective),
            other => panic!("expected an optimum, got {other:?}"),
        }
    }

    #[test]
    fn small_maximisation() {
        // max 3x + 2y s.t. x + y <= 4, x + 3y <= 6, 0 <= x <= 3, 0 <= y <= 10.
        let mut lp = LinearProgram::new(vec![0.0, 0.0], vec![3.0, 10.0]).unwrap();
        lp.add_row(vec![1.0, 1.0], f64::NEG_INFINITY, 4.0).unwrap();
        lp.add_row(vec![1.0, 3.0], f64::NEG_INFINITY, 6.0).unwrap();
        let (x, obj) = optimal(solve(&lp, Some((Sense::Maximize, &[3.0, 2.0])), &Default::default()).unwrap());
        assert!((obj - 11.0).abs() < 1e-9);
        assert!((x[0] - 3.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ranged_rows() {
        // 2 <= x + y <= 3, x - y = 1 (as a ranged row), minimise x.
        let mut lp = LinearProgram::new(vec![0.0, 0.0], vec![5.0, 5.0]).unwrap();
        lp.add_row(vec![1.0, 1.0], 2.0, 3.0).unwrap();
        lp.add_row(vec![1.0, -1.0], 1.0, 1.0).unwrap();
        let (x, obj) = optimal(solve(&lp, Some((Sense::Minimize, &[1.0, 0.0])), &Default::default()).unwrap());
        assert!((obj - 1.5).abs() < 1e-9, "{x:?}");
        let (_, obj) = optimal(solve(&lp, Some((Sense::Maximize, &[1.0, 0.0])), &Default::default()).unwrap());
        assert!((obj - 2.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = LinearProgram::new(vec![0.0], vec![0.0]).unwrap();
        lp.add_row(vec![1.0], 1.0, f64::INFINITY).unwrap();
        assert!(matches!(
            solve(&lp, None, &Default::default()).unwrap(),
            LpOutcome::Infeasible { .. }
        ));
        let mut lp = LinearProgram::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        lp.add_row(vec![1.0, 1.0], 1.5, 2.0).unwrap();
        lp.add_row(vec![1.0, -1.0], 0.9, 1.0).unwrap();
        assert!(matches!(
            solve(&lp, None, &Default::default()).unwrap(),
            LpOutcome::Infeasible { .. }
        ));
    }

    #[test]
    fn feasibility_only_returns_a_feasible_point() {
        let mut lp = LinearProgram::new(vec![0.0; 3], vec![2.0; 3]).unwrap();
        lp.add_row(vec![1.0, 1.0, 1.0], 2.5, 2.5).unwrap();
        lp.add_row(vec![1.0, -2.0, 0.5], -0.5, 0.5).unwrap();
        let (x, _) = optimal(solve(&lp, None, &Default::default()).unwrap());
        assert!(lp.max_violation(&x) < 1e-9);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(LinearProgram::new(vec![0.0], vec![-1.0]).is_err());
        assert!(LinearProgram::new(vec![0.0], vec![f64::INFINITY]).is_err());
        let mut lp = LinearProgram::new(vec![0.0], vec![1.0]).unwrap();
        assert!(lp.add_row(vec![1.0, 2.0], 0.0, 1.0).is_err());
        assert!(lp.add_row(vec![1.0], 2.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Many constraints through the same vertex.
        let mut lp = LinearProgram::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        for i in 1..30 {
            let a = i as f64 / 10.0;
            lp.add_row(vec![a, 1.0], f64::NEG_INFINITY, a * 0.5 + 0.5).unwrap();
        }
        let (x, obj) = optimal(solve(&lp, Some((Sense::Maximize, &[1.0, 1.0])), &Default::default()).unwrap());
        assert!(lp.max_violation(&x) < 1e-9);
        assert!(obj > 0.99);
    }

    /// Best objective over the vertices of a two-variable program.
    fn brute_force(lp: &LinearProgram, c: [f64; 2]) -> Option<f64> {
        let mut lines: Vec<([f64; 2], f64)> = vec![
            ([1.0, 0.0], lp.lower[0]),
            ([1.0, 0.0], lp.upper[0]),
            ([0.0, 1.0], lp.lower[1]),
            ([0.0, 1.0], lp.upper[1]),
        ];
        for row in &lp.rows {
            for b in [row.lower, row.upper] {
                if b.is_finite() {
                    lines.push(([row.coeffs[0], row.coeffs[1]], b));
                }
            }
        }
        let mut best: Option<f64> = None;
        for i in 0..lines.len() {
            for j in i + 1..lines.len() {
                let ([a, b], e) = lines[i];
                let ([c2, d], f) = lines[j];
                let det = a * d - b * c2;
                if det.abs() < 1e-9 {
                    continue;
                }
                let x = [(e * d - b * f) / det, (a * f - e * c2) / det];
                if lp.max_violation(&x) <= 1e-7 {
                    let v = c[0] * x[0] + c[1] * x[1];
                    best = Some(best.map_or(v, |b: f64| b.min(v)));
                }
            }
        }
        best
    }

    proptest::proptest! {
        #[test]
        fn matches_vertex_enumeration(
            ub in proptest::collection::vec(1i32..6, 2),
            rows in proptest::collection::vec((-4i32..5, -4i32..5, -6i32..6, 0i32..6), 1..5),
            c in (-3i32..4, -3i32..4),
        ) {
            let mut lp = LinearProgram::new(vec![0.0; 2], ub.iter().map(|&u| u as f64).collect()).unwrap();
            for &(a, b, lo, width) in &rows {
                lp.add_row(vec![a as f64, b as f64], lo as f64, (lo + width) as f64).unwrap();
            }
            let c = [c.0 as f64, c.1 as f64];
            let expected = brute_force(&lp, c);
            match solve(&lp, Some((Sense::Minimize, &c)), &Default::default()).unwrap() {
                LpOutcome::Optimal { x, objective, .. } => {
                    proptest::prop_assert!(lp.max_violation(&x) < 1e-7);
                    let e = expected.expect("solver found a point the enumeration missed");
                    proptest::prop_assert!((objective - e).abs() < 1e-7, "{objective} vs {e}");
                }
                LpOutcome::Infeasible { .. } => proptest::prop_assert!(expected.is_none()),
            }
        }
    }
}
