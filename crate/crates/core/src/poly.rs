//! The subword polynomial `SW_{x,w}(ζ) = Σ_ℓ γ_ℓ ζ^ℓ`, where `γ_ℓ` counts
//! occurrences of `w` in `x` whose gaps sum to `ℓ`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, resource, Error, Result};
use crate::word::BitString;

/// Coefficients `γ_0..=γ_{n-k}` of `SW_{x,w}` for some `x` of length `n`
/// and `w` of length `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordPolynomial {
    n: usize,
    k: usize,
    coeffs: Vec<u64>,
}

impl SubwordPolynomial {
    /// Requires `1 ≤ k ≤ n` and exactly `n - k + 1` coefficients.
    pub fn new(n: usize, k: usize, coeffs: Vec<u64>) -> Result<Self> {
        if k == 0 || k > n {
            return Err(invalid(format!("need 1 <= k <= n, got n={n} k={k}")));
        }
        if coeffs.len() != n - k + 1 {
            return Err(invalid(format!(
                "expected {} coefficients, got {}",
                n - k + 1,
                coeffs.len()
            )));
        }
        Ok(Self { n, k, coeffs })
    }

    pub fn zero(n: usize, k: usize) -> Result<Self> {
        Self::new(n, k, vec![0; n.saturating_sub(k) + 1])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// `n - k`, the largest possible degree.
    pub fn max_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, zeta: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zeta + c as f64)
    }

    pub fn eval_real(&self, zeta: f64) -> f64 {
        horner(&self.coeffs, zeta)
    }

    /// Splits into the parts of degree `≤ d` and `> d`.
    pub fn truncate(&self, d: usize) -> Result<(Self, Self)> {
        if d > self.max_degree() {
            return Err(invalid(format!(
                "truncation degree {d} above {}",
                self.max_degree()
            )));
        }
        let mut low = self.clone();
        let mut high = self.clone();
        for c in &mut low.coeffs[d + 1..] {
            *c = 0;
        }
        for c in &mut high.coeffs[..=d] {
            *c = 0;
        }
        Ok((low, high))
    }

    /// Every coefficient lies within its cap `m_ℓ`.
    pub fn within_caps(&self) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(l, &c)| c as f64 <= coefficient_cap(self.n, self.k, l))
    }
}

impl fmt::Display for SubwordPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.n, self.k)?;
        for c in &self.coeffs {
            write!(f, " {c}")?;
        }
        Ok(())
    }
}

impl FromStr for SubwordPolynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut values = Vec::new();
        for field in s.split_whitespace() {
            let column = field.as_ptr() as usize - s.as_ptr() as usize + 1;
            values.push(field.parse::<u64>().map_err(|_| Error::Parse {
                line: 1,
                column,
                message: format!("expected a non-negative integer, found {field:?}"),
            })?);
        }
        if values.len() < 3 {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "expected `n k γ0 .. γ(n-k)`".into(),
            });
        }
        Self::new(values[0] as usize, values[1] as usize, values[2..].to_vec())
    }
}

pub(crate) fn horner(coeffs: &[u64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c as f64)
}

/// `SW_{x,w}` by dynamic programming in `O(k·n·(n-k))` time.
pub fn exact_subword_poly(x: &BitString, w: &BitString) -> Result<SubwordPolynomial> {
    if w.is_empty() || w.len() > x.len() {
        return Err(invalid(format!(
            "need 1 <= |w| <= |x|, got |w|={} |x|={}",
            w.len(),
            x.len()
        )));
    }
    let coeffs = degree_counts(x.bits(), w.bits(), x.len() - w.len())
        .ok_or_else(|| resource("subword polynomial coefficient overflows 64 bits"))?;
    SubwordPolynomial::new(x.len(), w.len(), coeffs)
}

/// `γ_0..=γ_D` of `SW_{y,w}` for `D = min(max_degree, |y| - k)`; empty when
/// `|y| < |w|`. `None` on overflow.
///
/// `F_m(j)` is the generating polynomial of partial matches of `w_0..w_m`
/// ending at `j`; `S(j) = Σ_{i<j} F_{m-1}(i) ζ^{j-1-i}` obeys
/// `S(j+1) = ζ·S(j) + F_{m-1}(j)`.
pub fn degree_counts(y: &[u8], w: &[u8], max_degree: usize) -> Option<Vec<u64>> {
    let (n, k) = (y.len(), w.len());
    if k == 0 || k > n {
        return Some(Vec::new());
    }
    let width = max_degree.min(n - k) + 1;
    let mut prev = vec![0u64; n * width];
    for j in 0..n {
        if y[j] == w[0] {
            prev[j * width] = 1;
        }
    }
    let mut cur = vec![0u64; n * width];
    let mut run = vec![0u64; width];
    for &wm in &w[1..] {
        run.fill(0);
        for j in 0..n {
            let row = &mut cur[j * width..(j + 1) * width];
            if y[j] == wm {
                row.copy_from_slice(&run);
            } else {
                row.fill(0);
            }
            run.copy_within(..width - 1, 1);
            run[0] = 0;
            for (r, &p) in run.iter_mut().zip(&prev[j * width..(j + 1) * width]) {
                *r = r.checked_add(p)?;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let mut out = vec![0u64; width];
    for j in 0..n {
        for (o, &p) in out.iter_mut().zip(&prev[j * width..(j + 1) * width]) {
            *o = o.checked_add(p)?;
        }
    }
    Some(out)
}

/// `SW_{y,w}(z)` for real `z` in `O(|y|·k)` time; zero when `|y| < |w|`.
pub fn eval_subword_scalar(y: &[u8], w: &[u8], z: f64) -> f64 {
    let (n, k) = (y.len(), w.len());
    if k == 0 || k > n {
        return 0.0;
    }
    let mut prev: Vec<f64> = y.iter().map(|&b| f64::from(b == w[0])).collect();
    let mut cur = vec![0.0; n];
    for &wm in &w[1..] {
        let mut run = 0.0;
        for j in 0..n {
            cur[j] = if y[j] == wm { run } else { 0.0 };
            run = run * z + prev[j];
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev.iter().sum()
}

/// `m_ℓ = n·C(ℓ+k-2, k-2)` (for `k = 1`: `n` at `ℓ = 0`, else 0), in floating
/// point and rounded up once it leaves the exactly representable range.
pub fn coefficient_cap(n: usize, k: usize, ell: usize) -> f64 {
    match coefficient_cap_exact(n, k, ell) {
        Some(v) if v < 1u64 << 53 => v as f64,
        _ => {
            let b = binomial_f64(ell + k - 2, k - 2);
            n as f64 * b * (1.0 + 8.0 * f64::EPSILON * k as f64)
        }
    }
}

/// Exact `m_ℓ`, or `None` when it exceeds `u64`.
pub fn coefficient_cap_exact(n: usize, k: usize, ell: usize) -> Option<u64> {
    assert!(k >= 1, "pattern length must be positive");
    if k == 1 {
        return Some(if ell == 0 { n as u64 } else { 0 });
    }
    binomial_u64(ell + k - 2, k - 2)?.checked_mul(n as u64)
}

pub fn binomial_u64(a: usize, b: usize) -> Option<u64> {
    if b > a {
        return Some(0);
    }
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for i in 1..=b as u128 {
        acc = acc * (a as u128 - b as u128 + i) / i;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

pub fn binomial_f64(a: usize, b: usize) -> f64 {
    if b > a {
        return 0.0;
    }
    let b = b.min(a - b);
    (1..=b).fold(1.0, |acc, i| acc * (a - b + i) as f64 / i as f64)
}

/// Which regime a truncation plan is for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncationMode {
    /// `θ = 1/2 - δ`, `C = e²`; requires `δ < 1/2`.
    Small,
    /// `θ = (1-δ)²/2`, `C = e²·max(1, c)`.
    Large,
}

/// The degree `d` above which the subword polynomial is negligible.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPlan {
    pub d: usize,
    pub theta: f64,
    pub c: f64,
}

/// `d = ⌈(C/θ)(k·ln(C/θ) + ln n)⌉`.
pub fn truncation_degree(n: f64, k: usize, theta: f64, c: f64) -> f64 {
    let r = c / theta;
    (r * (k as f64 * r.ln() + n.ln())).ceil()
}

pub fn truncation_threshold(
    n: usize,
    k: usize,
    delta: f64,
    mode: TruncationMode,
    c: f64,
) -> Result<TruncationPlan> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("deletion rate {delta} outside (0, 1)")));
    }
    if n == 0 || k == 0 {
        return Err(invalid("n and k must be positive"));
    }
    let e2 = std::f64::consts::E.powi(2);
    let (theta, c) = match mode {
        TruncationMode::Small => {
            if delta >= 0.5 {
                return Err(invalid(format!(
                    "small-rate truncation needs delta < 1/2, got {delta}"
                )));
            }
            (0.5 - delta, e2)
        }
        TruncationMode::Large => {
            if !(c.is_finite() && c > 0.0) {
                return Err(invalid(format!("constant c = {c} must be positive")));
            }
            ((1.0 - delta).powi(2) / 2.0, e2 * c.max(1.0))
        }
    };
    let d = truncation_degree(n as f64, k, theta, c);
    if !(d.is_finite() && d < usize::MAX as f64) {
        return Err(resource("truncation degree overflows"));
    }
    Ok(TruncationPlan {
        d: d as usize,
        theta,
        c,
    })
}
