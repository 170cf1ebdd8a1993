//! Brute-force enumeration oracles for small strings.
//!
//! These enumerate all `2^n` retention patterns of the deletion channel and
//! are meant for tests and debugging, not for reconstruction.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{invalid, resource, Result};
use crate::poly::{binomial_f64, degree_counts, exact_subword_poly};
use crate::sum::KahanSum;
use crate::word::{count_contiguous, count_gapped_raw, gap_vectors, BitString, GappedPattern};

/// Largest `n` for which trace distributions are enumerated.
pub const MAX_DISTRIBUTION_N: usize = 20;
/// Largest `n` for the per-gap-vector identity check.
pub const MAX_TAYLOR_N: usize = 14;

fn check_rate(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(invalid(format!("deletion rate {delta} outside [0, 1]")));
    }
    Ok(())
}

/// `Pr[y]` for every trace `y` of `x` under `Del_δ`.
pub fn exact_trace_distribution(x: &BitString, delta: f64) -> Result<BTreeMap<BitString, f64>> {
    check_rate(delta)?;
    let n = x.len();
    if n > MAX_DISTRIBUTION_N {
        return Err(resource(format!(
            "exact trace distribution limited to n <= {MAX_DISTRIBUTION_N}, got {n}"
        )));
    }
    let keep_pow: Vec<f64> = (0..=n).map(|i| (1.0 - delta).powi(i as i32)).collect();
    let del_pow: Vec<f64> = (0..=n).map(|i| delta.powi(i as i32)).collect();
    // Key traces by (length, value) so the inner loop never allocates.
    let mut acc: BTreeMap<(usize, u64), KahanSum> = BTreeMap::new();
    for mask in 0u64..1 << n {
        let kept = mask.count_ones() as usize;
        let p = keep_pow[kept] * del_pow[n - kept];
        if p == 0.0 {
            continue;
        }
        let mut value = 0u64;
        for (i, &b) in x.bits().iter().enumerate() {
            if mask >> i & 1 == 1 {
                value = value << 1 | b as u64;
            }
        }
        acc.entry((kept, value)).or_default().add(p);
    }
    Ok(acc
        .into_iter()
        .map(|((len, value), p)| (BitString::from_index(value, len), p.value()))
        .collect())
}

/// `E_α`: expected occurrences of a gapped pattern in a trace.
pub fn exact_pattern_expectation(x: &BitString, p: &GappedPattern, delta: f64) -> Result<f64> {
    let dist = exact_trace_distribution(x, delta)?;
    let offsets = p.offsets();
    Ok(dist
        .iter()
        .map(|(y, &pr)| pr * count_gapped_raw(y.bits(), p.word().bits(), &offsets) as f64)
        .collect::<KahanSum>()
        .value())
}

/// `E[#(w, y)]` for `y ~ Del_δ'(x)`.
pub fn exact_expected_count(x: &BitString, w: &BitString, delta_prime: f64) -> Result<f64> {
    let dist = exact_trace_distribution(x, delta_prime)?;
    Ok(dist
        .iter()
        .map(|(y, &pr)| pr * count_contiguous(y.bits(), w.bits()) as f64)
        .collect::<KahanSum>()
        .value())
}

/// `Σ_{|α|=ℓ} E_α` for `ℓ = 0..=n-k`: the expected coefficients of `SW_{y,w}`.
pub fn exact_expected_degree_counts(x: &BitString, w: &BitString, delta: f64) -> Result<Vec<f64>> {
    if w.is_empty() || w.len() > x.len() {
        return Err(invalid("need 1 <= |w| <= |x|"));
    }
    let dist = exact_trace_distribution(x, delta)?;
    let width = x.len() - w.len() + 1;
    let mut acc = vec![KahanSum::new(); width];
    for (y, &pr) in &dist {
        let counts = degree_counts(y.bits(), w.bits(), width - 1)
            .expect("counts of strings this short fit in 64 bits");
        for (a, &c) in acc.iter_mut().zip(&counts) {
            a.add(pr * c as f64);
        }
    }
    Ok(acc.iter().map(KahanSum::value).collect())
}

/// Closed form of `Pr[γ → β]`: the designated positions of `x` given by the
/// gap vector `γ` land on the positions of the trace given by `β`.
///
/// The first entry of each vector is the offset of the first position.
pub fn exact_gamma_to_beta(gamma: &[usize], beta: &[usize], delta: f64) -> Result<f64> {
    check_rate(delta)?;
    if gamma.len() != beta.len() || gamma.is_empty() {
        return Err(invalid("gap vectors must be non-empty and of equal length"));
    }
    let k = gamma.len() as i32;
    let mut p = (1.0 - delta).powi(k);
    for (&g, &b) in gamma.iter().zip(beta) {
        if b > g {
            return Ok(0.0);
        }
        p *= binomial_f64(g, b) * (1.0 - delta).powi(b as i32) * delta.powi((g - b) as i32);
    }
    Ok(p)
}

/// `Pr[γ → β]` by enumerating all retention patterns of the
/// `|γ| + k` positions involved.
pub fn gamma_to_beta_by_enumeration(gamma: &[usize], beta: &[usize], delta: f64) -> Result<f64> {
    check_rate(delta)?;
    if gamma.len() != beta.len() || gamma.is_empty() {
        return Err(invalid("gap vectors must be non-empty and of equal length"));
    }
    let len: usize = gamma.iter().sum::<usize>() + gamma.len();
    if len > MAX_DISTRIBUTION_N {
        return Err(resource("gap vectors too long to enumerate"));
    }
    let source = positions(gamma);
    let target = positions(beta);
    let mut total = KahanSum::new();
    for mask in 0u64..1 << len {
        let hit = source.iter().zip(&target).all(|(&s, &t)| {
            mask >> s & 1 == 1 && (mask & ((1u64 << s) - 1)).count_ones() as usize == t
        });
        if hit {
            let kept = mask.count_ones() as i32;
            total.add((1.0 - delta).powi(kept) * delta.powi(len as i32 - kept));
        }
    }
    Ok(total.value())
}

/// `(v_1, v_1 + v_2 + 1, ..., v_1 + ... + v_k + k - 1)`.
fn positions(v: &[usize]) -> Vec<usize> {
    v.iter()
        .scan(None, |at: &mut Option<usize>, &g| {
            let next = at.map_or(g, |a| a + g + 1);
            *at = Some(next);
            Some(next)
        })
        .collect()
}

/// `P_{x,f}(ξ) = Σ_{|γ| ≤ n-k} f(x at the γ positions)·ξ^γ`.
pub fn deletion_poly<F>(x: &BitString, k: usize, f: F, xi: &[Complex64]) -> Result<Complex64>
where
    F: Fn(&[u8]) -> f64,
{
    if k == 0 || k > x.len() || xi.len() != k {
        return Err(invalid("need 1 <= k <= n and one variable per position"));
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut args = vec![0u8; k];
    for gamma in gap_vectors(k, x.len() - k) {
        for (a, &p) in args.iter_mut().zip(&positions(&gamma)) {
            *a = x.get(p);
        }
        let v = f(&args);
        if v != 0.0 {
            let mono = gamma
                .iter()
                .zip(xi)
                .fold(Complex64::new(1.0, 0.0), |m, (&g, z)| m * z.powu(g as u32));
            total += mono * v;
        }
    }
    Ok(total)
}

/// The right-hand side of the Taylor expansion of `P_{x,f}` around
/// `(δ, ..., δ)`, with the trace expectations computed exactly.
pub fn deletion_poly_taylor<F>(
    x: &BitString,
    k: usize,
    f: F,
    xi: &[Complex64],
    delta: f64,
) -> Result<Complex64>
where
    F: Fn(&[u8]) -> f64,
{
    if k == 0 || k > x.len() || xi.len() != k {
        return Err(invalid("need 1 <= k <= n and one variable per position"));
    }
    if delta >= 1.0 {
        return Err(invalid("expansion needs delta < 1"));
    }
    let dist = exact_trace_distribution(x, delta)?;
    let shifted: Vec<Complex64> = xi.iter().map(|z| (z - delta) / (1.0 - delta)).collect();
    let mut total = Complex64::new(0.0, 0.0);
    let mut args = vec![0u8; k];
    for beta in gap_vectors(k, x.len() - k) {
        let pos = positions(&beta);
        let mut e = KahanSum::new();
        for (y, &pr) in &dist {
            if pos[k - 1] < y.len() {
                for (a, &p) in args.iter_mut().zip(&pos) {
                    *a = y.get(p);
                }
                e.add(pr * f(&args));
            }
        }
        let mono = beta
            .iter()
            .zip(&shifted)
            .fold(Complex64::new(1.0, 0.0), |m, (&b, z)| m * z.powu(b as u32));
        total += mono * e.value();
    }
    Ok(total / (1.0 - delta).powi(k as i32))
}

/// Largest `|SW(ζ) - RHS(ζ)|` over `zetas`, where the right-hand side sums
/// `E_α·((ζ-δ)/(1-δ))^{|α|}` over every gap vector with `|α| ≤ n - k`.
pub fn verify_taylor_identity(
    x: &BitString,
    w: &BitString,
    delta: f64,
    zetas: &[Complex64],
) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(invalid(format!("deletion rate {delta} outside [0, 1)")));
    }
    if x.len() > MAX_TAYLOR_N {
        return Err(resource(format!(
            "identity check limited to n <= {MAX_TAYLOR_N}, got {}",
            x.len()
        )));
    }
    let sw = exact_subword_poly(x, w)?;
    let k = w.len();
    let dist = exact_trace_distribution(x, delta)?;
    let mut by_degree = vec![KahanSum::new(); x.len() - k + 1];
    for alpha in gap_vectors(k - 1, x.len() - k) {
        let p = GappedPattern::new(w.clone(), alpha)?;
        let offsets = p.offsets();
        let e: f64 = dist
            .iter()
            .map(|(y, &pr)| pr * count_gapped_raw(y.bits(), w.bits(), &offsets) as f64)
            .collect::<KahanSum>()
            .value();
        by_degree[p.total_gap()].add(e);
    }
    let scale = (1.0 - delta).powi(k as i32);
    let mut worst: f64 = 0.0;
    for &zeta in zetas {
        let t = (zeta - delta) / (1.0 - delta);
        let rhs = by_degree
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, e| acc * t + e.value())
            / scale;
        worst = worst.max((sw.eval(zeta) - rhs).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn distributions() {
        let d = exact_trace_distribution(&bs("11"), 0.5).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d[&BitString::empty()], 0.25);
        assert_eq!(d[&bs("1")], 0.5);
        assert_eq!(d[&bs("11")], 0.25);
        let d = exact_trace_distribution(&bs("10"), 0.5).unwrap();
        for y in ["", "0", "1", "10"] {
            assert_eq!(d[&bs(y)], 0.25);
        }
        let d = exact_trace_distribution(&bs("1101"), 0.0).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[&bs("1101")], 1.0);
        let d = exact_trace_distribution(&bs("110100111010"), 0.37).unwrap();
        assert!((d.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(exact_trace_distribution(&BitString::zeros(21), 0.5).is_err());
    }

    #[test]
    fn expectations() {
        let one = GappedPattern::contiguous(bs("1")).unwrap();
        assert!((exact_pattern_expectation(&bs("11"), &one, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let pair = GappedPattern::contiguous(bs("11")).unwrap();
        let e = exact_pattern_expectation(&bs("111"), &pair, 0.5).unwrap();
        assert!((e - 0.625).abs() < 1e-15);
        let long = GappedPattern::new(bs("11"), vec![3]).unwrap();
        assert_eq!(exact_pattern_expectation(&bs("111"), &long, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn expected_count_matches_polynomial() {
        assert!((exact_expected_count(&bs("111"), &bs("11"), 0.5).unwrap() - 0.625).abs() < 1e-15);
        assert_eq!(exact_expected_count(&bs("1101011"), &bs("11"), 0.0).unwrap(), 2.0);
        let x = bs("1101011");
        let sw = exact_subword_poly(&x, &bs("11")).unwrap();
        let lhs = exact_expected_count(&x, &bs("11"), 0.4).unwrap();
        assert!((lhs - sw.eval_real(0.4) * 0.36).abs() < 1e-10);
    }

    #[test]
    fn gamma_to_beta_examples() {
        assert!((exact_gamma_to_beta(&[2], &[0], 0.5).unwrap() - 0.125).abs() < 1e-15);
        assert!((exact_gamma_to_beta(&[0, 1], &[0, 0], 0.5).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(exact_gamma_to_beta(&[3, 1], &[3, 1], 0.0).unwrap(), 1.0);
        assert_eq!(exact_gamma_to_beta(&[1, 1], &[2, 0], 0.3).unwrap(), 0.0);
        let e = gamma_to_beta_by_enumeration(&[2, 1], &[1, 0], 0.3).unwrap();
        assert!((e - exact_gamma_to_beta(&[2, 1], &[1, 0], 0.3).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn taylor_identity_examples() {
        let x = bs("1101011");
        let w = bs("11");
        let at_delta = verify_taylor_identity(&x, &w, 0.3, &[c(0.3, 0.0)]).unwrap();
        assert!(at_delta <= 1e-10);
        let spots = [c(0.0, 0.0), c(0.5, 0.0), c(0.3, 0.2)];
        assert!(verify_taylor_identity(&x, &w, 0.3, &spots).unwrap() <= 1e-9);
        let far = [c(-1.5, 0.7), c(2.0, -1.0)];
        assert!(verify_taylor_identity(&bs("111"), &bs("1"), 0.6, &far).unwrap() <= 1e-12);
        assert!(verify_taylor_identity(&BitString::zeros(15), &bs("0"), 0.3, &spots).is_err());
    }

    #[test]
    fn deletion_poly_expansion() {
        let x = bs("1011001");
        let table = [0.5, -1.0, 2.0, 0.25];
        let f = |b: &[u8]| table[(b[0] * 2 + b[1]) as usize];
        let xi = [c(0.2, 0.1), c(-0.4, 0.3)];
        let lhs = deletion_poly(&x, 2, f, &xi).unwrap();
        let rhs = deletion_poly_taylor(&x, 2, f, &xi, 0.35).unwrap();
        assert!((lhs - rhs).norm() < 1e-10);
        // With `f` the indicator of `w` and `ξ = (1, ζ, ..., ζ)` this is `SW_{x,w}(ζ)`.
        let w = [1u8, 0];
        let ind = |b: &[u8]| f64::from(b == w);
        let z = c(0.3, -0.2);
        let sw = exact_subword_poly(&x, &bs("10")).unwrap().eval(z);
        assert!((deletion_poly(&x, 2, ind, &[c(1.0, 0.0), z]).unwrap() - sw).norm() < 1e-12);
    }

    #[test]
    fn degree_expectations_sum_per_alpha() {
        let x = bs("10110");
        let w = bs("10");
        let by_degree = exact_expected_degree_counts(&x, &w, 0.4).unwrap();
        for (ell, &e) in by_degree.iter().enumerate() {
            let p = GappedPattern::new(w.clone(), vec![ell]).unwrap();
            let direct = exact_pattern_expectation(&x, &p, 0.4).unwrap();
            assert!((e - direct).abs() < 1e-14);
        }
    }
}
