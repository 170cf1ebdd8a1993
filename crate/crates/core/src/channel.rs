//! The deletion channel, σ-perturbation and trace files.

use std::fmt::Write as _;

use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::word::BitString;

/// Traces per random stream when sampling in bulk.
pub const TRACE_CHUNK: usize = 1024;

/// `Del_δ`: every bit is deleted independently with probability `δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeletionChannel {
    delta: f64,
}

impl DeletionChannel {
    /// A channel for reconstruction work; requires `0 < δ < 1`.
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("deletion rate {delta} outside (0, 1)")));
        }
        Ok(Self { delta })
    }

    /// Also accepts the degenerate rates 0 and 1.
    pub fn with_closed_range(delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(invalid(format!("deletion rate {delta} outside [0, 1]")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &BitString, rng: &mut R) -> BitString {
        delete_bits(x, self.delta, rng)
    }

    /// `count` traces of `x`; identical for any thread count.
    pub fn sample_pool(&self, x: &BitString, count: usize, seed: u64) -> TracePool {
        let chunks = count.div_ceil(TRACE_CHUNK);
        let traces = (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut rng = rng::stream(seed, c as u64);
                let len = TRACE_CHUNK.min(count - c * TRACE_CHUNK);
                (0..len)
                    .map(|_| self.sample(x, &mut rng))
                    .collect::<Vec<_>>()
            })
            .collect();
        TracePool {
            n: x.len(),
            delta: self.delta,
            seed: Some(seed),
            traces,
        }
    }
}

fn delete_bits<R: Rng + ?Sized>(x: &BitString, delta: f64, rng: &mut R) -> BitString {
    if delta <= 0.0 {
        return x.clone();
    }
    if delta >= 1.0 {
        return BitString::empty();
    }
    let keep = Bernoulli::new(1.0 - delta).expect("probability in range");
    let mut out = BitString::empty();
    for &b in x.bits() {
        if keep.sample(rng) {
            out.push(b);
        }
    }
    out
}

/// Secondary deletion probability taking a `Del_δ` trace to `Del_δ'`.
pub fn resample_probability(delta: f64, delta_prime: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) || !(0.0..=1.0).contains(&delta_prime) {
        return Err(invalid("deletion rates must lie in [0, 1]"));
    }
    if delta_prime < delta {
        return Err(invalid(format!(
            "target rate {delta_prime} below source rate {delta}"
        )));
    }
    if delta >= 1.0 {
        return Ok(1.0);
    }
    Ok(((delta_prime - delta) / (1.0 - delta)).clamp(0.0, 1.0))
}

/// Thins a trace drawn at `δ` into one distributed as a trace at `δ'`.
pub fn resample_trace<R: Rng + ?Sized>(
    y: &BitString,
    delta: f64,
    delta_prime: f64,
    rng: &mut R,
) -> Result<BitString> {
    let p = resample_probability(delta, delta_prime)?;
    Ok(delete_bits(y, p, rng))
}

/// `N_{1-σ}`: each coordinate is replaced by a uniform bit with probability `σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    sigma: f64,
}

impl Perturbation {
    /// Requires `0 < σ ≤ 1`.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(invalid(format!("perturbation rate {sigma} outside (0, 1]")));
        }
        Ok(Self { sigma })
    }

    /// Also accepts `σ = 0`.
    pub fn with_closed_range(sigma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(invalid(format!("perturbation rate {sigma} outside [0, 1]")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn apply<R: Rng + ?Sized>(&self, x: &BitString, rng: &mut R) -> BitString {
        let resample = Bernoulli::new(self.sigma).expect("probability in range");
        let mut out = BitString::empty();
        for &b in x.bits() {
            if resample.sample(rng) {
                out.push(rng.random_range(0..2u8));
            } else {
                out.push(b);
            }
        }
        out
    }
}

/// `1 - mean(|y|) / n`, clamped to `[0, 1)`.
pub fn estimate_delta(traces: &[BitString], n: usize) -> Result<f64> {
    if traces.is_empty() {
        return Err(invalid("cannot estimate the deletion rate from zero traces"));
    }
    if n == 0 {
        return Err(invalid("source length must be positive"));
    }
    let total: usize = traces.iter().map(BitString::len).sum();
    let mean = total as f64 / traces.len() as f64;
    Ok((1.0 - mean / n as f64).clamp(0.0, 1.0 - f64::EPSILON))
}

/// Traces of one source string at a known deletion rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePool {
    pub n: usize,
    pub delta: f64,
    pub seed: Option<u64>,
    pub traces: Vec<BitString>,
}

impl TracePool {
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// The first `count` traces, or all of them if fewer exist.
    pub fn prefix(&self, count: usize) -> &[BitString] {
        &self.traces[..count.min(self.traces.len())]
    }

    /// Trace file text: a header line then one trace per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(
            out,
            "# n={} delta={} seed={} count={}",
            self.n,
            self.delta,
            seed,
            self.traces.len()
        )
        .unwrap();
        for t in &self.traces {
            writeln!(out, "{t}").unwrap();
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, 1, "empty trace file"))?;
        let header = parse_header(header)?;
        let mut traces = Vec::with_capacity(header.count);
        for (i, line) in lines {
            let line = line.trim_end_matches('\r');
            if line.is_empty() && traces.len() == header.count {
                continue;
            }
            let t: BitString = line.parse().map_err(|e| match e {
                Error::Parse {
                    column, message, ..
                } => parse_err(i + 1, column, message),
                other => other,
            })?;
            if t.len() > header.n {
                return Err(parse_err(
                    i + 1,
                    1,
                    format!("trace of length {} exceeds n={}", t.len(), header.n),
                ));
            }
            traces.push(t);
        }
        if traces.len() != header.count {
            return Err(parse_err(
                1,
                1,
                format!(
                    "header declares count={} but the file has {} traces",
                    header.count,
                    traces.len()
                ),
            ));
        }
        Ok(Self {
            n: header.n,
            delta: header.delta,
            seed: header.seed,
            traces,
        })
    }
}

struct Header {
    n: usize,
    delta: f64,
    seed: Option<u64>,
    count: usize,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_header(line: &str) -> Result<Header> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| parse_err(1, 1, "missing `# n=.. delta=.. seed=.. count=..` header"))?;
    let (mut n, mut delta, mut seed, mut count) = (None, None, None, None);
    for field in body.split_whitespace() {
        let column = field.as_ptr() as usize - line.as_ptr() as usize + 1;
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(1, column, format!("expected key=value, found {field:?}")))?;
        let bad = |what: &str| parse_err(1, column + key.len() + 1, format!("invalid {what} {value:?}"));
        match key {
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad("n"))?),
            "delta" => {
                let d = value.parse::<f64>().map_err(|_| bad("delta"))?;
                if !(0.0..=1.0).contains(&d) {
                    return Err(bad("delta"));
                }
                delta = Some(d)
            }
            "seed" => {
                seed = Some(if value == "none" {
                    None
                } else {
                    Some(value.parse::<u64>().map_err(|_| bad("seed"))?)
                })
            }
            "count" => count = Some(value.parse::<usize>().map_err(|_| bad("count"))?),
            _ => return Err(parse_err(1, column, format!("unknown header key {key:?}"))),
        }
    }
    let missing = |key: &str| parse_err(1, 1, format!("header is missing `{key}`"));
    Ok(Header {
        n: n.ok_or_else(|| missing("n"))?,
        delta: delta.ok_or_else(|| missing("delta"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        count: count.ok_or_else(|| missing("count"))?,
    })
}
