//! Trace moments of `T_N*T_N`, `X_N*X_N` and `N X_N*X_N`.
//!
//! Everything about `T_N` is checked in integer arithmetic on `N²T_N*T_N`,
//! whose entries are `N - max(i, j) + 1` (1-indexed). Random moments use
//! floating point and report a standard error.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_bigint::BigUint;
use serde::Serialize;

use crate::convergence::run_trials;
use crate::ensembles::{sample_x, EnsembleSpec, TriMatrix};
use crate::error::{Error, Result};

/// Default bit budget for the big-integer fallback in [`trace_power_t`].
pub const DEFAULT_MAX_BITS: u64 = 1 << 16;

/// `N²(T_N*T_N)` built as `Lᵀ L` with `L` the all-ones lower-triangular matrix.
fn gram_of_ones(n: usize) -> Vec<Vec<u64>> {
    let lower = |i: usize, j: usize| u64::from(j <= i);
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| lower(k, i) * lower(k, j)).sum()).collect()).collect()
}

/// `Σ_{k=1}^N 1_k`, with `1_k` the ones block in the top-left `k × k` corner.
fn sum_of_ones_blocks(n: usize) -> Vec<Vec<u64>> {
    let mut acc = vec![vec![0u64; n]; n];
    for k in 1..=n {
        for row in acc.iter_mut().take(k) {
            for x in row.iter_mut().take(k) {
                *x += 1;
            }
        }
    }
    acc
}

/// Compares `N²(T_N*T_N)` with `Σ_k 1_k` entry by entry, in integers.
pub fn ones_block_decomposition_check(n: usize) -> Result<bool> {
    if n == 0 {
        return Err(Error::Dimension { min: 1, got: 0 });
    }
    Ok(gram_of_ones(n) == sum_of_ones_blocks(n))
}

/// `Tr((N²T_N*T_N)^pow)` with the sandwich `⌊N/2⌋^(2·pow) ≤ · ≤ N^(2·pow)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceReport {
    pub n: usize,
    pub power: u32,
    #[serde(serialize_with = "as_decimal")]
    pub exact: BigUint,
    #[serde(serialize_with = "as_decimal")]
    pub lower: BigUint,
    #[serde(serialize_with = "as_decimal")]
    pub upper: BigUint,
}

fn as_decimal<S: serde::Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

impl TraceReport {
    pub fn holds(&self) -> bool {
        self.lower <= self.exact && self.exact <= self.upper
    }

    pub const CSV_HEADER: &'static str = "n,pow,lower,exact,upper";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.n, self.power, self.lower, self.exact, self.upper)
    }
}

fn checked_matmul(a: &[Vec<u128>], b: &[Vec<u128>]) -> Option<Vec<Vec<u128>>> {
    let n = a.len();
    let mut out = vec![vec![0u128; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0 {
                continue;
            }
            for j in 0..n {
                out[i][j] = out[i][j].checked_add(aik.checked_mul(b[k][j])?)?;
            }
        }
    }
    Some(out)
}

fn checked_trace_power(base: &[Vec<u128>], pow: u32) -> Option<u128> {
    let mut acc = base.to_vec();
    for _ in 1..pow {
        acc = checked_matmul(&acc, base)?;
    }
    (0..acc.len()).try_fold(0u128, |t, i| t.checked_add(acc[i][i]))
}

fn big_trace_power(base: &[Vec<u128>], pow: u32, max_bits: u64) -> Result<BigUint> {
    let n = base.len();
    let b: Vec<Vec<BigUint>> = base.iter().map(|r| r.iter().map(|&x| BigUint::from(x)).collect()).collect();
    let mut acc = b.clone();
    for _ in 1..pow {
        let mut next = vec![vec![BigUint::ZERO; n]; n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    next[i][j] += &acc[i][k] * &b[k][j];
                }
            }
        }
        if next.iter().flatten().any(|x| x.bits() > max_bits) {
            return Err(Error::Overflow { max_bits });
        }
        acc = next;
    }
    let trace: BigUint = (0..n).map(|i| &acc[i][i]).sum();
    if trace.bits() > max_bits {
        return Err(Error::Overflow { max_bits });
    }
    Ok(trace)
}

/// Exact `Tr((N²T_N*T_N)^pow)` by repeated integer multiplication.
pub fn trace_power_t(n: usize, pow: u32) -> Result<TraceReport> {
    trace_power_t_with_limit(n, pow, DEFAULT_MAX_BITS)
}

/// As [`trace_power_t`]; the 128-bit path falls back to big integers, which
/// give up once any intermediate exceeds `max_bits`.
pub fn trace_power_t_with_limit(n: usize, pow: u32, max_bits: u64) -> Result<TraceReport> {
    if n == 0 {
        return Err(Error::Dimension { min: 1, got: 0 });
    }
    if pow == 0 {
        return Err(Error::InvalidArgument("power must be >= 1".into()));
    }
    let base: Vec<Vec<u128>> = gram_of_ones(n).into_iter().map(|r| r.into_iter().map(u128::from).collect()).collect();
    let exact = match checked_trace_power(&base, pow) {
        Some(t) => BigUint::from(t),
        None => big_trace_power(&base, pow, max_bits)?,
    };
    let e = 2 * pow;
    Ok(TraceReport { n, power: pow, exact, lower: BigUint::from(n / 2).pow(e), upper: BigUint::from(n).pow(e) })
}

/// `Tr((XᵀX)^pow)`.
pub fn trace_power(x: &TriMatrix, pow: u32) -> f64 {
    assert!(pow >= 1, "power must be >= 1");
    if pow == 1 {
        return x.entries().iter().map(|v| v * v).sum();
    }
    let m = x.to_dmatrix();
    let gram = m.tr_mul(&m);
    let half = pow / 2;
    let mut c = gram.clone();
    for _ in 1..half {
        c = &c * &gram;
    }
    if pow.is_multiple_of(2) {
        c.iter().map(|v| v * v).sum()
    } else {
        let cb: DMatrix<f64> = &c * &gram;
        cb.iter().zip(c.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Normalised trace `tr = Tr / N` of `(XᵀX)^pow`.
pub fn normalized_trace_power(x: &TriMatrix, pow: u32) -> f64 {
    trace_power(x, pow) / x.n() as f64
}

/// Monte Carlo estimate of a normalised trace moment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub n: usize,
    pub power: u32,
    pub mean: f64,
    pub stderr: f64,
    pub values: Vec<f64>,
    /// Exact expectation when one is known (`pow = 1`).
    pub closed_form: Option<f64>,
}

impl MomentEstimate {
    pub const CSV_HEADER: &'static str = "n,pow,mean,stderr,closed_form";

    pub fn csv_row(&self) -> String {
        let cf = self.closed_form.map(|c| format!("{c:?}")).unwrap_or_default();
        format!("{},{},{:?},{:?},{}", self.n, self.power, self.mean, self.stderr, cf)
    }
}

fn estimate(
    spec: &EnsembleSpec,
    n: usize,
    pow: u32,
    trials: usize,
    master_seed: u64,
    factor: f64,
    closed_form: Option<f64>,
) -> Result<MomentEstimate> {
    if pow == 0 {
        return Err(Error::InvalidArgument("power must be >= 1".into()));
    }
    if trials < 2 {
        return Err(Error::InvalidArgument("trials must be >= 2".into()));
    }
    spec.validate()?;
    let values = run_trials(trials, master_seed, |seed| {
        let x = sample_x(spec, n, seed)?;
        Ok(factor * normalized_trace_power(&x, pow))
    })?;
    let t = trials as f64;
    let mean = values.iter().sum::<f64>() / t;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
    Ok(MomentEstimate { n, power: pow, mean, stderr: (var / t).sqrt(), values, closed_form })
}

/// `E[tr((X_N*X_N)^pow)]` by Monte Carlo.
pub fn empirical_tr_xstarx(
    spec: &EnsembleSpec,
    n: usize,
    pow: u32,
    trials: usize,
    master_seed: u64,
) -> Result<MomentEstimate> {
    let closed = (pow == 1).then(|| scaled_first_moment(spec, n) / n as f64);
    estimate(spec, n, pow, trials, master_seed, 1.0, closed)
}

/// `E[tr((N X_N*X_N)^pow)]` by Monte Carlo.
pub fn empirical_tr_scaled(
    spec: &EnsembleSpec,
    n: usize,
    pow: u32,
    trials: usize,
    master_seed: u64,
) -> Result<MomentEstimate> {
    let closed = (pow == 1).then(|| scaled_first_moment(spec, n));
    let factor = (n as f64).powi(pow as i32);
    estimate(spec, n, pow, trials, master_seed, factor, closed)
}

/// `E[tr(N X_N*X_N)] = ((N+1)/(2N))(σ² + μ²)`, with `σ, μ` in units of `T_N`.
pub fn scaled_first_moment(spec: &EnsembleSpec, n: usize) -> f64 {
    let mu = spec.effective_mean(n);
    let sigma = spec.effective_stddev(n);
    (n + 1) as f64 / (2 * n) as f64 * (sigma * sigma + mu * mu)
}

/// `K^(2·pow) / N`: the almost-sure ceiling on `tr((X_N*X_N)^pow)` when the
/// entries are nonnegative and bounded by `K`, in units of `T_N`.
pub fn bounded_entry_envelope(k: f64, n: usize, pow: u32) -> f64 {
    k.powi(2 * pow as i32) / n as f64
}

/// CSV table of trace reports.
pub fn trace_reports_csv(reports: &[TraceReport]) -> String {
    let mut s = format!("{}\n", TraceReport::CSV_HEADER);
    for r in reports {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}
