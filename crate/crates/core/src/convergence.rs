//! Monte Carlo harness for the strong- and weak-operator-like convergence of
//! `W_N X_N W_N*` to `μV`.
//!
//! Almost-sure limits cannot be observed at finite `N`. What is checked here
//! instead:
//!
//! * the second-moment bounds `E‖(μ_N T_N - X_N)u‖² ≤ ‖(σ²/N) T_N u²‖₁` and
//!   `E|⟨(X_N - μ_N T_N)u, v⟩|² ≤ (σ²/N²)‖u‖²‖v‖²`,
//! * the Chebyshev exceedance rates those bounds imply, and
//! * whether a schedule `(a_N, k(N))` meets the two hypotheses that turn the
//!   exceedance bounds into almost-sure convergence via Borel–Cantelli.
//!
//! Trials run in parallel, each on its own stream, and are aggregated in
//! trial order, so every result is independent of the worker count.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::ensembles::{sample_x, EnsembleSpec, Family, SeedPolicy, TriMatrix};
use crate::error::{Error, Result};
use crate::funcspace::{conjugate_action, volterra, w_project, GridFunction};
use crate::spectra::largest_singular_value;

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Sot,
    Wot,
}

/// Which form of the variance bound sets the exceedance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ThresholdMode {
    /// `σ²/N` (SOT, unit `u`) or `(σ²/N²)‖u‖²‖v‖²` (WOT).
    #[default]
    Simplified,
    /// The full lemma expressions in the projected coordinates.
    Exact,
}

/// Test vectors for one experiment: `u` alone (SOT) or the pair `(u, v)` (WOT).
#[derive(Debug, Clone)]
pub enum Probe {
    Sot(GridFunction),
    Wot(GridFunction, GridFunction),
}

impl Probe {
    pub fn mode(&self) -> Mode {
        match self {
            Probe::Sot(_) => Mode::Sot,
            Probe::Wot(..) => Mode::Wot,
        }
    }

    fn u(&self) -> &GridFunction {
        match self {
            Probe::Sot(u) | Probe::Wot(u, _) => u,
        }
    }
}

/// Per-trial scalars plus an exceedance count against one threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStatistics {
    pub values: Vec<f64>,
    pub exceed_threshold: f64,
    pub exceed_count: usize,
    pub trials: usize,
}

/// A deviation of exactly zero never counts as an exceedance, so a
/// zero-variance ensemble has none even though its threshold is zero.
fn exceeds(value: f64, threshold: f64) -> bool {
    value > 0.0 && value >= threshold
}

impl TrialStatistics {
    pub fn new(values: Vec<f64>, threshold: f64) -> Self {
        let exceed_count = values.iter().filter(|&&v| exceeds(v, threshold)).count();
        TrialStatistics { trials: values.len(), values, exceed_threshold: threshold, exceed_count }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.trials as f64
    }

    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.trials as f64
    }

    /// Standard error of the mean (zero for a single trial).
    pub fn stderr(&self) -> f64 {
        if self.trials < 2 {
            return 0.0;
        }
        let m = self.mean();
        let var = self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (self.trials - 1) as f64;
        (var / self.trials as f64).sqrt()
    }

    /// Linear-interpolated quantile, `q` in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn exceed_rate(&self) -> f64 {
        self.exceed_count as f64 / self.trials as f64
    }
}

/// `p + z·√(p(1-p)/trials)`: the largest exceedance rate consistent with a
/// true probability `p` at `z` binomial standard errors.
pub fn binomial_ceiling(p: f64, z: f64, trials: usize) -> f64 {
    p + z * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Runs `f` for trial indices `0..trials` in parallel and returns results
/// in trial order.
pub fn run_trials<T, F>(trials: usize, master_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(SeedPolicy) -> Result<T> + Sync,
{
    (0..trials as u64).into_par_iter().map(|t| f(SeedPolicy::new(master_seed, t))).collect()
}

/// `Σ_i w_i Σ_{j≤i} u_j²`, with `w ≡ 1` when `weights` is `None`.
fn triangular_mass(u: &[f64], weights: Option<&[f64]>) -> f64 {
    let mut prefix = 0.0;
    let mut acc = 0.0;
    for (i, uj) in u.iter().enumerate() {
        prefix += uj * uj;
        acc += weights.map_or(1.0, |w| w[i] * w[i]) * prefix;
    }
    acc
}

/// `‖(σ²/N) T_N u²‖₁` with `u = W_N* u`.
pub fn sot_variance_bound_exact(spec: &EnsembleSpec, n: usize, u: &GridFunction) -> Result<f64> {
    let un = w_project(u, n)?;
    let sigma = spec.effective_stddev(n);
    Ok(sigma * sigma / (n as f64 * n as f64) * triangular_mass(&un, None))
}

/// `(σ²/N)·‖u‖²`.
pub fn sot_variance_bound(spec: &EnsembleSpec, n: usize, u: &GridFunction) -> f64 {
    let sigma = spec.effective_stddev(n);
    sigma * sigma / n as f64 * u.norm_squared()
}

/// `(σ²/N²) Σ_i v_i² Σ_{j≤i} u_j²` in projected coordinates.
pub fn wot_variance_bound_exact(spec: &EnsembleSpec, n: usize, u: &GridFunction, v: &GridFunction) -> Result<f64> {
    let un = w_project(u, n)?;
    let vn = w_project(v, n)?;
    let sigma = spec.effective_stddev(n);
    Ok(sigma * sigma / (n as f64 * n as f64) * triangular_mass(&un, Some(&vn)))
}

/// `(σ²/N²)‖u‖²‖v‖²`.
pub fn wot_variance_bound(spec: &EnsembleSpec, n: usize, u: &GridFunction, v: &GridFunction) -> f64 {
    let sigma = spec.effective_stddev(n);
    sigma * sigma / (n as f64 * n as f64) * u.norm_squared() * v.norm_squared()
}

/// The second-moment bound for `probe` in the requested form. The
/// simplified SOT form needs a unit `u`.
pub fn variance_bound(spec: &EnsembleSpec, n: usize, probe: &Probe, mode: ThresholdMode) -> Result<f64> {
    match (probe, mode) {
        (Probe::Sot(u), ThresholdMode::Simplified) => {
            let norm = u.norm();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidArgument(format!(
                    "simplified SOT threshold needs a unit vector, ‖u‖ = {norm}; request the exact threshold instead"
                )));
            }
            Ok(sot_variance_bound(spec, n, u))
        }
        (Probe::Sot(u), ThresholdMode::Exact) => sot_variance_bound_exact(spec, n, u),
        (Probe::Wot(u, v), ThresholdMode::Simplified) => Ok(wot_variance_bound(spec, n, u, v)),
        (Probe::Wot(u, v), ThresholdMode::Exact) => wot_variance_bound_exact(spec, n, u, v),
    }
}

/// The entry of `μ_N T_N` as it appears in a sample from `spec`.
fn centre(spec: &EnsembleSpec, n: usize) -> f64 {
    spec.mean_at(n) * spec.scale.factor(n)
}

/// The limit `μ` in units of `T_N`.
fn limit_mean(spec: &EnsembleSpec, n: usize) -> f64 {
    spec.mean * spec.scale.relative_to_t(n)
}

/// Error and random part of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TrialOutcome {
    error: f64,
    deviation: f64,
}

fn sot_outcome(spec: &EnsembleSpec, x: &TriMatrix, u: &GridFunction) -> Result<TrialOutcome> {
    let n = x.n();
    let target = volterra(u)?.scale(limit_mean(spec, n));
    let error = conjugate_action(x, u)?.sub(&target)?.norm();
    let un = w_project(u, n)?;
    let dev = x.centered_mul_vec(centre(spec, n), &un);
    let deviation = dev.iter().map(|d| d * d).sum::<f64>().sqrt();
    Ok(TrialOutcome { error, deviation })
}

fn wot_outcome(spec: &EnsembleSpec, x: &TriMatrix, u: &GridFunction, v: &GridFunction) -> Result<TrialOutcome> {
    let n = x.n();
    let observed = conjugate_action(x, u)?.inner(v)?;
    let expected = limit_mean(spec, n) * volterra(u)?.inner(v)?;
    let un = w_project(u, n)?;
    let vn = w_project(v, n)?;
    let dev = x.centered_mul_vec(centre(spec, n), &un);
    let deviation = dev.iter().zip(vn.iter()).map(|(a, b)| a * b).sum::<f64>().abs();
    Ok(TrialOutcome { error: (observed - expected).abs(), deviation })
}

fn outcome(spec: &EnsembleSpec, x: &TriMatrix, probe: &Probe) -> Result<TrialOutcome> {
    match probe {
        Probe::Sot(u) => sot_outcome(spec, x, u),
        Probe::Wot(u, v) => wot_outcome(spec, x, u, v),
    }
}

/// `‖W_N X_N W_N* u - μ V u‖₂` for one sample.
pub fn sot_error(spec: &EnsembleSpec, n: usize, u: &GridFunction, seed: SeedPolicy) -> Result<f64> {
    w_project(u, n)?;
    let x = sample_x(spec, n, seed)?;
    Ok(sot_outcome(spec, &x, u)?.error)
}

/// `|⟨W_N X_N W_N* u, v⟩ - μ⟨V u, v⟩|` for one sample.
pub fn wot_error(spec: &EnsembleSpec, n: usize, u: &GridFunction, v: &GridFunction, seed: SeedPolicy) -> Result<f64> {
    w_project(u, n)?;
    w_project(v, n)?;
    let x = sample_x(spec, n, seed)?;
    Ok(wot_outcome(spec, &x, u, v)?.error)
}

/// Random part `‖(μ_N T_N - X_N) W_N* u‖` for one sample.
pub fn sot_deviation(spec: &EnsembleSpec, n: usize, u: &GridFunction, seed: SeedPolicy) -> Result<f64> {
    w_project(u, n)?;
    let x = sample_x(spec, n, seed)?;
    Ok(sot_outcome(spec, &x, u)?.deviation)
}

/// Random part `|⟨(X_N - μ_N T_N) W_N* u, W_N* v⟩|` for one sample.
pub fn wot_deviation(
    spec: &EnsembleSpec,
    n: usize,
    u: &GridFunction,
    v: &GridFunction,
    seed: SeedPolicy,
) -> Result<f64> {
    w_project(u, n)?;
    w_project(v, n)?;
    let x = sample_x(spec, n, seed)?;
    Ok(wot_outcome(spec, &x, u, v)?.deviation)
}

/// Counts trials whose random part reaches `k·√bound`; Chebyshev caps the
/// probability of that event at `1/k²`.
pub fn concentration_check(
    spec: &EnsembleSpec,
    n: usize,
    probe: &Probe,
    k: f64,
    trials: usize,
    master_seed: u64,
    mode: ThresholdMode,
) -> Result<TrialStatistics> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("k must be positive, got {k}")));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    spec.validate()?;
    let threshold = k * variance_bound(spec, n, probe, mode)?.sqrt();
    let values = run_trials(trials, master_seed, |seed| {
        let x = sample_x(spec, n, seed)?;
        Ok(outcome(spec, &x, probe)?.deviation)
    })?;
    Ok(TrialStatistics::new(values, threshold))
}

/// Sequence of matrix sizes `a_N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SizeRule {
    Identity,
    Powers2,
    Custom(Vec<usize>),
}

/// Sequence `k(N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum KRule {
    /// `N^α`.
    Power {
        alpha: f64,
    },
    /// `2^(βN)`.
    Exp2 {
        beta: f64,
    },
    Constant(f64),
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSchedule {
    pub a_seq: SizeRule,
    pub k_rule: KRule,
}

impl KSchedule {
    pub fn new(a_seq: SizeRule, k_rule: KRule) -> Result<Self> {
        if let SizeRule::Custom(sizes) = &a_seq {
            if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(
                    "custom a_N must be nonempty, positive and strictly increasing".into(),
                ));
            }
        }
        match &k_rule {
            KRule::Custom(ks) if ks.iter().any(|k| !(*k > 0.0 && k.is_finite())) => {
                return Err(Error::InvalidArgument("custom k(N) values must be positive".into()))
            }
            KRule::Constant(k) if !(*k > 0.0 && k.is_finite()) => {
                return Err(Error::InvalidArgument("constant k must be positive".into()))
            }
            KRule::Power { alpha } if !alpha.is_finite() => {
                return Err(Error::InvalidArgument("alpha must be finite".into()))
            }
            KRule::Exp2 { beta } if !beta.is_finite() => {
                return Err(Error::InvalidArgument("beta must be finite".into()))
            }
            _ => {}
        }
        Ok(KSchedule { a_seq, k_rule })
    }

    /// `a_N` for index `N ≥ 1`.
    pub fn size(&self, index: usize) -> Option<usize> {
        match &self.a_seq {
            SizeRule::Identity => Some(index),
            SizeRule::Powers2 => u32::try_from(index).ok().and_then(|e| 1usize.checked_shl(e)),
            SizeRule::Custom(sizes) => index.checked_sub(1).and_then(|i| sizes.get(i).copied()),
        }
    }

    /// `k(N)` for index `N ≥ 1`.
    pub fn k(&self, index: usize) -> Option<f64> {
        let n = index as f64;
        match &self.k_rule {
            KRule::Power { alpha } => Some(n.powf(*alpha)),
            KRule::Exp2 { beta } => Some((beta * n).exp2()),
            KRule::Constant(k) => Some(*k),
            KRule::Custom(ks) => index.checked_sub(1).and_then(|i| ks.get(i).copied()),
        }
    }

    /// `(N, a_N, k(N))` for each index in the range.
    pub fn rows(&self, indices: RangeInclusive<usize>) -> Result<Vec<(usize, usize, f64)>> {
        indices
            .map(|i| match (self.size(i), self.k(i)) {
                (Some(a), Some(k)) if i >= 1 => Ok((i, a, k)),
                _ => Err(Error::InvalidArgument(format!("schedule undefined at index {i}"))),
            })
            .collect()
    }
}

/// How `σ` depends on the matrix size `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SigmaRule {
    Constant(f64),
    /// `σ(m) ≍ m^exponent`.
    Power {
        exponent: f64,
    },
}

impl SigmaRule {
    pub fn from_spec(spec: &EnsembleSpec) -> Self {
        match (spec.family, spec.delta_exponent) {
            // σ² = (1-δ)/δ ≍ m^d
            (Family::SparseBernoulli, Some(d)) if d > 0.0 => SigmaRule::Power { exponent: d / 2.0 },
            (Family::SparseBernoulli, _) => SigmaRule::Constant(0.0),
            _ => SigmaRule::Constant(spec.stddev_at(1)),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, SigmaRule::Constant(s) if *s == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Guaranteed,
    NotGuaranteed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub verdict: Verdict,
    /// `k(N)σ/√a_N → 0` (SOT) or `k(N)σ/a_N → 0` (WOT).
    pub ratio_vanishes: bool,
    /// `Σ 1/k(N)² < ∞`.
    pub summable: bool,
    pub reason: String,
}

const EPS: f64 = 1e-12;

/// Asymptotic order `2^(rate·N) · N^power`.
#[derive(Debug, Clone, Copy)]
struct Growth {
    rate: f64,
    power: f64,
}

impl Growth {
    fn times(self, o: Growth) -> Growth {
        Growth { rate: self.rate + o.rate, power: self.power + o.power }
    }

    fn over(self, o: Growth) -> Growth {
        Growth { rate: self.rate - o.rate, power: self.power - o.power }
    }

    fn vanishes(self) -> bool {
        self.rate < -EPS || (self.rate.abs() <= EPS && self.power < -EPS)
    }
}

fn size_growth(a_seq: &SizeRule, exponent: f64) -> Result<Growth> {
    match a_seq {
        SizeRule::Identity => Ok(Growth { rate: 0.0, power: exponent }),
        SizeRule::Powers2 => Ok(Growth { rate: exponent, power: 0.0 }),
        SizeRule::Custom(_) => Err(Error::NoClosedForm("custom a_N".into())),
    }
}

/// `σ(a_N)` divided by `√a_N` (SOT) or `a_N` (WOT).
fn noise_over_size(sigma: &SigmaRule, a_seq: &SizeRule, mode: Mode) -> Result<Growth> {
    let sigma_exp = match sigma {
        SigmaRule::Constant(_) => 0.0,
        SigmaRule::Power { exponent } => *exponent,
    };
    let denom = match mode {
        Mode::Sot => 0.5,
        Mode::Wot => 1.0,
    };
    Ok(size_growth(a_seq, sigma_exp)?.over(size_growth(a_seq, denom)?))
}

fn k_growth(k: &KRule) -> Result<Growth> {
    match k {
        KRule::Power { alpha } => Ok(Growth { rate: 0.0, power: *alpha }),
        KRule::Exp2 { beta } => Ok(Growth { rate: *beta, power: 0.0 }),
        KRule::Constant(_) => Ok(Growth { rate: 0.0, power: 0.0 }),
        KRule::Custom(_) => Err(Error::NoClosedForm("custom k(N)".into())),
    }
}

fn k_summable(k: &KRule) -> Result<bool> {
    match k {
        KRule::Power { alpha } => Ok(2.0 * alpha > 1.0 + EPS),
        KRule::Exp2 { beta } => Ok(*beta > EPS),
        KRule::Constant(_) => Ok(false),
        KRule::Custom(_) => Err(Error::NoClosedForm("custom k(N)".into())),
    }
}

/// Decides both hypotheses of the convergence theorem for a closed-form
/// schedule: `k(N)σ/√a_N → 0` (or `/a_N` in WOT mode) and `Σ 1/k(N)² < ∞`.
pub fn schedule_feasible(sigma: &SigmaRule, schedule: &KSchedule, mode: Mode) -> Result<Feasibility> {
    let noise = noise_over_size(sigma, &schedule.a_seq, mode)?;
    let kg = k_growth(&schedule.k_rule)?;
    let summable = k_summable(&schedule.k_rule)?;
    let ratio_vanishes = sigma.is_zero() || kg.times(noise).vanishes();
    let verdict = if summable && ratio_vanishes { Verdict::Guaranteed } else { Verdict::NotGuaranteed };
    let reason = match (ratio_vanishes, summable) {
        (true, true) => "both hypotheses hold".to_string(),
        (false, true) => "k(N)·σ does not vanish against the size normalisation".to_string(),
        (true, false) => "Σ 1/k(N)² diverges".to_string(),
        (false, false) => "neither hypothesis holds".to_string(),
    };
    Ok(Feasibility { verdict, ratio_vanishes, summable, reason })
}

/// Whether any power `N^α` or exponential `2^(βN)` schedule satisfies both
/// hypotheses for this noise level and size sequence.
pub fn any_schedule_feasible(sigma: &SigmaRule, a_seq: &SizeRule, mode: Mode) -> Result<Feasibility> {
    let noise = noise_over_size(sigma, a_seq, mode)?;
    // Summability forces α > 1/2 or β > 0. A power k works iff the noise
    // ratio decays exponentially, or it is polynomial with exponent below
    // -1/2; an exponential k needs exponential decay of the ratio.
    let exists = sigma.is_zero() || noise.rate < -EPS || (noise.rate.abs() <= EPS && noise.power < -0.5 - EPS);
    let reason = if exists {
        "a summable k(N) with vanishing ratio exists".to_string()
    } else {
        "every summable k(N) makes k(N)·σ outgrow the size normalisation".to_string()
    };
    Ok(Feasibility {
        verdict: if exists { Verdict::Guaranteed } else { Verdict::NotGuaranteed },
        ratio_vanishes: exists,
        summable: exists,
        reason,
    })
}

/// One size-ladder experiment.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub spec: EnsembleSpec,
    pub schedule: KSchedule,
    pub indices: RangeInclusive<usize>,
    pub probe: Probe,
    pub trials: usize,
    pub master_seed: u64,
    pub threshold: ThresholdMode,
    /// Also record the largest singular value of every sample.
    pub track_norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignRow {
    pub n: usize,
    pub trials: usize,
    pub median_err: f64,
    /// Mean of the squared random part.
    pub mean_sq_err: f64,
    pub bound: f64,
    pub exceed_rate: f64,
    pub k: f64,
    pub threshold: f64,
    pub errors: Vec<f64>,
    pub deviations: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_singular: Option<Vec<f64>>,
}

/// Runs every size of the schedule and returns one row per size, ordered by `N`.
pub fn run_campaign(c: &Campaign) -> Result<Vec<CampaignRow>> {
    if c.trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    c.spec.validate()?;
    let mut rows = Vec::new();
    for (_, n, k) in c.schedule.rows(c.indices.clone())? {
        w_project(c.probe.u(), n)?;
        if let Probe::Wot(_, v) = &c.probe {
            w_project(v, n)?;
        }
        let bound = variance_bound(&c.spec, n, &c.probe, c.threshold)?;
        let threshold = k * bound.sqrt();
        let per_trial = run_trials(c.trials, c.master_seed, |seed| {
            let x = sample_x(&c.spec, n, seed)?;
            let o = outcome(&c.spec, &x, &c.probe)?;
            let norm = c.track_norm.then(|| largest_singular_value(&x));
            Ok((o, norm))
        })?;
        let errors: Vec<f64> = per_trial.iter().map(|(o, _)| o.error).collect();
        let deviations: Vec<f64> = per_trial.iter().map(|(o, _)| o.deviation).collect();
        let err_stats = TrialStatistics::new(errors, f64::INFINITY);
        let dev_stats = TrialStatistics::new(deviations, threshold);
        rows.push(CampaignRow {
            n,
            trials: c.trials,
            median_err: err_stats.median(),
            mean_sq_err: dev_stats.mean_square(),
            bound,
            exceed_rate: dev_stats.exceed_rate(),
            k,
            threshold,
            errors: err_stats.values,
            deviations: dev_stats.values,
            max_singular: c.track_norm.then(|| per_trial.iter().map(|(_, s)| s.unwrap_or(f64::NAN)).collect()),
        });
    }
    rows.sort_by_key(|r| r.n);
    Ok(rows)
}
