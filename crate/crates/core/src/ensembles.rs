//! Random lower-triangular ensembles and the deterministic Riemann-sum matrix.
//!
//! Every ensemble factors as `unscaled iid entries × scale`. The unscaled
//! entries have mean `μ_N` and standard deviation `σ_N`; the scale is the
//! prefactor in front of the entry matrix (`1/N` for the standard `X_N`,
//! `π/N` for the spectrum pictures). `T_N` is the `Constant(1)` member of
//! the `1/N` family.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entry distribution before scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Gaussian,
    BernoulliZeroOne,
    /// Value `1/δ(N)` with probability `δ(N) = N^(-d)`, zero otherwise.
    SparseBernoulli,
    Constant,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "Gaussian",
            Family::BernoulliZeroOne => "BernoulliZeroOne",
            Family::SparseBernoulli => "SparseBernoulli",
            Family::Constant => "Constant",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "Gaussian" => Some(Family::Gaussian),
            "BernoulliZeroOne" | "Bernoulli" => Some(Family::BernoulliZeroOne),
            "SparseBernoulli" => Some(Family::SparseBernoulli),
            "Constant" => Some(Family::Constant),
            _ => None,
        }
    }
}

/// Prefactor applied to the unscaled entry matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scale {
    OneOverN,
    PiOverN,
    Custom(f64),
}

impl Scale {
    /// The multiplier at dimension `n`.
    pub fn factor(self, n: usize) -> f64 {
        match self {
            Scale::OneOverN => 1.0 / n as f64,
            Scale::PiOverN => PI / n as f64,
            Scale::Custom(c) => c,
        }
    }

    /// The scale measured in units of `1/N`, i.e. `factor(n) * n` without
    /// the round trip through a division.
    pub fn relative_to_t(self, n: usize) -> f64 {
        match self {
            Scale::OneOverN => 1.0,
            Scale::PiOverN => PI,
            Scale::Custom(c) => c * n as f64,
        }
    }
}

/// Distribution family plus parameters defining a random lower-triangular law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub family: Family,
    /// `μ` of one unscaled entry. For `BernoulliZeroOne` this is `p`.
    pub mean: f64,
    /// `σ` of one unscaled entry. Derived for the Bernoulli families.
    pub stddev: f64,
    /// `d` in `δ(N) = N^(-d)`; only used by `SparseBernoulli`.
    pub delta_exponent: Option<f64>,
    pub scale: Scale,
    /// `c` in the drifting mean `μ_N = μ + c/N` (Gaussian and Constant only).
    #[serde(default)]
    pub mean_drift: f64,
}

impl EnsembleSpec {
    pub fn gaussian(mean: f64, stddev: f64) -> Self {
        EnsembleSpec {
            family: Family::Gaussian,
            mean,
            stddev,
            delta_exponent: None,
            scale: Scale::OneOverN,
            mean_drift: 0.0,
        }
    }

    pub fn bernoulli(p: f64) -> Self {
        EnsembleSpec {
            family: Family::BernoulliZeroOne,
            mean: p,
            stddev: (p * (1.0 - p)).max(0.0).sqrt(),
            delta_exponent: None,
            scale: Scale::OneOverN,
            mean_drift: 0.0,
        }
    }

    pub fn sparse_bernoulli(d: f64) -> Self {
        EnsembleSpec {
            family: Family::SparseBernoulli,
            mean: 1.0,
            stddev: 0.0,
            delta_exponent: Some(d),
            scale: Scale::OneOverN,
            mean_drift: 0.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        EnsembleSpec {
            family: Family::Constant,
            mean: value,
            stddev: 0.0,
            delta_exponent: None,
            scale: Scale::OneOverN,
            mean_drift: 0.0,
        }
    }

    pub fn with_scale(mut self, scale: Scale) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_mean_drift(mut self, c: f64) -> Self {
        self.mean_drift = c;
        self
    }

    /// Checks the parameter invariants of the family. Returns every
    /// violation found.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.mean.is_finite() {
            out.push("mean must be finite".to_string());
        }
        if !(self.stddev.is_finite() && self.stddev >= 0.0) {
            out.push("stddev must be finite and >= 0".to_string());
        }
        if !self.mean_drift.is_finite() {
            out.push("mean_drift must be finite".to_string());
        }
        if let Scale::Custom(c) = self.scale {
            if !(c.is_finite() && c > 0.0) {
                out.push("custom scale must be finite and > 0".to_string());
            }
        }
        if self.mean_drift != 0.0 && !matches!(self.family, Family::Gaussian | Family::Constant) {
            out.push("mean_drift is only supported for Gaussian and Constant".to_string());
        }
        match self.family {
            Family::Gaussian => {}
            Family::Constant => {
                if self.stddev != 0.0 {
                    out.push("Constant requires stddev = 0".to_string());
                }
            }
            Family::BernoulliZeroOne => {
                if !(0.0..=1.0).contains(&self.mean) {
                    out.push("BernoulliZeroOne requires mean in [0, 1]".to_string());
                } else {
                    let var = self.mean * (1.0 - self.mean);
                    if (self.stddev * self.stddev - var).abs() > 1e-9 {
                        out.push("BernoulliZeroOne requires stddev^2 = mean(1 - mean)".to_string());
                    }
                }
            }
            Family::SparseBernoulli => {
                if self.mean != 1.0 {
                    out.push("SparseBernoulli requires mean = 1".to_string());
                }
                match self.delta_exponent {
                    None => out.push("SparseBernoulli requires delta_exponent".to_string()),
                    Some(d) if !(d.is_finite() && d >= 0.0) => {
                        out.push("delta_exponent must be finite and >= 0".to_string())
                    }
                    Some(_) => {}
                }
            }
        }
        if self.family != Family::SparseBernoulli && self.delta_exponent.is_some() {
            out.push("delta_exponent is only meaningful for SparseBernoulli".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidEnsemble(v.join("; ")))
        }
    }

    /// `δ(N)` for the sparse family, `None` otherwise.
    pub fn delta_at(&self, n: usize) -> Option<f64> {
        match (self.family, self.delta_exponent) {
            (Family::SparseBernoulli, Some(d)) => Some((n as f64).powf(-d)),
            _ => None,
        }
    }

    /// `μ_N` of one unscaled entry.
    pub fn mean_at(&self, n: usize) -> f64 {
        self.mean + self.mean_drift / n as f64
    }

    /// `σ_N` of one unscaled entry.
    pub fn stddev_at(&self, n: usize) -> f64 {
        match self.family {
            Family::Gaussian => self.stddev,
            Family::Constant => 0.0,
            Family::BernoulliZeroOne => (self.mean * (1.0 - self.mean)).max(0.0).sqrt(),
            Family::SparseBernoulli => {
                let delta = self.delta_at(n).unwrap_or(1.0);
                ((1.0 - delta) / delta).max(0.0).sqrt()
            }
        }
    }

    /// Entry mean in units of `T_N`, i.e. the `μ` with `E[X_N] = μ T_N`.
    pub fn effective_mean(&self, n: usize) -> f64 {
        self.mean_at(n) * self.scale.relative_to_t(n)
    }

    /// Entry standard deviation in units of `1/N`.
    pub fn effective_stddev(&self, n: usize) -> f64 {
        self.stddev_at(n) * self.scale.relative_to_t(n)
    }

    /// Almost-sure bound on `|unscaled entry|`, if the family is bounded.
    pub fn entry_bound(&self, n: usize) -> Option<f64> {
        match self.family {
            Family::Gaussian => None,
            Family::Constant => Some(self.mean_at(n).abs()),
            Family::BernoulliZeroOne => Some(if self.mean > 0.0 { 1.0 } else { 0.0 }),
            Family::SparseBernoulli => self.delta_at(n).map(|d| 1.0 / d),
        }
    }
}

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl SeedPolicy {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        SeedPolicy { master_seed, trial_index }
    }

    pub fn trial(self, trial_index: u64) -> Self {
        SeedPolicy { trial_index, ..self }
    }

    /// ChaCha8 keyed by the master seed, on the stream selected by the
    /// trial index. Streams are independent and need no shared state.
    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.trial_index);
        rng
    }
}

/// Dense `N × N` real lower-triangular matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMatrix {
    n: usize,
    entries: Vec<f64>,
    scale_applied: f64,
}

impl TriMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension { min: 1, got: 0 });
        }
        Ok(TriMatrix { n, entries: vec![0.0; n * n], scale_applied: 1.0 })
    }

    /// Builds a matrix from the lower-triangular entries produced by `f(i, j)`, `j <= i`.
    pub fn from_lower_fn(n: usize, scale_applied: f64, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = TriMatrix::zeros(n)?;
        m.scale_applied = scale_applied;
        for i in 0..n {
            for j in 0..=i {
                m.entries[i * n + j] = f(i, j);
            }
        }
        Ok(m)
    }

    /// Builds a matrix from dense rows; rejects nonzero entries above the diagonal.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = TriMatrix::zeros(n)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidArgument(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, &x) in row.iter().enumerate() {
                if j > i && x != 0.0 {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) above the diagonal is nonzero")));
                }
                m.entries[i * n + j] = x;
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scale_applied(&self) -> f64 {
        self.scale_applied
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Row `i` up to and including the diagonal.
    pub fn lower_row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..i * self.n + i + 1]
    }

    /// Row-major entries, including the zero upper triangle.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn scaled(&self, c: f64) -> TriMatrix {
        TriMatrix {
            n: self.n,
            entries: self.entries.iter().map(|x| x * c).collect(),
            scale_applied: self.scale_applied * c,
        }
    }

    /// `M v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must match the matrix dimension");
        (0..self.n).map(|i| self.lower_row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `(M - c·T_N-pattern) v`: subtracts `c` from every lower entry before
    /// multiplying. Used to centre a sample at its mean without a second matrix.
    pub fn centered_mul_vec(&self, c: f64, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must match the matrix dimension");
        (0..self.n).map(|i| self.lower_row(i).iter().zip(v).map(|(a, b)| (a - c) * b).sum()).collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == 0.0))
    }
}

/// The deterministic matrix with every lower entry `1/n`.
pub fn make_t(n: usize) -> Result<TriMatrix> {
    if n == 0 {
        return Err(Error::Dimension { min: 1, got: 0 });
    }
    let v = Scale::OneOverN.factor(n);
    TriMatrix::from_lower_fn(n, v, |_, _| v)
}

/// Draws one lower-triangular sample. Entries are filled row by row from
/// the stream selected by `seed`, so equal inputs give bit-identical output.
pub fn sample_x(spec: &EnsembleSpec, n: usize, seed: SeedPolicy) -> Result<TriMatrix> {
    if n == 0 {
        return Err(Error::Dimension { min: 1, got: 0 });
    }
    spec.validate()?;
    let scale = spec.scale.factor(n);
    let mean = spec.mean_at(n);
    let mut rng = seed.rng();
    match spec.family {
        Family::Constant => TriMatrix::from_lower_fn(n, scale, |_, _| mean * scale),
        Family::Gaussian => {
            let sd = spec.stddev;
            TriMatrix::from_lower_fn(n, scale, |_, _| {
                let z: f64 = rng.sample(StandardNormal);
                (mean + sd * z) * scale
            })
        }
        Family::BernoulliZeroOne => {
            let p = spec.mean;
            TriMatrix::from_lower_fn(n, scale, |_, _| {
                let x = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                x * scale
            })
        }
        Family::SparseBernoulli => {
            let delta = spec.delta_at(n).unwrap_or(f64::NAN);
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(Error::SparseDensity { delta, n });
            }
            let hit = 1.0 / delta;
            TriMatrix::from_lower_fn(n, scale, |_, _| {
                let x = if rng.random::<f64>() < delta { hit } else { 0.0 };
                x * scale
            })
        }
    }
}

/// Diagonal variance convention for the shifted GOE sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DiagonalVariance {
    /// `2/n`, the standard GOE normalisation.
    #[default]
    Doubled,
    /// `1/n`, the same as the off-diagonal entries.
    Equal,
}

/// Symmetric matrix with off-diagonal entries `N(shift/n, 1/n)` and
/// diagonal entries `N(shift/n, 2/n)`.
pub fn sample_goe_shifted(n: usize, shift: f64, seed: SeedPolicy) -> Result<DMatrix<f64>> {
    sample_goe_shifted_with(n, shift, DiagonalVariance::Doubled, seed)
}

pub fn sample_goe_shifted_with(
    n: usize,
    shift: f64,
    diagonal: DiagonalVariance,
    seed: SeedPolicy,
) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::Dimension { min: 2, got: n });
    }
    if !shift.is_finite() {
        return Err(Error::InvalidArgument("shift must be finite".into()));
    }
    let mut rng = seed.rng();
    let nf = n as f64;
    let mean = shift / nf;
    let off_sd = (1.0 / nf).sqrt();
    let diag_sd = match diagonal {
        DiagonalVariance::Doubled => (2.0 / nf).sqrt(),
        DiagonalVariance::Equal => off_sd,
    };
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let z: f64 = rng.sample(StandardNormal);
            let sd = if i == j { diag_sd } else { off_sd };
            let x = mean + sd * z;
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    Ok(m)
}
