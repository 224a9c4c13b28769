//! Singular-value and eigenvalue spectra, histograms, and the reference
//! values they are compared with.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ensembles::TriMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectrumKind {
    Singular,
    Eigen,
}

/// Descending list of singular values or eigenvalues of an `n × n` matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
    pub n: usize,
}

impl Spectrum {
    fn new(mut values: Vec<f64>, kind: SpectrumKind, n: usize) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Spectrum { values, kind, n }
    }

    pub fn count_above(&self, x: f64) -> usize {
        self.values.iter().filter(|&&v| v > x).count()
    }

    pub fn fraction_within(&self, lo: f64, hi: f64) -> f64 {
        let inside = self.values.iter().filter(|&&v| (lo..=hi).contains(&v)).count();
        inside as f64 / self.values.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{i},{v:?}");
        }
        s
    }
}

/// Singular values of a dense matrix, descending.
pub fn singular_values(m: &TriMatrix) -> Spectrum {
    let sv = m.to_dmatrix().singular_values();
    Spectrum::new(sv.iter().map(|x| x.max(0.0)).collect(), SpectrumKind::Singular, m.n())
}

/// Largest singular value by power iteration on `MᵀM`, starting from the
/// all-ones vector. Cheap enough to run once per Monte Carlo trial.
pub fn largest_singular_value(m: &TriMatrix) -> f64 {
    let n = m.n();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut sigma = 0.0;
    for _ in 0..1000 {
        let mv = m.mul_vec(&v);
        let mut w = vec![0.0; n];
        for (i, mvi) in mv.iter().enumerate() {
            for (wj, a) in w.iter_mut().zip(m.lower_row(i)) {
                *wj += a * mvi;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm.sqrt();
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / norm);
        if (next - sigma).abs() <= 1e-12 * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// `2 / (π(2k + 1))` for `k = 0..count`: the singular values of the
/// Volterra operator.
pub fn volterra_reference(count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    Ok((0..count).map(|k| 2.0 / (PI * (2 * k + 1) as f64)).collect())
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn eigen_values(m: &DMatrix<f64>) -> Result<Spectrum> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::InvalidArgument(format!("expected a square matrix, got {}×{}", n, m.ncols())));
    }
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-12 {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = m.clone().symmetric_eigenvalues();
    Ok(Spectrum::new(eig.iter().copied().collect(), SpectrumKind::Eigen, n))
}

/// `√(4 - x²) / (2π)` on `[-2, 2]`.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * PI)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,lo,hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{i},{:?},{:?},{c}", self.bin_edges[i], self.bin_edges[i + 1]);
        }
        s
    }
}

/// Uniform-width histogram over `range` (default `[min, max]`, widened by
/// ±1/2 when all values coincide). A value on an interior edge belongs to
/// the bin on its left; the first bin is closed on both sides. Values
/// outside an explicit range are counted in the nearest end bin, so the
/// counts always add up to the spectrum length.
pub fn make_histogram(s: &Spectrum, bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be >= 1".into()));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if lo >= hi || lo.is_nan() || hi.is_nan() {
                return Err(Error::InvalidArgument(format!("histogram range needs lo < hi, got ({lo}, {hi})")));
            }
            (lo, hi)
        }
        None => {
            let min = s.values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !min.is_finite() || !max.is_finite() {
                return Err(Error::InvalidArgument("cannot histogram an empty spectrum".into()));
            }
            if min == max {
                (min - 0.5, max + 0.5)
            } else {
                (min, max)
            }
        }
    };
    let width = hi - lo;
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64 / bins as f64).collect();
    bin_edges.push(hi);
    let mut counts = vec![0; bins];
    let inner = &bin_edges[1..bins];
    for &v in &s.values {
        counts[inner.partition_point(|&e| e < v)] += 1;
    }
    Ok(Histogram { bin_edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::make_t;

    #[test]
    fn small_t_spectra() {
        assert_eq!(singular_values(&make_t(1).unwrap()).values, vec![1.0]);
        let s = singular_values(&make_t(2).unwrap());
        let r = 0.3125f64.sqrt();
        let want = [((0.75 + r) / 2.0).sqrt(), ((0.75 - r) / 2.0).sqrt()];
        for (a, b) in s.values.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((s.values[0] - 0.809017).abs() < 1e-5);
        assert!((s.values[1] - 0.309017).abs() < 1e-5);
    }

    #[test]
    fn power_iteration_matches_svd() {
        for n in [1, 3, 17, 64] {
            let t = make_t(n).unwrap();
            let s = singular_values(&t).values[0];
            assert!((largest_singular_value(&t) - s).abs() < 1e-9, "n={n}");
        }
        assert_eq!(largest_singular_value(&TriMatrix::zeros(3).unwrap()), 0.0);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn reference_ladder() {
        let r = volterra_reference(3).unwrap();
        assert!((r[0] - 0.636620).abs() < 1e-6);
        assert!((r[1] - 0.212207).abs() < 1e-6);
        assert!((r[2] - 0.127324).abs() < 1e-6);
        assert!((volterra_reference(1).unwrap()[0] - 0.6366198).abs() < 1e-7);
        let long = volterra_reference(1000).unwrap();
        assert!(long.windows(2).all(|w| w[0] > w[1]));
        assert!(*long.last().unwrap() < 1e-3);
        assert!(volterra_reference(0).is_err());
    }

    #[test]
    fn eigenvalue_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(eigen_values(&id).unwrap().values, vec![1.0, 1.0, 1.0]);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = eigen_values(&d).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(e.kind, SpectrumKind::Eigen);
        let mut a = id.clone();
        a[(0, 1)] = 1e-6;
        assert!(matches!(eigen_values(&a), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn histogram_examples() {
        let s = Spectrum::new(vec![1.0, 1.0, 1.0], SpectrumKind::Eigen, 3);
        assert_eq!(make_histogram(&s, 1, None).unwrap().counts, vec![3]);
        let s = Spectrum::new(vec![0.5, 1.5], SpectrumKind::Eigen, 2);
        assert_eq!(make_histogram(&s, 2, Some((0.0, 2.0))).unwrap().counts, vec![1, 1]);
        assert!(make_histogram(&s, 2, Some((1.0, 1.0))).is_err());
        assert!(make_histogram(&s, 0, None).is_err());
    }

    #[test]
    fn histogram_edges_go_left() {
        let s = Spectrum::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], SpectrumKind::Eigen, 5);
        let h = make_histogram(&s, 4, Some((0.0, 4.0))).unwrap();
        // 0 and 1 in the first bin, 2 in the second, 3 in the third, 4 in the last.
        assert_eq!(h.counts, vec![2, 1, 1, 1]);
        let h = make_histogram(&s, 2, Some((1.5, 2.5))).unwrap();
        assert_eq!(h.counts, vec![3, 2]);
        assert_eq!(h.bin_edges, vec![1.5, 2.0, 2.5]);
    }

    #[test]
    fn semicircle_density_integrates_to_one() {
        let m = 20000;
        let h = 4.0 / m as f64;
        let total: f64 = (0..m).map(|i| semicircle_density(-2.0 + (i as f64 + 0.5) * h) * h).sum();
        assert!((total - 1.0).abs() < 1e-5);
    }
}
