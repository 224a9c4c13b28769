//! Library results against independently computed values.

use std::f64::consts::PI;

use randtri::convergence::{
    schedule_feasible, sot_variance_bound, sot_variance_bound_exact, wot_variance_bound, wot_variance_bound_exact,
    KRule, KSchedule, Mode, SigmaRule, SizeRule, Verdict,
};
use randtri::ensembles::{make_t, sample_x, EnsembleSpec, SeedPolicy, TriMatrix};
use randtri::funcspace::{conjugate_action, l2_dist, volterra, GridFunction};
use randtri::moments::{normalized_trace_power, scaled_first_moment, trace_power, trace_power_t};
use randtri::spectra::{largest_singular_value, singular_values};

/// Number of eigenvalues of the symmetric `a` strictly below `x`, from the
/// signs of the pivots of `a - xI` (Sylvester's law of inertia).
fn count_below(a: &[Vec<f64>], x: f64) -> usize {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= x;
    }
    let mut negatives = 0;
    for k in 0..n {
        let mut p = m[k][k];
        if p == 0.0 {
            p = -1e-300;
        }
        if p < 0.0 {
            negatives += 1;
        }
        let pivot_row = m[k].clone();
        for row in m.iter_mut().skip(k + 1) {
            let f = row[k] / p;
            for (x, y) in row.iter_mut().zip(&pivot_row).skip(k + 1) {
                *x -= f * y;
            }
        }
    }
    negatives
}

/// Eigenvalues of a symmetric matrix by bisection, descending.
fn bisection_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let bound: f64 = a.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max) + 1.0;
    let mut out = Vec::new();
    for k in 0..n {
        // The (k+1)-th smallest eigenvalue: smallest x with count_below(x) > k.
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(a, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out.reverse();
    out
}

fn gram(m: &TriMatrix) -> Vec<Vec<f64>> {
    let n = m.n();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| m.get(k, i) * m.get(k, j)).sum()).collect()).collect()
}

fn t_singular_closed_form(n: usize) -> Vec<f64> {
    (1..=n).map(|k| 1.0 / (2.0 * n as f64 * ((2 * k - 1) as f64 * PI / (4 * n + 2) as f64).sin())).collect()
}

#[test]
fn svd_matches_inertia_bisection() {
    for n in 1..=8 {
        let mut cases = vec![make_t(n).unwrap()];
        for (trial, spec) in [EnsembleSpec::gaussian(0.3, 1.0), EnsembleSpec::bernoulli(0.5)].iter().enumerate() {
            cases.push(sample_x(spec, n, SeedPolicy::new(11, trial as u64)).unwrap());
        }
        for m in cases {
            let got = singular_values(&m).values;
            let eig = bisection_eigenvalues(&gram(&m));
            let top = eig[0].max(1e-300);
            for (g, l) in got.iter().zip(&eig) {
                // Compare squares: the square root amplifies rounding near a zero eigenvalue.
                assert!((g * g - l).abs() <= 1e-10 * top, "n={n}: {got:?} vs {eig:?}");
                if *l > 1e-8 * top {
                    assert!((g - l.sqrt()).abs() <= 1e-10 * l.sqrt(), "n={n}: {g} vs {}", l.sqrt());
                }
            }
        }
    }
}

#[test]
fn t_spectrum_has_closed_form() {
    for n in [1, 2, 3, 10, 100, 512] {
        let got = singular_values(&make_t(n).unwrap()).values;
        let want = t_singular_closed_form(n);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-10 * want[0], "n={n}");
        }
        let top = largest_singular_value(&make_t(n).unwrap());
        assert!((top - want[0]).abs() <= 1e-9 * want[0]);
    }
}

#[test]
fn exact_traces_match_integer_powers() {
    fn brute(n: usize, pow: u32) -> i128 {
        // G = LᵀL for the all-ones lower-triangular L.
        let g: Vec<Vec<i128>> =
            (0..n).map(|i| (0..n).map(|j| (0..n).filter(|&k| k >= i && k >= j).count() as i128).collect()).collect();
        let mut p: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i128).collect()).collect();
        for _ in 0..pow {
            p = (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| p[i][k] * g[k][j]).sum()).collect()).collect();
        }
        (0..n).map(|i| p[i][i]).sum()
    }
    for n in 1..=12 {
        for pow in 1..=4 {
            let r = trace_power_t(n, pow).unwrap();
            assert_eq!(r.exact.to_string(), brute(n, pow).to_string(), "n={n} pow={pow}");
        }
    }
    assert_eq!(trace_power_t(2, 2).unwrap().exact.to_string(), "7");
}

#[test]
fn float_trace_matches_exact_trace() {
    for n in [1, 5, 16] {
        for pow in 1..=3 {
            let exact: f64 = trace_power_t(n, pow).unwrap().exact.to_string().parse().unwrap();
            let scale = (n as f64).powi(2 * pow as i32);
            let got = trace_power(&make_t(n).unwrap(), pow) * scale;
            assert!((got - exact).abs() <= 1e-11 * exact, "n={n} pow={pow}: {got} vs {exact}");
        }
    }
}

/// Three-point Gauss–Legendre on each of `m` subintervals of `[0, 1]`;
/// exact for piecewise polynomials of degree ≤ 5 on that grid.
fn integrate(m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let nodes = [(-(0.6f64).sqrt(), 5.0 / 9.0), (0.0, 8.0 / 9.0), ((0.6f64).sqrt(), 5.0 / 9.0)];
    let h = 1.0 / m as f64;
    (0..m)
        .map(|i| {
            let c = (i as f64 + 0.5) * h;
            nodes.iter().map(|(x, w)| w * f(c + x * h / 2.0)).sum::<f64>() * h / 2.0
        })
        .sum()
}

#[test]
fn riemann_law_by_quadrature() {
    for n in [1, 2, 3, 7, 16, 60] {
        // W T W* 1 equals i/N on the i-th cell (1-based); V 1 = x.
        let step = |x: f64| ((x * n as f64).floor() + 1.0).min(n as f64) / n as f64;
        let oracle = integrate(n, |x| (step(x) - x).powi(2)).sqrt();
        let f = GridFunction::constant(n, 1.0).unwrap();
        let lib = l2_dist(&conjugate_action(&make_t(n).unwrap(), &f).unwrap(), &volterra(&f).unwrap()).unwrap();
        assert!((lib - oracle).abs() <= 1e-12 * oracle, "n={n}");
        assert!((lib - 1.0 / (3f64.sqrt() * n as f64)).abs() <= 1e-12 / n as f64);
    }
}

#[test]
fn riemann_error_for_identity_by_quadrature() {
    let n = 8;
    let cells = 32;
    let f = GridFunction::identity(cells).unwrap();
    // (W* f)_i = √N ∫_cell x dx; (T W* f)_i = (1/N) Σ_{j≤i} (W* f)_j; embedded value √N times that.
    let proj: Vec<f64> = (0..n).map(|i| ((i + 1) * (i + 1) - i * i) as f64 / (2.0 * (n * n) as f64)).collect();
    let partial: Vec<f64> = proj
        .iter()
        .scan(0.0, |s, x| {
            *s += x;
            Some(*s)
        })
        .collect();
    let step = |x: f64| partial[((x * n as f64) as usize).min(n - 1)];
    let oracle = integrate(cells, |x| (step(x) - x * x / 2.0).powi(2)).sqrt();
    let lib = l2_dist(&conjugate_action(&make_t(n).unwrap(), &f).unwrap(), &volterra(&f).unwrap()).unwrap();
    assert!((lib - oracle).abs() <= 1e-12 * oracle, "{lib} vs {oracle}");
}

/// Every 0/1 lower-triangular pattern of size `n` with its probability.
fn bernoulli_patterns(n: usize, p: f64) -> Vec<(Vec<Vec<f64>>, f64)> {
    let slots: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    (0u32..1 << slots.len())
        .map(|mask| {
            let mut m = vec![vec![0.0; n]; n];
            let mut prob = 1.0;
            for (b, &(i, j)) in slots.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    m[i][j] = 1.0;
                    prob *= p;
                } else {
                    prob *= 1.0 - p;
                }
            }
            (m, prob)
        })
        .collect()
}

#[test]
fn variance_bounds_by_enumeration() {
    let n = 3;
    let p = 0.3;
    let spec = EnsembleSpec::bernoulli(p);
    let u_cells = [1.0, 2.0, -1.0];
    let v_cells = [0.5, -1.0, 3.0];
    let u = GridFunction::piecewise_constant(&u_cells).unwrap();
    let v = GridFunction::piecewise_constant(&v_cells).unwrap();
    // W* of a step function on N cells: the cell value over √N.
    let root = (n as f64).sqrt();
    let un: Vec<f64> = u_cells.iter().map(|x| x / root).collect();
    let vn: Vec<f64> = v_cells.iter().map(|x| x / root).collect();
    let (mut sot, mut wot) = (0.0, 0.0);
    for (m, prob) in bernoulli_patterns(n, p) {
        // X - μT has entries (ξ_ij - p)/N below the diagonal.
        let dev: Vec<f64> = (0..n).map(|i| (0..=i).map(|j| (m[i][j] - p) / n as f64 * un[j]).sum()).collect();
        sot += prob * dev.iter().map(|d| d * d).sum::<f64>();
        let inner: f64 = dev.iter().zip(&vn).map(|(d, w)| d * w).sum();
        wot += prob * inner * inner;
    }
    let sot_exact = sot_variance_bound_exact(&spec, n, &u).unwrap();
    let wot_exact = wot_variance_bound_exact(&spec, n, &u, &v).unwrap();
    assert!((sot - sot_exact).abs() <= 1e-14, "{sot} vs {sot_exact}");
    assert!((wot - wot_exact).abs() <= 1e-14, "{wot} vs {wot_exact}");
    assert!(sot_exact <= sot_variance_bound(&spec, n, &u));
    assert!(wot_exact <= wot_variance_bound(&spec, n, &u, &v));
}

#[test]
fn first_moment_by_enumeration() {
    for (n, p) in [(1, 0.5), (2, 0.5), (3, 0.2), (4, 0.9)] {
        let spec = EnsembleSpec::bernoulli(p);
        let mut expect = 0.0;
        for (m, prob) in bernoulli_patterns(n, p) {
            let x =
                TriMatrix::from_rows(&m.iter().map(|r| r.iter().map(|v| v / n as f64).collect()).collect::<Vec<_>>())
                    .unwrap();
            expect += prob * n as f64 * normalized_trace_power(&x, 1);
        }
        let closed = scaled_first_moment(&spec, n);
        assert!((expect - closed).abs() <= 1e-14, "n={n} p={p}: {expect} vs {closed}");
    }
    assert!((scaled_first_moment(&EnsembleSpec::bernoulli(0.5), 10) - 0.275).abs() < 1e-15);
}

#[test]
fn schedule_verdicts_agree_with_numeric_rates() {
    // log₂ of k(N)·σ/√N (SOT) at a_N = N, evaluated far out.
    let log_ratio = |alpha: f64, s: f64, n: f64| alpha * n.log2() + s * n.log2() - 0.5 * n.log2();
    for alpha in [0.25, 0.55, 0.75, 1.0] {
        for s in [-0.5, -0.3, -0.1, 0.0, 0.2] {
            let sigma = SigmaRule::Power { exponent: s };
            let k = KSchedule::new(SizeRule::Identity, KRule::Power { alpha }).unwrap();
            let f = schedule_feasible(&sigma, &k, Mode::Sot).unwrap();
            let numeric_vanishes = log_ratio(alpha, s, 1e30) < log_ratio(alpha, s, 1e6) - 1.0;
            // p-series test for Σ N^(-2α).
            let numeric_summable = 2.0 * alpha > 1.0;
            assert_eq!(f.ratio_vanishes, numeric_vanishes, "alpha={alpha} s={s}");
            assert_eq!(f.summable, numeric_summable, "alpha={alpha}");
            let want = if numeric_vanishes && numeric_summable { Verdict::Guaranteed } else { Verdict::NotGuaranteed };
            assert_eq!(f.verdict, want);
        }
    }
}
