//! One runner per subcommand. Each returns a [`Report`]: tables that become
//! CSV files, a JSON detail block, an optional SVG, and the checks whose
//! failure maps to exit code 2.

use serde_json::{json, Value};

use super::config::{ModeSelection, RunConfig, Subcommand, TestFunction};
use crate::convergence::{
    any_schedule_feasible, binomial_ceiling, concentration_check, run_campaign, schedule_feasible, Campaign, KRule,
    KSchedule, Mode, Probe, SigmaRule, SizeRule,
};
use crate::ensembles::{make_t, sample_goe_shifted_with, sample_x, EnsembleSpec, Family, SeedPolicy};
use crate::error::{Error, Result};
use crate::funcspace::{conjugate_action, l2_dist, volterra, GridFunction, MAX_REFINED_CELLS};
use crate::moments::{
    bounded_entry_envelope, empirical_tr_scaled, empirical_tr_xstarx, ones_block_decomposition_check, trace_power_t,
    MomentEstimate, TraceReport,
};
use crate::plot::{histogram_svg, ladder_svg};
use crate::spectra::{eigen_values, make_histogram, semicircle_density, singular_values, volterra_reference};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem of the CSV.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let obj = self.header.iter().zip(r).map(|(h, v)| (h.clone(), cell_json(v))).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

fn cell_json(s: &str) -> Value {
    if s.is_empty() {
        return Value::Null;
    }
    if let Ok(i) = s.parse::<i64>() {
        return json!(i);
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => json!(x),
        _ => json!(s),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    /// Per-trial arrays and other bulky detail, written only with `--full`.
    pub detail: Value,
    pub svg: Option<String>,
    pub checks: Vec<Check>,
    pub summary: Vec<String>,
}

impl Report {
    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }
}

pub fn f(x: f64) -> String {
    format!("{x:?}")
}

fn lcm(a: usize, b: usize) -> usize {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

/// Builds the configured test function on a grid that every size divides.
pub fn test_function(cfg: &RunConfig, sizes: &[usize]) -> Result<GridFunction> {
    let f = match &cfg.test_function {
        TestFunction::CustomCsv(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("test_function_path {}: {e}", path.display())))?;
            GridFunction::from_csv(&text)?
        }
        builtin => {
            let cells = match cfg.cells {
                Some(c) => c,
                None => {
                    let l = sizes.iter().fold(1usize, |acc, &n| lcm(acc, n));
                    if l as u128 > MAX_REFINED_CELLS {
                        return Err(Error::RefinementTooLarge(l as u128));
                    }
                    l * 4096usize.div_ceil(l)
                }
            };
            match builtin {
                TestFunction::One => GridFunction::constant(cells, 1.0)?,
                TestFunction::Linear => GridFunction::identity(cells)?,
                _ => GridFunction::sine(cells)?,
            }
        }
    };
    if let Some(&n) = sizes.iter().find(|&&n| f.cells() % n != 0) {
        return Err(Error::GridMismatch { cells: f.cells(), n });
    }
    Ok(f)
}

fn unit(f: GridFunction) -> Result<GridFunction> {
    let norm = f.norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("test function has zero norm".into()));
    }
    Ok(f.scale(1.0 / norm))
}

pub fn run_subcommand(cmd: Subcommand, cfg: &RunConfig) -> Result<Report> {
    let sizes = cfg.sizes_or_default();
    match cmd {
        Subcommand::RiemannDemo => riemann_demo(cfg, &sizes),
        Subcommand::SotTest => convergence_test(cfg, &sizes, Mode::Sot),
        Subcommand::WotTest => convergence_test(cfg, &sizes, Mode::Wot),
        Subcommand::Concentration => concentration(cfg, &sizes),
        Subcommand::ScheduleCheck => schedule_check(cfg),
        Subcommand::Spectrum => spectrum(cfg, &sizes),
        Subcommand::VolterraRef => volterra_ref(cfg),
        Subcommand::SemicircleDemo => semicircle(cfg, &sizes),
        Subcommand::Moments => moments(cfg, &sizes),
        Subcommand::TraceBounds => trace_bounds(cfg, &sizes),
    }
}

fn riemann_demo(cfg: &RunConfig, sizes: &[usize]) -> Result<Report> {
    let func = test_function(cfg, sizes)?;
    let target = volterra(&func)?;
    let is_one = cfg.test_function == TestFunction::One;
    let mut table = Table::new("riemann-demo", &["N", "error", "predicted", "rel_diff"]);
    let mut report = Report::default();
    let mut errors = Vec::new();
    for &n in sizes {
        let err = l2_dist(&conjugate_action(&make_t(n)?, &func)?, &target)?;
        errors.push((n, err));
        if is_one {
            let pred = 1.0 / (3f64.sqrt() * n as f64);
            let rel = (err - pred).abs() / pred;
            report.check(format!("riemann N={n}"), rel <= 1e-10, format!("error {err:e}, predicted {pred:e}"));
            table.push(vec![n.to_string(), f(err), f(pred), f(rel)]);
        } else {
            table.push(vec![n.to_string(), f(err), String::new(), String::new()]);
        }
    }
    for w in errors.windows(2) {
        let ((n0, e0), (n1, e1)) = (w[0], w[1]);
        if n1 > n0 && n1 % n0 == 0 {
            report.check(format!("nonincreasing {n0}->{n1}"), e1 <= e0 * (1.0 + 1e-12), format!("{e0:e} -> {e1:e}"));
        }
    }
    report.summary.push(format!("{} sizes, grid of {} cells", sizes.len(), func.cells()));
    report.svg = Some(ladder_svg(
        &errors.iter().map(|e| e.1).collect::<Vec<_>>(),
        is_one.then(|| sizes.iter().map(|&n| 1.0 / (3f64.sqrt() * n as f64)).collect::<Vec<_>>()).as_deref(),
        cfg.width,
        cfg.height,
        "‖W T W* f − V f‖ by size index",
    ));
    report.tables.push(table);
    Ok(report)
}

fn convergence_test(cfg: &RunConfig, sizes: &[usize], mode: Mode) -> Result<Report> {
    let u = unit(test_function(cfg, sizes)?)?;
    let probe = match mode {
        Mode::Sot => Probe::Sot(u),
        Mode::Wot => Probe::Wot(u.clone(), u),
    };
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let k = cfg.k[0];
    let campaign = Campaign {
        spec: cfg.ensemble.clone(),
        schedule: KSchedule::new(SizeRule::Custom(sorted.clone()), KRule::Constant(k))?,
        indices: 1..=sorted.len(),
        probe,
        trials: cfg.trials,
        master_seed: cfg.seed,
        threshold: cfg.threshold,
        track_norm: cfg.track_norm,
    };
    let rows = run_campaign(&campaign)?;
    let name = match mode {
        Mode::Sot => "sot-test",
        Mode::Wot => "wot-test",
    };
    let mut table =
        Table::new(name, &["N", "trials", "median_err", "mean_sq_err", "bound", "exceed_rate", "k", "threshold"]);
    let mut report = Report::default();
    let slack = 1.0 + 5.0 / (cfg.trials as f64).sqrt();
    let p = 1.0 / (k * k);
    let ceiling = binomial_ceiling(p, 3.0, cfg.trials);
    for r in &rows {
        table.push(vec![
            r.n.to_string(),
            r.trials.to_string(),
            f(r.median_err),
            f(r.mean_sq_err),
            f(r.bound),
            f(r.exceed_rate),
            f(r.k),
            f(r.threshold),
        ]);
        report.check(
            format!("variance N={}", r.n),
            r.mean_sq_err <= r.bound * slack,
            format!("mean {:e} vs bound {:e} x {slack:.3}", r.mean_sq_err, r.bound),
        );
        report.check(
            format!("exceedance N={}", r.n),
            r.exceed_rate <= ceiling,
            format!("rate {} vs ceiling {ceiling:.4}", r.exceed_rate),
        );
    }
    report.detail = serde_json::to_value(&rows).unwrap_or(Value::Null);
    report.svg = Some(ladder_svg(
        &rows.iter().map(|r| r.mean_sq_err).collect::<Vec<_>>(),
        Some(&rows.iter().map(|r| r.bound).collect::<Vec<_>>()),
        cfg.width,
        cfg.height,
        "mean squared random part (dots) vs bound (rings)",
    ));
    report.tables.push(table);
    Ok(report)
}

fn modes(sel: ModeSelection) -> Vec<Mode> {
    match sel {
        ModeSelection::Sot => vec![Mode::Sot],
        ModeSelection::Wot => vec![Mode::Wot],
        ModeSelection::Both => vec![Mode::Sot, Mode::Wot],
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Sot => "sot",
        Mode::Wot => "wot",
    }
}

fn concentration(cfg: &RunConfig, sizes: &[usize]) -> Result<Report> {
    let u = unit(test_function(cfg, sizes)?)?;
    let mut table = Table::new(
        "concentration",
        &["N", "mode", "k", "trials", "threshold", "exceed_count", "exceed_rate", "chebyshev", "ceiling"],
    );
    let mut report = Report::default();
    let mut detail = Vec::new();
    for &n in sizes {
        for mode in modes(cfg.mode) {
            let probe = match mode {
                Mode::Sot => Probe::Sot(u.clone()),
                Mode::Wot => Probe::Wot(u.clone(), u.clone()),
            };
            for &k in &cfg.k {
                let stats = concentration_check(&cfg.ensemble, n, &probe, k, cfg.trials, cfg.seed, cfg.threshold)?;
                let p = (1.0 / (k * k)).min(1.0);
                let ceiling = binomial_ceiling(p, 3.0, cfg.trials);
                table.push(vec![
                    n.to_string(),
                    mode_name(mode).into(),
                    f(k),
                    stats.trials.to_string(),
                    f(stats.exceed_threshold),
                    stats.exceed_count.to_string(),
                    f(stats.exceed_rate()),
                    f(p),
                    f(ceiling),
                ]);
                report.check(
                    format!("{} N={n} k={k}", mode_name(mode)),
                    stats.exceed_rate() <= ceiling,
                    format!("rate {} vs ceiling {ceiling:.4}", stats.exceed_rate()),
                );
                detail.push(json!({"N": n, "mode": mode_name(mode), "k": k, "values": stats.values}));
            }
        }
    }
    report.detail = Value::Array(detail);
    report.tables.push(table);
    Ok(report)
}

fn rule_name(a: &SizeRule) -> String {
    match a {
        SizeRule::Identity => "N".into(),
        SizeRule::Powers2 => "2^N".into(),
        SizeRule::Custom(v) => format!("custom({} terms)", v.len()),
    }
}

fn k_name(k: Option<&KRule>) -> String {
    match k {
        None => "any".into(),
        Some(KRule::Power { alpha }) => format!("N^{alpha}"),
        Some(KRule::Exp2 { beta }) => format!("2^({beta}N)"),
        Some(KRule::Constant(c)) => format!("{c}"),
        Some(KRule::Custom(v)) => format!("custom({} terms)", v.len()),
    }
}

fn schedule_check(cfg: &RunConfig) -> Result<Report> {
    let mut table = Table::new(
        "schedule-check",
        &["case", "sigma", "a_seq", "k_rule", "mode", "ratio_vanishes", "summable", "verdict", "reason"],
    );
    let sigma_label = |s: &SigmaRule| match s {
        SigmaRule::Constant(c) => format!("{c}"),
        SigmaRule::Power { exponent } => format!("m^{exponent}"),
    };
    let mut cases: Vec<(String, SigmaRule, SizeRule, Option<KRule>, Mode)> = Vec::new();
    if cfg.a_seq.is_none() && cfg.k_rule.is_none() {
        let sigma = SigmaRule::Constant(0.5);
        let d = 0.5;
        cases.push(("constant sigma, a_N = N".into(), sigma, SizeRule::Identity, None, Mode::Sot));
        cases.push((
            "constant sigma, a_N = 2^N".into(),
            sigma,
            SizeRule::Powers2,
            Some(KRule::Exp2 { beta: 0.25 }),
            Mode::Sot,
        ));
        cases.push((
            "sparse d = 0.5".into(),
            SigmaRule::from_spec(&EnsembleSpec::sparse_bernoulli(d)),
            SizeRule::Identity,
            Some(KRule::Power { alpha: (3.0 - d) / 4.0 }),
            Mode::Wot,
        ));
        cases.push((
            "sparse d = 1.5".into(),
            SigmaRule::from_spec(&EnsembleSpec::sparse_bernoulli(1.5)),
            SizeRule::Identity,
            None,
            Mode::Wot,
        ));
    } else {
        let sigma = SigmaRule::from_spec(&cfg.ensemble);
        let a = cfg.a_seq.clone().unwrap_or(SizeRule::Identity);
        for mode in modes(cfg.mode) {
            cases.push((cfg.ensemble.family.name().into(), sigma, a.clone(), cfg.k_rule.clone(), mode));
        }
    }
    let mut report = Report::default();
    for (case, sigma, a, k, mode) in cases {
        let verdict = match &k {
            Some(k) => schedule_feasible(&sigma, &KSchedule::new(a.clone(), k.clone())?, mode)?,
            None => any_schedule_feasible(&sigma, &a, mode)?,
        };
        report.summary.push(format!("{case}: {:?} ({})", verdict.verdict, verdict.reason));
        table.push(vec![
            case,
            sigma_label(&sigma),
            rule_name(&a),
            k_name(k.as_ref()),
            mode_name(mode).into(),
            verdict.ratio_vanishes.to_string(),
            verdict.summable.to_string(),
            format!("{:?}", verdict.verdict),
            verdict.reason,
        ]);
    }
    report.tables.push(table);
    Ok(report)
}

fn spectrum(cfg: &RunConfig, sizes: &[usize]) -> Result<Report> {
    let mut table = Table::new("spectrum", &["N", "index", "value", "reference"]);
    let mut report = Report::default();
    let mut last = None;
    for &n in sizes {
        let x = sample_x(&cfg.ensemble, n, SeedPolicy::new(cfg.seed, 0))?;
        let s = singular_values(&x);
        let mu = cfg.ensemble.effective_mean(n);
        let reference: Vec<f64> = volterra_reference(n)?.into_iter().map(|r| mu * r).collect();
        for (i, (v, r)) in s.values.iter().zip(&reference).enumerate() {
            table.push(vec![n.to_string(), i.to_string(), f(*v), f(*r)]);
        }
        let top: Vec<String> =
            s.values.iter().zip(&reference).take(cfg.top).map(|(v, r)| format!("{v:.6} (ref {r:.6})")).collect();
        report.summary.push(format!("N={n}: {}", top.join(", ")));
        last = Some((s, reference));
    }
    if let Some((s, reference)) = last {
        let hist = make_histogram(&s, cfg.bins, None)?;
        report.svg = Some(histogram_svg(&hist, cfg.width, cfg.height, "singular values", None));
        report.detail = json!({
            "histogram": hist,
            "ladder": ladder_svg(&s.values[..cfg.top.min(s.values.len())], Some(&reference[..cfg.top.min(reference.len())]), cfg.width, cfg.height, "top singular values vs reference"),
        });
    }
    report.tables.push(table);
    Ok(report)
}

fn volterra_ref(cfg: &RunConfig) -> Result<Report> {
    let values = volterra_reference(cfg.count)?;
    let mut table = Table::new("volterra-ref", &["index", "value"]);
    let mut report = Report::default();
    for (i, v) in values.iter().enumerate() {
        table.push(vec![i.to_string(), f(*v)]);
        report.summary.push(format!("{i} {v:.10}"));
    }
    report.tables.push(table);
    Ok(report)
}

fn semicircle(cfg: &RunConfig, sizes: &[usize]) -> Result<Report> {
    let mut table = Table::new("semicircle-demo", &["N", "bin", "lo", "hi", "count"]);
    let mut report = Report::default();
    let mut detail = Vec::new();
    for &n in sizes {
        let m = sample_goe_shifted_with(n, cfg.shift, cfg.diag_variance, SeedPolicy::new(cfg.seed, 0))?;
        let eig = eigen_values(&m)?;
        let hist = make_histogram(&eig, cfg.bins, None)?;
        for (i, c) in hist.counts.iter().enumerate() {
            table.push(vec![
                n.to_string(),
                i.to_string(),
                f(hist.bin_edges[i]),
                f(hist.bin_edges[i + 1]),
                c.to_string(),
            ]);
        }
        let predicted = if cfg.shift > 1.0 { format!("{:.4}", cfg.shift + 1.0 / cfg.shift) } else { "none".into() };
        report.summary.push(format!(
            "N={n}: top eigenvalue {:.4} (predicted outlier {predicted}), {} above 2.5, {:.2}% in [-2.1, 2.1]",
            eig.values[0],
            eig.count_above(2.5),
            100.0 * eig.fraction_within(-2.1, 2.1)
        ));
        report.svg = Some(histogram_svg(
            &hist,
            cfg.width,
            cfg.height,
            &format!("GOE eigenvalues, N = {n}, shift {}", cfg.shift),
            Some(&semicircle_density),
        ));
        detail.push(json!({"N": n, "eigenvalues": eig.values}));
    }
    report.detail = Value::Array(detail);
    report.tables.push(table);
    Ok(report)
}

fn moments(cfg: &RunConfig, sizes: &[usize]) -> Result<Report> {
    let pows = if cfg.pow.is_empty() { vec![1, 2] } else { cfg.pow.clone() };
    let header = MomentEstimate::CSV_HEADER.split(',').collect::<Vec<_>>();
    let mut unscaled = Table::new("moments-unscaled", &header);
    let mut scaled = Table::new("moments-scaled", &header);
    let mut report = Report::default();
    let mut detail = Vec::new();
    let spec = &cfg.ensemble;
    let nonnegative = match spec.family {
        Family::BernoulliZeroOne | Family::SparseBernoulli => true,
        Family::Constant => spec.mean >= 0.0 && spec.mean_drift >= 0.0,
        Family::Gaussian => false,
    };
    for &n in sizes {
        for &pow in &pows {
            let a = empirical_tr_xstarx(spec, n, pow, cfg.trials.max(2), cfg.seed)?;
            let b = empirical_tr_scaled(spec, n, pow, cfg.trials.max(2), cfg.seed)?;
            unscaled.push(csv_cells(&a));
            scaled.push(csv_cells(&b));
            if let (true, Some(k)) = (nonnegative, spec.entry_bound(n)) {
                let env = bounded_entry_envelope(k * spec.scale.relative_to_t(n), n, pow);
                let worst = a.values.iter().copied().fold(0.0, f64::max);
                report.check(
                    format!("envelope N={n} pow={pow}"),
                    worst <= env * (1.0 + 1e-12),
                    format!("max trial {worst:e} vs K^2n/N = {env:e}"),
                );
            }
            if let Some(cf) = b.closed_form {
                let tol = (4.0 * b.stderr).max(1e-12 * cf.abs());
                report.check(
                    format!("first moment N={n}"),
                    (b.mean - cf).abs() <= tol,
                    format!("mean {:.6} vs {cf:.6} (tol {tol:.2e})", b.mean),
                );
            }
            detail.push(json!({"N": n, "pow": pow, "unscaled": a.values, "scaled": b.values}));
        }
    }
    report.detail = Value::Array(detail);
    report.tables.push(unscaled);
    report.tables.push(scaled);
    Ok(report)
}

fn csv_cells(m: &MomentEstimate) -> Vec<String> {
    m.csv_row().split(',').map(str::to_string).collect()
}

fn trace_bounds(cfg: &RunConfig, sizes: &[usize]) -> Result<Report> {
    let pows = if cfg.pow.is_empty() { vec![1, 2, 3] } else { cfg.pow.clone() };
    let header = TraceReport::CSV_HEADER.split(',').collect::<Vec<_>>();
    let mut table = Table::new("trace-bounds", &header);
    let mut report = Report::default();
    for &n in sizes {
        let identity = ones_block_decomposition_check(n)?;
        report.check(format!("ones blocks N={n}"), identity, "N²T*T = Σ 1_k");
        for &pow in &pows {
            let r = trace_power_t(n, pow)?;
            report.check(
                format!("sandwich N={n} pow={pow}"),
                r.holds(),
                format!("{} <= {} <= {}", r.lower, r.exact, r.upper),
            );
            table.push(r.csv_row().split(',').map(str::to_string).collect());
        }
    }
    report.tables.push(table);
    Ok(report)
}
