//! The `randtri` executable: one subcommand per experiment, a JSON config
//! file whose keys the flags override, and CSV/JSON/SVG outputs.
//!
//! Exit codes: 0 on success, 1 on a validation or operational error, 2 when
//! an experiment ran but one of its checks failed.

pub mod config;
pub mod experiments;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand as ClapSubcommand};
use serde_json::{json, Value};

use crate::ensembles::Family;
use config::{
    build_ensemble, parse_config, parse_diag_variance, parse_format, parse_k_rule, parse_mode, parse_scale,
    parse_size_rule, parse_sizes, parse_threshold, OutputFormat, RunConfig, Subcommand, TestFunction,
};
pub use experiments::{Check, Report, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "randtri", version, about = "Random lower-triangular matrix experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration file; flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Comma-separated sizes; `2,4,...,1024` expands.
    #[arg(long, global = true, value_name = "LIST")]
    pub sizes: Option<String>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// csv, json or svg.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Include per-trial arrays in JSON output.
    #[arg(long, global = true)]
    pub full: bool,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Gaussian, BernoulliZeroOne, SparseBernoulli or Constant.
    #[arg(long, global = true)]
    pub family: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mean: Option<f64>,
    #[arg(long, global = true)]
    pub stddev: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta_exponent: Option<f64>,
    /// OneOverN, PiOverN or a number c (entries scaled by c).
    #[arg(long, global = true)]
    pub scale: Option<String>,
    /// one, linear, sine or custom-csv.
    #[arg(long, global = true)]
    pub test_function: Option<String>,
    #[arg(long, global = true, value_name = "PATH")]
    pub test_function_path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cells: Option<usize>,
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    #[arg(long, global = true)]
    pub width: Option<u32>,
    #[arg(long, global = true)]
    pub height: Option<u32>,
}

#[derive(Debug, ClapSubcommand)]
pub enum Command {
    /// ‖W T W* f − V f‖ over a size ladder.
    RiemannDemo,
    /// Strong-operator-topology campaign.
    SotTest(ProbeArgs),
    /// Weak-operator-topology campaign.
    WotTest(ProbeArgs),
    /// Exceedance rates against k·√bound.
    Concentration(ConcentrationArgs),
    /// Feasibility of a (a_N, k(N)) schedule.
    ScheduleCheck(ScheduleArgs),
    /// Singular values of one sample against the Volterra ladder.
    Spectrum(SpectrumArgs),
    /// Singular values of the Volterra operator.
    VolterraRef(VolterraArgs),
    /// Shifted GOE eigenvalue histogram.
    SemicircleDemo(SemicircleArgs),
    /// Monte Carlo trace moments.
    Moments(PowArgs),
    /// Exact trace sandwich for T.
    TraceBounds(TraceArgs),
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub k: Option<f64>,
    /// simplified or exact.
    #[arg(long)]
    pub threshold: Option<String>,
    #[arg(long)]
    pub track_norm: bool,
}

#[derive(Debug, Args)]
pub struct ConcentrationArgs {
    /// Comma-separated k values.
    #[arg(long)]
    pub k: Option<String>,
    /// sot, wot or both.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub threshold: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// identity, powers2 or a comma-separated list.
    #[arg(long)]
    pub a_seq: Option<String>,
    /// power:α, exp2:β, constant:k or a comma-separated list.
    #[arg(long)]
    pub k_rule: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VolterraArgs {
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SemicircleArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub shift: Option<f64>,
    /// doubled or equal.
    #[arg(long)]
    pub diag_variance: Option<String>,
}

#[derive(Debug, Args)]
pub struct PowArgs {
    /// Comma-separated powers.
    #[arg(long)]
    pub pow: Option<String>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// A single size (same as --sizes N).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub pow: Option<String>,
}

/// A failure before any experiment output is produced.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub Vec<String>);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0.join("\n"))
    }
}

fn command_name(c: &Command) -> Subcommand {
    match c {
        Command::RiemannDemo => Subcommand::RiemannDemo,
        Command::SotTest(_) => Subcommand::SotTest,
        Command::WotTest(_) => Subcommand::WotTest,
        Command::Concentration(_) => Subcommand::Concentration,
        Command::ScheduleCheck(_) => Subcommand::ScheduleCheck,
        Command::Spectrum(_) => Subcommand::Spectrum,
        Command::VolterraRef(_) => Subcommand::VolterraRef,
        Command::SemicircleDemo(_) => Subcommand::SemicircleDemo,
        Command::Moments(_) => Subcommand::Moments,
        Command::TraceBounds(_) => Subcommand::TraceBounds,
    }
}

fn list<T: std::str::FromStr>(s: &str, key: &str, problems: &mut Vec<String>) -> Option<Vec<T>> {
    let parsed: Result<Vec<T>, _> = s.split(',').map(|p| p.trim().parse::<T>()).collect();
    match parsed {
        Ok(v) if !v.is_empty() => Some(v),
        _ => {
            problems.push(format!("{key}: cannot parse {s:?}"));
            None
        }
    }
}

/// Merges the config file (if any) with the command-line flags and
/// validates the result.
pub fn resolve(cli: &Cli) -> Result<RunConfig, UsageError> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| UsageError(vec![format!("config: cannot read {}: {e}", path.display())]))?;
            parse_config(&text).map_err(|e| UsageError(e.problems))?
        }
        None => RunConfig::default(),
    };
    let mut problems = Vec::new();
    let cmd = command_name(&cli.command);
    if let Some(file_cmd) = cfg.subcommand {
        if file_cmd != cmd {
            problems.push(format!(
                "subcommand: config file names {:?} but the command line runs {:?}",
                file_cmd.name(),
                cmd.name()
            ));
        }
    }
    cfg.subcommand = Some(cmd);

    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.trials {
        cfg.trials = t;
    }
    if let Some(s) = &g.sizes {
        match parse_sizes(s) {
            Ok(v) if v.is_empty() => problems.push("sizes: must not be empty".into()),
            Ok(v) => cfg.sizes = v,
            Err(e) => problems.push(e),
        }
    }
    if let Some(o) = &g.out {
        cfg.output_dir = o.clone();
    }
    if let Some(f) = &g.format {
        match parse_format(f) {
            Some(f) => cfg.format = f,
            None => problems.push(format!("format: expected csv, json or svg, got {f:?}")),
        }
    }
    cfg.full |= g.full;
    if g.workers.is_some() {
        cfg.workers = g.workers;
    }
    let ensemble_flags =
        g.family.is_some() || g.mean.is_some() || g.stddev.is_some() || g.delta_exponent.is_some() || g.scale.is_some();
    if ensemble_flags {
        let family = match &g.family {
            Some(name) => Family::parse(name).unwrap_or_else(|| {
                problems.push(format!("family: unknown family {name:?}"));
                cfg.ensemble.family
            }),
            None => cfg.ensemble.family,
        };
        let same_family = family == cfg.ensemble.family;
        let keep = |x: f64| same_family.then_some(x);
        let scale = match &g.scale {
            Some(s) => parse_scale(s).or_else(|| {
                problems.push(format!("scale: expected OneOverN, PiOverN or a number, got {s:?}"));
                None
            }),
            None => Some(cfg.ensemble.scale),
        };
        let mean = g.mean.or(if family == Family::SparseBernoulli { None } else { keep(cfg.ensemble.mean) });
        let stddev = g.stddev.or(match family {
            Family::Gaussian => keep(cfg.ensemble.stddev),
            _ => None,
        });
        let delta = g.delta_exponent.or(if family == Family::SparseBernoulli {
            cfg.ensemble.delta_exponent.filter(|_| same_family)
        } else {
            None
        });
        let drift = Some(cfg.ensemble.mean_drift);
        cfg.ensemble = build_ensemble(family, mean, stddev, delta, scale, drift, &mut problems);
    }
    if let Some(t) = &g.test_function {
        match t.as_str() {
            "one" => cfg.test_function = TestFunction::One,
            "linear" => cfg.test_function = TestFunction::Linear,
            "sine" => cfg.test_function = TestFunction::Sine,
            "custom-csv" => match &g.test_function_path {
                Some(p) => cfg.test_function = TestFunction::CustomCsv(p.clone()),
                None => problems.push("test_function_path: required when test_function is custom-csv".into()),
            },
            other => problems.push(format!("test_function: unknown test function {other:?}")),
        }
    } else if let Some(p) = &g.test_function_path {
        cfg.test_function = TestFunction::CustomCsv(p.clone());
    }
    if let Some(c) = g.cells {
        cfg.cells = Some(c);
    }
    if let Some(b) = g.bins {
        cfg.bins = b;
    }
    if let Some(w) = g.width {
        cfg.width = w;
    }
    if let Some(h) = g.height {
        cfg.height = h;
    }

    let threshold = |s: &Option<String>, cfg: &mut RunConfig, problems: &mut Vec<String>| {
        if let Some(s) = s {
            match parse_threshold(s) {
                Some(t) => cfg.threshold = t,
                None => problems.push(format!("threshold: expected simplified or exact, got {s:?}")),
            }
        }
    };
    let mode = |s: &Option<String>, cfg: &mut RunConfig, problems: &mut Vec<String>| {
        if let Some(s) = s {
            match parse_mode(s) {
                Some(m) => cfg.mode = m,
                None => problems.push(format!("mode: expected sot, wot or both, got {s:?}")),
            }
        }
    };
    match &cli.command {
        Command::RiemannDemo => {}
        Command::SotTest(a) | Command::WotTest(a) => {
            if let Some(k) = a.k {
                cfg.k = vec![k];
            }
            threshold(&a.threshold, &mut cfg, &mut problems);
            cfg.track_norm |= a.track_norm;
        }
        Command::Concentration(a) => {
            if let Some(k) = a.k.as_deref().and_then(|s| list(s, "k", &mut problems)) {
                cfg.k = k;
            }
            mode(&a.mode, &mut cfg, &mut problems);
            threshold(&a.threshold, &mut cfg, &mut problems);
        }
        Command::ScheduleCheck(a) => {
            if let Some(s) = &a.a_seq {
                let rule = parse_size_rule(s)
                    .or_else(|| list::<usize>(s, "a_seq", &mut problems).map(crate::convergence::SizeRule::Custom));
                if rule.is_some() {
                    cfg.a_seq = rule;
                }
            }
            if let Some(s) = &a.k_rule {
                let rule = parse_k_rule(s)
                    .or_else(|| list::<f64>(s, "k_rule", &mut problems).map(crate::convergence::KRule::Custom));
                if rule.is_some() {
                    cfg.k_rule = rule;
                }
            }
            mode(&a.mode, &mut cfg, &mut problems);
        }
        Command::Spectrum(a) => {
            if let Some(t) = a.top {
                cfg.top = t;
            }
        }
        Command::VolterraRef(a) => {
            if let Some(c) = a.count {
                cfg.count = c;
            }
        }
        Command::SemicircleDemo(a) => {
            if let Some(s) = a.shift {
                cfg.shift = s;
            }
            if let Some(d) = &a.diag_variance {
                match parse_diag_variance(d) {
                    Some(d) => cfg.diag_variance = d,
                    None => problems.push(format!("diag_variance: expected doubled or equal, got {d:?}")),
                }
            }
        }
        Command::Moments(a) => {
            if let Some(p) = a.pow.as_deref().and_then(|s| list(s, "pow", &mut problems)) {
                cfg.pow = p;
            }
        }
        Command::TraceBounds(a) => {
            if let Some(n) = a.n {
                cfg.sizes = vec![n];
            }
            if let Some(p) = a.pow.as_deref().and_then(|s| list(s, "pow", &mut problems)) {
                cfg.pow = p;
            }
        }
    }
    for p in cfg.problems() {
        if !problems.contains(&p) {
            problems.push(p);
        }
    }
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(UsageError(problems))
    }
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn failed_checks(&self) -> Vec<&Check> {
        self.report.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failed_checks().is_empty() {
            0
        } else {
            2
        }
    }
}

fn metadata_line(cfg: &RunConfig) -> String {
    format!("# seed={} version={VERSION} config_hash={}", cfg.seed, cfg.fingerprint())
}

pub fn table_csv(t: &Table, cfg: &RunConfig) -> String {
    let mut s = t.header.join(",");
    s.push('\n');
    for r in &t.rows {
        s.push_str(&r.iter().map(|c| csv_escape(c)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    let _ = writeln!(s, "{}", metadata_line(cfg));
    s
}

fn csv_escape(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

fn report_json(report: &Report, cfg: &RunConfig) -> Value {
    let tables: serde_json::Map<String, Value> = report.tables.iter().map(|t| (t.name.clone(), t.to_json())).collect();
    let checks: Vec<Value> =
        report.checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect();
    let mut out = json!({
        "subcommand": cfg.subcommand.map(Subcommand::name),
        "seed": cfg.seed,
        "version": VERSION,
        "config_hash": cfg.fingerprint(),
        "config": cfg,
        "tables": tables,
        "checks": checks,
        "summary": report.summary,
    });
    if cfg.full {
        out["detail"] = report.detail.clone();
    }
    out
}

fn write(path: &Path, contents: &str, files: &mut Vec<PathBuf>) -> crate::Result<()> {
    fs::write(path, contents)
        .map_err(|e| crate::Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
    files.push(path.to_path_buf());
    Ok(())
}

/// Runs a validated configuration and writes its outputs.
pub fn run(cfg: &RunConfig) -> crate::Result<Outcome> {
    let cmd = cfg.subcommand.ok_or_else(|| crate::Error::InvalidArgument("subcommand: required".into()))?;
    let report = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| crate::Error::InvalidArgument(format!("workers: {e}")))?
            .install(|| experiments::run_subcommand(cmd, cfg))?,
        None => experiments::run_subcommand(cmd, cfg)?,
    };
    fs::create_dir_all(&cfg.output_dir).map_err(|e| {
        crate::Error::InvalidArgument(format!("output_dir: cannot create {}: {e}", cfg.output_dir.display()))
    })?;
    let mut files = Vec::new();
    match cfg.format {
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(&report_json(&report, cfg)).expect("report serialises");
            write(&cfg.output_dir.join(format!("{}.json", cmd.name())), &(text + "\n"), &mut files)?;
        }
        OutputFormat::Csv | OutputFormat::Svg => {
            for t in &report.tables {
                write(&cfg.output_dir.join(format!("{}.csv", t.name)), &table_csv(t, cfg), &mut files)?;
            }
            if cfg.format == OutputFormat::Svg {
                if let Some(svg) = &report.svg {
                    write(&cfg.output_dir.join(format!("{}.svg", cmd.name())), svg, &mut files)?;
                }
            }
        }
    }
    Ok(Outcome { report, files })
}

/// Parses `args` (including the program name), runs, prints a summary and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            for p in &e.0 {
                eprintln!("error: {p}");
            }
            return 1;
        }
    };
    let outcome = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    for line in &outcome.report.summary {
        println!("{line}");
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    for c in outcome.failed_checks() {
        eprintln!("check failed: {} ({})", c.name, c.detail);
    }
    outcome.exit_code()
}
