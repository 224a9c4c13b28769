//! Run configuration: JSON file parsing, defaults and validation.

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::convergence::{KRule, SizeRule, ThresholdMode};
use crate::ensembles::{DiagonalVariance, EnsembleSpec, Family, Scale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    RiemannDemo,
    SotTest,
    WotTest,
    Concentration,
    ScheduleCheck,
    Spectrum,
    VolterraRef,
    SemicircleDemo,
    Moments,
    TraceBounds,
}

impl Subcommand {
    pub const ALL: [Subcommand; 10] = [
        Subcommand::RiemannDemo,
        Subcommand::SotTest,
        Subcommand::WotTest,
        Subcommand::Concentration,
        Subcommand::ScheduleCheck,
        Subcommand::Spectrum,
        Subcommand::VolterraRef,
        Subcommand::SemicircleDemo,
        Subcommand::Moments,
        Subcommand::TraceBounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::RiemannDemo => "riemann-demo",
            Subcommand::SotTest => "sot-test",
            Subcommand::WotTest => "wot-test",
            Subcommand::Concentration => "concentration",
            Subcommand::ScheduleCheck => "schedule-check",
            Subcommand::Spectrum => "spectrum",
            Subcommand::VolterraRef => "volterra-ref",
            Subcommand::SemicircleDemo => "semicircle-demo",
            Subcommand::Moments => "moments",
            Subcommand::TraceBounds => "trace-bounds",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Sizes used when neither the file nor the flags give any.
    pub fn default_sizes(self) -> Vec<usize> {
        match self {
            Subcommand::RiemannDemo => (0..=10).map(|k| 1 << k).collect(),
            Subcommand::SotTest | Subcommand::WotTest => vec![64, 128, 256, 512],
            Subcommand::Concentration => vec![256],
            Subcommand::Spectrum => vec![1024],
            Subcommand::SemicircleDemo => vec![2000],
            Subcommand::Moments => vec![64, 128, 256],
            Subcommand::TraceBounds => (1..=32).collect(),
            Subcommand::ScheduleCheck | Subcommand::VolterraRef => vec![1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunction {
    One,
    Linear,
    Sine,
    CustomCsv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    Sot,
    Wot,
    Both,
}

/// Fully resolved settings for one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: Option<Subcommand>,
    pub ensemble: EnsembleSpec,
    /// Empty means "the subcommand's default ladder".
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub test_function: TestFunction,
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub format: OutputFormat,
    pub full: bool,
    /// Grid size for test functions; `None` picks a multiple of every size.
    pub cells: Option<usize>,
    pub k: Vec<f64>,
    pub threshold: ThresholdMode,
    pub mode: ModeSelection,
    pub count: usize,
    pub pow: Vec<u32>,
    pub bins: usize,
    pub shift: f64,
    pub diag_variance: DiagonalVariance,
    pub top: usize,
    pub a_seq: Option<SizeRule>,
    pub k_rule: Option<KRule>,
    pub track_norm: bool,
    #[serde(skip)]
    pub workers: Option<usize>,
    pub width: u32,
    pub height: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            subcommand: None,
            ensemble: EnsembleSpec::bernoulli(0.5),
            sizes: Vec::new(),
            trials: 100,
            seed: 0,
            test_function: TestFunction::One,
            output_dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            full: false,
            cells: None,
            k: vec![2.0, 5.0, 10.0],
            threshold: ThresholdMode::Simplified,
            mode: ModeSelection::Both,
            count: 10,
            pow: Vec::new(),
            bins: 60,
            shift: 4.0,
            diag_variance: DiagonalVariance::Doubled,
            top: 5,
            a_seq: None,
            k_rule: None,
            track_norm: false,
            workers: None,
            width: 800,
            height: 400,
        }
    }
}

impl RunConfig {
    pub fn sizes_or_default(&self) -> Vec<usize> {
        if self.sizes.is_empty() {
            self.subcommand.map(Subcommand::default_sizes).unwrap_or_default()
        } else {
            self.sizes.clone()
        }
    }

    /// Every invariant violation, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.trials == 0 {
            out.push("trials: must be >= 1".into());
        }
        if self.sizes.contains(&0) {
            out.push("sizes: every size must be >= 1".into());
        }
        if let Some(0) = self.cells {
            out.push("cells: must be >= 1".into());
        }
        if self.k.is_empty() || self.k.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            out.push("k: must be a nonempty list of positive numbers".into());
        }
        if self.count == 0 {
            out.push("count: must be >= 1".into());
        }
        if self.pow.contains(&0) {
            out.push("pow: powers must be >= 1".into());
        }
        if self.bins == 0 {
            out.push("bins: must be >= 1".into());
        }
        if self.top == 0 {
            out.push("top: must be >= 1".into());
        }
        if !self.shift.is_finite() {
            out.push("shift: must be finite".into());
        }
        if self.width < 100 || self.height < 100 {
            out.push("width/height: must be at least 100".into());
        }
        if let Some(0) = self.workers {
            out.push("workers: must be >= 1".into());
        }
        out.extend(self.ensemble.violations().into_iter().map(|v| format!("ensemble: {v}")));
        out
    }

    /// Stable hex digest of every setting that affects the outputs.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// All validation failures found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.problems.join("; "))
    }
}

impl std::error::Error for ConfigError {}

const TOP_KEYS: &[&str] = &[
    "subcommand",
    "ensemble",
    "sizes",
    "trials",
    "seed",
    "test_function",
    "test_function_path",
    "output_dir",
    "format",
    "full",
    "cells",
    "k",
    "threshold",
    "mode",
    "count",
    "pow",
    "bins",
    "shift",
    "diag_variance",
    "top",
    "a_seq",
    "k_rule",
    "track_norm",
    "workers",
    "width",
    "height",
];

const ENSEMBLE_KEYS: &[&str] = &["family", "mean", "stddev", "delta_exponent", "scale", "mean_drift"];

struct Reader<'a> {
    obj: &'a Map<String, Value>,
    prefix: &'static str,
    problems: &'a mut Vec<String>,
}

impl Reader<'_> {
    fn fail(&mut self, key: &str, msg: &str) {
        self.problems.push(format!("{}{key}: {msg}", self.prefix));
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.obj.get(key).filter(|v| !v.is_null())
    }

    fn u64(&mut self, key: &str) -> Option<u64> {
        let v = self.get(key)?;
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                self.fail(key, &format!("expected a non-negative integer, got {v}"));
                None
            }
        }
    }

    fn usize(&mut self, key: &str) -> Option<usize> {
        self.u64(key).and_then(|x| usize::try_from(x).ok())
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        let v = self.get(key)?;
        match v.as_f64() {
            Some(x) => Some(x),
            None => {
                self.fail(key, &format!("expected a number, got {v}"));
                None
            }
        }
    }

    fn bool(&mut self, key: &str) -> Option<bool> {
        let v = self.get(key)?;
        match v.as_bool() {
            Some(x) => Some(x),
            None => {
                self.fail(key, &format!("expected true or false, got {v}"));
                None
            }
        }
    }

    fn str(&mut self, key: &str) -> Option<String> {
        let v = self.get(key)?;
        match v.as_str() {
            Some(x) => Some(x.to_string()),
            None => {
                self.fail(key, &format!("expected a string, got {v}"));
                None
            }
        }
    }

    fn list<T>(&mut self, key: &str, each: impl Fn(&Value) -> Option<T>, what: &str) -> Option<Vec<T>> {
        let v = self.get(key)?;
        let Some(arr) = v.as_array() else {
            self.fail(key, &format!("expected a list of {what}"));
            return None;
        };
        let parsed: Option<Vec<T>> = arr.iter().map(each).collect();
        if parsed.is_none() {
            self.fail(key, &format!("expected a list of {what}"));
        }
        parsed
    }

    fn unknown_keys(&mut self, allowed: &[&str]) {
        let unknown: Vec<String> = self.obj.keys().filter(|k| !allowed.contains(&k.as_str())).cloned().collect();
        for k in unknown {
            self.fail(&k, "unknown key");
        }
    }
}

pub fn parse_scale(s: &str) -> Option<Scale> {
    match s {
        "OneOverN" | "1/N" => Some(Scale::OneOverN),
        "PiOverN" | "pi/N" => Some(Scale::PiOverN),
        other => other.parse::<f64>().ok().map(Scale::Custom),
    }
}

pub fn parse_size_rule(s: &str) -> Option<SizeRule> {
    match s {
        "identity" => Some(SizeRule::Identity),
        "powers2" => Some(SizeRule::Powers2),
        _ => None,
    }
}

/// `power:α`, `exp2:β` or `constant:k`.
pub fn parse_k_rule(s: &str) -> Option<KRule> {
    let (kind, value) = s.split_once(':')?;
    let x: f64 = value.trim().parse().ok()?;
    match kind.trim() {
        "power" => Some(KRule::Power { alpha: x }),
        "exp2" => Some(KRule::Exp2 { beta: x }),
        "constant" => Some(KRule::Constant(x)),
        _ => None,
    }
}

pub fn parse_threshold(s: &str) -> Option<ThresholdMode> {
    match s {
        "simplified" => Some(ThresholdMode::Simplified),
        "exact" => Some(ThresholdMode::Exact),
        _ => None,
    }
}

pub fn parse_mode(s: &str) -> Option<ModeSelection> {
    match s {
        "sot" => Some(ModeSelection::Sot),
        "wot" => Some(ModeSelection::Wot),
        "both" => Some(ModeSelection::Both),
        _ => None,
    }
}

pub fn parse_format(s: &str) -> Option<OutputFormat> {
    match s {
        "csv" => Some(OutputFormat::Csv),
        "json" => Some(OutputFormat::Json),
        "svg" => Some(OutputFormat::Svg),
        _ => None,
    }
}

pub fn parse_diag_variance(s: &str) -> Option<DiagonalVariance> {
    match s {
        "doubled" => Some(DiagonalVariance::Doubled),
        "equal" => Some(DiagonalVariance::Equal),
        _ => None,
    }
}

/// Builds an ensemble from optional parts, filling the family defaults.
/// Pushes one message per problem.
pub fn build_ensemble(
    family: Family,
    mean: Option<f64>,
    stddev: Option<f64>,
    delta_exponent: Option<f64>,
    scale: Option<Scale>,
    mean_drift: Option<f64>,
    problems: &mut Vec<String>,
) -> EnsembleSpec {
    let mut spec = match family {
        Family::Gaussian => EnsembleSpec::gaussian(mean.unwrap_or(1.0), stddev.unwrap_or(1.0)),
        Family::Constant => {
            if stddev.is_some_and(|s| s != 0.0) {
                problems.push("ensemble.stddev: Constant has stddev 0".into());
            }
            EnsembleSpec::constant(mean.unwrap_or(1.0))
        }
        Family::BernoulliZeroOne => {
            let spec = EnsembleSpec::bernoulli(mean.unwrap_or(0.5));
            if let Some(s) = stddev {
                if (s - spec.stddev).abs() > 1e-9 {
                    problems.push("ensemble.stddev: BernoulliZeroOne needs stddev^2 = mean(1 - mean)".into());
                }
            }
            spec
        }
        Family::SparseBernoulli => {
            if mean.is_some_and(|m| m != 1.0) {
                problems.push("ensemble.mean: SparseBernoulli has mean 1".into());
            }
            if stddev.is_some() {
                problems.push("ensemble.stddev: SparseBernoulli derives stddev from delta_exponent".into());
            }
            match delta_exponent {
                Some(d) => EnsembleSpec::sparse_bernoulli(d),
                None => {
                    problems.push("ensemble.delta_exponent: required for SparseBernoulli".into());
                    EnsembleSpec::sparse_bernoulli(0.0)
                }
            }
        }
    };
    if family != Family::SparseBernoulli && delta_exponent.is_some() {
        problems.push("ensemble.delta_exponent: only meaningful for SparseBernoulli".into());
    }
    if let Some(s) = scale {
        spec.scale = s;
    }
    if let Some(c) = mean_drift {
        spec.mean_drift = c;
    }
    spec
}

fn parse_ensemble(v: &Value, problems: &mut Vec<String>) -> Option<EnsembleSpec> {
    let Some(obj) = v.as_object() else {
        problems.push("ensemble: expected an object".into());
        return None;
    };
    let mut r = Reader { obj, prefix: "ensemble.", problems };
    r.unknown_keys(ENSEMBLE_KEYS);
    let family = match r.str("family") {
        Some(s) => match Family::parse(&s) {
            Some(f) => Some(f),
            None => {
                r.fail("family", &format!("unknown family {s:?}"));
                None
            }
        },
        None => {
            r.fail("family", "required");
            None
        }
    };
    let mean = r.f64("mean");
    let stddev = r.f64("stddev");
    let delta = r.f64("delta_exponent");
    let mean_drift = r.f64("mean_drift");
    let scale = match r.get("scale") {
        None => None,
        Some(Value::Number(n)) => n.as_f64().map(Scale::Custom),
        Some(Value::String(s)) => {
            let s = s.clone();
            let parsed = parse_scale(&s);
            if parsed.is_none() {
                r.fail("scale", &format!("expected OneOverN, PiOverN or a number, got {s:?}"));
            }
            parsed
        }
        Some(other) => {
            let msg = format!("expected OneOverN, PiOverN or a number, got {other}");
            r.fail("scale", &msg);
            None
        }
    };
    let family = family?;
    Some(build_ensemble(family, mean, stddev, delta, scale, mean_drift, problems))
}

/// Parses a JSON configuration object. Unknown keys are errors, and every
/// problem found is reported together.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| ConfigError { problems: vec![format!("not valid JSON: {e}")] })?;
    let Some(obj) = value.as_object() else {
        return Err(ConfigError { problems: vec!["expected a JSON object at the top level".into()] });
    };
    let mut problems = Vec::new();
    let mut cfg = RunConfig::default();
    let mut ensemble_value = None;
    {
        let mut r = Reader { obj, prefix: "", problems: &mut problems };
        r.unknown_keys(TOP_KEYS);

        if let Some(s) = r.str("subcommand") {
            match Subcommand::parse(&s) {
                Some(c) => cfg.subcommand = Some(c),
                None => r.fail("subcommand", &format!("unknown subcommand {s:?}")),
            }
        }
        ensemble_value = r.get("ensemble").cloned().or(ensemble_value);
        if let Some(sizes) = r.list("sizes", |v| v.as_u64().map(|x| x as usize), "positive integers") {
            if sizes.is_empty() {
                r.fail("sizes", "must not be empty");
            }
            cfg.sizes = sizes;
        }
        if let Some(v) = r.get("trials") {
            match v.as_i64() {
                Some(t) if t >= 1 => cfg.trials = t as usize,
                _ => r.fail("trials", &format!("must be a positive integer, got {v}")),
            }
        }
        if let Some(s) = r.u64("seed") {
            cfg.seed = s;
        }
        if let Some(s) = r.str("test_function") {
            match s.as_str() {
                "one" => cfg.test_function = TestFunction::One,
                "linear" => cfg.test_function = TestFunction::Linear,
                "sine" => cfg.test_function = TestFunction::Sine,
                "custom-csv" => match r.str("test_function_path") {
                    Some(p) => cfg.test_function = TestFunction::CustomCsv(PathBuf::from(p)),
                    None => r.fail("test_function_path", "required when test_function is custom-csv"),
                },
                other => r.fail("test_function", &format!("unknown test function {other:?}")),
            }
        }
        if let Some(p) = r.str("output_dir") {
            cfg.output_dir = PathBuf::from(p);
        }
        if let Some(s) = r.str("format") {
            match parse_format(&s) {
                Some(f) => cfg.format = f,
                None => r.fail("format", &format!("expected csv, json or svg, got {s:?}")),
            }
        }
        if let Some(b) = r.bool("full") {
            cfg.full = b;
        }
        if let Some(c) = r.usize("cells") {
            cfg.cells = Some(c);
        }
        if let Some(k) = r.list("k", Value::as_f64, "numbers") {
            cfg.k = k;
        }
        if let Some(s) = r.str("threshold") {
            match parse_threshold(&s) {
                Some(t) => cfg.threshold = t,
                None => r.fail("threshold", &format!("expected simplified or exact, got {s:?}")),
            }
        }
        if let Some(s) = r.str("mode") {
            match parse_mode(&s) {
                Some(m) => cfg.mode = m,
                None => r.fail("mode", &format!("expected sot, wot or both, got {s:?}")),
            }
        }
        if let Some(c) = r.usize("count") {
            cfg.count = c;
        }
        if let Some(p) = r.list("pow", |v| v.as_u64().and_then(|x| u32::try_from(x).ok()), "positive integers") {
            cfg.pow = p;
        }
        if let Some(b) = r.usize("bins") {
            cfg.bins = b;
        }
        if let Some(s) = r.f64("shift") {
            cfg.shift = s;
        }
        if let Some(s) = r.str("diag_variance") {
            match parse_diag_variance(&s) {
                Some(d) => cfg.diag_variance = d,
                None => r.fail("diag_variance", &format!("expected doubled or equal, got {s:?}")),
            }
        }
        if let Some(t) = r.usize("top") {
            cfg.top = t;
        }
        match r.get("a_seq").cloned() {
            None => {}
            Some(Value::String(s)) => match parse_size_rule(&s) {
                Some(rule) => cfg.a_seq = Some(rule),
                None => r.fail("a_seq", &format!("expected identity, powers2 or a list, got {s:?}")),
            },
            Some(_) => {
                if let Some(l) = r.list("a_seq", |v| v.as_u64().map(|x| x as usize), "positive integers") {
                    cfg.a_seq = Some(SizeRule::Custom(l));
                }
            }
        }
        match r.get("k_rule").cloned() {
            None => {}
            Some(Value::String(s)) => match parse_k_rule(&s) {
                Some(rule) => cfg.k_rule = Some(rule),
                None => r.fail("k_rule", &format!("expected power:α, exp2:β or constant:k, got {s:?}")),
            },
            Some(_) => {
                if let Some(l) = r.list("k_rule", Value::as_f64, "numbers") {
                    cfg.k_rule = Some(KRule::Custom(l));
                }
            }
        }
        if let Some(b) = r.bool("track_norm") {
            cfg.track_norm = b;
        }
        if let Some(w) = r.usize("workers") {
            cfg.workers = Some(w);
        }
        if let Some(w) = r.u64("width") {
            cfg.width = w.min(u32::MAX as u64) as u32;
        }
        if let Some(h) = r.u64("height") {
            cfg.height = h.min(u32::MAX as u64) as u32;
        }
    }
    if let Some(v) = ensemble_value {
        if let Some(spec) = parse_ensemble(&v, &mut problems) {
            cfg.ensemble = spec;
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
        Err(ConfigError { problems })
    }
}

/// Parses a size list such as `64,128,256` or `2,4,...,1024`. An ellipsis
/// continues geometrically when the first two terms have an integer ratio
/// that reaches the last term, and arithmetically otherwise.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
    let num = |p: &str| p.parse::<usize>().map_err(|_| format!("sizes: {p:?} is not a positive integer"));
    let Some(dots) = parts.iter().position(|p| *p == "..." || *p == "…") else {
        return parts.into_iter().map(num).collect();
    };
    if dots < 2 || dots + 2 != parts.len() {
        return Err("sizes: an ellipsis needs two terms before it and one after".into());
    }
    let head: Vec<usize> = parts[..dots].iter().map(|p| num(p)).collect::<Result<_, _>>()?;
    let last = num(parts[dots + 1])?;
    let (a, b) = (head[dots - 2], head[dots - 1]);
    let mut out = head.clone();
    if a > 0 && b > a && b % a == 0 {
        let r = b / a;
        let mut x = b;
        let mut geo = Vec::new();
        while x < last {
            x = x.checked_mul(r).ok_or("sizes: progression overflows")?;
            geo.push(x);
        }
        if x == last {
            out.extend(geo);
            return Ok(out);
        }
    }
    if b <= a || last < b || (last - b) % (b - a) != 0 {
        return Err(format!("sizes: cannot continue {a},{b} to {last}"));
    }
    out.extend((b + (b - a)..=last).step_by(b - a));
    Ok(out)
}
