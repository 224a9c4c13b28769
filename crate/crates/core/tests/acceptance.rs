//! The acceptance criteria, each at its stated tolerance and time budget.
//! Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use randtri::convergence::{
    any_schedule_feasible, binomial_ceiling, concentration_check, run_campaign, schedule_feasible, Campaign, KRule,
    KSchedule, Mode, Probe, SigmaRule, SizeRule, ThresholdMode, Verdict,
};
use randtri::ensembles::{make_t, sample_goe_shifted, sample_x, EnsembleSpec, Scale, SeedPolicy};
use randtri::funcspace::{conjugate_action, l2_dist, volterra, GridFunction};
use randtri::moments::{
    empirical_tr_scaled, empirical_tr_xstarx, ones_block_decomposition_check, scaled_first_moment, trace_power_t,
};
use randtri::spectra::{eigen_values, singular_values, volterra_reference};

const SEED: u64 = 20240611;

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1_ones_blocks() -> Outcome {
    for n in 1..=64 {
        ensure(ones_block_decomposition_check(n).map_err(|e| e.to_string())?, format!("N={n}"))?;
    }
    Ok("N = 1..64 entrywise".into())
}

fn c2_sandwich() -> Outcome {
    for n in 1..=32 {
        for pow in 1..=3 {
            let r = trace_power_t(n, pow).map_err(|e| e.to_string())?;
            ensure(r.holds(), format!("N={n} n={pow}: {} <= {} <= {}", r.lower, r.exact, r.upper))?;
        }
    }
    let spot = trace_power_t(2, 2).map_err(|e| e.to_string())?.exact.to_string();
    ensure(spot == "7", format!("Tr at N=2, n=2 is {spot}"))?;
    Ok("96 cases, Tr(N=2, n=2) = 7".into())
}

fn c3_riemann() -> Outcome {
    let f = GridFunction::constant(1024, 1.0).map_err(|e| e.to_string())?;
    let target = volterra(&f).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for k in 0..=10 {
        let n = 1usize << k;
        let t = make_t(n).map_err(|e| e.to_string())?;
        let err = l2_dist(&conjugate_action(&t, &f).map_err(|e| e.to_string())?, &target).map_err(|e| e.to_string())?;
        let want = 1.0 / (3f64.sqrt() * n as f64);
        let rel = (err - want).abs() / want;
        worst = worst.max(rel);
        ensure(rel <= 1e-10, format!("N={n}: {err} vs {want}"))?;
    }
    Ok(format!("max relative deviation {worst:.1e}"))
}

fn c4_ladder() -> Outcome {
    let s = singular_values(&make_t(1024).map_err(|e| e.to_string())?).values;
    let reference = volterra_reference(5).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (k, (got, want)) in s.iter().zip(&reference).enumerate() {
        let rel = (got - want).abs() / want;
        worst = worst.max(rel);
        ensure(rel <= 0.02, format!("s_{k} = {got} vs {want}"))?;
    }
    let gap = (s[0] - 2.0 / PI).abs();
    ensure(gap <= 5e-3, format!("|s_1 - 2/π| = {gap}"))?;
    Ok(format!("max relative gap {worst:.2e}, |s_1 - 2/π| = {gap:.2e}"))
}

fn bernoulli_campaign(n: usize, probe: Probe) -> Result<(f64, f64), String> {
    let spec = EnsembleSpec::bernoulli(0.5);
    let c = Campaign {
        spec,
        schedule: KSchedule::new(SizeRule::Custom(vec![n]), KRule::Constant(2.0)).map_err(|e| e.to_string())?,
        indices: 1..=1,
        probe,
        trials: 400,
        master_seed: SEED,
        threshold: ThresholdMode::Simplified,
        track_norm: false,
    };
    let row = run_campaign(&c).map_err(|e| e.to_string())?.remove(0);
    Ok((row.mean_sq_err, row.bound))
}

fn unit_linear(cells: usize) -> Result<GridFunction, String> {
    // √3·x has unit norm on [0, 1].
    Ok(GridFunction::identity(cells).map_err(|e| e.to_string())?.scale(3f64.sqrt()))
}

fn c5_sot_variance() -> Outcome {
    let n = 1024;
    let u = GridFunction::constant(n, 1.0).map_err(|e| e.to_string())?;
    let (mean, bound) = bernoulli_campaign(n, Probe::Sot(u))?;
    let sigma2 = 0.25;
    ensure((bound - sigma2 / n as f64).abs() < 1e-18, format!("bound {bound} != σ²/N"))?;
    let limit = bound * (1.0 + 5.0 / 20.0);
    ensure(mean <= limit, format!("mean {mean:e} > {limit:e}"))?;
    Ok(format!("mean {mean:.3e} <= {limit:.3e}"))
}

fn c6_wot_variance() -> Outcome {
    let n = 512;
    let u = GridFunction::constant(n, 1.0).map_err(|e| e.to_string())?;
    let v = unit_linear(n)?;
    let (mean, bound) = bernoulli_campaign(n, Probe::Wot(u, v))?;
    let sigma2 = 0.25;
    let nn = (n * n) as f64;
    ensure((bound - sigma2 / nn).abs() < 1e-12 * bound, format!("bound {bound} != σ²/N²"))?;
    let limit = bound * (1.0 + 5.0 / 20.0);
    ensure(mean <= limit, format!("mean {mean:e} > {limit:e}"))?;
    Ok(format!("mean {mean:.3e} <= {limit:.3e}"))
}

fn c7_concentration() -> Outcome {
    let spec = EnsembleSpec::bernoulli(0.5);
    let n = 256;
    let trials = 1000;
    let u = GridFunction::constant(n, 1.0).map_err(|e| e.to_string())?;
    let v = unit_linear(n)?;
    let mut rates = Vec::new();
    for probe in [Probe::Sot(u.clone()), Probe::Wot(u.clone(), v.clone())] {
        for k in [2.0, 5.0, 10.0] {
            let stats = concentration_check(&spec, n, &probe, k, trials, SEED, ThresholdMode::Simplified)
                .map_err(|e| e.to_string())?;
            let p = 1.0 / (k * k);
            let ceiling = binomial_ceiling(p, 3.0, trials);
            ensure(
                stats.exceed_rate() <= ceiling,
                format!("{:?} k={k}: rate {} > {ceiling}", probe.mode(), stats.exceed_rate()),
            )?;
            rates.push(format!("{:?} k={k}: {}", probe.mode(), stats.exceed_rate()));
        }
    }
    Ok(rates.join(", "))
}

fn c8_schedules() -> Outcome {
    let err = |e: randtri::Error| e.to_string();
    let constant = SigmaRule::Constant(0.5);
    let a = any_schedule_feasible(&constant, &SizeRule::Identity, Mode::Sot).map_err(err)?;
    ensure(a.verdict == Verdict::NotGuaranteed, "σ const, a_N = N should be not-guaranteed")?;
    let b = schedule_feasible(
        &constant,
        &KSchedule::new(SizeRule::Powers2, KRule::Exp2 { beta: 0.25 }).map_err(err)?,
        Mode::Sot,
    )
    .map_err(err)?;
    ensure(b.verdict == Verdict::Guaranteed, "σ const, a_N = 2^N, k = 2^(N/4) should be guaranteed")?;
    let d = 0.5;
    let c = schedule_feasible(
        &SigmaRule::from_spec(&EnsembleSpec::sparse_bernoulli(d)),
        &KSchedule::new(SizeRule::Identity, KRule::Power { alpha: (3.0 - d) / 4.0 }).map_err(err)?,
        Mode::Wot,
    )
    .map_err(err)?;
    ensure(c.verdict == Verdict::Guaranteed, "sparse d = 0.5 should be guaranteed")?;
    let e = any_schedule_feasible(
        &SigmaRule::from_spec(&EnsembleSpec::sparse_bernoulli(1.5)),
        &SizeRule::Identity,
        Mode::Wot,
    )
    .map_err(err)?;
    ensure(e.verdict == Verdict::NotGuaranteed, "sparse d = 1.5 should be not-guaranteed")?;
    Ok("not-guaranteed, guaranteed, guaranteed, not-guaranteed".into())
}

fn c9_first_moment() -> Outcome {
    let target = scaled_first_moment(&EnsembleSpec::bernoulli(0.5), 10);
    ensure((target - 0.275).abs() < 1e-15, format!("Bernoulli(0.5), N = 10 targets {target}"))?;
    let mut worst: f64 = 0.0;
    for spec in [EnsembleSpec::bernoulli(0.5), EnsembleSpec::gaussian(1.0, 1.0), EnsembleSpec::bernoulli(0.2)] {
        for n in [16, 64, 256] {
            let m = empirical_tr_scaled(&spec, n, 1, 200, SEED).map_err(|e| e.to_string())?;
            let cf = m.closed_form.ok_or("no closed form")?;
            let z = (m.mean - cf).abs() / m.stderr;
            worst = worst.max(z);
            ensure(z <= 4.0, format!("{:?} N={n}: {} vs {cf} ({z:.2} se)", spec.family, m.mean))?;
        }
    }
    Ok(format!("target 0.275 at N = 10; worst deviation {worst:.2} se"))
}

fn c10_unscaled_moments() -> Outcome {
    let spec = EnsembleSpec::bernoulli(0.5);
    let mut summary = Vec::new();
    for pow in [1, 2] {
        let mut means = Vec::new();
        for n in [64, 128, 256] {
            let m = empirical_tr_xstarx(&spec, n, pow, 200, SEED).map_err(|e| e.to_string())?;
            let cap = 1.0 / n as f64;
            let worst = m.values.iter().copied().fold(0.0, f64::max);
            ensure(worst <= cap, format!("pow={pow} N={n}: trial {worst} > 1/N"))?;
            means.push(m.mean);
        }
        ensure(means.windows(2).all(|w| w[1] < w[0]), format!("pow={pow}: means {means:?} not decreasing"))?;
        summary.push(format!("pow {pow}: {:.3e} > {:.3e} > {:.3e}", means[0], means[1], means[2]));
    }
    Ok(summary.join("; "))
}

fn c11_figures() -> Outcome {
    let m = sample_goe_shifted(2000, 4.0, SeedPolicy::new(SEED, 0)).map_err(|e| e.to_string())?;
    let eig = eigen_values(&m).map_err(|e| e.to_string())?;
    let above = eig.count_above(2.5);
    let within = eig.fraction_within(-2.1, 2.1);
    ensure(above == 1, format!("{above} eigenvalues above 2.5"))?;
    ensure(within >= 0.95, format!("{within} of eigenvalues in [-2.1, 2.1]"))?;

    let spec = EnsembleSpec::bernoulli(0.5).with_scale(Scale::PiOverN);
    let x = sample_x(&spec, 2000, SeedPolicy::new(SEED, 0)).map_err(|e| e.to_string())?;
    let s = singular_values(&x).values;
    let mut worst: f64 = 0.0;
    for (k, got) in s.iter().take(3).enumerate() {
        let want = 1.0 / (2 * k + 1) as f64;
        let rel = (got - want).abs() / want;
        worst = worst.max(rel);
        ensure(rel <= 0.10, format!("s_{k} = {got} vs {want}"))?;
    }
    Ok(format!(
        "top eigenvalue {:.3}, {:.2}% within [-2.1, 2.1]; singular ladder max gap {:.2}%",
        eig.values[0],
        100.0 * within,
        100.0 * worst
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("ones-block identity", 1, c1_ones_blocks),
        ("trace sandwich", 1, c2_sandwich),
        ("Riemann-sum law", 5, c3_riemann),
        ("Volterra ladder", 30, c4_ladder),
        ("SOT variance bound", 120, c5_sot_variance),
        ("WOT variance bound", 120, c6_wot_variance),
        ("concentration", 300, c7_concentration),
        ("schedule verdicts", 1, c8_schedules),
        ("moment closed form", 60, c9_first_moment),
        ("vanishing unscaled moments", 60, c10_unscaled_moments),
        ("figure reproductions", 120, c11_figures),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*budget);
        let (status, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!("criterion {:>2} {status} {name} ({:.2} s): {detail}", i + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
