//! Subcommands. Each one reads a validated [`RunConfig`], writes its
//! artifacts under `output_dir` and finishes by writing its manifest.

use std::path::Path;

use asip_core::coupling::{
    build_coupling, discrepancy_stats, BlockSchedule, CouplingConfig, DiscrepancySeries, MarkovSource, MIN_RUNS,
};
use asip_core::diagnostics::{self, SeriesForm, VarianceReport};
use asip_core::dynamics::{self, ChainStart, MapModel};
use asip_core::observables::{self, Observable, TailFunction, Verdict};
use asip_core::quantmix::{self, MixingProfile, MomentValue, QuantileFn};
use asip_core::rng::{tag, StreamKey};
use asip_core::stats;
use serde_json::{json, Value};

use crate::config::{CheckKind, MixingSpec, PathKind, QuantileSpec, RunConfig};
use crate::error::LabError;
use crate::io::{density_to_bytes, num, Table};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Density,
    Simulate,
    Moments,
    Couple,
    Rates,
    Checks,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Density => "density",
            Self::Simulate => "simulate",
            Self::Moments => "moments",
            Self::Couple => "couple",
            Self::Rates => "rates",
            Self::Checks => "checks",
            Self::Report => "report",
        }
    }
}

/// What a finished command leaves behind.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: RunManifest,
    /// Human-readable summary lines for stdout.
    pub lines: Vec<String>,
}

/// Derivation tag for per-run coupling seeds (`RUN` in ASCII).
const RUN_SEED: u64 = 0x5255_4e00_0000_0009;

// stream indices of the diagnostics purposes
const P_BATCH: u64 = 1;
const P_SERIES: u64 = 2;
const P_SHUFFLED: u64 = 3;
const P_QUANTILE: u64 = 4;
const P_ALPHA: u64 = 5;
const P_W2: u64 = 6;
const P_MAXIMAL: u64 = 7;
const P_COVARIANCE: u64 = 8;
const P_CLT: u64 = 9;

/// Batch size and count for `σ²` when a coupling config does not fix it.
const SIGMA_BATCH_N: usize = 1 << 14;
const SIGMA_BATCH_REPS: usize = 1000;

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome, LabError> {
    let mut out = Outcome { manifest: RunManifest::new(command.name(), cfg)?, lines: Vec::new() };
    match command {
        Command::Density => density(cfg, &mut out)?,
        Command::Simulate => simulate(cfg, &mut out)?,
        Command::Moments => moments(cfg, &mut out)?,
        Command::Couple => {
            couple(cfg, &mut out)?;
        }
        Command::Rates => rates(cfg, &mut out)?,
        Command::Checks => checks(cfg, &mut out)?,
        Command::Report => report(cfg, &mut out)?,
    }
    out.manifest.write(&cfg.output_dir)?;
    Ok(out)
}

fn key(cfg: &RunConfig, tag: u64, purpose: u64) -> StreamKey {
    StreamKey::new(cfg.seed(), tag).with(purpose, 0, 0)
}

/// Seed of coupling run `r`, derived from the master seed.
pub fn run_seed(master: u64, r: u64) -> u64 {
    StreamKey::new(master, RUN_SEED).with(r, 0, 0).derive_seed()
}

fn model(cfg: &RunConfig, command: &str, m: &mut RunManifest) -> Result<MapModel, LabError> {
    let gamma = cfg.require_gamma(command)?;
    let d = &cfg.density;
    let model = MapModel::with_built_density(gamma, d.bins, d.tol, d.max_iters)?;
    let grid = model.density()?;
    m.value("density_residual", grid.residual());
    m.value("density_iterations", grid.iterations() as u64);
    Ok(model)
}

fn moment_json(v: MomentValue) -> Value {
    match v {
        MomentValue::Finite(x) => json!(x),
        MomentValue::Infinite => json!("infinite"),
        MomentValue::NotConverged(x) => json!({ "not_converged": x }),
    }
}

fn moment_text(v: MomentValue) -> String {
    match v {
        MomentValue::Finite(x) => format!("{x:.6}"),
        MomentValue::Infinite => "inf".into(),
        MomentValue::NotConverged(x) => format!("{x:.6} (not converged)"),
    }
}

fn moment_status(v: MomentValue) -> &'static str {
    match v {
        MomentValue::Finite(_) => "finite",
        MomentValue::Infinite => "infinite",
        MomentValue::NotConverged(_) => "not_converged",
    }
}

fn verdict_text(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails",
        Verdict::Marginal => "marginal",
    }
}

fn build_profile(cfg: &RunConfig, spec: MixingSpec, model: Option<&MapModel>) -> Result<MixingProfile, LabError> {
    Ok(match spec {
        MixingSpec::Geometric { a } => MixingProfile::geometric(a)?,
        MixingSpec::Analytic { c, rho } => MixingProfile::analytic(c, rho)?,
        MixingSpec::Intermittent { c } => MixingProfile::intermittent(cfg.require_gamma("intermittent mixing")?, c)?,
        MixingSpec::Estimated { max_lag, reps, bins } => {
            let model = model.ok_or_else(|| LabError::Format("estimated mixing needs the map".into()))?;
            let grid_x: Vec<f64> = (1..32).map(|i| i as f64 / 32.0).collect();
            let est =
                quantmix::estimate_alpha_profile(model, max_lag, reps, &grid_x, bins, key(cfg, tag::DIAGNOSTIC, P_ALPHA))?;
            diagnostics::resolved_profile(&est)?
        }
    })
}

fn density(cfg: &RunConfig, out: &mut Outcome) -> Result<(), LabError> {
    let m = &mut out.manifest;
    let model = model(cfg, "density", m)?;
    let grid = model.density()?;
    let ulam = dynamics::ulam_residual(model.gamma(), grid)?;
    let mass = grid.values().iter().sum::<f64>() * grid.cell_width();
    m.value("ulam_residual", ulam);
    m.value("normalization_error", (mass - 1.0).abs());
    m.verdict("residual_within_tol", ulam <= cfg.density.tol);
    let dir = &cfg.output_dir;
    m.emit(dir, "density.bin", &density_to_bytes(grid))?;
    let mut t = Table::new("density", &["cell", "x_lo", "x_hi", "value"]);
    let w = grid.cell_width();
    for (k, v) in grid.values().iter().enumerate() {
        t.push(vec![k.to_string(), num(k as f64 * w), num((k + 1) as f64 * w), num(*v)]);
    }
    m.emit(dir, "density.csv", &t.to_bytes()?)?;
    out.lines.push(format!("bins={} residual={ulam:.3e} iterations={}", grid.bins(), grid.iterations()));
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &mut Outcome) -> Result<(), LabError> {
    let m = &mut out.manifest;
    let model = model(cfg, "simulate", m)?;
    let f = cfg.observable.build()?;
    let s = &cfg.simulate;
    let mut t = Table::new("trajectory", &["rep", "i", "state", "value"]);
    let mut capped = 0u64;
    let mut total = 0.0;
    for r in 0..s.reps {
        let k = key(cfg, tag::PATH, 0).replicate(r as u64);
        let tr = match s.path {
            PathKind::Chain => dynamics::simulate_chain(&model, s.n, ChainStart::Stationary, k)?,
            PathKind::Orbit => {
                let x0 = dynamics::sample_invariant(&model, &mut k.stream())?;
                dynamics::simulate_orbit(model.gamma(), s.n, x0)?
            }
        };
        for (i, y) in tr.values.iter().enumerate() {
            let v = f.eval_capped(*y);
            capped += v.capped as u64;
            total += v.value;
            t.push(vec![r.to_string(), (i + 1).to_string(), num(*y), num(v.value)]);
        }
    }
    let mean = total / (s.n * s.reps) as f64;
    let target = f.invariant_mean(&model)?;
    m.count("capped_events", capped);
    m.value("sample_mean", mean);
    m.value("invariant_mean", target);
    m.emit(&cfg.output_dir, "trajectory.csv", &t.to_bytes()?)?;
    out.lines.push(format!("paths={} length={} sample_mean={mean:.6} invariant_mean={target:.6}", s.reps, s.n));
    Ok(())
}

fn moments(cfg: &RunConfig, out: &mut Outcome) -> Result<(), LabError> {
    let mut map = None;
    if cfg.gamma.is_some() {
        map = Some(model(cfg, "moments", &mut out.manifest)?);
    }
    let m = &mut out.manifest;
    let (q, tail) = match cfg.moments.quantile {
        QuantileSpec::Constant { value } => (QuantileFn::constant(value)?, Some(TailFunction::indicator(value)?)),
        QuantileSpec::Power { c, b } => (QuantileFn::power(c, b)?, Some(TailFunction::power(c, b)?)),
        QuantileSpec::Observable { samples } => {
            let model = map.as_ref().ok_or_else(|| LabError::Format("observable quantile needs gamma".into()))?;
            let h = observables::tail_of_observable(&cfg.observable.build()?, model, samples, key(cfg, tag::TAIL, 0))?;
            if let Some(b) = observables::fitted_tail_index(&h) {
                m.value("fitted_tail_index", b);
            }
            (h.quantile(), Some(h))
        }
    };
    let profile = build_profile(cfg, cfg.moments.mixing, map.as_ref())?;
    let p = cfg.p;
    let mp = quantmix::moment_m(&profile, &q, p)?;
    let lp = quantmix::lambda_sup(&profile, &q, p)?;
    let series = quantmix::strong_mixing_series(&profile, &q, p)?;
    m.value("M_p", moment_json(mp));
    m.value("Lambda_p", moment_json(lp));
    m.value("mixing_series", moment_json(series));
    out.lines.push(format!("M={}", moment_text(mp)));
    out.lines.push(format!("Lambda={}", moment_text(lp)));
    out.lines.push(format!("series={}", moment_text(series)));

    let mut t = Table::new("moments", &["quantity", "lambda", "value", "status", "scaled"]);
    for (name, v) in [("M_p", mp), ("Lambda_p", lp), ("mixing_series", series)] {
        t.push(vec![name.into(), String::new(), num(v.value()), moment_status(v).into(), String::new()]);
    }
    let mut scaled = Vec::new();
    for &lambda in &cfg.moments.lambda_grid {
        let v = quantmix::moment_m3_truncated(&profile, &q, lambda)?;
        let s = lambda.powf(p - 3.0) * v.value();
        scaled.push(s);
        t.push(vec!["M3".into(), num(lambda), num(v.value()), moment_status(v).into(), num(s)]);
    }
    if !scaled.is_empty() {
        let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        m.value("m3_scaled_spread", hi / lo);
        out.lines.push(format!("m3_scaled_spread={:.4}", hi / lo));
    }
    if let (Some(g), Some(h)) = (cfg.gamma, tail.as_ref()) {
        let record = |m: &mut RunManifest, lines: &mut Vec<String>, name: &str, r: asip_core::Result<Verdict>| {
            let text = match r {
                Ok(v) => verdict_text(v),
                Err(_) => "not_applicable",
            };
            m.verdict(name, text);
            lines.push(format!("{name}={text}"));
        };
        record(m, &mut out.lines, "moment_condition", observables::check_moment_condition(h, g, p));
        record(m, &mut out.lines, "tail_rate_condition", observables::check_lambda_condition(h, g, p));
    }
    m.emit(&cfg.output_dir, "moments.csv", &t.to_bytes()?)?;
    Ok(())
}

fn sigma2_for_coupling(cfg: &RunConfig, source: &MarkovSource<'_>, m: &mut RunManifest) -> Result<f64, LabError> {
    if let Some(s2) = cfg.coupling.sigma2 {
        return Ok(s2);
    }
    let b = diagnostics::sigma2_batch(source, SIGMA_BATCH_N, SIGMA_BATCH_REPS, key(cfg, tag::DIAGNOSTIC, P_BATCH))?;
    m.value("sigma2_batch_std_error", b.std_error);
    // a variance inside two standard errors of zero is the degenerate case
    Ok(if b.value < 2.0 * b.std_error { 0.0 } else { b.value })
}

/// Run the couplings and write their tables; shared by `couple` and `rates`.
fn couple(cfg: &RunConfig, out: &mut Outcome) -> Result<Vec<DiscrepancySeries>, LabError> {
    let model = model(cfg, "couple", &mut out.manifest)?;
    let m = &mut out.manifest;
    let f = cfg.observable.build()?;
    let source = MarkovSource::new(&model, &f)?;
    let sigma2 = sigma2_for_coupling(cfg, &source, m)?;
    m.value("sigma2", sigma2);
    let c = &cfg.coupling;
    let schedule = BlockSchedule::new(cfg.p, cfg.variant.to_core(), c.l_max)?;
    m.value("block_exponents", json!(schedule.m));

    let mut runs_t = Table::new("couple_runs", &["run", "seed", "capped_events", "clamped_transforms", "decomposition_holds"]);
    let mut disc_t = Table::new("couple_discrepancy", &["run", "n", "sup_disc", "normalized"]);
    let mut level_t = Table::new("couple_levels", &["run", "level", "m", "d", "d1", "d2"]);
    let mut path_t = Table::new("couple_path", &["i", "x", "z"]);
    let mut series = Vec::with_capacity(c.reps);
    for r in 0..c.reps {
        let seed = run_seed(cfg.seed(), r as u64);
        let cc = CouplingConfig { schedule: schedule.clone(), sigma: sigma2.sqrt(), m_cond: c.m_cond, seed };
        let o = build_coupling(&source, &cc)?;
        m.count("capped_events", o.report.capped_events as u64);
        m.count("clamped_transforms", o.report.clamped_transforms as u64);
        m.count("decomposition_failures", !o.report.decomposition_holds as u64);
        runs_t.push(vec![
            r.to_string(),
            seed.to_string(),
            o.report.capped_events.to_string(),
            o.report.clamped_transforms.to_string(),
            o.report.decomposition_holds.to_string(),
        ]);
        for ((n, d), z) in o.series.n_grid.iter().zip(&o.series.sup_disc).zip(&o.series.normalized) {
            disc_t.push(vec![r.to_string(), n.to_string(), num(*d), num(*z)]);
        }
        for l in &o.series.levels {
            level_t.push(vec![r.to_string(), l.level.to_string(), l.m.to_string(), num(l.d), num(l.d1), num(l.d2)]);
        }
        if r == 0 {
            for (i, (x, z)) in o.x.iter().zip(&o.z).enumerate() {
                path_t.push(vec![(i + 1).to_string(), num(*x), num(*z)]);
            }
        }
        series.push(o.series);
    }
    let dir = &cfg.output_dir;
    m.emit(dir, "couple_runs.csv", &runs_t.to_bytes()?)?;
    m.emit(dir, "couple_discrepancy.csv", &disc_t.to_bytes()?)?;
    m.emit(dir, "couple_levels.csv", &level_t.to_bytes()?)?;
    m.emit(dir, "couple_path.csv", &path_t.to_bytes()?)?;
    let last: Vec<f64> = series.iter().map(|s| *s.sup_disc.last().unwrap_or(&0.0)).collect();
    out.lines.push(format!(
        "runs={} n={} sigma2={sigma2:.6} median_sup_disc={:.4}",
        c.reps,
        schedule.n_total(),
        stats::median(&last)
    ));
    Ok(series)
}

fn rates(cfg: &RunConfig, out: &mut Outcome) -> Result<(), LabError> {
    if cfg.coupling.reps < MIN_RUNS {
        return Err(asip_core::Error::InsufficientRuns { needed: MIN_RUNS, got: cfg.coupling.reps }.into());
    }
    let series = couple(cfg, out)?;
    let st = discrepancy_stats(&series, cfg.p, cfg.coupling.fit_from)?;
    let m = &mut out.manifest;
    m.value("slope", st.slope);
    m.value("slope_limit", 1.0 / cfg.p + asip_core::coupling::SLOPE_ALLOWANCE);
    m.value("normalized_ratio", st.normalized_ratio);
    m.verdict("rate_consistent", st.consistent);
    let mut t = Table::new(
        "rates",
        &["n", "median_sup_disc", "median_normalized", "lower_quartile_normalized", "upper_quartile_normalized"],
    );
    for i in 0..st.n_grid.len() {
        t.push(vec![
            st.n_grid[i].to_string(),
            num(st.median_raw[i]),
            num(st.median_normalized[i]),
            num(st.lower_quartile_normalized[i]),
            num(st.upper_quartile_normalized[i]),
        ]);
    }
    m.emit(&cfg.output_dir, "rates.csv", &t.to_bytes()?)?;
    out.lines.push(format!(
        "slope={:.4} (limit {:.4}) normalized_ratio={:.4} consistent={}",
        st.slope,
        1.0 / cfg.p + asip_core::coupling::SLOPE_ALLOWANCE,
        st.normalized_ratio,
        st.consistent
    ));
    Ok(())
}

fn checks(cfg: &RunConfig, out: &mut Outcome) -> Result<(), LabError> {
    let model = model(cfg, "checks", &mut out.manifest)?;
    let m = &mut out.manifest;
    let f = cfg.observable.build()?;
    let source = MarkovSource::new(&model, &f)?;
    let c = &cfg.checks;
    let dir = &cfg.output_dir;
    let enabled = |k: CheckKind| c.run.contains(&k);

    let sigma2 = if enabled(CheckKind::Variance) {
        let series =
            diagnostics::sigma2_series(&source, c.series_k, c.series_reps, c.series_len, SeriesForm::Chain, key(cfg, tag::DIAGNOSTIC, P_SERIES))?;
        let batch = diagnostics::sigma2_batch(&source, c.batch_n, c.batch_reps, key(cfg, tag::DIAGNOSTIC, P_BATCH))?;
        let iid = diagnostics::sigma2_series(
            &source,
            c.series_k,
            c.series_reps,
            c.series_len,
            SeriesForm::Shuffled,
            key(cfg, tag::DIAGNOSTIC, P_SHUFFLED),
        )?;
        let var = f.invariant_variance(&model)?;
        let report = VarianceReport::new(&series, &batch);
        let iid_z = (iid.value - var).abs() / iid.std_error;
        m.count("truncation_warnings", series.truncation_warning as u64 + iid.truncation_warning as u64);
        m.value("sigma2_series", series.value);
        m.value("sigma2_batch", batch.value);
        m.value("series_batch_agreement", report.agreement);
        m.value("iid_surrogate", iid.value);
        m.value("invariant_variance", var);
        m.value("iid_standard_errors", iid_z);
        m.verdict("variance_agreement", report.agreement <= 0.10);
        m.verdict("iid_surrogate", iid_z <= 3.0);
        m.verdict("sigma_zero", report.sigma_zero);
        let clt = if report.sigma_zero {
            None
        } else {
            Some(diagnostics::clt_ks(&source, c.batch_n, c.batch_reps, batch.value, key(cfg, tag::DIAGNOSTIC, P_CLT))?)
        };
        if let Some(ks) = clt {
            m.value("clt_ks", ks);
        }
        let mut t = Table::new("checks_variance", &["estimator", "value", "std_error"]);
        t.push(vec!["series".into(), num(series.value), num(series.std_error)]);
        t.push(vec!["batch".into(), num(batch.value), num(batch.std_error)]);
        t.push(vec!["shuffled".into(), num(iid.value), num(iid.std_error)]);
        t.push(vec!["invariant_variance".into(), num(var), String::new()]);
        m.emit(dir, "checks_variance.csv", &t.to_bytes()?)?;
        out.lines.push(format!(
            "variance: series={:.6} batch={:.6} agreement={:.4} iid={:.6} var={var:.6}",
            series.value, batch.value, report.agreement, iid.value
        ));
        batch.value
    } else {
        sigma2_for_coupling(cfg, &source, m)?
    };

    let needs_rhs = enabled(CheckKind::W2) || enabled(CheckKind::Maximal);
    if needs_rhs && !(sigma2 > 0.0) {
        return Err(asip_core::Error::Degenerate("W2 and maximal checks need sigma2 > 0".into()).into());
    }
    let rhs = if needs_rhs {
        let q = diagnostics::centered_quantile(&source, c.quantile_samples, key(cfg, tag::TAIL, P_QUANTILE))?;
        let profile = build_profile(cfg, c.mixing.unwrap_or(cfg.moments.mixing), Some(&model))?;
        Some((q, profile))
    } else {
        None
    };

    if let (true, Some((q, profile))) = (enabled(CheckKind::W2), &rhs) {
        let tab = diagnostics::w2_bound_check(
            &source,
            sigma2,
            q,
            profile,
            &c.w2_n,
            c.w2_m_cond,
            c.w2_reps,
            key(cfg, tag::DIAGNOSTIC, P_W2),
        )?;
        let mut t = Table::new(
            "checks_w2",
            &["n", "w2_sq", "w2_sq_se", "floor", "rhs", "ratio", "raw_ratio", "resolved"],
        );
        for r in &tab.rows {
            t.push(vec![
                r.n.to_string(),
                num(r.w2_sq),
                num(r.w2_sq_se),
                num(r.floor),
                num(r.rhs),
                num(r.ratio),
                num(r.raw_ratio),
                r.resolved.to_string(),
            ]);
        }
        let raw: Vec<f64> = tab.rows.iter().map(|r| r.raw_ratio).collect();
        let ns: Vec<f64> = tab.rows.iter().map(|r| r.n as f64).collect();
        m.value("w2_max_over_min", tab.max_over_min);
        m.value("w2_kendall_tau", tab.kendall_tau);
        let raw_hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw_lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        m.value("w2_raw_kendall_tau", stats::kendall_tau(&ns, &raw));
        m.value("w2_raw_max_over_min", raw_hi / raw_lo);
        m.verdict("w2_bounded", tab.bounded);
        m.emit(dir, "checks_w2.csv", &t.to_bytes()?)?;
        out.lines.push(format!(
            "w2: max/min={:.3} tau={:.3} bounded={}",
            tab.max_over_min, tab.kendall_tau, tab.bounded
        ));
    }

    if let (true, Some((q, profile))) = (enabled(CheckKind::Maximal), &rhs) {
        let n = c.maximal_n;
        let lambda = if c.maximal_lambda.is_empty() {
            let s = (n as f64 * sigma2).sqrt();
            (1..=20).map(|i| 0.03 * i as f64 * s).collect()
        } else {
            c.maximal_lambda.clone()
        };
        let tab =
            diagnostics::maximal_tail(&source, sigma2, q, profile, n, &lambda, c.maximal_reps, key(cfg, tag::DIAGNOSTIC, P_MAXIMAL))?;
        let mut t = Table::new("checks_maximal", &["lambda", "tail", "gaussian", "polynomial", "band"]);
        for r in &tab.rows {
            t.push(vec![num(r.lambda), num(r.tail), num(r.gaussian), num(r.polynomial), num(r.band)]);
        }
        m.value("maximal_c_fit", tab.c_fit);
        m.verdict("maximal_monotone", tab.monotone);
        m.verdict("maximal_gaussian_dominates", tab.gaussian_dominates);
        m.verdict("maximal_shape_consistent", tab.shape_consistent);
        m.emit(dir, "checks_maximal.csv", &t.to_bytes()?)?;
        out.lines.push(format!(
            "maximal: c={:.4} monotone={} dominated={}",
            tab.c_fit, tab.monotone, tab.gaussian_dominates
        ));
    }

    if enabled(CheckKind::Covariance) {
        let g: Observable = match &c.covariance_observable {
            Some(spec) => spec.build()?,
            None => f.clone(),
        };
        if !g.sup_norm().is_finite() {
            return Err(asip_core::Error::Domain("covariance check needs a bounded observable".into()).into());
        }
        let src = MarkovSource::new(&model, &g)?;
        let q = diagnostics::centered_quantile(&src, c.quantile_samples, key(cfg, tag::TAIL, P_COVARIANCE))?;
        let lags: Vec<usize> = (0..=c.covariance_lags).collect();
        let grid_x: Vec<f64> = (1..32).map(|i| i as f64 / 32.0).collect();
        let tab = diagnostics::covariance_bound_check(
            &src,
            &q,
            &lags,
            c.covariance_reps,
            c.covariance_bins,
            &grid_x,
            key(cfg, tag::DIAGNOSTIC, P_COVARIANCE),
        )?;
        let mut t = Table::new("checks_covariance", &["i", "lhs", "lhs_floor", "alpha_hat", "rhs", "holds"]);
        for r in &tab.rows {
            t.push(vec![r.i.to_string(), num(r.lhs), num(r.lhs_floor), num(r.alpha_hat), num(r.rhs), r.holds.to_string()]);
        }
        m.count("undersmoothed", tab.undersmoothed as u64);
        m.value("covariance_margin_trend", tab.margin_trend);
        m.verdict("covariance_holds", tab.all_hold);
        m.emit(dir, "checks_covariance.csv", &t.to_bytes()?)?;
        out.lines.push(format!("covariance: all_hold={} margin_trend={:.3}", tab.all_hold, tab.margin_trend));
    }
    Ok(())
}

/// JSON scalar without string quotes.
fn plain(v: &Value) -> String {
    v.as_str().map_or_else(|| v.to_string(), str::to_string)
}

fn report(cfg: &RunConfig, out: &mut Outcome) -> Result<(), LabError> {
    let dir: &Path = &cfg.output_dir;
    let own = RunManifest::file_name("report");
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| LabError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.ends_with(".manifest.json") && *n != own)
        .collect();
    names.sort();
    let mut all = serde_json::Map::new();
    let mut t = Table::new("report", &["command", "section", "key", "value"]);
    for name in &names {
        let mf = RunManifest::read(&dir.join(name))?;
        for (k, v) in &mf.counters {
            t.push(vec![mf.command.clone(), "counter".into(), k.clone(), v.to_string()]);
        }
        for (k, v) in &mf.values {
            t.push(vec![mf.command.clone(), "value".into(), k.clone(), plain(v)]);
        }
        for (k, v) in &mf.verdicts {
            t.push(vec![mf.command.clone(), "verdict".into(), k.clone(), plain(v)]);
            out.lines.push(format!("{}: {k}={}", mf.command, plain(v)));
        }
        all.insert(mf.command.clone(), serde_json::to_value(&mf)?);
    }
    let m = &mut out.manifest;
    m.value("manifests", names.len() as u64);
    let mut json = serde_json::to_vec_pretty(&Value::Object(all))?;
    json.push(b'\n');
    m.emit(dir, "report.json", &json)?;
    m.emit(dir, "report.csv", &t.to_bytes()?)?;
    Ok(())
}
