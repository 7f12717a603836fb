use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use gittins_core::harness::bootstrap::{bootstrap_mean_ci, mean};
use gittins_core::harness::experiment::{run_bandit_experiment, ExperimentConfig, ExperimentReport};
use gittins_core::harness::presets::{experiment_preset, table_preset};
use gittins_core::harness::table::{calibration_value, table_sweep, Column, Family, TableReport};
use gittins_core::models::bernoulli::{bernoulli_horizon, bernoulli_truncation_with_horizon, BernoulliArm};
use gittins_core::models::gaussian::{gaussian_bounds, GaussianArm};
use gittins_core::models::random_effects::{re_reward, ParticlePosterior, RandomEffectsArm, ReArmState, RePriors};
use gittins_core::{
    solve, DiscountFactor, ReplicationSchedule, SolverConfig, SolverResult, StepSizeRule, StopReason, StreamKey,
    TruncationConfig,
};

use crate::config::{load, write_manifest, write_output, RunManifest, TableConfig};
use crate::parse::{count_list, num, number_list, pair, seed, step};
use crate::{CalibrateArgs, CliError, ExperimentArgs, IndexArgs, ModelKind, TableArgs, EXIT_MAX_ITERS};

const DEFAULT_SEED: u64 = 1;

/// Writes to `out` and its manifest, or to stdout without a manifest.
fn emit(
    out: Option<&Path>,
    bytes: &[u8],
    subcommand: &str,
    config: &impl Serialize,
    seed: u64,
    started: Instant,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let file = write_output(path, bytes)?;
            let manifest = RunManifest {
                subcommand: subcommand.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config: serde_json::to_value(config).expect("config serialises"),
                seed,
                outputs: vec![file],
                wall_clock_seconds: started.elapsed().as_secs_f64(),
            };
            write_manifest(path, &manifest)
        }
        None => std::io::stdout().write_all(bytes).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct IndexRecord {
    model: String,
    state: [f64; 2],
    gamma: f64,
    horizon: usize,
    lower: f64,
    upper: f64,
    depth: usize,
    n: usize,
    nu: f64,
    ci_radius: f64,
    iterations: usize,
    stopped_by: StopReason,
    per_k_mean: Vec<f64>,
    nu_range: (f64, f64),
    seed: u64,
}

#[derive(Serialize)]
struct IndexConfig<'a> {
    model: &'a str,
    state: [f64; 2],
    solver: &'a SolverConfig,
    d3: usize,
}

pub fn index(a: IndexArgs) -> Result<u8, CliError> {
    let started = Instant::now();
    let seed = seed(a.seed)?.unwrap_or(DEFAULT_SEED);
    let g = DiscountFactor::new(a.gamma)?;
    let (x, y) = pair(&a.state)?;
    let schedule = ReplicationSchedule::uniform(a.depth, a.n)?;
    let configure = |trunc: TruncationConfig, nu0: f64| -> Result<SolverConfig, CliError> {
        let mut cfg = SolverConfig::new(trunc, schedule.clone(), nu0, a.eps_nu)?;
        cfg.step = StepSizeRule::with_max_cap(step(&a.step)?, &trunc)?;
        cfg.beta = a.beta;
        cfg.max_iters = a.max_iters;
        cfg.min_iters = cfg.min_iters.min(a.max_iters);
        cfg.validate()?;
        Ok(cfg)
    };
    let (name, cfg, res): (&str, SolverConfig, SolverResult) = match a.model {
        ModelKind::Bernoulli => {
            let s = BernoulliArm::state(x, y)?;
            let n = match a.horizon {
                Some(n) => n,
                None => bernoulli_horizon(a.eps_trunc, g)?,
            };
            let cfg = configure(bernoulli_truncation_with_horizon(&s, n, g)?, s.mean())?;
            let res = solve(&BernoulliArm, &s, &cfg, seed)?;
            ("bernoulli", cfg, res)
        }
        ModelKind::Gaussian => {
            let s = GaussianArm::state(x, y)?;
            let (l, n0) = gaussian_bounds(a.eps_trunc, g, s.kappa)?;
            let trunc = TruncationConfig::new(a.horizon.unwrap_or(n0), s.mean() - l, s.mean() + l, g)?;
            let cfg = configure(trunc, s.mean())?;
            let res = solve(&GaussianArm, &s, &cfg, seed)?;
            ("gaussian", cfg, res)
        }
        ModelKind::RandomEffects => {
            if x < 1.0 || y < 1.0 || x.fract() != 0.0 || y.fract() != 0.0 {
                return Err(CliError::Usage("random-effects state is `clusters,particles`".into()));
            }
            let priors = RePriors::default();
            let post = ParticlePosterior::from_prior(
                &priors,
                x as usize,
                y as usize,
                &mut StreamKey::root(seed).child(1).stream(),
            )?;
            let s = ReArmState { posterior: post, cluster: 0 };
            let model = RandomEffectsArm::new(priors, a.d3);
            let trunc = model.truncation(&s, a.horizon.unwrap_or(25), g)?;
            let cfg = configure(trunc, re_reward(&s.posterior, 0)?)?;
            let res = solve(&model, &s, &cfg, seed)?;
            ("random-effects", cfg, res)
        }
    };
    let rec = IndexRecord {
        model: name.into(),
        state: [x, y],
        gamma: a.gamma,
        horizon: cfg.trunc.horizon(),
        lower: cfg.trunc.lower(),
        upper: cfg.trunc.upper(),
        depth: a.depth,
        n: a.n,
        nu: res.nu_final,
        ci_radius: res.ci_radius,
        iterations: res.iterations,
        stopped_by: res.stopped_by,
        per_k_mean: res.per_k_mean.clone(),
        nu_range: res.nu_range,
        seed,
    };
    let text = serde_json::to_string_pretty(&rec).expect("record serialises") + "\n";
    let conf = IndexConfig { model: name, state: [x, y], solver: &cfg, d3: a.d3 };
    emit(a.out.as_deref(), text.as_bytes(), "index", &conf, seed, started)?;
    Ok(if res.stopped_by == StopReason::MaxIters { EXIT_MAX_ITERS } else { 0 })
}

fn resolve_table(a: &TableArgs) -> Result<TableConfig, CliError> {
    let preset = a.preset.as_deref().unwrap_or("bernoulli-table1");
    let mut cfg = TableConfig::from_spec(&table_preset(preset)?);
    if let Some(path) = &a.config {
        cfg = load(path, "table", &cfg)?;
    }
    let ks = a.depths.as_deref().map(count_list).transpose()?;
    let ns = a.n.as_deref().map(count_list).transpose()?;
    if ks.is_some() || ns.is_some() {
        let ks = ks.unwrap_or_else(|| vec![2]);
        let ns = ns.unwrap_or_else(|| vec![1]);
        cfg.solver.columns = ks.iter().flat_map(|&depth| ns.iter().map(move |&n| Column { depth, n })).collect();
    }
    if let Some(r) = a.repetitions {
        cfg.experiment.repetitions = r;
    }
    if let Some(e) = a.eps_nu {
        cfg.solver.eps_nu = e;
    }
    if let Some(m) = a.max_iters {
        cfg.solver.max_iters = m;
    }
    if let Some(s) = seed(a.seed)? {
        cfg.experiment.seed = s;
    }
    if a.no_timing {
        cfg.experiment.timing = false;
    }
    Ok(cfg)
}

fn table_csv(rep: &TableReport, timing: bool) -> Result<Vec<u8>, CliError> {
    let header: Vec<String> = ["state", "calibration", "method", "param", "value", "bias", "rmse", "sd", "cpu_seconds"]
        .map(String::from)
        .into();
    let rows = rep.rows().into_iter().map(|r| {
        vec![
            r.state,
            num(r.calibration),
            r.method,
            r.param,
            num(r.value),
            num(r.bias),
            num(r.rmse),
            num(r.sd),
            if timing { num(r.cpu_seconds) } else { String::new() },
        ]
    });
    csv_bytes(&header, rows)
}

pub fn table(a: TableArgs) -> Result<u8, CliError> {
    let started = Instant::now();
    let cfg = resolve_table(&a)?;
    let rep = table_sweep(&cfg.spec())?;
    let bytes = table_csv(&rep, cfg.experiment.timing)?;
    emit(a.out.as_deref(), &bytes, "table", &cfg, cfg.experiment.seed, started)?;
    for (col, s) in rep.spec.columns.iter().zip(&rep.summaries) {
        eprintln!("{}: bias {:.5} rmse {:.5}", col.param(), s.bias, s.rmse);
    }
    if let Some(s) = &rep.limit_summary {
        eprintln!("limit: bias {:.5} rmse {:.5}", s.bias, s.rmse);
    }
    Ok(if rep.hit_max_iters() { EXIT_MAX_ITERS } else { 0 })
}

#[derive(Serialize)]
struct CalibrateConfig {
    family: Family,
    states: Vec<[f64; 2]>,
    gamma: f64,
    horizon: usize,
}

pub fn calibrate(a: CalibrateArgs) -> Result<u8, CliError> {
    let started = Instant::now();
    let g = DiscountFactor::new(a.gamma)?;
    let family = match a.model {
        ModelKind::Bernoulli => Family::Bernoulli,
        ModelKind::Gaussian => Family::Gaussian,
        ModelKind::RandomEffects => {
            return Err(CliError::Usage("calibration covers bernoulli and gaussian arms".into()))
        }
    };
    let psis = match (&a.psi, family) {
        (Some(p), _) => number_list(p)?,
        (None, Family::Gaussian) => vec![0.0],
        (None, Family::Bernoulli) => return Err(CliError::Usage("bernoulli calibration needs --psi".into())),
    };
    let states: Vec<[f64; 2]> = match (&a.kappa, &a.failures) {
        (Some(k), None) => {
            let ks = number_list(k)?;
            psis.iter().flat_map(|&p| ks.iter().map(move |&k| [p, k])).collect()
        }
        (None, Some(f)) => {
            let fs = number_list(f)?;
            psis.iter().flat_map(|&p| fs.iter().map(move |&f| [p, p + f])).collect()
        }
        _ => return Err(CliError::Usage("give exactly one of --kappa and --failures".into())),
    };
    let horizon = match (a.horizon, family) {
        (Some(n), _) => n,
        (None, Family::Bernoulli) => bernoulli_horizon(a.eps_trunc, g)?,
        (None, Family::Gaussian) => gaussian_bounds(a.eps_trunc, g, 1.0)?.1,
    };
    let mut rows = Vec::with_capacity(states.len());
    for &[p, k] in &states {
        let v = calibration_value(family, p, k, g, horizon)?;
        rows.push(vec![num(p), num(k), num(v)]);
    }
    let header = ["psi", "kappa", "calibration"].map(String::from);
    let bytes = csv_bytes(&header, rows)?;
    let conf = CalibrateConfig { family, states, gamma: a.gamma, horizon };
    emit(a.out.as_deref(), &bytes, "calibrate", &conf, 0, started)?;
    Ok(0)
}

fn resolve_experiment(a: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = experiment_preset(a.preset.as_deref().unwrap_or("random-effects-desk"))?;
    if let Some(path) = &a.config {
        cfg = load(path, "experiment", &cfg)?;
    }
    if let Some(r) = a.replications {
        cfg.experiment.replications = r;
    }
    if let Some(t) = a.horizon {
        cfg.experiment.horizon = t;
    }
    if let Some(s) = seed(a.seed)? {
        cfg.experiment.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn discount_column(g: f64) -> String {
    format!("disc_total_{:03}", (g * 100.0).round() as u64)
}

fn experiment_csv(rep: &ExperimentReport) -> Result<Vec<u8>, CliError> {
    let mut header: Vec<String> =
        ["replication", "t", "policy", "arm", "expected_reward", "optimal_flag"].map(String::from).into();
    header.extend(rep.config.experiment.eval_discounts.iter().map(|&g| discount_column(g)));
    let mut rows = Vec::new();
    for r in rep.included() {
        for run in &r.runs {
            for t in 0..run.arms.len() {
                let mut row = vec![
                    r.replication.to_string(),
                    (t + 1).to_string(),
                    run.policy.name().to_string(),
                    run.arms[t].to_string(),
                    num(run.expected[t]),
                    u8::from(run.optimal[t]).to_string(),
                ];
                row.extend(run.running.iter().map(|tot| num(tot[t])));
                rows.push(row);
            }
        }
    }
    csv_bytes(&header, rows)
}

pub fn experiment(a: ExperimentArgs) -> Result<u8, CliError> {
    let started = Instant::now();
    let cfg = resolve_experiment(&a)?;
    let rep = run_bandit_experiment(&cfg)?;
    if !rep.all_fair() {
        return Err(CliError::Failed("policies consumed different arm outcomes".into()));
    }
    let bytes = experiment_csv(&rep)?;
    emit(a.out.as_deref(), &bytes, "experiment", &cfg, cfg.experiment.seed, started)?;
    eprintln!("{} replications, {} excluded", rep.replications.len(), rep.excluded_count());
    let policies = &cfg.experiment.policies;
    if rep.included().count() >= 2 {
        for &other in &policies[1..] {
            for &g in &cfg.experiment.eval_discounts {
                let d = rep.final_differences(policies[0], other, g)?;
                let mut s = StreamKey::root(cfg.experiment.seed).child(u64::MAX).stream();
                let (lo, hi) = bootstrap_mean_ci(&d, 0.95, 2000, &mut s)?;
                eprintln!(
                    "{} - {} at {g}: mean {:.4}, 95% CI [{lo:.4}, {hi:.4}]",
                    policies[0].name(),
                    other.name(),
                    mean(&d)
                );
            }
        }
    }
    Ok(0)
}
