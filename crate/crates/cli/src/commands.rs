//! Subcommand implementations. Every command validates its fields
//! (aggregating errors), runs, writes plot-ready CSV data plus JSON
//! reports into a fresh run directory, and finishes with a manifest.

use crate::config::{ExperimentConfig, Fields};
use crate::output::RunDir;
use gk_core::engine::{self, ClockMode};
use gk_core::exact::{
    adjoint_one, entropy_production_check, glauber_adjoint_closed_form, ExactDistribution,
    ExactGenerator,
};
use gk_core::kernel_g::{jump_condition_check, weak_form_residual, KernelG};
use gk_core::lattice::{magnetisation_stats, Configuration, Params};
use gk_core::limits::{
    self, gaussian_fast_field, mu_b_density, sde_stationary_density, PdeParams, SdeParams,
};
use gk_core::measures::{Measure, MeasureSpec, Sampler};
use gk_core::observables::ObservableSelection;
use gk_core::pipelines;
use gk_core::stats;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub enum Outcome {
    Pass,
    StatFail,
}

pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<gk_core::Error> for CliError {
    fn from(e: gk_core::Error) -> Self {
        match e {
            gk_core::Error::InvalidParam(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io: {e}"))
    }
}

type CmdResult = Result<Outcome, CliError>;

fn usage_from(fields: Fields<'_>) -> Result<(), CliError> {
    fields
        .finish()
        .map_err(|e| CliError::Usage(format!("invalid configuration:\n{e}")))
}

fn parse_measure(fields: &mut Fields<'_>, key: &str, default: &str, n: usize) -> Option<MeasureSpec> {
    let text = fields.str_or(key, default);
    match text.parse::<MeasureSpec>() {
        Ok(spec) => match spec.validate(n) {
            Ok(warnings) => {
                for w in warnings {
                    eprintln!("warning: {key}: {w}");
                }
                Some(spec)
            }
            Err(e) => {
                fields.push_error(format!("{key}: {e}"));
                None
            }
        },
        Err(e) => {
            fields.push_error(format!("{key}: {e}"));
            None
        }
    }
}

fn parse_observables(fields: &mut Fields<'_>) -> Vec<ObservableSelection> {
    let text = fields.str_or("observables", "Y");
    let mut out = Vec::new();
    for part in text.split(',') {
        match part.trim().parse::<ObservableSelection>() {
            Ok(sel) => out.push(sel),
            Err(e) => fields.push_error(format!("observables: {e}")),
        }
    }
    out
}

/// simulate / ensemble: trajectories of the particle system with recorded
/// observables; with >= 100 trajectories and Y recorded, a KS comparison
/// against the Euler-Maruyama ensemble of the limiting SDE is attached.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> CmdResult {
    let mut f = Fields::new(cfg);
    let n = f.req_usize("n");
    let a = f.req_f64("a");
    let theta = f.f64_or("theta", 0.0);
    let t_end = f.req_f64("t-end");
    let traj = f.usize_or("traj", 1);
    let grid_points = f.usize_or("grid-points", 100);
    let seed = f.u64_or("seed", 1);
    let budget = f.u64_or("budget", engine::DEFAULT_EVENT_BUDGET);
    let mode: ClockMode = {
        let text = f.str_or("mode", "accelerated");
        text.parse().unwrap_or_else(|e: gk_core::Error| {
            f.push_error(format!("mode: {e}"));
            ClockMode::Accelerated
        })
    };
    let selection = parse_observables(&mut f);
    let init = parse_measure(&mut f, "init", "product:0.5", n.max(1));
    if t_end.is_nan() || t_end <= 0.0 {
        f.push_error("t-end: must be > 0".into());
    }
    let params = match Params::new(n.max(1), if a.is_nan() { 0.0 } else { a }, theta) {
        Ok(p) => Some(p),
        Err(e) => {
            f.push_error(e.to_string());
            None
        }
    };
    usage_from(f)?;
    let (params, init) = (params.unwrap(), init.unwrap());

    let grid: Vec<f64> = (0..=grid_points)
        .map(|i| t_end * i as f64 / grid_points as f64)
        .collect();
    let series = engine::ensemble(&params, mode, &init, traj, &grid, &selection, seed, budget)?;

    let mut dir = RunDir::create(cfg)?;
    let mut outcome = Outcome::Pass;
    if traj == 1 {
        dir.write("series.csv", &series[0].to_csv())?;
        dir.write_json("summary.json", &series[0].summary(&params, mode))?;
    } else {
        // long-format ensemble CSV: traj,time,<columns>
        let mut csv = String::from("traj,time");
        for c in &series[0].columns {
            csv.push(',');
            csv.push_str(c);
        }
        csv.push('\n');
        for (k, ts) in series.iter().enumerate() {
            for (t, row) in ts.times.iter().zip(ts.rows.iter()) {
                csv.push_str(&format!("{k},{t}"));
                for v in row {
                    csv.push_str(&format!(",{v}"));
                }
                csv.push('\n');
            }
        }
        dir.write("ensemble.csv", &csv)?;
        let truncated = series.iter().filter(|ts| ts.truncated).count();
        dir.write_json(
            "summary.json",
            &serde_json::json!({
                "n": params.n, "a": params.a, "theta": params.theta, "gamma": params.gamma,
                "mode": mode.to_string(), "trajectories": traj, "base_seed": seed,
                "truncated_trajectories": truncated,
                "grid_points": grid.len(),
            }),
        )?;
        if truncated > 0 {
            eprintln!("warning: {truncated} trajectories hit the event budget");
        }

        let has_y = series[0].columns.iter().any(|c| c == "Y");
        if has_y && traj >= 100 {
            let finals: Vec<f64> = series
                .iter()
                .map(|ts| *ts.column("Y").unwrap().last().unwrap())
                .collect();
            let report = ks_vs_sde(&params, &init, &finals, t_end, seed)?;
            if report["pass"] == serde_json::Value::Bool(false) {
                outcome = Outcome::StatFail;
            }
            dir.write_json("reports.json", &report)?;
        }
    }
    dir.finalize(Some(seed))?;
    println!("wrote {}", dir.path.display());
    Ok(outcome)
}

/// KS of the final-time magnetisation against the SDE ensemble, with the
/// SDE initial law matched to the particle initial measure.
fn ks_vs_sde(
    params: &Params,
    init: &MeasureSpec,
    particle_finals: &[f64],
    t_end: f64,
    seed: u64,
) -> Result<serde_json::Value, CliError> {
    enum Init {
        Density(Box<limits::QuarticDensity>),
        Const(f64),
    }
    let sde_init = match init {
        MeasureSpec::IsingInit { b, c } if (*c - 2.0).abs() < 1e-12 => {
            Init::Density(Box::new(mu_b_density(*b)?))
        }
        MeasureSpec::UTilted { theta } => Init::Density(Box::new(sde_stationary_density(*theta)?)),
        _ => Init::Const(0.0),
    };
    let sde_params = SdeParams::new(params.a, params.theta, 1e-3, t_end)?;
    let paths = (3 * particle_finals.len()).max(1000);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(engine::split_seed(seed, 0x5de));
    let mut sde_finals = Vec::with_capacity(paths);
    for _ in 0..paths {
        let y0 = match &sde_init {
            Init::Density(d) => d.sample(&mut rng),
            Init::Const(x) => *x,
        };
        sde_finals.push(*limits::sde_simulate(&sde_params, y0, &mut rng)?.last().unwrap());
    }
    let ks = stats::ks_two_sample(particle_finals, &sde_finals);
    let threshold = 0.1;
    Ok(serde_json::json!({
        "name": "KS(Y_t, SDE ensemble)",
        "ks": ks,
        "threshold": threshold,
        "particle_samples": particle_finals.len(),
        "sde_samples": paths,
        "pass": ks <= threshold,
    }))
}

pub fn cmd_sample_measure(cfg: &ExperimentConfig) -> CmdResult {
    let mut f = Fields::new(cfg);
    let n = f.req_usize("n");
    let samples = f.usize_or("samples", 100);
    let seed = f.u64_or("seed", 1);
    let spec = parse_measure(&mut f, "measure", "product:0.5", n.max(1));
    usage_from(f)?;
    let spec = spec.unwrap();

    let sampler = Sampler::new(Measure::new(spec, n)?)?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut csv = String::from("sample,m,y,config\n");
    for k in 0..samples {
        let cfg_s = sampler.sample(&mut rng)?;
        let st = magnetisation_stats(&cfg_s);
        csv.push_str(&format!("{k},{},{},{}\n", st.m, st.y, cfg_s.to_hex()));
    }
    let mut dir = RunDir::create(cfg)?;
    dir.write("samples.csv", &csv)?;
    dir.finalize(Some(seed))?;
    println!("wrote {}", dir.path.display());
    Ok(Outcome::Pass)
}

pub fn cmd_kernel_g(cfg: &ExperimentConfig) -> CmdResult {
    let mut f = Fields::new(cfg);
    let delta = f.req_f64("delta");
    let b = f.req_f64("b");
    // both --L and --big-l select the truncation order
    let truncation = if cfg.get("L").is_some() {
        f.usize_or("L", 10_000)
    } else {
        f.usize_or("big-l", 10_000)
    };
    let grid_points = f.usize_or("grid-points", 512);
    usage_from(f)?;

    let kernel = KernelG::new(delta, b, truncation)?;
    let mut modes = String::from("ell,lambda_minus,residual\n");
    let mut worst_ratio: f64 = 0.0;
    for ell in 0..=truncation {
        let lam = if ell == 0 {
            kernel.lambda0
        } else {
            kernel.coeffs[ell - 1]
        };
        let res = weak_form_residual(&kernel, ell)?;
        let tol = 1e-10 * (1.0 + 4.0 * std::f64::consts::PI.powi(2) * (ell * ell) as f64);
        worst_ratio = worst_ratio.max(res.abs() / tol);
        modes.push_str(&format!("{ell},{lam},{res}\n"));
    }
    let mut grid = String::from("x,g\n");
    for i in 0..grid_points {
        let x = i as f64 / grid_points as f64;
        grid.push_str(&format!("{x},{}\n", kernel.evaluate(x)));
    }
    let jump = jump_condition_check(&kernel)?;
    let pass = worst_ratio <= 1.0 && jump.relative_error <= 0.01;
    let report = serde_json::json!({
        "delta": delta,
        "b": b,
        "truncation": truncation,
        "lambda0": kernel.lambda0,
        "tail_bound": kernel.tail_bound(),
        "max_residual_over_tolerance": worst_ratio,
        "jump": { "measured": jump.measured, "target": jump.target,
                   "relative_error": jump.relative_error },
        "pass": pass,
    });
    let mut dir = RunDir::create(cfg)?;
    dir.write("modes.csv", &modes)?;
    dir.write("g_grid.csv", &grid)?;
    dir.write_json("report.json", &report)?;
    dir.finalize(None)?;
    println!("wrote {}", dir.path.display());
    Ok(if pass { Outcome::Pass } else { Outcome::StatFail })
}

pub fn cmd_sde(cfg: &ExperimentConfig) -> CmdResult {
    let mut f = Fields::new(cfg);
    let a = f.req_f64("a");
    let theta = f.f64_or("theta", 0.0);
    let h = f.f64_or("h", limits::SDE_DEFAULT_STEP);
    let t_end = f.req_f64("t-end");
    let paths = f.usize_or("paths", 1);
    let y0 = f.f64_or("y0", 0.0);
    let seed = f.u64_or("seed", 1);
    usage_from(f)?;

    let params = SdeParams::new(a, theta, h, t_end)?;
    let mut csv = String::from("traj,time,y\n");
    for k in 0..paths {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(engine::split_seed(seed, k as u64));
        let path = limits::sde_simulate(&params, y0, &mut rng)?;
        for (i, y) in path.iter().enumerate() {
            csv.push_str(&format!("{k},{},{y}\n", i as f64 * h));
        }
    }
    let mut dir = RunDir::create(cfg)?;
    dir.write("paths.csv", &csv)?;
    dir.finalize(Some(seed))?;
    println!("wrote {}", dir.path.display());
    Ok(Outcome::Pass)
}

pub fn cmd_pde(cfg: &ExperimentConfig) -> CmdResult {
    let mut f = Fields::new(cfg);
    let gamma = f.f64_or("gamma", 0.5);
    let a = f.f64_or("a", 1.0);
    let dt = f.f64_or("dt", limits::PDE_DEFAULT_STEP);
    let grid = f.usize_or("grid", limits::PDE_DEFAULT_GRID);
    let t_end = f.req_f64("t-end");
    let amplitude = f.f64_or("amplitude", 0.3);
    usage_from(f)?;

    let params = PdeParams::new(gamma, a, dt)?;
    let rho0: Vec<f64> = (0..grid)
        .map(|j| 0.5 + amplitude * (2.0 * std::f64::consts::PI * j as f64 / grid as f64).cos())
        .collect();
    let state = limits::pde_solve(&rho0, &params, t_end)?;
    let mut profile = String::from("x,u\n");
    for (j, u) in state.values.iter().enumerate() {
        profile.push_str(&format!("{},{u}\n", j as f64 / grid as f64));
    }
    let mut dir = RunDir::create(cfg)?;
    dir.write("profile.csv", &profile)?;
    dir.write_json(
        "summary.json",
        &serde_json::json!({
            "gamma": gamma, "a": a, "dt": dt, "grid": grid, "t_end": t_end,
            "mass": state.mass(),
            "l2_centered_sq": state.l2_centered_sq(),
        }),
    )?;
    dir.finalize(None)?;
    println!("wrote {}", dir.path.display());
    Ok(Outcome::Pass)
}

pub fn cmd_fast_field(cfg: &ExperimentConfig) -> CmdResult {
    let mut f = Fields::new(cfg);
    let k_max = f.usize_or("k-max", 3) as u32;
    let a = f.f64_or("a", 1.0);
    let samples = f.usize_or("samples", 1000);
    let seed = f.u64_or("seed", 1);
    usage_from(f)?;

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut csv = String::from("sample,k,cos,sin\n");
    for s in 0..samples {
        for m in gaussian_fast_field(k_max, a, &mut rng) {
            csv.push_str(&format!("{s},{},{},{}\n", m.k, m.cos, m.sin));
        }
    }
    let mut dir = RunDir::create(cfg)?;
    dir.write("samples.csv", &csv)?;
    dir.finalize(Some(seed))?;
    println!("wrote {}", dir.path.display());
    Ok(Outcome::Pass)
}

pub fn cmd_exact_adjoint(cfg: &ExperimentConfig) -> CmdResult {
    let mut f = Fields::new(cfg);
    let n = f.usize_or("n", 8);
    let a = f.f64_or("a", 1.0);
    // either gamma or theta parameterises the rates
    let theta = if let Some(g) = cfg.get("gamma") {
        match g.parse::<f64>() {
            Ok(gamma) => (1.0 - 2.0 * gamma) * (n as f64).sqrt(),
            Err(_) => {
                f.push_error(format!("gamma: not a number: {g:?}"));
                0.0
            }
        }
    } else {
        f.f64_or("theta", 0.0)
    };
    let reference = parse_measure(&mut f, "ref", "product:0.5", n.max(1));
    usage_from(f)?;
    let reference = reference.unwrap();

    let params = Params::new(n, a, theta)?;
    let gen = ExactGenerator::new(params)?;
    let measure = Measure::new(reference.clone(), n)?;
    let adj = adjoint_one(&gen, &measure)?;
    let closed = glauber_adjoint_closed_form(n, params.gamma);
    let is_uniform_product = matches!(reference, MeasureSpec::Product { rho } if rho == 0.5);
    let mut csv = String::from("state,exclusion,glauber,closed_form,deviation\n");
    let mut max_dev: f64 = 0.0;
    let scale = a * (n as f64).sqrt();
    for s in 0..1usize << n {
        let dev = if is_uniform_product {
            (scale * (adj.glauber[s] - closed[s]))
                .abs()
                .max((scale * adj.exclusion[s]).abs())
        } else {
            0.0
        };
        max_dev = max_dev.max(dev);
        csv.push_str(&format!(
            "{s},{},{},{},{dev}\n",
            adj.exclusion[s], adj.glauber[s], closed[s]
        ));
    }
    let pass = !is_uniform_product || max_dev <= 1e-10;
    println!("max deviation: {max_dev:.3e}");
    let mut dir = RunDir::create(cfg)?;
    dir.write("adjoint.csv", &csv)?;
    dir.write_json(
        "report.json",
        &serde_json::json!({
            "n": n, "a": a, "gamma": params.gamma, "ref": reference.to_string(),
            "max_deviation": max_dev,
            "closed_form_applies": is_uniform_product,
            "pass": pass,
        }),
    )?;
    dir.finalize(None)?;
    println!("wrote {}", dir.path.display());
    Ok(if pass { Outcome::Pass } else { Outcome::StatFail })
}

pub fn cmd_exact_entropy(cfg: &ExperimentConfig) -> CmdResult {
    let mut f = Fields::new(cfg);
    let n = f.usize_or("n", 10);
    let a = f.f64_or("a", 0.2);
    let theta = f.f64_or("theta", 0.0);
    let t_max = f.f64_or("t-max", 0.1);
    let grid_points = f.usize_or("grid-points", 20);
    let reference = parse_measure(&mut f, "ref", "u-tilted:theta=0", n.max(1));
    let init = parse_measure(&mut f, "init", "ising:b=0,c=2", n.max(1));
    usage_from(f)?;

    let params = Params::new(n, a, theta)?;
    let reference = Measure::new(reference.unwrap(), n)?;
    let mu0 = ExactDistribution::from_measure(&Measure::new(init.unwrap(), n)?)?;
    let grid: Vec<f64> = (1..=grid_points)
        .map(|i| t_max * i as f64 / grid_points as f64)
        .collect();
    let report = entropy_production_check(&mu0, &reference, &params, &grid, t_max / 100.0)?;
    let mut csv = String::from("t,entropy,entropy_prime,rhs,margin,fd_error,pass\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.t, r.entropy, r.entropy_prime, r.rhs, r.margin, r.fd_error, r.pass
        ));
    }
    let mut dir = RunDir::create(cfg)?;
    dir.write("entropy.csv", &csv)?;
    dir.write_json("report.json", &serde_json::to_value(&report).unwrap())?;
    dir.finalize(None)?;
    println!(
        "entropy production: all_pass = {}, inconclusive = {}",
        report.all_pass, report.inconclusive
    );
    println!("wrote {}", dir.path.display());
    Ok(if report.all_pass {
        Outcome::Pass
    } else {
        Outcome::StatFail
    })
}

pub fn cmd_exact_tv(cfg: &ExperimentConfig) -> CmdResult {
    let mut f = Fields::new(cfg);
    let n = f.usize_or("n", 8);
    let a = f.f64_or("a", 1.0);
    let theta = f.f64_or("theta", 0.0);
    let t_end = f.f64_or("t-end", 0.5);
    let traj = f.usize_or("traj", 10_000);
    let seed = f.u64_or("seed", 1);
    usage_from(f)?;

    let params = Params::new(n, a, theta)?;
    let initial = Configuration::from_fn(n, |i| i < n / 2);
    let report = pipelines::mc_vs_master_equation(&params, &initial, t_end, traj, seed)?;
    println!(
        "TV = {:.4}, envelope = {:.4}, pass = {}",
        report.tv, report.envelope, report.pass
    );
    let mut dir = RunDir::create(cfg)?;
    dir.write_json("report.json", &serde_json::to_value(&report).unwrap())?;
    dir.finalize(Some(seed))?;
    println!("wrote {}", dir.path.display());
    Ok(if report.pass {
        Outcome::Pass
    } else {
        Outcome::StatFail
    })
}

/// Recompute statistics from a stored ensemble CSV without re-simulating.
pub fn cmd_analyze(cfg: &ExperimentConfig) -> CmdResult {
    let mut f = Fields::new(cfg);
    let input = f.str_or("input", "");
    if input.is_empty() {
        f.push_error("input: required (path to a run directory)".into());
    }
    usage_from(f)?;

    let path = std::path::Path::new(&input).join("ensemble.csv");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Usage("empty ensemble.csv".into()))?
        .split(',')
        .collect();
    // final-time value per trajectory and column
    let mut last_by_traj: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for line in lines {
        let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect();
        if vals.len() != header.len() {
            continue;
        }
        last_by_traj.insert(vals[0] as usize, vals);
    }
    let mut reports = Vec::new();
    for (col, name) in header.iter().enumerate().skip(2) {
        let finals: Vec<f64> = last_by_traj.values().map(|r| r[col]).collect();
        if finals.len() >= 30 {
            reports.push(stats::moment_ci(&finals, 1, format!("mean {name} at t_end"))?.to_json());
            reports.push(stats::moment_ci(&finals, 2, format!("m2 {name} at t_end"))?.to_json());
        }
    }
    let mut dir = RunDir::create(cfg)?;
    dir.write_json("analysis.json", &serde_json::Value::Array(reports))?;
    dir.finalize(None)?;
    println!("wrote {}", dir.path.display());
    Ok(Outcome::Pass)
}

pub fn cmd_calibrate(cfg: &ExperimentConfig) -> CmdResult {
    let mut f = Fields::new(cfg);
    let seed = f.u64_or("seed", 20_240_817);
    usage_from(f)?;

    let reports = pipelines::calibration_suite(seed)?;
    let failures = reports.iter().filter(|r| !r.passed()).count();
    for r in &reports {
        println!(
            "{}: estimate {:.5}, pass {:?}",
            r.name,
            r.estimate,
            r.pass.unwrap_or(true)
        );
    }
    let mut dir = RunDir::create(cfg)?;
    dir.write_json(
        "calibration.json",
        &serde_json::json!({
            "seed": seed,
            "failures": failures,
            "budget": 2,
            "reports": reports.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
        }),
    )?;
    dir.finalize(Some(seed))?;
    println!("calibration failures: {failures} (budget 2)");
    println!("wrote {}", dir.path.display());
    Ok(if failures <= 2 {
        Outcome::Pass
    } else {
        Outcome::StatFail
    })
}
