//! Experiment drivers: full pipelines from ensembles to reports, shared by
//! the command-line tool and the acceptance suite.

use crate::engine::{self, ClockMode, SimulateOpts};
use crate::exact::{self, ExactDistribution, ExactGenerator};
use crate::lattice::{Configuration, Params};
use crate::limits::{self, PdeParams, QuarticDensity, SdeParams};
use crate::measures::MeasureSpec;
use crate::observables::ObservableSelection as Sel;
use crate::stats::{self, EstimatorReport, ResidualReport};
use crate::Result;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

/// Comparison of the particle magnetisation at time t_end against the
/// Euler-Maruyama ensemble of the limiting SDE.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SdeComparison {
    pub ks: f64,
    pub ks_threshold: f64,
    pub particle_m2: f64,
    pub particle_m4: f64,
    pub sde_m2: f64,
    pub sde_m4: f64,
    pub m2_relative_error: f64,
    pub m4_relative_error: f64,
    pub residual: ResidualReport,
    pub pass: bool,
}

/// Run the particle ensemble from `init`, the SDE ensemble from the given
/// initial law, and compare the laws of Y at t_end (two-sample KS + second
/// and fourth moments) plus the residual-Brownian diagnostic along the path.
#[allow(clippy::too_many_arguments)]
pub fn magnetisation_vs_sde(
    params: &Params,
    init: &MeasureSpec,
    sde_initial: &QuarticDensity,
    n_traj: usize,
    sde_paths: usize,
    t_end: f64,
    grid_points: usize,
    base_seed: u64,
    ks_threshold: f64,
    moment_tolerance: f64,
) -> Result<SdeComparison> {
    // grid includes t = 0 so W_t sees the initial value
    let grid: Vec<f64> = (0..=grid_points)
        .map(|i| t_end * i as f64 / grid_points as f64)
        .collect();
    let series = engine::ensemble(
        params,
        ClockMode::Accelerated,
        init,
        n_traj,
        &grid,
        &[Sel::Y],
        base_seed,
        engine::DEFAULT_EVENT_BUDGET,
    )?;
    let paths: Vec<Vec<f64>> = series
        .iter()
        .map(|ts| ts.column("Y").expect("Y recorded"))
        .collect();
    let residual = stats::residual_brownian_check(&paths, &grid, params.a, params.theta)?;

    let particle_finals: Vec<f64> = paths.iter().map(|p| *p.last().unwrap()).collect();

    // SDE ensemble
    let sde_params = SdeParams::new(params.a, params.theta, 1e-3, t_end)?;
    let sde_finals: Vec<f64> = (0..sde_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng =
                Xoshiro256PlusPlus::seed_from_u64(engine::split_seed(base_seed ^ 0x5de5_de5d, k as u64));
            let y0 = sde_initial.sample(&mut rng);
            limits::sde_simulate(&sde_params, y0, &mut rng).map(|p| *p.last().unwrap())
        })
        .collect::<Result<_>>()?;

    let ks = stats::ks_two_sample(&particle_finals, &sde_finals);
    let m2p = stats::moment_ci(&particle_finals, 2, "particle m2")?.estimate;
    let m4p = stats::moment_ci(&particle_finals, 4, "particle m4")?.estimate;
    let m2s = stats::moment_ci(&sde_finals, 2, "sde m2")?.estimate;
    let m4s = stats::moment_ci(&sde_finals, 4, "sde m4")?.estimate;
    let m2_rel = ((m2p - m2s) / m2s).abs();
    let m4_rel = ((m4p - m4s) / m4s).abs();
    let pass = ks <= ks_threshold && m2_rel <= moment_tolerance && m4_rel <= moment_tolerance;
    Ok(SdeComparison {
        ks,
        ks_threshold,
        particle_m2: m2p,
        particle_m4: m4p,
        sde_m2: m2s,
        sde_m4: m4s,
        m2_relative_error: m2_rel,
        m4_relative_error: m4_rel,
        residual,
        pass,
    })
}

/// Variance / covariance verification of the Gaussian fast modes at two
/// observation times.
#[allow(clippy::too_many_arguments)]
pub fn fast_mode_covariance(
    params: &Params,
    init: &MeasureSpec,
    modes: &[u32],
    t0: f64,
    t1: f64,
    n_traj: usize,
    base_seed: u64,
) -> Result<Vec<EstimatorReport>> {
    let selection: Vec<Sel> = modes.iter().map(|&k| Sel::FastCos(k)).collect();
    let series = engine::ensemble(
        params,
        ClockMode::Accelerated,
        init,
        n_traj,
        &[t0, t1],
        &selection,
        base_seed,
        engine::DEFAULT_EVENT_BUDGET,
    )?;
    // cells labelled t{0,1}:cos:k
    let mut cells: Vec<(String, Vec<f64>)> = Vec::new();
    for (ti, tlabel) in [(0usize, "t0"), (1usize, "t1")] {
        for &k in modes {
            let vals: Vec<f64> = series
                .iter()
                .map(|ts| {
                    let col = ts.column(&format!("fast_cos_{k}")).expect("column");
                    col[ti]
                })
                .collect();
            cells.push((format!("{tlabel}:cos:{k}"), vals));
        }
    }
    let cov = stats::covariance_estimator(&cells)?;
    let mut reports = Vec::new();
    for cell in cov {
        let same_cell = cell.label_row == cell.label_col;
        let same_time = cell.label_row[..2] == cell.label_col[..2];
        let name = format!("cov[{} , {}]", cell.label_row, cell.label_col);
        let report = if same_cell {
            let k: u32 = cell.label_row.rsplit(':').next().unwrap().parse().unwrap();
            let target = limits::fast_mode_variance(k, params.a);
            EstimatorReport::new(name, cell.cov, cell.se, cell.n_samples)
                .against(target, 3.0 * cell.se)
        } else if same_time {
            // distinct modes at equal time: orthogonality
            EstimatorReport::new(name, cell.cov, cell.se, cell.n_samples)
                .against(0.0, 3.0 * cell.se)
        } else {
            // distinct times: white in time
            EstimatorReport::new(name, cell.cov, cell.se, cell.n_samples)
                .against(0.0, 3.0 * cell.se)
        };
        reports.push(report);
    }
    Ok(reports)
}

/// Total-variation comparison of the Monte Carlo engine against the exact
/// master equation from a fixed initial configuration.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TvReport {
    pub tv: f64,
    pub envelope: f64,
    pub n_traj: usize,
    pub pass: bool,
}

pub fn mc_vs_master_equation(
    params: &Params,
    initial: &Configuration,
    t: f64,
    n_traj: usize,
    base_seed: u64,
) -> Result<TvReport> {
    let n = params.n;
    let gen = ExactGenerator::new(*params)?;
    let exact_dist = exact::evolve(&gen, &ExactDistribution::point_mass(n, initial), t)?;

    let counts: Vec<u64> = (0..n_traj)
        .into_par_iter()
        .map(|k| -> Result<usize> {
            let opts = SimulateOpts::new(engine::split_seed(base_seed, k as u64))
                .with_selection(vec![Sel::Y]);
            let ts = engine::simulate(params, ClockMode::Accelerated, initial.clone(), &[t], &opts)?;
            Ok(ts.final_config.index())
        })
        .try_fold(
            || vec![0u64; 1 << n],
            |mut acc, idx| {
                acc[idx?] += 1;
                Ok::<_, crate::Error>(acc)
            },
        )
        .try_reduce(
            || vec![0u64; 1 << n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    let hist: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / n_traj as f64)
        .collect();
    let tv = exact::total_variation(&hist, &exact_dist.probs);
    let envelope = 4.0 * ((1u64 << n) as f64 / n_traj as f64).sqrt();
    Ok(TvReport {
        tv,
        envelope,
        n_traj,
        pass: tv <= envelope,
    })
}

/// Hydrodynamic comparison: box-smoothed empirical density of a single
/// hydrodynamic-clock trajectory against the PDE solution, plus the
/// dissipative decay bound of the PDE itself.
#[derive(Debug, Clone, serde::Serialize)]
pub struct HydroReport {
    pub l1_distance: f64,
    pub l1_threshold: f64,
    pub decay_ok: bool,
    pub decay_checks: Vec<(f64, f64, f64)>,
    pub pass: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn hydrodynamic_compare(
    n: usize,
    a: f64,
    amplitude: f64,
    t: f64,
    boxes: usize,
    seed: u64,
    pde_dt: f64,
    l1_threshold: f64,
) -> Result<HydroReport> {
    let params = Params::new(n, a, 0.0)?; // gamma = 1/2
    let profile = |x: f64| 0.5 + amplitude * (2.0 * std::f64::consts::PI * x).cos();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let draws: Vec<bool> = (0..n)
        .map(|i| {
            let p = profile(i as f64 / n as f64).clamp(0.0, 1.0);
            rand::Rng::gen_bool(&mut rng, p)
        })
        .collect();
    let initial = Configuration::from_fn(n, |i| draws[i]);

    let opts = SimulateOpts::new(seed).with_selection(vec![Sel::Density]);
    let ts = engine::simulate(&params, ClockMode::Hydrodynamic, initial, &[t], &opts)?;
    let density_row = &ts.rows[0];

    let pde_params = PdeParams::new(params.gamma, a, pde_dt)?;
    let rho0: Vec<f64> = (0..n).map(|i| profile(i as f64 / n as f64)).collect();
    let pde = limits::pde_solve(&rho0, &pde_params, t)?;

    // box smoothing over `boxes` equal blocks
    let per = n / boxes;
    let mut l1 = 0.0;
    for b in 0..boxes {
        let emp: f64 = density_row[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64;
        let sol: f64 = pde.values[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64;
        l1 += (emp - sol).abs();
    }
    l1 /= boxes as f64;

    // hydrodynamic decay bound ||u_t - 1/2||_2^2 <= 1/(2t) on [0.5, 20]
    let mut decay_checks = Vec::new();
    let mut decay_ok = true;
    let mut state = limits::pde_solve(&rho0, &pde_params, 0.5)?;
    for &tc in &[0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
        if tc > 0.5 {
            let further = limits::pde_solve(&state.values, &pde_params, tc - state.time)?;
            state = limits::PdeState {
                values: further.values,
                time: tc,
            };
        }
        let norm = state.l2_centered_sq();
        let bound = 1.0 / (2.0 * tc);
        decay_checks.push((tc, norm, bound));
        if norm > bound + 1e-9 {
            decay_ok = false;
        }
    }

    Ok(HydroReport {
        l1_distance: l1,
        l1_threshold,
        decay_ok,
        decay_checks,
        pass: l1 <= l1_threshold && decay_ok,
    })
}

/// Calibration suite: every statistical test run against synthetic data
/// drawn from its own null, with fixed seeds. At most two of the 95% tests
/// are expected to fail; the suite verdict allows that budget.
pub fn calibration_suite(seed: u64) -> Result<Vec<EstimatorReport>> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut reports = Vec::new();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);

    // moments of the standard normal
    let normals: Vec<f64> = (0..1_000_000)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let m2 = stats::moment_ci(&normals, 2, "calibration: normal m2")?;
    let tol2 = 3.0 * m2.se;
    reports.push(EstimatorReport { ..m2 }.against(1.0, tol2));
    let m4 = stats::moment_ci(&normals, 4, "calibration: normal m4")?;
    let tol4 = 3.0 * m4.se;
    reports.push(EstimatorReport { ..m4 }.against(3.0, tol4));

    // KS under its null
    let uniforms: Vec<f64> = (0..20_000).map(|_| rng.gen::<f64>()).collect();
    let mut ks = stats::ks_distance(&uniforms, |x| x.clamp(0.0, 1.0), "calibration: ks null");
    reports.push(ks);
    // KS power against a shifted target
    let d = stats::ks_statistic(&mut uniforms.clone(), |x| (x - 0.05).clamp(0.0, 1.0));
    ks = EstimatorReport::new("calibration: ks detects shift", d, 0.0, uniforms.len());
    ks.target = Some(stats::ks_critical_95(uniforms.len()));
    ks.tolerance = Some(0.0);
    ks.pass = Some(d > stats::ks_critical_95(uniforms.len()));
    reports.push(ks);

    // residual-Brownian self-calibration on exact SDE paths
    let a = 1.0;
    let theta = 0.0;
    let sde_params = SdeParams::new(a, theta, 1e-3, 1.0)?;
    let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
    let paths: Vec<Vec<f64>> = (0..1500)
        .map(|_| limits::sde_simulate(&sde_params, 0.0, &mut rng))
        .collect::<Result<_>>()?;
    let res = stats::residual_brownian_check(&paths, &times, a, theta)?;
    let mut r = EstimatorReport::new(
        "calibration: residual Var[W_t]/t slope",
        res.slope,
        0.0,
        paths.len(),
    );
    r.target = Some(a);
    r.tolerance = Some(0.15 * a);
    r.pass = Some(res.slope_relative_error <= 0.15 && res.grid_ok);
    reports.push(r);

    // fast-field variance at k = 1
    let draws = 100_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        let s = limits::gaussian_fast_field(1, a, &mut rng);
        acc += s[0].cos * s[0].cos;
    }
    let var = acc / draws as f64;
    let target = limits::fast_mode_variance(1, a);
    let se = target * (2.0 / draws as f64).sqrt();
    reports.push(
        EstimatorReport::new("calibration: fast mode k=1 variance", var, se, draws)
            .against(target, 3.0 * se),
    );

    // concentration bound on gaussian-like sums
    let sums: Vec<f64> = (0..20_000)
        .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    reports.push(stats::concentration_check(&sums, 0.25, 1.0)?);

    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_suite_within_budget() {
        let reports = calibration_suite(20_240_817).unwrap();
        let failures = reports.iter().filter(|r| !r.passed()).count();
        assert!(
            failures <= 2,
            "calibration failures: {:?}",
            reports
                .iter()
                .filter(|r| !r.passed())
                .map(|r| &r.name)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn weak_distance_relaxation_is_qualitatively_small() {
        // large-deviation surrogate: after hydrodynamic relaxation the
        // empirical measure sits close to dx/2 in the weak distance, so the
        // event {d >= 0.1} never shows up at desk scale
        use crate::observables::{weak_distance_default, DensityMeasure, EmpiricalMeasure};
        let n = 256usize;
        let params = Params::new(n, 1.0, 0.0).unwrap();
        let profile = |x: f64| 0.5 + 0.3 * (2.0 * std::f64::consts::PI * x).cos();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4100);
        let draws: Vec<bool> = (0..n)
            .map(|i| rand::Rng::gen_bool(&mut rng, profile(i as f64 / n as f64)))
            .collect();
        let initial = Configuration::from_fn(n, |i| draws[i]);
        let opts = SimulateOpts::new(4100);
        let ts = engine::simulate(&params, ClockMode::Hydrodynamic, initial, &[1.0], &opts).unwrap();
        let pi = EmpiricalMeasure::from_config(&ts.final_config);
        let flat = DensityMeasure {
            values: vec![0.5; n],
        };
        let d = weak_distance_default(&pi, &flat);
        assert!(d < 0.1, "weak distance {d} after relaxation");
    }

    #[test]
    fn mc_vs_master_equation_small() {
        // light version of the acceptance criterion: n = 6, fewer paths
        let params = Params::new(6, 1.0, 0.0).unwrap();
        let initial = Configuration::from_fn(6, |i| i < 3);
        let report = mc_vs_master_equation(&params, &initial, 0.3, 20_000, 99).unwrap();
        assert!(report.pass, "TV {} vs {}", report.tv, report.envelope);
        // the MC histogram genuinely resolves the law: TV well inside
        assert!(report.tv < report.envelope * 0.5);
    }
}
