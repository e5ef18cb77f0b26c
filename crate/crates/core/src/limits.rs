//! Numerical limit objects: the cubic magnetisation SDE and its stationary
//! law, the mu_b family of initial laws, the hydrodynamic PDE with a
//! Fourier-spectral solver, and the white-in-time Gaussian fast field.

use crate::numeric::{fft_in_place, gauss_legendre, integrate};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Hard abort threshold for SDE trajectories; the cubic drift is
/// restoring, so exceeding it signals a bug or an absurd step size.
pub const SDE_DIVERGENCE_LIMIT: f64 = 1e3;

pub const SDE_DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SdeParams {
    pub a: f64,
    pub theta: f64,
    /// output step
    pub h: f64,
    pub t_end: f64,
}

impl SdeParams {
    pub fn new(a: f64, theta: f64, h: f64, t_end: f64) -> Result<Self> {
        if !(a >= 0.0) {
            return Err(Error::InvalidParam(format!("a = {a} must be >= 0")));
        }
        if !(h > 0.0) || h > t_end {
            return Err(Error::InvalidParam(format!(
                "need 0 < h <= t_end (h = {h}, t_end = {t_end})"
            )));
        }
        Ok(SdeParams { a, theta, h, t_end })
    }
}

/// Euler-Maruyama path of dY = -2 a theta Y dt - 2 a Y^3 dt + sqrt(a) dW on
/// the output grid 0, h, 2h, ..; strong order 1/2, deterministic given the
/// rng stream. Each output step is split into enough substeps to keep the
/// internal step below 0.01 / (1 + a (|theta| + Y^2)).
pub fn sde_simulate<R: Rng>(params: &SdeParams, y0: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !y0.is_finite() || y0.abs() > SDE_DIVERGENCE_LIMIT {
        return Err(Error::Divergence(format!(
            "initial value {y0} outside +-{SDE_DIVERGENCE_LIMIT}"
        )));
    }
    let steps = (params.t_end / params.h).round().max(1.0) as usize;
    let mut path = Vec::with_capacity(steps + 1);
    let mut y = y0;
    path.push(y);
    let a = params.a;
    let theta = params.theta;
    for step in 0..steps {
        let stable = 0.01 / (1.0 + a * (theta.abs() + y * y));
        let m = (params.h / stable).ceil().max(1.0) as usize;
        let dt = params.h / m as f64;
        let noise_scale = (a * dt).sqrt();
        for _ in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            y += (-2.0 * a * theta * y - 2.0 * a * y * y * y) * dt + noise_scale * z;
            if y.abs() > SDE_DIVERGENCE_LIMIT {
                return Err(Error::Divergence(format!(
                    "|Y| = {} exceeded {SDE_DIVERGENCE_LIMIT} at output step {step} \
                     (h = {}, a = {a}, theta = {theta})",
                    y.abs(),
                    params.h
                )));
            }
        }
        path.push(y);
    }
    Ok(path)
}

/// Normalised density proportional to exp(-q4 x^4 + q2 x^2) on the real
/// line, with quadrature normalisation and a tabulated inverse CDF.
/// Covers both the SDE stationary law (q4 = 1, q2 = -2 theta) and the
/// initial laws mu_b (q4 = 4/3, q2 = b).
#[derive(Debug, Clone)]
pub struct QuarticDensity {
    pub quartic: f64,
    pub quadratic: f64,
    z: f64,
    support: f64,
    cdf_xs: Vec<f64>,
    cdf_vals: Vec<f64>,
}

impl QuarticDensity {
    pub fn new(quartic: f64, quadratic: f64) -> Result<Self> {
        if !(quartic > 0.0) {
            return Err(Error::InvalidParam(format!(
                "quartic coefficient {quartic} must be > 0"
            )));
        }
        // support half-width: tail of exp(-q4 x^4 + q2 x^2) below 1e-16
        let mut support = 6.0f64;
        let tail = |x: f64| -quartic * x.powi(4) + quadratic * x * x;
        while tail(support) > -40.0 && support < 40.0 {
            support += 2.0;
        }
        let unnorm = |x: f64| tail(x).exp();
        let z = integrate(&unnorm, -support, support, 1e-13);
        // tabulated CDF for sampling and KS targets
        let grid = 8192usize;
        let mut cdf_xs = Vec::with_capacity(grid + 1);
        let mut cdf_vals = Vec::with_capacity(grid + 1);
        let mut acc = 0.0;
        let dx = 2.0 * support / grid as f64;
        let mut prev = unnorm(-support);
        cdf_xs.push(-support);
        cdf_vals.push(0.0);
        for i in 1..=grid {
            let x = -support + i as f64 * dx;
            let f = unnorm(x);
            acc += 0.5 * (prev + f) * dx;
            prev = f;
            cdf_xs.push(x);
            cdf_vals.push(acc);
        }
        let total = acc;
        for v in cdf_vals.iter_mut() {
            *v /= total;
        }
        Ok(QuarticDensity {
            quartic,
            quadratic,
            z,
            support,
            cdf_xs,
            cdf_vals,
        })
    }

    pub fn normalisation(&self) -> f64 {
        self.z
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (-self.quartic * x.powi(4) + self.quadratic * x * x).exp() / self.z
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -self.support {
            return 0.0;
        }
        if x >= self.support {
            return 1.0;
        }
        let idx = ((x + self.support) / (2.0 * self.support) * (self.cdf_xs.len() - 1) as f64)
            .floor() as usize;
        let idx = idx.min(self.cdf_xs.len() - 2);
        let (x0, x1) = (self.cdf_xs[idx], self.cdf_xs[idx + 1]);
        let (c0, c1) = (self.cdf_vals[idx], self.cdf_vals[idx + 1]);
        c0 + (c1 - c0) * (x - x0) / (x1 - x0)
    }

    /// Inverse-CDF draw from the tabulated grid.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let idx = self.cdf_vals.partition_point(|&c| c < u);
        if idx == 0 {
            return self.cdf_xs[0];
        }
        if idx >= self.cdf_vals.len() {
            return *self.cdf_xs.last().unwrap();
        }
        let (c0, c1) = (self.cdf_vals[idx - 1], self.cdf_vals[idx]);
        let (x0, x1) = (self.cdf_xs[idx - 1], self.cdf_xs[idx]);
        if c1 > c0 {
            x0 + (x1 - x0) * (u - c0) / (c1 - c0)
        } else {
            x0
        }
    }

    pub fn moment(&self, order: i32) -> f64 {
        let f = |x: f64| x.powi(order) * self.pdf(x);
        integrate(&f, -self.support, self.support, 1e-12)
    }

    /// Normalisation via the second, independent quadrature scheme
    /// (composite Gauss-Legendre), for cross-checks.
    pub fn normalisation_gauss(&self) -> f64 {
        let unnorm = |x: f64| (-self.quartic * x.powi(4) + self.quadratic * x * x).exp();
        let panels = (2.0 * self.support).ceil() as usize;
        (0..panels)
            .map(|i| {
                let a = -self.support + i as f64 * 2.0 * self.support / panels as f64;
                let b = a + 2.0 * self.support / panels as f64;
                gauss_legendre(&unnorm, a, b, 24)
            })
            .sum()
    }
}

/// Stationary law of the magnetisation SDE: density ~ exp(-2 theta x^2 - x^4).
/// The zero-flux Fokker-Planck condition (a/2) rho' = (-2 a theta x - 2 a x^3) rho
/// holds with the a-dependence cancelling.
pub fn sde_stationary_density(theta: f64) -> Result<QuarticDensity> {
    QuarticDensity::new(1.0, -2.0 * theta)
}

/// mu_b: density ~ exp(-(4/3) x^4 + b x^2), the magnetisation law of the
/// critical Ising initial data with c = 2.
pub fn mu_b_density(b: f64) -> Result<QuarticDensity> {
    QuarticDensity::new(4.0 / 3.0, b)
}

/// Reaction potential derivative: V'(rho) = -(2 gamma - 1)(2 rho - 1)
/// + gamma^2 (2 rho - 1)^3.
pub fn v_prime(rho: f64, gamma: f64) -> f64 {
    let s = 2.0 * rho - 1.0;
    -(2.0 * gamma - 1.0) * s + gamma * gamma * s * s * s
}

pub const PDE_DEFAULT_GRID: usize = 512;
pub const PDE_DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PdeParams {
    pub gamma: f64,
    pub a: f64,
    pub dt: f64,
}

impl PdeParams {
    pub fn new(gamma: f64, a: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParam(format!("dt = {dt} must be > 0")));
        }
        Ok(PdeParams { gamma, a, dt })
    }
}

#[derive(Debug, Clone)]
pub struct PdeState {
    pub values: Vec<f64>,
    pub time: f64,
}

impl PdeState {
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// ||u - 1/2||_2^2 on the unit torus.
    pub fn l2_centered_sq(&self) -> f64 {
        self.values
            .iter()
            .map(|u| (u - 0.5) * (u - 0.5))
            .sum::<f64>()
            / self.values.len() as f64
    }
}

/// Solve du/dt = Laplacian u - a V'(u) on the torus by Strang splitting:
/// exact integrating-factor diffusion in Fourier space around a Heun step
/// for the reaction. The grid length must be a power of two. A step whose
/// values leave [-eps, 1+eps] (eps = 1e-9) is rejected as a step-size
/// failure.
pub fn pde_solve(rho0: &[f64], params: &PdeParams, t_end: f64) -> Result<PdeState> {
    let g = rho0.len();
    if !g.is_power_of_two() || g < 4 {
        return Err(Error::InvalidParam(format!(
            "grid size {g} must be a power of two >= 4"
        )));
    }
    if rho0.iter().any(|&u| !(0.0..=1.0).contains(&u)) {
        return Err(Error::InvalidParam("initial profile must lie in [0, 1]".into()));
    }
    if t_end < 0.0 {
        return Err(Error::InvalidParam("t_end must be >= 0".into()));
    }
    let mut state = PdeState {
        values: rho0.to_vec(),
        time: 0.0,
    };
    let mut remaining = t_end;
    while remaining > 1e-15 {
        let dt = params.dt.min(remaining);
        pde_step(&mut state, params, dt)?;
        remaining -= dt;
    }
    state.time = t_end;
    Ok(state)
}

const PDE_EPS: f64 = 1e-9;

fn pde_step(state: &mut PdeState, params: &PdeParams, dt: f64) -> Result<()> {
    diffuse(&mut state.values, 0.5 * dt)?;
    // Heun step for du/dt = -a V'(u)
    let a = params.a;
    let gamma = params.gamma;
    for u in state.values.iter_mut() {
        let k1 = -a * v_prime(*u, gamma);
        let pred = *u + dt * k1;
        let k2 = -a * v_prime(pred, gamma);
        *u += 0.5 * dt * (k1 + k2);
    }
    diffuse(&mut state.values, 0.5 * dt)?;
    if state
        .values
        .iter()
        .any(|&u| !(-PDE_EPS..=1.0 + PDE_EPS).contains(&u))
    {
        return Err(Error::Numerical(format!(
            "pde step rejected: values left [{:.1e}, 1 + {:.1e}] at t = {} (reduce dt)",
            -PDE_EPS, PDE_EPS, state.time
        )));
    }
    state.time += dt;
    Ok(())
}

/// Exact heat semigroup on the torus: mode k decays by e^{-4 pi^2 k^2 tau}.
fn diffuse(values: &mut [f64], tau: f64) -> Result<()> {
    let g = values.len();
    let mut re = values.to_vec();
    let mut im = vec![0.0; g];
    fft_in_place(&mut re, &mut im, false)?;
    for j in 0..g {
        let k = j.min(g - j) as f64;
        let mult = (-(2.0 * std::f64::consts::PI * k).powi(2) * tau).exp();
        re[j] *= mult;
        im[j] *= mult;
    }
    fft_in_place(&mut re, &mut im, true)?;
    values.copy_from_slice(&re);
    Ok(())
}

/// Fourier coefficients (cos_k, sin_k) of a grid profile, normalised as
/// (2/G) sum u_j cos(2 pi k j / G); used by tests to check exact mode decay.
pub fn profile_mode(values: &[f64], k: usize) -> (f64, f64) {
    let g = values.len();
    let mut c = 0.0;
    let mut s = 0.0;
    for (j, &u) in values.iter().enumerate() {
        let ang = 2.0 * std::f64::consts::PI * k as f64 * j as f64 / g as f64;
        c += u * ang.cos();
        s += u * ang.sin();
    }
    (2.0 * c / g as f64, 2.0 * s / g as f64)
}

/// Variance of the limiting fast-field coefficient on mode k:
/// 1/4 + a / (8 pi^2 k^2).
pub fn fast_mode_variance(k: u32, a: f64) -> f64 {
    0.25 + a / (8.0 * std::f64::consts::PI.powi(2) * (k * k) as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct FastModeSample {
    pub k: u32,
    pub cos: f64,
    pub sin: f64,
}

/// One draw of the limiting Gaussian fast field on the basis
/// {sqrt(2) cos(2 pi k .), sqrt(2) sin(2 pi k .)}, k = 1..k_max:
/// independent centred Gaussians with variance 1/4 + a/(8 pi^2 k^2),
/// independent across modes (and across calls: the field is white in time).
pub fn gaussian_fast_field<R: Rng>(k_max: u32, a: f64, rng: &mut R) -> Vec<FastModeSample> {
    (1..=k_max)
        .map(|k| {
            let sd = fast_mode_variance(k, a).sqrt();
            let zc: f64 = rng.sample(StandardNormal);
            let zs: f64 = rng.sample(StandardNormal);
            FastModeSample {
                k,
                cos: sd * zc,
                sin: sd * zs,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ln_gamma;
    use crate::stats::ks_statistic;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn sde_zero_reaction_is_constant() {
        let params = SdeParams::new(0.0, 1.0, 1e-2, 1.0).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let path = sde_simulate(&params, 0.7, &mut rng).unwrap();
        assert!(path.iter().all(|&y| y == 0.7));
    }

    #[test]
    fn sde_mean_reversion_with_positive_theta() {
        // horizons short enough that relaxation from y0 = 1 is still under way
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        let mut prev = f64::INFINITY;
        for &t_end in &[0.02, 0.05, 0.1] {
            let params = SdeParams::new(1.0, 5.0, 1e-3, t_end).unwrap();
            let mut acc = 0.0;
            let paths = 1000;
            for _ in 0..paths {
                let p = sde_simulate(&params, 1.0, &mut rng).unwrap();
                let y = *p.last().unwrap();
                acc += y * y;
            }
            let m2 = acc / paths as f64;
            assert!(m2 < prev, "E[Y^2] = {m2} not decreasing at t = {t_end}");
            prev = m2;
        }
    }

    #[test]
    fn sde_divergence_guard() {
        let params = SdeParams::new(1.0, 0.0, 1e-3, 0.1).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        assert!(matches!(
            sde_simulate(&params, 2000.0, &mut rng),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn sde_long_run_matches_stationary_density() {
        // T = 50, 1000 paths at theta = 0: KS against exp(-x^4)/Z below 0.05
        let params = SdeParams::new(1.0, 0.0, 1e-3, 50.0).unwrap();
        let target = sde_stationary_density(0.0).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
        let mut finals = Vec::with_capacity(1000);
        for _ in 0..1000 {
            let p = sde_simulate(&params, target.sample(&mut rng), &mut rng).unwrap();
            finals.push(*p.last().unwrap());
        }
        let ks = ks_statistic(&mut finals, |x| target.cdf(x));
        assert!(ks <= 0.05, "KS = {ks}");
    }

    #[test]
    fn sde_weak_self_consistency_in_step() {
        // halving h moves E[Y_1^2] by less than the MC error at 1e4 paths
        let estimate = |h: f64, seed: u64| {
            let params = SdeParams::new(1.0, 0.0, h, 1.0).unwrap();
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let paths = 10_000;
            let mut vals = Vec::with_capacity(paths);
            for _ in 0..paths {
                let p = sde_simulate(&params, 0.0, &mut rng).unwrap();
                let y = *p.last().unwrap();
                vals.push(y * y);
            }
            let mean = vals.iter().sum::<f64>() / paths as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (paths as f64 - 1.0);
            (mean, (var / paths as f64).sqrt())
        };
        let (m_coarse, se_coarse) = estimate(2e-3, 7);
        let (m_fine, se_fine) = estimate(1e-3, 8);
        let mc_err = 3.0 * (se_coarse * se_coarse + se_fine * se_fine).sqrt();
        assert!(
            (m_coarse - m_fine).abs() <= mc_err,
            "bias {} vs MC error {mc_err}",
            (m_coarse - m_fine).abs()
        );
    }

    #[test]
    fn stationary_density_normalisation_and_flux() {
        // theta = 0: Z = integral exp(-x^4) = 2 Gamma(5/4) via Lanczos
        let d = sde_stationary_density(0.0).unwrap();
        let gamma54 = ln_gamma(1.25).exp();
        assert!(
            (d.normalisation() - 2.0 * gamma54).abs() < 1e-8,
            "Z = {} vs {}",
            d.normalisation(),
            2.0 * gamma54
        );
        // symmetry
        for &x in &[0.3, 1.1, 2.4] {
            assert!((d.pdf(x) - d.pdf(-x)).abs() < 1e-14);
        }
        // zero-flux Fokker-Planck residual, rho' by central difference
        for &theta in &[1.0, -1.0] {
            let a = 1.0;
            let d = sde_stationary_density(theta).unwrap();
            let h = 2e-6;
            let mut x = -3.0;
            while x <= 3.0 {
                let rho_p = (d.pdf(x + h) - d.pdf(x - h)) / (2.0 * h);
                let drift = -2.0 * a * theta * x - 2.0 * a * x * x * x;
                let flux = 0.5 * a * rho_p - drift * d.pdf(x);
                assert!(flux.abs() < 1e-10, "flux {flux} at x = {x}, theta = {theta}");
                x += 0.25;
            }
        }
    }

    #[test]
    fn mu_b_density_properties() {
        let d0 = mu_b_density(0.0).unwrap();
        // even
        for &x in &[0.2, 0.9, 1.7] {
            assert!((d0.pdf(x) - d0.pdf(-x)).abs() < 1e-14);
        }
        // two quadrature schemes agree on Z
        assert!(
            (d0.normalisation() - d0.normalisation_gauss()).abs() < 1e-8,
            "{} vs {}",
            d0.normalisation(),
            d0.normalisation_gauss()
        );
        // fatter tails as b grows
        let mut prev = 0.0;
        for &b in &[-1.0, 0.0, 1.0] {
            let var = mu_b_density(b).unwrap().moment(2);
            assert!(var > prev);
            prev = var;
        }
    }

    #[test]
    fn quartic_sampler_moments() {
        let d = mu_b_density(0.0).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let draws = 200_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let x = d.sample(&mut rng);
            acc += x * x;
        }
        let m2 = acc / draws as f64;
        let target = d.moment(2);
        assert!((m2 - target).abs() < 0.01, "sampled {m2} vs {target}");
    }

    #[test]
    fn pde_fixed_point_and_exact_heat_decay() {
        // rho = 1/2 at gamma = 1/2 is stationary
        let params = PdeParams::new(0.5, 1.0, 1e-3).unwrap();
        let flat = vec![0.5; 64];
        let out = pde_solve(&flat, &params, 0.5).unwrap();
        for &u in &out.values {
            assert!((u - 0.5).abs() < 1e-13);
        }

        // a = 0: each mode decays exactly by the heat multiplier
        let g = 128usize;
        let rho0: Vec<f64> = (0..g)
            .map(|j| {
                let x = j as f64 / g as f64;
                0.5 + 0.2 * (2.0 * std::f64::consts::PI * x).cos()
                    + 0.1 * (2.0 * std::f64::consts::PI * 3.0 * x).sin()
            })
            .collect();
        let params = PdeParams::new(0.5, 0.0, 1e-3).unwrap();
        let t = 0.037;
        let out = pde_solve(&rho0, &params, t).unwrap();
        for &k in &[1usize, 3] {
            let (c0, s0) = profile_mode(&rho0, k);
            let (c1, s1) = profile_mode(&out.values, k);
            let decay = (-(2.0 * std::f64::consts::PI * k as f64).powi(2) * t).exp();
            assert!((c1 - c0 * decay).abs() < 1e-11, "mode {k} cos");
            assert!((s1 - s0 * decay).abs() < 1e-11, "mode {k} sin");
        }
        // k = 0 (mass) conserved exactly when a = 0
        assert!(
            (out.mass() - rho0.iter().sum::<f64>() / g as f64).abs() < 1e-13
        );
    }

    #[test]
    fn pde_energy_dissipation_and_decay_bound() {
        let g = 256usize;
        let rho0: Vec<f64> = (0..g)
            .map(|j| {
                let x = j as f64 / g as f64;
                0.5 + 0.3 * (2.0 * std::f64::consts::PI * x).cos()
            })
            .collect();
        let params = PdeParams::new(0.5, 1.0, 1e-3).unwrap();
        let mut state = PdeState {
            values: rho0,
            time: 0.0,
        };
        let mut prev = state.l2_centered_sq();
        let mut t = 0.0;
        while t < 2.0 {
            pde_step(&mut state, &params, params.dt).unwrap();
            t += params.dt;
            let cur = state.l2_centered_sq();
            assert!(cur <= prev + 1e-12, "energy grew at t = {t}");
            prev = cur;
            // hydrodynamic decay bound along the way
            if t >= 0.5 {
                assert!(cur <= 1.0 / (2.0 * t) + 1e-9, "{cur} > 1/(2t) at t = {t}");
            }
        }
    }

    #[test]
    fn pde_input_validation() {
        let params = PdeParams::new(0.5, 1.0, 1e-3).unwrap();
        assert!(pde_solve(&vec![0.5; 100], &params, 0.1).is_err()); // not a power of two
        assert!(pde_solve(&vec![1.5; 64], &params, 0.1).is_err()); // outside [0,1]
    }

    #[test]
    fn fast_field_variances() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(21);
        let draws = 1_000_000usize;
        let a = 1.0;
        let mut acc = [0.0f64; 3];
        let mut cross = 0.0;
        let mut acc_a0 = 0.0;
        for _ in 0..draws {
            let s = gaussian_fast_field(3, a, &mut rng);
            for (i, m) in s.iter().enumerate() {
                acc[i] += m.cos * m.cos;
            }
            cross += s[0].cos * s[1].cos;
            let z = gaussian_fast_field(1, 0.0, &mut rng);
            acc_a0 += z[0].cos * z[0].cos;
        }
        for (i, &sum) in acc.iter().enumerate() {
            let k = (i + 1) as u32;
            let var = sum / draws as f64;
            let target = fast_mode_variance(k, a);
            let se = target * (2.0 / draws as f64).sqrt();
            assert!(
                (var - target).abs() <= 3.0 * se,
                "k = {k}: var {var} vs {target}"
            );
        }
        // k = 1, a = 1 target value 0.26266...
        assert!((fast_mode_variance(1, 1.0) - 0.2626651).abs() < 1e-6);
        // cross-mode covariance statistically zero
        let se_cross =
            (fast_mode_variance(1, a) * fast_mode_variance(2, a) / draws as f64).sqrt();
        assert!((cross / draws as f64).abs() <= 3.0 * se_cross);
        // a = 0: variance exactly 1/4
        let var0 = acc_a0 / draws as f64;
        let se0 = 0.25 * (2.0 / draws as f64).sqrt();
        assert!((var0 - 0.25).abs() <= 3.0 * se0);
    }
}
