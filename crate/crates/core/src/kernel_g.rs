//! The translation-invariant pair-correlation kernel g_{delta,b}, built
//! from its per-mode quadratic.
//!
//! For each Fourier mode ell the coefficient c solves
//!
//! ```text
//! (pi^2 ell^2 + b/2) c^2 - (4 pi^2 ell^2 + 2 b (1 + 2 delta)) c + 16 delta b = 0
//! ```
//!
//! and lambda^-_ell is the smaller root, selected by continuity (it
//! vanishes as delta -> 0 and as b -> 0). The kernel is
//! g(x) = lambda^-_0 + sum_{ell >= 1} lambda^-_ell 2 cos(2 pi ell x).

use crate::{Error, Result};

const PI: f64 = std::f64::consts::PI;

/// Both roots (lambda_minus, lambda_plus) of the per-mode quadratic.
///
/// ell = 0 uses the b-independent closed form
/// `2 (1 + 2 delta) -+ 2 |1 - 2 delta|`, so that lambda^-_0 = min{8 delta, 4}.
/// For ell >= 1 the smaller root is computed in the numerically stable
/// form 2C / (B + sqrt(D)).
pub fn mode_coefficient(ell: u64, delta: f64, b: f64) -> Result<(f64, f64)> {
    if b < 0.0 {
        return Err(Error::InvalidParam(format!("b = {b} must be >= 0")));
    }
    if ell == 0 {
        let lo = 2.0 * (1.0 + 2.0 * delta) - 2.0 * (1.0 - 2.0 * delta).abs();
        let hi = 2.0 * (1.0 + 2.0 * delta) + 2.0 * (1.0 - 2.0 * delta).abs();
        return Ok((lo, hi));
    }
    let l2 = (ell * ell) as f64;
    let quad_a = PI * PI * l2 + 0.5 * b;
    let quad_b = 4.0 * PI * PI * l2 + 2.0 * b * (1.0 + 2.0 * delta);
    let quad_c = 16.0 * delta * b;
    let mut disc = quad_b * quad_b - 4.0 * quad_a * quad_c;
    if disc < 0.0 {
        // does not occur for this one-parameter family; tolerate round-off only
        if disc > -1e-9 * quad_b * quad_b {
            disc = 0.0;
        } else {
            return Err(Error::Numerical(format!(
                "negative discriminant {disc} at ell = {ell}, delta = {delta}, b = {b}"
            )));
        }
    }
    let sq = disc.sqrt();
    let minus = if quad_b + sq > 0.0 {
        2.0 * quad_c / (quad_b + sq)
    } else {
        0.0
    };
    let plus = (quad_b + sq) / (2.0 * quad_a);
    Ok((minus, plus))
}

/// Truncated Fourier representation of g_{delta,b}.
#[derive(Debug, Clone)]
pub struct KernelG {
    pub delta: f64,
    pub b: f64,
    /// mean coefficient lambda^-_0
    pub lambda0: f64,
    /// lambda^-_ell for 1 <= ell <= truncation, coeffs[ell - 1]
    pub coeffs: Vec<f64>,
    pub truncation: usize,
}

pub const DEFAULT_TRUNCATION: usize = 10_000;

impl KernelG {
    pub fn new(delta: f64, b: f64, truncation: usize) -> Result<Self> {
        if !(-1.0..1.0).contains(&delta) {
            return Err(Error::InvalidParam(format!("delta = {delta} outside (-1, 1)")));
        }
        if truncation == 0 {
            return Err(Error::InvalidParam("truncation must be >= 1".into()));
        }
        let (lambda0, _) = mode_coefficient(0, delta, b)?;
        let mut coeffs = Vec::with_capacity(truncation);
        for ell in 1..=truncation {
            coeffs.push(mode_coefficient(ell as u64, delta, b)?.0);
        }
        Ok(KernelG {
            delta,
            b,
            lambda0,
            coeffs,
            truncation,
        })
    }

    pub fn with_default_truncation(delta: f64, b: f64) -> Result<Self> {
        Self::new(delta, b, DEFAULT_TRUNCATION)
    }

    /// g(x) = lambda0 + sum lambda_ell 2 cos(2 pi ell x). Even in x.
    pub fn evaluate(&self, x: f64) -> f64 {
        let mut acc = self.lambda0;
        for (i, &lam) in self.coeffs.iter().enumerate() {
            let ell = (i + 1) as f64;
            acc += lam * 2.0 * (2.0 * PI * ell * x).cos();
        }
        acc
    }

    /// Upper bound on the discarded series sum_{ell > L} 2 lambda_ell.
    /// From lambda_ell <= 8 delta b / (2 pi^2 ell^2) (positive-delta branch),
    /// the tail is at most 8 |delta| b / (pi^2 L).
    pub fn tail_bound(&self) -> f64 {
        8.0 * self.delta.abs() * self.b / (PI * PI * self.truncation as f64)
    }

    /// Tabulated values g((d mod n) / n) for d = 0..n, the form consumed by
    /// the lattice measures.
    pub fn table(&self, n: usize) -> Vec<f64> {
        (0..n).map(|d| self.evaluate(d as f64 / n as f64)).collect()
    }

    /// L2 norm of g via Parseval: ||g||_2^2 = lambda0^2 + 2 sum lambda_ell^2.
    pub fn l2_norm(&self) -> f64 {
        (self.lambda0.powi(2) + 2.0 * self.coeffs.iter().map(|l| l * l).sum::<f64>()).sqrt()
    }

    /// L2 norm of the mean-zero part g^0.
    pub fn l2_norm_mean_zero(&self) -> f64 {
        (2.0 * self.coeffs.iter().map(|l| l * l).sum::<f64>()).sqrt()
    }

    fn coefficient(&self, ell: usize) -> Result<f64> {
        if ell == 0 {
            Ok(self.lambda0)
        } else if ell <= self.truncation {
            Ok(self.coeffs[ell - 1])
        } else {
            mode_coefficient(ell as u64, self.delta, self.b).map(|(lo, _)| lo)
        }
    }
}

/// Residual of the per-mode weak-form equation at lambda^-_ell:
/// c (-4 pi^2 ell^2 - 2 b (1 + 2 delta)) + 16 delta b + (pi^2 ell^2 + b/2) c^2.
/// Zero to round-off when the roots are correct.
pub fn weak_form_residual(kernel: &KernelG, ell: usize) -> Result<f64> {
    let c = kernel.coefficient(ell)?;
    let l2 = (ell * ell) as f64;
    let b = kernel.b;
    let delta = kernel.delta;
    Ok(c * (-4.0 * PI * PI * l2 - 2.0 * b * (1.0 + 2.0 * delta))
        + 16.0 * delta * b
        + (PI * PI * l2 + 0.5 * b) * c * c)
}

/// Result of the derivative-jump measurement at the origin.
#[derive(Debug, Clone, Copy)]
pub struct JumpCheck {
    pub measured: f64,
    pub target: f64,
    pub relative_error: f64,
}

/// Measure the one-sided derivative jump g'(0+) - g'(1-) from the truncated
/// series and compare with the target -16 delta b.
///
/// The derivative series is Cesaro-regularised (Fejer weights kill the
/// Gibbs oscillation), evaluated at x = k0/L and 1 - k0/L, and Richardson
/// extrapolation across truncations L and L/2 removes the O(x) bias of the
/// evaluation points.
pub fn jump_condition_check(kernel: &KernelG) -> Result<JumpCheck> {
    let l = kernel.truncation;
    if l < 1000 {
        return Err(Error::InvalidParam(
            "jump_condition_check needs truncation >= 1000".into(),
        ));
    }
    let j_full = one_sided_jump(kernel, l);
    let j_half = one_sided_jump(kernel, l / 2);
    let measured = 2.0 * j_full - j_half;
    let target = -16.0 * kernel.delta * kernel.b;
    let relative_error = if target != 0.0 {
        ((measured - target) / target).abs()
    } else {
        measured.abs()
    };
    Ok(JumpCheck {
        measured,
        target,
        relative_error,
    })
}

fn one_sided_jump(kernel: &KernelG, trunc: usize) -> f64 {
    const K0: f64 = 32.0;
    let x = K0 / trunc as f64;
    fejer_derivative(kernel, trunc, x) - fejer_derivative(kernel, trunc, 1.0 - x)
}

fn fejer_derivative(kernel: &KernelG, trunc: usize, x: f64) -> f64 {
    let mut acc = 0.0;
    for ell in 1..=trunc.min(kernel.truncation) {
        let w = 1.0 - ell as f64 / (trunc as f64 + 1.0);
        let lam = kernel.coeffs[ell - 1];
        acc -= w * lam * 4.0 * PI * ell as f64 * (2.0 * PI * ell as f64 * x).sin();
    }
    acc
}

/// Per-mode covariance identity linking g to the fast-field variance at the
/// critical coupling delta = 1/2, b = a:
/// 1/4 + (a/2) (4 pi^2 ell^2)^{-1} = (4 - lambda^-_ell)^{-1}.
/// Returns (lhs, rhs).
pub fn covariance_identity(ell: u64, a: f64) -> Result<(f64, f64)> {
    let (lam, _) = mode_coefficient(ell, 0.5, a)?;
    let l2 = (ell * ell) as f64;
    let lhs = 0.25 + 0.5 * a / (4.0 * PI * PI * l2);
    let rhs = 1.0 / (4.0 - lam);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate;

    #[test]
    fn mode_coefficient_examples() {
        // delta = 0: smaller root vanishes for every ell >= 1 and any b
        for ell in [1u64, 2, 17, 1000] {
            for b in [0.0, 0.5, 3.0] {
                let (lo, _) = mode_coefficient(ell, 0.0, b).unwrap();
                assert_eq!(lo, 0.0);
            }
        }
        // ell = 0, delta = 0.45, b = 1: min{8 * 0.45, 4} = 3.6
        let (l0, _) = mode_coefficient(0, 0.45, 1.0).unwrap();
        assert!((l0 - 3.6).abs() < 1e-14);
        // large delta saturates at 4
        let (l0, _) = mode_coefficient(0, 0.8, 1.0).unwrap();
        assert!((l0 - 4.0).abs() < 1e-14);

        // root substitution residual at (0.1, 1), ell = 1
        let (lo, hi) = mode_coefficient(1, 0.1, 1.0).unwrap();
        assert!(lo < hi);
        for c in [lo, hi] {
            let res = (PI * PI + 0.5) * c * c - (4.0 * PI * PI + 2.0 * 1.2) * c + 1.6;
            assert!(res.abs() <= 1e-12, "residual {res}");
        }
    }

    #[test]
    fn weak_form_residual_scales() {
        for &(delta, b) in &[(0.45, 1.0), (0.49, 0.2), (0.1, 3.0)] {
            let k = KernelG::new(delta, b, 2000).unwrap();
            for ell in 0..=2000usize {
                let r = weak_form_residual(&k, ell).unwrap();
                let tol = 1e-10 * (1.0 + 4.0 * PI * PI * (ell * ell) as f64);
                assert!(r.abs() <= tol, "ell={ell}: residual {r} > {tol}");
            }
        }
        // delta = 0: residual identically zero
        let k = KernelG::new(0.0, 1.0, 100).unwrap();
        for ell in 0..=100usize {
            assert_eq!(weak_form_residual(&k, ell).unwrap(), 0.0);
        }
    }

    #[test]
    fn evaluate_even_and_mean() {
        let k = KernelG::new(0.45, 1.0, 4000).unwrap();
        for &x in &[0.1, 0.25, 0.33, 0.49] {
            assert!((k.evaluate(x) - k.evaluate(1.0 - x)).abs() < 1e-9);
        }
        // integral over the torus equals the stored mean coefficient
        let mean = integrate(&|x| k.evaluate(x), 0.0, 1.0, 1e-10);
        assert!(
            (mean - k.lambda0).abs() < 1e-8,
            "mean {mean} vs lambda0 {}",
            k.lambda0
        );
        // delta = 0 kernel vanishes pointwise
        let z = KernelG::new(0.0, 1.0, 500).unwrap();
        for &x in &[0.0, 0.2, 0.7] {
            assert_eq!(z.evaluate(x), 0.0);
        }
    }

    #[test]
    fn coefficients_positive_and_square_summable() {
        let k = KernelG::new(0.45, 1.0, 100_000).unwrap();
        let mut max_scaled: f64 = 0.0;
        for (i, &lam) in k.coeffs.iter().enumerate() {
            let ell = (i + 1) as f64;
            assert!(lam >= 0.0);
            max_scaled = max_scaled.max(lam * ell * ell);
        }
        // lambda_ell * ell^2 stays bounded (O(1/ell^2) tail)
        assert!(max_scaled <= 8.0 * 0.45 * 1.0 / (2.0 * PI * PI) + 1e-9);
    }

    #[test]
    fn continuity_at_zero_coupling() {
        // ||g0|| -> 0 monotonically as b -> 0 at delta = 0.45
        let mut prev = f64::INFINITY;
        for &b in &[1.0, 0.1, 0.01, 0.001] {
            let k = KernelG::new(0.45, b, 2000).unwrap();
            let norm = k.l2_norm_mean_zero();
            assert!(norm < prev);
            prev = norm;
        }
        assert!(prev < 1e-2);
        // ||g|| -> 0 as delta -> 0 at b = 1
        let mut prev = f64::INFINITY;
        for &delta in &[0.4, 0.1, 0.01, 0.001] {
            let k = KernelG::new(delta, 1.0, 2000).unwrap();
            let norm = k.l2_norm();
            assert!(norm < prev);
            prev = norm;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn jump_condition_examples() {
        // delta = 0 -> zero jump
        let k = KernelG::new(0.0, 1.0, 2000).unwrap();
        let jc = jump_condition_check(&k).unwrap();
        assert_eq!(jc.measured, 0.0);
        assert_eq!(jc.target, 0.0);

        // delta = 0.45, b = 1, L = 10^4: within 1% of -7.2, negative sign
        let k = KernelG::new(0.45, 1.0, 10_000).unwrap();
        let jc = jump_condition_check(&k).unwrap();
        assert!((jc.target + 7.2).abs() < 1e-12);
        assert!(jc.measured < 0.0);
        assert!(jc.relative_error < 0.01, "relative error {}", jc.relative_error);
    }

    #[test]
    fn covariance_identity_exact_at_critical_point() {
        for ell in 1..=50u64 {
            let (lhs, rhs) = covariance_identity(ell, 1.0).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "ell={ell}: {lhs} vs {rhs}");
            // operator positivity: 4 - lambda_ell > 0
            let (lam, _) = mode_coefficient(ell, 0.5, 1.0).unwrap();
            assert!(4.0 - lam > 0.0);
        }
        // near the critical point positivity persists
        for ell in 1..=50u64 {
            let (lam, _) = mode_coefficient(ell, 0.49, 1.0).unwrap();
            assert!(4.0 - lam > 0.0);
        }
    }
}
