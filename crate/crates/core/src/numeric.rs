//! Shared numerical kernels: log-gamma, log-sum-exp, quadrature and a
//! power-of-two FFT. Everything here is dependency-free and deterministic.

use crate::{Error, Result};

/// Lanczos approximation (g = 7, 9 coefficients), relative error ~2e-10
/// over the positive reals, which is all we use it for.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection formula
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let base = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * base.ln() - base + sum.ln()
}

/// log of the binomial coefficient C(n, k).
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// log(sum(exp(w_i))) without overflow. Empty input gives -inf.
pub fn log_sum_exp(weights: &[f64]) -> f64 {
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = weights.iter().map(|w| (w - max).exp()).sum();
    max + sum.ln()
}

/// Adaptive Simpson quadrature on [a, b] to absolute tolerance `tol`.
/// The first few levels are always subdivided so narrow features between
/// the initial sample points cannot be missed.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50, 6)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    forced: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || (forced == 0 && delta.abs() <= 15.0 * tol) {
        left + right + delta / 15.0
    } else {
        let forced = forced.saturating_sub(1);
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, forced)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, forced)
    }
}

/// Fixed-order Gauss-Legendre rule, nodes by Newton iteration on P_n.
/// Used as the second, independent quadrature scheme.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, order: usize) -> f64 {
    let (nodes, weights) = legendre_nodes(order);
    let c = 0.5 * (b - a);
    let d = 0.5 * (b + a);
    nodes
        .iter()
        .zip(weights.iter())
        .map(|(&x, &w)| w * f(c * x + d))
        .sum::<f64>()
        * c
}

fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// In-place radix-2 FFT (decimation in time). Length must be a power of two.
/// The inverse transform includes the 1/n normalisation.
pub fn fft_in_place(re: &mut [f64], im: &mut [f64], inverse: bool) -> Result<()> {
    let n = re.len();
    if n != im.len() {
        return Err(Error::Numerical("fft: mismatched buffer lengths".into()));
    }
    if !n.is_power_of_two() {
        return Err(Error::Numerical(format!(
            "fft: length {n} is not a power of two"
        )));
    }
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 0..n {
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
        let mut mask = n >> 1;
        while mask > 0 && j & mask != 0 {
            j ^= mask;
            mask >>= 1;
        }
        j |= mask;
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2usize;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        let mut start = 0;
        while start < n {
            let mut cr = 1.0;
            let mut ci = 0.0;
            for k in 0..len / 2 {
                let u = start + k;
                let v = start + k + len / 2;
                let tr = re[v] * cr - im[v] * ci;
                let ti = re[v] * ci + im[v] * cr;
                re[v] = re[u] - tr;
                im[v] = im[u] - ti;
                re[u] += tr;
                im[u] += ti;
                let ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
            start += len;
        }
        len <<= 1;
    }
    if inverse {
        let inv = 1.0 / n as f64;
        for x in re.iter_mut() {
            *x *= inv;
        }
        for x in im.iter_mut() {
            *x *= inv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        // Gamma(5) = 24, Gamma(1/2) = sqrt(pi)
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-12);
        // Gamma(5/4) = 0.9064024770554770...
        assert!((ln_gamma(1.25) - 0.906_402_477_055_477_0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ln_choose_small() {
        assert!((ln_choose(10, 3) - 120.0f64.ln()).abs() < 1e-10);
        assert_eq!(ln_choose(4, 7), f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let w = [0.3f64, -1.0, 2.5];
        let direct: f64 = w.iter().map(|x| x.exp()).sum();
        assert!((log_sum_exp(&w) - direct.ln()).abs() < 1e-14);
        // huge weights do not overflow
        let w = [1000.0, 1000.0];
        assert!((log_sum_exp(&w) - (1000.0 + 2.0f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn quadrature_gaussian_moment() {
        // int exp(-x^2) over R = sqrt(pi)
        let f = |x: f64| (-x * x).exp();
        let simpson = integrate(&f, -8.0, 8.0, 1e-12);
        let gl: f64 = (0..16)
            .map(|i| {
                let a = -8.0 + i as f64;
                gauss_legendre(&f, a, a + 1.0, 20)
            })
            .sum();
        let target = std::f64::consts::PI.sqrt();
        assert!((simpson - target).abs() < 1e-10);
        assert!((gl - target).abs() < 1e-10);
    }

    #[test]
    fn fft_roundtrip_and_mode() {
        let n = 64;
        // pure cosine in mode 3 -> spectrum peaks at k = 3 and n - 3
        let mut re: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 3.0 * i as f64 / n as f64).cos())
            .collect();
        let orig = re.clone();
        let mut im = vec![0.0; n];
        fft_in_place(&mut re, &mut im, false).unwrap();
        assert!((re[3] - n as f64 / 2.0).abs() < 1e-9);
        assert!((re[n - 3] - n as f64 / 2.0).abs() < 1e-9);
        fft_in_place(&mut re, &mut im, true).unwrap();
        for (a, b) in re.iter().zip(orig.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
