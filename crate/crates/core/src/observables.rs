//! Scalar and field observables: the slow magnetisation field, the
//! Gaussian-scaled fast field, homogeneous-polynomial W statistics, the
//! quadratic-variation rate, empirical measures and the weak distance.

use crate::lattice::{glauber_rate, magnetisation_stats, Configuration, Params};
use crate::{Error, Result};

/// Test function on the torus. Basis elements are evaluated in closed form;
/// a tabulated function carries its values on a uniform grid (H(i/G))_{i<G}.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Constant,
    /// sqrt(2) cos(2 pi k x), k >= 1
    Cos(u32),
    /// sqrt(2) sin(2 pi k x), k >= 1
    Sin(u32),
    Tabulated(Vec<f64>),
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        match self {
            TestFunction::Constant => 1.0,
            TestFunction::Cos(k) => std::f64::consts::SQRT_2 * (two_pi * *k as f64 * x).cos(),
            TestFunction::Sin(k) => std::f64::consts::SQRT_2 * (two_pi * *k as f64 * x).sin(),
            TestFunction::Tabulated(v) => {
                let g = v.len();
                let idx = ((x.rem_euclid(1.0)) * g as f64).round() as usize % g;
                v[idx]
            }
        }
    }

    /// Exact discrete mean (1/n) sum_i H(i/n). Basis elements with k >= 1
    /// (and k not a multiple of n) have mean exactly zero; a tabulated
    /// function reports its actual mean.
    pub fn discrete_mean(&self, n: usize) -> f64 {
        match self {
            TestFunction::Constant => 1.0,
            TestFunction::Cos(k) | TestFunction::Sin(k) => {
                if *k as usize % n == 0 {
                    match self {
                        TestFunction::Cos(_) => std::f64::consts::SQRT_2,
                        _ => 0.0,
                    }
                } else {
                    0.0
                }
            }
            TestFunction::Tabulated(v) => v.iter().sum::<f64>() / v.len() as f64,
        }
    }

    /// True when the discrete mean vanishes for the given lattice size.
    pub fn is_mean_zero(&self, n: usize) -> bool {
        self.discrete_mean(n) == 0.0
    }
}

/// Slow field: n^{-3/4} sum_i H(i/n) etabar_i. With H = 1 this is the
/// re-scaled magnetisation Y^n.
pub fn field_y34(config: &Configuration, h: &TestFunction) -> f64 {
    let n = config.n();
    raw_field(config, h) / (n as f64).powf(0.75)
}

/// Fast field with Gaussian scaling: n^{-1/2} sum_i H(i/n) etabar_i.
/// Meaningful for mean-zero H; the raw value is returned regardless.
pub fn field_fast(config: &Configuration, h: &TestFunction) -> f64 {
    let n = config.n();
    raw_field(config, h) / (n as f64).sqrt()
}

fn raw_field(config: &Configuration, h: &TestFunction) -> f64 {
    let n = config.n();
    let mut acc = 0.0;
    for i in 0..n {
        acc += h.eval(i as f64 / n as f64) * config.eta_bar(i as i64);
    }
    acc
}

/// Mean-zero recentred occupations: etabar_i - m/n where m = sum etabar_j.
/// The components sum to zero by construction.
pub fn centered_mean_zero(config: &Configuration) -> Vec<f64> {
    let n = config.n();
    let mean = magnetisation_stats(config).mean;
    (0..n).map(|i| config.eta_bar(i as i64) - mean).collect()
}

/// Tensor argument of a W statistic: either dense values on T_n^p
/// (row-major, only sensible for small n) or a rank-one product of per-axis
/// tables, which is the form used at scale.
#[derive(Debug, Clone)]
pub enum PhiTensor {
    Dense { n: usize, p: usize, data: Vec<f64> },
    Product(Vec<Vec<f64>>),
}

impl PhiTensor {
    pub fn dense(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n.pow(p as u32) {
            return Err(Error::InvalidParam(format!(
                "dense tensor needs {} entries, got {}",
                n.pow(p as u32),
                data.len()
            )));
        }
        // normalise: symmetric in the last p-1 indices
        let mut t = PhiTensor::Dense { n, p, data };
        t.symmetrize_tail();
        Ok(t)
    }

    pub fn product(factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParam("product tensor needs >= 1 factor".into()));
        }
        let n = factors[0].len();
        if factors.iter().any(|f| f.len() != n) {
            return Err(Error::InvalidParam("product factors must share a length".into()));
        }
        Ok(PhiTensor::Product(factors))
    }

    pub fn order(&self) -> usize {
        match self {
            PhiTensor::Dense { p, .. } => *p,
            PhiTensor::Product(f) => f.len(),
        }
    }

    pub fn lattice_size(&self) -> usize {
        match self {
            PhiTensor::Dense { n, .. } => *n,
            PhiTensor::Product(f) => f[0].len(),
        }
    }

    #[inline]
    pub fn value(&self, idx: &[usize]) -> f64 {
        match self {
            PhiTensor::Dense { n, data, .. } => {
                let mut flat = 0usize;
                for &i in idx {
                    flat = flat * n + i;
                }
                data[flat]
            }
            PhiTensor::Product(f) => idx.iter().zip(f.iter()).map(|(&i, fk)| fk[i]).product(),
        }
    }

    fn symmetrize_tail(&mut self) {
        if let PhiTensor::Dense { n, p, data } = self {
            let (n, p) = (*n, *p);
            if p == 3 {
                for i1 in 0..n {
                    for i2 in 0..n {
                        for i3 in 0..i2 {
                            let a = (i1 * n + i2) * n + i3;
                            let b = (i1 * n + i3) * n + i2;
                            let avg = 0.5 * (data[a] + data[b]);
                            data[a] = avg;
                            data[b] = avg;
                        }
                    }
                }
            }
            // p <= 2: nothing to symmetrize; p = 4 dense is rejected upstream
        }
    }
}

/// Specification of a W^{J,phi}_p statistic: offset set J applied to the
/// first index, number of free indices p, and the tensor phi.
#[derive(Debug, Clone)]
pub struct WSpec {
    pub offsets: Vec<i64>,
    pub phi: PhiTensor,
}

/// W^{J,phi}_p = n^{-(p-1)} sum' etabar^m_{i1+J} etabar^m_{i2} ...
/// etabar^m_{ip} phi_{i1..ip}, the primed sum running over tuples for which
/// the sites {i1+j : j in J} and i2..ip never coincide (the vanishing
/// diagonal convention, enforced here by construction).
///
/// p in {1,2,3} is evaluated by inclusion-exclusion over coinciding
/// indices; p = 4 falls back to direct loops; p > 4 is rejected.
pub fn w_statistic(config: &Configuration, spec: &WSpec) -> Result<f64> {
    let n = config.n();
    let p = spec.phi.order();
    if p == 0 || p > 4 {
        return Err(Error::InvalidParam(format!("w_statistic: p = {p} not in 1..=4")));
    }
    if spec.phi.lattice_size() != n {
        return Err(Error::InvalidParam(
            "w_statistic: tensor size does not match the configuration".into(),
        ));
    }
    // offsets must stay distinct modulo n
    let mut reduced: Vec<usize> = spec.offsets.iter().map(|&j| config.wrap(j)).collect();
    reduced.sort_unstable();
    reduced.dedup();
    if reduced.len() != spec.offsets.len() {
        return Err(Error::InvalidParam(
            "w_statistic: offsets in J must be distinct modulo n".into(),
        ));
    }

    let v = centered_mean_zero(config);
    let js: Vec<usize> = spec.offsets.iter().map(|&j| config.wrap(j)).collect();
    // etabar^m_{i+J}
    let pj: Vec<f64> = (0..n)
        .map(|i1| js.iter().map(|&j| v[(i1 + j) % n]).product())
        .collect();
    let phi = &spec.phi;

    let value = match p {
        1 => (0..n).map(|i1| pj[i1] * phi.value(&[i1])).sum::<f64>(),
        2 => {
            let full: f64 = match phi {
                PhiTensor::Product(f) => {
                    let a1: f64 = (0..n).map(|i| pj[i] * f[0][i]).sum();
                    let m2: f64 = (0..n).map(|i| v[i] * f[1][i]).sum();
                    a1 * m2
                }
                _ => {
                    let mut s = 0.0;
                    for i1 in 0..n {
                        for i2 in 0..n {
                            s += pj[i1] * v[i2] * phi.value(&[i1, i2]);
                        }
                    }
                    s
                }
            };
            let mut coll = 0.0;
            for i1 in 0..n {
                for &j in &js {
                    let k = (i1 + j) % n;
                    coll += pj[i1] * v[k] * phi.value(&[i1, k]);
                }
            }
            (full - coll) / n as f64
        }
        3 => {
            // inclusion-exclusion over the events {i2 = i3},
            // {i2 = i1 + j} and {i3 = i1 + j}
            let full: f64 = match phi {
                PhiTensor::Product(f) => {
                    let a1: f64 = (0..n).map(|i| pj[i] * f[0][i]).sum();
                    let m2: f64 = (0..n).map(|i| v[i] * f[1][i]).sum();
                    let m3: f64 = (0..n).map(|i| v[i] * f[2][i]).sum();
                    a1 * m2 * m3
                }
                _ => {
                    let mut s = 0.0;
                    for i1 in 0..n {
                        for i2 in 0..n {
                            for i3 in 0..n {
                                s += pj[i1] * v[i2] * v[i3] * phi.value(&[i1, i2, i3]);
                            }
                        }
                    }
                    s
                }
            };
            let mut a_eq = 0.0; // i2 = i3
            for i1 in 0..n {
                for k in 0..n {
                    a_eq += pj[i1] * v[k] * v[k] * phi.value(&[i1, k, k]);
                }
            }
            let mut b_eq = 0.0; // i2 = i1 + j
            let mut c_eq = 0.0; // i3 = i1 + j
            for i1 in 0..n {
                for &j in &js {
                    let k = (i1 + j) % n;
                    for other in 0..n {
                        b_eq += pj[i1] * v[k] * v[other] * phi.value(&[i1, k, other]);
                        c_eq += pj[i1] * v[other] * v[k] * phi.value(&[i1, other, k]);
                    }
                }
            }
            let mut t_eq = 0.0; // i2 = i3 = i1 + j
            for i1 in 0..n {
                for &j in &js {
                    let k = (i1 + j) % n;
                    t_eq += pj[i1] * v[k] * v[k] * phi.value(&[i1, k, k]);
                }
            }
            let mut bc_eq = 0.0; // i2 = i1+j, i3 = i1+j'
            for i1 in 0..n {
                for &j in &js {
                    for &jp in &js {
                        let k2 = (i1 + j) % n;
                        let k3 = (i1 + jp) % n;
                        bc_eq += pj[i1] * v[k2] * v[k3] * phi.value(&[i1, k2, k3]);
                    }
                }
            }
            (full - a_eq - b_eq - c_eq + t_eq + bc_eq) / (n as f64).powi(2)
        }
        4 => {
            if n > 64 {
                return Err(Error::InvalidParam(
                    "w_statistic: p = 4 direct loops limited to n <= 64".into(),
                ));
            }
            let mut s = 0.0;
            for i1 in 0..n {
                for i2 in 0..n {
                    for i3 in 0..n {
                        if i3 == i2 {
                            continue;
                        }
                        for i4 in 0..n {
                            if i4 == i2 || i4 == i3 {
                                continue;
                            }
                            let clash = js.iter().any(|&j| {
                                let k = (i1 + j) % n;
                                k == i2 || k == i3 || k == i4
                            });
                            if clash {
                                continue;
                            }
                            s += pj[i1] * v[i2] * v[i3] * v[i4] * phi.value(&[i1, i2, i3, i4]);
                        }
                    }
                }
            }
            s / (n as f64).powi(3)
        }
        _ => unreachable!(),
    };
    Ok(value)
}

/// Instantaneous quadratic-variation rate of the magnetisation martingale
/// in the accelerated clock: (a/n) sum_i c(tau_i eta). Always within
/// [a (1-gamma)^2, a (1+gamma)^2].
pub fn qv_rate(config: &Configuration, params: &Params) -> f64 {
    let n = config.n();
    let mut sum = 0.0;
    for i in 0..n {
        sum += glauber_rate(config, i as i64, params.gamma);
    }
    params.a * sum / n as f64
}

/// Empirical measure of a configuration: atoms of mass 1/n at the occupied
/// sites; total mass m/n <= 1.
pub fn empirical_measure(config: &Configuration) -> EmpiricalMeasure {
    EmpiricalMeasure::from_config(config)
}

/// A positive measure on the torus with mass at most 1, given by atoms.
#[derive(Debug, Clone, Default)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<(f64, f64)>,
}

impl EmpiricalMeasure {
    /// Atoms of mass 1/n at i/n for every occupied site.
    pub fn from_config(config: &Configuration) -> Self {
        let n = config.n();
        let w = 1.0 / n as f64;
        let atoms = (0..n)
            .filter(|&i| config.occupied_raw(i))
            .map(|i| (i as f64 / n as f64, w))
            .collect();
        EmpiricalMeasure { atoms }
    }

    pub fn dirac(x: f64) -> Self {
        EmpiricalMeasure { atoms: vec![(x, 1.0)] }
    }

    pub fn zero() -> Self {
        EmpiricalMeasure { atoms: Vec::new() }
    }

    /// Pairing <pi, H> = sum over atoms of mass * H(position).
    pub fn pairing(&self, h: &TestFunction) -> f64 {
        self.atoms.iter().map(|&(x, w)| w * h.eval(x)).sum()
    }
}

/// Anything the weak distance can be evaluated on.
pub trait TorusMeasure {
    fn mass(&self) -> f64;
    /// (integral of cos(2 pi k x), integral of sin(2 pi k x)) against the measure.
    fn fourier_mode(&self, k: u32) -> (f64, f64);
}

impl TorusMeasure for EmpiricalMeasure {
    fn mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }
    fn fourier_mode(&self, k: u32) -> (f64, f64) {
        let two_pi_k = 2.0 * std::f64::consts::PI * k as f64;
        let mut c = 0.0;
        let mut s = 0.0;
        for &(x, w) in &self.atoms {
            c += w * (two_pi_k * x).cos();
            s += w * (two_pi_k * x).sin();
        }
        (c, s)
    }
}

/// Absolutely continuous measure with density tabulated on a uniform grid.
#[derive(Debug, Clone)]
pub struct DensityMeasure {
    pub values: Vec<f64>,
}

impl TorusMeasure for DensityMeasure {
    fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
    fn fourier_mode(&self, k: u32) -> (f64, f64) {
        let g = self.values.len();
        let two_pi_k = 2.0 * std::f64::consts::PI * k as f64;
        let mut c = 0.0;
        let mut s = 0.0;
        for (j, &u) in self.values.iter().enumerate() {
            let x = j as f64 / g as f64;
            c += u * (two_pi_k * x).cos();
            s += u * (two_pi_k * x).sin();
        }
        (c / g as f64, s / g as f64)
    }
}

pub const WEAK_DISTANCE_DEFAULT_K: u32 = 40;

/// Metric for weak convergence:
/// d(mu1, mu2) = sum_{k=0}^{K} 2^{-(k+1)} (|delta cos_k| + |delta sin_k|),
/// truncated at k <= K. The discarded tail is at most
/// 2^{1-K} (mass1 + mass2), see [`weak_distance_tail_bound`].
pub fn weak_distance<M1: TorusMeasure + ?Sized, M2: TorusMeasure + ?Sized>(
    mu1: &M1,
    mu2: &M2,
    k_max: u32,
) -> f64 {
    let mut d = 0.0;
    for k in 0..=k_max {
        let (c1, s1) = mu1.fourier_mode(k);
        let (c2, s2) = mu2.fourier_mode(k);
        d += 0.5f64.powi(k as i32 + 1) * ((c1 - c2).abs() + (s1 - s2).abs());
    }
    d
}

pub fn weak_distance_default<M1: TorusMeasure + ?Sized, M2: TorusMeasure + ?Sized>(
    mu1: &M1,
    mu2: &M2,
) -> f64 {
    weak_distance(mu1, mu2, WEAK_DISTANCE_DEFAULT_K)
}

pub fn weak_distance_tail_bound<M1: TorusMeasure + ?Sized, M2: TorusMeasure + ?Sized>(
    mu1: &M1,
    mu2: &M2,
    k_max: u32,
) -> f64 {
    0.5f64.powi(k_max as i32 - 1) * (mu1.mass() + mu2.mass())
}

/// Observable selection for trajectory recording, with the CLI string
/// forms "Y", "field:cos:k", "field:sin:k", "fast:cos:k", "fast:sin:k",
/// "qv" and "density".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableSelection {
    Y,
    FieldCos(u32),
    FieldSin(u32),
    FastCos(u32),
    FastSin(u32),
    Qv,
    Density,
}

impl ObservableSelection {
    /// CSV column names produced by this selection.
    pub fn column_names(&self, n: usize) -> Vec<String> {
        match self {
            ObservableSelection::Y => vec!["Y".into()],
            ObservableSelection::FieldCos(k) => vec![format!("field_cos_{k}")],
            ObservableSelection::FieldSin(k) => vec![format!("field_sin_{k}")],
            ObservableSelection::FastCos(k) => vec![format!("fast_cos_{k}")],
            ObservableSelection::FastSin(k) => vec![format!("fast_sin_{k}")],
            ObservableSelection::Qv => vec!["qv".into()],
            ObservableSelection::Density => (0..n).map(|i| format!("density_{i}")).collect(),
        }
    }

    /// Evaluate on a configuration. `Qv` is integrated along the
    /// trajectory and is filled in by the engine, not here.
    pub fn eval(&self, config: &Configuration) -> Vec<f64> {
        match self {
            ObservableSelection::Y => vec![magnetisation_stats(config).y],
            ObservableSelection::FieldCos(k) => vec![field_y34(config, &TestFunction::Cos(*k))],
            ObservableSelection::FieldSin(k) => vec![field_y34(config, &TestFunction::Sin(*k))],
            ObservableSelection::FastCos(k) => vec![field_fast(config, &TestFunction::Cos(*k))],
            ObservableSelection::FastSin(k) => vec![field_fast(config, &TestFunction::Sin(*k))],
            ObservableSelection::Qv => vec![f64::NAN],
            ObservableSelection::Density => (0..config.n())
                .map(|i| if config.occupied_raw(i) { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

impl std::str::FromStr for ObservableSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parse_k = |part: Option<&str>| -> Result<u32> {
            let k: u32 = part
                .ok_or_else(|| Error::InvalidParam(format!("missing mode index in {s:?}")))?
                .parse()
                .map_err(|_| Error::InvalidParam(format!("bad mode index in {s:?}")))?;
            if k == 0 {
                return Err(Error::InvalidParam(
                    "mode index must be >= 1 (use \"Y\" for the constant mode)".into(),
                ));
            }
            Ok(k)
        };
        let mut parts = s.split(':');
        match (parts.next(), parts.next()) {
            (Some("Y"), None) => Ok(ObservableSelection::Y),
            (Some("qv"), None) => Ok(ObservableSelection::Qv),
            (Some("density"), None) => Ok(ObservableSelection::Density),
            (Some("field"), Some("cos")) => Ok(ObservableSelection::FieldCos(parse_k(parts.next())?)),
            (Some("field"), Some("sin")) => Ok(ObservableSelection::FieldSin(parse_k(parts.next())?)),
            (Some("fast"), Some("cos")) => Ok(ObservableSelection::FastCos(parse_k(parts.next())?)),
            (Some("fast"), Some("sin")) => Ok(ObservableSelection::FastSin(parse_k(parts.next())?)),
            _ => Err(Error::InvalidParam(format!("unknown observable {s:?}"))),
        }
    }
}

impl std::fmt::Display for ObservableSelection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObservableSelection::Y => write!(f, "Y"),
            ObservableSelection::FieldCos(k) => write!(f, "field:cos:{k}"),
            ObservableSelection::FieldSin(k) => write!(f, "field:sin:{k}"),
            ObservableSelection::FastCos(k) => write!(f, "fast:cos:{k}"),
            ObservableSelection::FastSin(k) => write!(f, "fast:sin:{k}"),
            ObservableSelection::Qv => write!(f, "qv"),
            ObservableSelection::Density => write!(f, "density"),
        }
    }
}
