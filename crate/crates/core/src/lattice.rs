//! Configurations on the discrete torus, local transforms and the Glauber
//! jump rate.
//!
//! A configuration is a packed bit vector of occupation variables
//! `eta_i in {0,1}`, indexed modulo n, with the particle count cached and
//! maintained incrementally. The spin view is `sigma_i = 2 eta_i - 1`, the
//! centred view `etabar_i = eta_i - 1/2`.

use crate::{Error, Result};

/// Model parameters. `gamma` is always the derived value
/// `(1 - theta/sqrt(n)) / 2`; it is stored because the hot loops use it on
/// every event.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Params {
    pub n: usize,
    pub a: f64,
    pub theta: f64,
    pub gamma: f64,
}

/// gamma = (1 - theta/sqrt(n)) / 2, rejected outside (-1, 1).
pub fn derived_gamma(n: usize, theta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    let gamma = 0.5 * (1.0 - theta / (n as f64).sqrt());
    if !(gamma > -1.0 && gamma < 1.0) {
        return Err(Error::InvalidParam(format!(
            "gamma = {gamma} outside (-1, 1) for n = {n}, theta = {theta}"
        )));
    }
    Ok(gamma)
}

impl Params {
    /// Rates at site i read sites i-1 and i+1, hence n >= 4. The reaction
    /// strength may be zero (pure exclusion dynamics).
    pub fn new(n: usize, a: f64, theta: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidParam(format!("n = {n} must be >= 4")));
        }
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidParam(format!("a = {a} must be >= 0")));
        }
        let gamma = derived_gamma(n, theta)?;
        Ok(Params { n, a, theta, gamma })
    }
}

/// Occupation configuration on the torus T_n with cached particle count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    n: usize,
    bits: Vec<u64>,
    m: u32,
}

impl Configuration {
    pub fn empty(n: usize) -> Self {
        Configuration {
            n,
            bits: vec![0; n.div_ceil(64)],
            m: 0,
        }
    }

    pub fn full(n: usize) -> Self {
        let mut c = Self::empty(n);
        for i in 0..n {
            c.set_raw(i, true);
        }
        c.m = n as u32;
        c
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> Self {
        let mut c = Self::empty(n);
        let mut m = 0;
        for i in 0..n {
            if f(i) {
                c.set_raw(i, true);
                m += 1;
            }
        }
        c.m = m;
        c
    }

    /// Configuration whose bit i is bit i of `index`; the inverse of
    /// [`Configuration::index`]. Only for n <= 63.
    pub fn from_index(n: usize, index: usize) -> Self {
        Self::from_fn(n, |i| index >> i & 1 == 1)
    }

    /// State index for enumeration: bit i of the result is eta_i.
    pub fn index(&self) -> usize {
        debug_assert!(self.n <= 63);
        self.bits[0] as usize
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Cached particle count m.
    #[inline]
    pub fn particles(&self) -> u32 {
        self.m
    }

    #[inline]
    fn set_raw(&mut self, i: usize, v: bool) {
        let (w, b) = (i / 64, i % 64);
        if v {
            self.bits[w] |= 1 << b;
        } else {
            self.bits[w] &= !(1 << b);
        }
    }

    /// Reduce an arbitrary signed index modulo n. All public accessors go
    /// through this; callers never reduce indices themselves.
    #[inline]
    pub fn wrap(&self, i: i64) -> usize {
        let n = self.n as i64;
        let r = i % n;
        (if r < 0 { r + n } else { r }) as usize
    }

    #[inline]
    pub fn occupied(&self, i: i64) -> bool {
        let u = self.wrap(i);
        self.bits[u / 64] >> (u % 64) & 1 == 1
    }

    /// Occupation with an index already in 0..n (hot path).
    #[inline]
    pub fn occupied_raw(&self, u: usize) -> bool {
        self.bits[u / 64] >> (u % 64) & 1 == 1
    }

    /// Spin sigma_i = 2 eta_i - 1.
    #[inline]
    pub fn spin(&self, i: i64) -> f64 {
        if self.occupied(i) {
            1.0
        } else {
            -1.0
        }
    }

    /// Centred occupation etabar_i = eta_i - 1/2.
    #[inline]
    pub fn eta_bar(&self, i: i64) -> f64 {
        if self.occupied(i) {
            0.5
        } else {
            -0.5
        }
    }

    /// Toggle bit i in place; m changes by exactly +-1.
    #[inline]
    pub fn flip(&mut self, i: i64) {
        let u = self.wrap(i);
        let (w, b) = (u / 64, u % 64);
        self.bits[w] ^= 1 << b;
        if self.bits[w] >> b & 1 == 1 {
            self.m += 1;
        } else {
            self.m -= 1;
        }
    }

    /// Exchange the occupations of sites i and i+1 in place; m is conserved.
    /// A no-op when the two occupations are equal.
    #[inline]
    pub fn swap_right(&mut self, i: i64) {
        let u = self.wrap(i);
        let v = self.wrap(i + 1);
        let a = self.occupied_raw(u);
        let b = self.occupied_raw(v);
        if a != b {
            self.set_raw(u, b);
            self.set_raw(v, a);
        }
    }

    /// Toggle with an index already in 0..n (hot path).
    #[inline]
    pub fn flip_raw(&mut self, u: usize) {
        let (w, b) = (u / 64, u % 64);
        self.bits[w] ^= 1 << b;
        if self.bits[w] >> b & 1 == 1 {
            self.m += 1;
        } else {
            self.m -= 1;
        }
    }

    /// Exchange sites u and u+1 (u already in 0..n, hot path).
    #[inline]
    pub fn swap_right_raw(&mut self, u: usize) {
        let v = if u + 1 == self.n { 0 } else { u + 1 };
        let a = self.occupied_raw(u);
        let b = self.occupied_raw(v);
        if a != b {
            self.set_raw(u, b);
            self.set_raw(v, a);
        }
    }

    /// eta^i: the configuration with bit i toggled.
    pub fn flipped(&self, i: i64) -> Self {
        let mut c = self.clone();
        c.flip(i);
        c
    }

    /// eta^{i,i+1}: the configuration with sites i and i+1 exchanged.
    pub fn swapped(&self, i: i64) -> Self {
        let mut c = self.clone();
        c.swap_right(i);
        c
    }

    /// Recount particles from the raw bits (used by tests to validate the
    /// incremental count).
    pub fn popcount(&self) -> u32 {
        self.bits.iter().map(|w| w.count_ones()).sum()
    }

    /// Serialize as "<n>:<hex>", little-endian bytes, site i at bit i of
    /// byte i/8. Round-trip exact.
    pub fn to_hex(&self) -> String {
        let nbytes = self.n.div_ceil(8);
        let mut s = format!("{}:", self.n);
        for byte in 0..nbytes {
            let w = byte / 8;
            let shift = (byte % 8) * 8;
            let v = (self.bits.get(w).copied().unwrap_or(0) >> shift) & 0xff;
            s.push_str(&format!("{v:02x}"));
        }
        s
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let (npart, hexpart) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParam(format!("bad configuration string {s:?}")))?;
        let n: usize = npart
            .parse()
            .map_err(|_| Error::InvalidParam(format!("bad lattice size in {s:?}")))?;
        let nbytes = n.div_ceil(8);
        if hexpart.len() != 2 * nbytes {
            return Err(Error::InvalidParam(format!(
                "expected {} hex digits for n = {n}, got {}",
                2 * nbytes,
                hexpart.len()
            )));
        }
        let mut c = Self::empty(n);
        let mut m = 0;
        for byte in 0..nbytes {
            let v = u8::from_str_radix(&hexpart[2 * byte..2 * byte + 2], 16)
                .map_err(|_| Error::InvalidParam(format!("bad hex in {s:?}")))?;
            for b in 0..8 {
                let i = byte * 8 + b;
                if v >> b & 1 == 1 {
                    if i >= n {
                        return Err(Error::InvalidParam(format!(
                            "bit {i} set beyond lattice size {n}"
                        )));
                    }
                    c.set_raw(i, true);
                    m += 1;
                }
            }
        }
        c.m = m;
        Ok(c)
    }
}

/// Glauber flip rate at site i:
/// c = 1 - gamma sigma_i (sigma_{i-1} + sigma_{i+1}) + gamma^2 sigma_{i-1} sigma_{i+1}.
/// Takes only the three values (1-gamma)^2, 1-gamma^2, (1+gamma)^2.
pub fn glauber_rate(config: &Configuration, i: i64, gamma: f64) -> f64 {
    let s_prev = config.spin(i - 1);
    let s_mid = config.spin(i);
    let s_next = config.spin(i + 1);
    glauber_rate_spins(s_prev, s_mid, s_next, gamma)
}

#[inline]
pub fn glauber_rate_spins(s_prev: f64, s_mid: f64, s_next: f64, gamma: f64) -> f64 {
    1.0 - gamma * s_mid * (s_prev + s_next) + gamma * gamma * s_prev * s_next
}

/// Rate lookup table indexed by the 3-bit neighbourhood
/// (eta_{i-1}) | (eta_i << 1) | (eta_{i+1} << 2); used by the event loop.
pub fn glauber_rate_table(gamma: f64) -> [f64; 8] {
    let mut t = [0.0; 8];
    for (code, slot) in t.iter_mut().enumerate() {
        let s = |b: usize| if code >> b & 1 == 1 { 1.0 } else { -1.0 };
        *slot = glauber_rate_spins(s(0), s(1), s(2), gamma);
    }
    t
}

/// The four magnetisation readouts of a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetisationStats {
    /// particle count m
    pub m: u32,
    /// centred sum: m - n/2
    pub mag_sum: f64,
    /// slow mode Y = (m - n/2) / n^{3/4}
    pub y: f64,
    /// mean spin density (m - n/2) / n, always in [-1/2, 1/2]
    pub mean: f64,
}

pub fn magnetisation_stats(config: &Configuration) -> MagnetisationStats {
    let n = config.n() as f64;
    let mag_sum = config.particles() as f64 - 0.5 * n;
    MagnetisationStats {
        m: config.particles(),
        mag_sum,
        y: mag_sum / n.powf(0.75),
        mean: mag_sum / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn derived_gamma_examples() {
        assert_eq!(derived_gamma(100, 0.0).unwrap(), 0.5);
        assert!((derived_gamma(100, 1.0).unwrap() - 0.45).abs() < 1e-15);
        assert!((derived_gamma(4, 2.0).unwrap() - 0.0).abs() < 1e-15);
        // out of range: gamma >= 1
        assert!(derived_gamma(4, -2.1).is_err());
        // out of range: gamma <= -1
        assert!(derived_gamma(4, 6.1).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(3, 1.0, 0.0).is_err());
        assert!(Params::new(4, -1.0, 0.0).is_err());
        let p = Params::new(4, 0.0, 0.0).unwrap();
        assert_eq!(p.gamma, 0.5);
    }

    #[test]
    fn glauber_rate_examples() {
        // all spins equal, gamma = 1/2 -> (1 - 1/2)^2 = 0.25
        let full = Configuration::full(8);
        assert!((glauber_rate(&full, 3, 0.5) - 0.25).abs() < 1e-15);
        // gamma = 0 -> rate 1 regardless of the configuration
        let any = Configuration::from_fn(8, |i| i % 3 == 0);
        for i in 0..8 {
            assert_eq!(glauber_rate(&any, i as i64, 0.0), 1.0);
        }
        // sigma_{i-1} != sigma_{i+1} -> 1 - gamma^2 = 0.75 at gamma = 1/2
        let c = Configuration::from_fn(8, |i| i == 0); // sites 7,0,1 = -,+,-... site 1: prev=+1,next=-1
        assert!((glauber_rate(&c, 1, 0.5) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rate_table_matches_formula() {
        for &gamma in &[0.0, 0.3, 0.5, 0.9, -0.4] {
            let t = glauber_rate_table(gamma);
            for code in 0..8usize {
                let cfg = Configuration::from_fn(8, |i| match i {
                    7 => code & 1 == 1,
                    0 => code >> 1 & 1 == 1,
                    1 => code >> 2 & 1 == 1,
                    _ => false,
                });
                assert!((t[code] - glauber_rate(&cfg, 0, gamma)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn flip_swap_examples() {
        let mut c = Configuration::empty(4);
        c.flip(2);
        assert_eq!(c.to_hex(), "4:04");
        assert_eq!(c.particles(), 1);

        let full = Configuration::full(4);
        let f = full.flipped(0);
        assert_eq!(f.particles(), 3);
        assert!(!f.occupied(0));

        // swap moves the particle from site 0 to site 1
        let c = Configuration::from_fn(4, |i| i == 0);
        let s = c.swapped(0);
        assert!(!s.occupied(0) && s.occupied(1));
        assert_eq!(s.particles(), 1);

        // equal occupations: swap is the identity
        let c = Configuration::from_fn(4, |i| i < 2);
        assert_eq!(c.swapped(0), c);
    }

    #[test]
    fn magnetisation_examples_n16() {
        let empty = Configuration::empty(16);
        let st = magnetisation_stats(&empty);
        assert_eq!(st.m, 0);
        assert_eq!(st.mag_sum, -8.0);
        assert_eq!(st.y, -1.0); // 8 / 16^{3/4} = 1
        assert_eq!(st.mean, -0.5);

        let half = Configuration::from_fn(16, |i| i % 2 == 0);
        let st = magnetisation_stats(&half);
        assert_eq!(st.mag_sum, 0.0);
        assert_eq!(st.y, 0.0);
        assert_eq!(st.mean, 0.0);

        let full = Configuration::full(16);
        let st = magnetisation_stats(&full);
        assert_eq!(st.y, 1.0);
        assert_eq!(st.mean, 0.5);
    }

    /// Mean-field identity: the 8-term enumeration of
    /// E_{nu_rho}[c(eta) (1 - 2 eta_0)] equals -V'(rho) with
    /// V'(rho) = -(2 gamma - 1)(2 rho - 1) + gamma^2 (2 rho - 1)^3.
    #[test]
    fn reaction_drift_enumeration() {
        for &gamma in &[0.2, 0.5, 0.8] {
            for &rho in &[0.1, 0.5, 0.9] {
                let mut acc = 0.0;
                for code in 0..8usize {
                    let occ = |b: usize| code >> b & 1 == 1;
                    let w: f64 = (0..3)
                        .map(|b| if occ(b) { rho } else { 1.0 - rho })
                        .product();
                    let s = |b: usize| if occ(b) { 1.0 } else { -1.0 };
                    let c = glauber_rate_spins(s(0), s(1), s(2), gamma);
                    let eta0 = if occ(1) { 1.0 } else { 0.0 };
                    acc += w * c * (1.0 - 2.0 * eta0);
                }
                let v_prime =
                    -(2.0 * gamma - 1.0) * (2.0 * rho - 1.0) + gamma.powi(2) * (2.0 * rho - 1.0).powi(3);
                assert!(
                    (acc + v_prime).abs() < 1e-12,
                    "gamma={gamma} rho={rho}: {acc} vs {}",
                    -v_prime
                );
            }
        }
    }

    fn arb_config() -> impl Strategy<Value = Configuration> {
        (4usize..70, any::<u64>(), any::<u64>()).prop_map(|(n, seed0, seed1)| {
            Configuration::from_fn(n, |i| {
                // cheap deterministic hash of (i, seeds)
                let h = (i as u64)
                    .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                    .wrapping_add(seed0)
                    .rotate_left(17)
                    .wrapping_mul(seed1 | 1);
                h >> 63 == 1
            })
        })
    }

    proptest! {
        #[test]
        fn rate_is_one_of_three_values(cfg in arb_config(), i in 0i64..70, gamma in -0.95f64..0.95) {
            let r = glauber_rate(&cfg, i, gamma);
            let vals = [
                (1.0 - gamma) * (1.0 - gamma),
                1.0 - gamma * gamma,
                (1.0 + gamma) * (1.0 + gamma),
            ];
            prop_assert!(vals.iter().any(|v| (r - v).abs() < 1e-12));
        }

        #[test]
        fn rate_spin_flip_symmetry(cfg in arb_config(), i in 0i64..70, gamma in -0.95f64..0.95) {
            let flipped = Configuration::from_fn(cfg.n(), |j| !cfg.occupied(j as i64));
            let a = glauber_rate(&cfg, i, gamma);
            let b = glauber_rate(&flipped, i, gamma);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn flip_changes_m_by_one_and_is_involutive(cfg in arb_config(), i in 0i64..70) {
            let m0 = cfg.particles() as i64;
            let f = cfg.flipped(i);
            prop_assert_eq!(f.popcount(), f.particles());
            prop_assert_eq!((f.particles() as i64 - m0).abs(), 1);
            prop_assert_eq!(f.flipped(i), cfg);
        }

        #[test]
        fn swap_conserves_m_and_is_involutive(cfg in arb_config(), i in 0i64..70) {
            let s = cfg.swapped(i);
            prop_assert_eq!(s.popcount(), s.particles());
            prop_assert_eq!(s.particles(), cfg.particles());
            prop_assert_eq!(s.swapped(i), cfg);
        }

        #[test]
        fn hex_roundtrip(cfg in arb_config()) {
            let s = cfg.to_hex();
            let back = Configuration::from_hex(&s).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
