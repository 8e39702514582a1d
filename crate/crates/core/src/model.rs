//! Physical parameters of the emitter + detector system, homodyne and
//! truncation settings, and their validation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Default drive threshold (in units of the emitter decay) below which the
/// system counts as being in the Heitler regime.
pub const DEFAULT_HEITLER_THRESHOLD: f64 = 1e-2;

/// Distance to `F' = 2` that is reported as a divergence hazard.
pub const DIVERGENCE_MARGIN: f64 = 1e-6;

/// Physical rates and drives of the joint emitter + detector system.
///
/// `omega_sigma` drives the emitter, `gamma_sigma` is its decay rate,
/// `gamma_det` the detector linewidth, `g` the emitter-detector coupling and
/// `omega_a` an optional coherent drive applied directly to the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_sigma: f64,
    pub gamma_sigma: f64,
    #[serde(rename = "Gamma")]
    pub gamma_det: f64,
    pub g: f64,
    pub omega_a: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_sigma: 1e-3,
            gamma_sigma: 1.0,
            gamma_det: 0.2,
            g: 1e-3,
            omega_a: 0.0,
        }
    }
}

impl SystemParams {
    pub fn new(omega_sigma: f64, gamma_sigma: f64, gamma_det: f64, g: f64, omega_a: f64) -> Self {
        Self {
            omega_sigma,
            gamma_sigma,
            gamma_det,
            g,
            omega_a,
        }
    }

    /// Emitter in units of its own decay rate, no detector drive.
    pub fn unit(omega_sigma: f64, gamma_det: f64, g: f64) -> Self {
        Self::new(omega_sigma, 1.0, gamma_det, g, 0.0)
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn with_drive(mut self, omega_sigma: f64) -> Self {
        self.omega_sigma = omega_sigma;
        self
    }

    pub fn with_linewidth(mut self, gamma_det: f64) -> Self {
        self.gamma_det = gamma_det;
        self
    }

    pub fn is_heitler(&self, threshold: f64) -> bool {
        self.omega_sigma <= threshold * self.gamma_sigma
    }

    /// All rates divided by `gamma_sigma`.
    pub fn normalized(&self) -> Self {
        let s = self.gamma_sigma;
        Self {
            omega_sigma: self.omega_sigma / s,
            gamma_sigma: 1.0,
            gamma_det: self.gamma_det / s,
            g: self.g / s,
            omega_a: self.omega_a / s,
        }
    }

    /// Every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            omega_sigma: self.omega_sigma * factor,
            gamma_sigma: self.gamma_sigma * factor,
            gamma_det: self.gamma_det * factor,
            g: self.g * factor,
            omega_a: self.omega_a * factor,
        }
    }

    /// Detector drive fixed by the homodyne setting: `omega_a = g omega_sigma F' / gamma_sigma`.
    ///
    /// An inactive homodyne configuration (`F' = 0`) leaves `omega_a` as given.
    pub fn with_homodyne(&self, h: &HomodyneConfig) -> Self {
        let mut p = *self;
        if h.is_active() {
            p.omega_a = self.g * self.omega_sigma * h.f_prime / self.gamma_sigma;
        }
        p
    }

    pub(crate) fn check(&self) -> Result<()> {
        let report = validate_params(self);
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(report.join("; ")))
        }
    }
}

/// Interference of the filtered emission with an attenuated copy of the laser
/// at a beam splitter with real transmission `t` and reflection `r`.
///
/// `f_prime` is the amplitude of the admixed coherent field relative to the
/// emitter field as seen by the detector; the correlations depend only on it.
/// `t` only rescales intensities. The laser attenuation factor itself is
/// `F = F' r / t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneConfig {
    pub f_prime: f64,
    pub t: f64,
    pub r: f64,
}

impl Default for HomodyneConfig {
    fn default() -> Self {
        Self::none()
    }
}

impl HomodyneConfig {
    /// No interference, fully transmitting splitter.
    pub fn none() -> Self {
        Self {
            f_prime: 0.0,
            t: 1.0,
            r: 0.0,
        }
    }

    /// `r` is derived from `r^2 + t^2 = 1`.
    pub fn new(f_prime: f64, t: f64) -> Self {
        Self {
            f_prime,
            t,
            r: (1.0 - t * t).max(0.0).sqrt(),
        }
    }

    /// Unbalanced splitter limit `t = 1`.
    pub fn with_f_prime(f_prime: f64) -> Self {
        Self::new(f_prime, 1.0)
    }

    /// Build from the attenuation factor `F`; needs `r > 0`.
    pub fn from_attenuation(f: f64, t: f64) -> Result<Self> {
        let r = (1.0 - t * t).max(0.0).sqrt();
        if r <= 0.0 || t <= 0.0 {
            return Err(Error::InvalidParams(
                "F' = F t / r needs 0 < t < 1".to_string(),
            ));
        }
        Ok(Self {
            f_prime: f * t / r,
            t,
            r,
        })
    }

    pub fn is_active(&self) -> bool {
        self.f_prime != 0.0
    }

    /// Laser attenuation factor `F = F' r / t`.
    pub fn attenuation(&self) -> f64 {
        self.f_prime * self.r / self.t
    }

    /// Coherent amplitude `beta = i omega_sigma F' / gamma_sigma`.
    pub fn beta(&self, params: &SystemParams) -> C64 {
        C64::new(0.0, params.omega_sigma * self.f_prime / params.gamma_sigma)
    }
}

/// Numerical cutoffs standing in for the analytic limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    /// Detector Fock cutoff.
    pub n_max: usize,
    pub tol: f64,
    /// Finite coupling approximating the `g -> 0` sensor limit.
    pub g_eval: f64,
    /// Finite drive approximating `omega_sigma -> 0`.
    pub omega_eval: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            n_max: 8,
            tol: 1e-9,
            g_eval: 1e-3,
            omega_eval: 1e-3,
        }
    }
}

impl TruncationConfig {
    /// Check `n_max >= 2N` for a correlation of order `order`.
    pub fn check_order(&self, order: usize) -> Result<()> {
        if self.n_max < 2 * order {
            return Err(Error::OrderTooLarge {
                requested: 2 * order,
                max: self.n_max,
            });
        }
        Ok(())
    }
}

/// Normally ordered moment `<sigma^dag^m sigma^n a^dag^mu a^nu>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MomentIndex {
    pub m: u8,
    pub n: u8,
    pub mu: u32,
    pub nu: u32,
}

impl MomentIndex {
    pub fn new(m: u32, n: u32, mu: u32, nu: u32) -> Result<Self> {
        if m > 1 || n > 1 {
            return Err(Error::InvalidIndex { m, n, mu, nu });
        }
        Ok(Self {
            m: m as u8,
            n: n as u8,
            mu,
            nu,
        })
    }

    /// Unchecked constructor for indices known to be valid.
    pub(crate) const fn raw(m: u8, n: u8, mu: u32, nu: u32) -> Self {
        Self { m, n, mu, nu }
    }

    pub const IDENTITY: MomentIndex = MomentIndex::raw(0, 0, 0, 0);

    pub fn order(&self) -> usize {
        (self.m as u32 + self.n as u32 + self.mu + self.nu) as usize
    }

    /// Index of the complex-conjugate moment.
    pub fn conjugate(&self) -> Self {
        Self::raw(self.n, self.m, self.nu, self.mu)
    }

    /// Detector moment `<a^dag^mu a^nu>`.
    pub fn detector(mu: u32, nu: u32) -> Self {
        Self::raw(0, 0, mu, nu)
    }

    /// All valid indices of exactly the given order, in a fixed order.
    pub fn of_order(order: usize) -> Vec<MomentIndex> {
        let k = order as u32;
        let mut out = Vec::new();
        for m in 0..=1u8 {
            for n in 0..=1u8 {
                let s = m as u32 + n as u32;
                if s > k {
                    continue;
                }
                let d = k - s;
                for mu in 0..=d {
                    out.push(Self::raw(m, n, mu, d - mu));
                }
            }
        }
        out
    }
}

impl fmt::Display for MomentIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.m, self.n, self.mu, self.nu)
    }
}

impl FromStr for MomentIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bad moment index '{s}': {e}")))?;
        match parts.as_slice() {
            [m, n, mu, nu] => Self::new(*m, *n, *mu, *nu),
            _ => Err(Error::Config(format!("bad moment index '{s}'"))),
        }
    }
}

/// Result of [`validate`]: violated invariants and numerical hazards.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub hazards: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn validate_params(p: &SystemParams) -> Vec<String> {
    let mut v = Vec::new();
    let fields = [
        ("omega_sigma", p.omega_sigma),
        ("gamma_sigma", p.gamma_sigma),
        ("Gamma", p.gamma_det),
        ("g", p.g),
        ("omega_a", p.omega_a),
    ];
    for (name, x) in fields {
        if !x.is_finite() {
            v.push(format!("{name} must be finite"));
        }
    }
    if !(p.gamma_sigma > 0.0) {
        v.push("gamma_sigma must be positive".to_string());
    }
    if !(p.gamma_det > 0.0) {
        v.push("Gamma must be positive".to_string());
    }
    if p.omega_sigma < 0.0 {
        v.push("omega_sigma must be non-negative".to_string());
    }
    if p.g < 0.0 {
        v.push("g must be non-negative".to_string());
    }
    v
}

/// Check every parameter invariant; never fails, reports instead.
pub fn validate(params: &SystemParams, h: &HomodyneConfig, t: &TruncationConfig) -> ValidationReport {
    let mut report = ValidationReport {
        violations: validate_params(params),
        hazards: Vec::new(),
    };
    let v = &mut report.violations;
    if !(h.f_prime >= 0.0) || !h.f_prime.is_finite() {
        v.push("f_prime must be non-negative".to_string());
    }
    if !(h.t > 0.0 && h.t <= 1.0) {
        v.push("t must lie in (0, 1]".to_string());
    }
    if !(h.r >= 0.0 && h.r < 1.0) {
        v.push("r must lie in [0, 1)".to_string());
    }
    if ((h.r * h.r + h.t * h.t) - 1.0).abs() > 1e-12 {
        v.push("beam splitter must satisfy r^2 + t^2 = 1".to_string());
    }
    if t.n_max == 0 {
        v.push("n_max must be positive".to_string());
    }
    if !(t.tol > 0.0) {
        v.push("tol must be positive".to_string());
    }
    if !(t.g_eval > 0.0) {
        v.push("g_eval must be positive".to_string());
    }
    if !(t.omega_eval > 0.0) {
        v.push("omega_eval must be positive".to_string());
    }
    if (h.f_prime - 2.0).abs() < DIVERGENCE_MARGIN {
        report
            .hazards
            .push("homodyne divergence point: every homodyne g^(N) diverges at F' = 2".to_string());
    }
    if h.is_active() && params.omega_a != 0.0 {
        report
            .hazards
            .push("omega_a is overridden by the homodyne setting".to_string());
    }
    report
}

/// Flat `key = value` parameter file.
///
/// Recognised keys: `omega_sigma`, `gamma_sigma`, `Gamma`, `g`, `omega_a`,
/// `f_prime`, `t`, `n_max`, `tol`, plus `g_eval` and `omega_eval`. Absent keys
/// keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub omega_sigma: Option<f64>,
    pub gamma_sigma: Option<f64>,
    #[serde(rename = "Gamma")]
    pub gamma_det: Option<f64>,
    pub g: Option<f64>,
    pub omega_a: Option<f64>,
    pub f_prime: Option<f64>,
    pub t: Option<f64>,
    pub n_max: Option<usize>,
    pub tol: Option<f64>,
    pub g_eval: Option<f64>,
    pub omega_eval: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut cfg = ConfigFile::default();
        for (key, value) in &table {
            let num = value
                .as_float()
                .or_else(|| value.as_integer().map(|i| i as f64))
                .ok_or_else(|| Error::Config(format!("value of '{key}' is not a number")))?;
            match key.as_str() {
                "omega_sigma" => cfg.omega_sigma = Some(num),
                "gamma_sigma" => cfg.gamma_sigma = Some(num),
                "Gamma" => cfg.gamma_det = Some(num),
                "g" => cfg.g = Some(num),
                "omega_a" => cfg.omega_a = Some(num),
                "f_prime" => cfg.f_prime = Some(num),
                "t" => cfg.t = Some(num),
                "n_max" => {
                    if num < 1.0 || num.fract() != 0.0 {
                        return Err(Error::Config("n_max must be a positive integer".into()));
                    }
                    cfg.n_max = Some(num as usize)
                }
                "tol" => cfg.tol = Some(num),
                "g_eval" => cfg.g_eval = Some(num),
                "omega_eval" => cfg.omega_eval = Some(num),
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Overlay the keys present in `other`.
    pub fn merge(&mut self, other: &ConfigFile) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(omega_sigma, gamma_sigma, gamma_det, g, omega_a, f_prime, t, n_max, tol, g_eval, omega_eval);
    }

    pub fn resolve(&self) -> (SystemParams, HomodyneConfig, TruncationConfig) {
        let mut p = SystemParams::default();
        let mut h = HomodyneConfig::none();
        let mut t = TruncationConfig::default();
        if let Some(x) = self.omega_sigma {
            p.omega_sigma = x;
        }
        if let Some(x) = self.gamma_sigma {
            p.gamma_sigma = x;
        }
        if let Some(x) = self.gamma_det {
            p.gamma_det = x;
        }
        if let Some(x) = self.g {
            p.g = x;
        }
        if let Some(x) = self.omega_a {
            p.omega_a = x;
        }
        if let Some(x) = self.t {
            h = HomodyneConfig::new(h.f_prime, x);
        }
        if let Some(x) = self.f_prime {
            h.f_prime = x;
        }
        if let Some(x) = self.n_max {
            t.n_max = x;
        }
        if let Some(x) = self.tol {
            t.tol = x;
        }
        if let Some(x) = self.g_eval {
            t.g_eval = x;
        }
        if let Some(x) = self.omega_eval {
            t.omega_eval = x;
        }
        (p, h, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> (SystemParams, HomodyneConfig, TruncationConfig) {
        (
            SystemParams::new(1e-3, 1.0, 0.2, 1e-3, 0.0),
            HomodyneConfig::with_f_prime(1.1835),
            TruncationConfig::default(),
        )
    }

    #[test]
    fn reference_point_validates() {
        let (p, h, t) = reference();
        let r = validate(&p, &h, &t);
        assert!(r.is_ok(), "{r:?}");
        assert!(r.hazards.is_empty());
    }

    #[test]
    fn negative_linewidth_is_reported() {
        let (mut p, h, t) = reference();
        p.gamma_det = -1.0;
        let r = validate(&p, &h, &t);
        assert!(r.violations.iter().any(|v| v == "Gamma must be positive"));
    }

    #[test]
    fn divergence_point_is_a_hazard() {
        let (p, _, t) = reference();
        let r = validate(&p, &HomodyneConfig::with_f_prime(2.0), &t);
        assert!(r.is_ok());
        assert!(r.hazards[0].contains("homodyne divergence point"));
        let near = validate(&p, &HomodyneConfig::with_f_prime(2.0 + 5e-7), &t);
        assert_eq!(near.hazards.len(), 1);
        let far = validate(&p, &HomodyneConfig::with_f_prime(2.0 + 5e-6), &t);
        assert!(far.hazards.is_empty());
    }

    #[test]
    fn splitter_normalisation_is_checked() {
        let (p, _, t) = reference();
        let h = HomodyneConfig {
            f_prime: 1.0,
            t: 0.8,
            r: 0.5,
        };
        assert!(!validate(&p, &h, &t).is_ok());
        assert!(validate(&p, &HomodyneConfig::new(1.0, 0.8), &t).is_ok());
    }

    #[test]
    fn heitler_flag() {
        assert!(SystemParams::unit(1e-3, 0.2, 0.0).is_heitler(DEFAULT_HEITLER_THRESHOLD));
        assert!(SystemParams::unit(1e-2, 0.2, 0.0).is_heitler(DEFAULT_HEITLER_THRESHOLD));
        assert!(!SystemParams::unit(2e-2, 0.2, 0.0).is_heitler(DEFAULT_HEITLER_THRESHOLD));
        let p = SystemParams::new(2e-2, 2.0, 0.2, 0.0, 0.0);
        assert!(p.is_heitler(DEFAULT_HEITLER_THRESHOLD));
    }

    #[test]
    fn moment_index_rules() {
        assert!(MomentIndex::new(2, 0, 0, 0).is_err());
        let i = MomentIndex::new(1, 0, 2, 3).unwrap();
        assert_eq!(i.order(), 6);
        assert_eq!(i.conjugate(), MomentIndex::new(0, 1, 3, 2).unwrap());
        assert_eq!("1,0,2,3".parse::<MomentIndex>().unwrap(), i);
        assert!("1,0,2".parse::<MomentIndex>().is_err());
        // 4k indices per order k >= 1
        for k in 1..6 {
            assert_eq!(MomentIndex::of_order(k).len(), 4 * k);
        }
    }

    #[test]
    fn homodyne_drive_mapping() {
        let p = SystemParams::new(2e-3, 2.0, 0.4, 4e-3, 0.0);
        let h = HomodyneConfig::with_f_prime(1.5);
        let q = p.with_homodyne(&h);
        assert!((q.omega_a - 4e-3 * 2e-3 * 1.5 / 2.0).abs() < 1e-18);
        assert_eq!(p.with_homodyne(&HomodyneConfig::none()), p);
        assert_eq!(h.beta(&p), C64::new(0.0, 1.5e-3));
    }

    #[test]
    fn config_file_roundtrip() {
        let text = "omega_sigma = 0.001\nGamma = 0.2\ng = 1e-3\nf_prime = 1.1835\nt = 1\nn_max = 6\ntol = 1e-9\n";
        let cfg = ConfigFile::parse(text).unwrap();
        let (p, h, t) = cfg.resolve();
        assert_eq!(p.gamma_det, 0.2);
        assert_eq!(p.gamma_sigma, 1.0);
        assert_eq!(h.f_prime, 1.1835);
        assert_eq!(h.r, 0.0);
        assert_eq!(t.n_max, 6);
        assert!(ConfigFile::parse("bogus = 1").is_err());
        assert!(ConfigFile::parse("n_max = 2.5").is_err());
    }

    proptest::proptest! {
        #[test]
        fn attenuation_roundtrip(f in 0.0f64..10.0, t in 0.05f64..0.999) {
            let h = HomodyneConfig::from_attenuation(f, t).unwrap();
            let back = h.attenuation();
            proptest::prop_assert!((back - f).abs() <= 1e-12 * f.max(1.0));
        }
    }
}
