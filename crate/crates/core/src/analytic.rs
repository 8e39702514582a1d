//! Closed-form results in the Heitler regime and the mean-field
//! decomposition of `g^(2)`.

use serde::{Deserialize, Serialize};

use crate::model::{HomodyneConfig, MomentIndex, SystemParams, DEFAULT_HEITLER_THRESHOLD};
use crate::moments::MomentTable;
use crate::{Error, Result, C64};

/// Steady-state coherent amplitude `<σ>` and population `<σ†σ>` of the
/// resonantly driven two-level emitter.
pub fn tls_steady_state(omega_sigma: f64, gamma_sigma: f64) -> (C64, f64) {
    if omega_sigma.is_infinite() {
        return (C64::new(0.0, 0.0), 0.5);
    }
    let den = gamma_sigma * gamma_sigma + 8.0 * omega_sigma * omega_sigma;
    let alpha = C64::new(0.0, -2.0 * omega_sigma * gamma_sigma / den);
    (alpha, 4.0 * omega_sigma * omega_sigma / den)
}

/// `g^(N)` of filtered resonance fluorescence in the Heitler regime:
/// `∏_{k=1}^{N-1} γ² / (γ + kΓ)²`. Orders below two give 1.
pub fn gn_filtered(n: u32, gamma_sigma: f64, gamma_det: f64) -> f64 {
    (1..n)
        .map(|k| {
            let r = gamma_sigma / (gamma_sigma + k as f64 * gamma_det);
            r * r
        })
        .product()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Signed numerator of the homodyne `g̃^(N)`:
/// `Σ_k C(N,k) 2^k (−F')^{N−k} ∏_{λ=1}^{N−k} [1 + (N−λ)Γ/γ]`.
pub fn homodyne_bracket(n: u32, gamma_sigma: f64, gamma_det: f64, f_prime: f64) -> f64 {
    let x = gamma_det / gamma_sigma;
    (0..=n)
        .map(|k| {
            let prod: f64 = (1..=n - k).map(|l| 1.0 + (n - l) as f64 * x).product();
            binomial(n, k) * 2f64.powi(k as i32) * (-f_prime).powi((n - k) as i32) * prod
        })
        .sum()
}

fn check_divergence(f_prime: f64) -> Result<()> {
    if (2.0 - f_prime).abs() <= 4.0 * f64::EPSILON {
        return Err(Error::HomodyneDivergence);
    }
    Ok(())
}

/// Homodyne `g̃^(N)` at leading order in the drive.
pub fn gn_homodyne(n: u32, gamma_sigma: f64, gamma_det: f64, f_prime: f64) -> Result<f64> {
    check_divergence(f_prime)?;
    let b = homodyne_bracket(n, gamma_sigma, gamma_det, f_prime) / (2.0 - f_prime).powi(n as i32);
    Ok(gn_filtered(n, gamma_sigma, gamma_det) * b * b)
}

/// Homodyne `g̃^(2)`.
pub fn g2_homodyne(gamma_sigma: f64, gamma_det: f64, f_prime: f64) -> Result<f64> {
    check_divergence(f_prime)?;
    let s = gamma_sigma + gamma_det;
    let d = 2.0 - f_prime;
    let x = (4.0 * gamma_sigma - (4.0 - f_prime) * f_prime * s) / (d * d * s);
    Ok(x * x)
}

/// The two attenuations `F'₂,±` at which `g̃^(2)` vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensationPair {
    pub f_minus: f64,
    pub f_plus: f64,
}

pub fn compensation_condition(gamma_sigma: f64, gamma_det: f64) -> CompensationPair {
    let root = if gamma_det.is_infinite() {
        1.0
    } else {
        (gamma_det / (gamma_det + gamma_sigma)).sqrt()
    };
    CompensationPair {
        f_minus: 2.0 * (1.0 - root),
        f_plus: 2.0 * (1.0 + root),
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= rel * mid.abs() {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest attenuation `F'_{N,−}` in `(0, 2)` at which `g̃^(N)` vanishes.
pub fn lower_zero(n: u32, gamma_sigma: f64, gamma_det: f64) -> Result<f64> {
    if n == 2 {
        return Ok(compensation_condition(gamma_sigma, gamma_det).f_minus);
    }
    let f = |x: f64| homodyne_bracket(n, gamma_sigma, gamma_det, x);
    let steps = 2000;
    let mut prev = f(0.0);
    for i in 1..=steps {
        let x = 2.0 * i as f64 / steps as f64;
        let v = f(x);
        if v == 0.0 {
            return Ok(x);
        }
        if (v > 0.0) != (prev > 0.0) {
            let lo = 2.0 * (i - 1) as f64 / steps as f64;
            return Ok(bisect(f, lo, x, 1e-15));
        }
        prev = v;
    }
    Err(Error::NoRoot)
}

/// Smallest attenuation `F'_{N,+}` above 2 at which `g̃^(N)` vanishes.
pub fn upper_zero(n: u32, gamma_sigma: f64, gamma_det: f64) -> Result<f64> {
    if n == 2 {
        return Ok(compensation_condition(gamma_sigma, gamma_det).f_plus);
    }
    let f = |x: f64| homodyne_bracket(n, gamma_sigma, gamma_det, x);
    let steps = 8000;
    let (lo, hi) = (2.0, 4.0 * n as f64);
    let at = |i: usize| lo + (hi - lo) * i as f64 / steps as f64;
    let mut prev = f(at(1));
    for i in 2..=steps {
        let x = at(i);
        let v = f(x);
        if (v > 0.0) != (prev > 0.0) {
            return Ok(bisect(f, at(i - 1), x, 1e-15));
        }
        prev = v;
    }
    Err(Error::NoRoot)
}

/// Which compensation attenuation a joint zero sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Minus,
    Plus,
}

/// A linewidth where `g̃^(N)` and `g̃^(N')` vanish together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointZero {
    pub gamma: f64,
    pub f_prime: f64,
    pub branch: Branch,
}

fn branch_roots(n: u32, n_prime: u32, branch: Branch) -> Vec<JointZero> {
    let zero = |gam: f64| match branch {
        Branch::Minus => lower_zero(n, 1.0, gam),
        Branch::Plus => upper_zero(n, 1.0, gam),
    };
    let h = |gam: f64| zero(gam).map_or(f64::NAN, |f| homodyne_bracket(n_prime, 1.0, gam, f));
    let (lo, hi) = (1e-4f64, 10.0f64);
    let steps = 4000;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| lo * (hi / lo).powf(i as f64 / steps as f64))
        .collect();
    let mut roots = Vec::new();
    let mut prev = h(grid[0]);
    for w in grid.windows(2) {
        let v = h(w[1]);
        if v.is_finite() && prev.is_finite() {
            let gam = if v == 0.0 {
                Some(w[1])
            } else if prev != 0.0 && (v > 0.0) != (prev > 0.0) {
                Some(bisect(h, w[0], w[1], 1e-12))
            } else {
                None
            };
            if let Some(gamma) = gam {
                if let Ok(f_prime) = zero(gamma) {
                    roots.push(JointZero {
                        gamma,
                        f_prime,
                        branch,
                    });
                }
            }
        }
        prev = v;
    }
    roots
}

/// Joint zeros of `g̃^(N)` and `g̃^(N')` on both compensation branches, for
/// `Γ ∈ [1e-4, 10] γ`, sorted by `Γ`. Empty unless `N' > N + 1`.
pub fn joint_zeros(n: u32, n_prime: u32) -> Result<Vec<JointZero>> {
    if n < 2 || n_prime <= n + 1 {
        return Ok(Vec::new());
    }
    let mut roots = branch_roots(n, n_prime, Branch::Minus);
    roots.extend(branch_roots(n, n_prime, Branch::Plus));
    if roots.is_empty() {
        return Err(Error::NoRoot);
    }
    roots.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    Ok(roots)
}

/// Linewidths (units of `γ`) of [`joint_zeros`].
pub fn joint_zero_filter(n: u32, n_prime: u32) -> Result<Vec<f64>> {
    Ok(joint_zeros(n, n_prime)?.into_iter().map(|z| z.gamma).collect())
}

/// Single-time moments of a field `s` needed for its `g^(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMoments {
    /// `<s>`
    pub s: C64,
    /// `<s†s>`
    pub n: f64,
    /// `<s²>`
    pub s2: C64,
    /// `<s†s²>`
    pub sd_s2: C64,
    /// `<s†²s²>`
    pub sd2_s2: f64,
}

impl FieldMoments {
    /// Bare emitter; every two-excitation moment vanishes.
    pub fn two_level(omega_sigma: f64, gamma_sigma: f64) -> Self {
        let (s, n) = tls_steady_state(omega_sigma, gamma_sigma);
        Self {
            s,
            n,
            s2: C64::new(0.0, 0.0),
            sd_s2: C64::new(0.0, 0.0),
            sd2_s2: 0.0,
        }
    }

    /// Detector field from a moment table of order four or more.
    pub fn detector(table: &MomentTable) -> Result<Self> {
        Ok(Self {
            s: table.detector(0, 1)?,
            n: table.detector(1, 1)?.re,
            s2: table.detector(0, 2)?,
            sd_s2: table.detector(1, 2)?,
            sd2_s2: table.detector(2, 2)?.re,
        })
    }

    /// Emitter field from a moment table.
    pub fn emitter(table: &MomentTable) -> Result<Self> {
        Ok(Self {
            s: table.get(MomentIndex::raw(0, 1, 0, 0))?,
            n: table.emitter_population()?,
            s2: C64::new(0.0, 0.0),
            sd_s2: C64::new(0.0, 0.0),
            sd2_s2: 0.0,
        })
    }

    /// `<s†^i s^j>` for `i, j ≤ 2`.
    fn normal(&self, i: u32, j: u32) -> C64 {
        match (i, j) {
            (0, 0) => C64::new(1.0, 0.0),
            (0, 1) => self.s,
            (1, 0) => self.s.conj(),
            (1, 1) => C64::new(self.n, 0.0),
            (0, 2) => self.s2,
            (2, 0) => self.s2.conj(),
            (1, 2) => self.sd_s2,
            (2, 1) => self.sd_s2.conj(),
            (2, 2) => C64::new(self.sd2_s2, 0.0),
            _ => unreachable!("moment beyond fourth order"),
        }
    }

    /// `<d†^p d^q>` of the fluctuation `d = s − <s>`.
    pub fn fluctuation(&self, p: u32, q: u32) -> C64 {
        let a = self.s;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..=p {
            for j in 0..=q {
                acc += binomial(p, i)
                    * binomial(q, j)
                    * (-a.conj()).powu(p - i)
                    * (-a).powu(q - j)
                    * self.normal(i, j);
            }
        }
        acc
    }

    pub fn g2(&self) -> Result<f64> {
        if !(self.n > 0.0) {
            return Err(Error::ZeroPopulation);
        }
        Ok(self.sd2_s2 / (self.n * self.n))
    }
}

/// `g^(2) = 1 + I₀ + I₁ + I₂` under the split `s = α + d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub base: f64,
    /// Normally ordered variance of the fluctuations.
    pub i0: f64,
    /// Anomalous third-order moment.
    pub i1: f64,
    /// Quadrature squeezing term.
    pub i2: f64,
    pub g2: f64,
}

impl Decomposition {
    pub fn sum(&self) -> f64 {
        self.base + self.i0 + self.i1 + self.i2
    }
}

pub fn decompose_g2(f: &FieldMoments) -> Result<Decomposition> {
    let g2 = f.g2()?;
    let n2 = f.n * f.n;
    let a = f.s;
    let dd = f.fluctuation(1, 1).re;
    let i0 = (f.fluctuation(2, 2).re - dd * dd) / n2;
    let i1 = 4.0 * (a.conj() * f.fluctuation(1, 2)).re / n2;
    let i2 = 2.0 * (a.norm_sqr() * dd + (a.conj() * a.conj() * f.fluctuation(0, 2)).re) / n2;
    Ok(Decomposition {
        base: 1.0,
        i0,
        i1,
        i2,
        g2,
    })
}

/// Coherent weight and incoherent Lorentzian density of the Heitler
/// spectrum at frequency `omega`.
pub fn spectrum_heitler(omega: f64, omega_sigma: f64, gamma_sigma: f64) -> Result<(f64, f64)> {
    let k2 = 8.0 * omega_sigma * omega_sigma / (gamma_sigma * gamma_sigma);
    if k2 > 1.0 {
        return Err(Error::OutsideHeitler(format!("K2 = {k2} exceeds 1")));
    }
    let h = 0.5 * gamma_sigma;
    Ok((1.0 - k2, k2 * h / std::f64::consts::PI / (h * h + omega * omega)))
}

/// Brightness of plain and interfered filtered emission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionRates {
    pub i_rf: f64,
    pub i_int: f64,
    pub ratio: f64,
    /// Population of the interfered signal.
    pub n_s: f64,
}

/// Leading-order emission rates; the attenuation enters through `F'`.
pub fn emission_rates(params: &SystemParams, h: &HomodyneConfig) -> Result<EmissionRates> {
    if !params.is_heitler(DEFAULT_HEITLER_THRESHOLD) {
        return Err(Error::OutsideHeitler(format!(
            "omega_sigma = {} above {} gamma_sigma",
            params.omega_sigma, DEFAULT_HEITLER_THRESHOLD
        )));
    }
    let w2 = params.omega_sigma * params.omega_sigma;
    let g = params.gamma_sigma;
    let i_rf = 4.0 * w2 / g;
    let ratio = h.t * h.t * (1.0 - 0.5 * h.f_prime).powi(2);
    let n_s = ratio * 4.0 * w2 / (g * g);
    Ok(EmissionRates {
        i_rf,
        i_int: g * n_s,
        ratio,
        n_s,
    })
}

/// Brightness ratio at `F'₂,₋`: `t² Γ / (Γ + γ)`.
pub fn compensated_ratio(gamma_sigma: f64, gamma_det: f64, t: f64) -> f64 {
    t * t * gamma_det / (gamma_det + gamma_sigma)
}
