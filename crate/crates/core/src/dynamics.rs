//! Delay-resolved correlations through the quantum regression theorem, and
//! emission spectra.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::linalg::Propagator;
use crate::model::{HomodyneConfig, MomentIndex, SystemParams, TruncationConfig};
use crate::moments::{gn_from_moments, regression_coefficients, solve_sensor_hierarchy};
use crate::{Error, Result, C64};

/// Correlator values on a delay grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub tau_grid: Vec<f64>,
    pub values: Vec<C64>,
    pub label: String,
    /// Denominator already applied to `values`.
    pub normalization: f64,
    pub params: SystemParams,
}

impl CorrelationSeries {
    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.tau_grid.last()?, self.values.last()?.re))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "# correlator: {}", self.label);
        let _ = writeln!(s, "# normalization: {:e}", self.normalization);
        let _ = writeln!(s, "# params: {}", serde_json::to_string(&self.params)?);
        s.push_str("tau,re,im\n");
        for (t, v) in self.tau_grid.iter().zip(&self.values) {
            let _ = writeln!(s, "{t:e},{:e},{:e}", v.re, v.im);
        }
        Ok(s)
    }
}

/// Spectral density with the coherent delta peak kept as a separate weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub omega_grid: Vec<f64>,
    pub density: Vec<f64>,
    pub delta_weight: f64,
    pub delta_location: f64,
    pub resolution: Option<f64>,
}

impl SpectrumCurve {
    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.omega_grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(w, d)| 0.5 * (w[1] - w[0]) * (d[0] + d[1]))
            .sum()
    }

    /// Full width at half maximum of the density, by linear interpolation.
    pub fn fwhm(&self) -> Option<f64> {
        let (imax, &max) = self
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?;
        let half = 0.5 * max;
        let x = &self.omega_grid;
        let y = &self.density;
        let mut right = None;
        for i in imax..y.len() - 1 {
            if y[i + 1] < half {
                right = Some(x[i] + (half - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i]));
                break;
            }
        }
        let mut left = None;
        for i in (1..=imax).rev() {
            if y[i - 1] < half {
                left = Some(x[i] + (half - y[i]) * (x[i - 1] - x[i]) / (y[i - 1] - y[i]));
                break;
            }
        }
        Some(right? - left?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# delta_weight: {:e}", self.delta_weight);
        let _ = writeln!(s, "# delta_location: {:e}", self.delta_location);
        match self.resolution {
            Some(g) => {
                let _ = writeln!(s, "# resolution: {g:e}");
            }
            None => s.push_str("# resolution: none\n"),
        }
        s.push_str("omega,density\n");
        for (w, d) in self.omega_grid.iter().zip(&self.density) {
            let _ = writeln!(s, "{w:e},{d:e}");
        }
        s
    }
}

/// Check a delay grid: starts at 0, strictly increasing.
pub fn check_tau_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Grid("empty grid".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::Grid("delay grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Grid("delay grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `n` evenly spaced delays on `[0, tau_max]`.
pub fn linear_grid(tau_max: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|i| tau_max * i as f64 / (n - 1) as f64).collect()
}

/// Closed-form `g^(2)_σ(τ)` of resonance fluorescence seen with perfect time
/// resolution.
pub fn g2_tau_sigma_closed_form(omega_sigma: f64, gamma_sigma: f64, tau: f64) -> f64 {
    let r2 = (gamma_sigma / 4.0).powi(2) - (2.0 * omega_sigma).powi(2);
    // sinh(Rτ)/R and cosh(Rτ), continued to imaginary R
    let x2 = r2 * tau * tau;
    let (s, c) = if x2.abs() < 1e-10 {
        (tau * (1.0 + x2 / 6.0), 1.0 + x2 / 2.0)
    } else if r2 > 0.0 {
        let r = r2.sqrt();
        ((r * tau).sinh() / r, (r * tau).cosh())
    } else {
        let r = (-r2).sqrt();
        ((r * tau).sin() / r, (r * tau).cos())
    };
    1.0 - (0.75 * gamma_sigma * s + c) * (-0.75 * gamma_sigma * tau).exp()
}

/// Whether `g^(2)_σ(τ)` oscillates (complex `R_σ`).
pub fn sigma_g2_oscillates(omega_sigma: f64, gamma_sigma: f64) -> bool {
    omega_sigma > gamma_sigma / 8.0
}

/// Emitter operators usable at the outer positions of a two-time correlator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    Identity,
    Sigma,
    SigmaDag,
}

impl Operator {
    fn matrix(self) -> Matrix2<C64> {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        match self {
            Operator::Identity => Matrix2::new(l, o, o, l),
            // basis (ground, excited)
            Operator::Sigma => Matrix2::new(o, l, o, o),
            Operator::SigmaDag => Matrix2::new(o, o, l, o),
        }
    }
}

impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "I" | "identity" => Ok(Operator::Identity),
            "sigma" | "s" => Ok(Operator::Sigma),
            "sigma_dag" | "sigmadag" | "sd" => Ok(Operator::SigmaDag),
            other => Err(Error::UnsupportedOperator(other.to_string())),
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::Identity => "1",
            Operator::Sigma => "sigma",
            Operator::SigmaDag => "sigma_dag",
        })
    }
}

/// Entry of the two-level correlator vector `(<L σ(τ) R>, <L σ†(τ) R>, <L σ†σ(τ) R>)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Sigma = 0,
    SigmaDag = 1,
    Population = 2,
}

fn emitter_system(p: &SystemParams) -> (DMatrix<C64>, DVector<C64>) {
    let w = p.omega_sigma;
    let g = p.gamma_sigma;
    let i = C64::new(0.0, 1.0);
    let z = C64::new(0.0, 0.0);
    let r = |x: f64| C64::new(x, 0.0);
    let m = DMatrix::from_row_slice(
        3,
        3,
        &[
            r(-g / 2.0), z, i * 2.0 * w,
            z, r(-g / 2.0), -i * 2.0 * w,
            i * w, -i * w, r(-g),
        ],
    );
    let a = DVector::from_vec(vec![-i * w, i * w, z]);
    (m, a)
}

fn tls_density(p: &SystemParams) -> Matrix2<C64> {
    let (alpha, n) = crate::analytic::tls_steady_state(p.omega_sigma, p.gamma_sigma);
    Matrix2::new(C64::new(1.0 - n, 0.0), alpha.conj(), alpha, C64::new(n, 0.0))
}

/// Values on the grid, propagator, shifted initial vector and steady shift.
type CorrelatorVectors = (Vec<DVector<C64>>, Propagator, DVector<C64>, DVector<C64>);

/// Full correlator vector `w[L,R](τ)` on the grid.
fn correlator_vectors(
    l: Operator,
    r: Operator,
    p: &SystemParams,
    grid: &[f64],
) -> Result<CorrelatorVectors> {
    p.check()?;
    check_tau_grid(grid)?;
    let (m, a) = emitter_system(p);
    let rho = tls_density(p);
    let ex = |o: Matrix2<C64>| (l.matrix() * o * r.matrix() * rho).trace();
    let s = Operator::Sigma.matrix();
    let sd = Operator::SigmaDag.matrix();
    let w0 = DVector::from_vec(vec![ex(s), ex(sd), ex(sd * s)]);
    let lr = (l.matrix() * r.matrix() * rho).trace();
    let ss = m
        .clone()
        .lu()
        .solve(&(-&a))
        .ok_or_else(|| Error::InvalidParams("singular two-level regression matrix".into()))?;
    let shift = &ss * lr;
    let prop = Propagator::new(m);
    let x0 = &w0 - &shift;
    let vals = prop.series(grid, &x0).into_iter().map(|x| x + &shift).collect();
    Ok((vals, prop, x0, shift))
}

/// Two-time correlator `<L X(τ) R>` of the bare emitter, `X` picked by
/// `component`, for `L, R ∈ {1, σ, σ†}`.
pub fn two_time_correlator(
    l: Operator,
    r: Operator,
    component: Component,
    params: &SystemParams,
    tau_grid: &[f64],
) -> Result<CorrelationSeries> {
    let (vals, ..) = correlator_vectors(l, r, params, tau_grid)?;
    let k = component as usize;
    Ok(CorrelationSeries {
        tau_grid: tau_grid.to_vec(),
        values: vals.iter().map(|v| v[k]).collect(),
        label: format!("w[{l},{r}]_{}", k + 1),
        normalization: 1.0,
        params: *params,
    })
}

/// `g^(2)_σ(τ)` of the bare emitter from the regression equations.
pub fn g2_tau_sigma(params: &SystemParams, tau_grid: &[f64]) -> Result<CorrelationSeries> {
    let mut s = two_time_correlator(
        Operator::SigmaDag,
        Operator::Sigma,
        Component::Population,
        params,
        tau_grid,
    )?;
    let (_, n) = crate::analytic::tls_steady_state(params.omega_sigma, params.gamma_sigma);
    if !(n > 0.0) {
        return Err(Error::ZeroPopulation);
    }
    let norm = n * n;
    for v in &mut s.values {
        *v /= norm;
    }
    s.label = "g2_sigma(tau)".into();
    s.normalization = norm;
    Ok(s)
}

/// Operators `σ†^m σ^n a†^μ a^ν` with every index in `{0, 1}`.
fn regression_basis() -> Vec<MomentIndex> {
    let mut v = Vec::with_capacity(16);
    for m in 0..2u8 {
        for n in 0..2u8 {
            for mu in 0..2 {
                for nu in 0..2 {
                    v.push(MomentIndex::raw(m, n, mu, nu));
                }
            }
        }
    }
    v
}

/// Delayed `g̃^(2)_a(τ) = <a†(a†a)(τ)a> / <a†a>²` of the detector field.
///
/// The vector `f_O(τ) = <a† O(τ) a>` over the sixteen operators of
/// [`regression_basis`] closes under the regression equations. Initial values
/// are sensor-limit steady-state moments `C(m, n, μ+1, ν+1)`.
pub fn g2_tau_filtered(
    params: &SystemParams,
    h: &HomodyneConfig,
    t: &TruncationConfig,
    tau_grid: &[f64],
) -> Result<CorrelationSeries> {
    t.check_order(2)?;
    check_tau_grid(tau_grid)?;
    let p = params.with_homodyne(h);
    let pn = p.normalized();
    let table = solve_sensor_hierarchy(&p, 6)?;
    let basis = regression_basis();
    let dim = basis.len();
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for (row, idx) in basis.iter().enumerate() {
        for (target, c) in regression_coefficients(*idx, &pn) {
            let col = basis
                .iter()
                .position(|b| *b == target)
                .expect("regression basis is closed");
            m[(row, col)] += c;
        }
    }
    let mut f0 = DVector::<C64>::zeros(dim);
    for (i, idx) in basis.iter().enumerate() {
        f0[i] = table.get(MomentIndex::raw(idx.m, idx.n, idx.mu + 1, idx.nu + 1))?;
    }
    let na = table.detector_population()?;
    if !(na > 0.0) {
        return Err(Error::ZeroPopulation);
    }
    let j = basis
        .iter()
        .position(|b| *b == MomentIndex::detector(1, 1))
        .expect("population in basis");
    let prop = Propagator::new(m);
    // delays are in units of 1/γ_σ of the caller; the matrix is normalized
    let scale = params.gamma_sigma;
    let norm = na * na;
    let values = tau_grid
        .iter()
        .map(|&tau| prop.apply(tau * scale, &f0)[j] / norm)
        .collect();
    log::debug!(
        "g2_tau_filtered: g2(0) from moments {:?}",
        gn_from_moments(&table, 2).ok()
    );
    Ok(CorrelationSeries {
        tau_grid: tau_grid.to_vec(),
        values,
        label: if h.is_active() {
            "g2_homodyne(tau)".into()
        } else {
            "g2_filtered(tau)".into()
        },
        normalization: norm,
        params: p,
    })
}

/// Emission spectrum `S(ω) = Re ∫_0^∞ <σ†σ(τ)> e^{(iω − Γ/2)τ} dτ / (π <n_σ>)`.
///
/// Without `resolution` the coherent part stays a delta of weight
/// `|<σ>|²/<n_σ>` at `ω = 0`; with a detector linewidth it becomes a
/// Lorentzian of that width.
pub fn spectrum_numeric(
    params: &SystemParams,
    resolution: Option<f64>,
    omega_grid: &[f64],
) -> Result<SpectrumCurve> {
    params.check()?;
    if omega_grid.len() < 2 {
        return Err(Error::Grid("empty grid".into()));
    }
    if omega_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Grid("frequency grid must be strictly increasing".into()));
    }
    let mut finest = params.gamma_sigma;
    if let Some(g) = resolution {
        if !(g > 0.0) {
            return Err(Error::InvalidParams("resolution must be positive".into()));
        }
        finest = finest.min(g);
    }
    let step = omega_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    if step > 0.5 * finest {
        return Err(Error::Grid(format!(
            "frequency step {step} too coarse for linewidth {finest}"
        )));
    }
    let (alpha, n) = crate::analytic::tls_steady_state(params.omega_sigma, params.gamma_sigma);
    if !(n > 0.0) {
        return Err(Error::ZeroPopulation);
    }
    let (_, prop, x0, _) = correlator_vectors(Operator::SigmaDag, Operator::Identity, params, &[0.0])?;
    let coherent = alpha.norm_sqr() / n;
    let half = 0.5 * resolution.unwrap_or(0.0);
    let pi = std::f64::consts::PI;
    let density = omega_grid
        .iter()
        .map(|&w| {
            let s = C64::new(half, -w);
            let incoh = prop
                .laplace(s, &x0)
                .map(|v| v[Component::Sigma as usize].re)
                .unwrap_or(f64::NAN)
                / (pi * n);
            let coh = if resolution.is_some() {
                coherent * half / pi / (half * half + w * w)
            } else {
                0.0
            };
            (incoh + coh).max(0.0)
        })
        .collect();
    Ok(SpectrumCurve {
        omega_grid: omega_grid.to_vec(),
        density,
        delta_weight: if resolution.is_some() { 0.0 } else { coherent },
        delta_location: 0.0,
        resolution,
    })
}

/// Largest grid delay up to which the series stays at or below `threshold`.
pub fn plateau_width(series: &CorrelationSeries, threshold: f64) -> f64 {
    let mut width = 0.0;
    for (t, v) in series.tau_grid.iter().zip(&series.values) {
        if v.re > threshold {
            break;
        }
        width = *t;
    }
    width
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{compensation_condition, gn_filtered};
    use crate::moments::solve_sensor_hierarchy;

    fn emitter(w: f64) -> SystemParams {
        SystemParams::new(w, 1.0, 1.0, 0.0, 0.0)
    }

    #[test]
    fn closed_form_limits() {
        for w in [1e-3, 0.05, 0.125, 1.0] {
            assert_eq!(g2_tau_sigma_closed_form(w, 1.0, 0.0), 0.0);
            assert!((g2_tau_sigma_closed_form(w, 1.0, 200.0) - 1.0).abs() < 1e-12);
        }
        assert!(sigma_g2_oscillates(0.2, 1.0));
        assert!(!sigma_g2_oscillates(0.1, 1.0));
        // overshoot above 1 only in the oscillating regime
        let grid = linear_grid(30.0, 3001);
        let over = |w: f64| grid.iter().any(|&t| g2_tau_sigma_closed_form(w, 1.0, t) > 1.0 + 1e-9);
        assert!(over(1.0));
        assert!(!over(0.05));
    }

    #[test]
    fn regression_reproduces_closed_form() {
        let grid = linear_grid(20.0, 401);
        for w in [1e-3, 0.05, 0.125, 1.0] {
            let s = g2_tau_sigma(&emitter(w), &grid).unwrap();
            for (t, v) in grid.iter().zip(&s.values) {
                assert!((v.re - g2_tau_sigma_closed_form(w, 1.0, *t)).abs() < 1e-10, "{w} {t} {v} {}", g2_tau_sigma_closed_form(w, 1.0, *t));
                assert!(v.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn initial_conditions() {
        let p = emitter(0.3);
        let s = two_time_correlator(Operator::Identity, Operator::Sigma, Component::SigmaDag, &p, &[0.0, 1.0])
            .unwrap();
        let (_, n) = crate::analytic::tls_steady_state(0.3, 1.0);
        assert!((s.values[0] - C64::new(n, 0.0)).norm() < 1e-15);
        let z = two_time_correlator(Operator::SigmaDag, Operator::Sigma, Component::Population, &emitter(0.0), &[0.0, 1.0, 5.0])
            .unwrap();
        assert!(z.values.iter().all(|v| v.norm() == 0.0));
        assert!(matches!("foo".parse::<Operator>(), Err(Error::UnsupportedOperator(_))));
    }

    #[test]
    fn grid_validation() {
        let p = emitter(0.1);
        assert!(g2_tau_sigma(&p, &[]).is_err());
        assert!(g2_tau_sigma(&p, &[0.1, 0.2]).is_err());
        assert!(g2_tau_sigma(&p, &[0.0, 0.2, 0.2]).is_err());
    }

    #[test]
    fn filtered_delay_zero_matches_moments() {
        let t = TruncationConfig::default();
        for (gam, fp) in [(0.2, 0.0), (1.0, 0.0), (0.2, compensation_condition(1.0, 0.2).f_minus), (5.0, 0.7)] {
            let p = SystemParams::new(1e-3, 1.0, gam, 1e-3, 0.0);
            let h = HomodyneConfig::with_f_prime(fp);
            let s = g2_tau_filtered(&p, &h, &t, &[0.0, 1.0]).unwrap();
            let tab = solve_sensor_hierarchy(&p.with_homodyne(&h), 4).unwrap();
            let g0 = gn_from_moments(&tab, 2).unwrap();
            assert!((s.values[0].re - g0).abs() < 1e-8);
        }
        let p = SystemParams::new(1e-3, 1.0, 0.2, 1e-3, 0.0);
        let s = g2_tau_filtered(&p, &HomodyneConfig::none(), &t, &[0.0]).unwrap();
        assert!((s.values[0].re - gn_filtered(2, 1.0, 0.2)).abs() < 1e-4);
    }

    #[test]
    fn filtered_series_is_grid_stable() {
        let p = SystemParams::new(1e-3, 1.0, 0.2, 1e-3, 0.0);
        let h = HomodyneConfig::with_f_prime(compensation_condition(1.0, 0.2).f_minus);
        let t = TruncationConfig::default();
        let coarse = g2_tau_filtered(&p, &h, &t, &linear_grid(10.0, 51)).unwrap();
        let fine = g2_tau_filtered(&p, &h, &t, &linear_grid(10.0, 101)).unwrap();
        for (i, v) in coarse.values.iter().enumerate() {
            assert!((v - fine.values[2 * i]).norm() < 1e-8);
        }
    }

    #[test]
    fn plateau_rules() {
        let mk = |v: Vec<f64>| CorrelationSeries {
            tau_grid: (0..v.len()).map(|i| i as f64).collect(),
            values: v.into_iter().map(|x| C64::new(x, 0.0)).collect(),
            label: "x".into(),
            normalization: 1.0,
            params: SystemParams::default(),
        };
        assert_eq!(plateau_width(&mk(vec![0.0; 5]), 0.05), 4.0);
        assert_eq!(plateau_width(&mk(vec![0.7, 0.0, 0.0]), 0.05), 0.0);
        assert_eq!(plateau_width(&mk(vec![0.0, 0.01, 0.2, 0.0]), 0.05), 1.0);
    }

    #[test]
    fn spectrum_normalization_and_width() {
        let p = emitter(0.3);
        let grid: Vec<f64> = (0..=80_000).map(|i| -2000.0 + i as f64 * 0.05).collect();
        let s = spectrum_numeric(&p, None, &grid).unwrap();
        assert!((s.integral() + s.delta_weight - 1.0).abs() < 1e-3);
        let heitler = SystemParams::new(1e-3, 1.0, 1.0, 0.0, 0.0);
        let fine: Vec<f64> = (0..=4000).map(|i| -2.0 + i as f64 * 1e-3).collect();
        let r = spectrum_numeric(&heitler, Some(0.2), &fine).unwrap();
        assert!((r.fwhm().unwrap() / 0.2 - 1.0).abs() < 1e-2);
        assert!(spectrum_numeric(&heitler, Some(0.2), &[0.0, 0.5]).is_err());
    }
}
