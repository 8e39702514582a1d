//! Quantum-jump unraveling of the emitter + detector master equation and
//! photon-click statistics.
//!
//! Two jump channels, `√γ σ` and `√Γ a`; only detector jumps are recorded as
//! clicks. Between jumps the state follows `exp(-i H_eff t)` with
//! `H_eff = H − (i/2)(γ σ†σ + Γ a†a)`, and the next jump happens when the
//! survival probability `‖ψ(t)‖²` drops to a uniform random level. Times are
//! in units of `1/γ_σ`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::linalg::Propagator;
use crate::model::{HomodyneConfig, SystemParams, TruncationConfig};
use crate::moments::{liouvillian_steady_state, MomentTable};
use crate::{Error, Result, C64};

/// Relative precision of the jump times.
pub const JUMP_TIME_RTOL: f64 = 1e-8;

/// Click counts below this trigger a warning in [`waiting_time_cdf`].
pub const RECOMMENDED_CLICKS: usize = 10_000;

/// Detector click times of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickTrain {
    pub times: Vec<f64>,
    pub duration: f64,
    pub params: SystemParams,
    pub seed: u64,
    /// Emitter (unrecorded) jumps over the same window.
    pub emitter_jumps: usize,
}

impl ClickTrain {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rate(&self) -> f64 {
        self.times.len() as f64 / self.duration
    }

    /// One-sigma Poisson error of [`ClickTrain::rate`].
    pub fn rate_stderr(&self) -> f64 {
        (self.times.len() as f64).sqrt() / self.duration
    }

    /// Trains laid end to end, in order.
    pub fn concat(trains: &[ClickTrain]) -> Option<ClickTrain> {
        let first = trains.first()?;
        let mut out = ClickTrain {
            times: Vec::new(),
            duration: 0.0,
            params: first.params,
            seed: first.seed,
            emitter_jumps: 0,
        };
        for t in trains {
            out.times.extend(t.times.iter().map(|x| x + out.duration));
            out.duration += t.duration;
            out.emitter_jumps += t.emitter_jumps;
        }
        Some(out)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.times.len() * 24 + 8);
        s.push_str("t\n");
        for t in &self.times {
            let _ = writeln!(s, "{t:e}");
        }
        s
    }
}

/// State space `emitter ⊗ Fock(0..=n_max)`, index `e (n_max + 1) + n`.
struct Space {
    nf: usize,
    sigma: DMatrix<C64>,
    a: DMatrix<C64>,
}

impl Space {
    fn new(n_max: usize) -> Self {
        let nf = n_max + 1;
        let d = 2 * nf;
        let mut sigma = DMatrix::zeros(d, d);
        let mut a = DMatrix::zeros(d, d);
        for n in 0..nf {
            sigma[(n, nf + n)] = C64::new(1.0, 0.0);
            if n > 0 {
                for e in 0..2 {
                    a[(e * nf + n - 1, e * nf + n)] = C64::new((n as f64).sqrt(), 0.0);
                }
            }
        }
        Self { nf, sigma, a }
    }

    fn dim(&self) -> usize {
        2 * self.nf
    }
}

/// Survival bookkeeping for one no-jump stretch.
struct Stretch<'a> {
    prop: &'a Propagator,
    modal: Option<crate::linalg::Modal>,
    psi0: DVector<C64>,
    /// Diagonal of `γ σ†σ + Γ a†a`.
    loss: &'a [f64],
}

impl<'a> Stretch<'a> {
    fn new(prop: &'a Propagator, psi0: DVector<C64>, loss: &'a [f64]) -> Self {
        Self {
            prop,
            modal: prop.modal(&psi0),
            psi0,
            loss,
        }
    }

    fn state(&self, t: f64) -> DVector<C64> {
        match &self.modal {
            Some(m) => m.at(t),
            None => self.prop.apply(t, &self.psi0),
        }
    }

    /// Survival `S(t)` and `dS/dt`.
    fn survival(&self, t: f64) -> (f64, f64, DVector<C64>) {
        let psi = self.state(t);
        let mut s = 0.0;
        let mut ds = 0.0;
        for (z, l) in psi.iter().zip(self.loss) {
            let p = z.norm_sqr();
            s += p;
            ds -= l * p;
        }
        (s, ds, psi)
    }

    /// First time in `(0, horizon]` at which the survival reaches `r`, or
    /// `None` when it stays above.
    fn jump_time(&self, r: f64, horizon: f64, first_step: f64) -> Option<(f64, DVector<C64>)> {
        let mut lo = 0.0;
        let mut hi = first_step.min(horizon);
        loop {
            let (s, _, _) = self.survival(hi);
            if s <= r {
                break;
            }
            if hi >= horizon {
                return None;
            }
            lo = hi;
            hi = (2.0 * hi).min(horizon);
        }
        // safeguarded Newton on S(t) - r
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (s, ds, psi) = self.survival(t);
            let f = s - r;
            if f > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= JUMP_TIME_RTOL * hi {
                return Some((t, psi));
            }
            let newton = if ds < 0.0 { t - f / ds } else { f64::NAN };
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - t).abs() <= JUMP_TIME_RTOL * t.max(f64::MIN_POSITIVE) {
                return Some((next, self.state(next)));
            }
            t = next;
        }
        Some((t, self.state(t)))
    }
}

/// Time spent in the initial transient before clicks are recorded.
pub fn burn_in(params: &SystemParams) -> f64 {
    let p = params.normalized();
    50.0 / p.gamma_det.min(1.0)
}

/// One quantum-jump trajectory of length `duration` (after a burn-in),
/// recording detector jumps.
///
/// Returns [`Error::TruncationInsufficient`] when the top Fock level of a
/// post-jump state holds more than `t.tol`.
pub fn simulate_clicks(
    params: &SystemParams,
    h: &HomodyneConfig,
    t: &TruncationConfig,
    duration: f64,
    seed: u64,
) -> Result<ClickTrain> {
    params.check()?;
    if !(duration > 0.0) {
        return Err(Error::InvalidParams("duration must be positive".into()));
    }
    let scale = params.gamma_sigma;
    let p = params.with_homodyne(h).normalized();
    let sp = Space::new(t.n_max);
    let d = sp.dim();
    let i = C64::new(0.0, 1.0);
    let sd = sp.sigma.adjoint();
    let ad = sp.a.adjoint();
    let ham = (&sp.sigma + &sd) * C64::new(p.omega_sigma, 0.0)
        + (&ad * &sp.sigma + &sd * &sp.a) * C64::new(p.g, 0.0)
        + (&ad - &sp.a) * (i * p.omega_a);
    let loss: Vec<f64> = (0..d)
        .map(|k| (k / sp.nf) as f64 * 1.0 + (k % sp.nf) as f64 * p.gamma_det)
        .collect();
    let damp = DMatrix::from_diagonal(&DVector::from_iterator(
        d,
        loss.iter().map(|l| C64::new(0.5 * l, 0.0)),
    ));
    let k = -(ham * i) - damp;
    let prop = Propagator::new(k);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = burn_in(&p);
    let end = start + duration * scale;
    let first_step = 1.0 / (1.0 + p.gamma_det);

    let mut psi = DVector::<C64>::zeros(d);
    psi[0] = C64::new(1.0, 0.0);
    let mut now = 0.0;
    let mut times = Vec::new();
    let mut emitter_jumps = 0usize;
    loop {
        let r: f64 = rng.random();
        let stretch = Stretch::new(&prop, psi.clone(), &loss);
        let Some((dt, state)) = stretch.jump_time(r, end - now, first_step) else {
            break;
        };
        now += dt;
        let ps = &sp.sigma * &state;
        let pa = &sp.a * &state;
        let ws = ps.norm_squared();
        let wa = p.gamma_det * pa.norm_squared();
        let u: f64 = rng.random();
        let (next, detector) = if u * (ws + wa) < wa { (pa, true) } else { (ps, false) };
        let norm = next.norm();
        psi = next.unscale(norm);
        let top: f64 = (0..2).map(|e| psi[e * sp.nf + t.n_max].norm_sqr()).sum();
        if top > t.tol {
            return Err(Error::TruncationInsufficient {
                population: top,
                tol: t.tol,
            });
        }
        if now >= start {
            if detector {
                times.push((now - start) / scale);
            } else {
                emitter_jumps += 1;
            }
        }
    }
    Ok(ClickTrain {
        times,
        duration,
        params: *params,
        seed,
        emitter_jumps,
    })
}

/// Independent trajectories, one per seed, in seed order.
pub fn simulate_batch(
    params: &SystemParams,
    h: &HomodyneConfig,
    t: &TruncationConfig,
    duration: f64,
    seeds: &[u64],
) -> Result<Vec<ClickTrain>> {
    seeds
        .iter()
        .map(|&s| simulate_clicks(params, h, t, duration, s))
        .collect()
}

/// Poisson click train, the statistics of a coherent source.
pub fn simulate_poisson(rate: f64, duration: f64, seed: u64) -> Result<ClickTrain> {
    if !(rate > 0.0) || !(duration > 0.0) {
        return Err(Error::InvalidParams("rate and duration must be positive".into()));
    }
    let exp = Exp::new(rate).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::new();
    let mut now = exp.sample(&mut rng);
    while now <= duration {
        times.push(now);
        now += exp.sample(&mut rng);
    }
    Ok(ClickTrain {
        times,
        duration,
        params: SystemParams::default(),
        seed,
        emitter_jumps: 0,
    })
}

/// Steady-state click rate `Γ <a†a>` from the full master equation.
pub fn steady_click_rate(params: &SystemParams, h: &HomodyneConfig, t: &TruncationConfig) -> Result<f64> {
    let rho = liouvillian_steady_state(params, h, t)?;
    let table: MomentTable = rho.moments(&params.with_homodyne(h), 2);
    Ok(params.gamma_det * table.detector_population()? / params.gamma_sigma)
}

/// Duration needed for `clicks` expected detector clicks.
pub fn required_duration(
    params: &SystemParams,
    h: &HomodyneConfig,
    t: &TruncationConfig,
    clicks: usize,
) -> Result<f64> {
    let rate = steady_click_rate(params, h, t)?;
    if !(rate > 0.0) {
        return Err(Error::ZeroPopulation);
    }
    Ok(clicks as f64 / rate)
}

/// Empirical CDF of consecutive-click gaps against `x = I Δτ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitingTimeCdf {
    pub x_grid: Vec<f64>,
    pub cdf: Vec<f64>,
    pub n_pairs: usize,
    pub rate_i: f64,
    /// Sorted normalized gaps.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl WaitingTimeCdf {
    /// One-sigma binomial error of each CDF point.
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.n_pairs as f64;
        self.cdf.iter().map(|&c| (c * (1.0 - c) / n).sqrt()).collect()
    }

    /// Empirical CDF at an arbitrary `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.samples.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,cdf\n");
        for (x, c) in self.x_grid.iter().zip(&self.cdf) {
            let _ = writeln!(s, "{x:e},{c:e}");
        }
        s
    }
}

/// Log-spaced `x` grid of the waiting-time CDF: 20 points per decade over
/// `[1e-6, 1e3]`.
pub fn default_x_grid() -> Vec<f64> {
    (0..=180).map(|i| 10f64.powf(-6.0 + i as f64 / 20.0)).collect()
}

pub fn waiting_time_cdf(train: &ClickTrain) -> Result<WaitingTimeCdf> {
    waiting_time_cdf_on(train, &default_x_grid())
}

pub fn waiting_time_cdf_on(train: &ClickTrain, x_grid: &[f64]) -> Result<WaitingTimeCdf> {
    if train.len() < 2 {
        return Err(Error::TooFewClicks(train.len()));
    }
    if train.len() < RECOMMENDED_CLICKS {
        log::warn!(
            "waiting-time CDF from {} clicks; at least {} recommended",
            train.len(),
            RECOMMENDED_CLICKS
        );
    }
    let rate = train.rate();
    let mut samples: Vec<f64> = train.times.windows(2).map(|w| rate * (w[1] - w[0])).collect();
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let cdf = x_grid
        .iter()
        .map(|&x| samples.partition_point(|&s| s <= x) as f64 / n as f64)
        .collect();
    Ok(WaitingTimeCdf {
        x_grid: x_grid.to_vec(),
        cdf,
        n_pairs: n,
        rate_i: rate,
        samples,
    })
}

/// Reference CDF of a coherent source, `1 − exp(−x)`.
pub fn coherent_cdf(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// Kolmogorov–Smirnov distance between the gap sample and `reference`.
pub fn ks_statistic<F: Fn(f64) -> f64>(cdf: &WaitingTimeCdf, reference: F) -> f64 {
    let n = cdf.samples.len() as f64;
    cdf.samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = reference(x);
            (f - i as f64 / n).abs().max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov p-value of distance `d` for `n` samples.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Coincidence estimate of `g^(2)(0)`: pairs closer than `window`, over the
/// count expected for uncorrelated clicks at the same rate.
pub fn g2_zero_from_clicks(train: &ClickTrain, window: f64) -> Result<(f64, f64)> {
    if train.is_empty() {
        return Err(Error::TooFewClicks(0));
    }
    if !(window > 0.0) {
        return Err(Error::InvalidParams("window must be positive".into()));
    }
    let rate = train.rate();
    if window * rate > 0.1 {
        log::warn!("coincidence window {window} is not small against 1/I = {}", 1.0 / rate);
    }
    let t = &train.times;
    let mut pairs = 0usize;
    let mut j = 0;
    for i in 0..t.len() {
        if j < i + 1 {
            j = i + 1;
        }
        while j < t.len() && t[j] - t[i] <= window {
            j += 1;
        }
        pairs += j - i - 1;
    }
    let expected: f64 = t
        .iter()
        .map(|&ti| rate * window.min(train.duration - ti))
        .sum();
    let k = pairs as f64;
    let n = t.len() as f64;
    let err = (k.max(1.0) * (1.0 - k / n).max(0.0)).sqrt() / expected;
    Ok((k / expected, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trunc(n_max: usize) -> TruncationConfig {
        TruncationConfig {
            n_max,
            tol: 1e-6,
            ..Default::default()
        }
    }

    #[test]
    fn undriven_train_is_empty() {
        let p = SystemParams::new(0.0, 1.0, 0.2, 0.1, 0.0);
        let c = simulate_clicks(&p, &HomodyneConfig::none(), &trunc(3), 1e4, 1).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.emitter_jumps, 0);
    }

    #[test]
    fn same_seed_same_train() {
        let p = SystemParams::new(0.2, 1.0, 0.5, 0.2, 0.0);
        let a = simulate_clicks(&p, &HomodyneConfig::none(), &trunc(4), 2e3, 7).unwrap();
        let b = simulate_clicks(&p, &HomodyneConfig::none(), &trunc(4), 2e3, 7).unwrap();
        let c = simulate_clicks(&p, &HomodyneConfig::none(), &trunc(4), 2e3, 8).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
        assert_ne!(a.times, c.times);
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
        assert!(a.times.iter().all(|&x| (0.0..=a.duration).contains(&x)));
    }

    #[test]
    fn survival_decay_matches_loss_integral() {
        let p = SystemParams::new(0.3, 1.0, 0.5, 0.2, 0.0);
        let sp = Space::new(3);
        let d = sp.dim();
        let i = C64::new(0.0, 1.0);
        let sd = sp.sigma.adjoint();
        let ad = sp.a.adjoint();
        let ham = (&sp.sigma + &sd) * C64::new(p.omega_sigma, 0.0)
            + (&ad * &sp.sigma + &sd * &sp.a) * C64::new(p.g, 0.0);
        let loss: Vec<f64> = (0..d).map(|k| (k / sp.nf) as f64 + (k % sp.nf) as f64 * p.gamma_det).collect();
        let damp = DMatrix::from_diagonal(&DVector::from_iterator(d, loss.iter().map(|l| C64::new(0.5 * l, 0.0))));
        let prop = Propagator::new(-(ham * i) - damp);
        let mut psi0 = DVector::zeros(d);
        psi0[sp.nf + 1] = C64::new(1.0, 0.0);
        let st = Stretch::new(&prop, psi0, &loss);
        // Simpson integral of -dS/dt against S(0) - S(T)
        let tt = 3.0;
        let n = 2000;
        let h = tt / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * st.survival(k as f64 * h).1;
        }
        acc *= h / 3.0;
        let drop = st.survival(tt).0 - st.survival(0.0).0;
        assert!((acc - drop).abs() < 1e-8);
        let (t, _) = st.jump_time(0.5, 100.0, 0.1).unwrap();
        assert!((st.survival(t).0 - 0.5).abs() < 1e-7);
    }

    #[test]
    fn poisson_statistics() {
        let train = simulate_poisson(1.0, 2e4, 3).unwrap();
        let (g, e) = g2_zero_from_clicks(&train, 0.01).unwrap();
        assert!((g - 1.0).abs() < 3.0 * e, "{g} {e}");
        let cdf = waiting_time_cdf(&train).unwrap();
        let d = ks_statistic(&cdf, coherent_cdf);
        assert!(ks_p_value(d, cdf.n_pairs) > 1e-3);
        assert!(cdf.cdf.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*cdf.cdf.last().unwrap(), 1.0);
    }

    #[test]
    fn ks_rejects_wrong_law() {
        let train = simulate_poisson(1.0, 2e4, 4).unwrap();
        let cdf = waiting_time_cdf(&train).unwrap();
        let d = ks_statistic(&cdf, |x| -(-1.3 * x).exp_m1());
        assert!(ks_p_value(d, cdf.n_pairs) < 1e-3);
    }

    #[test]
    fn ks_p_value_reference_points() {
        // Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.0098
        assert!((ks_p_value(1.36 / 1e3, 1_000_000) - 0.049).abs() < 2e-3);
        assert!((ks_p_value(1.63 / 1e3, 1_000_000) - 0.0098).abs() < 5e-4);
    }

    #[test]
    fn error_paths() {
        let empty = ClickTrain {
            times: vec![],
            duration: 1.0,
            params: SystemParams::default(),
            seed: 0,
            emitter_jumps: 0,
        };
        assert!(matches!(g2_zero_from_clicks(&empty, 1.0), Err(Error::TooFewClicks(0))));
        assert!(matches!(waiting_time_cdf(&empty), Err(Error::TooFewClicks(0))));
        let p = SystemParams::new(0.0, 1.0, 0.2, 0.1, 0.0);
        assert!(matches!(
            required_duration(&p, &HomodyneConfig::none(), &trunc(3), 100),
            Err(Error::ZeroPopulation)
        ));
    }

    #[test]
    fn concat_offsets_times() {
        let a = simulate_poisson(1.0, 10.0, 1).unwrap();
        let b = simulate_poisson(1.0, 10.0, 2).unwrap();
        let c = ClickTrain::concat(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(c.len(), a.len() + b.len());
        assert_eq!(c.duration, 20.0);
        assert!(c.times.windows(2).all(|w| w[1] > w[0]));
        assert!(c.to_csv().starts_with("t\n"));
    }
}
