//! Data behind each figure, as named CSV files.

use std::str::FromStr;

use heitler::acceptance::MonteCarloPlan;
use heitler::analytic::{
    compensation_condition, decompose_g2, emission_rates, g2_homodyne, gn_filtered, FieldMoments,
};
use heitler::dynamics::{g2_tau_filtered, linear_grid};
use heitler::model::{HomodyneConfig, SystemParams, TruncationConfig};
use heitler::moments::solve_recursive;
use heitler::trajectories::{
    coherent_cdf, required_duration, simulate_clicks, simulate_poisson, waiting_time_cdf,
    WaitingTimeCdf,
};
use heitler::Result;
use rayon::prelude::*;

use crate::output::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    F2a,
    F2b,
    F3a,
    F3b,
    F3c,
    F3d,
    F4,
}

impl FromStr for FigureId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "2a" => Self::F2a,
            "2b" => Self::F2b,
            "3a" => Self::F3a,
            "3b" => Self::F3b,
            "3c" => Self::F3c,
            "3d" => Self::F3d,
            "4" => Self::F4,
            other => return Err(format!("unknown figure id '{other}' (expected 2a, 2b, 3a, 3b, 3c, 3d or 4)")),
        })
    }
}

pub struct Inputs {
    pub params: SystemParams,
    pub homodyne: HomodyneConfig,
    pub truncation: TruncationConfig,
    pub seed: u64,
    pub quick: bool,
}

pub struct Figure {
    pub files: Vec<(String, String)>,
    pub seeds: Vec<u64>,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn decomposition_table(axis: &str) -> Table {
    Table::new(&[axis, "g2", "base", "i0", "i1", "i2"])
}

pub fn render(id: FigureId, inp: &Inputs) -> Result<Figure> {
    let files = match id {
        FigureId::F2a => vec![("figure_2a.csv".to_string(), figure_2a(inp)?)],
        FigureId::F2b => vec![("figure_2b.csv".to_string(), figure_2b(inp)?)],
        FigureId::F3a => vec![("figure_3a.csv".to_string(), figure_3ab(inp, false)?)],
        FigureId::F3b => vec![("figure_3b.csv".to_string(), figure_3ab(inp, true)?)],
        FigureId::F3c => vec![("figure_3c.csv".to_string(), figure_3c(inp)?)],
        FigureId::F3d => {
            let (csv, seeds) = figure_3d(inp)?;
            return Ok(Figure {
                files: vec![("figure_3d.csv".to_string(), csv)],
                seeds,
            });
        }
        FigureId::F4 => vec![("figure_4.csv".to_string(), figure_4(inp)?)],
    };
    Ok(Figure { files, seeds: vec![] })
}

/// Emitter-field decomposition against the drive.
fn figure_2a(inp: &Inputs) -> Result<String> {
    let gs = inp.params.gamma_sigma;
    let mut t = decomposition_table("omega_sigma");
    for w in log_space(1e-3 * gs, 1e2 * gs, 101) {
        let d = decompose_g2(&FieldMoments::two_level(w, gs))?;
        t.push(vec![w, d.g2, d.base, d.i0, d.i1, d.i2]);
    }
    Ok(t.to_csv())
}

/// Detector-field decomposition against the detector linewidth.
fn figure_2b(inp: &Inputs) -> Result<String> {
    let gs = inp.params.gamma_sigma;
    let rows: Vec<Result<Vec<f64>>> = log_space(1e-2 * gs, 1e2 * gs, 101)
        .into_par_iter()
        .map(|gam| {
            let p = inp.params.with_linewidth(gam);
            let d = decompose_g2(&FieldMoments::detector(&solve_recursive(&p, 4)?)?)?;
            Ok(vec![gam, d.g2, d.base, d.i0, d.i1, d.i2])
        })
        .collect();
    let mut t = decomposition_table("Gamma");
    for r in rows {
        t.push(r?);
    }
    Ok(t.to_csv())
}

fn tau_points(inp: &Inputs) -> usize {
    if inp.quick {
        100
    } else {
        400
    }
}

/// `g2(τ)` over a grid of linewidths, plain or at `F'₂,₋(Γ)`.
fn figure_3ab(inp: &Inputs, compensated: bool) -> Result<String> {
    let gs = inp.params.gamma_sigma;
    let n_gamma = if inp.quick { 12 } else { 60 };
    let taus = linear_grid(10.0 / gs, tau_points(inp));
    let blocks: Vec<Result<Vec<Vec<f64>>>> = log_space(1e-2 * gs, 1e2 * gs, n_gamma)
        .into_par_iter()
        .map(|gam| {
            let p = inp.params.with_linewidth(gam);
            let h = if compensated {
                HomodyneConfig::new(compensation_condition(gs, gam).f_minus, inp.homodyne.t)
            } else {
                HomodyneConfig::none()
            };
            let s = g2_tau_filtered(&p, &h, &inp.truncation, &taus)?;
            Ok(taus.iter().zip(s.real()).map(|(&tau, g)| vec![gam, tau, g]).collect())
        })
        .collect();
    let mut t = Table::new(&["Gamma", "tau", "g2"]);
    for b in blocks {
        for row in b? {
            t.push(row);
        }
    }
    Ok(t.to_csv())
}

/// Plain and compensated `g2(τ)` at `Γ = γ/5`.
fn figure_3c(inp: &Inputs) -> Result<String> {
    let gs = inp.params.gamma_sigma;
    let p = inp.params.with_linewidth(0.2 * gs);
    let taus = linear_grid(10.0 / gs, tau_points(inp) + 1);
    let fp = compensation_condition(gs, 0.2 * gs).f_minus;
    let plain = g2_tau_filtered(&p, &HomodyneConfig::none(), &inp.truncation, &taus)?;
    let comp = g2_tau_filtered(&p, &HomodyneConfig::new(fp, inp.homodyne.t), &inp.truncation, &taus)?;
    let mut t = Table::new(&["tau", "g2_plain", "g2_compensated"]);
    for ((tau, a), b) in taus.iter().zip(plain.real()).zip(comp.real()) {
        t.push(vec![*tau, a, b]);
    }
    Ok(t.to_csv())
}

/// Waiting-time CDFs of the compensated, plain and coherent sources.
fn figure_3d(inp: &Inputs) -> Result<(String, Vec<u64>)> {
    let mut plan = MonteCarloPlan::default();
    if inp.quick {
        plan.clicks_plain = 10_000;
        plan.clicks_compensated = 10_000;
        plan.clicks_coherent = 10_000;
    }
    let seeds = vec![inp.seed, inp.seed + 1, inp.seed + 2];
    let cdfs: Vec<Result<WaitingTimeCdf>> = (0..3usize)
        .into_par_iter()
        .map(|k| source_cdf(&plan, k, seeds[k]))
        .collect();
    let mut cdfs = cdfs.into_iter().collect::<Result<Vec<_>>>()?;
    let coh = cdfs.pop().expect("three sources");
    let plain = cdfs.pop().expect("three sources");
    let comp = cdfs.pop().expect("three sources");
    let mut t = Table::new(&["x", "cdf_compensated", "cdf_plain", "cdf_coherent", "cdf_coherent_exact"]);
    for (i, &x) in comp.x_grid.iter().enumerate() {
        t.push(vec![x, comp.cdf[i], plain.cdf[i], coh.cdf[i], coherent_cdf(x)]);
    }
    Ok((t.to_csv(), seeds))
}

/// Source 0 compensated, 1 plain, 2 coherent.
fn source_cdf(plan: &MonteCarloPlan, which: usize, seed: u64) -> Result<WaitingTimeCdf> {
    if which == 2 {
        return waiting_time_cdf(&simulate_poisson(1.0, plan.clicks_coherent as f64, seed)?);
    }
    let p = SystemParams::new(plan.omega_sigma, 1.0, plan.gamma_det, plan.g, 0.0);
    let t = TruncationConfig {
        n_max: plan.n_max,
        tol: 1e-6,
        ..Default::default()
    };
    let (h, clicks) = if which == 0 {
        (
            HomodyneConfig::with_f_prime(compensation_condition(1.0, plan.gamma_det).f_minus),
            plan.clicks_compensated,
        )
    } else {
        (HomodyneConfig::none(), plan.clicks_plain)
    };
    let duration = required_duration(&p, &h, &t, clicks)?;
    waiting_time_cdf(&simulate_clicks(&p, &h, &t, duration, seed)?)
}

/// `(g2, I)` traces against the linewidth, plain and compensated.
fn figure_4(inp: &Inputs) -> Result<String> {
    let gs = inp.params.gamma_sigma;
    let tr = inp.homodyne.t;
    let mut t = Table::new(&["Gamma", "g2_plain", "rate_plain", "g2_compensated", "rate_compensated"]);
    for gam in log_space(1e-2 * gs, 1e2 * gs, 101) {
        let p = inp.params.with_linewidth(gam);
        let fp = compensation_condition(gs, gam).f_minus;
        let plain = emission_rates(&p, &HomodyneConfig::new(0.0, tr))?;
        let comp = emission_rates(&p, &HomodyneConfig::new(fp, tr))?;
        t.push(vec![
            gam,
            gn_filtered(2, gs, gam),
            plain.i_int,
            g2_homodyne(gs, gam, fp)?,
            comp.i_int,
        ]);
    }
    Ok(t.to_csv())
}
