//! One-dimensional grid evaluations.

use clap::ValueEnum;
use heitler::analytic::{compensation_condition, emission_rates, gn_filtered, gn_homodyne};
use heitler::dynamics::{g2_tau_filtered, spectrum_numeric};
use heitler::model::{HomodyneConfig, SystemParams, TruncationConfig};
use heitler::{Error, Result};
use rayon::prelude::*;

use crate::axis::Axis;
use crate::output::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    #[value(name = "gN_filtered")]
    GnFiltered,
    #[value(name = "gN_homodyne")]
    GnHomodyne,
    #[value(name = "compensation")]
    Compensation,
    #[value(name = "rates")]
    Rates,
    #[value(name = "spectrum")]
    Spectrum,
    #[value(name = "g2tau")]
    G2Tau,
}

pub struct Setup {
    pub params: SystemParams,
    pub homodyne: HomodyneConfig,
    pub truncation: TruncationConfig,
    pub order: u32,
    pub resolution: Option<f64>,
}

fn with_axis(s: &Setup, name: &str, v: f64) -> Result<(SystemParams, HomodyneConfig)> {
    let mut p = s.params;
    let mut h = s.homodyne;
    match name {
        "Gamma" => p.gamma_det = v,
        "gamma_sigma" => p.gamma_sigma = v,
        "omega_sigma" => p.omega_sigma = v,
        "g" => p.g = v,
        "f_prime" => h.f_prime = v,
        "t" => h = HomodyneConfig::new(h.f_prime, v),
        other => {
            return Err(Error::Grid(format!(
                "axis '{other}' is not a parameter (Gamma, gamma_sigma, omega_sigma, g, f_prime, t)"
            )))
        }
    }
    Ok((p, h))
}

fn columns(q: Quantity, order: u32) -> Vec<String> {
    match q {
        Quantity::GnFiltered | Quantity::GnHomodyne => vec![format!("g{order}")],
        Quantity::Compensation => vec!["f_minus".into(), "f_plus".into()],
        Quantity::Rates => vec!["i_rf".into(), "i_int".into(), "ratio".into()],
        Quantity::Spectrum => vec!["density".into()],
        Quantity::G2Tau => vec!["g2".into()],
    }
}

fn point(q: Quantity, s: &Setup, p: &SystemParams, h: &HomodyneConfig) -> Result<Vec<f64>> {
    Ok(match q {
        Quantity::GnFiltered => vec![gn_filtered(s.order, p.gamma_sigma, p.gamma_det)],
        Quantity::GnHomodyne => vec![gn_homodyne(s.order, p.gamma_sigma, p.gamma_det, h.f_prime)?],
        Quantity::Compensation => {
            let c = compensation_condition(p.gamma_sigma, p.gamma_det);
            vec![c.f_minus, c.f_plus]
        }
        Quantity::Rates => {
            let r = emission_rates(p, h)?;
            vec![r.i_rf, r.i_int, r.ratio]
        }
        Quantity::Spectrum | Quantity::G2Tau => unreachable!("grid quantities"),
    })
}

pub fn run(q: Quantity, axis: &Axis, s: &Setup) -> Result<String> {
    let cols = columns(q, s.order);
    let mut header = vec![axis.name.as_str()];
    header.extend(cols.iter().map(String::as_str));
    let mut table = Table::new(&header);
    match q {
        Quantity::Spectrum => {
            if axis.name != "omega" {
                return Err(Error::Grid("spectrum sweeps take an 'omega' axis".into()));
            }
            let curve = spectrum_numeric(&s.params, s.resolution, &axis.values)?;
            for (w, d) in curve.omega_grid.iter().zip(&curve.density) {
                table.push(vec![*w, *d]);
            }
        }
        Quantity::G2Tau => {
            if axis.name != "tau" {
                return Err(Error::Grid("g2tau sweeps take a 'tau' axis".into()));
            }
            let series = g2_tau_filtered(&s.params, &s.homodyne, &s.truncation, &axis.values)?;
            for (t, g) in axis.values.iter().zip(series.real()) {
                table.push(vec![*t, g]);
            }
        }
        _ => {
            let rows: Vec<Result<Vec<f64>>> = axis
                .values
                .par_iter()
                .map(|&v| {
                    let (p, h) = with_axis(s, &axis.name, v)?;
                    let mut row = vec![v];
                    row.extend(point(q, s, &p, &h)?);
                    Ok(row)
                })
                .collect();
            for r in rows {
                table.push(r?);
            }
        }
    }
    Ok(table.to_csv())
}
