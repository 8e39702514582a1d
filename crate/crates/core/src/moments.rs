//! Steady-state normally ordered moments `<σ†^m σ^n a†^μ a^ν>` of the driven
//! emitter coupled to a detector mode.
//!
//! Three solvers are provided:
//! - [`solve_recursive`]: block recursion on the moment order, leading order
//!   in the emitter drive and exact in the coupling;
//! - [`solve_sensor_hierarchy`]: exact for any drive in the sensor limit (no
//!   back-action of the detector on the emitter);
//! - [`liouvillian_steady_state`]: the full master equation on a truncated
//!   Fock space, used as an independent oracle.
//!
//! Equations of motion are written as `d<O>/dt = Σ c_k <O_k>` with
//! `H = Ω(σ + σ†) + g(a†σ + σ†a) + iΩ_a(a† − a)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::{HomodyneConfig, MomentIndex, SystemParams, TruncationConfig};
use crate::{Error, Result, C64};

/// Largest order accepted by the hierarchy solvers.
pub const MAX_ORDER: usize = 40;

const I: C64 = C64::new(0.0, 1.0);

/// Nonzero couplings in the equation of motion of the moment `idx`.
pub fn regression_coefficients(idx: MomentIndex, p: &SystemParams) -> Vec<(MomentIndex, C64)> {
    let MomentIndex { m, n, mu, nu } = idx;
    let (mf, nf, muf, nuf) = (m as f64, n as f64, mu as f64, nu as f64);
    let mut out: Vec<(MomentIndex, C64)> = Vec::with_capacity(7);
    let mut push = |k: MomentIndex, c: C64| {
        if c != C64::new(0.0, 0.0) {
            out.push((k, c));
        }
    };
    push(
        idx,
        C64::new(-0.5 * p.gamma_sigma * (mf + nf) - 0.5 * p.gamma_det * (muf + nuf), 0.0),
    );
    push(
        MomentIndex::raw(m, 1 - n, mu, nu),
        -I * p.omega_sigma * (nf + 2.0 * mf * (1.0 - nf)),
    );
    push(
        MomentIndex::raw(1 - m, n, mu, nu),
        I * p.omega_sigma * (mf + 2.0 * nf * (1.0 - mf)),
    );
    if nu > 0 {
        push(MomentIndex::raw(m, n, mu, nu - 1), C64::new(p.omega_a * nuf, 0.0));
    }
    if mu > 0 {
        push(MomentIndex::raw(m, n, mu - 1, nu), C64::new(p.omega_a * muf, 0.0));
    }
    if mu > 0 && m == 0 {
        push(MomentIndex::raw(1, n, mu - 1, nu), I * p.g * muf);
    }
    if nu > 0 && n == 0 {
        push(MomentIndex::raw(m, 1, mu, nu - 1), -I * p.g * nuf);
    }
    out
}

/// Steady-state moments keyed by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TableRepr", try_from = "TableRepr")]
pub struct MomentTable {
    entries: BTreeMap<MomentIndex, C64>,
    pub params: SystemParams,
    pub order_max: usize,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    params: SystemParams,
    order_max: usize,
    entries: BTreeMap<String, [f64; 2]>,
}

impl From<MomentTable> for TableRepr {
    fn from(t: MomentTable) -> Self {
        TableRepr {
            params: t.params,
            order_max: t.order_max,
            entries: t
                .entries
                .iter()
                .map(|(k, v)| (k.to_string(), [v.re, v.im]))
                .collect(),
        }
    }
}

impl TryFrom<TableRepr> for MomentTable {
    type Error = Error;

    fn try_from(r: TableRepr) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, [re, im]) in r.entries {
            entries.insert(k.parse::<MomentIndex>()?, C64::new(re, im));
        }
        Ok(MomentTable {
            entries,
            params: r.params,
            order_max: r.order_max,
        })
    }
}

impl MomentTable {
    pub fn new(params: SystemParams, order_max: usize) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(MomentIndex::IDENTITY, C64::new(1.0, 0.0));
        Self {
            entries,
            params,
            order_max,
        }
    }

    pub fn get(&self, idx: MomentIndex) -> Result<C64> {
        self.entries
            .get(&idx)
            .copied()
            .ok_or_else(|| Error::MissingMoment(idx.to_string()))
    }

    pub fn insert(&mut self, idx: MomentIndex, value: C64) {
        self.entries.insert(idx, value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MomentIndex, &C64)> {
        self.entries.iter()
    }

    /// `<a†^μ a^ν>`.
    pub fn detector(&self, mu: u32, nu: u32) -> Result<C64> {
        self.get(MomentIndex::detector(mu, nu))
    }

    /// `<a†a>`.
    pub fn detector_population(&self) -> Result<f64> {
        Ok(self.detector(1, 1)?.re)
    }

    /// `<σ†σ>`.
    pub fn emitter_population(&self) -> Result<f64> {
        Ok(self.get(MomentIndex::raw(1, 1, 0, 0))?.re)
    }

    /// Largest deviation from `C(m,n,μ,ν) = conj C(n,m,ν,μ)`.
    pub fn conjugation_defect(&self) -> f64 {
        self.entries
            .iter()
            .filter_map(|(k, v)| self.entries.get(&k.conjugate()).map(|w| (v - w.conj()).norm()))
            .fold(0.0, f64::max)
    }

    /// Enforce conjugation symmetry by averaging each pair.
    fn symmetrize(&mut self) {
        let keys: Vec<MomentIndex> = self.entries.keys().copied().collect();
        for k in keys {
            let c = k.conjugate();
            if c < k {
                continue;
            }
            let v = self.entries[&k];
            match self.entries.get(&c).copied() {
                Some(w) => {
                    let avg = 0.5 * (v + w.conj());
                    self.entries.insert(k, avg);
                    self.entries.insert(c, avg.conj());
                }
                None => {
                    self.entries.insert(c, v.conj());
                }
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_order(order_max: usize) -> Result<()> {
    if order_max > MAX_ORDER {
        return Err(Error::OrderTooLarge {
            requested: order_max,
            max: MAX_ORDER,
        });
    }
    Ok(())
}

fn dense_solve(a: DMatrix<C64>, b: DVector<C64>, order: usize) -> Result<DVector<C64>> {
    let lu = a.full_piv_lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= 1e-13 * max {
        return Err(Error::SingularBlock { order });
    }
    lu.solve(&b).ok_or(Error::SingularBlock { order })
}

/// Block-recursive steady state, leading order in the emitter drive.
///
/// Block `k` holds the `4k` moments with `m + n + μ + ν = k`. The coupling
/// keeps the order; drives lower it (seeding from solved blocks) or raise it
/// (dropped at leading order).
pub fn solve_recursive(params: &SystemParams, order_max: usize) -> Result<MomentTable> {
    params.check()?;
    check_order(order_max)?;
    let p = params.normalized();
    let mut table = MomentTable::new(*params, order_max);
    for k in 1..=order_max {
        let block = MomentIndex::of_order(k);
        let pos: BTreeMap<MomentIndex, usize> =
            block.iter().enumerate().map(|(i, x)| (*x, i)).collect();
        let dim = block.len();
        let mut a = DMatrix::<C64>::zeros(dim, dim);
        let mut b = DVector::<C64>::zeros(dim);
        for (row, idx) in block.iter().enumerate() {
            for (target, c) in regression_coefficients(*idx, &p) {
                let o = target.order();
                if o == k {
                    a[(row, pos[&target])] += c;
                } else if o < k {
                    b[row] -= c * table.get(target)?;
                }
            }
        }
        let x = dense_solve(a, b, k)?;
        for (i, idx) in block.iter().enumerate() {
            table.insert(*idx, x[i]);
        }
    }
    table.symmetrize();
    Ok(table)
}

/// Exact sensor-limit steady state for any emitter drive.
///
/// Without back-action the detector indices are only ever lowered, so every
/// `(μ, ν)` pair closes on the four emitter combinations. The table holds all
/// moments of order at most `order_max`.
pub fn solve_sensor_hierarchy(params: &SystemParams, order_max: usize) -> Result<MomentTable> {
    params.check()?;
    check_order(order_max)?;
    let p = params.normalized();
    let mut work = MomentTable::new(*params, order_max);
    for d in 0..=order_max as u32 {
        for mu in 0..=d {
            let nu = d - mu;
            let block: Vec<MomentIndex> = [(0u8, 0u8), (0, 1), (1, 0), (1, 1)]
                .iter()
                .map(|&(m, n)| MomentIndex::raw(m, n, mu, nu))
                .filter(|x| *x != MomentIndex::IDENTITY)
                .collect();
            let dim = block.len();
            let mut a = DMatrix::<C64>::zeros(dim, dim);
            let mut b = DVector::<C64>::zeros(dim);
            for (row, idx) in block.iter().enumerate() {
                for (target, c) in regression_coefficients(*idx, &p) {
                    if let Some(col) = block.iter().position(|x| *x == target) {
                        a[(row, col)] += c;
                    } else {
                        b[row] -= c * work.get(target)?;
                    }
                }
            }
            let x = dense_solve(a, b, d as usize)?;
            for (i, idx) in block.iter().enumerate() {
                work.insert(*idx, x[i]);
            }
        }
    }
    work.symmetrize();
    work.entries.retain(|k, _| k.order() <= order_max);
    Ok(work)
}

/// Dense density matrix on `emitter ⊗ Fock(0..=n_max)`.
///
/// Basis index of `|e, n>` is `e (n_max + 1) + n`, with `e = 0` the ground
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    pub matrix: DMatrix<C64>,
    pub n_max: usize,
}

impl DensityOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn index(&self, e: usize, n: usize) -> usize {
        e * (self.n_max + 1) + n
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Population of the two highest Fock levels.
    pub fn top_population(&self) -> f64 {
        let lo = self.n_max.saturating_sub(1);
        let mut s = 0.0;
        for e in 0..2 {
            for n in lo..=self.n_max {
                let i = self.index(e, n);
                s += self.matrix[(i, i)].re;
            }
        }
        s
    }

    /// `Tr(σ†^m σ^n a†^μ a^ν ρ)`.
    pub fn moment(&self, idx: MomentIndex) -> C64 {
        let (m, n, mu, nu) = (idx.m as usize, idx.n as usize, idx.mu as usize, idx.nu as usize);
        let mut acc = C64::new(0.0, 0.0);
        for e in 0..2 {
            // emitter: σ^n then σ†^m
            let e1 = if n == 1 {
                if e != 1 {
                    continue;
                }
                0
            } else {
                e
            };
            let e2 = if m == 1 {
                if e1 != 0 {
                    continue;
                }
                1
            } else {
                e1
            };
            for k in nu..=self.n_max {
                let k1 = k - nu;
                let k2 = k1 + mu;
                if k2 > self.n_max {
                    continue;
                }
                let mut c = 1.0;
                for j in k1 + 1..=k {
                    c *= (j as f64).sqrt();
                }
                for j in k1 + 1..=k2 {
                    c *= (j as f64).sqrt();
                }
                // O|e,k> = c|e2,k2>, so Tr(Oρ) picks ρ[(e,k),(e2,k2)]
                acc += c * self.matrix[(self.index(e, k), self.index(e2, k2))];
            }
        }
        acc
    }

    /// All moments up to `order_max`.
    pub fn moments(&self, params: &SystemParams, order_max: usize) -> MomentTable {
        let mut t = MomentTable::new(*params, order_max);
        for k in 1..=order_max {
            for idx in MomentIndex::of_order(k) {
                t.insert(idx, self.moment(idx));
            }
        }
        t.symmetrize();
        t
    }

    /// `row,col,re,im` dump of every entry.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,re,im\n");
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let z = self.matrix[(i, j)];
                let _ = writeln!(s, "{i},{j},{:e},{:e}", z.re, z.im);
            }
        }
        s
    }
}

fn operators(n_max: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let nf = n_max + 1;
    let d = 2 * nf;
    let mut sigma = DMatrix::<C64>::zeros(d, d);
    let mut a = DMatrix::<C64>::zeros(d, d);
    for n in 0..nf {
        sigma[(n, nf + n)] = C64::new(1.0, 0.0);
        for e in 0..2 {
            if n > 0 {
                a[(e * nf + n - 1, e * nf + n)] = C64::new((n as f64).sqrt(), 0.0);
            }
        }
    }
    (sigma, a)
}

/// Superoperator of the master equation acting on row-major `vec(ρ)`.
fn liouvillian(p: &SystemParams, n_max: usize) -> DMatrix<C64> {
    let (s, a) = operators(n_max);
    let d = s.nrows();
    let id = DMatrix::<C64>::identity(d, d);
    let sd = s.adjoint();
    let ad = a.adjoint();
    let h = (&s + &sd) * C64::new(p.omega_sigma, 0.0)
        + (&ad * &s + &sd * &a) * C64::new(p.g, 0.0)
        + (&ad - &a) * (I * p.omega_a);
    let mut l = (h.kronecker(&id) - id.kronecker(&h.transpose())) * (-I);
    for (c, rate) in [(&s, p.gamma_sigma), (&a, p.gamma_det)] {
        let cdc = c.adjoint() * c;
        l += (c.kronecker(&c.conjugate()) * C64::new(2.0, 0.0)
            - cdc.kronecker(&id)
            - id.kronecker(&cdc.transpose()))
            * C64::new(0.5 * rate, 0.0);
    }
    l
}

/// Steady state of the full master equation on the truncated Fock space.
///
/// The superoperator is rescaled by `diag(s_i s_j)` with
/// `s(e, n) = ε_σ^e ε_a^n` (expected amplitudes of each level), so that the
/// tiny elements of high Fock levels come out with full relative accuracy.
pub fn liouvillian_steady_state(
    params: &SystemParams,
    h: &HomodyneConfig,
    t: &TruncationConfig,
) -> Result<DensityOperator> {
    params.check()?;
    if t.n_max < 1 {
        return Err(Error::InvalidParams("n_max must be positive".into()));
    }
    let p = params.with_homodyne(h).normalized();
    let nf = t.n_max + 1;
    let d = 2 * nf;
    let eps_s = (2.0 * p.omega_sigma).clamp(1e-6, 1.0);
    let eps_a = (2.0 * (p.omega_a.abs() + p.g * eps_s) / p.gamma_det).clamp(1e-6, 1.0);
    let s: Vec<f64> = (0..d)
        .map(|i| eps_s.powi((i / nf) as i32) * eps_a.powi((i % nf) as i32))
        .collect();

    let mut l = liouvillian(&p, t.n_max);
    for r in 0..d * d {
        let sr = s[r / d] * s[r % d];
        for c in 0..d * d {
            let z = l[(r, c)];
            if z != C64::new(0.0, 0.0) {
                l[(r, c)] = z * (s[c / d] * s[c % d] / sr);
            }
        }
    }
    for c in 0..d * d {
        l[(0, c)] = C64::new(0.0, 0.0);
    }
    for i in 0..d {
        l[(0, i * d + i)] = C64::new(s[i] * s[i], 0.0);
    }
    let mut rhs = DVector::<C64>::zeros(d * d);
    rhs[0] = C64::new(1.0, 0.0);

    let lu = l.full_piv_lu();
    let u = lu.u();
    let piv: Vec<f64> = (0..d * d).map(|i| u[(i, i)].norm()).collect();
    let max = piv.iter().cloned().fold(0.0, f64::max);
    let min = piv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 1e-13 * max) {
        return Err(Error::NonUniqueSteadyState);
    }
    let x = lu.solve(&rhs).ok_or(Error::NonUniqueSteadyState)?;
    let mut rho = DMatrix::<C64>::from_fn(d, d, |i, j| x[i * d + j] * (s[i] * s[j]));
    rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let op = DensityOperator {
        matrix: rho,
        n_max: t.n_max,
    };
    let top = op.top_population();
    if top > t.tol {
        return Err(Error::TruncationInsufficient {
            population: top,
            tol: t.tol,
        });
    }
    Ok(op)
}

/// `<a†^N a^N> / <a†a>^N`.
pub fn gn_from_moments(table: &MomentTable, n: u32) -> Result<f64> {
    let pop = table.detector(1, 1)?;
    if !(pop.re > 0.0) {
        return Err(Error::ZeroPopulation);
    }
    let num = table.detector(n, n)?;
    let scale = num.re.abs().max(pop.re.powi(n as i32) * f64::EPSILON);
    if num.im.abs() > 1e-10 * scale {
        return Err(Error::ImaginaryResidue(num.im / scale));
    }
    Ok(num.re / pop.re.powi(n as i32))
}

/// Sensor-limit value of `g^(N)` from the full master equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorLimit {
    /// Two-point extrapolation to vanishing drive and coupling.
    pub value: f64,
    pub coarse: f64,
    pub fine: f64,
    pub shift: f64,
}

/// `g^(N)` at `(omega_eval, g_eval)` and at half of both; fails when the two
/// differ by more than `10 × target`.
pub fn sensor_limit_gn(
    params: &SystemParams,
    h: &HomodyneConfig,
    t: &TruncationConfig,
    n: u32,
    target: f64,
) -> Result<SensorLimit> {
    t.check_order(n as usize)?;
    let eval = |scale: f64| -> Result<f64> {
        let p = SystemParams {
            omega_sigma: t.omega_eval * scale * params.gamma_sigma,
            g: t.g_eval * scale * params.gamma_sigma,
            ..*params
        };
        let rho = liouvillian_steady_state(&p, h, t)?;
        gn_from_moments(&rho.moments(&p.with_homodyne(h), 2 * n as usize), n)
    };
    let coarse = eval(1.0)?;
    let fine = eval(0.5)?;
    let shift = (fine - coarse).abs();
    let allowed = 10.0 * target;
    if shift > allowed {
        return Err(Error::NotConverged { shift, allowed });
    }
    Ok(SensorLimit {
        value: (4.0 * fine - coarse) / 3.0,
        coarse,
        fine,
        shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(m: u32, n: u32, mu: u32, nu: u32) -> MomentIndex {
        MomentIndex::new(m, n, mu, nu).unwrap()
    }

    fn coeff(list: &[(MomentIndex, C64)], k: MomentIndex) -> Option<C64> {
        list.iter().find(|(i, _)| *i == k).map(|(_, c)| *c)
    }

    #[test]
    fn detector_field_equation() {
        let p = SystemParams::new(0.3, 1.0, 0.2, 0.05, 0.7);
        let c = regression_coefficients(idx(0, 0, 0, 1), &p);
        assert_eq!(c.len(), 3);
        assert_eq!(coeff(&c, idx(0, 0, 0, 1)), Some(C64::new(-0.1, 0.0)));
        assert_eq!(coeff(&c, idx(0, 0, 0, 0)), Some(C64::new(0.7, 0.0)));
        assert_eq!(coeff(&c, idx(0, 1, 0, 0)), Some(C64::new(0.0, -0.05)));
    }

    #[test]
    fn emitter_block_matches_two_level_equations() {
        // d<σ>/dt = -γ/2 <σ> - iΩ + 2iΩ <σ†σ>
        // d<σ†σ>/dt = -γ <σ†σ> + iΩ <σ> - iΩ <σ†>
        let w = 0.37;
        let p = SystemParams::new(w, 1.0, 0.2, 0.05, 0.0);
        let s = regression_coefficients(idx(0, 1, 0, 0), &p);
        assert_eq!(s.len(), 3);
        assert_eq!(coeff(&s, idx(0, 1, 0, 0)), Some(C64::new(-0.5, 0.0)));
        assert_eq!(coeff(&s, idx(0, 0, 0, 0)), Some(C64::new(0.0, -w)));
        assert_eq!(coeff(&s, idx(1, 1, 0, 0)), Some(C64::new(0.0, 2.0 * w)));
        let sd = regression_coefficients(idx(1, 0, 0, 0), &p);
        assert_eq!(coeff(&sd, idx(0, 0, 0, 0)), Some(C64::new(0.0, w)));
        assert_eq!(coeff(&sd, idx(1, 1, 0, 0)), Some(C64::new(0.0, -2.0 * w)));
        let n = regression_coefficients(idx(1, 1, 0, 0), &p);
        assert_eq!(n.len(), 3);
        assert_eq!(coeff(&n, idx(1, 1, 0, 0)), Some(C64::new(-1.0, 0.0)));
        assert_eq!(coeff(&n, idx(0, 1, 0, 0)), Some(C64::new(0.0, w)));
        assert_eq!(coeff(&n, idx(1, 0, 0, 0)), Some(C64::new(0.0, -w)));
    }

    #[test]
    fn undriven_system_only_decays() {
        let p = SystemParams::new(0.0, 1.0, 0.2, 0.0, 0.0);
        for k in 1..6 {
            for i in MomentIndex::of_order(k) {
                let c = regression_coefficients(i, &p);
                assert_eq!(c.len(), 1);
                assert_eq!(c[0].0, i);
            }
        }
    }

    #[test]
    fn recursive_weak_drive_values() {
        let p = SystemParams::new(1e-3, 1.0, 1.0, 1e-3, 0.0);
        let t = solve_recursive(&p, 4).unwrap();
        let s = t.get(idx(0, 1, 0, 0)).unwrap();
        assert!((s - C64::new(0.0, -2e-3)).norm() < 1e-12);
        assert!((t.emitter_population().unwrap() - 4e-6).abs() < 1e-15);
        assert_eq!(t.get(MomentIndex::IDENTITY).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(t.conjugation_defect(), 0.0);
        assert_eq!(t.len(), 1 + 4 + 8 + 12 + 16);
    }

    #[test]
    fn undriven_table_vanishes() {
        let p = SystemParams::new(0.0, 1.0, 0.3, 1e-3, 0.0);
        let t = solve_recursive(&p, 4).unwrap();
        for (k, v) in t.iter() {
            if k.order() > 0 {
                assert_eq!(v.norm(), 0.0);
            }
        }
    }

    #[test]
    fn detector_population_scales_as_g_squared() {
        let p = SystemParams::new(1e-3, 1.0, 0.2, 1e-3, 0.0);
        let a = solve_recursive(&p, 2).unwrap().detector_population().unwrap();
        let b = solve_recursive(&p.with_coupling(5e-4), 2)
            .unwrap()
            .detector_population()
            .unwrap();
        assert!((a / b - 4.0).abs() < 1e-12);
    }

    #[test]
    fn filtered_g2_from_recursion() {
        for (gam, want) in [(1.0, 0.25), (1.0 / 3.0, 0.5625)] {
            let p = SystemParams::new(1e-3, 1.0, gam, 1e-3, 0.0);
            let t = solve_recursive(&p, 4).unwrap();
            assert!((gn_from_moments(&t, 2).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn order_cap_and_bad_params() {
        let p = SystemParams::new(1e-3, 1.0, 0.2, 1e-3, 0.0);
        assert!(matches!(solve_recursive(&p, 41), Err(Error::OrderTooLarge { .. })));
        let bad = p.with_linewidth(0.0);
        assert!(solve_recursive(&bad, 2).is_err());
    }

    #[test]
    fn zero_population_is_an_error() {
        let p = SystemParams::new(0.0, 1.0, 0.2, 1e-3, 0.0);
        let t = solve_recursive(&p, 4).unwrap();
        assert!(matches!(gn_from_moments(&t, 2), Err(Error::ZeroPopulation)));
        let short = solve_recursive(&p.with_drive(1e-3), 2).unwrap();
        assert!(matches!(gn_from_moments(&short, 2), Err(Error::MissingMoment(_))));
    }

    #[test]
    fn sensor_hierarchy_agrees_with_recursion_at_weak_drive() {
        let p = SystemParams::new(1e-4, 1.0, 0.2, 1e-3, 0.0);
        let a = solve_recursive(&p, 6).unwrap();
        let b = solve_sensor_hierarchy(&p, 6).unwrap();
        for k in [2, 3] {
            let ga = gn_from_moments(&a, k).unwrap();
            let gb = gn_from_moments(&b, k).unwrap();
            assert!((ga - gb).abs() < 1e-6, "{k}: {ga} {gb}");
        }
    }

    #[test]
    fn sensor_hierarchy_emitter_block_is_exact() {
        let w: f64 = 0.8;
        let p = SystemParams::new(w, 1.0, 0.2, 1e-3, 0.0);
        let t = solve_sensor_hierarchy(&p, 2).unwrap();
        let n = 4.0 * w * w / (1.0 + 8.0 * w * w);
        assert!((t.emitter_population().unwrap() - n).abs() < 1e-14);
    }

    #[test]
    fn vacuum_steady_state_without_drive() {
        let p = SystemParams::new(0.0, 1.0, 0.2, 1e-3, 0.0);
        let t = TruncationConfig {
            n_max: 4,
            ..Default::default()
        };
        let rho = liouvillian_steady_state(&p, &HomodyneConfig::none(), &t).unwrap();
        for i in 0..rho.dim() {
            for j in 0..rho.dim() {
                let want = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert!((rho.matrix[(i, j)] - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn density_axioms_at_compensation() {
        let fm = 2.0 * (1.0 - (0.2f64 / 1.2).sqrt());
        let p = SystemParams::new(1e-3, 1.0, 0.2, 1e-3, 0.0);
        let rho = liouvillian_steady_state(&p, &HomodyneConfig::with_f_prime(fm), &TruncationConfig::default())
            .unwrap();
        assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(rho.min_eigenvalue() >= -1e-10);
        assert!((&rho.matrix - rho.matrix.adjoint()).norm() == 0.0);
    }

    #[test]
    fn truncation_check_fires() {
        let p = SystemParams::new(0.5, 1.0, 0.2, 0.5, 0.0);
        let t = TruncationConfig {
            n_max: 2,
            ..Default::default()
        };
        assert!(matches!(
            liouvillian_steady_state(&p, &HomodyneConfig::none(), &t),
            Err(Error::TruncationInsufficient { .. })
        ));
    }

    #[test]
    fn liouvillian_two_level_limit() {
        // With g = 0 the emitter block is the exact two-level steady state.
        let w: f64 = 0.3;
        let p = SystemParams::new(w, 1.0, 0.5, 0.0, 0.0);
        let t = TruncationConfig {
            n_max: 2,
            ..Default::default()
        };
        let rho = liouvillian_steady_state(&p, &HomodyneConfig::none(), &t).unwrap();
        let den = 1.0 + 8.0 * w * w;
        assert!((rho.moment(idx(1, 1, 0, 0)).re - 4.0 * w * w / den).abs() < 1e-13);
        assert!((rho.moment(idx(0, 1, 0, 0)) - C64::new(0.0, -2.0 * w / den)).norm() < 1e-13);
    }

    #[test]
    fn json_roundtrip() {
        let p = SystemParams::new(1e-3, 1.0, 0.2, 1e-3, 0.0);
        let t = solve_recursive(&p, 3).unwrap();
        let s = t.to_json().unwrap();
        assert!(s.contains("\"0,1,0,0\""));
        assert_eq!(MomentTable::from_json(&s).unwrap(), t);
    }

    #[test]
    fn csv_dump_shape() {
        let p = SystemParams::new(1e-2, 1.0, 0.2, 1e-2, 0.0);
        let t = TruncationConfig {
            n_max: 3,
            ..Default::default()
        };
        let rho = liouvillian_steady_state(&p, &HomodyneConfig::none(), &t).unwrap();
        let csv = rho.to_csv();
        assert!(csv.starts_with("row,col,re,im\n"));
        assert_eq!(csv.lines().count(), 1 + 64);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn conjugation_symmetry(w in 0.0f64..0.01, gam in 0.01f64..10.0, g in 1e-5f64..0.01, fp in 0.0f64..4.0) {
            let p = SystemParams::new(w, 1.0, gam, g, 0.0).with_homodyne(&HomodyneConfig::with_f_prime(fp));
            let t = solve_recursive(&p, 5).unwrap();
            proptest::prop_assert_eq!(t.conjugation_defect(), 0.0);
            let n = t.emitter_population().unwrap();
            proptest::prop_assert!((0.0..=0.5).contains(&n));
            proptest::prop_assert!(t.detector_population().unwrap() >= 0.0);
        }

        #[test]
        fn scale_invariance(w in 1e-4f64..0.01, gam in 0.05f64..5.0, g in 1e-4f64..0.01, fp in 0.0f64..1.9, s in 0.1f64..10.0) {
            let p = SystemParams::new(w, 1.0, gam, g, 0.0).with_homodyne(&HomodyneConfig::with_f_prime(fp));
            let a = gn_from_moments(&solve_recursive(&p, 4).unwrap(), 2).unwrap();
            let b = gn_from_moments(&solve_recursive(&p.scaled(s), 4).unwrap(), 2).unwrap();
            proptest::prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-3));
        }
    }
}
