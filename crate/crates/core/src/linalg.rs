//! Exact propagation of small dense linear systems `dx/dt = M x`.

use nalgebra::{DMatrix, DVector, Schur};

use crate::C64;

/// Above this condition number of the eigenvector basis the propagator falls
/// back to a Padé matrix exponential.
pub const MAX_EIGEN_CONDITION: f64 = 1e6;

#[derive(Debug, Clone)]
enum Kind {
    Eigen {
        values: DVector<C64>,
        vectors: DMatrix<C64>,
        inverse: DMatrix<C64>,
    },
    Pade,
}

/// `x(t) = exp(M t) x(0)` for a fixed square matrix `M`.
///
/// Diagonalizes `M` through its complex Schur form. Defective or badly
/// conditioned matrices (coalescing eigenvalues) are instead propagated with
/// the scaling-and-squaring Padé exponential.
#[derive(Debug, Clone)]
pub struct Propagator {
    m: DMatrix<C64>,
    kind: Kind,
}

impl Propagator {
    pub fn new(m: DMatrix<C64>) -> Self {
        assert!(m.is_square(), "propagator needs a square matrix");
        let kind = match eigen_basis(&m) {
            Some((values, vectors, inverse)) => Kind::Eigen {
                values,
                vectors,
                inverse,
            },
            None => {
                log::debug!("propagator: falling back to Padé exponential");
                Kind::Pade
            }
        };
        Self { m, kind }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn is_diagonalized(&self) -> bool {
        matches!(self.kind, Kind::Eigen { .. })
    }

    /// Eigenvalues, when the diagonal form is in use.
    pub fn eigenvalues(&self) -> Option<&DVector<C64>> {
        match &self.kind {
            Kind::Eigen { values, .. } => Some(values),
            Kind::Pade => None,
        }
    }

    pub fn apply(&self, t: f64, x0: &DVector<C64>) -> DVector<C64> {
        match &self.kind {
            Kind::Eigen {
                values,
                vectors,
                inverse,
            } => {
                let mut c = inverse * x0;
                for (ci, l) in c.iter_mut().zip(values.iter()) {
                    *ci *= (l * t).exp();
                }
                vectors * c
            }
            Kind::Pade => (&self.m * C64::new(t, 0.0)).exp() * x0,
        }
    }

    /// Propagate `x0` to every time in `times`.
    pub fn series(&self, times: &[f64], x0: &DVector<C64>) -> Vec<DVector<C64>> {
        times.iter().map(|&t| self.apply(t, x0)).collect()
    }

    /// Modal form of `exp(M t) x0`, when the diagonal form is in use.
    pub fn modal(&self, x0: &DVector<C64>) -> Option<Modal> {
        match &self.kind {
            Kind::Eigen {
                values,
                vectors,
                inverse,
            } => Some(Modal {
                values: values.clone(),
                vectors: vectors.clone(),
                coeffs: inverse * x0,
            }),
            Kind::Pade => None,
        }
    }

    /// `∫_0^∞ exp(M t) exp(-s t) x0 dt = (s - M)^{-1} x0` for `Re s` beyond the spectrum.
    pub fn laplace(&self, s: C64, x0: &DVector<C64>) -> Option<DVector<C64>> {
        match &self.kind {
            Kind::Eigen {
                values,
                vectors,
                inverse,
            } => {
                let mut c = inverse * x0;
                for (ci, l) in c.iter_mut().zip(values.iter()) {
                    *ci /= s - l;
                }
                Some(vectors * c)
            }
            Kind::Pade => {
                let n = self.dim();
                let a = DMatrix::<C64>::identity(n, n) * s - &self.m;
                a.lu().solve(x0)
            }
        }
    }
}

/// `x(t) = Σ_k v_k c_k exp(λ_k t)`.
#[derive(Debug, Clone)]
pub struct Modal {
    values: DVector<C64>,
    vectors: DMatrix<C64>,
    coeffs: DVector<C64>,
}

impl Modal {
    pub fn at(&self, t: f64) -> DVector<C64> {
        let c = DVector::from_iterator(
            self.coeffs.len(),
            self.coeffs.iter().zip(self.values.iter()).map(|(c, l)| c * (l * t).exp()),
        );
        &self.vectors * c
    }
}

/// Eigenvalues, eigenvectors and their inverse, or `None` when the basis is
/// numerically defective.
fn eigen_basis(m: &DMatrix<C64>) -> Option<(DVector<C64>, DMatrix<C64>, DMatrix<C64>)> {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let (q, t) = Schur::try_new(m.clone(), 1e-15, 10_000)?.unpack();
    let values = DVector::from_iterator(n, (0..n).map(|i| t[(i, i)]));

    let mut y = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let lk = t[(k, k)];
        y[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[(j, k)];
            }
            let d = t[(i, i)] - lk;
            if d.norm() <= 1e-12 * scale {
                if s.norm() <= 1e-14 * scale {
                    continue;
                }
                return None;
            }
            y[(i, k)] = -s / d;
        }
        let norm = y.column(k).norm();
        y.column_mut(k).unscale_mut(norm);
    }
    let vectors = q * y;
    let inverse = vectors.clone().try_inverse()?;
    let cond = vectors.norm() * inverse.norm();
    if !cond.is_finite() || cond > MAX_EIGEN_CONDITION {
        return None;
    }
    Some((values, vectors, inverse))
}

/// `exp(M t)` by scaling and squaring.
pub fn expm(m: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    (m * C64::new(t, 0.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_matrix_exponentiates_entrywise() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![c(-1.0, 0.0), c(-0.5, 2.0)]));
        let p = Propagator::new(m);
        assert!(p.is_diagonalized());
        let x = p.apply(1.3, &DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]));
        assert!((x[0] - c(-1.3, 0.0).exp()).norm() < 1e-14);
        assert!((x[1] - c(-0.65, 2.6).exp()).norm() < 1e-14);
    }

    #[test]
    fn jordan_block_uses_fallback() {
        let m = DMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let p = Propagator::new(m);
        assert!(!p.is_diagonalized());
        let t = 0.7;
        let x = p.apply(t, &DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]));
        let e = (-t).exp();
        assert!((x[0] - c(t * e, 0.0)).norm() < 1e-13);
        assert!((x[1] - c(e, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn eigen_path_matches_pade() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(-0.5, 0.0), c(0.0, 0.0), c(0.0, 0.6),
                c(0.0, 0.0), c(-0.5, 0.0), c(0.0, -0.6),
                c(0.0, 0.3), c(0.0, -0.3), c(-1.0, 0.0),
            ],
        );
        let p = Propagator::new(m.clone());
        assert!(p.is_diagonalized());
        let x0 = DVector::from_vec(vec![c(1.0, 0.2), c(-0.3, 0.0), c(0.5, 0.0)]);
        for &t in &[0.0, 0.1, 2.0, 15.0] {
            let a = p.apply(t, &x0);
            let b = expm(&m, t) * &x0;
            assert!((a - &b).norm() < 1e-12);
            assert!((p.modal(&x0).unwrap().at(t) - b).norm() < 1e-12);
        }
    }

    #[test]
    fn laplace_matches_resolvent() {
        let m = DMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(-2.0, 0.0)]);
        let p = Propagator::new(m.clone());
        let x0 = DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let s = c(0.1, 0.4);
        let a = p.laplace(s, &x0).unwrap();
        let b = (DMatrix::identity(2, 2) * s - m).try_inverse().unwrap() * x0;
        assert!((a - b).norm() < 1e-13);
    }
}
