//! Control forces, the control Hessian obtained as a Schur complement of the
//! full potential Hessian, the squared-Hessian metric and discrete path
//! costs built from it.

use nalgebra::{DMatrix, DVector};

use crate::equilibrium::{EquilibriumPoint, Stability};
use crate::error::{Error, Result};
use crate::potential::{Configuration, PotentialOutput, PotentialSystem};

/// Metric data at one equilibrium point.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMetric {
    /// Control force `-grad_u W` at the equilibrium.
    pub f_ctrl: DVector<f64>,
    /// Control Hessian (Schur complement), `K x K` symmetric.
    pub g: DMatrix<f64>,
    /// Squared Hessian, `K x K` symmetric positive-semidefinite.
    pub g2: DMatrix<f64>,
}

impl ControlMetric {
    pub fn at(point: &EquilibriumPoint) -> Result<Self> {
        let g = control_hessian(point)?;
        let g2 = squared_from(&g);
        Ok(Self {
            f_ctrl: control_force(point),
            g,
            g2,
        })
    }
}

/// The force the agent must exert to hold the system at this equilibrium.
pub fn control_force(point: &EquilibriumPoint) -> DVector<f64> {
    -&point.output.grad_u
}

/// Schur complement `hess_uu - hess_uz * hess_zz^-1 * hess_uz^T`, computed
/// via linear solves of `hess_zz` (never an explicit inverse) and explicitly
/// symmetrized.
pub fn control_hessian(point: &EquilibriumPoint) -> Result<DMatrix<f64>> {
    if point.stability == Stability::Critical {
        return Err(Error::SingularJacobian);
    }
    let out = &point.output;
    let rhs = out.hess_uz.transpose(); // N x K
    let solved = solve_spd_or_lu(&out.hess_zz, &rhs)?;
    let g = &out.hess_uu - &out.hess_uz * solved;
    Ok((&g + g.transpose()) * 0.5)
}

fn solve_spd_or_lu(a: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(rhs));
    }
    a.clone().lu().solve(rhs).ok_or(Error::SingularJacobian)
}

/// `G * G`, symmetrized, with tiny negative eigenvalues from rounding
/// clamped to zero.
pub fn squared_hessian(point: &EquilibriumPoint) -> Result<DMatrix<f64>> {
    Ok(squared_from(&control_hessian(point)?))
}

pub(crate) fn squared_from(g: &DMatrix<f64>) -> DMatrix<f64> {
    let g2 = g * g;
    let g2 = (&g2 + g2.transpose()) * 0.5;
    clamp_psd(g2)
}

fn clamp_psd(g2: DMatrix<f64>) -> DMatrix<f64> {
    let eigen = g2.clone().symmetric_eigen();
    let scale = eigen.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = -1e-10 * scale;
    if eigen.eigenvalues.iter().all(|&v| v >= 0.0) {
        return g2;
    }
    let mut vals = eigen.eigenvalues;
    for v in vals.iter_mut() {
        if *v < 0.0 && *v > floor {
            *v = 0.0;
        }
    }
    let vecs = eigen.eigenvectors;
    &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose()
}

/// Quadratic form `du^T G2 du`, clamped at zero against rounding.
pub fn quadratic_cost(g2: &DMatrix<f64>, delta_u: &DVector<f64>) -> f64 {
    let v = (delta_u.transpose() * g2 * delta_u)[(0, 0)];
    v.max(0.0)
}

/// Discrete energy-form cost of an ordered equilibrium sequence:
/// `sum_i (u_{i+1} - u_i)^T G2|_i (u_{i+1} - u_i)`.
///
/// Consecutive points are assumed to lie on the same branch; this is not
/// verified here.
pub fn path_cost(points: &[EquilibriumPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidPath);
    }
    let mut total = 0.0;
    for pair in points.windows(2) {
        let g2 = squared_hessian(&pair[0])?;
        let delta_u = &pair[1].u - &pair[0].u;
        total += quadratic_cost(&g2, &delta_u);
    }
    Ok(total)
}

/// Square-root (length) form of the same discrete functional, for reporting.
pub fn path_length(points: &[EquilibriumPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidPath);
    }
    let mut total = 0.0;
    for pair in points.windows(2) {
        let g2 = squared_hessian(&pair[0])?;
        let delta_u = &pair[1].u - &pair[0].u;
        total += libm::sqrt(quadratic_cost(&g2, &delta_u));
    }
    Ok(total)
}

/// A system whose control space is re-expressed in rotated coordinates
/// `u = J * u_tilde` for a constant orthonormal `J`.
///
/// The internal states are untouched, so the wrapped potential is
/// `W(z, J * u_tilde)` and its control-derivative blocks pick up the usual
/// congruence factors.
pub struct RotatedControls<'a> {
    inner: &'a dyn PotentialSystem,
    rotation: DMatrix<f64>,
}

impl<'a> RotatedControls<'a> {
    /// `rotation` must be `K x K` orthonormal (`J^T J = I`).
    pub fn new(inner: &'a dyn PotentialSystem, rotation: DMatrix<f64>) -> Result<Self> {
        let (_, k) = inner.dims();
        if rotation.nrows() != k || rotation.ncols() != k {
            return Err(Error::Dimension {
                what: "control rotation",
                expected: k,
                got: rotation.nrows(),
            });
        }
        let gram = rotation.transpose() * &rotation;
        let eye = DMatrix::<f64>::identity(k, k);
        if (gram - eye).amax() > 1e-10 {
            return Err(Error::InvalidParameter(alloc::string::String::from(
                "control rotation is not orthonormal",
            )));
        }
        Ok(Self { inner, rotation })
    }

    /// Original-frame controls for rotated-frame controls.
    pub fn to_inner_controls(&self, u_tilde: &DVector<f64>) -> DVector<f64> {
        &self.rotation * u_tilde
    }

    /// Rotated-frame controls for original-frame controls.
    pub fn from_inner_controls(&self, u: &DVector<f64>) -> DVector<f64> {
        self.rotation.transpose() * u
    }
}

impl PotentialSystem for RotatedControls<'_> {
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }

    fn evaluate(&self, cfg: &Configuration) -> Result<PotentialOutput> {
        let inner_cfg = Configuration::new(cfg.z.clone(), self.to_inner_controls(&cfg.u));
        let out = self.inner.evaluate(&inner_cfg)?;
        let jt = self.rotation.transpose();
        Ok(PotentialOutput {
            value: out.value,
            grad_z: out.grad_z,
            grad_u: &jt * out.grad_u,
            hess_zz: out.hess_zz,
            hess_uz: &jt * out.hess_uz,
            hess_uu: &jt * out.hess_uu * &self.rotation,
        })
    }

    fn fiber_distance(&self, z1: &DVector<f64>, z2: &DVector<f64>) -> f64 {
        self.inner.fiber_distance(z1, z2)
    }

    fn canonical_fiber(&self, z: DVector<f64>) -> DVector<f64> {
        self.inner.canonical_fiber(z)
    }

    fn fiber_seeds(&self, count: usize) -> alloc::vec::Vec<DVector<f64>> {
        self.inner.fiber_seeds(count)
    }
}
