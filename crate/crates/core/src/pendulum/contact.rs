//! Pendulum driven through a contact-regularized spring.
//!
//! The rigid body is a super-ellipse centered at the center of mass, with
//! half-axes `a = L0/2` along the major axis and `b = W0/2` across it. The
//! agent is a point `u`; its signed penetration is the super-ellipse
//! inside-outside value of the agent position expressed in the body frame,
//! and the spring stiffness interpolates smoothly between `k_min` (free
//! flight) and `k_min + k_max` (deep contact) through a tanh transition.
//!
//! Conventions: hinge at the space-frame origin, center of mass at
//! `(L0/2) n_alpha`, body frame centered at the com and rotated by `alpha`,
//! spring anchored at the tip, i.e. body-frame coordinate `(L0/2, 0)`.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::potential::{Configuration, PotentialOutput, PotentialSystem};

use super::{angle_distance, angle_seeds, frames, wrap_angle};

/// Saturation value for either super-ellipse term; beyond it the term is
/// held constant with zero derivative, far outside any sampled workspace.
const INSIDE_OUTSIDE_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct ContactPendulum {
    l0: f64,
    w0: f64,
    mg: f64,
    k_min: f64,
    k_max: f64,
    d0: f64,
    eps: f64,
    half_length: f64,
    half_width: f64,
}

impl ContactPendulum {
    /// Builds the model with default penetration scale `d0 = 0.05 L0` and
    /// half-axes `a = L0/2`, `b = W0/2`.
    pub fn new(l0: f64, w0: f64, mg: f64, k_min: f64, k_max: f64, eps: f64) -> Result<Self> {
        if !(l0 > 0.0) || !(w0 > 0.0) {
            return Err(Error::InvalidParameter(String::from(
                "L0 and W0 must be positive",
            )));
        }
        if !(mg >= 0.0) {
            return Err(Error::InvalidParameter(String::from("mg must be nonnegative")));
        }
        if !(k_min > 0.0) || !(k_max > k_min) {
            return Err(Error::InvalidParameter(String::from(
                "stiffness bounds need 0 < k_min < k_max",
            )));
        }
        if !(eps > 0.0 && eps < 2.0) {
            return Err(Error::InvalidParameter(String::from(
                "super-ellipse exponent needs 0 < eps < 2",
            )));
        }
        Ok(Self {
            l0,
            w0,
            mg,
            k_min,
            k_max,
            d0: 0.05 * l0,
            eps,
            half_length: 0.5 * l0,
            half_width: 0.5 * w0,
        })
    }

    pub fn with_d0(mut self, d0: f64) -> Result<Self> {
        if !(d0 > 0.0) {
            return Err(Error::InvalidParameter(String::from("d0 must be positive")));
        }
        self.d0 = d0;
        Ok(self)
    }

    pub fn with_half_axes(mut self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::InvalidParameter(String::from(
                "half-axes must be positive",
            )));
        }
        self.half_length = a;
        self.half_width = b;
        Ok(self)
    }

    pub fn length(&self) -> f64 {
        self.l0
    }

    pub fn weight(&self) -> f64 {
        self.mg
    }

    pub fn stiffness_bounds(&self) -> (f64, f64) {
        (self.k_min, self.k_max)
    }

    pub fn penetration_scale(&self) -> f64 {
        self.d0
    }

    /// Penetration-dependent stiffness
    /// `k_c(d) = k_min + ((1 - tanh(d/d0)) / 2) k_max`; smooth and strictly
    /// decreasing in `d`.
    pub fn contact_stiffness(&self, d: f64) -> f64 {
        self.stiffness_derivs(d).0
    }

    fn stiffness_derivs(&self, d: f64) -> (f64, f64, f64) {
        let t = libm::tanh(d / self.d0);
        let sech2 = 1.0 - t * t;
        let k = self.k_min + 0.5 * (1.0 - t) * self.k_max;
        let kp = -0.5 * self.k_max * sech2 / self.d0;
        let kpp = self.k_max * sech2 * t / (self.d0 * self.d0);
        (k, kp, kpp)
    }

    /// Super-ellipse inside-outside value at body-frame coordinates:
    /// negative inside the body, zero on its boundary, positive outside.
    pub fn inside_outside(&self, x: f64, y: f64) -> f64 {
        let (tx, _, _) = self.axis_term(x, self.half_length);
        let (ty, _, _) = self.axis_term(y, self.half_width);
        tx + ty - 1.0
    }

    /// Inside-outside value of a space-frame control at pendulum angle
    /// `alpha`, i.e. in the body frame.
    pub fn penetration(&self, alpha: f64, u: &Vector2<f64>) -> f64 {
        let ut = self.body_frame(alpha, u);
        self.inside_outside(ut.x, ut.y)
    }

    fn body_frame(&self, alpha: f64, u: &Vector2<f64>) -> Vector2<f64> {
        let r = frames(alpha).rotation;
        r.transpose() * u - Vector2::new(self.half_length, 0.0)
    }

    /// One `(|x|/axis)^(2/eps)` term with value, first and second derivative
    /// in `x`. Saturates at the cap with zero derivatives, and uses absolute
    /// values so non-integer exponents stay real for negative arguments.
    fn axis_term(&self, x: f64, axis: f64) -> (f64, f64, f64) {
        let p = 2.0 / self.eps;
        let t = libm::fabs(x) / axis;
        if t == 0.0 {
            // The p < 2 branch is singular on the axis itself; the zero
            // returned here only matters on that measure-zero line.
            let second = if p == 2.0 { p * (p - 1.0) / (axis * axis) } else { 0.0 };
            return (0.0, 0.0, second);
        }
        let tp = libm::pow(t, p);
        if !(tp < INSIDE_OUTSIDE_CAP) {
            return (INSIDE_OUTSIDE_CAP, 0.0, 0.0);
        }
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        let first = sign * (p / axis) * tp / t;
        let second = p * (p - 1.0) / (axis * axis) * tp / (t * t);
        (tp, first, second)
    }
}

impl PotentialSystem for ContactPendulum {
    fn dims(&self) -> (usize, usize) {
        (1, 2)
    }

    fn evaluate(&self, cfg: &Configuration) -> Result<PotentialOutput> {
        let alpha = wrap_angle(cfg.z[0]);
        let u = Vector2::new(cfg.u[0], cfg.u[1]);
        let frame = frames(alpha);
        let n = frame.n_alpha;
        let n_perp = frame.n_alpha_perp;
        let r = frame.rotation;

        // Spring geometry in the space frame; the anchor is the tip L0 n.
        let spring = u - self.l0 * n;
        let s = spring.norm_squared();
        let s_a = -2.0 * self.l0 * u.dot(&n_perp);
        let s_aa = 2.0 * self.l0 * u.dot(&n);
        let s_u = 2.0 * spring;
        let s_ua = -2.0 * self.l0 * n_perp;

        // Penetration in the body frame. With w = R^T u and
        // ut = w - (L0/2) e1: d(ut)/d(alpha) = (w_y, -w_x),
        // d2(ut)/d(alpha)2 = -w, d(ut)/du = R^T.
        let w = r.transpose() * u;
        let ut = w - Vector2::new(self.half_length, 0.0);
        let (tx, gx, hx) = self.axis_term(ut.x, self.half_length);
        let (ty, gy, hy) = self.axis_term(ut.y, self.half_width);
        let depth = tx + ty - 1.0;
        let g = Vector2::new(gx, gy);
        let hd = Matrix2::new(hx, 0.0, 0.0, hy);
        let ut_a = Vector2::new(w.y, -w.x);
        let ut_aa = -w;

        let d_a = g.dot(&ut_a);
        let d_aa = (ut_a.transpose() * hd * ut_a)[(0, 0)] + g.dot(&ut_aa);
        let d_u = r * g;
        // J g with J the quarter-turn generator.
        let jg = Vector2::new(-g.y, g.x);
        let d_ua = r * (hd * ut_a) + r * jg;
        let d_uu = r * hd * r.transpose();

        let (k, kp, kpp) = self.stiffness_derivs(depth);

        let half_mgl = 0.5 * self.mg * self.l0;
        let value = half_mgl * n.y + 0.5 * k * s;
        let grad_z = half_mgl * n.x + 0.5 * (kp * d_a * s + k * s_a);
        let grad_u = 0.5 * (kp * s * d_u + k * s_u);
        let hess_zz = -half_mgl * n.y
            + 0.5 * (kpp * d_a * d_a * s + kp * d_aa * s + 2.0 * kp * d_a * s_a + k * s_aa);
        let hess_uz =
            0.5 * (kpp * d_a * s * d_u + kp * s * d_ua + kp * d_a * s_u + kp * s_a * d_u + k * s_ua);
        let hess_uu = 0.5
            * (kpp * s * d_u * d_u.transpose()
                + kp * s * d_uu
                + kp * (d_u * s_u.transpose() + s_u * d_u.transpose())
                + 2.0 * k * Matrix2::identity());

        let out = PotentialOutput {
            value,
            grad_z: DVector::from_element(1, grad_z),
            grad_u: DVector::from_column_slice(grad_u.as_slice()),
            hess_zz: DMatrix::from_element(1, 1, hess_zz),
            hess_uz: DMatrix::from_column_slice(2, 1, hess_uz.as_slice()),
            hess_uu: DMatrix::from_column_slice(2, 2, hess_uu.as_slice()),
        };
        if !out.is_finite() {
            return Err(Error::Evaluation(alloc::format!(
                "non-finite contact potential at alpha={alpha}, u=({}, {})",
                u.x,
                u.y
            )));
        }
        Ok(out)
    }

    fn fiber_distance(&self, z1: &DVector<f64>, z2: &DVector<f64>) -> f64 {
        angle_distance(z1[0], z2[0])
    }

    fn canonical_fiber(&self, z: DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, wrap_angle(z[0]))
    }

    fn fiber_seeds(&self, count: usize) -> Vec<DVector<f64>> {
        angle_seeds(count)
    }
}
