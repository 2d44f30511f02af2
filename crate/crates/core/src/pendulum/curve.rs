//! Closed-form optimal driving curves for the linear-spring pendulum.
//!
//! With the pendulum angle as path parameter and the normalized control
//! length `lambda = L_u / L0` as the free function, the optimality condition
//! reduces to `lambda'' = lambda - 1`, solved by
//! `lambda(alpha) = a e^alpha + b e^-alpha + 1` with the coefficients fixed
//! by the boundary lengths.

use alloc::vec::Vec;

use nalgebra::Vector2;

use crate::error::{Error, Result};

use super::{frames, LinearSpringPendulum};

/// Coefficients of a solution `a e^alpha + b e^-alpha + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaCurve {
    pub a: f64,
    pub b: f64,
}

impl LambdaCurve {
    pub fn eval(&self, alpha: f64) -> f64 {
        self.a * libm::exp(alpha) + self.b * libm::exp(-alpha) + 1.0
    }

    pub fn derivative(&self, alpha: f64) -> f64 {
        self.a * libm::exp(alpha) - self.b * libm::exp(-alpha)
    }

    /// Exact value of `int (lambda'^2 + (lambda - 1)^2) d(alpha)` over
    /// `[alpha1, alpha2]`; the cross terms cancel, leaving pure exponentials.
    pub fn normalized_action(&self, alpha1: f64, alpha2: f64) -> f64 {
        self.a * self.a * (libm::exp(2.0 * alpha2) - libm::exp(2.0 * alpha1))
            + self.b * self.b * (libm::exp(-2.0 * alpha1) - libm::exp(-2.0 * alpha2))
    }

    /// Physical action of the curve for a given spring and pendulum length.
    pub fn action(&self, k_c: f64, l0: f64, alpha1: f64, alpha2: f64) -> f64 {
        k_c * k_c * l0 * l0 * self.normalized_action(alpha1, alpha2)
    }
}

/// Solves the boundary system for the coefficients `(a, b)` given boundary
/// angles and normalized lengths.
pub fn optimal_lambda(
    alpha1: f64,
    alpha2: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<LambdaCurve> {
    if alpha1 == alpha2 {
        return Err(Error::DegenerateBoundary);
    }
    // [[e^a1, e^-a1], [e^a2, e^-a2]] (a, b)^T = (lambda1 - 1, lambda2 - 1)^T
    let (e1, e1i) = (libm::exp(alpha1), libm::exp(-alpha1));
    let (e2, e2i) = (libm::exp(alpha2), libm::exp(-alpha2));
    let det = e1 * e2i - e1i * e2; // = 2 sinh(alpha1 - alpha2) != 0
    let r1 = lambda1 - 1.0;
    let r2 = lambda2 - 1.0;
    Ok(LambdaCurve {
        a: (r1 * e2i - r2 * e1i) / det,
        b: (r2 * e1 - r1 * e2) / det,
    })
}

/// One sampled point of the optimal control curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub alpha: f64,
    pub u: Vector2<f64>,
}

/// Samples the optimal control curve between `(alpha1, L1)` and
/// `(alpha2, L2)`: every sample satisfies `u = u_crit + L_u(alpha) n_alpha`
/// on the stable branch.
pub fn optimal_control_curve(
    sys: &LinearSpringPendulum,
    alpha1: f64,
    alpha2: f64,
    l1: f64,
    l2: f64,
    samples: usize,
) -> Result<Vec<CurveSample>> {
    if samples < 2 {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "need at least 2 samples",
        )));
    }
    let l0 = sys.length();
    let curve = optimal_lambda(alpha1, alpha2, l1 / l0, l2 / l0)?;
    let u_crit = sys.u_crit();
    let mut out = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = i as f64 / (samples - 1) as f64;
        let alpha = alpha1 + t * (alpha2 - alpha1);
        let l_u = l0 * curve.eval(alpha);
        out.push(CurveSample {
            alpha,
            u: u_crit + l_u * frames(alpha).n_alpha,
        });
    }
    Ok(out)
}

/// Exact action of the piecewise-linear interpolant through
/// `(alpha_i, lambda_i)` samples; the comparison functional for optimality
/// tests against perturbed curves.
pub fn piecewise_action(k_c: f64, l0: f64, alphas: &[f64], lambdas: &[f64]) -> f64 {
    assert_eq!(alphas.len(), lambdas.len());
    let mut total = 0.0;
    for i in 1..alphas.len() {
        let da = alphas[i] - alphas[i - 1];
        if da == 0.0 {
            continue;
        }
        let slope = (lambdas[i] - lambdas[i - 1]) / da;
        let p = lambdas[i - 1] - 1.0;
        let q = lambdas[i] - 1.0;
        // int of (linear)^2 over the segment.
        let sq_mean = (p * p + p * q + q * q) / 3.0;
        total += (slope * slope + sq_mean) * da;
    }
    k_c * k_c * l0 * l0 * total
}
