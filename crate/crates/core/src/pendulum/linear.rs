//! Inverted pendulum driven through a linear spring of constant stiffness.
//!
//! The hinge sits at the origin, gravity acts on the center of mass at
//! `(L0/2) n_alpha`, and the spring connects the agent position `u` to the
//! tip `L0 n_alpha`:
//!
//! `W(alpha, u) = (1/2) mg L0 sin(alpha) + (1/2) k_c |u - L0 n_alpha|^2`
//!
//! Everything about this system is available in closed form, which makes it
//! the reference oracle for the numeric solver and the Schur-complement
//! control Hessian.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::potential::{Configuration, PotentialOutput, PotentialSystem};

use super::{angle_distance, angle_seeds, frames, wrap_angle};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSpringPendulum {
    l0: f64,
    mg: f64,
    k_c: f64,
}

impl LinearSpringPendulum {
    pub fn new(l0: f64, mg: f64, k_c: f64) -> Result<Self> {
        if !(l0 > 0.0) || !l0.is_finite() {
            return Err(Error::InvalidParameter(String::from("L0 must be positive")));
        }
        if !(mg >= 0.0) || !mg.is_finite() {
            return Err(Error::InvalidParameter(String::from("mg must be nonnegative")));
        }
        if !(k_c > 0.0) || !k_c.is_finite() {
            return Err(Error::InvalidParameter(String::from("k_c must be positive")));
        }
        Ok(Self { l0, mg, k_c })
    }

    pub fn length(&self) -> f64 {
        self.l0
    }

    pub fn weight(&self) -> f64 {
        self.mg
    }

    pub fn stiffness(&self) -> f64 {
        self.k_c
    }

    /// Control at which the two equilibrium branches merge and the state
    /// Hessian vanishes.
    pub fn u_crit(&self) -> Vector2<f64> {
        Vector2::new(0.0, self.mg / (2.0 * self.k_c))
    }

    /// Distance of a control from the critical control.
    pub fn control_length(&self, u: &Vector2<f64>) -> f64 {
        (u - self.u_crit()).norm()
    }

    /// Stable-branch equilibrium angle and control length:
    /// `alpha* = atan2(u_y - mg/2k_c, u_x)`, `L_u = |u - u_crit|`.
    pub fn analytic_equilibrium(&self, u: &Vector2<f64>) -> Result<(f64, f64)> {
        let rel = u - self.u_crit();
        let l_u = rel.norm();
        if l_u == 0.0 {
            return Err(Error::CriticalControl);
        }
        Ok((libm::atan2(rel.y, rel.x), l_u))
    }

    /// Total energy on the stable branch,
    /// `W*(u) = (1/2) k_c (L_u - L0)^2 + (1/2) mg u_y` (constant fixed to 0).
    pub fn reduced_potential(&self, u: &Vector2<f64>) -> Result<f64> {
        let (_, l_u) = self.analytic_equilibrium(u)?;
        Ok(0.5 * self.k_c * (l_u - self.l0) * (l_u - self.l0) + 0.5 * self.mg * u.y)
    }

    /// Closed-form control Hessian on the stable branch:
    /// `R diag(k_c, k_c (1 - L0/L_u)) R^T` with `R` the rotation by `alpha*`.
    pub fn analytic_control_hessian(&self, u: &Vector2<f64>) -> Result<Matrix2<f64>> {
        let (alpha, l_u) = self.analytic_equilibrium(u)?;
        let r = frames(alpha).rotation;
        let d = Matrix2::new(self.k_c, 0.0, 0.0, self.k_c * (1.0 - self.l0 / l_u));
        Ok(r * d * r.transpose())
    }

    /// State Hessian on the stable branch, `k_c L0 L_u`.
    pub fn analytic_state_hessian(&self, u: &Vector2<f64>) -> Result<f64> {
        let (_, l_u) = self.analytic_equilibrium(u)?;
        Ok(self.k_c * self.l0 * l_u)
    }
}

impl PotentialSystem for LinearSpringPendulum {
    fn dims(&self) -> (usize, usize) {
        (1, 2)
    }

    fn evaluate(&self, cfg: &Configuration) -> Result<PotentialOutput> {
        let alpha = cfg.z[0];
        let u = Vector2::new(cfg.u[0], cfg.u[1]);
        let frame = frames(alpha);
        let n = frame.n_alpha;
        let n_perp = frame.n_alpha_perp;
        let spring = u - self.l0 * n;
        let half_mgl = 0.5 * self.mg * self.l0;
        let kl = self.k_c * self.l0;

        let value = half_mgl * n.y + 0.5 * self.k_c * spring.norm_squared();
        let grad_z = half_mgl * n.x - kl * u.dot(&n_perp);
        let hess_zz = -half_mgl * n.y + kl * u.dot(&n);
        let grad_u = self.k_c * spring;
        let hess_uz = -kl * n_perp;

        Ok(PotentialOutput {
            value,
            grad_z: DVector::from_element(1, grad_z),
            grad_u: DVector::from_column_slice(grad_u.as_slice()),
            hess_zz: DMatrix::from_element(1, 1, hess_zz),
            hess_uz: DMatrix::from_column_slice(2, 1, hess_uz.as_slice()),
            hess_uu: DMatrix::from_diagonal_element(2, 2, self.k_c),
        })
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_equilibrium, SolverConfig};
    use crate::potential::evaluate_full;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn pendulum() -> LinearSpringPendulum {
        LinearSpringPendulum::new(1.0, 10.0, 1.0).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(LinearSpringPendulum::new(0.0, 10.0, 1.0).is_err());
        assert!(LinearSpringPendulum::new(1.0, -1.0, 1.0).is_err());
        assert!(LinearSpringPendulum::new(1.0, 10.0, 0.0).is_err());
        assert!(LinearSpringPendulum::new(1.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn analytic_equilibrium_examples() {
        let sys = pendulum();
        let (alpha, l_u) = sys.analytic_equilibrium(&Vector2::new(1.0, 5.0)).unwrap();
        assert_eq!(alpha, 0.0);
        assert_eq!(l_u, 1.0);
        let (alpha, l_u) = sys.analytic_equilibrium(&Vector2::new(0.0, 7.0)).unwrap();
        assert_eq!(alpha, core::f64::consts::FRAC_PI_2);
        assert_eq!(l_u, 2.0);
        assert!(matches!(
            sys.analytic_equilibrium(&sys.u_crit()),
            Err(Error::CriticalControl)
        ));
    }

    #[test]
    fn analytic_matches_numeric_solver() {
        let sys = pendulum();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let u = Vector2::new(rng.gen_range(-2.0..2.0), 5.0 + rng.gen_range(-2.0..2.0));
            if sys.control_length(&u) < 0.05 {
                continue;
            }
            let (alpha, _) = sys.analytic_equilibrium(&u).unwrap();
            let solved = solve_equilibrium(
                &sys,
                &DVector::from_column_slice(&[u.x, u.y]),
                &DVector::from_element(1, alpha + 0.2),
                &SolverConfig::default(),
            )
            .unwrap();
            assert!(angle_distance(solved.z_star[0], alpha) <= 1e-8);
        }
    }

    #[test]
    fn reduced_potential_examples() {
        let sys = pendulum();
        // Rest-length spring: only gravity's share remains.
        let u = sys.u_crit() + 1.0 * frames(0.6).n_alpha;
        assert_abs_diff_eq!(
            sys.reduced_potential(&u).unwrap(),
            0.5 * 10.0 * u.y,
            epsilon = 1e-12
        );
        // Differencing two control points agrees with the full potential.
        let u2 = Vector2::new(1.3, 6.2);
        let (a1, _) = sys.analytic_equilibrium(&u).unwrap();
        let (a2, _) = sys.analytic_equilibrium(&u2).unwrap();
        let w1 = evaluate_full(&sys, &Configuration::from_slices(&[a1], &[u.x, u.y]))
            .unwrap()
            .value;
        let w2 = evaluate_full(&sys, &Configuration::from_slices(&[a2], &[u2.x, u2.y]))
            .unwrap()
            .value;
        let full_diff = w2 - w1;
        let reduced_diff = sys.reduced_potential(&u2).unwrap() - sys.reduced_potential(&u).unwrap();
        // The conventions differ by a constant; differences must agree.
        assert_abs_diff_eq!(full_diff, reduced_diff, epsilon = 1e-10);
    }

    #[test]
    fn state_hessian_closed_form() {
        let sys = pendulum();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let u = Vector2::new(rng.gen_range(-2.0..2.0), 5.0 + rng.gen_range(-2.0..2.0));
            if sys.control_length(&u) < 0.1 {
                continue;
            }
            let (alpha, l_u) = sys.analytic_equilibrium(&u).unwrap();
            let out = evaluate_full(&sys, &Configuration::from_slices(&[alpha], &[u.x, u.y]))
                .unwrap();
            assert_abs_diff_eq!(out.hess_zz[(0, 0)], 1.0 * 1.0 * l_u, epsilon = 1e-10);
            assert_abs_diff_eq!(
                sys.analytic_state_hessian(&u).unwrap(),
                out.hess_zz[(0, 0)],
                epsilon = 1e-10
            );
            // Orthogonality on the branch: n_perp . (u - u_crit) = 0.
            let rel = u - sys.u_crit();
            assert_abs_diff_eq!(frames(alpha).n_alpha_perp.dot(&rel), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn control_hessian_limits() {
        let sys = pendulum();
        // Far field: G -> k_c I.
        let far = sys.u_crit() + 1e6 * frames(0.3).n_alpha;
        let g = sys.analytic_control_hessian(&far).unwrap();
        assert_abs_diff_eq!(g, Matrix2::identity(), epsilon = 1e-5);
        // Compressed to L0/2: eigenvalues (k_c, -k_c).
        let near = sys.u_crit() + 0.5 * frames(0.3).n_alpha;
        let g = sys.analytic_control_hessian(&near).unwrap();
        let mut eig: alloc::vec::Vec<f64> =
            g.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(eig[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[1], 1.0, epsilon = 1e-12);
    }
}
