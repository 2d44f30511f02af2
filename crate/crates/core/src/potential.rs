//! Potential-system abstraction: smooth potentials over internal states and
//! controls, with analytic derivatives up to second order, plus the
//! finite-difference harness used to validate them.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point in the combined state/control space of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    /// Internal states, length `N`.
    pub z: DVector<f64>,
    /// Control inputs, length `K`.
    pub u: DVector<f64>,
}

impl Configuration {
    pub fn new(z: DVector<f64>, u: DVector<f64>) -> Self {
        Self { z, u }
    }

    pub fn from_slices(z: &[f64], u: &[f64]) -> Self {
        Self {
            z: DVector::from_column_slice(z),
            u: DVector::from_column_slice(u),
        }
    }
}

/// Value and all derivative blocks of a potential at one configuration.
///
/// `hess_uz` is the `K x N` block holding the derivative of `grad_z` along
/// the control directions; the `z`-by-`u` block is always its transpose and
/// is never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutput {
    pub value: f64,
    pub grad_z: DVector<f64>,
    pub grad_u: DVector<f64>,
    pub hess_zz: DMatrix<f64>,
    pub hess_uz: DMatrix<f64>,
    pub hess_uu: DMatrix<f64>,
}

impl PotentialOutput {
    /// True when every entry of every block is finite.
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad_z.iter().all(|v| v.is_finite())
            && self.grad_u.iter().all(|v| v.is_finite())
            && self.hess_zz.iter().all(|v| v.is_finite())
            && self.hess_uz.iter().all(|v| v.is_finite())
            && self.hess_uu.iter().all(|v| v.is_finite())
    }
}

/// A conservative mechanical system described by a smooth potential
/// `W(z, u)` with analytic derivatives.
///
/// Implementations must be immutable after construction: `evaluate` is
/// deterministic, side-effect-free, and safe to call concurrently.
pub trait PotentialSystem: Sync {
    /// `(N, K)`: number of internal states and of control inputs.
    fn dims(&self) -> (usize, usize);

    /// Value and all five derivative blocks at `cfg`.
    fn evaluate(&self, cfg: &Configuration) -> Result<PotentialOutput>;

    /// Distance between two internal states on the fiber over a fixed
    /// control. Symmetric, nonnegative, zero iff the states are physically
    /// identical (e.g. equal modulo 2*pi for angles).
    fn fiber_distance(&self, z1: &DVector<f64>, z2: &DVector<f64>) -> f64 {
        (z1 - z2).norm()
    }

    /// Canonical representative of an internal state (e.g. angle wrapped to
    /// `[-pi, pi)`). Identity by default.
    fn canonical_fiber(&self, z: DVector<f64>) -> DVector<f64> {
        z
    }

    /// Seed states spanning the fiber's natural range, used by the
    /// multi-solution search. Defaults to the origin.
    fn fiber_seeds(&self, count: usize) -> Vec<DVector<f64>> {
        let (n, _) = self.dims();
        let _ = count;
        alloc::vec![DVector::zeros(n)]
    }
}

/// Evaluates `system` at `cfg` after validating dimensions, then checks the
/// output for finiteness and Hessian symmetry.
pub fn evaluate_full(system: &dyn PotentialSystem, cfg: &Configuration) -> Result<PotentialOutput> {
    let (n, k) = system.dims();
    if cfg.z.len() != n {
        return Err(Error::Dimension {
            what: "internal state z",
            expected: n,
            got: cfg.z.len(),
        });
    }
    if cfg.u.len() != k {
        return Err(Error::Dimension {
            what: "control u",
            expected: k,
            got: cfg.u.len(),
        });
    }
    if !cfg.z.iter().chain(cfg.u.iter()).all(|v| v.is_finite()) {
        return Err(Error::Evaluation(format!("non-finite configuration")));
    }
    let out = system.evaluate(cfg)?;
    if !out.is_finite() {
        return Err(Error::Evaluation(format!(
            "non-finite potential output at the requested configuration"
        )));
    }
    check_symmetric(&out.hess_zz, "hess_zz")?;
    check_symmetric(&out.hess_uu, "hess_uu")?;
    Ok(out)
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    let scale = m.amax().max(1e-300);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Evaluation(format!("{name} is not symmetric")));
            }
        }
    }
    Ok(())
}

/// Per-block comparison of analytic derivatives against central finite
/// differences of the next-lower block.
#[derive(Debug, Clone, Default)]
pub struct DerivativeReport {
    pub grad_z_err: f64,
    pub grad_u_err: f64,
    pub hess_zz_err: f64,
    pub hess_uz_err: f64,
    pub hess_uu_err: f64,
    /// Entries whose finite difference fell below rounding noise were
    /// excluded from the error maxima and counted here instead.
    pub unreliable_entries: usize,
}

impl DerivativeReport {
    pub fn max_error(&self) -> f64 {
        self.grad_z_err
            .max(self.grad_u_err)
            .max(self.hess_zz_err)
            .max(self.hess_uz_err)
            .max(self.hess_uu_err)
    }
}

struct FdAccum {
    max_diff: f64,
    max_mag: f64,
    unreliable: usize,
}

impl FdAccum {
    fn new() -> Self {
        Self {
            max_diff: 0.0,
            max_mag: 0.0,
            unreliable: 0,
        }
    }

    /// `fp`/`fm` are the sampled values whose difference drives the central
    /// estimate; when that difference is below rounding noise the entry is
    /// flagged instead of scored.
    fn push(&mut self, analytic: f64, fd: f64, fp: f64, fm: f64) {
        let noise = 32.0 * f64::EPSILON * (fp.abs() + fm.abs());
        if (fp - fm).abs() <= noise && analytic.abs() * 1e-9 <= noise {
            self.unreliable += 1;
            return;
        }
        self.max_diff = self.max_diff.max((analytic - fd).abs());
        self.max_mag = self.max_mag.max(analytic.abs()).max(fd.abs());
    }

    fn relative(&self) -> f64 {
        if self.max_mag == 0.0 {
            if self.max_diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.max_diff / self.max_mag
        }
    }
}

/// Compares each analytic derivative block of `system` at `cfg` with a
/// central finite-difference estimate built from the next-lower block
/// (gradients from values, Hessian blocks from gradients).
pub fn fd_check_derivatives(
    system: &dyn PotentialSystem,
    cfg: &Configuration,
    step: f64,
) -> Result<DerivativeReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let (n, k) = system.dims();
    let base = evaluate_full(system, cfg)?;

    let eval_at = |z: DVector<f64>, u: DVector<f64>| -> Result<PotentialOutput> {
        evaluate_full(system, &Configuration::new(z, u))
    };

    let mut grad_z = FdAccum::new();
    let mut grad_u = FdAccum::new();
    let mut hess_zz = FdAccum::new();
    let mut hess_uz = FdAccum::new();
    let mut hess_uu = FdAccum::new();

    // z-direction probes feed grad_z (from values) and hess_zz (from grad_z).
    for i in 0..n {
        let mut zp = cfg.z.clone();
        let mut zm = cfg.z.clone();
        zp[i] += step;
        zm[i] -= step;
        let op = eval_at(zp, cfg.u.clone())?;
        let om = eval_at(zm, cfg.u.clone())?;
        let fd_val = (op.value - om.value) / (2.0 * step);
        grad_z.push(base.grad_z[i], fd_val, op.value, om.value);
        for r in 0..n {
            let fd = (op.grad_z[r] - om.grad_z[r]) / (2.0 * step);
            hess_zz.push(base.hess_zz[(r, i)], fd, op.grad_z[r], om.grad_z[r]);
        }
    }

    // u-direction probes feed grad_u, hess_uz (from grad_z) and hess_uu.
    for j in 0..k {
        let mut up = cfg.u.clone();
        let mut um = cfg.u.clone();
        up[j] += step;
        um[j] -= step;
        let op = eval_at(cfg.z.clone(), up)?;
        let om = eval_at(cfg.z.clone(), um)?;
        let fd_val = (op.value - om.value) / (2.0 * step);
        grad_u.push(base.grad_u[j], fd_val, op.value, om.value);
        for r in 0..n {
            let fd = (op.grad_z[r] - om.grad_z[r]) / (2.0 * step);
            hess_uz.push(base.hess_uz[(j, r)], fd, op.grad_z[r], om.grad_z[r]);
        }
        for r in 0..k {
            let fd = (op.grad_u[r] - om.grad_u[r]) / (2.0 * step);
            hess_uu.push(base.hess_uu[(r, j)], fd, op.grad_u[r], om.grad_u[r]);
        }
    }

    Ok(DerivativeReport {
        grad_z_err: grad_z.relative(),
        grad_u_err: grad_u.relative(),
        hess_zz_err: hess_zz.relative(),
        hess_uz_err: hess_uz.relative(),
        hess_uu_err: hess_uu.relative(),
        unreliable_entries: grad_z.unreliable
            + grad_u.unreliable
            + hess_zz.unreliable
            + hess_uz.unreliable
            + hess_uu.unreliable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pendulum::{ContactPendulum, LinearSpringPendulum};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn pendulum() -> LinearSpringPendulum {
        LinearSpringPendulum::new(1.0, 10.0, 1.0).unwrap()
    }

    /// W ≡ c: every derivative block vanishes identically.
    struct ConstantPotential;

    impl PotentialSystem for ConstantPotential {
        fn dims(&self) -> (usize, usize) {
            (2, 3)
        }

        fn evaluate(&self, _cfg: &Configuration) -> Result<PotentialOutput> {
            Ok(PotentialOutput {
                value: 4.25,
                grad_z: DVector::zeros(2),
                grad_u: DVector::zeros(3),
                hess_zz: DMatrix::zeros(2, 2),
                hess_uz: DMatrix::zeros(3, 2),
                hess_uu: DMatrix::zeros(3, 3),
            })
        }
    }

    #[test]
    fn pendulum_value_by_hand() {
        // alpha = 0, u = (1, 5): spring vector (0, 5), so W = 0 + 12.5.
        let sys = pendulum();
        let out = evaluate_full(&sys, &Configuration::from_slices(&[0.0], &[1.0, 5.0])).unwrap();
        assert_abs_diff_eq!(out.value, 12.5, epsilon = 1e-14);
    }

    #[test]
    fn pendulum_aligned_control_is_equilibrium() {
        // u - u_crit aligned with n_alpha at alpha = pi/2 kills grad_z.
        let sys = pendulum();
        let cfg = Configuration::from_slices(&[core::f64::consts::FRAC_PI_2], &[0.0, 6.0]);
        let out = evaluate_full(&sys, &cfg).unwrap();
        assert_abs_diff_eq!(out.grad_z[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let sys = pendulum();
        let bad_z = Configuration::from_slices(&[0.0, 0.0], &[1.0, 5.0]);
        assert!(matches!(
            evaluate_full(&sys, &bad_z),
            Err(Error::Dimension { expected: 1, got: 2, .. })
        ));
        let bad_u = Configuration::from_slices(&[0.0], &[1.0]);
        assert!(matches!(
            evaluate_full(&sys, &bad_u),
            Err(Error::Dimension { expected: 2, got: 1, .. })
        ));
    }

    #[test]
    fn non_finite_configuration_is_rejected() {
        let sys = pendulum();
        let cfg = Configuration::from_slices(&[f64::NAN], &[1.0, 5.0]);
        assert!(matches!(evaluate_full(&sys, &cfg), Err(Error::Evaluation(_))));
    }

    #[test]
    fn evaluate_is_deterministic_bitwise() {
        let sys = pendulum();
        let cfg = Configuration::from_slices(&[0.7321], &[0.4, -1.3]);
        let a = evaluate_full(&sys, &cfg).unwrap();
        let b = evaluate_full(&sys, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fd_check_linear_pendulum() {
        let sys = pendulum();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let cfg = Configuration::from_slices(
                &[rng.gen_range(-3.0..3.0)],
                &[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
            );
            let report = fd_check_derivatives(&sys, &cfg, 1e-5).unwrap();
            assert!(
                report.max_error() < 1e-5,
                "fd mismatch {:?} at {:?}",
                report,
                cfg
            );
        }
    }

    #[test]
    fn fd_check_contact_pendulum_far_from_transition() {
        let sys = ContactPendulum::new(1.0, 0.1, 10.0, 1.0, 1e4, 0.1).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 30 {
            let alpha = rng.gen_range(-3.0..3.0);
            let u = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
            // Stay off the body-frame axes and outside the stiffness
            // transition zone, where the analytic model is least curved.
            let ut = {
                let r = crate::pendulum::frames(alpha).rotation;
                r.transpose() * nalgebra::Vector2::new(u[0], u[1])
                    - nalgebra::Vector2::new(0.5, 0.0)
            };
            let depth = sys.inside_outside(ut.x, ut.y);
            if ut.x.abs() < 0.05 || ut.y.abs() < 0.05 || depth.abs() < 0.5 {
                continue;
            }
            let cfg = Configuration::from_slices(&[alpha], &u);
            let report = fd_check_derivatives(&sys, &cfg, 1e-5).unwrap();
            assert!(
                report.max_error() < 1e-5,
                "fd mismatch {:?} at alpha={alpha}, u={u:?}",
                report
            );
            checked += 1;
        }
    }

    #[test]
    fn fd_check_constant_potential_is_exact() {
        let sys = ConstantPotential;
        let cfg = Configuration::from_slices(&[0.3, -0.1], &[1.0, 2.0, 3.0]);
        let report = fd_check_derivatives(&sys, &cfg, 1e-5).unwrap();
        assert_eq!(report.max_error(), 0.0);
    }

    #[test]
    fn fd_step_must_be_positive() {
        let sys = pendulum();
        let cfg = Configuration::from_slices(&[0.0], &[1.0, 5.0]);
        assert!(fd_check_derivatives(&sys, &cfg, 0.0).is_err());
        assert!(fd_check_derivatives(&sys, &cfg, -1e-5).is_err());
    }

    #[test]
    fn fiber_distance_examples() {
        let sys = pendulum();
        let z = |v: f64| DVector::from_element(1, v);
        assert_abs_diff_eq!(
            sys.fiber_distance(&z(0.1), &z(0.1 + core::f64::consts::TAU)),
            0.0,
            epsilon = 1e-15
        );
        assert_eq!(sys.fiber_distance(&z(0.37), &z(0.37)), 0.0);
        assert_abs_diff_eq!(
            sys.fiber_distance(
                &z(-core::f64::consts::FRAC_PI_2),
                &z(core::f64::consts::FRAC_PI_2)
            ),
            core::f64::consts::PI,
            epsilon = 1e-15
        );
    }
}
