//! Newton solution of the equilibrium condition `grad_z W(z, u) = 0` for a
//! fixed control, stability classification, and the first-order tangent
//! machinery of the equilibrium set.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::potential::{evaluate_full, Configuration, PotentialOutput, PotentialSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Critical,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Critical => "critical",
        }
    }
}

/// A solved fiber point `(z*, u)` with its stability class, energy and the
/// cached derivative blocks at the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPoint {
    pub z_star: DVector<f64>,
    pub u: DVector<f64>,
    /// Reduced potential value `W(z*, u)` on this branch.
    pub energy: f64,
    pub stability: Stability,
    pub det_hess_zz: f64,
    pub output: PotentialOutput,
}

/// Tolerances shared by the equilibrium solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Absolute tolerance on the max-norm of `grad_z` at the solution.
    pub tol: f64,
    pub max_iter: usize,
    /// Criticality threshold, relative to the spectral scale of `hess_zz`.
    pub crit_threshold: f64,
    /// Fiber distance below which two solutions are considered duplicates.
    pub dedup_radius: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            crit_threshold: 1e-8,
            dedup_radius: 1e-6,
        }
    }
}

const LINE_SEARCH_FACTOR: f64 = 0.5;
const LINE_SEARCH_MIN_STEP: f64 = 1e-12;

/// Newton iteration on `grad_z` from `z_init`, with backtracking on the
/// squared residual norm and a damped fallback when `hess_zz` is singular.
pub fn solve_equilibrium(
    system: &dyn PotentialSystem,
    u: &DVector<f64>,
    z_init: &DVector<f64>,
    config: &SolverConfig,
) -> Result<EquilibriumPoint> {
    if !(config.tol > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "solver tolerance must be positive, got {}",
            config.tol
        )));
    }
    if config.max_iter == 0 {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "max_iter must be at least 1",
        )));
    }

    let mut z = z_init.clone();
    let mut out = evaluate_full(system, &Configuration::new(z.clone(), u.clone()))?;

    for _ in 0..config.max_iter {
        let residual = out.grad_z.amax();
        if residual <= config.tol {
            return Ok(finish_point(system, z, u.clone(), out, config));
        }

        let step = newton_direction(&out.hess_zz, &out.grad_z)?;

        // Backtracking on |grad_z|^2.
        let g2 = out.grad_z.norm_squared();
        let mut t = 1.0;
        let mut accepted = None;
        while t >= LINE_SEARCH_MIN_STEP {
            let z_trial = &z + &step * t;
            if let Ok(trial) =
                evaluate_full(system, &Configuration::new(z_trial.clone(), u.clone()))
            {
                if trial.grad_z.norm_squared() < g2 {
                    accepted = Some((z_trial, trial));
                    break;
                }
            }
            t *= LINE_SEARCH_FACTOR;
        }
        match accepted {
            Some((z_new, out_new)) => {
                z = z_new;
                out = out_new;
            }
            None => {
                return Err(Error::NonConvergence {
                    residual,
                    last_iterate: z,
                })
            }
        }
    }

    let residual = out.grad_z.amax();
    if residual <= config.tol {
        return Ok(finish_point(system, z, u.clone(), out, config));
    }
    Err(Error::NonConvergence {
        residual,
        last_iterate: z,
    })
}

/// Solves `hess_zz * step = -grad_z`, escalating Tikhonov damping when the
/// factorization fails.
fn newton_direction(hess_zz: &DMatrix<f64>, grad_z: &DVector<f64>) -> Result<DVector<f64>> {
    let rhs = -grad_z;
    if let Some(lu) = hess_zz.clone().lu().solve(&rhs) {
        if lu.iter().all(|v| v.is_finite()) {
            return Ok(lu);
        }
    }
    let scale = hess_zz.amax().max(1.0);
    let mut damping = 1e-10 * scale;
    for _ in 0..12 {
        let mut damped = hess_zz.clone();
        for i in 0..damped.nrows() {
            damped[(i, i)] += damping;
        }
        if let Some(sol) = damped.lu().solve(&rhs) {
            if sol.iter().all(|v| v.is_finite()) {
                return Ok(sol);
            }
        }
        damping *= 10.0;
    }
    Err(Error::SingularJacobian)
}

fn finish_point(
    system: &dyn PotentialSystem,
    z: DVector<f64>,
    u: DVector<f64>,
    out: PotentialOutput,
    config: &SolverConfig,
) -> EquilibriumPoint {
    let z = system.canonical_fiber(z);
    // Re-evaluate at the canonical representative so cached blocks match z_star.
    let out = evaluate_full(system, &Configuration::new(z.clone(), u.clone())).unwrap_or(out);
    let (stability, det) = classify_stability(&out.hess_zz, config.crit_threshold);
    EquilibriumPoint {
        z_star: z,
        u,
        energy: out.value,
        stability,
        det_hess_zz: det,
        output: out,
    }
}

/// Classifies a state Hessian by the sign pattern of its eigenvalues.
///
/// The threshold is applied relative to the spectral scale of the
/// symmetrized Hessian (with an absolute floor of 1), so a vanishing Hessian
/// is Critical rather than spuriously Stable.
pub fn classify_stability(hess_zz: &DMatrix<f64>, crit_threshold: f64) -> (Stability, f64) {
    let sym = (hess_zz + hess_zz.transpose()) * 0.5;
    let eigen = sym.symmetric_eigen();
    let det: f64 = eigen.eigenvalues.iter().product();
    let scale = eigen.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let threshold = crit_threshold * scale.max(1.0);
    let min_abs = eigen
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let min_eig = eigen
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, v| a.min(*v));
    let stability = if min_abs <= threshold {
        Stability::Critical
    } else if min_eig > 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    (stability, det)
}

/// Runs the solver from every seed, discards failures, deduplicates by fiber
/// distance and returns the survivors sorted by energy.
pub fn find_equilibria(
    system: &dyn PotentialSystem,
    u: &DVector<f64>,
    seeds: &[DVector<f64>],
    config: &SolverConfig,
) -> Vec<EquilibriumPoint> {
    let mut found: Vec<EquilibriumPoint> = Vec::new();
    for seed in seeds {
        if let Ok(point) = solve_equilibrium(system, u, seed, config) {
            found.push(point);
        }
    }
    // Deterministic order before dedup: energy, then fiber coordinates.
    found.sort_by(|a, b| {
        a.energy
            .partial_cmp(&b.energy)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| lex_cmp(&a.z_star, &b.z_star))
    });
    let mut unique: Vec<EquilibriumPoint> = Vec::new();
    for point in found {
        if unique
            .iter()
            .all(|kept| system.fiber_distance(&kept.z_star, &point.z_star) > config.dedup_radius)
        {
            unique.push(point);
        }
    }
    unique
}

pub(crate) fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> core::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y) {
            Some(core::cmp::Ordering::Equal) | None => continue,
            Some(ord) => return ord,
        }
    }
    core::cmp::Ordering::Equal
}

/// First-order response `dz` of the equilibrium state to a control step
/// `du`, from `hess_zz * dz = -hess_uz^T * du`.
pub fn tangent_step(point: &EquilibriumPoint, delta_u: &DVector<f64>) -> Result<DVector<f64>> {
    if point.stability == Stability::Critical {
        return Err(Error::SingularJacobian);
    }
    if delta_u.len() != point.u.len() {
        return Err(Error::Dimension {
            what: "delta_u",
            expected: point.u.len(),
            got: delta_u.len(),
        });
    }
    let rhs = -(point.output.hess_uz.transpose() * delta_u);
    point
        .output
        .hess_zz
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularJacobian)
}

/// The `N x K` matrix mapping control steps to first-order state responses.
pub fn tangent_map(point: &EquilibriumPoint) -> Result<DMatrix<f64>> {
    if point.stability == Stability::Critical {
        return Err(Error::SingularJacobian);
    }
    let rhs = -point.output.hess_uz.transpose();
    point
        .output
        .hess_zz
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularJacobian)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pendulum::LinearSpringPendulum;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn pendulum() -> LinearSpringPendulum {
        // u_crit = (0, 5).
        LinearSpringPendulum::new(1.0, 10.0, 1.0).unwrap()
    }

    fn v(s: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(s)
    }

    #[test]
    fn solves_to_zero_angle() {
        let sys = pendulum();
        let p = solve_equilibrium(&sys, &v(&[1.0, 5.0]), &v(&[0.3]), &SolverConfig::default())
            .unwrap();
        assert_abs_diff_eq!(p.z_star[0], 0.0, epsilon = 1e-9);
        assert_eq!(p.stability, Stability::Stable);
        assert!(p.output.grad_z.amax() <= 1e-10);
    }

    #[test]
    fn solves_to_quarter_turn() {
        let sys = pendulum();
        let p = solve_equilibrium(&sys, &v(&[0.0, 6.0]), &v(&[1.2]), &SolverConfig::default())
            .unwrap();
        assert_abs_diff_eq!(p.z_star[0], core::f64::consts::FRAC_PI_2, epsilon = 1e-9);
        assert_eq!(p.stability, Stability::Stable);
    }

    #[test]
    fn finds_the_unstable_branch() {
        let sys = pendulum();
        let p = solve_equilibrium(
            &sys,
            &v(&[1.0, 5.0]),
            &v(&[core::f64::consts::PI - 0.3]),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(
            sys.fiber_distance(&p.z_star, &v(&[core::f64::consts::PI])),
            0.0,
            epsilon = 1e-9
        );
        assert_eq!(p.stability, Stability::Unstable);
    }

    #[test]
    fn classify_examples() {
        let m = |x: f64| DMatrix::from_element(1, 1, x);
        assert_eq!(classify_stability(&m(2.5), 1e-8).0, Stability::Stable);
        assert_eq!(classify_stability(&m(-2.5), 1e-8).0, Stability::Unstable);
        assert_eq!(classify_stability(&m(0.0), 1e-8).0, Stability::Critical);
        assert_eq!(classify_stability(&m(1e-12), 1e-8).0, Stability::Critical);
        let saddle = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let (s, det) = classify_stability(&saddle, 1e-8);
        assert_eq!(s, Stability::Unstable);
        assert_abs_diff_eq!(det, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn stable_branch_determinant_is_kll() {
        // det hess_zz = k_c L0 L_u on the aligned branch.
        let sys = pendulum();
        let p = solve_equilibrium(&sys, &v(&[0.7, 5.4]), &v(&[0.4]), &SolverConfig::default())
            .unwrap();
        let l_u = (0.7f64 * 0.7 + 0.4 * 0.4).sqrt();
        assert_abs_diff_eq!(p.det_hess_zz, l_u, epsilon = 1e-9);
    }

    #[test]
    fn find_equilibria_two_branches() {
        let sys = pendulum();
        let seeds: Vec<DVector<f64>> = (0..16)
            .map(|i| v(&[-core::f64::consts::PI + core::f64::consts::PI / 8.0 * i as f64]))
            .collect();
        let points = find_equilibria(&sys, &v(&[1.0, 5.3]), &seeds, &SolverConfig::default());
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].stability, Stability::Stable);
        assert_eq!(points[1].stability, Stability::Unstable);
        assert!(points[0].energy <= points[1].energy);
    }

    #[test]
    fn duplicate_seeds_dedupe() {
        let sys = pendulum();
        let config = SolverConfig::default();
        let u = v(&[0.8, 4.1]);
        let single = find_equilibria(&sys, &u, &[v(&[0.2])], &config);
        let repeated = find_equilibria(&sys, &u, &[v(&[0.2]), v(&[0.2]), v(&[0.2])], &config);
        assert_eq!(single, repeated);
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn tangent_step_zero_and_radial() {
        let sys = pendulum();
        let u = v(&[1.0 + 0.0, 5.0]); // alpha* = 0, L_u = 1
        let p = solve_equilibrium(&sys, &u, &v(&[0.1]), &SolverConfig::default()).unwrap();
        assert_eq!(tangent_step(&p, &v(&[0.0, 0.0])).unwrap()[0], 0.0);
        // Radial control step keeps alpha* fixed to first order.
        let dz = tangent_step(&p, &v(&[1e-3, 0.0])).unwrap();
        assert_abs_diff_eq!(dz[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tangent_step_is_first_order_accurate() {
        // Error of the tangent prediction must shrink quadratically.
        let sys = pendulum();
        let u = v(&[0.9, 5.7]);
        let p = solve_equilibrium(&sys, &u, &v(&[0.5]), &SolverConfig::default()).unwrap();
        let dir = v(&[0.6, -0.8]);
        let mut errors = Vec::new();
        for &h in &[2e-2, 1e-2, 5e-3] {
            let du = &dir * h;
            let dz = tangent_step(&p, &du).unwrap();
            let resolved =
                solve_equilibrium(&sys, &(&u + &du), &p.z_star, &SolverConfig::default()).unwrap();
            errors.push(sys.fiber_distance(&resolved.z_star, &(&p.z_star + dz)));
        }
        // Halving h should quarter the error (allow generous slack).
        assert!(errors[1] < errors[0] * 0.35, "errors {errors:?}");
        assert!(errors[2] < errors[1] * 0.35, "errors {errors:?}");
    }

    #[test]
    fn tangent_map_matches_columns_and_closed_form() {
        let sys = pendulum();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = v(&[rng.gen_range(-2.0..2.0), 5.0 + rng.gen_range(-2.0..2.0)]);
            if sys.control_length(&nalgebra::Vector2::new(u[0], u[1])) < 0.2 {
                continue;
            }
            let seed = v(&[rng.gen_range(-3.0..3.0)]);
            let p = match solve_equilibrium(&sys, &u, &seed, &SolverConfig::default()) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let map = tangent_map(&p).unwrap();
            assert_eq!((map.nrows(), map.ncols()), (1, 2));
            for j in 0..2 {
                let mut e = v(&[0.0, 0.0]);
                e[j] = 1.0;
                assert_abs_diff_eq!(map[(0, j)], tangent_step(&p, &e).unwrap()[0], epsilon = 1e-12);
            }
            // Finite difference of the closed-form angle alpha*(u).
            if p.stability != Stability::Stable {
                continue;
            }
            let h = 1e-6;
            for j in 0..2 {
                let mut up = nalgebra::Vector2::new(u[0], u[1]);
                let mut um = up;
                up[j] += h;
                um[j] -= h;
                let (ap, _) = sys.analytic_equilibrium(&up).unwrap();
                let (am, _) = sys.analytic_equilibrium(&um).unwrap();
                let fd = libm::remainder(ap - am, core::f64::consts::TAU) / (2.0 * h);
                assert_abs_diff_eq!(map[(0, j)], fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn critical_point_refuses_tangent() {
        let sys = pendulum();
        // Exactly the critical control: the solver converges (grad_z = 0
        // everywhere on the fiber) and must classify Critical.
        let p = solve_equilibrium(&sys, &v(&[0.0, 5.0]), &v(&[0.3]), &SolverConfig::default())
            .unwrap();
        assert_eq!(p.stability, Stability::Critical);
        assert!(matches!(
            tangent_step(&p, &v(&[1.0, 0.0])),
            Err(Error::SingularJacobian)
        ));
        assert!(matches!(tangent_map(&p), Err(Error::SingularJacobian)));
    }

    #[test]
    fn nonconvergence_carries_last_iterate() {
        let sys = pendulum();
        let config = SolverConfig {
            max_iter: 1,
            tol: 1e-15,
            ..SolverConfig::default()
        };
        match solve_equilibrium(&sys, &v(&[1.0, 5.0]), &v(&[2.0]), &config) {
            Err(Error::NonConvergence { residual, last_iterate }) => {
                assert!(residual > 1e-15);
                assert_eq!(last_iterate.len(), 1);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_solver_parameters() {
        let sys = pendulum();
        let bad_tol = SolverConfig { tol: 0.0, ..SolverConfig::default() };
        assert!(solve_equilibrium(&sys, &v(&[1.0, 5.0]), &v(&[0.0]), &bad_tol).is_err());
        let bad_iter = SolverConfig { max_iter: 0, ..SolverConfig::default() };
        assert!(solve_equilibrium(&sys, &v(&[1.0, 5.0]), &v(&[0.0]), &bad_iter).is_err());
    }
}
