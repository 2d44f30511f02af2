//! Planar pendulum models driven by an elastic agent: a constant-stiffness
//! spring variant with full closed-form oracles, and a contact-regularized
//! variant whose stiffness depends on penetration into a super-ellipse body.

mod contact;
mod curve;
mod linear;

pub use contact::ContactPendulum;
pub use curve::{optimal_control_curve, optimal_lambda, piecewise_action, CurveSample, LambdaCurve};
pub use linear::LinearSpringPendulum;

use nalgebra::{Matrix2, Vector2};

/// Moving-frame data of the pendulum at angle `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame2D {
    /// Unit vector along the pendulum's major axis.
    pub n_alpha: Vector2<f64>,
    /// Unit vector perpendicular to the major axis.
    pub n_alpha_perp: Vector2<f64>,
    /// Rotation by `alpha`, `det = +1`.
    pub rotation: Matrix2<f64>,
}

/// Axis, normal and rotation of the frame rotated by `alpha`.
pub fn frames(alpha: f64) -> Frame2D {
    let (s, c) = (libm::sin(alpha), libm::cos(alpha));
    Frame2D {
        n_alpha: Vector2::new(c, s),
        n_alpha_perp: Vector2::new(-s, c),
        rotation: Matrix2::new(c, -s, s, c),
    }
}

pub(crate) const TWO_PI: f64 = core::f64::consts::TAU;

/// Wraps an angle into `[-pi, pi)`.
pub(crate) fn wrap_angle(alpha: f64) -> f64 {
    let r = libm::remainder(alpha, TWO_PI);
    if r >= core::f64::consts::PI {
        r - TWO_PI
    } else {
        r
    }
}

/// Circle distance between two angles, in `[0, pi]`.
pub(crate) fn angle_distance(a: f64, b: f64) -> f64 {
    libm::fabs(libm::remainder(a - b, TWO_PI))
}

/// Uniform angular seeds over `[-pi, pi)`.
pub(crate) fn angle_seeds(count: usize) -> alloc::vec::Vec<nalgebra::DVector<f64>> {
    let count = count.max(1);
    (0..count)
        .map(|i| {
            nalgebra::DVector::from_element(
                1,
                -core::f64::consts::PI + TWO_PI * (i as f64) / (count as f64),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn frames_at_cardinal_angles() {
        let f = frames(0.0);
        assert_eq!(f.n_alpha, Vector2::new(1.0, 0.0));
        assert_eq!(f.n_alpha_perp, Vector2::new(0.0, 1.0));
        assert_eq!(f.rotation, Matrix2::identity());

        let f = frames(core::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(f.n_alpha.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.n_alpha.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.n_alpha_perp.x, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.n_alpha_perp.y, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rotation_is_orthogonal() {
        for i in 0..32 {
            let alpha = -3.0 + 0.21 * i as f64;
            let f = frames(alpha);
            let should_be_eye = f.rotation * f.rotation.transpose();
            assert_abs_diff_eq!(should_be_eye, Matrix2::identity(), epsilon = 1e-14);
            assert_abs_diff_eq!(f.rotation.determinant(), 1.0, epsilon = 1e-14);
            // n_perp = R(pi/2) n
            let quarter = frames(core::f64::consts::FRAC_PI_2).rotation;
            assert_abs_diff_eq!(quarter * f.n_alpha, f.n_alpha_perp, epsilon = 1e-14);
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_abs_diff_eq!(wrap_angle(3.0 * core::f64::consts::PI), -core::f64::consts::PI);
        assert!(wrap_angle(core::f64::consts::PI) < core::f64::consts::PI);
        for i in 0..100 {
            let a = -20.0 + 0.41 * i as f64;
            let w = wrap_angle(a);
            assert!((-core::f64::consts::PI..core::f64::consts::PI).contains(&w));
            assert_abs_diff_eq!(angle_distance(a, w), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn angle_distance_wraps() {
        assert_eq!(angle_distance(0.1, 0.1 + TWO_PI), 0.0);
        assert_abs_diff_eq!(
            angle_distance(-core::f64::consts::FRAC_PI_2, core::f64::consts::FRAC_PI_2),
            core::f64::consts::PI,
            epsilon = 1e-15
        );
    }
}
