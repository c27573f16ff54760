//! ZYX (roll-pitch-yaw) Euler-angle extraction for reporting. The
//! convention only affects the plotted angles, never the filters: the error
//! channels are convention-free.

use crate::liegroup::{Mat3, RotationMatrix};

/// Extract `(φ, θ, ψ)` with `R = R_z(ψ)·R_y(θ)·R_x(φ)`.
///
/// At the gimbal-lock pitch `|θ| = π/2` only `φ ± ψ` is observable; the
/// branch resolves `ψ = 0`.
pub fn euler_from_rotation(r: &RotationMatrix) -> (f64, f64, f64) {
    let m = r.matrix();
    let cos_theta = (m[(2, 1)] * m[(2, 1)] + m[(2, 2)] * m[(2, 2)]).sqrt();
    let theta = (-m[(2, 0)]).atan2(cos_theta);
    if cos_theta < 1e-9 {
        let phi = if m[(2, 0)] < 0.0 {
            // θ = +π/2
            m[(0, 1)].atan2(m[(1, 1)])
        } else {
            // θ = −π/2
            (-m[(0, 1)]).atan2(m[(1, 1)])
        };
        return (phi, theta, 0.0);
    }
    let phi = m[(2, 1)].atan2(m[(2, 2)]);
    let psi = m[(1, 0)].atan2(m[(0, 0)]);
    (phi, theta, psi)
}

/// Compose a rotation from ZYX Euler angles (test and summary helper).
pub fn rotation_from_euler(phi: f64, theta: f64, psi: f64) -> RotationMatrix {
    let rx = Mat3::new(
        1.0, 0.0, 0.0,
        0.0, phi.cos(), -phi.sin(),
        0.0, phi.sin(), phi.cos(),
    );
    let ry = Mat3::new(
        theta.cos(), 0.0, theta.sin(),
        0.0, 1.0, 0.0,
        -theta.sin(), 0.0, theta.cos(),
    );
    let rz = Mat3::new(
        psi.cos(), -psi.sin(), 0.0,
        psi.sin(), psi.cos(), 0.0,
        0.0, 0.0, 1.0,
    );
    RotationMatrix::try_new(rz * ry * rx).expect("product of rotations")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::liegroup::Vec3;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn trivial_angles() {
        assert_eq!(euler_from_rotation(&RotationMatrix::identity()), (0.0, 0.0, 0.0));
        let quarter = RotationMatrix::from_angle_axis(FRAC_PI_2, Vec3::z()).unwrap();
        let (phi, theta, psi) = euler_from_rotation(&quarter);
        assert_abs_diff_eq!(phi, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(theta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(psi, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn round_trip_away_from_lock() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..500 {
            let phi = rng.random_range(-PI..PI);
            let theta = rng.random_range(-1.4..1.4);
            let psi = rng.random_range(-PI..PI);
            let r = rotation_from_euler(phi, theta, psi);
            let (p2, t2, s2) = euler_from_rotation(&r);
            assert_abs_diff_eq!(phi, p2, epsilon = 1e-12);
            assert_abs_diff_eq!(theta, t2, epsilon = 1e-12);
            assert_abs_diff_eq!(psi, s2, epsilon = 1e-12);
        }
    }

    #[test]
    fn gimbal_lock_resolves_psi_zero() {
        let r = rotation_from_euler(0.3, FRAC_PI_2, 0.0);
        let (phi, theta, psi) = euler_from_rotation(&r);
        assert_abs_diff_eq!(theta, FRAC_PI_2, epsilon = 1e-9);
        assert_eq!(psi, 0.0);
        assert_abs_diff_eq!(phi, 0.3, epsilon = 1e-9);
        let recomposed = rotation_from_euler(phi, theta, psi);
        assert_abs_diff_eq!(*recomposed.matrix(), *r.matrix(), epsilon = 1e-9);
    }
}
