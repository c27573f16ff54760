//! Static pose reconstruction for the semi-direct filter.
//!
//! The attitude is the weighted orthogonal-Procrustes solution of Wahba's
//! problem, realized through the SVD of the weighted attitude profile matrix
//! with the usual determinant correction; the position follows from the
//! weighted landmark centers once the attitude is known.

use crate::liegroup::{Mat3, RotationMatrix, Vec3};
use crate::sensors::WeightedPair;
use thiserror::Error;

/// Second-smallest singular value of the profile matrix below which the
/// attitude is unobservable.
pub const OBSERVABILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructionError {
    #[error("attitude unobservable: second-smallest singular value {0:.3e}")]
    RankDeficient(f64),
    #[error("no landmarks available for position reconstruction")]
    NoLandmarks,
}

/// Statically reconstructed pose (R_y, P_y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructedPose {
    pub r_y: RotationMatrix,
    pub p_y: Vec3,
}

/// Weighted least-squares attitude from matched unit-vector pairs:
/// `argmin Σ kᵢ ‖υᵢᴮ − Rᵀυᵢᴵ‖²` over SO(3).
///
/// Solved via `B = Σ kᵢ υᵢᴵ(υᵢᴮ)ᵀ = UΣVᵀ` and
/// `R_y = U·diag(1, 1, det(U)det(V))·Vᵀ`, which guarantees `det R_y = +1`
/// even when the unconstrained optimum would be a reflection.
pub fn solve_wahba(pairs: &[WeightedPair]) -> Result<RotationMatrix, ReconstructionError> {
    let mut profile = Mat3::zeros();
    for p in pairs {
        profile += p.weight * p.inertial * p.body.transpose();
    }
    let mut svd = profile.svd(true, true);
    svd.sort_by_singular_values();
    let second_smallest = svd.singular_values[1];
    if second_smallest < OBSERVABILITY_TOL {
        return Err(ReconstructionError::RankDeficient(second_smallest));
    }
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let sign = (u.determinant() * v_t.determinant()).signum();
    let r = u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, sign)) * v_t;
    // U and Vᵀ are orthonormal to machine precision, so r is a rotation
    Ok(RotationMatrix::try_new(r).expect("product of orthonormal factors"))
}

/// Landmark-based position: `P_y = G_cᴵ − R_y·G_cᴮ` from the weighted
/// geometric centers of the matched landmark observations.
pub fn reconstruct_position(
    r_y: &RotationMatrix,
    landmarks: &[WeightedPair],
) -> Result<Vec3, ReconstructionError> {
    if landmarks.is_empty() {
        return Err(ReconstructionError::NoLandmarks);
    }
    let total: f64 = landmarks.iter().map(|l| l.weight).sum();
    let mut center_inertial = Vec3::zeros();
    let mut center_body = Vec3::zeros();
    for l in landmarks {
        center_inertial += l.weight * l.inertial;
        center_body += l.weight * l.body;
    }
    center_inertial /= total;
    center_body /= total;
    Ok(center_inertial - r_y.rotate(&center_body))
}

/// Full static reconstruction from normalized reference pairs and landmark
/// observations.
pub fn reconstruct_pose(
    pairs: &[WeightedPair],
    landmarks: &[WeightedPair],
) -> Result<ReconstructedPose, ReconstructionError> {
    let r_y = solve_wahba(pairs)?;
    let p_y = reconstruct_position(&r_y, landmarks)?;
    Ok(ReconstructedPose { r_y, p_y })
}

/// Weighted Wahba cost of a candidate attitude, `Σ kᵢ ‖υᵢᴮ − Rᵀυᵢᴵ‖²`.
pub fn wahba_cost(r: &RotationMatrix, pairs: &[WeightedPair]) -> f64 {
    pairs
        .iter()
        .map(|p| p.weight * (p.body - r.rotate_inverse(&p.inertial)).norm_squared())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rand_rotation(rng: &mut ChaCha8Rng) -> RotationMatrix {
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.1..1.0),
        );
        let angle = rng.random_range(0.0..PI);
        RotationMatrix::from_angle_axis(angle, axis).unwrap()
    }

    fn spread_directions() -> [Vec3; 3] {
        [
            Vec3::new(1.0, -1.0, 1.0).normalize(),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(-1.0, -1.0, 0.0).normalize(),
        ]
    }

    fn clean_pairs(r: &RotationMatrix) -> Vec<WeightedPair> {
        spread_directions()
            .iter()
            .map(|d| WeightedPair { inertial: *d, body: r.rotate_inverse(d), weight: 1.0 })
            .collect()
    }

    #[test]
    fn identity_recovery() {
        let pairs = clean_pairs(&RotationMatrix::identity());
        let r_y = solve_wahba(&pairs).unwrap();
        assert_abs_diff_eq!(*r_y.matrix(), Mat3::identity(), epsilon = 1e-14);
    }

    #[test]
    fn clean_recovery_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let r = rand_rotation(&mut rng);
            let r_y = solve_wahba(&clean_pairs(&r)).unwrap();
            assert!((r_y.matrix() - r.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn equivariance_under_inertial_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..50 {
            let r = rand_rotation(&mut rng);
            let q = rand_rotation(&mut rng);
            let pairs = clean_pairs(&r);
            let rotated: Vec<WeightedPair> = pairs
                .iter()
                .map(|p| WeightedPair { inertial: q.rotate(&p.inertial), ..*p })
                .collect();
            let base = solve_wahba(&pairs).unwrap();
            let lifted = solve_wahba(&rotated).unwrap();
            assert!((lifted.matrix() - q.compose(&base).matrix()).norm() < 1e-10);
        }
    }

    #[test]
    fn rank_two_profile_keeps_proper_rotation() {
        // two consistent pairs: B has rank 2, attitude still observable
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let r = rand_rotation(&mut rng);
            let pairs: Vec<WeightedPair> = [Vec3::x(), Vec3::y()]
                .iter()
                .map(|d| WeightedPair { inertial: *d, body: r.rotate_inverse(d), weight: 1.0 })
                .collect();
            let r_y = solve_wahba(&pairs).unwrap();
            assert!((r_y.matrix() - r.matrix()).norm() < 1e-10);
            assert_abs_diff_eq!(r_y.matrix().determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn reflection_ambiguity_resolved_by_det_correction() {
        // body vectors produced by a reflection: the unconstrained optimum has
        // det −1, the corrected solution must be the best proper rotation
        let reflection = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        let pairs: Vec<WeightedPair> = [
            Vec3::new(1.0, 0.2, 0.1).normalize(),
            Vec3::new(-0.3, 1.0, 0.2).normalize(),
            Vec3::new(0.1, -0.2, 1.0).normalize(),
        ]
        .iter()
        .map(|d| WeightedPair { inertial: *d, body: reflection * d, weight: 1.0 })
        .collect();
        let r_y = solve_wahba(&pairs).unwrap();
        assert_abs_diff_eq!(r_y.matrix().determinant(), 1.0, epsilon = 1e-12);

        // brute force over the proper sign combinations of the SVD factors
        let mut profile = Mat3::zeros();
        for p in &pairs {
            profile += p.weight * p.inertial * p.body.transpose();
        }
        let mut svd = profile.svd(true, true);
        svd.sort_by_singular_values();
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut best = f64::INFINITY;
        for signs in [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]] {
            let candidate = u * Mat3::from_diagonal(&Vec3::from_row_slice(&signs)) * v_t;
            if (candidate.determinant() - 1.0).abs() < 1e-9 {
                let r = RotationMatrix::try_new(candidate).unwrap();
                best = best.min(wahba_cost(&r, &pairs));
            }
        }
        assert!(wahba_cost(&r_y, &pairs) <= best + 1e-12);
    }

    #[test]
    fn degenerate_profile_rejected() {
        let pairs = [WeightedPair { inertial: Vec3::x(), body: Vec3::x(), weight: 3.0 }];
        assert!(matches!(solve_wahba(&pairs), Err(ReconstructionError::RankDeficient(_))));
    }

    #[test]
    fn position_recovery() {
        // clean, exact attitude: P_y equals the true position for any pose
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..100 {
            let r = rand_rotation(&mut rng);
            let p = Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let landmarks: Vec<WeightedPair> = [
                Vec3::new(0.5, 2f64.sqrt(), 1.0),
                Vec3::new(-2.0, 0.7, 3.0),
            ]
            .iter()
            .map(|li| WeightedPair {
                inertial: *li,
                body: r.rotate_inverse(&(li - p)),
                weight: 1.0,
            })
            .collect();
            let p_y = reconstruct_position(&r, &landmarks).unwrap();
            assert_abs_diff_eq!(p_y, p, epsilon = 1e-12);
        }
    }

    #[test]
    fn position_examples() {
        // single landmark at the scenario value, identity pose, clean: P_y = 0
        let landmark = Vec3::new(0.5, 2f64.sqrt(), 1.0);
        let identity = RotationMatrix::identity();
        let clean = [WeightedPair { inertial: landmark, body: landmark, weight: 1.0 }];
        let p_y = reconstruct_position(&identity, &clean).unwrap();
        assert_abs_diff_eq!(p_y, Vec3::zeros(), epsilon = 1e-15);

        // biased landmark with R = R_y = I: P_y = −b
        let bias = 0.1 * Vec3::new(0.3, 0.2, -0.2);
        let biased = [WeightedPair { inertial: landmark, body: landmark + bias, weight: 1.0 }];
        let p_y = reconstruct_position(&identity, &biased).unwrap();
        assert_abs_diff_eq!(p_y, -bias, epsilon = 1e-15);

        assert!(matches!(
            reconstruct_position(&identity, &[]),
            Err(ReconstructionError::NoLandmarks)
        ));
    }
}
