//! SO(3)/SE(3)/quaternion algebra.
//!
//! All maps, projections, distances and parameterizations used by the rest of
//! the crate live here: the skew map and its inverse, the anti-symmetric
//! projector, the normalized Euclidean attitude distance ¼Tr{I − R}, the
//! angle-axis / Rodriguez / quaternion parameterizations, and rigid-body
//! composition on SE(3). Every type is an immutable value and every operation
//! is pure.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector6};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;

/// Residual tolerance for orthonormality and determinant checks.
pub const ROTATION_TOL: f64 = 1e-9;
/// Largest admissible symmetric part when interpreting a matrix as skew.
pub const SKEW_TOL: f64 = 1e-9;
/// Largest admissible deviation from unit norm for quaternion inputs.
pub const QUAT_NORM_TOL: f64 = 1e-6;
/// Norm drift beyond which quaternion products are rescaled.
pub const QUAT_DRIFT_TOL: f64 = 1e-12;
/// Below this rotation angle the exponential map switches to its Taylor form.
pub const SMALL_ANGLE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieGroupError {
    #[error("matrix is not skew-symmetric (symmetric part residual {0:.3e})")]
    NotSkewSymmetric(f64),
    #[error("matrix is not a rotation (orthonormality/determinant residual {0:.3e})")]
    NotRotation(f64),
    #[error("zero axis vector")]
    ZeroAxis,
    #[error("quaternion norm {0} too far from unit")]
    NotUnitNorm(f64),
}

/// Skew-symmetric 3×3 matrix, stored as its three independent entries so
/// that antisymmetry holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMatrix {
    axis: Vec3,
}

impl SkewMatrix {
    pub fn zero() -> Self {
        SkewMatrix { axis: Vec3::zeros() }
    }

    /// Interpret a raw matrix as skew-symmetric, rejecting inputs whose
    /// symmetric part exceeds [`SKEW_TOL`].
    pub fn try_from_matrix(m: &Mat3) -> Result<Self, LieGroupError> {
        let sym = 0.5 * (m + m.transpose());
        let residual = sym.abs().max();
        if residual > SKEW_TOL {
            return Err(LieGroupError::NotSkewSymmetric(residual));
        }
        Ok(pa(m))
    }

    /// The inverse of the skew map: `vex(hat(a)) = a`.
    pub fn vex(&self) -> Vec3 {
        self.axis
    }

    pub fn as_matrix(&self) -> Mat3 {
        let a = &self.axis;
        Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
    }
}

/// Skew map `[α]×` with `[α]× β = α × β`.
pub fn hat(alpha: Vec3) -> SkewMatrix {
    SkewMatrix { axis: alpha }
}

/// Anti-symmetric projection onto the Lie algebra: `½(M − Mᵀ)`.
pub fn pa(m: &Mat3) -> SkewMatrix {
    SkewMatrix {
        axis: Vec3::new(
            0.5 * (m[(2, 1)] - m[(1, 2)]),
            0.5 * (m[(0, 2)] - m[(2, 0)]),
            0.5 * (m[(1, 0)] - m[(0, 1)]),
        ),
    }
}

/// `vex(Pa(M))` in one step; this composition appears in every correction
/// term of the filters.
pub fn vex_pa(m: &Mat3) -> Vec3 {
    pa(m).vex()
}

/// Extract the generating vector of a raw skew-symmetric matrix, rejecting
/// matrices whose symmetric part exceeds [`SKEW_TOL`].
pub fn vex_matrix(m: &Mat3) -> Result<Vec3, LieGroupError> {
    SkewMatrix::try_from_matrix(m).map(|s| s.vex())
}

/// Wedge map ℝ⁶ → se(3): top-left `[y₁]×`, top-right `y₂`, zero bottom row.
pub fn wedge(y: &Vec6) -> Mat4 {
    let omega = Vec3::new(y[0], y[1], y[2]);
    let v = Vec3::new(y[3], y[4], y[5]);
    let s = hat(omega).as_matrix();
    let mut out = Mat4::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&s);
    out.fixed_view_mut::<3, 1>(0, 3).copy_from(&v);
    out
}

/// Attitude on SO(3), stored as a 3×3 matrix. Orthonormality is enforced at
/// construction and by re-projection after integration steps, not on every
/// product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn identity() -> Self {
        RotationMatrix(Mat3::identity())
    }

    /// Validate `RᵀR = I` and `det R = +1` to [`ROTATION_TOL`].
    pub fn try_new(m: Mat3) -> Result<Self, LieGroupError> {
        let ortho = (m.transpose() * m - Mat3::identity()).abs().max();
        let det = (m.determinant() - 1.0).abs();
        let residual = ortho.max(det);
        if residual > ROTATION_TOL {
            return Err(LieGroupError::NotRotation(residual));
        }
        Ok(RotationMatrix(m))
    }

    /// Nearest rotation to an arbitrary matrix (polar projection via SVD).
    pub fn project(m: &Mat3) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd with u");
        let v_t = svd.v_t.expect("svd with v_t");
        let sign = (u.determinant() * v_t.determinant()).signum();
        let r = u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, sign)) * v_t;
        RotationMatrix(r)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    pub fn compose(&self, other: &Self) -> Self {
        RotationMatrix(self.0 * other.0)
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `Rᵀ v`, i.e. the inverse rotation applied to `v`.
    pub fn rotate_inverse(&self, v: &Vec3) -> Vec3 {
        self.0.tr_mul(v)
    }

    /// Normalized Euclidean attitude distance `¼ Tr{I − R} ∈ [0, 1]`;
    /// 0 at the identity, 1 at 180° rotations.
    pub fn normalized_distance(&self) -> f64 {
        0.25 * (3.0 - self.0.trace())
    }

    /// Angle-axis parameterization `I + sin(α)[u]× + (1 − cos α)[u]×²`.
    ///
    /// The axis is normalized internally; a zero axis is rejected.
    pub fn from_angle_axis(alpha: f64, axis: Vec3) -> Result<Self, LieGroupError> {
        let norm = axis.norm();
        if norm < 1e-12 {
            return Err(LieGroupError::ZeroAxis);
        }
        let u = hat(axis / norm).as_matrix();
        let r = Mat3::identity() + alpha.sin() * u + (1.0 - alpha.cos()) * (u * u);
        Ok(RotationMatrix(r))
    }

    /// Map from the Rodriguez parameter vector to SO(3). Singular
    /// 180° rotations are not representable by any finite ρ.
    pub fn from_rodriguez(rho: &RodriguezVector) -> Self {
        let r = rho.0;
        let n2 = r.norm_squared();
        let m = ((1.0 - n2) * Mat3::identity()
            + 2.0 * r * r.transpose()
            + 2.0 * hat(r).as_matrix())
            / (1.0 + n2);
        RotationMatrix(m)
    }

    /// Exponential map applied for a time step: `exp([ω·dt]×)`.
    ///
    /// Realized through the angle-axis form with α = ‖ω‖dt; below
    /// [`SMALL_ANGLE`] a second-order Taylor expansion avoids the 0/0 in the
    /// sinc evaluation.
    pub fn exp_so3(omega: &Vec3, dt: f64) -> Self {
        let theta = omega * dt;
        let angle = theta.norm();
        if angle < SMALL_ANGLE {
            let s = hat(theta).as_matrix();
            return RotationMatrix(Mat3::identity() + s + 0.5 * (s * s));
        }
        Self::from_angle_axis(angle, theta / angle).expect("nonzero axis")
    }

    /// Quaternion equivalent of this rotation (Shepperd's method).
    pub fn to_quaternion(&self) -> UnitQuat {
        let m = &self.0;
        let tr = m.trace();
        let (w, x, y, z);
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            x = 0.25 * s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            y = 0.25 * s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
            z = 0.25 * s;
        }
        UnitQuat::new_canonical(w, Vec3::new(x, y, z))
    }
}

/// Rodriguez parameter vector ρ ∈ ℝ³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RodriguezVector(pub Vec3);

/// Unit quaternion `Q = [q₀, qᵀ]ᵀ ∈ S³`.
///
/// Normalization events map the representative to `q₀ ≥ 0` so trajectories
/// stay deterministic across the double cover; plain products keep the
/// algebraic sign and only rescale magnitude when drift exceeds
/// [`QUAT_DRIFT_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuat {
    w: f64,
    xyz: Vec3,
}

impl UnitQuat {
    pub fn identity() -> Self {
        UnitQuat { w: 1.0, xyz: Vec3::zeros() }
    }

    /// Accept components whose norm is within [`QUAT_NORM_TOL`] of unit,
    /// then renormalize exactly and fix the sign convention.
    pub fn try_new(w: f64, xyz: Vec3) -> Result<Self, LieGroupError> {
        let norm = (w * w + xyz.norm_squared()).sqrt();
        if (norm - 1.0).abs() > QUAT_NORM_TOL {
            return Err(LieGroupError::NotUnitNorm(norm));
        }
        Ok(Self::new_canonical(w, xyz))
    }

    /// Rescale arbitrary (nonzero) components to unit norm with `q₀ ≥ 0`.
    pub fn new_canonical(w: f64, xyz: Vec3) -> Self {
        let norm = (w * w + xyz.norm_squared()).sqrt();
        let sign = if w < 0.0 { -1.0 } else { 1.0 };
        UnitQuat { w: sign * w / norm, xyz: sign * xyz / norm }
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn vector(&self) -> Vec3 {
        self.xyz
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.xyz.norm_squared()).sqrt()
    }

    /// Quaternion product `Q₁ ⊙ Q₂`. Rescales (sign-preserving) when the
    /// accumulated norm drift exceeds [`QUAT_DRIFT_TOL`].
    pub fn multiply(&self, other: &Self) -> Self {
        let w = self.w * other.w - self.xyz.dot(&other.xyz);
        let xyz = self.w * other.xyz + other.w * self.xyz + self.xyz.cross(&other.xyz);
        let mut q = UnitQuat { w, xyz };
        let norm = q.norm();
        if (norm - 1.0).abs() > QUAT_DRIFT_TOL {
            q.w /= norm;
            q.xyz /= norm;
        }
        q
    }

    pub fn inverse(&self) -> Self {
        UnitQuat { w: self.w, xyz: -self.xyz }
    }

    /// Rotate a vector: the vector part of `Q ⊙ [0, x] ⊙ Q⁻¹`, equal to
    /// `R(Q)·x`.
    pub fn sandwich(&self, x: &Vec3) -> Vec3 {
        let t = self.xyz.cross(x);
        x + 2.0 * (self.w * t + self.xyz.cross(&t))
    }

    /// Mapping S³ → SO(3): `(q₀² − ‖q‖²)I + 2qqᵀ + 2q₀[q]×`.
    pub fn to_rotation(&self) -> RotationMatrix {
        let q = &self.xyz;
        let m = (self.w * self.w - q.norm_squared()) * Mat3::identity()
            + 2.0 * q * q.transpose()
            + 2.0 * self.w * hat(*q).as_matrix();
        RotationMatrix(m)
    }

    pub fn from_angle_axis(alpha: f64, axis: Vec3) -> Result<Self, LieGroupError> {
        let norm = axis.norm();
        if norm < 1e-12 {
            return Err(LieGroupError::ZeroAxis);
        }
        let half = 0.5 * alpha;
        Ok(Self::new_canonical(half.cos(), half.sin() * axis / norm))
    }

    /// Quaternion exponential of a rotation rate held for a time step,
    /// the S³ counterpart of [`RotationMatrix::exp_so3`].
    pub fn from_scaled_rate(omega: &Vec3, dt: f64) -> Self {
        let theta = omega * dt;
        let angle = theta.norm();
        if angle < SMALL_ANGLE {
            return Self::new_canonical(1.0, 0.5 * theta);
        }
        Self::from_angle_axis(angle, theta / angle).expect("nonzero axis")
    }

    /// Renormalize and fix the `q₀ ≥ 0` representative. Called after
    /// integration steps.
    pub fn canonicalize(&self) -> Self {
        Self::new_canonical(self.w, self.xyz)
    }
}

/// Rigid-body pose `T ∈ SE(3)`: attitude plus position, the implied 4×4
/// form carrying bottom row `[0, 0, 0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousTransform {
    rotation: RotationMatrix,
    position: Vec3,
}

impl HomogeneousTransform {
    pub fn identity() -> Self {
        HomogeneousTransform { rotation: RotationMatrix::identity(), position: Vec3::zeros() }
    }

    pub fn new(rotation: RotationMatrix, position: Vec3) -> Self {
        HomogeneousTransform { rotation, position }
    }

    pub fn rotation(&self) -> &RotationMatrix {
        &self.rotation
    }

    pub fn position(&self) -> &Vec3 {
        &self.position
    }

    /// Group product: `(R_A R_B, R_A P_B + P_A)`.
    pub fn compose(&self, other: &Self) -> Self {
        HomogeneousTransform {
            rotation: self.rotation.compose(&other.rotation),
            position: self.rotation.rotate(&other.position) + self.position,
        }
    }

    /// Group inverse: `(Rᵀ, −Rᵀ P)`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        HomogeneousTransform { position: -rt.rotate(&self.position), rotation: rt }
    }

    pub fn as_matrix(&self) -> Mat4 {
        let mut out = Mat4::identity();
        out.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        out.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        out
    }
}
