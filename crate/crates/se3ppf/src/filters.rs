//! The two pose filters: semi-direct (driven by a statically reconstructed
//! pose) and direct (driven by raw vectorial measurements), each in
//! homogeneous-matrix and quaternion form, with online gyro/velocity bias
//! estimation.
//!
//! Both filters share the kinematic structure
//! `R̂̇ = R̂[Ω_m − b̂_Ω − R̂ᵀW_Ω]×`, `P̂̇ = R̂(V_m − b̂_V − W_V)`; they differ in
//! how the pose error feeding the corrections `W_Ω`, `W_V` is obtained. The
//! corrections blend the prescribed-performance gain blocks Ψ and Λ so the
//! error channels stay inside their funnels.
//!
//! Integration advances the attitude by the exponential map (Munthe-Kaas
//! RK4 in matrix form, the quaternion ODE plus renormalization in quaternion
//! form) and the translational/bias states by classical RK4, with the
//! corrections recomputed at every stage by default.

use crate::liegroup::{vex_pa, HomogeneousTransform, Mat3, RotationMatrix, UnitQuat, Vec3};
use crate::ppf::{EnvelopePolicy, PpfConfig, PpfError, TransformedError};
use crate::reconstruction::{reconstruct_pose, ReconstructedPose, ReconstructionError};
use crate::sensors::{
    build_aggregates, landmark_pairs, normalize_pairs, AggregateMatrices, MeasurementFrame,
    SensorError, SensorSuite, WeightedPair,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// ε on the correction denominators `1 − ‖R̃‖_I` and `1 + Υ`; hitting it
/// means the attitude error reached the excluded set of unstable equilibria.
pub const SINGULARITY_TOL: f64 = 1e-6;
/// Condition-number limit on the inner aggregate matrix of the direct form.
pub const AGGREGATE_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error(transparent)]
    Envelope(#[from] PpfError),
    #[error("attitude error at the unstable equilibria (denominator margin {margin:.3e} at t = {t:.6})")]
    NearSingularAttitude { margin: f64, t: f64 },
    #[error("inner aggregate matrix numerically singular (condition {condition:.3e})")]
    SingularAggregate { condition: f64 },
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Reconstruction(#[from] ReconstructionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    SemiDirect,
    Direct,
}

impl FilterMode {
    pub fn tag(&self) -> &'static str {
        match self {
            FilterMode::SemiDirect => "semidirect",
            FilterMode::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationForm {
    #[default]
    Matrix,
    Quaternion,
}

impl RotationForm {
    pub fn tag(&self) -> &'static str {
        match self {
            RotationForm::Matrix => "matrix",
            RotationForm::Quaternion => "quaternion",
        }
    }
}

/// Whether corrections are recomputed at every integration stage or held
/// constant across the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionHold {
    #[default]
    PerStage,
    ZeroOrder,
}

/// Adaptation rate γ and correction gain k_w, both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterGains {
    pub gamma: f64,
    pub k_w: f64,
}

impl FilterGains {
    pub fn validate(&self) -> Result<(), String> {
        if self.gamma > 0.0 && self.k_w > 0.0 {
            Ok(())
        } else {
            Err("gamma and k_w must be strictly positive".into())
        }
    }
}

/// Estimator attitude in whichever representation the run propagates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttitudeEstimate {
    Matrix(RotationMatrix),
    Quaternion(UnitQuat),
}

impl AttitudeEstimate {
    pub fn rotation(&self) -> RotationMatrix {
        match self {
            AttitudeEstimate::Matrix(r) => *r,
            AttitudeEstimate::Quaternion(q) => q.to_rotation(),
        }
    }
}

/// Estimator state: pose estimate plus bias estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub attitude: AttitudeEstimate,
    pub p_hat: Vec3,
    pub b_hat_omega: Vec3,
    pub b_hat_v: Vec3,
    pub t: f64,
}

impl FilterState {
    pub fn new(form: RotationForm, r_hat: RotationMatrix, p_hat: Vec3) -> Self {
        let attitude = match form {
            RotationForm::Matrix => AttitudeEstimate::Matrix(r_hat),
            RotationForm::Quaternion => AttitudeEstimate::Quaternion(r_hat.to_quaternion()),
        };
        FilterState {
            attitude,
            p_hat,
            b_hat_omega: Vec3::zeros(),
            b_hat_v: Vec3::zeros(),
            t: 0.0,
        }
    }

    pub fn rotation(&self) -> RotationMatrix {
        self.attitude.rotation()
    }

    pub fn pose(&self) -> HomogeneousTransform {
        HomogeneousTransform::new(self.rotation(), self.p_hat)
    }
}

/// Per-evaluation diagnostics: the channel errors, the transformed error and
/// gain blocks, the corrections and bias rates, and the mode-specific
/// measurement forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub e: [f64; 4],
    pub transformed: TransformedError,
    pub w_omega: Vec3,
    pub w_v: Vec3,
    pub b_dot_omega: Vec3,
    pub b_dot_v: Vec3,
    /// Attitude error R̂R_yᵀ (semi-direct only).
    pub r_tilde: Option<RotationMatrix>,
    pub p_tilde: Vec3,
    /// Tr{R̃M_R·M_R⁻¹} from measurements (direct only).
    pub upsilon: Option<f64>,
    /// vex(Pa(R̃)) resp. vex(Pa(R̃M_R)) from measurements.
    pub vex_pa_meas: Vec3,
}

/// Everything a step needs besides the state itself.
#[derive(Clone, Copy)]
pub struct StepContext<'a> {
    pub suite: &'a SensorSuite,
    pub ppf: &'a PpfConfig,
    pub gains: &'a FilterGains,
    pub mode: FilterMode,
    pub policy: EnvelopePolicy,
    pub hold: CorrectionHold,
}

/// Candidate Lyapunov value `½‖ℰ‖² + (1/2γ)(‖b̃_Ω‖² + ‖b̃_V‖²)`; requires the
/// true biases, so it is a simulation-only diagnostic.
pub fn lyapunov(
    transformed: &TransformedError,
    b_tilde_omega: &Vec3,
    b_tilde_v: &Vec3,
    gamma: f64,
) -> f64 {
    0.5 * transformed.norm_squared()
        + 0.5 / gamma * (b_tilde_omega.norm_squared() + b_tilde_v.norm_squared())
}

// ---------------------------------------------------------------------------
// semi-direct filter pieces
// ---------------------------------------------------------------------------

/// Pose errors against the reconstructed pose:
/// `R̃ = R̂R_yᵀ`, `P̃ = P̂ − R̃P_y`, `e = [‖R̃‖_I, P̃ᵀ]ᵀ`.
pub fn semidirect_errors(
    r_hat: &RotationMatrix,
    p_hat: &Vec3,
    recon: &ReconstructedPose,
) -> (RotationMatrix, Vec3, [f64; 4]) {
    let r_tilde = r_hat.compose(&recon.r_y.transpose());
    let p_tilde = p_hat - r_tilde.rotate(&recon.p_y);
    let e = [r_tilde.normalized_distance(), p_tilde.x, p_tilde.y, p_tilde.z];
    (r_tilde, p_tilde, e)
}

/// Correction terms of the semi-direct filter:
/// `W_Ω = 2(k_wΨ_Rℰ_R − Λ_R/4)/(1 − ‖R̃‖_I)·vex(Pa(R̃))` and
/// `W_V = R̂ᵀ(k_wΨ_Pℰ_P + [P̃ − P̂]×W_Ω − Λ_PP̃)`.
pub fn semidirect_correction(
    tr: &TransformedError,
    r_tilde: &RotationMatrix,
    p_tilde: &Vec3,
    p_hat: &Vec3,
    r_hat: &RotationMatrix,
    gains: &FilterGains,
    t: f64,
) -> Result<(Vec3, Vec3), FilterError> {
    let denom = 1.0 - r_tilde.normalized_distance();
    if denom < SINGULARITY_TOL {
        return Err(FilterError::NearSingularAttitude { margin: denom, t });
    }
    let scale = 2.0 * (gains.k_w * tr.psi_r * tr.e_r - tr.lambda_r / 4.0) / denom;
    let w_omega = scale * vex_pa(r_tilde.matrix());
    let w_v = r_hat.rotate_inverse(
        &(gains.k_w * tr.psi_p.component_mul(&tr.e_p) + (p_tilde - p_hat).cross(&w_omega)
            - tr.lambda_p.component_mul(p_tilde)),
    );
    Ok((w_omega, w_v))
}

/// Bias adaptation rates of the semi-direct filter.
pub fn semidirect_bias_dot(
    tr: &TransformedError,
    r_tilde: &RotationMatrix,
    p_tilde: &Vec3,
    p_hat: &Vec3,
    r_hat: &RotationMatrix,
    gains: &FilterGains,
) -> (Vec3, Vec3) {
    let psi_ep = tr.psi_p.component_mul(&tr.e_p);
    let b_dot_omega = gains.gamma / 2.0 * tr.psi_r * tr.e_r * r_hat.rotate_inverse(&vex_pa(r_tilde.matrix()))
        + gains.gamma * r_hat.rotate_inverse(&(p_tilde - p_hat).cross(&psi_ep));
    let b_dot_v = gains.gamma * r_hat.rotate_inverse(&psi_ep);
    (b_dot_omega, b_dot_v)
}

// ---------------------------------------------------------------------------
// direct filter pieces
// ---------------------------------------------------------------------------

/// The direct filter's measurement-only forms at a given estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectForms {
    /// vex(Pa(R̃M_R)) = R̂ Σ (kᵢ/2) υ̂ᵢᴮ × υᵢᴮ.
    pub vex_pa: Vec3,
    /// ‖R̃M_R‖_I = ¼ Σ kᵢ(1 − (υ̂ᵢᴮ)ᵀυᵢᴮ).
    pub ri_mr: f64,
    /// Υ = Tr{M₁M₂} with M₁ = Σkυᴮ(υᴵ)ᵀ and M₂ = (Σkυ̂ᴮ(υᴵ)ᵀ)⁻¹.
    pub upsilon: f64,
    /// P̃ = P̂ + (1/m_c)(R̂k_v − R̃M_R·M_R⁻¹·m_v).
    pub p_tilde: Vec3,
}

/// Build the direct filter's error quantities from raw vector measurements,
/// without reconstructing the pose.
pub fn direct_measurement_forms(
    pairs: &[WeightedPair],
    agg: &AggregateMatrices,
    r_hat: &RotationMatrix,
    p_hat: &Vec3,
) -> Result<DirectForms, FilterError> {
    let mut sum_cross = Vec3::zeros();
    let mut ri_mr = 0.0;
    let mut m1 = Mat3::zeros();
    let mut inner = Mat3::zeros();
    for p in pairs {
        let v_hat_b = r_hat.rotate_inverse(&p.inertial);
        sum_cross += 0.5 * p.weight * v_hat_b.cross(&p.body);
        ri_mr += p.weight * (1.0 - v_hat_b.dot(&p.body));
        m1 += p.weight * p.body * p.inertial.transpose();
        inner += p.weight * v_hat_b * p.inertial.transpose();
    }
    ri_mr *= 0.25;
    let vex_pa = r_hat.rotate(&sum_cross);

    let singular_values = inner.singular_values();
    let (smax, smin) = (singular_values.max(), singular_values.min());
    if smin <= 0.0 || smax / smin > AGGREGATE_CONDITION_LIMIT {
        return Err(FilterError::SingularAggregate {
            condition: if smin > 0.0 { smax / smin } else { f64::INFINITY },
        });
    }
    let m2 = inner.try_inverse().ok_or(FilterError::SingularAggregate { condition: f64::INFINITY })?;
    let upsilon = (m1 * m2).trace();

    let rtilde_mr = r_hat.matrix() * m1;
    let p_tilde = p_hat + (r_hat.rotate(&agg.k_v) - rtilde_mr * (agg.m_r_inv * agg.m_v)) / agg.m_c;
    Ok(DirectForms { vex_pa, ri_mr, upsilon, p_tilde })
}

/// Correction terms of the direct filter:
/// `W_Ω = (4/λ̲)(k_wΨ_Rℰ_R − Λ_R)/(1 + Υ)·vex(Pa(R̃M_R))`, `W_V` as in the
/// semi-direct filter with the direct position error.
pub fn direct_correction(
    tr: &TransformedError,
    forms: &DirectForms,
    p_hat: &Vec3,
    r_hat: &RotationMatrix,
    lambda_min: f64,
    gains: &FilterGains,
    t: f64,
) -> Result<(Vec3, Vec3), FilterError> {
    let denom = 1.0 + forms.upsilon;
    if denom < SINGULARITY_TOL {
        return Err(FilterError::NearSingularAttitude { margin: denom, t });
    }
    let scale = 4.0 / lambda_min * (gains.k_w * tr.psi_r * tr.e_r - tr.lambda_r) / denom;
    let w_omega = scale * forms.vex_pa;
    let w_v = r_hat.rotate_inverse(
        &(gains.k_w * tr.psi_p.component_mul(&tr.e_p) + (forms.p_tilde - p_hat).cross(&w_omega)
            - tr.lambda_p.component_mul(&forms.p_tilde)),
    );
    Ok((w_omega, w_v))
}

/// Bias adaptation rates of the direct filter (same structure as the
/// semi-direct ones with the measurement-form vex(Pa(R̃M_R))).
pub fn direct_bias_dot(
    tr: &TransformedError,
    forms: &DirectForms,
    p_hat: &Vec3,
    r_hat: &RotationMatrix,
    gains: &FilterGains,
) -> (Vec3, Vec3) {
    let psi_ep = tr.psi_p.component_mul(&tr.e_p);
    let b_dot_omega = gains.gamma / 2.0 * tr.psi_r * tr.e_r * r_hat.rotate_inverse(&forms.vex_pa)
        + gains.gamma * r_hat.rotate_inverse(&(forms.p_tilde - p_hat).cross(&psi_ep));
    let b_dot_v = gains.gamma * r_hat.rotate_inverse(&psi_ep);
    (b_dot_omega, b_dot_v)
}

// ---------------------------------------------------------------------------
// shared per-frame preparation and per-stage evaluation
// ---------------------------------------------------------------------------

/// Frame-derived inputs, computed once per measurement frame.
enum FrameData {
    Semi(ReconstructedPose),
    Direct { pairs: Vec<WeightedPair>, agg: AggregateMatrices },
}

fn prepare_frame(frame: &MeasurementFrame, ctx: &StepContext) -> Result<FrameData, FilterError> {
    let pairs = normalize_pairs(frame, ctx.suite)?;
    let landmarks = landmark_pairs(frame, ctx.suite);
    match ctx.mode {
        FilterMode::SemiDirect => Ok(FrameData::Semi(reconstruct_pose(&pairs, &landmarks)?)),
        FilterMode::Direct => {
            let agg = build_aggregates(&pairs, &landmarks)?;
            Ok(FrameData::Direct { pairs, agg })
        }
    }
}

struct Evaluation {
    /// Body-frame effective rate Γ = Ω_m − b̂_Ω − R̂ᵀW_Ω.
    gamma_body: Vec3,
    p_dot: Vec3,
    b_dot_omega: Vec3,
    b_dot_v: Vec3,
    diag: StepDiagnostics,
}

fn eval_matrix(
    r_hat: &RotationMatrix,
    p_hat: &Vec3,
    b_om: &Vec3,
    b_v: &Vec3,
    t: f64,
    frame: &MeasurementFrame,
    data: &FrameData,
    ctx: &StepContext,
) -> Result<Evaluation, FilterError> {
    let (e, tr, w_omega, w_v, r_tilde, p_tilde, upsilon, vex_pa_meas, b_dots);
    match data {
        FrameData::Semi(recon) => {
            let (rt, pt, err) = semidirect_errors(r_hat, p_hat, recon);
            e = err;
            tr = ctx.ppf.build_transformed(&e, t, ctx.policy)?;
            let (wo, wv) = semidirect_correction(&tr, &rt, &pt, p_hat, r_hat, ctx.gains, t)?;
            b_dots = semidirect_bias_dot(&tr, &rt, &pt, p_hat, r_hat, ctx.gains);
            vex_pa_meas = vex_pa(rt.matrix());
            w_omega = wo;
            w_v = wv;
            r_tilde = Some(rt);
            p_tilde = pt;
            upsilon = None;
        }
        FrameData::Direct { pairs, agg } => {
            let forms = direct_measurement_forms(pairs, agg, r_hat, p_hat)?;
            e = [forms.ri_mr, forms.p_tilde.x, forms.p_tilde.y, forms.p_tilde.z];
            tr = ctx.ppf.build_transformed(&e, t, ctx.policy)?;
            let (wo, wv) =
                direct_correction(&tr, &forms, p_hat, r_hat, agg.lambda_min, ctx.gains, t)?;
            b_dots = direct_bias_dot(&tr, &forms, p_hat, r_hat, ctx.gains);
            vex_pa_meas = forms.vex_pa;
            w_omega = wo;
            w_v = wv;
            r_tilde = None;
            p_tilde = forms.p_tilde;
            upsilon = Some(forms.upsilon);
        }
    }
    let gamma_body = frame.omega_m - b_om - r_hat.rotate_inverse(&w_omega);
    let p_dot = r_hat.rotate(&(frame.v_m - b_v - w_v));
    Ok(Evaluation {
        gamma_body,
        p_dot,
        b_dot_omega: b_dots.0,
        b_dot_v: b_dots.1,
        diag: StepDiagnostics {
            e,
            transformed: tr,
            w_omega,
            w_v,
            b_dot_omega: b_dots.0,
            b_dot_v: b_dots.1,
            r_tilde,
            p_tilde,
            upsilon,
            vex_pa_meas,
        },
    })
}

// ---------------------------------------------------------------------------
// quaternion-form evaluation
// ---------------------------------------------------------------------------

fn eval_quaternion(
    q_hat: &UnitQuat,
    p_hat: &Vec3,
    b_om: &Vec3,
    b_v: &Vec3,
    t: f64,
    frame: &MeasurementFrame,
    data: &FrameData,
    ctx: &StepContext,
) -> Result<Evaluation, FilterError> {
    let gains = ctx.gains;
    let (e, tr, w_omega, w_v, r_tilde, p_tilde, upsilon, vex_pa_meas, b_dot_omega, b_dot_v);
    match data {
        FrameData::Semi(recon) => {
            // Q_y fills the QUEST slot via the SVD rotation
            let q_y = recon.r_y.to_quaternion();
            let q_tilde = q_hat.multiply(&q_y.inverse());
            let (qt0, qt) = (q_tilde.w(), q_tilde.vector());
            let pt = p_hat - q_tilde.sandwich(&recon.p_y);
            e = [1.0 - qt0 * qt0, pt.x, pt.y, pt.z];
            tr = ctx.ppf.build_transformed(&e, t, ctx.policy)?;
            // 1 − ‖R̃‖_I = q̃₀², so the ε guard matches the matrix form
            if qt0 * qt0 < SINGULARITY_TOL {
                return Err(FilterError::NearSingularAttitude { margin: qt0 * qt0, t });
            }
            let wo = 4.0 * (gains.k_w * tr.psi_r * tr.e_r - tr.lambda_r / 4.0) / qt0 * qt;
            let psi_ep = tr.psi_p.component_mul(&tr.e_p);
            let wv = q_hat.inverse().sandwich(
                &(gains.k_w * psi_ep + (pt - p_hat).cross(&wo) - tr.lambda_p.component_mul(&pt)),
            );
            b_dot_omega = gains.gamma * tr.psi_r * tr.e_r * qt0 * q_hat.inverse().sandwich(&qt)
                + gains.gamma
                    * q_hat
                        .inverse()
                        .sandwich(&(pt - p_hat))
                        .cross(&q_hat.inverse().sandwich(&psi_ep));
            b_dot_v = gains.gamma * q_hat.inverse().sandwich(&psi_ep);
            w_omega = wo;
            w_v = wv;
            r_tilde = Some(q_tilde.to_rotation());
            p_tilde = pt;
            upsilon = None;
            vex_pa_meas = 2.0 * qt0 * qt;
        }
        FrameData::Direct { pairs, agg } => {
            let q_inv = q_hat.inverse();
            let mut sum_cross = Vec3::zeros();
            let mut ri_mr = 0.0;
            let mut m1 = Mat3::zeros();
            let mut inner = Mat3::zeros();
            for p in pairs {
                let v_hat_b = q_inv.sandwich(&p.inertial);
                sum_cross += 0.5 * p.weight * v_hat_b.cross(&p.body);
                ri_mr += p.weight * (1.0 - v_hat_b.dot(&p.body));
                m1 += p.weight * p.body * p.inertial.transpose();
                inner += p.weight * v_hat_b * p.inertial.transpose();
            }
            ri_mr *= 0.25;
            let upsilon_vec = q_hat.sandwich(&sum_cross);

            let singular_values = inner.singular_values();
            let (smax, smin) = (singular_values.max(), singular_values.min());
            if smin <= 0.0 || smax / smin > AGGREGATE_CONDITION_LIMIT {
                return Err(FilterError::SingularAggregate {
                    condition: if smin > 0.0 { smax / smin } else { f64::INFINITY },
                });
            }
            let m2 = inner
                .try_inverse()
                .ok_or(FilterError::SingularAggregate { condition: f64::INFINITY })?;
            let ups = (m1 * m2).trace();

            // R̃M_R column-wise through the sandwich, then the matrix-form P̃
            let m_inv_mv = agg.m_r_inv * agg.m_v;
            let mut rtilde_mr_minv_mv = Vec3::zeros();
            for j in 0..3 {
                rtilde_mr_minv_mv += m_inv_mv[j] * q_hat.sandwich(&m1.column(j).into_owned());
            }
            let pt = p_hat + (q_hat.sandwich(&agg.k_v) - rtilde_mr_minv_mv) / agg.m_c;

            e = [ri_mr, pt.x, pt.y, pt.z];
            tr = ctx.ppf.build_transformed(&e, t, ctx.policy)?;
            let denom = 1.0 + ups;
            if denom < SINGULARITY_TOL {
                return Err(FilterError::NearSingularAttitude { margin: denom, t });
            }
            let wo = 4.0 / agg.lambda_min * (gains.k_w * tr.psi_r * tr.e_r - tr.lambda_r) / denom
                * upsilon_vec;
            let psi_ep = tr.psi_p.component_mul(&tr.e_p);
            let wv = q_inv.sandwich(
                &(gains.k_w * psi_ep + (pt - p_hat).cross(&wo) - tr.lambda_p.component_mul(&pt)),
            );
            b_dot_omega = gains.gamma / 2.0 * tr.psi_r * tr.e_r * q_inv.sandwich(&upsilon_vec)
                + gains.gamma * q_inv.sandwich(&(pt - p_hat)).cross(&q_inv.sandwich(&psi_ep));
            b_dot_v = gains.gamma * q_inv.sandwich(&psi_ep);
            w_omega = wo;
            w_v = wv;
            r_tilde = None;
            p_tilde = pt;
            upsilon = Some(ups);
            vex_pa_meas = upsilon_vec;
        }
    }
    let gamma_body = frame.omega_m - b_om - q_hat.inverse().sandwich(&w_omega);
    let p_dot = q_hat.sandwich(&(frame.v_m - b_v - w_v));
    Ok(Evaluation {
        gamma_body,
        p_dot,
        b_dot_omega,
        b_dot_v,
        diag: StepDiagnostics {
            e,
            transformed: tr,
            w_omega,
            w_v,
            b_dot_omega,
            b_dot_v,
            r_tilde,
            p_tilde,
            upsilon,
            vex_pa_meas,
        },
    })
}

// ---------------------------------------------------------------------------
// integration
// ---------------------------------------------------------------------------

/// Truncated inverse right-translated differential of exp on so(3):
/// `dexp⁻¹_θ(ω) ≈ ω − ½θ×ω + (1/12)θ×(θ×ω)`, enough for fourth order.
fn dexpinv(theta: &Vec3, omega: &Vec3) -> Vec3 {
    let c = theta.cross(omega);
    omega - 0.5 * c + theta.cross(&c) / 12.0
}

/// Diagnostics of the state *entering* the step plus the advanced state.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: FilterState,
    pub entry: StepDiagnostics,
}

/// Evaluate the diagnostics of a state against a frame without advancing it.
pub fn evaluate(
    state: &FilterState,
    frame: &MeasurementFrame,
    ctx: &StepContext,
) -> Result<StepDiagnostics, FilterError> {
    let data = prepare_frame(frame, ctx)?;
    let eval = match &state.attitude {
        AttitudeEstimate::Matrix(r) => {
            eval_matrix(r, &state.p_hat, &state.b_hat_omega, &state.b_hat_v, state.t, frame, &data, ctx)?
        }
        AttitudeEstimate::Quaternion(q) => eval_quaternion(
            q,
            &state.p_hat,
            &state.b_hat_omega,
            &state.b_hat_v,
            state.t,
            frame,
            &data,
            ctx,
        )?,
    };
    Ok(eval.diag)
}

/// Advance the filter one step of length `dt` against one measurement frame.
pub fn step(
    state: &FilterState,
    frame: &MeasurementFrame,
    ctx: &StepContext,
    dt: f64,
) -> Result<StepOutput, FilterError> {
    let data = prepare_frame(frame, ctx)?;
    match &state.attitude {
        AttitudeEstimate::Matrix(r) => step_matrix(state, *r, frame, &data, ctx, dt),
        AttitudeEstimate::Quaternion(q) => step_quaternion(state, *q, frame, &data, ctx, dt),
    }
}

fn step_matrix(
    state: &FilterState,
    r0: RotationMatrix,
    frame: &MeasurementFrame,
    data: &FrameData,
    ctx: &StepContext,
    dt: f64,
) -> Result<StepOutput, FilterError> {
    let (p0, bo0, bv0, t0) = (state.p_hat, state.b_hat_omega, state.b_hat_v, state.t);
    let s1 = eval_matrix(&r0, &p0, &bo0, &bv0, t0, frame, data, ctx)?;

    let (r_next, p_next, bo_next, bv_next) = match ctx.hold {
        CorrectionHold::PerStage => {
            // Munthe-Kaas RK4: the rotation increment integrates in the
            // algebra, vector states classically, corrections per stage.
            let k1 = s1.gamma_body; // dexpinv at θ = 0

            let th2 = 0.5 * dt * k1;
            let r2 = r0.compose(&RotationMatrix::exp_so3(&th2, 1.0));
            let s2 = eval_matrix(
                &r2,
                &(p0 + 0.5 * dt * s1.p_dot),
                &(bo0 + 0.5 * dt * s1.b_dot_omega),
                &(bv0 + 0.5 * dt * s1.b_dot_v),
                t0 + 0.5 * dt,
                frame,
                data,
                ctx,
            )?;
            let k2 = dexpinv(&th2, &s2.gamma_body);

            let th3 = 0.5 * dt * k2;
            let r3 = r0.compose(&RotationMatrix::exp_so3(&th3, 1.0));
            let s3 = eval_matrix(
                &r3,
                &(p0 + 0.5 * dt * s2.p_dot),
                &(bo0 + 0.5 * dt * s2.b_dot_omega),
                &(bv0 + 0.5 * dt * s2.b_dot_v),
                t0 + 0.5 * dt,
                frame,
                data,
                ctx,
            )?;
            let k3 = dexpinv(&th3, &s3.gamma_body);

            let th4 = dt * k3;
            let r4 = r0.compose(&RotationMatrix::exp_so3(&th4, 1.0));
            let s4 = eval_matrix(
                &r4,
                &(p0 + dt * s3.p_dot),
                &(bo0 + dt * s3.b_dot_omega),
                &(bv0 + dt * s3.b_dot_v),
                t0 + dt,
                frame,
                data,
                ctx,
            )?;
            let k4 = dexpinv(&th4, &s4.gamma_body);

            let theta = dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let r_next = r0.compose(&RotationMatrix::exp_so3(&theta, 1.0));
            let p_next = p0 + dt / 6.0 * (s1.p_dot + 2.0 * s2.p_dot + 2.0 * s3.p_dot + s4.p_dot);
            let bo_next = bo0
                + dt / 6.0
                    * (s1.b_dot_omega
                        + 2.0 * s2.b_dot_omega
                        + 2.0 * s3.b_dot_omega
                        + s4.b_dot_omega);
            let bv_next =
                bv0 + dt / 6.0 * (s1.b_dot_v + 2.0 * s2.b_dot_v + 2.0 * s3.b_dot_v + s4.b_dot_v);
            (r_next, p_next, bo_next, bv_next)
        }
        CorrectionHold::ZeroOrder => {
            // corrections frozen at the step entry: the attitude step is an
            // exact exponential, the position integrates over the rotating
            // attitude by Simpson's rule
            let gamma = s1.gamma_body;
            let r_half = r0.compose(&RotationMatrix::exp_so3(&gamma, 0.5 * dt));
            let r_next = r0.compose(&RotationMatrix::exp_so3(&gamma, dt));
            let v_eff = frame.v_m - bv0 - s1.diag.w_v;
            let k1 = r0.rotate(&v_eff);
            let k2 = r_half.rotate(&v_eff);
            let k4 = r_next.rotate(&v_eff);
            let p_next = p0 + dt / 6.0 * (k1 + 4.0 * k2 + k4);
            (r_next, p_next, bo0 + dt * s1.b_dot_omega, bv0 + dt * s1.b_dot_v)
        }
    };

    Ok(StepOutput {
        state: FilterState {
            attitude: AttitudeEstimate::Matrix(RotationMatrix::project(r_next.matrix())),
            p_hat: p_next,
            b_hat_omega: bo_next,
            b_hat_v: bv_next,
            t: t0 + dt,
        },
        entry: s1.diag,
    })
}

fn step_quaternion(
    state: &FilterState,
    q0: UnitQuat,
    frame: &MeasurementFrame,
    data: &FrameData,
    ctx: &StepContext,
    dt: f64,
) -> Result<StepOutput, FilterError> {
    let (p0, bo0, bv0, t0) = (state.p_hat, state.b_hat_omega, state.b_hat_v, state.t);
    let s1 = eval_quaternion(&q0, &p0, &bo0, &bv0, t0, frame, data, ctx)?;

    let (q_next, p_next, bo_next, bv_next) = match ctx.hold {
        CorrectionHold::PerStage => {
            // quaternion ODE integrated by the same Munthe-Kaas stages as the
            // matrix form, with the group exponential taken on S³
            let k1 = s1.gamma_body;

            let th2 = 0.5 * dt * k1;
            let q2 = q0.multiply(&UnitQuat::from_scaled_rate(&th2, 1.0));
            let s2 = eval_quaternion(
                &q2,
                &(p0 + 0.5 * dt * s1.p_dot),
                &(bo0 + 0.5 * dt * s1.b_dot_omega),
                &(bv0 + 0.5 * dt * s1.b_dot_v),
                t0 + 0.5 * dt,
                frame,
                data,
                ctx,
            )?;
            let k2 = dexpinv(&th2, &s2.gamma_body);

            let th3 = 0.5 * dt * k2;
            let q3 = q0.multiply(&UnitQuat::from_scaled_rate(&th3, 1.0));
            let s3 = eval_quaternion(
                &q3,
                &(p0 + 0.5 * dt * s2.p_dot),
                &(bo0 + 0.5 * dt * s2.b_dot_omega),
                &(bv0 + 0.5 * dt * s2.b_dot_v),
                t0 + 0.5 * dt,
                frame,
                data,
                ctx,
            )?;
            let k3 = dexpinv(&th3, &s3.gamma_body);

            let th4 = dt * k3;
            let q4 = q0.multiply(&UnitQuat::from_scaled_rate(&th4, 1.0));
            let s4 = eval_quaternion(
                &q4,
                &(p0 + dt * s3.p_dot),
                &(bo0 + dt * s3.b_dot_omega),
                &(bv0 + dt * s3.b_dot_v),
                t0 + dt,
                frame,
                data,
                ctx,
            )?;
            let k4 = dexpinv(&th4, &s4.gamma_body);

            let theta = dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let q_next = q0.multiply(&UnitQuat::from_scaled_rate(&theta, 1.0));
            let p_next = p0 + dt / 6.0 * (s1.p_dot + 2.0 * s2.p_dot + 2.0 * s3.p_dot + s4.p_dot);
            let bo_next = bo0
                + dt / 6.0
                    * (s1.b_dot_omega
                        + 2.0 * s2.b_dot_omega
                        + 2.0 * s3.b_dot_omega
                        + s4.b_dot_omega);
            let bv_next =
                bv0 + dt / 6.0 * (s1.b_dot_v + 2.0 * s2.b_dot_v + 2.0 * s3.b_dot_v + s4.b_dot_v);
            (q_next, p_next, bo_next, bv_next)
        }
        CorrectionHold::ZeroOrder => {
            let gamma = s1.gamma_body;
            let q_half = q0.multiply(&UnitQuat::from_scaled_rate(&gamma, 0.5 * dt));
            let q_full = q0.multiply(&UnitQuat::from_scaled_rate(&gamma, dt));
            let v_eff = frame.v_m - bv0 - s1.diag.w_v;
            let k1 = q0.sandwich(&v_eff);
            let k2 = q_half.sandwich(&v_eff);
            let k4 = q_full.sandwich(&v_eff);
            let p_next = p0 + dt / 6.0 * (k1 + 4.0 * k2 + k4);
            (q_full.canonicalize(), p_next, bo0 + dt * s1.b_dot_omega, bv0 + dt * s1.b_dot_v)
        }
    };

    Ok(StepOutput {
        state: FilterState {
            attitude: AttitudeEstimate::Quaternion(q_next.canonicalize()),
            p_hat: p_next,
            b_hat_omega: bo_next,
            b_hat_v: bv_next,
            t: t0 + dt,
        },
        entry: s1.diag,
    })
}
