//! Prescribed performance funnels and the constrained → unconstrained error
//! transform.
//!
//! Each error channel `e_i` is trapped inside a decaying envelope
//! `ξ_i(t) = (ξ⁰ − ξ∞)e^(−ℓt) + ξ∞`. The logarithmic transform maps the
//! constrained ratio `e/ξ ∈ (−δ̲, δ̄)` onto an unconstrained value `ℰ`, whose
//! boundedness is equivalent to envelope containment. The transform slope `μ`
//! and the envelope log-derivative `ξ̇/ξ` feed the filter corrections as the
//! gain blocks Ψ and Λ.

use crate::liegroup::Vec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scalar overshoot parameter of the envelope conditions. Fixed to 1,
/// consistent with the symmetric `δ̲ = δ̄` choice used by both filters.
pub const ENVELOPE_DELTA: f64 = 1.0;

/// Distance from the funnel wall used when clamping in exploratory runs.
pub const CLAMP_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PpfError {
    #[error(
        "channel {channel} left its funnel at t = {t:.6}: e = {value:.6e}, \
         e/xi = {ratio:.6e} outside (-{delta_under}, {delta_bar})"
    )]
    EnvelopeViolation {
        channel: usize,
        t: f64,
        value: f64,
        ratio: f64,
        delta_under: f64,
        delta_bar: f64,
    },
    #[error("channel {channel} invalid: {reason}")]
    InvalidChannel { channel: usize, reason: String },
}

/// What to do when a transform input falls outside `(−δ̲, δ̄)`.
///
/// The theory only guarantees containment for errors starting inside the
/// funnel, so leaving it is fatal by default; clamping is available for
/// exploratory runs and pins the ratio just inside the wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopePolicy {
    #[default]
    Strict,
    Clamp,
}

/// Sign of a channel's initial error, selecting the envelope branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialSign {
    NonNegative,
    Negative,
}

/// One error channel's envelope parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpfChannel {
    /// Initial envelope bound ξ⁰ (upper bound of the large set).
    pub xi0: f64,
    /// Steady-state envelope bound ξ∞ (upper bound of the narrow set).
    pub xi_inf: f64,
    /// Exponential decay rate ℓ (1/s).
    pub ell: f64,
    /// Upper transform bound δ̄.
    pub delta_bar: f64,
    /// Lower transform bound δ̲.
    pub delta_under: f64,
}

impl PpfChannel {
    pub fn validate(&self, channel: usize) -> Result<(), PpfError> {
        let fail = |reason: &str| {
            Err(PpfError::InvalidChannel { channel, reason: reason.to_string() })
        };
        if !(self.xi0 > 0.0 && self.xi_inf > 0.0 && self.ell > 0.0) {
            return fail("xi0, xi_inf and ell must be positive");
        }
        if self.xi0 <= self.xi_inf {
            return fail("xi0 must exceed xi_inf");
        }
        if !(self.delta_bar > 0.0 && self.delta_under > 0.0) {
            return fail("delta bounds must be positive");
        }
        if self.delta_under > self.delta_bar {
            return fail("delta_under must not exceed delta_bar");
        }
        // Proposition-1 precondition used by both filters
        if self.delta_under != self.delta_bar {
            return fail("this artifact requires delta_under = delta_bar");
        }
        Ok(())
    }

    /// Envelope value and derivative at `t`:
    /// ξ = (ξ⁰ − ξ∞)e^(−ℓt) + ξ∞ and ξ̇ = −ℓ(ξ⁰ − ξ∞)e^(−ℓt).
    pub fn evaluate_xi(&self, t: f64) -> (f64, f64) {
        let decay = (-self.ell * t).exp();
        let span = self.xi0 - self.xi_inf;
        (span * decay + self.xi_inf, -self.ell * span * decay)
    }

    fn ratio(&self, e: f64, xi: f64, policy: EnvelopePolicy) -> Result<f64, (f64, f64)> {
        let ratio = e / xi;
        if ratio > -self.delta_under && ratio < self.delta_bar {
            return Ok(ratio);
        }
        match policy {
            EnvelopePolicy::Strict => Err((e, ratio)),
            EnvelopePolicy::Clamp => Ok(if ratio >= self.delta_bar {
                self.delta_bar - CLAMP_MARGIN
            } else {
                -self.delta_under + CLAMP_MARGIN
            }),
        }
    }

    /// Inverse transform `ℰ = ½ ln((δ̲ + e/ξ) / (δ̄ − e/ξ))`.
    ///
    /// Strictly increasing in `e`, zero only at `e = 0` when `δ̲ = δ̄`, and
    /// divergent as the ratio approaches either wall.
    pub fn transform_error(&self, e: f64, xi: f64) -> Result<f64, (f64, f64)> {
        self.transform_with_policy(e, xi, EnvelopePolicy::Strict)
    }

    pub fn transform_with_policy(
        &self,
        e: f64,
        xi: f64,
        policy: EnvelopePolicy,
    ) -> Result<f64, (f64, f64)> {
        let ratio = self.ratio(e, xi, policy)?;
        Ok(0.5 * ((self.delta_under + ratio) / (self.delta_bar - ratio)).ln())
    }

    /// Transform slope `μ = (1/2ξ)(1/(δ̲ + e/ξ) + 1/(δ̄ − e/ξ)) > 0`.
    pub fn mu(&self, e: f64, xi: f64) -> Result<f64, (f64, f64)> {
        self.mu_with_policy(e, xi, EnvelopePolicy::Strict)
    }

    pub fn mu_with_policy(
        &self,
        e: f64,
        xi: f64,
        policy: EnvelopePolicy,
    ) -> Result<f64, (f64, f64)> {
        let ratio = self.ratio(e, xi, policy)?;
        Ok(0.5 / xi * (1.0 / (self.delta_under + ratio) + 1.0 / (self.delta_bar - ratio)))
    }

    /// Containment test against the δ = 1 envelope conditions:
    /// `−δξ < e < ξ` when `e(0) ≥ 0`, `−ξ < e < δξ` when `e(0) < 0`.
    pub fn check_envelope(&self, e: f64, t: f64, initial_sign: InitialSign) -> bool {
        let (xi, _) = self.evaluate_xi(t);
        match initial_sign {
            InitialSign::NonNegative => -ENVELOPE_DELTA * xi < e && e < xi,
            InitialSign::Negative => -xi < e && e < ENVELOPE_DELTA * xi,
        }
    }
}

/// Envelopes for the four error channels `e = [‖R̃‖_I, P̃ᵀ]ᵀ`
/// (channel 0: attitude distance, channels 1–3: position).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpfConfig {
    pub channels: [PpfChannel; 4],
}

impl PpfConfig {
    pub fn validate(&self) -> Result<(), PpfError> {
        for (i, ch) in self.channels.iter().enumerate() {
            ch.validate(i)?;
        }
        Ok(())
    }

    /// Evaluate all four envelopes at `t`.
    pub fn xi(&self, t: f64) -> [f64; 4] {
        [
            self.channels[0].evaluate_xi(t).0,
            self.channels[1].evaluate_xi(t).0,
            self.channels[2].evaluate_xi(t).0,
            self.channels[3].evaluate_xi(t).0,
        ]
    }

    /// Build the transformed error and the gain blocks Ψ and Λ at `t`.
    pub fn build_transformed(
        &self,
        e: &[f64; 4],
        t: f64,
        policy: EnvelopePolicy,
    ) -> Result<TransformedError, PpfError> {
        let mut transformed = [0.0; 4];
        let mut psi = [0.0; 4];
        let mut lambda = [0.0; 4];
        for i in 0..4 {
            let ch = &self.channels[i];
            let (xi, xi_dot) = ch.evaluate_xi(t);
            let violation = |(value, ratio)| PpfError::EnvelopeViolation {
                channel: i,
                t,
                value,
                ratio,
                delta_under: ch.delta_under,
                delta_bar: ch.delta_bar,
            };
            transformed[i] = ch.transform_with_policy(e[i], xi, policy).map_err(violation)?;
            psi[i] = ch.mu_with_policy(e[i], xi, policy).map_err(violation)?;
            lambda[i] = xi_dot / xi;
            debug_assert!(psi[i] > 0.0, "transform slope must stay positive");
            debug_assert!(lambda[i] <= 0.0, "envelope log-derivative must be nonpositive");
        }
        Ok(TransformedError {
            e_r: transformed[0],
            e_p: Vec3::new(transformed[1], transformed[2], transformed[3]),
            psi_r: psi[0],
            psi_p: Vec3::new(psi[1], psi[2], psi[3]),
            lambda_r: lambda[0],
            lambda_p: Vec3::new(lambda[1], lambda[2], lambda[3]),
        })
    }
}

/// Transformed error `ℰ = [ℰ_R, ℰ_Pᵀ]ᵀ` plus the diagonal gain blocks of its
/// dynamics `ℰ̇ = Ψ(ė − Λe)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedError {
    /// Transformed attitude-distance error ℰ_R.
    pub e_r: f64,
    /// Transformed position error ℰ_P.
    pub e_p: Vec3,
    /// Ψ_R = μ₁ (> 0).
    pub psi_r: f64,
    /// Diagonal of Ψ_P = diag(μ₂, μ₃, μ₄).
    pub psi_p: Vec3,
    /// Λ_R = ξ̇₁/ξ₁ (≤ 0).
    pub lambda_r: f64,
    /// Diagonal of Λ_P = diag(ξ̇ᵢ/ξᵢ).
    pub lambda_p: Vec3,
}

impl TransformedError {
    pub fn norm_squared(&self) -> f64 {
        self.e_r * self.e_r + self.e_p.norm_squared()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_channel_1() -> PpfChannel {
        PpfChannel { xi0: 1.3, xi_inf: 0.07, ell: 4.0, delta_bar: 1.3, delta_under: 1.3 }
    }

    fn unit_channel() -> PpfChannel {
        PpfChannel { xi0: 2.0, xi_inf: 0.5, ell: 1.0, delta_bar: 1.0, delta_under: 1.0 }
    }

    fn paper_config() -> PpfConfig {
        let mk = |xi0: f64, xi_inf: f64, delta: f64| PpfChannel {
            xi0,
            xi_inf,
            ell: 4.0,
            delta_bar: delta,
            delta_under: delta,
        };
        PpfConfig {
            channels: [mk(1.3, 0.07, 1.3), mk(5.0, 0.3, 5.0), mk(4.0, 0.3, 4.0), mk(6.0, 0.3, 6.0)],
        }
    }

    #[test]
    fn xi_endpoints_and_value() {
        let ch = paper_channel_1();
        let (xi0, xi_dot0) = ch.evaluate_xi(0.0);
        assert_abs_diff_eq!(xi0, 1.3, epsilon = 1e-15);
        assert_abs_diff_eq!(xi_dot0, -4.0 * 1.23, epsilon = 1e-12);
        let (xi_late, xi_dot_late) = ch.evaluate_xi(1e3);
        assert_abs_diff_eq!(xi_late, 0.07, epsilon = 1e-12);
        assert_abs_diff_eq!(xi_dot_late, 0.0, epsilon = 1e-12);
        // direct evaluation at t = 0.5 with the scenario parameters
        let (xi, _) = ch.evaluate_xi(0.5);
        assert_abs_diff_eq!(xi, 1.23 * (-2.0f64).exp() + 0.07, epsilon = 1e-15);
        assert!((xi - 0.2365).abs() < 1e-4);
        // monotone decrease toward xi_inf
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let (xi, xi_dot) = ch.evaluate_xi(0.1 * k as f64);
            assert!(xi < prev && xi > ch.xi_inf);
            assert!(xi_dot < 0.0);
            prev = xi;
        }
    }

    #[test]
    fn transform_values() {
        let ch = unit_channel();
        assert_abs_diff_eq!(ch.transform_error(0.0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        // e/ξ = 0.5 with δ̄ = δ̲ = 1 → ½ ln 3
        assert_abs_diff_eq!(
            ch.transform_error(0.5, 1.0).unwrap(),
            0.5 * 3.0f64.ln(),
            epsilon = 1e-15
        );
        // divergence toward the wall, monotone in e
        let near = ch.transform_error(1.0 - 1e-12, 1.0).unwrap();
        assert!(near > 12.0);
        let mut prev = f64::NEG_INFINITY;
        for k in -9..10 {
            let e = 0.1 * k as f64;
            let v = ch.transform_error(e, 1.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn transform_rejects_outside_funnel() {
        let ch = unit_channel();
        assert!(ch.transform_error(1.0, 1.0).is_err());
        assert!(ch.transform_error(-1.0001, 1.0).is_err());
        // clamp policy pins the ratio just inside the wall instead
        let clamped = ch.transform_with_policy(1.5, 1.0, EnvelopePolicy::Clamp).unwrap();
        assert!(clamped.is_finite() && clamped > 9.0);
    }

    #[test]
    fn transform_is_odd_for_symmetric_bounds() {
        let ch = paper_channel_1();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let xi = rng.random_range(0.07..1.3);
            let e = rng.random_range(-0.99..0.99) * ch.delta_bar * xi;
            let plus = ch.transform_error(e, xi).unwrap();
            let minus = ch.transform_error(-e, xi).unwrap();
            assert_abs_diff_eq!(plus, -minus, epsilon = 1e-12);
        }
    }

    #[test]
    fn mu_values_and_pole() {
        let ch = unit_channel();
        assert_abs_diff_eq!(ch.mu(0.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ch.mu(0.0, 2.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(ch.mu(1.0 - 1e-12, 1.0).unwrap() > 1e10);
    }

    #[test]
    fn mu_is_transform_slope() {
        // ∂ℰ/∂e = μ, checked by central differences at random points
        let ch = paper_channel_1();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let xi = rng.random_range(0.07..1.3);
            let e = rng.random_range(-0.9..0.9) * ch.delta_bar * xi;
            let h = 1e-6 * xi;
            let diff = (ch.transform_error(e + h, xi).unwrap()
                - ch.transform_error(e - h, xi).unwrap())
                / (2.0 * h);
            let mu = ch.mu(e, xi).unwrap();
            assert!(mu > 0.0);
            assert_abs_diff_eq!(diff, mu, epsilon = 1e-5 * mu.max(1.0));
        }
    }

    #[test]
    fn transform_time_derivative_chain_rule() {
        // d/dt ℰ(e(t), ξ(t)) = μ(ė − (ξ̇/ξ)e) along a smooth trajectory
        let ch = paper_channel_1();
        let e_of_t = |t: f64| {
            let (xi, _) = ch.evaluate_xi(t);
            0.6 * xi * (2.0 * t).sin()
        };
        let e_dot_of_t = |t: f64| {
            let (xi, xi_dot) = ch.evaluate_xi(t);
            0.6 * xi_dot * (2.0 * t).sin() + 1.2 * xi * (2.0 * t).cos()
        };
        let transform_at = |t: f64| {
            let (xi, _) = ch.evaluate_xi(t);
            ch.transform_error(e_of_t(t), xi).unwrap()
        };
        for &t in &[0.05, 0.3, 0.8, 1.7, 3.0] {
            let (xi, xi_dot) = ch.evaluate_xi(t);
            let e = e_of_t(t);
            let analytic = ch.mu(e, xi).unwrap() * (e_dot_of_t(t) - xi_dot / xi * e);
            let h = 1e-5;
            let central = (transform_at(t + h) - transform_at(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(analytic, central, epsilon = 1e-7 * analytic.abs().max(1.0));
        }
    }

    #[test]
    fn build_transformed_structure() {
        let cfg = paper_config();
        let zero = cfg.build_transformed(&[0.0; 4], 0.7, EnvelopePolicy::Strict).unwrap();
        assert_eq!(zero.e_r, 0.0);
        assert_eq!(zero.e_p, Vec3::zeros());
        assert!(zero.psi_r > 0.0 && zero.psi_p.min() > 0.0);
        assert!(zero.lambda_r < 0.0 && zero.lambda_p.max() < 0.0);

        // Λ_R(0) = ξ̇₁(0)/ξ₁(0) = −4·1.23/1.3
        let at0 = cfg.build_transformed(&[0.0; 4], 0.0, EnvelopePolicy::Strict).unwrap();
        assert_abs_diff_eq!(at0.lambda_r, -4.0 * 1.23 / 1.3, epsilon = 1e-12);
        assert!((at0.lambda_r + 3.7846).abs() < 1e-4);

        // Λ → 0 as the envelopes settle
        let late = cfg.build_transformed(&[0.0; 4], 50.0, EnvelopePolicy::Strict).unwrap();
        assert!(late.lambda_r.abs() < 1e-12 && late.lambda_p.abs().max() < 1e-12);

        // violations carry the offending channel
        let err = cfg.build_transformed(&[0.0, 30.0, 0.0, 0.0], 0.0, EnvelopePolicy::Strict);
        match err {
            Err(PpfError::EnvelopeViolation { channel, .. }) => assert_eq!(channel, 1),
            other => panic!("expected envelope violation, got {other:?}"),
        }
    }

    #[test]
    fn envelope_check_delta_one() {
        let ch = paper_channel_1();
        assert!(ch.check_envelope(0.0, 0.0, InitialSign::NonNegative));
        assert!(ch.check_envelope(0.0, 12.0, InitialSign::Negative));
        let (xi, _) = ch.evaluate_xi(0.4);
        assert!(!ch.check_envelope(1.01 * xi, 0.4, InitialSign::NonNegative));
        assert!(!ch.check_envelope(-1.01 * xi, 0.4, InitialSign::Negative));
        assert!(ch.check_envelope(0.99 * xi, 0.4, InitialSign::NonNegative));
    }

    #[test]
    fn boundedness_iff_containment() {
        let ch = paper_channel_1();
        // contained trajectory ⇒ bounded transform
        let mut max_abs: f64 = 0.0;
        for k in 0..2000 {
            let t = 0.01 * k as f64;
            let (xi, _) = ch.evaluate_xi(t);
            let e = 0.9 * xi * (3.0 * t).sin();
            assert!(ch.check_envelope(e, t, InitialSign::NonNegative));
            max_abs = max_abs.max(ch.transform_error(e, xi).unwrap().abs());
        }
        assert!(max_abs < 0.5 * (2.2f64 / 0.4).ln() + 1.0);

        // trajectory escaping toward the wall ⇒ transform grows without bound
        let escape = |t: f64| {
            let (xi, _) = ch.evaluate_xi(t);
            (xi, xi * ch.delta_bar * (1.0 - 1.0 / (1.0 + t)))
        };
        let (xi_a, e_a) = escape(1.0);
        let (xi_b, e_b) = escape(10.0);
        let (xi_c, e_c) = escape(100.0);
        let t_a = ch.transform_error(e_a, xi_a).unwrap();
        let t_b = ch.transform_error(e_b, xi_b).unwrap();
        let t_c = ch.transform_error(e_c, xi_c).unwrap();
        assert!(t_a < t_b && t_b < t_c && t_c > 2.5);
        // and the δ = 1 containment check flags it once e exceeds ξ
        assert!(!ch.check_envelope(e_c, 100.0, InitialSign::NonNegative));

        // bounded transform ⇒ ratio bounded away from the wall
        for m in [0.5f64, 2.0, 5.0] {
            let ratio = ch.delta_bar * ((2.0 * m).exp() - 1.0) / ((2.0 * m).exp() + 1.0);
            assert!(ratio < ch.delta_bar);
            let e = ratio * 1.0;
            let back = ch.transform_error(e, 1.0).unwrap();
            assert_abs_diff_eq!(back, m, epsilon = 1e-9);
        }
    }

    #[test]
    fn validation_rules() {
        let mut ch = paper_channel_1();
        assert!(ch.validate(0).is_ok());
        ch.xi_inf = 2.0;
        assert!(ch.validate(0).is_err());
        let mut ch = paper_channel_1();
        ch.delta_under = 1.0;
        assert!(ch.validate(0).is_err());
        let mut ch = paper_channel_1();
        ch.ell = 0.0;
        assert!(ch.validate(0).is_err());
    }
}
