//! Per-run summary metrics computed from a recorded time series.

use super::runner::SeriesRecord;
use crate::ppf::PpfConfig;
use serde::{Deserialize, Serialize};

/// Containment metrics for one error channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    /// max over the run of |e|/ξ (1 means the funnel wall was touched).
    pub max_ratio: f64,
    /// First time |e| entered the steady-state band ξ∞, if it did.
    pub settle_time: Option<f64>,
    /// Samples where the filter-facing error left the δ = 1 envelope.
    pub violations: usize,
    pub first_violation_t: Option<f64>,
    /// Samples where the true error (against ground truth) left the envelope.
    pub true_violations: usize,
}

/// Summary of one filter run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub channels: [ChannelSummary; 4],
    /// Mean of the true attitude distance ‖R̂Rᵀ‖_I over the window.
    pub mean_attitude_distance: f64,
    pub std_attitude_distance: f64,
    /// Averaging window (s) for the attitude statistics.
    pub window: (f64, f64),
    pub total_violations: usize,
    pub total_true_violations: usize,
    pub final_bias_omega: [f64; 3],
    pub final_bias_v: [f64; 3],
    /// Final true errors [‖R̃‖_I, P̃ᵀ] against ground truth.
    pub final_true_errors: [f64; 4],
}

/// Scan a recorded series: per-channel funnel ratios and violation counts,
/// settle times into the ξ∞ bands, windowed statistics of the true attitude
/// distance, and the terminal bias estimates.
pub fn summarize(series: &[SeriesRecord], ppf: &PpfConfig, window: (f64, f64)) -> RunSummary {
    if series.is_empty() {
        // a run aborted on its very first frame leaves nothing to summarize
        return RunSummary {
            channels: [ChannelSummary {
                max_ratio: f64::NAN,
                settle_time: None,
                violations: 0,
                first_violation_t: None,
                true_violations: 0,
            }; 4],
            mean_attitude_distance: f64::NAN,
            std_attitude_distance: f64::NAN,
            window,
            total_violations: 0,
            total_true_violations: 0,
            final_bias_omega: [f64::NAN; 3],
            final_bias_v: [f64::NAN; 3],
            final_true_errors: [f64::NAN; 4],
        };
    }
    let mut channels = [ChannelSummary {
        max_ratio: 0.0,
        settle_time: None,
        violations: 0,
        first_violation_t: None,
        true_violations: 0,
    }; 4];

    let mut mean = 0.0;
    let mut mean_sq = 0.0;
    let mut count = 0usize;

    for rec in series {
        for i in 0..4 {
            let ch = &mut channels[i];
            let ratio = rec.e[i].abs() / rec.xi[i];
            ch.max_ratio = ch.max_ratio.max(ratio);
            // δ = 1 collapses both sign branches of the envelope
            // conditions to |e| < ξ
            let contained = rec.e[i].abs() < rec.xi[i];
            if !contained {
                ch.violations += 1;
                ch.first_violation_t.get_or_insert(rec.t);
            }
            if rec.true_e[i].abs() >= rec.xi[i] {
                ch.true_violations += 1;
            }
            if ch.settle_time.is_none() && rec.e[i].abs() <= ppf.channels[i].xi_inf {
                ch.settle_time = Some(rec.t);
            }
        }
        if rec.t >= window.0 && rec.t <= window.1 {
            mean += rec.true_e[0];
            mean_sq += rec.true_e[0] * rec.true_e[0];
            count += 1;
        }
    }

    let (mean_attitude_distance, std_attitude_distance) = if count > 0 {
        let m = mean / count as f64;
        (m, (mean_sq / count as f64 - m * m).max(0.0).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };

    let last = series.last().unwrap();
    RunSummary {
        channels,
        mean_attitude_distance,
        std_attitude_distance,
        window,
        total_violations: channels.iter().map(|c| c.violations).sum(),
        total_true_violations: channels.iter().map(|c| c.true_violations).sum(),
        final_bias_omega: last.b_omega,
        final_bias_v: last.b_v,
        final_true_errors: last.true_e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppf::PpfChannel;

    fn test_ppf() -> PpfConfig {
        let ch = PpfChannel { xi0: 1.0, xi_inf: 0.1, ell: 1.0, delta_bar: 1.0, delta_under: 1.0 };
        PpfConfig { channels: [ch; 4] }
    }

    fn record(t: f64, e: [f64; 4], xi: [f64; 4]) -> SeriesRecord {
        SeriesRecord {
            t,
            euler_true: [0.0; 3],
            euler_est: [0.0; 3],
            p_true: [0.0; 3],
            p_est: [0.0; 3],
            e,
            xi,
            transformed: [0.0; 4],
            b_omega: [0.1, 0.2, 0.3],
            b_v: [0.4, 0.5, 0.6],
            lyapunov: 0.0,
            true_e: e,
        }
    }

    #[test]
    fn zero_error_series() {
        let series: Vec<_> =
            (0..10).map(|k| record(k as f64 * 0.1, [0.0; 4], [1.0; 4])).collect();
        let s = summarize(&series, &test_ppf(), (0.0, 1.0));
        assert_eq!(s.total_violations, 0);
        for ch in &s.channels {
            assert_eq!(ch.max_ratio, 0.0);
            assert_eq!(ch.settle_time, Some(0.0));
        }
        assert_eq!(s.mean_attitude_distance, 0.0);
        assert_eq!(s.final_bias_omega, [0.1, 0.2, 0.3]);
    }

    #[test]
    fn single_excursion_counted_with_timestamp() {
        let mut series: Vec<_> =
            (0..10).map(|k| record(k as f64 * 0.1, [0.2, 0.0, 0.0, 0.0], [1.0; 4])).collect();
        series[4].e[0] = 1.5;
        let s = summarize(&series, &test_ppf(), (0.0, 1.0));
        assert_eq!(s.channels[0].violations, 1);
        assert_eq!(s.channels[0].first_violation_t, Some(0.4));
        assert_eq!(s.total_violations, 1);
        assert!(s.channels[0].max_ratio >= 1.5);
    }

    #[test]
    fn settle_time_is_first_band_entry() {
        let series: Vec<_> = (0..20)
            .map(|k| {
                let t = k as f64 * 0.1;
                let e = [0.5 * (-t).exp(), 0.0, 0.0, 0.0];
                record(t, e, [1.0; 4])
            })
            .collect();
        let s = summarize(&series, &test_ppf(), (0.0, 2.0));
        // 0.5·e^(−t) ≤ 0.1 at t = ln 5 ≈ 1.609 → first sample at 1.7
        assert_eq!(s.channels[0].settle_time, Some(1.7000000000000002));
    }

    #[test]
    fn windowed_statistics() {
        let series: Vec<_> = (0..11)
            .map(|k| {
                let t = k as f64;
                let mut r = record(t, [0.0; 4], [1.0; 4]);
                r.true_e[0] = if t >= 5.0 { 0.2 } else { 10.0 };
                r
            })
            .collect();
        let s = summarize(&series, &test_ppf(), (5.0, 10.0));
        assert!((s.mean_attitude_distance - 0.2).abs() < 1e-12);
        assert!(s.std_attitude_distance < 1e-6);
    }
}
