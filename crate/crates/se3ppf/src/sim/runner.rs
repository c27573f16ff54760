//! The simulation run loop: propagate the true pose, synthesize
//! measurements, drive the selected filter(s), and record the time series
//! and summary artifacts.
//!
//! Each step follows the filters' implementation procedure: compute the
//! error against the current measurements, evaluate the envelopes and the
//! transformed error, form the corrections, advance the estimator
//! kinematics, repeat. A run is deterministic given its seed.

use super::config::{ConfigError, ScenarioConfig};
use super::euler::euler_from_rotation;
use super::summary::{summarize, RunSummary};
use crate::filters::{
    self, FilterError, FilterMode, FilterState, RotationForm, StepContext, StepDiagnostics,
};
use crate::liegroup::{HomogeneousTransform, Vec3};
use crate::ppf::{EnvelopePolicy, PpfError};
use crate::sensors::{derive_run_seed, measure, propagate_truth_sampled, TruthState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Fixed CSV schema, one row per step per filter.
pub const CSV_HEADER: &str = "t,phi_true,theta_true,psi_true,phi_est,theta_est,psi_est,\
px_true,py_true,pz_true,px_est,py_est,pz_est,e1,e2,e3,e4,xi1,xi2,xi3,xi4,\
ER,EP1,EP2,EP3,bw1,bw2,bw3,bv1,bv2,bv3,V_lyap";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error writing run outputs: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to serialize summary: {0}")]
    Json(#[from] serde_json::Error),
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunOutcome {
    Completed,
    /// The constrained error left its funnel; fatal under the strict policy.
    EnvelopeViolation { t: f64, channel: usize },
    /// Any other filter failure (singular attitude, degenerate measurements).
    Aborted { t: f64, reason: String },
}

impl RunOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, RunOutcome::Completed)
    }
}

/// One recorded sample. The CSV columns come first; the `true_e` block is
/// derived against ground truth for summaries and is not part of the CSV
/// schema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRecord {
    pub t: f64,
    pub euler_true: [f64; 3],
    pub euler_est: [f64; 3],
    pub p_true: [f64; 3],
    pub p_est: [f64; 3],
    pub e: [f64; 4],
    pub xi: [f64; 4],
    /// Transformed error [ℰ_R, ℰ_P1, ℰ_P2, ℰ_P3].
    pub transformed: [f64; 4],
    pub b_omega: [f64; 3],
    pub b_v: [f64; 3],
    pub lyapunov: f64,
    /// True errors [‖R̂Rᵀ‖_I, (P̂ − R̃P)ᵀ].
    pub true_e: [f64; 4],
}

impl SeriesRecord {
    pub fn csv_row(&self) -> String {
        let mut row = String::with_capacity(512);
        let mut push = |v: f64| {
            if !row.is_empty() {
                row.push(',');
            }
            write!(row, "{v:.8e}").expect("write to string");
        };
        push(self.t);
        self.euler_true.iter().for_each(|v| push(*v));
        self.euler_est.iter().for_each(|v| push(*v));
        self.p_true.iter().for_each(|v| push(*v));
        self.p_est.iter().for_each(|v| push(*v));
        self.e.iter().for_each(|v| push(*v));
        self.xi.iter().for_each(|v| push(*v));
        self.transformed.iter().for_each(|v| push(*v));
        self.b_omega.iter().for_each(|v| push(*v));
        self.b_v.iter().for_each(|v| push(*v));
        push(self.lyapunov);
        row
    }
}

/// Result of driving one filter through one scenario.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub mode: FilterMode,
    pub form: RotationForm,
    pub outcome: RunOutcome,
    pub series: Vec<SeriesRecord>,
    pub summary: RunSummary,
}

/// All filter runs of one scenario execution.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub seed: u64,
    pub results: Vec<RunResult>,
}

impl RunReport {
    pub fn all_succeeded(&self) -> bool {
        self.results.iter().all(|r| r.outcome.is_success())
    }
}

/// Summary written next to each CSV stream.
#[derive(Debug, Serialize)]
struct SummarySidecar<'a> {
    filter: &'a str,
    form: &'a str,
    seed: u64,
    outcome: &'a RunOutcome,
    summary: &'a RunSummary,
}

fn filter_error_outcome(err: FilterError, t: f64) -> RunOutcome {
    match err {
        FilterError::Envelope(PpfError::EnvelopeViolation { channel, t, .. }) => {
            RunOutcome::EnvelopeViolation { t, channel }
        }
        other => RunOutcome::Aborted { t, reason: other.to_string() },
    }
}

/// Execute every selected filter against the scenario, in memory.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport, RunError> {
    cfg.validate()?;
    let mut results = Vec::new();
    for mode in cfg.filter.modes() {
        results.push(run_single(cfg, mode)?);
    }
    Ok(RunReport { seed: cfg.seed(), results })
}

fn record_from(
    truth: &TruthState,
    state: &FilterState,
    diag: &StepDiagnostics,
    cfg: &ScenarioConfig,
    xi: [f64; 4],
) -> SeriesRecord {
    let (phi_t, theta_t, psi_t) = euler_from_rotation(truth.pose.rotation());
    let r_est = state.rotation();
    let (phi_e, theta_e, psi_e) = euler_from_rotation(&r_est);
    let b_tilde_omega = cfg.sensors.gyro_bias - state.b_hat_omega;
    let b_tilde_v = cfg.sensors.vel_bias - state.b_hat_v;
    let lyap = filters::lyapunov(&diag.transformed, &b_tilde_omega, &b_tilde_v, cfg.gains.gamma);

    // true errors against ground truth (reporting only)
    let r_tilde_true = r_est.compose(&truth.pose.rotation().transpose());
    let p_tilde_true = state.p_hat - r_tilde_true.rotate(truth.pose.position());

    SeriesRecord {
        t: truth.t,
        euler_true: [phi_t, theta_t, psi_t],
        euler_est: [phi_e, theta_e, psi_e],
        p_true: [truth.pose.position().x, truth.pose.position().y, truth.pose.position().z],
        p_est: [state.p_hat.x, state.p_hat.y, state.p_hat.z],
        e: diag.e,
        xi,
        transformed: [
            diag.transformed.e_r,
            diag.transformed.e_p.x,
            diag.transformed.e_p.y,
            diag.transformed.e_p.z,
        ],
        b_omega: [state.b_hat_omega.x, state.b_hat_omega.y, state.b_hat_omega.z],
        b_v: [state.b_hat_v.x, state.b_hat_v.y, state.b_hat_v.z],
        lyapunov: lyap,
        true_e: [r_tilde_true.normalized_distance(), p_tilde_true.x, p_tilde_true.y, p_tilde_true.z],
    }
}

fn run_single(cfg: &ScenarioConfig, mode: FilterMode) -> Result<RunResult, RunError> {
    let ppf = cfg.ppf_config();
    let gains = cfg.gains;
    let policy = if cfg.clamp { EnvelopePolicy::Clamp } else { EnvelopePolicy::Strict };
    let ctx = StepContext {
        suite: &cfg.sensors,
        ppf: &ppf,
        gains: &gains,
        mode,
        policy,
        hold: cfg.correction_hold,
    };

    let truth_pose = HomogeneousTransform::new(
        cfg.truth.attitude.to_rotation()?,
        Vec3::from_row_slice(&cfg.truth.position),
    );
    let mut truth = TruthState::initial(truth_pose);
    let mut state = FilterState::new(
        cfg.form,
        cfg.initial.attitude.to_rotation()?,
        Vec3::from_row_slice(&cfg.initial.position),
    );
    state.b_hat_omega = Vec3::from_row_slice(&cfg.initial.bias_omega);
    state.b_hat_v = Vec3::from_row_slice(&cfg.initial.bias_v);

    let mut rng = cfg.sensors.noise_stream();

    // pre-run check against the noise-free initial frame (consumes no noise
    // draws): the funnel must strictly contain e(0). Random noise pushing
    // the first measured frame outside is a run outcome, not a config error.
    {
        let (omega0, v0) = cfg.profile.sample(0.0);
        let mut no_draws = cfg.sensors.noise_stream();
        let frame0 = measure(&truth, &omega0, &v0, &cfg.sensors, false, &mut no_draws);
        let strict_ctx = StepContext { policy: EnvelopePolicy::Strict, ..ctx };
        match filters::evaluate(&state, &frame0, &strict_ctx) {
            Ok(diag) => {
                let xi0 = ppf.xi(0.0);
                for i in 0..4 {
                    if diag.e[i].abs() >= xi0[i] {
                        return Err(RunError::Config(ConfigError::InitialErrorOutsideFunnel {
                            channel: i,
                            value: diag.e[i].abs(),
                            bound: xi0[i],
                        }));
                    }
                }
            }
            Err(FilterError::Envelope(PpfError::EnvelopeViolation { channel, value, .. })) => {
                return Err(RunError::Config(ConfigError::InitialErrorOutsideFunnel {
                    channel,
                    value: value.abs(),
                    bound: ppf.xi(0.0)[channel],
                }));
            }
            Err(other) => {
                return Err(RunError::Config(ConfigError::Invalid(format!(
                    "initial state cannot be evaluated: {other}"
                ))));
            }
        }
    }

    let n_steps = (cfg.duration / cfg.dt).floor() as usize;
    let mut series = Vec::with_capacity(n_steps + 1);
    let mut outcome = RunOutcome::Completed;

    for k in 0..n_steps {
        let t_k = k as f64 * cfg.dt;
        let (omega, v) = cfg.profile.sample(t_k);
        let frame = measure(&truth, &omega, &v, &cfg.sensors, cfg.noise, &mut rng);
        match filters::step(&state, &frame, &ctx, cfg.dt) {
            Ok(out) => {
                series.push(record_from(&truth, &state, &out.entry, cfg, ppf.xi(t_k)));
                state = out.state;
            }
            Err(err) => {
                outcome = filter_error_outcome(err, t_k);
                break;
            }
        }
        let samples = [
            (omega, v),
            cfg.profile.sample(t_k + 0.5 * cfg.dt),
            cfg.profile.sample(t_k + cfg.dt),
        ];
        truth = propagate_truth_sampled(&truth, &samples, cfg.dt);
    }

    // closing sample at t = duration
    if outcome.is_success() {
        let t_end = n_steps as f64 * cfg.dt;
        let (omega, v) = cfg.profile.sample(t_end);
        let frame = measure(&truth, &omega, &v, &cfg.sensors, cfg.noise, &mut rng);
        match filters::evaluate(&state, &frame, &ctx) {
            Ok(diag) => series.push(record_from(&truth, &state, &diag, cfg, ppf.xi(t_end))),
            Err(err) => outcome = filter_error_outcome(err, t_end),
        }
    }

    let window = (5.0f64.min(0.5 * cfg.duration), cfg.duration);
    let summary = summarize(&series, &ppf, window);
    Ok(RunResult { mode, form: cfg.form, outcome, series, summary })
}

/// Execute the scenario and write one CSV stream plus one JSON summary per
/// filter into `out_dir`.
pub fn run_to_dir(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunReport, RunError> {
    let report = run_scenario(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    for result in &report.results {
        write_result(result, report.seed, out_dir)?;
    }
    Ok(report)
}

fn write_result(result: &RunResult, seed: u64, out_dir: &Path) -> Result<(), RunError> {
    let stem = format!("{}_{}", result.mode.tag(), result.form.tag());
    let mut csv = String::with_capacity(result.series.len() * 512);
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for rec in &result.series {
        csv.push_str(&rec.csv_row());
        csv.push('\n');
    }
    std::fs::write(out_dir.join(format!("{stem}.csv")), csv)?;

    let sidecar = SummarySidecar {
        filter: result.mode.tag(),
        form: result.form.tag(),
        seed,
        outcome: &result.outcome,
        summary: &result.summary,
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(out_dir.join(format!("{stem}.summary.json")), json)?;
    Ok(())
}

/// One Monte-Carlo run's digest (series dropped to keep memory flat).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunDigest {
    pub run_index: usize,
    pub seed: u64,
    pub filter: String,
    pub form: String,
    pub outcome: RunOutcome,
    pub summary: RunSummary,
}

/// Digest of a `--runs N` Monte-Carlo execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub master_seed: u64,
    pub n_runs: usize,
    pub digests: Vec<RunDigest>,
}

impl MonteCarloReport {
    /// Median of the windowed mean attitude distance across completed runs
    /// of one filter.
    pub fn median_mean_attitude_distance(&self, mode: FilterMode) -> Option<f64> {
        let mut values: Vec<f64> = self
            .digests
            .iter()
            .filter(|d| d.filter == mode.tag() && d.outcome.is_success())
            .map(|d| d.summary.mean_attitude_distance)
            .collect();
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        Some(values[values.len() / 2])
    }
}

/// Fan independent runs out over a worker pool, one derived seed per run.
pub fn run_monte_carlo(
    cfg: &ScenarioConfig,
    runs: usize,
    out_dir: Option<&Path>,
) -> Result<MonteCarloReport, RunError> {
    let master = cfg.seed();
    let reports: Vec<Result<Vec<RunDigest>, RunError>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut run_cfg = cfg.clone();
            run_cfg.set_seed(derive_run_seed(master, i as u64));
            let report = match out_dir {
                Some(dir) => run_to_dir(&run_cfg, &dir.join(format!("run_{i:03}")))?,
                None => run_scenario(&run_cfg)?,
            };
            Ok(report
                .results
                .into_iter()
                .map(|r| RunDigest {
                    run_index: i,
                    seed: run_cfg.seed(),
                    filter: r.mode.tag().to_string(),
                    form: r.form.tag().to_string(),
                    outcome: r.outcome,
                    summary: r.summary,
                })
                .collect())
        })
        .collect();

    let mut digests = Vec::with_capacity(2 * runs);
    for r in reports {
        digests.extend(r?);
    }
    let report = MonteCarloReport { master_seed: master, n_runs: runs, digests };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("monte_carlo.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}
