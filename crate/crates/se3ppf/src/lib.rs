//! Nonlinear pose (attitude + position) filters on SE(3) with prescribed
//! transient and steady-state performance, plus the simulation harness used
//! to exercise them.
//!
//! The crate is organized around the filtering pipeline:
//!
//! * [`liegroup`] — SO(3)/SE(3)/quaternion algebra: maps, projections,
//!   distances and parameterizations everything else is built on.
//! * [`ppf`] — prescribed performance funnels and the constrained →
//!   unconstrained error transform feeding the filter gains.
//! * [`sensors`] — ground-truth propagation and synthesis of biased/noisy
//!   vector, landmark and velocity measurements.
//! * [`reconstruction`] — static pose reconstruction (SVD solution of
//!   Wahba's problem and landmark-based position recovery).
//! * [`filters`] — the semi-direct and direct pose filters, in homogeneous
//!   matrix and quaternion forms, with bias estimation and Lyapunov
//!   diagnostics.
//! * [`sim`] — scenario configuration, the run loop, CSV/JSON output and
//!   summary metrics backing the `se3ppf` command-line harness.

pub mod filters;
pub mod liegroup;
pub mod ppf;
pub mod reconstruction;
pub mod sensors;
pub mod sim;

pub use liegroup::{HomogeneousTransform, RotationMatrix, UnitQuat};
