//! Formation path following for vehicle fleets whose only communication
//! channel is a low-rate lossy acoustic broadcast.
//!
//! Each agent plans its progress along a common geometric path as a clamped
//! uniform cubic B-spline and keeps the fleet together by exchanging spline
//! coefficients with its neighbors through a consensus scheme. The crate
//! provides the pieces of that loop plus a deterministic closed-loop
//! simulator around them:
//!
//! * [`bspline`]: the spline type, evaluation, derivatives, least-squares
//!   fitting, domain shifting.
//! * [`codec`]: delta coding of coefficient vectors against a nominal-speed
//!   line, fixed-point quantization, and the broadcast payload bit format.
//! * [`imputation`]: spline extrapolation used to stand in for lost or
//!   delayed packets.
//! * [`mac`]: slot scheduling (TDMA/FDMA), Bernoulli packet loss, and loss
//!   detection bookkeeping.
//! * [`dmpc`]: the per-agent planner (an equality-constrained quadratic
//!   solve) and the consensus message exchange around it.
//! * [`scenario`]: survey and inspection reference paths and formation
//!   geometry.
//! * [`metrics`]: formation and speed error series, windowed mean squared
//!   error, threshold verdicts.
//! * [`tuning`]: the payload-size/data-rate model and a coordinate-descent
//!   search for the cheapest feasible communication setup.
//! * [`sim`] and [`config`]: the closed-loop simulator, its configuration
//!   format, and CSV output.
//!
//! Everything is deterministic given a seed: reruns produce byte-identical
//! traces.

pub mod bspline;
pub mod codec;
pub mod config;
pub mod dmpc;
pub mod error;
pub mod imputation;
pub mod mac;
pub mod metrics;
pub mod scenario;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
