//! Belief maintenance for stale neighbor plans.
//!
//! When a plan update is lost or arrives late, the receiver keeps steering
//! against the last plan it heard. That plan's domain starts in the past, so
//! before use it is extended forward one interval at a time and then shifted
//! so its domain starts now. Extension is where the guesswork lives; two
//! methods are provided.

use serde::{Deserialize, Serialize};

use crate::bspline::{fit_least_squares, solve_end, BSpline, EndSide};
use crate::error::{Error, Result};

/// How to continue a plan past its last interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrapolationMethod {
    /// Continue the last interval's cubic unchanged. Exact for polynomial
    /// trajectories but amplifies whatever curvature the tail happens to
    /// have.
    Jerk,
    /// Continue along the tangent at the end point and refit. Assumes the
    /// vehicle keeps its current speed, which is usually the safer guess.
    Velocity,
}

/// Extends the spline by one interval on the right with the chosen method.
/// The result keeps `t0` and the interval length and gains one interval.
pub fn extrapolate(spline: &BSpline, method: ExtrapolationMethod) -> Result<BSpline> {
    match method {
        ExtrapolationMethod::Jerk => extrapolate_jerk(spline),
        ExtrapolationMethod::Velocity => extrapolate_velocity(spline),
    }
}

/// Polynomial continuation: the new interval carries the same cubic as the
/// last input interval. Interior coefficients are re-used directly (the
/// left-end and uniform basis functions are identical in both spaces) and
/// the four right-end coefficients are solved from the continued
/// polynomial's value and derivatives at the new end point.
pub fn extrapolate_jerk(spline: &BSpline) -> Result<BSpline> {
    let n = spline.n_intervals();
    let dt = spline.interval_len();
    let d = spline.derivs_for_piece(spline.t_end(), true)?;
    // Taylor step of the last piece's cubic across the new interval
    let targets = [
        d[0] + d[1] * dt + d[2] * dt * dt / 2.0 + d[3] * dt * dt * dt / 6.0,
        d[1] + d[2] * dt + d[3] * dt * dt / 2.0,
        d[2] + d[3] * dt,
        d[3],
    ];
    let mut out = vec![0.0; n + 4];
    out[..n].copy_from_slice(&spline.coeffs()[..n]);
    let right = solve_end(n + 1, dt, EndSide::Right, &targets)?;
    out[n..].copy_from_slice(&right);
    BSpline::new(spline.t0(), dt, out)
}

/// Tangent continuation: the input is sampled twice per interval, two more
/// samples are placed on the end-point tangent line, and the lot is refit
/// over one extra interval.
pub fn extrapolate_velocity(spline: &BSpline) -> Result<BSpline> {
    let n = spline.n_intervals();
    let dt = spline.interval_len();
    let t0 = spline.t0();
    let b = spline.t_end();
    let f_b = spline.eval(b)?;
    let slope = spline.derivative(1)?.eval(b)?;
    let mut samples = Vec::with_capacity(2 * n + 3);
    for i in 0..=2 * n {
        let t = t0 + 0.5 * dt * i as f64;
        samples.push((t, spline.eval(t)?));
    }
    for i in 1..=2 {
        let t = b + 0.5 * dt * i as f64;
        samples.push((t, f_b + slope * (t - b)));
    }
    fit_least_squares(&samples, t0, n + 1, dt)
}

/// Produces a belief usable now from a plan last heard `age` seconds ago,
/// reaching `tau` seconds further into the future: the plan is extended
/// until it covers `age + tau` past its end, then its domain is shifted to
/// start at the current time. The interval count is preserved.
pub fn impute_missing(
    last_known: &BSpline,
    age: f64,
    method: ExtrapolationMethod,
    tau: f64,
) -> Result<BSpline> {
    if !age.is_finite() || age < 0.0 {
        return Err(Error::Argument(format!("age must be >= 0, got {age}")));
    }
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::Argument(format!("tau must be >= 0, got {tau}")));
    }
    let s = age + tau;
    if s == 0.0 {
        return Ok(last_known.clone());
    }
    let dt = last_known.interval_len();
    let extensions = (s / dt - 1e-9).ceil().max(1.0) as usize;
    let mut out = last_known.clone();
    for _ in 0..extensions {
        out = extrapolate(&out, method)?;
    }
    out.shift_domain(s)
}

/// Shifts a just-received plan forward by the channel latency so its domain
/// lines up with the receiver's clock.
pub fn compensate_delay(
    belief: &BSpline,
    latency: f64,
    method: ExtrapolationMethod,
) -> Result<BSpline> {
    impute_missing(belief, latency, method, 0.0)
}
