//! Formation quality metrics.
//!
//! Two errors matter: how far each vehicle's world position strays from
//! where the fleet consensus would put it (cross-formation error, meters),
//! and how far its path speed strays from the commanded survey speed
//! (meters per second). Both are squared, averaged over fixed-length time
//! windows per agent, and judged by the worst agent in each window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::PathKind;

/// One synchronized reading of the whole fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetSample {
    pub t: f64,
    /// Path coordinate per agent.
    pub sigma: Vec<f64>,
    /// Path speed per agent.
    pub sigma_dot: Vec<f64>,
}

/// Window length, thresholds, and the startup interval to ignore.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Averaging window, seconds.
    pub window_len: f64,
    /// Worst-agent mean squared cross-formation error allowed per window,
    /// square meters.
    pub cross_track_mse_limit: f64,
    /// Worst-agent mean squared speed error allowed per window, square
    /// meters per square second.
    pub speed_mse_limit: f64,
    /// Windows starting before this time do not count toward the verdict.
    pub transient_cutoff: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            window_len: 10.0,
            cross_track_mse_limit: 0.25,
            speed_mse_limit: 0.0025,
            transient_cutoff: 100.0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_len.is_finite() && self.window_len > 0.0) {
            return Err(Error::Config("window_len must be > 0".into()));
        }
        if !(self.cross_track_mse_limit > 0.0 && self.speed_mse_limit > 0.0) {
            return Err(Error::Config("mse limits must be > 0".into()));
        }
        if !(self.transient_cutoff.is_finite() && self.transient_cutoff >= 0.0) {
            return Err(Error::Config("transient_cutoff must be >= 0".into()));
        }
        Ok(())
    }
}

/// Distance of each agent's path point from the fleet-mean path point.
/// Returns the mean coordinate and the per-agent distances.
pub fn cross_track_errors(path: &PathKind, sigmas: &[f64]) -> Result<(f64, Vec<f64>)> {
    if sigmas.is_empty() {
        return Err(Error::Length("no agents in sample".into()));
    }
    let mean = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
    let center = path.position(mean);
    let errs = sigmas
        .iter()
        .map(|&s| {
            let p = path.position(s);
            ((p[0] - center[0]).powi(2)
                + (p[1] - center[1]).powi(2)
                + (p[2] - center[2]).powi(2))
            .sqrt()
        })
        .collect();
    Ok((mean, errs))
}

/// Absolute deviation of each agent's path speed from the survey speed.
pub fn speed_errors(sigma_dots: &[f64], v_target: f64) -> Vec<f64> {
    sigma_dots.iter().map(|&v| (v - v_target).abs()).collect()
}

/// One averaging window's verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowVerdict {
    pub start: f64,
    pub end: f64,
    /// Worst agent's mean squared cross-formation error.
    pub cross_track_mse: f64,
    /// Worst agent's mean squared speed error.
    pub speed_mse: f64,
    /// Whether the window starts after the transient cutoff.
    pub steady: bool,
    pub pass_cross_track: bool,
    pub pass_speed: bool,
}

/// Windowed judgment of a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub windows: Vec<WindowVerdict>,
    /// All post-transient windows meet both limits.
    pub all_pass: bool,
    /// Mean over post-transient windows of the worst-agent cross-formation
    /// MSE.
    pub mean_cross_track_mse: f64,
    /// Mean over post-transient windows of the worst-agent speed MSE.
    pub mean_speed_mse: f64,
    pub steady_windows: usize,
}

/// Cuts the sample series into contiguous windows of `window_len` (by
/// sample count at the series cadence), computes worst-agent MSEs, and
/// compares against the limits. A trailing partial window is dropped.
pub fn evaluate(
    samples: &[FleetSample],
    path: &PathKind,
    v_target: f64,
    cfg: &MetricsConfig,
) -> Result<MetricsReport> {
    cfg.validate()?;
    if samples.len() < 2 {
        return Err(Error::Length("need at least two samples".into()));
    }
    let agents = samples[0].sigma.len();
    if agents == 0 {
        return Err(Error::Length("no agents in sample".into()));
    }
    let dt = samples[1].t - samples[0].t;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Argument("samples must be in increasing time order".into()));
    }
    for w in samples.windows(2) {
        if (w[1].t - w[0].t - dt).abs() > 1e-6 * dt.max(1.0) {
            return Err(Error::Argument(format!(
                "uneven sample cadence near t = {}",
                w[1].t
            )));
        }
    }
    for s in samples {
        if s.sigma.len() != agents || s.sigma_dot.len() != agents {
            return Err(Error::Length(format!(
                "agent count changes at t = {}",
                s.t
            )));
        }
    }
    let per_window = (cfg.window_len / dt).round() as usize;
    if per_window < 1 {
        return Err(Error::Argument(format!(
            "window of {} s holds no samples at cadence {dt}",
            cfg.window_len
        )));
    }
    let mut windows = Vec::new();
    let mut idx = 0;
    while idx + per_window <= samples.len() {
        let chunk = &samples[idx..idx + per_window];
        let mut cross_acc = vec![0.0f64; agents];
        let mut speed_acc = vec![0.0f64; agents];
        for s in chunk {
            let (_, errs) = cross_track_errors(path, &s.sigma)?;
            for (acc, e) in cross_acc.iter_mut().zip(errs.iter()) {
                *acc += e * e;
            }
            for (acc, e) in speed_acc.iter_mut().zip(speed_errors(&s.sigma_dot, v_target)) {
                *acc += e * e;
            }
        }
        let cross_mse = cross_acc
            .iter()
            .map(|a| a / per_window as f64)
            .fold(0.0f64, f64::max);
        let speed_mse = speed_acc
            .iter()
            .map(|a| a / per_window as f64)
            .fold(0.0f64, f64::max);
        let start = chunk[0].t;
        windows.push(WindowVerdict {
            start,
            end: chunk[per_window - 1].t + dt,
            cross_track_mse: cross_mse,
            speed_mse,
            steady: start >= cfg.transient_cutoff,
            pass_cross_track: cross_mse <= cfg.cross_track_mse_limit,
            pass_speed: speed_mse <= cfg.speed_mse_limit,
        });
        idx += per_window;
    }
    let steady_windows = windows.iter().filter(|w| w.steady).count();
    let all_pass = steady_windows > 0
        && windows
            .iter()
            .filter(|w| w.steady)
            .all(|w| w.pass_cross_track && w.pass_speed);
    let mean = |f: fn(&WindowVerdict) -> f64| {
        if steady_windows == 0 {
            f64::NAN
        } else {
            windows.iter().filter(|w| w.steady).map(f).sum::<f64>() / steady_windows as f64
        }
    };
    let mean_cross_track_mse = mean(|w| w.cross_track_mse);
    let mean_speed_mse = mean(|w| w.speed_mse);
    Ok(MetricsReport {
        windows,
        all_pass,
        mean_cross_track_mse,
        mean_speed_mse,
        steady_windows,
    })
}

/// Ratio of two mean MSEs with a small floor, so that a pair of numerically
/// zero errors compares as equal instead of dividing zero by zero.
pub fn degradation_factor(candidate: f64, baseline: f64) -> f64 {
    candidate.max(1e-12) / baseline.max(1e-12)
}
