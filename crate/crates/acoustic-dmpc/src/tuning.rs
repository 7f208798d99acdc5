//! Channel budget tuning.
//!
//! The question the tuner answers: how few bits per second keep the
//! formation inside its error budget? The search walks one knob at a time
//! (fraction bits, negotiation windows per step, step period, horizon)
//! through small candidate lists, re-simulating the closed loop for each
//! candidate and keeping the cheapest configuration that still passes every
//! error window. Every evaluation lands in an audit trail so a tuning run
//! can be reconstructed afterwards.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::codec::{payload_bits, QuantScheme};
use crate::error::{Error, Result};
use crate::sim::{run, SimSetup};

/// Per-agent channel load of a configuration, bits per second: one packet
/// per negotiation window.
pub fn data_rate(
    fleet_size: usize,
    w1_bits: u32,
    w_fi: u32,
    horizon_intervals: usize,
    iters_per_step: usize,
    step_period: f64,
) -> f64 {
    payload_bits(fleet_size, w1_bits, w_fi, horizon_intervals) as f64
        * iters_per_step as f64
        / step_period
}

/// Candidate values per knob. Order matters only for tie-breaking; the
/// search always prefers the lowest feasible rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneSpace {
    pub f_bits: Vec<u32>,
    pub iters_per_step: Vec<usize>,
    pub step_period: Vec<f64>,
    pub horizon_intervals: Vec<usize>,
}

impl Default for TuneSpace {
    fn default() -> Self {
        Self {
            f_bits: vec![4, 5, 6, 7, 8, 10, 12],
            iters_per_step: vec![1, 2, 3, 4, 5],
            step_period: vec![4.0, 6.0, 8.0, 10.0, 12.0],
            horizon_intervals: vec![4, 5, 6, 8],
        }
    }
}

impl TuneSpace {
    pub fn validate(&self) -> Result<()> {
        if self.f_bits.is_empty()
            || self.iters_per_step.is_empty()
            || self.step_period.is_empty()
            || self.horizon_intervals.is_empty()
        {
            return Err(Error::Argument("every tuning knob needs candidates".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOptions {
    /// Simulated seconds per evaluation. Shorter than a production run but
    /// long enough for several steady windows.
    pub sim_duration: f64,
    /// Hard cap on closed-loop evaluations.
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self { sim_duration: 250.0, max_evals: 60, seed: 1 }
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub f_bits: u32,
    pub iters_per_step: usize,
    pub step_period: f64,
    pub horizon_intervals: usize,
    pub bit_rate: f64,
    /// Channel timing works at all.
    pub mac_ok: bool,
    /// Channel works and every steady window passed.
    pub feasible: bool,
    pub mean_cross_track_mse: f64,
    pub mean_speed_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub best: Evaluation,
    /// Every distinct evaluation in the order it first ran.
    pub audit: Vec<Evaluation>,
    pub evals_used: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key(u32, usize, u64, usize);

struct Search<'a> {
    base: &'a SimSetup,
    opts: &'a TuneOptions,
    cache: BTreeMap<Key, Evaluation>,
    audit: Vec<Evaluation>,
    evals: usize,
}

impl<'a> Search<'a> {
    fn candidate_setup(
        &self,
        f_bits: u32,
        iters: usize,
        ts: f64,
        hp: usize,
    ) -> Result<SimSetup> {
        let mut s = self.base.clone();
        s.params.horizon_intervals = hp;
        s.params.step_period = ts;
        s.mac.step_period = ts;
        s.mac.iters_per_step = iters;
        s.duration = self.opts.sim_duration;
        s.seed = self.opts.seed;
        let q = s.quant.as_ref().expect("tuner requires a coded exchange");
        let k_ref = (2.0 * s.params.rho - 1.0) * s.params.v_target * ts;
        s.quant = Some(QuantScheme::new(q.i_bits, f_bits, q.w1_bits, k_ref, q.m_lsb)?);
        Ok(s)
    }

    fn evaluate(&mut self, f_bits: u32, iters: usize, ts: f64, hp: usize) -> Result<Evaluation> {
        let key = Key(f_bits, iters, ts.to_bits(), hp);
        if let Some(e) = self.cache.get(&key) {
            return Ok(e.clone());
        }
        if self.evals >= self.opts.max_evals {
            return Err(Error::Infeasible(format!(
                "tuning budget of {} evaluations exhausted",
                self.opts.max_evals
            )));
        }
        self.evals += 1;
        let setup = self.candidate_setup(f_bits, iters, ts, hp)?;
        let q = setup.quant.as_ref().unwrap();
        let rate = data_rate(
            setup.mac.fleet_size,
            q.w1_bits,
            q.w_fi(),
            hp,
            iters,
            ts,
        );
        let eval = match setup.validate() {
            Err(_) => Evaluation {
                f_bits,
                iters_per_step: iters,
                step_period: ts,
                horizon_intervals: hp,
                bit_rate: rate,
                mac_ok: false,
                feasible: false,
                mean_cross_track_mse: f64::NAN,
                mean_speed_mse: f64::NAN,
            },
            Ok(()) => {
                let r = run(&setup)?;
                Evaluation {
                    f_bits,
                    iters_per_step: iters,
                    step_period: ts,
                    horizon_intervals: hp,
                    bit_rate: rate,
                    mac_ok: true,
                    feasible: r.report.all_pass,
                    mean_cross_track_mse: r.report.mean_cross_track_mse,
                    mean_speed_mse: r.report.mean_speed_mse,
                }
            }
        };
        self.cache.insert(key, eval.clone());
        self.audit.push(eval.clone());
        Ok(eval)
    }
}

fn nearest<T: Copy, F: Fn(T) -> f64>(candidates: &[T], target: f64, as_f: F) -> T {
    *candidates
        .iter()
        .min_by(|a, b| {
            let da = (as_f(**a) - target).abs();
            let db = (as_f(**b) - target).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap()
}

/// Coordinate descent over the candidate grid: sweep one knob at a time
/// from `start`, move to the lowest-rate feasible candidate on that axis,
/// and repeat until a full cycle changes nothing. `eval` judges candidates;
/// an `Error::Infeasible` from it means the evaluation budget is spent and
/// ends the search with whatever has been found so far. Returns the best
/// feasible evaluation seen anywhere, or `None`.
pub fn descend(
    space: &TuneSpace,
    start: (u32, usize, f64, usize),
    eval: &mut dyn FnMut(u32, usize, f64, usize) -> Result<Evaluation>,
) -> Result<Option<Evaluation>> {
    let (mut cur_f, mut cur_iters, mut cur_ts, mut cur_hp) = start;
    let mut best: Option<Evaluation> = None;
    let consider = |best: &mut Option<Evaluation>, e: &Evaluation| {
        if e.feasible && best.as_ref().map_or(true, |b| e.bit_rate < b.bit_rate) {
            *best = Some(e.clone());
        }
    };

    'outer: for _cycle in 0..8 {
        let before = (cur_f, cur_iters, cur_ts.to_bits(), cur_hp);
        for axis in 0..4 {
            let mut axis_best: Option<Evaluation> = None;
            let candidates: Vec<(u32, usize, f64, usize)> = match axis {
                0 => space.f_bits.iter().map(|&f| (f, cur_iters, cur_ts, cur_hp)).collect(),
                1 => space
                    .iters_per_step
                    .iter()
                    .map(|&it| (cur_f, it, cur_ts, cur_hp))
                    .collect(),
                2 => space.step_period.iter().map(|&ts| (cur_f, cur_iters, ts, cur_hp)).collect(),
                _ => space
                    .horizon_intervals
                    .iter()
                    .map(|&hp| (cur_f, cur_iters, cur_ts, hp))
                    .collect(),
            };
            for (f, it, ts, hp) in candidates {
                let e = match eval(f, it, ts, hp) {
                    Ok(e) => e,
                    Err(Error::Infeasible(_)) => break 'outer,
                    Err(e) => return Err(e),
                };
                consider(&mut best, &e);
                if e.feasible
                    && axis_best.as_ref().map_or(true, |b| e.bit_rate < b.bit_rate)
                {
                    axis_best = Some(e);
                }
            }
            if let Some(e) = axis_best {
                cur_f = e.f_bits;
                cur_iters = e.iters_per_step;
                cur_ts = e.step_period;
                cur_hp = e.horizon_intervals;
            }
        }
        if before == (cur_f, cur_iters, cur_ts.to_bits(), cur_hp) {
            break;
        }
    }
    Ok(best)
}

/// Finds the cheapest feasible configuration by coordinate descent from the
/// base setup's values. Fails with an infeasibility error when nothing in
/// the reachable part of the space passes.
pub fn tune(base: &SimSetup, space: &TuneSpace, opts: &TuneOptions) -> Result<TuneOutcome> {
    space.validate()?;
    let quant = base
        .quant
        .as_ref()
        .ok_or_else(|| Error::Argument("tuning requires a coded exchange".into()))?;
    if !(opts.sim_duration.is_finite() && opts.sim_duration > 0.0) {
        return Err(Error::Argument("sim_duration must be > 0".into()));
    }
    let mut search = Search { base, opts, cache: BTreeMap::new(), audit: Vec::new(), evals: 0 };

    let start = (
        nearest(&space.f_bits, quant.f_bits as f64, |x| x as f64),
        nearest(&space.iters_per_step, base.mac.iters_per_step as f64, |x| x as f64),
        nearest(&space.step_period, base.params.step_period, |x| x),
        nearest(&space.horizon_intervals, base.params.horizon_intervals as f64, |x| {
            x as f64
        }),
    );

    let best = descend(space, start, &mut |f, it, ts, hp| search.evaluate(f, it, ts, hp))?;
    match best {
        Some(b) => Ok(TuneOutcome { best: b, audit: search.audit, evals_used: search.evals }),
        None => Err(Error::Infeasible(format!(
            "no candidate configuration met the error limits within {} evaluations",
            search.evals
        ))),
    }
}

/// The audit trail, one row per distinct evaluation in run order.
pub fn audit_csv(outcome: &TuneOutcome) -> String {
    let mut out = String::new();
    out.push_str("# schema: tuning/v1\n");
    out.push_str(
        "f_bits,iters_per_step,step_period,horizon_intervals,bit_rate,mac_ok,feasible,\
         mean_cross_track_mse,mean_speed_mse,best\n",
    );
    for e in &outcome.audit {
        let is_best = *e == outcome.best;
        let _ = writeln!(
            out,
            "{},{},{:.10e},{},{:.10e},{},{},{:.10e},{:.10e},{}",
            e.f_bits,
            e.iters_per_step,
            e.step_period,
            e.horizon_intervals,
            e.bit_rate,
            e.mac_ok,
            e.feasible,
            e.mean_cross_track_mse,
            e.mean_speed_mse,
            is_best,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::default_setup;

    #[test]
    fn data_rate_matches_the_hand_count() {
        // 6 agents, 32-bit anchor, 10-bit residuals, horizon 6:
        // 5 * (32 + 10 * 8) + 3 = 563 bits, three windows per 8 s step
        let r = data_rate(6, 32, 10, 6, 3, 8.0);
        assert!((r - 563.0 * 3.0 / 8.0).abs() < 1e-12);
    }

    fn small_opts() -> TuneOptions {
        TuneOptions { sim_duration: 120.0, max_evals: 20, seed: 1 }
    }

    fn small_base() -> SimSetup {
        let mut s = default_setup();
        s.metrics.transient_cutoff = 60.0;
        s
    }

    #[test]
    fn tiny_space_returns_the_cheapest_feasible_candidate() {
        let base = small_base();
        let space = TuneSpace {
            f_bits: vec![6, 7],
            iters_per_step: vec![3],
            step_period: vec![8.0],
            horizon_intervals: vec![6],
        };
        let out = tune(&base, &space, &small_opts()).unwrap();
        assert!(out.best.feasible);
        for e in &out.audit {
            if e.feasible {
                assert!(out.best.bit_rate <= e.bit_rate + 1e-12);
            }
        }
        assert!(out.evals_used <= 20);
        assert_eq!(out.audit.len(), out.evals_used);
    }

    #[test]
    fn repeated_candidates_are_cached_not_recounted() {
        let base = small_base();
        let space = TuneSpace {
            f_bits: vec![7],
            iters_per_step: vec![3],
            step_period: vec![8.0],
            horizon_intervals: vec![6],
        };
        let out = tune(&base, &space, &small_opts()).unwrap();
        // one distinct candidate, several visits
        assert_eq!(out.evals_used, 1);
        assert_eq!(out.audit.len(), 1);
    }

    #[test]
    fn impossible_limits_surface_as_infeasibility() {
        let mut base = small_base();
        base.metrics.cross_track_mse_limit = 1e-15;
        base.metrics.speed_mse_limit = 1e-15;
        let space = TuneSpace {
            f_bits: vec![7],
            iters_per_step: vec![3],
            step_period: vec![8.0],
            horizon_intervals: vec![6],
        };
        assert!(matches!(
            tune(&base, &space, &small_opts()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn out_of_band_base_cannot_be_tuned() {
        let mut base = small_base();
        base.quant = None;
        assert!(matches!(
            tune(&base, &TuneSpace::default(), &small_opts()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn audit_trail_has_a_schema_line_and_marks_the_best() {
        let base = small_base();
        let space = TuneSpace {
            f_bits: vec![6, 7],
            iters_per_step: vec![3],
            step_period: vec![8.0],
            horizon_intervals: vec![6],
        };
        let out = tune(&base, &space, &small_opts()).unwrap();
        let csv = audit_csv(&out);
        assert!(csv.starts_with("# schema: tuning/v1\n"));
        assert!(csv.lines().any(|l| l.ends_with(",true")));
    }
}
