//! Closed-loop fleet simulation.
//!
//! One run wires everything together: each controller step starts by
//! pinning every agent's plan to its vehicle state, then the negotiation
//! windows play out in order. In every window each agent re-solves its
//! local QP, broadcasts one packet carrying a coded message per neighbor,
//! and at the window close folds in whatever arrived; meanwhile the
//! vehicles fly the window out following their freshest own plan. At the
//! step boundary plans and estimates advance one interval and the duals
//! restart.
//!
//! Determinism is a hard requirement: agents iterate in id order, channel
//! draws are consumed in a canonical order, and the disturbance generator
//! is separate from the channel generator, so a run is a pure function of
//! its configuration and seed.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{
    decode_coeffs, decode_payload, encode_coeffs, encode_payload, payload_bits, EncodedMessage,
    Payload, QuantScheme,
};
use crate::dmpc::{AgentState, HorizonOps, MpcParams};
use crate::error::{Error, Result};
use crate::mac::{Channel, MacConfig};
use crate::metrics::{
    cross_track_errors, evaluate, speed_errors, FleetSample, MetricsConfig, MetricsReport,
};
use crate::scenario::{FormationSpec, PathKind};

/// Double-integrator vehicle with a saturated PD-plus-feedforward follower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// Acceleration saturation, m/s^2.
    pub accel_max: f64,
    /// Position gain of the plan follower.
    pub kp: f64,
    /// Velocity gain of the plan follower.
    pub kd: f64,
    /// Bound of the uniform per-substep disturbance acceleration, m/s^2.
    pub disturbance_accel: f64,
    /// Nominal integration substep, seconds. The actual substep divides the
    /// negotiation window evenly.
    pub substep_target: f64,
    /// Bound of the uniform per-agent initial path-coordinate offset, m.
    pub initial_stagger: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            accel_max: 1.0,
            kp: 1.0,
            kd: 2.0,
            disturbance_accel: 0.02,
            substep_target: 0.1,
            initial_stagger: 0.2,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.accel_max.is_finite() && self.accel_max > 0.0) {
            return Err(Error::Config("accel_max must be > 0".into()));
        }
        if !(self.kp.is_finite() && self.kp > 0.0 && self.kd.is_finite() && self.kd >= 0.0) {
            return Err(Error::Config("follower gains must be positive".into()));
        }
        if !(self.disturbance_accel.is_finite() && self.disturbance_accel >= 0.0) {
            return Err(Error::Config("disturbance_accel must be >= 0".into()));
        }
        if !(self.substep_target.is_finite() && self.substep_target > 0.0) {
            return Err(Error::Config("substep_target must be > 0".into()));
        }
        if !(self.initial_stagger.is_finite() && self.initial_stagger >= 0.0) {
            return Err(Error::Config("initial_stagger must be >= 0".into()));
        }
        Ok(())
    }
}

/// Everything one run needs.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub params: MpcParams,
    pub mac: MacConfig,
    pub vehicle: VehicleParams,
    pub path: PathKind,
    pub formation: FormationSpec,
    pub metrics: MetricsConfig,
    /// Coefficient quantization for the exchanged messages. `None`
    /// exchanges full-precision vectors out of band.
    pub quant: Option<QuantScheme>,
    pub duration: f64,
    pub seed: u64,
}

impl SimSetup {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.mac.validate()?;
        self.vehicle.validate()?;
        self.path.validate()?;
        self.formation.validate()?;
        self.metrics.validate()?;
        if let Some(q) = &self.quant {
            q.validate()?;
        }
        if self.mac.fleet_size != self.formation.fleet_size() {
            return Err(Error::Config(format!(
                "channel is sized for {} agents but the formation has {}",
                self.mac.fleet_size,
                self.formation.fleet_size()
            )));
        }
        if (self.mac.step_period - self.params.step_period).abs() > 1e-12 {
            return Err(Error::Config(
                "channel and planner disagree on the step period".into(),
            ));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config("duration must be > 0".into()));
        }
        Ok(())
    }

    /// The residual scale of the broadcast messages: with consensus weight
    /// rho they ride at `(2 rho - 1)` times the plan slope per interval.
    pub fn message_k_ref(&self) -> f64 {
        (2.0 * self.params.rho - 1.0) * self.params.v_target * self.params.step_period
    }

    /// The near-lossless exchange scheme used as a fidelity reference.
    pub fn reference_quant(&self) -> Result<QuantScheme> {
        QuantScheme::new(3, 53, 63, self.message_k_ref(), (2.0f64).powi(-40))
    }
}

/// Aggregate outcome of one run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub samples: Vec<FleetSample>,
    pub report: MetricsReport,
    /// Codec saturation events across the whole run.
    pub saturation_events: u64,
    pub packets_sent: u64,
    pub links_lost: u64,
    pub links_total: u64,
    /// Fraction of links lost, window misses included.
    pub observed_loss: f64,
    /// Packet size in bits; zero for the out-of-band exchange.
    pub payload_bits: usize,
    /// Per-agent channel load in bits per second.
    pub bit_rate: f64,
    /// Largest coefficient gap between any two plans at the end of the run.
    pub final_plan_gap: f64,
}

fn clamp(x: f64, lim: f64) -> f64 {
    x.clamp(-lim, lim)
}

/// Runs the closed loop for `setup.duration` seconds.
pub fn run(setup: &SimSetup) -> Result<RunResult> {
    setup.validate()?;
    let v = setup.mac.fleet_size;
    let params = &setup.params;
    let ops = HorizonOps::new(params.horizon_intervals, params.step_period)?;
    let mut channel = Channel::new(setup.mac.loss_prob, setup.seed)?;
    // disturbance and stagger draws must not disturb the channel sequence
    let mut nature = ChaCha8Rng::seed_from_u64(setup.seed ^ 0x9E37_79B9_7F4A_7C15);

    let mut fleet: Vec<AgentState> = Vec::with_capacity(v);
    for id in 0..v as u32 {
        let stagger = if setup.vehicle.initial_stagger > 0.0 {
            nature.gen_range(-setup.vehicle.initial_stagger..setup.vehicle.initial_stagger)
        } else {
            0.0
        };
        let sigma0 = setup.formation.sigma_offsets[id as usize] + stagger;
        fleet.push(AgentState::new(id, v, sigma0, 0.0, params)?);
    }
    let mut sigma: Vec<f64> = fleet.iter().map(|a| a.sigma).collect();
    let mut sigma_dot: Vec<f64> = vec![params.v_target; v];

    let window = setup.mac.slot_len();
    let substeps = ((window / setup.vehicle.substep_target).round() as usize).max(1);
    let h = window / substeps as f64;
    let n_steps = (setup.duration / params.step_period).ceil() as usize;

    let mut samples = Vec::with_capacity(n_steps * setup.mac.iters_per_step * substeps + 1);
    samples.push(FleetSample { t: 0.0, sigma: sigma.clone(), sigma_dot: sigma_dot.clone() });

    let mut saturation_events = 0u64;
    let mut t = 0.0;

    for step in 0..n_steps {
        let step_start = step as f64 * params.step_period;
        let txs = setup.mac.transmissions(step_start);
        for iter in 0..setup.mac.iters_per_step {
            for a in fleet.iter_mut() {
                a.update_plan(&ops, params)?;
            }
            // everyone broadcasts; deliveries land at the window close
            let mut inbox: Vec<Vec<(u32, Vec<f64>)>> = vec![Vec::new(); v];
            for tx in txs.iter().filter(|tx| tx.iter == iter) {
                let sender = &fleet[tx.sender as usize];
                let record = channel.broadcast(tx, v);
                let mut raw: Vec<(u32, Vec<f64>)> = Vec::with_capacity(v - 1);
                for j in (0..v as u32).filter(|&j| j != tx.sender) {
                    raw.push((j, sender.build_message(j, params)?));
                }
                let delivered: Vec<(u32, Vec<f64>)> = match &setup.quant {
                    Some(scheme) => {
                        let mut per_neighbor: Vec<(u32, EncodedMessage)> =
                            Vec::with_capacity(v - 1);
                        for (j, w) in &raw {
                            let msg = encode_coeffs(w, scheme)?;
                            saturation_events += msg.saturated as u64;
                            per_neighbor.push((*j, msg));
                        }
                        let payload = Payload { sender: tx.sender, per_neighbor };
                        let bytes = encode_payload(
                            &payload,
                            scheme,
                            v,
                            params.horizon_intervals,
                        )?;
                        let back = decode_payload(
                            &bytes,
                            scheme,
                            v,
                            params.horizon_intervals,
                        )?;
                        back.per_neighbor
                            .iter()
                            .map(|(j, msg)| Ok((*j, decode_coeffs(msg, scheme)?)))
                            .collect::<Result<_>>()?
                    }
                    None => raw,
                };
                for (j, w) in delivered {
                    if !record.detect_loss(j)? {
                        inbox[j as usize].push((tx.sender, w));
                    }
                }
            }
            for (agent, msgs) in fleet.iter_mut().zip(inbox.into_iter()) {
                for (sender, w) in msgs {
                    agent.consume_message(sender, &w, params)?;
                }
            }
            // fly the window out on the freshest plans
            for _ in 0..substeps {
                let mut accel = Vec::with_capacity(v);
                for (i, a) in fleet.iter().enumerate() {
                    let r = a.plan.eval(t)?;
                    let rd = a.plan.derivative(1)?.eval(t)?;
                    let rdd = a.plan.derivative(2)?.eval(t)?;
                    let u = rdd + setup.vehicle.kp * (r - sigma[i])
                        + setup.vehicle.kd * (rd - sigma_dot[i]);
                    let mut u = clamp(u, setup.vehicle.accel_max);
                    if setup.vehicle.disturbance_accel > 0.0 {
                        u += nature.gen_range(
                            -setup.vehicle.disturbance_accel..setup.vehicle.disturbance_accel,
                        );
                    }
                    accel.push(u);
                }
                for i in 0..v {
                    sigma[i] += sigma_dot[i] * h + 0.5 * accel[i] * h * h;
                    sigma_dot[i] += accel[i] * h;
                }
                t += h;
                samples.push(FleetSample {
                    t,
                    sigma: sigma.clone(),
                    sigma_dot: sigma_dot.clone(),
                });
            }
        }
        for (i, a) in fleet.iter_mut().enumerate() {
            a.advance_step(params)?;
            a.sigma = sigma[i];
            a.sigma_dot = sigma_dot[i];
        }
    }

    let sigma_offsets = &setup.formation.sigma_offsets;
    let centered: Vec<FleetSample> = samples
        .iter()
        .map(|s| FleetSample {
            t: s.t,
            sigma: s
                .sigma
                .iter()
                .zip(sigma_offsets.iter())
                .map(|(x, o)| x - o)
                .collect(),
            sigma_dot: s.sigma_dot.clone(),
        })
        .collect();
    let report = evaluate(&centered, &setup.path, params.v_target, &setup.metrics)?;

    let mut final_plan_gap = 0.0f64;
    for i in 0..v {
        for j in i + 1..v {
            let gap = fleet[i]
                .plan
                .coeffs()
                .iter()
                .zip(fleet[j].plan.coeffs().iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            final_plan_gap = final_plan_gap.max(gap);
        }
    }

    let (bits, rate) = match &setup.quant {
        Some(q) => {
            let bits = payload_bits(v, q.w1_bits, q.w_fi(), params.horizon_intervals);
            (
                bits,
                bits as f64 * setup.mac.iters_per_step as f64 / params.step_period,
            )
        }
        None => (0, 0.0),
    };

    Ok(RunResult {
        samples,
        report,
        saturation_events,
        packets_sent: channel.packets_sent,
        links_lost: channel.links_lost,
        links_total: channel.links_total,
        observed_loss: channel.loss_fraction(),
        payload_bits: bits,
        bit_rate: rate,
        final_plan_gap,
    })
}

/// One point of a loss sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub loss_prob: f64,
    pub seed: u64,
    pub result: RunResult,
}

/// Runs the same setup across loss probabilities and seeds. Runs execute in
/// parallel; the output order is loss-major, seed-minor regardless.
pub fn sweep(base: &SimSetup, losses: &[f64], seeds: &[u64]) -> Result<Vec<SweepPoint>> {
    use rayon::prelude::*;
    if losses.is_empty() || seeds.is_empty() {
        return Err(Error::Argument("sweep needs at least one loss and one seed".into()));
    }
    let jobs: Vec<(f64, u64)> = losses
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    jobs.par_iter()
        .map(|&(loss_prob, seed)| {
            let mut setup = base.clone();
            setup.mac.loss_prob = loss_prob;
            setup.seed = seed;
            let result = run(&setup)?;
            Ok(SweepPoint { loss_prob, seed, result })
        })
        .collect()
}

fn fmt_f(x: f64) -> String {
    // fixed scientific form keeps the files byte-identical across runs
    format!("{x:.10e}")
}

/// Per-substep fleet state with derived errors.
/// Schema line first, then a header row, then data.
pub fn timeseries_csv(result: &RunResult, setup: &SimSetup) -> Result<String> {
    let mut out = String::new();
    out.push_str("# schema: timeseries/v1\n");
    out.push_str("t,agent,sigma,sigma_dot,cross_track_err,speed_err\n");
    let offs = &setup.formation.sigma_offsets;
    for s in &result.samples {
        let centered: Vec<f64> = s
            .sigma
            .iter()
            .zip(offs.iter())
            .map(|(x, o)| x - o)
            .collect();
        let (_, cross) = cross_track_errors(&setup.path, &centered)?;
        let speed = speed_errors(&s.sigma_dot, setup.params.v_target);
        for a in 0..s.sigma.len() {
            let _ = writeln!(
                out,
                "{},{a},{},{},{},{}",
                fmt_f(s.t),
                fmt_f(s.sigma[a]),
                fmt_f(s.sigma_dot[a]),
                fmt_f(cross[a]),
                fmt_f(speed[a]),
            );
        }
    }
    Ok(out)
}

/// Windowed verdicts of one run.
pub fn windows_csv(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str("# schema: windows/v1\n");
    out.push_str("start,end,cross_track_mse,speed_mse,steady,pass_cross_track,pass_speed\n");
    for w in &report.windows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f(w.start),
            fmt_f(w.end),
            fmt_f(w.cross_track_mse),
            fmt_f(w.speed_mse),
            w.steady,
            w.pass_cross_track,
            w.pass_speed,
        );
    }
    out
}

/// Key-value summary of one run.
pub fn summary_csv(result: &RunResult, setup: &SimSetup) -> String {
    let mut out = String::new();
    out.push_str("# schema: summary/v1\n");
    out.push_str("key,value\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k},{v}");
    };
    kv("fleet_size", setup.mac.fleet_size.to_string());
    kv("duration", fmt_f(setup.duration));
    kv("seed", setup.seed.to_string());
    kv("mac_scheme", format!("{:?}", setup.mac.scheme).to_lowercase());
    kv("loss_prob", fmt_f(setup.mac.loss_prob));
    kv("observed_loss", fmt_f(result.observed_loss));
    kv("packets_sent", result.packets_sent.to_string());
    kv("links_lost", result.links_lost.to_string());
    kv("payload_bits", result.payload_bits.to_string());
    kv("bit_rate", fmt_f(result.bit_rate));
    kv("saturation_events", result.saturation_events.to_string());
    kv("steady_windows", result.report.steady_windows.to_string());
    kv("mean_cross_track_mse", fmt_f(result.report.mean_cross_track_mse));
    kv("mean_speed_mse", fmt_f(result.report.mean_speed_mse));
    kv("all_windows_pass", result.report.all_pass.to_string());
    kv("final_plan_gap", fmt_f(result.final_plan_gap));
    out
}

/// Loss-sweep overview, one row per point.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::new();
    out.push_str("# schema: sweep/v1\n");
    out.push_str(
        "loss_prob,seed,observed_loss,mean_cross_track_mse,mean_speed_mse,all_windows_pass,saturation_events\n",
    );
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f(p.loss_prob),
            p.seed,
            fmt_f(p.result.observed_loss),
            fmt_f(p.result.report.mean_cross_track_mse),
            fmt_f(p.result.report.mean_speed_mse),
            p.result.report.all_pass,
            p.result.saturation_events,
        );
    }
    out
}

/// Writes a string to a file, creating parent directories as needed.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::Parse(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, content)
        .map_err(|e| Error::Parse(format!("cannot write {}: {e}", path.display())))
}

/// A small but fully wired default setup: the shallow-survey scenario on a
/// time-division channel with coded exchange.
pub fn default_setup() -> SimSetup {
    use crate::mac::MacScheme;
    use crate::scenario::lawnmower_line_defaults;
    let (path, formation) = lawnmower_line_defaults();
    let params = MpcParams::default();
    let mac = MacConfig {
        scheme: MacScheme::Tdma,
        fleet_size: formation.fleet_size(),
        step_period: params.step_period,
        iters_per_step: 3,
        prop_delay: 0.05,
        overhead: 0.3,
        loss_prob: 0.0,
    };
    let k_ref = (2.0 * params.rho - 1.0) * params.v_target * params.step_period;
    let quant = QuantScheme::new(3, 7, 32, k_ref, 1e-4).ok();
    SimSetup {
        params,
        mac,
        vehicle: VehicleParams::default(),
        path,
        formation,
        metrics: MetricsConfig::default(),
        quant,
        duration: 500.0,
        seed: 1,
    }
}
