//! Medium access for the acoustic broadcast channel.
//!
//! Each controller step of length `step_period` is divided into
//! `iters_per_step` negotiation windows. Within a window every agent
//! broadcasts its packet once: time-division access staggers the agents
//! across the window, frequency-division lets them all transmit at the
//! window start on separate bands. A packet is useless unless it has fully
//! arrived (propagation plus transmission overhead) before the window
//! closes, so the configuration is rejected outright when the timing cannot
//! work. Losses are independent per sender-receiver pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacScheme {
    Tdma,
    Fdma,
}

/// Channel access timing for one fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacConfig {
    pub scheme: MacScheme,
    pub fleet_size: usize,
    /// Controller step period in seconds.
    pub step_period: f64,
    /// Negotiation windows per controller step.
    pub iters_per_step: usize,
    /// One-way acoustic propagation delay across the formation, seconds.
    pub prop_delay: f64,
    /// Per-packet transmission and processing overhead, seconds.
    pub overhead: f64,
    /// Independent per-link packet loss probability.
    pub loss_prob: f64,
}

impl MacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fleet_size < 2 {
            return Err(Error::Config(format!(
                "fleet size must be >= 2, got {}",
                self.fleet_size
            )));
        }
        if !(self.step_period.is_finite() && self.step_period > 0.0) {
            return Err(Error::Config("step_period must be > 0".into()));
        }
        if self.iters_per_step < 1 {
            return Err(Error::Config("iters_per_step must be >= 1".into()));
        }
        if !(self.prop_delay.is_finite() && self.prop_delay >= 0.0) {
            return Err(Error::Config("prop_delay must be >= 0".into()));
        }
        if !(self.overhead.is_finite() && self.overhead >= 0.0) {
            return Err(Error::Config("overhead must be >= 0".into()));
        }
        if !(self.loss_prob >= 0.0 && self.loss_prob <= 1.0) {
            return Err(Error::Config(format!(
                "loss_prob must be in [0, 1], got {}",
                self.loss_prob
            )));
        }
        let budget = match self.scheme {
            MacScheme::Tdma => self.slot_len() / self.fleet_size as f64,
            MacScheme::Fdma => self.slot_len(),
        };
        if budget <= self.prop_delay + self.overhead {
            return Err(Error::Config(format!(
                "packet air time {} does not fit the {:?} share {budget}",
                self.prop_delay + self.overhead,
                self.scheme
            )));
        }
        Ok(())
    }

    /// Length of one negotiation window.
    pub fn slot_len(&self) -> f64 {
        self.step_period / self.iters_per_step as f64
    }

    /// Transmission start time of `agent` in window `iter` of the step
    /// beginning at `step_start`.
    pub fn tx_time(&self, step_start: f64, iter: usize, agent: u32) -> f64 {
        let window = step_start + iter as f64 * self.slot_len();
        match self.scheme {
            MacScheme::Tdma => {
                window + agent as f64 * self.slot_len() / self.fleet_size as f64
            }
            MacScheme::Fdma => window,
        }
    }

    /// End of window `iter`: packets not fully arrived by then are useless.
    pub fn window_end(&self, step_start: f64, iter: usize) -> f64 {
        step_start + (iter + 1) as f64 * self.slot_len()
    }

    /// All transmissions of one controller step, ordered by window, then
    /// transmission time, then sender id.
    pub fn transmissions(&self, step_start: f64) -> Vec<Transmission> {
        let mut out = Vec::with_capacity(self.iters_per_step * self.fleet_size);
        for iter in 0..self.iters_per_step {
            for sender in 0..self.fleet_size as u32 {
                let tx_time = self.tx_time(step_start, iter, sender);
                out.push(Transmission {
                    iter,
                    sender,
                    tx_time,
                    arrival_time: tx_time + self.prop_delay + self.overhead,
                    window_end: self.window_end(step_start, iter),
                });
            }
        }
        out
    }
}

/// One scheduled broadcast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub iter: usize,
    pub sender: u32,
    pub tx_time: f64,
    pub arrival_time: f64,
    pub window_end: f64,
}

impl Transmission {
    pub fn in_window(&self) -> bool {
        self.arrival_time <= self.window_end
    }
}

/// Outcome of one broadcast: a delivery flag per receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastRecord {
    pub sender: u32,
    /// Whether the packet arrived before its window closed. A late packet
    /// is lost for everyone regardless of the per-link draws.
    pub in_window: bool,
    /// Per-link delivery flags, receivers in ascending id order.
    pub delivered: Vec<(u32, bool)>,
}

impl BroadcastRecord {
    /// Whether `receiver` failed to obtain this packet.
    pub fn detect_loss(&self, receiver: u32) -> Result<bool> {
        if receiver == self.sender {
            return Err(Error::Id(format!(
                "agent {receiver} does not receive its own broadcast"
            )));
        }
        let flag = self
            .delivered
            .iter()
            .find(|(id, _)| *id == receiver)
            .map(|(_, ok)| *ok)
            .ok_or_else(|| Error::Id(format!("receiver {receiver} not in fleet")))?;
        Ok(!self.in_window || !flag)
    }
}

/// Seeded erasure channel. Draws are consumed in a canonical order (one per
/// receiver, ascending, per broadcast), so runs with the same seed see the
/// same losses regardless of how results are inspected.
pub struct Channel {
    loss_prob: f64,
    rng: ChaCha8Rng,
    pub packets_sent: u64,
    pub links_lost: u64,
    pub links_total: u64,
}

impl Channel {
    pub fn new(loss_prob: f64, seed: u64) -> Result<Self> {
        if !(loss_prob >= 0.0 && loss_prob <= 1.0) {
            return Err(Error::Config(format!(
                "loss_prob must be in [0, 1], got {loss_prob}"
            )));
        }
        Ok(Self {
            loss_prob,
            rng: ChaCha8Rng::seed_from_u64(seed),
            packets_sent: 0,
            links_lost: 0,
            links_total: 0,
        })
    }

    /// Performs the per-link draws for one broadcast. `gen() >= loss_prob`
    /// delivers, which keeps the endpoints exact: probability 0 never loses
    /// and probability 1 always does.
    pub fn broadcast(&mut self, tx: &Transmission, fleet_size: usize) -> BroadcastRecord {
        self.packets_sent += 1;
        let mut delivered = Vec::with_capacity(fleet_size - 1);
        for receiver in (0..fleet_size as u32).filter(|&r| r != tx.sender) {
            let ok = self.rng.gen::<f64>() >= self.loss_prob;
            self.links_total += 1;
            if !ok || !tx.in_window() {
                self.links_lost += 1;
            }
            delivered.push((receiver, ok));
        }
        BroadcastRecord {
            sender: tx.sender,
            in_window: tx.in_window(),
            delivered,
        }
    }

    /// Observed per-link loss fraction so far, window misses included.
    pub fn loss_fraction(&self) -> f64 {
        if self.links_total == 0 {
            0.0
        } else {
            self.links_lost as f64 / self.links_total as f64
        }
    }
}
