//! Distributed plan negotiation.
//!
//! Every agent plans the fleet's shared path coordinate over a receding
//! horizon as a cubic spline, pinned to its own measured position and speed
//! at the horizon start. Agreement between agents is negotiated by consensus
//! iterations: each agent solves a small equality-constrained QP that trades
//! speed tracking and smoothness against staying close to its per-neighbor
//! consensus estimates, then broadcasts a combination of its plan and those
//! estimates. Receivers fold arrived messages into their estimates and dual
//! variables; lost packets simply leave the estimates where they were.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bspline::{ideal_line_coeffs, BSpline};
use crate::error::{Error, Result};
use crate::imputation::{impute_missing, ExtrapolationMethod};

/// Planner knobs shared by the whole fleet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcParams {
    /// Planning horizon in controller steps (spline intervals).
    pub horizon_intervals: usize,
    /// Controller step period, seconds. One spline interval per step.
    pub step_period: f64,
    /// Commanded path speed, meters per second.
    pub v_target: f64,
    /// Weight on squared speed tracking error.
    pub w_track: f64,
    /// Weight on squared path acceleration.
    pub w_smooth: f64,
    /// Consensus penalty weight.
    pub rho: f64,
    /// How beliefs are continued when plans go stale.
    pub extrapolation: ExtrapolationMethod,
}

impl Default for MpcParams {
    fn default() -> Self {
        Self {
            horizon_intervals: 6,
            step_period: 8.0,
            v_target: 1.0,
            w_track: 1.0,
            w_smooth: 0.1,
            rho: 1.0,
            extrapolation: ExtrapolationMethod::Velocity,
        }
    }
}

impl MpcParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_intervals < 4 {
            return Err(Error::Config(format!(
                "horizon must be at least 4 steps, got {}",
                self.horizon_intervals
            )));
        }
        if !(self.step_period.is_finite() && self.step_period > 0.0) {
            return Err(Error::Config("step_period must be > 0".into()));
        }
        if !(self.v_target.is_finite() && self.v_target > 0.0) {
            return Err(Error::Config("v_target must be > 0".into()));
        }
        if !(self.w_track.is_finite() && self.w_track > 0.0) {
            return Err(Error::Config("w_track must be > 0".into()));
        }
        if !(self.w_smooth.is_finite() && self.w_smooth >= 0.0) {
            return Err(Error::Config("w_smooth must be >= 0".into()));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::Config("rho must be > 0".into()));
        }
        Ok(())
    }

    /// Coefficient increment per interval of a plan moving at the commanded
    /// speed.
    pub fn k_per_interval(&self) -> f64 {
        self.v_target * self.step_period
    }
}

/// Precomputed horizon operators: first and second derivative collocation
/// matrices at the quadrature nodes, the quadrature weights, and the
/// initial-condition rows. All in horizon-relative time, so one instance
/// serves every agent and every step.
pub struct HorizonOps {
    n: usize,
    dt: f64,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    weights: DVector<f64>,
    times: Vec<f64>,
    pins: DMatrix<f64>,
}

/// 4-point Gauss-Legendre rule on [-1, 1]; exact through degree 7, which
/// covers products of spline derivatives with room to spare.
const GL_NODES: [f64; 4] = [
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
];
const GL_WEIGHTS: [f64; 4] = [
    0.3478548451374538,
    0.6521451548625461,
    0.6521451548625461,
    0.3478548451374538,
];

impl HorizonOps {
    pub fn new(horizon_intervals: usize, step_period: f64) -> Result<Self> {
        if horizon_intervals < 1 {
            return Err(Error::Argument("horizon needs at least one interval".into()));
        }
        if !(step_period.is_finite() && step_period > 0.0) {
            return Err(Error::Argument("step_period must be > 0".into()));
        }
        let n = horizon_intervals;
        let dt = step_period;
        let ncoef = n + 3;
        let mut times = Vec::with_capacity(4 * n);
        let mut weights = DVector::zeros(4 * n);
        for i in 0..n {
            for (q, x) in GL_NODES.iter().enumerate() {
                times.push((i as f64 + 0.5 * (x + 1.0)) * dt);
                weights[4 * i + q] = GL_WEIGHTS[q] * dt / 2.0;
            }
        }
        let mut d1 = DMatrix::zeros(4 * n, ncoef);
        let mut d2 = DMatrix::zeros(4 * n, ncoef);
        let mut pins = DMatrix::zeros(2, ncoef);
        for p in 0..ncoef {
            let mut c = vec![0.0; ncoef];
            c[p] = 1.0;
            let unit = BSpline::new(0.0, dt, c)?;
            let du1 = unit.derivative(1)?;
            let du2 = unit.derivative(2)?;
            for (row, t) in times.iter().enumerate() {
                d1[(row, p)] = du1.eval(*t)?;
                d2[(row, p)] = du2.eval(*t)?;
            }
            pins[(0, p)] = unit.eval(0.0)?;
            pins[(1, p)] = du1.eval(0.0)?;
        }
        Ok(Self { n, dt, d1, d2, weights, times, pins })
    }

    pub fn horizon_intervals(&self) -> usize {
        self.n
    }

    pub fn step_period(&self) -> f64 {
        self.dt
    }

    pub fn n_coeffs(&self) -> usize {
        self.n + 3
    }

    /// Quadrature node times, horizon-relative.
    pub fn quad_times(&self) -> &[f64] {
        &self.times
    }

    /// Quadrature weights matching [`Self::quad_times`].
    pub fn quad_weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Speed tracking plus smoothness cost of a coefficient vector.
    pub fn stage_cost(&self, coeffs: &[f64], params: &MpcParams) -> Result<f64> {
        if coeffs.len() != self.n_coeffs() {
            return Err(Error::Length(format!(
                "expected {} coefficients, got {}",
                self.n_coeffs(),
                coeffs.len()
            )));
        }
        let c = DVector::from_column_slice(coeffs);
        let v1 = &self.d1 * &c;
        let v2 = &self.d2 * &c;
        let mut track = 0.0;
        let mut smooth = 0.0;
        for q in 0..self.weights.len() {
            track += self.weights[q] * (v1[q] - params.v_target).powi(2);
            smooth += self.weights[q] * v2[q] * v2[q];
        }
        Ok(params.w_track * track + params.w_smooth * smooth)
    }

    /// Solves the pinned local QP. `penalties` holds one `(z, u)` coefficient
    /// pair per consensus neighbor. With no penalties this is the
    /// single-agent optimum for the given initial condition.
    pub fn solve_pinned(
        &self,
        params: &MpcParams,
        sigma: f64,
        sigma_dot: f64,
        penalties: &[(&[f64], &[f64])],
    ) -> Result<Vec<f64>> {
        params.validate()?;
        let ncoef = self.n_coeffs();
        for (z, u) in penalties {
            if z.len() != ncoef || u.len() != ncoef {
                return Err(Error::Length(
                    "consensus vectors do not match the horizon".into(),
                ));
            }
        }
        let w = &self.weights;
        let mut h = DMatrix::zeros(ncoef, ncoef);
        let mut g = DVector::zeros(ncoef);
        // h = 2 w_t D1' W D1 + 2 w_s D2' W D2 + rho m I
        for a in 0..ncoef {
            for b in a..ncoef {
                let mut acc = 0.0;
                for q in 0..w.len() {
                    acc += w[q]
                        * (2.0 * params.w_track * self.d1[(q, a)] * self.d1[(q, b)]
                            + 2.0 * params.w_smooth * self.d2[(q, a)] * self.d2[(q, b)]);
                }
                h[(a, b)] = acc;
                h[(b, a)] = acc;
            }
        }
        for a in 0..ncoef {
            h[(a, a)] += params.rho * penalties.len() as f64;
            let mut acc = 0.0;
            for q in 0..w.len() {
                acc += 2.0 * params.w_track * w[q] * self.d1[(q, a)] * params.v_target;
            }
            for (z, u) in penalties {
                acc += params.rho * (z[a] - u[a]);
            }
            g[a] = acc;
        }
        // KKT system with the two initial-condition rows
        let dim = ncoef + 2;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        kkt.view_mut((0, 0), (ncoef, ncoef)).copy_from(&h);
        for r in 0..2 {
            for p in 0..ncoef {
                kkt[(ncoef + r, p)] = self.pins[(r, p)];
                kkt[(p, ncoef + r)] = self.pins[(r, p)];
            }
        }
        rhs.rows_mut(0, ncoef).copy_from(&g);
        rhs[ncoef] = sigma;
        rhs[ncoef + 1] = sigma_dot;
        let sol = kkt
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Solve("planning KKT system is singular".into()))?;
        let residual = (&kkt * &sol - &rhs).norm();
        if residual > 1e-8 * rhs.norm().max(1.0) {
            return Err(Error::Solve(format!(
                "planning KKT residual {residual} too large"
            )));
        }
        Ok(sol.rows(0, ncoef).iter().copied().collect())
    }
}

/// The ideal single-agent plan: leave `sigma` at the commanded speed.
pub fn initial_plan(sigma: f64, t_now: f64, params: &MpcParams) -> Result<BSpline> {
    let coeffs = ideal_line_coeffs(sigma, params.k_per_interval(), params.horizon_intervals)?;
    BSpline::new(t_now, params.step_period, coeffs)
}

/// What all agents would agree on with perfect communication: the same QP
/// without any consensus penalty. Serves as the optimality reference for
/// the negotiated plans.
pub fn centralized_plan(
    ops: &HorizonOps,
    params: &MpcParams,
    sigma: f64,
    sigma_dot: f64,
) -> Result<Vec<f64>> {
    ops.solve_pinned(params, sigma, sigma_dot, &[])
}

/// One agent's negotiation state.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: u32,
    /// Own plan, pinned to the latest vehicle measurement.
    pub plan: BSpline,
    /// Per-neighbor consensus estimates, same domain as the plan.
    pub z: BTreeMap<u32, BSpline>,
    /// Per-neighbor scaled dual variables.
    pub duals: BTreeMap<u32, Vec<f64>>,
    /// Latest measured path coordinate and speed.
    pub sigma: f64,
    pub sigma_dot: f64,
}

impl AgentState {
    /// A fresh agent at path coordinate `sigma`, believing everyone plans
    /// the same nominal-speed line it does.
    pub fn new(
        id: u32,
        fleet_size: usize,
        sigma: f64,
        t_now: f64,
        params: &MpcParams,
    ) -> Result<Self> {
        params.validate()?;
        if id as usize >= fleet_size {
            return Err(Error::Id(format!("agent {id} out of range 0..{fleet_size}")));
        }
        let plan = initial_plan(sigma, t_now, params)?;
        let ncoef = plan.coeffs().len();
        let mut z = BTreeMap::new();
        let mut duals = BTreeMap::new();
        for j in (0..fleet_size as u32).filter(|&j| j != id) {
            z.insert(j, plan.clone());
            duals.insert(j, vec![0.0; ncoef]);
        }
        Ok(Self {
            id,
            plan,
            z,
            duals,
            sigma,
            sigma_dot: params.v_target,
        })
    }

    /// Re-solves the local QP against the current consensus estimates.
    pub fn update_plan(&mut self, ops: &HorizonOps, params: &MpcParams) -> Result<()> {
        let penalties: Vec<(&[f64], &[f64])> = self
            .z
            .iter()
            .map(|(j, zs)| (zs.coeffs(), self.duals[j].as_slice()))
            .collect();
        let coeffs = ops.solve_pinned(params, self.sigma, self.sigma_dot, &penalties)?;
        self.plan = BSpline::new(self.plan.t0(), self.plan.interval_len(), coeffs)?;
        Ok(())
    }

    /// The coefficient vector this agent broadcasts toward `neighbor`:
    /// twice-weighted own plan minus the current estimate for that edge.
    pub fn build_message(&self, neighbor: u32, params: &MpcParams) -> Result<Vec<f64>> {
        let z = self
            .z
            .get(&neighbor)
            .ok_or_else(|| Error::Id(format!("no consensus edge to agent {neighbor}")))?;
        Ok(self
            .plan
            .coeffs()
            .iter()
            .zip(z.coeffs().iter())
            .map(|(c, zc)| 2.0 * params.rho * c - zc)
            .collect())
    }

    /// Folds a received message into the consensus estimate and dual for
    /// the sender's edge.
    pub fn consume_message(
        &mut self,
        sender: u32,
        w: &[f64],
        params: &MpcParams,
    ) -> Result<()> {
        let ncoef = self.plan.coeffs().len();
        if w.len() != ncoef {
            return Err(Error::Length(format!(
                "message carries {} coefficients, expected {ncoef}",
                w.len()
            )));
        }
        let z = self
            .z
            .get_mut(&sender)
            .ok_or_else(|| Error::Id(format!("no consensus edge to agent {sender}")))?;
        let plan = self.plan.coeffs();
        // Undo the sender's encoding against this edge's estimate to recover
        // its plan, then set the new estimate to the midpoint of the two
        // plans. When both ends hold the same estimate this is exactly the
        // shared-variable consensus update, so the negotiation inherits its
        // fixed point: all plans meet at the joint optimum. An estimate
        // mismatch between the two ends feeds back scaled by 1/(2 rho), so
        // rho >= 0.5 keeps startup and packet-loss transients damped.
        let z_new: Vec<f64> = w
            .iter()
            .zip(plan.iter())
            .zip(z.coeffs().iter())
            .map(|((wi, ci), zi)| 0.5 * ((wi + zi) / (2.0 * params.rho) + ci))
            .collect();
        let dual = self.duals.get_mut(&sender).unwrap();
        for ((d, c), zn) in dual.iter_mut().zip(plan.iter()).zip(z_new.iter()) {
            *d += c - zn;
        }
        *z = BSpline::new(self.plan.t0(), self.plan.interval_len(), z_new)?;
        Ok(())
    }

    /// Carries the negotiation state across a step boundary: plan and
    /// estimates advance one interval, duals restart cold. The caller pins
    /// `sigma` and `sigma_dot` from the vehicle afterwards.
    pub fn advance_step(&mut self, params: &MpcParams) -> Result<()> {
        let ts = params.step_period;
        self.plan = impute_missing(&self.plan, 0.0, params.extrapolation, ts)?;
        for z in self.z.values_mut() {
            *z = impute_missing(z, 0.0, params.extrapolation, ts)?;
        }
        for d in self.duals.values_mut() {
            d.iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(())
    }
}
