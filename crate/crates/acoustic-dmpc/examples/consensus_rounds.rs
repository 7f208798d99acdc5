//! Three agents negotiating a common progress plan with nothing but
//! broadcast coefficient vectors. Each round: local solve, exchange,
//! estimate update. The disagreement dies geometrically.

use acoustic_dmpc::bspline::BSpline;
use acoustic_dmpc::dmpc::{centralized_plan, AgentState, HorizonOps, MpcParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let p = MpcParams { horizon_intervals: 4, step_period: 2.0, ..MpcParams::default() };
    let ops = HorizonOps::new(p.horizon_intervals, p.step_period).unwrap();
    let n = 3usize;

    let mut fleet: Vec<AgentState> = (0..n as u32)
        .map(|id| {
            let mut a = AgentState::new(id, n, 0.0, 0.0, &p).unwrap();
            a.sigma_dot = 0.7; // everyone is running slow, the plans must agree on how slow
            a
        })
        .collect();

    // start the negotiation from deliberately wrong beliefs
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..n {
        for j in i + 1..n {
            let noise: Vec<f64> = (0..ops.n_coeffs()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            for (a, b) in [(i, j), (j, i)] {
                let z = fleet[a].z.get_mut(&(b as u32)).unwrap();
                let c: Vec<f64> =
                    z.coeffs().iter().zip(noise.iter()).map(|(x, e)| x + e).collect();
                *z = BSpline::new(z.t0(), z.interval_len(), c).unwrap();
            }
        }
    }

    println!("round   plan disagreement   cost vs joint solve");
    let joint = centralized_plan(&ops, &p, 0.0, 0.7).unwrap();
    let j_best = n as f64 * ops.stage_cost(&joint, &p).unwrap();
    for round in 1..=30 {
        for a in fleet.iter_mut() {
            a.update_plan(&ops, &p).unwrap();
        }
        let mut inbox: Vec<Vec<(u32, Vec<f64>)>> = vec![Vec::new(); n];
        for a in fleet.iter() {
            for j in (0..n as u32).filter(|&j| j != a.id) {
                inbox[j as usize].push((a.id, a.build_message(j, &p).unwrap()));
            }
        }
        for (r, msgs) in fleet.iter_mut().zip(inbox.into_iter()) {
            for (sender, w) in msgs {
                r.consume_message(sender, &w, &p).unwrap();
            }
        }
        let mut gap = 0.0f64;
        for a in 0..n {
            for b in a + 1..n {
                for (x, y) in fleet[a].plan.coeffs().iter().zip(fleet[b].plan.coeffs()) {
                    gap = gap.max((x - y).abs());
                }
            }
        }
        let cost: f64 = fleet.iter().map(|a| ops.stage_cost(a.plan.coeffs(), &p).unwrap()).sum();
        if round <= 10 || round % 5 == 0 {
            println!("{round:>5}   {gap:>17.3e}   {:.6}", cost / j_best);
        }
    }
}
