//! Find the cheapest channel configuration that still tracks: coordinate
//! descent over residual width, windows per step, step period, and
//! horizon, judging each candidate by a closed-loop run.

use acoustic_dmpc::tuning::{audit_csv, data_rate, tune, TuneOptions, TuneSpace};
use acoustic_dmpc::sim::default_setup;

fn main() {
    let base = default_setup();
    let q = base.reference_quant().unwrap();
    let reference_rate = data_rate(
        base.mac.fleet_size,
        q.w1_bits,
        q.w_fi(),
        base.params.horizon_intervals,
        base.mac.iters_per_step,
        base.params.step_period,
    );

    let opts = TuneOptions { sim_duration: 250.0, max_evals: 40, seed: 1 };
    let outcome = tune(&base, &TuneSpace::default(), &opts).unwrap();

    print!("{}", audit_csv(&outcome));
    let b = &outcome.best;
    println!(
        "\nbest after {} evaluations: {} fraction bits, {} windows per {} s step, horizon {}",
        outcome.evals_used, b.f_bits, b.iters_per_step, b.step_period, b.horizon_intervals
    );
    println!(
        "{:.1} bit/s against the near-lossless reference's {:.1} bit/s: {:.1}x cheaper",
        b.bit_rate,
        reference_rate,
        reference_rate / b.bit_rate
    );
}
