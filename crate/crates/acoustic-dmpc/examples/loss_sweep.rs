//! Where does the loop give out? Sweep the loss probability with a few
//! seeds each and tabulate the post-transient error statistics.

use acoustic_dmpc::sim::{default_setup, sweep};

fn main() {
    let setup = default_setup();
    let losses = [0.0, 0.2, 0.4, 0.6, 0.8, 0.9];
    let seeds = [1u64, 2, 3];

    let points = sweep(&setup, &losses, &seeds).unwrap();
    println!("loss  seed  observed   cross mse    speed mse    verdict");
    for p in &points {
        println!(
            "{:>4.0}%  {:>4}  {:>7.1}%  {:>10.4e}  {:>10.4e}  {}",
            p.loss_prob * 100.0,
            p.seed,
            p.result.observed_loss * 100.0,
            p.result.report.mean_cross_track_mse,
            p.result.report.mean_speed_mse,
            if p.result.report.all_pass { "ok" } else { "over limit" }
        );
    }
}
