//! One controller step on the wire: when each agent keys up, when its
//! packet lands, and which negotiation window it makes.

use acoustic_dmpc::mac::{MacConfig, MacScheme};

fn main() {
    for scheme in [MacScheme::Tdma, MacScheme::Fdma] {
        let mac = MacConfig {
            scheme,
            fleet_size: 4,
            step_period: 8.0,
            iters_per_step: 3,
            prop_delay: 0.05,
            overhead: 0.3,
            loss_prob: 0.0,
        };
        mac.validate().unwrap();
        println!("{scheme:?}: {} windows of {:.3} s", mac.iters_per_step, mac.slot_len());
        println!("window  sender  tx at    lands    deadline  in time");
        for tx in mac.transmissions(0.0) {
            println!(
                "{:>6}  {:>6}  {:>6.3}  {:>7.3}  {:>8.3}  {}",
                tx.iter,
                tx.sender,
                tx.tx_time,
                tx.arrival_time,
                tx.window_end,
                if tx.in_window() { "yes" } else { "NO" }
            );
        }
        println!();
    }
}
