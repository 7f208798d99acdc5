//! The water-column scenario: six vehicles in an octahedron climbing an
//! ascending helix, each pair on its own frequency band, 20% loss.

use acoustic_dmpc::mac::{MacConfig, MacScheme};
use acoustic_dmpc::scenario::helix_octahedron_defaults;
use acoustic_dmpc::sim::{default_setup, run, summary_csv};

fn main() {
    let (path, formation) = helix_octahedron_defaults();
    let mut setup = default_setup();
    setup.mac = MacConfig {
        scheme: MacScheme::Fdma,
        fleet_size: formation.fleet_size(),
        step_period: setup.params.step_period,
        iters_per_step: 3,
        prop_delay: 0.05,
        overhead: 0.3,
        loss_prob: 0.2,
    };
    setup.path = path;
    setup.formation = formation;

    let result = run(&setup).unwrap();
    print!("{}", summary_csv(&result, &setup));
    println!(
        "\nsix agents put {} bits on the air per packet at {:.1} bit/s each",
        result.payload_bits, result.bit_rate
    );
}
