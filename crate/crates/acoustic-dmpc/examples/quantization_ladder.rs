//! How many fraction bits does a coefficient residual need? Push the same
//! plan through the coder at every width. The error bound halves per bit;
//! the measured distortion follows it with some wobble, since individual
//! rounding errors can cancel at one width and not the next.

use acoustic_dmpc::bspline::{ideal_line_coeffs, BSpline};
use acoustic_dmpc::codec::{decode_coeffs, encode_coeffs, QuantScheme};

fn main() {
    let k = 8.0;
    let mut coeffs = ideal_line_coeffs(40.0, k, 6).unwrap();
    // bend the line so the residuals have something to say
    for (j, c) in coeffs.iter_mut().enumerate() {
        *c += 1.8 * (0.9 * j as f64).sin();
    }
    let original = BSpline::new(0.0, 1.0, coeffs.clone()).unwrap();

    println!("f bits  payload residual grid    max distortion");
    for f in 2..=10u32 {
        let scheme = QuantScheme::new(3, f, 32, k, 1e-3).unwrap();
        let msg = encode_coeffs(&coeffs, &scheme).unwrap();
        let decoded = BSpline::new(0.0, 1.0, decode_coeffs(&msg, &scheme).unwrap()).unwrap();
        let mut worst = 0.0f64;
        for i in 0..=300 {
            let x = 6.0 * i as f64 / 300.0;
            worst = worst.max((original.eval(x).unwrap() - decoded.eval(x).unwrap()).abs());
        }
        println!(
            "{f:>6}  [{:>7.3}, {:>6.3}] step {:<9.5} {worst:.5} m",
            scheme.grid_min(),
            scheme.grid_max(),
            scheme.step()
        );
    }
    println!("\nthe bound per coefficient delta is (k/3) * 2^-(f+1)");
}
