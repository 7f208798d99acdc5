//! The plan representation from the ground up: a clamped uniform cubic
//! B-spline over equal time intervals, evaluated, differentiated, and
//! slid forward in time as the controller steps.

use acoustic_dmpc::bspline::{ideal_line_coeffs, BSpline};

fn main() {
    // a vehicle holding 1 m/s for six 8 s steps: coefficients follow the
    // line pattern sigma + k * (0, 1/3, 1, 2, ..., n-1, n-1/3, n)
    let k = 8.0;
    let coeffs = ideal_line_coeffs(12.5, k, 6).unwrap();
    println!("line coefficients: {coeffs:?}");

    let plan = BSpline::new(0.0, 8.0, coeffs).unwrap();
    println!("domain [{}, {}], {} intervals", plan.t0(), plan.t_end(), plan.n_intervals());
    for t in [0.0, 4.0, 17.3, 48.0] {
        println!("sigma({t:>5}) = {:.4}", plan.eval(t).unwrap());
    }

    let speed = plan.derivative(1).unwrap();
    let accel = plan.derivative(2).unwrap();
    println!(
        "speed at 17.3 s: {:.6} m/s, acceleration: {:.2e} m/s^2",
        speed.eval(17.3).unwrap(),
        accel.eval(17.3).unwrap()
    );

    // one controller step later the covered interval is dropped; a
    // whole-interval shift is exact restriction
    let stepped = plan.shift_domain(8.0).unwrap();
    println!(
        "one step later: domain [{}, {}], starts at sigma = {:.4}",
        stepped.t0(),
        stepped.t_end(),
        stepped.eval(stepped.t0()).unwrap()
    );

    // fractional shifts refit on break points between the old ones
    let partial = plan.shift_domain(2.5).unwrap();
    println!(
        "2.5 s in: starts at sigma = {:.4} (the line gives {:.4})",
        partial.eval(partial.t0()).unwrap(),
        12.5 + 2.5
    );
}
