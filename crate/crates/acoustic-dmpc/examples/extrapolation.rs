//! What the loop does when a packet never arrives: extend the last known
//! plan past its end and pretend that is what the neighbor sent.
//!
//! Two continuations are available. The polynomial one keeps the final
//! cubic going, so any terminal curvature is amplified into the future.
//! The tangent one assumes the neighbor keeps its current speed. For real
//! trajectories that brake or turn, the tangent guess ages much better.

use acoustic_dmpc::bspline::BSpline;
use acoustic_dmpc::imputation::{extrapolate_jerk, extrapolate_velocity, impute_missing};
use acoustic_dmpc::imputation::ExtrapolationMethod;

fn main() {
    // a plan that is still decelerating at its end
    let coeffs = vec![0.0, 2.6, 7.5, 14.8, 20.9, 25.2, 27.4, 28.1, 28.3];
    let plan = BSpline::new(0.0, 8.0, coeffs).unwrap();
    let b = plan.t_end();
    let v_end = plan.derivative(1).unwrap().eval(b).unwrap();
    println!("plan ends at sigma = {:.2} moving {:.3} m/s", plan.eval(b).unwrap(), v_end);

    let tangent = extrapolate_velocity(&plan).unwrap();
    let cubic = extrapolate_jerk(&plan).unwrap();
    println!("\n t+     tangent   cubic    constant-speed guess");
    for i in 1..=4 {
        let dt = 2.0 * i as f64;
        let guess = plan.eval(b).unwrap() + v_end * dt;
        println!(
            "{:>4}  {:>8.3} {:>8.3}  {:>8.3}",
            dt,
            tangent.eval(b + dt).unwrap(),
            cubic.eval(b + dt).unwrap(),
            guess
        );
    }

    // the full imputation: the plan was heard 9 s ago and must cover 4 s of
    // future, so it is extended and then shifted to the receiver's clock
    let belief = impute_missing(&plan, 9.0, ExtrapolationMethod::Velocity, 4.0).unwrap();
    println!(
        "\nimputed belief starts at t0 = {:.1} with sigma = {:.3}",
        belief.t0(),
        belief.eval(belief.t0()).unwrap()
    );
}
