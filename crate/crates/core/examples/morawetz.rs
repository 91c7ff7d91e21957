//! Morawetz weights for a wide damped interval and the multiplier balance on a
//! smooth test function.

use damped_torus::oned::{
    band_limited_forcing, build_morawetz_weights, morawetz_balance, strip_samples,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 1024;
    let (h, delta) = (1e-3, 1.0 / 7.0);
    let interval = [(-2.5, 2.5)];
    let w = strip_samples(&interval, 5.0, n)?;
    let wts = build_morawetz_weights(&interval, h, delta, &[2.4], n)?;
    println!(
        "M = {:.4}, int Psi = {:.2e}, jump of Phi = {:.2e}, sup |Phi| = {:.4}",
        wts.m,
        wts.psi_integral(),
        wts.phi_jump(),
        wts.phi_sup
    );
    let v = band_limited_forcing(n, 8, 2);
    for lambda in [2.0, 3.3, 5.0] {
        let b = morawetz_balance(&wts, &v, lambda, h, &w);
        println!(
            "lambda {lambda}: lhs {:.4e}, constant {:.4}",
            b.lhs, b.constant
        );
    }
    Ok(())
}
