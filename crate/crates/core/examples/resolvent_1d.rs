//! Maximizing the 1D resolvent over lambda and fitting its growth in 1/h.
//! A short, coarse sweep; the full one uses 4096 nodes down to h = 1e-3.

use damped_torus::oned::{delta_of, resolvent_sweep_1d, strip_samples, strip_theta, LambdaSearch};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gamma = 2.0;
    let n = 1024;
    let w = strip_samples(&[(-0.5, 0.5)], gamma, n)?;
    let hs: Vec<f64> = (0..4).map(|j| 10f64.powf(-1.5 - 0.25 * j as f64)).collect();
    let sweep = resolvent_sweep_1d(
        &w,
        &hs,
        delta_of(strip_theta(gamma)),
        1.0 / (gamma + 2.0),
        (0.02, 0.03),
        &LambdaSearch::default(),
    )?;
    for p in &sweep.peaks {
        println!(
            "h {:.4e}: max at lambda {:.4} = {:.4e} (resonance seed: {})",
            p.h, p.lambda, p.norm, p.from_seed
        );
    }
    if let Some(r) = sweep.norms.report {
        println!(
            "norm exponent {:.4} vs {:.4}, r2 {:.4}",
            r.slope, r.predicted, r.r2
        );
    }
    Ok(())
}
