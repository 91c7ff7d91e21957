//! The reduced 1D problem: solving it, tagging the energy regime, the weighted
//! identity, and the gain of the uniform estimate across regimes.

use damped_torus::field::Spectral1D;
use damped_torus::oned::{
    band_limited_forcing, classify_regime, delta_of, disk_average_samples, disk_theta,
    max_gain_over_energies, regime_energy_grid, solve_reduced, weighted_identity_residual,
    KappaProfile, ReducedProblem1D,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 1024;
    let theta = disk_theta(5.0);
    let delta = delta_of(theta);
    let w = disk_average_samples(1.0, 5.0, n)?;
    let kappa = KappaProfile::Cosine {
        mean: 1.0,
        amplitude: 0.3,
    }
    .samples(n);
    let r = band_limited_forcing(n, 8, 1);
    let weight: Vec<f64> = Spectral1D::new(n)
        .nodes()
        .iter()
        .map(|x| 1.0 + 0.5 * x.cos())
        .collect();

    for h in [0.05, 0.02, 0.01] {
        let p = ReducedProblem1D::new(h, h.powf(1.1), w.clone(), kappa.clone(), r.clone(), theta)?;
        let v = solve_reduced(&p)?;
        let tag = classify_regime(h, p.energy(), 1.0, delta);
        let energies = regime_energy_grid(h, 1.0, delta, 4);
        println!(
            "h {h}: E {:.3e} is {:?}, weighted identity {:.1e}, max gain {:.3e}",
            p.energy(),
            tag.regime,
            weighted_identity_residual(&p, &v, &weight),
            max_gain_over_energies(&p, &energies)?
        );
    }
    Ok(())
}
