//! Damped wave evolution of a trapped packet: energy, the dissipation identity
//! and a late-time decay fit.

use damped_torus::damping::make_disk_damping;
use damped_torus::timedomain::{
    dissipation_identity_residual, measure_decay, predicted_alpha, simulate, step_bound,
    trapped_packet, Integrator,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = 16;
    let disk = make_disk_damping([0.0, 0.0], 1.0, 5.0)?;
    let s0 = trapped_packet(k)?;
    println!(
        "K {k}: step bound {:.4}, initial energy {:.4e}",
        step_bound(k),
        s0.energy
    );

    for dt in [0.02, 0.01] {
        let integ = Integrator::new(&disk, k, dt)?;
        let (traj, end) = simulate(&integ, &s0, (2.0 / dt) as usize)?;
        println!(
            "dt {dt}: E(2) = {:.6e}, dissipation identity residual {:.2e}",
            end.energy,
            dissipation_identity_residual(&traj)
        );
    }

    let rec = measure_decay(&disk, &s0, 100.0, 0.05, 20)?;
    println!(
        "E(100) = {:.4e}, fitted alpha on {:?}: {} (large-time prediction {:.4}), decreasing {}",
        rec.final_energy(),
        rec.window,
        rec.alpha.map_or("none".into(), |v| format!("{v:.4}")),
        predicted_alpha(5.0).0,
        rec.strictly_decreasing
    );
    Ok(())
}
