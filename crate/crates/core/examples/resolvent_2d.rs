//! Resolvent norms of P_h + i h a on the torus: the undamped closed form,
//! Krylov against dense SVD, and the windowed peak that avoids lattice
//! resonances.

use damped_torus::damping::{make_disk_damping, DampingProfile};
use damped_torus::harness::run::undamped_closed_form;
use damped_torus::spectral2d::{
    averaged_peak_candidates, default_k_rule, resolvent_norm, windowed_peak, KrylovOptions,
    PeakSearch, ResolventMethod, StationaryOperator,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = 0.29;
    let k = default_k_rule(h);
    let free = StationaryOperator::new(&DampingProfile::zero(), h, k)?;
    let r = resolvent_norm(&free, ResolventMethod::DenseSvd)?;
    println!(
        "undamped h {h}: {:.12e} vs closed form {:.12e}",
        r.norm,
        undamped_closed_form(h, k)
    );

    let disk = make_disk_damping([0.0, 0.0], 1.0, 5.0)?;
    for h in [0.3, 0.25, 0.2] {
        let op = StationaryOperator::new(&disk, h, 20)?;
        let dense = resolvent_norm(&op, ResolventMethod::DenseSvd)?;
        let kry = resolvent_norm(&op, ResolventMethod::Krylov)?;
        println!(
            "h {h}: dense {:.6e}, Krylov {:.6e} ({} iterations)",
            dense.norm, kry.norm, kry.iterations
        );
    }

    let h = 0.1;
    let k = default_k_rule(h);
    let search = PeakSearch::default();
    for c in averaged_peak_candidates(&disk, h, k, search.width)?
        .iter()
        .take(3)
    {
        println!(
            "candidate h' {:.6} (k_y {}), predicted height {:.3e}",
            c.h, c.ky, c.predicted
        );
    }
    let p = windowed_peak(&disk, h, k, search, KrylovOptions::default())?;
    println!(
        "peak over [h/(1+1.5h), h]: {:.4e} at h' {:.6} ({} solves)",
        p.value, p.h_peak, p.evaluations
    );
    Ok(())
}
