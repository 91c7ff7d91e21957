//! Eigenvalues of the truncated damped wave generator: all in the closed left
//! half plane, none touching the axis in the band.

use damped_torus::damping::{make_disk_damping, make_strip_damping};
use damped_torus::spectral2d::generator_spectrum;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disk = make_disk_damping([0.0, 0.0], 1.0, 5.0)?;
    let strip = make_strip_damping(&[(-1.0, 1.0)], 5.0)?;
    for d in [&disk, &strip] {
        let g = generator_spectrum(d, 12)?;
        println!(
            "{}: {} eigenvalues, max Re {:.2e}, min |Re| in band {}, alpha fit {}",
            d.name(),
            g.eigenvalues.len(),
            g.max_real,
            g.min_abs_real_in_band
                .map_or("none".into(), |v| format!("{v:.3e}")),
            g.alpha_fit().map_or("none".into(), |v| format!("{v:.3}"))
        );
    }
    Ok(())
}
