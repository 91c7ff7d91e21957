//! The averaging conjugation: generator size and the residual on
//! microlocalized probes, which should shrink like h^2.

use damped_torus::damping::make_disk_damping;
use damped_torus::harness::loglog_fit;
use damped_torus::pseudodiff::{build_generator, conjugation_residual, microlocalized_probe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = make_disk_damping([0.0, 0.0], 1.0, 5.0)?;
    let mut pts = Vec::new();
    for h in [0.2f64, 0.14, 0.1, 0.07, 0.05] {
        let k = (2.0 / h).ceil() as usize + 4;
        let g = build_generator(&a, h, k)?;
        let probe = microlocalized_probe(h, k);
        let r = conjugation_residual(&a, h, k, &probe)?;
        println!(
            "h {h:<5} K {k:<3} |G| <= {:.4}  residual {r:.4e}",
            g.norm_bound()
        );
        pts.push((h, r));
    }
    let fit = loglog_fit(&pts, None)?;
    println!("fitted order {:.3} (r2 {:.4})", fit.slope, fit.r2);
    Ok(())
}
