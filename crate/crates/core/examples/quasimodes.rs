//! Extracting the least damped quasimode and checking the two a-priori
//! identities it must satisfy.

use damped_torus::damping::make_disk_damping;
use damped_torus::spectral2d::{
    apriori_identities, default_k_rule, quasimode_extract, StationaryOperator,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disk = make_disk_damping([0.0, 0.0], 1.0, 5.0)?;
    for h in [0.3, 0.25, 0.21] {
        let op = StationaryOperator::new(&disk, h, default_k_rule(h))?;
        let q = quasimode_extract(&op)?;
        let id = apriori_identities(&op, &q.u)?;
        let mass = q.u.norm().powi(2);
        println!(
            "h {h}: ||(P + iha)u|| = {:.3e}, h||a^1/2 u||^2 = {:.3e}, identity residual {:.1e}",
            q.residual,
            id.damping_lhs,
            id.residual(mass)
        );
    }
    Ok(())
}
