//! Disk and strip dampings, their Hölder class and distance to the boundary.

use damped_torus::damping::{check_class_membership, make_disk_damping, make_strip_damping};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disk = make_disk_damping([0.0, 0.0], 1.0, 5.0)?;
    let strip = make_strip_damping(&[(-1.0, 1.0)], 5.0)?;
    for d in [&disk, &strip] {
        println!("{}", d.name());
        for x in [0.0, 0.5, 0.9, 0.99, 1.5] {
            println!(
                "  a({x}, 0) = {:.6e}, dist = {:.3}",
                d.eval(x, 0.0),
                d.dist_to_boundary([x, 0.0])?
            );
        }
        let report = check_class_membership(d, 256, 1e-12);
        println!(
            "  class check: sigma {}, k {}, worst order-2 ratio {:.2}, singular nodes {}, pass {}",
            report.sigma,
            report.k,
            report.max_ratio_of_order(2),
            report.singular_points,
            report.pass
        );
    }
    Ok(())
}
