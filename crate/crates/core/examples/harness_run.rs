//! Running an experiment from its JSON description, as the CLI does.

use damped_torus::harness::{run, ExperimentConfig};

const CONFIG: &str = r#"{
  "experiment": {
    "kind": "averaging",
    "params": {
      "damping": { "disk": { "center": [0.0, 0.0], "r0": 1.0, "beta": 5.0 } },
      "direction": [0, 1],
      "grid_n": 4096,
      "window": [0.001, 0.1],
      "tolerance": 0.1
    }
  },
  "seed": 7
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::from_json(CONFIG)?;
    cfg.out_dir = std::env::temp_dir().join("damped-lab-averaging");
    let out = run(&cfg)?;
    println!(
        "{}",
        std::fs::read_to_string(cfg.out_dir.join("report.txt"))?
    );
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
