//! The center-hull instance: projected gradient, the scaled L1 geometry, and
//! block-norm descent with `S` blocks.

use blockmirror::harness::{run_experiment, ExperimentConfig, ExperimentId};

fn main() -> blockmirror::Result<()> {
    let cfg = ExperimentConfig {
        d: Some(216),
        horizon: Some(1024),
        seeds: Some(vec![0, 1]),
        ..ExperimentConfig::new(ExperimentId::PolyImprovement)
    };
    let s = run_experiment(&cfg, None)?;
    for r in &s.rows {
        println!(
            "{:<18} regret {:8.2} ± {:.2}",
            r.cell_id, r.mean_regret, r.stderr
        );
    }
    for c in &s.checks {
        println!("{c}");
    }
    Ok(())
}
