//! Sparse losses on the simplex: projected gradient, exponentiated gradient,
//! and block-norm descent with as many blocks as the sparsity.

use blockmirror::harness::{run_experiment, ExperimentConfig, ExperimentId};

fn main() -> blockmirror::Result<()> {
    let cfg = ExperimentConfig {
        d: Some(4096),
        horizon: Some(1000),
        seeds: Some(vec![0, 1]),
        ..ExperimentConfig::new(ExperimentId::LogImprovement)
    };
    let s = run_experiment(&cfg, None)?;
    for r in &s.rows {
        println!(
            "{:<10} regret {:8.2} ± {:.2}",
            r.cell_id, r.mean_regret, r.stderr
        );
    }
    for c in &s.checks {
        println!("{c}");
    }
    Ok(())
}
