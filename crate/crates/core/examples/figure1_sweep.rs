//! Regret of block-norm mirror descent on the four-phase sparse instance as the
//! number of blocks varies. Small by default; pass `d T seeds` to scale up.

use blockmirror::harness::{run_experiment, ExperimentConfig, ExperimentId};

fn main() -> blockmirror::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let (d, horizon, seeds) = match args[..] {
        [d, t, s] => (d, t, s as u64),
        _ => (256, 100, 3),
    };
    let cfg = ExperimentConfig {
        d: Some(d),
        horizon: Some(horizon),
        seeds: Some((0..seeds).collect()),
        samples: Some(20_000),
        ..ExperimentConfig::new(ExperimentId::Figure1)
    };
    let s = run_experiment(&cfg, None)?;
    for r in &s.rows {
        let (n, eta) = (r.n.unwrap_or(0), r.eta.unwrap_or(f64::NAN));
        println!(
            "{n:>6} blocks  eta {eta:.4}  regret {:8.3} ± {:.3}",
            r.mean_regret, r.stderr
        );
    }
    for c in &s.checks {
        println!("{c}");
    }
    Ok(())
}
