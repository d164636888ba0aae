//! Multiplicative weights over block-norm experts on a sparse instance.

use blockmirror::instances::log_improvement_losses;
use blockmirror::meta::{best_expert, build_block_norm_portfolio, mirror_weights_run_with_stride};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> blockmirror::Result<()> {
    let (d, horizon) = (64, 500);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inst = log_improvement_losses(d, horizon, &mut rng)?;
    let (body, losses, x1) = (inst.body, inst.losses, inst.x1);
    let portfolio = build_block_norm_portfolio(d, horizon, &body, &x1, None, None, &mut rng)?;
    println!(
        "{} experts, rho {}, epsilon {:.4}",
        portfolio.len(),
        portfolio.rho,
        portfolio.epsilon
    );
    let rec = mirror_weights_run_with_stride(&body, &portfolio, &losses, &x1, 100)?;
    let (k, best) = best_expert(&rec);
    let e = &portfolio.entries[k];
    println!(
        "best expert: {} eta {:.4e} regret {best:.3}",
        e.map.label(),
        e.rule.eta(1)
    );
    println!("meta regret {:.3}", rec.meta.final_regret());
    let last = rec.weights.last().expect("weights recorded");
    let mut top: Vec<(usize, f64)> = last.iter().copied().enumerate().collect();
    top.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (i, p) in top.iter().take(5) {
        println!(
            "  {:<14} eta {:.4e}  p {p:.4}",
            portfolio.entries[*i].map.label(),
            portfolio.entries[*i].rule.eta(1)
        );
    }
    Ok(())
}
