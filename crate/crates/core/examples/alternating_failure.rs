//! Alternating Euclidean and entropic steps on the two-point simplex against
//! the two deterministic adversaries.

use blockmirror::harness::alternating_expected_regret;
use blockmirror::instances::alternating_adversary_losses;
use blockmirror::meta::alternating_omd_run;

fn main() -> blockmirror::Result<()> {
    let (eta_euc, eta_ent) = (0.01, 0.5);
    println!("eta_euc {eta_euc}  eta_ent {eta_ent}");
    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "T", "case 1", "case 2", "mixed"
    );
    for horizon in [1024, 2048, 4096, 8192] {
        let (c1, c2, mean) = alternating_expected_regret(horizon, eta_euc, eta_ent)?;
        println!("{horizon:>6} {c1:>10.2} {c2:>10.2} {mean:>10.2}");
    }
    let inst = alternating_adversary_losses(1, 64)?;
    let rec = alternating_omd_run(&inst.body, &inst.losses, 0.5, 0.5, &inst.x1)?;
    let head: Vec<String> = rec
        .x1_coord
        .iter()
        .take(8)
        .map(|v| format!("{v:.3}"))
        .collect();
    println!("case 1, T=64, first coordinates: {}", head.join(" "));
    Ok(())
}
