//! Block norms, their duals, and the block-norm potentials for a few block counts.

use blockmirror::geometry::{block_norm, dual_block_norm, Partition};
use blockmirror::mirror_maps::{
    block_constants, bregman_div, potential_grad, potential_grad_inverse, MirrorMapSpec,
};

fn main() -> blockmirror::Result<()> {
    let d = 16;
    let x: Vec<f64> = (0..d).map(|i| 1.0 / (1.0 + i as f64)).collect();
    let s: f64 = x.iter().sum();
    let x: Vec<f64> = x.iter().map(|v| v / s).collect();
    let y = vec![1.0 / d as f64; d];
    println!(
        "{:>3} {:>8} {:>8} {:>10} {:>10} {:>12}",
        "n", "gamma", "p", "norm", "dual", "bregman"
    );
    for n in [1, 2, 4, 8, 16] {
        let part = Partition::contiguous(d, n)?;
        let (gamma, p) = block_constants(n);
        let m = MirrorMapSpec::block_norm(part.clone());
        let back = potential_grad_inverse(&m, &potential_grad(&m, &x)?)?;
        let err = back
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!(
            "{n:>3} {gamma:>8.4} {p:>8.4} {:>10.4} {:>10.4} {:>12.3e}   round trip {err:.1e}",
            block_norm(&x, &part)?,
            dual_block_norm(&x, &part)?,
            bregman_div(&m, &x, &y)?,
        );
    }
    Ok(())
}
