//! Bregman projections onto the simplex and onto a center hull.

use blockmirror::geometry::Partition;
use blockmirror::mirror_maps::MirrorMapSpec;
use blockmirror::projection::{bregman_project, BodySpec};

fn main() -> blockmirror::Result<()> {
    let y = vec![0.9, 0.3, 0.6, 0.5, 0.4, 0.7, 0.2, 0.5];
    let d = y.len();
    let maps = [
        MirrorMapSpec::Euclidean,
        MirrorMapSpec::block_norm(Partition::contiguous(d, 4)?),
        MirrorMapSpec::block_norm(Partition::contiguous(d, d)?),
    ];
    for body in [
        BodySpec::simplex(d),
        BodySpec::simplex_hull_with_center(d, 0.25),
    ] {
        println!("{}", body.label);
        for m in &maps {
            let z = bregman_project(m, &body, &y, 1e-10)?;
            let zs: Vec<String> = z.iter().map(|v| format!("{v:.4}")).collect();
            println!("  {:<14} [{}]", m.label(), zs.join(", "));
        }
    }
    let pos: Vec<f64> = y.iter().map(|v| v.abs() + 0.01).collect();
    let z = bregman_project(&MirrorMapSpec::Entropic, &BodySpec::simplex(d), &pos, 1e-12)?;
    println!("entropic of |y|+0.01: {z:.4?}");
    Ok(())
}
