//! Mean largest block count of a random `S`-subset against its bound.

use blockmirror::geometry::random_equal_partition;
use blockmirror::harness::{lemma1_bound, lemma1_mean};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> blockmirror::Result<()> {
    let (d, s) = (1024, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1, 2, 4, 8, 16, 32, 64] {
        let part = random_equal_partition(d, n, &mut rng)?;
        let (mean, hist) = lemma1_mean(&part, s, 50_000, &mut rng);
        let mode = hist
            .iter()
            .enumerate()
            .max_by_key(|h| h.1)
            .map(|h| h.0)
            .unwrap_or(0);
        println!(
            "n {n:>3}  mean {mean:6.3}  mode {mode:>2}  bound {:7.3}",
            lemma1_bound(s, n)
        );
    }
    Ok(())
}
