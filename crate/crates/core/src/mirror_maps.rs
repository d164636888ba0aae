//! Mirror maps (distance generating functions) and their Bregman divergences.
//!
//! Three families are supported:
//!
//! * `Euclidean`: `h(x) = ½‖x‖²`, the geometry of projected gradient descent.
//! * `Entropic`: `h(x) = Σ xᵢ ln xᵢ` on the nonnegative orthant (`0 ln 0 = 0`),
//!   the geometry of exponentiated gradient.
//! * `BlockNorm`: `h(x) = 1/(γ p) Σ_j ‖x_{B_j}‖₂^p` for a partition
//!   into `n` blocks, which is 1-strongly convex with respect to the `n`-th block
//!   norm on its unit ball. The constants are
//!   `γ = 1, ½, 1/(e ln n)` and `p = 2, 2, 1 + 1/ln n` for `n = 1`, `n = 2`,
//!   `n > 2` respectively.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::geometry::{self, Partition};

/// Geometry descriptor for online mirror descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapRepr", into = "MapRepr")]
pub enum MirrorMapSpec {
    Euclidean,
    Entropic,
    BlockNorm {
        partition: Partition,
        gamma: f64,
        p: f64,
    },
}

/// `(γ_n, p_n)` for the `n`-block potential.
pub fn block_constants(n: usize) -> (f64, f64) {
    match n {
        0 | 1 => (1.0, 2.0),
        2 => (0.5, 2.0),
        _ => {
            let ln = (n as f64).ln();
            (1.0 / (std::f64::consts::E * ln), 1.0 + 1.0 / ln)
        }
    }
}

impl MirrorMapSpec {
    pub fn block_norm(partition: Partition) -> Self {
        let (gamma, p) = block_constants(partition.num_blocks());
        MirrorMapSpec::BlockNorm {
            partition,
            gamma,
            p,
        }
    }

    /// Number of blocks, with Euclidean reported as 1 and Entropic as `None`.
    pub fn blocks(&self) -> Option<usize> {
        match self {
            MirrorMapSpec::Euclidean => Some(1),
            MirrorMapSpec::Entropic => None,
            MirrorMapSpec::BlockNorm { partition, .. } => Some(partition.num_blocks()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MirrorMapSpec::Euclidean => "euclidean".into(),
            MirrorMapSpec::Entropic => "entropic".into(),
            MirrorMapSpec::BlockNorm { partition, .. } => {
                format!("block{}", partition.num_blocks())
            }
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if let MirrorMapSpec::BlockNorm { partition, .. } = self {
            check_len(len, partition.dim(), "mirror map argument")?;
        }
        Ok(())
    }

    /// The primal norm the potential is strongly convex against.
    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(match self {
            MirrorMapSpec::Euclidean => geometry::l2(x),
            MirrorMapSpec::Entropic => geometry::l1(x),
            MirrorMapSpec::BlockNorm { partition, .. } => geometry::block_norm(x, partition)?,
        })
    }

    /// The dual of [`MirrorMapSpec::norm`], used to measure gradients.
    pub fn dual_norm(&self, g: &[f64]) -> Result<f64> {
        self.check_dim(g.len())?;
        Ok(match self {
            MirrorMapSpec::Euclidean => geometry::l2(g),
            MirrorMapSpec::Entropic => g.iter().fold(0.0, |m, v| m.max(v.abs())),
            MirrorMapSpec::BlockNorm { partition, .. } => geometry::dual_block_norm(g, partition)?,
        })
    }
}

pub fn potential_value(m: &MirrorMapSpec, x: &[f64]) -> Result<f64> {
    m.check_dim(x.len())?;
    match m {
        MirrorMapSpec::Euclidean => Ok(0.5 * geometry::dot(x, x)),
        MirrorMapSpec::Entropic => {
            let mut s = 0.0;
            for &xi in x {
                if xi < 0.0 {
                    return Err(Error::Domain(format!(
                        "entropic potential at negative coordinate {xi}"
                    )));
                }
                if xi > 0.0 {
                    s += xi * xi.ln();
                }
            }
            Ok(s)
        }
        MirrorMapSpec::BlockNorm {
            partition,
            gamma,
            p,
        } => {
            let s: f64 = partition.block_l2_norms(x).iter().map(|r| r.powf(*p)).sum();
            Ok(s / (gamma * p))
        }
    }
}

pub fn potential_grad(m: &MirrorMapSpec, x: &[f64]) -> Result<Vec<f64>> {
    m.check_dim(x.len())?;
    match m {
        MirrorMapSpec::Euclidean => Ok(x.to_vec()),
        MirrorMapSpec::Entropic => x
            .iter()
            .map(|&xi| {
                if xi > 0.0 {
                    Ok(1.0 + xi.ln())
                } else {
                    Err(Error::Domain(format!(
                        "entropic gradient at nonpositive coordinate {xi}"
                    )))
                }
            })
            .collect(),
        MirrorMapSpec::BlockNorm {
            partition,
            gamma,
            p,
        } => {
            let scale: Vec<f64> = partition
                .block_l2_norms(x)
                .into_iter()
                .map(|r| {
                    if r > 0.0 {
                        r.powf(p - 2.0) / gamma
                    } else {
                        0.0
                    }
                })
                .collect();
            let bo = partition.block_of();
            Ok(x.iter()
                .enumerate()
                .map(|(i, &xi)| scale[bo[i]] * xi)
                .collect())
        }
    }
}

pub fn potential_grad_inverse(m: &MirrorMapSpec, theta: &[f64]) -> Result<Vec<f64>> {
    m.check_dim(theta.len())?;
    Ok(match m {
        MirrorMapSpec::Euclidean => theta.to_vec(),
        MirrorMapSpec::Entropic => theta.iter().map(|&t| (t - 1.0).exp()).collect(),
        MirrorMapSpec::BlockNorm {
            partition,
            gamma,
            p,
        } => {
            let scale: Vec<f64> = partition
                .block_l2_norms(theta)
                .into_iter()
                .map(|rho| inverse_block_scale(rho, *gamma, *p))
                .collect();
            let bo = partition.block_of();
            theta
                .iter()
                .enumerate()
                .map(|(i, &t)| scale[bo[i]] * t)
                .collect()
        }
    })
}

/// Multiplier `c` with `x_B = c θ_B` for a block whose dual vector has norm `rho`.
#[inline]
pub(crate) fn inverse_block_scale(rho: f64, gamma: f64, p: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return gamma;
    }
    // r = (γ ρ)^{1/(p-1)} is the primal block norm; x_B = γ r^{2-p} θ_B
    let r = (gamma * rho).powf(1.0 / (p - 1.0));
    gamma * r.powf(2.0 - p)
}

pub fn bregman_div(m: &MirrorMapSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len(), "bregman_div")?;
    m.check_dim(x.len())?;
    match m {
        MirrorMapSpec::Euclidean => {
            Ok(0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        }
        MirrorMapSpec::Entropic => {
            let mut s = 0.0;
            for (&xi, &yi) in x.iter().zip(y) {
                if yi <= 0.0 || xi < 0.0 {
                    return Err(Error::Domain(format!(
                        "entropic divergence outside domain ({xi}, {yi})"
                    )));
                }
                s += yi - xi;
                if xi > 0.0 {
                    s += xi * (xi / yi).ln();
                }
            }
            Ok(s.max(0.0))
        }
        MirrorMapSpec::BlockNorm { .. } => {
            let gy = potential_grad(m, y)?;
            let v = potential_value(m, x)?
                - potential_value(m, y)?
                - gy.iter()
                    .zip(x.iter().zip(y))
                    .map(|(g, (a, b))| g * (a - b))
                    .sum::<f64>();
            Ok(v.max(0.0))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MapRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partition: Option<Partition>,
}

impl From<MirrorMapSpec> for MapRepr {
    fn from(m: MirrorMapSpec) -> Self {
        match m {
            MirrorMapSpec::Euclidean => MapRepr {
                kind: "euclidean".into(),
                n: Some(1),
                partition: None,
            },
            MirrorMapSpec::Entropic => MapRepr {
                kind: "entropic".into(),
                n: None,
                partition: None,
            },
            MirrorMapSpec::BlockNorm { partition, .. } => MapRepr {
                kind: "block_norm".into(),
                n: Some(partition.num_blocks()),
                partition: Some(partition),
            },
        }
    }
}

impl TryFrom<MapRepr> for MirrorMapSpec {
    type Error = Error;

    fn try_from(r: MapRepr) -> Result<Self> {
        match r.kind.as_str() {
            "euclidean" => Ok(MirrorMapSpec::Euclidean),
            "entropic" => Ok(MirrorMapSpec::Entropic),
            "block_norm" => {
                let p = r
                    .partition
                    .ok_or_else(|| invalid("block_norm map needs a partition"))?;
                if r.n.is_some_and(|n| n != p.num_blocks()) {
                    return Err(invalid("block count does not match partition"));
                }
                Ok(MirrorMapSpec::block_norm(p))
            }
            other => Err(invalid(format!("unknown mirror map kind {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::random_equal_partition;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn positive_vec(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| r.gen_range(0.05..2.0)).collect()
    }

    fn simplex_point(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        let v = positive_vec(r, d);
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    }

    fn maps(r: &mut ChaCha8Rng, d: usize) -> Vec<MirrorMapSpec> {
        let mut out = vec![MirrorMapSpec::Euclidean, MirrorMapSpec::Entropic];
        for n in [1, 2, 3, 6] {
            out.push(MirrorMapSpec::block_norm(
                random_equal_partition(d, n, r).unwrap(),
            ));
        }
        out
    }

    /// Central finite differences of the potential.
    fn fd_grad(m: &MirrorMapSpec, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (potential_value(m, &a).unwrap() - potential_value(m, &b).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn constants_table() {
        assert_eq!(block_constants(1), (1.0, 2.0));
        assert_eq!(block_constants(2), (0.5, 2.0));
        let (g, p) = block_constants(16);
        assert!((g - 1.0 / (std::f64::consts::E * 16f64.ln())).abs() < 1e-15);
        assert!((p - (1.0 + 1.0 / 16f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn potential_examples() {
        let e1 = [1.0, 0.0, 0.0];
        assert_eq!(
            potential_value(&MirrorMapSpec::Euclidean, &e1).unwrap(),
            0.5
        );
        let u = [0.25; 4];
        assert!((potential_value(&MirrorMapSpec::Entropic, &u).unwrap() + 4f64.ln()).abs() < 1e-12);
        assert!(matches!(
            potential_value(&MirrorMapSpec::Entropic, &[0.5, -0.1]),
            Err(Error::Domain(_))
        ));
        assert!(potential_grad(&MirrorMapSpec::Entropic, &[0.5, 0.0]).is_err());

        let mut r = rng(1);
        let one = MirrorMapSpec::block_norm(Partition::contiguous(5, 1).unwrap());
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| r.gen_range(-2.0..2.0)).collect();
            let a = potential_value(&one, &x).unwrap();
            let b = potential_value(&MirrorMapSpec::Euclidean, &x).unwrap();
            assert!((a - b).abs() < 1e-12);
            assert_eq!(potential_grad(&MirrorMapSpec::Euclidean, &x).unwrap(), x);
        }
    }

    #[test]
    fn two_block_gradient_and_inverse() {
        let m = MirrorMapSpec::block_norm(Partition::contiguous(4, 2).unwrap());
        let g = potential_grad(&m, &[3.0, 4.0, 0.0, 0.0]).unwrap();
        for (a, b) in g.iter().zip([6.0, 8.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let fd = fd_grad(&m, &[3.0, 4.0, 0.0, 0.0], 1e-6);
        for (a, b) in fd.iter().zip(&g) {
            assert!((a - b).abs() < 1e-5 * b.abs().max(1.0));
        }
        let x = potential_grad_inverse(&m, &[6.0, 8.0, 0.0, 0.0]).unwrap();
        for (a, b) in x.iter().zip([3.0, 4.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn coordinatewise_block_gradient_matches_finite_differences() {
        let mut r = rng(2);
        let d = 6;
        let m = MirrorMapSpec::block_norm(random_equal_partition(d, d, &mut r).unwrap());
        let MirrorMapSpec::BlockNorm { gamma, p, .. } = m.clone() else {
            unreachable!()
        };
        for _ in 0..100 {
            let x = positive_vec(&mut r, d);
            let g = potential_grad(&m, &x).unwrap();
            let fd = fd_grad(&m, &x, 1e-6);
            for i in 0..d {
                let closed = x[i].powf(p - 1.0) / gamma;
                assert!((g[i] - closed).abs() < 1e-12 * closed.abs());
                assert!(
                    (fd[i] - g[i]).abs() <= 1e-5 * g[i].abs(),
                    "{} vs {}",
                    fd[i],
                    g[i]
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_all_kinds() {
        let mut r = rng(3);
        let d = 6;
        for m in maps(&mut r, d) {
            for _ in 0..100 {
                let x = positive_vec(&mut r, d);
                let g = potential_grad(&m, &x).unwrap();
                let fd = fd_grad(&m, &x, 1e-6);
                for i in 0..d {
                    let rel = (fd[i] - g[i]).abs() / g[i].abs().max(1e-3);
                    assert!(rel <= 1e-5, "{}: {} vs {}", m.label(), fd[i], g[i]);
                }
            }
        }
    }

    #[test]
    fn grad_inverse_roundtrips() {
        let mut r = rng(4);
        let d = 6;
        for m in maps(&mut r, d) {
            for _ in 0..100 {
                let x = positive_vec(&mut r, d);
                let back = potential_grad_inverse(&m, &potential_grad(&m, &x).unwrap()).unwrap();
                for (a, b) in back.iter().zip(&x) {
                    assert!((a - b).abs() < 1e-10);
                }
                let theta: Vec<f64> = match m {
                    MirrorMapSpec::Entropic => (0..d).map(|_| r.gen_range(-3.0..2.0)).collect(),
                    _ => (0..d).map(|_| r.gen_range(-3.0..3.0)).collect(),
                };
                let fwd = potential_grad(&m, &potential_grad_inverse(&m, &theta).unwrap()).unwrap();
                for (a, b) in fwd.iter().zip(&theta) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn bregman_examples() {
        let v = bregman_div(&MirrorMapSpec::Euclidean, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let mut r = rng(5);
        for _ in 0..100 {
            let x = simplex_point(&mut r, 5);
            let y = simplex_point(&mut r, 5);
            let kl: f64 = x.iter().zip(&y).map(|(a, b)| a * (a / b).ln()).sum();
            let b = bregman_div(&MirrorMapSpec::Entropic, &x, &y).unwrap();
            assert!((kl - b).abs() < 1e-12);
        }
        // boundary x is allowed, boundary y is not
        assert!(bregman_div(&MirrorMapSpec::Entropic, &[1.0, 0.0], &[0.5, 0.5]).is_ok());
        assert!(bregman_div(&MirrorMapSpec::Entropic, &[0.5, 0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn bregman_zero_on_diagonal_positive_off_it() {
        let mut r = rng(6);
        let d = 6;
        for m in maps(&mut r, d) {
            for _ in 0..100 {
                let x = positive_vec(&mut r, d);
                assert!(bregman_div(&m, &x, &x).unwrap().abs() < 1e-12);
                let mut y = x.clone();
                y[r.gen_range(0..d)] += 1e-3 + r.gen_range(0.0..0.5);
                assert!(bregman_div(&m, &y, &x).unwrap() >= 1e-9);
                assert!(bregman_div(&m, &x, &y).unwrap() >= 1e-9);
            }
        }
    }

    #[test]
    fn block_potentials_are_strongly_convex_on_unit_ball() {
        let mut r = rng(7);
        let d = 12;
        for n in [1, 2, 3, 4, 6, 12] {
            let part = random_equal_partition(d, n, &mut r).unwrap();
            let m = MirrorMapSpec::block_norm(part.clone());
            let sample = |r: &mut ChaCha8Rng| {
                let v: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
                let nv = geometry::block_norm(&v, &part).unwrap();
                let rad: f64 = r.gen_range(0.0..1.0);
                v.iter().map(|a| a * rad / nv).collect::<Vec<f64>>()
            };
            for _ in 0..10_000 / 6 + 1 {
                let x = sample(&mut r);
                let y = sample(&mut r);
                let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let lower = 0.5 * geometry::block_norm(&diff, &part).unwrap().powi(2);
                assert!(bregman_div(&m, &x, &y).unwrap() >= lower - 1e-10, "n = {n}");
            }
        }
    }

    #[test]
    fn map_serialization() {
        let m = MirrorMapSpec::block_norm(Partition::contiguous(4, 2).unwrap());
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"kind":"block_norm","n":2,"partition":[0,0,1,1]}"#);
        let back: MirrorMapSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let e: MirrorMapSpec = serde_json::from_str(r#"{"kind":"entropic"}"#).unwrap();
        assert_eq!(e, MirrorMapSpec::Entropic);
    }
}
