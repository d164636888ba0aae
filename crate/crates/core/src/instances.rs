//! Loss sequences and the adversarial or stochastic instances built from them.
//!
//! Every loss here is linear. A [`LossSeq`] stores one sparse vector `c^(t)`
//! per round plus a sign flag: `Negated` means `f(x) = −⟨c, x⟩`, `Plain`
//! means `f(x) = ⟨c, x⟩`.

use std::io::{BufRead, Write};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::projection::BodySpec;

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVec {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn new(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        pairs.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        let (idx, val) = pairs.into_iter().filter(|p| p.1 != 0.0).unzip();
        SparseVec { idx, val }
    }

    /// 0-1 vector supported on `support`.
    pub fn indicator(support: impl IntoIterator<Item = usize>) -> Self {
        SparseVec::new(support.into_iter().map(|i| (i, 1.0)).collect())
    }

    pub fn from_dense(x: &[f64]) -> Self {
        SparseVec::new(
            x.iter()
                .enumerate()
                .filter(|p| *p.1 != 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
        )
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, v)| v * x[i]).sum()
    }

    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        self.add_into(1.0, &mut out);
        out
    }

    /// `out += a · self`.
    pub fn add_into(&self, a: f64, out: &mut [f64]) {
        for (&i, v) in self.idx.iter().zip(&self.val) {
            out[i] += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        SparseVec {
            idx: self.idx.clone(),
            val: self.val.iter().map(|v| v * a).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    /// `f(x) = −⟨c, x⟩`
    Negated,
    /// `f(x) = ⟨c, x⟩`
    Plain,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Negated => -1.0,
            Sign::Plain => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSeq {
    pub d: usize,
    pub sign: Sign,
    pub vectors: Vec<SparseVec>,
    /// `‖c^(t)‖₀` upper bound, when the generator guarantees one.
    pub sparsity: Option<usize>,
}

impl LossSeq {
    pub fn new(
        d: usize,
        sign: Sign,
        vectors: Vec<SparseVec>,
        sparsity: Option<usize>,
    ) -> Result<Self> {
        for v in &vectors {
            if v.idx.last().is_some_and(|&i| i >= d) {
                return Err(invalid(format!(
                    "loss index out of range for dimension {d}"
                )));
            }
            if sparsity.is_some_and(|s| v.nnz() > s) {
                return Err(invalid("loss vector exceeds declared sparsity"));
            }
        }
        Ok(LossSeq {
            d,
            sign,
            vectors,
            sparsity,
        })
    }

    pub fn horizon(&self) -> usize {
        self.vectors.len()
    }

    /// `f^(t)(x)` with `t` 0-based.
    pub fn value(&self, t: usize, x: &[f64]) -> f64 {
        self.sign.factor() * self.vectors[t].dot(x)
    }

    /// `∇f^(t)`, which does not depend on the point.
    pub fn gradient(&self, t: usize) -> SparseVec {
        self.vectors[t].scaled(self.sign.factor())
    }

    /// `Σ_t ∇f^(t)`.
    pub fn total_gradient(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for v in &self.vectors {
            v.add_into(self.sign.factor(), &mut g);
        }
        g
    }

    /// Every loss multiplied by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        LossSeq {
            d: self.d,
            sign: self.sign,
            vectors: self.vectors.iter().map(|v| v.scaled(a)).collect(),
            sparsity: self.sparsity,
        }
    }

    /// Compact CSV: `t,indices,values` with `;`-separated lists and 1-based `t`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# d={} sign={}",
            self.d,
            if self.sign == Sign::Negated {
                "negated"
            } else {
                "plain"
            }
        )?;
        writeln!(w, "t,indices,values")?;
        for (t, v) in self.vectors.iter().enumerate() {
            let idx: Vec<String> = v.idx.iter().map(|i| i.to_string()).collect();
            let val: Vec<String> = v.val.iter().map(|x| format!("{x:?}")).collect();
            writeln!(w, "{},{},{}", t + 1, idx.join(";"), val.join(";"))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let head = lines.next().ok_or_else(|| invalid("empty loss file"))??;
        let mut d = None;
        let mut sign = None;
        for tok in head.trim_start_matches('#').split_whitespace() {
            match tok.split_once('=') {
                Some(("d", v)) => d = v.parse().ok(),
                Some(("sign", "negated")) => sign = Some(Sign::Negated),
                Some(("sign", "plain")) => sign = Some(Sign::Plain),
                _ => {}
            }
        }
        let (d, sign) = d
            .zip(sign)
            .ok_or_else(|| invalid("loss file header needs d= and sign="))?;
        lines.next();
        let mut vectors = Vec::new();
        for line in lines {
            let line = line?;
            let mut cols = line.split(',');
            let (_, idx, val) = (
                cols.next(),
                cols.next().unwrap_or(""),
                cols.next().unwrap_or(""),
            );
            let idx: Vec<usize> = split_list(idx)
                .map(|x| x.parse().map_err(|_| invalid(format!("bad index {x}"))))
                .collect::<Result<_>>()?;
            let val: Vec<f64> = split_list(val)
                .map(|x| x.parse().map_err(|_| invalid(format!("bad value {x}"))))
                .collect::<Result<_>>()?;
            check_len(val.len(), idx.len(), "loss row")?;
            vectors.push(SparseVec { idx, val });
        }
        LossSeq::new(d, sign, vectors, None)
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(';').filter(|x| !x.is_empty())
}

/// A body, a loss sequence on it, and the starting point.
#[derive(Debug, Clone)]
pub struct Instance {
    pub body: BodySpec,
    pub losses: LossSeq,
    pub x1: Vec<f64>,
    /// Factor the body was divided by (1 when unscaled).
    pub rescale: f64,
}

/// `S` distinct coordinates: `forced` plus `s − 1` uniform picks from the rest.
pub fn sparse_support<R: Rng + ?Sized>(
    d: usize,
    s: usize,
    forced: Option<usize>,
    rng: &mut R,
) -> Vec<usize> {
    match forced {
        Some(f) => {
            let mut out: Vec<usize> = index::sample(rng, d - 1, s - 1)
                .into_iter()
                .map(|j| if j >= f { j + 1 } else { j })
                .collect();
            out.push(f);
            out
        }
        None => index::sample(rng, d, s).into_vec(),
    }
}

fn check_sparsity(d: usize, s: usize) -> Result<()> {
    if s == 0 || s > d {
        return Err(invalid(format!("sparsity {s} must lie in 1..={d}")));
    }
    Ok(())
}

/// `(S, T_0)` for the four-phase schedule: `S = ⌊ln d⌋`, `T_0 = ⌊2√T⌋`.
pub fn figure1_params(d: usize, horizon: usize) -> (usize, usize) {
    (
        (d as f64).ln().floor() as usize,
        (2.0 * (horizon as f64).sqrt()).floor() as usize,
    )
}

/// The forced coordinate (0-based) at round `t` (1-based): coordinates 0 and 1
/// alternate up to `T_0`, then 2 and 3.
pub fn figure1_forced(t: usize, t0: usize) -> usize {
    let odd = t % 2 == 1;
    match (t <= t0, odd) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    }
}

pub fn figure1_losses<R: Rng + ?Sized>(d: usize, horizon: usize, rng: &mut R) -> Result<LossSeq> {
    if d < 4 {
        return Err(invalid("the four-phase schedule needs d ≥ 4"));
    }
    let (s, t0) = figure1_params(d, horizon);
    check_sparsity(d, s)?;
    let vectors = (1..=horizon)
        .map(|t| SparseVec::indicator(sparse_support(d, s, Some(figure1_forced(t, t0)), rng)))
        .collect();
    LossSeq::new(d, Sign::Negated, vectors, Some(s))
}

/// `S = round(ln d)`.
pub fn log_sparsity(d: usize) -> usize {
    (d as f64).ln().round() as usize
}

/// Simplex instance where coordinate 1 is always in the support.
pub fn log_improvement_losses<R: Rng + ?Sized>(
    d: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Instance> {
    let s = log_sparsity(d);
    check_sparsity(d, s)?;
    if (horizon as f64) < (d as f64).ln() {
        return Err(invalid("horizon must be at least ln d"));
    }
    let vectors = (0..horizon)
        .map(|_| SparseVec::indicator(sparse_support(d, s, Some(0), rng)))
        .collect();
    Ok(Instance {
        body: BodySpec::simplex(d),
        losses: LossSeq::new(d, Sign::Negated, vectors, Some(s))?,
        x1: vec![1.0 / d as f64; d],
        rescale: 1.0,
    })
}

/// Exact integer cube root, if any.
pub fn cube_root(d: usize) -> Option<usize> {
    let r = (d as f64).cbrt().round() as usize;
    (r * r * r == d).then_some(r)
}

/// Parameters `(A, S, R)` of the center-hull instance: `A = d^{-2/3}`, `S = R = d^{1/3}`.
pub fn poly_params(d: usize) -> Result<(f64, usize, f64)> {
    let s = cube_root(d).ok_or_else(|| invalid(format!("dimension {d} is not a perfect cube")))?;
    let a = 1.0 / (s * s) as f64;
    Ok((a, s, s as f64))
}

/// Center-hull instance in its original scale: `P = conv(e_i, A·1)`, raw
/// losses, and `x1 = A·1`.
pub fn poly_instance_unscaled<R: Rng + ?Sized>(
    d: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Instance> {
    let (a, s, _) = poly_params(d)?;
    check_sparsity(d, s)?;
    let vectors = (0..horizon)
        .map(|_| SparseVec::indicator(sparse_support(d, s, Some(0), rng)))
        .collect();
    Ok(Instance {
        body: BodySpec::simplex_hull_with_center(d, a),
        losses: LossSeq::new(d, Sign::Negated, vectors, Some(s))?,
        x1: vec![a; d],
        rescale: 1.0,
    })
}

/// The same instance divided by `R = Ad` so that it fits the L1 unit ball;
/// losses are multiplied by `R` and `x1 = 1/d·1`.
pub fn poly_improvement_instance<R: Rng + ?Sized>(
    d: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Instance> {
    let raw = poly_instance_unscaled(d, horizon, rng)?;
    let (_, _, r) = poly_params(d)?;
    Ok(Instance {
        body: raw.body.scaled(1.0 / r),
        losses: raw.losses.scaled(r),
        x1: vec![1.0 / d as f64; d],
        rescale: r,
    })
}

/// The two deterministic adversaries on `Δ_2`.
pub fn alternating_adversary_losses(case: u8, horizon: usize) -> Result<Instance> {
    if horizon < 16 || !horizon.is_multiple_of(8) {
        return Err(invalid("horizon must be ≥ 16 and divisible by 8"));
    }
    let vectors = (1..=horizon)
        .map(|t| {
            let odd = t % 2 == 1;
            match (case, odd) {
                (1, true) => Ok(SparseVec::new(vec![(0, -1.0)])),
                (1, false) if t <= horizon / 8 => Ok(SparseVec::default()),
                (1, false) => Ok(SparseVec::new(vec![(1, -2.0)])),
                (2, true) => Ok(SparseVec::new(vec![(1, -1.0)])),
                (2, false) => Ok(SparseVec::default()),
                _ => Err(invalid(format!("unknown case {case}"))),
            }
        })
        .collect::<Result<_>>()?;
    Ok(Instance {
        body: BodySpec::simplex(2),
        losses: LossSeq::new(2, Sign::Plain, vectors, None)?,
        x1: vec![0.5, 0.5],
        rescale: 1.0,
    })
}

/// One fair coin picks case 1 or case 2 for the whole horizon.
pub fn mixed_case_adversary<R: Rng + ?Sized>(
    horizon: usize,
    rng: &mut R,
) -> Result<(u8, Instance)> {
    let case = if rng.gen_bool(0.5) { 1 } else { 2 };
    Ok((case, alternating_adversary_losses(case, horizon)?))
}
