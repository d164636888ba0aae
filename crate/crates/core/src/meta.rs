//! Strategies that combine several mirror maps: the alternating baseline and
//! multiplicative weights over a portfolio of (map, step size) experts.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{check_len, invalid, Error, Result};
use crate::geometry::random_equal_partition;
use crate::instances::LossSeq;
use crate::mirror_maps::MirrorMapSpec;
use crate::omd::{RegretTracker, RunRecord, StepSizeRule, Stepper};
use crate::projection::{argmin_first, BodySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expert {
    pub map: MirrorMapSpec,
    pub rule: StepSizeRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub entries: Vec<Expert>,
    /// Bound on `f(x) − f(z)` over the body, per round.
    pub rho: f64,
    pub epsilon: f64,
}

impl Portfolio {
    /// `ε = √(ln N / T)`.
    pub fn new(entries: Vec<Expert>, rho: f64, horizon: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("portfolio needs at least one expert"));
        }
        if !(rho > 0.0) || horizon == 0 {
            return Err(invalid("rho and horizon must be positive"));
        }
        let epsilon = ((entries.len() as f64).ln() / horizon as f64).sqrt();
        Ok(Portfolio {
            entries,
            rho,
            epsilon,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Compact form: one `{n, eta, partition}` object per expert, with the
    /// partition given as an index into `partitions`.
    pub fn summary_json(&self) -> serde_json::Value {
        let mut parts: Vec<&MirrorMapSpec> = Vec::new();
        let entries: Vec<_> = self
            .entries
            .iter()
            .map(|e| {
                let pos = parts.iter().position(|m| **m == e.map).unwrap_or_else(|| {
                    parts.push(&e.map);
                    parts.len() - 1
                });
                json!({ "n": e.map.blocks(), "eta": e.rule.eta(1), "partition": pos })
            })
            .collect();
        json!({ "rho": self.rho, "epsilon": self.epsilon, "entries": entries, "partitions": parts })
    }
}

/// Largest per-round spread `max_v f(v) − min_v f(v)` of a linear loss sequence.
pub fn exact_rho(body: &BodySpec, losses: &LossSeq) -> f64 {
    let mut rho = 0.0f64;
    for t in 0..losses.horizon() {
        let g = losses.gradient(t).to_dense(losses.d);
        let vals = body.vertex_values(&g);
        let (lo, hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(*v), b.max(*v))
            });
        rho = rho.max(hi - lo);
    }
    rho
}

/// Euclidean steps after odd rounds and entropic steps after even rounds.
pub fn alternating_omd_run(
    body: &BodySpec,
    losses: &LossSeq,
    eta_euc: f64,
    eta_ent: f64,
    x1: &[f64],
) -> Result<RunRecord> {
    check_len(x1.len(), body.dim(), "x1")?;
    if !(eta_euc > 0.0 && eta_ent > 0.0) {
        return Err(invalid("step sizes must be positive"));
    }
    let horizon = losses.horizon();
    let mut euc = Stepper::new(MirrorMapSpec::Euclidean, body.clone());
    let mut ent = Stepper::new(MirrorMapSpec::Entropic, body.clone());
    let mut tracker = RegretTracker::new(body, horizon);
    let mut iterates = Vec::with_capacity(horizon);
    let mut x = x1.to_vec();
    for t in 0..horizon {
        tracker.observe(losses, t, &x);
        iterates.push(x.clone());
        if t + 1 < horizon {
            let g = losses.gradient(t);
            let r = if (t + 1) % 2 == 1 {
                euc.step(&x, &g, eta_euc)
            } else {
                ent.step(&x, &g, eta_ent)
            };
            x = r.map_err(|e| Error::StepFailed {
                t: t + 1,
                source: Box::new(e),
            })?;
        }
    }
    let (k, v) = tracker.optimum();
    Ok(RunRecord {
        x1_coord: iterates.iter().map(|x| x[0]).collect(),
        iterates: Some(iterates),
        losses: tracker.losses,
        cum_loss: tracker.cum_loss,
        offline_opt_value: v,
        offline_opt_vertex: k,
        regret_trace: tracker.trace,
        seed: 0,
        eta: eta_euc,
        rescale: 1.0,
        manifest: json!({
            "body": body, "strategy": "alternating", "eta_euc": eta_euc, "eta_ent": eta_ent, "horizon": horizon,
        }),
    })
}

/// Output of [`mirror_weights_run`].
#[derive(Debug, Clone)]
pub struct MetaRecord {
    pub meta: RunRecord,
    pub experts: Vec<RunRecord>,
    /// Probability vector after each round's update, every `weight_stride` rounds.
    pub weights: Vec<Vec<f64>>,
    pub weight_stride: usize,
    /// Round at which each expert failed and was frozen, if it did.
    pub failed_at: Vec<Option<usize>>,
}

struct ExpertState {
    stepper: Stepper,
    rule: StepSizeRule,
    rescale: f64,
    z: Vec<f64>,
    failed_at: Option<usize>,
    losses: Vec<f64>,
    x1_coord: Vec<f64>,
}

impl ExpertState {
    fn point(&self) -> Vec<f64> {
        self.z.iter().map(|v| v * self.rescale).collect()
    }
}

/// Multiplicative weights over the experts of `portfolio`, each running its
/// own mirror descent; plays the probability-weighted average iterate.
///
/// An expert whose step fails is frozen at its last iterate with a warning.
/// Its losses keep feeding its weight.
pub fn mirror_weights_run(
    body: &BodySpec,
    portfolio: &Portfolio,
    losses: &LossSeq,
    x1: &[f64],
) -> Result<MetaRecord> {
    mirror_weights_run_with_stride(body, portfolio, losses, x1, 1)
}

pub fn mirror_weights_run_with_stride(
    body: &BodySpec,
    portfolio: &Portfolio,
    losses: &LossSeq,
    x1: &[f64],
    weight_stride: usize,
) -> Result<MetaRecord> {
    let d = body.dim();
    check_len(x1.len(), d, "x1")?;
    check_len(losses.d, d, "loss dimension")?;
    let horizon = losses.horizon();
    let n = portfolio.len();
    if horizon == 0 || (horizon as f64) < (n as f64).ln() {
        return Err(invalid("horizon must be at least ln N"));
    }
    if !body.contains(x1, 1e-9) {
        return Err(invalid("x1 is not in the body"));
    }
    for e in &portfolio.entries {
        e.rule.validate()?;
    }
    let mut experts: Vec<ExpertState> = portfolio
        .entries
        .iter()
        .map(|e| {
            let r = body.max_vertex_norm(&e.map)?;
            let rescale = if r > 1.0 + 1e-12 { r } else { 1.0 };
            Ok(ExpertState {
                stepper: Stepper::new(e.map.clone(), body.scaled(1.0 / rescale)),
                rule: e.rule.clone(),
                rescale,
                z: x1.iter().map(|v| v / rescale).collect(),
                failed_at: None,
                losses: Vec::with_capacity(horizon),
                x1_coord: Vec::with_capacity(horizon),
            })
        })
        .collect::<Result<_>>()?;

    let mut logw = vec![0.0; n];
    let mut p = vec![1.0 / n as f64; n];
    let mut tracker = RegretTracker::new(body, horizon);
    let mut best_trace = Vec::with_capacity(horizon);
    let mut played_x1 = Vec::with_capacity(horizon);
    let mut weights = Vec::new();
    let stride = weight_stride.max(1);
    let scale_eps = portfolio.epsilon / portfolio.rho;

    for t in 0..horizon {
        let points: Vec<Vec<f64>> = experts.iter().map(ExpertState::point).collect();
        let mut x = vec![0.0; d];
        for (pl, xl) in p.iter().zip(&points) {
            for (xi, v) in x.iter_mut().zip(xl) {
                *xi += pl * v;
            }
        }
        tracker.observe(losses, t, &x);
        played_x1.push(x[0]);
        best_trace.push(tracker.cum_loss - tracker.trace[t]);
        for (e, xl) in experts.iter_mut().zip(&points) {
            e.losses.push(losses.value(t, xl));
            e.x1_coord.push(e.z[0]);
        }
        let round: Vec<f64> = experts.iter().map(|e| e.losses[t]).collect();
        p = weight_update(&mut logw, &round, scale_eps);
        if t % stride == 0 || t + 1 == horizon {
            weights.push(p.clone());
        }
        if t + 1 < horizon {
            let g = losses.gradient(t);
            experts.par_iter_mut().enumerate().for_each(|(l, e)| {
                if e.failed_at.is_some() {
                    return;
                }
                let gs = g.scaled(e.rescale);
                match e.stepper.step(&e.z, &gs, e.rule.eta(t + 1)) {
                    Ok(z) => e.z = z,
                    Err(err) => {
                        log::warn!("expert {l} failed at round {}: {err}; freezing it", t + 1);
                        e.failed_at = Some(t + 1);
                    }
                }
            });
        }
    }

    let (k, v) = tracker.optimum();
    let expert_records = experts
        .into_iter()
        .zip(&portfolio.entries)
        .map(|(e, spec)| {
            let mut cum = 0.0;
            let trace = e
                .losses
                .iter()
                .zip(&best_trace)
                .map(|(f, b)| {
                    cum += f;
                    cum - b
                })
                .collect();
            RunRecord {
                iterates: None,
                x1_coord: e.x1_coord,
                cum_loss: cum,
                losses: e.losses,
                offline_opt_value: v,
                offline_opt_vertex: k,
                regret_trace: trace,
                seed: 0,
                eta: spec.rule.eta(1),
                rescale: e.rescale,
                manifest: json!({ "map": spec.map, "rule": spec.rule, "failed_at": e.failed_at }),
            }
        })
        .collect::<Vec<_>>();
    let failed_at = expert_records
        .iter()
        .map(|r| r.manifest["failed_at"].as_u64().map(|v| v as usize))
        .collect();
    let meta = RunRecord {
        iterates: None,
        x1_coord: played_x1,
        losses: tracker.losses,
        cum_loss: tracker.cum_loss,
        offline_opt_value: v,
        offline_opt_vertex: k,
        regret_trace: tracker.trace,
        seed: 0,
        eta: portfolio.epsilon,
        rescale: 1.0,
        manifest: json!({ "body": body, "strategy": "mirror_weights", "portfolio": portfolio.summary_json() }),
    };
    Ok(MetaRecord {
        meta,
        experts: expert_records,
        weights,
        weight_stride: stride,
        failed_at,
    })
}

/// Multiplies the weights by `exp(−scale·f_ℓ)` in log space, subtracting the
/// running max, and returns the normalized probabilities.
pub fn weight_update(logw: &mut [f64], losses: &[f64], scale: f64) -> Vec<f64> {
    for (lw, f) in logw.iter_mut().zip(losses) {
        *lw -= scale * f;
    }
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    logw.iter_mut().for_each(|v| *v -= max);
    let total: f64 = logw.iter().map(|v| v.exp()).sum();
    logw.iter().map(|v| v.exp() / total).collect()
}

/// Block norms `n = 2^0 … d`, each with step sizes `η_0·2^j` for
/// `|j| ≤ ⌈log₂ d⌉`, where `η_0 = (D_euc/G_euc)·√(2/T)`.
///
/// `preview` supplies `(D_euc, G_euc)`; without it `D_euc` is the largest
/// Euclidean distance from `x1` to a vertex and `G_euc = √d`. `rho` defaults
/// to 2, valid for bodies inside the L1 unit ball.
pub fn build_block_norm_portfolio<R: Rng + ?Sized>(
    d: usize,
    horizon: usize,
    body: &BodySpec,
    x1: &[f64],
    preview: Option<(f64, f64)>,
    rho: Option<f64>,
    rng: &mut R,
) -> Result<Portfolio> {
    if d == 0 || !d.is_power_of_two() {
        return Err(invalid(format!("dimension {d} is not a power of two")));
    }
    check_len(body.dim(), d, "body dimension")?;
    let log2d = d.trailing_zeros() as i32;
    let (de, ge) = match preview {
        Some(p) => p,
        None => (crate::omd::euclidean_diameter(body, x1)?, (d as f64).sqrt()),
    };
    let eta0 = de / ge * (2.0 / horizon as f64).sqrt();
    let rho = match rho {
        Some(r) => r,
        None => {
            if body.max_vertex_norm(&MirrorMapSpec::Entropic)? > 1.0 + 1e-12 {
                return Err(invalid(
                    "body is outside the L1 unit ball; pass rho explicitly",
                ));
            }
            2.0
        }
    };
    let mut entries = Vec::new();
    for k in 0..=log2d {
        let map = MirrorMapSpec::block_norm(random_equal_partition(d, 1 << k, rng)?);
        for j in -log2d..=log2d {
            entries.push(Expert {
                map: map.clone(),
                rule: StepSizeRule::Fixed {
                    eta: eta0 * 2f64.powi(j),
                },
            });
        }
    }
    Portfolio::new(entries, rho, horizon)
}

/// Index and final regret of the best expert.
pub fn best_expert(rec: &MetaRecord) -> (usize, f64) {
    let finals: Vec<f64> = rec.experts.iter().map(|r| r.final_regret()).collect();
    argmin_first(&finals)
}
