//! Online mirror descent: the step, the online loop, step-size rules and
//! regret accounting.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{check_len, invalid, Error, Result};
use crate::instances::{LossSeq, SparseVec};
use crate::mirror_maps::{potential_grad, potential_value, MirrorMapSpec};
use crate::projection::{argmin_first, project_dual, BodySpec, ProjectOptions, WarmStart};

/// Above this many stored coordinates a run keeps only `x_1` per round.
pub const FULL_ITERATE_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSizeRule {
    Fixed {
        eta: f64,
    },
    /// `η = (D/G)·√(2/T)`
    TheorySqrt2 {
        diameter: f64,
        grad_bound: f64,
        horizon: usize,
    },
    /// `η = D/(G√T)`
    TheoryPlain {
        diameter: f64,
        grad_bound: f64,
        horizon: usize,
    },
    /// One step size per round.
    Schedule {
        etas: Vec<f64>,
    },
}

impl StepSizeRule {
    /// Step size used after round `t` (1-based).
    pub fn eta(&self, t: usize) -> f64 {
        match self {
            StepSizeRule::Fixed { eta } => *eta,
            StepSizeRule::TheorySqrt2 {
                diameter,
                grad_bound,
                horizon,
            } => diameter / grad_bound * (2.0 / *horizon as f64).sqrt(),
            StepSizeRule::TheoryPlain {
                diameter,
                grad_bound,
                horizon,
            } => diameter / (grad_bound * (*horizon as f64).sqrt()),
            StepSizeRule::Schedule { etas } => etas[(t - 1).min(etas.len() - 1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            StepSizeRule::Fixed { eta } => *eta > 0.0,
            StepSizeRule::TheorySqrt2 {
                diameter,
                grad_bound,
                horizon,
            }
            | StepSizeRule::TheoryPlain {
                diameter,
                grad_bound,
                horizon,
            } => *diameter > 0.0 && *grad_bound > 0.0 && *horizon > 0,
            StepSizeRule::Schedule { etas } => !etas.is_empty() && etas.iter().all(|e| *e > 0.0),
        };
        if ok && (1..=1).all(|t| self.eta(t).is_finite()) {
            Ok(())
        } else {
            Err(invalid(format!(
                "step-size rule needs positive finite parameters: {self:?}"
            )))
        }
    }
}

/// `∇h(x)`, with `−∞` where the entropic map meets a zero coordinate.
pub fn dual_point(m: &MirrorMapSpec, x: &[f64]) -> Result<Vec<f64>> {
    match m {
        MirrorMapSpec::Entropic => x
            .iter()
            .map(|&v| {
                if v < 0.0 {
                    Err(Error::Domain(format!(
                        "entropic map at negative coordinate {v}"
                    )))
                } else {
                    Ok(1.0 + v.ln())
                }
            })
            .collect(),
        _ => potential_grad(m, x),
    }
}

/// Reusable mirror descent stepper for one (map, body) pair.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub map: MirrorMapSpec,
    pub body: BodySpec,
    pub opts: ProjectOptions,
    warm: WarmStart,
}

impl Stepper {
    pub fn new(map: MirrorMapSpec, body: BodySpec) -> Self {
        Stepper {
            map,
            body,
            opts: ProjectOptions::default(),
            warm: WarmStart::default(),
        }
    }

    /// `Π_K((∇h)^{-1}(∇h(x) − η g))`.
    pub fn step(&mut self, x: &[f64], grad: &SparseVec, eta: f64) -> Result<Vec<f64>> {
        if !(eta > 0.0) {
            return Err(invalid("step size must be positive"));
        }
        let mut theta = dual_point(&self.map, x)?;
        grad.add_into(-eta, &mut theta);
        project_dual(&self.map, &self.body, &theta, &self.opts, &mut self.warm)
    }
}

/// One mirror descent step with a dense gradient.
pub fn mirror_descent_step(
    x: &[f64],
    body: &BodySpec,
    m: &MirrorMapSpec,
    grad: &[f64],
    eta: f64,
) -> Result<Vec<f64>> {
    check_len(x.len(), body.dim(), "iterate")?;
    check_len(grad.len(), body.dim(), "gradient")?;
    Stepper::new(m.clone(), body.clone()).step(x, &SparseVec::from_dense(grad), eta)
}

/// Everything recorded about one online run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    /// `x^(1..T)` in the original scale, when small enough to keep.
    pub iterates: Option<Vec<Vec<f64>>>,
    /// First coordinate of every iterate, in the scale the algorithm ran in.
    pub x1_coord: Vec<f64>,
    pub losses: Vec<f64>,
    pub cum_loss: f64,
    pub offline_opt_value: f64,
    pub offline_opt_vertex: usize,
    /// `regret(t)` for `t = 1..T` against the best vertex for the first `t` rounds.
    pub regret_trace: Vec<f64>,
    pub seed: u64,
    pub eta: f64,
    /// Factor the body was divided by before running (1 when unscaled).
    pub rescale: f64,
    pub manifest: Value,
}

impl RunRecord {
    pub fn horizon(&self) -> usize {
        self.losses.len()
    }

    pub fn final_regret(&self) -> f64 {
        *self.regret_trace.last().unwrap_or(&0.0)
    }

    /// CSV with columns `t,loss,cum_loss,regret,x1_coord`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,loss,cum_loss,regret,x1_coord")?;
        let mut cum = 0.0;
        for t in 0..self.horizon() {
            cum += self.losses[t];
            writeln!(
                w,
                "{},{:?},{:?},{:?},{:?}",
                t + 1,
                self.losses[t],
                cum,
                self.regret_trace[t],
                self.x1_coord[t]
            )?;
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let Value::Object(ref mut o) = self.manifest {
            o.insert("seed".into(), json!(seed));
        }
        self
    }
}

/// Running regret bookkeeping shared by the single-map and meta loops.
pub(crate) struct RegretTracker<'a> {
    body: &'a BodySpec,
    cum_grad: Vec<f64>,
    pub cum_loss: f64,
    pub losses: Vec<f64>,
    pub trace: Vec<f64>,
}

impl<'a> RegretTracker<'a> {
    pub fn new(body: &'a BodySpec, horizon: usize) -> Self {
        RegretTracker {
            body,
            cum_grad: vec![0.0; body.dim()],
            cum_loss: 0.0,
            losses: Vec::with_capacity(horizon),
            trace: Vec::with_capacity(horizon),
        }
    }

    /// Records the loss of `x` at round `t` (0-based) in original units.
    pub fn observe(&mut self, losses: &LossSeq, t: usize, x: &[f64]) {
        let f = losses.value(t, x);
        self.losses.push(f);
        self.cum_loss += f;
        losses.vectors[t].add_into(losses.sign.factor(), &mut self.cum_grad);
        let (_, best) = argmin_first(&self.body.vertex_values(&self.cum_grad));
        self.trace.push(self.cum_loss - best);
    }

    pub fn optimum(&self) -> (usize, f64) {
        argmin_first(&self.body.vertex_values(&self.cum_grad))
    }
}

/// Online mirror descent with the step sizes of `rule`.
///
/// Bodies that stick out of the map's unit ball are divided by
/// `R = max vertex norm` first and the losses multiplied by `R`; the loss
/// values, and hence regret, are unchanged by this, so everything is reported
/// in original units.
pub fn run_omd(
    body: &BodySpec,
    m: &MirrorMapSpec,
    losses: &LossSeq,
    rule: &StepSizeRule,
    x1: &[f64],
) -> Result<RunRecord> {
    let d = body.dim();
    check_len(x1.len(), d, "x1")?;
    check_len(losses.d, d, "loss dimension")?;
    if losses.horizon() == 0 {
        return Err(invalid("empty loss sequence"));
    }
    rule.validate()?;
    if !body.contains(x1, 1e-9) {
        return Err(invalid("x1 is not in the body"));
    }
    let horizon = losses.horizon();
    let r = body.max_vertex_norm(m)?;
    let rescale = if r > 1.0 + 1e-12 { r } else { 1.0 };
    let mut stepper = Stepper::new(m.clone(), body.scaled(1.0 / rescale));
    let keep_full = d.saturating_mul(horizon) <= FULL_ITERATE_LIMIT;
    let mut iterates = keep_full.then(|| Vec::with_capacity(horizon));
    let mut x1_coord = Vec::with_capacity(horizon);
    let mut tracker = RegretTracker::new(body, horizon);

    let mut z: Vec<f64> = x1.iter().map(|v| v / rescale).collect();
    for t in 0..horizon {
        let x: Vec<f64> = if rescale == 1.0 {
            z.clone()
        } else {
            z.iter().map(|v| v * rescale).collect()
        };
        tracker.observe(losses, t, &x);
        x1_coord.push(z[0]);
        if let Some(it) = iterates.as_mut() {
            it.push(x);
        }
        if t + 1 < horizon {
            let g = losses.gradient(t).scaled(rescale);
            z = stepper
                .step(&z, &g, rule.eta(t + 1))
                .map_err(|e| Error::StepFailed {
                    t: t + 1,
                    source: Box::new(e),
                })?;
        }
    }
    let (k, v) = tracker.optimum();
    let manifest = json!({
        "body": body,
        "map": m,
        "rule": rule,
        "eta": rule.eta(1),
        "rescale": rescale,
        "rescaled": rescale != 1.0,
        "horizon": horizon,
        "d": d,
        "seed": 0,
    });
    Ok(RunRecord {
        iterates,
        x1_coord,
        losses: tracker.losses,
        cum_loss: tracker.cum_loss,
        offline_opt_value: v,
        offline_opt_vertex: k,
        regret_trace: tracker.trace,
        seed: 0,
        eta: rule.eta(1),
        rescale,
        manifest,
    })
}

/// Best vertex in hindsight for linear losses: `argmin_v Σ_t f^(t)(v)`, lowest index on ties.
pub fn exact_offline_optimum(body: &BodySpec, losses: &LossSeq) -> Result<(usize, f64)> {
    check_len(losses.d, body.dim(), "loss dimension")?;
    Ok(argmin_first(&body.vertex_values(&losses.total_gradient())))
}

/// `√(max_v B(v ‖ x1))` over the vertices.
pub fn diameter(body: &BodySpec, m: &MirrorMapSpec, x1: &[f64]) -> Result<f64> {
    check_len(x1.len(), body.dim(), "x1")?;
    let g = potential_grad(m, x1)?;
    let hx = potential_value(m, x1)?;
    let gx: f64 = g.iter().zip(x1).map(|(a, b)| a * b).sum();
    let hv = body.vertex_potentials(m)?;
    let gv = body.vertex_values(&g);
    let max = hv
        .iter()
        .zip(&gv)
        .map(|(h, l)| h - hx - (l - gx))
        .fold(0.0f64, f64::max);
    Ok(max.sqrt())
}

/// `max_v ‖v − x1‖₂` over the vertices.
pub fn euclidean_diameter(body: &BodySpec, x1: &[f64]) -> Result<f64> {
    check_len(x1.len(), body.dim(), "x1")?;
    let sq: f64 = x1.iter().map(|v| v * v).sum();
    let cross = body.vertex_values(x1);
    let vsq = body.vertex_potentials(&MirrorMapSpec::Euclidean)?;
    let max = vsq
        .iter()
        .zip(&cross)
        .map(|(h, c)| 2.0 * h - 2.0 * c + sq)
        .fold(0.0f64, f64::max);
    Ok(max.sqrt())
}

/// Dual norm of a sparse vector, touching only its support.
pub fn sparse_dual_norm(m: &MirrorMapSpec, g: &SparseVec) -> f64 {
    match m {
        MirrorMapSpec::Euclidean => g.val.iter().map(|v| v * v).sum::<f64>().sqrt(),
        MirrorMapSpec::Entropic => g.val.iter().fold(0.0, |a, v| a.max(v.abs())),
        MirrorMapSpec::BlockNorm { partition, .. } => {
            let bo = partition.block_of();
            let mut acc: Vec<(usize, f64)> = Vec::with_capacity(g.nnz());
            for (&i, v) in g.idx.iter().zip(&g.val) {
                match acc.iter_mut().find(|e| e.0 == bo[i]) {
                    Some(e) => e.1 += v * v,
                    None => acc.push((bo[i], v * v)),
                }
            }
            acc.iter().fold(0.0f64, |a, e| a.max(e.1)).sqrt()
        }
    }
}

/// `√(mean of (dual norm)²)` over `samples` draws of the generator.
pub fn gradient_bound_estimate<R, F>(
    m: &MirrorMapSpec,
    mut loss_gen: F,
    samples: usize,
    rng: &mut R,
) -> f64
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> SparseVec,
{
    let total: f64 = (0..samples)
        .map(|_| sparse_dual_norm(m, &loss_gen(rng)).powi(2))
        .sum();
    (total / samples.max(1) as f64).sqrt()
}

/// `max_t` dual norm of the realized gradients.
pub fn empirical_grad_bound(m: &MirrorMapSpec, losses: &LossSeq) -> f64 {
    losses
        .vectors
        .iter()
        .map(|v| sparse_dual_norm(m, v))
        .fold(0.0, f64::max)
}

/// L2 distance between `x` and its own Bregman re-projection.
pub fn reprojection_residual(m: &MirrorMapSpec, body: &BodySpec, x: &[f64]) -> Result<f64> {
    let theta = dual_point(m, x)?;
    let z = project_dual(
        m,
        body,
        &theta,
        &ProjectOptions::default(),
        &mut WarmStart::default(),
    )?;
    Ok(z.iter()
        .zip(x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_equal_partition, Partition};
    use crate::instances::{figure1_losses, sparse_support, Sign};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn constant_losses(c: Vec<f64>, horizon: usize, sign: Sign) -> LossSeq {
        let d = c.len();
        LossSeq::new(d, sign, vec![SparseVec::from_dense(&c); horizon], None).unwrap()
    }

    #[test]
    fn step_rules() {
        let r = StepSizeRule::TheorySqrt2 {
            diameter: 2.0,
            grad_bound: 4.0,
            horizon: 8,
        };
        assert!((r.eta(1) - 0.25).abs() < 1e-15);
        let r = StepSizeRule::TheoryPlain {
            diameter: 2.0,
            grad_bound: 4.0,
            horizon: 16,
        };
        assert!((r.eta(3) - 0.125).abs() < 1e-15);
        assert!(StepSizeRule::Fixed { eta: 0.0 }.validate().is_err());
        let s = StepSizeRule::Schedule {
            etas: vec![0.1, 0.2],
        };
        assert_eq!((s.eta(1), s.eta(2), s.eta(9)), (0.1, 0.2, 0.2));
    }

    #[test]
    fn step_examples() {
        let body = BodySpec::simplex(2);
        let x = [0.5, 0.5];
        for m in [MirrorMapSpec::Euclidean, MirrorMapSpec::Entropic] {
            let z = mirror_descent_step(&x, &body, &m, &[0.0, 0.0], 0.3).unwrap();
            assert!((z[0] - 0.5).abs() < 1e-12);
        }
        for eta in [0.1, 0.5, 0.9] {
            let z = mirror_descent_step(&x, &body, &MirrorMapSpec::Euclidean, &[-1.0, 0.0], eta)
                .unwrap();
            assert!((z[0] - (0.5 + eta / 2.0)).abs() < 1e-12);
            let z = mirror_descent_step(&x, &body, &MirrorMapSpec::Entropic, &[0.0, -1.0], eta)
                .unwrap();
            let e = f64::exp(eta);
            assert!((z[0] - 1.0 / (1.0 + e)).abs() < 1e-12);
            assert!((z[1] - e / (1.0 + e)).abs() < 1e-12);
        }
        // zero mass stays at zero under the entropic map
        let z = mirror_descent_step(
            &[1.0, 0.0],
            &body,
            &MirrorMapSpec::Entropic,
            &[1.0, -5.0],
            1.0,
        )
        .unwrap();
        assert_eq!(z, vec![1.0, 0.0]);
    }

    #[test]
    fn run_omd_hand_iterates() {
        let body = BodySpec::simplex(2);
        let losses = constant_losses(vec![0.0, 1.0], 3, Sign::Negated);
        let rec = run_omd(
            &body,
            &MirrorMapSpec::Euclidean,
            &losses,
            &StepSizeRule::Fixed { eta: 0.1 },
            &[0.5, 0.5],
        )
        .unwrap();
        let it = rec.iterates.as_ref().unwrap();
        for (x, want) in it.iter().zip([0.5, 0.45, 0.40]) {
            assert!((x[0] - want).abs() < 1e-12 && (x[1] - (1.0 - want)).abs() < 1e-12);
        }
        let last = rec.regret_trace.last().unwrap();
        assert!((last - (rec.cum_loss - rec.offline_opt_value)).abs() < 1e-12);
        assert_eq!(rec.offline_opt_vertex, 1);
    }

    #[test]
    fn single_round_regret() {
        let body = BodySpec::simplex(3);
        let losses = constant_losses(vec![0.3, -0.2, 0.5], 1, Sign::Plain);
        let x1 = [0.2, 0.3, 0.5];
        let rec = run_omd(
            &body,
            &MirrorMapSpec::Entropic,
            &losses,
            &StepSizeRule::Fixed { eta: 1.0 },
            &x1,
        )
        .unwrap();
        let f1 = 0.3 * 0.2 - 0.2 * 0.3 + 0.5 * 0.5;
        assert!((rec.final_regret() - (f1 + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn offline_optimum_examples() {
        let d = 5;
        let body = BodySpec::simplex(d);
        let mut e1 = vec![0.0; d];
        e1[0] = 1.0;
        assert_eq!(
            exact_offline_optimum(&body, &constant_losses(e1, 7, Sign::Negated)).unwrap(),
            (0, -7.0)
        );
        assert_eq!(
            exact_offline_optimum(&body, &constant_losses(vec![0.0; d], 1, Sign::Negated)).unwrap(),
            (0, 0.0)
        );
        let mut r = rng(1);
        let body = BodySpec::simplex(3);
        for _ in 0..20 {
            let vecs: Vec<SparseVec> = (0..5)
                .map(|_| {
                    SparseVec::from_dense(
                        &(0..3).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>(),
                    )
                })
                .collect();
            let l = LossSeq::new(3, Sign::Plain, vecs, None).unwrap();
            let (_, v) = exact_offline_optimum(&body, &l).unwrap();
            let total = l.total_gradient();
            let mut grid = f64::INFINITY;
            for a in 0..=100 {
                for b in 0..=(100 - a) {
                    let z = [
                        a as f64 / 100.0,
                        b as f64 / 100.0,
                        (100 - a - b) as f64 / 100.0,
                    ];
                    grid = grid.min(total.iter().zip(&z).map(|(g, x)| g * x).sum());
                }
            }
            let scale = total.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!((v - grid).abs() <= 1e-2 * scale + 1e-12);
        }
    }

    #[test]
    fn diameter_examples() {
        let single = BodySpec::from_vertices(vec![vec![0.3, 0.7]], "point").unwrap();
        assert_eq!(
            diameter(&single, &MirrorMapSpec::Euclidean, &[0.3, 0.7]).unwrap(),
            0.0
        );
        for d in [4usize, 64, 4096] {
            let body = BodySpec::simplex(d);
            let x1 = vec![1.0 / d as f64; d];
            let de = diameter(&body, &MirrorMapSpec::Entropic, &x1).unwrap();
            assert!((de - (d as f64).ln().sqrt()).abs() < 1e-9);
            let du = diameter(&body, &MirrorMapSpec::Euclidean, &x1).unwrap();
            assert!((du - (0.5 * (1.0 - 1.0 / d as f64)).sqrt()).abs() < 1e-12);
            let de = euclidean_diameter(&body, &x1).unwrap();
            assert!((de - (1.0 - 1.0 / d as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn diameter_bound_on_simplex() {
        let mut r = rng(2);
        let d = 256;
        let body = BodySpec::simplex(d);
        for k in 0..=8 {
            let n = 1 << k;
            let m = MirrorMapSpec::block_norm(random_equal_partition(d, n, &mut r).unwrap());
            for _ in 0..5 {
                let mut x: Vec<f64> = (0..d).map(|_| r.gen_range(0.0..1.0)).collect();
                let s: f64 = x.iter().sum();
                x.iter_mut().for_each(|v| *v /= s);
                let bound = 2.0 * (1.0 + (n as f64).ln()).sqrt();
                assert!(diameter(&body, &m, &x).unwrap() <= bound + 1e-9);
            }
        }
    }

    #[test]
    fn gradient_bound_examples() {
        let d = 64;
        let c = SparseVec::indicator([1, 5, 9, 20, 33, 40, 41, 63]);
        let all = MirrorMapSpec::block_norm(Partition::contiguous(d, d).unwrap());
        let one = MirrorMapSpec::block_norm(Partition::contiguous(d, 1).unwrap());
        assert_eq!(
            gradient_bound_estimate(&all, |_| c.clone(), 10, &mut rng(0)),
            1.0
        );
        assert!(
            (gradient_bound_estimate(&one, |_| c.clone(), 10, &mut rng(0)) - 8f64.sqrt()).abs()
                < 1e-12
        );
        let m = MirrorMapSpec::block_norm(random_equal_partition(d, 8, &mut rng(3)).unwrap());
        let g = gradient_bound_estimate(
            &m,
            |r| SparseVec::indicator(sparse_support(d, 8, None, r)),
            100_000,
            &mut rng(4),
        );
        assert!(g * g <= 6.0 * 8f64.ln());
    }

    #[test]
    fn regret_within_theory_bound_and_feasible() {
        let mut r = rng(5);
        let d = 64;
        let body = BodySpec::simplex(d);
        let x1 = vec![1.0 / d as f64; d];
        for n in [1, 4, 64] {
            let m = MirrorMapSpec::block_norm(random_equal_partition(d, n, &mut r).unwrap());
            let losses = figure1_losses(d, 100, &mut r).unwrap();
            let dm = diameter(&body, &m, &x1).unwrap();
            let g = empirical_grad_bound(&m, &losses);
            let rule = StepSizeRule::TheorySqrt2 {
                diameter: dm,
                grad_bound: g,
                horizon: 100,
            };
            let rec = run_omd(&body, &m, &losses, &rule, &x1).unwrap();
            assert!(rec.final_regret() <= 2f64.sqrt() * dm * g * 10.0 + 1e-6);
            assert!(rec.final_regret() >= 0.0);
            for x in rec.iterates.as_ref().unwrap().iter().step_by(10) {
                assert!(reprojection_residual(&m, &body, x).unwrap() <= 1e-6);
            }
            let again = run_omd(&body, &m, &losses, &rule, &x1).unwrap();
            assert_eq!(rec.regret_trace, again.regret_trace);
        }
    }

    #[test]
    fn rescales_bodies_outside_unit_ball() {
        let d = 64;
        let mut r = rng(6);
        let inst = crate::instances::poly_instance_unscaled(d, 30, &mut r).unwrap();
        let m = MirrorMapSpec::block_norm(random_equal_partition(d, d, &mut r).unwrap());
        let rule = StepSizeRule::Fixed { eta: 0.05 };
        let rec = run_omd(&inst.body, &m, &inst.losses, &rule, &inst.x1).unwrap();
        assert!((rec.rescale - 4.0).abs() < 1e-12);
        assert_eq!(rec.manifest["rescaled"], json!(true));
        let scaled = crate::instances::poly_improvement_instance(d, 30, &mut rng(6)).unwrap();
        let rec2 = run_omd(&scaled.body, &m, &scaled.losses, &rule, &scaled.x1);
        // the scaled body is already inside the L1 ball, so nothing is rescaled there
        assert_eq!(rec2.unwrap().rescale, 1.0);
        for x in rec.iterates.as_ref().unwrap() {
            assert!(inst.body.contains(x, 1e-9));
        }
    }

    #[test]
    fn csv_has_one_row_per_round() {
        let body = BodySpec::simplex(2);
        let losses = constant_losses(vec![0.0, 1.0], 4, Sign::Negated);
        let rec = run_omd(
            &body,
            &MirrorMapSpec::Euclidean,
            &losses,
            &StepSizeRule::Fixed { eta: 0.1 },
            &[0.5, 0.5],
        )
        .unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("t,loss,cum_loss,regret,x1_coord"));
    }
}
