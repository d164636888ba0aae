//! Convex bodies given by their vertices, and Bregman projections onto them.
//!
//! Three shapes are supported. `Simplex` is `conv(s e_1, …, s e_d)`.
//! `SimplexWithCenter` adds the point `c·1`. `Vertices` is an explicit list.
//! The first two never materialize their vertex lists, so linear minimization
//! and membership are O(d).
//!
//! Every projection is posed in the dual: given `θ`, find
//! `argmin_{z ∈ K} h(z) − ⟨θ, z⟩`. This equals the Bregman projection of
//! `y = (∇h)^{-1}(θ)`. Structured bodies reduce to a one-dimensional root in
//! the multiplier `ν` of the sum constraint. The center hull adds an outer
//! convex search over the common lower bound `L = c·μ` of all coordinates.
//! Anything else, and any structured result whose duality gap is too large,
//! goes through away-step Frank–Wolfe.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::geometry::dot;
use crate::mirror_maps::{potential_grad, potential_value, MirrorMapSpec};
use crate::scalar::{brent, monotone_root};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 100_000;
const ENTROPIC_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Vertices `scale · e_i`.
    Simplex {
        scale: f64,
    },
    /// Vertices `scale · e_i` and `center · 1`.
    SimplexWithCenter {
        scale: f64,
        center: f64,
    },
    Vertices {
        vertices: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub d: usize,
    pub label: String,
    pub shape: Shape,
}

impl BodySpec {
    /// The probability simplex `Δ_d`.
    pub fn simplex(d: usize) -> Self {
        BodySpec {
            d,
            label: format!("simplex({d})"),
            shape: Shape::Simplex { scale: 1.0 },
        }
    }

    /// `conv(e_1, …, e_d, a·1)`.
    pub fn simplex_hull_with_center(d: usize, a: f64) -> Self {
        BodySpec {
            d,
            label: format!("simplex_hull_with_center({d}, {a})"),
            shape: Shape::SimplexWithCenter {
                scale: 1.0,
                center: a,
            },
        }
    }

    pub fn from_vertices(vertices: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        let d = vertices
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("body needs at least one vertex"))?;
        if d == 0 {
            return Err(invalid("zero-dimensional body"));
        }
        for v in &vertices {
            check_len(v.len(), d, "vertex")?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid("non-finite vertex coordinate"));
            }
        }
        Ok(BodySpec {
            d,
            label: label.into(),
            shape: Shape::Vertices { vertices },
        })
    }

    /// Every vertex multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let shape = match &self.shape {
            Shape::Simplex { scale } => Shape::Simplex {
                scale: scale * factor,
            },
            Shape::SimplexWithCenter { scale, center } => Shape::SimplexWithCenter {
                scale: scale * factor,
                center: center * factor,
            },
            Shape::Vertices { vertices } => Shape::Vertices {
                vertices: vertices
                    .iter()
                    .map(|v| v.iter().map(|x| x * factor).collect())
                    .collect(),
            },
        };
        BodySpec {
            d: self.d,
            label: format!("{} * {factor}", self.label),
            shape,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_vertices(&self) -> usize {
        match &self.shape {
            Shape::Simplex { .. } => self.d,
            Shape::SimplexWithCenter { .. } => self.d + 1,
            Shape::Vertices { vertices } => vertices.len(),
        }
    }

    pub fn vertex(&self, k: usize) -> Vec<f64> {
        match &self.shape {
            Shape::Simplex { scale } | Shape::SimplexWithCenter { scale, .. } if k < self.d => {
                let mut v = vec![0.0; self.d];
                v[k] = *scale;
                v
            }
            Shape::SimplexWithCenter { center, .. } => vec![*center; self.d],
            Shape::Vertices { vertices } => vertices[k].clone(),
            Shape::Simplex { .. } => panic!("vertex index {k} out of range"),
        }
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        (0..self.num_vertices()).map(|k| self.vertex(k)).collect()
    }

    /// `⟨c, v_k⟩` for every vertex, in index order.
    pub fn vertex_values(&self, c: &[f64]) -> Vec<f64> {
        match &self.shape {
            Shape::Simplex { scale } => c.iter().map(|x| x * scale).collect(),
            Shape::SimplexWithCenter { scale, center } => {
                let mut out: Vec<f64> = c.iter().map(|x| x * scale).collect();
                out.push(center * c.iter().sum::<f64>());
                out
            }
            Shape::Vertices { vertices } => vertices.iter().map(|v| dot(v, c)).collect(),
        }
    }

    /// The potential evaluated at every vertex.
    pub fn vertex_potentials(&self, m: &MirrorMapSpec) -> Result<Vec<f64>> {
        match &self.shape {
            Shape::Simplex { .. } | Shape::SimplexWithCenter { .. } => {
                // h(s e_i) does not depend on i for any supported potential
                let hv = potential_value(m, &self.vertex(0))?;
                let mut out = vec![hv; self.d];
                if let Shape::SimplexWithCenter { center, .. } = self.shape {
                    out.push(potential_value(m, &vec![center; self.d])?);
                }
                Ok(out)
            }
            Shape::Vertices { vertices } => {
                vertices.iter().map(|v| potential_value(m, v)).collect()
            }
        }
    }

    /// Largest primal norm (the map's own norm) over the vertices.
    pub fn max_vertex_norm(&self, m: &MirrorMapSpec) -> Result<f64> {
        match &self.shape {
            Shape::Simplex { .. } => m.norm(&self.vertex(0)),
            Shape::SimplexWithCenter { center, .. } => Ok(m
                .norm(&self.vertex(0))?
                .max(m.norm(&vec![*center; self.d])?)),
            Shape::Vertices { vertices } => vertices
                .iter()
                .try_fold(0.0f64, |acc, v| Ok(acc.max(m.norm(v)?))),
        }
    }

    /// Membership test with absolute slack `tol`. Exact for structured shapes;
    /// explicit vertex lists fall back to the projection residual.
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        if z.len() != self.d || z.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let sum: f64 = z.iter().sum();
        let min = z.iter().cloned().fold(f64::INFINITY, f64::min);
        match self.shape {
            Shape::Simplex { scale } => min >= -tol && (sum - scale).abs() <= tol,
            Shape::SimplexWithCenter { scale, center } => {
                let kappa = self.d as f64 - scale / center;
                let level = if kappa.abs() > 0.0 {
                    (sum - scale) / kappa
                } else {
                    0.0
                };
                level >= -tol
                    && level <= center + tol
                    && min >= level - tol
                    && (sum - scale - kappa * level).abs() <= tol
            }
            Shape::Vertices { .. } => {
                let p = frank_wolfe_dual(
                    &MirrorMapSpec::Euclidean,
                    self,
                    z,
                    tol * 1e-3,
                    DEFAULT_MAX_ITERS,
                    None,
                );
                p.map(|p| {
                    p.iter()
                        .zip(z)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                        <= tol
                })
                .unwrap_or(false)
            }
        }
    }
}

/// Linear minimization oracle: the vertex minimizing `⟨direction, v⟩`, lowest index on ties.
pub fn lmo(body: &BodySpec, direction: &[f64]) -> Result<(usize, Vec<f64>)> {
    check_len(direction.len(), body.d, "lmo direction")?;
    let (k, _) = argmin_first(&body.vertex_values(direction));
    Ok((k, body.vertex(k)))
}

pub(crate) fn argmin_first(vals: &[f64]) -> (usize, f64) {
    let mut best = (0, vals[0]);
    for (k, &v) in vals.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (k, v);
        }
    }
    best
}

/// Euclidean projection onto `Δ_d` by sort-and-threshold.
pub fn euclidean_project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    y.iter().map(|&v| (v - tau).max(0.0)).collect()
}

/// KL projection onto `Δ_d`, which is L1 normalization.
pub fn entropic_project_simplex(y: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = y.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!(
            "entropic projection needs y > 0, got {v}"
        )));
    }
    let s: f64 = y.iter().sum();
    Ok(y.iter().map(|v| v / s).collect())
}

/// Solver settings for [`bregman_project`] and friends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// Multipliers from a previous projection onto the same body, reused as
/// starting guesses. Purely a speed-up; results do not depend on it beyond
/// solver tolerance.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    nu: Option<f64>,
    level: Option<f64>,
    block_logt: Vec<f64>,
}

/// `argmin_{z ∈ body} B_h(z ‖ y)`.
pub fn bregman_project(
    m: &MirrorMapSpec,
    body: &BodySpec,
    y: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    check_len(y.len(), body.d, "bregman_project")?;
    match (m, &body.shape) {
        (MirrorMapSpec::Euclidean, Shape::Simplex { scale }) => {
            let u: Vec<f64> = y.iter().map(|v| v / scale).collect();
            Ok(euclidean_project_simplex(&u)
                .into_iter()
                .map(|v| v * scale)
                .collect())
        }
        (MirrorMapSpec::Entropic, Shape::Simplex { scale }) => Ok(entropic_project_simplex(y)?
            .into_iter()
            .map(|v| v * scale)
            .collect()),
        _ => {
            let theta = potential_grad(m, y)?;
            let opts = ProjectOptions {
                tol,
                ..Default::default()
            };
            project_dual(m, body, &theta, &opts, &mut WarmStart::default())
        }
    }
}

/// `argmin_{z ∈ body} h(z) − ⟨θ, z⟩`. Entries of `θ` may be `-∞` for the
/// entropic map, which pins those coordinates at their lower bound.
pub fn project_dual(
    m: &MirrorMapSpec,
    body: &BodySpec,
    theta: &[f64],
    opts: &ProjectOptions,
    warm: &mut WarmStart,
) -> Result<Vec<f64>> {
    check_len(theta.len(), body.d, "project_dual")?;
    if theta.iter().any(|t| t.is_nan() || *t == f64::INFINITY) {
        return Err(Error::Domain("non-finite dual point".into()));
    }
    let z = match body.shape {
        Shape::Simplex { scale } if matches!(m, MirrorMapSpec::Euclidean) => {
            let u: Vec<f64> = theta.iter().map(|t| t / scale).collect();
            euclidean_project_simplex(&u)
                .into_iter()
                .map(|v| v * scale)
                .collect()
        }
        Shape::Simplex { scale } if matches!(m, MirrorMapSpec::Entropic) => {
            let max = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = theta.iter().map(|t| (t - max).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| scale * v / s).collect()
        }
        Shape::Simplex { scale } => {
            let mut k = Kernel::new(m, theta, body.d, warm);
            k.solve_level(0.0, scale)?
        }
        Shape::SimplexWithCenter { scale, center } => {
            solve_center_hull(m, theta, body.d, scale, center, warm)?
        }
        Shape::Vertices { .. } => {
            return frank_wolfe_dual(m, body, theta, opts.tol, opts.max_iters, None)
        }
    };
    let gap = duality_gap(m, body, theta, &z)?;
    if gap <= opts.tol {
        return Ok(z);
    }
    log::debug!("structured projection gap {gap:e} above tolerance; polishing");
    frank_wolfe_dual(m, body, theta, opts.tol, opts.max_iters, Some(z))
}

/// Bregman projection computed by away-step Frank–Wolfe regardless of shape.
pub fn frank_wolfe_project(
    m: &MirrorMapSpec,
    body: &BodySpec,
    y: &[f64],
    opts: &ProjectOptions,
) -> Result<Vec<f64>> {
    check_len(y.len(), body.d, "frank_wolfe_project")?;
    let theta = potential_grad(m, y)?;
    frank_wolfe_dual(m, body, &theta, opts.tol, opts.max_iters, None)
}

/// `max_v ⟨∇h(z) − θ, z − v⟩` over the vertices.
pub fn duality_gap(m: &MirrorMapSpec, body: &BodySpec, theta: &[f64], z: &[f64]) -> Result<f64> {
    let g = objective_grad(m, theta, z)?;
    let (_, vmin) = argmin_first(&body.vertex_values(&g));
    Ok(dot(&g, z) - vmin)
}

fn objective_grad(m: &MirrorMapSpec, theta: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let gh = match m {
        MirrorMapSpec::Entropic => z
            .iter()
            .map(|&v| 1.0 + v.max(ENTROPIC_FLOOR).ln())
            .collect(),
        _ => potential_grad(m, z)?,
    };
    // ∇h(z) − θ, with 0·∞ resolved as "coordinate pinned at zero"
    Ok(gh
        .iter()
        .zip(theta)
        .map(|(a, t)| {
            if t.is_infinite() {
                f64::MAX.sqrt()
            } else {
                a - t
            }
        })
        .collect())
}

fn objective(m: &MirrorMapSpec, theta: &[f64], z: &[f64]) -> Result<f64> {
    let h = match m {
        MirrorMapSpec::Entropic => z.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum(),
        _ => potential_value(m, z)?,
    };
    let lin: f64 = theta
        .iter()
        .zip(z)
        .map(|(t, v)| if *v == 0.0 { 0.0 } else { t * v })
        .sum();
    Ok(h - lin)
}

/// Per-coordinate solution of `min h(z) − ⟨w, z⟩` subject to `z ≥ L` for
/// block-separable potentials, evaluated at `w = θ − ν`.
struct Kernel<'a> {
    theta: &'a [f64],
    d: usize,
    kind: KernelKind<'a>,
    warm: &'a mut WarmStart,
}

enum KernelKind<'a> {
    /// `z = max(L, t w)` for every coordinate with a fixed `t`.
    Linear(f64),
    Entropic,
    /// Singleton blocks with `p < 2`: `z = max(L, (γ w₊)^{1/(p−1)})`.
    Power {
        gamma: f64,
        p: f64,
    },
    /// Blocks of size > 1 with `p < 2`.
    Blocks {
        blocks: &'a [Vec<usize>],
        gamma: f64,
        p: f64,
    },
}

struct LevelSolution {
    z: Vec<f64>,
    nu: f64,
    /// `Σ_i μ_i` over coordinates held at the lower bound.
    mu_sum: f64,
}

impl<'a> Kernel<'a> {
    fn new(m: &'a MirrorMapSpec, theta: &'a [f64], d: usize, warm: &'a mut WarmStart) -> Self {
        let kind = match m {
            MirrorMapSpec::Euclidean => KernelKind::Linear(1.0),
            MirrorMapSpec::Entropic => KernelKind::Entropic,
            MirrorMapSpec::BlockNorm {
                partition,
                gamma,
                p,
            } => {
                if *p == 2.0 {
                    KernelKind::Linear(*gamma)
                } else if partition.block_size() == 1 {
                    KernelKind::Power {
                        gamma: *gamma,
                        p: *p,
                    }
                } else {
                    if warm.block_logt.len() != partition.num_blocks() {
                        warm.block_logt = vec![f64::NAN; partition.num_blocks()];
                    }
                    KernelKind::Blocks {
                        blocks: partition.blocks(),
                        gamma: *gamma,
                        p: *p,
                    }
                }
            }
        };
        Kernel {
            theta,
            d,
            kind,
            warm,
        }
    }

    /// Fills `z` for the given `ν` and `L`; returns `(Σz, Σμ)`.
    fn eval(&mut self, nu: f64, level: f64, z: &mut [f64], want_mu: bool) -> (f64, f64) {
        let theta = self.theta;
        let mut sum = 0.0;
        let mut mu = 0.0;
        match &self.kind {
            KernelKind::Linear(t) => {
                for i in 0..self.d {
                    let w = theta[i] - nu;
                    let v = t * w;
                    if v > level {
                        z[i] = v;
                    } else {
                        z[i] = level;
                        if want_mu {
                            mu += level / t - w;
                        }
                    }
                    sum += z[i];
                }
            }
            KernelKind::Entropic => {
                let gl = if level > 0.0 {
                    1.0 + level.ln()
                } else {
                    f64::NEG_INFINITY
                };
                for i in 0..self.d {
                    let w = theta[i] - nu;
                    let v = (w - 1.0).exp();
                    if v > level {
                        z[i] = v;
                    } else {
                        z[i] = level;
                        if want_mu {
                            mu += gl - w;
                        }
                    }
                    sum += z[i];
                }
            }
            KernelKind::Power { gamma, p } => {
                let q = 1.0 / (p - 1.0);
                let gl = level.powf(p - 1.0) / gamma;
                for i in 0..self.d {
                    let w = theta[i] - nu;
                    let v = if w > 0.0 { (gamma * w).powf(q) } else { 0.0 };
                    if v > level {
                        z[i] = v;
                    } else {
                        z[i] = level;
                        if want_mu {
                            mu += gl - w;
                        }
                    }
                    sum += z[i];
                }
            }
            KernelKind::Blocks { blocks, gamma, p } => {
                for (j, blk) in blocks.iter().enumerate() {
                    let t = block_scale(
                        theta,
                        nu,
                        level,
                        blk,
                        *gamma,
                        *p,
                        &mut self.warm.block_logt[j],
                    );
                    for &i in blk {
                        let w = theta[i] - nu;
                        let v = t * w;
                        if v > level {
                            z[i] = v;
                        } else {
                            z[i] = level;
                            if want_mu && t > 0.0 {
                                mu += level / t - w;
                            }
                        }
                        sum += z[i];
                    }
                }
            }
        }
        (sum, mu)
    }

    /// Solves the problem with `z ≥ L` and `Σz = σ`.
    fn solve_level_full(&mut self, level: f64, sigma: f64) -> Result<LevelSolution> {
        let mut z = vec![0.0; self.d];
        let guess = self.warm.nu.unwrap_or_else(|| self.default_nu(sigma));
        let scale = self
            .theta
            .iter()
            .filter(|t| t.is_finite())
            .fold(0.0f64, |m, t| m.max(t.abs()));
        let step = 1e-3 * (1.0 + scale);
        let xtol = 1e-15 * (1.0 + scale);
        let nu = monotone_root(
            |nu| {
                let (s, _) = self.eval(nu, level, &mut z, false);
                sigma - s
            },
            guess,
            step,
            xtol,
        );
        if !nu.is_finite() {
            return Err(Error::NotConverged {
                iters: 0,
                gap: f64::NAN,
            });
        }
        self.warm.nu = Some(nu);
        let (sum, mu_sum) = self.eval(nu, level, &mut z, true);
        fix_sum(&mut z, level, sigma, sum);
        Ok(LevelSolution { z, nu, mu_sum })
    }

    fn solve_level(&mut self, level: f64, sigma: f64) -> Result<Vec<f64>> {
        Ok(self.solve_level_full(level, sigma)?.z)
    }

    fn default_nu(&self, sigma: f64) -> f64 {
        let max = self.theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        match self.kind {
            KernelKind::Entropic => {
                // exact when nothing is clamped
                let s: f64 = self.theta.iter().map(|t| (t - max).exp()).sum();
                max + s.ln() - 1.0 - sigma.ln()
            }
            _ => max,
        }
    }
}

/// Rescales the unclamped part so that `Σz = σ` exactly.
fn fix_sum(z: &mut [f64], level: f64, sigma: f64, sum: f64) {
    let excess: f64 = sum - level * z.len() as f64;
    let target = sigma - level * z.len() as f64;
    if excess > 0.0 && target >= 0.0 {
        let r = target / excess;
        for v in z.iter_mut() {
            *v = level + (*v - level) * r;
        }
    }
}

/// For a block with `w = θ_B − ν`, the factor `t` such that the block
/// solution is `max(L, t w)`, with `t = γ r^{2−p}` and `r` the block norm.
fn block_scale(
    theta: &[f64],
    nu: f64,
    level: f64,
    blk: &[usize],
    gamma: f64,
    p: f64,
    warm_logt: &mut f64,
) -> f64 {
    let q = 2.0 - p;
    if level <= 0.0 {
        let rho = blk
            .iter()
            .map(|&i| (theta[i] - nu).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt();
        return crate::mirror_maps::inverse_block_scale(rho, gamma, p);
    }
    // ψ(u) = (u − ln γ)/q − ln ‖max(L, e^u w)‖ is increasing in u = ln t
    let psi = |u: f64| -> (f64, f64) {
        let t = u.exp();
        let mut nsq = 0.0;
        let mut free = 0.0;
        for &i in blk {
            let v = t * (theta[i] - nu);
            if v > level {
                nsq += v * v;
                free += v * v;
            } else {
                nsq += level * level;
            }
        }
        ((u - gamma.ln()) / q - 0.5 * nsq.ln(), 1.0 / q - free / nsq)
    };
    // the root satisfies r ≥ L √m, i.e. u ≥ ln γ + q ln(L √m)
    let lo_bound = gamma.ln() + q * (level * (blk.len() as f64).sqrt()).ln();
    let mut u = if warm_logt.is_finite() {
        warm_logt.max(lo_bound)
    } else {
        lo_bound
    };
    let (mut f, mut df) = psi(u);
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for _ in 0..100 {
        if f < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        if f.abs() < 1e-15 {
            break;
        }
        let mut next = u - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                lo + 1.0
            } else {
                hi - 1.0
            };
        }
        if (next - u).abs() <= 1e-15 * (1.0 + u.abs()) {
            u = next;
            break;
        }
        u = next;
        (f, df) = psi(u);
    }
    *warm_logt = u;
    u.exp()
}

fn solve_center_hull(
    m: &MirrorMapSpec,
    theta: &[f64],
    d: usize,
    scale: f64,
    center: f64,
    warm: &mut WarmStart,
) -> Result<Vec<f64>> {
    let kappa = d as f64 - scale / center;
    let saved_level = warm.level;
    let mut k = Kernel::new(m, theta, d, warm);
    // V'(L) = Σμ − νκ is nondecreasing because the level-restricted value is convex in L
    let dv = |level: f64, k: &mut Kernel| -> Result<(f64, LevelSolution)> {
        let sol = k.solve_level_full(level, scale + kappa * level)?;
        Ok((sol.mu_sum - sol.nu * kappa, sol))
    };
    let (d0, s0) = dv(0.0, &mut k)?;
    if d0 >= 0.0 {
        k.warm.level = Some(0.0);
        return Ok(s0.z);
    }
    let top = center * (1.0 - 1e-10);
    let (dtop, stop) = dv(top, &mut k)?;
    if dtop <= 0.0 {
        k.warm.level = Some(center);
        let _ = stop;
        return Ok(vec![center; d]);
    }
    let mut last_err = None;
    let mut eval = |level: f64, k: &mut Kernel| match dv(level, k) {
        Ok((v, _)) => v,
        Err(e) => {
            last_err = Some(e);
            0.0
        }
    };
    // tighten the bracket around the previous level first
    let (mut a, mut fa, mut b, mut fb) = (0.0, d0, top, dtop);
    if let Some(l) = saved_level.filter(|l| *l > 0.0 && *l < top) {
        let w = 1e-3 * center;
        let (lo, hi) = ((l - w).max(0.0), (l + w).min(top));
        let flo = if lo > 0.0 { eval(lo, &mut k) } else { d0 };
        if flo < 0.0 {
            a = lo;
            fa = flo;
            let fhi = if hi < top { eval(hi, &mut k) } else { dtop };
            if fhi > 0.0 {
                b = hi;
                fb = fhi;
            }
        } else {
            b = lo;
            fb = flo;
        }
    }
    let level = brent(|l| eval(l, &mut k), a, b, fa, fb, 1e-15 * center, 200);
    if let Some(e) = last_err {
        return Err(e);
    }
    k.warm.level = Some(level);
    Ok(k.solve_level_full(level, scale + kappa * level)?.z)
}

/// Away-step Frank–Wolfe on `F(z) = h(z) − ⟨θ, z⟩` with exact line search.
fn frank_wolfe_dual(
    m: &MirrorMapSpec,
    body: &BodySpec,
    theta: &[f64],
    tol: f64,
    max_iters: usize,
    start: Option<Vec<f64>>,
) -> Result<Vec<f64>> {
    let d = body.d;
    let nv = body.num_vertices();
    let verts = body.vertices();
    // active set as (vertex index, weight)
    let mut active: Vec<(usize, f64)> = match start.as_deref().and_then(|z| barycentric(body, z)) {
        Some(a) => a,
        None => {
            // start from the vertex with the lowest objective
            let mut best = (0, f64::INFINITY);
            for (k, v) in verts.iter().enumerate() {
                let f = objective(m, theta, &clamp(m, v))?;
                if f < best.1 {
                    best = (k, f);
                }
            }
            vec![(best.0, 1.0)]
        }
    };
    let mut x = combine(&verts, &active, d);
    let mut gap = f64::INFINITY;
    for _ in 0..max_iters {
        let xc = clamp(m, &x);
        let g = objective_grad(m, theta, &xc)?;
        let vals: Vec<f64> = verts.iter().map(|v| dot(&g, v)).collect();
        let gx = dot(&g, &x);
        let (s, vs) = argmin_first(&vals);
        gap = gx - vs;
        if gap <= tol {
            return Ok(x);
        }
        let (a_pos, va) = active
            .iter()
            .enumerate()
            .map(|(pos, &(k, _))| (pos, vals[k]))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, c| if c.1 > acc.1 { c } else { acc },
            );
        let away_gap = va - gx;
        let (dir, max_step, toward) = if gap >= away_gap {
            let dir: Vec<f64> = verts[s].iter().zip(&x).map(|(v, xi)| v - xi).collect();
            (dir, 1.0, true)
        } else {
            let (ka, wa) = active[a_pos];
            let dir: Vec<f64> = x.iter().zip(&verts[ka]).map(|(xi, v)| xi - v).collect();
            (dir, wa / (1.0 - wa).max(f64::MIN_POSITIVE), false)
        };
        // exact line search: root of the directional derivative
        let dphi = |step: f64| {
            let z: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            objective_grad(m, theta, &clamp(m, &z)).map_or(f64::INFINITY, |g| dot(&g, &dir))
        };
        let (d0, dmax) = (dphi(0.0), dphi(max_step));
        let step = if dmax <= 0.0 {
            max_step
        } else if d0 >= 0.0 {
            0.0
        } else {
            brent(dphi, 0.0, max_step, d0, dmax, 1e-16 * max_step, 200)
        };
        if toward {
            for e in active.iter_mut() {
                e.1 *= 1.0 - step;
            }
            match active.iter_mut().find(|e| e.0 == s) {
                Some(e) => e.1 += step,
                None => active.push((s, step)),
            }
            if step >= 1.0 {
                active = vec![(s, 1.0)];
            }
        } else {
            let ka = active[a_pos].0;
            for e in active.iter_mut() {
                e.1 *= 1.0 + step;
            }
            active[a_pos].1 -= step;
            if step >= max_step {
                active.retain(|e| e.0 != ka);
            }
        }
        active.retain(|e| e.1 > 0.0);
        let total: f64 = active.iter().map(|e| e.1).sum();
        for e in active.iter_mut() {
            e.1 /= total;
        }
        x = combine(&verts, &active, d);
        let _ = nv;
    }
    Err(Error::NotConverged {
        iters: max_iters,
        gap,
    })
}

fn clamp(m: &MirrorMapSpec, z: &[f64]) -> Vec<f64> {
    match m {
        MirrorMapSpec::Entropic => z.iter().map(|v| v.max(ENTROPIC_FLOOR)).collect(),
        _ => z.to_vec(),
    }
}

fn combine(verts: &[Vec<f64>], active: &[(usize, f64)], d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    for &(k, w) in active {
        for (xi, v) in x.iter_mut().zip(&verts[k]) {
            *xi += w * v;
        }
    }
    x
}

/// Barycentric weights of `z` for the structured shapes.
fn barycentric(body: &BodySpec, z: &[f64]) -> Option<Vec<(usize, f64)>> {
    let (scale, center, level) = match body.shape {
        Shape::Simplex { scale } => (scale, 0.0, 0.0),
        Shape::SimplexWithCenter { scale, center } => {
            let kappa = body.d as f64 - scale / center;
            let sum: f64 = z.iter().sum();
            let level = ((sum - scale) / kappa).clamp(0.0, center);
            (
                scale,
                center,
                level.min(z.iter().cloned().fold(f64::INFINITY, f64::min)),
            )
        }
        Shape::Vertices { .. } => return None,
    };
    let mut out: Vec<(usize, f64)> = z
        .iter()
        .enumerate()
        .map(|(i, v)| (i, ((v - level) / scale).max(0.0)))
        .filter(|e| e.1 > 0.0)
        .collect();
    if level > 0.0 {
        out.push((body.d, level / center));
    }
    let total: f64 = out.iter().map(|e| e.1).sum();
    if total <= 0.0 {
        return None;
    }
    for e in out.iter_mut() {
        e.1 /= total;
    }
    Some(out)
}
