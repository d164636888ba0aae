//! Config-driven experiment runner: seeded sweeps over cells, per-run CSVs,
//! aggregate tables, SVG plots, a replay manifest, and bound checks.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{random_equal_partition, Partition};
use crate::instances::{
    alternating_adversary_losses, figure1_forced, figure1_losses, figure1_params,
    log_improvement_losses, log_sparsity, poly_improvement_instance, poly_instance_unscaled,
    poly_params, sparse_support, SparseVec,
};
use crate::meta::{
    build_block_norm_portfolio, exact_rho, mirror_weights_run_with_stride, Expert, Portfolio,
};
use crate::mirror_maps::{potential_grad, potential_grad_inverse, potential_value, MirrorMapSpec};
use crate::omd::{
    diameter, empirical_grad_bound, euclidean_diameter, gradient_bound_estimate, run_omd,
    RunRecord, StepSizeRule,
};
use crate::projection::BodySpec;
use crate::{meta, plot};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Figure1,
    LogImprovement,
    PolyImprovement,
    Alternating,
    MirrorWeights,
    Lemma1Check,
    DiameterCheck,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::Figure1,
        ExperimentId::LogImprovement,
        ExperimentId::PolyImprovement,
        ExperimentId::Alternating,
        ExperimentId::MirrorWeights,
        ExperimentId::Lemma1Check,
        ExperimentId::DiameterCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Figure1 => "figure1",
            ExperimentId::LogImprovement => "log_improvement",
            ExperimentId::PolyImprovement => "poly_improvement",
            ExperimentId::Alternating => "alternating",
            ExperimentId::MirrorWeights => "mirror_weights",
            ExperimentId::Lemma1Check => "lemma1_check",
            ExperimentId::DiameterCheck => "diameter_check",
        }
    }

    /// Config keys this experiment reads, besides the common ones.
    fn keys(self) -> &'static [&'static str] {
        match self {
            ExperimentId::Figure1 => &["d", "T", "blocks", "samples", "eta_factors"],
            ExperimentId::LogImprovement | ExperimentId::PolyImprovement => &["d", "T", "samples"],
            ExperimentId::Alternating => &["horizons", "eta_euc", "eta_ent"],
            ExperimentId::MirrorWeights => &[
                "d",
                "T",
                "blocks",
                "samples",
                "portfolio",
                "rho",
                "weight_stride",
            ],
            ExperimentId::Lemma1Check => &["d", "sparsity", "blocks", "samples"],
            ExperimentId::DiameterCheck => &["d", "blocks", "points"],
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortfolioKind {
    /// One expert per entry of `blocks`, each with its theory step size.
    Theory,
    /// Every dyadic block count with a dyadic step-size grid.
    Dyadic,
}

/// Experiment description as read from TOML. Missing keys take the
/// experiment's defaults; keys the experiment does not use are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentId>,
    pub master_seed: Option<u64>,
    /// Seed indices; each is mixed with the master seed and the cell index.
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub d: Option<usize>,
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: Option<usize>,
    pub blocks: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub sparsity: Option<usize>,
    pub points: Option<usize>,
    pub eta_factors: Option<Vec<f64>>,
    pub horizons: Option<Vec<usize>>,
    pub eta_euc: Option<Vec<f64>>,
    pub eta_ent: Option<Vec<f64>>,
    pub portfolio: Option<PortfolioKind>,
    pub rho: Option<f64>,
    pub weight_stride: Option<usize>,
}

/// A config with every default filled in and validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub experiment: ExperimentId,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub blocks: Vec<usize>,
    pub samples: usize,
    pub sparsity: usize,
    pub points: usize,
    pub eta_factors: Vec<f64>,
    pub horizons: Vec<usize>,
    pub eta_euc: Vec<f64>,
    pub eta_ent: Vec<f64>,
    pub portfolio: PortfolioKind,
    pub rho: Option<f64>,
    pub weight_stride: usize,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn dyadic(d: usize) -> Vec<usize> {
    (0..=d.trailing_zeros()).map(|k| 1 << k).collect()
}

fn logspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (k - 1) as f64))
        .collect()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId) -> Self {
        ExperimentConfig {
            experiment: Some(experiment),
            ..Default::default()
        }
    }

    pub fn resolve(&self) -> Result<Plan> {
        let exp = self
            .experiment
            .ok_or_else(|| cfg_err("missing 'experiment'"))?;
        let value = serde_json::to_value(self).map_err(|e| cfg_err(e.to_string()))?;
        for (k, v) in value.as_object().into_iter().flatten() {
            let common = ["experiment", "master_seed", "seeds", "out"].contains(&k.as_str());
            if !v.is_null() && !common && !exp.keys().contains(&k.as_str()) {
                return Err(cfg_err(format!(
                    "key '{k}' does not apply to experiment '{exp}'"
                )));
            }
        }
        use ExperimentId::*;
        let d = self.d.unwrap_or(match exp {
            Figure1 | LogImprovement => 4096,
            PolyImprovement => 1728,
            Alternating => 2,
            MirrorWeights | Lemma1Check => 64,
            DiameterCheck => 256,
        });
        let default_seeds = match exp {
            Figure1 | LogImprovement | PolyImprovement => 20,
            MirrorWeights => 10,
            Alternating | Lemma1Check | DiameterCheck => 1,
        };
        let plan = Plan {
            experiment: exp,
            master_seed: self.master_seed.unwrap_or(0),
            seeds: self
                .seeds
                .clone()
                .unwrap_or_else(|| (0..default_seeds).collect()),
            d,
            horizon: self.horizon.unwrap_or(match exp {
                Figure1 => 250,
                LogImprovement => 10_000,
                PolyImprovement => 4096,
                MirrorWeights => 1000,
                _ => 0,
            }),
            blocks: self.blocks.clone().unwrap_or_else(|| match exp {
                MirrorWeights => vec![1, 4, 8, 16, 64],
                Lemma1Check => vec![8],
                _ => dyadic(d),
            }),
            samples: self.samples.unwrap_or(100_000),
            sparsity: self.sparsity.unwrap_or(8),
            points: self.points.unwrap_or(20),
            eta_factors: self
                .eta_factors
                .clone()
                .unwrap_or_else(|| (-8..=8).map(|j| 2f64.powf(j as f64 / 2.0)).collect()),
            horizons: self
                .horizons
                .clone()
                .unwrap_or_else(|| vec![1024, 2048, 4096, 8192]),
            eta_euc: self
                .eta_euc
                .clone()
                .unwrap_or_else(|| logspace(-3.0, 0.0, 5)),
            eta_ent: self
                .eta_ent
                .clone()
                .unwrap_or_else(|| logspace(-3.0, 0.0, 5)),
            portfolio: self.portfolio.unwrap_or(PortfolioKind::Theory),
            rho: self.rho,
            weight_stride: self.weight_stride.unwrap_or(1),
        };
        plan.validate()?;
        Ok(plan)
    }
}

impl Plan {
    fn validate(&self) -> Result<()> {
        use ExperimentId::*;
        if self.seeds.is_empty() {
            return Err(cfg_err("'seeds' must not be empty"));
        }
        let needs_pow2 = matches!(
            self.experiment,
            Figure1 | LogImprovement | MirrorWeights | DiameterCheck
        );
        if needs_pow2 && !self.d.is_power_of_two() {
            return Err(cfg_err(format!("d = {} must be a power of two", self.d)));
        }
        if matches!(
            self.experiment,
            Figure1 | MirrorWeights | Lemma1Check | DiameterCheck
        ) {
            if self.blocks.is_empty() {
                return Err(cfg_err("'blocks' must not be empty"));
            }
            if let Some(n) = self
                .blocks
                .iter()
                .find(|&&n| n == 0 || !self.d.is_multiple_of(n))
            {
                return Err(cfg_err(format!(
                    "block count {n} does not divide d = {}",
                    self.d
                )));
            }
        }
        match self.experiment {
            Figure1 if self.d < 4 => return Err(cfg_err("figure1 needs d ≥ 4")),
            Figure1 | LogImprovement | PolyImprovement | MirrorWeights if self.horizon == 0 => {
                return Err(cfg_err("'T' must be positive"))
            }
            PolyImprovement => {
                poly_params(self.d).map_err(|e| cfg_err(e.to_string()))?;
            }
            Alternating => {
                if self.horizons.iter().any(|&t| t < 16 || t % 8 != 0) {
                    return Err(cfg_err("horizons must be ≥ 16 and divisible by 8"));
                }
                if self.eta_euc.is_empty() || self.eta_ent.is_empty() {
                    return Err(cfg_err("step-size grids must not be empty"));
                }
            }
            Lemma1Check if self.sparsity == 0 || self.sparsity > self.d => {
                return Err(cfg_err("sparsity must lie in 1..=d"))
            }
            _ => {}
        }
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !positive(&self.eta_factors) || !positive(&self.eta_euc) || !positive(&self.eta_ent) {
            return Err(cfg_err("step sizes and factors must be positive"));
        }
        if self.eta_factors.is_empty()
            || self.samples == 0
            || self.points == 0
            || self.weight_stride == 0
        {
            return Err(cfg_err(
                "eta_factors, samples, points and weight_stride must be non-empty/positive",
            ));
        }
        Ok(())
    }
}

/// Counter-based seed for `(master, stream, index)`.
pub fn mix_seed(master: u64, stream: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(master) ^ stream) ^ index)
}

/// Loss sequences use stream 0 so that every cell of a seed index sees the same losses.
fn loss_rng(plan: &Plan, seed_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(plan.master_seed, 0, seed_index))
}

fn cell_seed(plan: &Plan, cell: usize, seed_index: u64) -> u64 {
    mix_seed(plan.master_seed, cell as u64 + 1, seed_index)
}

/// Per-cell stream for quantities estimated once per cell.
fn estimate_rng(plan: &Plan, cell: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(plan.master_seed, cell as u64 + 1, u64::MAX))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub cell_id: String,
    pub n: Option<usize>,
    pub eta: Option<f64>,
    pub mean_regret: f64,
    pub stderr: f64,
    pub seeds: usize,
    pub failed: usize,
    pub pass_flags: String,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub plan: Plan,
    pub rows: Vec<AggregateRow>,
    pub checks: Vec<Check>,
    pub failed_runs: usize,
    pub out_dir: Option<PathBuf>,
}

impl Summary {
    pub fn row(&self, cell_id: &str) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.cell_id == cell_id)
    }

    /// 0 on success, 1 if any run failed numerically.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed_runs > 0)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// `(mean, standard error)`; the error is 0 below two samples.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let k = v.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

struct CellSpec {
    id: String,
    n: Option<usize>,
    eta: Option<f64>,
}

struct SeedOutcome {
    seed_index: u64,
    seed: u64,
    value: std::result::Result<f64, String>,
    csv: Option<String>,
    partition: Option<Vec<usize>>,
    extra: Value,
}

impl SeedOutcome {
    fn failed(seed_index: u64, seed: u64, e: Error) -> Self {
        log::warn!("seed index {seed_index} failed: {e}");
        SeedOutcome {
            seed_index,
            seed,
            value: Err(e.to_string()),
            csv: None,
            partition: None,
            extra: Value::Null,
        }
    }
}

struct CellResult {
    spec: CellSpec,
    seeds: Vec<SeedOutcome>,
    flags: String,
}

impl CellResult {
    fn values(&self) -> Vec<f64> {
        self.seeds
            .iter()
            .filter_map(|s| s.value.as_ref().ok().copied())
            .collect()
    }

    fn stats(&self) -> (f64, f64) {
        mean_stderr(&self.values())
    }
}

#[derive(Default)]
struct Outcome {
    cells: Vec<CellResult>,
    checks: Vec<Check>,
    svg: Option<String>,
    files: Vec<(String, String)>,
    info: Value,
}

fn record_csv(rec: &RunRecord) -> String {
    let mut buf = Vec::new();
    rec.write_csv(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Runs `job` for every (cell, seed index) pair on the thread pool and groups
/// the results by cell, in order.
fn sweep<F>(plan: &Plan, cells: usize, job: F) -> Vec<Vec<SeedOutcome>>
where
    F: Fn(usize, u64, u64) -> Result<SeedOutcome> + Sync,
{
    let jobs: Vec<(usize, u64)> = (0..cells)
        .flat_map(|c| plan.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let mut results: Vec<(usize, SeedOutcome)> = jobs
        .into_par_iter()
        .map(|(c, s)| {
            let seed = cell_seed(plan, c, s);
            let out = job(c, s, seed).unwrap_or_else(|e| SeedOutcome::failed(s, seed, e));
            (c, out)
        })
        .collect();
    let mut grouped: Vec<Vec<SeedOutcome>> = (0..cells).map(|_| Vec::new()).collect();
    for (c, o) in results.drain(..) {
        grouped[c].push(o);
    }
    grouped
}

fn ok_outcome(
    seed_index: u64,
    seed: u64,
    value: f64,
    csv: String,
    partition: Option<&Partition>,
) -> SeedOutcome {
    SeedOutcome {
        seed_index,
        seed,
        value: Ok(value),
        csv: Some(csv),
        partition: partition.map(|p| p.block_of().to_vec()),
        extra: Value::Null,
    }
}

fn uniform(d: usize) -> Vec<f64> {
    vec![1.0 / d as f64; d]
}

fn figure1(plan: &Plan) -> Result<Outcome> {
    let (d, t) = (plan.d, plan.horizon);
    let (s, t0) = figure1_params(d, t);
    let body = BodySpec::simplex(d);
    let x1 = uniform(d);
    let theory: Vec<(f64, f64, f64)> = plan
        .blocks
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            let dn = diameter(
                &body,
                &MirrorMapSpec::block_norm(Partition::contiguous(d, n)?),
                &x1,
            )?;
            let mut rng = estimate_rng(plan, c);
            let m = MirrorMapSpec::block_norm(random_equal_partition(d, n, &mut rng)?);
            let g = gradient_bound_estimate(
                &m,
                |r: &mut ChaCha8Rng| {
                    let round = r.gen_range(1..=t);
                    SparseVec::indicator(sparse_support(d, s, Some(figure1_forced(round, t0)), r))
                },
                plan.samples,
                &mut rng,
            );
            let eta = StepSizeRule::TheorySqrt2 {
                diameter: dn,
                grad_bound: g,
                horizon: t,
            }
            .eta(1);
            Ok((dn, g, eta))
        })
        .collect::<Result<_>>()?;

    // every seed runs the whole step-size grid; the cell reports the grid point
    // with the lowest mean regret
    let runs = sweep(plan, plan.blocks.len(), |c, si, seed| {
        let losses = figure1_losses(d, t, &mut loss_rng(plan, si))?;
        let part = random_equal_partition(d, plan.blocks[c], &mut ChaCha8Rng::seed_from_u64(seed))?;
        let m = MirrorMapSpec::block_norm(part.clone());
        let mut recs = Vec::with_capacity(plan.eta_factors.len());
        for f in &plan.eta_factors {
            let mut r = run_omd(
                &body,
                &m,
                &losses,
                &StepSizeRule::Fixed {
                    eta: theory[c].2 * f,
                },
                &x1,
            )?;
            r.iterates = None;
            recs.push(r.with_seed(seed));
        }
        let regrets: Vec<f64> = recs.iter().map(RunRecord::final_regret).collect();
        Ok(SeedOutcome {
            seed_index: si,
            seed,
            value: Ok(f64::NAN),
            csv: None,
            partition: Some(part.block_of().to_vec()),
            extra: json!({ "regrets": regrets, "records": serde_json::to_value(&recs).unwrap_or(Value::Null) }),
        })
    });

    let mut out = Outcome::default();
    let mut sweep_csv = String::from("n,factor,eta,mean_regret,stderr\n");
    for (c, mut seeds) in runs.into_iter().enumerate() {
        let n = plan.blocks[c];
        let per_factor: Vec<(f64, f64)> = (0..plan.eta_factors.len())
            .map(|k| {
                let v: Vec<f64> = seeds
                    .iter()
                    .filter(|s| s.value.is_ok())
                    .map(|s| s.extra["regrets"][k].as_f64().unwrap_or(f64::NAN))
                    .collect();
                mean_stderr(&v)
            })
            .collect();
        for (k, (m, e)) in per_factor.iter().enumerate() {
            let f = plan.eta_factors[k];
            sweep_csv += &format!("{n},{f:?},{:?},{m:?},{e:?}\n", theory[c].2 * f);
        }
        let best = per_factor
            .iter()
            .enumerate()
            .filter(|(_, p)| p.0.is_finite())
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(k, _)| k)
            .unwrap_or(0);
        for s in seeds.iter_mut().filter(|s| s.value.is_ok()) {
            let recs: Vec<RunRecord> =
                serde_json::from_value(s.extra["records"].take()).unwrap_or_default();
            s.value = Ok(s.extra["regrets"][best].as_f64().unwrap_or(f64::NAN));
            s.csv = recs.get(best).map(record_csv);
            s.extra = json!({ "regrets": s.extra["regrets"].take() });
        }
        let eta = theory[c].2 * plan.eta_factors[best];
        let flags = format!(
            "D={:.4};G={:.4};theory_eta={:.5};theory_regret={:.3}",
            theory[c].0,
            theory[c].1,
            theory[c].2,
            plan.eta_factors
                .iter()
                .position(|f| *f == 1.0)
                .map_or(f64::NAN, |k| per_factor[k].0)
        );
        out.cells.push(CellResult {
            spec: CellSpec {
                id: format!("n{n}"),
                n: Some(n),
                eta: Some(eta),
            },
            seeds,
            flags,
        });
    }
    let means: Vec<f64> = out.cells.iter().map(|c| c.stats().0).collect();
    let errs: Vec<f64> = out.cells.iter().map(|c| c.stats().1).collect();
    if let Some((k, _)) = means
        .iter()
        .enumerate()
        .filter(|m| m.1.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
    {
        let n = plan.blocks[k];
        out.checks.push(Check::new(
            "figure1_interior_best",
            n != 1 && n != d,
            format!("lowest mean regret {:.3} at n = {n}", means[k]),
        ));
    }
    let labels: Vec<String> = plan
        .blocks
        .iter()
        .map(|n| n.trailing_zeros().to_string())
        .collect();
    out.svg = Some(plot::bar_chart(
        &format!("Regret at T = {t} over the {d}-simplex"),
        "log2 n",
        "mean regret",
        &labels,
        &means,
        &errs,
    ));
    out.files.push(("eta_sweep.csv".into(), sweep_csv));
    out.info = json!({ "S": s, "T0": t0 });
    Ok(out)
}

fn log_improvement(plan: &Plan) -> Result<Outcome> {
    let (d, t) = (plan.d, plan.horizon);
    let s = log_sparsity(d);
    let x1 = uniform(d);
    let body = BodySpec::simplex(d);
    let opgd_eta = ((1.0 - 1.0 / d as f64) / (s * t) as f64).sqrt();
    let oeg_eta = ((d as f64).ln() / t as f64).sqrt();
    if d % s != 0 {
        return Err(cfg_err(format!("S = {s} does not divide d = {d}")));
    }
    let dn = diameter(
        &body,
        &MirrorMapSpec::block_norm(Partition::contiguous(d, s)?),
        &x1,
    )?;
    let mut rng = estimate_rng(plan, 2);
    let gm = MirrorMapSpec::block_norm(random_equal_partition(d, s, &mut rng)?);
    let g = gradient_bound_estimate(
        &gm,
        |r: &mut ChaCha8Rng| SparseVec::indicator(sparse_support(d, s, Some(0), r)),
        plan.samples,
        &mut rng,
    );
    let block_rule = StepSizeRule::TheorySqrt2 {
        diameter: dn,
        grad_bound: g,
        horizon: t,
    };
    let runs = sweep(plan, 3, |c, si, seed| {
        let inst = log_improvement_losses(d, t, &mut loss_rng(plan, si))?;
        let (m, rule, part) = match c {
            0 => (
                MirrorMapSpec::Euclidean,
                StepSizeRule::Fixed { eta: opgd_eta },
                None,
            ),
            1 => (
                MirrorMapSpec::Entropic,
                StepSizeRule::Fixed { eta: oeg_eta },
                None,
            ),
            _ => {
                let p = random_equal_partition(d, s, &mut ChaCha8Rng::seed_from_u64(seed))?;
                (
                    MirrorMapSpec::block_norm(p.clone()),
                    block_rule.clone(),
                    Some(p),
                )
            }
        };
        let mut rec = run_omd(&inst.body, &m, &inst.losses, &rule, &inst.x1)?;
        rec.iterates = None;
        Ok(ok_outcome(
            si,
            seed,
            rec.final_regret(),
            record_csv(&rec),
            part.as_ref(),
        ))
    });
    let specs = [
        CellSpec {
            id: "opgd".into(),
            n: Some(1),
            eta: Some(opgd_eta),
        },
        CellSpec {
            id: "oeg".into(),
            n: Some(d),
            eta: Some(oeg_eta),
        },
        CellSpec {
            id: format!("block_n{s}"),
            n: Some(s),
            eta: Some(block_rule.eta(1)),
        },
    ];
    let mut out = Outcome::default();
    let t0 = 1.0 + 0.5 * ((1.0 - 1.0 / d as f64) * (s * t) as f64).sqrt();
    let bounds = [
        ("opgd_lower_bound", t0 / 4.0, true),
        (
            "oeg_lower_bound",
            0.25 * (t as f64 * (d as f64).ln()).sqrt(),
            true,
        ),
        (
            "block_upper_bound",
            10.0 * (d as f64).ln().ln() * (t as f64).sqrt(),
            false,
        ),
    ];
    for (spec, seeds) in specs.into_iter().zip(runs) {
        out.cells.push(CellResult {
            spec,
            seeds,
            flags: String::new(),
        });
    }
    for (cell, (name, b, lower)) in out.cells.iter_mut().zip(bounds) {
        let (m, e) = cell.stats();
        let pass = if lower { m + 3.0 * e >= b } else { m <= b };
        cell.flags = format!("{name}={}", if pass { "pass" } else { "fail" });
        out.checks.push(Check::new(
            name,
            pass,
            format!(
                "mean {m:.3} ± {e:.3} vs {}{b:.3}",
                if lower { "≥ " } else { "≤ " }
            ),
        ));
    }
    let m: Vec<f64> = out.cells.iter().map(|c| c.stats().0).collect();
    let ratio = m[0].min(m[1]) / m[2];
    out.checks.push(Check::new(
        "block_improvement",
        ratio > 1.0,
        format!("min(OPGD, OEG) / block = {ratio:.3}"),
    ));
    out.svg = Some(plot::bar_chart(
        &format!("Regret at T = {t}, d = {d}"),
        "method",
        "mean regret",
        &["OPGD".into(), "OEG".into(), format!("n = {s}")],
        &m,
        &out.cells.iter().map(|c| c.stats().1).collect::<Vec<_>>(),
    ));
    out.info = json!({ "S": s, "T0": t0, "ratio": ratio });
    Ok(out)
}

fn poly_improvement(plan: &Plan) -> Result<Outcome> {
    let (d, t) = (plan.d, plan.horizon);
    let (a, s, r) = poly_params(d)?;
    let p = BodySpec::simplex_hull_with_center(d, a);
    let x1 = vec![a; d];
    let opgd_rule = StepSizeRule::TheoryPlain {
        diameter: euclidean_diameter(&p, &x1)?,
        grad_bound: (s as f64).sqrt(),
        horizon: t,
    };
    let singletons = MirrorMapSpec::block_norm(Partition::contiguous(d, d)?);
    let phat = p.scaled(1.0 / r);
    let hat_rule = StepSizeRule::TheoryPlain {
        diameter: diameter(&phat, &singletons, &uniform(d))?,
        grad_bound: r,
        horizon: t,
    };
    let mut rng = estimate_rng(plan, 2);
    let gm = MirrorMapSpec::block_norm(random_equal_partition(d, s, &mut rng)?);
    let g = gradient_bound_estimate(
        &gm,
        |rr: &mut ChaCha8Rng| SparseVec::indicator(sparse_support(d, s, Some(0), rr)),
        plan.samples,
        &mut rng,
    );
    let ds = diameter(
        &p,
        &MirrorMapSpec::block_norm(Partition::contiguous(d, s)?),
        &x1,
    )?;
    let block_rule = StepSizeRule::TheorySqrt2 {
        diameter: ds,
        grad_bound: g,
        horizon: t,
    };
    let k = 128.0 / t as f64 * ((d * t) as f64).ln().powi(2);
    let slope = k.sqrt() / (r * r.sqrt());

    let runs = sweep(plan, 3, |c, si, seed| {
        let mut part = None;
        let rec = match c {
            0 => {
                let inst = poly_instance_unscaled(d, t, &mut loss_rng(plan, si))?;
                run_omd(
                    &inst.body,
                    &MirrorMapSpec::Euclidean,
                    &inst.losses,
                    &opgd_rule,
                    &inst.x1,
                )?
            }
            1 => {
                let inst = poly_improvement_instance(d, t, &mut loss_rng(plan, si))?;
                run_omd(&inst.body, &singletons, &inst.losses, &hat_rule, &inst.x1)?
            }
            _ => {
                let inst = poly_instance_unscaled(d, t, &mut loss_rng(plan, si))?;
                let pt = random_equal_partition(d, s, &mut ChaCha8Rng::seed_from_u64(seed))?;
                part = Some(pt.clone());
                run_omd(
                    &inst.body,
                    &MirrorMapSpec::block_norm(pt),
                    &inst.losses,
                    &block_rule,
                    &inst.x1,
                )?
            }
        };
        let mut o = ok_outcome(
            si,
            seed,
            rec.final_regret(),
            record_csv(&rec),
            part.as_ref(),
        );
        if c == 1 {
            let holds = rec
                .x1_coord
                .iter()
                .enumerate()
                .all(|(i, z)| *z <= 1.0 / d as f64 + slope * i as f64 + 1e-12);
            o.extra = json!({ "iterate_bound": holds });
        }
        Ok(o)
    });
    let specs = [
        CellSpec {
            id: "opgd".into(),
            n: Some(1),
            eta: Some(opgd_rule.eta(1)),
        },
        CellSpec {
            id: format!("block_n{d}_scaled"),
            n: Some(d),
            eta: Some(hat_rule.eta(1)),
        },
        CellSpec {
            id: format!("block_n{s}"),
            n: Some(s),
            eta: Some(block_rule.eta(1)),
        },
    ];
    let mut out = Outcome::default();
    for (spec, seeds) in specs.into_iter().zip(runs) {
        out.cells.push(CellResult {
            spec,
            seeds,
            flags: String::new(),
        });
    }
    let m: Vec<f64> = out.cells.iter().map(|c| c.stats().0).collect();
    let held: Vec<bool> = out.cells[1]
        .seeds
        .iter()
        .map(|s| s.extra["iterate_bound"].as_bool().unwrap_or(false))
        .collect();
    let held_count = held.iter().filter(|h| **h).count();
    out.cells[1].flags = format!("iterate_bound={held_count}/{}", held.len());
    out.checks.push(Check::new(
        "opgd_over_block",
        m[0] > m[2],
        format!("ratio {:.3}", m[0] / m[2]),
    ));
    out.checks.push(Check::new(
        "scaled_l1_over_block",
        m[1] > m[2],
        format!("ratio {:.3}", m[1] / m[2]),
    ));
    out.checks.push(Check::new(
        "scaled_l1_iterate_bound",
        held_count * 10 >= held.len() * 9,
        format!(
            "held on {held_count} of {} seeds (slope {slope:.5})",
            held.len()
        ),
    ));
    out.svg = Some(plot::bar_chart(
        &format!("Regret at T = {t}, d = {d}"),
        "method",
        "mean regret",
        &["OPGD".into(), format!("n = {d}"), format!("n = {s}")],
        &m,
        &out.cells.iter().map(|c| c.stats().1).collect::<Vec<_>>(),
    ));
    out.info = json!({ "A": a, "S": s, "R": r, "K": k, "ratios": [m[0] / m[2], m[1] / m[2]] });
    Ok(out)
}

/// Regret of the alternating strategy against the mixed adversary, as the
/// exact average over its two cases: `(case 1, case 2, mean)`.
pub fn alternating_expected_regret(
    horizon: usize,
    eta_euc: f64,
    eta_ent: f64,
) -> Result<(f64, f64, f64)> {
    let mut r = [0.0; 2];
    for (k, case) in [1u8, 2].into_iter().enumerate() {
        let inst = alternating_adversary_losses(case, horizon)?;
        r[k] = meta::alternating_omd_run(&inst.body, &inst.losses, eta_euc, eta_ent, &inst.x1)?
            .final_regret();
    }
    Ok((r[0], r[1], 0.5 * (r[0] + r[1])))
}

fn alternating(plan: &Plan) -> Result<Outcome> {
    let pairs: Vec<(f64, f64)> = plan
        .eta_euc
        .iter()
        .flat_map(|&e| plan.eta_ent.iter().map(move |&h| (e, h)))
        .collect();
    let mut hs = plan.horizons.clone();
    hs.sort_unstable();
    let per_pair: Vec<Result<Vec<(f64, f64, f64)>>> = pairs
        .par_iter()
        .map(|&(e, h)| {
            hs.iter()
                .map(|&t| alternating_expected_regret(t, e, h))
                .collect()
        })
        .collect();
    let mut out = Outcome::default();
    let mut series = Vec::new();
    let seed_index = plan.seeds[0];
    for (&(e, h), res) in pairs.iter().zip(per_pair) {
        let base = format!("euc{e:.0e}_ent{h:.0e}");
        match res {
            Ok(vals) => {
                let mut csv = String::from("T,case1_regret,case2_regret,expected_regret\n");
                for (t, v) in hs.iter().zip(&vals) {
                    csv += &format!("{t},{:?},{:?},{:?}\n", v.0, v.1, v.2);
                }
                let rates: Vec<f64> = hs.iter().zip(&vals).map(|(t, v)| v.2 / *t as f64).collect();
                let growth: Vec<f64> = hs
                    .windows(2)
                    .zip(vals.windows(2))
                    .filter(|(t, _)| t[1] == 2 * t[0])
                    .map(|(_, v)| v[1].2 / v[0].2)
                    .collect();
                let rate_ok = rates.iter().all(|r| *r >= 1.0 / 200.0);
                let growth_ok = growth.iter().all(|g| (1.8..=2.2).contains(g));
                out.checks.push(Check::new(
                    format!("{base}_linear"),
                    rate_ok && growth_ok,
                    format!("regret/T = {rates:.4?}, doubling ratios = {growth:.3?}"),
                ));
                series.push((
                    format!("η_euc={e:.0e}, η_ent={h:.0e}"),
                    hs.iter()
                        .map(|t| *t as f64)
                        .zip(vals.iter().map(|v| v.2))
                        .collect(),
                ));
                for (t, v) in hs.iter().zip(&vals) {
                    let so = SeedOutcome {
                        seed_index,
                        seed: 0,
                        value: Ok(v.2),
                        csv: (t == hs.last().unwrap()).then(|| csv.clone()),
                        partition: None,
                        extra: json!({ "case1": v.0, "case2": v.1 }),
                    };
                    out.cells.push(CellResult {
                        spec: CellSpec {
                            id: format!("{base}_T{t}"),
                            n: None,
                            eta: Some(e),
                        },
                        seeds: vec![so],
                        flags: format!(
                            "eta_ent={h:?};case1={:.3};case2={:.3};rate={}",
                            v.0,
                            v.1,
                            if rate_ok { "pass" } else { "fail" }
                        ),
                    });
                }
            }
            Err(err) => out.cells.push(CellResult {
                spec: CellSpec {
                    id: base,
                    n: None,
                    eta: Some(e),
                },
                seeds: vec![SeedOutcome::failed(seed_index, 0, err)],
                flags: String::new(),
            }),
        }
    }
    out.svg = Some(plot::line_chart(
        "Alternating OPGD/OEG on the mixed adversary",
        "T",
        "expected regret",
        &series,
        true,
    ));
    Ok(out)
}

fn theory_portfolio(
    plan: &Plan,
    body: &BodySpec,
    x1: &[f64],
    s: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Portfolio> {
    let d = plan.d;
    let mut entries = Vec::new();
    for &n in &plan.blocks {
        let m = MirrorMapSpec::block_norm(random_equal_partition(d, n, rng)?);
        let dn = diameter(body, &m, x1)?;
        let g = gradient_bound_estimate(
            &m,
            |r: &mut ChaCha8Rng| SparseVec::indicator(sparse_support(d, s, Some(0), r)),
            plan.samples,
            rng,
        );
        entries.push(Expert {
            map: m,
            rule: StepSizeRule::TheorySqrt2 {
                diameter: dn,
                grad_bound: g,
                horizon: plan.horizon,
            },
        });
    }
    Portfolio::new(entries, 1.0, plan.horizon)
}

fn mirror_weights(plan: &Plan) -> Result<Outcome> {
    let (d, t) = (plan.d, plan.horizon);
    let s = log_sparsity(d);
    let body = BodySpec::simplex(d);
    let x1 = uniform(d);
    let runs = sweep(plan, 1, |_, si, seed| {
        let inst = log_improvement_losses(d, t, &mut loss_rng(plan, si))?;
        let rho_seen = exact_rho(&body, &inst.losses);
        let rho = plan.rho.unwrap_or(rho_seen);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pf = match plan.portfolio {
            PortfolioKind::Theory => theory_portfolio(plan, &body, &x1, s, &mut rng)?,
            PortfolioKind::Dyadic => {
                build_block_norm_portfolio(d, t, &body, &x1, None, Some(rho), &mut rng)?
            }
        };
        pf.rho = rho;
        let rec =
            mirror_weights_run_with_stride(&body, &pf, &inst.losses, &x1, plan.weight_stride)?;
        let regrets: Vec<f64> = rec.experts.iter().map(RunRecord::final_regret).collect();
        let best = regrets.iter().cloned().fold(f64::INFINITY, f64::min);
        let bound = best + 2.0 * rho * (t as f64 * (pf.len() as f64).ln()).sqrt() + 1e-6;
        let mut csv = String::from("t,loss,cum_loss,regret,x1_coord");
        for l in 1..=pf.len() {
            csv += &format!(",p_{l}");
        }
        csv.push('\n');
        let mut cum = 0.0;
        for k in 0..t {
            cum += rec.meta.losses[k];
            csv += &format!(
                "{},{:?},{:?},{:?},{:?}",
                k + 1,
                rec.meta.losses[k],
                cum,
                rec.meta.regret_trace[k],
                rec.meta.x1_coord[k]
            );
            let w = (k % rec.weight_stride == 0)
                .then(|| k / rec.weight_stride)
                .or((k + 1 == t).then(|| rec.weights.len() - 1));
            for l in 0..pf.len() {
                csv.push(',');
                if let Some(row) = w.and_then(|w| rec.weights.get(w)) {
                    csv += &format!("{:?}", row[l]);
                }
            }
            csv.push('\n');
        }
        let failed = rec.failed_at.iter().filter(|f| f.is_some()).count();
        Ok(SeedOutcome {
            seed_index: si,
            seed,
            value: Ok(rec.meta.final_regret()),
            csv: Some(csv),
            partition: None,
            extra: json!({
                "expert_regrets": regrets,
                "best": best,
                "bound": bound,
                "rho": rho,
                "rho_seen": rho_seen,
                "frozen_experts": failed,
                "portfolio": pf.summary_json(),
            }),
        })
    });
    let seeds = runs.into_iter().next().unwrap_or_default();
    let mut out = Outcome::default();
    let ok: Vec<&SeedOutcome> = seeds.iter().filter(|s| s.value.is_ok()).collect();
    let within = ok
        .iter()
        .filter(|s| s.value.as_ref().unwrap() <= &s.extra["bound"].as_f64().unwrap_or(f64::NAN))
        .count();
    let rho_ok = ok
        .iter()
        .all(|s| s.extra["rho"].as_f64() >= s.extra["rho_seen"].as_f64());
    out.checks.push(Check::new(
        "mw_regret_bound",
        within == ok.len(),
        format!("{within} of {} runs within the bound", ok.len()),
    ));
    out.checks.push(Check::new(
        "mw_rho_valid",
        rho_ok,
        "rho ≥ observed loss spread",
    ));
    let n_experts = ok
        .first()
        .and_then(|s| s.extra["expert_regrets"].as_array().map(Vec::len))
        .unwrap_or(0);
    let mk = |f: &dyn Fn(&SeedOutcome) -> f64, si: &SeedOutcome| SeedOutcome {
        seed_index: si.seed_index,
        seed: si.seed,
        value: if si.value.is_ok() {
            Ok(f(si))
        } else {
            si.value.clone()
        },
        csv: None,
        partition: None,
        extra: Value::Null,
    };
    let mut extra_cells = Vec::new();
    extra_cells.push(CellResult {
        spec: CellSpec {
            id: "best_expert".into(),
            n: None,
            eta: None,
        },
        seeds: seeds
            .iter()
            .map(|s| mk(&|s| s.extra["best"].as_f64().unwrap_or(f64::NAN), s))
            .collect(),
        flags: String::new(),
    });
    for l in 0..n_experts {
        let n = ok[0].extra["portfolio"]["entries"][l]["n"]
            .as_u64()
            .map(|v| v as usize);
        let eta = ok[0].extra["portfolio"]["entries"][l]["eta"].as_f64();
        extra_cells.push(CellResult {
            spec: CellSpec {
                id: format!("expert{}", l + 1),
                n,
                eta,
            },
            seeds: seeds
                .iter()
                .map(|s| {
                    mk(
                        &|s| s.extra["expert_regrets"][l].as_f64().unwrap_or(f64::NAN),
                        s,
                    )
                })
                .collect(),
            flags: String::new(),
        });
    }
    let flags = format!("bound={}", if within == ok.len() { "pass" } else { "fail" });
    drop(ok);
    out.cells.push(CellResult {
        spec: CellSpec {
            id: "meta".into(),
            n: None,
            eta: None,
        },
        seeds,
        flags,
    });
    out.cells.extend(extra_cells);
    Ok(out)
}

/// `E[(max block count of a random S-subset)²]`-style statistic: the mean
/// squared dual block norm of random 0-1 `S`-sparse vectors under one partition.
pub fn lemma1_mean<R: Rng + ?Sized>(
    part: &Partition,
    s: usize,
    samples: usize,
    rng: &mut R,
) -> (f64, Vec<usize>) {
    let d = part.dim();
    let bo = part.block_of();
    let mut counts = vec![0usize; part.num_blocks()];
    let mut hist = vec![0usize; s + 1];
    let mut total = 0usize;
    for _ in 0..samples {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut mx = 0;
        for i in index::sample(rng, d, s) {
            counts[bo[i]] += 1;
            mx = mx.max(counts[bo[i]]);
        }
        hist[mx] += 1;
        total += mx;
    }
    (total as f64 / samples as f64, hist)
}

pub fn lemma1_bound(s: usize, n: usize) -> f64 {
    6.0 * (s as f64 / n as f64).max((n as f64).ln())
}

fn lemma1_check(plan: &Plan) -> Result<Outcome> {
    let (d, s) = (plan.d, plan.sparsity);
    let runs = sweep(plan, plan.blocks.len(), |c, si, seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let part = random_equal_partition(d, plan.blocks[c], &mut rng)?;
        let (mean, hist) = lemma1_mean(&part, s, plan.samples, &mut rng);
        let mut csv = String::from("max_block_count,frequency\n");
        for (k, h) in hist.iter().enumerate() {
            csv += &format!("{k},{h}\n");
        }
        Ok(ok_outcome(si, seed, mean, csv, Some(&part)))
    });
    let mut out = Outcome::default();
    for (c, seeds) in runs.into_iter().enumerate() {
        let n = plan.blocks[c];
        let bound = lemma1_bound(s, n);
        let worst = seeds
            .iter()
            .filter_map(|s| s.value.as_ref().ok().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        let pass = worst <= bound;
        out.checks.push(Check::new(
            format!("lemma1_d{d}_S{s}_n{n}"),
            pass,
            format!("mean squared dual norm {worst:.4} ≤ {bound:.4}"),
        ));
        out.cells.push(CellResult {
            spec: CellSpec {
                id: format!("n{n}"),
                n: Some(n),
                eta: None,
            },
            seeds,
            flags: format!("bound={bound:.4};{}", if pass { "pass" } else { "fail" }),
        });
    }
    Ok(out)
}

/// A point drawn uniformly from the open simplex.
pub fn random_simplex_point<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..d).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn diameter_bound(n: usize) -> f64 {
    2.0 * (1.0 + (n as f64).ln()).sqrt()
}

fn diameter_check(plan: &Plan) -> Result<Outcome> {
    let d = plan.d;
    let body = BodySpec::simplex(d);
    let runs = sweep(plan, plan.blocks.len(), |c, si, seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let part = random_equal_partition(d, plan.blocks[c], &mut rng)?;
        let m = MirrorMapSpec::block_norm(part.clone());
        let mut csv = String::from("point,diameter\n");
        let mut worst = 0.0f64;
        for k in 0..plan.points {
            let dn = diameter(&body, &m, &random_simplex_point(d, &mut rng))?;
            csv += &format!("{},{dn:?}\n", k + 1);
            worst = worst.max(dn);
        }
        Ok(ok_outcome(si, seed, worst, csv, Some(&part)))
    });
    let mut out = Outcome::default();
    for (c, seeds) in runs.into_iter().enumerate() {
        let n = plan.blocks[c];
        let bound = diameter_bound(n);
        let worst = seeds
            .iter()
            .filter_map(|s| s.value.as_ref().ok().copied())
            .fold(f64::NEG_INFINITY, f64::max);
        let pass = worst <= bound + 1e-9;
        out.checks.push(Check::new(
            format!("diameter_d{d}_n{n}"),
            pass,
            format!("max D {worst:.6} ≤ {bound:.6}"),
        ));
        out.cells.push(CellResult {
            spec: CellSpec {
                id: format!("n{n}"),
                n: Some(n),
                eta: None,
            },
            seeds,
            flags: format!("bound={bound:.6};{}", if pass { "pass" } else { "fail" }),
        });
    }
    Ok(out)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn execute(plan: &Plan) -> Result<Outcome> {
    match plan.experiment {
        ExperimentId::Figure1 => figure1(plan),
        ExperimentId::LogImprovement => log_improvement(plan),
        ExperimentId::PolyImprovement => poly_improvement(plan),
        ExperimentId::Alternating => alternating(plan),
        ExperimentId::MirrorWeights => mirror_weights(plan),
        ExperimentId::Lemma1Check => lemma1_check(plan),
        ExperimentId::DiameterCheck => diameter_check(plan),
    }
}

/// Runs the configured experiment. With an output directory (from the config
/// or `out`), writes `cells/<cell>_s<seed>.csv`, `aggregate.csv`, `plot.svg`
/// where the experiment has one, and `manifest.json`.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<Summary> {
    let plan = config.resolve()?;
    log::info!(
        "running {} with {} seed(s)",
        plan.experiment,
        plan.seeds.len()
    );
    let outcome = execute(&plan)?;
    let rows: Vec<AggregateRow> = outcome
        .cells
        .iter()
        .map(|c| {
            let (mean, stderr) = c.stats();
            AggregateRow {
                cell_id: c.spec.id.clone(),
                n: c.spec.n,
                eta: c.spec.eta,
                mean_regret: mean,
                stderr,
                seeds: c.seeds.len(),
                failed: c.seeds.iter().filter(|s| s.value.is_err()).count(),
                pass_flags: c.flags.clone(),
            }
        })
        .collect();
    let failed_runs = rows.iter().map(|r| r.failed).sum();
    let out_dir = out.map(Path::to_path_buf).or_else(|| config.out.clone());
    if let Some(dir) = &out_dir {
        write_artifacts(dir, &plan, &outcome, &rows)?;
    }
    Ok(Summary {
        plan,
        rows,
        checks: outcome.checks,
        failed_runs,
        out_dir,
    })
}

fn write_artifacts(
    dir: &Path,
    plan: &Plan,
    outcome: &Outcome,
    rows: &[AggregateRow],
) -> Result<()> {
    let cells_dir = dir.join("cells");
    fs::create_dir_all(&cells_dir)?;
    for c in &outcome.cells {
        for s in &c.seeds {
            if let Some(csv) = &s.csv {
                fs::write(
                    cells_dir.join(format!("{}_s{}.csv", c.spec.id, s.seed_index)),
                    csv,
                )?;
            }
        }
    }
    let mut agg = String::from("cell_id,n,eta,mean_regret,stderr,seeds,failed,pass_flags\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        agg += &format!(
            "{},{},{},{:?},{:?},{},{},{}\n",
            r.cell_id,
            opt(r.n.map(|n| n.to_string())),
            opt(r.eta.map(|e| format!("{e:?}"))),
            r.mean_regret,
            r.stderr,
            r.seeds,
            r.failed,
            r.pass_flags
        );
    }
    fs::write(dir.join("aggregate.csv"), agg)?;
    if let Some(svg) = &outcome.svg {
        fs::write(dir.join("plot.svg"), svg)?;
    }
    for (name, body) in &outcome.files {
        fs::write(dir.join(name), body)?;
    }
    let plan_json = serde_json::to_value(plan).map_err(|e| Error::Io(e.to_string()))?;
    let cells: Vec<Value> = outcome
        .cells
        .iter()
        .map(|c| {
            json!({
                "cell_id": c.spec.id,
                "n": c.spec.n,
                "eta": c.spec.eta,
                "runs": c.seeds.iter().map(|s| json!({
                    "seed_index": s.seed_index,
                    "seed": s.seed,
                    "regret": s.value.as_ref().ok(),
                    "error": s.value.as_ref().err(),
                    "partition": s.partition,
                    "extra": s.extra,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let manifest = json!({
        "version": VERSION,
        "experiment": plan.experiment,
        "config": plan_json,
        "config_hash": format!("{:016x}", fnv1a(plan_json.to_string().as_bytes())),
        "info": outcome.info,
        "checks": outcome.checks,
        "cells": cells,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

/// Bound suites runnable without a config.
pub const SUITES: [&str; 5] = ["diameter", "regret_law", "determinism", "lemma1", "kernels"];

/// Runs one suite, or every suite for `"all"`.
pub fn verify_bounds(suite: &str, master_seed: u64) -> Result<Vec<Check>> {
    if suite == "all" {
        let mut out = Vec::new();
        for s in SUITES {
            out.extend(verify_bounds(s, master_seed)?);
        }
        return Ok(out);
    }
    match suite {
        "diameter" => {
            let mut cfg = ExperimentConfig::new(ExperimentId::DiameterCheck);
            cfg.master_seed = Some(master_seed);
            Ok(run_experiment(&cfg, None)?.checks)
        }
        "lemma1" => {
            let mut checks = Vec::new();
            for (d, s, n) in [(64, 8, 8), (256, 16, 4), (4096, 8, 16)] {
                let cfg = ExperimentConfig {
                    d: Some(d),
                    sparsity: Some(s),
                    blocks: Some(vec![n]),
                    master_seed: Some(master_seed),
                    ..ExperimentConfig::new(ExperimentId::Lemma1Check)
                };
                checks.extend(run_experiment(&cfg, None)?.checks);
            }
            Ok(checks)
        }
        "regret_law" => regret_law_checks(5, 64, 500, master_seed),
        "determinism" => determinism_checks(master_seed),
        "kernels" => kernel_checks(master_seed),
        other => Err(cfg_err(format!(
            "unknown suite '{other}'; expected one of {SUITES:?} or 'all'"
        ))),
    }
}

/// `regret ≤ √2·D·G_emp·√T` on random sparse instances over `Δ_d`, with the
/// step size set from the same `D` and `G_emp`.
pub fn regret_law_checks(
    runs: usize,
    d: usize,
    horizon: usize,
    master_seed: u64,
) -> Result<Vec<Check>> {
    let body = BodySpec::simplex(d);
    let x1 = uniform(d);
    let ns = dyadic(d);
    (0..runs)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(master_seed, 101, k as u64));
            let inst = log_improvement_losses(d, horizon, &mut rng)?;
            let n = ns[rng.gen_range(0..ns.len())];
            let m = MirrorMapSpec::block_norm(random_equal_partition(d, n, &mut rng)?);
            let dn = diameter(&body, &m, &x1)?;
            let g = empirical_grad_bound(&m, &inst.losses);
            let rec = run_omd(
                &body,
                &m,
                &inst.losses,
                &StepSizeRule::TheorySqrt2 {
                    diameter: dn,
                    grad_bound: g,
                    horizon,
                },
                &x1,
            )?;
            let bound = 2f64.sqrt() * dn * g * (horizon as f64).sqrt() + 1e-6;
            let r = rec.final_regret();
            Ok(Check::new(
                format!("regret_law_run{k}_n{n}"),
                r <= bound,
                format!("regret {r:.4} ≤ {bound:.4}"),
            ))
        })
        .collect()
}

fn determinism_checks(master_seed: u64) -> Result<Vec<Check>> {
    let cfg = ExperimentConfig {
        d: Some(256),
        horizon: Some(60),
        blocks: Some(vec![1, 16, 256]),
        seeds: Some(vec![0, 1]),
        samples: Some(2000),
        eta_factors: Some(vec![0.5, 1.0, 2.0]),
        master_seed: Some(master_seed),
        ..ExperimentConfig::new(ExperimentId::Figure1)
    };
    let a = run_experiment(&cfg, None)?;
    let b = run_experiment(&cfg, None)?;
    let same = a
        .rows
        .iter()
        .zip(&b.rows)
        .all(|(x, y)| x.mean_regret.to_bits() == y.mean_regret.to_bits());
    let mut rng1 = ChaCha8Rng::seed_from_u64(master_seed);
    let mut rng2 = ChaCha8Rng::seed_from_u64(master_seed);
    let l1 = figure1_losses(256, 60, &mut rng1)?;
    let l2 = figure1_losses(256, 60, &mut rng2)?;
    Ok(vec![
        Check::new(
            "determinism_runs",
            same && a.rows.len() == 3,
            "repeated sweep gives identical regrets",
        ),
        Check::new(
            "determinism_losses",
            l1 == l2,
            "same seed gives the same loss sequence",
        ),
    ])
}

fn kernel_checks(master_seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(master_seed, 202, 0));
    let d = 12;
    let maps = [
        MirrorMapSpec::Euclidean,
        MirrorMapSpec::Entropic,
        MirrorMapSpec::block_norm(random_equal_partition(d, 1, &mut rng)?),
        MirrorMapSpec::block_norm(random_equal_partition(d, 3, &mut rng)?),
        MirrorMapSpec::block_norm(random_equal_partition(d, 12, &mut rng)?),
    ];
    let mut checks = Vec::new();
    for m in &maps {
        let mut fd_err = 0.0f64;
        let mut rt_err = 0.0f64;
        for _ in 0..20 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
            let g = potential_grad(m, &x)?;
            for i in 0..d {
                let h = 1e-6 * x[i].abs().max(1e-3);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (potential_value(m, &xp)? - potential_value(m, &xm)?) / (2.0 * h);
                fd_err = fd_err.max((fd - g[i]).abs() / g[i].abs().max(1.0));
            }
            let back = potential_grad_inverse(m, &g)?;
            for (a, b) in back.iter().zip(&x) {
                rt_err = rt_err.max((a - b).abs() / b.abs().max(1.0));
            }
        }
        checks.push(Check::new(
            format!("gradient_fd_{}", m.label()),
            fd_err <= 1e-5,
            format!("max relative error {fd_err:.2e}"),
        ));
        checks.push(Check::new(
            format!("gradient_roundtrip_{}", m.label()),
            rt_err <= 1e-10,
            format!("max relative error {rt_err:.2e}"),
        ));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_rejections() {
        let plan = ExperimentConfig::new(ExperimentId::Figure1)
            .resolve()
            .unwrap();
        assert_eq!(plan.blocks.len(), 13);
        assert_eq!(plan.seeds.len(), 20);
        assert_eq!((plan.d, plan.horizon), (4096, 250));
        let empty = ExperimentConfig {
            seeds: Some(vec![]),
            ..ExperimentConfig::new(ExperimentId::Figure1)
        };
        assert!(matches!(empty.resolve(), Err(Error::Config(_))));
        let wrong = ExperimentConfig {
            horizons: Some(vec![64]),
            ..ExperimentConfig::new(ExperimentId::Figure1)
        };
        assert!(matches!(wrong.resolve(), Err(Error::Config(_))));
        assert!(toml::from_str::<ExperimentConfig>("experiment = \"figure1\"\nbogus = 1").is_err());
        let parsed: ExperimentConfig =
            toml::from_str("experiment = \"alternating\"\nhorizons = [64, 128]").unwrap();
        assert_eq!(parsed.resolve().unwrap().horizons, vec![64, 128]);
        let parsed: ExperimentConfig =
            toml::from_str("experiment = \"figure1\"\nT = 100\nd = 64").unwrap();
        assert_eq!(parsed.resolve().unwrap().horizon, 100);
        assert!(ExperimentConfig {
            d: Some(100),
            ..ExperimentConfig::new(ExperimentId::Figure1)
        }
        .resolve()
        .is_err());
        assert!(ExperimentConfig {
            d: Some(100),
            ..ExperimentConfig::new(ExperimentId::PolyImprovement)
        }
        .resolve()
        .is_err());
        assert!("nope".parse::<ExperimentId>().is_err());
        assert_eq!(
            "mirror_weights".parse::<ExperimentId>().unwrap(),
            ExperimentId::MirrorWeights
        );
    }

    #[test]
    fn seed_mixing_separates_streams() {
        let a = mix_seed(42, 1, 0);
        assert_eq!(a, mix_seed(42, 1, 0));
        assert_ne!(a, mix_seed(42, 2, 0));
        assert_ne!(a, mix_seed(42, 1, 1));
        assert_ne!(a, mix_seed(43, 1, 0));
    }

    #[test]
    fn stats() {
        let (m, e) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((e - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn lemma1_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let part = random_equal_partition(64, 8, &mut rng).unwrap();
        let (mean, hist) = lemma1_mean(&part, 8, 20_000, &mut rng);
        assert!(mean >= 1.0 && mean <= lemma1_bound(8, 8));
        assert_eq!(hist.iter().sum::<usize>(), 20_000);
        // one block: the count is always S
        let one = Partition::contiguous(64, 1).unwrap();
        assert_eq!(lemma1_mean(&one, 5, 100, &mut rng).0, 5.0);
    }

    #[test]
    fn simplex_points_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_simplex_point(50, &mut rng);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12 && x.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn suites() {
        assert!(verify_bounds("kernels", 0).unwrap().iter().all(|c| c.pass));
        assert!(verify_bounds("regret_law", 0)
            .unwrap()
            .iter()
            .all(|c| c.pass));
        assert!(verify_bounds("determinism", 3)
            .unwrap()
            .iter()
            .all(|c| c.pass));
        assert!(verify_bounds("bogus", 0).is_err());
    }

    #[test]
    fn alternating_small_grid() {
        let cfg = ExperimentConfig {
            horizons: Some(vec![64, 128]),
            eta_euc: Some(vec![0.5]),
            eta_ent: Some(vec![0.1, 1.0]),
            ..ExperimentConfig::new(ExperimentId::Alternating)
        };
        let s = run_experiment(&cfg, None).unwrap();
        assert_eq!(s.rows.len(), 4);
        assert_eq!(s.exit_code(), 0);
        let (c1, c2, e) = alternating_expected_regret(64, 0.5, 0.1).unwrap();
        assert_eq!(e, 0.5 * (c1 + c2));
    }
}
