//! Monte Carlo engine: per-trial metrics, seeded trials, parameter sweeps
//! and the figure presets.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    make_structure, mix_seed, sample_matrix, sample_psi, sample_signal, seeded_rng, HierSignal, HierStructure,
    OverlapCounts, PriorSupport, SignalDist, WeightStrategy,
};
use crate::recovery::{bomp, default_eps, hibomp, hibomp_p, hiomp, omp, RecoveryResult};

/// Recovery algorithm of one roster slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Omp,
    Bomp,
    /// Listed in the published roster but not implemented here.
    Mols,
    Hiomp,
    Hibomp,
    HibompP,
}

/// Rule producing the PSI overlap counts at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PsiSpec {
    None,
    /// `ᾱ = ⌈fraction·k_out⌉` whole active outer blocks, plus
    /// `β = ⌈beta_fraction·k_in⌉` non-support unit blocks.
    WholeBlocks {
        fraction: f64,
        beta_fraction: f64,
    },
    /// `per_block` augmentation unit blocks inside every active outer block.
    Augmentation {
        per_block: usize,
    },
    /// Explicit counts per mode (totals over the whole vector).
    Fixed {
        overlaps: Vec<OverlapCounts>,
    },
}

impl PsiSpec {
    /// Mode-indexed overlap counts for outer sparsity `k_out`.
    pub fn overlaps(&self, s: &HierStructure) -> Vec<OverlapCounts> {
        let k_out = s.k(1);
        let k_in = s.k(s.n());
        let ceil = |f: f64, k: usize| (f * k as f64 - 1e-9).ceil().max(0.0) as usize;
        let mut out = vec![OverlapCounts::default(); s.n()];
        match self {
            PsiSpec::None => {}
            PsiSpec::WholeBlocks {
                fraction,
                beta_fraction,
            } => {
                out[0].alpha_bar = ceil(*fraction, k_out);
                out[0].beta = ceil(*beta_fraction, k_in);
            }
            PsiSpec::Augmentation { per_block } => out[0].alpha_star_delta = per_block * k_out,
            PsiSpec::Fixed { overlaps } => {
                for (o, f) in out.iter_mut().zip(overlaps) {
                    *o = *f;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub id: String,
    pub kind: AlgorithmKind,
    #[serde(default = "psi_none")]
    pub psi: PsiSpec,
    #[serde(default)]
    pub weight_strategy: WeightStrategy,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn psi_none() -> PsiSpec {
    PsiSpec::None
}

fn enabled_default() -> bool {
    true
}

impl AlgorithmSpec {
    pub fn plain(id: &str, kind: AlgorithmKind) -> Self {
        AlgorithmSpec {
            id: id.into(),
            kind,
            psi: PsiSpec::None,
            weight_strategy: WeightStrategy::default(),
            enabled: true,
            note: None,
        }
    }

    pub fn with_psi(id: &str, psi: PsiSpec) -> Self {
        AlgorithmSpec {
            psi,
            ..Self::plain(id, AlgorithmKind::HibompP)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Noise {
    None,
    SnrDb(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    KOut,
    Snr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(rename = "M")]
    pub m: usize,
    /// Base structure; a `k_out` sweep overrides the mode-1 sparsity.
    pub structure: HierStructure,
    pub signal_dist: SignalDist,
    pub noise: Noise,
    pub algorithms: Vec<AlgorithmSpec>,
    pub trials: usize,
    pub master_seed: u64,
    pub sweep: Sweep,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Domain("trials must be at least 1".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Domain("sweep needs at least one value".into()));
        }
        if self.sweep.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("sweep values must be strictly increasing".into()));
        }
        if self.m == 0 {
            return Err(Error::Dimension("M must be positive".into()));
        }
        for v in &self.sweep.values {
            let (s, _) = self.point(*v)?;
            for alg in self.algorithms.iter().filter(|a| a.enabled) {
                check_psi_feasible(&s, &alg.psi)?;
            }
        }
        Ok(())
    }

    /// Structure and noise at one sweep value.
    pub fn point(&self, value: f64) -> Result<(HierStructure, Noise)> {
        match self.sweep.axis {
            SweepAxis::KOut => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Domain(format!("k_out must be a positive integer, got {value}")));
                }
                let mut k = self.structure.sparsity().to_vec();
                k[0] = value as usize;
                let s = make_structure(self.structure.dims(), self.structure.unit_block(), &k)?;
                Ok((s, self.noise))
            }
            SweepAxis::Snr => Ok((self.structure.clone(), Noise::SnrDb(value))),
        }
    }
}

/// Checks the requested counts against the category pool sizes, which depend
/// only on the structure.
fn check_psi_feasible(s: &HierStructure, psi: &PsiSpec) -> Result<()> {
    for (i, o) in psi.overlaps(s).iter().enumerate() {
        let t = i + 1;
        let active_blocks = s.sparsity_prefix(t);
        let parent_blocks = s.sparsity_prefix(t - 1);
        let upb = s.units_per_block(t);
        let support = s.block_sparsity();
        let inside = active_blocks * upb;
        let in_parents = parent_blocks * s.dim(t) * upb;
        let per_block = support / active_blocks;
        let pools = [
            ("alpha_bar", o.alpha_bar, active_blocks),
            (
                "alpha_star",
                o.alpha_star,
                support.saturating_sub(o.alpha_bar * per_block),
            ),
            (
                "alpha_delta",
                o.alpha_delta + o.alpha_star_delta,
                (inside - support).saturating_sub(o.alpha_bar * (upb - per_block)),
            ),
            ("beta", o.beta, in_parents - inside),
            ("gamma", o.gamma, s.unit_blocks() - in_parents),
        ];
        for (name, need, pool) in pools {
            if need > pool {
                return Err(Error::InfeasiblePsi(format!(
                    "mode {t}: {name} = {need} exceeds the pool of {pool}"
                )));
            }
        }
    }
    Ok(())
}

/// Metrics of one algorithm on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub algorithm: String,
    pub exact: bool,
    pub nmse: f64,
    pub false_alarm: f64,
    pub iterations: usize,
    pub runtime_ns: u64,
    /// Set when the trial could not run (for example infeasible PSI).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

pub fn metric_err(records: &[TrialRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Domain("no trial records".into()));
    }
    Ok(records.iter().filter(|r| r.exact).count() as f64 / records.len() as f64)
}

pub fn metric_nmse(records: &[TrialRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Domain("no trial records".into()));
    }
    Ok(records.iter().map(|r| r.nmse).sum::<f64>() / records.len() as f64)
}

/// `|Ξ̂ \ Ξ| / denom` over coefficient indices.
pub fn metric_false_alarm(estimate: &[usize], truth: &[usize], denom: usize) -> Result<f64> {
    if denom == 0 {
        return Err(Error::Domain("false alarm needs a positive support size".into()));
    }
    let wrong = estimate.iter().filter(|i| !truth.contains(i)).count();
    Ok(wrong as f64 / denom as f64)
}

pub fn nmse(estimate: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

fn algorithm_salt(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed of one trial, keyed by the sweep value so that inserting sweep points
/// leaves existing points untouched.
pub fn trial_seed(master: u64, point: f64, index: usize) -> u64 {
    mix_seed(mix_seed(master, point.to_bits()), index as u64)
}

/// One drawn problem instance.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub seed: u64,
    pub structure: HierStructure,
    pub d: DMatrix<f64>,
    pub signal: HierSignal,
    pub y: DVector<f64>,
    pub noise: Option<DVector<f64>>,
}

/// Draws the matrix, signal and measurements of one trial.
pub fn draw_trial(cfg: &ExperimentConfig, point: f64, index: usize) -> Result<TrialData> {
    let (s, noise) = cfg.point(point)?;
    let seed = trial_seed(cfg.master_seed, point, index);
    let d = sample_matrix(cfg.m, &s, mix_seed(seed, 1))?.entries;
    let signal = sample_signal(&s, cfg.signal_dist, mix_seed(seed, 2));
    let clean = &d * signal.vector();
    let (y, noise) = match noise {
        Noise::None => (clean, None),
        Noise::SnrDb(db) => {
            let mut rng = seeded_rng(mix_seed(seed, 3));
            let g = DVector::from_fn(cfg.m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let gn = g.norm();
            let n = if gn > 0.0 {
                g * (clean.norm() / (gn * 10f64.powf(db / 20.0)))
            } else {
                g
            };
            (&clean + &n, Some(n))
        }
    };
    Ok(TrialData {
        seed,
        structure: s,
        d,
        signal,
        y,
        noise,
    })
}

/// PSI of one algorithm slot for a drawn trial.
pub fn trial_psi(data: &TrialData, alg: &AlgorithmSpec) -> Result<PriorSupport> {
    let overlaps = alg.psi.overlaps(&data.structure);
    sample_psi(
        &data.structure,
        &data.signal,
        &overlaps,
        alg.weight_strategy.clone(),
        mix_seed(data.seed, algorithm_salt(&alg.id)),
    )
}

fn run_algorithm(data: &TrialData, alg: &AlgorithmSpec, eps: f64) -> Result<RecoveryResult> {
    let s = &data.structure;
    let (d, y) = (&data.d, &data.y);
    match alg.kind {
        AlgorithmKind::Omp => omp(d, y, s.block_sparsity() * s.unit_block(), eps),
        AlgorithmKind::Bomp => bomp(d, y, s.unit_block(), s.block_sparsity(), eps),
        AlgorithmKind::Hiomp => hiomp(d, y, s, eps),
        AlgorithmKind::Hibomp => hibomp(d, y, s, eps),
        AlgorithmKind::HibompP => hibomp_p(d, y, s, &trial_psi(data, alg)?, eps),
        AlgorithmKind::Mols => Err(Error::Domain("MOLS is not implemented".into())),
    }
}

fn nonzero_indices(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Stopping tolerance: `1e-6‖y‖` noiseless, the noise norm otherwise.
fn trial_eps(data: &TrialData) -> f64 {
    match &data.noise {
        None => default_eps(&data.y),
        Some(n) => n.norm(),
    }
}

/// Runs every enabled algorithm on one drawn trial.
pub fn run_trial(cfg: &ExperimentConfig, point: f64, index: usize) -> Result<Vec<TrialRecord>> {
    let data = draw_trial(cfg, point, index)?;
    let truth = nonzero_indices(&data.signal.coeffs);
    let denom = data.structure.block_sparsity() * data.structure.unit_block();
    let eps = trial_eps(&data);
    Ok(cfg
        .algorithms
        .iter()
        .filter(|a| a.enabled)
        .map(|alg| {
            let start = Instant::now();
            let outcome = run_algorithm(&data, alg, eps);
            let runtime_ns = start.elapsed().as_nanos() as u64;
            match outcome {
                Ok(res) => {
                    let est = nonzero_indices(&res.estimate);
                    let err = nmse(&res.estimate, &data.signal.coeffs);
                    let same = est == truth;
                    let exact = same && (data.noise.is_some() || err.sqrt() < 1e-6);
                    TrialRecord {
                        seed: data.seed,
                        algorithm: alg.id.clone(),
                        exact,
                        nmse: err,
                        false_alarm: metric_false_alarm(&est, &truth, denom).unwrap_or(1.0),
                        iterations: res.iterations(),
                        runtime_ns,
                        failure: None,
                    }
                }
                Err(e) => TrialRecord {
                    seed: data.seed,
                    algorithm: alg.id.clone(),
                    exact: false,
                    nmse: 1.0,
                    false_alarm: 1.0,
                    iterations: 0,
                    runtime_ns,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// One aggregated table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: f64,
    pub algorithm: String,
    pub err: f64,
    pub nmse_mean: f64,
    pub false_alarm_mean: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Every record of one sweep point, trial-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecords {
    pub point: f64,
    pub trials: Vec<Vec<TrialRecord>>,
}

impl PointRecords {
    /// Records of one algorithm, in trial order.
    pub fn of(&self, algorithm: &str) -> Vec<&TrialRecord> {
        self.trials
            .iter()
            .flatten()
            .filter(|r| r.algorithm == algorithm)
            .collect()
    }
}

/// Runs every trial of every point on the current rayon pool. Trial-level
/// draw errors become failed records.
pub fn sweep_records(cfg: &ExperimentConfig) -> Result<Vec<PointRecords>> {
    cfg.validate()?;
    let jobs: Vec<(f64, usize)> = cfg
        .sweep
        .values
        .iter()
        .flat_map(|&v| (0..cfg.trials).map(move |i| (v, i)))
        .collect();
    let results: Vec<Vec<TrialRecord>> = jobs
        .par_iter()
        .map(|&(v, i)| {
            run_trial(cfg, v, i).unwrap_or_else(|e| {
                cfg.algorithms
                    .iter()
                    .filter(|a| a.enabled)
                    .map(|a| TrialRecord {
                        seed: trial_seed(cfg.master_seed, v, i),
                        algorithm: a.id.clone(),
                        exact: false,
                        nmse: 1.0,
                        false_alarm: 1.0,
                        iterations: 0,
                        runtime_ns: 0,
                        failure: Some(e.to_string()),
                    })
                    .collect()
            })
        })
        .collect();
    let mut it = results.into_iter();
    Ok(cfg
        .sweep
        .values
        .iter()
        .map(|&v| PointRecords {
            point: v,
            trials: it.by_ref().take(cfg.trials).collect(),
        })
        .collect())
}

/// Per-point, per-algorithm aggregation in roster order.
pub fn aggregate(cfg: &ExperimentConfig, points: &[PointRecords]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for p in points {
        for alg in cfg.algorithms.iter().filter(|a| a.enabled) {
            let recs: Vec<TrialRecord> = p.of(&alg.id).into_iter().cloned().collect();
            rows.push(SweepRow {
                point: p.point,
                algorithm: alg.id.clone(),
                err: metric_err(&recs)?,
                nmse_mean: metric_nmse(&recs)?,
                false_alarm_mean: recs.iter().map(|r| r.false_alarm).sum::<f64>() / recs.len() as f64,
                trials: recs.len(),
                seed: cfg.master_seed,
            });
        }
    }
    Ok(rows)
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    aggregate(cfg, &sweep_records(cfg)?)
}

/// [`sweep`] on a dedicated pool of `workers` threads.
pub fn sweep_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    pool.install(|| sweep(cfg))
}

pub const CSV_HEADER: [&str; 7] = [
    "point",
    "algorithm",
    "err",
    "nmse_mean",
    "false_alarm_mean",
    "trials",
    "seed",
];

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER).map_err(|e| Error::Format(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Format(format!(
            "unexpected sweep header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let rows = rd
        .deserialize()
        .collect::<std::result::Result<Vec<SweepRow>, _>>()
        .map_err(|e| Error::Format(e.to_string()))?;
    if rows.is_empty() {
        return Err(Error::Format("sweep table has no rows".into()));
    }
    Ok(rows)
}

fn roster(k_in: usize, d_out: usize, d: usize) -> Vec<AlgorithmSpec> {
    vec![
        AlgorithmSpec::plain("OMP", AlgorithmKind::Omp),
        AlgorithmSpec::plain("BOMP", AlgorithmKind::Bomp),
        AlgorithmSpec {
            enabled: false,
            note: Some("MOLS is part of the published comparison but not implemented".into()),
            ..AlgorithmSpec::plain("MOLS", AlgorithmKind::Mols)
        },
        AlgorithmSpec::plain("HiOMP", AlgorithmKind::Hiomp),
        AlgorithmSpec::plain("HiBOMP", AlgorithmKind::Hibomp),
        AlgorithmSpec::with_psi(
            "HiBOMP-P1",
            PsiSpec::WholeBlocks {
                fraction: 0.2,
                beta_fraction: 0.0,
            },
        ),
        AlgorithmSpec::with_psi(
            "HiBOMP-P2",
            PsiSpec::WholeBlocks {
                fraction: 0.2,
                beta_fraction: 0.2,
            },
        ),
        AlgorithmSpec::with_psi(
            "HiBOMP-P3",
            PsiSpec::Augmentation {
                per_block: d_out / d - k_in,
            },
        ),
    ]
}

fn preset(
    name: &str,
    m: usize,
    n: usize,
    d_out: usize,
    d: usize,
    k: (usize, usize),
    dist: SignalDist,
    sweep: Sweep,
) -> ExperimentConfig {
    let structure = make_structure(&[n / d_out, d_out / d], d, &[k.0, k.1]).expect("preset structure is valid");
    ExperimentConfig {
        name: name.into(),
        m,
        structure,
        signal_dist: dist,
        noise: Noise::None,
        algorithms: roster(k.1, d_out, d),
        trials: 1000,
        master_seed: 1,
        sweep,
    }
}

/// The figure configurations, keyed by name.
pub fn presets() -> BTreeMap<String, ExperimentConfig> {
    let k_out = |hi: usize| Sweep {
        axis: SweepAxis::KOut,
        values: (1..=hi).map(|v| v as f64).collect(),
    };
    let snr = || Sweep {
        axis: SweepAxis::Snr,
        values: (0..=6).map(|i| 5.0 * i as f64).collect(),
    };
    let list = [
        preset("fig3-sub-a", 80, 400, 16, 4, (1, 2), SignalDist::TwoPam, k_out(5)),
        preset("fig3-sub-b", 40, 400, 16, 4, (2, 2), SignalDist::TwoPam, k_out(4)),
        preset("fig3-main", 128, 512, 16, 2, (1, 6), SignalDist::TwoPam, k_out(6)),
        preset("fig4-a", 80, 400, 16, 4, (1, 2), SignalDist::Gaussian, snr()),
        preset("fig4-b", 40, 400, 16, 4, (2, 2), SignalDist::Gaussian, snr()),
    ];
    list.into_iter().map(|c| (c.name.clone(), c)).collect()
}
