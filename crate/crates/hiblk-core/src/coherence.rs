//! Coherence measures of a measurement matrix.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::model::{mix_seed, seeded_rng};

/// Default limit on evaluated index-set pairs for exact `μ_{d*}`.
pub const DEFAULT_PAIR_CAP: u128 = 2_000_000;

/// How a hierarchical coherence was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CoherenceStrategy {
    Exact {
        cap: u128,
    },
    /// Max over `count` seeded random pairs: a lower bound on the true value.
    Sampled {
        count: usize,
        seed: u64,
    },
}

impl CoherenceStrategy {
    pub fn exact() -> Self {
        CoherenceStrategy::Exact { cap: DEFAULT_PAIR_CAP }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, CoherenceStrategy::Exact { .. })
    }
}

/// One `μ_{d*}` value with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierEstimate {
    pub d_star: usize,
    pub value: f64,
    pub strategy: CoherenceStrategy,
    pub lower_bound: bool,
}

/// One `ν_{d*}` value for mode blocks of `mode_block` columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuEntry {
    pub d_star: usize,
    pub mode_block: usize,
    pub value: f64,
}

/// Every coherence quantity of one matrix at one unit block length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceProfile {
    pub unit_block: usize,
    pub mu: f64,
    pub mu_block: f64,
    pub nu_sub: f64,
    pub mu_hier: Vec<HierEstimate>,
    pub nu_hier: Vec<NuEntry>,
}

impl CoherenceProfile {
    pub fn mu_hier_at(&self, d_star: usize) -> Option<&HierEstimate> {
        self.mu_hier.iter().find(|e| e.d_star == d_star)
    }

    pub fn nu_hier_at(&self, d_star: usize, mode_block: usize) -> Option<f64> {
        self.nu_hier
            .iter()
            .find(|e| e.d_star == d_star && e.mode_block == mode_block)
            .map(|e| e.value)
    }
}

fn gram(d: &DMatrix<f64>) -> DMatrix<f64> {
    d.transpose() * d
}

/// `μ`: largest off-diagonal Gram entry in absolute value.
pub fn mutual_coherence(d: &DMatrix<f64>) -> Result<f64> {
    if d.ncols() < 2 {
        return Err(Error::Dimension("coherence needs at least two columns".into()));
    }
    let g = gram(d);
    let n = g.nrows();
    let mut best: f64 = 0.0;
    for j in 0..n {
        for i in 0..j {
            best = best.max(g[(i, j)].abs());
        }
    }
    Ok(best)
}

fn check_block(n: usize, d: usize) -> Result<usize> {
    if d == 0 || !n.is_multiple_of(d) {
        return Err(Error::Dimension(format!("{n} columns do not split into blocks of {d}")));
    }
    Ok(n / d)
}

/// `μ_B`: largest off-diagonal block spectral norm divided by `d`.
pub fn block_coherence(dm: &DMatrix<f64>, d: usize) -> Result<f64> {
    let blocks = check_block(dm.ncols(), d)?;
    if blocks < 2 {
        return Err(Error::Dimension("block coherence needs at least two blocks".into()));
    }
    let g = gram(dm);
    let best = (0..blocks)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..blocks)
                .map(|j| spectral_norm(&g.view((i * d, j * d), (d, d))))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best / d as f64)
}

/// `ν`: largest off-diagonal inner product inside one block of length `d`.
pub fn sub_coherence(dm: &DMatrix<f64>, d: usize) -> Result<f64> {
    let blocks = check_block(dm.ncols(), d)?;
    let g = gram(dm);
    let mut best: f64 = 0.0;
    for b in 0..blocks {
        for j in 0..d {
            for i in 0..j {
                best = best.max(g[(b * d + i, b * d + j)].abs());
            }
        }
    }
    Ok(best)
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of ordered disjoint pairs of `c`-subsets of `u` unit blocks.
pub fn disjoint_pair_count(u: usize, c: usize) -> u128 {
    binom(u, c).saturating_mul(binom(u.saturating_sub(c), c))
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn cross_norm(g: &DMatrix<f64>, a: &[usize], b: &[usize], d: usize) -> f64 {
    let rows: Vec<usize> = a.iter().flat_map(|&u| u * d..(u + 1) * d).collect();
    let cols: Vec<usize> = b.iter().flat_map(|&u| u * d..(u + 1) * d).collect();
    let m = DMatrix::from_fn(rows.len(), cols.len(), |i, j| g[(rows[i], cols[j])]);
    spectral_norm(&m)
}

fn hier_params(n: usize, d: usize, d_star: usize) -> Result<(usize, usize)> {
    let units = check_block(n, d)?;
    if d_star == 0 || !d_star.is_multiple_of(d) {
        return Err(Error::Dimension(format!(
            "block length {d_star} is not a multiple of the unit block {d}"
        )));
    }
    let c = d_star / d;
    if 2 * c > units {
        return Err(Error::Dimension(format!(
            "two disjoint sets of {c} unit blocks do not fit in {units}"
        )));
    }
    Ok((units, c))
}

/// `μ_{d*}`: largest cross-Gram spectral norm, divided by `d*`, over disjoint
/// pairs of unit-block selections of total length `d*`.
pub fn hier_block_coherence(
    dm: &DMatrix<f64>,
    d: usize,
    d_star: usize,
    strategy: CoherenceStrategy,
) -> Result<HierEstimate> {
    let (units, c) = hier_params(dm.ncols(), d, d_star)?;
    let g = gram(dm);
    let value = match strategy {
        CoherenceStrategy::Exact { cap } => {
            let pairs = disjoint_pair_count(units, c);
            if pairs > cap {
                return Err(Error::EnumerationCap { pairs, cap });
            }
            let combos = combinations(units, c);
            (0..combos.len())
                .into_par_iter()
                .map(|i| {
                    let a = &combos[i];
                    combos[i + 1..]
                        .iter()
                        .filter(|b| b.iter().all(|u| !a.contains(u)))
                        .map(|b| cross_norm(&g, a, b, d))
                        .fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max)
        }
        CoherenceStrategy::Sampled { count, seed } => (0..count)
            .into_par_iter()
            .map(|k| {
                let mut rng = seeded_rng(mix_seed(seed, k as u64));
                let picked = sample(&mut rng, units, 2 * c).into_vec();
                cross_norm(&g, &picked[..c], &picked[c..], d)
            })
            .reduce(|| 0.0, f64::max),
    };
    Ok(HierEstimate {
        d_star,
        value: value / d_star as f64,
        strategy,
        lower_bound: !strategy.is_exact(),
    })
}

/// `ν_{d*}` over mode blocks of `mode_block` columns.
///
/// A selection of `d*/d ≥ 2` unit blocks inside a mode block can contain any
/// two of its columns, so the value is the largest inner product between
/// distinct columns of one mode block. With `d*/d = 1` a selection is a
/// single unit block and the value is the within-unit-block maximum.
pub fn hier_sub_coherence(dm: &DMatrix<f64>, d: usize, d_star: usize, mode_block: usize) -> Result<f64> {
    let n = dm.ncols();
    check_block(n, d)?;
    if mode_block == 0 || !mode_block.is_multiple_of(d) || !n.is_multiple_of(mode_block) {
        return Err(Error::Dimension(format!(
            "mode blocks of {mode_block} columns do not tile {n} columns in units of {d}"
        )));
    }
    if d_star == 0 || !d_star.is_multiple_of(d) || d_star > mode_block {
        return Err(Error::Dimension(format!(
            "block length {d_star} is not a unit multiple inside mode blocks of {mode_block}"
        )));
    }
    let span = if d_star == d { d } else { mode_block };
    let g = gram(dm);
    let mut best: f64 = 0.0;
    for b in 0..n / span {
        for j in 0..span {
            for i in 0..j {
                best = best.max(g[(b * span + i, b * span + j)].abs());
            }
        }
    }
    Ok(best)
}

/// `√((N−M)/(M(N−1)))`.
pub fn welch_bound(m: usize, n: usize) -> Result<f64> {
    if m == 0 || n < 2 || m > n {
        return Err(Error::Domain(format!(
            "Welch bound needs 1 ≤ M ≤ N and N ≥ 2, got M={m}, N={n}"
        )));
    }
    let (m, n) = (m as f64, n as f64);
    Ok(((n - m) / (m * (n - 1.0))).sqrt())
}

/// Computes a full profile: `μ`, `μ_B`, `ν`, and the requested hierarchical
/// entries (`d*` values for `μ_{d*}`; `(d*, mode block)` pairs for `ν_{d*}`).
pub fn coherence_profile(
    dm: &DMatrix<f64>,
    d: usize,
    mu_requests: &[usize],
    nu_requests: &[(usize, usize)],
    strategy: CoherenceStrategy,
) -> Result<CoherenceProfile> {
    let mut mu_hier = Vec::new();
    for &ds in mu_requests {
        if mu_hier.iter().any(|e: &HierEstimate| e.d_star == ds) {
            continue;
        }
        mu_hier.push(hier_block_coherence(dm, d, ds, strategy)?);
    }
    let mut nu_hier = Vec::new();
    for &(ds, mb) in nu_requests {
        if nu_hier.iter().any(|e: &NuEntry| e.d_star == ds && e.mode_block == mb) {
            continue;
        }
        nu_hier.push(NuEntry {
            d_star: ds,
            mode_block: mb,
            value: hier_sub_coherence(dm, d, ds, mb)?,
        });
    }
    let blocks = dm.ncols() / d.max(1);
    Ok(CoherenceProfile {
        unit_block: d,
        mu: mutual_coherence(dm)?,
        mu_block: if blocks >= 2 { block_coherence(dm, d)? } else { 0.0 },
        nu_sub: sub_coherence(dm, d)?,
        mu_hier,
        nu_hier,
    })
}
