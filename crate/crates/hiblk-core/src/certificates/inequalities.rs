use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::{
    block_coherence, hier_block_coherence, hier_sub_coherence, mutual_coherence, sub_coherence, CoherenceStrategy,
};
use crate::error::{Error, Result};
use crate::linalg::{
    max_eigen, min_singular, mixed_norm_padded, pinv_full_col, rho_c, rho_r, select_cols, spectral_norm, zero_pad,
    BlockPartition, ComplementProjector, MixedP,
};
use crate::model::{gaussian_matrix, mix_seed, seeded_rng};

/// Relative slack allowed for floating-point round-off.
pub const INEQ_TOL: f64 = 1e-9;

/// The matrix and vector inequalities behind the recovery conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityKind {
    /// `‖A‖ ≤ √(ρ_c ρ_r)`.
    Lemma1,
    /// `‖Ax‖_{2,∞} ≤ ρ_r(A)‖x‖_{2,∞}`.
    Lemma2Row,
    /// `ρ_c(AB) ≤ ρ_c(A)ρ_c(B)`.
    Lemma3Matrix,
    /// `‖Ax‖_{2,1} ≤ ρ_c(A)‖x‖_{2,1}`.
    Lemma3Vector,
    /// `‖Ax‖_{2,∞} ≤ ρ_c(A)‖x‖_{2,∞}` as printed. Not a valid inequality;
    /// reported for information and left out of [`InequalityKind::all`].
    Lemma3VectorPrinted,
    /// `ρ_c^{(d1,d2)}(A) ≤ ⌈d2/d1⌉ ρ_c^{(d1,d1)}(Ā)`.
    Remark4,
    /// Max/min sandwich of split sums.
    Lemma4,
    /// The sandwich applied to the two parts of every block.
    Corollary1,
    /// `‖A_sub‖ ≤ ‖A‖`.
    Lemma6,
    /// Block Gershgorin bounds on the eigenvalues of `D_ΞᵀD_Ξ`.
    Lemma7,
    /// Lower bound on `σ_min` of the projected Gram.
    Lemma8,
    /// The projected Gram bound in terms of `μ_{d*}`, `ν_{d*}`.
    Lemma8Hier,
    /// Norm equivalence through the pseudo-inverse.
    Lemma9,
    /// Norm equivalence through the pseudo-inverse of a projected matrix.
    Lemma9Projected,
    /// `μ_{d*} ≤ μ_B ≤ μ` and `ν ≤ ν_{d*} ≤ μ`.
    Remark1,
    /// Orthonormal unit blocks give `μ_B ≤ 1/d`.
    Remark2,
}

impl InequalityKind {
    pub const ALL: [InequalityKind; 16] = [
        InequalityKind::Lemma1,
        InequalityKind::Lemma2Row,
        InequalityKind::Lemma3Matrix,
        InequalityKind::Lemma3Vector,
        InequalityKind::Lemma3VectorPrinted,
        InequalityKind::Remark4,
        InequalityKind::Lemma4,
        InequalityKind::Corollary1,
        InequalityKind::Lemma6,
        InequalityKind::Lemma7,
        InequalityKind::Lemma8,
        InequalityKind::Lemma8Hier,
        InequalityKind::Lemma9,
        InequalityKind::Lemma9Projected,
        InequalityKind::Remark1,
        InequalityKind::Remark2,
    ];

    /// Every valid inequality.
    pub fn all() -> Vec<InequalityKind> {
        Self::ALL
            .into_iter()
            .filter(|k| *k != InequalityKind::Lemma3VectorPrinted)
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            InequalityKind::Lemma1 => "lemma1",
            InequalityKind::Lemma2Row => "lemma2_row",
            InequalityKind::Lemma3Matrix => "lemma3_matrix",
            InequalityKind::Lemma3Vector => "lemma3_vector",
            InequalityKind::Lemma3VectorPrinted => "lemma3_vector_printed",
            InequalityKind::Remark4 => "remark4",
            InequalityKind::Lemma4 => "lemma4",
            InequalityKind::Corollary1 => "corollary1",
            InequalityKind::Lemma6 => "lemma6",
            InequalityKind::Lemma7 => "lemma7",
            InequalityKind::Lemma8 => "lemma8",
            InequalityKind::Lemma8Hier => "lemma8_hier",
            InequalityKind::Lemma9 => "lemma9",
            InequalityKind::Lemma9Projected => "lemma9_projected",
            InequalityKind::Remark1 => "remark1",
            InequalityKind::Remark2 => "remark2",
        }
    }

    pub fn from_name(name: &str) -> Option<InequalityKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn index(self) -> u64 {
        Self::ALL.iter().position(|k| *k == self).unwrap_or(0) as u64
    }
}

/// Input of one inequality check. Block selections are lists of unit blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum Instance {
    Matrix {
        a: DMatrix<f64>,
        row_block: usize,
        col_block: usize,
    },
    MatVec {
        a: DMatrix<f64>,
        x: Vec<f64>,
        row_block: usize,
        col_block: usize,
    },
    Product {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        d1: usize,
        d2: usize,
        d3: usize,
    },
    /// Each vector is split into its first `split` entries and the rest.
    Split {
        vectors: Vec<Vec<f64>>,
        split: usize,
    },
    BlockVector {
        x: Vec<f64>,
        d: usize,
        split: usize,
    },
    Submatrix {
        a: DMatrix<f64>,
        cols: Vec<usize>,
    },
    /// `xi` selected blocks, `theta` conditioning blocks, `x` a probe vector
    /// of length `|xi|·d` (used by the pseudo-inverse checks).
    Blocks {
        a: DMatrix<f64>,
        d: usize,
        xi: Vec<usize>,
        theta: Vec<usize>,
        x: Vec<f64>,
    },
    /// Groups of unit blocks of `d_star / d` units each, every group inside
    /// one mode block of `mode_block` columns; `theta` lies in one mode block.
    HierBlocks {
        a: DMatrix<f64>,
        d: usize,
        d_star: usize,
        mode_block: usize,
        xi: Vec<Vec<usize>>,
        theta: Vec<usize>,
    },
    Coherences {
        a: DMatrix<f64>,
        d: usize,
        d_star: usize,
        mode_block: usize,
    },
}

/// Result of one check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityOutcome {
    pub holds: bool,
    /// The smaller side of the tightest comparison.
    pub lhs: f64,
    pub rhs: f64,
    pub premise_ok: bool,
}

fn le(lhs: f64, rhs: f64) -> InequalityOutcome {
    InequalityOutcome {
        holds: lhs <= rhs + INEQ_TOL * (1.0 + rhs.abs()),
        lhs,
        rhs,
        premise_ok: true,
    }
}

/// Conjunction of several `lhs ≤ rhs` checks, reporting the tightest one.
fn all_le(pairs: &[(f64, f64)]) -> InequalityOutcome {
    let mut worst = le(pairs[0].0, pairs[0].1);
    let mut worst_gap = pairs[0].1 - pairs[0].0;
    let mut holds = worst.holds;
    for &(l, r) in &pairs[1..] {
        let o = le(l, r);
        holds &= o.holds;
        if r - l < worst_gap {
            worst_gap = r - l;
            worst = o;
        }
    }
    worst.holds = holds;
    worst
}

fn premise_failed() -> InequalityOutcome {
    InequalityOutcome {
        holds: true,
        lhs: f64::NAN,
        rhs: f64::NAN,
        premise_ok: false,
    }
}

fn mismatch(kind: InequalityKind) -> Error {
    Error::Domain(format!("instance shape does not fit {}", kind.name()))
}

fn unit_cols(units: &[usize], d: usize) -> Vec<usize> {
    units.iter().flat_map(|&u| u * d..(u + 1) * d).collect()
}

fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * a
}

fn split_sums(vectors: &[Vec<f64>], split: usize) -> Result<InequalityOutcome> {
    if vectors.is_empty() {
        return Err(Error::Dimension("sandwich needs at least one vector".into()));
    }
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let mut n = Vec::with_capacity(vectors.len());
    let mut m = Vec::with_capacity(vectors.len());
    for v in vectors {
        let k = split.min(v.len());
        n.push(sq(&v[..k]));
        m.push(sq(&v[k..]));
    }
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let sums: Vec<f64> = n.iter().zip(&m).map(|(a, b)| a + b).collect();
    let mid = max(&sums);
    let lo = (max(&n) + min(&m)).max(max(&m) + min(&n));
    let hi = max(&n) + max(&m);
    Ok(all_le(&[(lo, mid), (mid, hi)]))
}

/// `1 − (d−1)ν − (s−1)dμ` and its mirror.
fn gershgorin(d: usize, nu: f64, mu: f64, s: usize) -> f64 {
    (d as f64 - 1.0) * nu + (s as f64 - 1.0) * d as f64 * mu
}

struct Projected {
    a_proj: DMatrix<f64>,
    lower: f64,
    upper: f64,
    premise_ok: bool,
}

fn projected(a: &DMatrix<f64>, d: usize, xi: &[usize], theta: &[usize]) -> Result<Projected> {
    let nu = sub_coherence(a, d)?;
    let mu = block_coherence(a, d)?;
    let (s, r) = (xi.len(), theta.len());
    let sum_s = gershgorin(d, nu, mu, s);
    let sum_r = gershgorin(d, nu, mu, r);
    let den = 1.0 - sum_r;
    let premise_ok = sum_s < 1.0 && den > 0.0;
    let dm = d as f64 * mu;
    let lower = (1.0 - sum_s) - dm * dm * (r * s) as f64 / den;
    let proj = ComplementProjector::new(&select_cols(a, &unit_cols(theta, d)))?;
    Ok(Projected {
        a_proj: proj.apply_mat(&select_cols(a, &unit_cols(xi, d))),
        lower,
        upper: 1.0 + sum_s,
        premise_ok,
    })
}

/// `x ↦ (A†)ᵀ x`.
fn pinv_t_apply(a: &DMatrix<f64>, x: &[f64]) -> Result<DVector<f64>> {
    if x.len() != a.ncols() {
        return Err(Error::Dimension(format!(
            "probe has length {}, matrix has {} columns",
            x.len(),
            a.ncols()
        )));
    }
    Ok(pinv_full_col(a)?.transpose() * DVector::from_column_slice(x))
}

/// Pads every `d2`-wide column block of `a` to width `⌈d2/d1⌉·d1`.
fn ceiling_pad(a: &DMatrix<f64>, d1: usize, d2: usize) -> DMatrix<f64> {
    let a = zero_pad(a, BlockPartition::new(d1, d2));
    let w = d2.div_ceil(d1) * d1;
    let blocks = a.ncols() / d2;
    let mut out = DMatrix::zeros(a.nrows(), blocks * w);
    for b in 0..blocks {
        out.view_mut((0, b * w), (a.nrows(), d2))
            .copy_from(&a.view((0, b * d2), (a.nrows(), d2)));
    }
    out
}

/// Evaluates one inequality on one instance.
pub fn verify_inequality(kind: InequalityKind, inst: &Instance) -> Result<InequalityOutcome> {
    use InequalityKind as K;
    match (kind, inst) {
        (
            K::Lemma1,
            Instance::Matrix {
                a,
                row_block,
                col_block,
            },
        ) => {
            let part = BlockPartition::new(*row_block, *col_block);
            Ok(le(spectral_norm(a), (rho_c(a, part)? * rho_r(a, part)?).sqrt()))
        }
        (
            K::Remark4,
            Instance::Matrix {
                a,
                row_block,
                col_block,
            },
        ) => {
            let (d1, d2) = (*row_block, *col_block);
            let lhs = rho_c(a, BlockPartition::new(d1, d2))?;
            let padded = ceiling_pad(a, d1, d2);
            let rhs = d2.div_ceil(d1) as f64 * rho_c(&padded, BlockPartition::new(d1, d1))?;
            Ok(le(lhs, rhs))
        }
        (
            K::Lemma2Row | K::Lemma3Vector | K::Lemma3VectorPrinted,
            Instance::MatVec {
                a,
                x,
                row_block,
                col_block,
            },
        ) => {
            if x.len() != a.ncols() {
                return Err(Error::Dimension("probe length differs from column count".into()));
            }
            let part = BlockPartition::new(*row_block, *col_block);
            let ax = a * DVector::from_column_slice(x);
            let (p, rho) = match kind {
                K::Lemma2Row => (MixedP::Inf, rho_r(a, part)?),
                K::Lemma3Vector => (MixedP::One, rho_c(a, part)?),
                _ => (MixedP::Inf, rho_c(a, part)?),
            };
            Ok(le(
                mixed_norm_padded(ax.as_slice(), *row_block, p),
                rho * mixed_norm_padded(x, *col_block, p),
            ))
        }
        (K::Lemma3Matrix, Instance::Product { a, b, d1, d2, d3 }) => {
            if a.ncols() != b.nrows() {
                return Err(Error::Dimension("factor shapes do not chain".into()));
            }
            let lhs = rho_c(&(a * b), BlockPartition::new(*d1, *d3))?;
            let rhs = rho_c(a, BlockPartition::new(*d1, *d2))? * rho_c(b, BlockPartition::new(*d2, *d3))?;
            Ok(le(lhs, rhs))
        }
        (K::Lemma4, Instance::Split { vectors, split }) => split_sums(vectors, *split),
        (K::Corollary1, Instance::BlockVector { x, d, split }) => {
            if *d == 0 || x.len() % d != 0 || x.is_empty() {
                return Err(Error::Dimension("vector does not split into blocks".into()));
            }
            let blocks: Vec<Vec<f64>> = x.chunks(*d).map(<[f64]>::to_vec).collect();
            split_sums(&blocks, *split)
        }
        (K::Lemma6, Instance::Submatrix { a, cols }) => {
            if cols.iter().any(|&c| c >= a.ncols()) {
                return Err(Error::Dimension("column index out of range".into()));
            }
            Ok(le(spectral_norm(&select_cols(a, cols)), spectral_norm(a)))
        }
        (K::Lemma7, Instance::Blocks { a, d, xi, .. }) => {
            let nu = sub_coherence(a, *d)?;
            let mu = block_coherence(a, *d)?;
            let sum = gershgorin(*d, nu, mu, xi.len());
            if sum >= 1.0 {
                return Ok(premise_failed());
            }
            let g = gram(&select_cols(a, &unit_cols(xi, *d)));
            Ok(all_le(&[(1.0 - sum, min_singular(&g)?), (max_eigen(&g), 1.0 + sum)]))
        }
        (K::Lemma8, Instance::Blocks { a, d, xi, theta, .. }) => {
            let p = projected(a, *d, xi, theta)?;
            if !p.premise_ok {
                return Ok(premise_failed());
            }
            let g = gram(&p.a_proj);
            Ok(all_le(&[(p.lower, min_singular(&g)?), (max_eigen(&g), p.upper)]))
        }
        (K::Lemma9, Instance::Blocks { a, d, xi, x, .. }) => {
            let nu = sub_coherence(a, *d)?;
            let mu = block_coherence(a, *d)?;
            let sum = gershgorin(*d, nu, mu, xi.len());
            if sum >= 1.0 {
                return Ok(premise_failed());
            }
            let ax = pinv_t_apply(&select_cols(a, &unit_cols(xi, *d)), x)?.norm();
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(all_le(&[((1.0 - sum).sqrt() * ax, xn), (xn, (1.0 + sum).sqrt() * ax)]))
        }
        (K::Lemma9Projected, Instance::Blocks { a, d, xi, theta, x }) => {
            let p = projected(a, *d, xi, theta)?;
            if !p.premise_ok {
                return Ok(premise_failed());
            }
            let ax = pinv_t_apply(&p.a_proj, x)?.norm();
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(all_le(&[(p.lower.max(0.0).sqrt() * ax, xn), (xn, p.upper.sqrt() * ax)]))
        }
        (
            K::Lemma8Hier,
            Instance::HierBlocks {
                a,
                d,
                d_star,
                mode_block,
                xi,
                theta,
            },
        ) => {
            let mu = hier_block_coherence(a, *d, *d_star, CoherenceStrategy::exact())?.value;
            let nu = hier_sub_coherence(a, *d, *d_star, *mode_block)?;
            let ds = *d_star as f64;
            let k = xi.len();
            let c_r = (theta.len() * d).div_ceil(*d_star);
            let sum_k = (ds - 1.0) * nu + (k as f64 - 1.0) * ds * mu;
            let den = 1.0 - (ds - 1.0) * nu - (c_r as f64 - 1.0).max(0.0) * ds * mu;
            if sum_k >= 1.0 || den <= 0.0 {
                return Ok(premise_failed());
            }
            let lower = (1.0 - sum_k) - ds * ds * mu * mu * (c_r * k) as f64 / den;
            let units: Vec<usize> = xi.iter().flatten().copied().collect();
            let proj = ComplementProjector::new(&select_cols(a, &unit_cols(theta, *d)))?;
            let g = gram(&proj.apply_mat(&select_cols(a, &unit_cols(&units, *d))));
            Ok(le(lower, min_singular(&g)?))
        }
        (
            K::Remark1,
            Instance::Coherences {
                a,
                d,
                d_star,
                mode_block,
            },
        ) => {
            let mu = mutual_coherence(a)?;
            let mu_b = block_coherence(a, *d)?;
            let nu = sub_coherence(a, *d)?;
            let mu_h = hier_block_coherence(a, *d, *d_star, CoherenceStrategy::exact())?.value;
            let nu_h = hier_sub_coherence(a, *d, *d_star, *mode_block)?;
            Ok(all_le(&[(mu_h, mu_b), (mu_b, mu), (nu, nu_h), (nu_h, mu)]))
        }
        (K::Remark2, Instance::Coherences { a, d, .. }) => {
            let orthonormal = (0..a.ncols() / d).all(|b| {
                let g = gram(&a.columns(b * d, *d).into_owned());
                (g - DMatrix::identity(*d, *d)).amax() < 1e-10
            });
            if !orthonormal {
                return Ok(premise_failed());
            }
            Ok(le(block_coherence(a, *d)?, 1.0 / *d as f64))
        }
        _ => Err(mismatch(kind)),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

/// A general matrix, sometimes with rank one or sparse structure so that
/// some inequalities are close to tight.
fn test_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    match rng.random_range(0..4) {
        0 => {
            let u = normal_matrix(rng, r, 1);
            let v = normal_matrix(rng, 1, c);
            u * v
        }
        1 => DMatrix::from_element(r, c, 1.0),
        2 => normal_matrix(rng, r, c).map(|v| if v.abs() > 1.0 { v } else { 0.0 }),
        _ => normal_matrix(rng, r, c),
    }
}

fn normalized(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    let seed: u64 = rng.random();
    gaussian_matrix(m, n, seed)
        .map(|mm| mm.entries)
        .unwrap_or_else(|_| DMatrix::zeros(m, n))
}

fn pick(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    sample(rng, n, k.min(n)).into_vec()
}

/// Draws a seeded instance suited to `kind`.
pub fn random_instance(kind: InequalityKind, seed: u64) -> Instance {
    use InequalityKind as K;
    let mut rng = seeded_rng(seed);
    let rng = &mut rng;
    match kind {
        K::Lemma1 | K::Remark4 => {
            let (r, c) = (rng.random_range(1..=12), rng.random_range(1..=12));
            Instance::Matrix {
                a: test_matrix(rng, r, c),
                row_block: rng.random_range(1..=4),
                col_block: rng.random_range(1..=5),
            }
        }
        K::Lemma2Row | K::Lemma3Vector | K::Lemma3VectorPrinted => {
            let (r, c) = (rng.random_range(1..=12), rng.random_range(1..=12));
            let a = test_matrix(rng, r, c);
            let mut x = normal_vec(rng, c);
            if rng.random_bool(0.3) {
                let keep = rng.random_range(0..c);
                for (i, v) in x.iter_mut().enumerate() {
                    if i != keep {
                        *v = 0.0;
                    }
                }
            }
            Instance::MatVec {
                a,
                x,
                row_block: rng.random_range(1..=4),
                col_block: rng.random_range(1..=4),
            }
        }
        K::Lemma3Matrix => {
            let (m, n, p) = (
                rng.random_range(1..=10),
                rng.random_range(1..=10),
                rng.random_range(1..=10),
            );
            Instance::Product {
                a: test_matrix(rng, m, n),
                b: test_matrix(rng, n, p),
                d1: rng.random_range(1..=4),
                d2: rng.random_range(1..=4),
                d3: rng.random_range(1..=4),
            }
        }
        K::Lemma4 => {
            let count = rng.random_range(1..=8);
            let len = rng.random_range(1..=6);
            Instance::Split {
                vectors: (0..count).map(|_| normal_vec(rng, len)).collect(),
                split: rng.random_range(0..=len),
            }
        }
        K::Corollary1 => {
            let d = rng.random_range(1..=6);
            let blocks = rng.random_range(1..=8);
            Instance::BlockVector {
                x: normal_vec(rng, d * blocks),
                d,
                split: rng.random_range(0..=d),
            }
        }
        K::Lemma6 => {
            let (r, c) = (rng.random_range(1..=12), rng.random_range(1..=12));
            let k = rng.random_range(1..=c);
            Instance::Submatrix {
                a: test_matrix(rng, r, c),
                cols: pick(rng, c, k),
            }
        }
        K::Lemma7 | K::Lemma8 | K::Lemma9 | K::Lemma9Projected => {
            let d = rng.random_range(1..=3);
            let units = rng.random_range(4..=10);
            let m = rng.random_range(48..=160);
            let a = normalized(rng, m, units * d);
            let s = rng.random_range(1..=3);
            let r = if matches!(kind, K::Lemma7 | K::Lemma9) {
                0
            } else {
                rng.random_range(0..=3)
            };
            let picked = pick(rng, units, s + r);
            let (xi, theta) = picked.split_at(s.min(picked.len()));
            Instance::Blocks {
                x: normal_vec(rng, xi.len() * d),
                a,
                d,
                xi: xi.to_vec(),
                theta: theta.to_vec(),
            }
        }
        K::Lemma8Hier => {
            let d = rng.random_range(1..=2);
            let c = rng.random_range(1..=2);
            let per_block = rng.random_range(2 * c.max(2)..=4 * c.max(2)).min(8);
            let blocks = rng.random_range(1..=2);
            let units = per_block * blocks;
            let m = rng.random_range(64..=160);
            let a = normalized(rng, m, units * d);
            let k = rng.random_range(1..=2).min(units / c);
            let mut free: Vec<bool> = vec![true; units];
            let mut xi = Vec::new();
            for _ in 0..k {
                let b = rng.random_range(0..blocks);
                let avail: Vec<usize> = (b * per_block..(b + 1) * per_block).filter(|&u| free[u]).collect();
                if avail.len() < c {
                    continue;
                }
                let g: Vec<usize> = pick(rng, avail.len(), c).into_iter().map(|i| avail[i]).collect();
                for &u in &g {
                    free[u] = false;
                }
                xi.push(g);
            }
            let tb = rng.random_range(0..blocks);
            let avail: Vec<usize> = (tb * per_block..(tb + 1) * per_block).filter(|&u| free[u]).collect();
            let r = rng.random_range(0..=avail.len().min(3));
            let theta = pick(rng, avail.len(), r).into_iter().map(|i| avail[i]).collect();
            Instance::HierBlocks {
                a,
                d,
                d_star: c * d,
                mode_block: per_block * d,
                xi,
                theta,
            }
        }
        K::Remark1 => {
            let d = rng.random_range(1..=2);
            let c = rng.random_range(1..=3);
            let per_block = (2 * c).max(rng.random_range(2..=8));
            let units = per_block * rng.random_range(1..=2).min(8 / per_block).max(1);
            let m = rng.random_range(4..=64);
            Instance::Coherences {
                a: normalized(rng, m, units * d),
                d,
                d_star: c * d,
                mode_block: per_block * d,
            }
        }
        K::Remark2 => {
            let d = rng.random_range(1..=4);
            let units = rng.random_range(2..=8);
            let m = rng.random_range(d..=4 * d + 8);
            let mut a = normal_matrix(rng, m, units * d);
            for b in 0..units {
                let q = a.columns(b * d, d).into_owned().qr().q();
                a.columns_mut(b * d, d).copy_from(&q);
            }
            Instance::Coherences {
                a,
                d,
                d_star: d,
                mode_block: d,
            }
        }
    }
}

/// A failing instance found by [`run_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub seed: u64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Aggregate of one randomized suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub kind: InequalityKind,
    pub attempted: usize,
    pub premise_ok: usize,
    pub violations: usize,
    pub errors: usize,
    /// Smallest `(rhs − lhs)/(1 + |rhs|)` over premise-holding instances.
    pub worst_margin: f64,
    pub counterexamples: Vec<Counterexample>,
}

/// Maximum number of instance draws per requested premise-holding instance.
const ATTEMPTS_PER_INSTANCE: usize = 40;
const KEPT_COUNTEREXAMPLES: usize = 10;

/// Checks `kind` on seeded random instances until `count` of them satisfy
/// the premises (or the draw budget runs out).
pub fn run_suite(kind: InequalityKind, count: usize, seed: u64) -> SuiteSummary {
    let base = mix_seed(seed, kind.index());
    let mut summary = SuiteSummary {
        kind,
        attempted: 0,
        premise_ok: 0,
        violations: 0,
        errors: 0,
        worst_margin: f64::INFINITY,
        counterexamples: Vec::new(),
    };
    let budget = count.saturating_mul(ATTEMPTS_PER_INSTANCE);
    let batch = count.max(16);
    while summary.premise_ok < count && summary.attempted < budget {
        let start = summary.attempted;
        let results: Vec<(u64, Result<InequalityOutcome>)> = (start..start + batch)
            .into_par_iter()
            .map(|i| {
                let s = mix_seed(base, i as u64);
                (s, verify_inequality(kind, &random_instance(kind, s)))
            })
            .collect();
        for (s, res) in results {
            if summary.premise_ok >= count {
                break;
            }
            summary.attempted += 1;
            match res {
                Ok(o) if o.premise_ok => {
                    summary.premise_ok += 1;
                    summary.worst_margin = summary.worst_margin.min((o.rhs - o.lhs) / (1.0 + o.rhs.abs()));
                    if !o.holds {
                        summary.violations += 1;
                        if summary.counterexamples.len() < KEPT_COUNTEREXAMPLES {
                            summary.counterexamples.push(Counterexample {
                                seed: s,
                                lhs: o.lhs,
                                rhs: o.rhs,
                            });
                        }
                    }
                }
                Ok(_) => {}
                Err(_) => summary.errors += 1,
            }
        }
    }
    summary
}
