//! Block-structured linear algebra: mixed norms, the ρ mixed matrix norms,
//! complement projections and least squares.

use nalgebra::{DMatrix, DVector, Dyn, Matrix, Storage, U1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::seeded_rng;

/// Full-rank threshold on `σ_min / σ_max`.
pub const RANK_TOL: f64 = 1e-10;

/// Outer exponent of a mixed ℓ2/ℓp norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixedP {
    One,
    Two,
    Inf,
}

fn outer(norms: impl Iterator<Item = f64>, p: MixedP) -> f64 {
    match p {
        MixedP::One => norms.sum(),
        MixedP::Two => norms.map(|v| v * v).sum::<f64>().sqrt(),
        MixedP::Inf => norms.fold(0.0, f64::max),
    }
}

/// ℓp norm of the per-block ℓ2 norms, blocks of length `d`.
pub fn mixed_norm(x: &[f64], d: usize, p: MixedP) -> Result<f64> {
    if d == 0 || !x.len().is_multiple_of(d) {
        return Err(Error::Dimension(format!(
            "vector of length {} does not split into blocks of {d}",
            x.len()
        )));
    }
    Ok(outer(x.chunks(d).map(l2), p))
}

/// Mixed norm over consecutive groups of the given sizes.
pub fn mixed_norm_groups(x: &[f64], groups: &[usize], p: MixedP) -> Result<f64> {
    check_groups(x.len(), groups)?;
    Ok(outer(group_slices(x, groups).map(l2), p))
}

/// Mixed norm with blocks of length `d`, zero-padding a short final block.
pub fn mixed_norm_padded(x: &[f64], d: usize, p: MixedP) -> f64 {
    outer(x.chunks(d.max(1)).map(l2), p)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn group_slices<'a>(x: &'a [f64], groups: &'a [usize]) -> impl Iterator<Item = &'a [f64]> + 'a {
    let mut start = 0;
    groups.iter().map(move |&g| {
        let s = &x[start..start + g];
        start += g;
        s
    })
}

fn check_groups(len: usize, groups: &[usize]) -> Result<()> {
    if groups.iter().sum::<usize>() != len {
        return Err(Error::Dimension(format!(
            "group sizes sum to {} but length is {len}",
            groups.iter().sum::<usize>()
        )));
    }
    Ok(())
}

/// Row and column block lengths of a block partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub row_block: usize,
    pub col_block: usize,
}

impl BlockPartition {
    pub fn new(row_block: usize, col_block: usize) -> Self {
        Self { row_block, col_block }
    }
}

/// Uniform group sizes covering `len` after zero-padding up to a multiple of `b`.
fn padded_groups(len: usize, b: usize) -> Vec<usize> {
    vec![b; len.div_ceil(b)]
}

/// Zero-pads `a` so its row and column counts are multiples of the partition.
pub fn zero_pad(a: &DMatrix<f64>, part: BlockPartition) -> DMatrix<f64> {
    let rows = a.nrows().div_ceil(part.row_block) * part.row_block;
    let cols = a.ncols().div_ceil(part.col_block) * part.col_block;
    let mut out = DMatrix::zeros(rows, cols);
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out
}

/// Spectral norms of every block for explicit row/column group sizes.
pub fn block_norms(a: &DMatrix<f64>, row_groups: &[usize], col_groups: &[usize]) -> Result<DMatrix<f64>> {
    check_groups(a.nrows(), row_groups)?;
    check_groups(a.ncols(), col_groups)?;
    let mut out = DMatrix::zeros(row_groups.len(), col_groups.len());
    let mut r0 = 0;
    for (i, &rg) in row_groups.iter().enumerate() {
        let mut c0 = 0;
        for (j, &cg) in col_groups.iter().enumerate() {
            out[(i, j)] = spectral_norm(&a.view((r0, c0), (rg, cg)));
            c0 += cg;
        }
        r0 += rg;
    }
    Ok(out)
}

fn nonempty(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    Ok(())
}

/// `ρ_r`: largest row-block sum of block spectral norms.
pub fn rho_r(a: &DMatrix<f64>, part: BlockPartition) -> Result<f64> {
    nonempty(a)?;
    let rows = padded_groups(a.nrows(), part.row_block);
    let cols = padded_groups(a.ncols(), part.col_block);
    let padded = zero_pad(a, part);
    rho_r_groups(&padded, &rows, &cols)
}

/// `ρ_c`: largest column-block sum of block spectral norms.
pub fn rho_c(a: &DMatrix<f64>, part: BlockPartition) -> Result<f64> {
    nonempty(a)?;
    let rows = padded_groups(a.nrows(), part.row_block);
    let cols = padded_groups(a.ncols(), part.col_block);
    let padded = zero_pad(a, part);
    rho_c_groups(&padded, &rows, &cols)
}

/// `ρ_r` for explicit (possibly unequal) group sizes.
pub fn rho_r_groups(a: &DMatrix<f64>, row_groups: &[usize], col_groups: &[usize]) -> Result<f64> {
    let b = block_norms(a, row_groups, col_groups)?;
    Ok(b.row_iter().map(|r| r.sum()).fold(0.0, f64::max))
}

/// `ρ_c` for explicit (possibly unequal) group sizes.
pub fn rho_c_groups(a: &DMatrix<f64>, row_groups: &[usize], col_groups: &[usize]) -> Result<f64> {
    let b = block_norms(a, row_groups, col_groups)?;
    Ok(b.column_iter().map(|c| c.sum()).fold(0.0, f64::max))
}

/// Largest singular value.
pub fn spectral_norm<S>(a: &Matrix<f64, Dyn, Dyn, S>) -> f64
where
    S: Storage<f64, Dyn, Dyn>,
{
    match (a.nrows(), a.ncols()) {
        (0, _) | (_, 0) => 0.0,
        (1, _) | (_, 1) => a.norm(),
        _ => a.clone_owned().singular_values().iter().copied().fold(0.0, f64::max),
    }
}

/// Smallest eigenvalue of a symmetric (Gram) matrix.
pub fn min_singular(g: &DMatrix<f64>) -> Result<f64> {
    if !g.is_square() {
        return Err(Error::Dimension("Gram matrix must be square".into()));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Gram matrix"));
    }
    if g.nrows() == 0 {
        return Err(Error::Dimension("empty Gram matrix".into()));
    }
    Ok(g.clone().symmetric_eigenvalues().min())
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigen(g: &DMatrix<f64>) -> f64 {
    g.clone().symmetric_eigenvalues().max()
}

/// Columns `cols` of `a`, in the given order.
pub fn select_cols(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    a.select_columns(cols)
}

struct Qr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn full_rank_qr(a: &DMatrix<f64>) -> Result<Qr> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("basis"));
    }
    if a.ncols() > a.nrows() {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let (lo, hi) = sv
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio > RANK_TOL) {
        return Err(Error::RankDeficient { ratio });
    }
    Ok(Qr { q: qr.q(), r })
}

/// Orthogonal projector onto the complement of a column span, applied lazily.
#[derive(Debug, Clone)]
pub struct ComplementProjector {
    q: Option<DMatrix<f64>>,
}

impl ComplementProjector {
    /// Fails with [`Error::RankDeficient`] unless `basis` has full column rank.
    pub fn new(basis: &DMatrix<f64>) -> Result<Self> {
        if basis.ncols() == 0 {
            return Ok(Self { q: None });
        }
        Ok(Self {
            q: Some(full_rank_qr(basis)?.q),
        })
    }

    pub fn identity() -> Self {
        Self { q: None }
    }

    pub fn apply<S>(&self, v: &Matrix<f64, Dyn, U1, S>) -> DVector<f64>
    where
        S: Storage<f64, Dyn, U1>,
    {
        match &self.q {
            None => v.clone_owned(),
            Some(q) => v - q * (q.transpose() * v),
        }
    }

    pub fn apply_mat(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.q {
            None => a.clone(),
            Some(q) => a - q * (q.transpose() * a),
        }
    }
}

/// `v − B B† v`.
pub fn proj_complement(basis: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(ComplementProjector::new(basis)?.apply(v))
}

/// Least-squares coefficients via QR.
pub fn ls_solve(ds: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if ds.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows, vector has {}",
            ds.nrows(),
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("measurement vector"));
    }
    if ds.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let Qr { q, r } = full_rank_qr(ds)?;
    let qty = q.transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { ratio: 0.0 })
}

/// Moore–Penrose inverse of a full-column-rank matrix, `(AᴴA)⁻¹Aᴴ`.
pub fn pinv_full_col(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let Qr { q, r } = full_rank_qr(a)?;
    r.solve_upper_triangular(&q.transpose())
        .ok_or(Error::RankDeficient { ratio: 0.0 })
}

/// Randomized lower bound on the operator norm `‖A‖_{(q,d)2,p}`
/// (max of `‖Ax‖_{(q)2,p} / ‖x‖_{(d)2,p}` over random `x`).
pub fn operator_norm_probe(a: &DMatrix<f64>, part: BlockPartition, p: MixedP, samples: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let x = DVector::from_fn(a.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let den = mixed_norm_padded(x.as_slice(), part.col_block, p);
        if den > 0.0 {
            let num = mixed_norm_padded((a * &x).as_slice(), part.row_block, p);
            best = best.max(num / den);
        }
    }
    best
}
