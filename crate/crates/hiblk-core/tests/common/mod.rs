#![allow(dead_code)]

use hiblk::model::seeded_rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded_rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn normalized(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut a = gaussian(rows, cols, seed);
    for mut c in a.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    a
}

pub fn gaussian_vec(len: usize, seed: u64) -> DVector<f64> {
    let mut rng = seeded_rng(seed);
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// Spectral norm via the largest eigenvalue of the Gram matrix.
pub fn spectral_oracle(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let g = a.transpose() * a;
    g.symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// Per-block spectral norms of `a` for uniform `q × d` blocks.
pub fn block_norm_table(a: &DMatrix<f64>, q: usize, d: usize) -> Vec<Vec<f64>> {
    (0..a.nrows() / q)
        .map(|i| {
            (0..a.ncols() / d)
                .map(|j| spectral_oracle(&a.view((i * q, j * d), (q, d)).into_owned()))
                .collect()
        })
        .collect()
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Every admissible flat support (sorted unit blocks) of `s`.
pub fn admissible_supports(s: &hiblk::HierStructure) -> Vec<Vec<usize>> {
    fn expand(s: &hiblk::HierStructure, t: usize, parents: &[usize], out: &mut Vec<Vec<usize>>) {
        if t > s.n() {
            let mut v = parents.to_vec();
            v.sort_unstable();
            out.push(v);
            return;
        }
        let per_parent: Vec<Vec<Vec<usize>>> = parents
            .iter()
            .map(|&p| {
                let base = s.children(t, p).start;
                subsets(s.dim(t), s.k(t))
                    .into_iter()
                    .map(|c| c.into_iter().map(|i| base + i).collect())
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; parents.len()];
        loop {
            let level: Vec<usize> = per_parent
                .iter()
                .zip(&idx)
                .flat_map(|(opts, &i)| opts[i].iter().copied())
                .collect();
            expand(s, t + 1, &level, out);
            let mut pos = 0;
            loop {
                if pos == idx.len() {
                    return;
                }
                idx[pos] += 1;
                if idx[pos] < per_parent[pos].len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }
    let mut out = Vec::new();
    expand(s, 1, &[0], &mut out);
    out
}

/// Admissible support with the smallest least-squares residual.
pub fn brute_force_support(d: &DMatrix<f64>, y: &DVector<f64>, s: &hiblk::HierStructure) -> Vec<usize> {
    let mut best = (f64::INFINITY, Vec::new());
    for sup in admissible_supports(s) {
        let cols = s.unit_cols(&sup);
        let a = hiblk::linalg::select_cols(d, &cols);
        let x = a.clone().svd(true, true).solve(y, 1e-12).expect("svd solve");
        let r = (y - a * x).norm();
        if r < best.0 {
            best = (r, sup);
        }
    }
    best.1
}

pub struct Case {
    pub s: hiblk::HierStructure,
    pub d: DMatrix<f64>,
    pub x: hiblk::HierSignal,
    pub y: DVector<f64>,
    pub psi: hiblk::PriorSupport,
}

/// Small two-mode instance whose hierarchical coherences are cheap to
/// enumerate exactly: 12 unit blocks of length 1 or 2, M between 24 and 56.
pub fn erc_case(i: u64) -> Option<Case> {
    erc_case_in(i, 24, 33)
}

/// [`erc_case`] with `M` drawn from `m_lo..m_lo + m_span`.
pub fn erc_case_in(i: u64, m_lo: usize, m_span: usize) -> Option<Case> {
    use hiblk::model::{make_structure, mix_seed, sample_matrix, sample_psi, sample_signal};
    let unit = 1 + (i % 2) as usize;
    let k2 = 1 + ((i / 2) % 2) as usize;
    let s = make_structure(&[4, 3], unit, &[2, k2]).ok()?;
    let m = m_lo + ((i * 7) % m_span as u64) as usize;
    let d = sample_matrix(m, &s, mix_seed(i, 1)).ok()?.entries;
    let x = sample_signal(&s, hiblk::SignalDist::Gaussian, mix_seed(i, 2));
    let overlaps = [
        hiblk::OverlapCounts {
            alpha_star: (i % 3) as usize,
            alpha_star_delta: (i % 2) as usize,
            ..Default::default()
        },
        hiblk::OverlapCounts {
            alpha_star: (i % 2) as usize,
            ..Default::default()
        },
    ];
    let psi = sample_psi(&s, &x, &overlaps, hiblk::WeightStrategy::default(), mix_seed(i, 3)).ok()?;
    let y = &d * x.vector();
    Some(Case { s, d, x, y, psi })
}

/// `ρ_c` over explicit row/column group sizes, by direct block enumeration.
pub fn rho_c_oracle(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let mut best: f64 = 0.0;
    let mut c0 = 0;
    for &cg in cols {
        let mut r0 = 0;
        let mut sum = 0.0;
        for &rg in rows {
            sum += spectral_oracle(&a.view((r0, c0), (rg, cg)).into_owned());
            r0 += rg;
        }
        best = best.max(sum);
        c0 += cg;
    }
    best
}
