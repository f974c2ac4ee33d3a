//! Greedy recovery: the recursive hierarchical pursuit with prior support and
//! its degenerate forms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ls_solve, select_cols, ComplementProjector};
use crate::model::{HierStructure, PriorSupport, WeightStrategy};

/// Why a pursuit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ConvergedTol,
    MaxSparsity,
    RankFailure,
}

/// One block choice. `prior` marks blocks taken from the prior support
/// without a selection step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub mode: usize,
    pub path: Vec<usize>,
    pub step: usize,
    pub prior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    /// Sorted unit blocks.
    pub support: Vec<usize>,
    pub estimate: Vec<f64>,
    pub residual_norm_history: Vec<f64>,
    pub selections: Vec<Selection>,
    pub status: Status,
}

impl RecoveryResult {
    pub fn estimate_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.estimate)
    }

    /// Number of selection steps (prior-consumed blocks excluded).
    pub fn iterations(&self) -> usize {
        self.selections.iter().filter(|s| !s.prior).count()
    }
}

/// Default stopping tolerance for noiseless data.
pub fn default_eps(y: &DVector<f64>) -> f64 {
    1e-6 * y.norm()
}

/// State visible at one selection step, after scoring.
pub struct StepView<'a> {
    pub mode: usize,
    /// Global mode-`(t-1)` block being searched (0 at mode 1).
    pub parent: usize,
    pub candidates: &'a [usize],
    pub scores: &'a [f64],
    pub chosen: usize,
    /// Global mode-`t` blocks already taken inside `parent`.
    pub selected_here: &'a [usize],
    /// Unit blocks emitted so far, in emission order.
    pub support: &'a [usize],
    pub residual: &'a DVector<f64>,
    /// Columns the candidates were projected against.
    pub conditioning: &'a [usize],
    /// Augmentation columns and weights, when augmentation ran.
    pub augmentation: Option<(&'a [usize], &'a DVector<f64>)>,
}

struct ModeSets {
    in_theta: Vec<bool>,
    theta_cols: Vec<usize>,
    aug_cols: Vec<usize>,
}

struct Engine<'a, 'o> {
    d: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    s: &'a HierStructure,
    weights: &'a WeightStrategy,
    eps: f64,
    modes: Vec<ModeSets>,
    support: Vec<usize>,
    cols: Vec<usize>,
    coef: DVector<f64>,
    r: DVector<f64>,
    history: Vec<f64>,
    selections: Vec<Selection>,
    rank_failed: bool,
    observer: Option<&'o mut dyn FnMut(&StepView)>,
}

impl Engine<'_, '_> {
    fn done(&self) -> bool {
        self.rank_failed || self.r.norm() <= self.eps
    }

    fn add_unit(&mut self, u: usize) {
        let d = self.s.unit_block();
        self.cols.extend(u * d..(u + 1) * d);
        let ds = select_cols(self.d, &self.cols);
        match ls_solve(&ds, self.y) {
            Ok(coef) => {
                self.r = self.y - &ds * &coef;
                self.coef = coef;
                self.support.push(u);
                self.history.push(self.r.norm());
            }
            Err(_) => {
                self.cols.truncate(self.cols.len() - d);
                self.rank_failed = true;
            }
        }
    }

    fn take(&mut self, t: usize, g: usize, prior: bool) {
        self.selections.push(Selection {
            mode: t,
            path: self.s.path_of(t, g),
            step: self.selections.len(),
            prior,
        });
        if t < self.s.n() {
            self.run_mode(t + 1, g);
        } else {
            self.add_unit(g);
        }
    }

    fn covered(&self, t: usize, g: usize) -> bool {
        let sets = &self.modes[t - 1];
        !sets.in_theta.is_empty() && self.s.unit_range(t, g).all(|u| sets.in_theta[u])
    }

    fn run_mode(&mut self, t: usize, parent: usize) {
        let kt = self.s.k(t);
        let children: Vec<usize> = self.s.children(t, parent).collect();
        let mut selected_here: Vec<usize> = Vec::with_capacity(kt);

        for &c in &children {
            if selected_here.len() >= kt || self.rank_failed {
                break;
            }
            if self.covered(t, c) {
                selected_here.push(c);
                self.take(t, c, true);
            }
        }

        while selected_here.len() < kt && !self.done() {
            let candidates: Vec<usize> = children
                .iter()
                .copied()
                .filter(|c| !selected_here.contains(c))
                .collect();
            if candidates.is_empty() {
                break;
            }
            let sets = &self.modes[t - 1];
            let augment = t < self.s.n() && !sets.aug_cols.is_empty() && !matches!(self.weights, WeightStrategy::Zero);
            let weights = if augment {
                let daug = select_cols(self.d, &sets.aug_cols);
                Some(match self.weights {
                    WeightStrategy::ScaledCorrelation { c } => (daug.tr_mul(&self.r)) * *c,
                    WeightStrategy::UserSupplied { weights } => {
                        DVector::from_iterator(sets.aug_cols.len(), sets.aug_cols.iter().map(|&j| weights[j]))
                    }
                    WeightStrategy::Zero => unreachable!(),
                })
            } else {
                None
            };

            let mut conditioning = self.cols.clone();
            conditioning.extend_from_slice(&sets.theta_cols);
            conditioning.sort_unstable();
            conditioning.dedup();

            let v = if sets.theta_cols.is_empty() && weights.is_none() {
                // The residual is already orthogonal to the emitted columns.
                self.r.clone()
            } else {
                let proj = match ComplementProjector::new(&select_cols(self.d, &conditioning)) {
                    Ok(p) => p,
                    Err(_) => {
                        self.rank_failed = true;
                        break;
                    }
                };
                let mut ra = self.r.clone();
                if let Some(w) = &weights {
                    ra += select_cols(self.d, &sets.aug_cols) * w;
                }
                proj.apply(&ra)
            };

            let len = self.s.block_len(t);
            let scores: Vec<f64> = candidates
                .iter()
                .map(|&c| self.d.columns(c * len, len).tr_mul(&v).norm())
                .collect();
            let mut best = 0;
            for (i, &sc) in scores.iter().enumerate() {
                if sc > scores[best] {
                    best = i;
                }
            }
            let chosen = candidates[best];
            if let Some(obs) = self.observer.as_mut() {
                obs(&StepView {
                    mode: t,
                    parent,
                    candidates: &candidates,
                    scores: &scores,
                    chosen,
                    selected_here: &selected_here,
                    support: &self.support,
                    residual: &self.r,
                    conditioning: &conditioning,
                    augmentation: weights.as_ref().map(|w| (self.modes[t - 1].aug_cols.as_slice(), w)),
                });
            }
            selected_here.push(chosen);
            self.take(t, chosen, false);
        }
    }
}

fn check_inputs(d: &DMatrix<f64>, y: &DVector<f64>, n: usize) -> Result<()> {
    if d.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows, measurements have {}",
            d.nrows(),
            y.len()
        )));
    }
    if d.ncols() != n {
        return Err(Error::Dimension(format!(
            "matrix has {} columns, structure needs {n}",
            d.ncols()
        )));
    }
    Ok(())
}

/// Hierarchical block OMP with prior support information.
pub fn hibomp_p(
    d: &DMatrix<f64>,
    y: &DVector<f64>,
    s: &HierStructure,
    psi: &PriorSupport,
    eps: f64,
) -> Result<RecoveryResult> {
    hibomp_p_observed(d, y, s, psi, eps, None)
}

/// [`hibomp_p`] with a callback invoked at every selection step.
pub fn hibomp_p_observed(
    d: &DMatrix<f64>,
    y: &DVector<f64>,
    s: &HierStructure,
    psi: &PriorSupport,
    eps: f64,
    observer: Option<&mut dyn FnMut(&StepView)>,
) -> Result<RecoveryResult> {
    check_inputs(d, y, s.ambient_dim())?;
    psi.validate(s)?;
    let modes = (1..=s.n())
        .map(|t| {
            let m = psi.mode(t);
            let theta = m.map(|m| m.theta.as_slice()).unwrap_or(&[]);
            let aug = m.map(|m| m.theta_star_delta.as_slice()).unwrap_or(&[]);
            let mut in_theta = Vec::new();
            if !theta.is_empty() {
                in_theta = vec![false; s.unit_blocks()];
                for &u in theta {
                    in_theta[u] = true;
                }
            }
            ModeSets {
                in_theta,
                theta_cols: s.unit_cols(theta),
                aug_cols: s.unit_cols(aug),
            }
        })
        .collect();
    let mut eng = Engine {
        d,
        y,
        s,
        weights: &psi.weight_strategy,
        eps,
        modes,
        support: Vec::new(),
        cols: Vec::new(),
        coef: DVector::zeros(0),
        r: y.clone(),
        history: Vec::new(),
        selections: Vec::new(),
        rank_failed: false,
        observer,
    };
    eng.run_mode(1, 0);
    let status = if eng.rank_failed {
        Status::RankFailure
    } else if eng.r.norm() <= eps {
        Status::ConvergedTol
    } else {
        Status::MaxSparsity
    };
    Ok(finish(
        s.ambient_dim(),
        eng.support,
        &eng.cols,
        &eng.coef,
        eng.history,
        eng.selections,
        status,
    ))
}

fn finish(
    n: usize,
    mut support: Vec<usize>,
    cols: &[usize],
    coef: &DVector<f64>,
    history: Vec<f64>,
    selections: Vec<Selection>,
    status: Status,
) -> RecoveryResult {
    let mut estimate = vec![0.0; n];
    for (&c, &v) in cols.iter().zip(coef.iter()) {
        estimate[c] = v;
    }
    support.sort_unstable();
    RecoveryResult {
        support,
        estimate,
        residual_norm_history: history,
        selections,
        status,
    }
}

/// Hierarchical block OMP without prior information.
pub fn hibomp(d: &DMatrix<f64>, y: &DVector<f64>, s: &HierStructure, eps: f64) -> Result<RecoveryResult> {
    hibomp_p(d, y, s, &PriorSupport::empty(s.n()), eps)
}

/// Hierarchical OMP: [`hibomp`] on the unit-length view of the structure.
/// Support indices are single coefficients.
pub fn hiomp(d: &DMatrix<f64>, y: &DVector<f64>, s: &HierStructure, eps: f64) -> Result<RecoveryResult> {
    hibomp(d, y, &s.scalar_view(), eps)
}

/// Block OMP with `k` blocks of length `bl`.
pub fn bomp(d: &DMatrix<f64>, y: &DVector<f64>, bl: usize, k: usize, eps: f64) -> Result<RecoveryResult> {
    if bl == 0 || !d.ncols().is_multiple_of(bl) {
        return Err(Error::Dimension(format!(
            "{} columns do not split into blocks of {bl}",
            d.ncols()
        )));
    }
    if d.nrows() != y.len() {
        return Err(Error::Dimension("row count and measurement length differ".into()));
    }
    let blocks = d.ncols() / bl;
    let mut chosen: Vec<usize> = Vec::new();
    let mut cols: Vec<usize> = Vec::new();
    let mut coef = DVector::zeros(0);
    let mut r = y.clone();
    let mut history = Vec::new();
    let mut selections = Vec::new();
    let mut status = None;
    while chosen.len() < k.min(blocks) && r.norm() > eps {
        let mut best: Option<(usize, f64)> = None;
        for b in (0..blocks).filter(|b| !chosen.contains(b)) {
            let sc = d.columns(b * bl, bl).tr_mul(&r).norm();
            if best.is_none_or(|(_, v)| sc > v) {
                best = Some((b, sc));
            }
        }
        let (b, _) = best.expect("at least one unselected block");
        cols.extend(b * bl..(b + 1) * bl);
        let ds = select_cols(d, &cols);
        match ls_solve(&ds, y) {
            Ok(c) => {
                r = y - &ds * &c;
                coef = c;
            }
            Err(_) => {
                cols.truncate(cols.len() - bl);
                status = Some(Status::RankFailure);
                break;
            }
        }
        selections.push(Selection {
            mode: 1,
            path: vec![b],
            step: selections.len(),
            prior: false,
        });
        chosen.push(b);
        history.push(r.norm());
    }
    let status = status.unwrap_or(if r.norm() <= eps {
        Status::ConvergedTol
    } else {
        Status::MaxSparsity
    });
    Ok(finish(d.ncols(), chosen, &cols, &coef, history, selections, status))
}

/// Orthogonal matching pursuit with at most `k` atoms.
pub fn omp(d: &DMatrix<f64>, y: &DVector<f64>, k: usize, eps: f64) -> Result<RecoveryResult> {
    if d.nrows() != y.len() {
        return Err(Error::Dimension("row count and measurement length differ".into()));
    }
    let n = d.ncols();
    let mut chosen: Vec<usize> = Vec::new();
    let mut coef = DVector::zeros(0);
    let mut r = y.clone();
    let mut history = Vec::new();
    let mut selections = Vec::new();
    let mut status = None;
    while chosen.len() < k.min(n) && r.norm() > eps {
        let corr = d.tr_mul(&r);
        let mut best: Option<usize> = None;
        for j in (0..n).filter(|j| !chosen.contains(j)) {
            if best.is_none_or(|b| corr[j].abs() > corr[b].abs()) {
                best = Some(j);
            }
        }
        let j = best.expect("at least one unselected atom");
        chosen.push(j);
        let ds = select_cols(d, &chosen);
        match ls_solve(&ds, y) {
            Ok(c) => {
                r = y - &ds * &c;
                coef = c;
            }
            Err(_) => {
                chosen.pop();
                status = Some(Status::RankFailure);
                break;
            }
        }
        selections.push(Selection {
            mode: 1,
            path: vec![j],
            step: selections.len(),
            prior: false,
        });
        history.push(r.norm());
    }
    let status = status.unwrap_or(if r.norm() <= eps {
        Status::ConvergedTol
    } else {
        Status::MaxSparsity
    });
    let cols = chosen.clone();
    Ok(finish(n, chosen, &cols, &coef, history, selections, status))
}
