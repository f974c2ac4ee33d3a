use serde::{Deserialize, Serialize};

use crate::model::{HierSignal, HierStructure, OverlapCounts, PriorSupport};
use crate::recovery::StepView;

/// Index sets and block lengths seen by one selection step, measured
/// against the true signal.
///
/// Groups hold unit blocks. `in_groups[i]` is the true support plus the
/// augmentation set inside the `i`-th still-active candidate block,
/// `delta_groups` the remaining zero units of active candidates,
/// `bar_groups` the inactive candidates, and `outside_groups` the remaining
/// support (and augmentation) outside the active candidates, chunked into
/// pieces of at most `d_circ` coefficients that never straddle a mode block.
/// Everything excludes the conditioning set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepContext {
    pub mode: usize,
    pub parent: usize,
    pub unit_block: usize,
    /// Length of the parent (mode `t−1`) block; the whole vector at mode 1.
    pub mode_block: usize,
    pub chosen: usize,
    pub chosen_active: bool,
    pub active_candidates: Vec<usize>,
    pub conditioning: Vec<usize>,
    pub xi_star: Vec<usize>,
    pub theta_star_delta: Vec<usize>,
    pub xi_delta: Vec<usize>,
    pub xi_bar: Vec<usize>,
    pub xi_circ: Vec<usize>,
    pub in_groups: Vec<Vec<usize>>,
    pub delta_groups: Vec<Vec<usize>>,
    pub bar_groups: Vec<Vec<usize>>,
    pub outside_groups: Vec<Vec<usize>>,
    /// Coefficients driving the statistic: `x` on support, augmentation
    /// weights on the augmentation set, zero elsewhere.
    pub coeffs: Vec<f64>,
    pub d_star: usize,
    pub d_star_delta: usize,
    /// Largest in-group length, standing in for `d* + d^{*Δ}`.
    pub d_in: usize,
    pub d_delta: usize,
    pub d_bar: usize,
    pub d_circ: usize,
    /// Conditioning set size in unit blocks.
    pub r_units: usize,
    /// Known units outside the current parent that are true support.
    pub gamma: usize,
    pub overlaps: OverlapCounts,
}

impl StepContext {
    pub fn k_in(&self) -> usize {
        self.in_groups.len()
    }

    pub fn k_circ(&self) -> usize {
        self.outside_groups.len()
    }

    /// Columns of a group list plus the column count of each group.
    pub fn columns(&self, groups: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
        let d = self.unit_block;
        let cols = groups.iter().flatten().flat_map(|&u| u * d..(u + 1) * d).collect();
        let sizes = groups.iter().map(|g| g.len() * d).collect();
        (cols, sizes)
    }

    /// Effective coefficients restricted to `cols`.
    pub fn coeffs_at(&self, cols: &[usize]) -> Vec<f64> {
        cols.iter().map(|&c| self.coeffs[c]).collect()
    }
}

/// Builds the context of one observed step. `d_circ` (coefficients) defaults
/// to the largest non-conditioned length of an active candidate block.
pub fn step_context(
    s: &HierStructure,
    view: &StepView,
    truth: &HierSignal,
    psi: &PriorSupport,
    d_circ: Option<usize>,
) -> StepContext {
    let t = view.mode;
    let d = s.unit_block();
    let units = s.unit_blocks();
    let mut in_cond = vec![false; units];
    for &c in view.conditioning {
        in_cond[c / d] = true;
    }
    let mut in_supp = vec![false; units];
    for &u in &truth.flat_support {
        in_supp[u] = true;
    }
    let mut coeffs = vec![0.0; s.ambient_dim()];
    for &u in &truth.flat_support {
        if !in_cond[u] {
            coeffs[u * d..(u + 1) * d].copy_from_slice(&truth.coeffs[u * d..(u + 1) * d]);
        }
    }
    let mut is_aug = vec![false; units];
    if let Some((cols, w)) = view.augmentation {
        for (&c, &wi) in cols.iter().zip(w.iter()) {
            if !in_cond[c / d] {
                is_aug[c / d] = true;
                coeffs[c] = wi;
            }
        }
    }

    let active_level = &truth.support_tree[t - 1];
    let is_active = |g: usize| active_level.binary_search(&g).is_ok();
    let active_candidates: Vec<usize> = view.candidates.iter().copied().filter(|&c| is_active(c)).collect();

    let mut in_groups = Vec::new();
    let mut delta_groups = Vec::new();
    let mut bar_groups = Vec::new();
    let (mut d_star, mut d_star_delta, mut widest) = (0, 0, 0);
    let mut in_active = vec![false; units];
    for &c in view.candidates {
        let free: Vec<usize> = s.unit_range(t, c).filter(|&u| !in_cond[u]).collect();
        if is_active(c) {
            widest = widest.max(free.len() * d);
            let (inside, rest): (Vec<usize>, Vec<usize>) = free.iter().partition(|&&u| in_supp[u] || is_aug[u]);
            for &u in &inside {
                in_active[u] = true;
            }
            d_star = d_star.max(inside.iter().filter(|&&u| in_supp[u]).count() * d);
            d_star_delta = d_star_delta.max(inside.iter().filter(|&&u| is_aug[u]).count() * d);
            if !inside.is_empty() {
                in_groups.push(inside);
            }
            if !rest.is_empty() {
                delta_groups.push(rest);
            }
        } else if !free.is_empty() {
            bar_groups.push(free);
        }
    }

    let block_len = s.block_len(t);
    let d_circ = d_circ.map(|v| v.div_ceil(d) * d).unwrap_or(widest).clamp(d, block_len);
    let per_chunk = d_circ / d;
    let mut outside_groups: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut current_block = usize::MAX;
    for u in 0..units {
        if in_cond[u] || in_active[u] || !(in_supp[u] || is_aug[u]) {
            continue;
        }
        let g = s.block_of_unit(t, u);
        if g != current_block || current.len() == per_chunk {
            if !current.is_empty() {
                outside_groups.push(std::mem::take(&mut current));
            }
            current_block = g;
        }
        current.push(u);
    }
    if !current.is_empty() {
        outside_groups.push(current);
    }

    let theta = psi.mode(t).map(|m| m.theta.as_slice()).unwrap_or(&[]);
    let gamma = theta
        .iter()
        .filter(|&&u| t > 1 && s.block_of_unit(t - 1, u) != view.parent && in_supp[u])
        .count();
    let overlaps = psi.counts(s).get(t - 1).copied().unwrap_or_default();

    let flat = |groups: &[Vec<usize>]| -> Vec<usize> {
        let mut v: Vec<usize> = groups.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    };
    let xi_star: Vec<usize> = flat(&in_groups).into_iter().filter(|&u| in_supp[u]).collect();
    let theta_star_delta: Vec<usize> = flat(&in_groups).into_iter().filter(|&u| is_aug[u]).collect();
    let widest_of = |groups: &[Vec<usize>]| groups.iter().map(|g| g.len() * d).max().unwrap_or(0);

    StepContext {
        mode: t,
        parent: view.parent,
        unit_block: d,
        mode_block: if t > 1 { s.block_len(t - 1) } else { s.ambient_dim() },
        chosen: view.chosen,
        chosen_active: is_active(view.chosen),
        conditioning: view.conditioning.to_vec(),
        xi_star,
        theta_star_delta,
        xi_delta: flat(&delta_groups),
        xi_bar: flat(&bar_groups),
        xi_circ: flat(&outside_groups),
        d_in: widest_of(&in_groups),
        d_delta: widest_of(&delta_groups),
        d_bar: widest_of(&bar_groups),
        d_star,
        d_star_delta,
        d_circ,
        r_units: in_cond.iter().filter(|&&b| b).count(),
        gamma,
        overlaps,
        active_candidates,
        in_groups,
        delta_groups,
        bar_groups,
        outside_groups,
        coeffs,
    }
}
