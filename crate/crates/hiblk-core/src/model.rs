//! Hierarchical block layout, signal and matrix ensembles, prior support sets.
//!
//! Modes are numbered `1..=n`. A mode-`t` block is addressed either by a path
//! of local child indices (one per mode) or by its global index among all
//! mode-`t` blocks; unit blocks are the mode-`n` blocks.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seeded generator used by every sampler.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser, used to derive independent child seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Deserialize)]
struct RawStructure {
    #[serde(default)]
    n: Option<usize>,
    dims: Vec<usize>,
    unit_block: usize,
    sparsity: Vec<usize>,
}

/// n-mode hierarchical block layout with per-mode sparsity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawStructure")]
pub struct HierStructure {
    n: usize,
    dims: Vec<usize>,
    unit_block: usize,
    sparsity: Vec<usize>,
}

impl TryFrom<RawStructure> for HierStructure {
    type Error = Error;

    fn try_from(raw: RawStructure) -> Result<Self> {
        if let Some(n) = raw.n {
            if n != raw.dims.len() {
                return Err(Error::Dimension(format!(
                    "n = {n} but {} mode dimensions given",
                    raw.dims.len()
                )));
            }
        }
        make_structure(&raw.dims, raw.unit_block, &raw.sparsity)
    }
}

/// Validates and builds a [`HierStructure`].
pub fn make_structure(dims: &[usize], d: usize, sparsity: &[usize]) -> Result<HierStructure> {
    if dims.is_empty() {
        return Err(Error::Dimension("at least one mode is required".into()));
    }
    if dims.len() != sparsity.len() {
        return Err(Error::Dimension(format!(
            "{} mode dimensions but {} sparsity entries",
            dims.len(),
            sparsity.len()
        )));
    }
    if d == 0 || dims.contains(&0) || sparsity.contains(&0) {
        return Err(Error::Dimension("all entries must be positive".into()));
    }
    for (t, (&nt, &kt)) in dims.iter().zip(sparsity).enumerate() {
        if kt > nt {
            return Err(Error::Dimension(format!(
                "mode {}: sparsity {kt} exceeds dimension {nt}",
                t + 1
            )));
        }
    }
    let mut total = d as u128;
    for &nt in dims {
        total = total
            .checked_mul(nt as u128)
            .filter(|&v| v <= usize::MAX as u128)
            .ok_or_else(|| Error::Dimension("ambient dimension overflows".into()))?;
    }
    Ok(HierStructure {
        n: dims.len(),
        dims: dims.to_vec(),
        unit_block: d,
        sparsity: sparsity.to_vec(),
    })
}

impl HierStructure {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn unit_block(&self) -> usize {
        self.unit_block
    }

    pub fn sparsity(&self) -> &[usize] {
        &self.sparsity
    }

    /// Sparsity `k_t` of mode `t` (1-based).
    pub fn k(&self, t: usize) -> usize {
        self.sparsity[t - 1]
    }

    /// Dimension `N_t` of mode `t` (1-based).
    pub fn dim(&self, t: usize) -> usize {
        self.dims[t - 1]
    }

    /// Ambient length `N = N_1 … N_n d`.
    pub fn ambient_dim(&self) -> usize {
        self.unit_blocks() * self.unit_block
    }

    /// Number of unit blocks `N_1 … N_n`.
    pub fn unit_blocks(&self) -> usize {
        self.dims.iter().product()
    }

    /// True block sparsity `k_1 … k_n`.
    pub fn block_sparsity(&self) -> usize {
        self.sparsity.iter().product()
    }

    /// Product `k_1 … k_t` (`1` for `t = 0`).
    pub fn sparsity_prefix(&self, t: usize) -> usize {
        self.sparsity[..t].iter().product()
    }

    /// Unit blocks per mode-`t` block, `N_{t+1} … N_n` (mode 0 is the whole vector).
    pub fn units_per_block(&self, t: usize) -> usize {
        self.dims[t..].iter().product()
    }

    /// Coefficient length of a mode-`t` block.
    pub fn block_len(&self, t: usize) -> usize {
        self.units_per_block(t) * self.unit_block
    }

    /// Number of mode-`t` blocks in the whole vector.
    pub fn num_blocks(&self, t: usize) -> usize {
        self.dims[..t].iter().product()
    }

    /// Global mode-`t` block containing unit block `u`.
    pub fn block_of_unit(&self, t: usize, u: usize) -> usize {
        u / self.units_per_block(t)
    }

    /// Unit blocks covered by global mode-`t` block `g`.
    pub fn unit_range(&self, t: usize, g: usize) -> Range<usize> {
        let w = self.units_per_block(t);
        g * w..(g + 1) * w
    }

    /// Coefficient indices covered by global mode-`t` block `g`.
    pub fn col_range(&self, t: usize, g: usize) -> Range<usize> {
        let w = self.block_len(t);
        g * w..(g + 1) * w
    }

    /// Global mode-`t` children of global mode-`(t-1)` block `parent`.
    pub fn children(&self, t: usize, parent: usize) -> Range<usize> {
        let nt = self.dims[t - 1];
        parent * nt..(parent + 1) * nt
    }

    /// Local path of global mode-`t` block `g`.
    pub fn path_of(&self, t: usize, mut g: usize) -> Vec<usize> {
        let mut path = vec![0; t];
        for s in (0..t).rev() {
            path[s] = g % self.dims[s];
            g /= self.dims[s];
        }
        path
    }

    /// Global index of the block named by `path` at mode `path.len()`.
    pub fn global_of(&self, path: &[usize]) -> Result<usize> {
        if path.len() > self.n {
            return Err(Error::Dimension(format!(
                "path of length {} in a {}-mode structure",
                path.len(),
                self.n
            )));
        }
        let mut g = 0;
        for (s, &p) in path.iter().enumerate() {
            if p >= self.dims[s] {
                return Err(Error::Dimension(format!(
                    "path entry {p} out of range for mode {} with {} blocks",
                    s + 1,
                    self.dims[s]
                )));
            }
            g = g * self.dims[s] + p;
        }
        Ok(g)
    }

    /// The same layout with unit block length 1 (`HiOMP` view): the last mode
    /// absorbs the old unit block.
    pub fn scalar_view(&self) -> HierStructure {
        let d = self.unit_block;
        let mut dims = self.dims.clone();
        let mut sparsity = self.sparsity.clone();
        *dims.last_mut().expect("non-empty") *= d;
        *sparsity.last_mut().expect("non-empty") *= d;
        HierStructure {
            n: self.n,
            dims,
            unit_block: 1,
            sparsity,
        }
    }

    /// Coefficient indices of a list of unit blocks, in the given order.
    pub fn unit_cols(&self, units: &[usize]) -> Vec<usize> {
        let d = self.unit_block;
        units.iter().flat_map(|&u| u * d..(u + 1) * d).collect()
    }
}

/// Contiguous coefficient range of the block named by `path` at `mode`.
pub fn block_indices(s: &HierStructure, mode: usize, path: &[usize]) -> Result<Range<usize>> {
    if mode == 0 || mode > s.n() || path.len() != mode {
        return Err(Error::Dimension(format!(
            "mode {mode} needs a path of that length in a {}-mode structure",
            s.n()
        )));
    }
    let g = s.global_of(path)?;
    Ok(s.col_range(mode, g))
}

/// Distribution of the nonzero coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalDist {
    Gaussian,
    TwoPam,
}

/// Coefficients plus their hierarchical support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierSignal {
    pub coeffs: Vec<f64>,
    /// Per mode, the sorted global indices of active blocks.
    pub support_tree: Vec<Vec<usize>>,
    /// Sorted nonzero unit blocks.
    pub flat_support: Vec<usize>,
}

impl HierSignal {
    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coeffs)
    }

    /// Derives the support tree from the nonzero unit blocks of `coeffs`.
    /// Fails if some active block has more than `k_t` active children.
    pub fn from_coeffs(s: &HierStructure, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != s.ambient_dim() {
            return Err(Error::Dimension(format!(
                "signal has length {}, structure needs {}",
                coeffs.len(),
                s.ambient_dim()
            )));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal"));
        }
        let d = s.unit_block();
        let flat_support: Vec<usize> = (0..s.unit_blocks())
            .filter(|&u| coeffs[u * d..(u + 1) * d].iter().any(|&v| v != 0.0))
            .collect();
        let mut tree = Vec::with_capacity(s.n());
        for t in 1..=s.n() {
            let mut level: Vec<usize> = flat_support.iter().map(|&u| s.block_of_unit(t, u)).collect();
            level.dedup();
            let mut per_parent = std::collections::BTreeMap::new();
            for &g in &level {
                *per_parent.entry(g / s.dim(t)).or_insert(0usize) += 1;
            }
            if let Some((p, c)) = per_parent.into_iter().find(|&(_, c)| c > s.k(t)) {
                return Err(Error::Dimension(format!(
                    "mode {t}: block {p} has {c} active children, sparsity allows {}",
                    s.k(t)
                )));
            }
            tree.push(level);
        }
        Ok(HierSignal {
            coeffs,
            support_tree: tree,
            flat_support,
        })
    }
}

fn draw_sorted<R: Rng>(rng: &mut R, pool: &[usize], count: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = sample(rng, pool.len(), count).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    picked
}

/// Draws a hierarchically sparse signal with uniformly random support.
pub fn sample_signal(s: &HierStructure, dist: SignalDist, seed: u64) -> HierSignal {
    let mut rng = seeded_rng(seed);
    let mut tree: Vec<Vec<usize>> = Vec::with_capacity(s.n());
    let mut parents = vec![0usize];
    for t in 1..=s.n() {
        let mut level = Vec::new();
        for &p in &parents {
            let kids: Vec<usize> = s.children(t, p).collect();
            level.extend(draw_sorted(&mut rng, &kids, s.k(t)));
        }
        level.sort_unstable();
        tree.push(level.clone());
        parents = level;
    }
    let flat_support = tree.last().cloned().unwrap_or_default();
    let d = s.unit_block();
    let mut coeffs = vec![0.0; s.ambient_dim()];
    for &u in &flat_support {
        for c in &mut coeffs[u * d..(u + 1) * d] {
            *c = match dist {
                SignalDist::Gaussian => rng.sample(StandardNormal),
                SignalDist::TwoPam => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
        }
    }
    HierSignal {
        coeffs,
        support_tree: tree,
        flat_support,
    }
}

/// Dense measurement matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    pub entries: DMatrix<f64>,
    pub column_norms_unit: bool,
}

impl MeasurementMatrix {
    /// Wraps a matrix, optionally rescaling its columns to unit norm.
    pub fn new(mut entries: DMatrix<f64>, normalize: bool) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measurement matrix"));
        }
        if normalize {
            for mut col in entries.column_iter_mut() {
                let nrm = col.norm();
                if nrm == 0.0 {
                    return Err(Error::Dimension("zero column cannot be normalized".into()));
                }
                col /= nrm;
            }
        }
        Ok(Self {
            entries,
            column_norms_unit: normalize,
        })
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }
}

/// i.i.d. `N(0, 1/M)` entries with unit-norm columns.
pub fn gaussian_matrix(m: usize, n: usize, seed: u64) -> Result<MeasurementMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::Dimension("matrix needs at least one row and column".into()));
    }
    let mut rng = seeded_rng(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let entries = DMatrix::from_fn(m, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    MeasurementMatrix::new(entries, true)
}

/// Measurement matrix sized for structure `s`.
pub fn sample_matrix(m: usize, s: &HierStructure, seed: u64) -> Result<MeasurementMatrix> {
    gaussian_matrix(m, s.ambient_dim(), seed)
}

/// Requested PSI overlap counts for one mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlapCounts {
    /// Known true-support unit blocks.
    pub alpha_star: usize,
    /// Known whole active mode-`t` blocks.
    pub alpha_bar: usize,
    /// Known zero unit blocks inside active mode-`t` blocks.
    pub alpha_delta: usize,
    /// Augmentation unit blocks inside active mode-`t` blocks (disjoint from theta).
    pub alpha_star_delta: usize,
    /// Wrong unit blocks inside active parents but outside active mode-`t` blocks.
    pub beta: usize,
    /// Unit blocks outside every active parent block.
    pub gamma: usize,
}

impl OverlapCounts {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// How the augmentation weights `x_{*Δ}` are formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightStrategy {
    Zero,
    ScaledCorrelation {
        c: f64,
    },
    /// Full-length coefficient vector; only the augmentation columns are read.
    UserSupplied {
        weights: Vec<f64>,
    },
}

impl Default for WeightStrategy {
    fn default() -> Self {
        WeightStrategy::ScaledCorrelation { c: 1.0 }
    }
}

/// Prior support at one mode, at unit-block granularity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModePsi {
    pub theta: Vec<usize>,
    pub theta_star: Vec<usize>,
    pub theta_delta: Vec<usize>,
    pub theta_minus: Vec<usize>,
    pub theta_circ: Vec<usize>,
    pub theta_star_delta: Vec<usize>,
    /// Global mode-`t` blocks fully contained in `theta_star`.
    pub whole_blocks: Vec<usize>,
}

impl ModePsi {
    /// Unclassified sets, as a caller without ground truth would supply them.
    pub fn from_sets(mut theta: Vec<usize>, mut theta_star_delta: Vec<usize>) -> Self {
        theta.sort_unstable();
        theta.dedup();
        theta_star_delta.sort_unstable();
        theta_star_delta.dedup();
        ModePsi {
            theta,
            theta_star_delta,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty() && self.theta_star_delta.is_empty()
    }

    pub fn is_classified(&self) -> bool {
        self.theta.len()
            == self.theta_star.len() + self.theta_delta.len() + self.theta_minus.len() + self.theta_circ.len()
    }
}

/// Prior support for all modes plus the augmentation weight rule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorSupport {
    pub modes: Vec<ModePsi>,
    #[serde(default)]
    pub weight_strategy: WeightStrategy,
}

impl PriorSupport {
    /// No prior information at any mode.
    pub fn empty(n: usize) -> Self {
        PriorSupport {
            modes: vec![ModePsi::default(); n],
            weight_strategy: WeightStrategy::Zero,
        }
    }

    /// Mode-`t` sets (1-based); missing modes read as empty.
    pub fn mode(&self, t: usize) -> Option<&ModePsi> {
        self.modes.get(t - 1)
    }

    pub fn is_empty(&self) -> bool {
        self.modes.iter().all(ModePsi::is_empty)
    }

    /// Structural checks: sorted, in range, theta disjoint from the
    /// augmentation set, and a consistent partition when one is present.
    pub fn validate(&self, s: &HierStructure) -> Result<()> {
        if self.modes.len() > s.n() {
            return Err(Error::InfeasiblePsi(format!(
                "{} PSI modes for a {}-mode structure",
                self.modes.len(),
                s.n()
            )));
        }
        let units = s.unit_blocks();
        for (i, m) in self.modes.iter().enumerate() {
            let t = i + 1;
            for set in [&m.theta, &m.theta_star_delta] {
                if set.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InfeasiblePsi(format!(
                        "mode {t}: sets must be sorted and unique"
                    )));
                }
                if set.iter().any(|&u| u >= units) {
                    return Err(Error::InfeasiblePsi(format!("mode {t}: unit block out of range")));
                }
            }
            if intersects(&m.theta, &m.theta_star_delta) {
                return Err(Error::InfeasiblePsi(format!(
                    "mode {t}: theta and theta_star_delta overlap"
                )));
            }
            let parts = [&m.theta_star, &m.theta_delta, &m.theta_minus, &m.theta_circ];
            let part_total: usize = parts.iter().map(|p| p.len()).sum();
            if part_total > 0 {
                let mut all: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
                all.sort_unstable();
                if all != m.theta {
                    return Err(Error::InfeasiblePsi(format!("mode {t}: partition does not tile theta")));
                }
            }
        }
        if let WeightStrategy::UserSupplied { weights } = &self.weight_strategy {
            if weights.len() != s.ambient_dim() {
                return Err(Error::InfeasiblePsi(format!(
                    "user weights have length {}, expected {}",
                    weights.len(),
                    s.ambient_dim()
                )));
            }
        }
        Ok(())
    }

    /// Overlap counts recovered by classifying every index against `x`.
    pub fn counts(&self, s: &HierStructure) -> Vec<OverlapCounts> {
        self.modes
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let t = i + 1;
                OverlapCounts {
                    alpha_star: m.theta_star.len() - m.whole_blocks.len() * s.units_per_block(t),
                    alpha_bar: m.whole_blocks.len(),
                    alpha_delta: m.theta_delta.len(),
                    alpha_star_delta: m.theta_star_delta.len(),
                    beta: m.theta_minus.len(),
                    gamma: m.theta_circ.len(),
                }
            })
            .collect()
    }
}

fn intersects(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Category of a unit block relative to the realized support at mode `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UnitClass {
    Support,
    Additional,
    NonSupport,
    Outside,
}

struct ModeView {
    class: Vec<UnitClass>,
    active: Vec<bool>,
}

fn mode_view(s: &HierStructure, x: &HierSignal, t: usize) -> ModeView {
    let units = s.unit_blocks();
    let mut in_support = vec![false; units];
    for &u in &x.flat_support {
        in_support[u] = true;
    }
    let mut active = vec![false; s.num_blocks(t)];
    for &g in &x.support_tree[t - 1] {
        active[g] = true;
    }
    let mut parent_active = vec![t == 1; s.num_blocks(t - 1)];
    if t > 1 {
        for &g in &x.support_tree[t - 2] {
            parent_active[g] = true;
        }
    }
    let class = (0..units)
        .map(|u| {
            if in_support[u] {
                UnitClass::Support
            } else if active[s.block_of_unit(t, u)] {
                UnitClass::Additional
            } else if parent_active[s.block_of_unit(t - 1, u)] {
                UnitClass::NonSupport
            } else {
                UnitClass::Outside
            }
        })
        .collect();
    ModeView { class, active }
}

/// Partitions raw `theta`/`theta_star_delta` sets against a known signal.
///
/// Whole blocks are the active mode-`t` blocks fully contained in `theta`.
pub fn classify_psi(
    s: &HierStructure,
    x: &HierSignal,
    t: usize,
    theta: &[usize],
    theta_star_delta: &[usize],
) -> ModePsi {
    let view = mode_view(s, x, t);
    let mut in_theta = vec![false; s.unit_blocks()];
    for &u in theta {
        in_theta[u] = true;
    }
    let whole_blocks: Vec<usize> = (0..s.num_blocks(t))
        .filter(|&g| view.active[g] && s.unit_range(t, g).all(|u| in_theta[u]))
        .collect();
    classify_with_whole(s, &view, t, theta, theta_star_delta, whole_blocks)
}

fn classify_with_whole(
    s: &HierStructure,
    view: &ModeView,
    t: usize,
    theta: &[usize],
    theta_star_delta: &[usize],
    whole_blocks: Vec<usize>,
) -> ModePsi {
    let mut out = ModePsi {
        theta: theta.to_vec(),
        theta_star_delta: theta_star_delta.to_vec(),
        ..Default::default()
    };
    for &u in theta {
        let in_whole = whole_blocks.binary_search(&s.block_of_unit(t, u)).is_ok();
        let bucket = if in_whole {
            &mut out.theta_star
        } else {
            match view.class[u] {
                UnitClass::Support => &mut out.theta_star,
                UnitClass::Additional => &mut out.theta_delta,
                UnitClass::NonSupport => &mut out.theta_minus,
                UnitClass::Outside => &mut out.theta_circ,
            }
        };
        bucket.push(u);
    }
    out.whole_blocks = whole_blocks;
    out
}

/// Draws PSI sets with the requested per-mode overlap counts.
///
/// Whole blocks are drawn first, then unit-block overlaps from what remains.
/// Every count is a total over the whole vector for that mode.
pub fn sample_psi(
    s: &HierStructure,
    x: &HierSignal,
    overlaps: &[OverlapCounts],
    weight_strategy: WeightStrategy,
    seed: u64,
) -> Result<PriorSupport> {
    if overlaps.len() > s.n() {
        return Err(Error::InfeasiblePsi(format!(
            "{} overlap specs for a {}-mode structure",
            overlaps.len(),
            s.n()
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut modes = Vec::with_capacity(s.n());
    for t in 1..=s.n() {
        let want = overlaps.get(t - 1).copied().unwrap_or_default();
        let view = mode_view(s, x, t);
        let check = |name: &str, need: usize, pool: usize| -> Result<()> {
            if need > pool {
                Err(Error::InfeasiblePsi(format!(
                    "mode {t}: {name} = {need} exceeds the pool of {pool}"
                )))
            } else {
                Ok(())
            }
        };

        let active_blocks: Vec<usize> = x.support_tree[t - 1].clone();
        check("alpha_bar", want.alpha_bar, active_blocks.len())?;
        let whole = draw_sorted(&mut rng, &active_blocks, want.alpha_bar);
        let mut taken = vec![false; s.unit_blocks()];
        for &g in &whole {
            for u in s.unit_range(t, g) {
                taken[u] = true;
            }
        }
        let pool_of = |class: UnitClass, taken: &[bool]| -> Vec<usize> {
            (0..s.unit_blocks())
                .filter(|&u| view.class[u] == class && !taken[u])
                .collect()
        };

        let support_pool = pool_of(UnitClass::Support, &taken);
        check("alpha_star", want.alpha_star, support_pool.len())?;
        let star = draw_sorted(&mut rng, &support_pool, want.alpha_star);

        let additional_pool = pool_of(UnitClass::Additional, &taken);
        check("alpha_delta", want.alpha_delta, additional_pool.len())?;
        let delta = draw_sorted(&mut rng, &additional_pool, want.alpha_delta);
        for &u in &delta {
            taken[u] = true;
        }
        let aug_pool = pool_of(UnitClass::Additional, &taken);
        check("alpha_star_delta", want.alpha_star_delta, aug_pool.len())?;
        let star_delta = draw_sorted(&mut rng, &aug_pool, want.alpha_star_delta);

        let minus_pool = pool_of(UnitClass::NonSupport, &taken);
        check("beta", want.beta, minus_pool.len())?;
        let minus = draw_sorted(&mut rng, &minus_pool, want.beta);

        let circ_pool = pool_of(UnitClass::Outside, &taken);
        check("gamma", want.gamma, circ_pool.len())?;
        let circ = draw_sorted(&mut rng, &circ_pool, want.gamma);

        let mut theta: Vec<usize> = whole.iter().flat_map(|&g| s.unit_range(t, g)).collect();
        theta.extend(star.iter().chain(&delta).chain(&minus).chain(&circ));
        theta.sort_unstable();
        modes.push(classify_with_whole(s, &view, t, &theta, &star_delta, whole));
    }
    Ok(PriorSupport { modes, weight_strategy })
}
