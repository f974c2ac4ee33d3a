//! Shared fixtures for the benchmarks.

use hiblk::model::{make_structure, mix_seed, sample_matrix, sample_psi, sample_signal, HierSignal, HierStructure};
use hiblk::{OverlapCounts, PriorSupport, SignalDist, WeightStrategy};
use nalgebra::{DMatrix, DVector};

pub struct Problem {
    pub s: HierStructure,
    pub d: DMatrix<f64>,
    pub x: HierSignal,
    pub y: DVector<f64>,
    pub psi: PriorSupport,
}

/// Noiseless 2-mode instance with `per_block` augmentation units per active
/// outer block.
pub fn problem(m: usize, dims: [usize; 2], unit: usize, k: [usize; 2], per_block: usize, seed: u64) -> Problem {
    let s = make_structure(&dims, unit, &k).expect("valid structure");
    let d = sample_matrix(m, &s, mix_seed(seed, 1)).expect("valid matrix").entries;
    let x = sample_signal(&s, SignalDist::TwoPam, mix_seed(seed, 2));
    let y = &d * x.vector();
    let overlaps = [
        OverlapCounts {
            alpha_star_delta: per_block * k[0],
            ..Default::default()
        },
        OverlapCounts::default(),
    ];
    let psi = sample_psi(&s, &x, &overlaps, WeightStrategy::default(), mix_seed(seed, 3)).expect("feasible PSI");
    Problem { s, d, x, y, psi }
}
