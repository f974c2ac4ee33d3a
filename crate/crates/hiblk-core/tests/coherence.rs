mod common;

use approx::assert_relative_eq;
use common::{normalized, spectral_oracle, subsets};
use hiblk::coherence::{
    block_coherence, coherence_profile, disjoint_pair_count, hier_block_coherence, hier_sub_coherence,
    mutual_coherence, sub_coherence, welch_bound,
};
use hiblk::linalg::select_cols;
use hiblk::{CoherenceStrategy, Error};
use nalgebra::DMatrix;

fn gram_offdiag_max(a: &DMatrix<f64>) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..a.ncols() {
        for j in 0..a.ncols() {
            if i != j {
                best = best.max(a.column(i).dot(&a.column(j)).abs());
            }
        }
    }
    best
}

fn block_oracle(a: &DMatrix<f64>, d: usize) -> f64 {
    let b = a.ncols() / d;
    let mut best: f64 = 0.0;
    for i in 0..b {
        for j in 0..b {
            if i != j {
                let ai = a.columns(i * d, d).into_owned();
                let aj = a.columns(j * d, d).into_owned();
                best = best.max(spectral_oracle(&(ai.transpose() * aj)));
            }
        }
    }
    best / d as f64
}

fn hier_oracle(a: &DMatrix<f64>, d: usize, d_star: usize) -> f64 {
    let c = d_star / d;
    let units = a.ncols() / d;
    let cols = |set: &[usize]| -> Vec<usize> { set.iter().flat_map(|&u| u * d..(u + 1) * d).collect() };
    let mut best: f64 = 0.0;
    for i in subsets(units, c) {
        for j in subsets(units, c) {
            if i.iter().any(|u| j.contains(u)) {
                continue;
            }
            let m = select_cols(a, &cols(&i)).transpose() * select_cols(a, &cols(&j));
            best = best.max(spectral_oracle(&m));
        }
    }
    best / d_star as f64
}

fn pair_scan_within(a: &DMatrix<f64>, span: usize) -> f64 {
    let mut best: f64 = 0.0;
    for b in 0..a.ncols() / span {
        let blk = a.columns(b * span, span).into_owned();
        best = best.max(gram_offdiag_max(&blk));
    }
    best
}

#[test]
fn mutual_examples() {
    assert_eq!(mutual_coherence(&DMatrix::identity(4, 4)).unwrap(), 0.0);
    let mut a = normalized(6, 5, 1);
    a.set_column(3, &a.column(1).into_owned());
    assert_relative_eq!(mutual_coherence(&a).unwrap(), 1.0, epsilon = 1e-12);
    let a = normalized(20, 40, 2);
    assert_relative_eq!(mutual_coherence(&a).unwrap(), gram_offdiag_max(&a), epsilon = 1e-14);
    assert!(mutual_coherence(&DMatrix::from_element(3, 1, 1.0)).is_err());
}

#[test]
fn block_and_sub_examples() {
    let i4 = DMatrix::identity(4, 4);
    assert_eq!(block_coherence(&i4, 2).unwrap(), 0.0);
    assert_eq!(sub_coherence(&i4, 2).unwrap(), 0.0);
    let blocks = normalized(8, 2, 3).qr().q();
    let mut a = DMatrix::zeros(8, 4);
    a.columns_mut(0, 2).copy_from(&blocks);
    a.columns_mut(2, 2).copy_from(&normalized(8, 2, 4).qr().q());
    assert!(sub_coherence(&a, 2).unwrap() < 1e-14);
    for seed in 0..10 {
        let a = normalized(12, 16, seed);
        assert_relative_eq!(
            block_coherence(&a, 2).unwrap(),
            block_oracle(&a, 2),
            max_relative = 1e-10
        );
        assert_relative_eq!(sub_coherence(&a, 2).unwrap(), pair_scan_within(&a, 2), epsilon = 1e-14);
    }
    assert!(matches!(block_coherence(&a, 3), Err(Error::Dimension(_))));
}

#[test]
fn hierarchical_examples() {
    let i8 = DMatrix::identity(8, 8);
    for ds in [1, 2, 4] {
        assert_eq!(
            hier_block_coherence(&i8, 1, ds, CoherenceStrategy::exact())
                .unwrap()
                .value,
            0.0
        );
    }
    for seed in 0..5 {
        let a = normalized(6, 8, seed);
        let got = hier_block_coherence(&a, 1, 2, CoherenceStrategy::exact()).unwrap();
        assert!(!got.lower_bound);
        assert_relative_eq!(got.value, hier_oracle(&a, 1, 2), max_relative = 1e-10);
        assert!(got.value <= block_coherence(&a, 1).unwrap() + 1e-12);
    }
    let a = normalized(10, 12, 9);
    assert_relative_eq!(
        hier_block_coherence(&a, 2, 4, CoherenceStrategy::exact())
            .unwrap()
            .value,
        hier_oracle(&a, 2, 4),
        max_relative = 1e-10
    );
}

#[test]
fn exact_refuses_above_cap() {
    let a = normalized(10, 40, 1);
    let r = hier_block_coherence(&a, 1, 8, CoherenceStrategy::Exact { cap: 1000 });
    assert!(matches!(r, Err(Error::EnumerationCap { .. })));
    assert_eq!(disjoint_pair_count(6, 2), 15 * 6);
}

#[test]
fn hier_sub_examples() {
    let mut a = DMatrix::zeros(8, 8);
    a.columns_mut(0, 4).copy_from(&normalized(8, 4, 1).qr().q());
    a.columns_mut(4, 4).copy_from(&normalized(8, 4, 2).qr().q());
    assert!(hier_sub_coherence(&a, 1, 2, 4).unwrap() < 1e-14);
    for seed in 0..10 {
        let a = normalized(9, 12, seed);
        let nu = sub_coherence(&a, 2).unwrap();
        let got = hier_sub_coherence(&a, 2, 4, 6).unwrap();
        assert_relative_eq!(got, pair_scan_within(&a, 6), epsilon = 1e-14);
        assert!(nu <= got + 1e-14);
        assert_relative_eq!(hier_sub_coherence(&a, 2, 2, 6).unwrap(), nu, epsilon = 1e-14);
    }
    assert!(hier_sub_coherence(&a, 1, 2, 3).is_err());
}

#[test]
fn welch_examples() {
    assert_relative_eq!(welch_bound(128, 512).unwrap(), 0.0766, epsilon = 1e-4);
    assert!((welch_bound(128, 512).unwrap() - 0.077).abs() < 1e-3);
    assert_eq!(welch_bound(16, 16).unwrap(), 0.0);
    assert_relative_eq!(
        welch_bound(40, 400).unwrap(),
        (360.0f64 / 15960.0).sqrt(),
        epsilon = 1e-15
    );
    assert_relative_eq!(welch_bound(40, 400).unwrap(), 0.15019, epsilon = 1e-5);
    assert!(welch_bound(10, 5).is_err());
}

#[test]
fn ordering_chain_on_random_matrices() {
    for seed in 0..200u64 {
        let a = normalized(10, 12, seed);
        let p = coherence_profile(&a, 2, &[2, 4], &[(4, 6), (4, 12)], CoherenceStrategy::exact()).unwrap();
        assert!(p.mu_block <= p.mu + 1e-12, "seed {seed}");
        assert!(p.nu_sub <= p.mu + 1e-12);
        for e in &p.mu_hier {
            assert!(e.value <= p.mu_block + 1e-12, "seed {seed} d*={}", e.d_star);
        }
        for e in &p.nu_hier {
            assert!(p.nu_sub <= e.value + 1e-12);
            assert!(e.value <= p.mu + 1e-12);
        }
        assert_relative_eq!(p.mu_hier_at(2).unwrap().value, p.mu_block, max_relative = 1e-12);
    }
}

#[test]
fn sampled_never_exceeds_exact() {
    for seed in 0..20 {
        let a = normalized(8, 12, seed);
        let exact = hier_block_coherence(&a, 1, 3, CoherenceStrategy::exact()).unwrap();
        let sampled = hier_block_coherence(&a, 1, 3, CoherenceStrategy::Sampled { count: 300, seed }).unwrap();
        assert!(sampled.lower_bound);
        assert!(sampled.value <= exact.value + 1e-12);
        let again = hier_block_coherence(&a, 1, 3, CoherenceStrategy::Sampled { count: 300, seed }).unwrap();
        assert_eq!(sampled.value.to_bits(), again.value.to_bits());
    }
}

#[test]
fn monotonicity_in_block_length_is_reported() {
    // Observed, not asserted: count how often μ_{d*} grows with d*.
    let mut rises = 0;
    for seed in 0..30 {
        let a = normalized(10, 10, seed);
        let v: Vec<f64> = [1, 2, 3]
            .iter()
            .map(|&ds| {
                hier_block_coherence(&a, 1, ds, CoherenceStrategy::exact())
                    .unwrap()
                    .value
            })
            .collect();
        rises += v.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
    }
    println!("μ_d* increases observed: {rises} of 60 steps");
}
