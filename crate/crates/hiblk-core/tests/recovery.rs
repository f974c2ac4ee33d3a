mod common;

use approx::assert_relative_eq;
use common::{admissible_supports, brute_force_support, normalized};
use hiblk::certificates::k_eldar;
use hiblk::coherence::{block_coherence, mutual_coherence, sub_coherence};
use hiblk::model::{make_structure, sample_psi, sample_signal};
use hiblk::recovery::{bomp, default_eps, hibomp, hibomp_p, hiomp, omp};
use hiblk::{OverlapCounts, PriorSupport, SignalDist, Status, WeightStrategy};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn bomp_on_identity() {
    let d = DMatrix::identity(4, 4);
    let y = DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]);
    let r = bomp(&d, &y, 2, 1, 1e-12).unwrap();
    assert_eq!(r.support, vec![1]);
    assert_relative_eq!(
        r.estimate_vector(),
        DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]),
        epsilon = 1e-12
    );
    assert_eq!(r.status, Status::ConvergedTol);

    let r = bomp(&d, &y, 2, 0, 1e-12).unwrap();
    assert!(r.support.is_empty());
    assert!(r.estimate.iter().all(|v| *v == 0.0));
}

#[test]
fn omp_examples() {
    let d = DMatrix::identity(4, 4);
    let y = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
    assert_eq!(omp(&d, &y, 1, 1e-12).unwrap().support, vec![2]);

    let q = normalized(6, 2, 3).qr().q();
    let mut d = normalized(6, 4, 4);
    d.set_column(0, &q.column(0));
    d.set_column(1, &q.column(1));
    let y = d.column(0) * 2.0 + d.column(1);
    let r = omp(&d, &y, 2, 1e-12).unwrap();
    assert_eq!(r.support, vec![0, 1]);
    assert_relative_eq!(r.estimate[0], 2.0, epsilon = 1e-12);
    assert_relative_eq!(r.estimate[1], 1.0, epsilon = 1e-12);
}

#[test]
fn omp_recovers_below_coherence_bound() {
    let mut checked = 0;
    for seed in 0..40 {
        let d = normalized(200, 24, seed);
        let mu = mutual_coherence(&d).unwrap();
        let k = 2;
        if (k as f64) >= 0.5 * (1.0 / mu + 1.0) {
            continue;
        }
        let s = make_structure(&[24], 1, &[k]).unwrap();
        let x = sample_signal(&s, SignalDist::Gaussian, seed + 1000);
        let y = &d * x.vector();
        let r = omp(&d, &y, k, default_eps(&y)).unwrap();
        assert_eq!(r.support, x.flat_support, "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} instances met the bound");
}

#[test]
fn bomp_recovers_below_block_bound() {
    let mut checked = 0;
    for seed in 0..40 {
        let d = normalized(300, 16, seed);
        let (mu_b, nu) = (block_coherence(&d, 2).unwrap(), sub_coherence(&d, 2).unwrap());
        let k = 1;
        if (k * 2) as f64 >= k_eldar(mu_b, 2, nu).unwrap() {
            continue;
        }
        let s = make_structure(&[8], 2, &[k]).unwrap();
        let x = sample_signal(&s, SignalDist::Gaussian, seed + 50);
        let y = &d * x.vector();
        let r = bomp(&d, &y, 2, k, default_eps(&y)).unwrap();
        assert_eq!(r.support, x.flat_support, "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} instances met the bound");
}

#[test]
fn single_mode_hibomp_is_bomp() {
    for seed in 0..20 {
        let s = make_structure(&[12], 3, &[3]).unwrap();
        let d = normalized(20, 36, seed);
        let y = &d * sample_signal(&s, SignalDist::Gaussian, seed).vector();
        let eps = default_eps(&y);
        let a = hibomp_p(&d, &y, &s, &PriorSupport::empty(1), eps).unwrap();
        let b = bomp(&d, &y, 3, 3, eps).unwrap();
        assert_eq!(a.support, b.support);
        assert_eq!(a.estimate, b.estimate);
    }
}

#[test]
fn unit_block_hibomp_is_hiomp() {
    let s = make_structure(&[4, 6], 1, &[2, 2]).unwrap();
    for seed in 0..20 {
        let d = normalized(16, 24, seed);
        let y = &d * sample_signal(&s, SignalDist::Gaussian, seed).vector();
        let a = hibomp(&d, &y, &s, default_eps(&y)).unwrap();
        let b = hiomp(&d, &y, &s, default_eps(&y)).unwrap();
        assert_eq!(a, b);
        let c = hibomp_p(&d, &y, &s, &PriorSupport::empty(2), default_eps(&y)).unwrap();
        assert_eq!(a, c);
    }
}

#[test]
fn hiomp_support_is_in_coefficients() {
    let s = make_structure(&[4, 3], 2, &[1, 1]).unwrap();
    let d = normalized(20, 24, 8);
    let x = sample_signal(&s, SignalDist::Gaussian, 8);
    let y = &d * x.vector();
    let r = hiomp(&d, &y, &s, default_eps(&y)).unwrap();
    let coeffs: Vec<usize> = s.unit_cols(&x.flat_support);
    assert_eq!(r.support, coeffs);
}

#[test]
fn brute_force_oracle_on_two_mode_instance() {
    let s = make_structure(&[4, 8], 2, &[1, 2]).unwrap();
    assert_eq!(admissible_supports(&s).len(), 4 * 28);
    for seed in 0..10 {
        let d = normalized(32, 64, seed);
        let x = sample_signal(&s, SignalDist::Gaussian, seed + 7);
        let y = &d * x.vector();
        let r = hibomp(&d, &y, &s, default_eps(&y)).unwrap();
        let oracle = brute_force_support(&d, &y, &s);
        assert_eq!(oracle, x.flat_support);
        assert_eq!(r.support, oracle, "seed {seed}");
    }
}

#[test]
fn zero_weights_neutralize_augmentation() {
    let s = make_structure(&[6, 4], 2, &[2, 2]).unwrap();
    for seed in 0..20 {
        let d = normalized(24, 48, seed);
        let x = sample_signal(&s, SignalDist::Gaussian, seed);
        let y = &d * x.vector();
        let want = OverlapCounts {
            alpha_star_delta: 2,
            ..Default::default()
        };
        let psi = sample_psi(&s, &x, &[want], WeightStrategy::Zero, seed).unwrap();
        assert!(!psi.mode(1).unwrap().theta_star_delta.is_empty());
        let a = hibomp_p(&d, &y, &s, &psi, default_eps(&y)).unwrap();
        let b = hibomp(&d, &y, &s, default_eps(&y)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn known_whole_blocks_skip_selection() {
    let s = make_structure(&[6, 4], 2, &[2, 2]).unwrap();
    let d = normalized(30, 48, 3);
    let x = sample_signal(&s, SignalDist::Gaussian, 3);
    let y = &d * x.vector();
    let want = OverlapCounts {
        alpha_bar: 1,
        ..Default::default()
    };
    let psi = sample_psi(&s, &x, &[want], WeightStrategy::default(), 3).unwrap();
    let r = hibomp_p(&d, &y, &s, &psi, default_eps(&y)).unwrap();
    let prior: Vec<_> = r.selections.iter().filter(|sel| sel.prior).collect();
    assert!(prior.iter().any(|sel| sel.mode == 1));
    assert!(r.iterations() < r.selections.len());
}

#[test]
fn rejects_bad_inputs() {
    let s = make_structure(&[4], 2, &[1]).unwrap();
    let d = normalized(5, 8, 1);
    assert!(hibomp(&d, &DVector::zeros(4), &s, 0.0).is_err());
    assert!(bomp(&d, &DVector::zeros(5), 3, 1, 0.0).is_err());
    let mut psi = PriorSupport::empty(1);
    psi.modes[0].theta = vec![9];
    assert!(hibomp_p(&d, &DVector::zeros(5), &s, &psi, 0.0).is_err());
}

#[test]
fn duplicate_columns_do_not_stall() {
    let s = make_structure(&[4], 1, &[2]).unwrap();
    let mut d = normalized(6, 4, 2);
    d.set_column(1, &d.column(0).into_owned());
    let y = d.column(0) + d.column(2) * 0.5;
    let r = hibomp(&d, &y, &s, 1e-12).unwrap();
    assert!(r.support.len() <= 2);
    let r = omp(&d, &y, 2, 1e-12).unwrap();
    assert_ne!(r.status, Status::RankFailure);
}

fn case() -> impl Strategy<Value = (u64, usize, usize, usize, bool)> {
    (any::<u64>(), 1usize..4, 1usize..3, 1usize..3, any::<bool>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pursuit_invariants((seed, k1, k2, d, with_psi) in case()) {
        let s = make_structure(&[5, 4], d, &[k1, k2]).unwrap();
        let m = 14 + 4 * k1 * k2 * d;
        let dm = normalized(m, s.ambient_dim(), seed);
        let x = sample_signal(&s, SignalDist::Gaussian, seed ^ 9);
        let y = &dm * x.vector();
        let psi = if with_psi {
            let want = OverlapCounts { alpha_star_delta: k1, alpha_delta: 1.min(k1), ..Default::default() };
            sample_psi(&s, &x, &[want], WeightStrategy::default(), seed).unwrap()
        } else {
            PriorSupport::empty(2)
        };
        let r = hibomp_p(&dm, &y, &s, &psi, default_eps(&y)).unwrap();
        prop_assert!(r.support.len() <= s.block_sparsity());
        let cols = s.unit_cols(&r.support);
        for (i, v) in r.estimate.iter().enumerate() {
            if *v != 0.0 {
                prop_assert!(cols.contains(&i));
            }
        }
        for w in r.residual_norm_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10) + 1e-12);
        }
        let resid = &y - &dm * r.estimate_vector();
        let a = hiblk::linalg::select_cols(&dm, &cols);
        prop_assert!(a.tr_mul(&resid).amax() < 1e-9 * y.norm());
        for &u in &r.support {
            let top = s.block_of_unit(1, u);
            prop_assert!(r.selections.iter().any(|sel| sel.mode == 1 && sel.path == vec![top]));
        }
        if r.support == x.flat_support {
            let err = (r.estimate_vector() - x.vector()).norm() / x.vector().norm();
            prop_assert!(err < 1e-9, "{}", err);
        }
    }
}
