mod common;

use approx::assert_relative_eq;
use common::{erc_case, normalized, rho_c_oracle};
use hiblk::certificates::{
    corollary4_bound, k_bar_star, k_eldar, k_star_kxing, k_tropp, largest_sparsity_below, mu_n_threshold,
    noisy_conditions, remark5, sparsity_bounds, theorem1_terms, theorem2_eval, theorem2_terms, theorem7_bound,
    true_sparsity_bound, verify_inequality, BoundParams, InequalityKind, Instance, Remark5Inputs, Theorem1Terms,
    Theorem2Inputs,
};
use hiblk::linalg::select_cols;
use hiblk::model::{make_structure, sample_signal};
use hiblk::{erc_certify, CoherenceProfile, CoherenceStrategy, ErcOptions, Error, PriorSupport, SignalDist, Verdict};
use nalgebra::{DMatrix, DVector};

fn t1(sigma: f64) -> Theorem1Terms {
    Theorem1Terms {
        rho_star: 0.3,
        rho_circ: 0.2,
        rho_out_in: 0.1,
        rho_out_delta: 0.05,
        sigma_min: sigma,
        norm_in: 1.0,
        norm_out: 0.5,
        g_star: None,
        g_circ: None,
        g_sum: None,
        premise_ok: false,
        verdict: Verdict::PremiseFailed,
    }
}

fn inputs() -> Theorem2Inputs {
    Theorem2Inputs {
        unit_block: 2,
        d_in: 4,
        d_delta: 2,
        d_bar: 8,
        d_circ: 4,
        k_in: 2,
        k_circ: 1,
        gamma: 0,
        r_units: 2,
        mu_in: 0.02,
        nu_in: 0.05,
        mu_circ: 0.03,
        nu_circ: 0.05,
        norm_in: 1.0,
        norm_out: 0.4,
    }
}

#[test]
fn published_bound_numerics() {
    let e = k_eldar(0.14, 2, 0.0).unwrap();
    assert_relative_eq!(e, 4.5714, epsilon = 1e-4);
    assert_eq!(largest_sparsity_below(e, 2), 2);
    let a = true_sparsity_bound(1, 0.05, 0.077, 16, 16).unwrap();
    assert_relative_eq!(a, 6.45, epsilon = 1e-9);
    assert_eq!(largest_sparsity_below(a, 16), 0);
    let b = k_bar_star(1, 0.05, 16, 16).unwrap();
    assert_relative_eq!(b, 18.0, epsilon = 1e-12);
    assert_eq!(largest_sparsity_below(b, 16), 1);
    assert_eq!(mu_n_threshold(2, 1, 0).unwrap(), 0.5);
    assert!(mu_n_threshold(1, 1, 0).is_err());
}

#[test]
fn context_bounds() {
    assert_relative_eq!(k_tropp(0.1).unwrap(), 5.5, epsilon = 1e-12);
    assert!(k_tropp(0.0).is_err());
    assert!(k_eldar(0.1, 0, 0.0).is_err());
    assert_eq!(largest_sparsity_below(4.0, 2), 1);
    assert_eq!(largest_sparsity_below(-1.0, 2), 0);
    assert_relative_eq!(corollary4_bound(0.05, 0.0, 16, 16).unwrap(), 18.0, epsilon = 1e-12);
}

#[test]
fn sparsity_bounds_collects_errors() {
    let set = sparsity_bounds(&BoundParams {
        mu: Some(0.1),
        mu_b: Some(0.14),
        d: Some(2),
        k_n: Some(1),
        alpha_bar: Some(1),
        ..Default::default()
    });
    assert!(set.k_tropp.is_some() && set.k_eldar.is_some());
    assert!(set.mu_n_threshold.is_none());
    assert_eq!(set.errors.len(), 1);
    assert!(set.errors[0].starts_with("mu_n_threshold"));
}

#[test]
fn theorem7_matches_reduced_form() {
    let mut checked = 0;
    for i in 0..400u64 {
        let mu = 0.005 + (i % 17) as f64 * 0.003;
        let nu = (i % 5) as f64 * 0.01;
        let d = 1 + (i % 3) as usize;
        let dsum = d * (1 + (i % 4) as usize);
        let d_bar = dsum * (1 + (i % 3) as usize);
        let r = (i % 6) as usize;
        let alpha_bar = (i % 2) as usize;
        let Ok(got) = theorem7_bound(mu, nu, dsum, d_bar, r, d, alpha_bar) else {
            continue;
        };
        let dh = dsum as f64;
        let c_r = (r * d).div_ceil(dsum) as f64;
        let cb = d_bar.div_ceil(dsum) as f64;
        let den1 = 1.0 - (dh - 1.0) * nu - (c_r - 1.0) * dh * mu;
        let oracle = den1 / (mu * (cb + 1.0)) + alpha_bar as f64 * dh;
        assert_relative_eq!(got, oracle, max_relative = 1e-10);

        // The bound is exactly the point where the coherence condition on
        // the non-support blocks flips.
        for k in 1..=20usize {
            let t = theorem2_eval(&Theorem2Inputs {
                unit_block: d,
                d_in: dsum,
                d_delta: 0,
                d_bar,
                d_circ: dsum,
                k_in: k,
                k_circ: 0,
                gamma: 0,
                r_units: r,
                mu_in: mu,
                nu_in: nu,
                mu_circ: 0.0,
                nu_circ: 0.0,
                norm_in: 1.0,
                norm_out: 0.0,
            });
            if !t.premises_hold {
                continue;
            }
            let below = (((k + alpha_bar) * dsum) as f64) < got;
            if ((((k + alpha_bar) * dsum) as f64) - got).abs() > 1e-9 {
                assert_eq!(below, t.delta.in_bar < 1.0, "i={i} k={k}");
                checked += 1;
            }
        }
    }
    assert!(checked > 500, "{checked}");
}

#[test]
fn corollary4_is_theorem7_without_prior() {
    for (mu, nu, ds, db) in [(0.05, 0.0, 16, 16), (0.02, 0.03, 4, 8), (0.1, 0.01, 2, 6)] {
        assert_relative_eq!(
            corollary4_bound(mu, nu, ds, db).unwrap(),
            theorem7_bound(mu, nu, ds, db, 0, 1, 0).unwrap(),
            max_relative = 1e-12
        );
    }
}

#[test]
fn remark5_lower_root_oracle() {
    let mut checked = 0;
    for i in 0..300u64 {
        let d_in = 2 * (1 + (i % 3) as usize);
        let inp = Remark5Inputs {
            mu_in: 0.01 + (i % 11) as f64 * 0.004,
            mu_b: 0.05 + (i % 7) as f64 * 0.01,
            mu_circ: (i % 13) as f64 * 0.002,
            d_in,
            d_delta: (i % 3) as usize,
            d_bar: d_in * (1 + (i % 4) as usize),
            d_circ: 2 + (i % 5) as usize,
            k_circ: (i % 4) as usize,
            norm_in: 1.0 + (i % 5) as f64 * 0.3,
            norm_out: 0.2 + (i % 9) as f64 * 0.15,
        };
        let Ok(r) = remark5(&inp) else { continue };
        let a = inp.norm_in / inp.norm_out;
        let q = (inp.d_bar / inp.d_in) as f64;
        let core = inp.k_circ as f64 * inp.d_circ as f64 * inp.mu_circ;
        let c = |len: usize| len.div_ceil(inp.d_circ) as f64 * core;
        let big_s = (c(inp.d_in) + c(inp.d_delta)).sqrt();
        let k = a * q + a * inp.d_bar as f64 * inp.mu_in + c(inp.d_bar) + big_s;
        let oracle = (big_s / a).max(k / (a * (q + 1.0)));
        assert_relative_eq!(r.delta_lower, oracle, max_relative = 1e-9, epsilon = 1e-12);
        assert_relative_eq!(
            r.k_star_hier,
            d_in as f64 + (1.0 - oracle) / inp.mu_in,
            max_relative = 1e-9
        );
        checked += 1;
    }
    assert!(checked > 250);
    let bad = Remark5Inputs {
        mu_in: 0.1,
        mu_b: 0.1,
        mu_circ: 0.0,
        d_in: 4,
        d_delta: 0,
        d_bar: 6,
        d_circ: 4,
        k_circ: 0,
        norm_in: 1.0,
        norm_out: 1.0,
    };
    assert!(matches!(remark5(&bad), Err(Error::Domain(_))));
}

#[test]
fn k_star_partial_signs() {
    let h = 1e-6;
    for i in 0..20u64 {
        let prefix = 1 + (i % 3) as usize;
        let mu = 0.02 + (i % 7) as f64 * 0.01;
        let nu = 0.01 + (i % 4) as f64 * 0.01;
        let ds = 2 + (i % 4) as usize;
        let dd = (i % 5) as usize;
        let f = |mu: f64, nu: f64, dd: usize| k_star_kxing(prefix, mu, nu, ds, dd).unwrap();
        assert!(f(mu + h, nu, dd) < f(mu, nu, dd), "∂/∂μ at {i}");
        assert!(f(mu, nu + h, dd) < f(mu, nu, dd), "∂/∂ν at {i}");
        assert!(f(mu, nu, dd + ds) < f(mu, nu, dd), "∂/∂d^Δ at {i}");
    }
}

#[test]
fn theorem1_evaluation_signs_and_premises() {
    let t = t1(0.9);
    let (gs, gc) = t.evaluate(1.0, 0.5).unwrap();
    let h = 1e-6;
    let (gs_o, gc_o) = t.evaluate(1.0, 0.5 + h).unwrap();
    let (gs_i, gc_i) = t.evaluate(1.0 + h, 0.5).unwrap();
    assert!(gs_o > gs && gc_o > gc);
    assert!(gs_i < gs && gc_i < gc);
    assert_eq!(t.evaluate(1.0, 0.0), Some((0.3, 0.0)));
    // σ too small for the outside energy: no certificate.
    assert_eq!(t1(0.01).evaluate(1.0, 0.5), None);
    assert_eq!(t.evaluate(0.0, 0.5), None);
}

#[test]
fn verdict_folding() {
    use Verdict::*;
    assert_eq!(Verdict::combine([Certified, Certified]), Certified);
    assert_eq!(Verdict::combine([Certified, Violated]), Violated);
    assert_eq!(Verdict::combine([Violated, PremiseFailed, Certified]), PremiseFailed);
}

#[test]
fn theorem2_examples() {
    let mut inp = inputs();
    inp.norm_out = 0.0;
    let t = theorem2_eval(&inp);
    assert!(t.premises_hold);
    assert_eq!(t.gbar_star, Some(t.delta.in_bar));
    assert_eq!(t.gbar_circ, Some(0.0));

    let mut inp = inputs();
    inp.mu_circ = 0.0;
    let t = theorem2_eval(&inp);
    assert_eq!(t.delta.circ_in, 0.0);
    assert_eq!(t.delta.circ_delta, 0.0);

    let mut inp = inputs();
    inp.mu_in = 0.4;
    let t = theorem2_eval(&inp);
    assert!(!t.premises_hold);
    assert_eq!(t.verdict, Verdict::PremiseFailed);
    assert!(t.gbar_sum.is_none());
}

#[test]
fn orthogonal_columns_give_zero_statistic() {
    let s = make_structure(&[4, 2], 1, &[2, 1]).unwrap();
    let d = DMatrix::identity(8, 8);
    let x = sample_signal(&s, SignalDist::Gaussian, 2);
    let y = &d * x.vector();
    let rep = erc_certify(&d, &y, &s, &PriorSupport::empty(2), &x, &ErcOptions::default()).unwrap();
    assert!(rep.exact_support);
    for st in rep.steps.iter().filter_map(|r| r.theorem1.as_ref()) {
        assert!(st.rho_star < 1e-12);
        assert!(st.g_star.unwrap() < 1e-12);
    }
    assert_eq!(rep.verdict, Verdict::Certified);
}

#[test]
fn theorem1_matches_direct_evaluation() {
    let mut steps = 0;
    for i in 0..40u64 {
        let Some(c) = erc_case(i) else { continue };
        let rep = erc_certify(&c.d, &c.y, &c.s, &c.psi, &c.x, &ErcOptions::default()).unwrap();
        for rec in &rep.steps {
            let (Some(t), Some(ctx)) = (&rec.theorem1, &rec.context) else {
                continue;
            };
            let again = theorem1_terms(&c.d, ctx).unwrap();
            assert_eq!(&again, t);

            let cond = select_cols(&c.d, &ctx.conditioning);
            let proj = if cond.ncols() == 0 {
                DMatrix::identity(c.d.nrows(), c.d.nrows())
            } else {
                let inv = (cond.transpose() * &cond).try_inverse().unwrap();
                DMatrix::identity(c.d.nrows(), c.d.nrows()) - &cond * inv * cond.transpose()
            };
            let part = |groups: &[Vec<usize>]| {
                let (cols, sizes) = ctx.columns(groups);
                (&proj * select_cols(&c.d, &cols), sizes, cols)
            };
            let (a_in, s_in, c_in) = part(&ctx.in_groups);
            if a_in.ncols() == 0 {
                continue;
            }
            let (a_bar, s_bar, _) = part(&ctx.bar_groups);
            let (a_dl, s_dl, _) = part(&ctx.delta_groups);
            let (a_out, s_out, c_out) = part(&ctx.outside_groups);
            let gram_in = a_in.transpose() * &a_in;
            let pinv = gram_in.clone().try_inverse().unwrap() * a_in.transpose();
            let rho_star = rho_c_oracle(&(&pinv * &a_bar), &s_in, &s_bar);
            let rho_circ = rho_c_oracle(&(a_out.transpose() * &a_bar), &s_out, &s_bar);
            let rho_oi = rho_c_oracle(&(a_out.transpose() * &a_in), &s_out, &s_in);
            let rho_od = rho_c_oracle(&(a_out.transpose() * &a_dl), &s_out, &s_dl);
            let sigma = gram_in.symmetric_eigenvalues().min();
            let block_max = |cols: &[usize], sizes: &[usize]| {
                let mut at = 0;
                sizes
                    .iter()
                    .map(|&g| {
                        let v: f64 = cols[at..at + g].iter().map(|&k| ctx.coeffs[k].powi(2)).sum();
                        at += g;
                        v.sqrt()
                    })
                    .fold(0.0, f64::max)
            };
            let n_in = block_max(&c_in, &s_in);
            let n_out = block_max(&c_out, &s_out);
            let tol = |v: f64| 1e-8 * (1.0 + v.abs());
            assert!((t.rho_star - rho_star).abs() < tol(rho_star));
            assert!((t.rho_circ - rho_circ).abs() < tol(rho_circ));
            assert!((t.rho_out_in - rho_oi).abs() < tol(rho_oi));
            assert!((t.rho_out_delta - rho_od).abs() < tol(rho_od));
            assert!((t.sigma_min - sigma).abs() < tol(sigma));
            assert!((t.norm_in - n_in).abs() < tol(n_in));
            assert!((t.norm_out - n_out).abs() < tol(n_out));
            if let (Some(gs), Some(gc)) = (t.g_star, t.g_circ) {
                let ratio = n_out / n_in;
                let root = (rho_oi + rho_od).sqrt();
                let (os, oc) = if ratio == 0.0 {
                    (rho_star, 0.0)
                } else {
                    (
                        rho_star / (1.0 - root * ratio / sigma),
                        rho_circ / (sigma / ratio - root),
                    )
                };
                assert!((gs - os).abs() < tol(os), "{gs} vs {os}");
                assert!((gc - oc).abs() < tol(oc), "{gc} vs {oc}");
            }
            steps += 1;
        }
    }
    assert!(steps > 50, "{steps}");
}

#[test]
fn optimal_structure_collapses_to_rho_star() {
    let s = make_structure(&[5, 4], 1, &[1, 3]).unwrap();
    for seed in 0..10 {
        let d = normalized(30, 20, seed);
        let x = sample_signal(&s, SignalDist::Gaussian, seed);
        let y = &d * x.vector();
        let rep = erc_certify(&d, &y, &s, &PriorSupport::empty(2), &x, &ErcOptions::default()).unwrap();
        for rec in &rep.steps {
            let t = rec.theorem1.as_ref().unwrap();
            assert_eq!(t.norm_out, 0.0);
            assert_eq!(t.g_star, Some(t.rho_star));
            assert_eq!(t.g_circ, Some(0.0));
        }
    }
}

#[test]
fn certified_runs_recover_exactly() {
    let mut certified = 0;
    for i in 0..300u64 {
        let Some(c) = erc_case(i) else { continue };
        let rep = erc_certify(&c.d, &c.y, &c.s, &c.psi, &c.x, &ErcOptions::default()).unwrap();
        if rep.verdict == Verdict::Certified {
            assert!(rep.exact_support, "case {i}");
            certified += 1;
        }
    }
    assert!(certified >= 20, "{certified}");
}

#[test]
fn sampled_coherence_is_refused() {
    let c = erc_case(3).unwrap();
    let opts = ErcOptions {
        strategy: Some(CoherenceStrategy::Sampled { count: 10, seed: 1 }),
        ..Default::default()
    };
    assert!(matches!(
        erc_certify(&c.d, &c.y, &c.s, &c.psi, &c.x, &opts),
        Err(Error::SampledCoherence(_))
    ));
    let opts = ErcOptions {
        allow_sampled: true,
        ..opts
    };
    let rep = erc_certify(&c.d, &c.y, &c.s, &c.psi, &c.x, &opts).unwrap();
    assert!(rep.sampled_override);
    assert!(rep.coherence_verdict.is_some());
}

#[test]
fn premise_failures_never_certify() {
    for i in 0..60u64 {
        let Some(c) = erc_case(i) else { continue };
        let opts = ErcOptions {
            strategy: Some(CoherenceStrategy::exact()),
            ..Default::default()
        };
        let rep = erc_certify(&c.d, &c.y, &c.s, &c.psi, &c.x, &opts).unwrap();
        for rec in &rep.steps {
            if let Some(t2) = &rec.theorem2 {
                if !t2.premises_hold {
                    assert_eq!(rec.coherence_verdict, Some(Verdict::PremiseFailed));
                    assert!(t2.gbar_sum.is_none());
                }
            }
            if rec.theorem1.as_ref().is_some_and(|t| !t.premise_ok) {
                assert_eq!(rec.verdict, Verdict::PremiseFailed);
            }
        }
        if rep.steps.iter().any(|r| r.verdict == Verdict::PremiseFailed) {
            assert_eq!(rep.verdict, Verdict::PremiseFailed);
        }
    }
}

fn zero_profile(unit: usize, ctx: &hiblk::StepContext) -> CoherenceProfile {
    use hiblk::coherence::NuEntry;
    let mut mu_hier = Vec::new();
    let mut nu_hier = Vec::new();
    for len in [ctx.d_in, ctx.d_circ] {
        mu_hier.push(hiblk::HierEstimate {
            d_star: len,
            value: 0.0,
            strategy: CoherenceStrategy::exact(),
            lower_bound: false,
        });
        nu_hier.push(NuEntry {
            d_star: len,
            mode_block: ctx.mode_block,
            value: 0.0,
        });
    }
    CoherenceProfile {
        unit_block: unit,
        mu: 0.0,
        mu_block: 0.0,
        nu_sub: 0.0,
        mu_hier,
        nu_hier,
    }
}

#[test]
fn noisy_conditions_limits() {
    let mut seen = 0;
    for i in 0..40u64 {
        let Some(c) = erc_case(i) else { continue };
        let rep = erc_certify(&c.d, &c.y, &c.s, &c.psi, &c.x, &ErcOptions::default()).unwrap();
        for ctx in rep.steps.iter().filter_map(|r| r.context.as_ref()) {
            if ctx.in_groups.is_empty() {
                continue;
            }
            let t2 = theorem2_terms(ctx, &zero_profile(c.s.unit_block(), ctx), false).unwrap();
            assert!(t2.premises_hold);
            assert_eq!(t2.delta.sigma_min, 1.0);

            // ε = 0: every right side vanishes.
            let zero = DVector::zeros(c.d.nrows());
            let nv = noisy_conditions(&c.d, ctx, &t2, 0.0, Some(&zero)).unwrap();
            assert!(nv.premise_ok);
            assert!(nv.thm5_holds && nv.coro3_holds && nv.thm4_holds == Some(true));

            // μ, ν → 0: Corollary 3 reads ‖x_in‖₂ > 2√(k d̄)·ε.
            let (cols, _) = ctx.columns(&ctx.in_groups);
            let l2 = ctx.coeffs_at(&cols).iter().map(|v| v * v).sum::<f64>().sqrt();
            let k = ctx.k_in() as f64;
            for eps in [0.01, 0.1, 0.5, 2.0] {
                let nv = noisy_conditions(&c.d, ctx, &t2, eps, None).unwrap();
                assert_eq!(nv.coro3_holds, l2 > 2.0 * (k * ctx.d_bar as f64).sqrt() * eps);
            }
            seen += 1;
        }
    }
    assert!(seen > 50);
}

#[test]
fn inequality_examples() {
    let ones = Instance::Matrix {
        a: DMatrix::from_element(2, 2, 1.0),
        row_block: 1,
        col_block: 1,
    };
    let o = verify_inequality(InequalityKind::Lemma1, &ones).unwrap();
    assert!(o.holds && o.premise_ok);
    assert_relative_eq!(o.lhs, 2.0, epsilon = 1e-12);
    assert_relative_eq!(o.rhs, 2.0, epsilon = 1e-12);

    let eye = Instance::Blocks {
        a: DMatrix::identity(8, 8),
        d: 2,
        xi: vec![0, 2],
        theta: vec![],
        x: vec![],
    };
    let o = verify_inequality(InequalityKind::Lemma7, &eye).unwrap();
    assert!(o.holds && o.premise_ok);
    assert_relative_eq!(o.lhs, 1.0, epsilon = 1e-12);
    assert_relative_eq!(o.rhs, 1.0, epsilon = 1e-12);

    assert!(matches!(
        verify_inequality(InequalityKind::Lemma3Matrix, &ones),
        Err(Error::Domain(_))
    ));
}

#[test]
fn lemma8_against_eigensolve() {
    use hiblk::certificates::random_instance;
    use hiblk::coherence::{block_coherence, sub_coherence};
    let mut premise = 0;
    for seed in 0..100 {
        let inst = random_instance(InequalityKind::Lemma8, seed);
        let o = verify_inequality(InequalityKind::Lemma8, &inst).unwrap();
        if !o.premise_ok {
            continue;
        }
        premise += 1;
        let Instance::Blocks { a, d, xi, theta, .. } = &inst else {
            panic!("shape")
        };
        let d = *d;
        let nu = sub_coherence(a, d).unwrap();
        let mu = block_coherence(a, d).unwrap();
        let (s, r) = (xi.len() as f64, theta.len() as f64);
        let df = d as f64;
        let sum_s = (df - 1.0) * nu + (s - 1.0) * df * mu;
        let sum_r = (df - 1.0) * nu + (r - 1.0) * df * mu;
        let lower = 1.0 - sum_s - (df * mu).powi(2) * r * s / (1.0 - sum_r);
        let upper = 1.0 + sum_s;

        let cols = |u: &[usize]| -> Vec<usize> { u.iter().flat_map(|&b| b * d..(b + 1) * d).collect() };
        let c = select_cols(a, &cols(theta));
        let x = select_cols(a, &cols(xi));
        let px = if c.ncols() == 0 {
            x
        } else {
            let inv = (c.transpose() * &c).try_inverse().unwrap();
            &x - &c * (inv * (c.transpose() * &x))
        };
        let eig = (px.transpose() * px).symmetric_eigenvalues();
        assert!(eig.min() >= lower - 1e-9, "seed {seed}: {} < {lower}", eig.min());
        assert!(eig.max() <= upper + 1e-9, "seed {seed}: {} > {upper}", eig.max());
        assert!(o.holds);
    }
    assert!(premise > 20, "{premise}");
}
