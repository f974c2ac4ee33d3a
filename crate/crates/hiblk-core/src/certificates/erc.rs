use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::context::{step_context, StepContext};
use super::theorem::{noisy_conditions, theorem1_terms, theorem2_terms, NoisyVerdict, Theorem1Terms, Theorem2Terms};
use super::{CertificateReport, Verdict};
use crate::coherence::{coherence_profile, disjoint_pair_count, CoherenceProfile, CoherenceStrategy};
use crate::error::{Error, Result};
use crate::model::{HierSignal, HierStructure, PriorSupport};
use crate::recovery::{default_eps, hibomp_p_observed, StepView};

/// Knobs of [`erc_certify`].
#[derive(Debug, Clone, Default)]
pub struct ErcOptions {
    /// Enables the coherence-based condition at every step.
    pub profile: Option<CoherenceProfile>,
    /// Without a profile, computes the entries the run needs with this strategy.
    pub strategy: Option<CoherenceStrategy>,
    /// Accept sampled (lower-bound) coherences. Flagged in the report.
    pub allow_sampled: bool,
    /// Outside chunk length in coefficients.
    pub d_circ: Option<usize>,
    /// Stopping tolerance of the replayed run (default `1e-6‖y‖`).
    pub eps: Option<f64>,
    /// The noise realization, enabling the instance noisy condition.
    pub noise: Option<DVector<f64>>,
    /// Noise norm bound `ε` of the noisy conditions.
    pub noise_bound: f64,
}

/// Certificate data of one selection step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub mode: usize,
    pub parent: usize,
    pub chosen: usize,
    pub chosen_active: bool,
    /// Best inactive score over best active score.
    pub score_ratio: Option<f64>,
    pub theorem1: Option<Theorem1Terms>,
    pub theorem2: Option<Theorem2Terms>,
    pub noisy: Option<NoisyVerdict>,
    pub verdict: Verdict,
    pub coherence_verdict: Option<Verdict>,
    pub note: Option<String>,
    #[serde(skip)]
    pub context: Option<StepContext>,
}

fn score_ratio(view: &StepView, ctx: &StepContext) -> Option<f64> {
    let mut best_in: f64 = 0.0;
    let mut best_out: f64 = 0.0;
    for (&c, &sc) in view.candidates.iter().zip(view.scores) {
        if ctx.active_candidates.contains(&c) {
            best_in = best_in.max(sc);
        } else {
            best_out = best_out.max(sc);
        }
    }
    (best_in > 0.0).then(|| best_out / best_in)
}

fn record_step(
    d: &DMatrix<f64>,
    s: &HierStructure,
    view: &StepView,
    truth: &HierSignal,
    psi: &PriorSupport,
    opts: &ErcOptions,
) -> StepRecord {
    let ctx = step_context(s, view, truth, psi, opts.d_circ);
    let mut rec = StepRecord {
        mode: view.mode,
        parent: view.parent,
        chosen: view.chosen,
        chosen_active: ctx.chosen_active,
        score_ratio: score_ratio(view, &ctx),
        theorem1: None,
        theorem2: None,
        noisy: None,
        verdict: Verdict::PremiseFailed,
        coherence_verdict: None,
        note: None,
        context: None,
    };
    if ctx.active_candidates.is_empty() {
        rec.note = Some("no active candidate left in this block".into());
        rec.context = Some(ctx);
        return rec;
    }
    match theorem1_terms(d, &ctx) {
        Ok(t1) => {
            rec.verdict = t1.verdict;
            rec.theorem1 = Some(t1);
        }
        Err(e) => rec.note = Some(e.to_string()),
    }
    rec.context = Some(ctx);
    rec
}

fn add_coherence_terms(rec: &mut StepRecord, d: &DMatrix<f64>, profile: &CoherenceProfile, opts: &ErcOptions) {
    let Some(ctx) = rec.context.as_ref() else {
        return;
    };
    if ctx.active_candidates.is_empty() {
        rec.coherence_verdict = Some(Verdict::PremiseFailed);
        return;
    }
    match theorem2_terms(ctx, profile, opts.allow_sampled) {
        Ok(t2) => {
            rec.coherence_verdict = Some(t2.verdict);
            if opts.noise.is_some() || opts.noise_bound > 0.0 {
                match noisy_conditions(d, ctx, &t2, opts.noise_bound, opts.noise.as_ref()) {
                    Ok(nv) => rec.noisy = Some(nv),
                    Err(e) => rec.note = Some(e.to_string()),
                }
            }
            rec.theorem2 = Some(t2);
        }
        Err(e) => {
            rec.coherence_verdict = Some(Verdict::PremiseFailed);
            rec.note = Some(e.to_string());
        }
    }
}

/// The `μ_{d*}` and `ν_{d*}` entries the recorded steps look up.
fn needed_profile(
    d: &DMatrix<f64>,
    unit: usize,
    steps: &[StepRecord],
    strategy: CoherenceStrategy,
) -> Result<CoherenceProfile> {
    let units = d.ncols() / unit;
    let mut mus = Vec::new();
    let mut nus = Vec::new();
    for ctx in steps.iter().filter_map(|r| r.context.as_ref()) {
        let mut lens = vec![ctx.d_in];
        if ctx.k_circ() > 0 {
            lens.push(ctx.d_circ);
        }
        for len in lens {
            if len == 0 {
                continue;
            }
            if 2 * (len / unit) <= units && disjoint_pair_count(units, len / unit) > 0 {
                mus.push(len);
            }
            nus.push((len, ctx.mode_block));
        }
    }
    mus.sort_unstable();
    mus.dedup();
    nus.sort_unstable();
    nus.dedup();
    coherence_profile(d, unit, &mus, &nus, strategy)
}

/// Replays HiBOMP-P on `(d, y)` and evaluates the per-step recovery
/// conditions against the true signal `truth`.
pub fn erc_certify(
    d: &DMatrix<f64>,
    y: &DVector<f64>,
    s: &HierStructure,
    psi: &PriorSupport,
    truth: &HierSignal,
    opts: &ErcOptions,
) -> Result<CertificateReport> {
    if truth.coeffs.len() != s.ambient_dim() {
        return Err(Error::Dimension(format!(
            "signal has length {}, structure needs {}",
            truth.coeffs.len(),
            s.ambient_dim()
        )));
    }
    let mut sampled = false;
    if let Some(p) = &opts.profile {
        if let Some(e) = p.mu_hier.iter().find(|e| e.lower_bound) {
            if !opts.allow_sampled {
                return Err(Error::SampledCoherence(e.d_star));
            }
            sampled = true;
        }
    }
    let eps = opts.eps.unwrap_or_else(|| default_eps(y));
    let mut steps = Vec::new();
    let mut obs = |view: &StepView| steps.push(record_step(d, s, view, truth, psi, opts));
    let result = hibomp_p_observed(d, y, s, psi, eps, Some(&mut obs))?;
    let computed;
    let profile = match (&opts.profile, opts.strategy) {
        (Some(p), _) => Some(p),
        (None, Some(strategy)) => {
            if !strategy.is_exact() && !opts.allow_sampled {
                return Err(Error::SampledCoherence(0));
            }
            sampled |= !strategy.is_exact();
            computed = needed_profile(d, s.unit_block(), &steps, strategy)?;
            Some(&computed)
        }
        (None, None) => None,
    };
    if let Some(p) = profile {
        for rec in &mut steps {
            add_coherence_terms(rec, d, p, opts);
        }
    }
    let verdict = Verdict::combine(steps.iter().map(|r| r.verdict));
    let coherence_verdict = profile.map(|_| {
        Verdict::combine(
            steps
                .iter()
                .map(|r| r.coherence_verdict.unwrap_or(Verdict::PremiseFailed)),
        )
    });
    Ok(CertificateReport {
        steps,
        verdict,
        coherence_verdict,
        exact_support: result.support == truth.flat_support,
        recovered_support: result.support,
        true_support: truth.flat_support.clone(),
        sampled_override: sampled,
        bounds: None,
    })
}
