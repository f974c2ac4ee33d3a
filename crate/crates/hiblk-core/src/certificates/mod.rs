//! Numeric recovery certificates: per-step exact recovery conditions, their
//! coherence-based sufficient conditions, closed-form sparsity bounds, and
//! randomized checks of the supporting matrix inequalities.

mod bounds;
mod context;
mod erc;
mod inequalities;
mod theorem;

use serde::{Deserialize, Serialize};

pub use bounds::{
    corollary4_bound, k_bar, k_bar_star, k_bar_star_circ, k_bar_star_circ_limit, k_eldar, k_herzet, k_star_kxing,
    k_tropp, largest_sparsity_below, mu_n_threshold, remark5, sparsity_bounds, theorem7_bound, true_sparsity_bound,
    BoundParams, BoundSet, Remark5, Remark5Inputs,
};
pub use context::{step_context, StepContext};
pub use erc::{erc_certify, ErcOptions, StepRecord};
pub use inequalities::{
    random_instance, run_suite, verify_inequality, Counterexample, InequalityKind, InequalityOutcome, Instance,
    SuiteSummary, INEQ_TOL,
};
pub use theorem::{
    noisy_conditions, theorem1_terms, theorem2_eval, theorem2_inputs, theorem2_terms, DeltaParams, NoisyVerdict,
    Theorem1Terms, Theorem2Inputs, Theorem2Terms,
};

/// Outcome of evaluating one sufficient condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Violated,
    PremiseFailed,
}

impl Verdict {
    /// Folds per-step verdicts: any premise failure wins over a violation,
    /// and certification needs every step certified.
    pub fn combine(steps: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::Certified;
        for v in steps {
            match v {
                Verdict::PremiseFailed => return Verdict::PremiseFailed,
                Verdict::Violated => out = Verdict::Violated,
                Verdict::Certified => {}
            }
        }
        out
    }
}

/// Aggregated certificate for one recovery run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub steps: Vec<StepRecord>,
    /// Verdict of the instance condition over every step.
    pub verdict: Verdict,
    /// Verdict of the coherence-based condition, when a profile was supplied.
    pub coherence_verdict: Option<Verdict>,
    pub recovered_support: Vec<usize>,
    pub true_support: Vec<usize>,
    pub exact_support: bool,
    /// Set when sampled coherences were accepted through the override.
    pub sampled_override: bool,
    pub bounds: Option<BoundSet>,
}
