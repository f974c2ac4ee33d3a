use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::context::StepContext;
use super::Verdict;
use crate::coherence::CoherenceProfile;
use crate::error::{Error, Result};
use crate::linalg::{
    min_singular, mixed_norm_groups, mixed_norm_padded, pinv_full_col, rho_c_groups, select_cols, ComplementProjector,
    MixedP,
};

/// Instance condition of one step: `G★ + G∘ < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Terms {
    /// `ρ_c(Ä_in† Ä_bar)`.
    pub rho_star: f64,
    /// `ρ_c(Ä_outᴴ Ä_bar)`.
    pub rho_circ: f64,
    /// `ρ_c(Ä_outᴴ Ä_in)`.
    pub rho_out_in: f64,
    /// `ρ_c(Ä_outᴴ Ä_Δ)`.
    pub rho_out_delta: f64,
    /// `σ_min(Ä_inᴴ Ä_in)`.
    pub sigma_min: f64,
    pub norm_in: f64,
    pub norm_out: f64,
    pub g_star: Option<f64>,
    pub g_circ: Option<f64>,
    pub g_sum: Option<f64>,
    pub premise_ok: bool,
    pub verdict: Verdict,
}

impl Theorem1Terms {
    /// `(G★, G∘)` for the stored matrix terms and the given norms, or `None`
    /// when a denominator is not positive.
    pub fn evaluate(&self, norm_in: f64, norm_out: f64) -> Option<(f64, f64)> {
        if !(norm_in > 0.0) || !(self.sigma_min > 0.0) {
            return None;
        }
        let ratio = norm_out / norm_in;
        if ratio == 0.0 {
            return Some((self.rho_star, 0.0));
        }
        let root = (self.rho_out_in + self.rho_out_delta).sqrt();
        let den_star = 1.0 - root / self.sigma_min * ratio;
        let den_circ = self.sigma_min / ratio - root;
        if !(den_star > 0.0) || !(den_circ > 0.0) {
            return None;
        }
        Some((self.rho_star / den_star, self.rho_circ / den_circ))
    }

    fn finish(mut self) -> Self {
        match self.evaluate(self.norm_in, self.norm_out) {
            Some((gs, gc)) => {
                self.g_star = Some(gs);
                self.g_circ = Some(gc);
                self.g_sum = Some(gs + gc);
                self.premise_ok = true;
                self.verdict = if gs + gc < 1.0 {
                    Verdict::Certified
                } else {
                    Verdict::Violated
                };
            }
            None => {
                self.premise_ok = false;
                self.verdict = Verdict::PremiseFailed;
            }
        }
        self
    }
}

pub(super) fn step_norms(ctx: &StepContext) -> Result<(f64, f64)> {
    let (in_cols, in_sizes) = ctx.columns(&ctx.in_groups);
    let (out_cols, out_sizes) = ctx.columns(&ctx.outside_groups);
    Ok((
        mixed_norm_groups(&ctx.coeffs_at(&in_cols), &in_sizes, MixedP::Inf)?,
        mixed_norm_groups(&ctx.coeffs_at(&out_cols), &out_sizes, MixedP::Inf)?,
    ))
}

fn rho_or_zero(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0.0);
    }
    rho_c_groups(a, rows, cols)
}

/// Evaluates `G★` and `G∘` for one step. Fails when the conditioning set or
/// the in-group columns are rank deficient after projection.
pub fn theorem1_terms(d: &DMatrix<f64>, ctx: &StepContext) -> Result<Theorem1Terms> {
    let proj = ComplementProjector::new(&select_cols(d, &ctx.conditioning))?;
    let projected = |groups: &[Vec<usize>]| {
        let (cols, sizes) = ctx.columns(groups);
        (proj.apply_mat(&select_cols(d, &cols)), sizes)
    };
    let (norm_in, norm_out) = step_norms(ctx)?;
    let empty = Theorem1Terms {
        rho_star: 0.0,
        rho_circ: 0.0,
        rho_out_in: 0.0,
        rho_out_delta: 0.0,
        sigma_min: 0.0,
        norm_in,
        norm_out,
        g_star: None,
        g_circ: None,
        g_sum: None,
        premise_ok: false,
        verdict: Verdict::PremiseFailed,
    };
    if ctx.in_groups.is_empty() {
        return Ok(empty);
    }
    let (a_in, in_sizes) = projected(&ctx.in_groups);
    let (a_bar, bar_sizes) = projected(&ctx.bar_groups);
    let (a_delta, delta_sizes) = projected(&ctx.delta_groups);
    let (a_out, out_sizes) = projected(&ctx.outside_groups);

    let pinv = pinv_full_col(&a_in)?;
    let sigma_min = min_singular(&a_in.tr_mul(&a_in))?;
    let terms = Theorem1Terms {
        rho_star: rho_or_zero(&(&pinv * &a_bar), &in_sizes, &bar_sizes)?,
        rho_circ: rho_or_zero(&a_out.tr_mul(&a_bar), &out_sizes, &bar_sizes)?,
        rho_out_in: rho_or_zero(&a_out.tr_mul(&a_in), &out_sizes, &in_sizes)?,
        rho_out_delta: rho_or_zero(&a_out.tr_mul(&a_delta), &out_sizes, &delta_sizes)?,
        sigma_min,
        ..empty
    };
    Ok(terms.finish())
}

/// Scalar inputs of the coherence-based condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Inputs {
    /// Unit block length `d`.
    pub unit_block: usize,
    /// In-group length `d* + d^{*Δ}`.
    pub d_in: usize,
    pub d_delta: usize,
    pub d_bar: usize,
    pub d_circ: usize,
    /// Number of in-groups, standing in for `k_t − ᾱ`.
    pub k_in: usize,
    pub k_circ: usize,
    pub gamma: usize,
    /// Conditioning set size `r` in unit blocks.
    pub r_units: usize,
    pub mu_in: f64,
    pub nu_in: f64,
    pub mu_circ: f64,
    pub nu_circ: f64,
    pub norm_in: f64,
    pub norm_out: f64,
}

/// The five δ parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaParams {
    /// `δ_{d*+d^{*Δ}, d̄}`.
    pub in_bar: f64,
    /// `δ_{d°, d*+d^{*Δ}}`.
    pub circ_in: f64,
    /// `δ_{d°, d^Δ}`.
    pub circ_delta: f64,
    /// `δ_{d°, d̄}`.
    pub circ_bar: f64,
    /// `δ_{σmin}`.
    pub sigma_min: f64,
}

/// Coherence-based condition `Ḡ★ + Ḡ∘ < 1` of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Terms {
    pub inputs: Theorem2Inputs,
    pub delta: DeltaParams,
    /// `(d̂−1)ν + (⌈rd/d̂⌉−1)d̂μ < 1`.
    pub premise_conditioning: bool,
    /// `(d̂−1)ν + (k−1)d̂μ < 1`.
    pub premise_sparsity: bool,
    /// `(d°−1)ν° + (⌈rd/d°⌉−1)d°μ° < 1`.
    pub premise_outside: bool,
    pub premises_hold: bool,
    pub gbar_star: Option<f64>,
    pub gbar_circ: Option<f64>,
    pub gbar_sum: Option<f64>,
    pub verdict: Verdict,
}

fn ceil_div(a: usize, b: usize) -> f64 {
    a.div_ceil(b) as f64
}

/// Evaluates the δ parameters and `Ḡ★`, `Ḡ∘` from scalar inputs.
pub fn theorem2_eval(inp: &Theorem2Inputs) -> Theorem2Terms {
    let rd = inp.r_units * inp.unit_block;
    let mut out = Theorem2Terms {
        inputs: *inp,
        delta: DeltaParams::default(),
        premise_conditioning: false,
        premise_sparsity: false,
        premise_outside: false,
        premises_hold: false,
        gbar_star: None,
        gbar_circ: None,
        gbar_sum: None,
        verdict: Verdict::PremiseFailed,
    };
    if inp.d_in == 0 || inp.k_in == 0 {
        return out;
    }
    let dh = inp.d_in as f64;
    let (mu, nu) = (inp.mu_in, inp.nu_in);
    let k = inp.k_in as f64;
    let c_r = ceil_div(rd, inp.d_in);
    let den1 = 1.0 - (dh - 1.0) * nu - (c_r - 1.0) * dh * mu;
    out.premise_conditioning = den1 > 0.0;
    out.premise_sparsity = (dh - 1.0) * nu + (k - 1.0) * dh * mu < 1.0;
    let sigma = (1.0 - (dh - 1.0) * nu - (k - 1.0) * dh * mu) - dh * dh * mu * mu * c_r * k / den1;
    let cb = ceil_div(inp.d_bar, inp.d_in);
    let in_bar = (cb * k * dh * mu + k * dh * dh * mu * mu * cb * c_r / den1) / sigma;

    let (mut circ_in, mut circ_delta, mut circ_bar) = (0.0, 0.0, 0.0);
    out.premise_outside = true;
    if inp.k_circ > 0 {
        let dc = inp.d_circ.max(1);
        let dcf = dc as f64;
        let (muc, nuc) = (inp.mu_circ, inp.nu_circ);
        let c_rc = ceil_div(rd, dc);
        let den_c = 1.0 - (dcf - 1.0) * nuc - (c_rc - 1.0) * dcf * muc;
        out.premise_outside = den_c > 0.0;
        let kc = inp.k_circ as f64;
        let kc_known = inp.k_circ.saturating_sub(inp.gamma) as f64;
        let core = kc * dcf * muc + kc_known * dcf * dcf * muc * muc * c_rc / den_c;
        circ_in = ceil_div(inp.d_in, dc) * core;
        circ_delta = ceil_div(inp.d_delta, dc) * core;
        circ_bar = ceil_div(inp.d_bar, dc) * core;
    }
    out.delta = DeltaParams {
        in_bar,
        circ_in,
        circ_delta,
        circ_bar,
        sigma_min: sigma,
    };
    out.premises_hold = out.premise_conditioning && out.premise_sparsity && out.premise_outside && sigma > 0.0;
    if !out.premises_hold || !(inp.norm_in > 0.0) {
        return out;
    }
    let ratio = inp.norm_out / inp.norm_in;
    let root = (circ_in + circ_delta).sqrt();
    let (gs, gc) = if ratio == 0.0 {
        (in_bar, 0.0)
    } else {
        let den_star = 1.0 - root / sigma * ratio;
        let den_circ = sigma / ratio - root;
        if !(den_star > 0.0) || !(den_circ > 0.0) {
            return out;
        }
        (in_bar / den_star, circ_bar / den_circ)
    };
    out.gbar_star = Some(gs);
    out.gbar_circ = Some(gc);
    out.gbar_sum = Some(gs + gc);
    out.verdict = if gs + gc < 1.0 {
        Verdict::Certified
    } else {
        Verdict::Violated
    };
    out
}

fn lookup(profile: &CoherenceProfile, len: usize, mode_block: usize, allow_sampled: bool) -> Result<(f64, f64)> {
    let mu = profile
        .mu_hier_at(len)
        .ok_or_else(|| Error::Domain(format!("coherence profile lacks μ for block length {len}")))?;
    if mu.lower_bound && !allow_sampled {
        return Err(Error::SampledCoherence(len));
    }
    let nu = profile.nu_hier_at(len, mode_block).ok_or_else(|| {
        Error::Domain(format!(
            "coherence profile lacks ν for block length {len} in mode blocks of {mode_block}"
        ))
    })?;
    Ok((mu.value, nu))
}

/// Gathers the scalar inputs of one step from its context and a profile.
pub fn theorem2_inputs(ctx: &StepContext, profile: &CoherenceProfile, allow_sampled: bool) -> Result<Theorem2Inputs> {
    let (norm_in, norm_out) = step_norms(ctx)?;
    let (mu_in, nu_in) = if ctx.d_in > 0 {
        lookup(profile, ctx.d_in, ctx.mode_block, allow_sampled)?
    } else {
        (0.0, 0.0)
    };
    let (mu_circ, nu_circ) = if ctx.k_circ() > 0 {
        lookup(profile, ctx.d_circ, ctx.mode_block, allow_sampled)?
    } else {
        (0.0, 0.0)
    };
    Ok(Theorem2Inputs {
        unit_block: ctx.unit_block,
        d_in: ctx.d_in,
        d_delta: ctx.d_delta,
        d_bar: ctx.d_bar,
        d_circ: ctx.d_circ,
        k_in: ctx.k_in(),
        k_circ: ctx.k_circ(),
        gamma: ctx.gamma,
        r_units: ctx.r_units,
        mu_in,
        nu_in,
        mu_circ,
        nu_circ,
        norm_in,
        norm_out,
    })
}

/// Coherence-based condition for one step. Sampled coherences are refused
/// unless `allow_sampled` is set.
pub fn theorem2_terms(ctx: &StepContext, profile: &CoherenceProfile, allow_sampled: bool) -> Result<Theorem2Terms> {
    Ok(theorem2_eval(&theorem2_inputs(ctx, profile, allow_sampled)?))
}

/// Noisy per-step conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyVerdict {
    /// Coherence premises hold and `Ḡ★ + Ḡ∘ < 1`.
    pub premise_ok: bool,
    pub lhs: f64,
    /// Right side using the actual noise vector, when supplied.
    pub rhs_noise: Option<f64>,
    /// Right side using the `√d̄·ε` bound.
    pub rhs_eps: f64,
    pub lhs_l2: f64,
    pub thm4_holds: Option<bool>,
    pub thm5_holds: bool,
    pub coro3_holds: bool,
}

/// Evaluates the noisy selection conditions of one step.
pub fn noisy_conditions(
    d: &DMatrix<f64>,
    ctx: &StepContext,
    t2: &Theorem2Terms,
    eps: f64,
    noise: Option<&DVector<f64>>,
) -> Result<NoisyVerdict> {
    let mut out = NoisyVerdict {
        premise_ok: false,
        lhs: 0.0,
        rhs_noise: None,
        rhs_eps: f64::INFINITY,
        lhs_l2: 0.0,
        thm4_holds: None,
        thm5_holds: false,
        coro3_holds: false,
    };
    let Some(g) = t2.gbar_sum else {
        return Ok(out);
    };
    if !t2.premises_hold || g >= 1.0 {
        return Ok(out);
    }
    out.premise_ok = true;
    let dp = &t2.delta;
    let root = (dp.circ_in + dp.circ_delta).sqrt();
    let (in_cols, _) = ctx.columns(&ctx.in_groups);
    let (out_cols, _) = ctx.columns(&ctx.outside_groups);
    let z_in = ctx.coeffs_at(&in_cols);
    let z_out = ctx.coeffs_at(&out_cols);
    let wide = (ctx.d_in + ctx.d_delta).max(1);
    out.lhs = dp.sigma_min * t2.inputs.norm_in - root * mixed_norm_padded(&z_out, wide, MixedP::Inf);
    let l2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    out.lhs_l2 = dp.sigma_min * l2(&z_in) / (ctx.k_in() as f64).sqrt() - root * l2(&z_out);
    out.rhs_eps = 2.0 * (ctx.d_bar as f64).sqrt() * eps / (1.0 - g);
    out.thm5_holds = out.lhs > out.rhs_eps;
    out.coro3_holds = out.lhs_l2 > out.rhs_eps;
    if let Some(n) = noise {
        let proj = ComplementProjector::new(&select_cols(d, &ctx.conditioning))?;
        let (bar_cols, bar_sizes) = ctx.columns(&ctx.bar_groups);
        let a_bar = proj.apply_mat(&select_cols(d, &bar_cols));
        let corr = a_bar.tr_mul(n);
        let peak = mixed_norm_groups(corr.as_slice(), &bar_sizes, MixedP::Inf)?;
        let rhs = 2.0 * peak / (1.0 - g);
        out.rhs_noise = Some(rhs);
        out.thm4_holds = Some(out.lhs > rhs);
    }
    Ok(out)
}
