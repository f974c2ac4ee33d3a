//! Closed-form sparsity bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonzero_len(name: &str, v: usize) -> Result<f64> {
    if v == 0 {
        Err(Error::Domain(format!("{name} must be at least 1")))
    } else {
        Ok(v as f64)
    }
}

fn ceil_ratio(a: usize, b: usize) -> f64 {
    a.div_ceil(b) as f64
}

/// Largest `k ≥ 0` with `k·unit < bound`.
pub fn largest_sparsity_below(bound: f64, unit: usize) -> usize {
    if !(bound > 0.0) || unit == 0 {
        return 0;
    }
    let mut k = (bound / unit as f64).floor() as usize;
    while k > 0 && (k * unit) as f64 >= bound {
        k -= 1;
    }
    k
}

/// OMP: `K < ½(1/μ + 1)`.
pub fn k_tropp(mu: f64) -> Result<f64> {
    Ok(0.5 * (1.0 / positive("μ", mu)? + 1.0))
}

/// BOMP: `kd < ½(1/μ_B + d − (d−1)ν/μ_B)`.
pub fn k_eldar(mu_b: f64, d: usize, nu: f64) -> Result<f64> {
    let mu_b = positive("μ_B", mu_b)?;
    let d = nonzero_len("d", d)?;
    Ok(0.5 * (1.0 / mu_b + d - (d - 1.0) * nu / mu_b))
}

/// BOMP with `ν = 0`: `K̄ = ½(1/μ_B + d)`.
pub fn k_bar(mu_b: f64, d: usize) -> Result<f64> {
    k_eldar(mu_b, d, 0.0)
}

/// OMP with `g` good and `b` bad known indices: `K < ½(1/μ + g − b + 1)`.
pub fn k_herzet(mu: f64, g: usize, b: usize) -> Result<f64> {
    Ok(0.5 * (1.0 / positive("μ", mu)? + g as f64 - b as f64 + 1.0))
}

/// `K* = k_0…k_{t−1}·((1/μ)(1 − (d*−1)ν) + d*) / (1 + ⌈d^Δ/d*⌉)`, bounding `k d*`.
pub fn k_star_kxing(prefix: usize, mu: f64, nu: f64, d_star: usize, d_delta: usize) -> Result<f64> {
    let mu = positive("μ_{d*}", mu)?;
    let ds = nonzero_len("d*", d_star)?;
    Ok(prefix as f64 * ((1.0 - (ds - 1.0) * nu) / mu + ds) / (1.0 + ceil_ratio(d_delta, d_star)))
}

/// Bound on `k_t(d*+d^Δ)` without prior support:
/// `(1/μ − (D−1)ν/μ + D) / (⌈d̄/D⌉ + 1)` with `D = d*+d^Δ`.
pub fn corollary4_bound(mu: f64, nu: f64, d_sum: usize, d_bar: usize) -> Result<f64> {
    let mu = positive("μ_D", mu)?;
    let dsum = nonzero_len("d*+d^Δ", d_sum)?;
    Ok((1.0 / mu - (dsum - 1.0) * nu / mu + dsum) / (ceil_ratio(d_bar, d_sum) + 1.0))
}

/// [`corollary4_bound`] scaled by the sparsity prefix `k_0…k_{t−1}`.
pub fn true_sparsity_bound(prefix: usize, mu: f64, nu: f64, d_sum: usize, d_bar: usize) -> Result<f64> {
    Ok(prefix as f64 * corollary4_bound(mu, nu, d_sum, d_bar)?)
}

/// `K̄*`: the true sparsity bound with `ν = 0`.
pub fn k_bar_star(prefix: usize, mu: f64, d_sum: usize, d_bar: usize) -> Result<f64> {
    true_sparsity_bound(prefix, mu, 0.0, d_sum, d_bar)
}

/// `K̄*∘`: `ν` set to `√((1−ω)/(M(1−1/N)))`, `ω = M/N`.
pub fn k_bar_star_circ(prefix: usize, mu: f64, d_sum: usize, d_bar: usize, m: usize, n: usize) -> Result<f64> {
    if m == 0 || n < 2 || m > n {
        return Err(Error::Domain(format!("need 1 ≤ M ≤ N and N ≥ 2, got M={m}, N={n}")));
    }
    let (mf, nf) = (m as f64, n as f64);
    let omega = mf / nf;
    let nu = ((1.0 - omega) / (mf * (1.0 - 1.0 / nf))).sqrt();
    true_sparsity_bound(prefix, mu, nu, d_sum, d_bar)
}

/// Limit of `K̄*∘` as `N → ∞` at fixed `ω`: `ν = √((1−ω)/M)`.
pub fn k_bar_star_circ_limit(prefix: usize, mu: f64, d_sum: usize, d_bar: usize, m: usize, omega: f64) -> Result<f64> {
    if m == 0 || !(0.0..=1.0).contains(&omega) {
        return Err(Error::Domain(format!("need M ≥ 1 and 0 ≤ ω ≤ 1, got M={m}, ω={omega}")));
    }
    let nu = ((1.0 - omega) / m as f64).sqrt();
    true_sparsity_bound(prefix, mu, nu, d_sum, d_bar)
}

/// Bound on `k_t(d*+d^{*Δ})` for the optimal structure with `r` known unit
/// blocks and `ᾱ` known whole blocks.
pub fn theorem7_bound(
    mu: f64,
    nu: f64,
    d_sum: usize,
    d_bar: usize,
    r_units: usize,
    d: usize,
    alpha_bar: usize,
) -> Result<f64> {
    let mu = positive("μ_D", mu)?;
    let dsum = nonzero_len("d*+d^{*Δ}", d_sum)?;
    let c_r = ceil_ratio(r_units * d, d_sum);
    let den1 = 1.0 - (dsum - 1.0) * nu - (c_r - 1.0) * dsum * mu;
    if !(den1 > 0.0) {
        return Err(Error::Domain(format!(
            "(D−1)ν + (⌈rd/D⌉−1)Dμ < 1 fails: 1 − that sum is {den1}"
        )));
    }
    let num = 1.0 / mu - (dsum - 1.0) * nu / mu + dsum;
    let scale = (1.0 - (dsum - 1.0) * nu + dsum * mu) / den1;
    Ok(num / ((ceil_ratio(d_bar, d_sum) + 1.0) * scale) + alpha_bar as f64 * dsum)
}

/// Largest `μ_n` for which the last-mode condition with `d = 1` holds:
/// `1 / (2k_n − ᾱ + β − 1)`.
pub fn mu_n_threshold(k_n: usize, alpha_bar: usize, beta: usize) -> Result<f64> {
    let den = 2.0 * k_n as f64 - alpha_bar as f64 + beta as f64 - 1.0;
    if !(den > 0.0) {
        return Err(Error::Domain(format!("2k_n − ᾱ + β − 1 must be positive, got {den}")));
    }
    Ok(1.0 / den)
}

/// Inputs of the `r = 0`, `ν = 0` quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Remark5Inputs {
    /// `μ_{d*+d^{*Δ}}`.
    pub mu_in: f64,
    pub mu_b: f64,
    /// `μ_{d°}`.
    pub mu_circ: f64,
    pub d_in: usize,
    pub d_delta: usize,
    pub d_bar: usize,
    pub d_circ: usize,
    pub k_circ: usize,
    /// `‖x_in‖_{(d*+d^{*Δ})2,∞}`.
    pub norm_in: f64,
    /// `‖x_out‖_{(d°)2,∞}`.
    pub norm_out: f64,
}

/// Quadratic in `δ'σmin` and the resulting sparsity bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Remark5 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub discriminant: f64,
    pub delta_circ_in: f64,
    pub delta_circ_delta: f64,
    pub delta_circ_bar: f64,
    /// `δ̲'σmin = (−B − √(B²−4AC)) / 2A`.
    pub delta_lower: f64,
    /// `K*` bounding `k_t(d*+d^{*Δ})` with `μ_{d*+d^{*Δ}}`.
    pub k_star_hier: f64,
    /// The same with `μ_B` substituted.
    pub k_star_block: f64,
}

/// Solves the `r = 0`, `ν = 0` condition for a lower bound on `δ'σmin`.
/// Requires `d̄` to be a multiple of `d*+d^{*Δ}` and nonzero outside norm.
pub fn remark5(inp: &Remark5Inputs) -> Result<Remark5> {
    let dh = nonzero_len("d*+d^{*Δ}", inp.d_in)?;
    if !inp.d_bar.is_multiple_of(inp.d_in) {
        return Err(Error::Domain(format!(
            "d̄ = {} is not a multiple of d*+d^{{*Δ}} = {}",
            inp.d_bar, inp.d_in
        )));
    }
    let dc = nonzero_len("d°", inp.d_circ)?;
    let mu_in = positive("μ_{d*+d^{*Δ}}", inp.mu_in)?;
    let mu_b = positive("μ_B", inp.mu_b)?;
    let ratio = positive("‖x_in‖", inp.norm_in)? / positive("‖x_out‖", inp.norm_out)?;
    let q = inp.d_bar as f64 / dh;
    let dbar = inp.d_bar as f64;
    let core = inp.k_circ as f64 * dc * inp.mu_circ;
    let circ_in = ceil_ratio(inp.d_in, inp.d_circ) * core;
    let circ_delta = ceil_ratio(inp.d_delta, inp.d_circ) * core;
    let circ_bar = ceil_ratio(inp.d_bar, inp.d_circ) * core;
    let sum = circ_in + circ_delta;
    let root = sum.sqrt();

    let a = -ratio * (q + 1.0);
    let b = q * root + (q + dbar * mu_in) * ratio + circ_bar + 2.0 * root;
    let c = -(q + dbar * mu_in) * root - circ_bar * root / ratio - sum / ratio;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::Domain(format!("negative discriminant {disc}")));
    }
    let delta_lower = (-b - disc.sqrt()) / (2.0 * a);
    Ok(Remark5 {
        a,
        b,
        c,
        discriminant: disc,
        delta_circ_in: circ_in,
        delta_circ_delta: circ_delta,
        delta_circ_bar: circ_bar,
        delta_lower,
        k_star_hier: dh + (1.0 - delta_lower) / mu_in,
        k_star_block: dh + (1.0 - delta_lower) / mu_b,
    })
}

/// Optional parameters for [`sparsity_bounds`]; each bound is evaluated
/// when its inputs are present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundParams {
    pub mu: Option<f64>,
    pub mu_b: Option<f64>,
    pub nu: Option<f64>,
    /// `μ_{d*}` (or `μ_{d*+d^Δ}` for the sums below).
    pub mu_hier: Option<f64>,
    pub nu_hier: Option<f64>,
    pub d: Option<usize>,
    pub d_star: Option<usize>,
    pub d_delta: Option<usize>,
    pub d_star_delta: Option<usize>,
    pub d_bar: Option<usize>,
    /// `k_0 … k_{t−1}`.
    pub prefix: Option<usize>,
    pub alpha_bar: Option<usize>,
    pub beta: Option<usize>,
    pub k_n: Option<usize>,
    pub r_units: Option<usize>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub omega: Option<f64>,
    pub herzet_good: Option<usize>,
    pub herzet_bad: Option<usize>,
    pub remark5: Option<Remark5Inputs>,
}

/// Every bound that the supplied parameters allow.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub k_star_kxing: Option<f64>,
    pub k_star_rmk11: Option<f64>,
    pub k_eldar: Option<f64>,
    pub k_tropp: Option<f64>,
    pub k_herzet: Option<f64>,
    pub k_bar: Option<f64>,
    pub k_bar_star: Option<f64>,
    pub k_bar_star_circ: Option<f64>,
    pub k_bar_star_circ_limit: Option<f64>,
    pub corollary4: Option<f64>,
    pub true_sparsity: Option<f64>,
    pub theorem7: Option<f64>,
    pub mu_n_threshold: Option<f64>,
    pub remark5: Option<Remark5>,
    /// Formula-domain failures, one line per skipped bound.
    pub errors: Vec<String>,
}

/// Evaluates the closed-form bounds.
pub fn sparsity_bounds(p: &BoundParams) -> BoundSet {
    let mut out = BoundSet::default();
    let mut errors = Vec::new();
    let mut keep = |name: &str, r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{name}: {e}"));
            None
        }
    };
    let prefix = p.prefix.unwrap_or(1);
    let d_sum = match (p.d_star, p.d_delta, p.d_star_delta) {
        (Some(a), b, c) => Some(a + b.unwrap_or(0) + c.unwrap_or(0)),
        _ => None,
    };
    if let Some(mu) = p.mu {
        out.k_tropp = keep("k_tropp", k_tropp(mu));
        if let (Some(g), Some(b)) = (p.herzet_good, p.herzet_bad) {
            out.k_herzet = keep("k_herzet", k_herzet(mu, g, b));
        }
    }
    if let (Some(mu_b), Some(d)) = (p.mu_b, p.d) {
        out.k_eldar = keep("k_eldar", k_eldar(mu_b, d, p.nu.unwrap_or(0.0)));
        out.k_bar = keep("k_bar", k_bar(mu_b, d));
    }
    if let (Some(mu), Some(ds)) = (p.mu_hier, p.d_star) {
        let nu = p.nu_hier.unwrap_or(0.0);
        out.k_star_kxing = keep("k_star_kxing", k_star_kxing(prefix, mu, nu, ds, p.d_delta.unwrap_or(0)));
    }
    if let (Some(mu), Some(ds), Some(db)) = (p.mu_hier, d_sum, p.d_bar) {
        let nu = p.nu_hier.unwrap_or(0.0);
        out.corollary4 = keep("corollary4", corollary4_bound(mu, nu, ds, db));
        out.true_sparsity = keep("true_sparsity", true_sparsity_bound(prefix, mu, nu, ds, db));
        out.k_bar_star = keep("k_bar_star", k_bar_star(prefix, mu, ds, db));
        if let (Some(m), Some(n)) = (p.m, p.n) {
            out.k_bar_star_circ = keep("k_bar_star_circ", k_bar_star_circ(prefix, mu, ds, db, m, n));
        }
        if let (Some(m), Some(w)) = (p.m, p.omega) {
            out.k_bar_star_circ_limit = keep("k_bar_star_circ_limit", k_bar_star_circ_limit(prefix, mu, ds, db, m, w));
        }
        if let Some(d) = p.d {
            out.theorem7 = keep(
                "theorem7",
                theorem7_bound(mu, nu, ds, db, p.r_units.unwrap_or(0), d, p.alpha_bar.unwrap_or(0)),
            );
        }
    }
    if let Some(k_n) = p.k_n {
        out.mu_n_threshold = keep(
            "mu_n_threshold",
            mu_n_threshold(k_n, p.alpha_bar.unwrap_or(0), p.beta.unwrap_or(0)),
        );
    }
    if let Some(inp) = &p.remark5 {
        match remark5(inp) {
            Ok(r) => {
                out.k_star_rmk11 = Some(r.k_star_block);
                out.remark5 = Some(r);
            }
            Err(e) => errors.push(format!("remark5: {e}")),
        }
    }
    out.errors = errors;
    out
}
