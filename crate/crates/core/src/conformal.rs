//! Conformal rescaling from Yang–Mills to Born–Infeld criticality.
//!
//! Given a connection and a metric `g` in dimension `n ≥ 5`, the field
//! `σ = Φ(½‖Rᴰ‖²_g)` solves `σ^((n−4)/2) = 1/√(1 + σ²‖Rᴰ‖²_g)` at every
//! site, and under `g̃ = σ⁻¹g` the Born–Infeld residual is
//! `σ^(n/2−1)` times the Yang–Mills residual under `g`, cell by cell. The
//! cancellation is exact on the lattice because σ, the cell weights, and the
//! pointwise norms are all anchored at the same base site.

use crate::calculus::{curvature, delta, Connection};
use crate::error::{Error, Result};
use crate::functional::{el_residual, Density};
use crate::lattice::{norm_form, pointwise_norm2_field, ConformalMetric, PForm};

/// `h(t) = √(1+2t) − 1`.
pub fn h(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("h(t) needs t >= 0, got {t}")));
    }
    Ok(2.0 * t / ((1.0 + 2.0 * t).sqrt() + 1.0))
}

/// `h′(t) = 1/√(1+2t)`.
pub fn h_prime(t: f64) -> f64 {
    1.0 / (1.0 + 2.0 * t).sqrt()
}

/// Inverse of `h′` on `(0, 1]`: `H(y) = (y⁻² − 1)/2`.
pub fn h_prime_inverse(y: f64) -> Result<f64> {
    if !(y > 0.0 && y <= 1.0) {
        return Err(Error::Domain(format!("H(y) needs y in (0, 1], got {y}")));
    }
    Ok(0.5 * (y.powi(-2) - 1.0))
}

fn check_dim(n: usize) -> Result<()> {
    if n < 5 {
        return Err(Error::Precondition(format!(
            "the conformal construction needs dimension n >= 5 (got n = {n}); \
             in n = 4 the Euler-Lagrange equations are conformally invariant"
        )));
    }
    Ok(())
}

/// `F(y) = H(y^((n−4)/2)) / y² = (y^(4−n) − 1)/(2y²)` on `(0, 1]`.
pub fn f_conf(y: f64, n: usize) -> Result<f64> {
    check_dim(n)?;
    if !(y > 0.0 && y <= 1.0) {
        return Err(Error::Domain(format!("F(y) needs y in (0, 1], got {y}")));
    }
    Ok(f_conf_raw(y, n))
}

#[inline]
fn f_conf_raw(y: f64, n: usize) -> f64 {
    0.5 * (y.powi(2 - n as i32) - y.powi(-2))
}

#[inline]
fn f_conf_slope(y: f64, n: usize) -> f64 {
    0.5 * ((2.0 - n as f64) * y.powi(1 - n as i32) + 2.0 * y.powi(-3))
}

/// Default relative residual for [`phi`].
pub const PHI_TOL: f64 = 1e-12;

/// `Φ = F⁻¹: [0, ∞) → (0, 1]` by bisection on a bracket followed by Newton
/// polish. The result satisfies `|F(σ) − t| ≤ tol · max(t, 1)`... (relative
/// for large `t`, absolute near 0).
pub fn phi(t: f64, n: usize, tol: f64) -> Result<f64> {
    check_dim(n)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("Φ(t) needs finite t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let target = |y: f64| f_conf_raw(y, n) - t;
    // F decreases from +∞ at 0⁺ to 0 at 1
    let mut lo = 0.5;
    while target(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::NoConvergence(format!("Φ({t}): no lower bracket found")));
        }
    }
    let mut hi = 1.0;
    for _ in 0..200 {
        if hi - lo <= 1e-6 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if target(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scale = t.max(1.0);
    let mut y = 0.5 * (lo + hi);
    for _ in 0..60 {
        let r = target(y);
        if r.abs() <= tol * scale {
            return Ok(y);
        }
        let step = r / f_conf_slope(y, n);
        let next = y - step;
        y = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if target(y) > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
    }
    let r = target(y);
    if r.abs() <= tol * scale {
        Ok(y)
    } else {
        Err(Error::NoConvergence(format!(
            "Φ({t}, n={n}): residual {r:.3e} with bracket [{lo}, {hi}]"
        )))
    }
}

/// Per-site conformal factor `σ ∈ (0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaField {
    pub n: usize,
    pub values: Vec<f64>,
    /// `Q = ‖Rᴰ‖²_g` used to build σ.
    pub curvature_norm2: Vec<f64>,
}

impl SigmaField {
    /// `|σ^((n−4)/2)·√(1+σ²Q) − 1|` per site.
    pub fn functional_equation_residuals(&self) -> Vec<f64> {
        let e = 0.5 * (self.n as f64 - 4.0);
        self.values
            .iter()
            .zip(&self.curvature_norm2)
            .map(|(s, q)| (s.powf(e) * (1.0 + s * s * q).sqrt() - 1.0).abs())
            .collect()
    }

    pub fn max_functional_equation_residual(&self) -> f64 {
        self.functional_equation_residuals().into_iter().fold(0.0, f64::max)
    }
}

/// `σ(x) = Φ(Q(x)/2, n)` with `Q` the curvature norm under `g`.
pub fn sigma_field(conn: &Connection, metric: &ConformalMetric, n: usize) -> Result<SigmaField> {
    check_dim(n)?;
    if conn.lattice().dim() != n {
        return Err(Error::ShapeMismatch(format!(
            "σ requested for n = {n} on a {}-dimensional lattice",
            conn.lattice().dim()
        )));
    }
    let q = pointwise_norm2_field(&curvature(conn), metric);
    let values = q.iter().map(|&q| phi(q / 2.0, n, PHI_TOL)).collect::<Result<Vec<_>>>()?;
    Ok(SigmaField {
        n,
        values,
        curvature_norm2: q,
    })
}

/// `g̃ = σ⁻¹ g`.
pub fn rescale_metric(metric: &ConformalMetric, sigma: &SigmaField) -> Result<ConformalMetric> {
    let inv: Vec<f64> = sigma.values.iter().map(|s| 1.0 / s).collect();
    metric.scaled_by(&inv)
}

#[derive(Clone, Debug)]
pub struct Step2Report {
    pub sigma: SigmaField,
    pub rescaled: ConformalMetric,
    /// `δᴰ_g R`.
    pub ym_residual: PForm,
    /// `δᴰ_g̃ (F′_BI(½‖R‖²_g̃) R)`.
    pub bi_residual: PForm,
    /// `‖r_YM‖` in the `g` pairing.
    pub ym_norm: f64,
    /// `‖r_BI‖` in the `g` pairing.
    pub bi_norm: f64,
    /// `‖r_BI‖` in the `g̃` pairing.
    pub bi_norm_rescaled: f64,
    /// `max_x |r_BI(x) − σ(x)^(n/2−1) r_YM(x)|` over all 1-cells and coefficients.
    pub proportionality_defect: f64,
    /// `max_x σ(x)^(n/2−1)`.
    pub max_sigma_power: f64,
    pub max_functional_equation_residual: f64,
}

/// Builds σ and `g̃` and compares the Born–Infeld residual under `g̃` with the
/// Yang–Mills residual under `g`.
pub fn step2_verify(conn: &Connection, metric: &ConformalMetric, n: usize) -> Result<Step2Report> {
    let sigma = sigma_field(conn, metric, n)?;
    let rescaled = rescale_metric(metric, &sigma)?;
    let r = curvature(conn);
    let ym_residual = delta(conn, metric, &r)?;
    let bi_residual = el_residual(conn, &rescaled, &Density::BornInfeld)?;
    let power = 0.5 * n as f64 - 1.0;
    let comps = ym_residual.comps();
    let mut defect = 0.0f64;
    for (cell, (bi, ym)) in bi_residual.values().iter().zip(ym_residual.values()).enumerate() {
        let s = sigma.values[cell / comps].powf(power);
        defect = defect.max((*bi - ym.scaled(s)).max_abs());
    }
    let max_sigma_power = sigma.values.iter().map(|s| s.powf(power)).fold(0.0, f64::max);
    Ok(Step2Report {
        ym_norm: norm_form(&ym_residual, metric),
        bi_norm: norm_form(&bi_residual, metric),
        bi_norm_rescaled: norm_form(&bi_residual, &rescaled),
        proportionality_defect: defect,
        max_sigma_power,
        max_functional_equation_residual: sigma.max_functional_equation_residual(),
        sigma,
        rescaled,
        ym_residual,
        bi_residual,
    })
}

#[derive(Clone, Debug)]
pub struct Step1Report {
    /// `f = (1 + Q)^((p−2)/(n−4))` per site.
    pub weight: Vec<f64>,
    pub rescaled: ConformalMetric,
    /// `δᴰ_ḡ R`.
    pub rescaled_residual: PForm,
    /// `δᴰ_g ((1+Q)^((p−2)/2) R)`.
    pub power_residual: PForm,
    pub rescaled_norm: f64,
    pub power_norm: f64,
    /// `max |δᴰ_ḡR − f^(1−n/2) · δᴰ_g((1+Q)^((p−2)/2)R)|` over 1-cells.
    pub proportionality_defect: f64,
}

/// Rescales `g` by `f = (1 + ‖R‖²_g)^((p−2)/(n−4))` and compares the
/// Yang–Mills residual under `ḡ = f g` with the power-density residual under `g`.
pub fn step1_weight(conn: &Connection, metric: &ConformalMetric, p: f64, n: usize) -> Result<Step1Report> {
    check_dim(n)?;
    if 2.0 * p <= n as f64 {
        return Err(Error::Precondition(format!("step 1 needs 2p > n (p = {p}, n = {n})")));
    }
    if conn.lattice().dim() != n {
        return Err(Error::ShapeMismatch("lattice dimension differs from n".into()));
    }
    let r = curvature(conn);
    let q = pointwise_norm2_field(&r, metric);
    let weight: Vec<f64> = q.iter().map(|q| (1.0 + q).powf((p - 2.0) / (n as f64 - 4.0))).collect();
    let rescaled = metric.scaled_by(&weight)?;
    let rescaled_residual = delta(conn, &rescaled, &r)?;
    let coeff: Vec<f64> = q.iter().map(|q| (1.0 + q).powf(0.5 * (p - 2.0))).collect();
    let power_residual = delta(conn, metric, &r.scaled_by_sites(&coeff))?;
    let comps = power_residual.comps();
    let e = 1.0 - 0.5 * n as f64;
    let mut defect = 0.0f64;
    for (cell, (a, b)) in rescaled_residual.values().iter().zip(power_residual.values()).enumerate() {
        defect = defect.max((*a - b.scaled(weight[cell / comps].powf(e))).max_abs());
    }
    Ok(Step1Report {
        rescaled_norm: norm_form(&rescaled_residual, metric),
        power_norm: norm_form(&power_residual, metric),
        proportionality_defect: defect,
        weight,
        rescaled,
        rescaled_residual,
        power_residual,
    })
}
