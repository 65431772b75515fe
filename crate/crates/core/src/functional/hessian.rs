//! Second variation along straight lines `Dᵗ = D + tB`.
//!
//! Since `R(D + tB) = R + t dᴰB + ½t²[B∧B]` exactly, the second derivative of
//! the energy at `t = 0` is
//!
//! ```text
//! Σ vol · [ F″(Q/2)·⟨dᴰB, R⟩² + F′(Q/2)·(⟨dᴰB, dᴰB⟩ + ⟨B, 𝓡ᴰB⟩) ]
//! ```
//!
//! with pointwise pairings in the orthonormal frame, at any connection (not
//! only critical ones). The operator form
//! `𝒮ᴰB = δᴰ(F′·dᴰB + F″·⟨dᴰB, R⟩·R) + F′·𝓡ᴰB` reproduces this quadratic form
//! under the 1-form pairing. All of this requires a uniform metric.

use crate::algebra::AlgebraElement;
use crate::calculus::{curvature, d, delta, wedge_bracket, Connection};
use crate::error::Result;
use crate::functional::Density;
use crate::lattice::{pointwise_norm2_field, ConformalMetric, PForm};
use crate::par;

fn check(conn: &Connection, b: &PForm, metric: &ConformalMetric, what: &str) -> Result<()> {
    metric.require_uniform(what)?;
    conn.alpha().check_shape(b, what)?;
    if metric.lattice() != conn.lattice() {
        return Err(crate::Error::ShapeMismatch("metric and connection lattices differ".into()));
    }
    Ok(())
}

fn curvature_operator_with(r: &PForm, b: &PForm, metric: &ConformalMetric) -> PForm {
    let lattice = b.lattice();
    let n = lattice.dim();
    let m = b.fiber_dim();
    let h2 = lattice.spacing().powi(2);
    PForm::from_fn(lattice.clone(), 1, m, |site, nu| {
        let mut acc = AlgebraElement::zero(m);
        for mu in 0..n {
            if mu != nu {
                acc += r.component(site, &[mu, nu]).bracket(b.get(site, mu));
            }
        }
        acc.scaled(1.0 / (metric.factor(site) * h2))
    })
}

/// `(𝓡ᴰB)(X) = Σᵢ [Rᴰ(eᵢ, X), B(eᵢ)]`, returned in index components.
pub fn curvature_operator(conn: &Connection, metric: &ConformalMetric, b: &PForm) -> Result<PForm> {
    check(conn, b, metric, "curvature_operator")?;
    Ok(curvature_operator_with(&curvature(conn), b, metric))
}

/// Per-site `(⟨[B∧B], R⟩, ⟨B, 𝓡ᴰB⟩)` in the orthonormal frame.
pub fn bracket_pairings(conn: &Connection, metric: &ConformalMetric, b: &PForm) -> Result<Vec<(f64, f64)>> {
    check(conn, b, metric, "bracket_pairings")?;
    let r = curvature(conn);
    let wedge = wedge_bracket(b, b)?;
    let rb = curvature_operator_with(&r, b, metric);
    Ok(par::map_range(conn.lattice().num_sites(), |site| {
        let lhs: f64 = (0..r.comps()).map(|c| wedge.get(site, c).inner(r.get(site, c))).sum::<f64>()
            * metric.frame_factor(2, site);
        let rhs: f64 = (0..b.comps()).map(|c| b.get(site, c).inner(rb.get(site, c))).sum::<f64>()
            * metric.frame_factor(1, site);
        (lhs, rhs)
    }))
}

/// Second derivative of the energy along `D + tB` at `t = 0`.
pub fn hess_quadratic(conn: &Connection, b: &PForm, metric: &ConformalMetric, density: &Density) -> Result<f64> {
    check(conn, b, metric, "hess_quadratic")?;
    let r = curvature(conn);
    let q = pointwise_norm2_field(&r, metric);
    let db = d(conn, b)?;
    let rb = curvature_operator_with(&r, b, metric);
    Ok(par::sum_range(q.len(), |site| {
        let k2 = metric.frame_factor(2, site);
        let k1 = metric.frame_factor(1, site);
        let db_r: f64 = (0..r.comps()).map(|c| db.get(site, c).inner(r.get(site, c))).sum::<f64>() * k2;
        let db_db: f64 = (0..r.comps()).map(|c| db.get(site, c).norm2()).sum::<f64>() * k2;
        let b_rb: f64 = (0..b.comps()).map(|c| b.get(site, c).inner(rb.get(site, c))).sum::<f64>() * k1;
        let t = q[site] / 2.0;
        metric.volume(site) * (density.d2(t) * db_r * db_r + density.d1(t) * (db_db + b_rb))
    }))
}

/// `𝒮ᴰB = δᴰ(F′·dᴰB + F″·⟨dᴰB, R⟩·R) + F′·𝓡ᴰB`.
pub fn hess_operator(conn: &Connection, b: &PForm, metric: &ConformalMetric, density: &Density) -> Result<PForm> {
    check(conn, b, metric, "hess_operator")?;
    let r = curvature(conn);
    let q = pointwise_norm2_field(&r, metric);
    let db = d(conn, b)?;
    let sites = q.len();
    let f1: Vec<f64> = q.iter().map(|q| density.d1(q / 2.0)).collect();
    let f2_db_r: Vec<f64> = par::map_range(sites, |site| {
        let db_r: f64 = (0..r.comps()).map(|c| db.get(site, c).inner(r.get(site, c))).sum::<f64>()
            * metric.frame_factor(2, site);
        density.d2(q[site] / 2.0) * db_r
    });
    let mut flux = db.scaled_by_sites(&f1);
    flux.axpy(1.0, &r.scaled_by_sites(&f2_db_r));
    let mut out = delta(conn, metric, &flux)?;
    out.axpy(1.0, &curvature_operator_with(&r, b, metric).scaled_by_sites(&f1));
    Ok(out)
}
