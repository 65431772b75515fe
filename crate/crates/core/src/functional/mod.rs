//! F-Yang–Mills functionals over lattice connections.
//!
//! `energy = Σ_sites vol · F(½‖R‖²)`. Its exact gradient under the weighted
//! 1-form pairing is the Euler–Lagrange residual `δᴰ(F′(½‖R‖²) R)`; the
//! second variation along straight lines and the Jacobi-type operator live in
//! [`hessian`], index and nullity in [`spectrum`].

mod density;
pub mod hessian;
pub mod spectrum;

pub use density::Density;
pub use hessian::{bracket_pairings, curvature_operator, hess_operator, hess_quadratic};
pub use spectrum::{spectrum, Spectrum, SpectrumMethod, SpectrumOptions};

use crate::calculus::{curvature, d, delta, stress_energy, Connection};
use crate::error::{Error, Result};
use crate::lattice::{inner_form, pointwise_norm2_field, ConformalMetric, PForm};
use crate::par;

fn check_lattice(conn: &Connection, metric: &ConformalMetric) -> Result<()> {
    if conn.lattice() != metric.lattice() {
        return Err(Error::ShapeMismatch("connection and metric lattices differ".into()));
    }
    Ok(())
}

/// `Σ_x vol(x) · F(Q(x)/2)` with `Q = ‖Rᴰ‖²` in the orthonormal frame.
pub fn energy(conn: &Connection, metric: &ConformalMetric, density: &Density) -> f64 {
    let r = curvature(conn);
    let q = pointwise_norm2_field(&r, metric);
    par::sum_range(q.len(), |s| metric.volume(s) * density.value(q[s] / 2.0))
}

/// `F′(Q/2)` at every site.
pub fn coefficient_field(r: &PForm, metric: &ConformalMetric, density: &Density) -> Vec<f64> {
    pointwise_norm2_field(r, metric)
        .into_iter()
        .map(|q| density.d1(q / 2.0))
        .collect()
}

/// `δᴰ(F′(½‖R‖²)·R)`, the L² gradient of [`energy`].
pub fn el_residual(conn: &Connection, metric: &ConformalMetric, density: &Density) -> Result<PForm> {
    check_lattice(conn, metric)?;
    let r = curvature(conn);
    let coeff = coefficient_field(&r, metric, density);
    delta(conn, metric, &r.scaled_by_sites(&coeff))
}

/// The first variation along `B`, computed both ways.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirstVariation {
    /// `(dᴰB, F′R)` in the 2-form pairing.
    pub via_curvature: f64,
    /// `(B, δᴰ(F′R))` in the 1-form pairing.
    pub via_residual: f64,
}

pub fn first_variation(
    conn: &Connection,
    b: &PForm,
    metric: &ConformalMetric,
    density: &Density,
) -> Result<FirstVariation> {
    check_lattice(conn, metric)?;
    conn.alpha().check_shape(b, "first_variation")?;
    let r = curvature(conn);
    let coeff = coefficient_field(&r, metric, density);
    let weighted = r.scaled_by_sites(&coeff);
    let via_curvature = inner_form(&d(conn, b)?, &weighted, metric)?;
    let via_residual = inner_form(b, &delta(conn, metric, &weighted)?, metric)?;
    Ok(FirstVariation {
        via_curvature,
        via_residual,
    })
}

/// Rate of change of the energy under a conformal metric variation `δg = u·g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricVariation {
    /// `½ Σ u · tr S · vol`.
    pub stress_pairing: f64,
    /// `Σ vol · [(n/2)·u·F(Q/2) − u·Q·F′(Q/2)]`.
    pub closed_form: f64,
    /// Central difference of the energy under `c → (1 + s u) c`.
    pub finite_difference: f64,
}

/// Step used for [`MetricVariation::finite_difference`].
pub const METRIC_FD_STEP: f64 = 1e-5;

pub fn metric_variation(
    conn: &Connection,
    metric: &ConformalMetric,
    density: &Density,
    u: &[f64],
) -> Result<MetricVariation> {
    check_lattice(conn, metric)?;
    let sites = metric.lattice().num_sites();
    if u.len() != sites {
        return Err(Error::ShapeMismatch(format!("{} variation values for {sites} sites", u.len())));
    }
    let n = metric.lattice().dim() as f64;
    let stress = stress_energy(conn, metric, density);
    let stress_pairing = 0.5 * (0..sites).map(|s| u[s] * stress.trace(s) * metric.volume(s)).sum::<f64>();

    let q = pointwise_norm2_field(&curvature(conn), metric);
    let closed_form = (0..sites)
        .map(|s| metric.volume(s) * u[s] * (0.5 * n * density.value(q[s] / 2.0) - q[s] * density.d1(q[s] / 2.0)))
        .sum();

    let eps = METRIC_FD_STEP;
    let perturbed = |sign: f64| -> Result<f64> {
        let scale: Vec<f64> = u.iter().map(|v| 1.0 + sign * eps * v).collect();
        Ok(energy(conn, &metric.scaled_by(&scale)?, density))
    };
    let finite_difference = (perturbed(1.0)? - perturbed(-1.0)?) / (2.0 * eps);
    Ok(MetricVariation {
        stress_pairing,
        closed_form,
        finite_difference,
    })
}
