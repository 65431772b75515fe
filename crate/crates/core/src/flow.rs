//! Gradient descent on the energy with Armijo backtracking.

use std::fmt;
use std::sync::Arc;

use crate::algebra::random_element;
use crate::calculus::Connection;
use crate::error::{Error, Result};
use crate::functional::{el_residual, energy, Density};
use crate::lattice::{norm_form, ConformalMetric, LatticeSpec, PForm};
use crate::rng::derive_seed;

/// Smallest trial step before the line search gives up.
pub const MIN_STEP: f64 = 1e-16;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub residual_tol: f64,
    pub max_iters: usize,
    pub initial_step: f64,
    pub armijo: f64,
    pub backtrack: f64,
    /// Seed and amplitude of the random starting connection.
    pub seed: u64,
    pub amplitude: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            residual_tol: 1e-8,
            max_iters: 50_000,
            initial_step: 1.0,
            armijo: 1e-4,
            backtrack: 0.5,
            seed: 0,
            amplitude: 0.05,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.residual_tol > 0.0) {
            return bad(format!("residual_tol must be > 0, got {}", self.residual_tol));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad(format!("armijo constant must lie in (0, 1), got {}", self.armijo));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad(format!("backtrack factor must lie in (0, 1), got {}", self.backtrack));
        }
        if !(self.initial_step > MIN_STEP) || !self.initial_step.is_finite() {
            return bad(format!("initial_step must be a finite number > {MIN_STEP}, got {}", self.initial_step));
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return bad(format!("amplitude must be finite and >= 0, got {}", self.amplitude));
        }
        Ok(())
    }

    /// `random_connection` with this config's seed and amplitude.
    pub fn initial_connection(&self, lattice: Arc<LatticeSpec>, m: usize) -> Result<Connection> {
        random_connection(lattice, m, self.seed, self.amplitude)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Converged,
    MaxIters,
    LineSearchFailed,
}

impl fmt::Display for FlowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowStatus::Converged => "converged",
            FlowStatus::MaxIters => "max-iters",
            FlowStatus::LineSearchFailed => "line-search-failed",
        })
    }
}

/// One row per accepted iterate. Row 0 is the starting point with `step = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub residual: f64,
    pub step: f64,
    /// The Armijo decrease was below floating-point resolution of the energy;
    /// the step was accepted because energy did not increase and the residual fell.
    pub approximate: bool,
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub connection: Connection,
    pub status: FlowStatus,
    pub trace: Vec<TraceRow>,
}

impl FlowResult {
    pub fn final_row(&self) -> &TraceRow {
        self.trace.last().expect("trace always holds the starting row")
    }

    pub fn iterations(&self) -> usize {
        self.final_row().iter
    }
}

/// Each edge gets `random_element(m, derived seed, amplitude)`, the seed derived
/// from `(seed, "connection", cell index)`.
pub fn random_connection(lattice: Arc<LatticeSpec>, m: usize, seed: u64, amplitude: f64) -> Result<Connection> {
    if !(amplitude >= 0.0) {
        return Err(Error::Domain(format!("amplitude must be >= 0, got {amplitude}")));
    }
    if !(2..=crate::algebra::MAX_FIBER).contains(&m) {
        return Err(Error::InvalidLattice(format!("fiber dimension m must be in 2..=4, got {m}")));
    }
    let comps = lattice.components(1);
    Connection::new(PForm::from_fn(lattice, 1, m, |site, comp| {
        random_element(m, derive_seed(seed, "connection", (site * comps + comp) as u64), amplitude)
    }))
}

/// A seeded random `p`-form, every cell drawn as in [`random_connection`] under
/// its own purpose tag.
pub fn random_form(lattice: Arc<LatticeSpec>, p: usize, m: usize, seed: u64, tag: &str, amplitude: f64) -> PForm {
    let comps = lattice.components(p);
    PForm::from_fn(lattice, p, m, |site, comp| {
        random_element(m, derive_seed(seed, tag, (site * comps + comp) as u64), amplitude)
    })
}

/// `amplitude · δψ` for a seeded random 2-form `ψ`, taken with the flat
/// connection and the uniform metric: co-closed, with no exact and no constant part.
pub fn coexact_connection(lattice: Arc<LatticeSpec>, m: usize, seed: u64, amplitude: f64) -> Result<Connection> {
    if !(amplitude >= 0.0) {
        return Err(Error::Domain(format!("amplitude must be >= 0, got {amplitude}")));
    }
    if !(2..=crate::algebra::MAX_FIBER).contains(&m) {
        return Err(Error::InvalidLattice(format!("fiber dimension m must be in 2..=4, got {m}")));
    }
    let comps = lattice.components(2);
    let psi = PForm::from_fn(lattice.clone(), 2, m, |site, comp| {
        random_element(m, derive_seed(seed, "coexact", (site * comps + comp) as u64), amplitude)
    });
    let flat = Connection::flat(lattice.clone(), m);
    let metric = ConformalMetric::uniform(lattice);
    Connection::new(crate::calculus::delta(&flat, &metric, &psi)?)
}

/// Subtracts, for every axis, the lattice average of the edge values on that axis.
pub fn remove_axis_means(conn: &Connection) -> Connection {
    let mut alpha = conn.alpha().clone();
    let comps = alpha.comps();
    let sites = alpha.lattice().num_sites();
    for comp in 0..comps {
        let mut mean = crate::AlgebraElement::zero(alpha.fiber_dim());
        for site in 0..sites {
            mean += *alpha.get(site, comp);
        }
        mean = mean.scaled(1.0 / sites as f64);
        for site in 0..sites {
            *alpha.get_mut(site, comp) -= mean;
        }
    }
    Connection::new(alpha).expect("degree is unchanged")
}

fn advance(conn: &Connection, t: f64, grad: &PForm) -> Connection {
    conn.shifted(-t, grad).expect("gradient has the connection's shape")
}

/// Steepest descent `D ← D − t·el_residual(D)` with Armijo backtracking.
pub fn minimize(d0: &Connection, metric: &ConformalMetric, density: &Density, cfg: &FlowConfig) -> Result<FlowResult> {
    cfg.validate()?;
    if metric.lattice() != d0.lattice() {
        return Err(Error::ShapeMismatch("metric and connection lattices differ".into()));
    }
    let mut conn = d0.clone();
    let mut e = energy(&conn, metric, density);
    let mut grad = el_residual(&conn, metric, density)?;
    let mut res = norm_form(&grad, metric);
    let mut trace = vec![TraceRow {
        iter: 0,
        energy: e,
        residual: res,
        step: 0.0,
        approximate: false,
    }];
    let mut iter = 0;
    let status = loop {
        if res <= cfg.residual_tol {
            break FlowStatus::Converged;
        }
        if iter >= cfg.max_iters {
            break FlowStatus::MaxIters;
        }
        let g2 = res * res;
        let resolution = 64.0 * f64::EPSILON * e.abs().max(f64::MIN_POSITIVE);
        let mut t = cfg.initial_step;
        let mut accepted = None;
        while t >= MIN_STEP {
            let trial = advance(&conn, t, &grad);
            let et = energy(&trial, metric, density);
            if et <= e - cfg.armijo * t * g2 {
                accepted = Some((trial, et, t, false));
                break;
            }
            if cfg.armijo * t * g2 <= resolution && et <= e {
                let gt = el_residual(&trial, metric, density)?;
                if norm_form(&gt, metric) < res {
                    accepted = Some((trial, et, t, true));
                    break;
                }
            }
            t *= cfg.backtrack;
        }
        let Some((next, et, t, approximate)) = accepted else {
            break FlowStatus::LineSearchFailed;
        };
        iter += 1;
        conn = next;
        e = et;
        grad = el_residual(&conn, metric, density)?;
        res = norm_form(&grad, metric);
        trace.push(TraceRow {
            iter,
            energy: e,
            residual: res,
            step: t,
            approximate,
        });
    };
    Ok(FlowResult {
        connection: conn,
        status,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{curvature, d, delta};

    fn lat(n: usize, l: usize) -> Arc<LatticeSpec> {
        Arc::new(LatticeSpec::cubic(n, l, 1.0).unwrap())
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        for cfg in [
            FlowConfig { residual_tol: 0.0, ..Default::default() },
            FlowConfig { armijo: 1.0, ..Default::default() },
            FlowConfig { backtrack: 0.0, ..Default::default() },
            FlowConfig { initial_step: -1.0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn random_connection_is_deterministic() {
        let l = lat(3, 3);
        let a = random_connection(l.clone(), 3, 5, 0.4).unwrap();
        let b = random_connection(l.clone(), 3, 5, 0.4).unwrap();
        let c = random_connection(l.clone(), 3, 6, 0.4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(random_connection(l.clone(), 3, 5, 0.0).unwrap(), Connection::flat(l.clone(), 3));
        assert!(random_connection(l, 3, 5, -1.0).is_err());
    }

    #[test]
    fn energy_is_quadratic_at_small_amplitude() {
        let l = lat(3, 3);
        let g = ConformalMetric::uniform(l.clone());
        let e = |amp| energy(&random_connection(l.clone(), 2, 9, amp).unwrap(), &g, &Density::BornInfeld);
        let ratio = e(0.01) / e(0.001);
        assert!((ratio - 100.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn flat_start_needs_no_iterations() {
        let l = lat(3, 3);
        let g = ConformalMetric::uniform(l.clone());
        let res = minimize(&Connection::flat(l, 2), &g, &Density::BornInfeld, &FlowConfig::default()).unwrap();
        assert_eq!(res.status, FlowStatus::Converged);
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.final_row().energy, 0.0);
    }

    #[test]
    fn abelian_flow_reaches_harmonic_connection() {
        let l = lat(3, 4);
        let g = ConformalMetric::uniform(l.clone());
        let d0 = random_connection(l, 2, 3, 0.5).unwrap();
        let cfg = FlowConfig { residual_tol: 1e-9, ..Default::default() };
        let res = minimize(&d0, &g, &Density::YangMills, &cfg).unwrap();
        assert_eq!(res.status, FlowStatus::Converged);
        for w in res.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy);
            if !w[1].approximate {
                let drop = w[0].energy - w[1].energy;
                assert!(drop >= cfg.armijo * w[1].step * w[0].residual.powi(2));
            }
        }
        // independent evaluation: δ(dα) with the abelian (bracket-free) operators
        let conn = &res.connection;
        let flat = Connection::flat(conn.lattice().clone(), 2);
        let da = d(&flat, conn.alpha()).unwrap();
        assert!((da.max_abs() - curvature(conn).max_abs()).abs() < 1e-14);
        assert!(norm_form(&delta(&flat, &g, &da).unwrap(), &g) <= 1e-9);
    }

    #[test]
    fn flow_is_bitwise_reproducible() {
        let l = lat(3, 3);
        let g = ConformalMetric::uniform(l.clone());
        let cfg = FlowConfig { max_iters: 30, ..Default::default() };
        let d0 = random_connection(l, 3, 17, 0.6).unwrap();
        let a = minimize(&d0, &g, &Density::BornInfeld, &cfg).unwrap();
        let b = minimize(&d0, &g, &Density::BornInfeld, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.connection, b.connection);
        assert_eq!(a.status, FlowStatus::MaxIters);
        assert!(a.final_row().energy < a.trace[0].energy);
    }

    #[test]
    fn axis_means_are_removed() {
        let l = lat(2, 3);
        let conn = random_connection(l, 3, 2, 1.0).unwrap();
        let centred = remove_axis_means(&conn);
        for comp in 0..2 {
            let mut sum = crate::AlgebraElement::zero(3);
            for s in 0..9 {
                sum += *centred.alpha().get(s, comp);
            }
            assert!(sum.max_abs() < 1e-14);
        }
    }
}
