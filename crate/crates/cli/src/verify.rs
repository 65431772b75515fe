//! The identity suite behind `biym verify`.

use std::sync::Arc;

use biym_core::calculus::{curvature, d, delta, stress_energy, wedge_bracket, Connection};
use biym_core::conformal::{sigma_field, step2_verify};
use biym_core::flow::{random_connection, random_form};
use biym_core::functional::{
    bracket_pairings, energy, first_variation, hess_operator, hess_quadratic, metric_variation,
};
use biym_core::lattice::{inner_form, pointwise_norm2_field};
use biym_core::rng::{derive_seed, uniform_field};
use biym_core::{ConformalMetric, Density, LatticeSpec, PForm};

use crate::output::{num, Csv, Report};
use crate::{Result, RunConfig};

pub const IDENTITIES: &[&str] = &[
    "adjointness",
    "curvature-expansion",
    "first-variation-fd",
    "first-variation-pairings",
    "second-variation-fd",
    "hessian-pairing",
    "hessian-symmetry",
    "bracket-identity",
    "stress-trace",
    "metric-variation",
    "conformal-functional-equation",
    "conformal-proportionality",
];

pub fn default_tolerance(name: &str) -> f64 {
    match name {
        "adjointness" => 1e-10,
        "curvature-expansion" => 1e-12,
        "first-variation-fd" => 1e-6,
        "first-variation-pairings" => 1e-12,
        "second-variation-fd" => 1e-5,
        "hessian-pairing" | "hessian-symmetry" => 1e-10,
        "bracket-identity" | "stress-trace" => 1e-12,
        "metric-variation" => 1e-7,
        "conformal-functional-equation" | "conformal-proportionality" => 1e-10,
        _ => panic!("unknown identity {name}"),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<32} {:>12} {:>12}  {}\n", "identity", "max residual", "tolerance", "result");
        for c in &self.checks {
            out.push_str(&format!(
                "{:<32} {:>12.3e} {:>12.1e}  {}\n",
                c.name,
                c.max_residual,
                c.tolerance,
                if c.passed() { "pass" } else { "FAIL" }
            ));
        }
        out
    }

    pub fn csv(&self) -> Csv {
        let mut csv = Csv::new(&["identity", "max_residual", "tolerance", "passed"]);
        for c in &self.checks {
            csv.push(vec![c.name.into(), num(c.max_residual), num(c.tolerance), c.passed().to_string()]);
        }
        csv
    }

    pub fn report(&self) -> Report {
        let mut r = Report::new();
        r.set("all_passed", self.all_passed());
        for c in &self.checks {
            r.set(&format!("{}.max_residual", c.name), num(c.max_residual));
            r.set(&format!("{}.tolerance", c.name), num(c.tolerance));
            r.set(&format!("{}.passed", c.name), c.passed());
        }
        r
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

struct Suite<'a> {
    cfg: &'a RunConfig,
    lattice: Arc<LatticeSpec>,
    m: usize,
    density: Density,
    seed: u64,
}

impl Suite<'_> {
    fn trial_seed(&self, tag: &str, trial: usize) -> u64 {
        derive_seed(self.seed, tag, trial as u64)
    }

    fn conn(&self, tag: &str, trial: usize, amp: f64) -> Connection {
        random_connection(self.lattice.clone(), self.m, self.trial_seed(tag, trial), amp).expect("validated fiber")
    }

    fn form(&self, p: usize, tag: &str, trial: usize) -> PForm {
        random_form(self.lattice.clone(), p, self.m, self.trial_seed(tag, trial), tag, 1.0)
    }

    fn uniform(&self) -> ConformalMetric {
        ConformalMetric::uniform(self.lattice.clone())
    }

    /// The configured metric plus a random conformal one.
    fn metrics(&self, trial: usize) -> Result<Vec<ConformalMetric>> {
        let c = uniform_field(self.trial_seed("metric", trial), "metric", self.lattice.num_sites(), 0.5, 2.0);
        Ok(vec![
            self.cfg.metric(self.lattice.clone())?,
            ConformalMetric::from_factors(self.lattice.clone(), c)?,
        ])
    }

    fn hessian_metric(&self) -> Result<ConformalMetric> {
        let g = self.cfg.metric(self.lattice.clone())?;
        Ok(if g.is_uniform() { g } else { self.uniform() })
    }

    fn densities(&self) -> Vec<Density> {
        let mut v = vec![Density::BornInfeld, Density::YangMills];
        if !v.contains(&self.density) {
            v.push(self.density);
        }
        v
    }

    fn adjointness(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for t in 0..self.cfg.verify.trials {
            let conn = self.conn("adj-conn", t, 0.7);
            for g in self.metrics(t)? {
                for p in 0..=2 {
                    let phi = self.form(p, &format!("adj-phi{p}"), t);
                    let psi = self.form(p + 1, &format!("adj-psi{p}"), t);
                    let a = inner_form(&d(&conn, &phi)?, &psi, &g)?;
                    let b = inner_form(&phi, &delta(&conn, &g, &psi)?, &g)?;
                    worst = worst.max(rel(a, b));
                }
            }
        }
        Ok(worst)
    }

    fn curvature_expansion(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for t in 0..self.cfg.verify.trials {
            let conn = self.conn("exp-conn", t, 0.7);
            let b = self.form(1, "exp-b", t);
            let mut diff = curvature(&conn.shifted(1.0, &b)?);
            diff.axpy(-1.0, &curvature(&conn));
            diff.axpy(-1.0, &d(&conn, &b)?);
            diff.axpy(-0.5, &wedge_bracket(&b, &b)?);
            worst = worst.max(diff.max_abs());
        }
        Ok(worst)
    }

    fn first_variation(&self) -> Result<(f64, f64)> {
        let (mut fd_worst, mut pair_worst) = (0.0f64, 0.0f64);
        let step = 1e-4;
        for t in 0..self.cfg.verify.trials {
            let conn = self.conn("fv-conn", t, 0.6);
            let b = self.form(1, "fv-b", t);
            for g in self.metrics(t)? {
                for density in self.densities() {
                    let fv = first_variation(&conn, &b, &g, &density)?;
                    let e = |s: f64| -> Result<f64> { Ok(energy(&conn.shifted(s, &b)?, &g, &density)) };
                    let fd = (e(step)? - e(-step)?) / (2.0 * step);
                    fd_worst = fd_worst.max(rel(fd, fv.via_residual));
                    pair_worst = pair_worst.max(rel(fv.via_curvature, fv.via_residual));
                }
            }
        }
        Ok((fd_worst, pair_worst))
    }

    fn second_variation(&self) -> Result<(f64, f64, f64)> {
        let g = self.hessian_metric()?;
        let (mut fd_worst, mut pair_worst, mut sym_worst) = (0.0f64, 0.0f64, 0.0f64);
        let step = 1e-3;
        for t in 0..self.cfg.verify.trials {
            let conn = self.conn("sv-conn", t, 0.6);
            let b = self.form(1, "sv-b", t);
            let b2 = self.form(1, "sv-b2", t);
            for density in self.densities() {
                let hq = hess_quadratic(&conn, &b, &g, &density)?;
                let e = |s: f64| -> Result<f64> { Ok(energy(&conn.shifted(s, &b)?, &g, &density)) };
                let fd = (e(step)? - 2.0 * e(0.0)? + e(-step)?) / (step * step);
                fd_worst = fd_worst.max(rel(fd, hq));
                let sb = hess_operator(&conn, &b, &g, &density)?;
                pair_worst = pair_worst.max(rel(inner_form(&b, &sb, &g)?, hq));
                let x = inner_form(&b2, &sb, &g)?;
                let y = inner_form(&b, &hess_operator(&conn, &b2, &g, &density)?, &g)?;
                sym_worst = sym_worst.max((x - y).abs() / (1.0 + x.abs().max(y.abs())));
            }
        }
        Ok((fd_worst, pair_worst, sym_worst))
    }

    fn bracket_identity(&self) -> Result<f64> {
        let g = self.hessian_metric()?;
        let mut worst = 0.0f64;
        for t in 0..self.cfg.verify.trials {
            let conn = self.conn("br-conn", t, 0.8);
            let b = self.form(1, "br-b", t);
            for (lhs, rhs) in bracket_pairings(&conn, &g, &b)? {
                worst = worst.max((lhs - rhs).abs());
            }
        }
        Ok(worst)
    }

    fn stress(&self) -> Result<(f64, f64)> {
        let n = self.lattice.dim() as f64;
        let (mut trace_worst, mut mv_worst) = (0.0f64, 0.0f64);
        for t in 0..self.cfg.verify.trials {
            let conn = self.conn("st-conn", t, 0.6);
            for g in self.metrics(t)? {
                for density in self.densities() {
                    let s = stress_energy(&conn, &g, &density);
                    let q = pointwise_norm2_field(&curvature(&conn), &g);
                    for (site, q) in q.iter().enumerate() {
                        let want = n * density.value(q / 2.0) - 2.0 * q * density.d1(q / 2.0);
                        trace_worst = trace_worst.max((s.trace(site) - want).abs() / (1.0 + want.abs()));
                    }
                    let u = uniform_field(self.trial_seed("mv-u", t), "mv-u", self.lattice.num_sites(), -1.0, 1.0);
                    let mv = metric_variation(&conn, &g, &density, &u)?;
                    mv_worst = mv_worst
                        .max(rel(mv.finite_difference, mv.closed_form))
                        .max(rel(mv.stress_pairing, mv.closed_form));
                }
            }
        }
        Ok((trace_worst, mv_worst))
    }

    fn conformal(&self) -> Result<(f64, f64)> {
        let n = self.cfg.verify.conformal_n;
        let lattice = Arc::new(LatticeSpec::cubic(n, 3, 1.0)?);
        let g = ConformalMetric::uniform(lattice.clone());
        let (mut fe, mut prop) = (0.0f64, 0.0f64);
        for t in 0..self.cfg.verify.trials {
            let conn = random_connection(lattice.clone(), self.m, self.trial_seed("cf-conn", t), 0.6)?;
            fe = fe.max(sigma_field(&conn, &g, n)?.max_functional_equation_residual());
            prop = prop.max(step2_verify(&conn, &g, n)?.proportionality_defect);
        }
        Ok((fe, prop))
    }
}

/// Runs every identity. Configuration problems (including a conformal
/// dimension below 5) are returned as errors before anything is computed.
pub fn run(cfg: &RunConfig) -> Result<VerifyReport> {
    let n = cfg.verify.conformal_n;
    if n < 5 {
        return Err(biym_core::Error::Precondition(format!(
            "the conformal identities need dimension n >= 5 (verify.conformal_n = {n}); \
             in n = 4 the Euler-Lagrange equations are conformally invariant"
        ))
        .into());
    }
    if n > 6 {
        return Err(crate::CliError::Config(format!("verify.conformal_n must be 5 or 6, got {n}")));
    }
    let suite = Suite {
        cfg,
        lattice: Arc::new(cfg.lattice_spec()?),
        m: cfg.fiber.m,
        density: cfg.density()?,
        seed: cfg.seeds.verify,
    };
    suite.cfg.metric(suite.lattice.clone())?;

    let mut values: Vec<(&'static str, f64)> = Vec::new();
    values.push(("adjointness", suite.adjointness()?));
    values.push(("curvature-expansion", suite.curvature_expansion()?));
    let (fd, pairing) = suite.first_variation()?;
    values.push(("first-variation-fd", fd));
    values.push(("first-variation-pairings", pairing));
    let (fd2, hp, hs) = suite.second_variation()?;
    values.push(("second-variation-fd", fd2));
    values.push(("hessian-pairing", hp));
    values.push(("hessian-symmetry", hs));
    values.push(("bracket-identity", suite.bracket_identity()?));
    let (tr, mv) = suite.stress()?;
    values.push(("stress-trace", tr));
    values.push(("metric-variation", mv));
    let (fe, prop) = suite.conformal()?;
    values.push(("conformal-functional-equation", fe));
    values.push(("conformal-proportionality", prop));

    let checks = values
        .into_iter()
        .map(|(name, max_residual)| Check {
            name,
            max_residual,
            tolerance: cfg.verify.tolerances.get(name).copied().unwrap_or_else(|| default_tolerance(name)),
        })
        .collect();
    Ok(VerifyReport { checks })
}
