//! One function per subcommand. Each returns the process exit code.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use biym_core::calculus::{curvature, div_direct, div_formula, stress_energy, Connection};
use biym_core::conformal::{step1_weight, step2_verify};
use biym_core::flow::{coexact_connection, minimize, FlowResult, FlowStatus};
use biym_core::functional::{spectrum, SpectrumMethod, SpectrumOptions};
use biym_core::lattice::pointwise_norm2_field;
use biym_core::{ConformalMetric, Density, Error as CoreError};

use crate::config::StartKind;
use crate::output::{num, Csv, Report};
use crate::snapshot::Snapshot;
use crate::{exit, verify, CliError, Result, RunConfig};

#[derive(Clone, Debug)]
pub struct Context {
    pub config: RunConfig,
    pub snapshot: Option<PathBuf>,
    pub out: PathBuf,
    pub quiet: bool,
}

impl Context {
    pub fn new(config: RunConfig, snapshot: Option<PathBuf>, out: Option<PathBuf>, quiet: bool) -> Self {
        let out = out.unwrap_or_else(|| config.output_dir());
        Context {
            config,
            snapshot,
            out,
            quiet,
        }
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn load_snapshot(&self) -> Result<Snapshot> {
        let path = self
            .snapshot
            .as_deref()
            .ok_or_else(|| CliError::Config("this command needs --snapshot PATH".into()))?;
        Snapshot::load(path)
    }

    fn uniform_metric_for(&self, conn: &Connection) -> Result<ConformalMetric> {
        let metric = self.config.metric(conn.lattice().clone())?;
        if !metric.is_uniform() {
            return Err(CoreError::Unsupported("this command requires a uniform metric".into()).into());
        }
        Ok(metric)
    }
}

fn start_connection(cfg: &RunConfig) -> Result<Connection> {
    let lattice = Arc::new(cfg.lattice_spec()?);
    let flow = cfg.flow_config()?;
    Ok(match cfg.flow.start {
        StartKind::Random => flow.initial_connection(lattice, cfg.fiber.m)?,
        StartKind::Coexact => coexact_connection(lattice, cfg.fiber.m, flow.seed, flow.amplitude)?,
    })
}

fn trace_csv(result: &FlowResult) -> Csv {
    let mut csv = Csv::new(&["iter", "energy", "residual", "step"]);
    for row in &result.trace {
        csv.push(vec![row.iter.to_string(), num(row.energy), num(row.residual), num(row.step)]);
    }
    csv
}

fn flow_report(report: &mut Report, result: &FlowResult, density: &Density) {
    let last = result.final_row();
    report
        .set("density", density)
        .set("status", result.status)
        .set("iterations", last.iter)
        .set("energy", num(last.energy))
        .set("residual", num(last.residual))
        .set("approximate_steps", result.trace.iter().filter(|r| r.approximate).count());
}

fn status_code(status: FlowStatus) -> u8 {
    if status == FlowStatus::Converged {
        exit::SUCCESS
    } else {
        exit::NO_CONVERGENCE
    }
}

pub fn verify(ctx: &Context) -> Result<u8> {
    let report = verify::run(&ctx.config)?;
    report.csv().write(&ctx.path("verify.csv"))?;
    report.report().write(&ctx.path("verify.txt"))?;
    ctx.say(report.table());
    Ok(if report.all_passed() { exit::SUCCESS } else { exit::FAILURE })
}

pub fn flow(ctx: &Context) -> Result<u8> {
    let cfg = &ctx.config;
    let density = cfg.density()?;
    let d0 = start_connection(cfg)?;
    let metric = cfg.metric(d0.lattice().clone())?;
    let result = minimize(&d0, &metric, &density, &cfg.flow_config()?)?;
    Snapshot::from_connection(&result.connection, &density).save(&ctx.path("flow.biym"))?;
    trace_csv(&result).write(&ctx.path("trace.csv"))?;
    let mut report = Report::new();
    flow_report(&mut report, &result, &density);
    report.write(&ctx.path("flow.txt"))?;
    let last = result.final_row();
    ctx.say(format!(
        "{}: {} iterations, energy {:.12e}, residual {:.3e}",
        result.status, last.iter, last.energy, last.residual
    ));
    Ok(status_code(result.status))
}

pub fn conformal(ctx: &Context) -> Result<u8> {
    let cfg = &ctx.config;
    let n = cfg.lattice.n;
    if n < 5 {
        return Err(CoreError::Precondition(format!(
            "the conformal construction needs dimension n >= 5 (got n = {n}); \
             in n = 4 the Euler-Lagrange equations are conformally invariant"
        ))
        .into());
    }
    if n > 6 {
        return Err(CliError::Config(format!("conformal runs support n = 5 or 6, got {n}")));
    }
    let density = cfg.density()?;
    let power = match density {
        Density::YangMills => None,
        Density::Power { p } | Density::PowerEl { p } => Some(p),
        other => {
            return Err(CliError::Config(format!(
                "the conformal pipeline flows yang-mills or a power density, not {other}"
            )))
        }
    };
    let d0 = start_connection(cfg)?;
    let metric = cfg.metric(d0.lattice().clone())?;
    let flow_cfg = cfg.flow_config()?;
    let result = minimize(&d0, &metric, &density, &flow_cfg)?;
    let conn = &result.connection;
    Snapshot::from_connection(conn, &density).save(&ctx.path("conformal.biym"))?;
    trace_csv(&result).write(&ctx.path("trace.csv"))?;

    let rep = step2_verify(conn, &metric, n)?;
    let mut sigma = Csv::new(&["site", "sigma"]);
    let mut tilde = Csv::new(&["site", "factor"]);
    for (site, s) in rep.sigma.values.iter().enumerate() {
        sigma.push(vec![site.to_string(), num(*s)]);
        tilde.push(vec![site.to_string(), num(rep.rescaled.factor(site))]);
    }
    sigma.write(&ctx.path("sigma.csv"))?;
    tilde.write(&ctx.path("metric_tilde.csv"))?;

    let mut report = Report::new();
    flow_report(&mut report, &result, &density);
    let bound = rep.max_sigma_power * flow_cfg.residual_tol;
    report
        .set("n", n)
        .set("ym_residual", num(rep.ym_norm))
        .set("bi_residual", num(rep.bi_norm))
        .set("bi_residual_rescaled_norm", num(rep.bi_norm_rescaled))
        .set("max_sigma_power", num(rep.max_sigma_power))
        .set("bi_bound", num(bound))
        .set("bi_bound_satisfied", rep.bi_norm <= bound)
        .set("proportionality_defect", num(rep.proportionality_defect))
        .set("functional_equation_residual", num(rep.max_functional_equation_residual));
    if let Some(p) = power {
        match step1_weight(conn, &metric, p, n) {
            Ok(s1) => {
                report
                    .set("step1_rescaled_residual", num(s1.rescaled_norm))
                    .set("step1_power_residual", num(s1.power_norm))
                    .set("step1_proportionality_defect", num(s1.proportionality_defect));
            }
            Err(CoreError::Precondition(msg)) => {
                report.set("step1", format!("skipped ({msg})"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    report.write(&ctx.path("conformal.txt"))?;
    ctx.say(report.render());
    Ok(status_code(result.status))
}

pub fn spectrum_cmd(ctx: &Context) -> Result<u8> {
    let snap = ctx.load_snapshot()?;
    let conn = snap.connection()?;
    let density = snap.density()?;
    let metric = ctx.uniform_metric_for(&conn)?;
    let opts = SpectrumOptions {
        k: ctx.config.spectrum.k,
        tau: ctx.config.spectrum.tau,
        seed: ctx.config.seeds.spectrum,
        ..Default::default()
    };
    let spec = spectrum(&conn, &metric, &density, &opts)?;
    let mut csv = Csv::new(&["rank", "eigenvalue"]);
    for (i, v) in spec.eigenvalues.iter().enumerate() {
        csv.push(vec![i.to_string(), num(*v)]);
    }
    csv.write(&ctx.path("spectrum.csv"))?;
    let mut report = Report::new();
    report
        .set("density", density)
        .set("dimension", spec.dimension)
        .set("index", spec.index)
        .set("nullity", spec.nullity)
        .set("counts_complete", spec.counts_complete)
        .set("tau", num(spec.tau))
        .set(
            "method",
            match &spec.method {
                SpectrumMethod::Dense => "dense".to_string(),
                SpectrumMethod::Iterative { basis, .. } => format!("block-krylov (basis {basis})"),
            },
        );
    if let (Some(dim), Some(null)) = (spec.gauge_dim, spec.gauge_null) {
        report.set("gauge_dim", dim).set("gauge_null", null);
    }
    report.write(&ctx.path("spectrum.txt"))?;
    ctx.say(format!(
        "index {}, nullity {} (tau {:.3e}), lowest eigenvalue {:.12e}",
        spec.index,
        spec.nullity,
        spec.tau,
        spec.eigenvalues.first().copied().unwrap_or(f64::NAN)
    ));
    Ok(exit::SUCCESS)
}

pub fn stress(ctx: &Context) -> Result<u8> {
    let snap = ctx.load_snapshot()?;
    let conn = snap.connection()?;
    let density = snap.density()?;
    let metric = ctx.uniform_metric_for(&conn)?;
    let lattice = conn.lattice();
    let n = lattice.dim();
    let s = stress_energy(&conn, &metric, &density);
    let direct = div_direct(&s, &metric)?;
    let formula = div_formula(&conn, &metric, &density)?;
    let q = pointwise_norm2_field(&curvature(&conn), &metric);

    let mut header = vec!["site".to_string()];
    for k in 0..n {
        for l in k..n {
            header.push(format!("s_{k}_{l}"));
        }
    }
    header.extend(["trace", "q", "f", "f_prime"].map(String::from));
    header.extend((0..n).map(|k| format!("div_direct_{k}")));
    header.extend((0..n).map(|k| format!("div_formula_{k}")));
    let mut csv = Csv::new(&header);
    for site in 0..lattice.num_sites() {
        let mut row = vec![site.to_string()];
        for k in 0..n {
            for l in k..n {
                row.push(num(s.get(site, k, l)));
            }
        }
        let t = q[site] / 2.0;
        row.extend([s.trace(site), q[site], density.value(t), density.d1(t)].map(num));
        row.extend(direct.at(site).iter().map(|v| num(*v)));
        row.extend(formula.total.at(site).iter().map(|v| num(*v)));
        csv.push(row);
    }
    csv.write(&ctx.path("stress.csv"))?;
    let mut report = Report::new();
    report
        .set("density", density)
        .set("div_direct_norm", num(direct.norm))
        .set("div_formula_norm", num(formula.total.norm))
        .set("difference_norm", num(direct.distance(&formula.total, &metric)))
        .set("coderivative_term_norm", num(formula.coderivative.norm))
        .set("bianchi_term_norm", num(formula.bianchi.norm));
    report.write(&ctx.path("stress.txt"))?;
    ctx.say(report.render());
    Ok(exit::SUCCESS)
}

pub fn export(ctx: &Context) -> Result<u8> {
    let snap = ctx.load_snapshot()?;
    let conn = snap.connection()?;
    let lattice = conn.lattice();
    let n = lattice.dim();
    let m = snap.m;
    let mut header = vec!["site".to_string()];
    header.extend((0..n).map(|k| format!("x{k}")));
    header.push("axis".into());
    for i in 0..m {
        for j in i + 1..m {
            header.push(format!("a_{i}_{j}"));
        }
    }
    let mut csv = Csv::new(&header);
    for site in 0..lattice.num_sites() {
        let coords = lattice.coords(site);
        for axis in 0..n {
            let mut row = vec![site.to_string()];
            row.extend(coords.iter().map(|c| c.to_string()));
            row.push(axis.to_string());
            row.extend(conn.alpha().get(site, axis).coeffs().iter().map(|v| num(*v)));
            csv.push(row);
        }
    }
    let path = ctx.path("export.csv");
    csv.write(&path)?;
    ctx.say(format!("wrote {} rows to {}", csv.len(), display(&path)));
    Ok(exit::SUCCESS)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
