//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use biym::Snapshot;
use biym_core::calculus::{
    bianchi_residual, curvature, d, delta, div_direct, div_formula, stress_energy, Connection,
};
use biym_core::conformal::{sigma_field, step2_verify};
use biym_core::flow::{coexact_connection, minimize, random_connection, random_form, FlowConfig, FlowStatus};
use biym_core::functional::{
    bracket_pairings, el_residual, energy, first_variation, hess_operator, hess_quadratic, spectrum,
    SpectrumOptions,
};
use biym_core::lattice::{inner_form, norm_form, pointwise_norm2_field};
use biym_core::rng::{derive_seed, uniform_field};
use biym_core::{AlgebraElement, ConformalMetric, Density, LatticeSpec, PForm};

type Verdict = (bool, String);

fn cubic(n: usize, l: usize, h: f64) -> Arc<LatticeSpec> {
    Arc::new(LatticeSpec::cubic(n, l, h).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn random_metric(l: &Arc<LatticeSpec>, seed: u64) -> ConformalMetric {
    ConformalMetric::from_factors(l.clone(), uniform_field(seed, "acceptance-metric", l.num_sites(), 0.5, 2.0)).unwrap()
}

fn seed(tag: &str, i: usize) -> u64 {
    derive_seed(2024, tag, i as u64)
}

fn adjointness() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 2..=5 {
        let l = cubic(n, 3, 1.0);
        for m in [2, 3] {
            for trial in 0..20 {
                let s = seed(&format!("adj-{n}-{m}"), trial);
                let conn = random_connection(l.clone(), m, s, 0.7).unwrap();
                for g in [ConformalMetric::uniform(l.clone()), random_metric(&l, s)] {
                    for p in 0..=2 {
                        let phi = random_form(l.clone(), p, m, s, "phi", 1.0);
                        let psi = random_form(l.clone(), p + 1, m, s, "psi", 1.0);
                        let a = inner_form(&d(&conn, &phi).unwrap(), &psi, &g).unwrap();
                        let b = inner_form(&phi, &delta(&conn, &g, &psi).unwrap(), &g).unwrap();
                        worst = worst.max(rel(a, b));
                        cases += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    (
        worst <= 1e-10 && elapsed < Duration::from_secs(30),
        format!("{cases} pairings, max relative defect {worst:.2e} (tol 1e-10), {:.1}s (limit 30s)", elapsed.as_secs_f64()),
    )
}

fn first_variation_check() -> Verdict {
    let l = cubic(3, 3, 1.0);
    let (mut fd_worst, mut pair_worst) = (0.0f64, 0.0f64);
    let step = 1e-4;
    for trial in 0..20 {
        let s = seed("fv", trial);
        let conn = random_connection(l.clone(), 3, s, 0.6).unwrap();
        let b = random_form(l.clone(), 1, 3, s, "b", 1.0);
        for g in [ConformalMetric::uniform(l.clone()), random_metric(&l, s)] {
            for density in [Density::BornInfeld, Density::YangMills] {
                let fv = first_variation(&conn, &b, &g, &density).unwrap();
                let e = |t: f64| energy(&conn.shifted(t, &b).unwrap(), &g, &density);
                let fd = (e(step) - e(-step)) / (2.0 * step);
                fd_worst = fd_worst.max(rel(fd, fv.via_residual));
                pair_worst = pair_worst.max(rel(fv.via_curvature, fv.via_residual));
            }
        }
    }
    (
        fd_worst <= 1e-6 && pair_worst <= 1e-12,
        format!("FD vs analytic {fd_worst:.2e} (tol 1e-6), pairings {pair_worst:.2e} (tol 1e-12)"),
    )
}

fn second_variation_check() -> Verdict {
    let l = cubic(3, 3, 1.0);
    let g = ConformalMetric::uniform(l.clone());
    let (mut fd_worst, mut pair_worst, mut sym_worst) = (0.0f64, 0.0f64, 0.0f64);
    let step = 1e-3;
    for trial in 0..10 {
        let s = seed("sv", trial);
        let conn = random_connection(l.clone(), 3, s, 0.6).unwrap();
        let b = random_form(l.clone(), 1, 3, s, "b", 1.0);
        let b2 = random_form(l.clone(), 1, 3, s, "b2", 1.0);
        for density in [Density::BornInfeld, Density::YangMills] {
            let hq = hess_quadratic(&conn, &b, &g, &density).unwrap();
            let e = |t: f64| energy(&conn.shifted(t, &b).unwrap(), &g, &density);
            let fd = (e(step) - 2.0 * e(0.0) + e(-step)) / (step * step);
            fd_worst = fd_worst.max(rel(fd, hq));
            let sb = hess_operator(&conn, &b, &g, &density).unwrap();
            pair_worst = pair_worst.max(rel(inner_form(&b, &sb, &g).unwrap(), hq));
            let x = inner_form(&b2, &sb, &g).unwrap();
            let y = inner_form(&b, &hess_operator(&conn, &b2, &g, &density).unwrap(), &g).unwrap();
            sym_worst = sym_worst.max(rel(x, y));
        }
    }
    (
        fd_worst <= 1e-5 && pair_worst <= 1e-10 && sym_worst <= 1e-10,
        format!("FD {fd_worst:.2e} (tol 1e-5), pairing {pair_worst:.2e} (tol 1e-10), symmetry {sym_worst:.2e} (tol 1e-10)"),
    )
}

fn bracket_identity() -> Verdict {
    let mut worst = 0.0f64;
    let mut sites = 0;
    for n in 2..=4 {
        let l = cubic(n, 3, 1.0);
        let g = ConformalMetric::uniform(l.clone());
        for trial in 0..5 {
            let s = seed(&format!("br-{n}"), trial);
            let conn = random_connection(l.clone(), 3, s, 0.8).unwrap();
            let b = random_form(l.clone(), 1, 3, s, "b", 1.0);
            for (lhs, rhs) in bracket_pairings(&conn, &g, &b).unwrap() {
                worst = worst.max((lhs - rhs).abs());
                sites += 1;
            }
        }
    }
    (worst <= 1e-12, format!("{sites} sites, max |defect| {worst:.2e} (tol 1e-12)"))
}

fn metric_variation_check() -> Verdict {
    let (mut mv_worst, mut tr_worst) = (0.0f64, 0.0f64);
    let eps = 1e-5;
    for n in [2, 3, 4] {
        let l = cubic(n, 3, 1.0);
        for trial in 0..5 {
            let s = seed(&format!("mv-{n}"), trial);
            let conn = random_connection(l.clone(), 3, s, 0.6).unwrap();
            let u = uniform_field(s, "u", l.num_sites(), -1.0, 1.0);
            for g in [ConformalMetric::uniform(l.clone()), random_metric(&l, s)] {
                for density in [Density::BornInfeld, Density::YangMills] {
                    let stress = stress_energy(&conn, &g, &density);
                    let closed = 0.5 * (0..l.num_sites()).map(|x| u[x] * stress.trace(x) * g.volume(x)).sum::<f64>();
                    let e = |sign: f64| {
                        let scale: Vec<f64> = u.iter().map(|v| 1.0 + sign * eps * v).collect();
                        energy(&conn, &g.scaled_by(&scale).unwrap(), &density)
                    };
                    let fd = (e(1.0) - e(-1.0)) / (2.0 * eps);
                    // floor at the energy: for n = 4 Yang-Mills both sides vanish identically
                    let scale = closed.abs().max(fd.abs()).max(energy(&conn, &g, &density));
                    mv_worst = mv_worst.max((closed - fd).abs() / scale);
                    let q = pointwise_norm2_field(&curvature(&conn), &g);
                    for (x, q) in q.iter().enumerate() {
                        let want = n as f64 * density.value(q / 2.0) - 2.0 * q * density.d1(q / 2.0);
                        tr_worst = tr_worst.max((stress.trace(x) - want).abs());
                    }
                }
            }
        }
    }
    (
        mv_worst <= 1e-7 && tr_worst <= 1e-12,
        format!("closed form vs FD {mv_worst:.2e} (tol 1e-7), trace identity {tr_worst:.2e} (tol 1e-12)"),
    )
}

fn smooth_field(m: usize) -> impl Fn(&[f64], usize) -> AlgebraElement + Sync + Send {
    move |x: &[f64], mu: usize| {
        let n = x.len();
        let next = x[(mu + 1) % n];
        let mut a = AlgebraElement::generator(m, 0, 1).scaled(0.5 * next.sin() + 0.3 * (x[mu] + 0.5).cos());
        if m >= 3 {
            a += AlgebraElement::generator(m, 0, 2).scaled(0.4 * (next + 0.3 * mu as f64).cos());
            a += AlgebraElement::generator(m, 1, 2).scaled(0.3 * (x[0] + 1.0 + mu as f64).sin());
        }
        a
    }
}

/// Least-squares slope of `ln y` against `ln h`.
fn loglog_slope(h: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

struct Refinement {
    h: Vec<f64>,
    divergence_gap: Vec<f64>,
    bianchi: Vec<f64>,
}

fn refine(n: usize, m: usize, sizes: &[usize]) -> Refinement {
    let mut out = Refinement {
        h: vec![],
        divergence_gap: vec![],
        bianchi: vec![],
    };
    for &l in sizes {
        let h = 2.0 * PI / l as f64;
        let lat = cubic(n, l, h);
        let g = ConformalMetric::uniform(lat.clone());
        let conn = Connection::sample_continuum(lat, m, smooth_field(m));
        let direct = div_direct(&stress_energy(&conn, &g, &Density::BornInfeld), &g).unwrap();
        let formula = div_formula(&conn, &g, &Density::BornInfeld).unwrap();
        out.h.push(h);
        out.divergence_gap.push(direct.distance(&formula.total, &g));
        out.bianchi.push(bianchi_residual(&conn, &g));
    }
    out
}

fn conservation() -> Verdict {
    let sizes = [8, 16, 32];
    let mut ok = true;
    let mut parts = vec![];
    for m in [2, 3] {
        let r = refine(2, m, &sizes);
        let slope = loglog_slope(&r.h, &r.divergence_gap);
        let bianchi = r.bianchi.iter().fold(0.0f64, |a, b| a.max(*b));
        ok &= slope >= 0.9 && bianchi <= 1e-12;
        parts.push(format!("n=2 m={m}: divergence gap slope {slope:.3}, Bianchi {bianchi:.1e} (no 3-cells)"));
    }
    let r3 = refine(3, 3, &sizes);
    let bslope = loglog_slope(&r3.h, &r3.bianchi);
    ok &= bslope >= 0.9;
    parts.push(format!("n=3 m=3: Bianchi slope {bslope:.3}"));

    let l = cubic(2, 8, 1.0);
    let g = ConformalMetric::uniform(l.clone());
    let d0 = coexact_connection(l, 3, 5, 0.05).unwrap();
    let cfg = FlowConfig::default();
    let flowed = minimize(&d0, &g, &Density::BornInfeld, &cfg).unwrap();
    let terms = div_formula(&flowed.connection, &g, &Density::BornInfeld).unwrap();
    let res = flowed.final_row().residual;
    ok &= flowed.status == FlowStatus::Converged && res <= 1e-8 && terms.coderivative.norm <= 1e-7;
    parts.push(format!(
        "flowed BI point: residual {res:.2e}, coderivative term {:.2e} (tol 1e-7)",
        terms.coderivative.norm
    ));
    (ok, parts.join("; "))
}

fn quartic_sigma(q: f64) -> f64 {
    let t = q / 2.0;
    if t == 0.0 {
        1.0
    } else {
        ((-1.0 + (1.0 + 8.0 * t).sqrt()) / (4.0 * t)).sqrt()
    }
}

fn functional_equation() -> Verdict {
    let (mut fe, mut quartic) = (0.0f64, 0.0f64);
    for n in [5, 6] {
        let l = cubic(n, 3, 1.0);
        let g = ConformalMetric::uniform(l.clone());
        for trial in 0..5 {
            let conn = random_connection(l.clone(), 3, seed(&format!("fe-{n}"), trial), 0.3 + 0.3 * trial as f64).unwrap();
            let sigma = sigma_field(&conn, &g, n).unwrap();
            for (s, q) in sigma.values.iter().zip(&sigma.curvature_norm2) {
                let e = 0.5 * (n as f64 - 4.0);
                fe = fe.max((s.powf(e) * (1.0 + s * s * q).sqrt() - 1.0).abs());
                if n == 6 {
                    quartic = quartic.max((s - quartic_sigma(*q)).abs());
                }
            }
        }
    }
    (
        fe <= 1e-10 && quartic <= 1e-10,
        format!("functional equation {fe:.2e} (tol 1e-10), n=6 quartic root {quartic:.2e} (tol 1e-10)"),
    )
}

fn end_to_end() -> Verdict {
    let start = Instant::now();
    let l = cubic(5, 3, 1.0);
    let g = ConformalMetric::uniform(l.clone());
    let mut ok = true;
    let mut parts = vec![];
    for m in [2, 3] {
        let d0 = coexact_connection(l.clone(), m, 1, 0.02).unwrap();
        let cfg = FlowConfig::default();
        let flowed = minimize(&d0, &g, &Density::YangMills, &cfg).unwrap();
        let conn = &flowed.connection;
        let ym = norm_form(&delta(conn, &g, &curvature(conn)).unwrap(), &g);
        let rep = step2_verify(conn, &g, 5).unwrap();
        let bi = norm_form(&el_residual(conn, &rep.rescaled, &Density::BornInfeld).unwrap(), &g);
        let bound = rep.max_sigma_power * 1e-8;
        ok &= flowed.status == FlowStatus::Converged && ym <= 1e-8 && bi <= bound && rep.proportionality_defect <= 1e-10;
        parts.push(format!(
            "m={m}: {} its, r_YM {ym:.2e}, r_BI {bi:.2e} <= {bound:.2e}, defect {:.2e}",
            flowed.iterations(),
            rep.proportionality_defect
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    parts.push(format!("{:.1}s (limit 600s)", elapsed.as_secs_f64()));
    (ok, parts.join("; "))
}

fn spectrum_sanity() -> Verdict {
    let l = cubic(2, 8, 1.0);
    let g = ConformalMetric::uniform(l.clone());
    let flat = Connection::flat(l.clone(), 2);
    let spec = spectrum(&flat, &g, &Density::BornInfeld, &SpectrumOptions { k: 128, ..Default::default() }).unwrap();
    let oracle = 4.0 * (PI / 8.0).sin().powi(2);
    let first = spec.eigenvalues.iter().copied().find(|v| *v > spec.tau).unwrap_or(f64::NAN);
    let mut kernel = 0.0f64;
    for axis in 0..2 {
        let b = PForm::from_fn(l.clone(), 1, 2, |_, c| {
            if c == axis {
                AlgebraElement::generator(2, 0, 1)
            } else {
                AlgebraElement::zero(2)
            }
        });
        kernel = kernel.max(hess_operator(&flat, &b, &g, &Density::BornInfeld).unwrap().max_abs());
    }
    (
        (first - oracle).abs() <= 1e-10 && spec.index == 0 && kernel <= 1e-12,
        format!(
            "first nonzero {first:.12} vs 4sin^2(pi/8) {oracle:.12}, index {}, nullity {}, constant forms {kernel:.1e}",
            spec.index, spec.nullity
        ),
    )
}

fn run_bin(args: &[&str], dir: &std::path::Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_biym")).args(args).current_dir(dir).output().expect("spawn biym")
}

fn infrastructure() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("run.toml"),
        "[lattice]\nn = 3\nsize = 3\n[fiber]\nm = 3\n[flow]\nmax_iters = 200\namplitude = 0.3\n",
    )
    .unwrap();
    let a = run_bin(&["flow", "--config", "run.toml", "--out", "a", "--quiet", "--seed", "9"], p);
    let b = run_bin(&["flow", "--config", "run.toml", "--out", "b", "--quiet", "--seed", "9"], p);
    let read = |f: &str| std::fs::read(p.join(f)).unwrap_or_default();
    let reproducible = a.status.code() == b.status.code()
        && !read("a/trace.csv").is_empty()
        && read("a/trace.csv") == read("b/trace.csv")
        && read("a/flow.biym") == read("b/flow.biym");

    let bytes = read("a/flow.biym");
    let round_trip = Snapshot::from_bytes(&bytes).map(|s| s.to_bytes() == bytes).unwrap_or(false);
    let reloaded = Snapshot::load(&p.join("a/flow.biym")).and_then(|s| {
        s.save(&p.join("copy.biym"))?;
        Ok(read("copy.biym") == bytes)
    });
    let round_trip = round_trip && reloaded.unwrap_or(false);

    let v = run_bin(&["verify", "--out", "v", "--quiet"], p);
    let verify_ok = v.status.code() == Some(0);
    (
        reproducible && round_trip && verify_ok,
        format!("snapshot round trip {round_trip}, seeded reruns identical {reproducible}, verify exit {:?}", v.status.code()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("adjointness", adjointness),
        ("first variation", first_variation_check),
        ("second variation", second_variation_check),
        ("bracket identity", bracket_identity),
        ("metric variation", metric_variation_check),
        ("conservation", conservation),
        ("conformal factor", functional_equation),
        ("end to end", end_to_end),
        ("spectrum", spectrum_sanity),
        ("infrastructure", infrastructure),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let (pass, detail) = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        if !pass {
            failed += 1;
        }
        println!("acceptance {:>2} {:<18} {}  {detail}", i + 1, name, if pass { "PASS" } else { "FAIL" });
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
