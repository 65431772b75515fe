//! Low end of the spectrum of `𝒮ᴰ` on 1-forms: index, nullity, and the
//! gauge-direction count.
//!
//! Under a uniform metric the 1-form pairing is a constant multiple of the
//! Euclidean product on the flattened coefficients, so `𝒮ᴰ` is a symmetric
//! matrix in those coordinates. Small problems are solved densely; larger ones
//! run block-Krylov Rayleigh–Ritz with full reorthogonalization, which needs
//! only operator applications and keeps repeated eigenvalues.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::algebra::algebra_dim;
use crate::calculus::{d, Connection};
use crate::error::{Error, Result};
use crate::functional::{hess_operator, Density};
use crate::lattice::{ConformalMetric, PForm};
use crate::rng;

#[derive(Clone, Debug)]
pub struct SpectrumOptions {
    /// How many of the lowest eigenvalues to report.
    pub k: usize,
    /// Null threshold; `None` means `1e-8 · max|λ|`.
    pub tau: Option<f64>,
    /// Largest dimension solved densely.
    pub dense_limit: usize,
    /// Largest dimension for which the gauge count is computed.
    pub gauge_limit: usize,
    /// Krylov basis cap for the iterative solver.
    pub max_basis: usize,
    /// Relative Ritz residual accepted by the iterative solver.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            k: 16,
            tau: None,
            dense_limit: 4000,
            gauge_limit: 2000,
            max_basis: 600,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumMethod {
    Dense,
    Iterative { basis: usize, residuals: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Lowest eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub index: usize,
    pub nullity: usize,
    /// False when every computed eigenvalue is `≤ τ`, so the iterative solver
    /// may have stopped short of the full negative and null space.
    pub counts_complete: bool,
    pub tau: f64,
    /// Largest |λ| seen (exact in the dense case, Ritz estimate otherwise).
    pub scale: f64,
    pub dimension: usize,
    /// Rank of `dᴰ` on 0-forms, when computed.
    pub gauge_dim: Option<usize>,
    /// Near-null eigenvalues of `𝒮ᴰ` compressed onto the gauge directions.
    pub gauge_null: Option<usize>,
    pub method: SpectrumMethod,
}

struct Operator<'a> {
    conn: &'a Connection,
    metric: &'a ConformalMetric,
    density: &'a Density,
}

impl Operator<'_> {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let lattice = self.conn.lattice().clone();
        let b = PForm::from_coeffs(lattice, 1, self.conn.fiber_dim(), x).expect("flattened 1-form");
        hess_operator(self.conn, &b, self.metric, self.density)
            .expect("uniform metric checked")
            .to_coeffs()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += s * x);
}

/// Orthogonalizes `v` against `basis` twice and normalizes it; `None` if it
/// collapses below `drop` relative to its starting norm.
fn orthonormalize(mut v: Vec<f64>, basis: &[Vec<f64>], drop: f64) -> Option<Vec<f64>> {
    let start = dot(&v, &v).sqrt();
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &v);
            axpy(&mut v, -c, q);
        }
    }
    let norm = dot(&v, &v).sqrt();
    if norm <= drop * start {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

fn count(eigs: &[f64], tau: f64) -> (usize, usize) {
    let index = eigs.iter().filter(|&&l| l < -tau).count();
    let nullity = eigs.iter().filter(|&&l| l.abs() <= tau).count();
    (index, nullity)
}

/// The lowest `k` eigenvalues of `𝒮ᴰ` with its index and nullity.
///
/// The dense path counts over the full spectrum. The iterative path counts
/// over the `k` computed values, so `k` should exceed index plus nullity.
pub fn spectrum(
    conn: &Connection,
    metric: &ConformalMetric,
    density: &Density,
    opts: &SpectrumOptions,
) -> Result<Spectrum> {
    metric.require_uniform("spectrum")?;
    if metric.lattice() != conn.lattice() {
        return Err(Error::ShapeMismatch("metric and connection lattices differ".into()));
    }
    let lattice = conn.lattice();
    let dim = lattice.num_cells(1) * algebra_dim(conn.fiber_dim());
    if dim == 0 {
        return Err(Error::Domain("empty 1-form space (fiber so(1))".into()));
    }
    let k = opts.k.min(dim).max(1);
    let op = Operator { conn, metric, density };

    if dim <= opts.dense_limit {
        let mut mat = DMatrix::<f64>::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        for j in 0..dim {
            e[j] = 1.0;
            let col = op.apply(&e);
            e[j] = 0.0;
            mat.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        let sym = (&mat + mat.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut all: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = all.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let tau = opts.tau.unwrap_or(1e-8 * scale);
        let (index, nullity) = count(&all, tau);
        let eigenvalues = all[..k].to_vec();
        let (gauge_dim, gauge_null) = if dim <= opts.gauge_limit {
            let (gd, gn) = gauge_count(&op, tau)?;
            (Some(gd), Some(gn))
        } else {
            (None, None)
        };
        return Ok(Spectrum {
            eigenvalues,
            index,
            nullity,
            counts_complete: true,
            tau,
            scale,
            dimension: dim,
            gauge_dim,
            gauge_null,
            method: SpectrumMethod::Dense,
        });
    }

    let solved = block_krylov(&op, dim, k, opts)?;
    let tau = opts.tau.unwrap_or(1e-8 * solved.scale);
    let (index, nullity) = count(&solved.values, tau);
    let counts_complete = solved.values.last().is_some_and(|&l| l > tau);
    Ok(Spectrum {
        eigenvalues: solved.values,
        index,
        nullity,
        counts_complete,
        tau,
        scale: solved.scale,
        dimension: dim,
        gauge_dim: None,
        gauge_null: None,
        method: SpectrumMethod::Iterative {
            basis: solved.basis,
            residuals: solved.residuals,
        },
    })
}

fn gauge_count(op: &Operator<'_>, tau: f64) -> Result<(usize, usize)> {
    let conn = op.conn;
    let lattice = conn.lattice().clone();
    let m = conn.fiber_dim();
    let ad = algebra_dim(m);
    let zero_dim = lattice.num_sites() * ad;
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut e = vec![0.0; zero_dim];
    for j in 0..zero_dim {
        e[j] = 1.0;
        let s = PForm::from_coeffs(lattice.clone(), 0, m, &e)?;
        e[j] = 0.0;
        let v = d(conn, &s)?.to_coeffs();
        if let Some(v) = orthonormalize(v, &q, 1e-8) {
            q.push(v);
        }
    }
    let g = q.len();
    if g == 0 {
        return Ok((0, 0));
    }
    let sq: Vec<Vec<f64>> = q.iter().map(|v| op.apply(v)).collect();
    let compressed = DMatrix::from_fn(g, g, |i, j| 0.5 * (dot(&q[i], &sq[j]) + dot(&q[j], &sq[i])));
    let eig = SymmetricEigen::new(compressed);
    let null = eig.eigenvalues.iter().filter(|l| l.abs() <= tau).count();
    Ok((g, null))
}

struct KrylovResult {
    values: Vec<f64>,
    residuals: Vec<f64>,
    scale: f64,
    basis: usize,
}

fn block_krylov(op: &Operator<'_>, dim: usize, k: usize, opts: &SpectrumOptions) -> Result<KrylovResult> {
    let block = k.min(dim);
    let cap = opts.max_basis.max(2 * block).min(dim);
    let mut rng = rng::stream(opts.seed, "spectrum-start", 0);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    // Vᵀ A V, grown incrementally
    let mut t = DMatrix::<f64>::zeros(0, 0);
    let mut fresh: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut last = KrylovResult {
        values: Vec::new(),
        residuals: Vec::new(),
        scale: 0.0,
        basis: 0,
    };
    loop {
        let start = basis.len();
        for v in fresh.drain(..) {
            if basis.len() >= cap {
                break;
            }
            if let Some(q) = orthonormalize(v, &basis, 1e-10) {
                images.push(op.apply(&q));
                basis.push(q);
            }
        }
        let s = basis.len();
        if s == start {
            // Krylov space exhausted; restart directions from fresh noise
            if s >= cap {
                break;
            }
            fresh = (0..block)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            continue;
        }
        let mut grown = DMatrix::<f64>::zeros(s, s);
        grown.view_mut((0, 0), (start, start)).copy_from(&t);
        for i in 0..s {
            for j in start.max(i)..s {
                let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                grown[(i, j)] = v;
                grown[(j, i)] = v;
            }
            if i >= start {
                for j in 0..start {
                    let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                    grown[(i, j)] = v;
                    grown[(j, i)] = v;
                }
            }
        }
        t = grown;
        let eig = SymmetricEigen::new(t.clone());
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let take = k.min(s);
        let mut values = Vec::with_capacity(take);
        let mut residuals = Vec::with_capacity(take);
        for &idx in order.iter().take(take) {
            let theta = eig.eigenvalues[idx];
            let y = eig.eigenvectors.column(idx);
            let mut r = vec![0.0; dim];
            for (c, (v, av)) in y.iter().zip(basis.iter().zip(&images)) {
                axpy(&mut r, *c, av);
                axpy(&mut r, -c * theta, v);
            }
            values.push(theta);
            residuals.push(dot(&r, &r).sqrt());
        }
        let converged = take == k && residuals.iter().all(|&r| r <= opts.tol * scale.max(1e-300));
        last = KrylovResult {
            values,
            residuals,
            scale,
            basis: s,
        };
        if converged || s >= dim {
            return Ok(last);
        }
        if s >= cap {
            break;
        }
        fresh = images[start..s].to_vec();
    }
    Err(Error::NoConvergence(format!(
        "block Krylov stopped at basis {} with Ritz residuals {:?} (tol {:.1e} x {:.3e})",
        last.basis, last.residuals, opts.tol, last.scale
    )))
}
