//! Periodic hypercubic lattice, conformally flat metrics, and bundle-valued
//! p-forms.
//!
//! Form components are stored per site for every strictly increasing axis
//! tuple of length `p`, in lexicographic order of the tuples. Components are
//! taken with respect to lattice-index coordinates, so a metric `g = c·g_flat`
//! with spacing `h` has `g_μμ = c h²` in these coordinates. Every cell is
//! anchored at its lexicographically smallest corner (the base site) and uses
//! the conformal factor there.

use std::sync::Arc;

use crate::algebra::{algebra_dim, AlgebraElement};
use crate::error::{Error, Result};
use crate::par;

/// Highest form degree carried by the lattice.
pub const MAX_DEGREE: usize = 3;

#[derive(Clone, Debug)]
pub(crate) struct DegreeBasis {
    pub(crate) tuples: Vec<Vec<usize>>,
    index_by_mask: Vec<usize>,
    /// For each tuple J: `(sign, axis removed, index of J∖axis in degree p−1)`.
    pub(crate) faces: Vec<Vec<(f64, usize, usize)>>,
    /// For each tuple I: `(sign, axis added, index of I∪axis in degree p+1)`;
    /// the sign is `(−1)^k` with `k` the position of the added axis.
    pub(crate) cofaces: Vec<Vec<(f64, usize, usize)>>,
}

fn combinations(n: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for a in start..n {
            cur.push(a);
            rec(a + 1, n, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, p, &mut Vec::new(), &mut out);
    out
}

fn mask_of(t: &[usize]) -> usize {
    t.iter().fold(0, |m, &a| m | (1 << a))
}

fn build_bases(n: usize) -> Vec<DegreeBasis> {
    let mut bases: Vec<DegreeBasis> = (0..=MAX_DEGREE)
        .map(|p| {
            let tuples = combinations(n, p);
            let mut index_by_mask = vec![usize::MAX; 1 << n];
            for (i, t) in tuples.iter().enumerate() {
                index_by_mask[mask_of(t)] = i;
            }
            DegreeBasis {
                faces: vec![Vec::new(); tuples.len()],
                cofaces: vec![Vec::new(); tuples.len()],
                tuples,
                index_by_mask,
            }
        })
        .collect();
    for p in 1..=MAX_DEGREE {
        for j in 0..bases[p].tuples.len() {
            let tuple = bases[p].tuples[j].clone();
            for (k, &axis) in tuple.iter().enumerate() {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let face_mask = mask_of(&tuple) & !(1 << axis);
                let i = bases[p - 1].index_by_mask[face_mask];
                bases[p].faces[j].push((sign, axis, i));
                bases[p - 1].cofaces[i].push((sign, axis, j));
            }
        }
    }
    for b in &mut bases {
        for c in &mut b.cofaces {
            c.sort_by_key(|&(_, axis, _)| axis);
        }
    }
    bases
}

/// A periodic hypercubic lattice with `n` axes and uniform spacing `h`.
#[derive(Clone, Debug)]
pub struct LatticeSpec {
    extents: Vec<usize>,
    h: f64,
    strides: Vec<usize>,
    sites: usize,
    bases: Vec<DegreeBasis>,
}

impl PartialEq for LatticeSpec {
    fn eq(&self, other: &Self) -> bool {
        self.extents == other.extents && self.h == other.h
    }
}

impl LatticeSpec {
    pub fn new(extents: Vec<usize>, h: f64) -> Result<Self> {
        let n = extents.len();
        if !(2..=6).contains(&n) {
            return Err(Error::InvalidLattice(format!("dimension {n} outside 2..=6")));
        }
        if let Some(l) = extents.iter().find(|&&l| l < 3) {
            return Err(Error::InvalidLattice(format!("extent {l} < 3")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidLattice(format!("spacing {h} must be positive")));
        }
        let mut strides = vec![1; n];
        for a in (0..n - 1).rev() {
            strides[a] = strides[a + 1] * extents[a + 1];
        }
        let sites = extents.iter().product();
        Ok(Self {
            bases: build_bases(n),
            extents,
            h,
            strides,
            sites,
        })
    }

    /// `L^n` lattice.
    pub fn cubic(n: usize, l: usize, h: f64) -> Result<Self> {
        Self::new(vec![l; n], h)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn num_sites(&self) -> usize {
        self.sites
    }

    /// Number of axis tuples of length `p` (components per site).
    #[inline]
    pub fn components(&self, p: usize) -> usize {
        self.bases[p].tuples.len()
    }

    /// Number of p-cells: `N · C(n, p)`.
    pub fn num_cells(&self, p: usize) -> usize {
        self.sites * self.components(p)
    }

    /// Axis tuple of component `comp` in degree `p`.
    pub fn axes(&self, p: usize, comp: usize) -> &[usize] {
        &self.bases[p].tuples[comp]
    }

    /// Component index of a strictly increasing tuple.
    pub fn component_index(&self, axes: &[usize]) -> Option<usize> {
        let p = axes.len();
        if p > MAX_DEGREE || axes.windows(2).any(|w| w[0] >= w[1]) || axes.iter().any(|&a| a >= self.dim()) {
            return None;
        }
        let i = self.bases[p].index_by_mask[mask_of(axes)];
        (i != usize::MAX).then_some(i)
    }

    pub(crate) fn basis(&self, p: usize) -> &DegreeBasis {
        &self.bases[p]
    }

    /// Lexicographic coordinates of a site (axis 0 most significant).
    pub fn coords(&self, site: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.extents)
            .map(|(s, l)| (site / s) % l)
            .collect()
    }

    pub fn site_of(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.extents)
            .zip(&self.strides)
            .map(|((x, l), s)| (x % l) * s)
            .sum()
    }

    /// Neighbor one step forward along `axis`, periodically wrapped.
    #[inline]
    pub fn forward(&self, site: usize, axis: usize) -> usize {
        let s = self.strides[axis];
        let l = self.extents[axis];
        if (site / s) % l == l - 1 {
            site + s - l * s
        } else {
            site + s
        }
    }

    /// Neighbor one step backward along `axis`, periodically wrapped.
    #[inline]
    pub fn backward(&self, site: usize, axis: usize) -> usize {
        let s = self.strides[axis];
        let l = self.extents[axis];
        if (site / s) % l == 0 {
            site + l * s - s
        } else {
            site - s
        }
    }
}

/// A metric `c(x)·g_flat` on the lattice with a positive factor per site.
#[derive(Clone, Debug)]
pub struct ConformalMetric {
    lattice: Arc<LatticeSpec>,
    factor: Vec<f64>,
    weights: Vec<[f64; MAX_DEGREE + 1]>,
    uniform: bool,
}

impl PartialEq for ConformalMetric {
    fn eq(&self, other: &Self) -> bool {
        self.lattice == other.lattice && self.factor == other.factor
    }
}

impl ConformalMetric {
    pub fn uniform(lattice: Arc<LatticeSpec>) -> Self {
        let n = lattice.num_sites();
        Self::from_factors(lattice, vec![1.0; n]).expect("unit factor is valid")
    }

    pub fn from_factors(lattice: Arc<LatticeSpec>, factor: Vec<f64>) -> Result<Self> {
        if factor.len() != lattice.num_sites() {
            return Err(Error::ShapeMismatch(format!(
                "{} conformal factors for {} sites",
                factor.len(),
                lattice.num_sites()
            )));
        }
        if let Some(c) = factor.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::InvalidMetric(format!("conformal factor {c} is not positive")));
        }
        let n = lattice.dim() as f64;
        let h = lattice.spacing();
        let weights = factor
            .iter()
            .map(|&c| {
                let mut w = [0.0; MAX_DEGREE + 1];
                for (p, wp) in w.iter_mut().enumerate() {
                    let p = p as f64;
                    *wp = c.powf(0.5 * n - p) * h.powf(n - 2.0 * p);
                }
                w
            })
            .collect();
        let uniform = factor.iter().all(|&c| c == factor[0]);
        Ok(Self {
            lattice,
            factor,
            weights,
            uniform,
        })
    }

    pub fn lattice(&self) -> &Arc<LatticeSpec> {
        &self.lattice
    }

    pub fn factors(&self) -> &[f64] {
        &self.factor
    }

    #[inline]
    pub fn factor(&self, site: usize) -> f64 {
        self.factor[site]
    }

    /// True when the conformal factor is the same at every site.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// `c^(n/2 − p) · h^(n − 2p)`: the pairing weight of a p-cell anchored at `site`.
    #[inline]
    pub fn weight(&self, p: usize, site: usize) -> f64 {
        self.weights[site][p]
    }

    /// Riemannian volume of the cell at `site`, `c^(n/2) hⁿ`.
    #[inline]
    pub fn volume(&self, site: usize) -> f64 {
        self.weights[site][0]
    }

    /// Factor turning `Σ ⟨φ_I, φ_I⟩` over index components into the
    /// orthonormal-frame norm for a p-form: `(c h²)^(−p)`.
    #[inline]
    pub fn frame_factor(&self, p: usize, site: usize) -> f64 {
        (self.factor[site] * self.lattice.spacing().powi(2)).powi(-(p as i32))
    }

    /// Metric with factor `c(x)·s(x)`.
    pub fn scaled_by(&self, s: &[f64]) -> Result<Self> {
        if s.len() != self.factor.len() {
            return Err(Error::ShapeMismatch("scaling field length".into()));
        }
        Self::from_factors(
            self.lattice.clone(),
            self.factor.iter().zip(s).map(|(c, s)| c * s).collect(),
        )
    }

    pub(crate) fn require_uniform(&self, what: &str) -> Result<()> {
        if self.uniform {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("{what} requires a uniform metric")))
        }
    }
}

/// `weight(metric, p, site)` as a free function.
pub fn weight(metric: &ConformalMetric, p: usize, site: usize) -> f64 {
    metric.weight(p, site)
}

/// A p-form on the lattice with values in `so(m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PForm {
    p: usize,
    m: usize,
    lattice: Arc<LatticeSpec>,
    values: Vec<AlgebraElement>,
}

impl PForm {
    pub fn zeros(lattice: Arc<LatticeSpec>, p: usize, m: usize) -> Self {
        assert!(p <= MAX_DEGREE, "form degree {p} above {MAX_DEGREE}");
        let len = lattice.num_cells(p);
        Self {
            p,
            m,
            values: vec![AlgebraElement::zero(m); len],
            lattice,
        }
    }

    /// Builds a form from `f(site, component)`, evaluated cell-parallel.
    pub fn from_fn<F>(lattice: Arc<LatticeSpec>, p: usize, m: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> AlgebraElement + Sync + Send,
    {
        assert!(p <= MAX_DEGREE, "form degree {p} above {MAX_DEGREE}");
        let comps = lattice.components(p);
        let values = par::map_range(lattice.num_cells(p), |cell| {
            let v = f(cell / comps, cell % comps);
            debug_assert_eq!(v.fiber_dim(), m);
            v
        });
        Self {
            p,
            m,
            lattice,
            values,
        }
    }

    pub(crate) fn from_values(lattice: Arc<LatticeSpec>, p: usize, m: usize, values: Vec<AlgebraElement>) -> Self {
        debug_assert_eq!(values.len(), lattice.num_cells(p));
        Self {
            p,
            m,
            lattice,
            values,
        }
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn fiber_dim(&self) -> usize {
        self.m
    }

    pub fn lattice(&self) -> &Arc<LatticeSpec> {
        &self.lattice
    }

    pub fn values(&self) -> &[AlgebraElement] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [AlgebraElement] {
        &mut self.values
    }

    #[inline]
    pub fn comps(&self) -> usize {
        self.lattice.components(self.p)
    }

    #[inline]
    pub fn get(&self, site: usize, comp: usize) -> &AlgebraElement {
        &self.values[site * self.comps() + comp]
    }

    #[inline]
    pub fn get_mut(&mut self, site: usize, comp: usize) -> &mut AlgebraElement {
        let c = self.comps();
        &mut self.values[site * c + comp]
    }

    /// Component for an arbitrary axis tuple, extended antisymmetrically
    /// (zero when an axis repeats).
    pub fn component(&self, site: usize, axes: &[usize]) -> AlgebraElement {
        assert_eq!(axes.len(), self.p);
        let mut sorted = axes.to_vec();
        let mut sign = 1.0;
        for i in 0..sorted.len() {
            for j in 0..sorted.len() - 1 - i {
                if sorted[j] > sorted[j + 1] {
                    sorted.swap(j, j + 1);
                    sign = -sign;
                } else if sorted[j] == sorted[j + 1] {
                    return AlgebraElement::zero(self.m);
                }
            }
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return AlgebraElement::zero(self.m);
        }
        let comp = self
            .lattice
            .component_index(&sorted)
            .expect("axes inside the lattice");
        self.get(site, comp).scaled(sign)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.p == other.p && self.m == other.m && self.lattice == other.lattice
    }

    pub(crate) fn check_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{what}: ({}-form, so({})) vs ({}-form, so({}))",
                self.p, self.m, other.p, other.m
            )))
        }
    }

    /// `self += s · other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        assert!(self.same_shape(other), "axpy on mismatched forms");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.axpy(s, b);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.scaled(s));
        out
    }

    /// Multiplies every cell by the scalar at its base site.
    pub fn scaled_by_sites(&self, field: &[f64]) -> Self {
        assert_eq!(field.len(), self.lattice.num_sites());
        let comps = self.comps();
        let mut out = self.clone();
        for (cell, v) in out.values.iter_mut().enumerate() {
            *v = v.scaled(field[cell / comps]);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.max_abs()))
    }

    /// Flattened coefficients: cell order, then upper-triangle order.
    pub fn to_coeffs(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| v.coeffs().to_vec()).collect()
    }

    pub fn from_coeffs(lattice: Arc<LatticeSpec>, p: usize, m: usize, coeffs: &[f64]) -> Result<Self> {
        let d = algebra_dim(m);
        let cells = lattice.num_cells(p);
        if coeffs.len() != cells * d {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for {} cells of so({m})",
                coeffs.len(),
                cells
            )));
        }
        let values = (0..cells)
            .map(|c| AlgebraElement::from_coeffs(m, &coeffs[c * d..(c + 1) * d]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_values(lattice, p, m, values))
    }
}

/// Weighted L² pairing `Σ_cells weight · ⟨φ, ψ⟩`.
pub fn inner_form(phi: &PForm, psi: &PForm, metric: &ConformalMetric) -> Result<f64> {
    phi.check_shape(psi, "inner_form")?;
    if phi.lattice() != metric.lattice() {
        return Err(Error::ShapeMismatch("form and metric live on different lattices".into()));
    }
    let p = phi.degree();
    let comps = phi.comps();
    Ok(par::sum_range(phi.lattice().num_sites(), |site| {
        let local: f64 = (0..comps)
            .map(|c| phi.get(site, c).inner(psi.get(site, c)))
            .sum();
        metric.weight(p, site) * local
    }))
}

/// `‖φ‖` in the weighted L² pairing.
pub fn norm_form(phi: &PForm, metric: &ConformalMetric) -> f64 {
    inner_form(phi, phi, metric).expect("same shape").abs().sqrt()
}

/// Orthonormal-frame squared norm of a 2-form at one site,
/// `Σ_{μ<ν} ⟨φ_μν, φ_μν⟩ · c⁻² h⁻⁴`.
pub fn pointwise_norm2(phi: &PForm, metric: &ConformalMetric, site: usize) -> f64 {
    assert_eq!(phi.degree(), 2, "pointwise_norm2 expects a 2-form");
    let raw: f64 = (0..phi.comps()).map(|c| phi.get(site, c).norm2()).sum();
    raw * metric.frame_factor(2, site)
}

/// [`pointwise_norm2`] at every site.
pub fn pointwise_norm2_field(phi: &PForm, metric: &ConformalMetric) -> Vec<f64> {
    par::map_range(phi.lattice().num_sites(), |site| pointwise_norm2(phi, metric, site))
}
