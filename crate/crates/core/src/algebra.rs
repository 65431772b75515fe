//! The fiber algebra `so(m)` for `m ≤ 4`.
//!
//! Elements are stored by their strict upper triangle (row-major), which keeps
//! skew-symmetry exact by construction. With that storage the pairing
//! `⟨A, B⟩ = ½ tr(AᵀB)` is the plain dot product of the stored coefficients.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest supported fiber dimension.
pub const MAX_FIBER: usize = 4;
const MAX_COEFFS: usize = MAX_FIBER * (MAX_FIBER - 1) / 2;

type Dense = [[f64; MAX_FIBER]; MAX_FIBER];

/// Dimension of `so(m)`.
pub const fn algebra_dim(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Position of entry `(i, j)`, `i < j`, in the upper-triangle storage.
#[inline]
pub const fn coeff_index(m: usize, i: usize, j: usize) -> usize {
    i * m - i * (i + 1) / 2 + (j - i - 1)
}

/// A skew-symmetric `m × m` real matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgebraElement {
    m: usize,
    coeffs: [f64; MAX_COEFFS],
}

impl AlgebraElement {
    pub fn zero(m: usize) -> Self {
        assert!(
            (1..=MAX_FIBER).contains(&m),
            "fiber dimension {m} outside 1..={MAX_FIBER}"
        );
        Self {
            m,
            coeffs: [0.0; MAX_COEFFS],
        }
    }

    /// The elementary generator `E_ij − E_ji`.
    pub fn generator(m: usize, i: usize, j: usize) -> Self {
        assert!(i != j && i < m && j < m, "bad generator indices ({i}, {j}) for m={m}");
        let mut a = Self::zero(m);
        if i < j {
            a.coeffs[coeff_index(m, i, j)] = 1.0;
        } else {
            a.coeffs[coeff_index(m, j, i)] = -1.0;
        }
        a
    }

    pub fn from_coeffs(m: usize, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() != algebra_dim(m) {
            return Err(Error::ShapeMismatch(format!(
                "so({m}) has {} coefficients, got {}",
                algebra_dim(m),
                coeffs.len()
            )));
        }
        let mut a = Self::zero(m);
        a.coeffs[..coeffs.len()].copy_from_slice(coeffs);
        Ok(a)
    }

    /// Builds an element from a dense row-major matrix, rejecting anything that
    /// is not skew-symmetric to `1e-12`.
    pub fn from_dense(m: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != m * m {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries, got {}",
                m * m,
                entries.len()
            )));
        }
        let mut a = Self::zero(m);
        for i in 0..m {
            if entries[i * m + i].abs() > 1e-12 {
                return Err(Error::Domain(format!("diagonal entry ({i},{i}) is nonzero")));
            }
            for j in i + 1..m {
                let (u, l) = (entries[i * m + j], entries[j * m + i]);
                if (u + l).abs() > 1e-12 * (1.0 + u.abs()) {
                    return Err(Error::Domain(format!("entries ({i},{j}) and ({j},{i}) not skew")));
                }
                a.coeffs[coeff_index(m, i, j)] = u;
            }
        }
        Ok(a)
    }

    #[inline]
    pub fn fiber_dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs[..algebra_dim(self.m)]
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        let d = algebra_dim(self.m);
        &mut self.coeffs[..d]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.coeffs[coeff_index(self.m, i, j)],
            std::cmp::Ordering::Greater => -self.coeffs[coeff_index(self.m, j, i)],
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let m = self.m;
        (0..m * m).map(|k| self.entry(k / m, k % m)).collect()
    }

    fn dense(&self) -> Dense {
        let mut d = [[0.0; MAX_FIBER]; MAX_FIBER];
        for i in 0..self.m {
            for j in i + 1..self.m {
                let v = self.coeffs[coeff_index(self.m, i, j)];
                d[i][j] = v;
                d[j][i] = -v;
            }
        }
        d
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs().iter().all(|&c| c == 0.0)
    }

    /// Commutator `AB − BA`. Panics on mismatched fiber dimensions.
    pub fn bracket(&self, other: &Self) -> Self {
        assert_eq!(self.m, other.m, "bracket of so({}) with so({})", self.m, other.m);
        let m = self.m;
        let mut out = Self::zero(m);
        if m <= 2 {
            return out;
        }
        let (a, b) = (self.dense(), other.dense());
        for i in 0..m {
            for j in i + 1..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += a[i][k] * b[k][j] - b[i][k] * a[k][j];
                }
                out.coeffs[coeff_index(m, i, j)] = s;
            }
        }
        out
    }

    /// `½ tr(AᵀB)`. Panics on mismatched fiber dimensions.
    #[inline]
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.m, other.m, "inner product of so({}) with so({})", self.m, other.m);
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    #[inline]
    pub fn norm2(&self) -> f64 {
        self.inner(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs().iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `self += s · x`
    #[inline]
    pub fn axpy(&mut self, s: f64, x: &Self) {
        debug_assert_eq!(self.m, x.m);
        for (a, b) in self.coeffs.iter_mut().zip(x.coeffs.iter()) {
            *a += s * b;
        }
    }

    #[inline]
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }
}

/// Random element with entries drawn uniformly from `[−amplitude, amplitude]`
/// and then antisymmetrized as `(A − Aᵀ)/2`. Deterministic in `seed`.
pub fn random_element(m: usize, seed: u64, amplitude: f64) -> AlgebraElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_element_with(m, &mut rng, amplitude)
}

pub(crate) fn random_element_with<R: Rng>(m: usize, rng: &mut R, amplitude: f64) -> AlgebraElement {
    let mut out = AlgebraElement::zero(m);
    if amplitude == 0.0 {
        return out;
    }
    let mut raw = [[0.0; MAX_FIBER]; MAX_FIBER];
    for row in raw.iter_mut().take(m) {
        for v in row.iter_mut().take(m) {
            *v = rng.random_range(-amplitude..=amplitude);
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            out.coeffs[coeff_index(m, i, j)] = 0.5 * (raw[i][j] - raw[j][i]);
        }
    }
    out
}

impl Add for AlgebraElement {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl Sub for AlgebraElement {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl AddAssign for AlgebraElement {
    fn add_assign(&mut self, rhs: Self) {
        self.axpy(1.0, &rhs);
    }
}

impl SubAssign for AlgebraElement {
    fn sub_assign(&mut self, rhs: Self) {
        self.axpy(-1.0, &rhs);
    }
}

impl Neg for AlgebraElement {
    type Output = Self;
    fn neg(self) -> Self {
        self.scaled(-1.0)
    }
}

impl Mul<AlgebraElement> for f64 {
    type Output = AlgebraElement;
    fn mul(self, rhs: AlgebraElement) -> AlgebraElement {
        rhs.scaled(self)
    }
}
