//! Lattice laboratory for the Yang–Mills–Born–Infeld functional.
//!
//! The base manifold is a periodic hypercubic lattice carrying a conformally
//! flat metric, the fiber algebra is `so(m)`, and a connection is a
//! Lie-algebra-valued 1-form anchored at lattice sites. The twisted exterior
//! derivative uses forward differences and the coderivative is its exact
//! adjoint under the weighted L² pairing, so every first- and second-variation
//! identity holds to machine precision at fixed lattice spacing.
//!
//! Module map:
//!
//! * [`algebra`]: skew-symmetric matrices, commutator, `½ tr(AᵀB)` pairing.
//! * [`lattice`]: lattice geometry, conformal metrics, bundle-valued p-forms.
//! * [`calculus`]: `dᴰ`, `δᴰ`, curvature, interior products, stress-energy.
//! * [`functional`]: densities, energy, Euler–Lagrange residual, Hessian, spectra.
//! * [`conformal`]: the σ-rescaling that turns a Yang–Mills connection into a
//!   Born–Infeld critical pair.
//! * [`flow`]: gradient descent with Armijo backtracking.

pub mod algebra;
pub mod calculus;
pub mod conformal;
pub mod error;
pub mod flow;
pub mod functional;
pub mod lattice;
mod par;
pub mod rng;

pub use algebra::AlgebraElement;
pub use calculus::{Connection, StressTensor};
pub use error::{Error, Result};
pub use functional::Density;
pub use lattice::{ConformalMetric, LatticeSpec, PForm};
