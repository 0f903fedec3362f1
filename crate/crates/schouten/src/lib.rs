//! Numerical machinery for conformally prescribing symmetric functions of the
//! Schouten tensor eigenvalues on compact manifolds with totally geodesic
//! boundary.
//!
//! The target equation is `F(λ(g̃⁻¹ A_g̃)) = f` for a conformal metric
//! `g̃ = e^{-2u} g`, solved by a homotopy that connects it to a problem with
//! the explicit solution `u ≡ 0`. The crate provides:
//!
//! * [`symfuncs`] — elementary symmetric polynomials, admissibility cones and
//!   the two built-in curvature function families with derivatives,
//! * [`manifold`] — discrete background geometries (periodic torus, Neumann
//!   slab, warped product), curvature tensors, an independent finite
//!   difference curvature oracle and the doubling construction,
//! * [`conformal`] — the conformally transformed Schouten tensor, the
//!   deformed residual, its linearization and admissibility checks,
//! * [`continuation`] — the homotopy path driver with a damped Newton
//!   corrector and an interior-estimate monitor,
//! * [`blowup`] — blow-up point location, minimal radial functions and the
//!   logarithmic profile fit.

pub mod blowup;
pub mod conformal;
pub mod continuation;
pub mod error;
pub mod field;
pub mod manifold;
pub mod symfuncs;

pub use error::{Error, Result};
