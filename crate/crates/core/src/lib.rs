//! Kepler, two-center and Lagrange problems on the plane, the sphere and the
//! hyperbolic plane, the partially-averaged (secular) systems built from them,
//! and mechanical billiards with walls taken from a confocal conic family.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: configuration surfaces, gnomonic charts, the affine change
//!   to standardized coordinates, metric-aware reflection.
//! - [`model`]: potentials, energies and first integrals (`C`, the
//!   Laplace–Runge–Lenz vector, `D`, `K`), the factorization identity.
//! - [`flow`]: an adaptive Dormand–Prince 8(5,3) integrator with dense output,
//!   the vector fields of every system, finite-difference Poisson brackets.
//! - [`secular`]: osculating elements, Kepler's equation, orbit averages and
//!   the averaged Hamiltonian flow.
//! - [`billiard`]: confocal walls, impact location and the reflection loop.
//!
//! # Coordinates
//!
//! Every dynamical state ([`PhaseState`]) lives in the *standardized* chart
//! `(ξ, η)`: the primary Kepler center sits at the origin and the secondary at
//! `(0, -2h)`. On the sphere and the hyperbolic plane the velocity is the
//! chart velocity with respect to the system's own time. The *raw* chart
//! `(x, y)` is the gnomonic chart in which the centers sit at `(0, ±a)`;
//! [`geometry::Frame`] converts between the two.

// `!(x >= y)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod billiard;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod model;
pub mod secular;

pub use error::{Error, Result};
pub use geometry::{PhaseState, Space};
pub use model::{FirstIntegrals, ModelParams};
