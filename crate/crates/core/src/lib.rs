//! Propagators for potentials built from finitely many exponentials and Dirac
//! deltas, evaluated as a time-ordered perturbation series around the free
//! kernel with a-priori truncation bounds.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: potentials, queries, piecewise-linear test functions.
//! - [`free_kernel`]: free propagator with linear forcing, residual checks.
//! - [`pinned`]: kernels with delta pins and exponential insertions.
//! - [`quadrature`]: simplex and hypercube rules, Gaussian integrals.
//! - [`bounds`]: majorants and tail bounds.
//! - [`series`]: term assembly and the truncated propagator.
//! - [`oracle`]: Crank–Nicolson and closed-form references.

pub mod bounds;
pub mod error;
pub mod free_kernel;
pub mod model;
pub mod oracle;
pub mod pinned;
pub mod quadrature;
pub mod series;

pub use num_complex::Complex64 as C64;

pub use bounds::BoundContext;
pub use error::{Error, Result};
pub use free_kernel::{KernelValue, ResidualReport, Stencil};
pub use model::{
    DeltaAtom, ExpAtom, PotentialSpec, PropagatorQuery, ShiftedArgument, TestFunction,
};
pub use oracle::{GridSpec, Packet};
pub use pinned::{ExpInsertion, PinConfiguration};
pub use quadrature::{Estimate, QuadratureSpec, SimplexRule, SimplexWeight};
pub use series::{PropagatorResult, SeriesTerm, StopRule};
