//! Simulation toolkit for an inhomogeneous spin ensemble coupled to a
//! parametrically (two-photon) driven cavity.
//!
//! Two levels of description are provided:
//!
//! * [`semiclassical`]: mean-field equations for the cavity amplitude and
//!   per-class spin expectations, integrated with an adaptive embedded
//!   Runge-Kutta pair.
//! * [`operators`] + [`propagate`]: the full Lindblad master equation on a
//!   truncated Fock ⊗ spin space, vectorized into a Liouvillian and stepped
//!   with dense/Krylov exponentials or a symmetric Trotter splitting.
//!
//! [`observables`] turns either into photon numbers, fidelities, Wigner
//! functions and fitted decay rates, and [`pipeline`] wires the pieces into
//! the standard runs.
//!
//! Units: rates and detunings are angular frequencies in MHz, times in µs.

pub mod error;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod ode;
pub mod operators;
pub mod pipeline;
pub mod propagate;
pub mod semiclassical;

pub use error::{Error, Result};

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;
