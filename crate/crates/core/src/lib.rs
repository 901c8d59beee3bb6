//! Coupled atmosphere–ocean primitive equations with quadratic interface drag.
//!
//! The horizontal domain is the torus `(0, 2π)²`, resolved spectrally; the
//! atmosphere uses the pressure coordinate `p ∈ [p_s e^{-1}, p_s]` and the
//! ocean the depth `z ∈ [-1, 0]`, both on uniform second-order grids. The
//! prognostic state is the pair of horizontal velocities; pressures, vertical
//! velocities and the geopotential are reconstructed on demand.

pub mod calculus;
pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod hstokes;
pub mod hydrostatics;
pub mod interface;
pub mod mms;
pub mod norms;
pub mod presets;
pub mod stepper;

pub use domain::{Boundary, Field3D, HorizontalGrid, Repr, State, SurfaceField, VerticalGrid, VerticalKind};
pub use error::{Error, Result};
