//! Reconstruction of the diagnostic quantities: pressure, geopotential and
//! the vertical velocities implied by mass conservation.

use std::sync::Arc;

use crate::calculus::{cumulative_integral, div_h};
use crate::domain::{Boundary, Field3D, Repr, State, SurfaceField, VerticalGrid, VerticalKind, C64};
use crate::error::{Error, Result};

/// Everything derived from a state and the two surface pressures.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub w: Field3D,
    pub omega: Field3D,
    pub pi: Field3D,
    pub phi: Field3D,
    pub pi_s: SurfaceField,
    pub phi_s: SurfaceField,
}

impl Reconstruction {
    /// Largest interface value of `w` and `ω`; zero when the averages are solenoidal.
    pub fn interface_residual(&self) -> f64 {
        let w = self.w.trace(Boundary::Top).max_abs();
        let o = self.omega.trace(Boundary::Top).max_abs();
        w.max(o)
    }
}

fn add_profile(s: &SurfaceField, vg: &Arc<VerticalGrid>, profile: impl Fn(f64) -> f64) -> Field3D {
    let mut out = Field3D::broadcast(&s.to_physical(), vg);
    for (j, &z) in vg.nodes().iter().enumerate() {
        let shift = profile(z);
        for v in out.plane_mut(0, j) {
            *v += C64::new(shift, 0.0);
        }
    }
    out
}

/// `π = π_s − z` on the ocean grid.
pub fn reconstruct_pi(pi_s: &SurfaceField, ogrid: &Arc<VerticalGrid>) -> Result<Field3D> {
    if ogrid.kind() != VerticalKind::Ocean {
        return Err(Error::GridMismatch("pressure lives on the ocean grid".into()));
    }
    Ok(add_profile(pi_s, ogrid, |z| -z))
}

/// `Φ = Φ_s + log p_s − log p` on the atmosphere grid.
pub fn reconstruct_phi(phi_s: &SurfaceField, agrid: &Arc<VerticalGrid>) -> Result<Field3D> {
    if agrid.kind() != VerticalKind::Atmosphere {
        return Err(Error::GridMismatch("geopotential lives on the atmosphere grid".into()));
    }
    if agrid.nodes().iter().any(|&p| p <= 0.0) {
        return Err(Error::Grid("pressure nodes must be positive".into()));
    }
    let ln_ps = agrid.p_s().ln();
    Ok(add_profile(phi_s, agrid, |p| ln_ps - p.ln()))
}

/// `w(z) = −∫_{−1}^z div_H v^o`, zero at the bottom by construction.
pub fn reconstruct_w(vo: &Field3D) -> Field3D {
    cumulative_integral(&div_h(vo)).scale(-1.0)
}

/// `ω(p) = −∫_{p_a}^p div_H v^a`, zero at the top of the atmosphere.
pub fn reconstruct_omega(va: &Field3D) -> Field3D {
    cumulative_integral(&div_h(va)).scale(-1.0)
}

pub fn reconstruct(state: &State, pi_s: &SurfaceField, phi_s: &SurfaceField) -> Result<Reconstruction> {
    Ok(Reconstruction {
        w: reconstruct_w(&state.vo).into_physical(),
        omega: reconstruct_omega(&state.va).into_physical(),
        pi: reconstruct_pi(pi_s, state.vo.vgrid())?,
        phi: reconstruct_phi(phi_s, state.va.vgrid())?,
        pi_s: pi_s.to_physical(),
        phi_s: phi_s.to_physical(),
    })
}

/// Zero surface pressure for states that carry none.
pub fn zero_surface(state: &State) -> SurfaceField {
    SurfaceField::zeros(state.va.hgrid(), crate::domain::Surface, 1, Repr::Physical)
}
