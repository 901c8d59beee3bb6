//! Interface coupling through the quadratic bulk drag `V|V|`.

use crate::calculus::vertical_average;
use crate::domain::{Boundary, State, SurfaceField, C64};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct InterfaceState {
    pub v: SurfaceField,
    pub v_bar: SurfaceField,
    pub v_tilde: SurfaceField,
    pub drag: SurfaceField,
    pub p_s: f64,
}

/// Relative interface velocity `V = v^a|_top − v^o|_top`.
pub fn relative_velocity(state: &State) -> Result<SurfaceField> {
    if **state.va.hgrid() != **state.vo.hgrid() {
        return Err(Error::GridMismatch(
            "atmosphere and ocean use different horizontal grids".into(),
        ));
    }
    Ok(state.va.trace(Boundary::Top).sub(&state.vo.trace(Boundary::Top)))
}

pub fn interface_state(state: &State) -> Result<InterfaceState> {
    let v = relative_velocity(state)?;
    let v_bar = vertical_average(&state.va).sub(&vertical_average(&state.vo));
    let v_tilde = v.sub(&v_bar);
    Ok(InterfaceState {
        drag: drag(&v),
        v,
        v_bar,
        v_tilde,
        p_s: state.va.vgrid().p_s(),
    })
}

fn pointwise(scale_by: &SurfaceField, values: &SurfaceField) -> SurfaceField {
    let m = scale_by.to_physical();
    let mut out = values.to_physical();
    let n = out.hgrid().npts();
    for idx in 0..n {
        let r = m.modulus_at(0, idx);
        for c in 0..out.ncomp() {
            let v = out.at(c, 0, idx);
            out.set(c, 0, idx, C64::new(v.re * r, 0.0));
        }
    }
    out.dealias()
}

/// `V|V|` evaluated pointwise, then dealiased.
pub fn drag(v: &SurfaceField) -> SurfaceField {
    pointwise(v, v)
}

/// Linearised drag `V_new |V_lag|`, dealiased.
pub fn drag_semi_implicit(v_lag: &SurfaceField, v_new: &SurfaceField) -> SurfaceField {
    pointwise(v_lag, v_new)
}

/// Neumann data at the interface for the atmosphere and the ocean:
/// `∂_p v^a = −drag / p_s` and `∂_z v^o = p_s drag`.
pub fn neumann_data(v: &SurfaceField, p_s: f64) -> (SurfaceField, SurfaceField) {
    neumann_from_drag(&drag(v), p_s)
}

pub fn neumann_from_drag(d: &SurfaceField, p_s: f64) -> (SurfaceField, SurfaceField) {
    (d.scale(-1.0 / p_s), d.scale(p_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Field3D, HorizontalGrid, VerticalGrid};

    #[test]
    fn drag_values() {
        let h = HorizontalGrid::new(8, 8).unwrap();
        let v = SurfaceField::from_fn(&h, 2, |c, _, _| if c == 0 { 3.0 } else { 4.0 });
        let d = drag(&v).to_physical();
        assert!((d.at(0, 0, 7).re - 15.0).abs() < 1e-12);
        assert!((d.at(1, 0, 7).re - 20.0).abs() < 1e-12);
        let z = v.scale(0.0);
        assert_eq!(drag(&z).max_abs(), 0.0);
        let s = drag_semi_implicit(&v, &v).to_physical();
        assert!(s.sub(&d).max_abs() < 1e-12);
        assert_eq!(drag_semi_implicit(&z, &v).max_abs(), 0.0);
    }

    #[test]
    fn neumann_signs() {
        let h = HorizontalGrid::new(8, 8).unwrap();
        let v = SurfaceField::from_fn(&h, 2, |c, _, _| if c == 0 { 1.0 } else { 0.0 });
        let (a, o) = neumann_data(&v, 1.0);
        let (a, o) = (a.to_physical(), o.to_physical());
        assert!((a.at(0, 0, 3).re + 1.0).abs() < 1e-13);
        assert!((o.at(0, 0, 3).re - 1.0).abs() < 1e-13);
        assert!(a.at(1, 0, 3).re.abs() < 1e-13);
    }

    #[test]
    fn splitting_of_v() {
        let h = HorizontalGrid::new(8, 8).unwrap();
        let a = VerticalGrid::atmosphere(5, 1.0).unwrap();
        let o = VerticalGrid::ocean(5).unwrap();
        let va = Field3D::from_fn(&h, &a, 2, |c, x, _, p| if c == 0 { x.sin() * p } else { 1.0 });
        let vo = Field3D::from_fn(&h, &o, 2, |c, _, y, z| if c == 1 { y.cos() * z } else { 0.5 });
        let st = State { va, vo, t: 0.0 };
        let i = interface_state(&st).unwrap();
        assert!(i.v.sub(&i.v_bar.add(&i.v_tilde)).max_abs() < 1e-13);

        let st2 = State {
            va: Field3D::broadcast(&i.v_bar, &a),
            vo: Field3D::broadcast(&i.v_bar.scale(0.0), &o),
            t: 0.0,
        };
        let i2 = interface_state(&st2).unwrap();
        assert!(i2.v_tilde.max_abs() < 1e-13);
    }
}
