//! Discrete differential operators.
//!
//! Horizontal derivatives are spectral and return spectral fields. Vertical
//! operators act level-wise and keep the representation of their input, so
//! they commute with the horizontal transforms.

use crate::domain::{Field, Field3D, Levels, Repr, SurfaceField, VerticalGrid, C64};

fn ik_times<L: Levels>(f: &Field<L>, comp_in: usize, axis: usize, out: &mut Field<L>, comp_out: usize, acc: bool) {
    let g = f.hgrid().clone();
    for j in 0..f.nlev() {
        let src = f.plane(comp_in, j).to_vec();
        let dst = out.plane_mut(comp_out, j);
        for (idx, (d, s)) in dst.iter_mut().zip(src).enumerate() {
            let (kx, ky) = g.k(idx);
            let k = if axis == 0 { kx } else { ky };
            let v = C64::new(0.0, k) * s;
            if acc {
                *d += v;
            } else {
                *d = v;
            }
        }
    }
}

/// Horizontal gradient of a scalar field.
pub fn grad_h<L: Levels>(f: &Field<L>) -> Field<L> {
    assert_eq!(f.ncomp(), 1, "grad_h expects a scalar field");
    let s = f.to_spectral();
    let mut out = s.zeros_like(2);
    ik_times(&s, 0, 0, &mut out, 0, false);
    ik_times(&s, 0, 1, &mut out, 1, false);
    out
}

/// Horizontal divergence of a 2-vector field.
pub fn div_h<L: Levels>(v: &Field<L>) -> Field<L> {
    assert_eq!(v.ncomp(), 2, "div_h expects a vector field");
    let s = v.to_spectral();
    let mut out = s.zeros_like(1);
    ik_times(&s, 0, 0, &mut out, 0, false);
    ik_times(&s, 1, 1, &mut out, 0, true);
    out
}

/// Component-wise horizontal Laplacian (symbol `-|k|²`).
pub fn laplace_h<L: Levels>(f: &Field<L>) -> Field<L> {
    let mut out = f.to_spectral();
    let g = out.hgrid().clone();
    for c in 0..out.ncomp() {
        for j in 0..out.nlev() {
            for (idx, v) in out.plane_mut(c, j).iter_mut().enumerate() {
                *v *= -g.k2(idx);
            }
        }
    }
    out
}

/// Apply `op` to every vertical column (per component and horizontal index).
pub(crate) fn map_columns(f: &Field3D, mut op: impl FnMut(&[C64], &mut [C64])) -> Field3D {
    let nz = f.nlev();
    let n = f.hgrid().npts();
    let mut out = f.zeros_like(f.ncomp());
    let mut col = vec![C64::new(0.0, 0.0); nz];
    let mut res = vec![C64::new(0.0, 0.0); nz];
    for c in 0..f.ncomp() {
        let base = c * nz * n;
        for idx in 0..n {
            for j in 0..nz {
                col[j] = f.data()[base + j * n + idx];
            }
            op(&col, &mut res);
            let data = out.data_mut();
            for j in 0..nz {
                data[base + j * n + idx] = res[j];
            }
        }
    }
    out
}

/// Vertical derivative: centered in the interior, one-sided second order at the ends.
pub fn d_vertical(f: &Field3D) -> Field3D {
    let h = f.vgrid().h();
    map_columns(f, |x, y| {
        let n = x.len();
        y[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h);
        for j in 1..n - 1 {
            y[j] = (x[j + 1] - x[j - 1]) / (2.0 * h);
        }
        y[n - 1] = (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * h);
    })
}

/// Summation-by-parts first derivative: centered inside, first order at the
/// ends, so that `W D + (W D)ᵀ = diag(-1, 0, …, 0, 1)` with trapezoid weights `W`.
pub(crate) fn d_vertical_sbp(f: &Field3D) -> Field3D {
    let h = f.vgrid().h();
    map_columns(f, |x, y| {
        let n = x.len();
        y[0] = (x[1] - x[0]) / h;
        for j in 1..n - 1 {
            y[j] = (x[j + 1] - x[j - 1]) / (2.0 * h);
        }
        y[n - 1] = (x[n - 1] - x[n - 2]) / h;
    })
}

/// Conservative vertical diffusion `∂_s(κ ∂_s v)` in flux form.
///
/// `g_bottom` and `g_top` are Neumann data (values of `∂_s v` at the two ends);
/// their representation must match `v` and their component count too.
pub fn vertical_diffusion(v: &Field3D, g_bottom: &SurfaceField, g_top: &SurfaceField) -> Field3D {
    let vg = v.vgrid().clone();
    let gb = match_repr(g_bottom, v.repr());
    let gt = match_repr(g_top, v.repr());
    let mut out = map_columns(v, homogeneous_diffusion(&vg));
    let w = vg.weights();
    let nz = vg.nz();
    let (ka, kb) = (vg.kappa(vg.a()), vg.kappa(vg.b()));
    for c in 0..v.ncomp() {
        let bot = gb.plane(c, 0).to_vec();
        for (o, g) in out.plane_mut(c, 0).iter_mut().zip(bot) {
            *o -= g * (ka / w[0]);
        }
        let top = gt.plane(c, 0).to_vec();
        for (o, g) in out.plane_mut(c, nz - 1).iter_mut().zip(top) {
            *o += g * (kb / w[nz - 1]);
        }
    }
    out
}

/// The interior-flux part of [`vertical_diffusion`] (zero boundary fluxes).
pub(crate) fn homogeneous_diffusion(vg: &VerticalGrid) -> impl FnMut(&[C64], &mut [C64]) {
    let h = vg.h();
    let w = vg.weights();
    let kh: Vec<f64> = (0..vg.nz() - 1).map(|j| vg.kappa_half(j)).collect();
    move |x, y| {
        let n = x.len();
        for yj in y.iter_mut() {
            *yj = C64::new(0.0, 0.0);
        }
        for j in 0..n - 1 {
            let flux = (x[j + 1] - x[j]) * (kh[j] / h);
            y[j] += flux / w[j];
            y[j + 1] -= flux / w[j + 1];
        }
    }
}

fn match_repr(s: &SurfaceField, repr: Repr) -> SurfaceField {
    match repr {
        Repr::Spectral => s.to_spectral(),
        Repr::Physical => s.to_physical(),
    }
}

/// Full anisotropic Laplacian: `Δ_H` plus the flux-form vertical operator
/// (`∂_p(p²∂_p)` on the atmosphere grid, `∂_zz` on the ocean grid).
pub fn delta_a(v: &Field3D, g_bottom: &SurfaceField, g_top: &SurfaceField) -> Field3D {
    let s = v.to_spectral();
    laplace_h(&s).add(&vertical_diffusion(&s, g_bottom, g_top))
}

/// Trapezoidal vertical average `(1/(b−a)) ∫_a^b f`.
pub fn vertical_average(f: &Field3D) -> SurfaceField {
    let vg = f.vgrid();
    let w = vg.weights();
    let inv_len = 1.0 / vg.length();
    let mut out = SurfaceField::zeros(f.hgrid(), crate::domain::Surface, f.ncomp(), f.repr());
    for c in 0..f.ncomp() {
        for (j, wj) in w.iter().enumerate() {
            let src = f.plane(c, j).to_vec();
            for (o, s) in out.plane_mut(c, 0).iter_mut().zip(src) {
                *o += s * (wj * inv_len);
            }
        }
    }
    out
}

/// `f` minus its vertical average.
pub fn fluctuation(f: &Field3D) -> Field3D {
    let avg = Field3D::broadcast(&vertical_average(f), f.vgrid());
    f.sub(&avg)
}

/// Cumulative trapezoid `∫_a^{s_j} f`, zero at the first node.
pub fn cumulative_integral(f: &Field3D) -> Field3D {
    let h = f.vgrid().h();
    map_columns(f, |x, y| {
        y[0] = C64::new(0.0, 0.0);
        for j in 1..x.len() {
            y[j] = y[j - 1] + (x[j - 1] + x[j]) * (0.5 * h);
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{HorizontalGrid, Surface, VerticalGrid};
    use std::f64::consts::PI;

    #[test]
    fn gradient_examples() {
        let h = HorizontalGrid::new(16, 16).unwrap();
        let f = SurfaceField::from_fn(&h, 1, |_, x, _| x.cos());
        let g = grad_h(&f);
        let e = SurfaceField::from_fn(&h, 2, |c, x, _| if c == 0 { -x.sin() } else { 0.0 });
        assert!(g.sub(&e).max_abs() < 1e-13);

        let f = SurfaceField::from_fn(&h, 1, |_, x, y| x.sin() * y.cos());
        let e = SurfaceField::from_fn(&h, 2, |c, x, y| {
            if c == 0 { x.cos() * y.cos() } else { -x.sin() * y.sin() }
        });
        assert!(grad_h(&f).sub(&e).max_abs() < 1e-13);
        let c = SurfaceField::from_fn(&h, 1, |_, _, _| 3.0);
        assert!(grad_h(&c).max_abs() < 1e-14);
    }

    #[test]
    fn divergence_identities() {
        let h = HorizontalGrid::new(12, 16).unwrap();
        let f = SurfaceField::from_fn(&h, 1, |_, x, y| (2.0 * x + y).sin() + (3.0 * y).cos());
        let lhs = div_h(&grad_h(&f));
        assert!(lhs.sub(&laplace_h(&f)).coeff_norm() < 1e-13);

        let v = SurfaceField::from_fn(&h, 2, |c, x, y| if c == 0 { y.sin() } else { x.sin() });
        assert!(div_h(&v).max_abs() < 1e-14);

        let psi = SurfaceField::from_fn(&h, 1, |_, x, y| (x - 2.0 * y).cos() * x.sin());
        let gp = grad_h(&psi);
        let curl = SurfaceField::from_components(&gp.component(1).scale(-1.0), &gp.component(0));
        assert!(div_h(&curl).max_abs() < 1e-12);
    }

    #[test]
    fn vertical_derivative_exactness() {
        let h = HorizontalGrid::new(4, 4).unwrap();
        let o = VerticalGrid::ocean(9).unwrap();
        let f = Field3D::from_fn(&h, &o, 1, |_, _, _, z| z);
        let d = d_vertical(&f);
        assert!(d.data().iter().all(|v| (v.re - 1.0).abs() < 1e-12));
        let f = Field3D::from_fn(&h, &o, 1, |_, _, _, z| z * z);
        let d = d_vertical(&f);
        for (j, z) in o.nodes().iter().enumerate() {
            assert!((d.at(0, j, 0).re - 2.0 * z).abs() < 1e-12);
        }
    }

    #[test]
    fn vertical_derivative_order_two() {
        let h = HorizontalGrid::new(4, 4).unwrap();
        let err = |nz| {
            let o = VerticalGrid::ocean(nz).unwrap();
            let f = Field3D::from_fn(&h, &o, 1, |_, _, _, z| (PI * z).sin());
            let e = Field3D::from_fn(&h, &o, 1, |_, _, _, z| PI * (PI * z).cos());
            d_vertical(&f).sub(&e).max_abs()
        };
        let (e1, e2, e3) = (err(17), err(33), err(65));
        assert!((e1 / e2).log2() > 1.9 && (e2 / e3).log2() > 1.9);
    }

    #[test]
    fn sbp_property() {
        let h = HorizontalGrid::new(4, 4).unwrap();
        let o = VerticalGrid::atmosphere(7, 1.0).unwrap();
        let u = Field3D::from_fn(&h, &o, 1, |_, x, _, p| (3.0 * p).sin() + x.cos());
        let v = Field3D::from_fn(&h, &o, 1, |_, _, y, p| p * p + y.sin());
        let lhs = d_vertical_sbp(&u).inner(&v) + u.inner(&d_vertical_sbp(&v));
        let ut = u.trace(crate::domain::Boundary::Top);
        let vt = v.trace(crate::domain::Boundary::Top);
        let ub = u.trace(crate::domain::Boundary::Bottom);
        let vb = v.trace(crate::domain::Boundary::Bottom);
        let rhs = ut.inner(&vt) - ub.inner(&vb);
        assert!((lhs - rhs).abs() < 1e-11 * rhs.abs().max(1.0));
    }

    #[test]
    fn delta_a_examples() {
        let h = HorizontalGrid::new(8, 8).unwrap();
        let a = VerticalGrid::atmosphere(9, 1.0).unwrap();
        let zero = SurfaceField::zeros(&h, Surface, 1, Repr::Physical);
        let f = Field3D::from_fn(&h, &a, 1, |_, x, _, _| x.cos());
        let d = delta_a(&f, &zero, &zero);
        assert!(d.sub(&laplace_h(&f)).max_abs() < 1e-12);

        let c = Field3D::from_fn(&h, &a, 1, |_, _, _, _| 4.0);
        assert!(delta_a(&c, &zero, &zero).max_abs() < 1e-12);

        // log p with its exact end derivatives 1/p: ∂_p(p² / p) = 1.
        let err = |nz| {
            let a = VerticalGrid::atmosphere(nz, 1.0).unwrap();
            let f = Field3D::from_fn(&h, &a, 1, |_, _, _, p| p.ln());
            let gb = SurfaceField::from_fn(&h, 1, |_, _, _| 1.0 / a.a());
            let gt = SurfaceField::from_fn(&h, 1, |_, _, _| 1.0 / a.b());
            let d = delta_a(&f, &gb, &gt).to_physical();
            d.data().iter().map(|v| (v.re - 1.0).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(17), err(33));
        // boundary rows are first order in the max norm
        assert!(e1 < 2e-2 && e1 / e2 > 1.8, "{e1} {e2}");
    }

    #[test]
    fn flux_form_self_adjoint() {
        let h = HorizontalGrid::new(8, 8).unwrap();
        let a = VerticalGrid::atmosphere(11, 1.0).unwrap();
        let zero = SurfaceField::zeros(&h, Surface, 1, Repr::Physical);
        let u = Field3D::from_fn(&h, &a, 1, |_, x, y, p| (2.0 * p).cos() * (x + y).sin());
        let v = Field3D::from_fn(&h, &a, 1, |_, x, _, p| p.exp() * x.cos() + p);
        let l = delta_a(&u, &zero, &zero).inner(&v);
        let r = u.inner(&delta_a(&v, &zero, &zero));
        assert!((l - r).abs() < 1e-10 * l.abs().max(1.0));
    }

    #[test]
    fn averages() {
        let h = HorizontalGrid::new(4, 4).unwrap();
        let o = VerticalGrid::ocean(11).unwrap();
        let f = Field3D::from_fn(&h, &o, 1, |_, _, _, z| z);
        assert!((vertical_average(&f).mean(0) + 0.5).abs() < 1e-14);
        let c = Field3D::from_fn(&h, &o, 2, |_, _, _, _| 1.5);
        assert!((vertical_average(&c).mean(1) - 1.5).abs() < 1e-14);
        assert!(fluctuation(&c).max_abs() < 1e-14);
        let q = |nz| {
            let o = VerticalGrid::ocean(nz).unwrap();
            let f = Field3D::from_fn(&h, &o, 1, |_, _, _, z| z * z);
            (vertical_average(&f).mean(0) - 1.0 / 3.0).abs()
        };
        assert!(q(11) / q(21) > 3.9);
        let g = Field3D::from_fn(&h, &o, 2, |c, x, y, z| (c as f64 + 1.0) * (x * z).sin() + y.cos() * z * z);
        assert!(vertical_average(&fluctuation(&g)).max_abs() < 1e-13);
    }

    #[test]
    fn cumulative_trapezoid() {
        let h = HorizontalGrid::new(4, 4).unwrap();
        let o = VerticalGrid::ocean(5).unwrap();
        let f = Field3D::from_fn(&h, &o, 1, |_, _, _, _| 2.0);
        let i = cumulative_integral(&f);
        for (j, z) in o.nodes().iter().enumerate() {
            assert!((i.at(0, j, 3).re - 2.0 * (z + 1.0)).abs() < 1e-14);
        }
    }
}
