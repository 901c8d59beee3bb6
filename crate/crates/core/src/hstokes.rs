//! Implicit solver for the linearised hydrostatic Stokes problem on one subdomain.
//!
//! One call solves
//!
//! ```text
//! (v − v0)/dt − Δ_H v − ∂_s(κ ∂_s v) + λ v + ∇_H π_s = g_v,   div_H v̄ = g_div
//! ```
//!
//! with Neumann data at the interface and either Neumann or Dirichlet data at
//! the outer boundary. The problem splits into a 2D Stokes problem for the
//! vertical average and a vertical Helmholtz problem for the fluctuation,
//! coupled through `Bṽ = (F_top − F_bottom)/(b − a)`, the averaged boundary flux.

use std::sync::Arc;

use crate::calculus::{cumulative_integral, div_h, fluctuation, grad_h, vertical_average};
use crate::domain::{Field3D, HorizontalGrid, Repr, Surface, SurfaceField, VerticalGrid, C64};
use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Full data of one linear problem.
#[derive(Clone, Debug)]
pub struct LinearData {
    pub f_v: Field3D,
    pub f_w: Field3D,
    pub f_div: Field3D,
    pub v0: Field3D,
    /// Dirichlet value of `v` at the outer boundary; `None` selects Neumann data there.
    pub b_v_d: Option<SurfaceField>,
    pub b_n_top: SurfaceField,
    pub b_n_bottom: SurfaceField,
    pub b_w_a: SurfaceField,
    pub b_w_b: SurfaceField,
    pub lambda: f64,
    pub dt: f64,
}

impl LinearData {
    /// Data with forcing `f_v`, start value `v0`, and every other slot zero.
    pub fn new(v0: Field3D, f_v: Field3D, dt: f64, lambda: f64) -> Self {
        let h = v0.hgrid().clone();
        let vg = v0.vgrid().clone();
        let s1 = SurfaceField::zeros(&h, Surface, 1, Repr::Spectral);
        let s2 = SurfaceField::zeros(&h, Surface, 2, Repr::Spectral);
        Self {
            f_w: Field3D::zeros(&h, vg.clone(), 1, Repr::Spectral),
            f_div: Field3D::zeros(&h, vg, 1, Repr::Spectral),
            f_v,
            v0,
            b_v_d: None,
            b_n_top: s2.clone(),
            b_n_bottom: s2,
            b_w_a: s1.clone(),
            b_w_b: s1,
            lambda,
            dt,
        }
    }

    pub fn hgrid(&self) -> &Arc<HorizontalGrid> {
        self.v0.hgrid()
    }

    pub fn vgrid(&self) -> &Arc<VerticalGrid> {
        self.v0.vgrid()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    /// Alternate barotropic and baroclinic solves (observable contraction).
    Picard,
    /// Eliminate the boundary coupling per mode (one pass).
    Direct,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub mode: SolveMode,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub compat_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mode: SolveMode::Direct,
            picard_tol: 1e-11,
            picard_max: 25,
            compat_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReducedData {
    pub g_v: Field3D,
    pub g_div: SurfaceField,
}

#[derive(Clone, Debug)]
pub struct LinearSolution {
    pub v: Field3D,
    pub v_bar: SurfaceField,
    pub pi_s: SurfaceField,
    /// Relative update norms, one per sweep.
    pub residuals: Vec<f64>,
}

impl LinearSolution {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }
}

/// Remove the `f_w` and `w`-boundary contributions: returns the effective
/// momentum forcing and the divergence datum of the vertical average.
pub fn reduce(data: &LinearData, compat_tol: f64) -> Result<ReducedData> {
    let vg = data.vgrid();
    let g_v = data
        .f_v
        .to_spectral()
        .sub(&grad_h(&cumulative_integral(&data.f_w.to_spectral())));
    let g_div = data
        .b_w_a
        .sub(&data.b_w_b)
        .scale(1.0 / vg.length())
        .add(&vertical_average(&data.f_div))
        .to_spectral();
    let mean = g_div.at(0, 0, 0).norm();
    if mean > compat_tol {
        return Err(Error::Gauge(format!(
            "divergence datum has horizontal mean {mean:e}"
        )));
    }
    let mismatch = div_h(&vertical_average(&data.v0)).sub(&g_div).max_abs();
    if mismatch > compat_tol {
        return Err(Error::Compatibility(format!(
            "div_H of the initial average misses the divergence datum by {mismatch:e}"
        )));
    }
    Ok(ReducedData { g_v, g_div })
}

/// Per-mode 2D Stokes solve: `α v + i k π = r`, `i k·v = g`.
fn barotropic_mode(kx: f64, ky: f64, alpha: f64, r: [C64; 2], g: C64) -> ([C64; 2], C64) {
    let k2 = kx * kx + ky * ky;
    if k2 == 0.0 {
        return ([r[0] / alpha, r[1] / alpha], ZERO);
    }
    let i = C64::new(0.0, 1.0);
    let kr = r[0] * kx + r[1] * ky;
    let p = [r[0] - kr * (kx / k2), r[1] - kr * (ky / k2)];
    let v = [
        p[0] / alpha - i * g * (kx / k2),
        p[1] / alpha - i * g * (ky / k2),
    ];
    let pi = (-i * kr + g * alpha) / k2;
    (v, pi)
}

/// Horizontal Leray projection of a surface vector field.
pub fn leray(v: &SurfaceField) -> SurfaceField {
    let h = v.hgrid().clone();
    let mut out = v.to_spectral();
    for idx in 0..h.npts() {
        let (kx, ky) = h.k(idx);
        let (vm, _) = barotropic_mode(kx, ky, 1.0, [out.at(0, 0, idx), out.at(1, 0, idx)], ZERO);
        out.set(0, 0, idx, vm[0]);
        out.set(1, 0, idx, vm[1]);
    }
    out
}

/// Replace the vertical average of `v` by its Leray projection.
pub fn project_average(v: &Field3D) -> Field3D {
    let avg = vertical_average(v);
    let gradient_part = avg.sub(&leray(&avg));
    v.to_spectral().sub(&Field3D::broadcast(&gradient_part, v.vgrid()))
}

fn alpha(h: &HorizontalGrid, idx: usize, dt: f64, lambda: f64) -> f64 {
    1.0 / dt + h.k2(idx) + lambda
}

fn barotropic_field(
    r: &SurfaceField,
    g_div: &SurfaceField,
    alpha_of: impl Fn(usize) -> f64,
) -> (SurfaceField, SurfaceField) {
    let h = r.hgrid().clone();
    let mut v = SurfaceField::zeros(&h, Surface, 2, Repr::Spectral);
    let mut pi = SurfaceField::zeros(&h, Surface, 1, Repr::Spectral);
    for idx in 0..h.npts() {
        let (kx, ky) = h.k(idx);
        let (vm, pm) = barotropic_mode(
            kx,
            ky,
            alpha_of(idx),
            [r.at(0, 0, idx), r.at(1, 0, idx)],
            g_div.at(0, 0, idx),
        );
        v.set(0, 0, idx, vm[0]);
        v.set(1, 0, idx, vm[1]);
        pi.set(0, 0, idx, pm);
    }
    (v, pi)
}

/// 2D Stokes step for the vertical average; returns `(v̄, π_s)` with `π_s` of zero mean.
pub fn solve_barotropic(
    rhs: &SurfaceField,
    g_div: &SurfaceField,
    vbar_prev: &SurfaceField,
    lambda: f64,
    dt: f64,
) -> Result<(SurfaceField, SurfaceField)> {
    check_step(dt, lambda)?;
    let g = g_div.to_spectral();
    if g.at(0, 0, 0).norm() > 1e-12 {
        return Err(Error::Gauge("divergence datum must have zero mean".into()));
    }
    let r = rhs.to_spectral().axpy(1.0 / dt, vbar_prev);
    let h = r.hgrid().clone();
    Ok(barotropic_field(&r, &g, |idx| alpha(&h, idx, dt, lambda)))
}

fn check_step(dt: f64, lambda: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("dt must be positive (got {dt})")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("lambda must be ≥ 0 (got {lambda})")));
    }
    Ok(())
}

/// Tridiagonal vertical operator `α − D₀` with flux-form interior stencil.
pub(crate) struct Column {
    h: f64,
    w: Vec<f64>,
    kh: Vec<f64>,
    len: f64,
    scratch: Vec<f64>,
}

impl Column {
    pub(crate) fn new(vg: &VerticalGrid) -> Self {
        Self {
            h: vg.h(),
            w: vg.weights(),
            kh: (0..vg.nz() - 1).map(|j| vg.kappa_half(j)).collect(),
            len: vg.length(),
            scratch: vec![0.0; vg.nz()],
        }
    }

    fn n(&self) -> usize {
        self.w.len()
    }

    fn sub(&self, j: usize) -> f64 {
        if j == 0 { 0.0 } else { -self.kh[j - 1] / (self.h * self.w[j]) }
    }

    fn sup(&self, j: usize) -> f64 {
        if j + 1 == self.n() { 0.0 } else { -self.kh[j] / (self.h * self.w[j]) }
    }

    /// Thomas sweep on rows `first..n` with real coefficients.
    fn thomas<T>(&mut self, alpha: f64, first: usize, d: &mut [T])
    where
        T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Div<f64, Output = T>,
    {
        let n = self.n();
        // Rows below `first` are eliminated by the caller, which moves their
        // coupling into the right side; the diagonal keeps its full stencil.
        let diag = |s: &Self, j: usize| alpha - s.sub(j) - s.sup(j);
        let mut cp = std::mem::take(&mut self.scratch);
        let b0 = diag(self, first);
        cp[first] = self.sup(first) / b0;
        d[first] = d[first] / b0;
        for j in first + 1..n {
            let a = self.sub(j);
            let m = diag(self, j) - a * cp[j - 1];
            cp[j] = self.sup(j) / m;
            d[j] = (d[j] - d[j - 1] * a) / m;
        }
        for j in (first..n - 1).rev() {
            d[j] = d[j] - d[j + 1] * cp[j];
        }
        self.scratch = cp;
    }

    /// Fluctuation solve with Neumann fluxes at both ends; `x` holds `r̃` on entry.
    fn solve_neumann(&mut self, alpha: f64, f_bot: C64, f_top: C64, x: &mut [C64]) {
        let n = self.n();
        let b = (f_top - f_bot) / self.len;
        for v in x.iter_mut() {
            *v -= b;
        }
        x[0] -= f_bot / self.w[0];
        x[n - 1] += f_top / self.w[n - 1];
        self.thomas(alpha, 0, x);
        self.remove_average(x);
    }

    /// Fluctuation solve with `x_0 = d` at the outer end; returns the boundary flux there.
    fn solve_dirichlet(&mut self, alpha: f64, d: C64, f_top: C64, x: &mut [C64]) -> C64 {
        let n = self.n();
        let r0 = x[0];
        for v in x[1..].iter_mut() {
            *v -= f_top / self.len;
        }
        x[n - 1] += f_top / self.w[n - 1];
        x[1] += d * (self.kh[0] / (self.h * self.w[1]));
        self.thomas(alpha, 1, x);
        let mut z = vec![1.0 / self.len; n];
        self.thomas(alpha, 1, &mut z);
        let c = self.kh[0] / (self.h * self.w[0]);
        let denom = 1.0 / self.w[0] - 1.0 / self.len - c * z[1];
        let flux = (r0 - d * alpha + (x[1] - d) * c - f_top / self.len) / denom;
        x[0] = d;
        for j in 1..n {
            x[j] += flux * z[j];
        }
        flux
    }

    /// Boundary flux produced by the unit Dirichlet value with zero data.
    fn dirichlet_response(&mut self, alpha: f64) -> f64 {
        let mut x = vec![C64::new(0.0, 0.0); self.n()];
        self.solve_dirichlet(alpha, C64::new(1.0, 0.0), ZERO, &mut x).re
    }

    fn remove_average(&self, x: &mut [C64]) {
        let avg = x.iter().zip(&self.w).map(|(v, w)| v * w).sum::<C64>() / self.len;
        for v in x.iter_mut() {
            *v -= avg;
        }
    }
}

fn flux_fields(data: &LinearData) -> (SurfaceField, SurfaceField) {
    let vg = data.vgrid();
    let top = data.b_n_top.to_spectral().scale(vg.kappa(vg.b()));
    let bot = data.b_n_bottom.to_spectral().scale(vg.kappa(vg.a()));
    (bot, top)
}

/// Vertical Helmholtz step for the fluctuation with Neumann data at both ends.
pub fn solve_baroclinic(
    rhs: &Field3D,
    b_n_top: &SurfaceField,
    b_n_bottom: &SurfaceField,
    vt_prev: &Field3D,
    lambda: f64,
    dt: f64,
) -> Result<Field3D> {
    check_step(dt, lambda)?;
    let vg = rhs.vgrid().clone();
    let r = fluctuation(&rhs.to_spectral().axpy(1.0 / dt, vt_prev));
    let top = b_n_top.to_spectral().scale(vg.kappa(vg.b()));
    let bot = b_n_bottom.to_spectral().scale(vg.kappa(vg.a()));
    Ok(columns_neumann(&r, &bot, &top, dt, lambda))
}

fn columns_neumann(rt: &Field3D, bot: &SurfaceField, top: &SurfaceField, dt: f64, lambda: f64) -> Field3D {
    let h = rt.hgrid().clone();
    let vg = rt.vgrid().clone();
    let mut col = Column::new(&vg);
    let mut out = rt.clone();
    let nz = vg.nz();
    let n = h.npts();
    let mut x = vec![ZERO; nz];
    for c in 0..rt.ncomp() {
        for idx in 0..n {
            let a = alpha(&h, idx, dt, lambda);
            for j in 0..nz {
                x[j] = rt.data()[(c * nz + j) * n + idx];
            }
            col.solve_neumann(a, bot.at(c, 0, idx), top.at(c, 0, idx), &mut x);
            for j in 0..nz {
                out.data_mut()[(c * nz + j) * n + idx] = x[j];
            }
        }
    }
    out
}

/// Dirichlet-bottom column solves; returns the fluctuation and the bottom flux.
fn columns_dirichlet(
    rt: &Field3D,
    d: &SurfaceField,
    top: &SurfaceField,
    dt: f64,
    lambda: f64,
) -> (Field3D, SurfaceField) {
    let h = rt.hgrid().clone();
    let vg = rt.vgrid().clone();
    let mut col = Column::new(&vg);
    let mut out = rt.clone();
    let mut flux = SurfaceField::zeros(&h, Surface, rt.ncomp(), Repr::Spectral);
    let nz = vg.nz();
    let n = h.npts();
    let mut x = vec![ZERO; nz];
    for c in 0..rt.ncomp() {
        for idx in 0..n {
            let a = alpha(&h, idx, dt, lambda);
            for j in 0..nz {
                x[j] = rt.data()[(c * nz + j) * n + idx];
            }
            let f = col.solve_dirichlet(a, d.at(c, 0, idx), top.at(c, 0, idx), &mut x);
            flux.set(c, 0, idx, f);
            for j in 0..nz {
                out.data_mut()[(c * nz + j) * n + idx] = x[j];
            }
        }
    }
    (out, flux)
}

/// Solve the full linear problem.
pub fn solve_coupled(data: &LinearData, opts: &SolverOptions) -> Result<LinearSolution> {
    check_step(data.dt, data.lambda)?;
    let red = reduce(data, opts.compat_tol)?;
    let vg = data.vgrid().clone();
    let h = data.hgrid().clone();
    let (dt, lambda) = (data.dt, data.lambda);
    let r = red.g_v.axpy(1.0 / dt, &data.v0.to_spectral());
    let r_bar = vertical_average(&r);
    let r_tilde = r.sub(&Field3D::broadcast(&r_bar, &vg));
    let (f_bot, f_top) = flux_fields(data);
    let len = vg.length();
    let alpha_of = |idx: usize| alpha(&h, idx, dt, lambda);

    let Some(b_d) = &data.b_v_d else {
        let vt = columns_neumann(&r_tilde, &f_bot, &f_top, dt, lambda);
        let b = f_top.sub(&f_bot).scale(1.0 / len);
        let (v_bar, pi_s) = barotropic_field(&r_bar.add(&b), &red.g_div, alpha_of);
        let v = vt.add(&Field3D::broadcast(&v_bar, &vg));
        return Ok(LinearSolution { v, v_bar, pi_s, residuals: vec![0.0] });
    };
    let b_d = b_d.to_spectral();

    let (v_bar, pi_s, residuals) = match opts.mode {
        SolveMode::Picard => {
            let mut v_bar = vertical_average(&data.v0).to_spectral();
            let mut residuals = Vec::new();
            let mut pi_s;
            loop {
                let (_, flux) = columns_dirichlet(&r_tilde, &b_d.sub(&v_bar), &f_top, dt, lambda);
                let b = f_top.sub(&flux).scale(1.0 / len);
                let (next, p) = barotropic_field(&r_bar.add(&b), &red.g_div, alpha_of);
                pi_s = p;
                let res = next.sub(&v_bar).norm_l2() / (1.0 + next.norm_l2());
                residuals.push(res);
                v_bar = next;
                if res <= opts.picard_tol {
                    break;
                }
                if residuals.len() >= opts.picard_max || !res.is_finite() {
                    return Err(Error::StepFailure {
                        t: f64::NAN,
                        reason: format!("linear coupling did not converge in {} sweeps", residuals.len()),
                        residuals,
                    });
                }
            }
            (v_bar, pi_s, residuals)
        }
        SolveMode::Direct => {
            let zero = b_d.scale(0.0);
            let (_, flux0) = columns_dirichlet(&r_tilde, &zero, &f_top, dt, lambda);
            let mut col = Column::new(&vg);
            let phi: Vec<f64> = (0..h.npts()).map(|idx| col.dirichlet_response(alpha_of(idx))).collect();
            let mut rhs = r_bar.add(&f_top.sub(&flux0).scale(1.0 / len));
            for c in 0..2 {
                for idx in 0..h.npts() {
                    let v = rhs.at(c, 0, idx) - b_d.at(c, 0, idx) * (phi[idx] / len);
                    rhs.set(c, 0, idx, v);
                }
            }
            let (v_bar, pi_s) = barotropic_field(&rhs, &red.g_div, |idx| alpha_of(idx) - phi[idx] / len);
            (v_bar, pi_s, vec![0.0])
        }
    };
    let (vt, _) = columns_dirichlet(&r_tilde, &b_d.sub(&v_bar), &f_top, dt, lambda);
    let v = vt.add(&Field3D::broadcast(&v_bar, &vg));
    Ok(LinearSolution { v, v_bar, pi_s, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{delta_a, laplace_h};

    fn grids(nz: usize) -> (Arc<HorizontalGrid>, Arc<VerticalGrid>) {
        (HorizontalGrid::new(8, 8).unwrap(), VerticalGrid::ocean(nz).unwrap())
    }

    #[test]
    fn gradient_rhs_is_pressure() {
        let (h, _) = grids(5);
        let q = SurfaceField::from_fn(&h, 1, |_, x, y| (x + 2.0 * y).cos() + 3.0);
        let zero2 = SurfaceField::zeros(&h, Surface, 2, Repr::Spectral);
        let zero1 = SurfaceField::zeros(&h, Surface, 1, Repr::Spectral);
        let (v, pi) = solve_barotropic(&grad_h(&q), &zero1, &zero2, 0.0, 0.1).unwrap();
        assert!(v.max_abs() < 1e-13);
        let e = q.to_spectral().axpy(-3.0, &SurfaceField::from_fn(&h, 1, |_, _, _| 1.0));
        assert!(pi.sub(&e).max_abs() < 1e-13);
    }

    #[test]
    fn barotropic_decay() {
        let (h, _) = grids(5);
        let prev = SurfaceField::from_fn(&h, 2, |c, x, y| if c == 0 { y.sin() } else { x.sin() + 1.0 });
        let zero2 = prev.scale(0.0).to_spectral();
        let zero1 = SurfaceField::zeros(&h, Surface, 1, Repr::Spectral);
        let (dt, lambda) = (0.1, 0.5);
        let (v, _) = solve_barotropic(&zero2, &zero1, &prev, lambda, dt).unwrap();
        let p = prev.to_spectral();
        for idx in 0..h.npts() {
            let f = 1.0 / (1.0 + dt * (h.k2(idx) + lambda));
            for c in 0..2 {
                assert!((v.at(c, 0, idx) - p.at(c, 0, idx) * f).norm() < 1e-14);
            }
        }
        let bad = SurfaceField::from_fn(&h, 1, |_, _, _| 1.0);
        assert!(matches!(
            solve_barotropic(&zero2, &bad, &prev, 0.0, dt),
            Err(Error::Gauge(_))
        ));
    }

    #[test]
    fn barotropic_plug_in() {
        let (h, _) = grids(5);
        let (dt, lambda) = (0.05, 0.0);
        let vb = SurfaceField::from_fn(&h, 2, |c, x, y| if c == 0 { x.sin() + y.cos() } else { 2.0 * (x - y).cos() });
        let pi = SurfaceField::from_fn(&h, 1, |_, x, y| (2.0 * x).sin() * y.cos());
        let rhs = vb
            .to_spectral()
            .scale(1.0 / dt + lambda)
            .sub(&laplace_h(&vb))
            .add(&grad_h(&pi));
        let g = div_h(&vb);
        let zero = vb.scale(0.0).to_spectral();
        let (v, p) = solve_barotropic(&rhs, &g, &zero, lambda, dt).unwrap();
        assert!(v.sub(&vb).max_abs() < 1e-12);
        assert!(p.sub(&pi).max_abs() < 1e-12);
    }

    #[test]
    fn baroclinic_trivial_cases() {
        let (h, o) = grids(9);
        let z2 = SurfaceField::zeros(&h, Surface, 2, Repr::Spectral);
        let zero = Field3D::zeros(&h, o.clone(), 2, Repr::Spectral);
        let v = solve_baroclinic(&zero, &z2, &z2, &zero, 0.0, 0.1).unwrap();
        assert_eq!(v.coeff_norm(), 0.0);
        let c = Field3D::from_fn(&h, &o, 2, |_, _, _, _| 2.0);
        let v = solve_baroclinic(&c, &z2, &z2, &zero, 0.0, 0.1).unwrap();
        assert!(v.max_abs() < 1e-13);
    }

    /// The discrete column equation is satisfied by the returned fluctuation.
    #[test]
    fn baroclinic_discrete_residual() {
        for vg in [VerticalGrid::ocean(9).unwrap(), VerticalGrid::atmosphere(9, 1.0).unwrap()] {
            let h = HorizontalGrid::new(8, 8).unwrap();
            let (dt, lambda) = (0.02, 0.3);
            let rhs = Field3D::from_fn(&h, &vg, 2, |c, x, y, s| (c as f64 + s).sin() * (x + y).cos() + s * s);
            let gt = SurfaceField::from_fn(&h, 2, |c, x, _| (c as f64 + 1.0) * x.cos());
            let gb = SurfaceField::from_fn(&h, 2, |_, _, y| y.sin());
            let prev = fluctuation(&Field3D::from_fn(&h, &vg, 2, |_, x, _, s| x.sin() * s));
            let v = solve_baroclinic(&rhs, &gt, &gb, &prev, lambda, dt).unwrap();
            assert!(vertical_average(&v).max_abs() < 1e-13);
            let dv = delta_a(&v, &gb, &gt);
            let b = Field3D::broadcast(&vertical_average(&dv), &vg);
            let lhs = v.scale(1.0 / dt + lambda).sub(&dv).add(&b);
            let r = fluctuation(&rhs.to_spectral().axpy(1.0 / dt, &prev));
            assert!(lhs.sub(&r).max_abs() < 1e-9 * r.max_abs());
        }
    }

    fn random_data(seed: u64, dirichlet: bool) -> LinearData {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let h = HorizontalGrid::new(8, 8).unwrap();
        let o = VerticalGrid::ocean(9).unwrap();
        let coeffs: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cf = coeffs.clone();
        let f = Field3D::from_fn(&h, &o, 2, move |c, x, y, z| {
            cf[c] * x.sin() * z + cf[3 + c] * (2.0 * y).cos() + cf[5] * z * z
        });
        let cv = coeffs.clone();
        let v0 = Field3D::from_fn(&h, &o, 2, move |c, x, y, z| {
            if c == 0 { cv[6] * y.sin() + cv[7] * z } else { cv[8] * x.cos() * (1.0 + z) - cv[7] * z }
        });
        let v0 = project_average(&v0);
        let mut d = LinearData::new(v0, f, 0.01, 0.0);
        let cb = coeffs.clone();
        d.b_n_top = SurfaceField::from_fn(&h, 2, move |c, x, y| cb[9 + c] * (x - y).sin());
        if dirichlet {
            let cd = coeffs;
            d.b_v_d = Some(SurfaceField::from_fn(&h, 2, move |c, x, _| cd[11] * x.cos() + c as f64 * 0.3));
        }
        d
    }

    #[test]
    fn picard_matches_direct() {
        for seed in 0..4 {
            let d = random_data(seed, true);
            let pic = solve_coupled(&d, &SolverOptions { mode: SolveMode::Picard, ..Default::default() }).unwrap();
            let dir = solve_coupled(&d, &SolverOptions::default()).unwrap();
            let err = pic.v.sub(&dir.v).norm_l2() / dir.v.norm_l2();
            assert!(err < 1e-10, "seed {seed}: {err}");
            assert!(pic.iterations() > 2);
            let bot = dir.v.trace(crate::domain::Boundary::Bottom);
            assert!(bot.sub(d.b_v_d.as_ref().unwrap()).max_abs() < 1e-11);
        }
    }

    #[test]
    fn neumann_is_one_sweep_and_solenoidal() {
        let d = random_data(7, false);
        let s = solve_coupled(&d, &SolverOptions { mode: SolveMode::Picard, ..Default::default() }).unwrap();
        assert_eq!(s.iterations(), 1);
        assert!(div_h(&vertical_average(&s.v)).max_abs() < 1e-12);
        assert!(s.pi_s.at(0, 0, 0).norm() < 1e-15);
    }

    #[test]
    fn coupled_discrete_residual() {
        let d = random_data(3, false);
        let s = solve_coupled(&d, &SolverOptions::default()).unwrap();
        let lhs = s
            .v
            .sub(&d.v0)
            .scale(1.0 / d.dt)
            .sub(&delta_a(&s.v, &d.b_n_bottom, &d.b_n_top))
            .add(&Field3D::broadcast(&grad_h(&s.pi_s), d.vgrid()));
        assert!(lhs.sub(&d.f_v).max_abs() < 1e-9);
    }

    #[test]
    fn compatibility_rejected() {
        let mut d = random_data(1, false);
        d.b_w_a = SurfaceField::from_fn(d.hgrid(), 1, |_, x, _| x.cos());
        assert!(matches!(solve_coupled(&d, &SolverOptions::default()), Err(Error::Compatibility(_))));
        d.b_w_a = SurfaceField::from_fn(d.hgrid(), 1, |_, _, _| 1.0);
        assert!(matches!(solve_coupled(&d, &SolverOptions::default()), Err(Error::Gauge(_))));
    }

    #[test]
    fn reduce_examples() {
        let d = random_data(2, false);
        let r = reduce(&d, 1e-10).unwrap();
        assert!(r.g_v.sub(&d.f_v).max_abs() < 1e-14);
        let mut d1 = d.clone();
        d1.f_w = Field3D::from_fn(d.hgrid(), d.vgrid(), 1, |_, _, _, _| 1.0);
        assert!(reduce(&d1, 1e-10).unwrap().g_v.sub(&d.f_v).max_abs() < 1e-13);
        d1.f_w = Field3D::from_fn(d.hgrid(), d.vgrid(), 1, |_, x, _, _| x.cos());
        let e = d.f_v.add(&Field3D::from_fn(d.hgrid(), d.vgrid(), 2, |c, x, _, z| {
            if c == 0 { (z + 1.0) * x.sin() } else { 0.0 }
        }));
        assert!(reduce(&d1, 1e-10).unwrap().g_v.sub(&e).max_abs() < 1e-13);
    }
}
