//! Manufactured-solution convergence harness.
//!
//! Every case uses closed-form fields `W = amp·(A(x,y) + P(s) C(x,y))` with
//! `A = (sin y, sin x)`, `C = (cos x, cos y)` and the zero-mean vertical
//! profile `P = cos(πr) + r² − 1/3`, `r = (s − a)/(b − a)`, which has a zero
//! derivative at the outer boundary and a nonzero one at the interface. The
//! forcings are derived analytically. Horizontal modes stay at `|k| ≤ 2`, so
//! every product is resolved on an 8×8 grid.
//!
//! Ladders:
//! - vertical: error against the exact field under `nz − 1` doubling;
//! - horizontal: difference between successive `nx = ny` doublings, which
//!   isolates the horizontal discretisation error;
//! - temporal: difference between successive `dt` halvings at fixed grids.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::calculus::{laplace_h, vertical_diffusion};
use crate::domain::{Field3D, HorizontalGrid, Repr, State, Surface, SurfaceField, VerticalGrid, VerticalKind};
use crate::error::{Error, Result};
use crate::hstokes::{project_average, solve_coupled, LinearData, SolverOptions};
use crate::interface::drag;
use crate::stepper::{step, DragMode, Forcing, Scheme, StepConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmsCase {
    /// Linear hydrostatic Stokes on the ocean grid with Neumann data.
    LinearOcean,
    /// Linear problem on the atmosphere grid (flux-form `∂_p(p²∂_p)`).
    LinearAtmosphere,
    /// Full coupled nonlinear system; the boundary residual enters as extra
    /// interface Neumann data.
    Nonlinear,
}

impl MmsCase {
    pub const ALL: [MmsCase; 3] = [Self::LinearOcean, Self::LinearAtmosphere, Self::Nonlinear];

    pub fn name(self) -> &'static str {
        match self {
            Self::LinearOcean => "linear-ocean",
            Self::LinearAtmosphere => "linear-atmosphere",
            Self::Nonlinear => "nonlinear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Vertical,
    Horizontal,
    Temporal(Scheme),
}

impl Ladder {
    pub const ALL: [Ladder; 4] = [
        Self::Vertical,
        Self::Horizontal,
        Self::Temporal(Scheme::BackwardEuler),
        Self::Temporal(Scheme::CrankNicolson),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Vertical => "vertical",
            Self::Horizontal => "horizontal",
            Self::Temporal(Scheme::BackwardEuler) => "temporal-be",
            Self::Temporal(Scheme::CrankNicolson) => "temporal-cn",
        }
    }

    /// What the `resolution` column of a row means.
    pub fn unit(self) -> &'static str {
        match self {
            Self::Vertical => "nz",
            Self::Horizontal => "nx",
            Self::Temporal(_) => "dt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsRow {
    pub resolution: f64,
    pub error: f64,
    /// Previous error over this one.
    pub ratio: Option<f64>,
    /// `log2(ratio)`; every ladder refines by a factor of two.
    pub order: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct MmsReport {
    pub case: MmsCase,
    pub ladder: Ladder,
    pub rows: Vec<MmsRow>,
}

impl MmsReport {
    fn from_errors(case: MmsCase, ladder: Ladder, data: Vec<(f64, f64)>) -> Self {
        let mut rows: Vec<MmsRow> = Vec::with_capacity(data.len());
        for (resolution, error) in data {
            let ratio = rows.last().map(|r| r.error / error);
            rows.push(MmsRow { resolution, error, ratio, order: ratio.map(f64::log2) });
        }
        Self { case, ladder, rows }
    }

    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }
}

const BASE_NX: usize = 8;
const BASE_NZ: usize = 9;
const FIXED_NZ: usize = 17;
const LAMBDA: f64 = 0.5;
const P_S: f64 = 1.0;
const T_END: f64 = 0.4;
const BASE_DT: f64 = 0.04;

#[derive(Clone, Copy, Debug)]
struct Profile {
    a: f64,
    len: f64,
    atmosphere: bool,
}

impl Profile {
    fn of(vg: &VerticalGrid) -> Self {
        Self { a: vg.a(), len: vg.length(), atmosphere: vg.kind() == VerticalKind::Atmosphere }
    }

    fn r(&self, s: f64) -> f64 {
        (s - self.a) / self.len
    }

    fn val(&self, s: f64) -> f64 {
        let r = self.r(s);
        (PI * r).cos() + r * r - 1.0 / 3.0
    }

    fn ds(&self, s: f64) -> f64 {
        let r = self.r(s);
        (-PI * (PI * r).sin() + 2.0 * r) / self.len
    }

    fn dss(&self, s: f64) -> f64 {
        let r = self.r(s);
        (-PI * PI * (PI * r).cos() + 2.0) / (self.len * self.len)
    }

    /// `∂_s(κ ∂_s P)`.
    fn flux_div(&self, s: f64) -> f64 {
        if self.atmosphere {
            2.0 * s * self.ds(s) + s * s * self.dss(s)
        } else {
            self.dss(s)
        }
    }

    /// `∫_a^s P`.
    fn integral(&self, s: f64) -> f64 {
        let r = self.r(s);
        self.len * ((PI * r).sin() / PI + r * r * r / 3.0 - r / 3.0)
    }
}

fn a_val(c: usize, x: f64, y: f64) -> f64 {
    if c == 0 { y.sin() } else { x.sin() }
}

fn c_val(c: usize, x: f64, y: f64) -> f64 {
    if c == 0 { x.cos() } else { y.cos() }
}

/// Exact field `amp (A + P C)` with surface pressure `pi_amp cos(x + y)`.
#[derive(Clone, Copy, Debug)]
struct Exact {
    prof: Profile,
    amp: f64,
    pi_amp: f64,
}

impl Exact {
    fn new(vg: &VerticalGrid, amp: f64, pi_amp: f64) -> Self {
        Self { prof: Profile::of(vg), amp, pi_amp }
    }

    fn w(&self, c: usize, x: f64, y: f64, s: f64) -> f64 {
        self.amp * (a_val(c, x, y) + self.prof.val(s) * c_val(c, x, y))
    }

    fn w_s(&self, c: usize, x: f64, y: f64, s: f64) -> f64 {
        self.amp * self.prof.ds(s) * c_val(c, x, y)
    }

    /// `−Δ_H W − ∂_s(κ∂_s W) + λW + ∇_H π`; every horizontal mode has `|k| = 1`.
    fn steady_operator(&self, c: usize, x: f64, y: f64, s: f64, lambda: f64) -> f64 {
        (1.0 + lambda) * self.w(c, x, y, s) - self.amp * self.prof.flux_div(s) * c_val(c, x, y)
            - self.pi_amp * (x + y).sin()
    }

    /// `G(W) = −(W·∇_H W + ω ∂_s W)` with `ω = −∫_a^s div_H W`.
    fn advection(&self, c: usize, x: f64, y: f64, s: f64) -> f64 {
        let p = self.prof.val(s);
        let w0 = a_val(0, x, y) + p * c_val(0, x, y);
        let w1 = a_val(1, x, y) + p * c_val(1, x, y);
        // ∂_x and ∂_y of A_c and C_c
        let (ax, ay, cx, cy) = if c == 0 {
            (0.0, y.cos(), -x.sin(), 0.0)
        } else {
            (x.cos(), 0.0, 0.0, -y.sin())
        };
        let div_c = -x.sin() - y.sin();
        let omega = -self.prof.integral(s) * div_c;
        let adv = w0 * (ax + p * cx) + w1 * (ay + p * cy) + omega * self.prof.ds(s) * c_val(c, x, y);
        -self.amp * self.amp * adv
    }

    fn field(&self, h: &Arc<HorizontalGrid>, vg: &Arc<VerticalGrid>, scale: f64) -> Field3D {
        Field3D::from_fn(h, vg, 2, |c, x, y, s| scale * self.w(c, x, y, s)).into_spectral()
    }

    fn top(&self, h: &Arc<HorizontalGrid>, b: f64, scale: f64) -> SurfaceField {
        SurfaceField::from_fn(h, 2, |c, x, y| scale * self.w_s(c, x, y, b)).into_spectral()
    }

    fn trace(&self, h: &Arc<HorizontalGrid>, b: f64, scale: f64) -> SurfaceField {
        SurfaceField::from_fn(h, 2, |c, x, y| scale * self.w(c, x, y, b)).into_spectral()
    }
}

/// Time law `θ(t)` of the exact solution `θ(t) W`.
#[derive(Clone, Copy, Debug)]
enum TimeLaw {
    Steady,
    Oscillating,
}

impl TimeLaw {
    fn theta(self, t: f64) -> f64 {
        match self {
            Self::Steady => 1.0,
            Self::Oscillating => 1.0 + 0.5 * (2.0 * t).sin(),
        }
    }

    fn dtheta(self, t: f64) -> f64 {
        match self {
            Self::Steady => 0.0,
            Self::Oscillating => (2.0 * t).cos(),
        }
    }
}

fn grid_for(case: MmsCase, nz: usize) -> Result<Arc<VerticalGrid>> {
    match case {
        MmsCase::LinearAtmosphere => VerticalGrid::atmosphere(nz, P_S),
        _ => VerticalGrid::ocean(nz),
    }
}

fn max_abs_diff(u: &Field3D, v: &Field3D) -> f64 {
    u.to_physical().sub(&v.to_physical()).max_abs()
}

/// Largest difference at the points shared by a grid and its 2× refinement.
fn coarse_point_diff(coarse: &Field3D, fine: &Field3D) -> f64 {
    let (c, f) = (coarse.to_physical(), fine.to_physical());
    let (nxc, nxf) = (c.hgrid().nx(), f.hgrid().nx());
    let mut m = 0.0f64;
    for comp in 0..c.ncomp() {
        for j in 0..c.nlev() {
            for iy in 0..c.hgrid().ny() {
                for ix in 0..nxc {
                    let d = c.at(comp, j, iy * nxc + ix) - f.at(comp, j, 2 * iy * nxf + 2 * ix);
                    m = m.max(d.norm());
                }
            }
        }
    }
    m
}

// ---- linear cases ----

struct LinearProblem {
    h: Arc<HorizontalGrid>,
    vg: Arc<VerticalGrid>,
    ex: Exact,
    law: TimeLaw,
}

impl LinearProblem {
    fn new(case: MmsCase, nx: usize, nz: usize, law: TimeLaw) -> Result<Self> {
        let h = HorizontalGrid::new(nx, nx)?;
        let vg = grid_for(case, nz)?;
        let ex = Exact::new(&vg, 1.0, 0.5);
        Ok(Self { h, vg, ex, law })
    }

    fn forcing(&self, t: f64) -> Field3D {
        let (th, dth) = (self.law.theta(t), self.law.dtheta(t));
        let ex = self.ex;
        Field3D::from_fn(&self.h, &self.vg, 2, |c, x, y, s| {
            dth * ex.w(c, x, y, s) + th * ex.steady_operator(c, x, y, s, LAMBDA)
        })
        .into_spectral()
    }

    fn top(&self, t: f64) -> SurfaceField {
        self.ex.top(&self.h, self.vg.b(), self.law.theta(t))
    }

    fn solve(&self, v0: Field3D, f: Field3D, top: SurfaceField, dt: f64) -> Result<Field3D> {
        let mut data = LinearData::new(v0, f, dt, LAMBDA);
        data.b_n_top = top;
        Ok(solve_coupled(&data, &SolverOptions::default())?.v)
    }

    /// Discrete solution of `(1 − L_h) v = (1 − L) W`; approximates `W` to `O(h²)`.
    fn steady(&self) -> Result<Field3D> {
        let v0 = Field3D::zeros(&self.h, self.vg.clone(), 2, Repr::Spectral);
        let ex = self.ex;
        let f = Field3D::from_fn(&self.h, &self.vg, 2, |c, x, y, s| {
            ex.w(c, x, y, s) + ex.steady_operator(c, x, y, s, LAMBDA)
        })
        .into_spectral();
        self.solve(v0, f, ex.top(&self.h, self.vg.b(), 1.0), 1.0)
    }

    /// `Δ_H v − λ v + ∂_s(κ ∂_s v)` with the given interface data.
    fn operator(&self, v: &Field3D, top: &SurfaceField) -> Field3D {
        let zero = SurfaceField::zeros(&self.h, Surface, 2, Repr::Spectral);
        laplace_h(v).axpy(-LAMBDA, v).add(&vertical_diffusion(&v.to_spectral(), &zero, top))
    }

    fn integrate(&self, scheme: Scheme, dt: f64, t_end: f64) -> Result<Field3D> {
        // Start from the discrete elliptic projection of `W`: the interpolant
        // itself would excite stiff modes that Crank–Nicolson barely damps.
        let mut v = self.steady()?.scale(self.law.theta(0.0));
        let n = (t_end / dt).round() as usize;
        for i in 0..n {
            let (t0, t1) = (i as f64 * dt, (i + 1) as f64 * dt);
            v = match scheme {
                Scheme::BackwardEuler => self.solve(v, self.forcing(t1), self.top(t1), dt)?,
                Scheme::CrankNicolson => {
                    let f = self.forcing(t1).add(&self.forcing(t0)).add(&self.operator(&v, &self.top(t0)));
                    self.solve(v, f, self.top(t1), 0.5 * dt)?
                }
            };
        }
        Ok(v)
    }
}

// ---- nonlinear case ----

struct CoupledProblem {
    h: Arc<HorizontalGrid>,
    ag: Arc<VerticalGrid>,
    og: Arc<VerticalGrid>,
    ea: Exact,
    eo: Exact,
    law: TimeLaw,
}

impl CoupledProblem {
    fn new(nx: usize, nz: usize, law: TimeLaw) -> Result<Self> {
        let h = HorizontalGrid::new(nx, nx)?;
        let ag = VerticalGrid::atmosphere(nz, P_S)?;
        let og = VerticalGrid::ocean(nz)?;
        let ea = Exact::new(&ag, 0.5, 0.5);
        let eo = Exact::new(&og, -0.25, 0.25);
        Ok(Self { h, ag, og, ea, eo, law })
    }

    fn exact(&self, t: f64) -> State {
        let th = self.law.theta(t);
        State { va: self.ea.field(&self.h, &self.ag, th), vo: self.eo.field(&self.h, &self.og, th), t }
    }

    fn momentum(&self, ex: &Exact, vg: &Arc<VerticalGrid>, t: f64) -> Field3D {
        let (th, dth) = (self.law.theta(t), self.law.dtheta(t));
        let ex = *ex;
        Field3D::from_fn(&self.h, vg, 2, |c, x, y, s| {
            dth * ex.w(c, x, y, s) + th * ex.steady_operator(c, x, y, s, 0.0) - th * th * ex.advection(c, x, y, s)
        })
        .into_spectral()
    }

    fn forcing(&self, t: f64) -> Forcing {
        let th = self.law.theta(t);
        let v = self.ea.trace(&self.h, self.ag.b(), th).sub(&self.eo.trace(&self.h, self.og.b(), th));
        let d = drag(&v);
        Forcing {
            fa: self.momentum(&self.ea, &self.ag, t),
            fo: self.momentum(&self.eo, &self.og, t),
            extra_top_a: self.ea.top(&self.h, self.ag.b(), th).axpy(1.0 / P_S, &d),
            extra_top_o: self.eo.top(&self.h, self.og.b(), th).axpy(-P_S, &d),
        }
    }

    fn integrate(&self, scheme: Scheme, dt: f64, t_end: f64) -> Result<State> {
        let s0 = self.exact(0.0);
        let mut s = State { va: project_average(&s0.va), vo: project_average(&s0.vo), t: 0.0 };
        let mut cfg = StepConfig::new(dt);
        cfg.scheme = scheme;
        cfg.drag_mode = DragMode::SemiImplicitLag;
        cfg.picard_max = 100;
        let src = |t: f64| self.forcing(t);
        for _ in 0..(t_end / dt).round() as usize {
            s = step(&s, &cfg, &src)?.0;
        }
        Ok(s)
    }
}

fn state_diff(a: &State, b: &State, diff: impl Fn(&Field3D, &Field3D) -> f64) -> f64 {
    diff(&a.va, &b.va).max(diff(&a.vo, &b.vo))
}

const STEADY_DT: f64 = 0.02;
const STEADY_STEPS: usize = 25;

/// Run one refinement ladder with `refine` error rows.
pub fn run_ladder(case: MmsCase, ladder: Ladder, refine: usize) -> Result<MmsReport> {
    if refine == 0 {
        return Err(Error::Parameter("refine must be at least 1".into()));
    }
    let pow = |i: usize| 1usize << i;
    let mut data = Vec::with_capacity(refine);
    match (case, ladder) {
        (MmsCase::Nonlinear, Ladder::Vertical) => {
            for i in 0..refine {
                let nz = (BASE_NZ - 1) * pow(i) + 1;
                let p = CoupledProblem::new(BASE_NX, nz, TimeLaw::Steady)?;
                let t_end = STEADY_DT * STEADY_STEPS as f64;
                let s = p.integrate(Scheme::BackwardEuler, STEADY_DT, t_end)?;
                data.push((nz as f64, state_diff(&s, &p.exact(t_end), max_abs_diff)));
            }
        }
        (MmsCase::Nonlinear, Ladder::Horizontal) => {
            let t_end = STEADY_DT * STEADY_STEPS as f64;
            let solve = |i: usize| -> Result<State> {
                CoupledProblem::new(BASE_NX * pow(i), FIXED_NZ, TimeLaw::Steady)?
                    .integrate(Scheme::BackwardEuler, STEADY_DT, t_end)
            };
            let mut prev = solve(0)?;
            for i in 0..refine {
                let next = solve(i + 1)?;
                data.push(((BASE_NX * pow(i)) as f64, state_diff(&prev, &next, coarse_point_diff)));
                prev = next;
            }
        }
        (MmsCase::Nonlinear, Ladder::Temporal(scheme)) => {
            let p = CoupledProblem::new(BASE_NX, FIXED_NZ, TimeLaw::Oscillating)?;
            let mut prev = p.integrate(scheme, BASE_DT, T_END)?;
            for i in 0..refine {
                let dt = BASE_DT / pow(i + 1) as f64;
                let next = p.integrate(scheme, dt, T_END)?;
                data.push((2.0 * dt, state_diff(&prev, &next, max_abs_diff)));
                prev = next;
            }
        }
        (_, Ladder::Vertical) => {
            for i in 0..refine {
                let nz = (BASE_NZ - 1) * pow(i) + 1;
                let p = LinearProblem::new(case, BASE_NX, nz, TimeLaw::Steady)?;
                let exact = p.ex.field(&p.h, &p.vg, 1.0);
                data.push((nz as f64, max_abs_diff(&p.steady()?, &exact)));
            }
        }
        (_, Ladder::Horizontal) => {
            let solve = |i: usize| LinearProblem::new(case, BASE_NX * pow(i), FIXED_NZ, TimeLaw::Steady)?.steady();
            let mut prev = solve(0)?;
            for i in 0..refine {
                let next = solve(i + 1)?;
                data.push(((BASE_NX * pow(i)) as f64, coarse_point_diff(&prev, &next)));
                prev = next;
            }
        }
        (_, Ladder::Temporal(scheme)) => {
            let p = LinearProblem::new(case, BASE_NX, FIXED_NZ, TimeLaw::Oscillating)?;
            let mut prev = p.integrate(scheme, BASE_DT, T_END)?;
            for i in 0..refine {
                let dt = BASE_DT / pow(i + 1) as f64;
                let next = p.integrate(scheme, dt, T_END)?;
                data.push((2.0 * dt, max_abs_diff(&prev, &next)));
                prev = next;
            }
        }
    }
    Ok(MmsReport::from_errors(case, ladder, data))
}

/// All ladders of one case.
pub fn run_case(case: MmsCase, refine: usize) -> Result<Vec<MmsReport>> {
    Ladder::ALL.into_iter().map(|l| run_ladder(case, l, refine)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_closed_forms() {
        for vg in [VerticalGrid::ocean(5).unwrap(), VerticalGrid::atmosphere(5, 1.3).unwrap()] {
            let p = Profile::of(&vg);
            let (a, b) = (vg.a(), vg.b());
            assert!(p.ds(a).abs() < 1e-14 && p.ds(b).abs() > 0.1);
            assert!(p.integral(a).abs() < 1e-14 && p.integral(b).abs() < 1e-14);
            let h = 1e-5;
            let s = a + 0.3 * p.len;
            assert!(((p.integral(s + h) - p.integral(s - h)) / (2.0 * h) - p.val(s)).abs() < 1e-8);
            assert!(((p.val(s + h) - p.val(s - h)) / (2.0 * h) - p.ds(s)).abs() < 1e-7);
            assert!(((p.ds(s + h) - p.ds(s - h)) / (2.0 * h) - p.dss(s)).abs() < 1e-6);
        }
    }

    #[test]
    fn ladder_rows_and_orders() {
        let r = MmsReport::from_errors(
            MmsCase::LinearOcean,
            Ladder::Vertical,
            vec![(9.0, 4e-3), (17.0, 1e-3), (33.0, 2.5e-4)],
        );
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows[0].ratio.is_none());
        assert!((r.rows[2].ratio.unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(r.orders().len(), 2);
        assert!(run_ladder(MmsCase::LinearOcean, Ladder::Vertical, 0).is_err());
        assert_eq!(MmsCase::parse("linear-atmosphere"), Some(MmsCase::LinearAtmosphere));
    }
}
