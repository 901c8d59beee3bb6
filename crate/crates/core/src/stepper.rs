//! Nonlinear time integration of the coupled system.
//!
//! Each step runs an outer Picard loop: from the current iterate the advection
//! terms and the interface drag are evaluated, both subdomain linear problems
//! are solved, and the loop repeats until the update stalls below `picard_tol`.

use std::sync::Arc;

use crate::calculus::{cumulative_integral, d_vertical_sbp, div_h, laplace_h, vertical_diffusion};
use crate::diagnostics::{energy_budget, BudgetReport, StepInternals};
use crate::domain::{Boundary, Field3D, HorizontalGrid, Repr, State, Surface, SurfaceField, VerticalGrid, VerticalKind};
use crate::error::{Error, Result};
use crate::hstokes::{project_average, solve_coupled, LinearData, SolverOptions};
use crate::interface::{drag, drag_semi_implicit, relative_velocity};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    BackwardEuler,
    CrankNicolson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DragMode {
    /// `V_new |V^n|` with the modulus lagged at the old level.
    SemiImplicitLag,
    /// `V^n |V^n|`.
    Explicit,
    /// Linear law `V` (test flag).
    Linear,
    /// No interface stress (test flag): the subdomains decouple.
    Off,
}

#[derive(Clone, Copy, Debug)]
pub struct StepConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub lambda: f64,
    pub drag_mode: DragMode,
    pub solver: SolverOptions,
    /// Number of times a failing step may be split in two.
    pub max_halvings: u32,
}

impl StepConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            scheme: Scheme::BackwardEuler,
            picard_tol: 1e-11,
            picard_max: 25,
            lambda: 0.0,
            drag_mode: DragMode::SemiImplicitLag,
            solver: SolverOptions::default(),
            max_halvings: 3,
        }
    }
}

/// Momentum forcing of both subdomains plus extra interface Neumann data.
#[derive(Clone, Debug)]
pub struct Forcing {
    pub fa: Field3D,
    pub fo: Field3D,
    pub extra_top_a: SurfaceField,
    pub extra_top_o: SurfaceField,
}

impl Forcing {
    pub fn zero(h: &Arc<HorizontalGrid>, ag: &Arc<VerticalGrid>, og: &Arc<VerticalGrid>) -> Self {
        let s = SurfaceField::zeros(h, Surface, 2, Repr::Spectral);
        Self {
            fa: Field3D::zeros(h, ag.clone(), 2, Repr::Spectral),
            fo: Field3D::zeros(h, og.clone(), 2, Repr::Spectral),
            extra_top_a: s.clone(),
            extra_top_o: s,
        }
    }

    fn midpoint(&self, other: &Self) -> Self {
        Self {
            fa: self.fa.add(&other.fa).scale(0.5),
            fo: self.fo.add(&other.fo).scale(0.5),
            extra_top_a: self.extra_top_a.add(&other.extra_top_a).scale(0.5),
            extra_top_o: self.extra_top_o.add(&other.extra_top_o).scale(0.5),
        }
    }
}

pub trait ForcingSource {
    fn at(&self, t: f64) -> Forcing;
}

impl ForcingSource for Forcing {
    fn at(&self, _t: f64) -> Forcing {
        self.clone()
    }
}

impl<F: Fn(f64) -> Forcing> ForcingSource for F {
    fn at(&self, t: f64) -> Forcing {
        self(t)
    }
}

fn pointwise_mul(a: &Field3D, ca: usize, b: &Field3D, cb: usize) -> Field3D {
    let mut out = a.zeros_like(1);
    for j in 0..a.nlev() {
        let (pa, pb) = (a.plane(ca, j), b.plane(cb, j));
        let prod: Vec<_> = pa.iter().zip(pb).map(|(x, y)| x.re * y.re).collect();
        for (o, p) in out.plane_mut(0, j).iter_mut().zip(prod) {
            o.re = p;
        }
    }
    out
}

fn d_axis(f: &Field3D, axis: usize) -> Field3D {
    let mut s = f.to_spectral();
    let g = s.hgrid().clone();
    for c in 0..s.ncomp() {
        for j in 0..s.nlev() {
            for (idx, v) in s.plane_mut(c, j).iter_mut().enumerate() {
                let (kx, ky) = g.k(idx);
                let k = if axis == 0 { kx } else { ky };
                *v *= crate::domain::C64::new(0.0, k);
            }
        }
    }
    s.into_physical()
}

/// Advection `−(v·∇_H v + ω ∂_s v)` with `ω = −∫ div_H v`, evaluated in the
/// skew-symmetric split `½(advective + conservative)`, products in physical
/// space, result dealiased.
pub fn nonlinearity(v: &Field3D) -> Field3D {
    let vp = v.to_physical();
    let omega = cumulative_integral(&div_h(v)).scale(-1.0).into_physical();
    let dv = d_vertical_sbp(&vp);
    let dx = d_axis(&vp, 0);
    let dy = d_axis(&vp, 1);
    let mut out = vp.zeros_like(2);
    for c in 0..2 {
        let adv = pointwise_mul(&vp, 0, &dx, c)
            .add(&pointwise_mul(&vp, 1, &dy, c))
            .add(&pointwise_mul(&omega, 0, &dv, c));
        let cons = d_axis(&pointwise_mul(&vp, 0, &vp, c), 0)
            .add(&d_axis(&pointwise_mul(&vp, 1, &vp, c), 1))
            .add(&d_vertical_sbp(&pointwise_mul(&omega, 0, &vp, c)));
        let n = adv.add(&cons).scale(-0.5);
        for j in 0..vp.nlev() {
            out.plane_mut(c, j).copy_from_slice(n.plane(0, j));
        }
    }
    out.dealias()
}

pub fn nonlinearity_a(va: &Field3D) -> Result<Field3D> {
    expect_kind(va, VerticalKind::Atmosphere)?;
    Ok(nonlinearity(va))
}

pub fn nonlinearity_o(vo: &Field3D) -> Result<Field3D> {
    expect_kind(vo, VerticalKind::Ocean)?;
    Ok(nonlinearity(vo))
}

fn expect_kind(v: &Field3D, k: VerticalKind) -> Result<()> {
    if v.vgrid().kind() != k {
        return Err(Error::GridMismatch(format!("expected a field on the {k:?} grid")));
    }
    Ok(())
}

/// Explicit operator `Δ_H v − λv + ∂_s(κ∂_s v)` with given top Neumann data.
fn linear_operator(v: &Field3D, top: &SurfaceField, lambda: f64) -> Field3D {
    let zero = top.scale(0.0);
    laplace_h(v)
        .axpy(-lambda, v)
        .add(&vertical_diffusion(&v.to_spectral(), &zero, top))
}

/// Per-subdomain data that stay fixed during a step.
struct Sub {
    v_old: Field3D,
    /// `f^n + G(v^n) + L v^n` for Crank–Nicolson.
    explicit_cn: Option<Field3D>,
    sign: f64,
}

fn drag_data(mode: DragMode, scheme: Scheme, v_old: &SurfaceField, v_k: &SurfaceField) -> SurfaceField {
    match (mode, scheme) {
        (DragMode::Off, _) => v_k.scale(0.0).to_spectral(),
        (DragMode::Linear, _) => v_k.to_spectral(),
        (_, Scheme::CrankNicolson) => drag(v_k),
        (DragMode::SemiImplicitLag, _) => drag_semi_implicit(v_old, v_k),
        (DragMode::Explicit, _) => drag(v_old),
    }
}

fn old_drag(mode: DragMode, v_old: &SurfaceField) -> SurfaceField {
    match mode {
        DragMode::Off => v_old.scale(0.0).to_spectral(),
        DragMode::Linear => v_old.to_spectral(),
        _ => drag(v_old),
    }
}

/// Interface Neumann datum for one subdomain from the drag data.
fn top_data(kind: VerticalKind, p_s: f64, d: &SurfaceField, extra: &SurfaceField) -> SurfaceField {
    let s = match kind {
        VerticalKind::Atmosphere => -1.0 / p_s,
        VerticalKind::Ocean => p_s,
    };
    d.scale(s).add(extra)
}

/// One step without retries.
pub fn step(state: &State, cfg: &StepConfig, forcing: &dyn ForcingSource) -> Result<(State, BudgetReport)> {
    let dt = cfg.dt;
    let t1 = state.t + dt;
    let p_s = state.va.vgrid().p_s();
    let f_new = forcing.at(t1);
    let v_old = relative_velocity(state)?;

    let (f_eff, subs, d_old) = match cfg.scheme {
        Scheme::BackwardEuler => (
            f_new.clone(),
            [
                Sub { v_old: state.va.to_spectral(), explicit_cn: None, sign: -1.0 / p_s },
                Sub { v_old: state.vo.to_spectral(), explicit_cn: None, sign: p_s },
            ],
            None,
        ),
        Scheme::CrankNicolson => {
            let f_old = forcing.at(state.t);
            let d0 = old_drag(cfg.drag_mode, &v_old);
            let mk = |v: &Field3D, f: &Field3D, extra: &SurfaceField| {
                let top = top_data(v.vgrid().kind(), p_s, &d0, extra);
                f.to_spectral()
                    .add(&nonlinearity(v))
                    .add(&linear_operator(v, &top, cfg.lambda))
            };
            let ea = mk(&state.va, &f_old.fa, &f_old.extra_top_a);
            let eo = mk(&state.vo, &f_old.fo, &f_old.extra_top_o);
            (
                f_old.midpoint(&f_new),
                [
                    Sub { v_old: state.va.to_spectral(), explicit_cn: Some(ea), sign: -1.0 / p_s },
                    Sub { v_old: state.vo.to_spectral(), explicit_cn: Some(eo), sign: p_s },
                ],
                Some(d0),
            )
        }
    };
    let forcings = [&f_new.fa, &f_new.fo];
    let extras = [&f_new.extra_top_a, &f_new.extra_top_o];
    let solve_dt = match cfg.scheme {
        Scheme::BackwardEuler => dt,
        Scheme::CrankNicolson => 0.5 * dt,
    };

    let mut iter = [subs[0].v_old.clone(), subs[1].v_old.clone()];
    let mut frozen = [false, false];
    let mut residuals = Vec::new();
    let mut used_adv = [iter[0].zeros_like(2), iter[1].zeros_like(2)];
    let mut used_drag;
    loop {
        let v_k = iter[0].trace(Boundary::Top).sub(&iter[1].trace(Boundary::Top));
        used_drag = drag_data(cfg.drag_mode, cfg.scheme, &v_old, &v_k);
        let mut next = iter.clone();
        let mut res = [0.0f64; 2];
        for d in 0..2 {
            if frozen[d] {
                continue;
            }
            let sub = &subs[d];
            let g = nonlinearity(&iter[d]);
            let top = used_drag.scale(sub.sign).add(extras[d]);
            let f = match &sub.explicit_cn {
                None => forcings[d].to_spectral().add(&g),
                Some(e) => forcings[d].to_spectral().add(&g).add(e),
            };
            let mut data = LinearData::new(sub.v_old.clone(), f, solve_dt, cfg.lambda);
            data.b_n_top = top;
            let sol = solve_coupled(&data, &cfg.solver).map_err(|e| retag(e, t1))?;
            res[d] = sol.v.sub(&iter[d]).norm_l2() / (1.0 + sol.v.norm_l2());
            used_adv[d] = g;
            next[d] = sol.v;
        }
        iter = next;
        let r = res[0].max(res[1]);
        residuals.push(r);
        if !r.is_finite() {
            return Err(step_failure(t1, "non-finite iterate", residuals));
        }
        if r <= cfg.picard_tol {
            break;
        }
        if cfg.drag_mode == DragMode::Off {
            for d in 0..2 {
                frozen[d] |= res[d] <= cfg.picard_tol;
            }
        }
        if residuals.len() >= cfg.picard_max {
            return Err(step_failure(t1, "Picard iteration did not converge", residuals));
        }
    }

    let [va, vo] = iter;
    let next = State { va, vo, t: t1 };
    let (adv_a, adv_o, drag_eff) = match (cfg.scheme, d_old) {
        (Scheme::CrankNicolson, Some(d0)) => (
            used_adv[0].add(&nonlinearity(&state.va)).scale(0.5),
            used_adv[1].add(&nonlinearity(&state.vo)).scale(0.5),
            used_drag.add(&d0).scale(0.5),
        ),
        _ => (used_adv[0].clone(), used_adv[1].clone(), used_drag),
    };
    let internals = StepInternals {
        dt,
        lambda: cfg.lambda,
        scheme: cfg.scheme,
        forcing_a: f_eff.fa,
        forcing_o: f_eff.fo,
        advection_a: adv_a,
        advection_o: adv_o,
        drag: drag_eff,
        extra_top_a: f_eff.extra_top_a,
        extra_top_o: f_eff.extra_top_o,
        picard_iterations: residuals.len(),
    };
    let report = energy_budget(state, &next, &internals)?;
    Ok((next, report))
}

fn retag(e: Error, t: f64) -> Error {
    match e {
        Error::StepFailure { reason, residuals, .. } => Error::StepFailure { t, reason, residuals },
        other => other,
    }
}

fn step_failure(t: f64, reason: &str, residuals: Vec<f64>) -> Error {
    Error::StepFailure { t, reason: reason.into(), residuals }
}

/// One step of size `cfg.dt`; failures are retried as two half steps,
/// recursively, at most `cfg.max_halvings` times.
pub fn advance(state: &State, cfg: &StepConfig, forcing: &dyn ForcingSource) -> Result<(State, Vec<BudgetReport>)> {
    advance_inner(state, cfg, forcing, 0)
}

fn advance_inner(
    state: &State,
    cfg: &StepConfig,
    forcing: &dyn ForcingSource,
    depth: u32,
) -> Result<(State, Vec<BudgetReport>)> {
    match step(state, cfg, forcing) {
        Ok((s, r)) => Ok((s, vec![r])),
        Err(Error::StepFailure { .. }) if depth < cfg.max_halvings => {
            let half = StepConfig { dt: 0.5 * cfg.dt, ..*cfg };
            let (mid, mut r1) = advance_inner(state, &half, forcing, depth + 1)?;
            let (end, r2) = advance_inner(&mid, &half, forcing, depth + 1)?;
            r1.extend(r2);
            Ok((end, r1))
        }
        Err(e) => Err(e),
    }
}

/// Project both vertical averages onto horizontally solenoidal fields.
pub fn project_state(s: &State) -> State {
    State { va: project_average(&s.va), vo: project_average(&s.vo), t: s.t }
}

pub fn steps_for(t_end: f64, dt: f64) -> u64 {
    (t_end / dt).round().max(0.0) as u64
}

/// Advance from step `start` to step `end`, calling `observe` after every
/// accepted step with the step number, the new state and its ledgers.
pub fn run_steps(
    state: State,
    start: u64,
    end: u64,
    cfg: &StepConfig,
    forcing: &dyn ForcingSource,
    observe: &mut dyn FnMut(u64, &State, &[BudgetReport]) -> Result<()>,
) -> Result<State> {
    let mut s = state;
    for n in start..end {
        let (next, reports) = advance(&s, cfg, forcing)?;
        s = next;
        observe(n + 1, &s, &reports)?;
    }
    Ok(s)
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub snapshots: Vec<(u64, State)>,
    pub budgets: Vec<BudgetReport>,
}

/// Project the initial data and integrate to `t_end`, keeping every
/// `output_every`-th state.
pub fn run(
    init: &State,
    cfg: &StepConfig,
    forcing: &dyn ForcingSource,
    t_end: f64,
    output_every: u64,
) -> Result<Trajectory> {
    let s0 = project_state(init);
    let mut traj = Trajectory { snapshots: vec![(0, s0.clone())], budgets: vec![] };
    let every = output_every.max(1);
    run_steps(s0, 0, steps_for(t_end, cfg.dt), cfg, forcing, &mut |n, s, r| {
        traj.budgets.extend_from_slice(r);
        if n % every == 0 {
            traj.snapshots.push((n, s.clone()));
        }
        Ok(())
    })?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::HorizontalGrid;

    fn grids() -> (Arc<HorizontalGrid>, Arc<VerticalGrid>, Arc<VerticalGrid>) {
        (
            HorizontalGrid::new(8, 8).unwrap(),
            VerticalGrid::atmosphere(6, 1.0).unwrap(),
            VerticalGrid::ocean(6).unwrap(),
        )
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let (h, a, o) = grids();
        let s = State::zeros(&h, &a, &o);
        let f = Forcing::zero(&h, &a, &o);
        let (n, r) = step(&s, &StepConfig::new(0.01), &f).unwrap();
        assert_eq!(n.va.coeff_norm() + n.vo.coeff_norm(), 0.0);
        assert_eq!(r.energy(), 0.0);
        let t = run(&s, &StepConfig::new(0.01), &f, 0.0, 1).unwrap();
        assert_eq!(t.snapshots.len(), 1);
    }

    #[test]
    fn nonlinearity_examples() {
        let (h, a, o) = grids();
        let c = Field3D::from_fn(&h, &a, 2, |c, _, _, p| if c == 0 { p } else { 1.0 - p * p });
        assert!(nonlinearity(&c).max_abs() < 1e-13);
        let v = Field3D::from_fn(&h, &o, 2, |c, _, y, _| if c == 0 { y.sin() } else { 0.0 });
        assert!(nonlinearity_o(&v).unwrap().max_abs() < 1e-13);
        let v = Field3D::from_fn(&h, &a, 2, |c, x, y, _| if c == 0 { y.sin() } else { x.sin() });
        let e = Field3D::from_fn(&h, &a, 2, |c, x, y, _| {
            if c == 0 { -x.sin() * y.cos() } else { -y.sin() * x.cos() }
        });
        assert!(nonlinearity_a(&v).unwrap().sub(&e).max_abs() < 1e-12);
        assert!(nonlinearity_o(&v).is_err());
    }

    #[test]
    fn advection_is_energy_neutral() {
        let (h, a, _) = grids();
        let v = project_average(&Field3D::from_fn(&h, &a, 2, |c, x, y, p| {
            if c == 0 { (x + p).sin() * y.cos() } else { (2.0 * y).cos() * p * p + x.cos() }
        }))
        .dealias();
        let g = nonlinearity(&v);
        assert!(g.inner(&v).abs() < 1e-12 * g.norm_l2() * v.norm_l2());
    }
}
