//! Energy ledgers and monitors.
//!
//! The per-step ledger closes the discrete energy identity
//!
//! ```text
//! E_n − E_{n+1} = T + dt·(D_h + D_v + drag − forcing − advection)
//! ```
//!
//! where every term is evaluated at the level the scheme uses (the new state
//! for backward Euler, the midpoint for Crank–Nicolson) and `T = ½‖v^{n+1} − v^n‖²`
//! is the numerical dissipation of backward Euler (zero for Crank–Nicolson).

use crate::calculus::{d_vertical, div_h, grad_h, homogeneous_diffusion, laplace_h, map_columns, vertical_average};
use crate::domain::{Boundary, Field3D, State, SurfaceField, VerticalKind};
use crate::error::{Error, Result};
use crate::hydrostatics::{reconstruct_omega, reconstruct_w};
use crate::interface::relative_velocity;
use crate::stepper::Scheme;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BudgetReport {
    pub t: f64,
    pub e_a: f64,
    pub e_o: f64,
    pub diss_h_a: f64,
    pub diss_v_a: f64,
    pub diss_h_o: f64,
    pub diss_v_o: f64,
    /// `p_s ∫ drag·V` at the evaluation level; nonnegative for dissipative drag.
    pub drag: f64,
    pub forcing_work: f64,
    pub advection_work: f64,
    pub time_dissipation: f64,
    pub residual: f64,
    pub v_l3_cubed: f64,
    pub h1_a: f64,
    pub h1_o: f64,
    pub lap2_a: f64,
    pub lap2_o: f64,
    /// Largest of `|div_H v̄|`, `|w(0)|`, `|ω(p_s)|` over the new state.
    pub constraint: f64,
    pub picard_iterations: usize,
}

impl BudgetReport {
    pub fn energy(&self) -> f64 {
        self.e_a + self.e_o
    }

    pub const CSV_HEADER: &'static str =
        "t,E_a,E_o,diss_h_a,diss_v_a,diss_h_o,diss_v_o,drag,forcing_work,residual,V_L3cubed,H1_a,H1_o";

    pub fn csv_row(&self) -> String {
        let v = [
            self.t,
            self.e_a,
            self.e_o,
            self.diss_h_a,
            self.diss_v_a,
            self.diss_h_o,
            self.diss_v_o,
            self.drag,
            self.forcing_work,
            self.residual,
            self.v_l3_cubed,
            self.h1_a,
            self.h1_o,
        ];
        v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
    }
}

/// Quantities a step actually used, as seen by the ledger.
#[derive(Clone, Debug)]
pub struct StepInternals {
    pub dt: f64,
    pub lambda: f64,
    pub scheme: Scheme,
    pub forcing_a: Field3D,
    pub forcing_o: Field3D,
    pub advection_a: Field3D,
    pub advection_o: Field3D,
    /// Drag data entering the interface conditions (`−drag/p_s` and `p_s·drag`).
    pub drag: SurfaceField,
    /// Additional interface Neumann data on top of the drag.
    pub extra_top_a: SurfaceField,
    pub extra_top_o: SurfaceField,
    pub picard_iterations: usize,
}

fn vertical_dissipation(v: &Field3D) -> f64 {
    let vg = v.vgrid().clone();
    -map_columns(v, homogeneous_diffusion(&vg)).inner(v)
}

fn horizontal_dissipation(v: &Field3D, lambda: f64) -> f64 {
    let mut s = 0.0;
    for c in 0..v.ncomp() {
        let g = grad_h(&v.component(c));
        s += g.inner(&g);
    }
    s + lambda * v.inner(v)
}

/// `sqrt(‖∇_H v‖² + ‖∂_s v‖²)`.
pub fn h1_seminorm(v: &Field3D) -> f64 {
    let dv = d_vertical(v);
    (horizontal_dissipation(v, 0.0) + dv.inner(&dv)).sqrt()
}

/// Discrete full Laplacian `Δ_H v + ∂_s(κ ∂_s v)` built from nodal derivatives.
pub fn full_laplacian(v: &Field3D) -> Field3D {
    let vg = v.vgrid().clone();
    let dv = d_vertical(v);
    let flux = match vg.kind() {
        VerticalKind::Ocean => dv,
        VerticalKind::Atmosphere => map_columns(&dv, |x, y| {
            for (j, (a, b)) in x.iter().zip(y.iter_mut()).enumerate() {
                let p = vg.nodes()[j];
                *b = a * (p * p);
            }
        }),
    };
    laplace_h(v).add(&d_vertical(&flux))
}

/// Largest violation of the solenoidal-average constraint and of the
/// vanishing interface vertical velocities.
pub fn constraint_residual(state: &State) -> f64 {
    let da = div_h(&vertical_average(&state.va)).max_abs();
    let dof = div_h(&vertical_average(&state.vo)).max_abs();
    let w = reconstruct_w(&state.vo).trace(Boundary::Top).max_abs();
    let om = reconstruct_omega(&state.va).trace(Boundary::Top).max_abs();
    da.max(dof).max(w).max(om)
}

pub fn energy_budget(prev: &State, next: &State, int: &StepInternals) -> Result<BudgetReport> {
    let p_s = next.va.vgrid().p_s();
    let (eval, time_dissipation) = match int.scheme {
        Scheme::BackwardEuler => {
            let da = next.va.sub(&prev.va);
            let dof = next.vo.sub(&prev.vo);
            (next.clone(), 0.5 * (da.inner(&da) + dof.inner(&dof)))
        }
        Scheme::CrankNicolson => (
            State {
                va: next.va.add(&prev.va).scale(0.5),
                vo: next.vo.add(&prev.vo).scale(0.5),
                t: next.t,
            },
            0.0,
        ),
    };
    let v = relative_velocity(&eval)?;
    let drag = p_s * v.inner(&int.drag);
    let ag = eval.va.vgrid();
    let top_a = eval.va.trace(Boundary::Top);
    let top_o = eval.vo.trace(Boundary::Top);
    let extra = ag.kappa(ag.b()) * int.extra_top_a.inner(&top_a) + int.extra_top_o.inner(&top_o);
    let forcing_work = int.forcing_a.inner(&eval.va) + int.forcing_o.inner(&eval.vo) + extra;
    let advection_work = int.advection_a.inner(&eval.va) + int.advection_o.inner(&eval.vo);
    let mut r = BudgetReport {
        t: next.t,
        e_a: 0.5 * next.va.inner(&next.va),
        e_o: 0.5 * next.vo.inner(&next.vo),
        diss_h_a: horizontal_dissipation(&eval.va, int.lambda),
        diss_v_a: vertical_dissipation(&eval.va),
        diss_h_o: horizontal_dissipation(&eval.vo, int.lambda),
        diss_v_o: vertical_dissipation(&eval.vo),
        drag,
        forcing_work,
        advection_work,
        time_dissipation,
        picard_iterations: int.picard_iterations,
        ..Default::default()
    };
    let rates = r.diss_h_a + r.diss_v_a + r.diss_h_o + r.diss_v_o + drag - forcing_work - advection_work;
    let e_prev = 0.5 * (prev.va.inner(&prev.va) + prev.vo.inner(&prev.vo));
    r.residual = ((e_prev - r.energy()) - (time_dissipation + int.dt * rates)).abs();
    fill_state_norms(&mut r, next)?;
    Ok(r)
}

fn fill_state_norms(r: &mut BudgetReport, s: &State) -> Result<()> {
    let v = relative_velocity(s)?;
    r.v_l3_cubed = v.norm_lq(3.0).powi(3);
    r.h1_a = h1_seminorm(&s.va);
    r.h1_o = h1_seminorm(&s.vo);
    let la = full_laplacian(&s.va);
    let lo = full_laplacian(&s.vo);
    r.lap2_a = la.inner(&la);
    r.lap2_o = lo.inner(&lo);
    r.constraint = constraint_residual(s);
    Ok(())
}

/// Ledger of a single state: energies and instantaneous rates (no step data).
/// `forcing` holds the momentum forcing of both subdomains if known.
pub fn instantaneous_budget(
    s: &State,
    lambda: f64,
    forcing: Option<(&Field3D, &Field3D)>,
) -> Result<BudgetReport> {
    let p_s = s.va.vgrid().p_s();
    let v = relative_velocity(s)?;
    let mut r = BudgetReport {
        t: s.t,
        e_a: 0.5 * s.va.inner(&s.va),
        e_o: 0.5 * s.vo.inner(&s.vo),
        diss_h_a: horizontal_dissipation(&s.va, lambda),
        diss_v_a: vertical_dissipation(&s.va),
        diss_h_o: horizontal_dissipation(&s.vo, lambda),
        diss_v_o: vertical_dissipation(&s.vo),
        drag: p_s * v.inner(&crate::interface::drag(&v)),
        forcing_work: forcing.map_or(0.0, |(fa, fo)| fa.inner(&s.va) + fo.inner(&s.vo)),
        ..Default::default()
    };
    fill_state_norms(&mut r, s)?;
    Ok(r)
}

/// `∫ (ṽ·∇_H g + w ∂_s g)·|g|^{q−2} g` by grid quadrature.
pub fn cancellation_check(v_tilde: &Field3D, w: &Field3D, g: &Field3D, q: u32) -> Result<f64> {
    if q < 2 || q % 2 != 0 {
        return Err(Error::Parameter(format!("q must be an even integer ≥ 2 (got {q})")));
    }
    if v_tilde.ncomp() != 2 || w.ncomp() != 1 {
        return Err(Error::Parameter("expected a vector ṽ and a scalar w".into()));
    }
    let v = v_tilde.to_physical();
    let wp = w.to_physical();
    let gp = g.to_physical();
    let dg = d_vertical(&gp).into_physical();
    let grads: Vec<Field3D> = (0..g.ncomp()).map(|c| grad_h(&g.component(c)).into_physical()).collect();
    let mut out = gp.zeros_like(1);
    let n = g.hgrid().npts();
    for j in 0..g.nlev() {
        for idx in 0..n {
            let m = gp.modulus_at(j, idx).powi(q as i32 - 2);
            let mut s = 0.0;
            for (c, gc) in grads.iter().enumerate() {
                let transport = v.at(0, j, idx).re * gc.at(0, j, idx).re
                    + v.at(1, j, idx).re * gc.at(1, j, idx).re
                    + wp.at(0, j, idx).re * dg.at(c, j, idx).re;
                s += transport * gp.at(c, j, idx).re;
            }
            out.set(0, j, idx, crate::domain::C64::new(s * m, 0.0));
        }
    }
    let one = out.zeros_like(1).into_physical();
    let mut ones = one;
    for v in ones.data_mut() {
        v.re = 1.0;
    }
    Ok(out.inner(&ones))
}

/// Running integral of `‖v‖^p` in the `X_{μ_c}` proxy norm.
#[derive(Clone, Debug)]
pub struct BlowupMonitor {
    pub p: f64,
    pub q: f64,
    pub mu_c: f64,
    pub t: Vec<f64>,
    pub running_a: Vec<f64>,
    pub running_o: Vec<f64>,
}

impl BlowupMonitor {
    pub fn final_value(&self) -> f64 {
        self.running_a.last().copied().unwrap_or(0.0) + self.running_o.last().copied().unwrap_or(0.0)
    }
}

/// Interpolation proxy `‖v‖_q + ‖v‖_q^{1−β} ‖Δv‖_q^β` for `H^{2β,q}`.
pub fn interpolation_norm(v: &Field3D, q: f64, beta: f64) -> f64 {
    let a = v.norm_lq(q);
    let b = full_laplacian(v).norm_lq(q);
    a + a.powf(1.0 - beta) * b.powf(beta)
}

pub fn blowup_monitor(states: &[State], p: f64, q: f64) -> Result<BlowupMonitor> {
    if !(p >= q && q >= 2.0) {
        return Err(Error::Parameter(format!("need p ≥ q ≥ 2 (got p = {p}, q = {q})")));
    }
    let mu_c = 1.0 / p + 1.0 / q;
    if mu_c > 1.0 {
        return Err(Error::Parameter(format!("critical weight {mu_c} exceeds 1")));
    }
    let mut m = BlowupMonitor { p, q, mu_c, t: vec![], running_a: vec![], running_o: vec![] };
    let mut prev: Option<(f64, f64, f64)> = None;
    let (mut ia, mut io) = (0.0, 0.0);
    for s in states {
        let na = interpolation_norm(&s.va, q, mu_c).powf(p);
        let no = interpolation_norm(&s.vo, q, mu_c).powf(p);
        if let Some((t0, a0, o0)) = prev {
            let h = s.t - t0;
            ia += 0.5 * h * (a0 + na);
            io += 0.5 * h * (o0 + no);
        }
        prev = Some((s.t, na, no));
        m.t.push(s.t);
        m.running_a.push(ia);
        m.running_o.push(io);
    }
    Ok(m)
}

/// `‖∇v^a‖² + ‖∇v^o‖²` with its running maximum, and the running integral
/// of `‖Δv^a‖² + ‖Δv^o‖²`.
#[derive(Clone, Debug, Default)]
pub struct H1Series {
    pub t: Vec<f64>,
    pub h1_squared: Vec<f64>,
    pub sup_h1_squared: Vec<f64>,
    pub lap_integral: Vec<f64>,
}

pub fn h1_budget(states: &[State]) -> H1Series {
    let mut out = H1Series::default();
    let mut sup = 0.0f64;
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for s in states {
        let h1 = h1_seminorm(&s.va).powi(2) + h1_seminorm(&s.vo).powi(2);
        let la = full_laplacian(&s.va);
        let lo = full_laplacian(&s.vo);
        let lap = la.inner(&la) + lo.inner(&lo);
        if let Some((t0, l0)) = prev {
            integral += 0.5 * (s.t - t0) * (l0 + lap);
        }
        prev = Some((s.t, lap));
        sup = sup.max(h1);
        out.t.push(s.t);
        out.h1_squared.push(h1);
        out.sup_h1_squared.push(sup);
        out.lap_integral.push(integral);
    }
    out
}
