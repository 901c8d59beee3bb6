//! Browser bindings: free-decay energy curves, the Littlewood–Paley
//! partition, and the interface drag of a random surface field.

use caosim::interface::drag;
use caosim::norms::multiplier;
use caosim::presets::{initial_state, random_surface, Preset};
use caosim::stepper::{run_steps, DragMode, Forcing, StepConfig};
use caosim::{HorizontalGrid, VerticalGrid};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn drag_mode(name: &str) -> Result<DragMode, JsError> {
    match name {
        "semi_implicit_lag" => Ok(DragMode::SemiImplicitLag),
        "explicit" => Ok(DragMode::Explicit),
        "linear" => Ok(DragMode::Linear),
        "off" => Ok(DragMode::Off),
        other => Err(JsError::new(&format!("unknown drag mode {other}"))),
    }
}

/// Unforced run from seeded data of unit energy. Returns `[t, E_a, E_o]`
/// triples for the initial state and every step.
#[wasm_bindgen]
pub fn energy_decay(n: usize, nz: usize, steps: u32, dt: f64, seed: u64, mode: &str) -> Result<Vec<f64>, JsError> {
    let h = HorizontalGrid::new(n, n).map_err(js_err)?;
    let a = VerticalGrid::atmosphere(nz, 1.0).map_err(js_err)?;
    let o = VerticalGrid::ocean(nz).map_err(js_err)?;
    let init = initial_state(&h, &a, &o, &Preset::random(1.0, seed));
    let mut cfg = StepConfig::new(dt);
    cfg.drag_mode = drag_mode(mode)?;
    let mut out = vec![0.0, 0.5 * init.va.inner(&init.va), 0.5 * init.vo.inner(&init.vo)];
    let zero = Forcing::zero(&h, &a, &o);
    run_steps(init, 0, steps as u64, &cfg, &zero, &mut |_, s, _| {
        out.extend([s.t, 0.5 * s.va.inner(&s.va), 0.5 * s.vo.inner(&s.vo)]);
        Ok(())
    })
    .map_err(js_err)?;
    Ok(out)
}

/// Block multipliers `φ_0 … φ_kmax` sampled at `samples` points of
/// `[0, xi_max]`, block by block; the last row is their sum.
#[wasm_bindgen]
pub fn lp_multipliers(kmax: usize, samples: usize, xi_max: f64) -> Vec<f64> {
    let xs = (0..samples).map(|i| xi_max * i as f64 / (samples.max(2) - 1) as f64);
    let mut out = Vec::with_capacity((kmax + 2) * samples);
    for k in 0..=kmax {
        out.extend(xs.clone().map(|x| multiplier(k, x, kmax)));
    }
    out.extend(xs.map(|x| (0..=kmax).map(|k| multiplier(k, x, kmax)).sum::<f64>()));
    out
}

/// Random relative velocity `V` on an `n × n` grid, scaled by `lambda`, and
/// its drag `V|V|`: four planes `V_x, V_y, D_x, D_y`, row-major in `y`.
#[wasm_bindgen]
pub fn drag_field(n: usize, seed: u64, decay: f64, lambda: f64) -> Result<Vec<f64>, JsError> {
    let h = HorizontalGrid::new(n, n).map_err(js_err)?;
    let v = random_surface(&h, seed, decay).scale(lambda);
    let d = drag(&v);
    let (vp, dp) = (v.to_physical(), d.to_physical());
    let mut out = Vec::with_capacity(4 * n * n);
    for f in [&vp, &dp] {
        for c in 0..2 {
            out.extend(f.plane(c, 0).iter().map(|z| z.re));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multipliers_sum_to_one() {
        let m = lp_multipliers(5, 200, 80.0);
        assert_eq!(m.len(), 7 * 200);
        assert!(m[6 * 200..].iter().all(|s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn drag_quadruples_under_doubling() {
        let a = drag_field(8, 3, -1.0, 1.0).unwrap();
        let b = drag_field(8, 3, -1.0, 2.0).unwrap();
        for i in 128..256 {
            assert!((b[i] - 4.0 * a[i]).abs() <= 1e-14 * a[i].abs().max(1.0));
        }
    }

    #[test]
    fn energy_decays() {
        let e = energy_decay(8, 6, 10, 1e-2, 1, "semi_implicit_lag").unwrap();
        assert_eq!(e.len(), 33);
        let tot: Vec<f64> = e.chunks(3).map(|c| c[1] + c[2]).collect();
        assert!((tot[0] - 1.0).abs() < 1e-12);
        assert!(tot.windows(2).all(|w| w[1] <= w[0]));
    }
}
