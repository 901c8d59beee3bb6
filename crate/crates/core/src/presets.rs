//! Initial-data and forcing presets.
//!
//! Random fields draw their coefficients from a ChaCha8 stream seeded with a
//! 64-bit seed, in a fixed mode order that does not depend on the grid size,
//! so the same seed yields the same band-limited field on every resolution.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{Field3D, HorizontalGrid, Repr, State, SurfaceField, VerticalGrid, C64};
use crate::hstokes::project_average;
use crate::stepper::{project_state, Forcing};

/// Largest horizontal wavenumber used by random fields.
pub const RANDOM_KMAX: usize = 4;
/// Number of vertical cosine modes used by random fields.
pub const RANDOM_VMODES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetKind {
    Zero,
    Smooth,
    Random,
}

impl PresetKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Smooth => "smooth",
            Self::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(Self::Zero),
            "smooth" => Some(Self::Smooth),
            "random" => Some(Self::Random),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preset {
    pub kind: PresetKind,
    pub amplitude: f64,
    pub seed: u64,
    /// Spectral decay exponent of random fields.
    pub decay: f64,
}

impl Preset {
    pub fn zero() -> Self {
        Self { kind: PresetKind::Zero, amplitude: 0.0, seed: 0, decay: -4.0 }
    }

    pub fn random(amplitude: f64, seed: u64) -> Self {
        Self { kind: PresetKind::Random, amplitude, seed, decay: -4.0 }
    }

    pub fn smooth(amplitude: f64) -> Self {
        Self { kind: PresetKind::Smooth, amplitude, seed: 0, decay: -4.0 }
    }
}

/// Random smooth 2-vector field: coefficients `N(0,1)·(1+|k|)^decay/(1+m)²`
/// on horizontal modes `|k_x|, |k_y| ≤ min(RANDOM_KMAX, cutoff)` and vertical
/// modes `cos(mπ(s−a)/L)`, `m < RANDOM_VMODES`.
pub fn random_field(
    h: &Arc<HorizontalGrid>,
    vg: &Arc<VerticalGrid>,
    rng: &mut ChaCha8Rng,
    decay: f64,
) -> Field3D {
    let (cx, cy) = h.cutoff();
    let kmax = RANDOM_KMAX as i64;
    let mut out = Field3D::zeros(h, vg.clone(), 2, Repr::Spectral);
    let mut draw = || {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    };
    for c in 0..2 {
        for m in 0..RANDOM_VMODES {
            for ky in -kmax..=kmax {
                for kx in -kmax..=kmax {
                    let z = draw();
                    if kx.unsigned_abs() as usize > cx || ky.unsigned_abs() as usize > cy {
                        continue;
                    }
                    let kk = ((kx * kx + ky * ky) as f64).sqrt();
                    let amp = (1.0 + kk).powf(decay) / ((1 + m) * (1 + m)) as f64;
                    let idx = h.index_of(kx, ky);
                    for (j, &s) in vg.nodes().iter().enumerate() {
                        let prof = (m as f64 * PI * (s - vg.a()) / vg.length()).cos();
                        let v = out.at(c, j, idx) + z * (amp * prof);
                        out.set(c, j, idx, v);
                    }
                }
            }
        }
    }
    out.into_physical().into_spectral()
}

fn smooth_pattern(h: &Arc<HorizontalGrid>, vg: &Arc<VerticalGrid>, sign: f64) -> Field3D {
    let (a, len) = (vg.a(), vg.length());
    Field3D::from_fn(h, vg, 2, move |c, x, y, s| {
        let r = (s - a) / len;
        let prof = 1.0 + 0.5 * (PI * r).cos();
        sign * prof * if c == 0 { y.sin() + 0.5 * (2.0 * y).cos() } else { x.sin() - 0.5 * (x + y).cos() }
    })
    .into_spectral()
}

/// Initial state with solenoidal averages and energy `amplitude²`.
pub fn initial_state(
    h: &Arc<HorizontalGrid>,
    ag: &Arc<VerticalGrid>,
    og: &Arc<VerticalGrid>,
    preset: &Preset,
) -> State {
    let raw = match preset.kind {
        PresetKind::Zero => return State::zeros(h, ag, og),
        PresetKind::Smooth => State { va: smooth_pattern(h, ag, 1.0), vo: smooth_pattern(h, og, -0.5), t: 0.0 },
        PresetKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(preset.seed);
            let va = random_field(h, ag, &mut rng, preset.decay);
            let vo = random_field(h, og, &mut rng, preset.decay).scale(0.5);
            State { va, vo, t: 0.0 }
        }
    };
    let p = project_state(&raw);
    let e = p.energy();
    if e == 0.0 {
        return p;
    }
    let s = preset.amplitude / e.sqrt();
    State { va: p.va.scale(s).dealias(), vo: p.vo.scale(s).dealias(), t: 0.0 }
}

/// Time-independent forcing; the root-mean-square of each field equals the amplitude.
pub fn forcing(
    h: &Arc<HorizontalGrid>,
    ag: &Arc<VerticalGrid>,
    og: &Arc<VerticalGrid>,
    preset: &Preset,
) -> Forcing {
    let mut f = Forcing::zero(h, ag, og);
    let (fa, fo) = match preset.kind {
        PresetKind::Zero => return f,
        PresetKind::Smooth => (smooth_pattern(h, ag, 1.0), smooth_pattern(h, og, -1.0)),
        PresetKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(preset.seed);
            (random_field(h, ag, &mut rng, preset.decay), random_field(h, og, &mut rng, preset.decay))
        }
    };
    let rms = |v: &Field3D| (v.inner(v) / (crate::domain::TORUS_AREA * v.vgrid().length())).sqrt();
    f.fa = project_average(&fa).scale(preset.amplitude / rms(&fa)).dealias();
    f.fo = project_average(&fo).scale(preset.amplitude / rms(&fo)).dealias();
    f
}

/// Random surface vector field with the same coefficient law (single level).
pub fn random_surface(h: &Arc<HorizontalGrid>, seed: u64, decay: f64) -> SurfaceField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vg = VerticalGrid::ocean(3).expect("valid grid");
    random_field(h, &vg, &mut rng, decay).level(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_state_is_admissible() {
        let h = HorizontalGrid::new(16, 16).unwrap();
        let a = VerticalGrid::atmosphere(8, 1.0).unwrap();
        let o = VerticalGrid::ocean(8).unwrap();
        let s = initial_state(&h, &a, &o, &Preset::random(1.0, 42));
        assert!((s.energy() - 1.0).abs() < 1e-12);
        assert!(s.constraint_residual() < 1e-12);
        assert!(s.va.sub(&s.va.dealias()).coeff_norm() == 0.0);
        let s2 = initial_state(&h, &a, &o, &Preset::random(1.0, 42));
        assert_eq!(s.va.data(), s2.va.data());
    }

    #[test]
    fn resolution_independent_coefficients() {
        let o = VerticalGrid::ocean(8).unwrap();
        let h1 = HorizontalGrid::new(16, 16).unwrap();
        let h2 = HorizontalGrid::new(32, 32).unwrap();
        let f1 = random_field(&h1, &o, &mut ChaCha8Rng::seed_from_u64(5), -4.0);
        let f2 = random_field(&h2, &o, &mut ChaCha8Rng::seed_from_u64(5), -4.0);
        let p1 = f1.to_physical().at(1, 2, 5 * 16 + 3).re;
        let p2 = f2.to_physical().at(1, 2, 10 * 32 + 6).re;
        assert!((p1 - p2).abs() < 1e-12);
    }
}
