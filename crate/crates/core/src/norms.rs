//! Discrete function-space norms: weighted `L^p_μ` in time, Littlewood–Paley
//! blocks in time and in horizontal space, Triebel–Lizorkin and Besov norms,
//! and the maximal-regularity norm of a velocity path.
//!
//! Time series are sampled at `t_i = (i + 1) dt`, `i = 0..n`, i.e. uniformly on
//! `(0, T]`. Before any time-frequency analysis a series is zero-extended to a
//! power-of-two length of at least twice its own, which matches paths starting
//! from zero and biases paths that do not.

use std::sync::Arc;

use rustfft::FftPlanner;

use crate::calculus::{laplace_h, map_columns};
use crate::domain::{Field3D, HorizontalGrid, SurfaceField, C64, TORUS_AREA};
use crate::error::{Error, Result};

/// Parameters `(s, p, q, μ)` of a weighted Triebel–Lizorkin norm
/// `F^s_{pq,μ}(0,T; L^q(G))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormSpec {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub mu: f64,
}

impl NormSpec {
    pub fn new(s: f64, p: f64, q: f64, mu: f64) -> Result<Self> {
        let spec = Self { s, p, q, mu };
        spec.validate()?;
        Ok(spec)
    }

    /// The boundary space, `s = 1/2 − 1/(2q)`.
    pub fn boundary(p: f64, q: f64, mu: f64) -> Result<Self> {
        Self::new(0.5 - 0.5 / q, p, q, mu)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s.is_finite() {
            return Err(Error::Parameter(format!("s must be finite (got {})", self.s)));
        }
        check_exponent("p", self.p, false)?;
        check_exponent("q", self.q, true)?;
        check_weight(self.p, self.mu)
    }

    /// Critical weight `1/p + 1/q`.
    pub fn critical_weight(&self) -> f64 {
        1.0 / self.p + 1.0 / self.q
    }
}

fn check_exponent(name: &str, v: f64, allow_inf: bool) -> Result<()> {
    let ok = v > 1.0 && (v.is_finite() || (allow_inf && v == f64::INFINITY));
    if ok {
        Ok(())
    } else {
        let range = if allow_inf { "(1, ∞]" } else { "(1, ∞)" };
        Err(Error::Parameter(format!("{name} must lie in {range} (got {v})")))
    }
}

fn check_weight(p: f64, mu: f64) -> Result<()> {
    if mu > 1.0 / p && mu <= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("mu must lie in (1/p, 1] = ({}, 1] (got {mu})", 1.0 / p)))
    }
}

/// `‖t^{1−μ} u‖_{L^p(0,T)}` by the trapezoid rule on `0, t_1, …, t_n`.
///
/// The unknown value at `t = 0` is taken from the first sample when `μ = 1`
/// and is annihilated by the weight otherwise.
pub fn weighted_lp_norm(series: &[f64], dt: f64, p: f64, mu: f64) -> Result<f64> {
    check_exponent("p", p, false)?;
    check_weight(p, mu)?;
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("dt must be positive (got {dt})")));
    }
    if series.is_empty() {
        return Ok(0.0);
    }
    let e = p * (1.0 - mu);
    let g = |i: usize| {
        let t = (i + 1) as f64 * dt;
        t.powf(e) * series[i].abs().powf(p)
    };
    let g0 = if e == 0.0 { series[0].abs().powf(p) } else { 0.0 };
    let n = series.len();
    let mut sum = 0.5 * (g0 + g(n - 1));
    for i in 0..n - 1 {
        sum += g(i);
    }
    Ok((sum * dt).powf(1.0 / p))
}

/// Smooth cutoff: 1 on `|ξ| ≤ 1`, 0 on `|ξ| ≥ 3/2`.
pub fn cutoff(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 1.5 {
        0.0
    } else {
        step((1.5 - a) / 0.5)
    }
}

fn step(x: f64) -> f64 {
    let e0 = (-1.0 / x).exp();
    let e1 = (-1.0 / (1.0 - x)).exp();
    e0 / (e0 + e1)
}

/// Top block index for a resolved bandwidth: `⌊log₂ bandwidth⌋`, at least 0.
pub fn block_count(bandwidth: f64) -> usize {
    if bandwidth < 2.0 {
        0
    } else {
        bandwidth.log2().floor() as usize
    }
}

/// Multiplier of block `k` out of `0..=kmax`. Interior blocks are the dyadic
/// differences `φ̂(2^{−k}ξ) − φ̂(2^{1−k}ξ)`; the top block takes the remainder
/// so the multipliers sum to one at every frequency.
pub fn multiplier(k: usize, xi: f64, kmax: usize) -> f64 {
    if kmax == 0 {
        return 1.0;
    }
    let below = |k: usize| cutoff(xi / 2f64.powi(k as i32));
    match k {
        0 => below(0),
        k if k < kmax => below(k) - below(k - 1),
        k if k == kmax => 1.0 - below(k - 1),
        _ => 0.0,
    }
}

#[derive(Clone, Debug)]
pub struct LPDecomposition<T> {
    pub blocks: Vec<T>,
    pub kmax: usize,
}

impl LPDecomposition<Vec<f64>> {
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.blocks.first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for b in &self.blocks {
            for (o, v) in out.iter_mut().zip(b) {
                *o += v;
            }
        }
        out
    }
}

impl LPDecomposition<SurfaceField> {
    pub fn reconstruct(&self) -> SurfaceField {
        let mut it = self.blocks.iter();
        let first = it.next().expect("at least one block").clone();
        it.fold(first, |acc, b| acc.add(b))
    }
}

struct TimeBlocks {
    len: usize,
    padded: usize,
    kmax: usize,
    /// `multipliers[k][m]` at the padded FFT frequencies.
    multipliers: Vec<Vec<f64>>,
    fft: Arc<dyn rustfft::Fft<f64>>,
    ifft: Arc<dyn rustfft::Fft<f64>>,
}

impl TimeBlocks {
    fn new(len: usize, dt: f64) -> Self {
        let padded = (2 * len.max(1)).next_power_of_two();
        let kmax = block_count(std::f64::consts::PI / dt);
        let omega = |m: usize| {
            let ms = if m <= padded / 2 { m as f64 } else { m as f64 - padded as f64 };
            2.0 * std::f64::consts::PI * ms / (padded as f64 * dt)
        };
        let multipliers = (0..=kmax)
            .map(|k| (0..padded).map(|m| multiplier(k, omega(m), kmax)).collect())
            .collect();
        let mut planner = FftPlanner::new();
        Self {
            len,
            padded,
            kmax,
            multipliers,
            fft: planner.plan_fft_forward(padded),
            ifft: planner.plan_fft_inverse(padded),
        }
    }

    fn split(&self, series: &[f64]) -> Vec<Vec<f64>> {
        let mut spec: Vec<C64> = series.iter().map(|&v| C64::new(v, 0.0)).collect();
        spec.resize(self.padded, C64::new(0.0, 0.0));
        self.fft.process(&mut spec);
        let scale = 1.0 / self.padded as f64;
        self.multipliers
            .iter()
            .map(|mk| {
                let mut b: Vec<C64> = spec.iter().zip(mk).map(|(z, m)| z * (m * scale)).collect();
                self.ifft.process(&mut b);
                b[..self.len].iter().map(|z| z.re).collect()
            })
            .collect()
    }
}

/// Littlewood–Paley blocks of a scalar time series in angular frequency.
pub fn lp_blocks_time(series: &[f64], dt: f64) -> LPDecomposition<Vec<f64>> {
    let tb = TimeBlocks::new(series.len(), dt);
    LPDecomposition { blocks: tb.split(series), kmax: tb.kmax }
}

/// Littlewood–Paley blocks of a surface field in the horizontal wavenumber `|k|`.
pub fn lp_blocks_space(f: &SurfaceField) -> LPDecomposition<SurfaceField> {
    let h = f.hgrid().clone();
    let kmax = block_count(h.max_modulus());
    let spec = f.to_spectral();
    let blocks = (0..=kmax)
        .map(|k| {
            let mut b = spec.clone();
            for c in 0..b.ncomp() {
                for (idx, v) in b.plane_mut(c, 0).iter_mut().enumerate() {
                    *v *= multiplier(k, h.k2(idx).sqrt(), kmax);
                }
            }
            b
        })
        .collect();
    LPDecomposition { blocks, kmax }
}

/// Time Triebel–Lizorkin norm of a family of vector-valued series living at
/// quadrature points: `points[j]` holds one series per component and
/// `cells[j]` is its quadrature weight in the `L^q` norm.
fn tl_points(points: &[Vec<Vec<f64>>], cells: &[f64], dt: f64, spec: &NormSpec) -> Result<f64> {
    spec.validate()?;
    let n = points.first().and_then(|p| p.first()).map_or(0, Vec::len);
    if n == 0 {
        return Ok(0.0);
    }
    let tb = TimeBlocks::new(n, dt);
    let nb = tb.kmax + 1;
    // acc[k][i] = ∫ |S_k f(t_i)|^q (or the max for q = ∞)
    let mut acc = vec![vec![0.0f64; n]; nb];
    for (comps, &cell) in points.iter().zip(cells) {
        let split: Vec<Vec<Vec<f64>>> = comps.iter().map(|s| tb.split(s)).collect();
        for (k, row) in acc.iter_mut().enumerate() {
            for (i, a) in row.iter_mut().enumerate() {
                let m2: f64 = split.iter().map(|b| b[k][i] * b[k][i]).sum();
                if spec.q.is_infinite() {
                    *a = a.max(m2.sqrt());
                } else {
                    *a += cell * m2.powf(0.5 * spec.q);
                }
            }
        }
    }
    let g: Vec<f64> = (0..n)
        .map(|i| {
            let e = |k: usize| {
                let lq = if spec.q.is_infinite() { acc[k][i] } else { acc[k][i].powf(1.0 / spec.q) };
                2f64.powf(k as f64 * spec.s) * lq
            };
            if spec.q.is_infinite() {
                (0..nb).map(e).fold(0.0, f64::max)
            } else {
                (0..nb).map(|k| e(k).powf(spec.q)).sum::<f64>().powf(1.0 / spec.q)
            }
        })
        .collect();
    weighted_lp_norm(&g, dt, spec.p, spec.mu)
}

/// `‖(2^{ks} S_k f)_k‖_{L^p_μ(0,T; ℓ^q(L^q(G)))}` with time blocks `S_k`.
pub fn triebel_lizorkin_norm(path: &[SurfaceField], dt: f64, spec: &NormSpec) -> Result<f64> {
    spec.validate()?;
    let Some(first) = path.first() else {
        return Ok(0.0);
    };
    let (points, cells) = surface_points(path, first.hgrid(), first.ncomp())?;
    tl_points(&points, &cells, dt, spec)
}

/// Scalar-valued variant: the inner norm is the absolute value.
pub fn triebel_lizorkin_series(series: &[f64], dt: f64, spec: &NormSpec) -> Result<f64> {
    tl_points(&[vec![series.to_vec()]], &[1.0], dt, spec)
}

fn surface_points(
    path: &[SurfaceField],
    h: &Arc<HorizontalGrid>,
    ncomp: usize,
) -> Result<(Vec<Vec<Vec<f64>>>, Vec<f64>)> {
    let npts = h.npts();
    let mut points = vec![vec![Vec::with_capacity(path.len()); ncomp]; npts];
    for f in path {
        if f.hgrid() != h || f.ncomp() != ncomp {
            return Err(Error::GridMismatch("path samples differ in grid or component count".into()));
        }
        let phys = f.to_physical();
        for (idx, pt) in points.iter_mut().enumerate() {
            for (c, series) in pt.iter_mut().enumerate() {
                series.push(phys.at(c, 0, idx).re);
            }
        }
    }
    Ok((points, vec![TORUS_AREA / npts as f64; npts]))
}

/// `(Σ_k 2^{ksq} ‖S_k f‖^q_{L^q(G)})^{1/q}` with horizontal blocks.
pub fn besov_spatial_norm(f: &SurfaceField, s: f64, q: f64) -> Result<f64> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::Parameter(format!("q must lie in (1, ∞) (got {q})")));
    }
    let d = lp_blocks_space(f);
    let sum: f64 = d
        .blocks
        .iter()
        .enumerate()
        .map(|(k, b)| 2f64.powf(k as f64 * s * q) * b.norm_lq(q).powf(q))
        .sum();
    Ok(sum.powf(1.0 / q))
}

/// The two parts of the boundary-space norm
/// `F^{1/2−1/(2q)}_{pq,μ}(L^q) ∩ L^p_μ(B^{1−1/q}_{qq})` of a path.
pub fn boundary_space_norm(path: &[SurfaceField], dt: f64, p: f64, q: f64, mu: f64) -> Result<(f64, f64)> {
    let spec = NormSpec::boundary(p, q, mu)?;
    if !q.is_finite() || spec.critical_weight() > 1.0 {
        return Err(Error::Parameter(format!(
            "need finite q with 1/p + 1/q ≤ 1 (got p = {p}, q = {q})"
        )));
    }
    let f_part = triebel_lizorkin_norm(path, dt, &spec)?;
    let b: Vec<f64> = path.iter().map(|f| besov_spatial_norm(f, 1.0 - 1.0 / q, q)).collect::<Result<_>>()?;
    Ok((f_part, weighted_lp_norm(&b, dt, p, mu)?))
}

/// Second-order second vertical difference, one-sided at the ends.
fn d2_vertical(f: &Field3D) -> Field3D {
    let h2 = f.vgrid().h().powi(2);
    map_columns(f, |x, y| {
        let n = x.len();
        for j in 1..n - 1 {
            y[j] = (x[j + 1] - x[j] * 2.0 + x[j - 1]) / h2;
        }
        if n >= 4 {
            y[0] = (x[0] * 2.0 - x[1] * 5.0 + x[2] * 4.0 - x[3]) / h2;
            y[n - 1] = (x[n - 1] * 2.0 - x[n - 2] * 5.0 + x[n - 3] * 4.0 - x[n - 4]) / h2;
        } else {
            y[0] = y[1];
            y[n - 1] = y[n - 2];
        }
    })
}

/// Discrete `H^{2,q}` norm: `‖v‖ + ‖Δ_H v‖ + ‖∂_s² v‖` in `L^q`.
pub fn h2q_norm(v: &Field3D, q: f64) -> f64 {
    v.norm_lq(q) + laplace_h(v).norm_lq(q) + d2_vertical(v).norm_lq(q)
}

/// `‖∂_t v‖_{L^p_μ(L^q)} + ‖v‖_{L^p_μ(H^{2,q})}` for a path sampled at `t_i = (i+1) dt`.
pub fn maxreg_norm(path: &[Field3D], dt: f64, p: f64, q: f64, mu: f64) -> Result<f64> {
    if path.len() < 3 {
        return Err(Error::Parameter(format!("need at least 3 time samples (got {})", path.len())));
    }
    check_exponent("q", q, true)?;
    let n = path.len();
    let dv = |i: usize| -> Field3D {
        let (a, b, c, s) = if i == 0 {
            (&path[0], &path[1], &path[2], 1.0)
        } else if i == n - 1 {
            (&path[n - 1], &path[n - 2], &path[n - 3], -1.0)
        } else {
            return path[i + 1].sub(&path[i - 1]).scale(0.5 / dt);
        };
        // ∓(3a − 4b + c)/(2dt)
        a.scale(-3.0).axpy(4.0, b).axpy(-1.0, c).scale(s * 0.5 / dt)
    };
    let dt_series: Vec<f64> = (0..n).map(|i| dv(i).norm_lq(q)).collect();
    let h2_series: Vec<f64> = path.iter().map(|v| h2q_norm(v, q)).collect();
    Ok(weighted_lp_norm(&dt_series, dt, p, mu)? + weighted_lp_norm(&h2_series, dt, p, mu)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Surface, VerticalGrid};
    use crate::presets::random_surface;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weighted_norm_examples() {
        let dt = 1e-4;
        let c = vec![3.0; 10_000];
        assert!((weighted_lp_norm(&c, dt, 2.0, 1.0).unwrap() - 3.0).abs() < 1e-12);
        let one = vec![1.0; 10_000];
        let w = weighted_lp_norm(&one, dt, 2.0, 0.75).unwrap();
        assert!((w - (2.0f64 / 3.0).sqrt()).abs() < 1e-5, "{w}");
        let u: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).sin()).collect();
        let u3: Vec<f64> = u.iter().map(|v| 3.0 * v).collect();
        let a = weighted_lp_norm(&u, 0.01, 3.0, 0.8).unwrap();
        let b = weighted_lp_norm(&u3, 0.01, 3.0, 0.8).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12 * b);
        assert!(matches!(weighted_lp_norm(&u, 0.01, 2.0, 0.5), Err(Error::Parameter(_))));
    }

    #[test]
    fn partition_of_unity() {
        for kmax in [0, 1, 3, 9] {
            for i in 0..5000 {
                let xi = i as f64 * 0.37;
                let s: f64 = (0..=kmax).map(|k| multiplier(k, xi, kmax)).sum();
                assert!((s - 1.0).abs() < 1e-12);
                for k in 0..=kmax {
                    for k2 in k + 2..=kmax {
                        assert_eq!(multiplier(k, xi, kmax) * multiplier(k2, xi, kmax), 0.0);
                    }
                }
            }
        }
        assert_eq!(multiplier(4, 16.0, 8), 1.0);
        assert_eq!(cutoff(1.5), 0.0);
    }

    #[test]
    fn time_blocks() {
        let dt = 2.0 * std::f64::consts::PI / 1024.0;
        let n = 2048;
        let c = vec![2.0; n];
        let d = lp_blocks_time(&c, dt);
        let back = d.reconstruct();
        assert!(back.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = lp_blocks_time(&r, dt).reconstruct();
        assert!(back.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-12));

        // a pure tone at 2^5 concentrates in block 5
        let tone: Vec<f64> = (0..n).map(|i| (32.0 * (i + 1) as f64 * dt).sin()).collect();
        let d = lp_blocks_time(&tone, dt);
        let e = |b: &Vec<f64>| b.iter().map(|v| v * v).sum::<f64>();
        let total = e(&tone);
        let r = e(&d.blocks[5]) / total;
        // the remainder is end-point leakage of the zero extension
        assert!(r > 0.98, "{r}");
    }

    #[test]
    fn space_blocks() {
        let h = HorizontalGrid::new(32, 32).unwrap();
        let f = SurfaceField::from_fn(&h, 1, |_, x, y| (4.0 * x).cos() + 0.5 * (8.0 * y).sin() + 2.0);
        let d = lp_blocks_space(&f);
        assert!(d.reconstruct().sub(&f).max_abs() < 1e-12);
        assert!((d.blocks[0].mean(0) - 2.0).abs() < 1e-14);
        let b2 = SurfaceField::from_fn(&h, 1, |_, x, _| (4.0 * x).cos());
        assert!(d.blocks[2].sub(&b2).max_abs() < 1e-12);
        let z = SurfaceField::zeros(&h, Surface, 2, crate::Repr::Physical);
        assert_eq!(besov_spatial_norm(&z, 0.5, 2.0).unwrap(), 0.0);
        let b = besov_spatial_norm(&b2, 0.75, 3.0).unwrap();
        assert!((b - 2f64.powf(1.5) * b2.norm_lq(3.0)).abs() < 1e-12 * b);
        let g = random_surface(&h, 1, -2.0);
        let b1 = besov_spatial_norm(&g, 0.5, 2.0).unwrap();
        let b3 = besov_spatial_norm(&g.scale(3.0), 0.5, 2.0).unwrap();
        assert!((b3 - 3.0 * b1).abs() < 1e-12 * b3);
    }

    #[test]
    fn monotone_in_s() {
        let h = HorizontalGrid::new(8, 8).unwrap();
        let g = random_surface(&h, 4, -1.0);
        let dt = 0.02;
        let path: Vec<SurfaceField> =
            (1..=200).map(|i| g.scale((3.0 * i as f64 * dt).sin() + (9.0 * i as f64 * dt).cos())).collect();
        let mut last = 0.0;
        for s in [-0.5, 0.0, 0.25, 0.5, 1.0] {
            let v = triebel_lizorkin_norm(&path, dt, &NormSpec::new(s, 2.0, 2.0, 1.0).unwrap()).unwrap();
            assert!(v >= last);
            last = v;
        }
        let zero: Vec<SurfaceField> = path.iter().map(|f| f.scale(0.0)).collect();
        assert_eq!(triebel_lizorkin_norm(&zero, dt, &NormSpec::new(0.3, 2.0, 2.0, 1.0).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn maxreg_linear_path() {
        let h = HorizontalGrid::new(8, 8).unwrap();
        let o = VerticalGrid::ocean(6).unwrap();
        let g = Field3D::from_fn(&h, &o, 2, |c, x, y, z| (x + c as f64 * y).sin() * (1.0 + z));
        let dt = 0.01;
        let path: Vec<Field3D> = (1..=100).map(|i| g.scale(i as f64 * dt)).collect();
        let one = weighted_lp_norm(&vec![1.0; 100], dt, 2.0, 1.0).unwrap();
        let h2: Vec<f64> = path.iter().map(|v| h2q_norm(v, 2.0)).collect();
        let expect = g.norm_lq(2.0) * one + weighted_lp_norm(&h2, dt, 2.0, 1.0).unwrap();
        let got = maxreg_norm(&path, dt, 2.0, 2.0, 1.0).unwrap();
        assert!((got - expect).abs() < 1e-10 * expect);
        let zero: Vec<Field3D> = path.iter().map(|v| v.scale(0.0)).collect();
        assert_eq!(maxreg_norm(&zero, dt, 2.0, 2.0, 1.0).unwrap(), 0.0);
        assert!(maxreg_norm(&path[..2], dt, 2.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn boundary_norm_examples() {
        let h = HorizontalGrid::new(8, 8).unwrap();
        let zero = vec![SurfaceField::zeros(&h, Surface, 2, crate::Repr::Physical); 16];
        assert_eq!(boundary_space_norm(&zero, 0.1, 2.0, 2.0, 1.0).unwrap(), (0.0, 0.0));
        assert!(boundary_space_norm(&zero, 0.1, 1.5, 2.0, 1.0).is_err());
    }
}
