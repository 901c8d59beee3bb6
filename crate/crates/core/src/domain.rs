//! Discrete geometry: the horizontal torus, the two vertical intervals, and
//! field containers with a spectral/physical dual representation.
//!
//! Horizontal data of every level is stored as a full complex array of
//! `nx * ny` entries laid out `iy * nx + ix`. In spectral representation the
//! entry at FFT index `(ix, iy)` is the coefficient of `exp(i (kx x + ky y))`
//! with `kx = ix` for `ix <= nx/2` and `ix - nx` otherwise, normalised so that
//! a constant field `c` has `c` in the zero mode.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Area of the horizontal torus `(0, 2π)²`.
pub const TORUS_AREA: f64 = 4.0 * PI * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Repr {
    Physical,
    Spectral,
}

pub struct HorizontalGrid {
    nx: usize,
    ny: usize,
    dealias: (u32, u32),
    kx: Vec<f64>,
    ky: Vec<f64>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for HorizontalGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HorizontalGrid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("dealias", &self.dealias)
            .finish()
    }
}

impl PartialEq for HorizontalGrid {
    fn eq(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.dealias == other.dealias
    }
}

fn wavenumber(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

impl HorizontalGrid {
    /// Grid with the default 2/3 dealiasing fraction.
    pub fn new(nx: usize, ny: usize) -> Result<Arc<Self>> {
        Self::with_dealias(nx, ny, 2, 3)
    }

    pub fn with_dealias(nx: usize, ny: usize, num: u32, den: u32) -> Result<Arc<Self>> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::Grid(format!("{name} must be even, ≥ 4 (got {n})")));
            }
        }
        if den == 0 || num == 0 || num > den {
            return Err(Error::Grid(format!(
                "dealias fraction must lie in (0, 1] (got {num}/{den})"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            nx,
            ny,
            dealias: (num, den),
            kx: (0..nx).map(|i| wavenumber(i, nx)).collect(),
            ky: (0..ny).map(|j| wavenumber(j, ny)).collect(),
            fft_x: planner.plan_fft_forward(nx),
            ifft_x: planner.plan_fft_inverse(nx),
            fft_y: planner.plan_fft_forward(ny),
            ifft_y: planner.plan_fft_inverse(ny),
        }))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn npts(&self) -> usize {
        self.nx * self.ny
    }

    pub fn dealias_fraction(&self) -> (u32, u32) {
        self.dealias
    }

    pub fn x(&self, ix: usize) -> f64 {
        2.0 * PI * ix as f64 / self.nx as f64
    }

    pub fn y(&self, iy: usize) -> f64 {
        2.0 * PI * iy as f64 / self.ny as f64
    }

    /// Wavenumber pair of the flat index `idx`.
    pub fn k(&self, idx: usize) -> (f64, f64) {
        (self.kx[idx % self.nx], self.ky[idx / self.nx])
    }

    pub fn k2(&self, idx: usize) -> f64 {
        let (kx, ky) = self.k(idx);
        kx * kx + ky * ky
    }

    /// Flat index of the mode `(kx, ky)`, which must lie in the resolved set.
    pub fn index_of(&self, kx: i64, ky: i64) -> usize {
        let ix = kx.rem_euclid(self.nx as i64) as usize;
        let iy = ky.rem_euclid(self.ny as i64) as usize;
        iy * self.nx + ix
    }

    /// Largest retained `|kx|` and `|ky|` under the dealiasing rule.
    pub fn cutoff(&self) -> (usize, usize) {
        let (num, den) = (self.dealias.0 as usize, self.dealias.1 as usize);
        ((num * self.nx) / (2 * den), (num * self.ny) / (2 * den))
    }

    pub fn retained(&self, idx: usize) -> bool {
        let (kx, ky) = self.k(idx);
        let (cx, cy) = self.cutoff();
        kx.abs() <= cx as f64 && ky.abs() <= cy as f64
    }

    /// Largest resolved wavenumber modulus.
    pub fn max_modulus(&self) -> f64 {
        let hx = (self.nx / 2) as f64;
        let hy = (self.ny / 2) as f64;
        (hx * hx + hy * hy).sqrt()
    }

    fn transform_plane(&self, plane: &mut [C64], forward: bool) {
        let (fx, fy) = if forward {
            (&self.fft_x, &self.fft_y)
        } else {
            (&self.ifft_x, &self.ifft_y)
        };
        for row in plane.chunks_exact_mut(self.nx) {
            fx.process(row);
        }
        let mut col = vec![C64::new(0.0, 0.0); self.ny];
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                col[iy] = plane[iy * self.nx + ix];
            }
            fy.process(&mut col);
            for iy in 0..self.ny {
                plane[iy * self.nx + ix] = col[iy];
            }
        }
    }

    pub(crate) fn forward_plane(&self, plane: &mut [C64]) {
        self.transform_plane(plane, true);
        let scale = 1.0 / self.npts() as f64;
        for v in plane.iter_mut() {
            *v *= scale;
        }
    }

    /// Inverse transform; the imaginary part is dropped so the result is a real field.
    pub(crate) fn inverse_plane(&self, plane: &mut [C64]) {
        self.transform_plane(plane, false);
        for v in plane.iter_mut() {
            *v = C64::new(v.re, 0.0);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerticalKind {
    /// Pressure coordinate `p ∈ [p_s e^{-1}, p_s]`.
    Atmosphere,
    /// Depth coordinate `z ∈ [-1, 0]`.
    Ocean,
}

/// Uniform vertical nodes on one subdomain. Node 0 is the non-interface
/// boundary, node `nz - 1` the interface.
#[derive(Clone, Debug, PartialEq)]
pub struct VerticalGrid {
    kind: VerticalKind,
    nodes: Vec<f64>,
    h: f64,
    p_s: f64,
}

impl VerticalGrid {
    pub fn atmosphere(nz: usize, p_s: f64) -> Result<Arc<Self>> {
        if !(p_s > 0.0 && p_s.is_finite()) {
            return Err(Error::Grid(format!("p_s must be positive (got {p_s})")));
        }
        Self::build(VerticalKind::Atmosphere, nz, p_s * (-1.0f64).exp(), p_s, p_s)
    }

    pub fn ocean(nz: usize) -> Result<Arc<Self>> {
        Self::build(VerticalKind::Ocean, nz, -1.0, 0.0, 1.0)
    }

    fn build(kind: VerticalKind, nz: usize, a: f64, b: f64, p_s: f64) -> Result<Arc<Self>> {
        if nz < 3 {
            return Err(Error::Grid(format!("nz must be ≥ 3 (got {nz})")));
        }
        let h = (b - a) / (nz - 1) as f64;
        let mut nodes: Vec<f64> = (0..nz).map(|j| a + h * j as f64).collect();
        nodes[0] = a;
        nodes[nz - 1] = b;
        Ok(Arc::new(Self { kind, nodes, h, p_s }))
    }

    pub fn kind(&self) -> VerticalKind {
        self.kind
    }

    pub fn nz(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Surface pressure for the atmosphere grid (1 for the ocean).
    pub fn p_s(&self) -> f64 {
        self.p_s
    }

    pub fn a(&self) -> f64 {
        self.nodes[0]
    }

    pub fn b(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.b() - self.a()
    }

    /// Trapezoidal quadrature weights; they sum to `b - a`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.nz();
        let mut w = vec![self.h; n];
        w[0] = 0.5 * self.h;
        w[n - 1] = 0.5 * self.h;
        w
    }

    /// Vertical diffusion coefficient: 1 in the ocean, `p²` in the atmosphere.
    pub fn kappa(&self, s: f64) -> f64 {
        match self.kind {
            VerticalKind::Ocean => 1.0,
            VerticalKind::Atmosphere => s * s,
        }
    }

    /// Coefficient at the half node between `j` and `j + 1`.
    pub fn kappa_half(&self, j: usize) -> f64 {
        self.kappa(0.5 * (self.nodes[j] + self.nodes[j + 1]))
    }
}

/// Vertical structure of a field: either a single surface level or a column grid.
pub trait Levels: Clone + fmt::Debug {
    fn count(&self) -> usize;
    /// Quadrature weights over the levels.
    fn level_weights(&self) -> Vec<f64>;
    fn same(&self, other: &Self) -> bool;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Surface;

impl Levels for Surface {
    fn count(&self) -> usize {
        1
    }

    fn level_weights(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn same(&self, _other: &Self) -> bool {
        true
    }
}

impl Levels for Arc<VerticalGrid> {
    fn count(&self) -> usize {
        self.nz()
    }

    fn level_weights(&self) -> Vec<f64> {
        self.weights()
    }

    fn same(&self, other: &Self) -> bool {
        Arc::ptr_eq(self, other) || **self == **other
    }
}

/// A scalar or 2-vector field on the torus times a set of levels.
#[derive(Clone, Debug)]
pub struct Field<L: Levels> {
    hgrid: Arc<HorizontalGrid>,
    levels: L,
    ncomp: usize,
    repr: Repr,
    data: Vec<C64>,
}

pub type Field3D = Field<Arc<VerticalGrid>>;
pub type SurfaceField = Field<Surface>;

impl<L: Levels> Field<L> {
    pub fn zeros(hgrid: &Arc<HorizontalGrid>, levels: L, ncomp: usize, repr: Repr) -> Self {
        assert!(ncomp == 1 || ncomp == 2, "fields have 1 or 2 components");
        let len = ncomp * levels.count() * hgrid.npts();
        Self {
            hgrid: hgrid.clone(),
            levels,
            ncomp,
            repr,
            data: vec![C64::new(0.0, 0.0); len],
        }
    }

    /// A zero field with the same grids and representation.
    pub fn zeros_like(&self, ncomp: usize) -> Self {
        Self::zeros(&self.hgrid, self.levels.clone(), ncomp, self.repr)
    }

    pub fn hgrid(&self) -> &Arc<HorizontalGrid> {
        &self.hgrid
    }

    pub fn levels(&self) -> &L {
        &self.levels
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn nlev(&self) -> usize {
        self.levels.count()
    }

    pub fn repr(&self) -> Repr {
        self.repr
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    fn plane_range(&self, c: usize, j: usize) -> std::ops::Range<usize> {
        let n = self.hgrid.npts();
        let start = (c * self.nlev() + j) * n;
        start..start + n
    }

    pub fn plane(&self, c: usize, j: usize) -> &[C64] {
        &self.data[self.plane_range(c, j)]
    }

    pub fn plane_mut(&mut self, c: usize, j: usize) -> &mut [C64] {
        let r = self.plane_range(c, j);
        &mut self.data[r]
    }

    pub fn at(&self, c: usize, j: usize, idx: usize) -> C64 {
        self.data[(c * self.nlev() + j) * self.hgrid.npts() + idx]
    }

    pub fn set(&mut self, c: usize, j: usize, idx: usize, v: C64) {
        let n = self.hgrid.npts();
        let nlev = self.nlev();
        self.data[(c * nlev + j) * n + idx] = v;
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        *self.hgrid == *other.hgrid
            && self.levels.same(&other.levels)
            && self.ncomp == other.ncomp
    }

    pub fn to_spectral(&self) -> Self {
        self.clone().into_spectral()
    }

    pub fn to_physical(&self) -> Self {
        self.clone().into_physical()
    }

    pub fn into_spectral(mut self) -> Self {
        if self.repr == Repr::Physical {
            let n = self.hgrid.npts();
            let grid = self.hgrid.clone();
            for plane in self.data.chunks_exact_mut(n) {
                grid.forward_plane(plane);
            }
            self.repr = Repr::Spectral;
        }
        self
    }

    pub fn into_physical(mut self) -> Self {
        if self.repr == Repr::Spectral {
            let n = self.hgrid.npts();
            let grid = self.hgrid.clone();
            for plane in self.data.chunks_exact_mut(n) {
                grid.inverse_plane(plane);
            }
            self.repr = Repr::Physical;
        }
        self
    }

    /// Spectral copy with every mode beyond the dealiasing cutoff set to zero.
    pub fn dealias(&self) -> Self {
        let mut out = self.to_spectral();
        let n = self.hgrid.npts();
        let keep: Vec<bool> = (0..n).map(|i| self.hgrid.retained(i)).collect();
        for plane in out.data.chunks_exact_mut(n) {
            for (v, &k) in plane.iter_mut().zip(&keep) {
                if !k {
                    *v = C64::new(0.0, 0.0);
                }
            }
        }
        out
    }

    /// True when every plane satisfies `f(-k) = conj f(k)` on modes whose
    /// negative is also resolved.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        let s = self.to_spectral();
        let g = &self.hgrid;
        let (nx, ny) = (g.nx() as i64, g.ny() as i64);
        for c in 0..self.ncomp {
            for j in 0..self.nlev() {
                let p = s.plane(c, j);
                for idx in 0..g.npts() {
                    let (kx, ky) = g.k(idx);
                    let (kx, ky) = (kx as i64, ky as i64);
                    if kx == nx / 2 || ky == ny / 2 {
                        continue;
                    }
                    let m = g.index_of(-kx, -ky);
                    if (p[idx] - p[m].conj()).norm() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        assert!(self.same_layout(other), "field layout mismatch");
        let b = if other.repr == self.repr {
            std::borrow::Cow::Borrowed(other)
        } else if self.repr == Repr::Spectral {
            std::borrow::Cow::Owned(other.to_spectral())
        } else {
            std::borrow::Cow::Owned(other.to_physical())
        };
        let mut out = self.clone();
        for (o, &y) in out.data.iter_mut().zip(b.data.iter()) {
            *o = f(*o, y);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b * s)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= s;
        }
        out
    }

    /// Component `c` as a scalar field.
    pub fn component(&self, c: usize) -> Self {
        let mut out = self.zeros_like(1);
        let len = self.nlev() * self.hgrid.npts();
        out.data
            .copy_from_slice(&self.data[c * len..(c + 1) * len]);
        out
    }

    /// Stack two scalar fields into a 2-vector field.
    pub fn from_components(a: &Self, b: &Self) -> Self {
        assert!(a.ncomp == 1 && b.ncomp == 1);
        let b = if a.repr == b.repr {
            b.clone()
        } else if a.repr == Repr::Spectral {
            b.to_spectral()
        } else {
            b.to_physical()
        };
        assert!(a.same_layout(&b));
        let mut out = a.zeros_like(2);
        let len = a.data.len();
        out.data[..len].copy_from_slice(&a.data);
        out.data[len..].copy_from_slice(&b.data);
        out
    }

    /// `L²` inner product with the torus measure and the level quadrature,
    /// summed over components.
    pub fn inner(&self, other: &Self) -> f64 {
        assert!(self.same_layout(other));
        let a = self.to_spectral();
        let b = other.to_spectral();
        let w = self.levels.level_weights();
        let n = self.hgrid.npts();
        let mut sum = 0.0;
        for c in 0..self.ncomp {
            for (j, wj) in w.iter().enumerate() {
                let pa = a.plane(c, j);
                let pb = b.plane(c, j);
                let s: f64 = pa.iter().zip(pb).map(|(x, y)| (x.conj() * y).re).sum();
                sum += wj * s;
            }
        }
        let _ = n;
        sum * TORUS_AREA
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Euclidean norm of the raw coefficient vector (representation dependent).
    pub fn coeff_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest pointwise absolute value over components (physical space).
    pub fn max_abs(&self) -> f64 {
        self.to_physical()
            .data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.re.abs()))
    }

    /// `L^q` norm of the pointwise Euclidean modulus, with the level quadrature.
    pub fn norm_lq(&self, q: f64) -> f64 {
        let phys = self.to_physical();
        let n = self.hgrid.npts();
        let w = self.levels.level_weights();
        let cell = TORUS_AREA / n as f64;
        if q.is_infinite() {
            let mut m = 0.0f64;
            for j in 0..self.nlev() {
                for idx in 0..n {
                    m = m.max(phys.modulus_at(j, idx));
                }
            }
            return m;
        }
        let mut sum = 0.0;
        for (j, wj) in w.iter().enumerate() {
            for idx in 0..n {
                sum += wj * cell * phys.modulus_at(j, idx).powf(q);
            }
        }
        sum.powf(1.0 / q)
    }

    /// Pointwise Euclidean modulus over components (physical representation assumed).
    pub(crate) fn modulus_at(&self, j: usize, idx: usize) -> f64 {
        let mut s = 0.0;
        for c in 0..self.ncomp {
            let v = self.at(c, j, idx).re;
            s += v * v;
        }
        s.sqrt()
    }
}

impl SurfaceField {
    /// Physical surface field from point values `f(c, x, y)`.
    pub fn from_fn(
        hgrid: &Arc<HorizontalGrid>,
        ncomp: usize,
        mut f: impl FnMut(usize, f64, f64) -> f64,
    ) -> Self {
        let mut out = Self::zeros(hgrid, Surface, ncomp, Repr::Physical);
        for c in 0..ncomp {
            for iy in 0..hgrid.ny() {
                for ix in 0..hgrid.nx() {
                    let v = f(c, hgrid.x(ix), hgrid.y(iy));
                    out.set(c, 0, iy * hgrid.nx() + ix, C64::new(v, 0.0));
                }
            }
        }
        out
    }

    /// Horizontal mean of component `c`.
    pub fn mean(&self, c: usize) -> f64 {
        let s = self.to_spectral();
        s.at(c, 0, 0).re
    }
}

impl Field3D {
    /// Physical field from point values `f(c, x, y, s)` with `s` the vertical coordinate.
    pub fn from_fn(
        hgrid: &Arc<HorizontalGrid>,
        vgrid: &Arc<VerticalGrid>,
        ncomp: usize,
        mut f: impl FnMut(usize, f64, f64, f64) -> f64,
    ) -> Self {
        let mut out = Self::zeros(hgrid, vgrid.clone(), ncomp, Repr::Physical);
        for c in 0..ncomp {
            for (j, &s) in vgrid.nodes().iter().enumerate() {
                for iy in 0..hgrid.ny() {
                    for ix in 0..hgrid.nx() {
                        let v = f(c, hgrid.x(ix), hgrid.y(iy), s);
                        out.set(c, j, iy * hgrid.nx() + ix, C64::new(v, 0.0));
                    }
                }
            }
        }
        out
    }

    pub fn vgrid(&self) -> &Arc<VerticalGrid> {
        self.levels()
    }

    /// Level `j` as a surface field (same representation).
    pub fn level(&self, j: usize) -> SurfaceField {
        let mut out = SurfaceField::zeros(self.hgrid(), Surface, self.ncomp(), self.repr());
        for c in 0..self.ncomp() {
            out.plane_mut(c, 0).copy_from_slice(self.plane(c, j));
        }
        out
    }

    /// Surface field copied onto every level.
    pub fn broadcast(s: &SurfaceField, vgrid: &Arc<VerticalGrid>) -> Self {
        let mut out = Self::zeros(s.hgrid(), vgrid.clone(), s.ncomp(), s.repr());
        for c in 0..s.ncomp() {
            for j in 0..vgrid.nz() {
                out.plane_mut(c, j).copy_from_slice(s.plane(c, 0));
            }
        }
        out
    }

    /// Level slice at the requested boundary.
    pub fn trace(&self, boundary: Boundary) -> SurfaceField {
        match boundary {
            Boundary::Top => self.level(self.nlev() - 1),
            Boundary::Bottom => self.level(0),
        }
    }
}

/// `Top` is the interface level (`p = p_s` or `z = 0`), `Bottom` the outer boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Top,
    Bottom,
}

/// Prognostic state: horizontal velocities of both subdomains at time `t`.
#[derive(Clone, Debug)]
pub struct State {
    pub va: Field3D,
    pub vo: Field3D,
    pub t: f64,
}

impl State {
    pub fn zeros(
        hgrid: &Arc<HorizontalGrid>,
        agrid: &Arc<VerticalGrid>,
        ogrid: &Arc<VerticalGrid>,
    ) -> Self {
        Self {
            va: Field3D::zeros(hgrid, agrid.clone(), 2, Repr::Spectral),
            vo: Field3D::zeros(hgrid, ogrid.clone(), 2, Repr::Spectral),
            t: 0.0,
        }
    }

    /// Largest `|div_H v̄|` over both subdomains (max norm in physical space).
    pub fn constraint_residual(&self) -> f64 {
        use crate::calculus::{div_h, vertical_average};
        let a = div_h(&vertical_average(&self.va)).max_abs();
        let o = div_h(&vertical_average(&self.vo)).max_abs();
        a.max(o)
    }

    /// `½‖v^a‖² + ½‖v^o‖²`.
    pub fn energy(&self) -> f64 {
        0.5 * (self.va.inner(&self.va) + self.vo.inner(&self.vo))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grids() -> (Arc<HorizontalGrid>, Arc<VerticalGrid>) {
        (HorizontalGrid::new(16, 12).unwrap(), VerticalGrid::ocean(5).unwrap())
    }

    #[test]
    fn grid_validation() {
        assert!(HorizontalGrid::new(15, 16).is_err());
        assert!(HorizontalGrid::new(2, 16).is_err());
        assert!(VerticalGrid::ocean(2).is_err());
        assert!(VerticalGrid::atmosphere(8, -1.0).is_err());
        let a = VerticalGrid::atmosphere(9, 1.0).unwrap();
        assert!((a.a() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(a.b(), 1.0);
        let o = VerticalGrid::ocean(9).unwrap();
        assert_eq!((o.a(), o.b()), (-1.0, 0.0));
        assert!((o.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_transforms_to_zero_mode() {
        let (h, v) = grids();
        let f = Field3D::from_fn(&h, &v, 1, |_, _, _, _| 2.5).to_spectral();
        for j in 0..v.nz() {
            for idx in 0..h.npts() {
                let expect = if idx == 0 { 2.5 } else { 0.0 };
                assert!((f.at(0, j, idx) - C64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn cosine_has_two_half_modes() {
        let (h, _) = grids();
        let f = SurfaceField::from_fn(&h, 1, |_, x, _| x.cos()).to_spectral();
        for idx in 0..h.npts() {
            let (kx, ky) = h.k(idx);
            let expect = if kx.abs() == 1.0 && ky == 0.0 { 0.5 } else { 0.0 };
            assert!((f.at(0, 0, idx) - C64::new(expect, 0.0)).norm() < 1e-14);
        }
        assert!(f.is_conjugate_symmetric(1e-14));
    }

    #[test]
    fn random_round_trip() {
        let (h, v) = grids();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Field3D::from_fn(&h, &v, 2, |_, _, _, _| rng_value(&mut rng));
        let back = f.to_spectral().to_physical();
        let err = back.sub(&f).coeff_norm() / f.coeff_norm();
        assert!(err < 1e-13, "round trip error {err}");
        assert!(f.to_spectral().is_conjugate_symmetric(1e-13));
    }

    fn rng_value(rng: &mut ChaCha8Rng) -> f64 {
        rng.random_range(-1.0..1.0)
    }

    #[test]
    fn trace_levels() {
        let h = HorizontalGrid::new(8, 8).unwrap();
        let o = VerticalGrid::ocean(7).unwrap();
        let f = Field3D::from_fn(&h, &o, 1, |_, _, _, z| z);
        assert!(f.trace(Boundary::Top).max_abs() < 1e-15);
        let b = f.trace(Boundary::Bottom);
        assert!(b.data().iter().all(|v| (v.re + 1.0).abs() < 1e-15));
        let a = VerticalGrid::atmosphere(7, 1.0).unwrap();
        let g = Field3D::from_fn(&h, &a, 1, |_, _, _, p| p.ln());
        assert!(g.trace(Boundary::Top).max_abs() < 1e-15);
    }

    #[test]
    fn trace_commutes_with_transform() {
        let (h, v) = grids();
        let f = Field3D::from_fn(&h, &v, 2, |c, x, y, z| {
            (c as f64 + 1.0) * (x + 2.0 * y).sin() * z + (3.0 * x).cos()
        });
        let a = f.to_spectral().trace(Boundary::Top).to_physical();
        let b = f.trace(Boundary::Top);
        assert!(a.sub(&b).max_abs() < 1e-13);
    }

    #[test]
    fn dealias_rules() {
        let h = HorizontalGrid::new(16, 16).unwrap();
        let idx = h.index_of(8, 0);
        let mut f = SurfaceField::zeros(&h, Surface, 1, Repr::Spectral);
        f.set(0, 0, idx, C64::new(1.0, 0.0));
        assert_eq!(f.dealias().coeff_norm(), 0.0);

        let g = SurfaceField::from_fn(&h, 1, |_, x, y| (5.0 * x).sin() * (2.0 * y).cos());
        let d = g.dealias();
        assert!(d.sub(&g).max_abs() < 1e-13);
    }

    #[test]
    fn dealias_idempotent_and_contractive() {
        let (h, v) = grids();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = Field3D::from_fn(&h, &v, 1, |_, _, _, _| rng_value(&mut rng));
        let d1 = f.dealias();
        let d2 = d1.dealias();
        assert_eq!(d1.sub(&d2).coeff_norm(), 0.0);
        assert!(d1.norm_l2() <= f.norm_l2() + 1e-12);
    }

    #[test]
    fn inner_matches_physical_quadrature() {
        let (h, v) = grids();
        let f = Field3D::from_fn(&h, &v, 2, |c, x, y, z| (c as f64 + x.sin()) * (1.0 + z * y.cos()));
        let phys = f.to_physical();
        let w = v.weights();
        let cell = TORUS_AREA / h.npts() as f64;
        let mut s = 0.0;
        for c in 0..2 {
            for j in 0..v.nz() {
                for idx in 0..h.npts() {
                    s += w[j] * cell * phys.at(c, j, idx).re.powi(2);
                }
            }
        }
        assert!((f.inner(&f) - s).abs() < 1e-11 * s);
        assert!((f.norm_lq(2.0) - s.sqrt()).abs() < 1e-11 * s.sqrt());
    }
}
