//! Binary checkpoint/snapshot envelope.
//!
//! Layout (all integers and floats little-endian):
//!
//! | field | type |
//! |---|---|
//! | magic `b"CAOS"` | 4 bytes |
//! | version | u32 |
//! | nx, ny, nz_a, nz_o | u32 ×4 |
//! | dealias numerator, denominator | u32 ×2 |
//! | p_s | f64 |
//! | t | f64 |
//! | step | u64 |
//! | v^a then v^o spectral coefficients | (re, im) f64 pairs |
//! | CRC-64/ECMA-182 of all preceding bytes | u64 |
//!
//! Coefficients are ordered component, level, FFT row (`k_y` index), FFT
//! column (`k_x` index), i.e. the in-memory order of a spectral field.

use std::path::Path;

use crc::{Crc, CRC_64_ECMA_182};

use crate::domain::{Field3D, HorizontalGrid, Repr, State, VerticalGrid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CAOS";
pub const VERSION: u32 = 1;
const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_ECMA_182);

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub state: State,
    pub step: u64,
}

fn put_field(buf: &mut Vec<u8>, f: &Field3D) {
    for v in f.to_spectral().data() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
}

pub fn to_bytes(state: &State, step: u64) -> Vec<u8> {
    let h = state.va.hgrid();
    let (num, den) = h.dealias_fraction();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for n in [h.nx(), h.ny(), state.va.nlev(), state.vo.nlev()] {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    buf.extend_from_slice(&num.to_le_bytes());
    buf.extend_from_slice(&den.to_le_bytes());
    buf.extend_from_slice(&state.va.vgrid().p_s().to_le_bytes());
    buf.extend_from_slice(&state.t.to_le_bytes());
    buf.extend_from_slice(&step.to_le_bytes());
    put_field(&mut buf, &state.va);
    put_field(&mut buf, &state.vo);
    let crc = CRC64.checksum(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.b.len() {
            return Err(Error::Format("truncated file".into()));
        }
        let s = &self.b[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn field(&mut self, f: &mut Field3D) -> Result<()> {
        for v in f.data_mut() {
            v.re = self.f64()?;
            v.im = self.f64()?;
        }
        Ok(())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 8 + 8 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if CRC64.checksum(body) != stored {
        return Err(Error::Format("checksum mismatch".into()));
    }
    let mut r = Reader { b: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version} (expected {VERSION})")));
    }
    let nx = r.u32()? as usize;
    let ny = r.u32()? as usize;
    let nz_a = r.u32()? as usize;
    let nz_o = r.u32()? as usize;
    let num = r.u32()?;
    let den = r.u32()?;
    let p_s = r.f64()?;
    let t = r.f64()?;
    let step = r.u64()?;
    let h = HorizontalGrid::with_dealias(nx, ny, num, den)?;
    let ag = VerticalGrid::atmosphere(nz_a, p_s)?;
    let og = VerticalGrid::ocean(nz_o)?;
    let mut va = Field3D::zeros(&h, ag, 2, Repr::Spectral);
    let mut vo = Field3D::zeros(&h, og, 2, Repr::Spectral);
    r.field(&mut va)?;
    r.field(&mut vo)?;
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes after coefficient data".into()));
    }
    Ok(Checkpoint { state: State { va, vo, t }, step })
}

pub fn save(path: &Path, state: &State, step: u64) -> Result<()> {
    std::fs::write(path, to_bytes(state, step))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{initial_state, Preset};

    fn sample() -> State {
        let h = HorizontalGrid::new(8, 12).unwrap();
        let a = VerticalGrid::atmosphere(5, 1.5).unwrap();
        let o = VerticalGrid::ocean(4).unwrap();
        let mut s = initial_state(&h, &a, &o, &Preset::random(0.7, 9));
        s.t = 0.123;
        s
    }

    #[test]
    fn bytes_round_trip() {
        let s = sample();
        let b = to_bytes(&s, 17);
        let c = from_bytes(&b).unwrap();
        assert_eq!(c.step, 17);
        assert_eq!(c.state.t, 0.123);
        assert_eq!(c.state.va.data(), s.va.data());
        assert_eq!(to_bytes(&c.state, c.step), b);
    }

    #[test]
    fn corruption_detected() {
        let mut b = to_bytes(&sample(), 1);
        b[40] ^= 1;
        assert!(matches!(from_bytes(&b), Err(Error::Format(m)) if m.contains("checksum")));
        let mut b = to_bytes(&sample(), 1);
        b[4] = 9;
        let n = b.len() - 8;
        let crc = CRC64.checksum(&b[..n]);
        b[n..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(from_bytes(&b), Err(Error::Format(m)) if m.contains("version")));
        assert!(from_bytes(b"XXXX0000000000000000").is_err());
    }
}
