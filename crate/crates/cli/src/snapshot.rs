//! Binary connection snapshots.
//!
//! Layout, all integers `u32` and floats `f64`, little-endian:
//!
//! ```text
//! "BIYM" | version | n | extents[n] | h | m | name_len | name bytes | payload | crc32(payload)
//! ```
//!
//! The payload holds `N·n·m(m−1)/2` floats ordered by site (row-major), then
//! axis, then the upper triangle of the skew matrix row by row.

use std::path::Path;
use std::sync::Arc;

use biym_core::calculus::Connection;
use biym_core::{Density, LatticeSpec, PForm};

use crate::output::write_atomic;
use crate::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"BIYM";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub extents: Vec<usize>,
    pub h: f64,
    pub m: usize,
    pub density: String,
    pub payload: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Snapshot(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl Snapshot {
    pub fn from_connection(conn: &Connection, density: &Density) -> Self {
        let lattice = conn.lattice();
        Snapshot {
            extents: lattice.extents().to_vec(),
            h: lattice.spacing(),
            m: conn.fiber_dim(),
            density: density.to_string(),
            payload: conn.alpha().to_coeffs(),
        }
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.extents.clone(), self.h).map_err(|e| bad(e.to_string()))
    }

    pub fn connection(&self) -> Result<Connection> {
        let lattice = Arc::new(self.lattice()?);
        let alpha = PForm::from_coeffs(lattice, 1, self.m, &self.payload).map_err(|e| bad(e.to_string()))?;
        Ok(Connection::new(alpha)?)
    }

    pub fn density(&self) -> Result<Density> {
        self.density.parse().map_err(|e: biym_core::Error| bad(e.to_string()))
    }

    fn expected_len(extents: &[usize], m: usize) -> usize {
        extents.iter().product::<usize>() * extents.len() * m * (m - 1) / 2
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 8 * self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.extents.len() as u32).to_le_bytes());
        for &e in &self.extents {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.h.to_le_bytes());
        out.extend_from_slice(&(self.m as u32).to_le_bytes());
        out.extend_from_slice(&(self.density.len() as u32).to_le_bytes());
        out.extend_from_slice(self.density.as_bytes());
        let start = out.len();
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let n = r.u32()? as usize;
        if !(1..=16).contains(&n) {
            return Err(bad(format!("implausible dimension {n}")));
        }
        let extents = (0..n).map(|_| r.u32().map(|e| e as usize)).collect::<Result<Vec<_>>>()?;
        let h = r.f64()?;
        let m = r.u32()? as usize;
        if !(2..=4).contains(&m) {
            return Err(bad(format!("fiber dimension {m} out of range")));
        }
        let name_len = r.u32()? as usize;
        let density = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| bad("density name is not UTF-8"))?
            .to_string();
        let count = extents
            .iter()
            .try_fold(1usize, |a, &e| a.checked_mul(e))
            .map(|_| Self::expected_len(&extents, m))
            .ok_or_else(|| bad("extents overflow"))?;
        let payload_bytes = r.take(count.checked_mul(8).ok_or_else(|| bad("payload overflow"))?)?;
        let stored = r.u32()?;
        if r.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if crc32fast::hash(payload_bytes) != stored {
            return Err(bad("checksum mismatch"));
        }
        let payload = payload_bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Snapshot {
            extents,
            h,
            m,
            density,
            payload,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            CliError::Snapshot(msg) => bad(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }
}
