//! Binary persistence for [`ReachMap`]. All numbers are little-endian.
//!
//! ```text
//! header   magic[8] version:u32 dof:u32 steps:u32 delta:f64 robot_hash[32]
//!          enumerated:u64 self_colliding:u64 cells:u64 records:u64 pool:u64
//! cells    (a:i32 b:i32 c:i32 first:u64 count:u64) * cells, ascending key order
//! records  (p:3*f64 q:dof*f64 n:3*f64 w:f64 occ_len:u32 occ:occ_len*u32) * records
//! pool     (len:u32 (a:i32 b:i32 c:i32)*len) * pool
//! ```

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{MapMeta, ReachMap, ReachRecord};
use crate::error::{Error, Result};
use crate::spatial::VoxelIndex;

pub const MAP_MAGIC: [u8; 8] = *b"BPRMAP\r\n";
pub const MAP_VERSION: u32 = 1;

impl ReachMap {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let hash = hex::decode(&self.meta.robot_hash)
            .ok()
            .filter(|h| h.len() == 32)
            .unwrap_or_else(|| vec![0; 32]);
        w.write_all(&MAP_MAGIC)?;
        w.write_all(&MAP_VERSION.to_le_bytes())?;
        w.write_all(&(self.meta.dof as u32).to_le_bytes())?;
        w.write_all(&(self.meta.steps_per_joint as u32).to_le_bytes())?;
        w.write_all(&self.meta.delta_bits.to_le_bytes())?;
        w.write_all(&hash)?;
        for v in [
            self.meta.enumerated,
            self.meta.self_colliding,
            self.cells.len() as u64,
            self.records.len() as u64,
            self.pool.len() as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }

        let mut keys: Vec<_> = self.cells.keys().copied().collect();
        keys.sort_unstable();
        for k in &keys {
            let range = &self.cells[k];
            for c in k {
                w.write_all(&c.to_le_bytes())?;
            }
            w.write_all(&(range.start as u64).to_le_bytes())?;
            w.write_all(&(range.len() as u64).to_le_bytes())?;
        }
        for r in &self.records {
            if r.q.len() != self.meta.dof {
                return Err(Error::MapFormat(format!(
                    "record has {} joint values, map dof is {}",
                    r.q.len(),
                    self.meta.dof
                )));
            }
            for v in r.position.iter().chain(r.q.iter()).chain(r.approach.iter()) {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&r.manipulability.to_le_bytes())?;
            w.write_all(&(r.occupancy.len() as u32).to_le_bytes())?;
            for id in r.occupancy.iter() {
                w.write_all(&id.to_le_bytes())?;
            }
        }
        for cells in &self.pool {
            w.write_all(&(cells.len() as u32).to_le_bytes())?;
            for c in cells.iter().flatten() {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { buf: bytes, pos: 0 };
        if cur.take(8)? != MAP_MAGIC {
            return Err(Error::MapFormat("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != MAP_VERSION {
            return Err(Error::MapFormat(format!("unsupported version {version}")));
        }
        let dof = cur.u32()? as usize;
        let steps_per_joint = cur.u32()? as usize;
        let delta_bits = cur.u64()?;
        let robot_hash = hex::encode(cur.take(32)?);
        let enumerated = cur.u64()?;
        let self_colliding = cur.u64()?;
        let n_cells = cur.u64()? as usize;
        let n_records = cur.u64()? as usize;
        let n_pool = cur.u64()? as usize;

        let mut cells = HashMap::with_capacity(n_cells.min(1 << 24));
        for _ in 0..n_cells {
            let key = [cur.i32()?, cur.i32()?, cur.i32()?];
            let first = cur.u64()? as usize;
            let count = cur.u64()? as usize;
            if first.checked_add(count).is_none_or(|end| end > n_records) {
                return Err(Error::MapFormat("cell range past the record array".into()));
            }
            cells.insert(key, first..first + count);
        }
        let mut records = Vec::with_capacity(n_records.min(1 << 24));
        for _ in 0..n_records {
            let position = cur.vec3()?;
            let q = (0..dof).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
            let approach = cur.vec3()?;
            let manipulability = cur.f64()?;
            let occ_len = cur.u32()? as usize;
            let occupancy = (0..occ_len).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
            if occupancy.iter().any(|&id| id as usize >= n_pool) {
                return Err(Error::MapFormat("occupancy id past the pool".into()));
            }
            records.push(ReachRecord {
                position,
                q: q.into_boxed_slice(),
                approach,
                manipulability,
                occupancy: occupancy.into_boxed_slice(),
            });
        }
        let mut pool = Vec::with_capacity(n_pool.min(1 << 24));
        for _ in 0..n_pool {
            let len = cur.u32()? as usize;
            let set = (0..len)
                .map(|_| Ok([cur.i32()?, cur.i32()?, cur.i32()?]))
                .collect::<Result<Vec<VoxelIndex>>>()?;
            pool.push(set);
        }
        if cur.pos != bytes.len() {
            return Err(Error::MapFormat("trailing bytes".into()));
        }
        let meta = MapMeta {
            dof,
            steps_per_joint,
            delta_bits,
            robot_hash,
            enumerated,
            self_colliding,
        };
        Ok(ReachMap {
            meta,
            cells,
            records,
            pool,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::MapFormat("unexpected end of file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn vec3(&mut self) -> Result<Vector3<f64>> {
        Ok(Vector3::new(self.f64()?, self.f64()?, self.f64()?))
    }
}
