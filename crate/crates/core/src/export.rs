//! Jump-record exports: JSONL with a header line, and a compact binary frame.
//!
//! Binary layout, all little-endian: the magic `LVYF`, `u32` format version,
//! `u32` dimension `d`, `u64` record count, `u64` seed, then per record the
//! `f64` values `time, x_1, …, x_d, size`.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::characteristics::Characteristics;
use crate::error::{Error, Result};
use crate::sampler::{FieldRealization, JumpRecord, SamplerConfig};

pub const BIN_MAGIC: &[u8; 4] = b"LVYF";
pub const BIN_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpsHeader {
    pub seed: u64,
    pub replicate: u64,
    pub dim: usize,
    pub jumps: usize,
    pub sampler: SamplerConfig,
    pub characteristics: Characteristics,
}

pub fn header(real: &FieldRealization) -> JumpsHeader {
    JumpsHeader {
        seed: real.config().seed,
        replicate: real.replicate(),
        dim: real.dim(),
        jumps: real.jumps().len(),
        sampler: real.config().clone(),
        characteristics: real.characteristics().clone(),
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_jsonl<W: Write>(real: &FieldRealization, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, &header(real)).map_err(json_err)?;
    w.write_all(b"\n")?;
    for j in real.jumps() {
        serde_json::to_writer(&mut w, j).map_err(json_err)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<(JumpsHeader, Vec<JumpRecord>)> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| Error::Io("empty jump file".into()))??;
    let head: JumpsHeader = serde_json::from_str(&first).map_err(json_err)?;
    let mut jumps = Vec::with_capacity(head.jumps);
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            jumps.push(serde_json::from_str(&line).map_err(json_err)?);
        }
    }
    if jumps.len() != head.jumps {
        return Err(Error::Io(format!("header announces {} jumps, found {}", head.jumps, jumps.len())));
    }
    Ok((head, jumps))
}

pub fn write_bin<W: Write>(real: &FieldRealization, mut w: W) -> Result<()> {
    w.write_all(BIN_MAGIC)?;
    w.write_all(&BIN_VERSION.to_le_bytes())?;
    w.write_all(&(real.dim() as u32).to_le_bytes())?;
    w.write_all(&(real.jumps().len() as u64).to_le_bytes())?;
    w.write_all(&real.config().seed.to_le_bytes())?;
    for j in real.jumps() {
        w.write_all(&j.time.to_le_bytes())?;
        for x in &j.location {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&j.size.to_le_bytes())?;
    }
    Ok(())
}

/// Returns the seed and the records; `compensated` is not stored and comes
/// back as `|size| ≤ 1`.
pub fn read_bin<R: Read>(mut r: R) -> Result<(u64, Vec<JumpRecord>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BIN_MAGIC {
        return Err(Error::Io("not a jump frame".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != BIN_VERSION {
        return Err(Error::Io("unsupported jump frame version".into()));
    }
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    let mut next = || -> Result<f64> {
        r.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let mut jumps = Vec::with_capacity(count);
    for _ in 0..count {
        let time = next()?;
        let location = (0..dim).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let size = next()?;
        jumps.push(JumpRecord { time, location, size, compensated: size.abs() <= 1.0 });
    }
    Ok((seed, jumps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::Preset;
    use crate::kernel::JumpLaw;
    use crate::region::Region;
    use crate::sampler::sample_field;

    #[test]
    fn round_trips() {
        let chars = Preset::CompoundPoisson { rate: 20.0, jumps: JumpLaw::Normal { mean: 0.0, sd: 2.0 } }
            .build(2)
            .unwrap();
        let real = sample_field(&chars, &SamplerConfig::new(5, Region::unit(2)).with_eps(0.0)).unwrap();
        assert!(!real.jumps().is_empty());
        let mut buf = Vec::new();
        write_jsonl(&real, &mut buf).unwrap();
        let (h, jumps) = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!((h.seed, h.dim, jumps.as_slice()), (5, 2, real.jumps()));
        assert_eq!(h.characteristics, chars);
        let mut bin = Vec::new();
        write_bin(&real, &mut bin).unwrap();
        assert_eq!(bin.len(), 28 + real.jumps().len() * 4 * 8);
        let (seed, back) = read_bin(bin.as_slice()).unwrap();
        assert_eq!(seed, 5);
        for (a, b) in back.iter().zip(real.jumps()) {
            assert_eq!((a.time, &a.location, a.size), (b.time, &b.location, b.size));
        }
        assert!(read_bin(&b"nope"[..]).is_err());
    }
}
