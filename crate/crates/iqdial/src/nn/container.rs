//! Binary parameter container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes    caller-chosen, e.g. b"IQDM"
//! version    u32
//! header     u32 length + that many bytes (UTF-8, caller-defined, may be 0)
//! rng_seed   u64
//! count      u32        number of parameters
//! per parameter:
//!   name     u32 length + UTF-8 bytes
//!   rank     u32, then rank × u32 dims
//!   data     numel × f64 (IEEE-754 bits, little-endian)
//! ```
//!
//! Round trips are bit-exact: f64 values are stored as raw bits.

use std::io::{Read, Write};

use super::tensor::{ParameterSet, Tensor};
use super::NnError;

pub fn write_params<W: Write>(
    w: &mut W,
    magic: &[u8; 4],
    version: u32,
    header: &str,
    ps: &ParameterSet,
) -> Result<(), NnError> {
    w.write_all(magic)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    w.write_all(&ps.rng_seed.to_le_bytes())?;
    w.write_all(&(ps.len() as u32).to_le_bytes())?;
    for (name, t) in ps.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a container, checking magic and version. Returns the header
/// string and the parameter set.
pub fn read_params<R: Read>(
    r: &mut R,
    magic: &[u8; 4],
    version: u32,
) -> Result<(String, ParameterSet), NnError> {
    let mut got_magic = [0u8; 4];
    read_exact(r, &mut got_magic)?;
    if &got_magic != magic {
        return Err(NnError::BadContainer { what: format!("magic {got_magic:?}") });
    }
    let got_version = read_u32(r)?;
    if got_version != version {
        return Err(NnError::VersionMismatch { expected: version, got: got_version });
    }
    let header_len = read_u32(r)? as usize;
    let mut header = vec![0u8; header_len];
    read_exact(r, &mut header)?;
    let header = String::from_utf8(header)
        .map_err(|_| NnError::BadContainer { what: "non-UTF-8 header".into() })?;
    let mut seed_bytes = [0u8; 8];
    read_exact(r, &mut seed_bytes)?;
    let mut ps = ParameterSet::new(u64::from_le_bytes(seed_bytes));
    let count = read_u32(r)?;
    for _ in 0..count {
        let name_len = read_u32(r)? as usize;
        if name_len > 1 << 20 {
            return Err(NnError::BadContainer { what: format!("name length {name_len}") });
        }
        let mut name = vec![0u8; name_len];
        read_exact(r, &mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| NnError::BadContainer { what: "non-UTF-8 name".into() })?;
        let rank = read_u32(r)? as usize;
        if rank > 8 {
            return Err(NnError::BadContainer { what: format!("rank {rank}") });
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        let mut bits = [0u8; 8];
        for _ in 0..numel {
            read_exact(r, &mut bits)?;
            data.push(f64::from_bits(u64::from_le_bytes(bits)));
        }
        ps.insert(&name, Tensor::new(shape, data)?)?;
    }
    Ok((header, ps))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), NnError> {
    r.read_exact(buf).map_err(|_| NnError::BadContainer { what: "truncated file".into() })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}
