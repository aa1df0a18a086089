//! Demonstration pair files: one record per (input, action) pair.

use std::path::Path;

use crate::container::{read_file, write_file, ContainerError, Reader, Writer};
use crate::Real;

use super::{DemoPair, Result};

pub const DEMO_MAGIC: &[u8; 8] = b"ACMBDEMO";

pub fn pairs_to_bytes<T: Real>(pairs: &[DemoPair<T>]) -> Vec<u8> {
    let mut w = Writer::new();
    w.u64(pairs.len() as u64);
    for p in pairs {
        w.u64(p.input.len() as u64);
        w.f64s(p.input.iter().map(|v| v.as_f64()));
        w.f64s(p.action.iter().map(|v| v.as_f64()));
    }
    w.finish(DEMO_MAGIC)
}

pub fn pairs_from_bytes<T: Real>(bytes: &[u8]) -> Result<Vec<DemoPair<T>>> {
    let mut r = Reader::open(bytes, DEMO_MAGIC)?;
    let n = r.count(8 + 16)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let width = r.count(8)?;
        let input = (0..width).map(|_| r.f64().map(T::lit)).collect::<std::result::Result<Vec<_>, _>>()?;
        let action = [T::lit(r.f64()?), T::lit(r.f64()?)];
        if action.iter().any(|a| a.is_nan() || a.abs() > T::one()) || input.iter().any(|v| !v.is_finite()) {
            return Err(ContainerError::Corrupt("demonstration pair out of range".into()).into());
        }
        out.push(DemoPair { input, action });
    }
    r.finish()?;
    Ok(out)
}

pub fn save_pairs<T: Real>(pairs: &[DemoPair<T>], path: impl AsRef<Path>) -> Result<()> {
    Ok(write_file(path.as_ref(), &pairs_to_bytes(pairs))?)
}

pub fn load_pairs<T: Real>(path: impl AsRef<Path>) -> Result<Vec<DemoPair<T>>> {
    pairs_from_bytes(&read_file(path.as_ref())?)
}
