//! `SVFT` feature files: magic, version, T, D, front-end string, then T*D
//! little-endian f32 values in row-major order.

use std::path::Path;

use ndarray::Array2;

use super::{FeatureMatrix, FrontendSpec};
use crate::binio::{self, Reader, Writer};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"SVFT";
pub const FEATURE_FILE_VERSION: u32 = 1;

pub fn encode_features<T: Real>(f: &FeatureMatrix<T>) -> Result<Vec<u8>> {
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(FEATURE_FILE_VERSION);
    w.len_u32(f.n_frames())?;
    w.len_u32(f.dim())?;
    w.str(&f.frontend().to_string())?;
    for &v in f.values() {
        w.f32(v.to_f32().unwrap_or(f32::NAN));
    }
    Ok(w.buf)
}

pub fn decode_features<T: Real>(bytes: &[u8]) -> Result<FeatureMatrix<T>> {
    let mut r = Reader::new(bytes, "feature");
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != FEATURE_FILE_VERSION {
        return Err(Error::format(
            "feature",
            format!("unsupported version {version}"),
        ));
    }
    let t = r.usize()?;
    let d = r.usize()?;
    let spec: FrontendSpec = r.str()?.parse()?;
    let n = t
        .checked_mul(d)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format("feature", "size overflow"))?;
    let raw = r.take(n)?;
    r.finish()?;
    let values: Vec<T> = raw
        .chunks_exact(4)
        .map(|c| T::from_f32(f32::from_le_bytes(c.try_into().unwrap())).unwrap())
        .collect();
    let values = Array2::from_shape_vec((t, d), values)
        .map_err(|e| Error::format("feature", e.to_string()))?;
    FeatureMatrix::new(values, spec, None)
}

pub fn write_features<T: Real>(path: impl AsRef<Path>, f: &FeatureMatrix<T>) -> Result<()> {
    binio::write_file(path.as_ref(), &encode_features(f)?)
}

pub fn read_features<T: Real>(path: impl AsRef<Path>) -> Result<FeatureMatrix<T>> {
    decode_features(&binio::read_file(path.as_ref())?)
}
