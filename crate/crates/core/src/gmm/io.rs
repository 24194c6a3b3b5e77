//! `SVGM` model files and `SVSV` supervector files, little-endian.

use std::path::Path;

use ndarray::Array2;

use super::{GmmModel, Scaling, Supervector};
use crate::binio::{self, Reader, Writer};
use crate::error::{Error, Result};
use crate::scalar::Real;

const GMM_MAGIC: &[u8; 4] = b"SVGM";
const SV_MAGIC: &[u8; 4] = b"SVSV";
pub const GMM_FILE_VERSION: u32 = 1;

pub fn encode_gmm<T: Real>(g: &GmmModel<T>) -> Result<Vec<u8>> {
    let mut w = Writer::new();
    w.bytes(GMM_MAGIC);
    w.u32(GMM_FILE_VERSION);
    w.len_u32(g.n_components())?;
    w.len_u32(g.dim())?;
    g.weights()
        .iter()
        .chain(g.means().iter())
        .chain(g.variances().iter())
        .for_each(|v| w.f64(v.as_f64()));
    Ok(w.buf)
}

pub fn decode_gmm<T: Real>(bytes: &[u8]) -> Result<GmmModel<T>> {
    let mut r = Reader::new(bytes, "GMM");
    r.magic(GMM_MAGIC)?;
    let version = r.u32()?;
    if version != GMM_FILE_VERSION {
        return Err(Error::format(
            "GMM",
            format!("unsupported version {version}"),
        ));
    }
    let k = r.usize()?;
    let d = r.usize()?;
    let kd = k
        .checked_mul(d)
        .ok_or_else(|| Error::format("GMM", "size overflow"))?;
    let conv = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    let weights = conv(r.f64s(k)?);
    let means = conv(r.f64s(kd)?);
    let vars = conv(r.f64s(kd)?);
    r.finish()?;
    let shape =
        |v| Array2::from_shape_vec((k, d), v).map_err(|e| Error::format("GMM", e.to_string()));
    GmmModel::new(weights, shape(means)?, shape(vars)?)
        .map_err(|e| Error::format("GMM", e.to_string()))
}

pub fn write_gmm<T: Real>(path: impl AsRef<Path>, g: &GmmModel<T>) -> Result<()> {
    binio::write_file(path.as_ref(), &encode_gmm(g)?)
}

pub fn read_gmm<T: Real>(path: impl AsRef<Path>) -> Result<GmmModel<T>> {
    decode_gmm(&binio::read_file(path.as_ref())?)
}

pub fn encode_supervector<T: Real>(sv: &Supervector<T>) -> Result<Vec<u8>> {
    let mut w = Writer::new();
    w.bytes(SV_MAGIC);
    w.len_u32(sv.len())?;
    w.u8(sv.scaling.tag());
    sv.values.iter().for_each(|v| w.f64(v.as_f64()));
    Ok(w.buf)
}

pub fn decode_supervector<T: Real>(bytes: &[u8]) -> Result<Supervector<T>> {
    let mut r = Reader::new(bytes, "supervector");
    r.magic(SV_MAGIC)?;
    let n = r.usize()?;
    let tag = r.u8()?;
    let scaling = Scaling::from_tag(tag)
        .ok_or_else(|| Error::format("supervector", format!("scaling tag {tag}")))?;
    let values = r.f64s(n)?.into_iter().map(T::lit).collect();
    r.finish()?;
    Ok(Supervector { values, scaling })
}

pub fn write_supervector<T: Real>(path: impl AsRef<Path>, sv: &Supervector<T>) -> Result<()> {
    binio::write_file(path.as_ref(), &encode_supervector(sv)?)
}

pub fn read_supervector<T: Real>(path: impl AsRef<Path>) -> Result<Supervector<T>> {
    decode_supervector(&binio::read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::tests::random_model;

    #[test]
    fn gmm_round_trip_and_header() {
        let g = random_model(5, 3, 1);
        let b = encode_gmm(&g).unwrap();
        assert_eq!(&b[..4], b"SVGM");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 5);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 3);
        assert_eq!(b.len(), 16 + 8 * (5 + 2 * 15));
        assert_eq!(decode_gmm::<f64>(&b).unwrap(), g);
        assert!(decode_gmm::<f64>(&b[..b.len() - 8]).is_err());
        let mut bad = b.clone();
        bad[4] = 9;
        assert!(matches!(decode_gmm::<f64>(&bad), Err(Error::Format { .. })));
    }

    #[test]
    fn supervector_round_trip() {
        let sv = Supervector {
            values: vec![1.5f64, -2.0, 1e-300],
            scaling: Scaling::Kl,
        };
        let b = encode_supervector(&sv).unwrap();
        assert_eq!(&b[..4], b"SVSV");
        assert_eq!(b[8], 1);
        assert_eq!(b.len(), 9 + 24);
        assert_eq!(decode_supervector::<f64>(&b).unwrap(), sv);
        let mut bad = b.clone();
        bad[8] = 7;
        assert!(decode_supervector::<f64>(&bad).is_err());
    }
}
