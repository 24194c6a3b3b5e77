//! `SVSM` multiclass model files, little-endian.
//!
//! Layout: magic, version u32, kernel tag u8 (0 linear, 1 rbf, 2 rbf with
//! squared width), sigma f64, C f64, dim u32, class count u32, class labels,
//! then per pair: support vector count u32, support vectors f64, dual
//! coefficients f64, bias f64, dual objective f64, converged u8. Last, a
//! standardization flag u8 followed by the means and scales when set.

use std::path::Path;

use ndarray::Array2;

use super::{BinarySvm, KernelKind, KernelSpec, MulticlassSvm, Standardizer};
use crate::binio::{self, Reader, Writer};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"SVSM";
pub const SVM_FILE_VERSION: u32 = 1;

fn kernel_tag(k: &KernelSpec) -> u8 {
    match (k.kind, k.conventional) {
        (KernelKind::Linear, _) => 0,
        (KernelKind::Rbf, false) => 1,
        (KernelKind::Rbf, true) => 2,
    }
}

pub fn encode_svm<T: Real>(m: &MulticlassSvm<T>) -> Result<Vec<u8>> {
    let mut w = Writer::new();
    let dim = m.dim();
    w.bytes(MAGIC);
    w.u32(SVM_FILE_VERSION);
    w.u8(kernel_tag(&m.kernel));
    w.f64(m.kernel.sigma);
    w.f64(m.c);
    w.len_u32(dim)?;
    w.len_u32(m.classes.len())?;
    for c in &m.classes {
        w.str(c)?;
    }
    for p in &m.pairs {
        w.len_u32(p.support_vectors.nrows())?;
        p.support_vectors.iter().for_each(|v| w.f64(v.as_f64()));
        p.dual_coefs.iter().for_each(|v| w.f64(v.as_f64()));
        w.f64(p.bias.as_f64());
        w.f64(p.dual_objective);
        w.u8(u8::from(p.converged));
    }
    match &m.standardizer {
        Some(s) => {
            w.u8(1);
            s.mean
                .iter()
                .chain(&s.scale)
                .for_each(|v| w.f64(v.as_f64()));
        }
        None => w.u8(0),
    }
    Ok(w.buf)
}

pub fn decode_svm<T: Real>(bytes: &[u8]) -> Result<MulticlassSvm<T>> {
    let bad = |m: String| Error::format("SVM", m);
    let mut r = Reader::new(bytes, "SVM");
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != SVM_FILE_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let tag = r.u8()?;
    let sigma = r.f64()?;
    let c = r.f64()?;
    let kernel = match tag {
        0 => KernelSpec::linear(),
        1 => KernelSpec::rbf(sigma),
        2 => KernelSpec::rbf_conventional(sigma),
        t => return Err(bad(format!("kernel tag {t}"))),
    };
    kernel.validate().map_err(|e| bad(e.to_string()))?;
    let dim = r.usize()?;
    let n_classes = r.usize()?;
    if n_classes < 2 || dim == 0 {
        return Err(bad(format!("{n_classes} classes of dimension {dim}")));
    }
    let classes = (0..n_classes)
        .map(|_| r.str())
        .collect::<Result<Vec<_>>>()?;
    let conv = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    let mut pairs = Vec::new();
    for _ in 0..n_classes * (n_classes - 1) / 2 {
        let n_sv = r.usize()?;
        let sv = conv(
            r.f64s(
                n_sv.checked_mul(dim)
                    .ok_or_else(|| bad("size overflow".into()))?,
            )?,
        );
        let support_vectors =
            Array2::from_shape_vec((n_sv, dim), sv).map_err(|e| bad(e.to_string()))?;
        let dual_coefs = conv(r.f64s(n_sv)?);
        let bias = T::lit(r.f64()?);
        let dual_objective = r.f64()?;
        let converged = r.u8()? != 0;
        pairs.push(BinarySvm {
            support_vectors,
            dual_coefs,
            bias,
            kernel,
            c,
            dual_objective,
            converged,
        });
    }
    let standardizer = match r.u8()? {
        0 => None,
        1 => Some(Standardizer {
            mean: conv(r.f64s(dim)?),
            scale: conv(r.f64s(dim)?),
        }),
        t => return Err(bad(format!("standardization flag {t}"))),
    };
    r.finish()?;
    Ok(MulticlassSvm {
        classes,
        pairs,
        kernel,
        c,
        standardizer,
    })
}

pub fn write_svm<T: Real>(path: impl AsRef<Path>, m: &MulticlassSvm<T>) -> Result<()> {
    binio::write_file(path.as_ref(), &encode_svm(m)?)
}

pub fn read_svm<T: Real>(path: impl AsRef<Path>) -> Result<MulticlassSvm<T>> {
    decode_svm(&binio::read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::tests::blobs;

    #[test]
    fn round_trip_preserves_predictions() {
        let (x, lab) = blobs(
            &[&[-2.0, 0.0, 1.0], &[2.0, 0.0, 0.0], &[0.0, 3.0, 0.0]],
            8,
            0.6,
            1,
        );
        let labels: Vec<String> = lab.iter().map(|l| format!("spk{l}")).collect();
        for kernel in [
            KernelSpec::linear(),
            KernelSpec::rbf(3.0),
            KernelSpec::rbf_conventional(2.0),
        ] {
            let m = MulticlassSvm::train(&x, &labels, kernel, 5.0).unwrap();
            let b = encode_svm(&m).unwrap();
            assert_eq!(&b[..4], b"SVSM");
            let back: MulticlassSvm<f64> = decode_svm(&b).unwrap();
            assert_eq!(back, m);
            assert!(decode_svm::<f64>(&b[..b.len() - 1]).is_err());
        }
    }
}
