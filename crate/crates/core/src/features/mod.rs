//! Acoustic front-ends (MFCC, LPC, PLP), dynamic features, energy, and the
//! assembled extraction pipeline.

mod dynamics;
mod filterbank;
mod io;
mod lpc;
mod mfcc;
mod plp;
mod spec;

use ndarray::Array2;

pub use dynamics::{append_deltas, append_log_energy, delta};
pub use filterbank::{
    bark_filterbank, hz_to_bark, hz_to_mel, mel_filterbank, mel_to_hz, BandFilter, Filterbank,
};
pub use io::{
    decode_features, encode_features, read_features, write_features, FEATURE_FILE_VERSION,
};
pub use lpc::{autocorrelation, compute_lpc, levinson_durbin, LpcModel};
pub use mfcc::{compute_mfcc, MfccConfig, MfccExtractor};
pub use plp::{compute_plp, equal_loudness, lpc_to_cepstrum, PlpConfig, PlpExtractor};
pub use spec::{BaseFeature, FrontendSpec};

use crate::corpus::Waveform;
use crate::dsp::{self, FrameMatrix, PreprocessConfig};
use crate::error::{Error, Result};
use crate::normalize::{self, NormalizerSpec};
use crate::scalar::Real;

/// `T x D` feature trajectory plus the front-end that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    values: Array2<T>,
    frontend: FrontendSpec,
    frame_shift_ms: Option<f64>,
    flagged: Vec<usize>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(
        values: Array2<T>,
        frontend: FrontendSpec,
        frame_shift_ms: Option<f64>,
    ) -> Result<Self> {
        if values.ncols() != frontend.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} columns for front-end {frontend} of dimension {}",
                values.ncols(),
                frontend.dim()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "non-finite feature value from {frontend}"
            )));
        }
        Ok(Self {
            values,
            frontend,
            frame_shift_ms,
            flagged: Vec::new(),
        })
    }

    pub(crate) fn with_flagged(mut self, flagged: Vec<usize>) -> Self {
        self.flagged = flagged;
        self
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    pub fn frontend(&self) -> &FrontendSpec {
        &self.frontend
    }

    pub fn frame_shift_ms(&self) -> Option<f64> {
        self.frame_shift_ms
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Frames whose analysis degenerated (silent input, singular recursion).
    pub fn flagged_frames(&self) -> &[usize] {
        &self.flagged
    }

    /// Same provenance, new values of identical shape.
    pub(crate) fn replace_values(
        &self,
        values: Array2<T>,
        extra: Option<NormalizerSpec>,
    ) -> Result<Self> {
        let mut frontend = self.frontend.clone();
        frontend.normalizers.extend(extra);
        Ok(Self::new(values, frontend, self.frame_shift_ms)?.with_flagged(self.flagged.clone()))
    }
}

enum BaseExtractor<T: Real> {
    Mfcc(MfccExtractor<T>),
    Lpc { order: usize },
    Plp(PlpExtractor<T>),
}

/// A ready-to-run front-end: base analysis, energy, deltas, then normalizers.
pub struct Frontend<T: Real> {
    spec: FrontendSpec,
    preprocess: PreprocessConfig,
    sample_rate: u32,
    base: BaseExtractor<T>,
}

/// Builds the extraction pipeline for `spec` at `sample_rate`.
pub fn assemble_frontend<T: Real>(
    spec: &FrontendSpec,
    preprocess: &PreprocessConfig,
    sample_rate: u32,
) -> Result<Frontend<T>> {
    spec.validate()?;
    preprocess.validate()?;
    let (frame_len, _) = preprocess.frame_geometry(sample_rate)?;
    let base = match spec.base {
        BaseFeature::Mfcc => BaseExtractor::Mfcc(MfccExtractor::new(
            &MfccConfig {
                n_ceps: spec.n_base,
                ..MfccConfig::for_frame(frame_len)
            },
            sample_rate,
        )?),
        BaseFeature::Lpc => {
            if spec.n_base >= frame_len {
                return Err(Error::Config(format!(
                    "LPC order {} must be below frame length {frame_len}",
                    spec.n_base
                )));
            }
            BaseExtractor::Lpc { order: spec.n_base }
        }
        BaseFeature::Plp => BaseExtractor::Plp(PlpExtractor::new(
            &PlpConfig {
                order: spec.n_base - 1,
                rasta: spec.has_rasta(),
                ..PlpConfig::for_frame(frame_len)
            },
            sample_rate,
        )?),
    };
    Ok(Frontend {
        spec: spec.clone(),
        preprocess: *preprocess,
        sample_rate,
        base,
    })
}

impl<T: Real> Frontend<T> {
    pub fn spec(&self) -> &FrontendSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Full chain from raw audio.
    pub fn extract(&self, x: &Waveform<T>) -> Result<FeatureMatrix<T>> {
        if x.sample_rate() != self.sample_rate {
            return Err(Error::InvalidParam(format!(
                "waveform at {} Hz, front-end built for {} Hz",
                x.sample_rate(),
                self.sample_rate
            )));
        }
        let frames = dsp::preprocess(x, &self.preprocess)?;
        self.extract_frames(&frames)
    }

    /// Chain from already pre-processed (windowed) frames.
    pub fn extract_frames(&self, frames: &FrameMatrix<T>) -> Result<FeatureMatrix<T>> {
        let mut f = match &self.base {
            BaseExtractor::Mfcc(m) => m.compute(frames)?,
            BaseExtractor::Lpc { order } => compute_lpc(frames, *order)?,
            BaseExtractor::Plp(p) => p.compute(frames)?,
        };
        if self.spec.energy {
            f = append_log_energy(&f, &dsp::frame_log_energy(frames))?;
        }
        if self.spec.deltas > 0 {
            f = append_deltas(&f, self.spec.delta_d, self.spec.deltas)?;
        }
        for n in &self.spec.normalizers {
            f = match *n {
                NormalizerSpec::Cms => normalize::cms(&f),
                NormalizerSpec::Cvn => normalize::cvn(&f)?,
                NormalizerSpec::Rasta => continue,
                NormalizerSpec::Warp { window } => normalize::feature_warp(&f, window)?.0,
                NormalizerSpec::Gaussianize { iters } => {
                    normalize::short_time_gaussianize(&f, iters)?
                }
            };
        }
        // Normalizers re-append themselves to provenance; restore the declared spec.
        f.frontend = self.spec.clone();
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize) -> Waveform<f64> {
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / 16000.0;
                0.3 * (2.0 * std::f64::consts::PI * 220.0 * t).sin()
                    + 0.1 * (2.0 * std::f64::consts::PI * 1330.0 * t).sin()
                    + 0.01 * ((i * 7919 % 97) as f64 / 97.0 - 0.5)
            })
            .collect();
        Waveform::new(s, 16000).unwrap()
    }

    #[test]
    fn table_dimensions() {
        let x = tone(8000);
        let pre = PreprocessConfig::default();
        for (s, d) in [
            ("mfcc", 12),
            ("mfcc,e", 13),
            ("mfcc,d1", 24),
            ("mfcc,d2", 36),
            ("mfcc,d2,e", 39),
            ("mfcc,cms", 12),
            ("plp", 13),
            ("plp,d1", 26),
            ("plp,d2", 39),
            ("plp,d2,rasta", 39),
            ("lpc", 13),
            ("lpc,d1", 26),
            ("lpc,d2", 39),
        ] {
            let spec: FrontendSpec = s.parse().unwrap();
            assert_eq!(spec.dim(), d, "{s}");
            let fe = assemble_frontend::<f64>(&spec, &pre, 16000).unwrap();
            let f = fe.extract(&x).unwrap();
            assert_eq!(f.dim(), d, "{s}");
            assert_eq!(f.frontend(), &spec);
            assert!(f.n_frames() > 50);
        }
    }

    #[test]
    fn rejects_rate_mismatch() {
        let fe =
            assemble_frontend::<f64>(&"mfcc".parse().unwrap(), &PreprocessConfig::default(), 8000)
                .unwrap();
        assert!(fe.extract(&tone(4000)).is_err());
    }

    #[test]
    fn f32_pipeline_runs() {
        let x = Waveform::new(
            tone(4000).samples().iter().map(|&v| v as f32).collect(),
            16000,
        )
        .unwrap();
        let fe = assemble_frontend::<f32>(
            &"plp,d1".parse().unwrap(),
            &PreprocessConfig::default(),
            16000,
        )
        .unwrap();
        assert_eq!(fe.extract(&x).unwrap().dim(), 26);
    }
}
