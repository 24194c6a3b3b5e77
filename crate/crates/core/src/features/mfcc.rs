use std::sync::Arc;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::filterbank::{mel_filterbank, Filterbank};
use super::{BaseFeature, FeatureMatrix, FrontendSpec};
use crate::dsp::FrameMatrix;
use crate::error::{Error, Result};
use crate::scalar::{floored_ln, Real};

/// Zero-padded power spectrum over bins `0..=fft_size/2`.
pub(crate) struct PowerSpectrum<T: Real> {
    fft: Arc<dyn Fft<T>>,
    pub(crate) fft_size: usize,
}

impl<T: Real> PowerSpectrum<T> {
    pub fn new(fft_size: usize) -> Self {
        Self {
            fft: FftPlanner::new().plan_fft_forward(fft_size),
            fft_size,
        }
    }

    pub fn compute(&self, frame: &[T], buf: &mut Vec<Complex<T>>, out: &mut Vec<T>) {
        buf.clear();
        buf.extend(frame.iter().map(|&s| Complex::new(s, T::zero())));
        buf.resize(self.fft_size, Complex::new(T::zero(), T::zero()));
        self.fft.process(buf);
        out.clear();
        out.extend(buf[..=self.fft_size / 2].iter().map(|c| c.norm_sqr()));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MfccConfig {
    pub n_filters: usize,
    pub fft_size: usize,
    pub f_low: f64,
    /// Upper filterbank edge; Nyquist when `None`.
    pub f_high: Option<f64>,
    /// Cepstra kept, `c_1..c_n` (c_0 is dropped).
    pub n_ceps: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            n_filters: 26,
            fft_size: 256,
            f_low: 0.0,
            f_high: None,
            n_ceps: 12,
        }
    }
}

impl MfccConfig {
    /// Defaults with the FFT sized to the next power of two at or above `frame_len`.
    pub fn for_frame(frame_len: usize) -> Self {
        Self {
            fft_size: frame_len.next_power_of_two(),
            ..Self::default()
        }
    }
}

pub struct MfccExtractor<T: Real> {
    spectrum: PowerSpectrum<T>,
    filterbank: Filterbank<T>,
    dct: Vec<Vec<T>>,
    n_ceps: usize,
}

impl<T: Real> MfccExtractor<T> {
    pub fn new(cfg: &MfccConfig, sample_rate: u32) -> Result<Self> {
        if cfg.n_ceps == 0 || cfg.n_ceps >= cfg.n_filters {
            return Err(Error::Config(format!(
                "MFCC count {} must be in 1..{}",
                cfg.n_ceps, cfg.n_filters
            )));
        }
        let nyquist = f64::from(sample_rate) / 2.0;
        let filterbank = mel_filterbank(
            cfg.n_filters,
            cfg.fft_size,
            sample_rate,
            cfg.f_low,
            cfg.f_high.unwrap_or(nyquist),
        )?;
        // Orthonormal DCT-II rows 1..=n_ceps.
        let m = cfg.n_filters as f64;
        let dct = (1..=cfg.n_ceps)
            .map(|k| {
                (0..cfg.n_filters)
                    .map(|j| {
                        T::lit(
                            (2.0 / m).sqrt()
                                * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / m).cos(),
                        )
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            spectrum: PowerSpectrum::new(cfg.fft_size),
            filterbank,
            dct,
            n_ceps: cfg.n_ceps,
        })
    }

    pub fn filterbank(&self) -> &Filterbank<T> {
        &self.filterbank
    }

    /// Floored natural-log filterbank energies of one frame.
    pub fn log_mel_energies(&self, frame: &[T]) -> Vec<T> {
        let mut buf = Vec::new();
        let mut power = Vec::new();
        let mut bands = vec![T::zero(); self.filterbank.n_filters()];
        self.spectrum.compute(frame, &mut buf, &mut power);
        self.filterbank.apply_into(&power, &mut bands);
        bands.iter_mut().for_each(|b| *b = floored_ln(*b));
        bands
    }

    pub fn compute(&self, frames: &FrameMatrix<T>) -> Result<FeatureMatrix<T>> {
        if frames.frame_len() > self.spectrum.fft_size {
            return Err(Error::Config(format!(
                "frame length {} exceeds FFT size {}",
                frames.frame_len(),
                self.spectrum.fft_size
            )));
        }
        let mut out = Array2::zeros((frames.n_frames(), self.n_ceps));
        let mut buf = Vec::with_capacity(self.spectrum.fft_size);
        let mut power = Vec::with_capacity(self.spectrum.fft_size / 2 + 1);
        let mut bands = vec![T::zero(); self.filterbank.n_filters()];
        let mut frame = Vec::with_capacity(frames.frame_len());
        for (t, row) in frames.frames.axis_iter(Axis(0)).enumerate() {
            frame.clear();
            frame.extend(row.iter().copied());
            self.spectrum.compute(&frame, &mut buf, &mut power);
            self.filterbank.apply_into(&power, &mut bands);
            bands.iter_mut().for_each(|b| *b = floored_ln(*b));
            for (k, basis) in self.dct.iter().enumerate() {
                out[[t, k]] = basis.iter().zip(&bands).map(|(&c, &b)| c * b).sum();
            }
        }
        let spec = FrontendSpec {
            n_base: self.n_ceps,
            ..FrontendSpec::new(BaseFeature::Mfcc)
        };
        let shift_ms = frames.shift as f64 * 1000.0 / f64::from(frames.sample_rate);
        FeatureMatrix::new(out, spec, Some(shift_ms))
    }
}

/// Mel-frequency cepstra `c_1..c_n` of windowed frames.
pub fn compute_mfcc<T: Real>(
    frames: &FrameMatrix<T>,
    cfg: &MfccConfig,
) -> Result<FeatureMatrix<T>> {
    MfccExtractor::new(cfg, frames.sample_rate)?.compute(frames)
}
