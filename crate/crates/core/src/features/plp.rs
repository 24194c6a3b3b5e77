use ndarray::{Array2, Axis};

use super::filterbank::{bark_filterbank, Filterbank};
use super::lpc::levinson_durbin;
use super::mfcc::PowerSpectrum;
use super::{BaseFeature, FeatureMatrix, FrontendSpec};
use crate::dsp::FrameMatrix;
use crate::error::{Error, Result};
use crate::normalize::{rasta_filter, NormalizerSpec};
use crate::scalar::{floored_ln, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct PlpConfig {
    pub fft_size: usize,
    /// All-pole model order; the output has `order + 1` cepstra (c_0..c_order).
    pub order: usize,
    /// Band-pass the log critical-band trajectories before compression.
    pub rasta: bool,
}

impl Default for PlpConfig {
    fn default() -> Self {
        Self {
            fft_size: 256,
            order: 12,
            rasta: false,
        }
    }
}

impl PlpConfig {
    pub fn for_frame(frame_len: usize) -> Self {
        Self {
            fft_size: frame_len.next_power_of_two(),
            ..Self::default()
        }
    }
}

/// Equal-loudness preemphasis at `f` Hz (40 dB curve approximation).
pub fn equal_loudness(f: f64) -> f64 {
    let w2 = (2.0 * std::f64::consts::PI * f).powi(2);
    (w2 + 56.8e6) * w2 * w2 / ((w2 + 6.3e6).powi(2) * (w2 + 0.38e9))
}

/// Cepstra `c_0..c_n` of the all-pole model `gain^2 / |1 - sum a_i z^-i|^2`,
/// with `c_0 = ln(gain^2)`.
pub fn lpc_to_cepstrum<T: Real>(a: &[T], error: T, n: usize) -> Vec<T> {
    let p = a.len();
    let mut c = vec![T::zero(); n + 1];
    c[0] = error.ln();
    for m in 1..=n {
        let mut acc = if m <= p { a[m - 1] } else { T::zero() };
        for k in m.saturating_sub(p).max(1)..m {
            acc += T::from_count(k) / T::from_count(m) * c[k] * a[m - k - 1];
        }
        c[m] = acc;
    }
    c
}

pub struct PlpExtractor<T: Real> {
    spectrum: PowerSpectrum<T>,
    filterbank: Filterbank<T>,
    loudness: Vec<T>,
    /// cos(2 pi k m / M) for the inverse DFT of the mirrored auditory spectrum.
    idft: Vec<Vec<T>>,
    order: usize,
    rasta: bool,
}

impl<T: Real> PlpExtractor<T> {
    pub fn new(cfg: &PlpConfig, sample_rate: u32) -> Result<Self> {
        let filterbank = bark_filterbank(cfg.fft_size, sample_rate)?;
        let bands = filterbank.n_filters();
        if bands < 4 {
            return Err(Error::Config(format!(
                "only {bands} critical bands at {sample_rate} Hz"
            )));
        }
        if cfg.order == 0 || cfg.order >= 2 * (bands - 1) {
            return Err(Error::Config(format!(
                "PLP order {} must be in 1..{}",
                cfg.order,
                2 * (bands - 1)
            )));
        }
        let loudness = filterbank
            .filters
            .iter()
            .map(|f| T::lit(equal_loudness(f.center_hz)))
            .collect();
        let m = 2 * (bands - 1);
        let idft = (0..=cfg.order)
            .map(|k| {
                (0..m)
                    .map(|j| {
                        T::lit(
                            (2.0 * std::f64::consts::PI * (k * j) as f64 / m as f64).cos()
                                / m as f64,
                        )
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            spectrum: PowerSpectrum::new(cfg.fft_size),
            filterbank,
            loudness,
            idft,
            order: cfg.order,
            rasta: cfg.rasta,
        })
    }

    fn band_energies(&self, frames: &FrameMatrix<T>) -> Array2<T> {
        let bands = self.filterbank.n_filters();
        let mut out = Array2::zeros((frames.n_frames(), bands));
        let mut buf = Vec::new();
        let mut power = Vec::new();
        let mut frame = Vec::with_capacity(frames.frame_len());
        let mut row_out = vec![T::zero(); bands];
        for (t, row) in frames.frames.axis_iter(Axis(0)).enumerate() {
            frame.clear();
            frame.extend(row.iter().copied());
            self.spectrum.compute(&frame, &mut buf, &mut power);
            self.filterbank.apply_into(&power, &mut row_out);
            out.row_mut(t)
                .iter_mut()
                .zip(&row_out)
                .for_each(|(o, &v)| *o = v);
        }
        out
    }

    pub fn compute(&self, frames: &FrameMatrix<T>) -> Result<FeatureMatrix<T>> {
        if frames.frame_len() > self.spectrum.fft_size {
            return Err(Error::Config(format!(
                "frame length {} exceeds FFT size {}",
                frames.frame_len(),
                self.spectrum.fft_size
            )));
        }
        let mut bands = self.band_energies(frames);
        if self.rasta {
            bands.mapv_inplace(floored_ln);
            let (filtered, _) = rasta_filter(&bands);
            bands = filtered.mapv(T::exp);
        }
        let nb = self.filterbank.n_filters();
        let m = 2 * (nb - 1);
        let third = T::one() / T::lit(3.0);
        let mut out = Array2::zeros((frames.n_frames(), self.order + 1));
        let mut flagged = Vec::new();
        let mut aud = vec![T::zero(); nb];
        let mut mirrored = vec![T::zero(); m];
        for (t, row) in bands.axis_iter(Axis(0)).enumerate() {
            for (j, (&e, &l)) in row.iter().zip(&self.loudness).enumerate() {
                aud[j] = (e * l).powf(third);
            }
            // Edge bands lie outside the loudness curve's useful range.
            aud[0] = aud[1];
            aud[nb - 1] = aud[nb - 2];
            for j in 0..m {
                mirrored[j] = if j < nb { aud[j] } else { aud[m - j] };
            }
            let r: Vec<T> = self
                .idft
                .iter()
                .map(|basis| basis.iter().zip(&mirrored).map(|(&c, &x)| c * x).sum())
                .collect();
            match levinson_durbin(&r, self.order) {
                Ok(model) => {
                    if model.singular {
                        flagged.push(t);
                    }
                    let c = lpc_to_cepstrum(&model.coefficients, model.error, self.order);
                    out.row_mut(t).iter_mut().zip(&c).for_each(|(o, &v)| *o = v);
                }
                Err(Error::NonPositiveEnergy) => flagged.push(t),
                Err(e) => return Err(e),
            }
        }
        let mut spec = FrontendSpec {
            n_base: self.order + 1,
            ..FrontendSpec::new(BaseFeature::Plp)
        };
        if self.rasta {
            spec.normalizers.push(NormalizerSpec::Rasta);
        }
        let shift_ms = frames.shift as f64 * 1000.0 / f64::from(frames.sample_rate);
        Ok(FeatureMatrix::new(out, spec, Some(shift_ms))?.with_flagged(flagged))
    }
}

/// Perceptual linear prediction cepstra of windowed frames.
pub fn compute_plp<T: Real>(frames: &FrameMatrix<T>, cfg: &PlpConfig) -> Result<FeatureMatrix<T>> {
    PlpExtractor::new(cfg, frames.sample_rate)?.compute(frames)
}
