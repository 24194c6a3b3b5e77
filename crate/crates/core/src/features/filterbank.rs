use crate::error::{Error, Result};
use crate::scalar::Real;

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// `6 asinh(f / 600)`.
pub fn hz_to_bark(f: f64) -> f64 {
    6.0 * (f / 600.0).asinh()
}

/// Nonnegative weights over a contiguous run of FFT bins.
#[derive(Clone, Debug, PartialEq)]
pub struct BandFilter<T> {
    pub start: usize,
    pub weights: Vec<T>,
    pub center_hz: f64,
}

impl<T: Real> BandFilter<T> {
    #[inline]
    pub fn apply(&self, power: &[T]) -> T {
        power[self.start..self.start + self.weights.len()]
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| p * w)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Filterbank<T> {
    pub filters: Vec<BandFilter<T>>,
    pub fft_size: usize,
}

impl<T: Real> Filterbank<T> {
    pub fn n_filters(&self) -> usize {
        self.filters.len()
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn apply_into(&self, power: &[T], out: &mut [T]) {
        for (o, f) in out.iter_mut().zip(&self.filters) {
            *o = f.apply(power);
        }
    }

    /// Dense `n_filters x n_bins` view, mostly for inspection and tests.
    pub fn dense(&self) -> Vec<Vec<T>> {
        self.filters
            .iter()
            .map(|f| {
                let mut row = vec![T::zero(); self.n_bins()];
                row[f.start..f.start + f.weights.len()].copy_from_slice(&f.weights);
                row
            })
            .collect()
    }
}

fn from_response<T: Real>(
    fft_size: usize,
    sample_rate: u32,
    centers_hz: Vec<f64>,
    response: impl Fn(usize, f64) -> f64,
) -> Result<Filterbank<T>> {
    let n_bins = fft_size / 2 + 1;
    let bin_hz = f64::from(sample_rate) / fft_size as f64;
    let mut filters = Vec::with_capacity(centers_hz.len());
    for (j, &center_hz) in centers_hz.iter().enumerate() {
        let w: Vec<f64> = (0..n_bins)
            .map(|b| response(j, b as f64 * bin_hz).max(0.0))
            .collect();
        let start = w.iter().position(|&v| v > 0.0).ok_or_else(|| {
            Error::Config(format!(
                "filter {j} at {center_hz:.1} Hz covers no FFT bin; use a larger FFT"
            ))
        })?;
        let end = w.iter().rposition(|&v| v > 0.0).unwrap() + 1;
        filters.push(BandFilter {
            start,
            weights: w[start..end].iter().map(|&v| T::lit(v)).collect(),
            center_hz,
        });
    }
    Ok(Filterbank { filters, fft_size })
}

/// Triangular filters equally spaced on the mel scale between `f_low` and `f_high`.
pub fn mel_filterbank<T: Real>(
    n_filters: usize,
    fft_size: usize,
    sample_rate: u32,
    f_low: f64,
    f_high: f64,
) -> Result<Filterbank<T>> {
    if n_filters == 0 || !(f_low >= 0.0 && f_high > f_low && f_high <= f64::from(sample_rate) / 2.0)
    {
        return Err(Error::Config(format!(
            "mel filterbank: {n_filters} filters over [{f_low}, {f_high}] Hz at {sample_rate} Hz"
        )));
    }
    let (m_lo, m_hi) = (hz_to_mel(f_low), hz_to_mel(f_high));
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n_filters + 1) as f64))
        .collect();
    from_response(
        fft_size,
        sample_rate,
        edges[1..=n_filters].to_vec(),
        |j, f| {
            let (lo, c, hi) = (edges[j], edges[j + 1], edges[j + 2]);
            if f <= lo || f >= hi {
                0.0
            } else if f <= c {
                (f - lo) / (c - lo)
            } else {
                (hi - f) / (hi - c)
            }
        },
    )
}

/// Critical-band masking curve over a Bark offset from the band center.
fn critical_band(offset: f64) -> f64 {
    if !(-1.3..=2.5).contains(&offset) {
        0.0
    } else if offset <= -0.5 {
        10f64.powf(2.5 * (offset + 0.5))
    } else if offset < 0.5 {
        1.0
    } else {
        10f64.powf(-(offset - 0.5))
    }
}

/// One trapezoidal critical-band filter per Bark from 0 up to the first
/// whole Bark at or above Nyquist.
pub fn bark_filterbank<T: Real>(fft_size: usize, sample_rate: u32) -> Result<Filterbank<T>> {
    let top = hz_to_bark(f64::from(sample_rate) / 2.0).ceil() as usize;
    let centers_bark: Vec<f64> = (0..=top).map(|b| b as f64).collect();
    let centers_hz = centers_bark
        .iter()
        .map(|&b| 600.0 * (b / 6.0).sinh())
        .collect();
    from_response(fft_size, sample_rate, centers_hz, |j, f| {
        critical_band(hz_to_bark(f) - centers_bark[j])
    })
}
