//! Pre-processing chain: energy endpoint detection, pre-emphasis, frame
//! blocking and Hamming windowing, applied in that order.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::corpus::Waveform;
use crate::error::{Error, Result};
use crate::scalar::{floored_ln, Real};
use crate::LOG_FLOOR;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VadConfig {
    /// Threshold below the loudest frame's log-energy, in dB.
    pub relative_floor_db: f64,
    pub min_speech_frames: usize,
    pub min_silence_frames: usize,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            relative_floor_db: 30.0,
            min_speech_frames: 5,
            min_silence_frames: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub pre_emphasis_alpha: f64,
    pub frame_len_ms: f64,
    pub frame_shift_ms: f64,
    /// Hamming shape parameter `a` in `(1 - a) - a cos(2 pi n / (N - 1))`.
    pub window_a: f64,
    pub vad: VadConfig,
    /// Allows `pre_emphasis_alpha` outside `[0.9, 1.0]`.
    pub allow_any_alpha: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            pre_emphasis_alpha: 0.95,
            frame_len_ms: 16.0,
            frame_shift_ms: 8.0,
            window_a: 0.46,
            vad: VadConfig::default(),
            allow_any_alpha: false,
        }
    }
}

/// On-disk key set of [`PreprocessConfig`].
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessKeys {
    pub pre_emphasis_alpha: f64,
    pub frame_ms: f64,
    pub shift_ms: f64,
    pub window_a: f64,
    pub vad_floor_db: f64,
    pub vad_min_speech: usize,
    pub vad_min_silence: usize,
    pub allow_any_alpha: bool,
}

impl Default for PreprocessKeys {
    fn default() -> Self {
        PreprocessConfig::default().into()
    }
}

impl From<PreprocessConfig> for PreprocessKeys {
    fn from(c: PreprocessConfig) -> Self {
        Self {
            pre_emphasis_alpha: c.pre_emphasis_alpha,
            frame_ms: c.frame_len_ms,
            shift_ms: c.frame_shift_ms,
            window_a: c.window_a,
            vad_floor_db: c.vad.relative_floor_db,
            vad_min_speech: c.vad.min_speech_frames,
            vad_min_silence: c.vad.min_silence_frames,
            allow_any_alpha: c.allow_any_alpha,
        }
    }
}

impl TryFrom<PreprocessKeys> for PreprocessConfig {
    type Error = Error;

    fn try_from(k: PreprocessKeys) -> Result<Self> {
        let cfg = Self {
            pre_emphasis_alpha: k.pre_emphasis_alpha,
            frame_len_ms: k.frame_ms,
            frame_shift_ms: k.shift_ms,
            window_a: k.window_a,
            vad: VadConfig {
                relative_floor_db: k.vad_floor_db,
                min_speech_frames: k.vad_min_speech,
                min_silence_frames: k.vad_min_silence,
            },
            allow_any_alpha: k.allow_any_alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let a = self.pre_emphasis_alpha;
        if !a.is_finite() || (!self.allow_any_alpha && !(0.9..=1.0).contains(&a)) {
            return Err(Error::Config(format!(
                "pre_emphasis_alpha {a} outside [0.9, 1.0] (set allow_any_alpha to override)"
            )));
        }
        if !(self.frame_len_ms > 0.0)
            || !(self.frame_shift_ms > 0.0)
            || self.frame_shift_ms > self.frame_len_ms
        {
            return Err(Error::Config(format!(
                "need 0 < shift ({}) <= frame length ({})",
                self.frame_shift_ms, self.frame_len_ms
            )));
        }
        if !(0.0..=0.5).contains(&self.window_a) {
            return Err(Error::Config(format!(
                "window_a {} outside [0, 0.5]",
                self.window_a
            )));
        }
        if !(self.vad.relative_floor_db > 0.0)
            || self.vad.min_speech_frames == 0
            || self.vad.min_silence_frames == 0
        {
            return Err(Error::Config(
                "VAD floor must be positive and frame counts at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Frame length and shift in samples at `rate`.
    pub fn frame_geometry(&self, rate: u32) -> Result<(usize, usize)> {
        let n = (self.frame_len_ms * f64::from(rate) / 1000.0).round() as usize;
        let shift = (self.frame_shift_ms * f64::from(rate) / 1000.0).round() as usize;
        if n < 2 || shift == 0 {
            return Err(Error::Config(format!(
                "frame of {n} samples / shift of {shift} samples at {rate} Hz"
            )));
        }
        Ok((n, shift))
    }
}

/// `T x N` block of frames cut from one signal.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMatrix<T> {
    pub frames: Array2<T>,
    pub sample_rate: u32,
    pub shift: usize,
}

impl<T: Real> FrameMatrix<T> {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn frame_len(&self) -> usize {
        self.frames.ncols()
    }
}

/// `y[n] = x[n] - alpha * x[n-1]` with `x[-1] = 0`.
pub fn pre_emphasize<T: Real>(x: &Waveform<T>, alpha: T) -> Result<Waveform<T>> {
    if !alpha.is_finite() {
        return Err(Error::InvalidParam(
            "pre-emphasis coefficient must be finite".into(),
        ));
    }
    let s = x.samples();
    let mut prev = T::zero();
    let out = s
        .iter()
        .map(|&v| {
            let y = v - alpha * prev;
            prev = v;
            y
        })
        .collect();
    Waveform::new(out, x.sample_rate())
}

/// Number of whole frames of `n` samples at hop `shift` in `len` samples.
pub fn frame_count(len: usize, n: usize, shift: usize) -> usize {
    if len < n {
        0
    } else {
        (len - n) / shift + 1
    }
}

fn frame_energies<T: Real>(s: &[T], n: usize, shift: usize) -> Vec<f64> {
    (0..frame_count(s.len(), n, shift))
        .map(|t| {
            s[t * shift..t * shift + n]
                .iter()
                .map(|v| {
                    let v = v.as_f64();
                    v * v
                })
                .sum()
        })
        .collect()
}

/// Speech spans, as half-open sample ranges, from frame log-energies of the raw signal.
///
/// Frames within `relative_floor_db` of the loudest frame are speech. Runs
/// shorter than `min_speech_frames` are dropped, then gaps shorter than
/// `min_silence_frames` between remaining runs are bridged. A signal whose
/// loudest frame carries no energy above the log floor has no speech.
pub fn detect_endpoints<T: Real>(
    x: &Waveform<T>,
    cfg: &PreprocessConfig,
) -> Result<Vec<(usize, usize)>> {
    if x.is_empty() {
        return Err(Error::EmptySignal);
    }
    cfg.validate()?;
    let (n, shift) = cfg.frame_geometry(x.sample_rate())?;
    let len = x.len();
    let (n, shift) = if len < n { (len, len) } else { (n, shift) };
    let energy = frame_energies(x.samples(), n, shift);
    let max_energy = energy.iter().copied().fold(0.0f64, f64::max);
    if max_energy <= LOG_FLOOR {
        return Ok(Vec::new());
    }
    let threshold = max_energy.ln() - cfg.vad.relative_floor_db / 10.0 * std::f64::consts::LN_10;
    let mask: Vec<bool> = energy.iter().map(|&e| floored_ln(e) > threshold).collect();

    let mut runs: Vec<(usize, usize)> = Vec::new(); // inclusive frame ranges
    let mut t = 0;
    while t < mask.len() {
        if mask[t] {
            let start = t;
            while t < mask.len() && mask[t] {
                t += 1;
            }
            if t - start >= cfg.vad.min_speech_frames {
                runs.push((start, t - 1));
            }
        } else {
            t += 1;
        }
    }
    let mut bridged: Vec<(usize, usize)> = Vec::with_capacity(runs.len());
    for run in runs {
        match bridged.last_mut() {
            Some(last) if run.0 - last.1 - 1 < cfg.vad.min_silence_frames => last.1 = run.1,
            _ => bridged.push(run),
        }
    }
    let mut spans: Vec<(usize, usize)> = Vec::with_capacity(bridged.len());
    for (a, b) in bridged {
        let (start, end) = (a * shift, (b * shift + n).min(len));
        match spans.last_mut() {
            Some(last) if start <= last.1 => last.1 = last.1.max(end),
            _ => spans.push((start, end)),
        }
    }
    Ok(spans)
}

/// Cuts whole frames; a trailing partial frame is discarded.
pub fn frame_signal<T: Real>(x: &Waveform<T>, cfg: &PreprocessConfig) -> Result<FrameMatrix<T>> {
    let (n, shift) = cfg.frame_geometry(x.sample_rate())?;
    let s = x.samples();
    if s.len() < n {
        return Err(Error::SignalTooShort {
            len: s.len(),
            frame: n,
        });
    }
    let t = frame_count(s.len(), n, shift);
    let frames = Array2::from_shape_fn((t, n), |(i, j)| s[i * shift + j]);
    Ok(FrameMatrix {
        frames,
        sample_rate: x.sample_rate(),
        shift,
    })
}

/// Symmetric generalized Hamming window of length `n`.
pub fn hamming_window<T: Real>(n: usize, a: T) -> Result<Vec<T>> {
    if n < 2 {
        return Err(Error::InvalidParam(format!("window length {n} < 2")));
    }
    let denom = T::from_count(n - 1);
    let two_pi = T::lit(2.0) * T::PI();
    Ok((0..n)
        .map(|i| (T::one() - a) - a * (two_pi * T::from_count(i) / denom).cos())
        .collect())
}

pub fn apply_window<T: Real>(frames: &FrameMatrix<T>, w: &[T]) -> Result<FrameMatrix<T>> {
    if w.len() != frames.frame_len() {
        return Err(Error::LengthMismatch {
            expected: frames.frame_len(),
            got: w.len(),
        });
    }
    let mut out = frames.clone();
    for mut row in out.frames.axis_iter_mut(Axis(0)) {
        row.iter_mut().zip(w).for_each(|(s, &c)| *s *= c);
    }
    Ok(out)
}

/// `ln(max(sum s^2, 1e-10))` per frame.
pub fn frame_log_energy<T: Real>(frames: &FrameMatrix<T>) -> Vec<T> {
    frames
        .frames
        .axis_iter(Axis(0))
        .map(|row| floored_ln(row.iter().map(|&v| v * v).sum::<T>()))
        .collect()
}

/// Runs endpoint detection, pre-emphasis, framing and windowing.
///
/// Only samples inside detected speech spans are kept; a signal with no
/// detected speech is processed whole.
pub fn preprocess<T: Real>(x: &Waveform<T>, cfg: &PreprocessConfig) -> Result<FrameMatrix<T>> {
    cfg.validate()?;
    let spans = detect_endpoints(x, cfg)?;
    let speech = if spans.is_empty() {
        log::debug!("no speech detected; keeping all {} samples", x.len());
        x.clone()
    } else {
        x.select(&spans)?
    };
    let emphasized = pre_emphasize(&speech, T::lit(cfg.pre_emphasis_alpha))?;
    let frames = frame_signal(&emphasized, cfg)?;
    let w = hamming_window(frames.frame_len(), T::lit(cfg.window_a))?;
    apply_window(&frames, &w)
}
