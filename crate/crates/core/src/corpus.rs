//! Audio ingestion: 16-bit PCM WAV I/O, the synthetic speaker corpus, and
//! per-speaker train/test splitting.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::binio;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Divisor mapping 16-bit PCM codes onto `[-1, 1)`.
pub const PCM_SCALE: f64 = 32768.0;

/// Mono sampled signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Real> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidParam("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::EmptySignal);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParam(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    /// Same-rate waveform built from the given sample ranges, concatenated.
    pub fn select(&self, spans: &[(usize, usize)]) -> Result<Self> {
        let mut out = Vec::new();
        for &(a, b) in spans {
            out.extend_from_slice(&self.samples[a.min(self.len())..b.min(self.len())]);
        }
        Self::new(out, self.sample_rate)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance<T> {
    pub speaker: String,
    pub id: String,
    pub waveform: Waveform<T>,
}

/// Labelled utterances sharing one sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus<T> {
    utterances: Vec<Utterance<T>>,
}

impl<T: Real> Corpus<T> {
    pub fn new(utterances: Vec<Utterance<T>>) -> Result<Self> {
        if let Some(first) = utterances.first() {
            let rate = first.waveform.sample_rate();
            if let Some(u) = utterances.iter().find(|u| u.waveform.sample_rate() != rate) {
                return Err(Error::InvalidParam(format!(
                    "utterance {}/{} has sample rate {}, corpus uses {rate}",
                    u.speaker,
                    u.id,
                    u.waveform.sample_rate()
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for u in &utterances {
            if !seen.insert((u.speaker.as_str(), u.id.as_str())) {
                return Err(Error::InvalidParam(format!(
                    "duplicate utterance {}/{}",
                    u.speaker, u.id
                )));
            }
        }
        Ok(Self { utterances })
    }

    pub fn utterances(&self) -> &[Utterance<T>] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn sample_rate(&self) -> Option<u32> {
        self.utterances.first().map(|u| u.waveform.sample_rate())
    }

    /// Speaker labels in sorted order.
    pub fn speakers(&self) -> Vec<String> {
        let mut s: Vec<String> = self.utterances.iter().map(|u| u.speaker.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    fn by_speaker(&self) -> BTreeMap<&str, Vec<&Utterance<T>>> {
        let mut map: BTreeMap<&str, Vec<&Utterance<T>>> = BTreeMap::new();
        for u in &self.utterances {
            map.entry(u.speaker.as_str()).or_default().push(u);
        }
        map
    }
}

// ---------------------------------------------------------------------------
// WAV

/// Reads a RIFF/WAVE file holding mono 16-bit PCM.
pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<Waveform<T>> {
    let bytes = binio::read_file(path.as_ref())?;
    decode_wav(&bytes)
}

pub fn decode_wav<T: Real>(bytes: &[u8]) -> Result<Waveform<T>> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::NotWav("missing RIFF/WAVE header".into()));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(Error::Truncated("fmt chunk".into()));
                }
                let b = &bytes[body..body + 16];
                let tag = u16::from_le_bytes([b[0], b[1]]);
                let channels = u16::from_le_bytes([b[2], b[3]]);
                let rate = u32::from_le_bytes([b[4], b[5], b[6], b[7]]);
                let bits = u16::from_le_bytes([b[14], b[15]]);
                format = Some((tag, channels, rate, bits));
            }
            b"data" => {
                let (tag, channels, rate, bits) =
                    format.ok_or_else(|| Error::NotWav("data chunk before fmt chunk".into()))?;
                if tag != 1 {
                    return Err(Error::UnsupportedEncoding(format!(
                        "format tag {tag}, PCM (1) required"
                    )));
                }
                if channels != 1 {
                    return Err(Error::UnsupportedEncoding(format!(
                        "{channels} channels, mono required"
                    )));
                }
                if bits != 16 {
                    return Err(Error::UnsupportedEncoding(format!(
                        "{bits}-bit samples, 16-bit required"
                    )));
                }
                if body + size > bytes.len() || size % 2 != 0 {
                    return Err(Error::Truncated(format!(
                        "data chunk declares {size} bytes, {} present",
                        bytes.len().saturating_sub(body)
                    )));
                }
                let scale = T::lit(PCM_SCALE);
                let samples = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|c| T::lit(f64::from(i16::from_le_bytes([c[0], c[1]]))) / scale)
                    .collect();
                return Waveform::new(samples, rate);
            }
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body + size + (size & 1);
    }
    match format {
        None => Err(Error::NotWav("no fmt chunk".into())),
        Some(_) => Err(Error::Truncated("no data chunk".into())),
    }
}

/// Encodes as mono 16-bit PCM; samples are scaled by 32768, rounded and clipped.
pub fn encode_wav<T: Real>(w: &Waveform<T>) -> Vec<u8> {
    let n = w.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate().to_le_bytes());
    out.extend_from_slice(&(w.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in w.samples() {
        let code = (s.as_f64() * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&code.to_le_bytes());
    }
    out
}

pub fn write_wav<T: Real>(path: impl AsRef<Path>, w: &Waveform<T>) -> Result<()> {
    binio::write_file(path.as_ref(), &encode_wav(w))
}

/// Loads `<root>/<speaker_id>/<utterance_id>.wav`, sorted by speaker then utterance.
pub fn load_corpus_dir<T: Real>(root: impl AsRef<Path>) -> Result<Corpus<T>> {
    let root = root.as_ref();
    let mut utterances = Vec::new();
    for spk_dir in sorted_entries(root)? {
        if !spk_dir.is_dir() {
            continue;
        }
        let speaker = file_name(&spk_dir);
        for file in sorted_entries(&spk_dir)? {
            if file.extension().and_then(|e| e.to_str()) != Some("wav") {
                continue;
            }
            let id = file_stem(&file);
            let waveform = read_wav(&file)?;
            utterances.push(Utterance {
                speaker: speaker.clone(),
                id,
                waveform,
            });
        }
    }
    if utterances.is_empty() {
        return Err(Error::InvalidParam(format!(
            "no WAV files under {}",
            root.display()
        )));
    }
    Corpus::new(utterances)
}

pub fn save_corpus_dir<T: Real>(root: impl AsRef<Path>, corpus: &Corpus<T>) -> Result<()> {
    for u in corpus.utterances() {
        let path = root.as_ref().join(&u.speaker).join(format!("{}.wav", u.id));
        write_wav(path, &u.waveform)?;
    }
    Ok(())
}

pub(crate) fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

pub(crate) fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub(crate) fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Synthetic corpus

/// Parameters of the synthetic multi-speaker corpus.
#[derive(Clone, Debug, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub seed: u64,
    pub speakers: usize,
    pub utterances: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 42,
            speakers: 14,
            utterances: 10,
            duration_s: 2.0,
            sample_rate: 16000,
        }
    }
}

const FORMANT_BASE_HZ: [f64; 3] = [300.0, 1000.0, 2200.0];
const FORMANT_SLOT_HZ: f64 = 180.0;
const FORMANT_JITTER_HZ: f64 = 15.0;
const SNR_DB: f64 = 35.0;

/// Per-speaker source-filter parameters.
#[derive(Clone, Debug)]
struct Voice {
    f0: f64,
    formants: [f64; 3],
    bandwidths: [f64; 3],
    gains: [f64; 3],
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

fn draw_voices(seed: u64, n: usize, sample_rate: u32) -> Vec<Voice> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x766f_6963, 0));
    let nyq_limit = 0.45 * f64::from(sample_rate);
    // Each formant gets a shuffled slot grid so any two speakers differ by at
    // least FORMANT_SLOT_HZ - 2 * FORMANT_JITTER_HZ in every formant.
    let slots: Vec<Vec<usize>> = (0..3)
        .map(|_| {
            let mut s: Vec<usize> = (0..n).collect();
            s.shuffle(&mut rng);
            s
        })
        .collect();
    (0..n)
        .map(|spk| {
            let mut formants = [0.0; 3];
            for j in 0..3 {
                let mut f = FORMANT_BASE_HZ[j]
                    + FORMANT_SLOT_HZ * slots[j][spk] as f64
                    + rng.random_range(-FORMANT_JITTER_HZ..FORMANT_JITTER_HZ);
                if f > nyq_limit {
                    f = 200.0 + (f - 200.0) % (nyq_limit - 200.0);
                }
                formants[j] = f;
            }
            let f0 = rng.random_range(160.0..260.0);
            let bandwidths = [
                80.0 * rng.random_range(0.8..1.2),
                100.0 * rng.random_range(0.8..1.2),
                140.0 * rng.random_range(0.8..1.2),
            ];
            let gains = [
                1.0,
                0.6 * rng.random_range(0.7..1.3),
                0.3 * rng.random_range(0.7..1.3),
            ];
            Voice {
                f0,
                formants,
                bandwidths,
                gains,
            }
        })
        .collect()
}

fn render_utterance(voice: &Voice, rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Vec<f64> {
    // Excitation: impulse trains in voiced segments separated by short pauses.
    let mut excitation = vec![0.0f64; n];
    let lead = (rng.random_range(0.08..0.16) * fs) as usize;
    let tail = (rng.random_range(0.08..0.16) * fs) as usize;
    let end = n.saturating_sub(tail);
    let ramp = (0.01 * fs) as usize;
    let mut pos = lead;
    while pos < end {
        let seg_len = ((rng.random_range(0.15..0.4) * fs) as usize).min(end - pos);
        let gain = rng.random_range(0.5..1.0);
        let slope = rng.random_range(-0.08..0.08);
        let f0 = voice.f0 * rng.random_range(0.95..1.05);
        let mut t = rng.random_range(0.0..fs / f0);
        while (t as usize) < seg_len {
            let i = t as usize;
            let env = (i.min(seg_len - 1 - i) as f64 / ramp.max(1) as f64).min(1.0);
            excitation[pos + i] += gain * env;
            let local_f0 = f0 * (1.0 + slope * i as f64 / seg_len as f64);
            t += fs / local_f0 * (1.0 + rng.random_range(-0.01..0.01));
        }
        pos += seg_len + (rng.random_range(0.03..0.07) * fs) as usize;
    }

    // Parallel two-pole resonators.
    let mut voiced = vec![0.0f64; n];
    for j in 0..3 {
        let f = voice.formants[j] * rng.random_range(0.99..1.01);
        let r = (-std::f64::consts::PI * voice.bandwidths[j] / fs).exp();
        let c1 = 2.0 * r * (2.0 * std::f64::consts::PI * f / fs).cos();
        let c2 = -r * r;
        let g = voice.gains[j] * (1.0 - r);
        let (mut y1, mut y2) = (0.0, 0.0);
        for (out, &x) in voiced.iter_mut().zip(&excitation) {
            let y = g * x + c1 * y1 + c2 * y2;
            *out += y;
            y2 = y1;
            y1 = y;
        }
    }

    let peak = voiced.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let level = rng.random_range(0.3..0.6);
    if peak > 0.0 {
        voiced.iter_mut().for_each(|v| *v *= level / peak);
    }
    let active: Vec<f64> = voiced.iter().copied().filter(|v| v.abs() > 1e-6).collect();
    let rms = if active.is_empty() {
        level
    } else {
        (active.iter().map(|v| v * v).sum::<f64>() / active.len() as f64).sqrt()
    };
    let noise_std = rms * 10f64.powf(-SNR_DB / 20.0);
    for v in &mut voiced {
        let z: f64 = StandardNormal.sample(rng);
        *v = (*v + noise_std * z).clamp(-1.0, 1.0);
    }
    voiced
}

/// Deterministic multi-speaker corpus of synthetic voiced speech.
///
/// Every speaker owns a fundamental frequency and three formant resonances;
/// utterances vary pitch contour, segment timing, formant detail and level.
/// Identical parameters give bit-identical output.
pub fn synthesize_corpus<T: Real>(params: &SynthParams) -> Result<Corpus<T>> {
    if params.speakers < 2 {
        return Err(Error::InvalidParam("at least 2 speakers required".into()));
    }
    if params.utterances == 0 {
        return Err(Error::InvalidParam(
            "utterance count must be positive".into(),
        ));
    }
    if !(params.duration_s > 0.0 && params.duration_s.is_finite()) {
        return Err(Error::InvalidParam("duration must be positive".into()));
    }
    if params.sample_rate == 0 {
        return Err(Error::InvalidParam("sample rate must be positive".into()));
    }
    let fs = f64::from(params.sample_rate);
    let n = (params.duration_s * fs).round().max(1.0) as usize;
    let voices = draw_voices(params.seed, params.speakers, params.sample_rate);
    let width = params
        .speakers
        .max(params.utterances)
        .to_string()
        .len()
        .max(2);
    let mut utterances = Vec::with_capacity(params.speakers * params.utterances);
    for (s, voice) in voices.iter().enumerate() {
        for u in 0..params.utterances {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(params.seed, s as u64 + 1, u as u64 + 1));
            let samples = render_utterance(voice, &mut rng, n, fs)
                .into_iter()
                .map(T::lit)
                .collect();
            utterances.push(Utterance {
                speaker: format!("spk{s:0width$}"),
                id: format!("utt{u:0width$}"),
                waveform: Waveform::new(samples, params.sample_rate)?,
            });
        }
    }
    Corpus::new(utterances)
}

// ---------------------------------------------------------------------------
// Split

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            n_train: 8,
            n_test: 2,
        }
    }
}

/// Per speaker, a seeded permutation puts the first `n_train` utterances in
/// train and the next `n_test` in test.
pub fn split_train_test<T: Real>(
    corpus: &Corpus<T>,
    spec: SplitSpec,
    seed: u64,
) -> Result<(Corpus<T>, Corpus<T>)> {
    if spec.n_train == 0 || spec.n_test == 0 {
        return Err(Error::InvalidParam(
            "n_train and n_test must be at least 1".into(),
        ));
    }
    let needed = spec.n_train + spec.n_test;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (spk_index, (speaker, mut utts)) in corpus.by_speaker().into_iter().enumerate() {
        if utts.len() < needed {
            return Err(Error::InsufficientUtterances {
                speaker: speaker.to_string(),
                available: utts.len(),
                needed,
            });
        }
        utts.sort_by(|a, b| a.id.cmp(&b.id));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7370_6c69, spk_index as u64));
        utts.shuffle(&mut rng);
        train.extend(utts[..spec.n_train].iter().map(|u| (*u).clone()));
        test.extend(utts[spec.n_train..needed].iter().map(|u| (*u).clone()));
    }
    Ok((Corpus::new(train)?, Corpus::new(test)?))
}
