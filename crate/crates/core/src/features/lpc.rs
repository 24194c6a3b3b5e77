use ndarray::{Array2, Axis};

use super::{FeatureMatrix, FrontendSpec};
use crate::dsp::FrameMatrix;
use crate::error::{Error, Result};
use crate::features::BaseFeature;
use crate::scalar::Real;

/// All-pole model `s[n] ~ sum_i a_i s[n - i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpcModel<T> {
    /// `a_1..a_p`; entries past `effective_order` are zero.
    pub coefficients: Vec<T>,
    /// Final prediction error power (`gain^2`).
    pub error: T,
    pub gain: T,
    /// Reflection coefficients of the accepted stages.
    pub reflection: Vec<T>,
    pub effective_order: usize,
    /// The recursion hit a non-positive prediction error and stopped early.
    pub singular: bool,
}

impl<T: Real> LpcModel<T> {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }
}

/// Biased, unnormalized autocorrelation `r[k] = sum_n s[n] s[n + k]`, `k = 0..=max_lag`.
pub fn autocorrelation<T: Real>(frame: &[T], max_lag: usize) -> Result<Vec<T>> {
    if max_lag >= frame.len() {
        return Err(Error::LagTooLarge {
            lag: max_lag,
            len: frame.len(),
        });
    }
    Ok((0..=max_lag)
        .map(|k| {
            frame[..frame.len() - k]
                .iter()
                .zip(&frame[k..])
                .map(|(&a, &b)| a * b)
                .sum()
        })
        .collect())
}

/// Levinson-Durbin solution of the order-`p` autocorrelation normal equations.
pub fn levinson_durbin<T: Real>(r: &[T], p: usize) -> Result<LpcModel<T>> {
    if r.len() < p + 1 {
        return Err(Error::LengthMismatch {
            expected: p + 1,
            got: r.len(),
        });
    }
    if !(r[0] > T::zero()) {
        return Err(Error::NonPositiveEnergy);
    }
    let mut a = vec![T::zero(); p];
    let mut scratch = vec![T::zero(); p];
    let mut reflection = Vec::with_capacity(p);
    let mut err = r[0];
    let mut singular = false;
    for i in 0..p {
        let acc = r[i + 1] - (0..i).map(|j| a[j] * r[i - j]).sum::<T>();
        let k = acc / err;
        let next_err = err * (T::one() - k * k);
        if !(next_err > T::zero()) || !k.is_finite() {
            singular = true;
            break;
        }
        scratch[..i].copy_from_slice(&a[..i]);
        for j in 0..i {
            a[j] = scratch[j] - k * scratch[i - 1 - j];
        }
        a[i] = k;
        reflection.push(k);
        err = next_err;
    }
    let effective_order = reflection.len();
    Ok(LpcModel {
        coefficients: a,
        error: err,
        gain: err.sqrt(),
        reflection,
        effective_order,
        singular,
    })
}

/// Per-frame predictor coefficients `a_1..a_p`. Silent frames produce zero
/// vectors and are flagged, as are frames whose recursion stopped early.
pub fn compute_lpc<T: Real>(frames: &FrameMatrix<T>, p: usize) -> Result<FeatureMatrix<T>> {
    if p >= frames.frame_len() {
        return Err(Error::LagTooLarge {
            lag: p,
            len: frames.frame_len(),
        });
    }
    let mut out = Array2::zeros((frames.n_frames(), p));
    let mut flagged = Vec::new();
    for (t, row) in frames.frames.axis_iter(Axis(0)).enumerate() {
        let frame = row.to_vec();
        let r = autocorrelation(&frame, p)?;
        match levinson_durbin(&r, p) {
            Ok(m) => {
                if m.singular {
                    flagged.push(t);
                }
                out.row_mut(t)
                    .iter_mut()
                    .zip(&m.coefficients)
                    .for_each(|(o, &c)| *o = c);
            }
            Err(Error::NonPositiveEnergy) => flagged.push(t),
            Err(e) => return Err(e),
        }
    }
    let spec = FrontendSpec {
        n_base: p,
        ..FrontendSpec::new(BaseFeature::Lpc)
    };
    let shift_ms = frames.shift as f64 * 1000.0 / f64::from(frames.sample_rate);
    Ok(FeatureMatrix::new(out, spec, Some(shift_ms))?.with_flagged(flagged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Waveform;
    use crate::dsp::{frame_signal, PreprocessConfig};
    use nalgebra::{DMatrix, DVector};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn direct_autocorr(s: &[f64], lag: usize) -> Vec<f64> {
        let n = s.len();
        let mut r = vec![0.0; lag + 1];
        for k in 0..=lag {
            for i in 0..n {
                if i + k < n {
                    r[k] += s[i] * s[i + k];
                }
            }
        }
        r
    }

    fn toeplitz_solve(r: &[f64], p: usize) -> Vec<f64> {
        let m = DMatrix::from_fn(p, p, |i, j| {
            r[(i as i64 - j as i64).unsigned_abs() as usize]
        });
        let b = DVector::from_fn(p, |i, _| r[i + 1]);
        m.lu().solve(&b).unwrap().iter().copied().collect()
    }

    fn frames_of(s: Vec<f64>) -> FrameMatrix<f64> {
        let n = s.len();
        let cfg = PreprocessConfig {
            frame_len_ms: n as f64 / 16.0,
            frame_shift_ms: n as f64 / 16.0,
            ..Default::default()
        };
        frame_signal(&Waveform::new(s, 16000).unwrap(), &cfg).unwrap()
    }

    #[test]
    fn autocorrelation_examples() {
        let mut imp = vec![0.0; 16];
        imp[0] = 1.0;
        let r = autocorrelation(&imp, 5).unwrap();
        assert_eq!(r, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let r = autocorrelation(&[0.5f64; 10], 4).unwrap();
        for (k, v) in r.iter().enumerate() {
            assert!((v - 0.25 * (10 - k) as f64).abs() < 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = autocorrelation(&s, 31).unwrap();
        for (a, b) in r.iter().zip(direct_autocorr(&s, 31)) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!(matches!(
            autocorrelation(&s, 32),
            Err(Error::LagTooLarge { .. })
        ));
    }

    #[test]
    fn levinson_closed_forms() {
        let m = levinson_durbin(&[1.0f64, 0.0, 0.0], 2).unwrap();
        assert_eq!(m.coefficients, vec![0.0, 0.0]);
        assert_eq!(m.gain, 1.0);
        let m = levinson_durbin(&[1.0f64, 0.5], 1).unwrap();
        assert!((m.coefficients[0] - 0.5).abs() < 1e-15);
        assert!((m.error - 0.75).abs() < 1e-15);
        assert_eq!(m.reflection, vec![0.5]);
        assert!(matches!(
            levinson_durbin(&[0.0f64, 0.0], 1),
            Err(Error::NonPositiveEnergy)
        ));
        assert!(levinson_durbin(&[1.0f64], 2).is_err());
    }

    #[test]
    fn levinson_flags_singular_recursion() {
        // Perfectly predictable at order 1: error hits zero.
        let m = levinson_durbin(&[1.0f64, 1.0, 1.0, 1.0], 3).unwrap();
        assert!(m.singular);
        assert_eq!(m.effective_order, 0);
        assert_eq!(m.coefficients, vec![0.0; 3]);
    }

    #[test]
    fn levinson_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in [1usize, 2, 5, 8, 13, 20] {
            for _ in 0..5 {
                let s: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r = direct_autocorr(&s, p);
                let m = levinson_durbin(&r, p).unwrap();
                let oracle = toeplitz_solve(&r, p);
                let scale = oracle.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
                for (a, b) in m.coefficients.iter().zip(&oracle) {
                    assert!((a - b).abs() <= 1e-8 * scale.max(1.0), "p={p}");
                }
                // residual of the normal equations
                for i in 0..p {
                    let lhs: f64 = (0..p)
                        .map(|j| {
                            r[(i as i64 - j as i64).unsigned_abs() as usize] * m.coefficients[j]
                        })
                        .sum();
                    assert!((lhs - r[i + 1]).abs() <= 1e-8 * r[0]);
                }
                assert!(m.reflection.iter().all(|k| k.abs() <= 1.0));
            }
        }
    }

    #[test]
    fn white_noise_gives_small_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..4096).map(|_| StandardNormal.sample(&mut rng)).collect();
        let f = compute_lpc(&frames_of(s), 13).unwrap();
        assert_eq!(f.dim(), 13);
        let max = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max <= 0.1, "{max}");
    }

    #[test]
    fn recovers_ar2_process() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = vec![0.0f64; 1024 + 200];
        for n in 2..s.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            s[n] = 1.0 * s[n - 1] - 0.5 * s[n - 2] + e;
        }
        let f = compute_lpc(&frames_of(s[200..].to_vec()), 2).unwrap();
        let a = f.values().row(0).to_vec();
        assert!(
            (a[0] - 1.0).abs() < 0.05 && (a[1] + 0.5).abs() < 0.05,
            "{a:?}"
        );
    }

    #[test]
    fn silent_frame_is_flagged_zero() {
        let f = compute_lpc(&frames_of(vec![0.0; 256]), 13).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        assert_eq!(f.flagged_frames(), &[0]);
    }
}
