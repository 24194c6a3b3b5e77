//! Per-utterance feature normalizers: mean subtraction, variance
//! normalization, RASTA band-pass filtering, feature warping and short-time
//! Gaussianization.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scalar::Real;

pub const DEFAULT_WARP_WINDOW: usize = 301;
pub const DEFAULT_GAUSSIANIZE_ITERS: usize = 1;
const EIGEN_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormalizerSpec {
    Cms,
    Cvn,
    /// Applied inside PLP on log critical-band energies.
    Rasta,
    Warp {
        window: usize,
    },
    Gaussianize {
        iters: usize,
    },
}

impl NormalizerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NormalizerSpec::Warp { window } if window < 3 || window % 2 == 0 => Err(Error::Config(
                format!("warp window {window} must be odd and >= 3"),
            )),
            NormalizerSpec::Gaussianize { iters: 0 } => {
                Err(Error::Config("gaussianize needs >= 1 iteration".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for NormalizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NormalizerSpec::Cms => f.write_str("cms"),
            NormalizerSpec::Cvn => f.write_str("cvn"),
            NormalizerSpec::Rasta => f.write_str("rasta"),
            NormalizerSpec::Warp { window } if window == DEFAULT_WARP_WINDOW => f.write_str("warp"),
            NormalizerSpec::Warp { window } => write!(f, "warp:{window}"),
            NormalizerSpec::Gaussianize { iters } if iters == DEFAULT_GAUSSIANIZE_ITERS => {
                f.write_str("gauss")
            }
            NormalizerSpec::Gaussianize { iters } => write!(f, "gauss:{iters}"),
        }
    }
}

impl FromStr for NormalizerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |default: usize| -> Result<usize> {
            arg.map_or(Ok(default), |a| {
                a.parse()
                    .map_err(|_| Error::Config(format!("bad number in normalizer {s:?}")))
            })
        };
        let spec = match (name, arg) {
            ("cms", None) => NormalizerSpec::Cms,
            ("cvn", None) => NormalizerSpec::Cvn,
            ("rasta", None) => NormalizerSpec::Rasta,
            ("warp", _) => NormalizerSpec::Warp {
                window: num(DEFAULT_WARP_WINDOW)?,
            },
            ("gauss" | "gaussianize", _) => NormalizerSpec::Gaussianize {
                iters: num(DEFAULT_GAUSSIANIZE_ITERS)?,
            },
            _ => return Err(Error::Config(format!("unknown front-end token {s:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn column_means<T: Real>(x: &Array2<T>) -> Vec<T> {
    let n = T::from_count(x.nrows());
    x.axis_iter(Axis(1))
        .map(|c| c.iter().copied().sum::<T>() / n)
        .collect()
}

/// Subtracts the utterance mean from every dimension.
pub fn cms<T: Real>(f: &FeatureMatrix<T>) -> FeatureMatrix<T> {
    let mut v = f.values().clone();
    let means = column_means(&v);
    for mut row in v.axis_iter_mut(Axis(0)) {
        row.iter_mut().zip(&means).for_each(|(x, &m)| *x -= m);
    }
    f.replace_values(v, Some(NormalizerSpec::Cms))
        .expect("shape preserved")
}

/// Mean and variance normalization with the population standard deviation.
/// Constant dimensions map to zero.
pub fn cvn<T: Real>(f: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
    let t = f.n_frames();
    if t < 2 {
        return Err(Error::TooFewFrames {
            frames: t,
            needed: 2,
        });
    }
    let mut v = f.values().clone();
    let means = column_means(&v);
    let n = T::from_count(t);
    let scales: Vec<T> = v
        .axis_iter(Axis(1))
        .zip(&means)
        .map(|(c, &m)| {
            let sd = (c.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n).sqrt();
            if sd <= T::lit(1e-12) * m.abs().max(T::one()) {
                T::zero()
            } else {
                T::one() / sd
            }
        })
        .collect();
    for mut row in v.axis_iter_mut(Axis(0)) {
        for ((x, &m), &s) in row.iter_mut().zip(&means).zip(&scales) {
            *x = (*x - m) * s;
        }
    }
    f.replace_values(v, Some(NormalizerSpec::Cvn))
}

/// RASTA band-pass along time for each column:
/// `H(z) = 0.1 (2 + z^-1 - z^-3 - 2 z^-4) / (1 - 0.98 z^-1)`, zero initial state.
///
/// Fewer than 5 frames pass through unchanged; the flag reports it.
pub fn rasta_filter<T: Real>(x: &Array2<T>) -> (Array2<T>, bool) {
    let t = x.nrows();
    if t < 5 {
        log::warn!("rasta: {t} frames is too few, passing through");
        return (x.clone(), true);
    }
    let num = [
        T::lit(0.2),
        T::lit(0.1),
        T::zero(),
        T::lit(-0.1),
        T::lit(-0.2),
    ];
    let pole = T::lit(0.98);
    let mut out = Array2::zeros(x.dim());
    for b in 0..x.ncols() {
        let mut prev = T::zero();
        for i in 0..t {
            let mut acc = pole * prev;
            for (k, &c) in num.iter().enumerate() {
                if i >= k {
                    acc += c * x[[i - k, b]];
                }
            }
            out[[i, b]] = acc;
            prev = acc;
        }
    }
    (out, false)
}

/// Standard normal quantile (Wichura's AS241, about 1e-16 relative accuracy).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
                + 6.726_577_092_700_87e4)
                * r
                + 4.592_195_393_154_987e4)
                * r
                + 1.373_169_376_550_946e4)
                * r
                + 1.971_590_950_306_551_3e3)
                * r
                + 1.331_416_678_917_843_8e2)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
                + 3.930_789_580_009_271e4)
                * r
                + 2.121_379_430_158_659_7e4)
                * r
                + 5.394_196_021_424_751e3)
                * r
                + 6.871_870_074_920_579e2)
                * r
                + 4.231_333_070_160_091e1)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                + 1.519_866_656_361_645_7e-2)
                * r
                + 1.481_039_764_274_800_8e-1)
                * r
                + 6.897_673_349_851e-1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_445_9e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 1.487_536_129_085_061_5e-2)
                * r
                + 1.369_298_809_227_358e-1)
                * r
                + 5.998_322_065_558_88e-1)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// `Phi^-1((r - 0.5) / w)` for ranks `r = 1..=w`.
pub fn warp_targets(w: usize) -> Vec<f64> {
    (1..=w)
        .map(|r| normal_quantile((r as f64 - 0.5) / w as f64))
        .collect()
}

/// Rank of `col[t]` (1-based) among `col[lo..lo + w]`, ties broken by index.
#[inline]
fn rank_in<T: Real>(col: &[T], t: usize, lo: usize, w: usize) -> usize {
    let v = col[t];
    1 + col[lo..lo + w]
        .iter()
        .enumerate()
        .filter(|&(j, &x)| x < v || (x == v && lo + j < t))
        .count()
}

fn warp_columns<T: Real>(x: &Array2<T>, w: usize, targets: &[T]) -> Array2<T> {
    let t = x.nrows();
    let mut out = Array2::zeros(x.dim());
    let half = w / 2;
    for (j, c) in x.axis_iter(Axis(1)).enumerate() {
        let col = c.to_vec();
        for i in 0..t {
            let lo = i.saturating_sub(half).min(t - w);
            out[[i, j]] = targets[rank_in(&col, i, lo, w) - 1];
        }
    }
    out
}

/// Sliding-window rank mapping of every dimension onto a standard normal.
///
/// The window of size `window` is centered where possible and shifted to
/// stay inside the utterance at the edges. Utterances shorter than the window
/// use the largest odd window that fits; the flag reports the shrink.
pub fn feature_warp<T: Real>(
    f: &FeatureMatrix<T>,
    window: usize,
) -> Result<(FeatureMatrix<T>, bool)> {
    NormalizerSpec::Warp { window }.validate()?;
    let t = f.n_frames();
    if t < 3 {
        return Err(Error::TooFewFrames {
            frames: t,
            needed: 3,
        });
    }
    let (w, shrunk) = if t >= window {
        (window, false)
    } else {
        (if t % 2 == 1 { t } else { t - 1 }, true)
    };
    let targets: Vec<T> = warp_targets(w).into_iter().map(T::lit).collect();
    let out = warp_columns(f.values(), w, &targets);
    Ok((
        f.replace_values(out, Some(NormalizerSpec::Warp { window }))?,
        shrunk,
    ))
}

/// Symmetric (ZCA) whitening: `(x - mean) E diag(1/sqrt(lambda)) E^T`.
fn whiten<T: Real>(x: &Array2<T>) -> Array2<T> {
    let (t, d) = x.dim();
    let means: Vec<f64> = column_means(x).iter().map(|m| m.as_f64()).collect();
    let centered = DMatrix::from_fn(t, d, |i, j| x[[i, j]].as_f64() - means[j]);
    let cov = centered.transpose() * &centered / t as f64;
    let eig = SymmetricEigen::new(cov);
    let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.max(EIGEN_FLOOR).sqrt()));
    let transform = &eig.eigenvectors * scale * eig.eigenvectors.transpose();
    let y = centered * transform;
    Array2::from_shape_fn((t, d), |(i, j)| T::lit(y[(i, j)]))
}

/// Iterated global whitening followed by full-utterance marginal rank
/// Gaussianization, rescaled so every dimension has exactly unit variance.
pub fn short_time_gaussianize<T: Real>(
    f: &FeatureMatrix<T>,
    iters: usize,
) -> Result<FeatureMatrix<T>> {
    NormalizerSpec::Gaussianize { iters }.validate()?;
    let (t, d) = f.values().dim();
    if t <= d {
        return Err(Error::TooFewFrames {
            frames: t,
            needed: d + 1,
        });
    }
    let raw = warp_targets(t);
    let rms = (raw.iter().map(|v| v * v).sum::<f64>() / t as f64).sqrt();
    let targets: Vec<T> = raw.iter().map(|v| T::lit(v / rms)).collect();
    let mut x = f.values().clone();
    for _ in 0..iters {
        x = warp_columns(&whiten(&x), t, &targets);
    }
    f.replace_values(x, Some(NormalizerSpec::Gaussianize { iters }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{BaseFeature, FrontendSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn fm(values: Array2<f64>) -> FeatureMatrix<f64> {
        let spec = FrontendSpec {
            n_base: values.ncols(),
            ..FrontendSpec::new(BaseFeature::Mfcc)
        };
        FeatureMatrix::new(values, spec, Some(8.0)).unwrap()
    }

    fn gaussian(t: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((t, d), |_| StandardNormal.sample(&mut rng))
    }

    fn col_stats(x: &Array2<f64>) -> Vec<(f64, f64)> {
        let n = x.nrows() as f64;
        x.axis_iter(Axis(1))
            .map(|c| {
                let m = c.sum() / n;
                (m, c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n)
            })
            .collect()
    }

    fn max_offdiag_cov(x: &Array2<f64>) -> f64 {
        let (t, d) = x.dim();
        let s = col_stats(x);
        let mut best = 0.0f64;
        for a in 0..d {
            for b in a + 1..d {
                let c: f64 = (0..t)
                    .map(|i| (x[[i, a]] - s[a].0) * (x[[i, b]] - s[b].0))
                    .sum::<f64>()
                    / t as f64;
                best = best.max(c.abs());
            }
        }
        best
    }

    #[test]
    fn quantile_matches_reference() {
        let n = Normal::standard();
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            assert!(
                (normal_quantile(p) - n.inverse_cdf(p)).abs() <= 1.2e-9,
                "p={p}"
            );
        }
        for p in [1e-12, 1e-8, 1e-5, 0.999_99, 1.0 - 1e-10] {
            assert!(
                (normal_quantile(p) - n.inverse_cdf(p)).abs()
                    <= 1.2e-9 * n.inverse_cdf(p).abs().max(1.0)
            );
        }
        assert!((normal_quantile(0.1) + 1.281_551_565_544_6).abs() < 1e-12);
        assert_eq!(normal_quantile(0.5), 0.0);
    }

    #[test]
    fn cms_examples() {
        let x = gaussian(50, 4, 1) * 3.0 + 7.0;
        let out = cms(&fm(x.clone()));
        assert!(col_stats(out.values())
            .iter()
            .all(|(m, _)| m.abs() <= 1e-10));
        assert!(cms(&fm(Array2::from_elem((9, 2), 4.2)))
            .values()
            .iter()
            .all(|v| v.abs() < 1e-15));
        let shifted = cms(&fm(x.mapv(|v| v + 100.0)));
        for (a, b) in out.values().iter().zip(shifted.values()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(out.frontend().normalizers, vec![NormalizerSpec::Cms]);
    }

    #[test]
    fn cvn_examples() {
        let x = gaussian(200, 3, 2) * 0.3 - 2.0;
        let out = cvn(&fm(x.clone())).unwrap();
        for (m, v) in col_stats(out.values()) {
            assert!(m.abs() <= 1e-10 && (v - 1.0).abs() <= 1e-8);
        }
        let affine = cvn(&fm(x.mapv(|v| 5.0 * v - 3.0))).unwrap();
        for (a, b) in out.values().iter().zip(affine.values()) {
            assert!((a - b).abs() < 1e-9);
        }
        let mut c = x.clone();
        c.column_mut(1).fill(0.7);
        assert!(cvn(&fm(c))
            .unwrap()
            .values()
            .column(1)
            .iter()
            .all(|&v| v == 0.0));
        assert!(matches!(
            cvn(&fm(Array2::zeros((1, 2)))),
            Err(Error::TooFewFrames { .. })
        ));
    }

    #[test]
    fn rasta_constant_decays() {
        let (y, passed) = rasta_filter(&Array2::from_elem((600, 2), 1.0f64));
        assert!(!passed);
        assert!(y[[500, 0]].abs() <= 1e-3 && y[[599, 1]].abs() <= 1e-3);
        let (z, _) = rasta_filter(&Array2::<f64>::zeros((20, 3)));
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rasta_impulse_matches_difference_equation() {
        let mut x = Array2::zeros((8, 1));
        x[[0, 0]] = 1.0f64;
        let (y, _) = rasta_filter(&x);
        // y[n] = 0.98 y[n-1] + 0.1 (2 x[n] + x[n-1] - x[n-3] - 2 x[n-4])
        let h = [0.2, 0.1 + 0.98 * 0.2];
        let y2 = 0.98 * h[1];
        let y3 = -0.1 + 0.98 * y2;
        let y4 = -0.2 + 0.98 * y3;
        let expect = [h[0], h[1], y2, y3, y4, 0.98 * y4];
        for (i, e) in expect.iter().enumerate() {
            assert!((y[[i, 0]] - e).abs() < 1e-15, "n={i}");
        }
        let (p, passed) = rasta_filter(&Array2::from_elem((4, 2), 3.0f64));
        assert!(passed);
        assert_eq!(p, Array2::from_elem((4, 2), 3.0));
    }

    #[test]
    fn warp_examples() {
        let x = Array2::from_shape_vec((3, 1), vec![1.0f64, 2.0, 3.0]).unwrap();
        let (out, shrunk) = feature_warp(&fm(x), 3).unwrap();
        assert!(!shrunk);
        assert_eq!(out.values()[[1, 0]], 0.0);
        // Center ranked first of five.
        let x = Array2::from_shape_vec((5, 1), vec![3.0f64, 4.0, -9.0, 5.0, 6.0]).unwrap();
        let (out, _) = feature_warp(&fm(x), 5).unwrap();
        assert!((out.values()[[2, 0]] + 1.281_551_565_5).abs() < 1e-9);
        let (_, shrunk) = feature_warp(&fm(gaussian(40, 2, 3)), 301).unwrap();
        assert!(shrunk);
        assert!(feature_warp(&fm(gaussian(2, 2, 3)), 3).is_err());
        assert!(feature_warp(&fm(gaussian(20, 2, 3)), 4).is_err());
    }

    #[test]
    fn warp_outputs_come_from_quantile_set() {
        for (t, window) in [(400usize, 301usize), (120, 301), (50, 11)] {
            let (out, _) = feature_warp(&fm(gaussian(t, 3, 4)), window).unwrap();
            let w = window.min(if t % 2 == 1 { t } else { t - 1 });
            let set = warp_targets(w);
            assert!(out.values().iter().all(|v| set.contains(v)));
        }
    }

    #[test]
    fn gaussianize_marginals() {
        let mut x = gaussian(800, 3, 5);
        for i in 0..800 {
            x[[i, 1]] = (x[[i, 0]] + 0.5 * x[[i, 1]]).exp();
        }
        let out = short_time_gaussianize(&fm(x), 2).unwrap();
        for (m, v) in col_stats(out.values()) {
            assert!(m.abs() <= 1e-8 && (v - 1.0).abs() <= 1e-6, "{m} {v}");
        }
        assert!(matches!(
            short_time_gaussianize(&fm(gaussian(3, 3, 1)), 1),
            Err(Error::TooFewFrames { .. })
        ));
    }

    #[test]
    fn gaussianize_keeps_independent_normals() {
        let x = gaussian(5000, 3, 6);
        let out = short_time_gaussianize(&fm(x.clone()), 1).unwrap();
        for j in 0..3 {
            let a = x.column(j);
            let b = out.values().column(j);
            let (ma, mb) = (a.mean().unwrap(), b.mean().unwrap());
            let cov: f64 = a.iter().zip(b).map(|(p, q)| (p - ma) * (q - mb)).sum();
            let va: f64 = a.iter().map(|p| (p - ma).powi(2)).sum();
            let vb: f64 = b.iter().map(|q| (q - mb).powi(2)).sum();
            assert!((cov / (va * vb).sqrt()).abs() >= 0.99);
        }
    }

    #[test]
    fn gaussianize_reduces_correlation() {
        let z = gaussian(2000, 3, 8);
        let mut x = z.clone();
        for i in 0..2000 {
            x[[i, 1]] = z[[i, 0]] + 0.3 * z[[i, 1]].powi(3);
            x[[i, 2]] = (0.8 * z[[i, 0]] - 0.4 * z[[i, 2]]).exp();
        }
        let mut prev = f64::INFINITY;
        for iters in 1..=3 {
            let out = short_time_gaussianize(&fm(x.clone()), iters).unwrap();
            let off = max_offdiag_cov(out.values());
            assert!(off <= prev + 1e-12, "iters={iters}: {off} > {prev}");
            prev = off;
        }
    }

    #[test]
    fn normalizer_tokens_round_trip() {
        for s in [
            "cms", "cvn", "rasta", "warp", "warp:101", "gauss", "gauss:3",
        ] {
            assert_eq!(s.parse::<NormalizerSpec>().unwrap().to_string(), s);
        }
        assert!("warp:2".parse::<NormalizerSpec>().is_err());
        assert!("cms:3".parse::<NormalizerSpec>().is_err());
    }

    proptest! {
        #[test]
        fn idempotence(seed in 0u64..1000, t in 5usize..60) {
            let f = fm(gaussian(t, 3, seed) * 2.0 + 1.0);
            let once = cms(&f);
            let twice = cms(&once);
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() <= 1e-8);
            }
            let once = cvn(&f).unwrap();
            let twice = cvn(&once).unwrap();
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() <= 1e-8);
            }
        }

        #[test]
        fn rasta_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, s1 in 0u64..100, s2 in 100u64..200) {
            let x = gaussian(30, 2, s1);
            let y = gaussian(30, 2, s2);
            let lhs = rasta_filter(&(&x * a + &y * b)).0;
            let rhs = rasta_filter(&x).0 * a + rasta_filter(&y).0 * b;
            for (p, q) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((p - q).abs() <= 1e-10);
            }
        }

        #[test]
        fn warp_rank_invariant(seed in 0u64..500) {
            let x = gaussian(41, 2, seed);
            let (a, _) = feature_warp(&fm(x.clone()), 11).unwrap();
            let (b, _) = feature_warp(&fm(x.mapv(|v| v.powi(3) * 2.0 + 1.0)), 11).unwrap();
            prop_assert_eq!(a.values(), b.values());
        }

        #[test]
        fn shapes_preserved(seed in 0u64..100, t in 8usize..40) {
            let f = fm(gaussian(t, 4, seed));
            prop_assert_eq!(cms(&f).values().dim(), (t, 4));
            prop_assert_eq!(cvn(&f).unwrap().values().dim(), (t, 4));
            prop_assert_eq!(feature_warp(&f, 5).unwrap().0.values().dim(), (t, 4));
            prop_assert_eq!(short_time_gaussianize(&f, 1).unwrap().values().dim(), (t, 4));
            prop_assert_eq!(rasta_filter(f.values()).0.dim(), (t, 4));
        }
    }
}
