use ndarray::{Array2, Axis};

use super::{accumulate, kmeans, GmmModel, TrainConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Average log-likelihood of every model visited, starting with the
/// initialization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmTrace {
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct TrainedUbm<T> {
    pub model: GmmModel<T>,
    pub trace: EmTrace,
    /// Fewer than ten frames per component were available.
    pub sparse_data: bool,
}

fn global_variance<T: Real>(data: &Array2<T>) -> Result<Vec<T>> {
    let n = T::from_count(data.nrows());
    data.axis_iter(Axis(1))
        .enumerate()
        .map(|(j, c)| {
            let m = c.iter().copied().sum::<T>() / n;
            let v = c.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n;
            if v > T::zero() {
                Ok(v)
            } else {
                Err(Error::DegenerateData { dim: j })
            }
        })
        .collect()
}

/// Diagonal-covariance EM for a background model on pooled frames.
///
/// Means start from K-means, weights uniform, variances at the global
/// per-dimension variance. Variances are floored at
/// `cfg.variance_floor` times the global variance after every M-step.
pub fn train_ubm<T: Real>(data: &Array2<T>, cfg: &TrainConfig) -> Result<TrainedUbm<T>> {
    cfg.validate()?;
    let (n, d) = data.dim();
    let k = cfg.mixtures;
    if d == 0 {
        return Err(Error::InvalidParam("zero-dimensional data".into()));
    }
    if n < k {
        return Err(Error::TooFewPoints {
            points: n,
            needed: k,
        });
    }
    let sparse_data = n < 10 * k;
    if sparse_data {
        log::warn!("{n} frames for {k} mixtures (fewer than 10 per component)");
    }
    let global = global_variance(data)?;
    let floor: Vec<T> = global
        .iter()
        .map(|&v| v * T::lit(cfg.variance_floor))
        .collect();
    let means = kmeans(data, k, cfg.seed)?;
    let variances = Array2::from_shape_fn((k, d), |(_, j)| global[j].max(floor[j]));
    let mut model = GmmModel::new(vec![T::one() / T::from_count(k); k], means, variances)?;

    let nf = T::from_count(n);
    let mut trace = EmTrace::default();
    let mut stats = accumulate(&model, data, true);
    trace.log_likelihoods.push((stats.ll / nf).as_f64());
    for iter in 0..cfg.max_iters {
        let mut weights = Vec::with_capacity(k);
        let mut means = model.means().clone();
        let mut variances = model.variances().clone();
        let sxx = stats.sxx.as_ref().expect("second moments requested");
        for c in 0..k {
            let nk = stats.n[c];
            weights.push(nk / nf);
            if nk <= T::zero() {
                continue;
            }
            for j in 0..d {
                let old = model.means()[[c, j]];
                let mean = stats.sx[[c, j]] / nk;
                let shift = mean - old;
                let var = sxx[[c, j]] / nk - shift * shift;
                means[[c, j]] = mean;
                variances[[c, j]] = var.max(floor[j]);
            }
        }
        // Renormalize away rounding so the weights sum to one.
        let total: T = weights.iter().copied().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        model = GmmModel::new(weights, means, variances)?;
        stats = accumulate(&model, data, true);
        let prev = *trace.log_likelihoods.last().unwrap();
        let cur = (stats.ll / nf).as_f64();
        trace.log_likelihoods.push(cur);
        log::debug!("EM iteration {}: average log-likelihood {cur:.6}", iter + 1);
        if (cur - prev) / prev.abs().max(f64::MIN_POSITIVE) < cfg.rel_tol {
            trace.converged = true;
            break;
        }
    }
    Ok(TrainedUbm {
        model,
        trace,
        sparse_data,
    })
}

/// Mean-only MAP adaptation with relevance factor `r`:
/// `m_k' = (sum_t g_tk x_t + r m_k) / (n_k + r)`, weights and variances copied.
pub fn map_adapt_means<T: Real>(
    ubm: &GmmModel<T>,
    frames: &Array2<T>,
    r: T,
) -> Result<GmmModel<T>> {
    if frames.ncols() != ubm.dim() {
        return Err(Error::DimMismatch {
            model: ubm.dim(),
            data: frames.ncols(),
        });
    }
    if frames.nrows() == 0 {
        return Err(Error::Empty);
    }
    if !(r > T::zero()) {
        return Err(Error::InvalidParam(format!("relevance {r} must be > 0")));
    }
    let stats = accumulate(ubm, frames, false);
    let mut means = ubm.means().clone();
    for (c, mut row) in means.axis_iter_mut(Axis(0)).enumerate() {
        let denom = stats.n[c] + r;
        for (j, m) in row.iter_mut().enumerate() {
            *m = (stats.sx[[c, j]] + r * *m) / denom;
        }
    }
    Ok(ubm.with_means(means))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::tests::random_model;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn cfg(k: usize) -> TrainConfig {
        TrainConfig {
            mixtures: k,
            ..Default::default()
        }
    }

    fn assert_monotone(trace: &EmTrace) {
        for w in trace.log_likelihoods.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-8 * w[0].abs(),
                "{:?}",
                trace.log_likelihoods
            );
        }
    }

    #[test]
    fn single_component_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((500, 3), |(_, j)| 2.0 * normal(&mut rng) + j as f64);
        let out = train_ubm(&x, &cfg(1)).unwrap();
        let m = out.model.means();
        let v = out.model.variances();
        for j in 0..3 {
            let c = x.column(j);
            let mean = c.mean().unwrap();
            let var = c.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 500.0;
            assert!((m[[0, j]] - mean).abs() <= 1e-10);
            assert!((v[[0, j]] - var).abs() <= 1e-10);
        }
        assert_eq!(out.model.weights(), &[1.0]);
        assert_monotone(&out.trace);
    }

    #[test]
    fn recovers_two_component_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((20000, 1), |_| {
            let mu = if rng.random_bool(0.5) { 3.0 } else { -3.0 };
            mu + normal(&mut rng)
        });
        let out = train_ubm(&x, &cfg(2)).unwrap();
        let mut means: Vec<f64> = out.model.means().iter().copied().collect();
        means.sort_by(f64::total_cmp);
        assert!(
            (means[0] + 3.0).abs() < 0.1 && (means[1] - 3.0).abs() < 0.1,
            "{means:?}"
        );
        assert!((out.model.weights().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert_monotone(&out.trace);
    }

    #[test]
    fn trace_monotone_and_floor_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = Array2::from_shape_fn((3000, 4), |_| normal(&mut rng));
        // a tight cluster tempts components to collapse
        for i in 0..200 {
            x.row_mut(i).fill(1.5);
            x[[i, 0]] += 1e-9 * i as f64;
        }
        let out = train_ubm(&x, &cfg(16)).unwrap();
        assert_monotone(&out.trace);
        let global: Vec<f64> = x
            .axis_iter(Axis(1))
            .map(|c| {
                let m = c.mean().unwrap();
                c.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 3000.0
            })
            .collect();
        for row in out.model.variances().rows() {
            for (v, g) in row.iter().zip(&global) {
                assert!(*v >= 1e-3 * g * (1.0 - 1e-12));
            }
        }
        assert!((out.model.weights().iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn error_cases() {
        assert!(matches!(
            train_ubm(&Array2::<f64>::zeros((3, 2)), &cfg(4)),
            Err(Error::TooFewPoints { .. })
        ));
        let mut x = Array2::from_shape_fn((50, 2), |(i, _)| i as f64);
        x.column_mut(1).fill(3.0);
        assert!(matches!(
            train_ubm(&x, &cfg(2)),
            Err(Error::DegenerateData { dim: 1 })
        ));
        let x = Array2::from_shape_fn((30, 1), |(i, _)| i as f64);
        assert!(train_ubm(&x, &cfg(4)).unwrap().sparse_data);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((5000, 3), |_| normal(&mut rng));
        let a = train_ubm(&x, &cfg(4)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| train_ubm(&x, &cfg(4)).unwrap());
        assert_eq!(a.model, b.model);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn map_infinite_relevance_keeps_ubm() {
        let ubm = random_model(4, 3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((100, 3), |_| normal(&mut rng) + 4.0);
        let a = map_adapt_means(&ubm, &x, 1e12).unwrap();
        for (p, q) in a.means().iter().zip(ubm.means()) {
            assert!((p - q).abs() <= 1e-6);
        }
        assert_eq!(a.weights(), ubm.weights());
        assert_eq!(a.variances(), ubm.variances());
    }

    #[test]
    fn map_single_component_closed_form() {
        let ubm = GmmModel::new(
            vec![1.0],
            ndarray::array![[0.5, -1.0]],
            ndarray::array![[2.0, 0.5]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Array2::from_shape_fn((37, 2), |_| normal(&mut rng) * 3.0);
        let a = map_adapt_means(&ubm, &x, 16.0).unwrap();
        for j in 0..2 {
            let xbar = x.column(j).mean().unwrap();
            let want = (37.0 * xbar + 16.0 * ubm.means()[[0, j]]) / (37.0 + 16.0);
            assert!((a.means()[[0, j]] - want).abs() <= 1e-10);
        }
    }

    #[test]
    fn map_moves_only_the_hit_component() {
        let means = ndarray::array![[-20.0, 0.0], [0.0, 0.0], [20.0, 0.0]];
        let ubm = GmmModel::new(vec![1.0 / 3.0; 3], means, Array2::ones((3, 2))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((60, 2), |(_, j)| {
            0.3 * normal(&mut rng) + if j == 0 { 20.5 } else { 0.4 }
        });
        let a = map_adapt_means(&ubm, &x, 16.0).unwrap();
        let shift = |k: usize| -> f64 {
            (0..2)
                .map(|j| (a.means()[[k, j]] - ubm.means()[[k, j]]).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        assert!(shift(2) > 0.1);
        assert!(shift(0) <= 1e-3 * shift(2) && shift(1) <= 1e-3 * shift(2));
    }

    #[test]
    fn map_is_convex_combination_and_improves_fit() {
        let ubm = random_model(5, 3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((80, 3), |_| normal(&mut rng) + 0.7);
        let a = map_adapt_means(&ubm, &x, 16.0).unwrap();
        let stats = accumulate(&ubm, &x, false);
        for k in 0..5 {
            let nk = stats.n[k];
            let alpha = nk / (nk + 16.0);
            for j in 0..3 {
                let e = if nk > 0.0 {
                    stats.sx[[k, j]] / nk
                } else {
                    ubm.means()[[k, j]]
                };
                let want = alpha * e + (1.0 - alpha) * ubm.means()[[k, j]];
                assert!((a.means()[[k, j]] - want).abs() <= 1e-12);
                let (lo, hi) = (e.min(ubm.means()[[k, j]]), e.max(ubm.means()[[k, j]]));
                assert!(a.means()[[k, j]] >= lo - 1e-12 && a.means()[[k, j]] <= hi + 1e-12);
            }
        }
        let before = ubm.log_likelihood(&x).unwrap();
        let after = a.log_likelihood(&x).unwrap();
        assert!(after >= before - 1e-8 * before.abs());
    }

    #[test]
    fn map_dim_mismatch() {
        let ubm = random_model(2, 3, 1);
        assert!(matches!(
            map_adapt_means(&ubm, &Array2::zeros((4, 2)), 16.0),
            Err(Error::DimMismatch { .. })
        ));
    }
}
