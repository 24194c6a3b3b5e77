use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::blocks;
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_ITERS: usize = 100;

fn sq_dist<T: Real>(a: ArrayView1<T>, b: ArrayView1<T>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

/// Nearest center (lowest index on ties) and its squared distance, per point.
fn assign<T: Real>(data: &Array2<T>, centers: &Array2<T>) -> Vec<(usize, T)> {
    blocks(data.nrows())
        .into_par_iter()
        .flat_map_iter(|(a, b)| {
            (a..b).map(|i| {
                let x = data.row(i);
                let mut best = (0, T::infinity());
                for (c, m) in centers.axis_iter(Axis(0)).enumerate() {
                    let d = sq_dist(x, m);
                    if d < best.1 {
                        best = (c, d);
                    }
                }
                best
            })
        })
        .collect()
}

/// Lloyd's algorithm from `k` distinct random rows of `data`.
///
/// An empty cluster is moved onto the point farthest from its current center.
/// Stops when assignments no longer change, or after 100 iterations.
pub fn kmeans<T: Real>(data: &Array2<T>, k: usize, seed: u64) -> Result<Array2<T>> {
    let (n, d) = data.dim();
    if k == 0 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    if n < k {
        return Err(Error::TooFewPoints {
            points: n,
            needed: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, n, k).into_vec();
    let mut centers = data.select(Axis(0), &picks);
    let mut labels: Vec<usize> = Vec::new();
    for iter in 0..MAX_ITERS {
        let assigned = assign(data, &centers);
        let new_labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<T>::zeros((k, d));
        for (i, &c) in new_labels.iter().enumerate() {
            counts[c] += 1;
            sums.row_mut(c).zip_mut_with(&data.row(i), |s, &x| *s += x);
        }
        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        let stable = empty.is_empty() && new_labels == labels;
        labels = new_labels;
        for c in 0..k {
            if counts[c] > 0 {
                let inv = T::one() / T::from_count(counts[c]);
                centers.row_mut(c).assign(&sums.row(c).mapv(|s| s * inv));
            }
        }
        if !empty.is_empty() {
            let mut far: Vec<usize> = (0..n).collect();
            // Farthest first; index breaks ties so the order is deterministic.
            far.sort_by(|&a, &b| {
                assigned[b]
                    .1
                    .partial_cmp(&assigned[a].1)
                    .unwrap()
                    .then(a.cmp(&b))
            });
            for (c, &i) in empty.iter().zip(&far) {
                centers.row_mut(*c).assign(&data.row(i));
            }
            log::debug!(
                "kmeans iteration {iter}: reseeded {} empty clusters",
                empty.len()
            );
            labels.clear();
            continue;
        }
        if stable {
            log::debug!("kmeans converged after {iter} iterations");
            break;
        }
    }
    Ok(centers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn single_cluster_is_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Array2<f64> = Array2::from_shape_fn((200, 3), |_| StandardNormal.sample(&mut rng));
        let c = kmeans(&x, 1, 7).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        for j in 0..3 {
            assert!((c[[0, j]] - mean[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_points_are_fixed_points() {
        let pts = [[0.0, 0.0], [5.0, 1.0], [-3.0, 4.0], [2.0, -6.0]];
        let x = Array2::from_shape_fn((40, 2), |(i, j)| pts[i % 4][j]);
        for seed in 0..20 {
            let c = kmeans(&x, 4, seed).unwrap();
            let mut got: Vec<(i64, i64)> = c
                .rows()
                .into_iter()
                .map(|r| (r[0] as i64, r[1] as i64))
                .collect();
            got.sort();
            let mut want: Vec<(i64, i64)> =
                pts.iter().map(|p| (p[0] as i64, p[1] as i64)).collect();
            want.sort();
            assert_eq!(got, want, "seed {seed}");
        }
    }

    #[test]
    fn separated_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let centers = [[-5.0, 2.0], [4.0, -1.0]];
        let x = Array2::from_shape_fn((1000, 2), |(i, j)| {
            centers[i % 2][j]
                + 0.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let c = kmeans(&x, 2, 11).unwrap();
        for want in centers {
            assert!(c
                .rows()
                .into_iter()
                .any(|r| (r[0] - want[0]).abs() < 0.1 && (r[1] - want[1]).abs() < 0.1));
        }
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            kmeans(&Array2::<f64>::zeros((3, 2)), 4, 0),
            Err(Error::TooFewPoints {
                points: 3,
                needed: 4
            })
        ));
    }

    #[test]
    fn seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Array2<f64> = Array2::from_shape_fn((500, 4), |_| StandardNormal.sample(&mut rng));
        assert_eq!(kmeans(&x, 8, 5).unwrap(), kmeans(&x, 8, 5).unwrap());
    }
}
