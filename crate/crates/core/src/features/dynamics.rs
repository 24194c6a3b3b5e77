use ndarray::{s, Array2};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `y[i + d] - y[i - d]` per column, replicating the first and last frames.
pub fn delta<T: Real>(y: &Array2<T>, d: usize) -> Array2<T> {
    let t = y.nrows();
    let last = t.saturating_sub(1);
    Array2::from_shape_fn(y.dim(), |(i, j)| {
        y[[(i + d).min(last), j]] - y[[i.saturating_sub(d), j]]
    })
}

/// Appends `orders` delta blocks: `[static | delta | delta-delta]`.
pub fn append_deltas<T: Real>(
    f: &FeatureMatrix<T>,
    d: usize,
    orders: usize,
) -> Result<FeatureMatrix<T>> {
    if !(1..=2).contains(&orders) || !(1..=2).contains(&d) {
        return Err(Error::InvalidParam(format!(
            "delta orders {orders}, offset {d}"
        )));
    }
    if f.frontend().deltas != 0 {
        return Err(Error::Config(format!(
            "{} already carries deltas",
            f.frontend()
        )));
    }
    if f.n_frames() <= 2 * d {
        return Err(Error::TooFewFrames {
            frames: f.n_frames(),
            needed: 2 * d + 1,
        });
    }
    let stat = f.values();
    let dim = f.dim();
    let mut out = Array2::zeros((f.n_frames(), dim * (1 + orders)));
    out.slice_mut(s![.., ..dim]).assign(stat);
    let mut prev = stat.clone();
    for o in 1..=orders {
        let dl = delta(&prev, d);
        out.slice_mut(s![.., o * dim..(o + 1) * dim]).assign(&dl);
        prev = dl;
    }
    let mut spec = f.frontend().clone();
    spec.deltas = orders;
    spec.delta_d = d;
    Ok(
        FeatureMatrix::new(out, spec, f.frame_shift_ms())?
            .with_flagged(f.flagged_frames().to_vec()),
    )
}

/// Appends per-frame log-energy as the last static column.
pub fn append_log_energy<T: Real>(f: &FeatureMatrix<T>, e: &[T]) -> Result<FeatureMatrix<T>> {
    if e.len() != f.n_frames() {
        return Err(Error::LengthMismatch {
            expected: f.n_frames(),
            got: e.len(),
        });
    }
    let spec = f.frontend();
    if spec.energy || spec.deltas != 0 {
        return Err(Error::Config(format!(
            "energy goes onto static features only, not {spec}"
        )));
    }
    let dim = f.dim();
    let out = Array2::from_shape_fn((f.n_frames(), dim + 1), |(i, j)| {
        if j < dim {
            f.values()[[i, j]]
        } else {
            e[i]
        }
    });
    let mut spec = spec.clone();
    spec.energy = true;
    Ok(
        FeatureMatrix::new(out, spec, f.frame_shift_ms())?
            .with_flagged(f.flagged_frames().to_vec()),
    )
}
