use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::multiclass::{class_index, train_pairs, vote, Standardizer};
use super::{KernelKind, KernelSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_C: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_SIGMA_MULTIPLIERS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// RBF widths: multiples of the median pairwise squared distance of the
/// (standardized) training vectors, or explicit values.
#[derive(Clone, Debug, PartialEq)]
pub enum SigmaGrid {
    Auto(Vec<f64>),
    Values(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvGrid {
    pub c_values: Vec<f64>,
    pub sigma: SigmaGrid,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvGrid {
    fn default() -> Self {
        Self {
            c_values: DEFAULT_C.to_vec(),
            sigma: SigmaGrid::Auto(DEFAULT_SIGMA_MULTIPLIERS.to_vec()),
            folds: 10,
            seed: 42,
        }
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for CvGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C={};sigma=", fmt_list(&self.c_values))?;
        match &self.sigma {
            SigmaGrid::Auto(m) if m.as_slice() == DEFAULT_SIGMA_MULTIPLIERS => f.write_str("auto"),
            SigmaGrid::Auto(m) => write!(f, "auto:{}", fmt_list(m)),
            SigmaGrid::Values(v) => f.write_str(&fmt_list(v)),
        }
    }
}

/// Parses `C=0.1,1,10;sigma=auto`, `sigma=auto:0.5,1`, or `sigma=2,8`. Missing
/// keys keep their defaults; `folds` and `seed` are left at their defaults.
impl FromStr for CvGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let list = |v: &str| -> Result<Vec<f64>> {
            let out = v
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| *x > 0.0 && x.is_finite())
                        .ok_or_else(|| Error::Config(format!("bad grid value {t:?} in {s:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(out)
        };
        let mut grid = CvGrid::default();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("grid entry {part:?} is not key=value")))?;
            match key.trim() {
                "C" | "c" => grid.c_values = list(value)?,
                "sigma" => {
                    let value = value.trim();
                    grid.sigma = if value == "auto" {
                        SigmaGrid::Auto(DEFAULT_SIGMA_MULTIPLIERS.to_vec())
                    } else if let Some(m) = value.strip_prefix("auto:") {
                        SigmaGrid::Auto(list(m)?)
                    } else {
                        SigmaGrid::Values(list(value)?)
                    }
                }
                other => return Err(Error::Config(format!("unknown grid key {other:?}"))),
            }
        }
        Ok(grid)
    }
}

impl CvGrid {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "{} folds; need at least 2",
                self.folds
            )));
        }
        let sigmas = match &self.sigma {
            SigmaGrid::Auto(v) | SigmaGrid::Values(v) => v,
        };
        if self.c_values.is_empty() || sigmas.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub c: f64,
    /// Zero for the linear kernel.
    pub sigma: f64,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub best: GridPoint,
    /// Every evaluated point, ordered by `C` then `sigma`.
    pub points: Vec<GridPoint>,
}

/// Median of the squared distances over all pairs of rows.
pub fn median_pairwise_sq_distance<T: Real>(x: &Array2<T>) -> f64 {
    let n = x.nrows();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(
                x.row(i)
                    .iter()
                    .zip(x.row(j).iter())
                    .map(|(&a, &b)| ((a - b) * (a - b)).as_f64())
                    .sum::<f64>(),
            );
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        (d[m - 1] + d[m]) / 2.0
    }
}

/// Fold id per sample. Each class is shuffled with a seeded generator and
/// dealt round-robin onto the folds with one counter shared by all classes,
/// so fold sizes differ by at most one.
pub fn stratified_folds(y: &[usize], n_classes: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; y.len()];
    let mut counter = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            out[i] = counter % folds;
            counter += 1;
        }
    }
    out
}

fn fold_accuracy<T: Real>(
    gram: &Array2<f64>,
    rows: &Array2<T>,
    y: &[usize],
    fold_of: &[usize],
    fold: usize,
    kernel: KernelSpec,
    c: f64,
) -> Result<f64> {
    let train: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != fold).collect();
    let test: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == fold).collect();
    if test.is_empty() {
        return Ok(0.0);
    }
    // Classes absent from this training split cannot be predicted.
    let mut present: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::SingleClass);
    }
    let local_y: Vec<usize> = train
        .iter()
        .map(|&i| present.binary_search(&y[i]).unwrap())
        .collect();
    let sub = Array2::from_shape_fn((train.len(), train.len()), |(p, q)| {
        gram[[train[p], train[q]]]
    });
    let train_rows = rows.select(Axis(0), &train);
    let pairs = train_pairs(&sub, &train_rows, &local_y, present.len(), kernel, c)?;
    let names: Vec<String> = present.iter().map(|c| c.to_string()).collect();
    let correct = test
        .iter()
        .filter(|&&i| {
            let row = rows.row(i);
            let p = vote(&names, &pairs, row.as_slice().expect("standard layout"));
            present[p.class] == y[i]
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Stratified k-fold grid search. Ties in mean held-out accuracy go to the
/// smaller `C`, then the smaller `sigma`.
pub fn cross_validate<T: Real>(
    x: &Array2<T>,
    labels: &[String],
    grid: &CvGrid,
    kind: KernelKind,
    conventional: bool,
) -> Result<CvResult> {
    grid.validate()?;
    if x.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    let (classes, y) = class_index(labels)?;
    let smallest = (0..classes.len())
        .map(|c| y.iter().filter(|&&v| v == c).count())
        .min()
        .unwrap_or(0);
    if smallest < grid.folds {
        log::info!("a class has {smallest} samples for {} folds", grid.folds);
    }
    let rows = match kind {
        KernelKind::Rbf => Standardizer::fit(x).apply_rows(x),
        KernelKind::Linear => x.as_standard_layout().into_owned(),
    };
    let mut c_values = grid.c_values.clone();
    c_values.sort_by(f64::total_cmp);
    c_values.dedup();
    let mut sigmas = match (kind, &grid.sigma) {
        (KernelKind::Linear, _) => vec![0.0],
        (KernelKind::Rbf, SigmaGrid::Values(v)) => v.clone(),
        (KernelKind::Rbf, SigmaGrid::Auto(mult)) => {
            let d = median_pairwise_sq_distance(&rows);
            if !(d > 0.0) {
                return Err(Error::DegenerateData { dim: 0 });
            }
            let base = if conventional { d.sqrt() } else { d };
            mult.iter().map(|m| m * base).collect()
        }
    };
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let kernel_for = |sigma: f64| match kind {
        KernelKind::Linear => KernelSpec::linear(),
        KernelKind::Rbf => KernelSpec {
            kind,
            sigma,
            conventional,
        },
    };
    let grams: Vec<Array2<f64>> = sigmas
        .par_iter()
        .map(|&s| kernel_for(s).gram(&rows))
        .collect();
    let fold_of = stratified_folds(&y, classes.len(), grid.folds, grid.seed);
    let tasks: Vec<(usize, f64)> = c_values
        .iter()
        .flat_map(|&c| (0..sigmas.len()).map(move |s| (s, c)))
        .collect();
    let points = tasks
        .par_iter()
        .map(|&(s, c)| {
            let kernel = kernel_for(sigmas[s]);
            let fold_accuracies = (0..grid.folds)
                .map(|f| fold_accuracy(&grams[s], &rows, &y, &fold_of, f, kernel, c))
                .collect::<Result<Vec<f64>>>()?;
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / grid.folds as f64;
            log::debug!("cv {kind} C={c} sigma={}: {mean_accuracy:.4}", sigmas[s]);
            Ok(GridPoint {
                c,
                sigma: sigmas[s],
                fold_accuracies,
                mean_accuracy,
            })
        })
        .collect::<Result<Vec<GridPoint>>>()?;
    let mut best = &points[0];
    for p in &points[1..] {
        if p.mean_accuracy > best.mean_accuracy {
            best = p;
        }
    }
    Ok(CvResult {
        best: best.clone(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::tests::blobs;

    fn names(lab: &[usize]) -> Vec<String> {
        lab.iter().map(|l| format!("s{l:02}")).collect()
    }

    #[test]
    fn grid_syntax() {
        let g: CvGrid = "C=0.1,1,10,100;sigma=auto".parse().unwrap();
        assert_eq!(g, CvGrid::default());
        assert_eq!(g.to_string(), "C=0.1,1,10,100;sigma=auto");
        let g: CvGrid = "C=2;sigma=0.5,3".parse().unwrap();
        assert_eq!(g.c_values, vec![2.0]);
        assert_eq!(g.sigma, SigmaGrid::Values(vec![0.5, 3.0]));
        assert_eq!(g.to_string().parse::<CvGrid>().unwrap(), g);
        let g: CvGrid = "sigma=auto:1,2".parse().unwrap();
        assert_eq!(g.sigma, SigmaGrid::Auto(vec![1.0, 2.0]));
        assert!("C=".parse::<CvGrid>().is_err());
        assert!("C=-1".parse::<CvGrid>().is_err());
        assert!("gamma=1".parse::<CvGrid>().is_err());
        let empty = CvGrid {
            c_values: vec![],
            ..Default::default()
        };
        assert!(matches!(empty.validate(), Err(Error::EmptyGrid)));
    }

    #[test]
    fn folds_of_protocol_size() {
        let y: Vec<usize> = (0..112).map(|i| i / 8).collect();
        let f = stratified_folds(&y, 14, 10, 42);
        let mut sizes = vec![0; 10];
        f.iter().for_each(|&k| sizes[k] += 1);
        assert!(sizes.iter().all(|&s| s == 11 || s == 12), "{sizes:?}");
        assert_eq!(sizes.iter().sum::<usize>(), 112);
        // each class spread over distinct folds
        for c in 0..14 {
            let mut fs: Vec<usize> = (0..112).filter(|&i| y[i] == c).map(|i| f[i]).collect();
            fs.sort_unstable();
            fs.dedup();
            assert_eq!(fs.len(), 8);
        }
        assert_eq!(f, stratified_folds(&y, 14, 10, 42));
        assert_ne!(f, stratified_folds(&y, 14, 10, 43));
    }

    #[test]
    fn single_point_grid() {
        let (x, lab) = blobs(&[&[-1.0, 0.0], &[1.0, 0.0]], 10, 0.5, 1);
        let grid: CvGrid = CvGrid {
            c_values: vec![3.0],
            folds: 5,
            ..Default::default()
        };
        let r = cross_validate(&x, &names(&lab), &grid, KernelKind::Linear, false).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.best.c, 3.0);
        let grid = CvGrid {
            c_values: vec![3.0],
            sigma: SigmaGrid::Values(vec![1.5]),
            folds: 5,
            seed: 1,
        };
        let r = cross_validate(&x, &names(&lab), &grid, KernelKind::Rbf, false).unwrap();
        assert_eq!((r.best.c, r.best.sigma), (3.0, 1.5));
    }

    #[test]
    fn separable_reaches_full_accuracy_and_ties_pick_smallest() {
        let (x, lab) = blobs(&[&[-5.0, 0.0], &[5.0, 0.0], &[0.0, 6.0]], 12, 0.5, 2);
        let grid = CvGrid {
            folds: 4,
            ..Default::default()
        };
        for kind in [KernelKind::Linear, KernelKind::Rbf] {
            let r = cross_validate(&x, &names(&lab), &grid, kind, false).unwrap();
            assert_eq!(r.best.mean_accuracy, 1.0);
            assert_eq!(r.best.fold_accuracies.len(), 4);
            let first = r.points.iter().find(|p| p.mean_accuracy == 1.0).unwrap();
            assert_eq!((r.best.c, r.best.sigma), (first.c, first.sigma));
        }
    }

    #[test]
    fn deterministic_across_threads() {
        let (x, lab) = blobs(&[&[-1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]], 10, 0.9, 3);
        let grid = CvGrid {
            folds: 5,
            ..Default::default()
        };
        let a = cross_validate(&x, &names(&lab), &grid, KernelKind::Rbf, false).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool
            .install(|| cross_validate(&x, &names(&lab), &grid, KernelKind::Rbf, false).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn median_distance() {
        let x = ndarray::array![[0.0], [1.0], [3.0]];
        // squared distances 1, 9, 4
        assert_eq!(median_pairwise_sq_distance(&x), 4.0);
    }
}
