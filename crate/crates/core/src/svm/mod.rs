//! Support vector machines over supervectors: linear and RBF kernels, an SMO
//! dual solver, one-vs-one multiclass voting and cross-validated grid search.

mod cv;
mod io;
mod multiclass;
mod smo;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

pub use cv::{
    cross_validate, median_pairwise_sq_distance, stratified_folds, CvGrid, CvResult, GridPoint,
    SigmaGrid,
};
pub use io::{decode_svm, encode_svm, read_svm, write_svm, SVM_FILE_VERSION};
pub use multiclass::{MulticlassSvm, Prediction, Standardizer};
pub use smo::KKT_TOL;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Multipliers at or below this are not support vectors.
pub const ALPHA_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            _ => Err(Error::Config(format!("unknown kernel {s:?}"))),
        }
    }
}

/// `linear`: `x . v`.
/// `rbf`: `exp(-|x - v|^2 / (2 sigma))`, or `exp(-|x - v|^2 / (2 sigma^2))`
/// when `conventional` is set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub sigma: f64,
    pub conventional: bool,
}

impl KernelSpec {
    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            sigma: 0.0,
            conventional: false,
        }
    }

    pub fn rbf(sigma: f64) -> Self {
        Self {
            kind: KernelKind::Rbf,
            sigma,
            conventional: false,
        }
    }

    pub fn rbf_conventional(sigma: f64) -> Self {
        Self {
            conventional: true,
            ..Self::rbf(sigma)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::Rbf && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "rbf sigma {} must be > 0",
                self.sigma
            )));
        }
        Ok(())
    }

    fn denominator(&self) -> f64 {
        if self.conventional {
            2.0 * self.sigma * self.sigma
        } else {
            2.0 * self.sigma
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked<T: Real>(&self, x: &[T], v: &[T]) -> T {
        match self.kind {
            KernelKind::Linear => x.iter().zip(v).map(|(&a, &b)| a * b).sum(),
            KernelKind::Rbf => {
                let d2: T = x.iter().zip(v).map(|(&a, &b)| (a - b) * (a - b)).sum();
                (-d2 / T::lit(self.denominator())).exp()
            }
        }
    }

    pub fn eval<T: Real>(&self, x: &[T], v: &[T]) -> Result<T> {
        if x.len() != v.len() {
            return Err(Error::LengthMismatch {
                expected: x.len(),
                got: v.len(),
            });
        }
        Ok(self.eval_unchecked(x, v))
    }

    /// Symmetric kernel matrix over the rows of `x`, in `f64`.
    pub(crate) fn gram<T: Real>(&self, x: &Array2<T>) -> Array2<f64> {
        let rows: Vec<Vec<T>> = x.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
        let n = rows.len();
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = self.eval_unchecked(&rows[i], &rows[j]).as_f64();
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        k
    }
}

/// Two-class soft-margin SVM: `f(x) = sum_i coef_i K(sv_i, x) + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinarySvm<T> {
    pub support_vectors: Array2<T>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coefs: Vec<T>,
    pub bias: T,
    pub kernel: KernelSpec,
    pub c: f64,
    pub dual_objective: f64,
    pub converged: bool,
}

impl<T: Real> BinarySvm<T> {
    pub fn dim(&self) -> usize {
        self.support_vectors.ncols()
    }

    pub fn decision(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.decision_unchecked(x))
    }

    pub(crate) fn decision_unchecked(&self, x: &[T]) -> T {
        self.support_vectors
            .axis_iter(Axis(0))
            .zip(&self.dual_coefs)
            .map(|(sv, &a)| {
                a * self
                    .kernel
                    .eval_unchecked(sv.as_slice().expect("standard layout"), x)
            })
            .sum::<T>()
            + self.bias
    }

    /// Score and label; an exact zero score maps to `+1`.
    pub fn predict(&self, x: &[T]) -> Result<(T, i8)> {
        let s = self.decision(x)?;
        Ok((s, if s >= T::zero() { 1 } else { -1 }))
    }
}

fn check_labels(y: &[i8]) -> Result<()> {
    if y.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::InvalidParam("binary labels must be +1 or -1".into()));
    }
    if !y.contains(&1) || !y.contains(&-1) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Trains on a precomputed kernel matrix; `rows` supplies the vectors kept as
/// support vectors.
pub(crate) fn train_from_gram<T: Real>(
    gram: &Array2<f64>,
    rows: &Array2<T>,
    y: &[i8],
    kernel: KernelSpec,
    c: f64,
) -> Result<BinarySvm<T>> {
    check_labels(y)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParam(format!("C {c} must be > 0")));
    }
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let sol = smo::solve(gram, &yf, c);
    let keep: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > ALPHA_EPS).collect();
    Ok(BinarySvm {
        support_vectors: rows.select(Axis(0), &keep),
        dual_coefs: keep.iter().map(|&i| T::lit(sol.alpha[i] * yf[i])).collect(),
        bias: T::lit(-sol.rho),
        kernel,
        c,
        dual_objective: sol.objective,
        converged: sol.converged(),
    })
}

/// Soft-margin C-SVM on the rows of `x` with labels `y` in `{+1, -1}`.
pub fn train_binary<T: Real>(
    x: &Array2<T>,
    y: &[i8],
    kernel: KernelSpec,
    c: f64,
) -> Result<BinarySvm<T>> {
    kernel.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    check_labels(y)?;
    let x = x.as_standard_layout().into_owned();
    train_from_gram(&kernel.gram(&x), &x, y, kernel, c)
}
