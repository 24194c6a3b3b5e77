//! Diagonal-covariance Gaussian mixtures: K-means initialization, EM training
//! of the background model, mean-only MAP adaptation and supervectors.

mod em;
mod io;
mod kmeans;
mod supervector;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use em::{map_adapt_means, train_ubm, EmTrace, TrainedUbm};
pub use io::{
    decode_gmm, decode_supervector, encode_gmm, encode_supervector, read_gmm, read_supervector,
    write_gmm, write_supervector, GMM_FILE_VERSION,
};
pub use kmeans::kmeans;
pub use supervector::{supervector, Supervector};

use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Real};

/// Frames per E-step work unit. Fixed so that the summation order, and hence
/// every bit of the result, does not depend on the number of workers.
pub(crate) const BLOCK: usize = 1024;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    #[default]
    Plain,
    Kl,
}

impl Scaling {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Scaling::Plain => 0,
            Scaling::Kl => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Scaling::Plain),
            1 => Some(Scaling::Kl),
            _ => None,
        }
    }
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scaling::Plain => "plain",
            Scaling::Kl => "kl",
        })
    }
}

impl FromStr for Scaling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Scaling::Plain),
            "kl" => Ok(Scaling::Kl),
            _ => Err(Error::Config(format!("unknown supervector scaling {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mixtures: usize,
    pub max_iters: usize,
    /// EM stops once the relative gain in average log-likelihood drops below this.
    pub rel_tol: f64,
    /// Variances are floored at this multiple of the global per-dimension variance.
    pub variance_floor: f64,
    pub relevance: f64,
    pub scaling: Scaling,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mixtures: 128,
            max_iters: 50,
            rel_tol: 1e-5,
            variance_floor: 1e-3,
            relevance: 16.0,
            scaling: Scaling::Plain,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mixtures == 0 {
            return Err(Error::Config("mixtures must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config(format!(
                "rel_tol {} must be > 0",
                self.rel_tol
            )));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::Config(format!(
                "variance_floor {} must be > 0",
                self.variance_floor
            )));
        }
        if !(self.relevance > 0.0) {
            return Err(Error::Config(format!(
                "relevance {} must be > 0",
                self.relevance
            )));
        }
        Ok(())
    }
}

/// Mixture of `K` diagonal Gaussians in `D` dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel<T> {
    weights: Vec<T>,
    means: Array2<T>,
    variances: Array2<T>,
}

impl<T: Real> GmmModel<T> {
    pub fn new(weights: Vec<T>, means: Array2<T>, variances: Array2<T>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.nrows() != k || means.dim() != variances.dim() || means.ncols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{k} weights, means {:?}, variances {:?}",
                means.dim(),
                variances.dim()
            )));
        }
        if weights.iter().any(|w| !(*w >= T::zero())) {
            return Err(Error::InvalidParam(
                "mixture weights must be non-negative".into(),
            ));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::InvalidParam(format!(
                "mixture weights sum to {total}"
            )));
        }
        if variances
            .iter()
            .any(|v| !(*v > T::zero()) || !v.is_finite())
            || means.iter().any(|m| !m.is_finite())
        {
            return Err(Error::InvalidParam(
                "variances must be positive and means finite".into(),
            ));
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn means(&self) -> &Array2<T> {
        &self.means
    }

    pub fn variances(&self) -> &Array2<T> {
        &self.variances
    }

    pub(crate) fn with_means(&self, means: Array2<T>) -> Self {
        Self {
            means,
            ..self.clone()
        }
    }

    fn check_dim(&self, frames: &ArrayView2<T>) -> Result<()> {
        if frames.ncols() != self.dim() {
            return Err(Error::DimMismatch {
                model: self.dim(),
                data: frames.ncols(),
            });
        }
        Ok(())
    }

    pub(crate) fn scorer(&self) -> Scorer<'_, T> {
        let half_log_2pi = T::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
        let log_const = self
            .weights
            .iter()
            .zip(self.variances.axis_iter(Axis(0)))
            .map(|(&w, v)| {
                w.ln()
                    - v.iter()
                        .map(|&x| half_log_2pi + T::lit(0.5) * x.ln())
                        .sum::<T>()
            })
            .collect();
        Scorer {
            model: self,
            log_const,
            inv_var: self.variances.mapv(|v| T::one() / v),
        }
    }

    /// Average per-frame log-likelihood, evaluated in the log domain.
    pub fn log_likelihood(&self, frames: &Array2<T>) -> Result<T> {
        let view = frames.view();
        self.check_dim(&view)?;
        if frames.nrows() == 0 {
            return Err(Error::Empty);
        }
        let scorer = self.scorer();
        let total = blocks(frames.nrows())
            .into_par_iter()
            .map(|(a, b)| {
                let mut buf = vec![T::zero(); self.n_components()];
                (a..b)
                    .map(|t| {
                        scorer.log_densities(frames.row(t), &mut buf);
                        log_sum_exp(&buf)
                    })
                    .sum::<T>()
            })
            .collect::<Vec<T>>()
            .into_iter()
            .sum::<T>();
        Ok(total / T::from_count(frames.nrows()))
    }
}

pub(crate) fn blocks(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .step_by(BLOCK)
        .map(|a| (a, (a + BLOCK).min(n)))
        .collect()
}

pub(crate) struct Scorer<'a, T> {
    model: &'a GmmModel<T>,
    log_const: Vec<T>,
    inv_var: Array2<T>,
}

impl<T: Real> Scorer<'_, T> {
    /// `ln w_k + ln N(x; m_k, diag v_k)` for every component.
    pub fn log_densities(&self, x: ArrayView1<T>, out: &mut [T]) {
        let half = T::lit(0.5);
        for (k, o) in out.iter_mut().enumerate() {
            let m = self.model.means.row(k);
            let iv = self.inv_var.row(k);
            let mut q = T::zero();
            for d in 0..x.len() {
                let diff = x[d] - m[d];
                q += diff * diff * iv[d];
            }
            *o = self.log_const[k] - half * q;
        }
    }
}

/// Sufficient statistics of one pass over the frames. Second moments are
/// accumulated around `center` to keep the variance update well conditioned.
pub(crate) struct Stats<T> {
    pub n: Vec<T>,
    pub sx: Array2<T>,
    pub sxx: Option<Array2<T>>,
    pub ll: T,
}

impl<T: Real> Stats<T> {
    fn zeros(k: usize, d: usize, second: bool) -> Self {
        Self {
            n: vec![T::zero(); k],
            sx: Array2::zeros((k, d)),
            sxx: second.then(|| Array2::zeros((k, d))),
            ll: T::zero(),
        }
    }

    fn add(&mut self, o: &Self) {
        self.n.iter_mut().zip(&o.n).for_each(|(a, &b)| *a += b);
        self.sx += &o.sx;
        if let (Some(a), Some(b)) = (self.sxx.as_mut(), o.sxx.as_ref()) {
            *a += b;
        }
        self.ll += o.ll;
    }
}

/// Responsibility-weighted statistics under `model`, block-parallel with a
/// fixed in-order reduction.
pub(crate) fn accumulate<T: Real>(
    model: &GmmModel<T>,
    frames: &Array2<T>,
    second: bool,
) -> Stats<T> {
    let (k, d) = (model.n_components(), model.dim());
    let scorer = model.scorer();
    let partial: Vec<Stats<T>> = blocks(frames.nrows())
        .into_par_iter()
        .map(|(a, b)| {
            let mut s = Stats::zeros(k, d, second);
            let mut lp = vec![T::zero(); k];
            for t in a..b {
                let x = frames.row(t);
                scorer.log_densities(x, &mut lp);
                let total = log_sum_exp(&lp);
                s.ll += total;
                for c in 0..k {
                    let g = (lp[c] - total).exp();
                    if g == T::zero() {
                        continue;
                    }
                    s.n[c] += g;
                    let m = model.means.row(c);
                    let mut sx = s.sx.row_mut(c);
                    for j in 0..d {
                        sx[j] += g * x[j];
                    }
                    if let Some(sxx) = s.sxx.as_mut() {
                        let mut row = sxx.row_mut(c);
                        for j in 0..d {
                            let e = x[j] - m[j];
                            row[j] += g * e * e;
                        }
                    }
                }
            }
            s
        })
        .collect();
    let mut it = partial.into_iter();
    let mut total = it.next().unwrap_or_else(|| Stats::zeros(k, d, second));
    for s in it {
        total.add(&s);
    }
    total
}
