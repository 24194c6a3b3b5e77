//! Sequential minimal optimization for the C-SVM dual, with second-order
//! working-set selection.
//!
//! Minimizes `f(a) = 1/2 a^T Q a - e^T a` subject to `0 <= a_i <= C` and
//! `y^T a = 0`, where `Q_ij = y_i y_j K_ij`.

use ndarray::Array2;

const TAU: f64 = 1e-12;
const SNAP: f64 = 1e-12;
pub(crate) const MAX_ITERS: usize = 100_000;
/// Working gap targeted by the solver; well inside the KKT tolerance so that
/// the decision function does not depend on the order of the training data.
const TARGET_GAP: f64 = 1e-9;
pub const KKT_TOL: f64 = 1e-3;

#[derive(Clone, Debug)]
pub(crate) struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    /// Dual objective in maximization form, `e^T a - 1/2 a^T Q a`.
    pub objective: f64,
    pub gap: f64,
}

impl SmoSolution {
    pub fn converged(&self) -> bool {
        self.gap < KKT_TOL
    }
}

pub(crate) fn solve(k: &Array2<f64>, y: &[f64], c: f64) -> SmoSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let up = |a: f64, yt: f64| if yt > 0.0 { a < c } else { a > 0.0 };
    let low = |a: f64, yt: f64| if yt > 0.0 { a > 0.0 } else { a < c };
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERS {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * g[t] >= gmax {
                gmax = -y[t] * g[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * g[t];
            gmin = gmin.min(v);
            if i == usize::MAX {
                continue;
            }
            let b = gmax - v;
            if b > 0.0 {
                let mut a = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -b * b / a;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < TARGET_GAP {
            break;
        }
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * k[[i, j]];
        if y[i] != y[j] {
            let quad = (k[[i, i]] + k[[j, j]] + 2.0 * qij).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = ai - aj;
            let (mut ni, mut nj) = (ai + delta, aj + delta);
            if diff > 0.0 {
                if nj < 0.0 {
                    nj = 0.0;
                    ni = diff;
                }
            } else if ni < 0.0 {
                ni = 0.0;
                nj = -diff;
            }
            if diff > 0.0 {
                if ni > c {
                    ni = c;
                    nj = c - diff;
                }
            } else if nj > c {
                nj = c;
                ni = c + diff;
            }
            alpha[i] = ni;
            alpha[j] = nj;
        } else {
            let quad = (k[[i, i]] + k[[j, j]] - 2.0 * qij).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = ai + aj;
            let (mut ni, mut nj) = (ai - delta, aj + delta);
            if sum > c {
                if ni > c {
                    ni = c;
                    nj = sum - c;
                }
            } else if nj < 0.0 {
                nj = 0.0;
                ni = sum;
            }
            if sum > c {
                if nj > c {
                    nj = c;
                    ni = sum - c;
                }
            } else if ni < 0.0 {
                ni = 0.0;
                nj = sum;
            }
            alpha[i] = ni;
            alpha[j] = nj;
        }
        // Rounding can leave a multiplier a hair inside the box; snap it so
        // bound status, and with it the offset, does not depend on order.
        for t in [i, j] {
            if alpha[t] <= SNAP * c {
                alpha[t] = 0.0;
            } else if alpha[t] >= c * (1.0 - SNAP) {
                alpha[t] = c;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            g[t] += y[t] * (y[i] * k[[t, i]] * di + y[j] * k[[t, j]] * dj);
        }
    }
    if iterations == MAX_ITERS {
        log::warn!("SMO stopped at the iteration cap with gap {gap:.3e}");
    }

    // Offset: average over free vectors, else the middle of the feasible range.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * g[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    let objective = -0.5
        * alpha
            .iter()
            .zip(&g)
            .map(|(a, gi)| a * (gi - 1.0))
            .sum::<f64>();
    SmoSolution {
        alpha,
        rho,
        objective,
        gap,
    }
}
