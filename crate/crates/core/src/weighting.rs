//! Tracking weights for the selected assets: minimize in-sample squared
//! tracking error under long-only, fully invested constraints.
//!
//! The fit minimizes `sum_t (sum_i w_i r_ti - r_t,index)^2` over the simplex
//! `{w >= 0, sum w = 1}` by projected gradient descent. With the objective
//! halved the gradient is `G'(G w - y)`, whose Lipschitz constant is the
//! largest eigenvalue of `G'G`; the step size is its reciprocal. Iterations
//! start from equal weights and stop when the largest weight change drops
//! below 1e-10 or after 10,000 steps, whichever comes first.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 10_000;
const CONVERGENCE_TOLERANCE: f64 = 1e-10;

/// A long-only, fully invested portfolio at a rebalance date.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    /// Asset id and weight, in the order the selection was given.
    pub holdings: Vec<(String, f64)>,
    pub as_of: NaiveDate,
}

impl Portfolio {
    pub fn weight_of(&self, id: &str) -> Option<f64> {
        self.holdings
            .iter()
            .find(|(aid, _)| aid == id)
            .map(|(_, w)| *w)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.holdings.iter().map(|(_, w)| *w).collect()
    }
}

/// Fit tracking weights for `asset_ids` over an estimation window.
///
/// `asset_returns[t][i]` is the period-`t` return of selected asset `i`;
/// `index_returns[t]` the matching index return. A window shorter than the
/// selection is allowed but only warned about, since the problem is then
/// underdetermined.
pub fn optimize_weights(
    asset_ids: &[String],
    asset_returns: &[Vec<f64>],
    index_returns: &[f64],
    as_of: NaiveDate,
) -> Result<Portfolio> {
    let m = asset_ids.len();
    if m == 0 {
        return Err(Error::Parameter("cannot weight an empty selection".into()));
    }
    let t = asset_returns.len();
    if t == 0 || index_returns.len() != t {
        return Err(Error::Validation(format!(
            "window mismatch: {t} asset return rows vs {} index returns",
            index_returns.len()
        )));
    }
    for row in asset_returns {
        if row.len() != m {
            return Err(Error::Validation(format!(
                "return row has {} entries, expected {m}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite asset return".into()));
        }
    }
    if index_returns.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite index return".into()));
    }
    if t < m {
        log::warn!(
            "weight window has {t} periods for {m} assets; the fit is underdetermined"
        );
    }

    let weights = if m == 1 {
        vec![1.0]
    } else {
        let g = DMatrix::from_fn(t, m, |r, c| asset_returns[r][c]);
        let y = DVector::from_fn(t, |r, _| index_returns[r]);
        project_gradient_descent(&g, &y)
    };

    Ok(Portfolio {
        holdings: asset_ids
            .iter()
            .cloned()
            .zip(weights)
            .collect(),
        as_of,
    })
}

fn project_gradient_descent(g: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
    let m = g.ncols();
    let gtg = g.transpose() * g;
    let gty = g.transpose() * y;

    let eigen = SymmetricEigen::new(gtg.clone());
    let lipschitz = eigen.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut w = DVector::from_element(m, 1.0 / m as f64);
    if lipschitz <= 0.0 {
        // All-zero return window: every simplex point is optimal.
        return w.iter().cloned().collect();
    }
    let step = 1.0 / lipschitz;

    for _ in 0..MAX_ITERATIONS {
        let gradient = &gtg * &w - &gty;
        let candidate = project_to_simplex(&(&w - step * gradient));
        let max_change = w
            .iter()
            .zip(candidate.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = candidate;
        if max_change < CONVERGENCE_TOLERANCE {
            break;
        }
    }
    w.iter().cloned().collect()
}

/// Euclidean projection onto the probability simplex.
fn project_to_simplex(v: &DVector<f64>) -> DVector<f64> {
    let m = v.len();
    let mut sorted: Vec<f64> = v.iter().cloned().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    DVector::from_fn(m, |i, _| (v[i] - tau).max(0.0))
}

/// Squared tracking error of weights over a window; the fit's objective.
pub fn tracking_objective(
    weights: &[f64],
    asset_returns: &[Vec<f64>],
    index_returns: &[f64],
) -> f64 {
    asset_returns
        .iter()
        .zip(index_returns)
        .map(|(row, idx)| {
            let fitted: f64 = row.iter().zip(weights).map(|(r, w)| r * w).sum();
            (fitted - idx).powi(2)
        })
        .sum()
}
