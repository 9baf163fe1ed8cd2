//! Regularized best responses over the probability simplex.
//!
//! The Tsallis-½ response maximizes `⟨w, q⟩ + (1/η) H(w)` with `H(w) = 4 Σ √w_i`. Its maximizer
//! has the closed form `w_i = 4 / (η (q_i − x))²` where the normalization root `x` is the unique
//! solution above `max q` of `Σ_i 4/(η(q_i − x))² = 1`, and always lies in
//! `[max q + 2/η, max q + 2√n/η]`. The other `n` roots of that equation sit below some `q_i`
//! and are never visited because bisection starts from this bracket.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Deref;

use libm::{exp, sqrt};

use crate::error::{Error, Result};

/// A probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Sum tolerance accepted by [`Distribution::new`].
    pub const TOL: f64 = 1e-10;

    /// Validates nonnegativity and `Σ = 1` within [`Distribution::TOL`].
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_simplex(&weights, Self::TOL)?;
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(alloc::vec![1.0 / n as f64; n])
    }

    /// Normalizes nonnegative weights by their sum.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "weights must be nonnegative with positive sum (sum {total})"
            )));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Distribution {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_simplex(w: &[f64], tol: f64) -> Result<()> {
    if w.is_empty() {
        return Err(Error::InvalidDistribution("empty support".into()));
    }
    if let Some(bad) = w.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::InvalidDistribution(format!(
            "entry {bad} is negative"
        )));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Smoothing strength and root-finder settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub eta: f64,
    /// Relative bracket width at which bisection stops.
    pub bisection_tol: f64,
    pub max_iter: usize,
}

impl SmoothingParams {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            bisection_tol: 1e-13,
            max_iter: 200,
        }
    }
}

/// Tsallis-½ entropy `H(w) = 4 Σ √w_i`, between 4 and `4√n` on the simplex.
pub fn tsallis_entropy(w: &[f64]) -> f64 {
    4.0 * w.iter().map(|&x| sqrt(x)).sum::<f64>()
}

/// Regularized objective `⟨w, q⟩ + (1/η) H(w)`.
pub fn tsallis_objective(w: &[f64], q: &[f64], eta: f64) -> f64 {
    crate::linalg::dot(w, q) + tsallis_entropy(w) / eta
}

fn max_of(q: &[f64]) -> f64 {
    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `Σ_i 4 / (η (q_i − x))²`; equals 1 at the normalization root.
pub fn normalization_sum(q: &[f64], eta: f64, x: f64) -> f64 {
    q.iter()
        .map(|&qi| {
            let d = eta * (qi - x);
            4.0 / (d * d)
        })
        .sum()
}

/// Bracket `[max q + 2/η, max q + 2√n/η]` containing the normalization root.
pub fn normalization_bracket(q: &[f64], eta: f64) -> (f64, f64) {
    let m = max_of(q);
    (m + 2.0 / eta, m + 2.0 * sqrt(q.len() as f64) / eta)
}

/// Normalization root by bisection on the bracket.
pub fn normalization_root(q: &[f64], params: &SmoothingParams) -> Result<f64> {
    if q.is_empty() || q.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "q must be a nonempty finite vector".into(),
        ));
    }
    if !(params.eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eta {} must be positive",
            params.eta
        )));
    }
    let (mut lo, mut hi) = normalization_bracket(q, params.eta);
    // the sum is decreasing above max q: >= 1 at lo, <= 1 at hi
    for _ in 0..params.max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= params.bisection_tol * mid.abs().max(1.0) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if normalization_sum(q, params.eta, mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    Err(Error::BisectionNoConvergence {
        iterations: params.max_iter,
        residual: normalization_sum(q, params.eta, mid) - 1.0,
    })
}

/// Tsallis-½ smoothed best response together with its normalization root.
pub fn tsallis_response_with_root(
    q: &[f64],
    params: &SmoothingParams,
) -> Result<(Distribution, f64)> {
    let x = normalization_root(q, params)?;
    let mut w: Vec<f64> = q
        .iter()
        .map(|&qi| {
            let d = params.eta * (qi - x);
            4.0 / (d * d)
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok((Distribution(w), x))
}

/// Tsallis-½ smoothed best response `argmax_w ⟨w, q⟩ + (1/η) H(w)`.
pub fn tsallis_response(q: &[f64], params: &SmoothingParams) -> Result<Distribution> {
    tsallis_response_with_root(q, params).map(|(w, _)| w)
}

/// Softmax baseline `w_i ∝ exp(η q_i)`, with max-subtraction.
pub fn softmax_response(q: &[f64], eta: f64) -> Distribution {
    let m = max_of(q);
    let w: Vec<f64> = q.iter().map(|&qi| exp(eta * (qi - m))).collect();
    let total: f64 = w.iter().sum();
    Distribution(w.into_iter().map(|v| v / total).collect())
}

/// Policy floor `ℓ_η = 1 / (√n + η / (2(1−γ)))²` claimed for the learner's policies.
///
/// The derivation assumes `max q − min q ≤ 1/(1−γ)`. With rewards in `[-1, 1]` the q-tables span
/// up to `2/(1−γ)` and responses can fall below this value; [`provable_margin_floor`] is the
/// bound that holds on the full range.
pub fn margin_floor(n_actions: usize, eta: f64, gamma: f64) -> f64 {
    let d = sqrt(n_actions as f64) + eta / (2.0 * (1.0 - gamma));
    1.0 / (d * d)
}

/// Policy floor `1 / (√n + η/(1−γ))²`, valid for every `q` with `‖q‖∞ ≤ 1/(1−γ)`.
///
/// From the bracket, `x − q_i ≤ (max q − min q) + 2√n/η ≤ 2/(1−γ) + 2√n/η`.
pub fn provable_margin_floor(n_actions: usize, eta: f64, gamma: f64) -> f64 {
    let d = sqrt(n_actions as f64) + eta / (1.0 - gamma);
    1.0 / (d * d)
}
