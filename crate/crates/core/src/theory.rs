//! Constants of the convergence analysis, computed for a concrete game and schedule.
//!
//! These are diagnostics. The step-size bound is many orders of magnitude below anything that
//! converges at desk scale, so practical runs only log it; theory-strict runs refuse to start
//! when it or the diminishing-step condition fails.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::pow;

use crate::chain::{self, Steps};
use crate::error::{Error, Result};
use crate::game::{JointPolicy, MarkovGame};
use crate::learner::StepSchedule;
use crate::tsallis;

/// One entry of the `z_k` table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZRow {
    pub k: usize,
    pub beta_k: f64,
    /// `β_k`-mixing time of the benchmark chain.
    pub benchmark_mixing: Steps,
    /// `t_{π_b,β_k} / ((ℓ_η²)^{r_b} μ_{b,min})`; `None` when the benchmark mixing time saturated.
    pub z_k: Option<f64>,
}

/// Condition on the diminishing step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition1 {
    /// `β = c_αβ α`.
    pub beta: f64,
    /// `β > 2`.
    pub beta_ok: bool,
    /// `α/h < 1`.
    pub alpha_over_h_ok: bool,
    /// `Σ_{j=k−z_k}^{k−1} α_j ≤ 1/4` for every `k ≥ z_k` up to the horizon.
    pub window_ok: bool,
    /// First `k` where the window sum exceeds 1/4.
    pub first_window_violation: Option<usize>,
    /// Last `k` checked.
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub n_states: usize,
    pub a_max: usize,
    pub eta: f64,
    pub gamma: f64,
    /// `ℓ_η` at `A_max`.
    pub ell_eta: f64,
    /// Floor that holds for every bounded q.
    pub provable_ell_eta: f64,
    pub r_b: usize,
    pub mu_b_min: f64,
    pub rho_b_estimate: f64,
    /// `μ_{b,min} ℓ_η`, the per-step stationary floor.
    pub mu_floor_per_step: f64,
    /// `μ_{b,min} (ℓ_η²)^{r_b}`, the floor through the uniform mixing bound.
    pub mu_floor_r_b: f64,
    /// `c_η = μ_η ℓ_η` with `μ_η ≥ μ_{b,min} ℓ_η`.
    pub c_eta_product: f64,
    /// `c_η = ℓ_η²`.
    pub c_eta_square: f64,
    pub c_ab_bound_product: f64,
    pub c_ab_bound_square: f64,
    pub c_ab: f64,
    pub z_table: Vec<ZRow>,
    /// Smallest `k` in the horizon with `k ≥ z_k`.
    pub k0: Option<usize>,
    pub condition1: Condition1,
}

impl TheoryReport {
    /// The smaller of the two step-size bounds.
    pub fn c_ab_bound(&self) -> f64 {
        self.c_ab_bound_product.min(self.c_ab_bound_square)
    }

    /// Reasons the schedule falls outside the analysis; empty when every condition holds.
    pub fn strict_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.c_ab > self.c_ab_bound() {
            out.push(format!(
                "c_ab {} exceeds bound {:e}",
                self.c_ab,
                self.c_ab_bound()
            ));
        }
        let c1 = &self.condition1;
        if !c1.beta_ok {
            out.push(format!("beta = c_ab*alpha = {} is not above 2", c1.beta));
        }
        if !c1.alpha_over_h_ok {
            out.push("alpha/h is not below 1".into());
        }
        if let Some(k) = c1.first_window_violation {
            out.push(format!("alpha window sum exceeds 1/4 at k = {k}"));
        } else if !c1.window_ok {
            out.push("alpha window condition could not be certified".into());
        }
        if self.k0.is_none() {
            out.push(format!("no k <= {} satisfies k >= z_k", c1.horizon));
        }
        out
    }
}

/// Computes the analysis constants for `pi_b` as the benchmark policy, checking the schedule
/// over `k = 0..=horizon`.
pub fn theory_constants(
    game: &MarkovGame,
    eta: f64,
    pi_b: &JointPolicy,
    schedule: &StepSchedule,
    horizon: usize,
) -> Result<TheoryReport> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eta {eta} must be positive"
        )));
    }
    pi_b.validate(game)?;
    let n = game.n_states();
    let a_max = game.max_actions();
    let gamma = game.gamma();

    let a3 = chain::check_assumption3(game, pi_b, chain::default_r_b_horizon(n))?;
    let (Steps::Reached(r_b), Some(mu_b_min)) = (a3.r_b, a3.mu_b_min) else {
        let cap = match a3.r_b {
            Steps::Reached(k) | Steps::Saturated(k) => k,
        };
        return Err(Error::Assumption3Infeasible(cap));
    };

    let ell = tsallis::margin_floor(a_max, eta, gamma);
    let ell2 = ell * ell;
    let c_eta_product = mu_b_min * ell2;
    let c_eta_square = ell2;
    let denom = 6272.0 * eta * eta * eta * n as f64 * pow(a_max as f64, 4.0);
    let scale = ell2 * ell * (1.0 - gamma) * (1.0 - gamma) / denom;

    let p = game.induced_chain(pi_b)?;
    let mu = chain::stationary_distribution(&p)?;
    let beta_min = schedule.step_sizes(horizon).1;
    let curve = chain::tv_curve_until(&p, &mu, beta_min, chain::DEFAULT_MIXING_HORIZON)?;
    let uniform_factor = pow(ell2, r_b as f64) * mu_b_min;

    let mut prefix = Vec::with_capacity(horizon + 2);
    prefix.push(0.0);
    for k in 0..=horizon {
        let last = prefix[prefix.len() - 1];
        prefix.push(last + schedule.step_sizes(k).0);
    }

    let mut z_table = Vec::new();
    let mut k0 = None;
    let mut window_ok = true;
    let mut first_window_violation = None;
    let mut cursor = 0usize;
    for k in 0..=horizon {
        let beta_k = schedule.step_sizes(k).1;
        while cursor < curve.len() && curve[cursor] > beta_k {
            cursor += 1;
        }
        let benchmark_mixing = if cursor < curve.len() {
            Steps::Reached(cursor)
        } else {
            Steps::Saturated(curve.len() - 1)
        };
        let z_k = benchmark_mixing
            .reached()
            .map(|t| t as f64 / uniform_factor);
        if is_table_row(k, horizon) {
            z_table.push(ZRow {
                k,
                beta_k,
                benchmark_mixing,
                z_k,
            });
        }
        match z_k {
            None => window_ok = false,
            Some(z) if (k as f64) >= z => {
                k0.get_or_insert(k);
                let width = libm::ceil(z) as usize;
                let window = prefix[k] - prefix[k - width.min(k)];
                if window > 0.25 && first_window_violation.is_none() {
                    first_window_violation = Some(k);
                    window_ok = false;
                }
            }
            Some(_) => {}
        }
    }

    let beta = schedule.c_ab * schedule.alpha;
    Ok(TheoryReport {
        n_states: n,
        a_max,
        eta,
        gamma,
        ell_eta: ell,
        provable_ell_eta: tsallis::provable_margin_floor(a_max, eta, gamma),
        r_b,
        mu_b_min,
        rho_b_estimate: a3.rho_b_estimate.unwrap_or(0.0),
        mu_floor_per_step: mu_b_min * ell,
        mu_floor_r_b: uniform_factor,
        c_eta_product,
        c_eta_square,
        c_ab_bound_product: c_eta_product * scale,
        c_ab_bound_square: c_eta_square * scale,
        c_ab: schedule.c_ab,
        z_table,
        k0,
        condition1: Condition1 {
            beta,
            beta_ok: beta > 2.0,
            alpha_over_h_ok: schedule.alpha / schedule.h < 1.0,
            window_ok,
            first_window_violation,
            horizon,
        },
    })
}

/// Rows kept in the table: `k = 0`, powers of ten, and the horizon.
fn is_table_row(k: usize, horizon: usize) -> bool {
    if k == 0 || k == horizon {
        return true;
    }
    let mut p = 1;
    while p < k {
        p *= 10;
    }
    p == k
}
