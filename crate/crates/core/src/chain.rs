//! Markov-chain diagnostics for policy-induced state chains.
//!
//! Saturation (no qualifying step count below the horizon) is a value here, never an error, so
//! that a failed irreducibility/aperiodicity check can be observed and logged.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log};

use crate::error::{Error, Result};
use crate::game::{JointPolicy, MarkovGame, Player};
use crate::linalg::{self, Matrix};
use crate::oracle;
use crate::tsallis::{self, Distribution, SmoothingParams};

/// A step count that was either reached or cut off at a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Steps {
    Reached(usize),
    Saturated(usize),
}

impl Steps {
    pub fn reached(self) -> Option<usize> {
        match self {
            Steps::Reached(k) => Some(k),
            Steps::Saturated(_) => None,
        }
    }
}

/// Default horizon for `r_b`: `10 |S|²`, above Wielandt's `(n−1)² + 1` bound.
pub fn default_r_b_horizon(n_states: usize) -> usize {
    10 * n_states * n_states
}

/// Default horizon for mixing times.
pub const DEFAULT_MIXING_HORIZON: usize = 10_000;

/// Entries at or below this are treated as absent from the support.
const SUPPORT_EPS: f64 = 1e-15;

/// Stationary distribution `μ P = μ` of a stochastic matrix.
///
/// Solved directly with one balance equation swapped for `Σ μ = 1`, then refined once.
/// Chains with more than one closed class make that system singular and are reported as
/// [`Error::Reducible`].
pub fn stationary_distribution(p: &Matrix) -> Result<Distribution> {
    let n = p.rows();
    if p.cols() != n || n == 0 {
        return Err(Error::DimensionMismatch {
            what: "stochastic matrix",
            expected: n,
            found: p.cols(),
        });
    }
    // (Pᵀ − I) μ = 0 with the last row replaced by ones
    let mut a = p.transpose();
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mut mu = linalg::solve(&a, &rhs)
        .map_err(|_| Error::Reducible("stationary distribution is not unique"))?;
    let r: Vec<f64> = a
        .mul_vec(&mu)?
        .iter()
        .zip(&rhs)
        .map(|(x, b)| b - x)
        .collect();
    if let Ok(delta) = linalg::solve(&a, &r) {
        mu.iter_mut().zip(delta).for_each(|(m, d)| *m += d);
    }
    if mu.iter().any(|&m| m < -1e-9) {
        return Err(Error::Reducible("stationary solve produced negative mass"));
    }
    mu.iter_mut().for_each(|m| *m = m.max(0.0));
    Distribution::from_weights(mu)
}

/// `‖μ P − μ‖₁`.
pub fn stationary_residual(p: &Matrix, mu: &[f64]) -> f64 {
    p.vec_mul(mu)
        .map(|m| m.iter().zip(mu).map(|(a, b)| (a - b).abs()).sum())
        .unwrap_or(f64::INFINITY)
}

/// Total-variation distance `½ Σ |a − b|`.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn worst_tv(pk: &Matrix, mu: &[f64]) -> f64 {
    (0..pk.rows())
        .map(|s| total_variation(pk.row(s), mu))
        .fold(0.0, f64::max)
}

/// `max_s TV(P^k(s,·), μ)` for `k = 0..=k_max`, by incremental powers.
pub fn tv_curve(p: &Matrix, mu: &[f64], k_max: usize) -> Result<Vec<f64>> {
    let mut pk = Matrix::identity(p.rows());
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(worst_tv(&pk, mu));
    for _ in 0..k_max {
        pk = pk.mul(p)?;
        out.push(worst_tv(&pk, mu));
    }
    Ok(out)
}

/// [`tv_curve`] stopped at the first `k` with distance `≤ ε` (inclusive) or at `k_max`.
pub fn tv_curve_until(p: &Matrix, mu: &[f64], epsilon: f64, k_max: usize) -> Result<Vec<f64>> {
    let mut pk = Matrix::identity(p.rows());
    let mut out = vec![worst_tv(&pk, mu)];
    while out.len() <= k_max && out[out.len() - 1] > epsilon {
        pk = pk.mul(p)?;
        out.push(worst_tv(&pk, mu));
    }
    Ok(out)
}

/// ε-mixing time: smallest `k ≤ k_max` with `max_s TV(P^k(s,·), μ) ≤ ε`.
pub fn mixing_time(p: &Matrix, mu: &[f64], epsilon: f64, k_max: usize) -> Result<Steps> {
    let mut pk = Matrix::identity(p.rows());
    for k in 0..=k_max {
        if worst_tv(&pk, mu) <= epsilon {
            return Ok(Steps::Reached(k));
        }
        if k < k_max {
            pk = pk.mul(p)?;
        }
    }
    Ok(Steps::Saturated(k_max))
}

/// First `k` with `curve[k] ≤ ε`; the curve is nonincreasing.
pub fn mixing_time_from_curve(curve: &[f64], epsilon: f64) -> Steps {
    match curve.iter().position(|&tv| tv <= epsilon) {
        Some(k) => Steps::Reached(k),
        None => Steps::Saturated(curve.len().saturating_sub(1)),
    }
}

/// `r_b`: smallest `k ≤ k_max` with every entry of `P^k` positive, on boolean supports.
pub fn compute_r_b(p: &Matrix, k_max: usize) -> Steps {
    let n = p.rows();
    let support: Vec<bool> = p.as_slice().iter().map(|&x| x > SUPPORT_EPS).collect();
    let mut reach: Vec<bool> = (0..n * n).map(|i| i / n == i % n).collect();
    for k in 0..=k_max {
        if reach.iter().all(|&b| b) {
            return Steps::Reached(k);
        }
        if k == k_max {
            break;
        }
        let mut next = vec![false; n * n];
        for i in 0..n {
            for m in 0..n {
                if !reach[i * n + m] {
                    continue;
                }
                for j in 0..n {
                    next[i * n + j] |= support[m * n + j];
                }
            }
        }
        reach = next;
    }
    Steps::Saturated(k_max)
}

/// Whether every state reaches every other state (periodic chains count).
pub fn is_irreducible(p: &Matrix) -> bool {
    let n = p.rows();
    (0..n).all(|start| {
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(s) = stack.pop() {
            for (t, &w) in p.row(s).iter().enumerate() {
                if w > SUPPORT_EPS && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen.iter().all(|&b| b)
    })
}

/// Least-squares slope of `log TV(k)` over the given window, as a geometric rate.
///
/// Points at or below `1e-13` are round-off and are dropped; fewer than two usable points means
/// the chain is already mixed and the rate is reported as 0.
pub fn fit_decay_rate(curve: &[f64], from: usize, to: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (from..=to.min(curve.len().saturating_sub(1)))
        .filter(|&k| curve[k] > 1e-13)
        .map(|k| (k as f64, log(curve[k])))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    exp(sxy / sxx).min(1.0)
}

/// Outcome of the benchmark-policy check.
#[derive(Debug, Clone, PartialEq)]
pub struct Assumption3Report {
    pub holds: bool,
    pub r_b: Steps,
    /// `μ_{b,min}`, when the chain is irreducible and aperiodic.
    pub mu_b_min: Option<f64>,
    /// Empirical geometric decay rate of the worst-row TV distance over `[r_b, r_b + 50]`.
    pub rho_b_estimate: Option<f64>,
}

/// Checks that `pi_b` induces an irreducible aperiodic chain (`r_b` finite).
pub fn check_assumption3(
    game: &MarkovGame,
    pi_b: &JointPolicy,
    k_max: usize,
) -> Result<Assumption3Report> {
    let p = game.induced_chain(pi_b)?;
    let r_b = compute_r_b(&p, k_max);
    let Steps::Reached(r) = r_b else {
        return Ok(Assumption3Report {
            holds: false,
            r_b,
            mu_b_min: None,
            rho_b_estimate: None,
        });
    };
    let mu = stationary_distribution(&p)?;
    let curve = tv_curve(&p, &mu, r + 50)?;
    Ok(Assumption3Report {
        holds: true,
        r_b,
        mu_b_min: Some(min_of(&mu)),
        rho_b_estimate: Some(fit_decay_rate(&curve, r, r + 50)),
    })
}

fn min_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Everything the `diag` command prints about one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub stationary: Distribution,
    pub mixing_time: Steps,
    pub r_b: Steps,
    pub min_stationary: f64,
    pub irreducible_aperiodic: bool,
    pub stationary_residual: f64,
}

/// Builds a [`ChainReport`] for a stochastic matrix.
pub fn chain_report(p: &Matrix, epsilon: f64) -> Result<ChainReport> {
    let stationary = stationary_distribution(p)?;
    let mixing_time = mixing_time(p, &stationary, epsilon, DEFAULT_MIXING_HORIZON)?;
    let r_b = compute_r_b(p, default_r_b_horizon(p.rows()));
    Ok(ChainReport {
        min_stationary: min_of(&stationary),
        stationary_residual: stationary_residual(p, &stationary),
        irreducible_aperiodic: r_b.reached().is_some(),
        stationary,
        mixing_time,
        r_b,
    })
}

/// `1 / min_s μ_π(s)`: worst expected return time to a state under `policy`.
pub fn reachability_constant(game: &MarkovGame, policy: &JointPolicy) -> Result<f64> {
    let p = game.induced_chain(policy)?;
    if !is_irreducible(&p) {
        return Err(Error::Reducible("induced chain is not irreducible"));
    }
    let mu = stationary_distribution(&p)?;
    Ok(reachability_from_stationary(&mu))
}

pub fn reachability_from_stationary(mu: &[f64]) -> f64 {
    1.0 / min_of(mu)
}

/// Smallest action probability over both players and all states.
pub fn policy_margin(policy: &JointPolicy) -> f64 {
    min_of(policy.pi1.as_slice()).min(min_of(policy.pi2.as_slice()))
}

/// One player's summand of `V_{v,s}`: the regularized best-response advantage against the
/// opponent at state `s`, attained at `σ_η(T^i(v^i)(s) π^-i(s))`.
pub fn lyapunov_policy_player(
    game: &MarkovGame,
    v: &[f64],
    policy: &JointPolicy,
    eta: f64,
    s: usize,
    player: Player,
) -> Result<f64> {
    let target = oracle::q_target(game, v, policy.player(player.opponent()), player, s)?;
    let own = policy.player(player).row(s);
    let best = tsallis::tsallis_response(&target, &SmoothingParams::new(eta))?;
    Ok(tsallis::tsallis_objective(&best, &target, eta)
        - tsallis::tsallis_objective(own, &target, eta))
}

/// Regularized Nash gap `V_{v,s}(π)` of the stage game at `s`, summed over both players.
pub fn lyapunov_policy(
    game: &MarkovGame,
    v1: &[f64],
    v2: &[f64],
    policy: &JointPolicy,
    eta: f64,
    s: usize,
) -> Result<f64> {
    Ok(
        lyapunov_policy_player(game, v1, policy, eta, s, Player::One)?
            + lyapunov_policy_player(game, v2, policy, eta, s, Player::Two)?,
    )
}

/// `V_π`: [`lyapunov_policy`] summed over states.
pub fn lyapunov_policy_total(
    game: &MarkovGame,
    v1: &[f64],
    v2: &[f64],
    policy: &JointPolicy,
    eta: f64,
) -> Result<f64> {
    (0..game.n_states()).try_fold(0.0, |acc, s| {
        Ok(acc + lyapunov_policy(game, v1, v2, policy, eta, s)?)
    })
}

/// `V_q = Σ_i ‖q^i − q̄^i‖₂²` over paired tables.
pub fn lyapunov_q(q: &[&Matrix], targets: &[&Matrix]) -> Result<f64> {
    if q.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            what: "number of q-tables",
            expected: q.len(),
            found: targets.len(),
        });
    }
    let mut total = 0.0;
    for (a, b) in q.iter().zip(targets) {
        if a.rows() != b.rows() || a.cols() != b.cols() {
            return Err(Error::DimensionMismatch {
                what: "q-table entries",
                expected: a.as_slice().len(),
                found: b.as_slice().len(),
            });
        }
        total += a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>();
    }
    Ok(total)
}

/// Table of `q̄^i(s) = T^i(v)(s) π^-i(s)` for every state.
pub fn q_target_table(
    game: &MarkovGame,
    v: &[f64],
    policy: &JointPolicy,
    player: Player,
) -> Result<Matrix> {
    let mut out = Matrix::zeros(game.n_states(), game.n_actions(player));
    for s in 0..game.n_states() {
        let row = oracle::q_target(game, v, policy.player(player.opponent()), player, s)?;
        out.row_mut(s).copy_from_slice(&row);
    }
    Ok(out)
}
