//! Exact ground truth for evaluating learners.
//!
//! Matrix games are solved by linear programming, the minimax value `v*` by Shapley iteration,
//! stationary policies by a direct linear solve, and best responses by value iteration on the
//! single-agent MDP obtained by fixing the opponent.

mod simplex;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::game::{check_len, JointPolicy, MarkovGame, Player};
use crate::linalg::{self, Matrix};
use crate::tsallis::Distribution;

/// Default tolerance for oracle solves.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default cap on value-iteration sweeps.
pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;
/// Certificate tolerance used for the per-state matrix games inside Bellman backups.
const STAGE_GAME_TOL: f64 = 1e-10;

/// Value and optimal mixed strategies of a zero-sum matrix game (row player maximizes).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    pub value: f64,
    pub row_strategy: Distribution,
    pub col_strategy: Distribution,
    /// `(max_a (Xν)_a − value) + (value − min_b (πᵀX)_b)`.
    pub certificate_gap: f64,
}

/// Solves `max_π min_ν πᵀ X ν`.
///
/// `X` is shifted by `1 + max|X|` to make every entry positive; the packing LP
/// `max 1ᵀy s.t. X'y ≤ 1` then yields the column strategy from `y` and the row strategy from its
/// dual, both scaled by the shifted value `1/Σy`.
pub fn matrix_game_value(x: &Matrix, tol: f64) -> Result<MatrixGameSolution> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::InvalidParameter(
            "matrix game needs at least one action per player".into(),
        ));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "matrix game entries must be finite".into(),
        ));
    }
    let shift = 1.0 + x.max_abs();
    let mut shifted = x.clone();
    shifted.as_mut_slice().iter_mut().for_each(|v| *v += shift);
    let sol = simplex::solve_packing(&shifted)?;
    let total: f64 = sol.primal.iter().sum();
    let col_strategy = Distribution::from_weights(sol.primal.iter().map(|v| v.max(0.0)).collect())?;
    let row_strategy = Distribution::from_weights(sol.dual.iter().map(|v| v.max(0.0)).collect())?;
    let value = 1.0 / total - shift;

    let best_row = x
        .mul_vec(&col_strategy)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let worst_col = x
        .vec_mul(&row_strategy)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let certificate_gap = (best_row - value) + (value - worst_col);
    if !(certificate_gap <= tol) {
        return Err(Error::InvariantViolated(alloc::format!(
            "matrix game certificate gap {certificate_gap:e} exceeds {tol:e}"
        )));
    }
    Ok(MatrixGameSolution {
        value,
        row_strategy,
        col_strategy,
        certificate_gap,
    })
}

/// Minimax Bellman backup `B^i(v)(s) = val(T^i(v)(s))` for every state.
pub fn bellman_minimax(game: &MarkovGame, v: &[f64], player: Player) -> Result<Vec<f64>> {
    (0..game.n_states())
        .map(|s| {
            let m = game.payoff_matrix(v, s, player)?;
            Ok(matrix_game_value(&m, STAGE_GAME_TOL)?.value)
        })
        .collect()
}

/// Output of a Shapley value-iteration solve for one player.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub v_star: Vec<f64>,
    pub iterations: usize,
    /// `‖B(v) − v‖∞` at the returned table.
    pub residual: f64,
}

/// Iterates `B^i` from zero until successive iterates differ by at most `tol (1−γ)/(2γ)`,
/// which puts the result within `tol` of the fixed point.
pub fn shapley_solve(game: &MarkovGame, player: Player, tol: f64) -> Result<SolveReport> {
    shapley_solve_capped(game, player, tol, DEFAULT_ITERATION_CAP)
}

pub fn shapley_solve_capped(
    game: &MarkovGame,
    player: Player,
    tol: f64,
    cap: usize,
) -> Result<SolveReport> {
    let gamma = game.gamma();
    let stop = tol * (1.0 - gamma) / (2.0 * gamma);
    let mut v = vec![0.0; game.n_states()];
    let mut step = f64::INFINITY;
    for it in 1..=cap {
        let next = bellman_minimax(game, &v, player)?;
        step = linalg::max_abs_diff(&next, &v);
        v = next;
        if step <= stop {
            let residual = linalg::max_abs_diff(&bellman_minimax(game, &v, player)?, &v);
            return Ok(SolveReport {
                v_star: v,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::IterationCap {
        what: "shapley iteration",
        cap,
        residual: step,
    })
}

/// Minimax values of both players plus the equilibrium read off the final stage games.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleySolution {
    pub player1: SolveReport,
    pub player2: SolveReport,
    /// `‖v*¹ + v*²‖∞`, zero in exact arithmetic.
    pub antisymmetry: f64,
    /// Per-state optimal strategies of `val(T¹(v*¹)(s))`.
    pub equilibrium: JointPolicy,
}

pub fn solve_both(game: &MarkovGame, tol: f64) -> Result<ShapleySolution> {
    let player1 = shapley_solve(game, Player::One, tol)?;
    let player2 = shapley_solve(game, Player::Two, tol)?;
    let antisymmetry = player1
        .v_star
        .iter()
        .zip(&player2.v_star)
        .fold(0.0_f64, |m, (a, b)| m.max((a + b).abs()));
    let n = game.n_states();
    let mut pi1 = Matrix::zeros(n, game.n_actions(Player::One));
    let mut pi2 = Matrix::zeros(n, game.n_actions(Player::Two));
    for s in 0..n {
        let sol = matrix_game_value(
            &game.payoff_matrix(&player1.v_star, s, Player::One)?,
            STAGE_GAME_TOL,
        )?;
        pi1.row_mut(s).copy_from_slice(&sol.row_strategy);
        pi2.row_mut(s).copy_from_slice(&sol.col_strategy);
    }
    Ok(ShapleySolution {
        player1,
        player2,
        antisymmetry,
        equilibrium: JointPolicy::new(pi1, pi2),
    })
}

/// Expected one-step reward of `player` at each state under `policy`.
fn expected_rewards(game: &MarkovGame, policy: &JointPolicy, player: Player) -> Result<Vec<f64>> {
    let mut r = vec![0.0; game.n_states()];
    for (s, rs) in r.iter_mut().enumerate() {
        for (a1, &w1) in policy.pi1.row(s).iter().enumerate() {
            for (a2, &w2) in policy.pi2.row(s).iter().enumerate() {
                *rs += w1 * w2 * game.reward(s, a1, a2, player)?;
            }
        }
    }
    Ok(r)
}

/// Value of `player` under a stationary joint policy: solves `(I − γ P_π) v = r_π`.
///
/// Falls back to value iteration if the direct solve is refused or inaccurate.
pub fn policy_evaluate(
    game: &MarkovGame,
    policy: &JointPolicy,
    player: Player,
) -> Result<Vec<f64>> {
    policy.validate(game)?;
    let p = game.induced_chain(policy)?;
    let r = expected_rewards(game, policy, player)?;
    let n = game.n_states();
    let gamma = game.gamma();
    let mut a = Matrix::identity(n);
    for s in 0..n {
        for t in 0..n {
            a[(s, t)] -= gamma * p[(s, t)];
        }
    }
    if let Ok(v) = linalg::solve(&a, &r) {
        let back = a.mul_vec(&v)?;
        if linalg::max_abs_diff(&back, &r) <= 1e-10 {
            return Ok(v);
        }
    }
    let stop = 1e-12 * (1.0 - gamma) / (2.0 * gamma);
    let mut v = vec![0.0; n];
    for _ in 0..DEFAULT_ITERATION_CAP {
        let pv = p.mul_vec(&v)?;
        let next: Vec<f64> = r.iter().zip(&pv).map(|(ri, x)| ri + gamma * x).collect();
        let step = linalg::max_abs_diff(&next, &v);
        v = next;
        if step <= stop {
            return Ok(v);
        }
    }
    Err(Error::Singular("policy evaluation"))
}

/// Optimal value of `player` against a fixed opponent and a greedy deterministic policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub value: Vec<f64>,
    /// `|S| x |A^i|` point masses; ties go to the lowest action index.
    pub policy: Matrix,
    pub iterations: usize,
}

/// Solves the MDP faced by `player` when the opponent plays `opponent` (an `|S| x |A^-i|`
/// table) by value iteration to `tol`.
pub fn best_response_value(
    game: &MarkovGame,
    opponent: &Matrix,
    player: Player,
    tol: f64,
) -> Result<BestResponse> {
    let n = game.n_states();
    let own = game.n_actions(player);
    let opp = player.opponent();
    check_len("opponent policy states", opponent.rows(), n)?;
    check_len(
        "opponent policy actions",
        opponent.cols(),
        game.n_actions(opp),
    )?;
    // collapsed MDP: rewards |S| x A, kernel rows (s, a) of length |S|
    let mut reward = Matrix::zeros(n, own);
    let mut kernel = Matrix::zeros(n * own, n);
    for s in 0..n {
        for a in 0..own {
            for (b, &w) in opponent.row(s).iter().enumerate() {
                let (a1, a2) = match player {
                    Player::One => (a, b),
                    Player::Two => (b, a),
                };
                reward[(s, a)] += w * game.reward(s, a1, a2, player)?;
                for (k, t) in kernel
                    .row_mut(s * own + a)
                    .iter_mut()
                    .zip(game.transition_row(s, a1, a2))
                {
                    *k += w * t;
                }
            }
        }
    }
    let gamma = game.gamma();
    let q_of = |v: &[f64], s: usize, a: usize| {
        reward[(s, a)] + gamma * linalg::dot(kernel.row(s * own + a), v)
    };
    let stop = tol * (1.0 - gamma) / (2.0 * gamma);
    let mut v = vec![0.0; n];
    for it in 1..=DEFAULT_ITERATION_CAP {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                (0..own)
                    .map(|a| q_of(&v, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let step = linalg::max_abs_diff(&next, &v);
        v = next;
        if step <= stop {
            let mut policy = Matrix::zeros(n, own);
            for s in 0..n {
                let mut best = 0;
                for a in 1..own {
                    if q_of(&v, s, a) > q_of(&v, s, best) {
                        best = a;
                    }
                }
                policy[(s, best)] = 1.0;
            }
            return Ok(BestResponse {
                value: v,
                policy,
                iterations: it,
            });
        }
    }
    Err(Error::IterationCap {
        what: "best-response value iteration",
        cap: DEFAULT_ITERATION_CAP,
        residual: f64::NAN,
    })
}

/// Nash gap at the start state together with its two summands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashGap {
    pub total: f64,
    /// `max_π̃ v¹_(π̃,π²)(s0) − v¹_π(s0)`.
    pub gap1: f64,
    pub gap2: f64,
    /// Largest per-state gap sum, for reference; the headline quantity is at `s0`.
    pub max_over_states: f64,
    pub tol: f64,
}

/// Best-response advantage of `player` at every state.
pub fn best_response_gaps(
    game: &MarkovGame,
    policy: &JointPolicy,
    player: Player,
    tol: f64,
) -> Result<Vec<f64>> {
    let br = best_response_value(game, policy.player(player.opponent()), player, tol)?;
    let v = policy_evaluate(game, policy, player)?;
    Ok(br.value.iter().zip(&v).map(|(b, x)| b - x).collect())
}

/// `NG(π) = Σ_i (max_π̃ v^i_(π̃,π^-i)(s0) − v^i_π(s0))`.
pub fn nash_gap(game: &MarkovGame, policy: &JointPolicy, tol: f64) -> Result<NashGap> {
    let g1 = best_response_gaps(game, policy, Player::One, tol)?;
    let g2 = best_response_gaps(game, policy, Player::Two, tol)?;
    let s0 = game.start_state();
    Ok(NashGap {
        total: g1[s0] + g2[s0],
        gap1: g1[s0],
        gap2: g2[s0],
        max_over_states: g1
            .iter()
            .zip(&g2)
            .map(|(a, b)| a + b)
            .fold(f64::NEG_INFINITY, f64::max),
        tol,
    })
}

/// `q̄^i(s) = T^i(v)(s) π^-i(s)`: expected payoff of each of `player`'s actions at `s`.
pub fn q_target(
    game: &MarkovGame,
    v: &[f64],
    opponent: &Matrix,
    player: Player,
    s: usize,
) -> Result<Vec<f64>> {
    check_len("opponent policy states", opponent.rows(), game.n_states())?;
    check_len(
        "opponent policy actions",
        opponent.cols(),
        game.n_actions(player.opponent()),
    )?;
    let m = game.payoff_matrix(v, s, player)?;
    m.mul_vec(opponent.row(s))
}

#[cfg(test)]
mod tests;
