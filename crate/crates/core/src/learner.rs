//! Tsallis-smoothed best-response dynamics with value iteration.
//!
//! Each episode resets the q-tables to zero and the policies to uniform, then runs `K` inner
//! steps. Every step:
//!
//! 1. moves every state's policy row towards the smoothed best response of its q-row,
//!    `π ← π + β_k (σ_η(q) − π)`;
//! 2. samples player 1's action, then player 2's action, then the next state (one rng draw
//!    each, in that order);
//! 3. applies a TD update to the visited `(s, a^i)` entry of each learning player's q-table
//!    using the value table frozen for the episode.
//!
//! At the end of the episode the value table becomes `v(s) = π(s)ᵀ q(s)` and the environment
//! state carries over to the next episode.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use alloc::{format, string::String};

use rand_core::{RngCore, SeedableRng};

use crate::chain;
use crate::error::{Error, Result};
use crate::game::{self, check_len, JointPolicy, MarkovGame, Player};
use crate::linalg::{self, Matrix};
use crate::oracle;
use crate::rng::{self, RunRng};
use crate::theory::{self, TheoryReport};
use crate::tsallis::{self, Distribution, SmoothingParams};

/// Slack allowed on the `1/(1−γ)` bound to absorb rounding in the convex combinations.
const BOUND_SLACK: f64 = 1e-12;

/// Diminishing step sizes `α_k = α/(k+h)`, `β_k = c_αβ α_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub alpha: f64,
    pub h: f64,
    pub c_ab: f64,
}

impl StepSchedule {
    /// Constants used for desk-scale runs (`α = 10`, `h = 100`, `c_αβ = 0.1`).
    pub const PRACTICAL: StepSchedule = StepSchedule {
        alpha: 10.0,
        h: 100.0,
        c_ab: 0.1,
    };

    /// Checks positivity and `α/h < 1`.
    pub fn new(alpha: f64, h: f64, c_ab: f64) -> Result<Self> {
        let s = Self { alpha, h, c_ab };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.h > 0.0 && self.c_ab > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha, h and c_ab must be positive (got {}, {}, {})",
                self.alpha, self.h, self.c_ab
            )));
        }
        if !(self.alpha / self.h < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha/h = {} must be below 1",
                self.alpha / self.h
            )));
        }
        Ok(())
    }

    /// `(α_k, β_k)`.
    pub fn step_sizes(&self, k: usize) -> (f64, f64) {
        let alpha_k = self.alpha / (k as f64 + self.h);
        (alpha_k, self.c_ab * alpha_k)
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self::PRACTICAL
    }
}

/// Who learns.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Both players run the learner.
    SelfPlay,
    /// `learner` runs the learner against a stationary `opponent` table (`|S| x |A^-i|`).
    FixedOpponent { learner: Player, opponent: Matrix },
}

impl Mode {
    pub fn learns(&self, player: Player) -> bool {
        match self {
            Mode::SelfPlay => true,
            Mode::FixedOpponent { learner, .. } => *learner == player,
        }
    }

    fn learners(&self) -> impl Iterator<Item = Player> + '_ {
        Player::BOTH.into_iter().filter(move |&p| self.learns(p))
    }
}

/// Full run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `T`, number of episodes.
    pub episodes: usize,
    /// `K`, inner steps per episode.
    pub inner_steps: usize,
    pub eta: f64,
    pub schedule: StepSchedule,
    pub mode: Mode,
    pub seed: u64,
    /// Trace stride in episodes; the final episode is always evaluated.
    pub eval_every: usize,
    pub oracle_tol: f64,
    /// Refuse to run unless the schedule satisfies the theoretical step-size conditions.
    pub theory_strict: bool,
}

impl ExperimentConfig {
    pub fn new(episodes: usize, inner_steps: usize, eta: f64, seed: u64) -> Self {
        Self {
            episodes,
            inner_steps,
            eta,
            schedule: StepSchedule::PRACTICAL,
            mode: Mode::SelfPlay,
            seed,
            eval_every: 1,
            oracle_tol: oracle::DEFAULT_TOL,
            theory_strict: false,
        }
    }

    pub fn validate(&self, game: &MarkovGame) -> Result<()> {
        if self.episodes < 1 {
            return Err(Error::InvalidParameter("T must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta {} must be positive",
                self.eta
            )));
        }
        if self.eval_every < 1 {
            return Err(Error::InvalidParameter(
                "eval_every must be at least 1".into(),
            ));
        }
        if !(self.oracle_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "oracle tolerance must be positive".into(),
            ));
        }
        self.schedule.validate()?;
        if self.schedule.c_ab > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "c_ab {} above 1 makes beta_k exceed alpha_k",
                self.schedule.c_ab
            )));
        }
        if let Mode::FixedOpponent { learner, opponent } = &self.mode {
            let opp = learner.opponent();
            check_len("opponent policy states", opponent.rows(), game.n_states())?;
            check_len(
                "opponent policy actions",
                opponent.cols(),
                game.n_actions(opp),
            )?;
            for s in 0..game.n_states() {
                tsallis::check_simplex(opponent.row(s), game::PROB_TOL)?;
            }
        }
        Ok(())
    }

    /// Episode indices that receive a trace row (besides the `t = 0` baseline).
    pub fn is_evaluated(&self, t: usize) -> bool {
        t.is_multiple_of(self.eval_every) || t == self.episodes
    }
}

/// Learner iterates: q-tables, value tables, policies, and the environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub q1: Matrix,
    pub q2: Matrix,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub pi: JointPolicy,
    pub env_state: usize,
    /// Completed episodes.
    pub episode: usize,
    /// Inner steps taken in the current episode.
    pub step: usize,
}

impl LearnerState {
    /// Zero values, zero q-tables, uniform policies (the opponent's table in fixed mode).
    pub fn new(game: &MarkovGame, mode: &Mode) -> Self {
        let n = game.n_states();
        let mut state = Self {
            q1: Matrix::zeros(n, game.n_actions(Player::One)),
            q2: Matrix::zeros(n, game.n_actions(Player::Two)),
            v1: vec![0.0; n],
            v2: vec![0.0; n],
            pi: JointPolicy::uniform(game),
            env_state: game.start_state(),
            episode: 0,
            step: 0,
        };
        if let Mode::FixedOpponent { learner, opponent } = mode {
            *state.pi.player_mut(learner.opponent()) = opponent.clone();
        }
        state
    }

    pub fn q(&self, player: Player) -> &Matrix {
        match player {
            Player::One => &self.q1,
            Player::Two => &self.q2,
        }
    }

    pub fn v(&self, player: Player) -> &[f64] {
        match player {
            Player::One => &self.v1,
            Player::Two => &self.v2,
        }
    }

    /// Resets q-tables and learning players' policies; values and env state carry over.
    pub fn begin_episode(&mut self, game: &MarkovGame, mode: &Mode) {
        self.q1.as_mut_slice().fill(0.0);
        self.q2.as_mut_slice().fill(0.0);
        for p in mode.learners() {
            *self.pi.player_mut(p) = game::uniform_table(game.n_states(), game.n_actions(p));
        }
        self.step = 0;
    }
}

/// `(α_k, β_k)` for `schedule`.
pub fn step_sizes(k: usize, schedule: &StepSchedule) -> (f64, f64) {
    schedule.step_sizes(k)
}

/// `(1 − β) π + β σ_η(q)`.
pub fn policy_update(
    pi_row: &[f64],
    q_row: &[f64],
    beta: f64,
    params: &SmoothingParams,
) -> Result<Distribution> {
    check_len("policy row", pi_row.len(), q_row.len())?;
    let target = tsallis::tsallis_response(q_row, params)?;
    mix(pi_row, &target, beta)
}

fn mix(pi: &[f64], target: &[f64], beta: f64) -> Result<Distribution> {
    let w: Vec<f64> = pi
        .iter()
        .zip(target)
        .map(|(p, t)| (1.0 - beta) * p + beta * t)
        .collect();
    Distribution::from_weights(w)
}

/// TD step on the visited entry: `q(s,a) ← (1 − α) q(s,a) + α (r + γ v(s'))`.
#[allow(clippy::too_many_arguments)]
pub fn td_update(
    q: &mut Matrix,
    s: usize,
    a: usize,
    reward: f64,
    v: &[f64],
    s_next: usize,
    alpha: f64,
    gamma: f64,
) -> Result<()> {
    for (what, index, bound) in [
        ("state", s, q.rows()),
        ("action", a, q.cols()),
        ("next state", s_next, v.len()),
    ] {
        if index >= bound {
            return Err(Error::IndexOutOfRange { what, index, bound });
        }
    }
    let old = q[(s, a)];
    q[(s, a)] = (1.0 - alpha) * old + alpha * (reward + gamma * v[s_next]);
    Ok(())
}

/// End-of-episode values `v(s) = π(s)ᵀ q(s)`.
pub fn value_refresh(pi: &Matrix, q: &Matrix) -> Result<Vec<f64>> {
    check_len("policy states", pi.rows(), q.rows())?;
    check_len("policy actions", pi.cols(), q.cols())?;
    Ok((0..q.rows())
        .map(|s| linalg::dot(pi.row(s), q.row(s)))
        .collect())
}

/// Counters the inner loop keeps while enforcing its invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginStats {
    /// Smallest learning-player probability seen after a policy update.
    pub min_margin: f64,
    /// Policy updates that left some probability below `margin_floor` (the `ℓ_η` formula).
    pub below_stated_floor: usize,
    pub updates: usize,
}

impl Default for MarginStats {
    fn default() -> Self {
        Self {
            min_margin: f64::INFINITY,
            below_stated_floor: 0,
            updates: 0,
        }
    }
}

fn check_bound(what: &str, x: f64, bound: f64) -> Result<()> {
    if x.abs() <= bound * (1.0 + BOUND_SLACK) {
        Ok(())
    } else {
        Err(Error::InvariantViolated(format!(
            "{what} = {x} exceeds 1/(1-gamma) = {bound}"
        )))
    }
}

/// Runs `K = config.inner_steps` inner iterations from the current state.
///
/// The `|q|, |v| ≤ 1/(1−γ)` bounds and the policy floor
/// [`tsallis::provable_margin_floor`] are checked on every step and surface as
/// [`Error::InvariantViolated`].
pub fn run_inner_loop<R: RngCore + ?Sized>(
    state: &mut LearnerState,
    game: &MarkovGame,
    config: &ExperimentConfig,
    rng: &mut R,
    stats: &mut MarginStats,
) -> Result<()> {
    let params = SmoothingParams::new(config.eta);
    let gamma = game.gamma();
    let bound = game.value_bound();
    let floors: [(f64, f64); 2] = Player::BOTH.map(|p| {
        let n = game.n_actions(p);
        (
            tsallis::provable_margin_floor(n, config.eta, gamma),
            tsallis::margin_floor(n, config.eta, gamma),
        )
    });
    for _ in 0..config.inner_steps {
        let k = state.step;
        let (alpha_k, beta_k) = config.schedule.step_sizes(k);

        for p in config.mode.learners() {
            let (provable, stated) = floors[p.index()];
            let mut worst = f64::INFINITY;
            for s in 0..game.n_states() {
                let next = policy_update(
                    state.pi.player(p).row(s),
                    state.q(p).row(s),
                    beta_k,
                    &params,
                )?;
                worst = next.iter().copied().fold(worst, f64::min);
                state.pi.player_mut(p).row_mut(s).copy_from_slice(&next);
            }
            if worst < provable - 1e-12 {
                return Err(Error::InvariantViolated(format!(
                    "player {p} policy probability {worst} below floor {provable}"
                )));
            }
            if worst < stated - 1e-12 {
                stats.below_stated_floor += 1;
            }
            stats.min_margin = stats.min_margin.min(worst);
            stats.updates += 1;
        }

        let s = state.env_state;
        let a1 = rng::categorical(state.pi.pi1.row(s), rng);
        let a2 = rng::categorical(state.pi.pi2.row(s), rng);
        let s_next = game.sample_transition(s, a1, a2, rng)?;

        for p in config.mode.learners() {
            let a = if p == Player::One { a1 } else { a2 };
            let r = game.reward(s, a1, a2, p)?;
            let (q, v) = match p {
                Player::One => (&mut state.q1, &state.v1),
                Player::Two => (&mut state.q2, &state.v2),
            };
            td_update(q, s, a, r, v, s_next, alpha_k, gamma)?;
            check_bound("q entry", q[(s, a)], bound)?;
        }
        state.env_state = s_next;
        state.step += 1;
    }
    Ok(())
}

/// One row of the run trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// Episodes completed; 0 is the untrained baseline.
    pub t: usize,
    /// Nash gap at `s0` in self-play; the learner's best-response gap in fixed-opponent mode.
    pub nash_gap: f64,
    /// `‖v¹ + v²‖∞` (the opponent's table is zero in fixed-opponent mode).
    pub v_sum_inf: f64,
    /// `‖v^i − v^i_ref‖∞`, against `v*` in self-play or the best-response value of the learner.
    pub v_err: [f64; 2],
    pub min_margin: f64,
    /// `V_π` of the current policy at the episode's value tables.
    pub lyap_pi: f64,
    /// `V_q` of the current q-tables against `T^i(v^i) π^-i`.
    pub lyap_q: f64,
    pub wallclock_ns: u64,
    /// Oracle failure message, if evaluation failed.
    pub oracle_error: Option<String>,
}

/// Per-episode diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// `π_{T,K}`.
    pub policy: JointPolicy,
    pub trace: RunTrace,
    pub state: LearnerState,
    pub margins: MarginStats,
    /// Present in theory-strict mode.
    pub theory: Option<TheoryReport>,
}

enum Reference {
    SelfPlay([Vec<f64>; 2]),
    BestResponse(Vec<f64>),
    Unavailable(String),
}

fn reference_values(game: &MarkovGame, config: &ExperimentConfig) -> Reference {
    let outcome = match &config.mode {
        Mode::SelfPlay => oracle::solve_both(game, config.oracle_tol)
            .map(|sol| Reference::SelfPlay([sol.player1.v_star, sol.player2.v_star])),
        Mode::FixedOpponent { learner, opponent } => {
            oracle::best_response_value(game, opponent, *learner, config.oracle_tol)
                .map(|br| Reference::BestResponse(br.value))
        }
    };
    outcome.unwrap_or_else(|e| Reference::Unavailable(e.to_string()))
}

fn evaluate(
    game: &MarkovGame,
    config: &ExperimentConfig,
    state: &LearnerState,
    episode_values: [&[f64]; 2],
    reference: &Reference,
    t: usize,
    wallclock_ns: u64,
) -> TraceRow {
    let mut row = TraceRow {
        t,
        nash_gap: f64::NAN,
        v_sum_inf: state
            .v1
            .iter()
            .zip(&state.v2)
            .fold(0.0_f64, |m, (a, b)| m.max((a + b).abs())),
        v_err: [0.0; 2],
        min_margin: f64::NAN,
        lyap_pi: f64::NAN,
        lyap_q: f64::NAN,
        wallclock_ns,
        oracle_error: None,
    };
    match reference {
        Reference::SelfPlay(vs) => {
            for p in Player::BOTH {
                row.v_err[p.index()] = linalg::max_abs_diff(state.v(p), &vs[p.index()]);
            }
        }
        Reference::BestResponse(v) => {
            if let Mode::FixedOpponent { learner, .. } = &config.mode {
                row.v_err[learner.index()] = linalg::max_abs_diff(state.v(*learner), v);
            }
        }
        Reference::Unavailable(msg) => {
            row.v_err = [f64::NAN; 2];
            row.oracle_error = Some(msg.clone());
        }
    }
    let learners: Vec<Player> = config.mode.learners().collect();
    row.min_margin = learners
        .iter()
        .flat_map(|&p| state.pi.player(p).as_slice().iter().copied())
        .fold(f64::INFINITY, f64::min);

    let diagnostics = || -> Result<(f64, f64, f64)> {
        let gap = match &config.mode {
            Mode::SelfPlay => oracle::nash_gap(game, &state.pi, config.oracle_tol)?.total,
            Mode::FixedOpponent { learner, .. } => {
                oracle::best_response_gaps(game, &state.pi, *learner, config.oracle_tol)?
                    [game.start_state()]
            }
        };
        let (mut lyap_pi, mut lyap_q) = (0.0, 0.0);
        for &p in &learners {
            let v = episode_values[p.index()];
            for s in 0..game.n_states() {
                lyap_pi += chain::lyapunov_policy_player(game, v, &state.pi, config.eta, s, p)?;
            }
            let target = chain::q_target_table(game, v, &state.pi, p)?;
            lyap_q += chain::lyapunov_q(&[state.q(p)], &[&target])?;
        }
        Ok((gap, lyap_pi, lyap_q))
    };
    match diagnostics() {
        Ok((gap, lp, lq)) => {
            row.nash_gap = gap;
            row.lyap_pi = lp;
            row.lyap_q = lq;
        }
        Err(e) => row.oracle_error = Some(e.to_string()),
    }
    row
}

/// Runs the learner with no clock (`wallclock_ns` is recorded as 0).
pub fn run(game: &MarkovGame, config: &ExperimentConfig) -> Result<RunOutput> {
    run_with_clock(game, config, &mut || 0)
}

/// Runs `T` episodes of `K` steps and returns `π_{T,K}` with the trace.
///
/// `clock` returns nanoseconds since an arbitrary origin; trace rows store the elapsed time
/// since the run started.
pub fn run_with_clock(
    game: &MarkovGame,
    config: &ExperimentConfig,
    clock: &mut dyn FnMut() -> u64,
) -> Result<RunOutput> {
    let violations = game.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidGame(violations));
    }
    config.validate(game)?;
    let theory = if config.theory_strict {
        let report = theory::theory_constants(
            game,
            config.eta,
            &JointPolicy::uniform(game),
            &config.schedule,
            config.inner_steps,
        )?;
        let problems = report.strict_violations();
        if !problems.is_empty() {
            return Err(Error::TheoryStrict(problems.join("; ")));
        }
        Some(report)
    } else {
        None
    };

    let start = clock();
    let mut rng = RunRng::seed_from_u64(config.seed);
    let reference = reference_values(game, config);
    let mut state = LearnerState::new(game, &config.mode);
    let mut margins = MarginStats::default();
    let mut trace = RunTrace::default();
    let bound = game.value_bound();

    let zeros = vec![0.0; game.n_states()];
    trace.rows.push(evaluate(
        game,
        config,
        &state,
        [&zeros, &zeros],
        &reference,
        0,
        clock() - start,
    ));

    for t in 1..=config.episodes {
        state.begin_episode(game, &config.mode);
        run_inner_loop(&mut state, game, config, &mut rng, &mut margins)?;
        let episode_values = [state.v1.clone(), state.v2.clone()];
        for p in config.mode.learners() {
            let v = value_refresh(state.pi.player(p), state.q(p))?;
            for &x in &v {
                check_bound("value entry", x, bound)?;
            }
            match p {
                Player::One => state.v1 = v,
                Player::Two => state.v2 = v,
            }
        }
        state.episode = t;
        if config.is_evaluated(t) {
            let row = evaluate(
                game,
                config,
                &state,
                [&episode_values[0], &episode_values[1]],
                &reference,
                t,
                clock() - start,
            );
            trace.rows.push(row);
        }
    }
    Ok(RunOutput {
        policy: state.pi.clone(),
        trace,
        state,
        margins,
        theory,
    })
}
