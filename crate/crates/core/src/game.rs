//! Finite two-player zero-sum stochastic games.
//!
//! Only player 1's reward table is stored; player 2's reward is its negation, so the zero-sum
//! identity holds by construction. Transitions are a dense table with one row of length
//! `n_states` per `(s, a1, a2)`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_core::{RngCore, SeedableRng};

use crate::chain::{self, Steps};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{self, RunRng};

/// Tolerance on transition row sums.
pub const PROB_TOL: f64 = 1e-12;
/// Rows off by at most this much are renormalized on load instead of rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Matrix of `T^i(v)(s, ·, ·)`: rows are the player's own actions, columns the opponent's.
pub type PayoffMatrix = Matrix;

/// One of the two players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    /// 0 for player 1, 1 for player 2.
    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

/// A violated game invariant, with its location.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyDimension {
        what: &'static str,
    },
    TableLength {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    TransitionRowSum {
        s: usize,
        a1: usize,
        a2: usize,
        sum: f64,
    },
    NegativeProbability {
        s: usize,
        a1: usize,
        a2: usize,
        next: usize,
        value: f64,
    },
    RewardOutOfRange {
        s: usize,
        a1: usize,
        a2: usize,
        value: f64,
    },
    Gamma(f64),
    StartState {
        start: usize,
        n_states: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyDimension { what } => write!(f, "{what} must be at least 1"),
            Violation::TableLength {
                what,
                expected,
                found,
            } => {
                write!(f, "{what} table has {found} entries, expected {expected}")
            }
            Violation::TransitionRowSum { s, a1, a2, sum } => {
                write!(f, "transition row (s={s}, a1={a1}, a2={a2}) sums to {sum}")
            }
            Violation::NegativeProbability {
                s,
                a1,
                a2,
                next,
                value,
            } => write!(
                f,
                "transition P({next}|s={s}, a1={a1}, a2={a2}) = {value} is negative"
            ),
            Violation::RewardOutOfRange { s, a1, a2, value } => {
                write!(
                    f,
                    "reward R1(s={s}, a1={a1}, a2={a2}) = {value} outside [-1, 1]"
                )
            }
            Violation::Gamma(g) => write!(f, "discount {g} outside (0, 1)"),
            Violation::StartState { start, n_states } => {
                write!(f, "start state {start} out of range for {n_states} states")
            }
        }
    }
}

/// Two-player zero-sum stochastic game.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGame {
    n_states: usize,
    n_actions1: usize,
    n_actions2: usize,
    /// `P(s'|s,a1,a2)` at `((s*A1 + a1)*A2 + a2)*S + s'`.
    transition: Vec<f64>,
    /// `R1(s,a1,a2)` at `(s*A1 + a1)*A2 + a2`.
    reward1: Vec<f64>,
    gamma: f64,
    start_state: usize,
}

impl MarkovGame {
    /// Assembles a game without checking invariants; see [`MarkovGame::validate`].
    pub fn from_parts(
        n_states: usize,
        n_actions1: usize,
        n_actions2: usize,
        transition: Vec<f64>,
        reward1: Vec<f64>,
        gamma: f64,
        start_state: usize,
    ) -> Self {
        Self {
            n_states,
            n_actions1,
            n_actions2,
            transition,
            reward1,
            gamma,
            start_state,
        }
    }

    /// Assembles a game, renormalizing rows that are off by at most [`RENORMALIZE_TOL`] and
    /// rejecting anything that still violates an invariant.
    pub fn new(
        n_states: usize,
        n_actions1: usize,
        n_actions2: usize,
        transition: Vec<f64>,
        reward1: Vec<f64>,
        gamma: f64,
        start_state: usize,
    ) -> Result<Self> {
        let mut game = Self::from_parts(
            n_states,
            n_actions1,
            n_actions2,
            transition,
            reward1,
            gamma,
            start_state,
        );
        game.renormalize_rows(RENORMALIZE_TOL);
        let violations = game.validate();
        if violations.is_empty() {
            Ok(game)
        } else {
            Err(Error::InvalidGame(violations))
        }
    }

    /// Matching pennies as a single-state game; the row player wins on a match.
    pub fn matching_pennies(gamma: f64) -> Self {
        Self::from_parts(1, 2, 2, vec![1.0; 4], vec![1.0, -1.0, -1.0, 1.0], gamma, 0)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self, player: Player) -> usize {
        match player {
            Player::One => self.n_actions1,
            Player::Two => self.n_actions2,
        }
    }

    /// Largest action-set size over both players.
    pub fn max_actions(&self) -> usize {
        self.n_actions1.max(self.n_actions2)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    /// `1/(1-γ)`, the bound on every value and q-table.
    pub fn value_bound(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    pub fn reward1_table(&self) -> &[f64] {
        &self.reward1
    }

    pub fn transition_table(&self) -> &[f64] {
        &self.transition
    }

    fn cell(&self, s: usize, a1: usize, a2: usize) -> usize {
        (s * self.n_actions1 + a1) * self.n_actions2 + a2
    }

    fn check_indices(&self, s: usize, a1: usize, a2: usize) -> Result<()> {
        check_index("state", s, self.n_states)?;
        check_index("player 1 action", a1, self.n_actions1)?;
        check_index("player 2 action", a2, self.n_actions2)
    }

    /// `P(·|s,a1,a2)`; indices are not checked beyond slice bounds.
    pub fn transition_row(&self, s: usize, a1: usize, a2: usize) -> &[f64] {
        let start = self.cell(s, a1, a2) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    fn r1(&self, s: usize, a1: usize, a2: usize) -> f64 {
        self.reward1[self.cell(s, a1, a2)]
    }

    /// Reports every violated invariant. An empty list means the game is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (what, n) in [
            ("n_states", self.n_states),
            ("n_actions1", self.n_actions1),
            ("n_actions2", self.n_actions2),
        ] {
            if n == 0 {
                out.push(Violation::EmptyDimension { what });
            }
        }
        let cells = self.n_states * self.n_actions1 * self.n_actions2;
        if self.reward1.len() != cells {
            out.push(Violation::TableLength {
                what: "reward",
                expected: cells,
                found: self.reward1.len(),
            });
        }
        if self.transition.len() != cells * self.n_states {
            out.push(Violation::TableLength {
                what: "transition",
                expected: cells * self.n_states,
                found: self.transition.len(),
            });
        }
        if !out.is_empty() {
            return out;
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            out.push(Violation::Gamma(self.gamma));
        }
        if self.start_state >= self.n_states {
            out.push(Violation::StartState {
                start: self.start_state,
                n_states: self.n_states,
            });
        }
        for s in 0..self.n_states {
            for a1 in 0..self.n_actions1 {
                for a2 in 0..self.n_actions2 {
                    let value = self.r1(s, a1, a2);
                    if !(value.abs() <= 1.0) {
                        out.push(Violation::RewardOutOfRange { s, a1, a2, value });
                    }
                    let row = self.transition_row(s, a1, a2);
                    for (next, &p) in row.iter().enumerate() {
                        if !(p >= 0.0) {
                            out.push(Violation::NegativeProbability {
                                s,
                                a1,
                                a2,
                                next,
                                value: p,
                            });
                        }
                    }
                    let sum: f64 = row.iter().sum();
                    if !((sum - 1.0).abs() <= PROB_TOL) {
                        out.push(Violation::TransitionRowSum { s, a1, a2, sum });
                    }
                }
            }
        }
        out
    }

    /// Divides every transition row whose sum is off from 1 by more than [`PROB_TOL`] and at most
    /// `tol` by that sum. Rows already within [`PROB_TOL`] are left bit-for-bit unchanged.
    pub fn renormalize_rows(&mut self, tol: f64) {
        let n = self.n_states;
        if n == 0 || !self.transition.len().is_multiple_of(n) {
            return;
        }
        for row in self.transition.chunks_mut(n) {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL
                && (sum - 1.0).abs() <= tol
                && row.iter().all(|&p| p >= 0.0)
            {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
    }

    /// Reward of `player` when player 1 plays `a1` and player 2 plays `a2`.
    pub fn reward(&self, s: usize, a1: usize, a2: usize, player: Player) -> Result<f64> {
        self.check_indices(s, a1, a2)?;
        let r = self.r1(s, a1, a2);
        Ok(match player {
            Player::One => r,
            Player::Two => -r,
        })
    }

    /// Draws the next state; consumes exactly one `next_u64`.
    pub fn sample_transition<R: RngCore + ?Sized>(
        &self,
        s: usize,
        a1: usize,
        a2: usize,
        rng: &mut R,
    ) -> Result<usize> {
        self.check_indices(s, a1, a2)?;
        Ok(rng::categorical(self.transition_row(s, a1, a2), rng))
    }

    /// Payoff matrix `T^i(v)(s,a^i,a^-i) = R^i + γ Σ_s' P(s'|s,·,·) v(s')` for `player`.
    pub fn payoff_matrix(&self, v: &[f64], s: usize, player: Player) -> Result<PayoffMatrix> {
        check_len("value table", v.len(), self.n_states)?;
        check_index("state", s, self.n_states)?;
        let own = self.n_actions(player);
        let opp = self.n_actions(player.opponent());
        let mut m = Matrix::zeros(own, opp);
        for a1 in 0..self.n_actions1 {
            for a2 in 0..self.n_actions2 {
                let cont: f64 = self
                    .transition_row(s, a1, a2)
                    .iter()
                    .zip(v)
                    .map(|(p, x)| p * x)
                    .sum();
                let r = self.r1(s, a1, a2);
                match player {
                    Player::One => m[(a1, a2)] = r + self.gamma * cont,
                    Player::Two => m[(a2, a1)] = -r + self.gamma * cont,
                }
            }
        }
        Ok(m)
    }

    /// Transition matrix of the state chain when both players follow `policy`.
    pub fn induced_chain(&self, policy: &JointPolicy) -> Result<Matrix> {
        policy.check_shape(self)?;
        let n = self.n_states;
        let mut p = Matrix::zeros(n, n);
        for s in 0..n {
            let (pi1, pi2) = (policy.pi1.row(s), policy.pi2.row(s));
            let out = p.row_mut(s);
            for (a1, &w1) in pi1.iter().enumerate() {
                for (a2, &w2) in pi2.iter().enumerate() {
                    let w = w1 * w2;
                    if w == 0.0 {
                        continue;
                    }
                    let start = self.cell(s, a1, a2) * n;
                    for (o, t) in out.iter_mut().zip(&self.transition[start..start + n]) {
                        *o += w * t;
                    }
                }
            }
        }
        Ok(p)
    }
}

fn check_index(what: &'static str, index: usize, bound: usize) -> Result<()> {
    if index < bound {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, bound })
    }
}

pub(crate) fn check_len(what: &'static str, found: usize, expected: usize) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

/// Per-state action distributions of both players.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPolicy {
    /// `|S| x |A1|`, rows are distributions.
    pub pi1: Matrix,
    /// `|S| x |A2|`, rows are distributions.
    pub pi2: Matrix,
}

impl JointPolicy {
    pub fn new(pi1: Matrix, pi2: Matrix) -> Self {
        Self { pi1, pi2 }
    }

    pub fn uniform(game: &MarkovGame) -> Self {
        Self {
            pi1: uniform_table(game.n_states(), game.n_actions(Player::One)),
            pi2: uniform_table(game.n_states(), game.n_actions(Player::Two)),
        }
    }

    pub fn player(&self, player: Player) -> &Matrix {
        match player {
            Player::One => &self.pi1,
            Player::Two => &self.pi2,
        }
    }

    pub fn player_mut(&mut self, player: Player) -> &mut Matrix {
        match player {
            Player::One => &mut self.pi1,
            Player::Two => &mut self.pi2,
        }
    }

    pub(crate) fn check_shape(&self, game: &MarkovGame) -> Result<()> {
        for p in Player::BOTH {
            let table = self.player(p);
            check_len("policy states", table.rows(), game.n_states())?;
            check_len("policy actions", table.cols(), game.n_actions(p))?;
        }
        Ok(())
    }

    /// Checks shapes against `game` and that every row is a distribution within `1e-12`.
    pub fn validate(&self, game: &MarkovGame) -> Result<()> {
        self.check_shape(game)?;
        for p in Player::BOTH {
            for s in 0..game.n_states() {
                crate::tsallis::check_simplex(self.player(p).row(s), PROB_TOL)?;
            }
        }
        Ok(())
    }
}

/// `rows x cols` table with every row uniform.
pub fn uniform_table(rows: usize, cols: usize) -> Matrix {
    Matrix::filled(rows, cols, 1.0 / cols as f64)
}

/// Parameters of the seeded random game generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub n_states: usize,
    pub n_actions1: usize,
    pub n_actions2: usize,
    /// Number of random successor states per `(s, a1, a2)` row.
    pub branching: usize,
    pub gamma: f64,
    pub seed: u64,
}

/// Mass every generated transition row places on the hub state 0.
pub const HUB_MASS: f64 = 0.05;
const GENERATION_ATTEMPTS: usize = 64;

/// Generates a random game whose uniform joint policy induces an irreducible aperiodic chain.
///
/// Each `(s,a1,a2)` row spreads `1 - HUB_MASS` over `branching` distinct random successors with
/// Dirichlet(1) weights and puts `HUB_MASS` on state 0, which gives the hub a self-loop.
/// Rewards are i.i.d. uniform on `[-1, 1]`. Candidates whose uniform-policy chain has a
/// saturated `r_b` are discarded and redrawn from the same stream.
pub fn generate_game(spec: &GeneratorSpec) -> Result<MarkovGame> {
    let GeneratorSpec {
        n_states: n,
        n_actions1: a1n,
        n_actions2: a2n,
        branching,
        gamma,
        seed,
    } = *spec;
    if n == 0 || a1n == 0 || a2n == 0 {
        return Err(Error::InvalidParameter(
            "game sizes must be at least 1".into(),
        ));
    }
    if branching == 0 || branching > n {
        return Err(Error::InvalidParameter(alloc::format!(
            "branching {branching} must lie in [1, {n}]"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "gamma {gamma} outside (0, 1)"
        )));
    }
    let mut rng = RunRng::seed_from_u64(seed);
    let cells = n * a1n * a2n;
    let mut states: Vec<usize> = (0..n).collect();
    for _ in 0..GENERATION_ATTEMPTS {
        let mut transition = vec![0.0; cells * n];
        for row in transition.chunks_mut(n) {
            // partial Fisher-Yates picks the support
            for i in 0..branching {
                let j = i + (rng.next_u64() % (n - i) as u64) as usize;
                states.swap(i, j);
            }
            let weights: Vec<f64> = (0..branching)
                .map(|_| -libm::log(1.0 - rng::uniform(&mut rng)))
                .collect();
            let total: f64 = weights.iter().sum();
            for (&st, w) in states[..branching].iter().zip(&weights) {
                row[st] += (1.0 - HUB_MASS) * w / total;
            }
            row[0] += HUB_MASS;
        }
        let reward1 = (0..cells)
            .map(|_| 2.0 * rng::uniform(&mut rng) - 1.0)
            .collect();
        let game = MarkovGame::new(n, a1n, a2n, transition, reward1, gamma, 0)?;
        let chain = game.induced_chain(&JointPolicy::uniform(&game))?;
        if let Steps::Reached(_) = chain::compute_r_b(&chain, chain::default_r_b_horizon(n)) {
            return Ok(game);
        }
    }
    Err(Error::GenerationFailed {
        seed,
        attempts: GENERATION_ATTEMPTS,
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Two states, two actions each. Player 1 wins on a match in state 0, loses on a match in
    /// state 1; matching moves to state 1 with probability 0.7, otherwise 0.3.
    pub fn two_state() -> MarkovGame {
        let mut transition = Vec::new();
        let mut reward1 = Vec::new();
        for s in 0..2 {
            for a1 in 0..2 {
                for a2 in 0..2 {
                    let matched = a1 == a2;
                    let sign = if s == 0 { 1.0 } else { -0.5 };
                    reward1.push(if matched { sign } else { -sign });
                    let to1 = if matched { 0.7 } else { 0.3 };
                    transition.extend_from_slice(&[1.0 - to1, to1]);
                }
            }
        }
        MarkovGame::new(2, 2, 2, transition, reward1, 0.5, 0).unwrap()
    }
}
