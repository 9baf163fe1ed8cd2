//! Property suites run by `tbrvi verify`.
//!
//! Every property is a seeded sweep that reports its worst slack: the smallest margin by which
//! the bound held over all trials, negative when some trial violated it. Tolerances are folded
//! into the slack, so a property passes iff its worst slack is nonnegative.

use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use tbrvi_core::chain::{self, Steps};
use tbrvi_core::game::{generate_game, GeneratorSpec};
use tbrvi_core::learner::{self, td_update, ExperimentConfig};
use tbrvi_core::rng::{self, RunRng};
use tbrvi_core::tsallis::{self, SmoothingParams};
use tbrvi_core::{linalg, oracle, JointPolicy, MarkovGame, Matrix, Player};

pub const SUITES: &[&str] = &["tsallis", "values", "oracle", "chain"];

/// Harness knobs, for checking that the suites can fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Multiplies the constant of the Lipschitz bound.
    pub lipschitz_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            lipschitz_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub trials: usize,
    pub worst_slack: f64,
    pub passed: bool,
}

impl PropertyResult {
    fn new(suite: &'static str, name: &'static str, trials: usize, worst_slack: f64) -> Self {
        Self {
            suite,
            name,
            trials,
            worst_slack,
            passed: worst_slack >= 0.0,
        }
    }

    /// `suite.name trials=N worst_slack=X PASS|FAIL`
    pub fn line(&self) -> String {
        format!(
            "{}.{} trials={} worst_slack={:e} {}",
            self.suite,
            self.name,
            self.trials,
            self.worst_slack,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }

    pub fn json(&self) -> String {
        serde_json::to_string(self).expect("result serializes")
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown suite `{name}`; registered suites: {}", SUITES.join(", "))]
pub struct UnknownSuite {
    pub name: String,
}

pub fn run_suite(name: &str, opts: &VerifyOptions) -> Result<Vec<PropertyResult>, UnknownSuite> {
    match name {
        "tsallis" => Ok(tsallis_suite(opts)),
        "values" => Ok(values_suite()),
        "oracle" => Ok(oracle_suite()),
        "chain" => Ok(chain_suite()),
        "all" => Ok(run_all(opts)),
        _ => Err(UnknownSuite { name: name.into() }),
    }
}

/// All registered suites in order, sequentially.
pub fn run_all(opts: &VerifyOptions) -> Vec<PropertyResult> {
    SUITES
        .iter()
        .flat_map(|s| run_suite(s, opts).expect("registered"))
        .collect()
}

fn unit(rng: &mut RunRng) -> f64 {
    rng::uniform(rng)
}

fn between(rng: &mut RunRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

fn log_between(rng: &mut RunRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * unit(rng)).exp()
}

fn pick<T: Copy>(rng: &mut RunRng, xs: &[T]) -> T {
    xs[(rng.next_u64() % xs.len() as u64) as usize]
}

fn random_q(rng: &mut RunRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| between(rng, lo, hi)).collect()
}

/// Uniform point of the simplex.
fn random_simplex(rng: &mut RunRng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - unit(rng)).ln()).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

const GAMMAS: [f64; 3] = [0.5, 0.9, 0.99];

fn tsallis_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    const S: &str = "tsallis";
    let mut rng = RunRng::seed_from_u64(0x7541);
    let mut out = Vec::new();

    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let n = 2 + (rng.next_u64() % 5) as usize;
        let eta = log_between(&mut rng, 0.05, 200.0);
        let q = random_q(&mut rng, n, -20.0, 20.0);
        let (lo, hi) = tsallis::normalization_bracket(&q, eta);
        let x = tsallis::normalization_root(&q, &SmoothingParams::new(eta))
            .expect("bisection converges");
        let tol = 1e-12 * x.abs().max(1.0);
        worst = worst.min((x - lo + tol).min(hi - x + tol));
    }
    out.push(PropertyResult::new(S, "normalization_bracket", 1000, worst));

    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let n = 1 + (rng.next_u64() % 6) as usize;
        let eta = log_between(&mut rng, 0.05, 200.0);
        let q = random_q(&mut rng, n, -20.0, 20.0);
        let w = tsallis::tsallis_response(&q, &SmoothingParams::new(eta)).expect("response");
        let sum: f64 = w.iter().sum();
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.min((1e-10 - (sum - 1.0).abs()).min(min));
    }
    out.push(PropertyResult::new(S, "response_on_simplex", 1000, worst));

    // q drawn with corners so that the extreme spreads are exercised
    let corner_q = |rng: &mut RunRng, n: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..n)
            .map(|_| match rng.next_u64() % 3 {
                0 => lo,
                1 => hi,
                _ => between(rng, lo, hi),
            })
            .collect()
    };
    let (mut worst_full, mut worst_span, mut trials) = (f64::INFINITY, f64::INFINITY, 0);
    for n in [2, 3, 5] {
        for eta in [0.5, 2.0, 20.0] {
            for gamma in GAMMAS {
                let m = 1.0 / (1.0 - gamma);
                let params = SmoothingParams::new(eta);
                let provable = tsallis::provable_margin_floor(n, eta, gamma);
                let stated = tsallis::margin_floor(n, eta, gamma);
                for _ in 0..200 {
                    let q = corner_q(&mut rng, n, -m, m);
                    let w = tsallis::tsallis_response(&q, &params).expect("response");
                    worst_full = worst_full
                        .min(w.iter().copied().fold(f64::INFINITY, f64::min) - provable + 1e-12);
                    let q = corner_q(&mut rng, n, 0.0, m);
                    let w = tsallis::tsallis_response(&q, &params).expect("response");
                    worst_span = worst_span
                        .min(w.iter().copied().fold(f64::INFINITY, f64::min) - stated + 1e-12);
                    trials += 1;
                }
            }
        }
    }
    out.push(PropertyResult::new(
        S,
        "margin_floor_bounded_q",
        trials,
        worst_full,
    ));
    out.push(PropertyResult::new(
        S,
        "margin_floor_value_span",
        trials,
        worst_span,
    ));

    let mut worst = f64::INFINITY;
    for i in 0..1000 {
        let n = 2 + (rng.next_u64() % 4) as usize;
        let eta = log_between(&mut rng, 0.05, 100.0);
        let gamma = pick(&mut rng, &GAMMAS);
        let m = 1.0 / (1.0 - gamma);
        let params = SmoothingParams::new(eta);
        let q = random_q(&mut rng, n, -m, m);
        let q2: Vec<f64> = if i % 4 == 0 {
            random_q(&mut rng, n, -m, m)
        } else {
            let scale = log_between(&mut rng, 1e-6, 1.0);
            q.iter()
                .map(|x| x + scale * between(&mut rng, -1.0, 1.0))
                .collect()
        };
        let w1 = tsallis::tsallis_response(&q, &params).expect("response");
        let w2 = tsallis::tsallis_response(&q2, &params).expect("response");
        let bound =
            opts.lipschitz_scale * 2.0 * 2f64.sqrt() * eta * n as f64 * norm2(&diff(&q, &q2));
        let lhs = norm2(&diff(&w1, &w2));
        if bound > 0.0 {
            worst = worst.min(1.0 - lhs / bound);
        }
    }
    out.push(PropertyResult::new(S, "lipschitz", 1000, worst));

    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let n = 2 + (rng.next_u64() % 4) as usize;
        let eta = log_between(&mut rng, 0.05, 100.0);
        let q = random_q(&mut rng, n, -10.0, 10.0);
        let w = tsallis::tsallis_response(&q, &SmoothingParams::new(eta)).expect("response");
        let best = tsallis::tsallis_objective(&w, &q, eta);
        for _ in 0..20 {
            let other = random_simplex(&mut rng, n);
            worst = worst.min(
                best - tsallis::tsallis_objective(&other, &q, eta) + 1e-12 * best.abs().max(1.0),
            );
        }
    }
    out.push(PropertyResult::new(
        S,
        "response_maximizes_objective",
        20_000,
        worst,
    ));
    out
}

fn values_suite() -> Vec<PropertyResult> {
    const S: &str = "values";
    let mut out = Vec::new();

    let (mut worst, mut steps) = (f64::INFINITY, 0);
    for seed in 0..3 {
        let game = generate_game(&GeneratorSpec {
            n_states: 3,
            n_actions1: 2 + seed as usize % 2,
            n_actions2: 2,
            branching: 2,
            gamma: [0.6, 0.8, 0.9][seed as usize],
            seed,
        })
        .expect("generator");
        let config = ExperimentConfig::new(20, 500, 20.0, seed);
        let bound = game.value_bound();
        match learner::run(&game, &config) {
            Ok(o) => {
                let s = &o.state;
                let biggest = [
                    linalg::max_abs(&s.v1),
                    linalg::max_abs(&s.v2),
                    s.q1.max_abs(),
                    s.q2.max_abs(),
                ]
                .into_iter()
                .fold(0.0, f64::max);
                worst = worst.min(bound * (1.0 + 1e-12) - biggest);
            }
            Err(_) => worst = -1.0,
        }
        steps += 20 * 500;
    }
    out.push(PropertyResult::new(S, "bounded_iterates", steps, worst));

    let mut rng = RunRng::seed_from_u64(0x7d);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let gamma = pick(&mut rng, &GAMMAS);
        let m = 1.0 / (1.0 - gamma);
        let mut q = Matrix::zeros(3, 2);
        for _ in 0..100 {
            let v: Vec<f64> = (0..3).map(|_| between(&mut rng, -m, m)).collect();
            let r = between(&mut rng, -1.0, 1.0);
            let alpha = unit(&mut rng);
            let (s, a, next) = (
                (rng.next_u64() % 3) as usize,
                (rng.next_u64() % 2) as usize,
                (rng.next_u64() % 3) as usize,
            );
            td_update(&mut q, s, a, r, &v, next, alpha, gamma).expect("indices in range");
            worst = worst.min(m * (1.0 + 1e-12) - q.max_abs());
        }
    }
    out.push(PropertyResult::new(
        S,
        "td_update_stays_bounded",
        10_000,
        worst,
    ));
    out
}

fn random_game(seed: u64, n: usize) -> MarkovGame {
    generate_game(&GeneratorSpec {
        n_states: n,
        n_actions1: 2 + (seed % 2) as usize,
        n_actions2: 2 + (seed % 3) as usize,
        branching: 2.min(n),
        gamma: 0.9,
        seed,
    })
    .expect("generator")
}

fn oracle_suite() -> Vec<PropertyResult> {
    const S: &str = "oracle";
    let mut out = Vec::new();
    let mut rng = RunRng::seed_from_u64(0x0c);

    let (mut worst_gap, mut worst_bounds) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..200 {
        let (r, c) = (
            1 + (rng.next_u64() % 6) as usize,
            1 + (rng.next_u64() % 6) as usize,
        );
        let data: Vec<f64> = (0..r * c).map(|_| between(&mut rng, -5.0, 5.0)).collect();
        let x = Matrix::from_vec(r, c, data).expect("shape");
        let tol = 1e-9;
        match oracle::matrix_game_value(&x, tol) {
            Ok(sol) => {
                worst_gap = worst_gap.min(2.0 * tol - sol.certificate_gap);
                let maximin = (0..r)
                    .map(|i| x.row(i).iter().copied().fold(f64::INFINITY, f64::min))
                    .fold(f64::NEG_INFINITY, f64::max);
                let minimax = (0..c)
                    .map(|j| (0..r).map(|i| x[(i, j)]).fold(f64::NEG_INFINITY, f64::max))
                    .fold(f64::INFINITY, f64::min);
                worst_bounds =
                    worst_bounds.min((sol.value - maximin + tol).min(minimax - sol.value + tol));
            }
            Err(_) => worst_gap = -1.0,
        }
    }
    out.push(PropertyResult::new(
        S,
        "lp_duality_certificate",
        200,
        worst_gap,
    ));
    out.push(PropertyResult::new(
        S,
        "value_between_pure_bounds",
        200,
        worst_bounds,
    ));

    let (mut worst_res, mut worst_anti, mut worst_ng) =
        (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for seed in 0..10 {
        let game = random_game(seed, 3);
        let Ok(sol) = oracle::solve_both(&game, 1e-10) else {
            worst_res = -1.0;
            continue;
        };
        for (p, rep) in [(Player::One, &sol.player1), (Player::Two, &sol.player2)] {
            let b = oracle::bellman_minimax(&game, &rep.v_star, p).expect("backup");
            worst_res = worst_res.min(1e-9 - linalg::max_abs_diff(&b, &rep.v_star));
        }
        worst_anti = worst_anti.min(2e-9 - sol.antisymmetry);
        match oracle::nash_gap(&game, &sol.equilibrium, 1e-10) {
            Ok(ng) => worst_ng = worst_ng.min(1e-4 - ng.total),
            Err(_) => worst_ng = -1.0,
        }
    }
    out.push(PropertyResult::new(S, "shapley_fixed_point", 10, worst_res));
    out.push(PropertyResult::new(S, "value_antisymmetry", 10, worst_anti));
    out.push(PropertyResult::new(S, "equilibrium_nash_gap", 10, worst_ng));
    out
}

/// Joint policy with every probability at least `delta`.
fn clipped_policy(rng: &mut RunRng, game: &MarkovGame, delta: f64) -> JointPolicy {
    let table = |rng: &mut RunRng, p: Player| {
        let a = game.n_actions(p);
        let mut m = Matrix::zeros(game.n_states(), a);
        for s in 0..game.n_states() {
            let w = random_simplex(rng, a);
            for (dst, x) in m.row_mut(s).iter_mut().zip(w) {
                *dst = delta + (1.0 - a as f64 * delta) * x;
            }
        }
        m
    };
    let pi1 = table(rng, Player::One);
    let pi2 = table(rng, Player::Two);
    JointPolicy::new(pi1, pi2)
}

fn chain_suite() -> Vec<PropertyResult> {
    const S: &str = "chain";
    let mut out = Vec::new();
    let mut rng = RunRng::seed_from_u64(0xc4a1);

    let mut worst = f64::INFINITY;
    for seed in 0..20 {
        let n = 1 + (seed % 5) as usize;
        let game = random_game(seed, n);
        let p = game
            .induced_chain(&JointPolicy::uniform(&game))
            .expect("chain");
        let horizon = chain::default_r_b_horizon(n);
        worst = worst.min(match chain::compute_r_b(&p, horizon) {
            Steps::Reached(r) => (horizon - r) as f64,
            Steps::Saturated(_) => -1.0,
        });
    }
    out.push(PropertyResult::new(S, "generated_r_b_finite", 20, worst));

    let mut worst = f64::INFINITY;
    for seed in 0..50 {
        let game = random_game(100 + seed, 2 + (seed % 4) as usize);
        let policy = clipped_policy(&mut rng, &game, 0.01);
        let p = game.induced_chain(&policy).expect("chain");
        worst = worst.min(match chain::stationary_distribution(&p) {
            Ok(mu) => 1e-12 - chain::stationary_residual(&p, &mu),
            Err(_) => -1.0,
        });
    }
    out.push(PropertyResult::new(S, "stationary_residual", 50, worst));

    let lazy = |p: f64| Matrix::from_rows(&[[1.0 - p, p], [p, 1.0 - p]]).expect("shape");
    let mix = |p: f64, eps: f64| {
        chain::mixing_time(&lazy(p), &[0.5, 0.5], eps, chain::DEFAULT_MIXING_HORIZON)
            .expect("square")
            .reached()
            .map_or(f64::INFINITY, |k| k as f64)
    };
    let ts: Vec<f64> = [0.05, 0.1, 0.2, 0.4]
        .iter()
        .map(|&p| mix(p, 0.05))
        .collect();
    let worst = ts
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    out.push(PropertyResult::new(
        S,
        "mixing_monotone_in_switching",
        3,
        worst,
    ));
    out.push(PropertyResult::new(
        S,
        "lazy_chain_mixing_time",
        1,
        0.0 - (mix(0.25, 0.1) - 3.0).abs(),
    ));

    let (mut worst_mix, mut worst_mu, mut trials) = (f64::INFINITY, f64::INFINITY, 0);
    for seed in 0..4 {
        let game = random_game(200 + seed, 3);
        let uniform = JointPolicy::uniform(&game);
        let a3 = chain::check_assumption3(&game, &uniform, chain::default_r_b_horizon(3))
            .expect("chain");
        let (Steps::Reached(r_b), Some(mu_min)) = (a3.r_b, a3.mu_b_min) else {
            worst_mix = -1.0;
            continue;
        };
        let pb = game.induced_chain(&uniform).expect("chain");
        let mub = chain::stationary_distribution(&pb).expect("stationary");
        let eps = 0.1;
        let tb = chain::mixing_time(&pb, &mub, eps, chain::DEFAULT_MIXING_HORIZON)
            .expect("square")
            .reached()
            .expect("benchmark mixes") as f64;
        for _ in 0..5 {
            let delta = pick(&mut rng, &[0.05, 0.1, 0.2]);
            let policy = clipped_policy(&mut rng, &game, delta);
            let p = game.induced_chain(&policy).expect("chain");
            let mu = chain::stationary_distribution(&p).expect("stationary");
            worst_mu = worst_mu.min(mu.iter().copied().fold(f64::INFINITY, f64::min));
            let rhs = tb / ((delta * delta).powi(r_b as i32) * mu_min);
            if rhs < chain::DEFAULT_MIXING_HORIZON as f64 {
                let t = chain::mixing_time(&p, &mu, eps, chain::DEFAULT_MIXING_HORIZON)
                    .expect("square")
                    .reached()
                    .map_or(f64::INFINITY, |k| k as f64);
                worst_mix = worst_mix.min(rhs - t);
            }
            trials += 1;
        }
    }
    out.push(PropertyResult::new(
        S,
        "uniform_mixing_bound",
        trials,
        worst_mix,
    ));
    out.push(PropertyResult::new(
        S,
        "stationary_floor_positive",
        trials,
        worst_mu,
    ));
    out
}
