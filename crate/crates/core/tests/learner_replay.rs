//! Whole runs checked against a direct transcription of the learner's loop.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use tbrvi_core::game::{generate_game, GeneratorSpec};
use tbrvi_core::learner::{run, ExperimentConfig, Mode};
use tbrvi_core::{game, oracle, MarkovGame, Player};

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn draw(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u = unit(rng);
    let mut acc = 0.0;
    for (i, x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap()
}

/// Smoothed response with a plain bisection on `Σ 4/(η(q_i − x))² = 1` over a wide bracket.
fn smoothed(q: &[f64], eta: f64) -> Vec<f64> {
    let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let f = |x: f64| {
        q.iter()
            .map(|qi| 4.0 / (eta * (qi - x)).powi(2))
            .sum::<f64>()
    };
    let (mut lo, mut hi) = (m + 1e-9, m + 100.0);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w: Vec<f64> = q.iter().map(|qi| 4.0 / (eta * (qi - lo)).powi(2)).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

struct Replay {
    pi: [Vec<Vec<f64>>; 2],
    v: [Vec<f64>; 2],
}

fn replay(
    g: &MarkovGame,
    t_max: usize,
    k_max: usize,
    eta: f64,
    seed: u64,
    learns: [bool; 2],
    opp: Option<Vec<Vec<f64>>>,
) -> Replay {
    let n = g.n_states();
    let acts = [g.n_actions(Player::One), g.n_actions(Player::Two)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = [vec![0.0; n], vec![0.0; n]];
    let mut pi: [Vec<Vec<f64>>; 2] = [0, 1].map(|i| vec![vec![1.0 / acts[i] as f64; acts[i]]; n]);
    if let Some(o) = &opp {
        let i = if learns[0] { 1 } else { 0 };
        pi[i] = o.clone();
    }
    let mut s = g.start_state();
    for _ in 0..t_max {
        let mut q = [0, 1].map(|i| vec![vec![0.0; acts[i]]; n]);
        for i in 0..2 {
            if learns[i] {
                pi[i] = vec![vec![1.0 / acts[i] as f64; acts[i]]; n];
            }
        }
        for k in 0..k_max {
            let alpha = 10.0 / (k as f64 + 100.0);
            let beta = 0.1 * alpha;
            for i in 0..2 {
                if !learns[i] {
                    continue;
                }
                for st in 0..n {
                    let target = smoothed(&q[i][st], eta);
                    let row: Vec<f64> = pi[i][st]
                        .iter()
                        .zip(&target)
                        .map(|(p, t)| (1.0 - beta) * p + beta * t)
                        .collect();
                    let sum: f64 = row.iter().sum();
                    pi[i][st] = row.into_iter().map(|x| x / sum).collect();
                }
            }
            let a = [draw(&pi[0][s], &mut rng), draw(&pi[1][s], &mut rng)];
            let next = draw(g.transition_row(s, a[0], a[1]), &mut rng);
            for i in 0..2 {
                if learns[i] {
                    let r = g
                        .reward(
                            s,
                            a[0],
                            a[1],
                            if i == 0 { Player::One } else { Player::Two },
                        )
                        .unwrap();
                    let e = &mut q[i][s][a[i]];
                    *e = (1.0 - alpha) * *e + alpha * (r + g.gamma() * v[i][next]);
                }
            }
            s = next;
        }
        for i in 0..2 {
            if learns[i] {
                v[i] = (0..n)
                    .map(|st| pi[i][st].iter().zip(&q[i][st]).map(|(p, x)| p * x).sum())
                    .collect();
            }
        }
    }
    Replay { pi, v }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn spec(seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        n_states: 3,
        n_actions1: 2,
        n_actions2: 3,
        branching: 2,
        gamma: 0.8,
        seed,
    }
}

#[test]
fn self_play_run_matches_transcription() {
    for seed in [1, 2, 3] {
        let g = generate_game(&spec(seed)).unwrap();
        let out = run(&g, &ExperimentConfig::new(3, 200, 7.5, seed)).unwrap();
        let r = replay(&g, 3, 200, 7.5, seed, [true, true], None);
        for s in 0..3 {
            assert!(
                close(out.policy.pi1.row(s), &r.pi[0][s], 1e-9),
                "seed {seed} state {s}"
            );
            assert!(
                close(out.policy.pi2.row(s), &r.pi[1][s], 1e-9),
                "seed {seed} state {s}"
            );
        }
        assert!(close(&out.state.v1, &r.v[0], 1e-9));
        assert!(close(&out.state.v2, &r.v[1], 1e-9));
    }
}

#[test]
fn fixed_opponent_run_matches_transcription() {
    let g = generate_game(&spec(9)).unwrap();
    let opp = game::uniform_table(3, 3);
    let mut config = ExperimentConfig::new(2, 300, 4.0, 5);
    config.mode = Mode::FixedOpponent {
        learner: Player::One,
        opponent: opp.clone(),
    };
    let out = run(&g, &config).unwrap();
    let opp_rows = (0..3).map(|s| opp.row(s).to_vec()).collect();
    let r = replay(&g, 2, 300, 4.0, 5, [true, false], Some(opp_rows));
    for s in 0..3 {
        assert!(close(out.policy.pi1.row(s), &r.pi[0][s], 1e-9));
        assert_eq!(out.policy.pi2.row(s), opp.row(s));
    }
    assert!(close(&out.state.v1, &r.v[0], 1e-9));
    assert!(out.state.v2.iter().all(|&x| x == 0.0));
}

#[test]
fn trace_evaluations_follow_the_oracle() {
    let g = generate_game(&spec(4)).unwrap();
    let mut config = ExperimentConfig::new(7, 100, 10.0, 2);
    config.eval_every = 3;
    let out = run(&g, &config).unwrap();
    let ts: Vec<usize> = out.trace.rows.iter().map(|r| r.t).collect();
    assert_eq!(ts, [0, 3, 6, 7]);
    let last = out.trace.rows.last().unwrap();
    let ng = oracle::nash_gap(&g, &out.policy, config.oracle_tol).unwrap();
    assert!((last.nash_gap - ng.total).abs() < 1e-12);
    let sol = oracle::solve_both(&g, 1e-10).unwrap();
    let err = out
        .state
        .v1
        .iter()
        .zip(&sol.player1.v_star)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!((last.v_err[0] - err).abs() < 1e-8);
}
