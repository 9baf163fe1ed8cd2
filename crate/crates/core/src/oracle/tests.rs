use super::*;
use crate::game::fixtures::two_state;
use crate::game::{generate_game, GeneratorSpec};
use crate::rng::{self, RunRng};
use proptest::prelude::*;
use rand_core::SeedableRng;

fn random_game(seed: u64, n: usize, gamma: f64) -> MarkovGame {
    generate_game(&GeneratorSpec {
        n_states: n,
        n_actions1: 2,
        n_actions2: 3,
        branching: 2.min(n),
        gamma,
        seed,
    })
    .unwrap()
}

fn random_policy(game: &MarkovGame, rng: &mut RunRng) -> JointPolicy {
    let mut pi = JointPolicy::uniform(game);
    for p in Player::BOTH {
        let table = pi.player_mut(p);
        for s in 0..table.rows() {
            let w: Vec<f64> = (0..table.cols())
                .map(|_| 0.01 + rng::uniform(rng))
                .collect();
            let d = Distribution::from_weights(w).unwrap();
            table.row_mut(s).copy_from_slice(&d);
        }
    }
    pi
}

#[test]
fn matching_pennies_matrix() {
    let x = Matrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap();
    let sol = matrix_game_value(&x, 1e-12).unwrap();
    assert!(sol.value.abs() < 1e-12);
    for w in sol.row_strategy.iter().chain(sol.col_strategy.iter()) {
        assert!((w - 0.5).abs() < 1e-12);
    }
}

#[test]
fn one_by_one_matrix() {
    let sol = matrix_game_value(&Matrix::from_rows(&[[-0.7]]).unwrap(), 1e-12).unwrap();
    assert!((sol.value + 0.7).abs() < 1e-14);
    assert_eq!(
        (&sol.row_strategy[..], &sol.col_strategy[..]),
        (&[1.0][..], &[1.0][..])
    );
}

#[test]
fn two_by_two_closed_form() {
    // (ad − bc) / (a + d − b − c)
    let sol = matrix_game_value(
        &Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap(),
        1e-12,
    )
    .unwrap();
    assert!((sol.value - 1.5).abs() < 1e-12);
    assert!(sol.row_strategy.iter().all(|w| (w - 0.5).abs() < 1e-12));
    assert!(sol.col_strategy.iter().all(|w| (w - 0.5).abs() < 1e-12));
}

#[test]
fn dominated_strategy_gets_no_weight() {
    let x = Matrix::from_rows(&[[3.0, 0.0], [1.0, -1.0], [0.0, 2.0]]).unwrap();
    let sol = matrix_game_value(&x, 1e-12).unwrap();
    assert!(sol.row_strategy[1] < 1e-12);
    // 3p = 2(1-p) on the support {0, 2}
    assert!((sol.value - 1.2).abs() < 1e-12);
}

#[test]
fn degenerate_ties_terminate() {
    let x = Matrix::filled(4, 5, 0.3);
    let sol = matrix_game_value(&x, 1e-12).unwrap();
    assert!((sol.value - 0.3).abs() < 1e-12);
}

fn matrix_strategy() -> impl Strategy<Value = Matrix> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0f64..3.0, r * c)
            .prop_map(move |d| Matrix::from_vec(r, c, d).unwrap())
    })
}

proptest! {
    #[test]
    fn lp_duality_certificate(x in matrix_strategy()) {
        let tol = 1e-9;
        let sol = matrix_game_value(&x, tol).unwrap();
        let best_row = x.mul_vec(&sol.col_strategy).unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max);
        let worst_col = x.vec_mul(&sol.row_strategy).unwrap().into_iter().fold(f64::INFINITY, f64::min);
        prop_assert!((best_row - worst_col).abs() <= 2.0 * tol);
        prop_assert!(best_row - sol.value <= tol && sol.value - worst_col <= tol);
    }

    #[test]
    fn transpose_negation_flips_value(x in matrix_strategy()) {
        let mut neg = x.transpose();
        neg.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
        let a = matrix_game_value(&x, 1e-9).unwrap();
        let b = matrix_game_value(&neg, 1e-9).unwrap();
        prop_assert!((a.value + b.value).abs() <= 1e-9);
    }

    #[test]
    fn shift_moves_value(x in matrix_strategy(), c in -5.0f64..5.0) {
        let mut shifted = x.clone();
        shifted.as_mut_slice().iter_mut().for_each(|v| *v += c);
        let a = matrix_game_value(&x, 1e-9).unwrap();
        let b = matrix_game_value(&shifted, 1e-9).unwrap();
        prop_assert!((b.value - a.value - c).abs() <= 1e-9);
    }
}

#[test]
fn bellman_trivial_cases() {
    let zero = MarkovGame::from_parts(
        2,
        2,
        2,
        two_state().transition_table().to_vec(),
        vec![0.0; 8],
        0.5,
        0,
    );
    assert_eq!(
        bellman_minimax(&zero, &[0.0, 0.0], Player::One).unwrap(),
        [0.0, 0.0]
    );
    let c = MarkovGame::from_parts(1, 2, 2, vec![1.0; 4], vec![0.4; 4], 0.75, 0);
    let out = bellman_minimax(&c, &[2.0], Player::One).unwrap();
    assert!((out[0] - (0.4 + 0.75 * 2.0)).abs() < 1e-12);
}

#[test]
fn bellman_contracts() {
    let mut rng = RunRng::seed_from_u64(77);
    for seed in 0..20 {
        let g = random_game(seed, 3, 0.8);
        let bound = g.value_bound();
        for _ in 0..10 {
            let v: Vec<f64> = (0..3)
                .map(|_| bound * (2.0 * rng::uniform(&mut rng) - 1.0))
                .collect();
            let w: Vec<f64> = (0..3)
                .map(|_| bound * (2.0 * rng::uniform(&mut rng) - 1.0))
                .collect();
            for p in Player::BOTH {
                let bv = bellman_minimax(&g, &v, p).unwrap();
                let bw = bellman_minimax(&g, &w, p).unwrap();
                assert!(linalg::max_abs(&bv) <= bound + 1e-12);
                assert!(
                    linalg::max_abs_diff(&bv, &bw)
                        <= g.gamma() * linalg::max_abs_diff(&v, &w) + 1e-12
                );
            }
        }
    }
}

#[test]
fn shapley_trivial_cases() {
    let zero = MarkovGame::from_parts(
        2,
        2,
        2,
        two_state().transition_table().to_vec(),
        vec![0.0; 8],
        0.5,
        0,
    );
    assert_eq!(
        shapley_solve(&zero, Player::One, 1e-9).unwrap().v_star,
        [0.0, 0.0]
    );
    let c = MarkovGame::from_parts(1, 2, 2, vec![1.0; 4], vec![0.4; 4], 0.75, 0);
    let rep = shapley_solve(&c, Player::One, 1e-10).unwrap();
    assert!((rep.v_star[0] - 0.4 / 0.25).abs() <= 1e-10);
}

#[test]
fn shapley_self_consistency() {
    for seed in 0..5 {
        let g = random_game(seed, 3, 0.9);
        let sol = solve_both(&g, 1e-9).unwrap();
        assert!(sol.player1.residual <= 1e-9 && sol.player2.residual <= 1e-9);
        assert!(sol.antisymmetry <= 2e-9, "{}", sol.antisymmetry);
        assert!(linalg::max_abs(&sol.player1.v_star) <= g.value_bound());
    }
}

#[test]
fn shapley_residual_ratio_bounded_by_gamma() {
    let g = random_game(3, 4, 0.7);
    let mut v = vec![0.0; 4];
    let mut prev = f64::INFINITY;
    for _ in 0..30 {
        let next = bellman_minimax(&g, &v, Player::One).unwrap();
        let step = linalg::max_abs_diff(&next, &v);
        if prev.is_finite() && prev > 1e-12 {
            assert!(step / prev <= 0.7 + 1e-9);
        }
        prev = step;
        v = next;
    }
}

#[test]
fn shapley_cap_is_reported() {
    let g = random_game(1, 3, 0.95);
    assert!(matches!(
        shapley_solve_capped(&g, Player::One, 1e-12, 3),
        Err(Error::IterationCap { cap: 3, .. })
    ));
}

#[test]
fn policy_evaluation_trivial_cases() {
    let mp = MarkovGame::matching_pennies(0.9);
    let v = policy_evaluate(&mp, &JointPolicy::uniform(&mp), Player::One).unwrap();
    assert!(v[0].abs() < 1e-12);
    let c = MarkovGame::from_parts(
        2,
        2,
        2,
        two_state().transition_table().to_vec(),
        vec![0.3; 8],
        0.6,
        0,
    );
    let mut rng = RunRng::seed_from_u64(5);
    let pi = random_policy(&c, &mut rng);
    for x in policy_evaluate(&c, &pi, Player::One).unwrap() {
        assert!((x - 0.3 / 0.4).abs() < 1e-12);
    }
}

#[test]
fn policy_evaluation_matches_monte_carlo() {
    // 20_000 rollouts truncated at 50 steps: 10^6 simulated steps
    let g = random_game(21, 3, 0.5);
    let mut rng = RunRng::seed_from_u64(99);
    let pi = random_policy(&g, &mut rng);
    let v = policy_evaluate(&g, &pi, Player::One).unwrap();
    let (runs, horizon) = (20_000, 50);
    let mut returns = Vec::with_capacity(runs);
    for _ in 0..runs {
        let (mut s, mut disc, mut total) = (g.start_state(), 1.0, 0.0);
        for _ in 0..horizon {
            let a1 = rng::categorical(pi.pi1.row(s), &mut rng);
            let a2 = rng::categorical(pi.pi2.row(s), &mut rng);
            total += disc * g.reward(s, a1, a2, Player::One).unwrap();
            disc *= g.gamma();
            s = g.sample_transition(s, a1, a2, &mut rng).unwrap();
        }
        returns.push(total);
    }
    let mean = returns.iter().sum::<f64>() / runs as f64;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (runs - 1) as f64;
    let se = (var / runs as f64).sqrt();
    assert!(
        (mean - v[g.start_state()]).abs() <= 3.0 * se,
        "mean {mean} v {} se {se}",
        v[0]
    );
}

#[test]
fn best_response_cases() {
    let mp = MarkovGame::matching_pennies(0.9);
    let uniform = JointPolicy::uniform(&mp);
    let br = best_response_value(&mp, &uniform.pi2, Player::One, 1e-10).unwrap();
    assert!(br.value[0].abs() < 1e-9);
    // ties resolve to action 0
    assert_eq!(br.policy.row(0), [1.0, 0.0]);

    // transitions ignore actions: value = max immediate reward / (1 − γ)
    let rewards = vec![0.2, -0.1, 0.5, 0.9];
    let g = MarkovGame::from_parts(1, 2, 2, vec![1.0; 4], rewards, 0.5, 0);
    let opp = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
    let br = best_response_value(&g, &opp, Player::One, 1e-12).unwrap();
    assert!((br.value[0] - 0.9 / 0.5).abs() < 1e-11);
    assert_eq!(br.policy.row(0), [0.0, 1.0]);
}

#[test]
fn best_response_dominates_uniform() {
    let mut rng = RunRng::seed_from_u64(8);
    for seed in 0..10 {
        let g = random_game(seed, 3, 0.8);
        let pi = random_policy(&g, &mut rng);
        for p in Player::BOTH {
            let br = best_response_value(&g, pi.player(p.opponent()), p, 1e-10).unwrap();
            let mut mixed = pi.clone();
            *mixed.player_mut(p) = crate::game::uniform_table(3, g.n_actions(p));
            let v = policy_evaluate(&g, &mixed, p).unwrap();
            for (b, x) in br.value.iter().zip(&v) {
                assert!(*b >= x - 1e-6);
            }
            // greedy policy attains the value
            let mut greedy = pi.clone();
            *greedy.player_mut(p) = br.policy.clone();
            let vg = policy_evaluate(&g, &greedy, p).unwrap();
            assert!(linalg::max_abs_diff(&vg, &br.value) <= 2e-10);
        }
    }
}

#[test]
fn nash_gap_cases() {
    let mp = MarkovGame::matching_pennies(0.9);
    assert!(
        nash_gap(&mp, &JointPolicy::uniform(&mp), 1e-9)
            .unwrap()
            .total
            .abs()
            < 1e-6
    );
    let skewed = JointPolicy::new(
        Matrix::from_rows(&[[0.9, 0.1]]).unwrap(),
        Matrix::from_rows(&[[0.5, 0.5]]).unwrap(),
    );
    assert!(nash_gap(&mp, &skewed, 1e-9).unwrap().total > 0.1);
    let zero = MarkovGame::from_parts(1, 3, 2, vec![1.0; 6], vec![0.0; 6], 0.9, 0);
    let mut rng = RunRng::seed_from_u64(1);
    let pi = random_policy(&zero, &mut rng);
    assert!(nash_gap(&zero, &pi, 1e-9).unwrap().total.abs() < 1e-12);
}

#[test]
fn nash_gap_at_oracle_equilibrium() {
    let mut rng = RunRng::seed_from_u64(31);
    for seed in 100..105 {
        let g = random_game(seed, 3, 0.9);
        let sol = solve_both(&g, 1e-9).unwrap();
        let ng = nash_gap(&g, &sol.equilibrium, 1e-9).unwrap();
        assert!(ng.total <= 1e-4 && ng.total >= -4e-9, "{ng:?}");
        let pi = random_policy(&g, &mut rng);
        assert!(nash_gap(&g, &pi, 1e-9).unwrap().total >= -4e-9);
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn q_target_cases() {
    let g = two_state();
    let opp = Matrix::from_rows(&[[0.3, 0.7], [0.6, 0.4]]).unwrap();
    for s in 0..2 {
        let q = q_target(&g, &[0.0, 0.0], &opp, Player::One, s).unwrap();
        for a in 0..2 {
            let brute: f64 = (0..2)
                .map(|b| opp[(s, b)] * g.reward(s, a, b, Player::One).unwrap())
                .sum();
            assert!((q[a] - brute).abs() < 1e-15);
        }
    }
    let point = Matrix::from_rows(&[[0.0, 1.0], [0.0, 1.0]]).unwrap();
    let v = [1.0, 0.0];
    let q = q_target(&g, &v, &point, Player::One, 0).unwrap();
    let m = g.payoff_matrix(&v, 0, Player::One).unwrap();
    assert_eq!(q, [m[(0, 1)], m[(1, 1)]]);
    // player 2, v = (1, 0), brute force over P
    let q = q_target(&g, &v, &opp, Player::Two, 1).unwrap();
    for b in 0..2 {
        let mut brute = 0.0;
        for a in 0..2 {
            let cont: f64 = g
                .transition_row(1, a, b)
                .iter()
                .zip(&v)
                .map(|(p, x)| p * x)
                .sum();
            brute += opp[(1, a)] * (g.reward(1, a, b, Player::Two).unwrap() + 0.5 * cont);
        }
        assert!((q[b] - brute).abs() < 1e-15);
    }
}
