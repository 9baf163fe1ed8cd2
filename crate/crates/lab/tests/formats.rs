use std::path::PathBuf;

use tbrvi_core::game::{generate_game, GeneratorSpec};
use tbrvi_core::learner::{RunTrace, TraceRow};
use tbrvi_core::{JointPolicy, Matrix, Player};
use tbrvi_lab::config::{parse_config, GameSource, ModeConfig, OpponentSource};
use tbrvi_lab::game_file::{parse_game, sha256_hex, write_game, GameFileError};
use tbrvi_lab::policy_file::{parse_policy, write_policy};
use tbrvi_lab::trace::{parse_trace_csv, trace_csv, TRACE_HEADER};

const GAME: &str = "\
zsg 1
# comment
states 2
actions1 2
actions2 1
gamma 0.5
start 1
R 0 0 0 1.0
R 1 1 0 -0.5   # trailing comment
P 0 0 0 0 1
P 0 1 0 1 1
P 1 0 0 0 0.25
P 1 0 0 1 0.75
P 1 1 0 1 1
";

#[test]
fn game_file_parses_and_round_trips() {
    let g = parse_game(GAME).unwrap();
    assert_eq!(
        (
            g.n_states(),
            g.n_actions(Player::One),
            g.n_actions(Player::Two)
        ),
        (2, 2, 1)
    );
    assert_eq!(g.start_state(), 1);
    assert_eq!(g.reward(1, 1, 0, Player::One).unwrap(), -0.5);
    assert_eq!(g.reward(1, 1, 0, Player::Two).unwrap(), 0.5);
    assert_eq!(g.transition_row(1, 0, 0), [0.25, 0.75]);
    let text = write_game(&g);
    assert_eq!(parse_game(&text).unwrap(), g);
    assert_eq!(write_game(&parse_game(&text).unwrap()), text);
}

#[test]
fn generated_games_round_trip() {
    for seed in 0..5 {
        let g = generate_game(&GeneratorSpec {
            n_states: 4,
            n_actions1: 3,
            n_actions2: 2,
            branching: 3,
            gamma: 0.95,
            seed,
        })
        .unwrap();
        assert_eq!(parse_game(&write_game(&g)).unwrap(), g);
    }
}

fn syntax_line(text: &str) -> usize {
    match parse_game(text) {
        Err(GameFileError::Syntax { line, .. }) => line,
        other => panic!("expected a syntax error, got {other:?}"),
    }
}

#[test]
fn game_file_errors_name_the_line() {
    assert_eq!(syntax_line("states 2\n"), 1);
    assert_eq!(syntax_line(&GAME.replace("R 0 0 0 1.0", "R 0 0 0 x")), 8);
    assert_eq!(syntax_line(&GAME.replace("R 0 0 0 1.0", "R 0 2 0 1.0")), 8);
    assert_eq!(
        syntax_line(&GAME.replace("P 1 1 0 1 1", "P 1 1 0 1 1\nP 1 1 0 1 1")),
        15
    );
    assert_eq!(
        syntax_line(&GAME.replace("gamma 0.5", "gamma 0.5\ngamma 0.6")),
        7
    );
    assert_eq!(syntax_line(&GAME.replace("# comment", "bogus 1")), 2);
}

#[test]
fn invalid_games_list_every_violation() {
    let bad = GAME
        .replace("gamma 0.5", "gamma 1.0")
        .replace("R 0 0 0 1.0", "R 0 0 0 2.0");
    match parse_game(&bad) {
        Err(GameFileError::Invalid(v)) => assert!(v.len() >= 2, "{v:?}"),
        other => panic!("{other:?}"),
    }
    let short = GAME.replace("P 1 1 0 1 1", "P 1 1 0 1 0.5");
    assert!(matches!(parse_game(&short), Err(GameFileError::Invalid(_))));
    let tiny_drift = GAME.replace("P 1 0 0 1 0.75", "P 1 0 0 1 0.7500000001");
    let g = parse_game(&tiny_drift).unwrap();
    assert!((g.transition_row(1, 0, 0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
}

#[test]
fn hashes_are_sha256() {
    assert_eq!(
        sha256_hex(b"abc"),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
}

#[test]
fn policy_file_round_trip_and_partial_blocks() {
    let pi = JointPolicy::new(
        Matrix::from_rows(&[[0.5, 0.5], [0.9, 0.1]]).unwrap(),
        Matrix::from_rows(&[[1.0], [1.0]]).unwrap(),
    );
    let parsed = parse_policy(&write_policy(&pi)).unwrap();
    assert_eq!(parsed.pi1.as_ref(), Some(&pi.pi1));
    assert_eq!(parsed.pi2.as_ref(), Some(&pi.pi2));

    let only2 = parse_policy("policy 1\nplayer 2 states 1 actions 3\n0.2 0.3 0.5\n").unwrap();
    assert!(only2.pi1.is_none());
    assert_eq!(only2.pi2.unwrap().row(0), [0.2, 0.3, 0.5]);

    for bad in [
        "player 1 states 1 actions 2\n1 0\n",
        "policy 1\nplayer 1 states 1 actions 2\n0.6 0.6\n",
        "policy 1\nplayer 1 states 2 actions 2\n1 0\n",
        "policy 1\nplayer 3 states 1 actions 1\n1\n",
        "policy 1\n0.5 0.5\n",
    ] {
        assert!(parse_policy(bad).is_err(), "{bad}");
    }
}

#[test]
fn policy_shape_is_checked_against_the_game() {
    let g = parse_game(GAME).unwrap();
    let wrong = parse_policy(
        "policy 1\nplayer 1 states 1 actions 2\n1 0\nplayer 2 states 2 actions 1\n1\n1\n",
    )
    .unwrap();
    assert!(wrong.into_joint(&g).is_err());
    let right = parse_policy(
        "policy 1\nplayer 1 states 2 actions 2\n1 0\n0 1\nplayer 2 states 2 actions 1\n1\n1\n",
    )
    .unwrap();
    assert!(right.into_joint(&g).is_ok());
}

const CONFIG: &str = r#"
[game]
path = "g.zsg"

[learner]
T = 5
K = 100
eta = 2.5

[seed]
value = 42
"#;

#[test]
fn config_defaults_are_filled() {
    let c = parse_config(CONFIG).unwrap();
    assert_eq!(c.game, GameSource::File(PathBuf::from("g.zsg")));
    assert_eq!(
        (c.episodes, c.inner_steps, c.eta, c.seed),
        (5, 100, 2.5, 42)
    );
    assert_eq!((c.alpha, c.h, c.c_ab), (10.0, 100.0, 0.1));
    assert_eq!(c.mode, ModeConfig::SelfPlay);
    assert_eq!((c.eval_every, c.oracle_tol), (1, 1e-9));
    assert_eq!(c.output_dir, PathBuf::from("runs"));
    assert_eq!(c.trace_name, "trace.csv");
    assert!(!c.timing && !c.theory_strict);
}

#[test]
fn config_text_round_trips() {
    let mut c = parse_config(CONFIG).unwrap();
    assert_eq!(parse_config(&c.to_config_text()).unwrap(), c);
    c.mode = ModeConfig::FixedOpponent {
        learner: 2,
        opponent: OpponentSource::File("opp \"x\".txt".into()),
    };
    c.eta = 0.1 + 0.2;
    c.timing = true;
    assert_eq!(parse_config(&c.to_config_text()).unwrap(), c);
}

#[test]
fn config_errors_carry_lines_and_suggestions() {
    let text = "[game]\nstates = 2\nactions1 = 2\nactions2 = 2\nbranching = 1\ngamma = 1.5\nseed = 0\n\n[learner]\nT = 3\nK = 10\neta = 1.0\nalpha_k = 5\n\n[seed]\nvalue = 1\n";
    let errs = parse_config(text).unwrap_err();
    let gamma = errs
        .0
        .iter()
        .find(|e| e.message.contains("gamma"))
        .expect("gamma error");
    assert_eq!(gamma.line, 6);
    let alpha = errs
        .0
        .iter()
        .find(|e| e.message.contains("alpha_k"))
        .expect("unknown key");
    assert_eq!(alpha.line, 13);
    assert!(
        alpha.message.contains("did you mean `alpha`"),
        "{}",
        alpha.message
    );
    let lines: Vec<usize> = errs.0.iter().map(|e| e.line).collect();
    assert!(lines.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn config_rejects_missing_and_mistyped_keys() {
    assert!(parse_config(&CONFIG.replace("eta = 2.5", "")).is_err());
    assert!(parse_config(&CONFIG.replace("K = 100", "K = -1")).is_err());
    assert!(parse_config(&CONFIG.replace("T = 5", "T = \"five\"")).is_err());
    assert!(parse_config(&CONFIG.replace("[seed]", "[sede]"))
        .unwrap_err()
        .to_string()
        .contains("seed"));
    assert!(
        parse_config(&(CONFIG.to_string() + "[learner]\nmode = \"fixed_opponent\"\n")).is_err()
    );
    let fixed = CONFIG.replace(
        "eta = 2.5",
        "eta = 2.5\nmode = \"fixed_opponent\"\nlearner = 3\nopponent = \"uniform\"",
    );
    assert!(parse_config(&fixed).is_err());
    assert!(parse_config("[game\n").is_err());
}

#[test]
fn trace_csv_round_trips_exactly() {
    let rows = vec![
        TraceRow {
            t: 0,
            nash_gap: 0.1 + 0.2,
            v_sum_inf: 0.0,
            v_err: [1e-300, 3.5],
            min_margin: 0.5,
            lyap_pi: 2.0 / 3.0,
            lyap_q: 1e20,
            wallclock_ns: 7,
            oracle_error: None,
        },
        TraceRow {
            t: 4,
            nash_gap: f64::NAN,
            v_sum_inf: -0.0,
            v_err: [f64::NAN; 2],
            min_margin: 0.25,
            lyap_pi: f64::NAN,
            lyap_q: f64::NAN,
            wallclock_ns: 0,
            oracle_error: None,
        },
    ];
    let text = trace_csv(&RunTrace { rows: rows.clone() });
    assert!(text.starts_with(TRACE_HEADER));
    let back = parse_trace_csv(&text).unwrap();
    assert_eq!(back[0], rows[0]);
    assert_eq!(back[1].t, 4);
    assert!(back[1].nash_gap.is_nan());
    assert_eq!(trace_csv(&RunTrace { rows: back }), text);
    assert!(parse_trace_csv("t,x\n").is_err());
    assert!(parse_trace_csv(&format!("{TRACE_HEADER}\n1,2\n")).is_err());
}
