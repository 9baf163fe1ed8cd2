//! `zsg 1` game files.
//!
//! ```text
//! zsg 1
//! # comments and blank lines are ignored
//! states 2
//! actions1 2
//! actions2 2
//! gamma 0.6
//! start 0
//! R 0 0 0 1.0        # R s a1 a2 value, unlisted entries are 0
//! P 0 0 0 1 0.7      # P s a1 a2 s' prob, unlisted entries are 0
//! ```
//!
//! The header must be the first non-blank, non-comment line. Dimension records come before any
//! `R` or `P` record. Rows are renormalized when they are off by at most 1e-9 and rejected
//! beyond that.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use tbrvi_core::game::Violation;
use tbrvi_core::{MarkovGame, Player};

#[derive(Debug, thiserror::Error)]
pub enum GameFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("game is invalid: {}", list(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Core(tbrvi_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn syntax(line: usize, message: impl Into<String>) -> GameFileError {
    GameFileError::Syntax {
        line,
        message: message.into(),
    }
}

#[derive(Default)]
struct Dims {
    states: Option<usize>,
    actions1: Option<usize>,
    actions2: Option<usize>,
    gamma: Option<f64>,
    start: Option<usize>,
}

struct Tables {
    n: usize,
    a1: usize,
    a2: usize,
    transition: Vec<f64>,
    reward1: Vec<f64>,
    seen_r: Vec<Option<usize>>,
    seen_p: Vec<Option<usize>>,
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, GameFileError> {
    tok.parse()
        .map_err(|_| syntax(line, format!("cannot parse {what} from `{tok}`")))
}

fn index(tok: &str, line: usize, what: &str, bound: usize) -> Result<usize, GameFileError> {
    let i: usize = parse_num(tok, line, what)?;
    if i >= bound {
        return Err(syntax(
            line,
            format!("{what} {i} out of range (must be below {bound})"),
        ));
    }
    Ok(i)
}

/// Parses a game file.
pub fn parse_game(text: &str) -> Result<MarkovGame, GameFileError> {
    let mut header_seen = false;
    let mut dims = Dims::default();
    let mut tables: Option<Tables> = None;
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        if !header_seen {
            if toks != ["zsg", "1"] {
                return Err(syntax(
                    line,
                    format!("expected header `zsg 1`, found `{content}`"),
                ));
            }
            header_seen = true;
            continue;
        }
        match toks[0] {
            "states" | "actions1" | "actions2" | "gamma" | "start" => {
                if tables.is_some() {
                    return Err(syntax(
                        line,
                        format!("`{}` must come before R and P records", toks[0]),
                    ));
                }
                if toks.len() != 2 {
                    return Err(syntax(line, format!("`{}` takes one value", toks[0])));
                }
                let dup = match toks[0] {
                    "states" => dims
                        .states
                        .replace(parse_num(toks[1], line, "states")?)
                        .is_some(),
                    "actions1" => dims
                        .actions1
                        .replace(parse_num(toks[1], line, "actions1")?)
                        .is_some(),
                    "actions2" => dims
                        .actions2
                        .replace(parse_num(toks[1], line, "actions2")?)
                        .is_some(),
                    "gamma" => dims
                        .gamma
                        .replace(parse_num(toks[1], line, "gamma")?)
                        .is_some(),
                    _ => dims
                        .start
                        .replace(parse_num(toks[1], line, "start")?)
                        .is_some(),
                };
                if dup {
                    return Err(syntax(line, format!("duplicate `{}` record", toks[0])));
                }
            }
            "R" | "P" => {
                let t = match &mut tables {
                    Some(t) => t,
                    None => tables.insert(allocate(&dims, line)?),
                };
                let arity = if toks[0] == "R" { 5 } else { 6 };
                if toks.len() != arity {
                    return Err(syntax(
                        line,
                        format!("`{}` record takes {} fields", toks[0], arity - 1),
                    ));
                }
                let s = index(toks[1], line, "state", t.n)?;
                let a1 = index(toks[2], line, "action1", t.a1)?;
                let a2 = index(toks[3], line, "action2", t.a2)?;
                let cell = (s * t.a1 + a1) * t.a2 + a2;
                if toks[0] == "R" {
                    let value: f64 = parse_num(toks[4], line, "reward")?;
                    if let Some(prev) = t.seen_r[cell].replace(line) {
                        return Err(syntax(
                            line,
                            format!("reward ({s}, {a1}, {a2}) already set on line {prev}"),
                        ));
                    }
                    t.reward1[cell] = value;
                } else {
                    let next = index(toks[4], line, "next state", t.n)?;
                    let prob: f64 = parse_num(toks[5], line, "probability")?;
                    let k = cell * t.n + next;
                    if let Some(prev) = t.seen_p[k].replace(line) {
                        return Err(syntax(
                            line,
                            format!(
                                "transition ({s}, {a1}, {a2}) -> {next} already set on line {prev}"
                            ),
                        ));
                    }
                    t.transition[k] = prob;
                }
            }
            other => return Err(syntax(line, format!("unknown record `{other}`"))),
        }
    }
    if !header_seen {
        return Err(syntax(last_line.max(1), "missing header `zsg 1`"));
    }
    let t = match tables {
        Some(t) => t,
        None => allocate(&dims, last_line.max(1))?,
    };
    let gamma = dims.gamma.expect("checked by allocate");
    let start = dims.start.unwrap_or(0);
    match MarkovGame::new(t.n, t.a1, t.a2, t.transition, t.reward1, gamma, start) {
        Ok(g) => Ok(g),
        Err(tbrvi_core::Error::InvalidGame(v)) => Err(GameFileError::Invalid(v)),
        Err(e) => Err(GameFileError::Core(e)),
    }
}

fn allocate(dims: &Dims, line: usize) -> Result<Tables, GameFileError> {
    let need = |v: Option<usize>, what: &str| {
        v.ok_or_else(|| {
            syntax(
                line,
                format!("`{what}` must be given before R and P records"),
            )
        })
    };
    let n = need(dims.states, "states")?;
    let a1 = need(dims.actions1, "actions1")?;
    let a2 = need(dims.actions2, "actions2")?;
    if dims.gamma.is_none() {
        return Err(syntax(line, "`gamma` must be given before R and P records"));
    }
    if n == 0 || a1 == 0 || a2 == 0 {
        return Err(syntax(line, "states and action counts must be at least 1"));
    }
    let cells = n * a1 * a2;
    Ok(Tables {
        n,
        a1,
        a2,
        transition: vec![0.0; cells * n],
        reward1: vec![0.0; cells],
        seen_r: vec![None; cells],
        seen_p: vec![None; cells * n],
    })
}

/// Writes a game in canonical form: dimensions, then nonzero rewards and transitions in index
/// order. Numbers use the shortest representation that parses back to the same value.
pub fn write_game(game: &MarkovGame) -> String {
    let (n, a1n, a2n) = (
        game.n_states(),
        game.n_actions(Player::One),
        game.n_actions(Player::Two),
    );
    let mut out = String::from("zsg 1\n");
    let _ = writeln!(out, "states {n}\nactions1 {a1n}\nactions2 {a2n}");
    let _ = writeln!(out, "gamma {}\nstart {}", game.gamma(), game.start_state());
    let reward = game.reward1_table();
    let transition = game.transition_table();
    for s in 0..n {
        for a1 in 0..a1n {
            for a2 in 0..a2n {
                let cell = (s * a1n + a1) * a2n + a2;
                if reward[cell] != 0.0 {
                    let _ = writeln!(out, "R {s} {a1} {a2} {}", reward[cell]);
                }
            }
        }
    }
    for s in 0..n {
        for a1 in 0..a1n {
            for a2 in 0..a2n {
                let cell = (s * a1n + a1) * a2n + a2;
                for next in 0..n {
                    let p = transition[cell * n + next];
                    if p != 0.0 {
                        let _ = writeln!(out, "P {s} {a1} {a2} {next} {p}");
                    }
                }
            }
        }
    }
    out
}

/// SHA-256 of the bytes, lowercase hex.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads and parses a game file, returning the game and the hash of the file bytes.
pub fn load_game(path: &Path) -> Result<(MarkovGame, String), GameFileError> {
    let bytes = std::fs::read(path).map_err(|source| GameFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| syntax(0, format!("file is not UTF-8: {e}")))?;
    Ok((parse_game(&text)?, sha256_hex(&bytes)))
}
