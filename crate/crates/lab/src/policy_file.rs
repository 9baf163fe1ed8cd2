//! Policy files: one block per player, one row of action probabilities per state.
//!
//! ```text
//! policy 1
//! player 1 states 2 actions 2
//! 0.5 0.5
//! 0.9 0.1
//! player 2 states 2 actions 2
//! 1 0
//! 0.25 0.75
//! ```
//!
//! Either block may be omitted, which is how a fixed opponent is supplied on its own.

use std::fmt::Write as _;
use std::path::Path;

use tbrvi_core::{JointPolicy, MarkovGame, Matrix, Player};

#[derive(Debug, thiserror::Error)]
pub enum PolicyFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("policy file has no block for player {0}")]
    MissingPlayer(Player),
    #[error(
        "player {player} block is {found_states}x{found_actions}, game needs {states}x{actions}"
    )]
    Shape {
        player: Player,
        states: usize,
        actions: usize,
        found_states: usize,
        found_actions: usize,
    },
    #[error(transparent)]
    Core(#[from] tbrvi_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn syntax(line: usize, message: impl Into<String>) -> PolicyFileError {
    PolicyFileError::Syntax {
        line,
        message: message.into(),
    }
}

/// Per-player probability tables as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub pi1: Option<Matrix>,
    pub pi2: Option<Matrix>,
}

impl PolicyFile {
    pub fn table(&self, player: Player) -> Option<&Matrix> {
        match player {
            Player::One => self.pi1.as_ref(),
            Player::Two => self.pi2.as_ref(),
        }
    }

    /// The table of `player`, checked against the game's dimensions and the simplex.
    pub fn table_for(&self, game: &MarkovGame, player: Player) -> Result<Matrix, PolicyFileError> {
        let t = self
            .table(player)
            .ok_or(PolicyFileError::MissingPlayer(player))?;
        let (states, actions) = (game.n_states(), game.n_actions(player));
        if t.rows() != states || t.cols() != actions {
            return Err(PolicyFileError::Shape {
                player,
                states,
                actions,
                found_states: t.rows(),
                found_actions: t.cols(),
            });
        }
        Ok(t.clone())
    }

    pub fn into_joint(self, game: &MarkovGame) -> Result<JointPolicy, PolicyFileError> {
        let policy = JointPolicy::new(
            self.table_for(game, Player::One)?,
            self.table_for(game, Player::Two)?,
        );
        policy.validate(game)?;
        Ok(policy)
    }
}

struct Block {
    player: Player,
    states: usize,
    actions: usize,
    header_line: usize,
    rows: Vec<f64>,
}

pub fn parse_policy(text: &str) -> Result<PolicyFile, PolicyFileError> {
    let mut out = PolicyFile {
        pi1: None,
        pi2: None,
    };
    let mut header_seen = false;
    let mut block: Option<Block> = None;
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
            if toks != ["policy", "1"] {
                return Err(syntax(
                    line,
                    format!("expected header `policy 1`, found `{content}`"),
                ));
            }
            header_seen = true;
            continue;
        }
        if toks[0] == "player" {
            if let Some(b) = block.take() {
                finish(b, line, &mut out)?;
            }
            let [_, p, "states", s, "actions", a] = toks.as_slice() else {
                return Err(syntax(
                    line,
                    "expected `player <1|2> states <N> actions <M>`",
                ));
            };
            let player = match *p {
                "1" => Player::One,
                "2" => Player::Two,
                _ => return Err(syntax(line, format!("player must be 1 or 2, found `{p}`"))),
            };
            if out.table(player).is_some() {
                return Err(syntax(line, format!("duplicate block for player {player}")));
            }
            let parse = |t: &str| {
                t.parse::<usize>()
                    .ok()
                    .filter(|&v| v > 0)
                    .ok_or_else(|| syntax(line, format!("expected a positive count, found `{t}`")))
            };
            let (states, actions) = (parse(s)?, parse(a)?);
            block = Some(Block {
                player,
                states,
                actions,
                header_line: line,
                rows: Vec::with_capacity(states * actions),
            });
            continue;
        }
        let Some(b) = block.as_mut() else {
            return Err(syntax(line, "probability row outside a player block"));
        };
        if toks.len() != b.actions {
            return Err(syntax(
                line,
                format!("expected {} probabilities, found {}", b.actions, toks.len()),
            ));
        }
        if b.rows.len() == b.states * b.actions {
            return Err(syntax(
                line,
                format!("player {} block already has {} rows", b.player, b.states),
            ));
        }
        for t in toks {
            let v: f64 = t
                .parse()
                .map_err(|_| syntax(line, format!("cannot parse probability from `{t}`")))?;
            b.rows.push(v);
        }
        let row = &b.rows[b.rows.len() - b.actions..];
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&p| p.is_nan() || p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(syntax(
                line,
                format!("row is not a probability vector (sum {sum})"),
            ));
        }
    }
    if !header_seen {
        return Err(syntax(last_line.max(1), "missing header `policy 1`"));
    }
    if let Some(b) = block.take() {
        finish(b, last_line + 1, &mut out)?;
    }
    Ok(out)
}

fn finish(b: Block, line: usize, out: &mut PolicyFile) -> Result<(), PolicyFileError> {
    if b.rows.len() != b.states * b.actions {
        return Err(syntax(
            line,
            format!(
                "player {} block opened on line {} has {} rows, expected {}",
                b.player,
                b.header_line,
                b.rows.len() / b.actions,
                b.states
            ),
        ));
    }
    let m = Matrix::from_vec(b.states, b.actions, b.rows)?;
    match b.player {
        Player::One => out.pi1 = Some(m),
        Player::Two => out.pi2 = Some(m),
    }
    Ok(())
}

fn write_block(out: &mut String, player: Player, m: &Matrix) {
    let _ = writeln!(
        out,
        "player {player} states {} actions {}",
        m.rows(),
        m.cols()
    );
    for s in 0..m.rows() {
        let row: Vec<String> = m.row(s).iter().map(|p| p.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

pub fn write_policy(policy: &JointPolicy) -> String {
    let mut out = String::from("policy 1\n");
    write_block(&mut out, Player::One, &policy.pi1);
    write_block(&mut out, Player::Two, &policy.pi2);
    out
}

pub fn load_policy(path: &Path) -> Result<PolicyFile, PolicyFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| PolicyFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_policy(&text)
}
