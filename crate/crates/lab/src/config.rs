//! Experiment configuration files.
//!
//! The syntax is TOML restricted to the sections and keys below. Unknown sections and keys are
//! errors. Every error carries the line it refers to.
//!
//! ```toml
//! [game]
//! path = "fixture.zsg"        # or a generator spec: states, actions1, actions2, branching, gamma, seed
//!
//! [learner]
//! T = 50
//! K = 2000
//! eta = 20.0
//! alpha = 10.0                # optional, default 10
//! h = 100.0                   # optional, default 100
//! c_ab = 0.1                  # optional, default 0.1
//! mode = "self_play"          # optional; or "fixed_opponent" with `learner` and `opponent`
//! learner = 1
//! opponent = "uniform"        # or a policy file holding the opponent's block
//! theory_strict = false       # optional
//!
//! [eval]
//! eval_every = 1              # optional
//! oracle_tol = 1e-9           # optional
//!
//! [output]
//! directory = "runs/demo"     # optional, default "runs"; relative to the output root
//! trace = "trace.csv"         # optional
//! timing = false              # optional; record wall-clock nanoseconds in the trace
//!
//! [seed]
//! value = 1
//! ```

use std::fmt::{self, Write as _};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tbrvi_core::game::GeneratorSpec;
use tbrvi_core::learner::StepSchedule;
use tbrvi_core::oracle;
use toml::de::{DeTable, DeValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameSource {
    File(PathBuf),
    Generated(GeneratorConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub states: usize,
    pub actions1: usize,
    pub actions2: usize,
    pub branching: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl From<GeneratorConfig> for GeneratorSpec {
    fn from(g: GeneratorConfig) -> Self {
        GeneratorSpec {
            n_states: g.states,
            n_actions1: g.actions1,
            n_actions2: g.actions2,
            branching: g.branching,
            gamma: g.gamma,
            seed: g.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpponentSource {
    Uniform,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    SelfPlay,
    FixedOpponent {
        learner: u8,
        opponent: OpponentSource,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub game: GameSource,
    pub episodes: usize,
    pub inner_steps: usize,
    pub eta: f64,
    pub alpha: f64,
    pub h: f64,
    pub c_ab: f64,
    pub mode: ModeConfig,
    pub theory_strict: bool,
    pub eval_every: usize,
    pub oracle_tol: f64,
    pub output_dir: PathBuf,
    pub trace_name: String,
    pub timing: bool,
    pub seed: u64,
}

impl RunConfig {
    pub fn schedule(&self) -> StepSchedule {
        StepSchedule {
            alpha: self.alpha,
            h: self.h,
            c_ab: self.c_ab,
        }
    }

    /// Makes relative game and opponent paths relative to `base` (the config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        if let GameSource::File(p) = &mut self.game {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let ModeConfig::FixedOpponent {
            opponent: OpponentSource::File(p),
            ..
        } = &mut self.mode
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// Canonical config text; parsing it gives back `self`.
    pub fn to_config_text(&self) -> String {
        let mut out = String::from("[game]\n");
        match &self.game {
            GameSource::File(p) => {
                let _ = writeln!(out, "path = {}", quote(&p.to_string_lossy()));
            }
            GameSource::Generated(g) => {
                let _ = writeln!(
                    out,
                    "states = {}\nactions1 = {}\nactions2 = {}\nbranching = {}\ngamma = {}\nseed = {}",
                    g.states,
                    g.actions1,
                    g.actions2,
                    g.branching,
                    float(g.gamma),
                    g.seed
                );
            }
        }
        let _ = writeln!(
            out,
            "\n[learner]\nT = {}\nK = {}",
            self.episodes, self.inner_steps
        );
        let _ = writeln!(
            out,
            "eta = {}\nalpha = {}\nh = {}\nc_ab = {}",
            float(self.eta),
            float(self.alpha),
            float(self.h),
            float(self.c_ab)
        );
        match &self.mode {
            ModeConfig::SelfPlay => out.push_str("mode = \"self_play\"\n"),
            ModeConfig::FixedOpponent { learner, opponent } => {
                let _ = writeln!(out, "mode = \"fixed_opponent\"\nlearner = {learner}");
                let o = match opponent {
                    OpponentSource::Uniform => "uniform".to_string(),
                    OpponentSource::File(p) => p.to_string_lossy().into_owned(),
                };
                let _ = writeln!(out, "opponent = {}", quote(&o));
            }
        }
        let _ = writeln!(out, "theory_strict = {}", self.theory_strict);
        let _ = writeln!(
            out,
            "\n[eval]\neval_every = {}\noracle_tol = {}",
            self.eval_every,
            float(self.oracle_tol)
        );
        let _ = writeln!(
            out,
            "\n[output]\ndirectory = {}\ntrace = {}\ntiming = {}",
            quote(&self.output_dir.to_string_lossy()),
            quote(&self.trace_name),
            self.timing
        );
        let _ = writeln!(out, "\n[seed]\nvalue = {}", self.seed);
        out
    }
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Float literal that TOML reads back as a float with the same value.
fn float(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// All problems found in a config, sorted by line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "game",
        &[
            "path",
            "states",
            "actions1",
            "actions2",
            "branching",
            "gamma",
            "seed",
        ],
    ),
    (
        "learner",
        &[
            "T",
            "K",
            "eta",
            "alpha",
            "h",
            "c_ab",
            "mode",
            "learner",
            "opponent",
            "theory_strict",
        ],
    ),
    ("eval", &["eval_every", "oracle_tol"]),
    ("output", &["directory", "trace", "timing"]),
    ("seed", &["value"]),
];

const GENERATOR_KEYS: &[&str] = &[
    "states",
    "actions1",
    "actions2",
    "branching",
    "gamma",
    "seed",
];

impl std::error::Error for ConfigErrors {}

/// Closest candidate within a typo distance, for "did you mean" hints.
fn suggest<'a>(word: &str, candidates: &[&'a str]) -> Option<&'a str> {
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(word, c), *c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

struct LineIndex(Vec<usize>);

impl LineIndex {
    fn new(text: &str) -> Self {
        Self(text.match_indices('\n').map(|(i, _)| i).collect())
    }

    fn line(&self, span: &Range<usize>) -> usize {
        self.0.partition_point(|&nl| nl < span.start) + 1
    }
}

struct Section<'a, 'i> {
    name: &'static str,
    line: usize,
    table: Option<&'a DeTable<'i>>,
}

struct Reader {
    lines: LineIndex,
    errors: Vec<ConfigError>,
    eof_line: usize,
}

impl Reader {
    fn err(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            message: message.into(),
        });
    }

    fn entry<'a, 'i>(&self, sec: &Section<'a, 'i>, key: &str) -> Option<(usize, &'a DeValue<'i>)> {
        let (k, v) = sec.table?.get_key_value(key)?;
        Some((self.lines.line(&k.span()), v.get_ref()))
    }

    fn missing(&mut self, sec: &Section, key: &str) {
        let line = if sec.table.is_some() {
            sec.line
        } else {
            self.eof_line
        };
        self.err(
            line,
            format!("missing required key `{key}` in [{}]", sec.name),
        );
    }

    fn integer(&mut self, sec: &Section, key: &str) -> Option<Option<(usize, i128)>> {
        let (line, v) = self.entry(sec, key)?;
        match v {
            DeValue::Integer(i) => match i128::from_str_radix(i.as_str(), i.radix()) {
                Ok(n) => Some(Some((line, n))),
                Err(_) => {
                    self.err(line, format!("`{key}` is out of integer range"));
                    Some(None)
                }
            },
            other => {
                self.err(
                    line,
                    format!("`{key}` must be an integer, found {}", other.type_str()),
                );
                Some(None)
            }
        }
    }

    /// Unsigned integer at least `min`. `None` when absent, `Some(None)` when invalid.
    fn count(&mut self, sec: &Section, key: &str, min: u64) -> Option<Option<(usize, u64)>> {
        let (line, n) = match self.integer(sec, key)? {
            Some(x) => x,
            None => return Some(None),
        };
        if n < min as i128 || n > u64::MAX as i128 {
            self.err(
                line,
                format!("`{key}` = {n} out of range (must be at least {min})"),
            );
            return Some(None);
        }
        Some(Some((line, n as u64)))
    }

    fn real(&mut self, sec: &Section, key: &str) -> Option<Option<(usize, f64)>> {
        let (line, v) = self.entry(sec, key)?;
        let parsed = match v {
            DeValue::Float(f) => f.as_str().parse::<f64>().ok(),
            DeValue::Integer(i) => i64::from_str_radix(i.as_str(), i.radix())
                .ok()
                .map(|n| n as f64),
            other => {
                self.err(
                    line,
                    format!("`{key}` must be a number, found {}", other.type_str()),
                );
                return Some(None);
            }
        };
        match parsed {
            Some(x) if x.is_finite() => Some(Some((line, x))),
            _ => {
                self.err(line, format!("`{key}` must be a finite number"));
                Some(None)
            }
        }
    }

    fn string(&mut self, sec: &Section, key: &str) -> Option<Option<(usize, String)>> {
        let (line, v) = self.entry(sec, key)?;
        match v {
            DeValue::String(s) => Some(Some((line, s.to_string()))),
            other => {
                self.err(
                    line,
                    format!("`{key}` must be a string, found {}", other.type_str()),
                );
                Some(None)
            }
        }
    }

    fn boolean(&mut self, sec: &Section, key: &str) -> Option<Option<(usize, bool)>> {
        let (line, v) = self.entry(sec, key)?;
        match v {
            DeValue::Boolean(b) => Some(Some((line, *b))),
            other => {
                self.err(
                    line,
                    format!("`{key}` must be true or false, found {}", other.type_str()),
                );
                Some(None)
            }
        }
    }

    /// Required key: reports absence.
    fn req<T>(&mut self, sec: &Section, key: &str, got: Option<Option<T>>) -> Option<T> {
        match got {
            None => {
                self.missing(sec, key);
                None
            }
            Some(x) => x,
        }
    }
}

/// Parses and validates a config.
///
/// Defaults apply only to the keys marked optional in the module documentation.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let doc = DeTable::parse(text).map_err(|e| {
        let line = e.span().map(|s| LineIndex::new(text).line(&s)).unwrap_or(1);
        ConfigErrors(vec![ConfigError {
            line,
            message: format!("syntax error: {}", e.message()),
        }])
    })?;
    let mut r = Reader {
        lines: LineIndex::new(text),
        errors: Vec::new(),
        eof_line: text.lines().count().max(1),
    };
    let root = doc.get_ref();
    let section_names: Vec<&str> = SECTIONS.iter().map(|(n, _)| *n).collect();
    for (k, v) in root.iter() {
        let line = r.lines.line(&k.span());
        let name = k.get_ref().as_ref();
        let Some((_, keys)) = SECTIONS.iter().find(|(n, _)| *n == name) else {
            let hint = suggest(name, &section_names)
                .map(|s| format!("; did you mean [{s}]?"))
                .unwrap_or_default();
            if v.get_ref().is_table() {
                r.err(line, format!("unknown section [{name}]{hint}"));
            } else {
                r.err(line, format!("key `{name}` outside any section"));
            }
            continue;
        };
        let Some(table) = v.get_ref().as_table() else {
            r.err(line, format!("`{name}` must be a [{name}] section"));
            continue;
        };
        for (key, val) in table.iter() {
            let key_line = r.lines.line(&key.span());
            let key = key.get_ref().as_ref();
            if !keys.contains(&key) {
                let hint = suggest(key, keys)
                    .map(|s| format!("; did you mean `{s}`?"))
                    .unwrap_or_default();
                r.err(key_line, format!("unknown key `{key}` in [{name}]{hint}"));
            } else if val.get_ref().is_table() || val.get_ref().is_array() {
                r.err(key_line, format!("`{key}` must be a scalar"));
            }
        }
    }

    let section = |name: &'static str| -> Section {
        let (line, table) = match root.get_key_value(name) {
            Some((k, v)) => (r.lines.line(&k.span()), v.get_ref().as_table()),
            None => (0, None),
        };
        Section { name, line, table }
    };
    let (game_s, learner_s, eval_s, output_s, seed_s) = (
        section("game"),
        section("learner"),
        section("eval"),
        section("output"),
        section("seed"),
    );

    let game = parse_game_section(&mut r, &game_s);

    let episodes = r.count(&learner_s, "T", 1);
    let episodes = r.req(&learner_s, "T", episodes);
    let inner = r.count(&learner_s, "K", 0);
    let inner = r.req(&learner_s, "K", inner);
    let eta = r.real(&learner_s, "eta");
    let eta = r
        .req(&learner_s, "eta", eta)
        .and_then(|(line, x)| positive(&mut r, line, "eta", x));
    let defaults = StepSchedule::PRACTICAL;
    let mut schedule = [
        ("alpha", defaults.alpha),
        ("h", defaults.h),
        ("c_ab", defaults.c_ab),
    ]
    .map(|(key, default)| match r.real(&learner_s, key) {
        None => Some((None, default)),
        Some(Some((line, x))) => positive(&mut r, line, key, x).map(|x| (Some(line), x)),
        Some(None) => None,
    });
    if let [Some((al, alpha)), Some((_, h)), _] = schedule {
        if alpha / h >= 1.0 {
            r.err(
                al.unwrap_or(learner_s.line.max(1)),
                format!("alpha/h = {} must be below 1", alpha / h),
            );
            schedule[0] = None;
        }
    }
    if let Some((line, c)) = schedule[2] {
        if c > 1.0 {
            r.err(
                line.unwrap_or(learner_s.line.max(1)),
                format!("`c_ab` = {c} must not exceed 1"),
            );
            schedule[2] = None;
        }
    }
    let mode = parse_mode(&mut r, &learner_s);
    let theory_strict = match r.boolean(&learner_s, "theory_strict") {
        None => Some(false),
        Some(x) => x.map(|(_, b)| b),
    };

    let eval_every = match r.count(&eval_s, "eval_every", 1) {
        None => Some(1),
        Some(x) => x.map(|(_, n)| n as usize),
    };
    let oracle_tol = match r.real(&eval_s, "oracle_tol") {
        None => Some(oracle::DEFAULT_TOL),
        Some(Some((line, x))) => positive(&mut r, line, "oracle_tol", x),
        Some(None) => None,
    };

    let output_dir = match r.string(&output_s, "directory") {
        None => Some(PathBuf::from("runs")),
        Some(x) => x.map(|(_, s)| PathBuf::from(s)),
    };
    let trace_name = match r.string(&output_s, "trace") {
        None => Some("trace.csv".to_string()),
        Some(Some((line, s))) => {
            if s.is_empty() || s.contains(['/', '\\']) {
                r.err(line, "`trace` must be a plain file name");
                None
            } else {
                Some(s)
            }
        }
        Some(None) => None,
    };
    let timing = match r.boolean(&output_s, "timing") {
        None => Some(false),
        Some(x) => x.map(|(_, b)| b),
    };
    let seed = r.count(&seed_s, "value", 0);
    let seed = r.req(&seed_s, "value", seed);

    if !r.errors.is_empty() {
        r.errors.sort_by_key(|e| e.line);
        return Err(ConfigErrors(r.errors));
    }
    let [Some((_, alpha)), Some((_, h)), Some((_, c_ab))] = schedule else {
        unreachable!("schedule errors are recorded");
    };
    Ok(RunConfig {
        game: game.expect("no errors"),
        episodes: episodes.expect("no errors").1 as usize,
        inner_steps: inner.expect("no errors").1 as usize,
        eta: eta.expect("no errors"),
        alpha,
        h,
        c_ab,
        mode: mode.expect("no errors"),
        theory_strict: theory_strict.expect("no errors"),
        eval_every: eval_every.expect("no errors"),
        oracle_tol: oracle_tol.expect("no errors"),
        output_dir: output_dir.expect("no errors"),
        trace_name: trace_name.expect("no errors"),
        timing: timing.expect("no errors"),
        seed: seed.expect("no errors").1,
    })
}

fn positive(r: &mut Reader, line: usize, key: &str, x: f64) -> Option<f64> {
    if x > 0.0 {
        Some(x)
    } else {
        r.err(line, format!("`{key}` = {x} must be positive"));
        None
    }
}

fn parse_game_section(r: &mut Reader, sec: &Section) -> Option<GameSource> {
    let has_path = sec.table.is_some_and(|t| t.contains_key("path"));
    let generator_keys: Vec<&str> = GENERATOR_KEYS
        .iter()
        .copied()
        .filter(|k| sec.table.is_some_and(|t| t.contains_key(*k)))
        .collect();
    if has_path {
        let path = r.string(sec, "path")?;
        if let Some(k) = generator_keys.first() {
            let (line, _) = r.entry(sec, k)?;
            r.err(
                line,
                format!("`{k}` cannot be combined with `path` in [game]"),
            );
            return None;
        }
        return path.map(|(_, p)| GameSource::File(PathBuf::from(p)));
    }
    if generator_keys.is_empty() {
        let line = if sec.table.is_some() {
            sec.line
        } else {
            r.eof_line
        };
        r.err(line, "[game] needs `path` or a generator spec (states, actions1, actions2, branching, gamma, seed)");
        return None;
    }
    let states = r.count(sec, "states", 1);
    let states = r.req(sec, "states", states);
    let actions1 = r.count(sec, "actions1", 1);
    let actions1 = r.req(sec, "actions1", actions1);
    let actions2 = r.count(sec, "actions2", 1);
    let actions2 = r.req(sec, "actions2", actions2);
    let branching = r.count(sec, "branching", 1);
    let branching = r.req(sec, "branching", branching);
    let gamma = r.real(sec, "gamma");
    let gamma = r.req(sec, "gamma", gamma).and_then(|(line, g)| {
        if g > 0.0 && g < 1.0 {
            Some(g)
        } else {
            r.err(
                line,
                format!("`gamma` = {g} out of range (must lie in (0, 1))"),
            );
            None
        }
    });
    let seed = r.count(sec, "seed", 0);
    let seed = r.req(sec, "seed", seed);
    let (states, actions1, actions2, branching, gamma, seed) =
        (states?, actions1?, actions2?, branching?, gamma?, seed?);
    if branching.1 > states.1 {
        r.err(
            branching.0,
            format!(
                "`branching` = {} exceeds the number of states {}",
                branching.1, states.1
            ),
        );
        return None;
    }
    Some(GameSource::Generated(GeneratorConfig {
        states: states.1 as usize,
        actions1: actions1.1 as usize,
        actions2: actions2.1 as usize,
        branching: branching.1 as usize,
        gamma,
        seed: seed.1,
    }))
}

fn parse_mode(r: &mut Reader, sec: &Section) -> Option<ModeConfig> {
    let mode = match r.string(sec, "mode") {
        None => (sec.line.max(1), "self_play".to_string()),
        Some(m) => m?,
    };
    match mode.1.as_str() {
        "self_play" => {
            for key in ["learner", "opponent"] {
                if let Some((line, _)) = r.entry(sec, key) {
                    r.err(
                        line,
                        format!("`{key}` only applies to mode = \"fixed_opponent\""),
                    );
                }
            }
            Some(ModeConfig::SelfPlay)
        }
        "fixed_opponent" => {
            let learner = r.count(sec, "learner", 1);
            let learner = r.req(sec, "learner", learner).and_then(|(line, p)| {
                if p == 1 || p == 2 {
                    Some(p as u8)
                } else {
                    r.err(line, format!("`learner` = {p} must be 1 or 2"));
                    None
                }
            });
            let opponent = r.string(sec, "opponent");
            let opponent = r.req(sec, "opponent", opponent).map(|(_, o)| {
                if o == "uniform" {
                    OpponentSource::Uniform
                } else {
                    OpponentSource::File(PathBuf::from(o))
                }
            });
            Some(ModeConfig::FixedOpponent {
                learner: learner?,
                opponent: opponent?,
            })
        }
        other => {
            let hint = suggest(other, &["self_play", "fixed_opponent"])
                .map(|s| format!("; did you mean \"{s}\"?"))
                .unwrap_or_default();
            r.err(mode.0, format!("unknown mode \"{other}\"{hint}"));
            None
        }
    }
}

/// Reads a config file and resolves its relative paths against the file's directory.
pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| anyhow::anyhow!("{}:\n{e}", path.display()))?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}
