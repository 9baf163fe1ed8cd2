//! Runs and seed sweeps with their on-disk artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use tbrvi_core::game::{self, generate_game};
use tbrvi_core::learner::{self, ExperimentConfig, Mode, RunOutput};
use tbrvi_core::{rng, theory, tsallis, JointPolicy, MarkovGame, Player};

use crate::config::{GameSource, ModeConfig, OpponentSource, RunConfig};
use crate::game_file::{load_game, sha256_hex, write_game};
use crate::manifest::{Manifest, MarginSummary, OracleErrorRecord, TheorySummary};
use crate::policy_file::{load_policy, write_policy};
use crate::trace::trace_csv;

/// Overrides the directory that relative output directories are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "TBRVI_OUTPUT_ROOT";

pub const MANIFEST_NAME: &str = "manifest.json";
pub const POLICY_NAME: &str = "policy.txt";

/// `$TBRVI_OUTPUT_ROOT`, or the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Output directory of a run: absolute directories are used as given.
pub fn resolve_output_dir(cfg: &RunConfig, root: &Path) -> PathBuf {
    if cfg.output_dir.is_absolute() {
        cfg.output_dir.clone()
    } else {
        root.join(&cfg.output_dir)
    }
}

/// The game a config refers to and its hash.
pub fn load_game_source(source: &GameSource) -> Result<(MarkovGame, String)> {
    match source {
        GameSource::File(path) => load_game(path).map_err(|e| anyhow!("{}: {e}", path.display())),
        GameSource::Generated(spec) => {
            let game = generate_game(&(*spec).into())?;
            let hash = sha256_hex(write_game(&game).as_bytes());
            Ok((game, hash))
        }
    }
}

/// Core configuration for `cfg`, loading the opponent policy when one is named.
pub fn experiment_config(cfg: &RunConfig, game: &MarkovGame) -> Result<ExperimentConfig> {
    let mode = match &cfg.mode {
        ModeConfig::SelfPlay => Mode::SelfPlay,
        ModeConfig::FixedOpponent { learner, opponent } => {
            let learner = if *learner == 1 {
                Player::One
            } else {
                Player::Two
            };
            let opp = learner.opponent();
            let opponent = match opponent {
                OpponentSource::Uniform => {
                    game::uniform_table(game.n_states(), game.n_actions(opp))
                }
                OpponentSource::File(path) => load_policy(path)
                    .and_then(|p| p.table_for(game, opp))
                    .map_err(|e| anyhow!("{}: {e}", path.display()))?,
            };
            Mode::FixedOpponent { learner, opponent }
        }
    };
    let mut config = ExperimentConfig::new(cfg.episodes, cfg.inner_steps, cfg.eta, cfg.seed);
    config.schedule = cfg.schedule();
    config.mode = mode;
    config.eval_every = cfg.eval_every;
    config.oracle_tol = cfg.oracle_tol;
    config.theory_strict = cfg.theory_strict;
    Ok(config)
}

/// Paths written by one run, with its in-memory results.
#[derive(Debug)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub trace_path: PathBuf,
    pub manifest_path: PathBuf,
    pub policy_path: PathBuf,
    pub manifest: Manifest,
    pub output: RunOutput,
}

/// Runs one experiment and writes the trace, manifest and final policy into `out_dir`.
pub fn run_experiment(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let (game, game_hash) = load_game_source(&cfg.game)?;
    let config = experiment_config(cfg, &game)?;

    let start = Instant::now();
    let output = if cfg.timing {
        learner::run_with_clock(&game, &config, &mut || start.elapsed().as_nanos() as u64)
    } else {
        learner::run(&game, &config)
    }
    .context("run failed")?;
    let elapsed_ns = cfg.timing.then(|| start.elapsed().as_nanos() as u64);

    let (theory, theory_error) = match theory::theory_constants(
        &game,
        cfg.eta,
        &JointPolicy::uniform(&game),
        &cfg.schedule(),
        cfg.inner_steps,
    ) {
        Ok(r) => (Some(TheorySummary::from(&r)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let a_max = game.max_actions();
    let rows = &output.trace.rows;
    let manifest = Manifest {
        library: "tbrvi-core".into(),
        library_version: tbrvi_core::VERSION.into(),
        rng_algorithm: rng::RNG_ALGORITHM.into(),
        seed: cfg.seed,
        game_hash,
        config: cfg.clone(),
        trace_file: cfg.trace_name.clone(),
        policy_file: POLICY_NAME.into(),
        trace_rows: rows.len(),
        final_nash_gap: rows.last().map(|r| r.nash_gap).filter(|g| g.is_finite()),
        margins: MarginSummary {
            min_margin: Some(output.margins.min_margin).filter(|m| m.is_finite()),
            policy_updates: output.margins.updates,
            stated_floor: tsallis::margin_floor(a_max, cfg.eta, game.gamma()),
            provable_floor: tsallis::provable_margin_floor(a_max, cfg.eta, game.gamma()),
            below_stated_floor: output.margins.below_stated_floor,
        },
        oracle_errors: rows
            .iter()
            .filter_map(|r| {
                r.oracle_error.as_ref().map(|m| OracleErrorRecord {
                    t: r.t,
                    message: m.clone(),
                })
            })
            .collect(),
        theory,
        theory_error,
        elapsed_ns,
    };

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let trace_path = out_dir.join(&cfg.trace_name);
    let manifest_path = out_dir.join(MANIFEST_NAME);
    let policy_path = out_dir.join(POLICY_NAME);
    fs::write(&trace_path, trace_csv(&output.trace))
        .with_context(|| format!("writing {}", trace_path.display()))?;
    fs::write(&manifest_path, manifest.to_json())
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    fs::write(&policy_path, write_policy(&output.policy))
        .with_context(|| format!("writing {}", policy_path.display()))?;
    Ok(RunArtifacts {
        dir: out_dir.to_path_buf(),
        trace_path,
        manifest_path,
        policy_path,
        manifest,
        output,
    })
}

/// Runs `cfg` once per seed on `jobs` worker threads; seed `s` writes to `out_dir/seed-<s>`.
pub fn sweep(
    cfg: &RunConfig,
    seeds: &[u64],
    jobs: usize,
    out_dir: &Path,
) -> Result<Vec<RunArtifacts>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building worker pool")?;
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut c = cfg.clone();
                c.seed = seed;
                run_experiment(&c, &out_dir.join(format!("seed-{seed}")))
                    .with_context(|| format!("seed {seed}"))
            })
            .collect()
    })
}
