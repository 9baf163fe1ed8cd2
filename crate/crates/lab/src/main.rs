use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use tbrvi_core::chain::{self, Steps};
use tbrvi_core::{oracle, JointPolicy, MarkovGame, Player};
use tbrvi_lab::config::load_config;
use tbrvi_lab::experiment::{output_root, resolve_output_dir, run_experiment, sweep};
use tbrvi_lab::game_file::load_game;
use tbrvi_lab::policy_file::load_policy;
use tbrvi_lab::verify::{run_suite, VerifyOptions};

/// Tabular zero-sum Markov game laboratory.
#[derive(Debug, Parser)]
#[command(name = "tbrvi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write its trace, manifest and final policy.
    Run {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Solve a game exactly and print both players' values as CSV.
    Solve {
        #[arg(short, long)]
        game: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Also print the stage-game certificate of every state at the solution.
        #[arg(long)]
        certificates: bool,
    },
    /// Markov-chain diagnostics of the chain a joint policy induces.
    Diag {
        #[arg(short, long)]
        game: PathBuf,
        #[arg(long, conflicts_with = "uniform")]
        policy: Option<PathBuf>,
        /// Use the uniform joint policy (the default).
        #[arg(long)]
        uniform: bool,
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
        /// Print CSV instead of aligned text.
        #[arg(long)]
        csv: bool,
    },
    /// Run property suites: tsallis, values, oracle, chain, or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
        /// One JSON object per property instead of text lines.
        #[arg(long)]
        json: bool,
        /// Scale the Lipschitz constant under test.
        #[arg(long, default_value_t = 1.0, hide = true)]
        lipschitz_scale: f64,
    },
    /// Run one config over several seeds in parallel.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let out = resolve_output_dir(&cfg, &output_root());
            let a = run_experiment(&cfg, &out)?;
            println!("trace    {}", a.trace_path.display());
            println!("manifest {}", a.manifest_path.display());
            println!("policy   {}", a.policy_path.display());
            if let Some(g) = a.manifest.final_nash_gap {
                println!("final nash gap {g:.6}");
            }
        }
        Command::Sweep {
            config,
            seeds,
            jobs,
        } => {
            let cfg = load_config(&config)?;
            let out = resolve_output_dir(&cfg, &output_root());
            for a in sweep(&cfg, &seeds, jobs, &out)? {
                println!("seed {} -> {}", a.manifest.seed, a.trace_path.display());
            }
        }
        Command::Solve {
            game,
            tol,
            certificates,
        } => solve(&game, tol, certificates)?,
        Command::Diag {
            game,
            policy,
            uniform: _,
            epsilon,
            csv,
        } => diag(&game, policy.as_deref(), epsilon, csv)?,
        Command::Verify {
            suite,
            json,
            lipschitz_scale,
        } => {
            let results = run_suite(&suite, &VerifyOptions { lipschitz_scale })?;
            for r in &results {
                println!("{}", if json { r.json() } else { r.line() });
            }
            if results.iter().any(|r| !r.passed) {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn solve(path: &Path, tol: f64, certificates: bool) -> Result<()> {
    let (game, _) = load_game(path).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let sol = oracle::solve_both(&game, tol)?;
    println!("state,v1,v2");
    for s in 0..game.n_states() {
        println!("{s},{},{}", sol.player1.v_star[s], sol.player2.v_star[s]);
    }
    println!(
        "# residual1 {:e} residual2 {:e}",
        sol.player1.residual, sol.player2.residual
    );
    println!(
        "# iterations1 {} iterations2 {}",
        sol.player1.iterations, sol.player2.iterations
    );
    println!("# antisymmetry {:e}", sol.antisymmetry);
    if certificates {
        for s in 0..game.n_states() {
            let x = game.payoff_matrix(&sol.player1.v_star, s, Player::One)?;
            let m = oracle::matrix_game_value(&x, tol)?;
            println!("# state {s}: value {}", m.value);
            println!("#   row {:?}", m.row_strategy.as_slice());
            println!("#   col {:?}", m.col_strategy.as_slice());
            println!("#   certificate gap {:e}", m.certificate_gap);
        }
    }
    Ok(())
}

fn steps_text(s: Steps) -> String {
    match s {
        Steps::Reached(k) => k.to_string(),
        Steps::Saturated(k) => format!(">{k}"),
    }
}

fn diag(path: &Path, policy: Option<&Path>, epsilon: f64, csv: bool) -> Result<()> {
    let (game, _): (MarkovGame, _) =
        load_game(path).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let policy = match policy {
        Some(p) => load_policy(p)
            .and_then(|f| f.into_joint(&game))
            .map_err(|e| anyhow!("{}: {e}", p.display()))?,
        None => JointPolicy::uniform(&game),
    };
    let p = game.induced_chain(&policy)?;
    let r = chain::chain_report(&p, epsilon)?;
    let margin = chain::policy_margin(&policy);
    if csv {
        println!("key,value");
        for (s, m) in r.stationary.iter().enumerate() {
            println!("mu_{s},{m}");
        }
        println!("min_stationary,{}", r.min_stationary);
        println!("stationary_residual,{}", r.stationary_residual);
        println!("mixing_time,{}", steps_text(r.mixing_time));
        println!("r_b,{}", steps_text(r.r_b));
        println!("irreducible_aperiodic,{}", r.irreducible_aperiodic);
        println!("policy_margin,{margin}");
    } else {
        let mu: Vec<String> = r.stationary.iter().map(|m| format!("{m:.6}")).collect();
        println!("stationary           [{}]", mu.join(", "));
        println!("min stationary       {:.6e}", r.min_stationary);
        println!("stationary residual  {:.3e}", r.stationary_residual);
        println!("mixing time (eps={epsilon}) {}", steps_text(r.mixing_time));
        println!("r_b                  {}", steps_text(r.r_b));
        println!("irreducible/aperiodic {}", r.irreducible_aperiodic);
        println!("policy margin        {margin:.6e}");
    }
    Ok(())
}
