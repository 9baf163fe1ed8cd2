//! Run manifests (JSON).

use serde::{Deserialize, Serialize};
use tbrvi_core::chain::Steps;
use tbrvi_core::theory::TheoryReport;

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library: String,
    pub library_version: String,
    pub rng_algorithm: String,
    pub seed: u64,
    /// SHA-256 of the game file, or of the canonical text of a generated game.
    pub game_hash: String,
    /// Effective configuration, with defaults filled and paths resolved.
    pub config: RunConfig,
    pub trace_file: String,
    pub policy_file: String,
    pub trace_rows: usize,
    pub final_nash_gap: Option<f64>,
    pub margins: MarginSummary,
    pub oracle_errors: Vec<OracleErrorRecord>,
    pub theory: Option<TheorySummary>,
    pub theory_error: Option<String>,
    /// Total run time, recorded only when timing is enabled.
    pub elapsed_ns: Option<u64>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    /// Smallest learning-player probability after any policy update; absent when `K = 0`.
    pub min_margin: Option<f64>,
    pub policy_updates: usize,
    /// `ℓ_η` at the largest action set.
    pub stated_floor: f64,
    pub provable_floor: f64,
    /// Policy updates that went below `stated_floor`.
    pub below_stated_floor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleErrorRecord {
    pub t: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZRecord {
    pub k: usize,
    pub beta_k: f64,
    pub benchmark_mixing: usize,
    pub benchmark_mixing_saturated: bool,
    pub z_k: Option<f64>,
}

/// Analysis constants for the uniform benchmark policy over the configured `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub ell_eta: f64,
    pub provable_ell_eta: f64,
    pub r_b: usize,
    pub mu_b_min: f64,
    pub rho_b_estimate: f64,
    pub mu_floor_per_step: f64,
    pub mu_floor_r_b: f64,
    pub c_eta_product: f64,
    pub c_eta_square: f64,
    pub c_ab_bound_product: f64,
    pub c_ab_bound_square: f64,
    pub c_ab: f64,
    pub beta: f64,
    pub beta_above_two: bool,
    pub alpha_over_h_below_one: bool,
    pub alpha_window_ok: bool,
    pub k0: Option<usize>,
    pub z_table: Vec<ZRecord>,
    pub strict_violations: Vec<String>,
}

impl From<&TheoryReport> for TheorySummary {
    fn from(r: &TheoryReport) -> Self {
        Self {
            ell_eta: r.ell_eta,
            provable_ell_eta: r.provable_ell_eta,
            r_b: r.r_b,
            mu_b_min: r.mu_b_min,
            rho_b_estimate: r.rho_b_estimate,
            mu_floor_per_step: r.mu_floor_per_step,
            mu_floor_r_b: r.mu_floor_r_b,
            c_eta_product: r.c_eta_product,
            c_eta_square: r.c_eta_square,
            c_ab_bound_product: r.c_ab_bound_product,
            c_ab_bound_square: r.c_ab_bound_square,
            c_ab: r.c_ab,
            beta: r.condition1.beta,
            beta_above_two: r.condition1.beta_ok,
            alpha_over_h_below_one: r.condition1.alpha_over_h_ok,
            alpha_window_ok: r.condition1.window_ok,
            k0: r.k0,
            z_table: r
                .z_table
                .iter()
                .map(|z| {
                    let (steps, saturated) = match z.benchmark_mixing {
                        Steps::Reached(k) => (k, false),
                        Steps::Saturated(k) => (k, true),
                    };
                    ZRecord {
                        k: z.k,
                        beta_k: z.beta_k,
                        benchmark_mixing: steps,
                        benchmark_mixing_saturated: saturated,
                        z_k: z.z_k,
                    }
                })
                .collect(),
            strict_violations: r.strict_violations(),
        }
    }
}
