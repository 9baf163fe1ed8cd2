//! Files, configuration, experiment orchestration and property suites around `tbrvi-core`.
//!
//! The `tbrvi` binary is a thin layer over this crate.

pub mod config;
pub mod experiment;
pub mod game_file;
pub mod manifest;
pub mod policy_file;
pub mod trace;
pub mod verify;
