//! Trace CSV files.
//!
//! Numbers are written in the shortest form that parses back to the same `f64`; oracle
//! failures leave `NaN` in the affected columns and are listed in the manifest.

use std::fmt::Write as _;

use tbrvi_core::learner::{RunTrace, TraceRow};

pub const TRACE_HEADER: &str =
    "t,nash_gap,v_sum_inf,v_err_1,v_err_2,min_margin,lyap_pi,lyap_q,wallclock_ns";

pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.nash_gap,
            r.v_sum_inf,
            r.v_err[0],
            r.v_err[1],
            r.min_margin,
            r.lyap_pi,
            r.lyap_q,
            r.wallclock_ns
        );
    }
    out
}

#[derive(Debug, thiserror::Error)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

/// Reads a trace written by [`trace_csv`]. Oracle messages are not part of the CSV.
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>, TraceParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRACE_HEADER => {}
        _ => {
            return Err(TraceParseError {
                line: 1,
                message: format!("expected header `{TRACE_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let err = |message: String| TraceParseError {
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(err(format!("expected 9 fields, found {}", f.len())));
        }
        let real = |k: usize| {
            f[k].parse::<f64>()
                .map_err(|_| err(format!("bad number `{}`", f[k])))
        };
        rows.push(TraceRow {
            t: f[0]
                .parse()
                .map_err(|_| err(format!("bad episode `{}`", f[0])))?,
            nash_gap: real(1)?,
            v_sum_inf: real(2)?,
            v_err: [real(3)?, real(4)?],
            min_margin: real(5)?,
            lyap_pi: real(6)?,
            lyap_q: real(7)?,
            wallclock_ns: f[8]
                .parse()
                .map_err(|_| err(format!("bad wallclock `{}`", f[8])))?,
            oracle_error: None,
        });
    }
    Ok(rows)
}
