//! CSV and JSON emitters for experiment results.
//!
//! Floats use Rust's shortest round-trip formatting (`{:?}`), so parsing a
//! written value recovers the exact `f64`. Undefined correlations are written as
//! `NaN` in CSV and `null` in JSON.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::{OutputFormat, RunConfig};
use crate::experiments::{CorrelationProfile, NmseTable};
use crate::{Error, Result};

pub const NMSE_HEADER: &str = "method,snr_db,nmse,stderr,n_trials";
pub const CORRELATION_HEADER: &str = "antenna_index,corr_sd,corr_onebit,n_draws";

pub fn nmse_csv(table: &NmseTable) -> String {
    let mut out = String::from(NMSE_HEADER);
    out.push('\n');
    for r in &table.rows {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{}",
            r.method, r.snr_db, r.nmse, r.stderr, r.n_trials
        )
        .unwrap();
    }
    out
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

pub fn correlation_csv(profile: &CorrelationProfile) -> String {
    let mut out = String::from(CORRELATION_HEADER);
    out.push('\n');
    for (i, (sd, ob)) in profile.sd.iter().zip(&profile.onebit).enumerate() {
        writeln!(
            out,
            "{},{:?},{:?},{}",
            i + 1,
            opt(*sd),
            opt(*ob),
            profile.n_draws
        )
        .unwrap();
    }
    out
}

#[derive(Serialize)]
struct CorrelationRow {
    antenna_index: usize,
    corr_sd: Option<f64>,
    corr_onebit: Option<f64>,
    n_draws: usize,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    base_seed: u64,
    config: &'a RunConfig,
    rows: T,
}

fn to_json<T: Serialize>(config: &RunConfig, rows: T) -> String {
    let doc = Document {
        base_seed: config.monte_carlo.base_seed,
        config,
        rows,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("results serialize");
    s.push('\n');
    s
}

pub fn nmse_json(table: &NmseTable, config: &RunConfig) -> String {
    to_json(config, &table.rows)
}

pub fn correlation_json(profile: &CorrelationProfile, config: &RunConfig) -> String {
    let rows: Vec<CorrelationRow> = profile
        .sd
        .iter()
        .zip(&profile.onebit)
        .enumerate()
        .map(|(i, (sd, ob))| CorrelationRow {
            antenna_index: i + 1,
            corr_sd: *sd,
            corr_onebit: *ob,
            n_draws: profile.n_draws,
        })
        .collect();
    to_json(config, rows)
}

/// Renders an NMSE table in the configured format.
pub fn render_nmse(table: &NmseTable, config: &RunConfig) -> String {
    match config.output_format {
        OutputFormat::Csv => nmse_csv(table),
        OutputFormat::Json => nmse_json(table, config),
    }
}

/// Renders a correlation profile in the configured format.
pub fn render_correlation(profile: &CorrelationProfile, config: &RunConfig) -> String {
    match config.output_format {
        OutputFormat::Csv => correlation_csv(profile),
        OutputFormat::Json => correlation_json(profile, config),
    }
}

/// Writes `contents` to `path`, or to standard output when `path` is `None`.
pub fn emit(contents: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, contents).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => std::io::stdout()
            .lock()
            .write_all(contents.as_bytes())
            .map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}
