//! Result files.
//!
//! | file                    | content                                        |
//! |-------------------------|------------------------------------------------|
//! | `summary.json`          | per-condition statistics and trials, config echo |
//! | `trials.csv`            | one row per condition, scenario and trial      |
//! | `spectra/condition_K.csv` | MUSIC spectrum of scenario 0, trial 0         |
//! | `resolved_config.toml`  | the configuration with every default written out |
//! | `run_info.json`         | timestamp, version and worker count            |
//! | `erank.json`, `erank.csv` | effective-rank records                       |
//!
//! Everything except `run_info.json` is a deterministic function of the
//! configuration and seed.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::erank::ErankResult;
use crate::error::{Error, Result};
use crate::experiment::{EstimateResult, RunResult};

pub const TRIALS_HEADER: [&str; 14] = [
    "condition",
    "angular_velocity_deg_s",
    "source_kind",
    "modulation",
    "snr_db",
    "method",
    "stack",
    "scenario",
    "trial",
    "error_deg",
    "estimates_deg",
    "truth_deg",
    "shortfall",
    "failure",
];

pub const ERANK_HEADER: [&str; 9] = [
    "motion",
    "frequency_hz",
    "rotation_deg",
    "translation_m",
    "angular_velocity_deg_s",
    "frames",
    "order",
    "effective_rank",
    "significant_singular_values",
];

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn pairs(v: &[[f64; 2]]) -> String {
    v.iter()
        .map(|[t, p]| format!("{t}:{p}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Per-trial rows; header only when there are no trials.
pub fn trials_csv(run: &RunResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIALS_HEADER)?;
    for c in &run.conditions {
        let kind = serde_json::to_value(c.source.kind)?;
        let modulation = c.source.am_level_db.or(c.source.fm_deviation_hz);
        for t in &c.trials {
            w.write_record([
                c.id.to_string(),
                opt(c.angular_velocity_deg_s),
                kind.as_str().unwrap_or_default().to_string(),
                opt(modulation),
                opt(c.snr_db),
                c.method.label().to_string(),
                opt(c.stack),
                t.scenario.to_string(),
                t.trial.to_string(),
                opt(t.error_deg),
                pairs(&t.estimates_deg),
                pairs(&t.truth_deg),
                t.shortfall.to_string(),
                t.failure.clone().unwrap_or_default(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::io("trials.csv", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV writer emits UTF-8"))
}

fn spectrum_csv(run: &RunResult, values: &[f64]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theta_deg", "phi_deg", "value"])?;
    for ([t, p], v) in run.grid_deg.iter().zip(values) {
        w.write_record([t.to_string(), p.to_string(), v.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("spectrum", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV writer emits UTF-8"))
}

pub fn erank_csv(res: &ErankResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ERANK_HEADER)?;
    for r in &res.records {
        w.write_record([
            r.motion.clone(),
            r.frequency_hz.to_string(),
            opt(r.rotation_deg),
            opt(r.translation_m),
            opt(r.angular_velocity_deg_s),
            r.frames.to_string(),
            r.order.to_string(),
            r.effective_rank.to_string(),
            r.significant_singular_values.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("erank.csv", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV writer emits UTF-8"))
}

#[derive(Serialize)]
struct RunInfo<'a> {
    schema_version: u32,
    command: &'a str,
    timestamp: String,
    version: &'static str,
    jobs: usize,
}

/// Writes the non-deterministic run metadata.
pub fn write_run_info(dir: &Path, command: &str, jobs: usize) -> Result<()> {
    ensure_dir(dir)?;
    write_json(
        &dir.join("run_info.json"),
        &RunInfo {
            schema_version: crate::experiment::SCHEMA_VERSION,
            command,
            timestamp: chrono::Utc::now().to_rfc3339(),
            version: env!("CARGO_PKG_VERSION"),
            jobs,
        },
    )
}

pub fn write_resolved_config(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    ensure_dir(dir)?;
    write_text(&dir.join("resolved_config.toml"), &cfg.to_toml()?)
}

/// `summary.json`, `trials.csv` and the spectra.
pub fn write_run(dir: &Path, run: &RunResult) -> Result<()> {
    ensure_dir(dir)?;
    write_json(&dir.join("summary.json"), run)?;
    write_text(&dir.join("trials.csv"), &trials_csv(run)?)?;
    let spectra: Vec<_> = run
        .conditions
        .iter()
        .filter_map(|c| c.spectrum.as_ref().map(|s| (c.id, s)))
        .collect();
    if !spectra.is_empty() {
        let sd = dir.join("spectra");
        ensure_dir(&sd)?;
        for (id, values) in spectra {
            write_text(&sd.join(format!("condition_{id}.csv")), &spectrum_csv(run, values)?)?;
        }
    }
    Ok(())
}

pub fn write_erank(dir: &Path, res: &ErankResult) -> Result<()> {
    ensure_dir(dir)?;
    write_json(&dir.join("erank.json"), res)?;
    write_text(&dir.join("erank.csv"), &erank_csv(res)?)
}

pub fn write_estimate(dir: &Path, res: &EstimateResult) -> Result<()> {
    ensure_dir(dir)?;
    write_json(&dir.join("estimate.json"), res)
}
