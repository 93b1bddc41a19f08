//! Files written by experiments.

use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use perturb_core::records::read_loss_rows;
use perturb_core::spath::PathRound;

use crate::config::ExperimentConfig;

/// Top level of every `summary.json`.
#[derive(Debug, Serialize)]
pub struct Summary<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    /// The only field that changes between identical reruns.
    pub timestamp: String,
    pub kind: &'static str,
    pub seeds: &'a [u64],
    pub passed: bool,
    pub config: &'a ExperimentConfig,
    pub results: T,
}

impl<'a, T: Serialize> Summary<'a, T> {
    pub fn new(config: &'a ExperimentConfig, passed: bool, results: T) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            kind: config.kind.name(),
            seeds: &config.seeds,
            passed,
            config,
            results,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<std::path::PathBuf> {
        let path = dir.join("summary.json");
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(path)
    }
}

/// Plot-ready regret table: `t, mean, seed_<s>...`, one row per round.
pub fn write_trajectories(path: &Path, seeds: &[u64], trajectories: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["t".to_string(), "mean".to_string()];
    header.extend(seeds.iter().map(|s| format!("seed_{s}")));
    w.write_record(&header)?;
    let rounds = trajectories.iter().map(Vec::len).max().unwrap_or(0);
    for t in 0..rounds {
        let vals: Vec<f64> = trajectories.iter().map(|tr| tr[t]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let mut row = vec![(t + 1).to_string(), mean.to_string()];
        row.extend(vals.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-round log of a path game: `t, paid, path, time_<e>...`. Path edges are joined by `-`.
pub fn write_path_rounds(path: &Path, rounds: &[PathRound]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let m = rounds.first().map_or(0, |r| r.times.len());
    let mut header = vec!["t".to_string(), "paid".to_string(), "path".to_string()];
    header.extend((0..m).map(|e| format!("time_{e}")));
    w.write_record(&header)?;
    for r in rounds {
        let mut row = vec![
            r.t.to_string(),
            r.paid.to_string(),
            r.edges.iter().map(usize::to_string).collect::<Vec<_>>().join("-"),
        ];
        row.extend(r.times.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Edge-time rows from a CSV with `time_<e>` columns (a path round log) or `loss_<e>`
/// columns (a round log of the expert game).
pub fn read_edge_time_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let cols: Vec<(usize, usize)> = r
        .headers()?
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.strip_prefix("time_")
                .and_then(|e| e.parse().ok())
                .map(|e| (e, i))
        })
        .collect();
    if cols.is_empty() {
        return Ok(read_loss_rows(text.as_bytes())?);
    }
    let mut sorted = cols;
    sorted.sort();
    if sorted.iter().enumerate().any(|(k, (e, _))| k != *e) {
        bail!("time_<edge> columns must be numbered 0..m without gaps");
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = sorted
            .iter()
            .map(|(e, i)| {
                rec.get(*i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .with_context(|| format!("row {}: bad time for edge {e}", line + 1))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
