//! Side-by-side runs of several forecasters against one adversary.

use std::path::Path;

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use perturb_core::analytics::applicable_bounds;
use perturb_core::records::write_records_file;
use perturb_core::{check_run_against_bounds, run_game, BoundKind, BoundParams, RegretReport, RngStream};

use crate::config::{AdversaryConfig, ForecasterConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: usize,
    pub label: String,
    /// `None` on the per-variant mean row.
    pub seed: Option<u64>,
    pub total_expected_cost: f64,
    pub regret: f64,
    /// First requested bound, or the first one that applies when none were requested.
    pub bound: Option<String>,
    pub bound_value: Option<f64>,
    pub bound_satisfied: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRun {
    pub variant: usize,
    pub label: String,
    pub seed: u64,
    pub report: RegretReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    /// Sorted by variant then seed; each variant's mean row follows its seeds.
    pub rows: Vec<ComparisonRow>,
    pub runs: Vec<VariantRun>,
    /// Every requested bound held on every run.
    pub passed: bool,
}

pub struct CompareSpec<'a> {
    pub variants: &'a [ForecasterConfig],
    pub adversary: &'a AdversaryConfig,
    pub rounds: usize,
    pub seeds: &'a [u64],
    pub bounds: &'a [BoundKind],
    pub samples: Option<u64>,
}

/// Runs every (variant, seed) pair. With `log_dir`, writes `rounds_v<variant>_seed<seed>.csv`.
pub fn compare_forecasters(spec: &CompareSpec<'_>, log_dir: Option<&Path>) -> Result<ComparisonTable> {
    if spec.variants.len() < 2 {
        bail!(
            "comparisons need at least 2 variants, got {}",
            spec.variants.len()
        );
    }
    let adversary = spec.adversary.build()?;
    let forecasters = spec
        .variants
        .iter()
        .map(|v| v.build(spec.samples))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..spec.variants.len())
        .flat_map(|v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(v, seed)| -> Result<VariantRun> {
            let records = run_game(
                forecasters[v].as_ref(),
                &adversary,
                spec.rounds,
                RngStream::new(seed),
            )?;
            if let Some(dir) = log_dir {
                write_records_file(dir.join(format!("rounds_v{v}_seed{seed}.csv")), &records)?;
            }
            let algo = spec.variants[v].descriptor();
            let bounds = if spec.bounds.is_empty() {
                applicable_bounds(&records, &algo)
            } else {
                spec.bounds.to_vec()
            };
            let report = check_run_against_bounds(&records, &algo, &BoundParams::simplex(&records), &bounds)?;
            Ok(VariantRun {
                variant: v,
                label: spec.variants[v].label(),
                seed,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for v in 0..spec.variants.len() {
        let mut mine: Vec<&VariantRun> = runs.iter().filter(|r| r.variant == v).collect();
        mine.sort_by_key(|r| r.seed);
        for r in &mine {
            let b = r.report.bounds_checked.first();
            rows.push(ComparisonRow {
                variant: v,
                label: r.label.clone(),
                seed: Some(r.seed),
                total_expected_cost: r.report.algorithm_expected_cost,
                regret: r.report.regret,
                bound: b.map(|b| b.name.clone()),
                bound_value: b.map(|b| b.value),
                bound_satisfied: b.map(|b| b.satisfied),
            });
        }
        let k = mine.len() as f64;
        let first = mine[0].report.bounds_checked.first();
        rows.push(ComparisonRow {
            variant: v,
            label: spec.variants[v].label(),
            seed: None,
            total_expected_cost: mine.iter().map(|r| r.report.algorithm_expected_cost).sum::<f64>() / k,
            regret: mine.iter().map(|r| r.report.regret).sum::<f64>() / k,
            bound: first.map(|b| b.name.clone()),
            bound_value: first
                .map(|_| mine.iter().map(|r| r.report.bounds_checked[0].value).sum::<f64>() / k),
            bound_satisfied: first.map(|_| mine.iter().all(|r| r.report.bounds_checked[0].satisfied)),
        });
    }
    let passed = spec.bounds.is_empty() || runs.iter().all(|r| r.report.all_satisfied());
    Ok(ComparisonTable { rows, runs, passed })
}

/// Writes the comparison table as CSV; the mean rows carry `mean` in the seed column.
pub fn write_comparison(path: &Path, table: &ComparisonTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "variant",
        "label",
        "seed",
        "total_expected_cost",
        "regret",
        "bound",
        "bound_value",
        "bound_satisfied",
    ])?;
    for r in &table.rows {
        w.write_record([
            r.variant.to_string(),
            r.label.clone(),
            r.seed.map_or("mean".into(), |s| s.to_string()),
            r.total_expected_cost.to_string(),
            r.regret.to_string(),
            r.bound.clone().unwrap_or_default(),
            r.bound_value.map(|v| v.to_string()).unwrap_or_default(),
            r.bound_satisfied.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
