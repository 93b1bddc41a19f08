//! Runners for each experiment kind. Every runner writes its artifacts under the config's
//! output directory and reports whether the requested checks passed.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use perturb_core::analytics::{equivalence_corpus, verify_gumbel_hedge_equivalence, EquivalenceReport};
use perturb_core::records::write_records_file;
use perturb_core::spath::run_online_path_game;
use perturb_core::{check_run_against_bounds, run_game, BoundParams, EdgeGraph, RegretReport, RngStream};

use crate::compare::{compare_forecasters, write_comparison, CompareSpec, ComparisonTable};
use crate::config::{ExperimentConfig, ExperimentKind, DEFAULT_VERIFY_SAMPLES};
use crate::output::{write_path_rounds, write_trajectories, Summary};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub summary: PathBuf,
    /// One-line human summary.
    pub message: String,
}

/// Runs whatever `cfg.kind` names. An expert game with `variants` and no `forecaster` runs
/// as a comparison.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output directory {}", cfg.output_dir.display()))?;
    match cfg.kind {
        ExperimentKind::ExpertGame if cfg.forecaster.is_none() => run_compare(cfg),
        ExperimentKind::ExpertGame => run_expert_game(cfg),
        ExperimentKind::ShortestPath => run_path(cfg),
        ExperimentKind::EquivalenceVerify => run_verify(cfg),
        ExperimentKind::BoundSweep => run_sweep(cfg),
    }
}

#[derive(Serialize)]
struct SeedReport<'a> {
    seed: u64,
    #[serde(flatten)]
    report: &'a RegretReport,
}

#[derive(Serialize)]
struct GameResults<'a> {
    forecaster: String,
    mean_regret: f64,
    runs: Vec<SeedReport<'a>>,
}

pub fn run_expert_game(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rounds = cfg.rounds()?;
    let fc = cfg.forecaster()?;
    let forecaster = fc.build(cfg.samples)?;
    let adversary = cfg.adversary()?.build()?;
    let algo = fc.descriptor();
    let reports = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<RegretReport> {
            let records = run_game(forecaster.as_ref(), &adversary, rounds, RngStream::new(seed))
                .with_context(|| format!("seed {seed}"))?;
            write_records_file(cfg.output_dir.join(format!("rounds_seed{seed}.csv")), &records)?;
            Ok(check_run_against_bounds(
                &records,
                &algo,
                &BoundParams::simplex(&records),
                &cfg.bounds,
            )?)
        })
        .collect::<Result<Vec<_>>>()?;
    let trajectories: Vec<Vec<f64>> = reports.iter().map(|r| r.regret_trajectory.clone()).collect();
    write_trajectories(&cfg.output_dir.join("trajectory.csv"), &cfg.seeds, &trajectories)?;

    let passed = reports.iter().all(RegretReport::all_satisfied);
    let mean_regret = reports.iter().map(|r| r.regret).sum::<f64>() / reports.len() as f64;
    let results = GameResults {
        forecaster: fc.label(),
        mean_regret,
        runs: cfg
            .seeds
            .iter()
            .zip(&reports)
            .map(|(&seed, report)| SeedReport { seed, report })
            .collect(),
    };
    let summary = Summary::new(cfg, passed, results).write(&cfg.output_dir)?;
    Ok(Outcome {
        passed,
        summary,
        message: format!(
            "{} over {} seeds: mean regret {mean_regret}, requested bounds {}",
            fc.label(),
            cfg.seeds.len(),
            if passed { "hold" } else { "VIOLATED" }
        ),
    })
}

fn compare_outcome(cfg: &ExperimentConfig, table: ComparisonTable) -> Result<Outcome> {
    write_comparison(&cfg.output_dir.join("compare.csv"), &table)?;
    let passed = table.passed;
    let means: Vec<String> = table
        .rows
        .iter()
        .filter(|r| r.seed.is_none())
        .map(|r| format!("{} regret {}", r.label, r.regret))
        .collect();
    let summary = Summary::new(cfg, passed, &table).write(&cfg.output_dir)?;
    Ok(Outcome {
        passed,
        summary,
        message: format!("mean over seeds: {}", means.join("; ")),
    })
}

pub fn run_compare(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.kind != ExperimentKind::ExpertGame {
        bail!("compare needs an expert-game config, got {}", cfg.kind.name());
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let table = compare_forecasters(
        &CompareSpec {
            variants: &cfg.variants,
            adversary: cfg.adversary()?,
            rounds: cfg.rounds()?,
            seeds: &cfg.seeds,
            bounds: &cfg.bounds,
            samples: cfg.samples,
        },
        Some(&cfg.output_dir),
    )?;
    compare_outcome(cfg, table)
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let variants = cfg.sweep_variants()?;
    let table = compare_forecasters(
        &CompareSpec {
            variants: &variants,
            adversary: cfg.adversary()?,
            rounds: cfg.rounds()?,
            seeds: &cfg.seeds,
            bounds: &cfg.bounds,
            samples: cfg.samples,
        },
        None,
    )?;
    compare_outcome(cfg, table)
}

#[derive(Serialize)]
struct PathSeedResult {
    seed: u64,
    total_paid: f64,
    best_path: Vec<usize>,
    best_path_cost: f64,
    best_path_oracle: String,
    regret: f64,
}

#[derive(Serialize)]
struct PathResults {
    perturbation: String,
    mean_regret: f64,
    runs: Vec<PathSeedResult>,
}

pub fn run_path(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.kind != ExperimentKind::ShortestPath {
        bail!("path needs a shortest-path config, got {}", cfg.kind.name());
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let rounds = cfg.rounds()?;
    let graph_cfg = cfg.graph.as_ref().context("missing key `graph`")?;
    let g = EdgeGraph::from_file(&graph_cfg.path)
        .with_context(|| format!("loading graph {}", graph_cfg.path.display()))?;
    let times = cfg
        .edge_times
        .as_ref()
        .context("missing key `edge_times`")?
        .build()?;
    let fc = cfg.forecaster()?;
    let spec = fc.path_perturbation()?;
    let reports = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let report = run_online_path_game(&g, &spec, &times, rounds, RngStream::new(seed))
                .with_context(|| format!("seed {seed}"))?;
            write_path_rounds(
                &cfg.output_dir.join(format!("path_rounds_seed{seed}.csv")),
                &report.rounds,
            )?;
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    let trajectories: Vec<Vec<f64>> = reports.iter().map(|r| r.regret_trajectory.clone()).collect();
    write_trajectories(&cfg.output_dir.join("trajectory.csv"), &cfg.seeds, &trajectories)?;
    let mean_regret = reports.iter().map(|r| r.regret).sum::<f64>() / reports.len() as f64;
    let results = PathResults {
        perturbation: fc.label(),
        mean_regret,
        runs: cfg
            .seeds
            .iter()
            .zip(reports)
            .map(|(&seed, r)| PathSeedResult {
                seed,
                total_paid: r.total_paid,
                best_path: r.best_path,
                best_path_cost: r.best_path_cost,
                best_path_oracle: r.best_path_oracle,
                regret: r.regret,
            })
            .collect(),
    };
    let summary = Summary::new(cfg, true, results).write(&cfg.output_dir)?;
    Ok(Outcome {
        passed: true,
        summary,
        message: format!(
            "{} over {} seeds: mean regret {mean_regret}",
            fc.label(),
            cfg.seeds.len()
        ),
    })
}

#[derive(Serialize)]
struct VerifyResults {
    corpus_size: usize,
    corpus_seed: u64,
    samples: u64,
    tolerance: f64,
    exact_tolerance: f64,
    max_sampled_deviation: f64,
    max_exact_deviation: f64,
    reports: Vec<(u64, EquivalenceReport)>,
}

pub fn run_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.kind != ExperimentKind::EquivalenceVerify {
        bail!(
            "verify needs an equivalence-verify config, got {}",
            cfg.kind.name()
        );
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let v = cfg.verify_settings();
    let samples = cfg.samples.unwrap_or(DEFAULT_VERIFY_SAMPLES);
    let corpus = equivalence_corpus(v.corpus_size, v.corpus_seed);
    let mut reports = Vec::new();
    for &seed in &cfg.seeds {
        for (k, &beta) in v.betas.iter().enumerate() {
            let rng = RngStream::with_stream(seed, k as u64);
            reports.push((
                seed,
                verify_gumbel_hedge_equivalence(&corpus, beta, samples, v.tolerance, rng)?,
            ));
        }
    }

    let mut w = csv::Writer::from_path(cfg.output_dir.join("equivalence.csv"))?;
    w.write_record([
        "seed",
        "beta",
        "history",
        "n",
        "sampled_deviation",
        "exact_deviation",
        "passed",
    ])?;
    for (seed, r) in &reports {
        for c in &r.cases {
            w.write_record([
                seed.to_string(),
                r.beta.to_string(),
                c.index.to_string(),
                c.n.to_string(),
                c.sampled_deviation.to_string(),
                c.exact_deviation.to_string(),
                c.passed.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let max_sampled = reports
        .iter()
        .map(|(_, r)| r.max_sampled_deviation)
        .fold(0.0, f64::max);
    let max_exact = reports
        .iter()
        .map(|(_, r)| r.max_exact_deviation)
        .fold(0.0, f64::max);
    let passed =
        max_sampled <= v.tolerance && max_exact <= v.exact_tolerance && reports.iter().all(|(_, r)| r.passed);
    let results = VerifyResults {
        corpus_size: v.corpus_size,
        corpus_seed: v.corpus_seed,
        samples,
        tolerance: v.tolerance,
        exact_tolerance: v.exact_tolerance,
        max_sampled_deviation: max_sampled,
        max_exact_deviation: max_exact,
        reports,
    };
    let summary = Summary::new(cfg, passed, results).write(&cfg.output_dir)?;
    Ok(Outcome {
        passed,
        summary,
        message: format!(
            "max sampled deviation {max_sampled} (tol {}), max closed-form deviation {max_exact:e} (tol {:e})",
            v.tolerance, v.exact_tolerance
        ),
    })
}
