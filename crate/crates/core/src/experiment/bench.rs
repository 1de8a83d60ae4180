use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distill::{run_pipeline, DistillError, PipelineConfig, PipelineKind, PipelineReport};

use super::{DataError, RunConfig};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("seed {seed}: corpus generation failed")]
    Corpus { seed: u64, source: DataError },
    #[error("seed {seed}: pipeline {pipeline} failed")]
    Pipeline {
        seed: u64,
        pipeline: PipelineKind,
        source: DistillError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub pipeline: PipelineKind,
    /// Test F1 per seed, in config seed order.
    pub f1_by_seed: Vec<f64>,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_hash: String,
    pub config: RunConfig,
    pub rows: Vec<BenchRow>,
    /// Every pipeline run, seed-major.
    pub runs: Vec<PipelineReport>,
}

/// Median with the two middle values averaged for even counts.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// A worker pool sized by `PAKD_THREADS` when set, else by rayon's default.
pub fn thread_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("PAKD_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().expect("thread pool")
}

/// Runs every configured pipeline on every configured seed. Seeds run
/// concurrently; each seed owns its corpora.
pub fn run_bench(config: &RunConfig) -> Result<BenchReport, BenchError> {
    let per_seed = thread_pool().install(|| {
        config
            .bench
            .seeds
            .par_iter()
            .map(|&seed| -> Result<Vec<PipelineReport>, BenchError> {
                let corpora = config.corpora(seed).map_err(|source| BenchError::Corpus { seed, source })?;
                config
                    .bench
                    .pipelines
                    .iter()
                    .map(|&kind| {
                        let pc = PipelineConfig {
                            kind,
                            seed,
                            ..config.pipeline.clone()
                        };
                        run_pipeline(corpora.data(), &pc)
                            .map(|(_, report)| report)
                            .map_err(|source| BenchError::Pipeline { seed, pipeline: kind, source })
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let runs: Vec<PipelineReport> = per_seed.into_iter().flatten().collect();
    let rows = config
        .bench
        .pipelines
        .iter()
        .map(|&kind| {
            let f1: Vec<f64> = runs
                .iter()
                .filter(|r| r.pipeline == kind)
                .map(|r| r.test_f1.unwrap_or(f64::NAN))
                .collect();
            BenchRow {
                pipeline: kind,
                median: median(&f1),
                min: f1.iter().copied().fold(f64::INFINITY, f64::min),
                max: f1.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                f1_by_seed: f1,
            }
        })
        .collect();
    Ok(BenchReport {
        config_hash: config.hash(),
        config: config.clone(),
        rows,
        runs,
    })
}

impl BenchReport {
    pub fn row(&self, kind: PipelineKind) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.pipeline == kind)
    }

    pub fn runs_of(&self, kind: PipelineKind) -> impl Iterator<Item = &PipelineReport> {
        self.runs.iter().filter(move |r| r.pipeline == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Test F1 in percent, one row per pipeline.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# config_hash={}\npipeline,median,min,max", self.config_hash);
        for s in &self.config.bench.seeds {
            let _ = write!(out, ",seed_{s}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{:.2},{:.2},{:.2}", r.pipeline, r.median * 100.0, r.min * 100.0, r.max * 100.0);
            for v in &r.f1_by_seed {
                let _ = write!(out, ",{:.2}", v * 100.0);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| method | test F1 (median) | spread |\n|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {:.2} | {:.2} to {:.2} |",
                r.pipeline,
                r.median * 100.0,
                r.min * 100.0,
                r.max * 100.0
            );
        }
        out
    }
}
