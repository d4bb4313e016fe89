//! Benchmark harness: generated question sets, scoring, reports, and the
//! reassembly scenario.
//!
//! Gold answers come from [`oracle`], which re-derives every predicate from
//! raw detection records and never calls the query engine. The engine under
//! test answers through perception and step-validated reasoning, exactly as
//! a live question would be answered.

mod dataset;
pub mod oracle;
mod reassembly;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::EngineConfig;
use crate::cot::{reason, CotError, Grounding, LmClient};
use crate::files::{self, FileError, REPORT_SCHEMA};
use crate::geometry::Thresholds;
use crate::perception::{perceive, PerceptionBackend, PerceptionError};
use crate::query::{AnswerValue, Category, WorkspaceEnvelope};

pub use dataset::{
    generate_dataset, oracle_gold, recheck_gold, CategoryMix, GeneratorConfig, QaDataset, QaItem,
    ResolvedScene, SceneRef,
};
pub use reassembly::{run_reassembly, ReassemblyParams, ScenarioReport, Stage, StageFailure};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Client(#[from] CotError),
    #[error(transparent)]
    Backend(#[from] PerceptionError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineInfo {
    pub name: String,
    pub version: String,
    pub client: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub seed: u64,
    pub items: usize,
    /// SHA-256 of the dataset document.
    pub digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub items: usize,
    pub correct: usize,
    /// `correct / items`, or 0 for no items.
    pub accuracy: f64,
}

impl Score {
    fn new(items: usize, correct: usize) -> Self {
        let accuracy = if items == 0 {
            0.0
        } else {
            correct as f64 / items as f64
        };
        Self {
            items,
            correct,
            accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub id: String,
    pub category: Category,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub engine: EngineInfo,
    pub dataset: DatasetInfo,
    pub thresholds: Thresholds,
    pub workspace: WorkspaceEnvelope,
    pub distance_tolerance_m: f64,
    /// Only categories that occur in the dataset.
    pub per_category: BTreeMap<Category, Score>,
    pub overall: Score,
    pub abstentions: usize,
    /// Incorrect items in dataset order.
    pub failures: Vec<ItemFailure>,
    pub wall_clock_s: f64,
}

impl Report {
    pub fn to_json(&self) -> String {
        files::encode(self, REPORT_SCHEMA)
    }

    pub fn from_json(text: &str) -> Result<Self, FileError> {
        files::decode(text, REPORT_SCHEMA)
    }

    /// Short plain-text table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} ({} client)",
            self.engine.name, self.engine.version, self.engine.client
        );
        for (c, s) in &self.per_category {
            let _ = writeln!(
                out,
                "  {:<17} {:>5}/{:<5} {:.3}",
                c.as_str(),
                s.correct,
                s.items,
                s.accuracy
            );
        }
        let o = &self.overall;
        let _ = writeln!(
            out,
            "  {:<17} {:>5}/{:<5} {:.3}",
            "overall", o.correct, o.items, o.accuracy
        );
        let _ = writeln!(
            out,
            "  abstentions {}, wall clock {:.2} s",
            self.abstentions, self.wall_clock_s
        );
        out
    }
}

/// The report text with the wall-clock field removed; equal for two runs
/// over the same dataset and configuration.
pub fn strip_wall_clock(report_json: &str) -> Result<String, FileError> {
    let mut v: serde_json::Value =
        serde_json::from_str(report_json).map_err(|e| FileError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("wall_clock_s");
    }
    Ok(serde_json::to_string_pretty(&v).expect("values always serialize"))
}

/// Exact match for booleans, `tolerance` meters for scalars, set equality
/// for relation lists.
pub fn score_answer(pred: &AnswerValue, gold: &AnswerValue, tolerance: f64) -> bool {
    match (pred, gold) {
        (AnswerValue::Bool { value: p }, AnswerValue::Bool { value: g }) => p == g,
        (
            AnswerValue::Scalar { value: p, unit: pu },
            AnswerValue::Scalar { value: g, unit: gu },
        ) => pu == gu && (p - g).abs() <= tolerance,
        (AnswerValue::Relations { value: p }, AnswerValue::Relations { value: g }) => {
            let mut p = p.clone();
            let mut g = g.clone();
            p.sort();
            p.dedup();
            g.sort();
            g.dedup();
            p == g
        }
        _ => false,
    }
}

enum ItemResult {
    Correct,
    Wrong(String),
    Abstained(String),
    Error(String),
}

fn run_item(
    item: &QaItem,
    cfg: &EngineConfig,
    client: &dyn LmClient,
    backend: &dyn PerceptionBackend,
) -> ItemResult {
    let dynamics = cfg.dynamics();
    let scene = match item.scene.resolve(&dynamics) {
        Ok(s) => s,
        Err(e) => return ItemResult::Error(format!("scene: {e}")),
    };
    let graph = match perceive(None, &scene.frame, backend, None, &dynamics) {
        Ok(g) => g,
        Err(e) => return ItemResult::Error(format!("perception: {e}")),
    };
    let mut grounding = Grounding::new(graph)
        .with_workspace(cfg.workspace)
        .with_layout(cfg.layout);
    if let Some(t) = &item.query.params.target {
        grounding = grounding.with_target(t.clone());
    }
    let trace = match reason(&item.question, &grounding, client, cfg.client.policy) {
        Ok(t) => t,
        Err(e) => return ItemResult::Error(format!("reasoning: {e}")),
    };
    match trace.answer() {
        Some(a) if score_answer(a, &item.gold, cfg.distance_tolerance_m) => ItemResult::Correct,
        Some(a) => ItemResult::Wrong(format!("answered {a}, expected {}", item.gold)),
        None => match trace.outcome {
            crate::cot::Outcome::Abstained { diagnostic } => ItemResult::Abstained(diagnostic),
            crate::cot::Outcome::Answered { .. } => {
                unreachable!("answer() is Some for answered traces")
            }
        },
    }
}

/// Answers every item with the configured client and backend. Items that
/// fail anywhere in the pipeline are scored incorrect and logged; the run
/// itself only fails when the client or backend cannot be constructed.
pub fn run_bench(ds: &QaDataset, cfg: &EngineConfig) -> Result<Report, BenchError> {
    let client = cfg.client()?;
    let backend = cfg.backend()?;
    run_bench_with(ds, cfg, client.as_ref(), backend.as_ref())
}

pub fn run_bench_with(
    ds: &QaDataset,
    cfg: &EngineConfig,
    client: &dyn LmClient,
    backend: &dyn PerceptionBackend,
) -> Result<Report, BenchError> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    log::info!(
        "bench: {} items on {} threads, client {}",
        ds.items.len(),
        pool.current_num_threads(),
        client.name()
    );
    let results: Vec<ItemResult> = pool.install(|| {
        ds.items
            .par_iter()
            .map(|it| run_item(it, cfg, client, backend))
            .collect()
    });

    let mut tally: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut abstentions = 0;
    for (item, result) in ds.items.iter().zip(results) {
        let entry = tally.entry(item.category()).or_default();
        entry.0 += 1;
        let reason = match result {
            ItemResult::Correct => {
                entry.1 += 1;
                continue;
            }
            ItemResult::Wrong(r) => r,
            ItemResult::Abstained(r) => {
                abstentions += 1;
                format!("abstained: {r}")
            }
            ItemResult::Error(r) => {
                log::warn!("item {}: {r}", item.id);
                r
            }
        };
        failures.push(ItemFailure {
            id: item.id.clone(),
            category: item.category(),
            reason,
        });
    }
    let per_category: BTreeMap<Category, Score> = tally
        .into_iter()
        .map(|(c, (n, k))| (c, Score::new(n, k)))
        .collect();
    let (n, k) = per_category
        .values()
        .fold((0, 0), |(n, k), s| (n + s.items, k + s.correct));
    log::info!(
        "bench: {k}/{n} correct, {abstentions} abstentions, {:.2} s",
        start.elapsed().as_secs_f64()
    );
    Ok(Report {
        engine: EngineInfo {
            name: "espatial".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            client: client.name().into(),
        },
        dataset: DatasetInfo {
            seed: ds.generator.seed,
            items: ds.items.len(),
            digest: hex::encode(Sha256::digest(ds.to_json().as_bytes())),
        },
        thresholds: cfg.thresholds,
        workspace: cfg.workspace,
        distance_tolerance_m: cfg.distance_tolerance_m,
        per_category,
        overall: Score::new(n, k),
        abstentions,
        failures,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}
