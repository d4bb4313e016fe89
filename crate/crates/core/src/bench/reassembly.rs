//! End-to-end reassembly: a random structure is photographed, described
//! from the resulting scene graph, then rebuilt in simulation from that
//! description, command by command.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::cot::reason_over_plan;
use crate::lego::{random_structure, BrickRecord, GridExtent, LegoStructure, PlacedBrick};
use crate::perception::{perceive, render_structure, SyntheticBackend};
use crate::scene::{Provenance, SceneGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReassemblyParams {
    /// Upper bound on the target's brick count; at least 1.
    pub max_bricks: usize,
    /// Drop one brick's detection before the scene graph is built.
    pub dropout: bool,
}

impl Default for ReassemblyParams {
    fn default() -> Self {
        Self {
            max_bricks: 12,
            dropout: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Render,
    Perception,
    Description,
    Planning,
    Judgment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub seed: u64,
    pub target: Vec<BrickRecord>,
    pub perceived: Vec<BrickRecord>,
    /// Target bricks the description lacks.
    pub missing: Vec<BrickRecord>,
    /// Described bricks absent from the target.
    pub extra: Vec<BrickRecord>,
    pub description_correct: bool,
    pub commands: usize,
    pub assembly_success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<StageFailure>,
}

/// Multiset difference `a - b`.
fn minus(a: &[PlacedBrick], b: &[PlacedBrick]) -> Vec<BrickRecord> {
    let mut rest = b.to_vec();
    a.iter()
        .filter(|x| match rest.iter().position(|y| y == *x) {
            Some(i) => {
                rest.swap_remove(i);
                false
            }
            None => true,
        })
        .map(BrickRecord::from)
        .collect()
}

fn records(s: &LegoStructure) -> Vec<BrickRecord> {
    s.bricks().iter().map(BrickRecord::from).collect()
}

/// Runs one seeded scenario. Never fails outright: a stage that cannot
/// proceed is recorded in `failure` and later stages are skipped.
pub fn run_reassembly(seed: u64, params: ReassemblyParams, cfg: &EngineConfig) -> ScenarioReport {
    let dynamics = cfg.dynamics();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=params.max_bricks.max(1));
    let target = random_structure(&mut rng, n, GridExtent::default());
    let mut report = ScenarioReport {
        seed,
        target: records(&target),
        perceived: Vec::new(),
        missing: Vec::new(),
        extra: Vec::new(),
        description_correct: false,
        commands: 0,
        assembly_success: false,
        failure: None,
    };
    let fail = |mut r: ScenarioReport, stage, message: String| {
        r.failure = Some(StageFailure { stage, message });
        r
    };

    let mut frame = match render_structure(&target, &dynamics, &format!("reassembly:{seed}")) {
        Ok(f) => f,
        Err(e) => return fail(report, Stage::Render, e.to_string()),
    };
    if params.dropout && !frame.detections.is_empty() {
        let i = rng.gen_range(0..frame.detections.len());
        frame.detections.remove(i);
        frame.depths.remove(i);
    }
    let graph = match perceive(None, &frame, &SyntheticBackend, None, &dynamics) {
        Ok(g) => g,
        Err(e) => return fail(report, Stage::Perception, e.to_string()),
    };
    let perceived = match LegoStructure::bricks_in_graph(&graph, &dynamics.layout) {
        Ok(s) => s,
        Err(e) => return fail(report, Stage::Description, e.to_string()),
    };
    report.perceived = records(&perceived);
    report.missing = minus(target.bricks(), perceived.bricks());
    report.extra = minus(perceived.bricks(), target.bricks());
    report.description_correct = report.missing.is_empty() && report.extra.is_empty();
    if let Err(e) = perceived.describe() {
        return fail(report, Stage::Description, e.to_string());
    }

    let client = match cfg.client() {
        Ok(c) => c,
        Err(e) => return fail(report, Stage::Planning, e.to_string()),
    };
    let empty = SceneGraph::empty(Provenance::Synthetic);
    let planned = match reason_over_plan(
        &perceived,
        &empty,
        client.as_ref(),
        &dynamics,
        cfg.client.policy,
    ) {
        Ok(p) => p,
        Err(e) => return fail(report, Stage::Planning, e.to_string()),
    };
    report.commands = planned.plan.commands.len();
    match LegoStructure::from_graph(&planned.final_graph, &dynamics.layout) {
        Ok(built) => report.assembly_success = built.equals(&target),
        Err(e) => return fail(report, Stage::Judgment, e.to_string()),
    }
    report
}
