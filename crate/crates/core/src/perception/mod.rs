//! From perception records to scene graphs: entity extraction, detection,
//! depth, deterministic graph construction, synthetic ground-truth scenes,
//! and scene/graph files.
//!
//! Graph construction assigns node ids in a fixed order (label, then box
//! origin) and, when a previous graph is supplied, carries ids over to
//! detections with the same label whose box center lies within
//! [`MATCH_RADIUS`] of a previous node's.

mod backend;
mod entities;
mod io;
mod synth;

use serde::{Deserialize, Serialize};

use crate::color::Color;
use crate::files::FileError;
use crate::geometry::BBox;
use crate::remote::RemoteError;
use crate::scene::{
    fresh_id, Dynamics, NodeId, ObjectNode, Pose, Provenance, SceneError, SceneGraph, SizeClass,
};

pub use backend::{FileBackend, PerceptionBackend, RemoteBackend, SyntheticBackend};
pub use entities::{extract_entities_fallback, Entity, EntityQueue};
pub use io::{
    graph_from_str, graph_to_string, load_graph, load_scene, save_graph, save_scene,
    scene_from_str, scene_to_string,
};
pub use synth::{render_structure, synth_scene, SynthParams, SynthScene};

/// Maximum image-plane distance between box centers for a detection to
/// inherit a previous node's id.
pub const MATCH_RADIUS: f64 = 0.15;

#[derive(Debug, thiserror::Error)]
pub enum PerceptionError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("perception backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("{detections} detections but {depths} depth samples")]
    MisalignedInputs { detections: usize, depths: usize },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    File(#[from] FileError),
}

impl PartialEq for PerceptionError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

impl From<RemoteError> for PerceptionError {
    fn from(e: RemoteError) -> Self {
        PerceptionError::BackendUnavailable(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub label: String,
    pub bbox: BBox,
    /// Mean color of the region.
    pub rgb: [u8; 3],
    pub score: f64,
}

/// One observation: detections with aligned per-detection depth samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionFrame {
    pub image_ref: String,
    pub t: u64,
    pub detections: Vec<DetectionRecord>,
    pub depths: Vec<f64>,
}

impl PerceptionFrame {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.detections.len() != self.depths.len() {
            return Err(PerceptionError::MisalignedInputs {
                detections: self.detections.len(),
                depths: self.depths.len(),
            });
        }
        for (i, (d, z)) in self.detections.iter().zip(&self.depths).enumerate() {
            if !(0.0..=1.0).contains(&d.score) {
                return Err(PerceptionError::InvalidFrame(format!(
                    "detection {i}: score {} outside [0, 1]",
                    d.score
                )));
            }
            if !(z.is_finite() && *z > 0.0) {
                return Err(PerceptionError::InvalidFrame(format!(
                    "detection {i}: depth {z} is not positive"
                )));
            }
        }
        Ok(())
    }
}

/// Entity extraction, detection, and depth, in that order.
pub fn perceive(
    question: Option<&str>,
    frame: &PerceptionFrame,
    backend: &dyn PerceptionBackend,
    prev: Option<&SceneGraph>,
    dynamics: &Dynamics,
) -> Result<SceneGraph, PerceptionError> {
    frame.validate()?;
    let entities = match question {
        Some(q) => backend.extract_entities(q)?,
        None => EntityQueue::default(),
    };
    let detections = backend.detect(&entities, frame)?;
    let depths = backend.estimate_depth(frame)?;
    if depths.len() != frame.detections.len() {
        return Err(PerceptionError::MisalignedInputs {
            detections: frame.detections.len(),
            depths: depths.len(),
        });
    }
    // Pair each kept detection with the depth of the frame record it came from.
    let mut used = vec![false; frame.detections.len()];
    let mut aligned = Vec::with_capacity(detections.len());
    for d in &detections {
        let i = (0..frame.detections.len())
            .find(|&i| !used[i] && frame.detections[i] == *d)
            .ok_or(PerceptionError::MisalignedInputs {
                detections: detections.len(),
                depths: depths.len(),
            })?;
        used[i] = true;
        aligned.push(depths[i]);
    }
    build_graph(&detections, &aligned, prev, dynamics)
}

fn detection_order(a: &(DetectionRecord, f64), b: &(DetectionRecord, f64)) -> std::cmp::Ordering {
    let key = |(d, z): &(DetectionRecord, f64)| {
        let bb = d.bbox;
        (
            d.label.clone(),
            [bb.x_min(), bb.y_min(), bb.x_max(), bb.y_max(), *z],
            d.rgb,
        )
    };
    let (la, fa, ca) = key(a);
    let (lb, fb, cb) = key(b);
    la.cmp(&lb)
        .then_with(|| {
            fa.iter()
                .zip(&fb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .then_with(|| ca.cmp(&cb))
        .then_with(|| a.0.score.total_cmp(&b.0.score))
}

fn size_class_for(d: &DetectionRecord) -> SizeClass {
    let info = entities::LabelInfo::parse(&d.label);
    match (info.noun.as_deref(), info.footprint) {
        (Some("block"), Some(fp)) => SizeClass::Footprint(fp),
        _ => SizeClass::from_area(d.bbox.area()),
    }
}

/// Construct the graph for one observation.
pub fn build_graph(
    detections: &[DetectionRecord],
    depths: &[f64],
    prev: Option<&SceneGraph>,
    dynamics: &Dynamics,
) -> Result<SceneGraph, PerceptionError> {
    if detections.len() != depths.len() {
        return Err(PerceptionError::MisalignedInputs {
            detections: detections.len(),
            depths: depths.len(),
        });
    }
    let mut items: Vec<(DetectionRecord, f64)> = detections
        .iter()
        .cloned()
        .zip(depths.iter().copied())
        .collect();
    items.sort_by(detection_order);

    let mut assigned: Vec<NodeId> = Vec::with_capacity(items.len());
    let mut claimed: Vec<bool> = vec![false; prev.map_or(0, |p| p.nodes.len())];
    let mut nodes = Vec::with_capacity(items.len());
    for (det, depth) in items {
        let center = det.bbox.center();
        let matched = prev.and_then(|p| {
            p.nodes
                .iter()
                .enumerate()
                .filter(|(i, n)| !claimed[*i] && n.label == det.label)
                .map(|(i, n)| {
                    let (px, py) = n.bbox.center();
                    (i, (px - center.0).hypot(py - center.1))
                })
                .filter(|(_, d)| *d < MATCH_RADIUS)
                .min_by(|a, b| a.1.total_cmp(&b.1))
        });
        let id = match matched {
            Some((i, _)) => {
                claimed[i] = true;
                prev.expect("matched implies prev").nodes[i].id.clone()
            }
            None => fresh_id(&det.label, |id| {
                assigned.contains(id) || prev.is_some_and(|p| p.contains(id))
            }),
        };
        assigned.push(id.clone());
        let mut node = ObjectNode::new(
            id,
            det.label.clone(),
            Color::classify(det.rgb),
            Pose {
                bbox: det.bbox,
                depth_m: depth,
            },
            size_class_for(&det),
            &dynamics.camera,
        )?;
        node.confidence = det.score;
        nodes.push(node);
    }
    nodes.sort_by(|a, b| a.id.cmp(&b.id));
    let edges = dynamics.update_relations(&nodes, prev.map_or(&[][..], |p| &p.edges));
    Ok(SceneGraph {
        t: prev.map_or(0, |p| p.t + 1),
        provenance: Provenance::Perception,
        nodes,
        edges,
    })
}
