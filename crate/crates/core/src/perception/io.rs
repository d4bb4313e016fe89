use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::files::{self, GRAPH_SCHEMA, SCENE_SCHEMA};
use crate::geometry::BBox;
use crate::scene::SceneGraph;

use super::{DetectionRecord, PerceptionError, PerceptionFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SceneDetection {
    label: String,
    bbox: BBox,
    rgb: [u8; 3],
    score: f64,
    depth_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SceneFile {
    #[serde(default)]
    image_ref: String,
    #[serde(default)]
    t: u64,
    detections: Vec<SceneDetection>,
}

impl From<&PerceptionFrame> for SceneFile {
    fn from(f: &PerceptionFrame) -> Self {
        Self {
            image_ref: f.image_ref.clone(),
            t: f.t,
            detections: f
                .detections
                .iter()
                .zip(&f.depths)
                .map(|(d, z)| SceneDetection {
                    label: d.label.clone(),
                    bbox: d.bbox,
                    rgb: d.rgb,
                    score: d.score,
                    depth_m: *z,
                })
                .collect(),
        }
    }
}

impl From<SceneFile> for PerceptionFrame {
    fn from(f: SceneFile) -> Self {
        let (detections, depths) = f
            .detections
            .into_iter()
            .map(|d| {
                (
                    DetectionRecord {
                        label: d.label,
                        bbox: d.bbox,
                        rgb: d.rgb,
                        score: d.score,
                    },
                    d.depth_m,
                )
            })
            .unzip();
        Self {
            image_ref: f.image_ref,
            t: f.t,
            detections,
            depths,
        }
    }
}

pub fn scene_to_string(frame: &PerceptionFrame) -> String {
    files::encode(&SceneFile::from(frame), SCENE_SCHEMA)
}

pub fn scene_from_str(text: &str) -> Result<PerceptionFrame, PerceptionError> {
    let frame = PerceptionFrame::from(files::decode::<SceneFile>(text, SCENE_SCHEMA)?);
    frame.validate()?;
    Ok(frame)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<PerceptionFrame, PerceptionError> {
    scene_from_str(&files::read(path)?)
}

pub fn save_scene(path: impl AsRef<Path>, frame: &PerceptionFrame) -> Result<(), PerceptionError> {
    Ok(files::write(path, &scene_to_string(frame))?)
}

pub fn graph_to_string(g: &SceneGraph) -> String {
    files::encode(g, GRAPH_SCHEMA)
}

/// Parses a graph file and checks ids, edge endpoints, and ordering.
pub fn graph_from_str(text: &str) -> Result<SceneGraph, PerceptionError> {
    let mut g: SceneGraph = files::decode(text, GRAPH_SCHEMA)?;
    g.nodes.sort_by(|a, b| a.id.cmp(&b.id));
    g.edges.sort_by_key(|e| e.key());
    g.check_structure()?;
    Ok(g)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<SceneGraph, PerceptionError> {
    graph_from_str(&files::read(path)?)
}

pub fn save_graph(path: impl AsRef<Path>, g: &SceneGraph) -> Result<(), PerceptionError> {
    Ok(files::write(path, &graph_to_string(g))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::files::FileError;
    use crate::perception::{synth_scene, SynthParams};
    use crate::scene::Dynamics;

    #[test]
    fn scene_round_trip() {
        let s = synth_scene(
            7,
            SynthParams {
                n_objects: 6,
                brick_mode: false,
            },
            &Dynamics::default(),
        );
        let text = scene_to_string(&s.frame);
        assert_eq!(scene_from_str(&text).unwrap(), s.frame);
    }

    #[test]
    fn graph_round_trip() {
        let s = synth_scene(
            11,
            SynthParams {
                n_objects: 8,
                brick_mode: true,
            },
            &Dynamics::default(),
        );
        let text = graph_to_string(&s.graph);
        assert_eq!(graph_from_str(&text).unwrap(), s.graph);
    }

    #[test]
    fn truncated_and_wrong_version() {
        let s = synth_scene(
            3,
            SynthParams {
                n_objects: 3,
                brick_mode: false,
            },
            &Dynamics::default(),
        );
        let text = graph_to_string(&s.graph);
        match graph_from_str(&text[..text.len() - 20]) {
            Err(PerceptionError::File(e)) => assert!(e.is_parse_error()),
            other => panic!("{other:?}"),
        }
        let v2 = text.replace(GRAPH_SCHEMA, "espatial-graph/2");
        assert!(matches!(
            graph_from_str(&v2),
            Err(PerceptionError::File(
                FileError::SchemaVersionMismatch { .. }
            ))
        ));
    }

    #[test]
    fn field_errors_name_the_field() {
        let text = r#"{"schema": "espatial-scene/1", "detections": [{"label": "cup", "bbox": [0.1, 0.1, 0.2], "rgb": [1, 2, 3], "score": 0.5, "depth_m": 1.0}]}"#;
        match scene_from_str(text) {
            Err(PerceptionError::File(FileError::Field { field, .. })) => {
                assert_eq!(field, "detections[0].bbox")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_edges_rejected() {
        let s = synth_scene(
            5,
            SynthParams {
                n_objects: 4,
                brick_mode: false,
            },
            &Dynamics::default(),
        );
        let mut g = s.graph.clone();
        let removed = g.nodes.remove(0).id;
        assert!(g.edges.iter().any(|e| e.subject == removed));
        assert!(matches!(
            graph_from_str(&graph_to_string(&g)),
            Err(PerceptionError::Scene(_))
        ));
    }
}
