//! Scene graphs: object nodes, relation edges, and the transitions that
//! evolve a graph under agent actions and external disturbances.

mod diff;
mod dynamics;
mod history;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::color::Color;
use crate::geometry::{self, BBox, CameraModel, GeometryError, Point3, RelationKind, Thresholds};
use crate::lego::Footprint;

pub use diff::{apply_changeset, diff, Changeset};
pub use dynamics::{Action, DisturbanceEvent, Dynamics, Event};
pub use history::{GraphHistory, HistoryEntry};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("unknown node id `{0}`")]
    UnknownNodeId(NodeId),
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(NodeId),
    #[error("invalid pose: {0}")]
    InvalidPose(#[from] GeometryError),
    #[error("edge {0} references a missing node")]
    DanglingEdge(String),
    #[error("edge ({0}) appears more than once")]
    DuplicateEdge(String),
    #[error("edge {0} relates a node to itself")]
    SelfEdge(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId::new(s)
    }
}

/// Coarse object size, or an exact stud footprint for bricks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SizeClass {
    Tiny,
    Small,
    Medium,
    Large,
    Footprint(Footprint),
}

impl SizeClass {
    /// Bucket a normalized box area.
    pub fn from_area(area: f64) -> Self {
        if area < 0.01 {
            SizeClass::Tiny
        } else if area < 0.05 {
            SizeClass::Small
        } else if area < 0.2 {
            SizeClass::Medium
        } else {
            SizeClass::Large
        }
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeClass::Tiny => f.write_str("tiny"),
            SizeClass::Small => f.write_str("small"),
            SizeClass::Medium => f.write_str("medium"),
            SizeClass::Large => f.write_str("large"),
            SizeClass::Footprint(fp) => write!(f, "{fp}"),
        }
    }
}

impl FromStr for SizeClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "tiny" => SizeClass::Tiny,
            "small" => SizeClass::Small,
            "medium" => SizeClass::Medium,
            "large" => SizeClass::Large,
            other => SizeClass::Footprint(
                other
                    .parse()
                    .map_err(|_| format!("unknown size class `{other}`"))?,
            ),
        })
    }
}

impl TryFrom<String> for SizeClass {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SizeClass> for String {
    fn from(s: SizeClass) -> Self {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub bbox: BBox,
    pub depth_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectNode {
    pub id: NodeId,
    pub label: String,
    pub color: Color,
    pub bbox: BBox,
    pub depth_m: f64,
    /// Lifted box center in the camera frame; kept in sync with `bbox` and
    /// `depth_m` by every constructor and transition.
    pub center3: Point3,
    pub size_class: SizeClass,
    /// Detection confidence in `[0, 1]`; edges take the minimum of their endpoints.
    #[serde(default = "one")]
    pub confidence: f64,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

fn one() -> f64 {
    1.0
}

impl ObjectNode {
    pub fn new(
        id: NodeId,
        label: impl Into<String>,
        color: Color,
        pose: Pose,
        size_class: SizeClass,
        cam: &CameraModel,
    ) -> Result<Self, SceneError> {
        let center3 = geometry::lift_to_3d(&pose.bbox, pose.depth_m, cam)?;
        Ok(Self {
            id,
            label: label.into(),
            color,
            bbox: pose.bbox,
            depth_m: pose.depth_m,
            center3,
            size_class,
            confidence: 1.0,
            attributes: BTreeMap::new(),
        })
    }

    pub fn pose(&self) -> Pose {
        Pose {
            bbox: self.bbox,
            depth_m: self.depth_m,
        }
    }

    /// Copy of this node moved to `pose`.
    pub fn with_pose(&self, pose: Pose, cam: &CameraModel) -> Result<Self, SceneError> {
        let center3 = geometry::lift_to_3d(&pose.bbox, pose.depth_m, cam)?;
        Ok(Self {
            bbox: pose.bbox,
            depth_m: pose.depth_m,
            center3,
            ..self.clone()
        })
    }

    pub fn is_brick(&self) -> bool {
        matches!(self.size_class, SizeClass::Footprint(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub subject: NodeId,
    pub object: NodeId,
    pub kind: RelationKind,
    /// Metric strength of the relation, in [`RelationKind::unit`] units.
    pub magnitude: f64,
    pub confidence: f64,
}

pub type EdgeKey = (NodeId, NodeId, RelationKind);

impl RelationEdge {
    pub fn key(&self) -> EdgeKey {
        (self.subject.clone(), self.object.clone(), self.kind)
    }

    /// Equal up to confidence.
    pub fn same_relation(&self, other: &RelationEdge) -> bool {
        self.subject == other.subject
            && self.object == other.object
            && self.kind == other.kind
            && self.magnitude == other.magnitude
    }
}

impl fmt::Display for RelationEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.kind, self.subject, self.object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    File,
    Perception,
}

/// A snapshot of the world at step `t`. Nodes are kept sorted by id and
/// edges by (subject, object, kind).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub t: u64,
    pub provenance: Provenance,
    pub nodes: Vec<ObjectNode>,
    pub edges: Vec<RelationEdge>,
}

impl SceneGraph {
    pub fn empty(provenance: Provenance) -> Self {
        Self {
            t: 0,
            provenance,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    /// Build a relation-consistent graph from a node set.
    pub fn from_nodes(
        t: u64,
        provenance: Provenance,
        mut nodes: Vec<ObjectNode>,
        th: &Thresholds,
    ) -> Result<Self, SceneError> {
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = nodes.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(SceneError::DuplicateNodeId(w[0].id.clone()));
        }
        let edges = geometry::derive_all(&nodes, th);
        Ok(Self {
            t,
            provenance,
            nodes,
            edges,
        })
    }

    pub fn node(&self, id: &NodeId) -> Option<&ObjectNode> {
        self.nodes
            .binary_search_by(|n| n.id.cmp(id))
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn edge(
        &self,
        subject: &NodeId,
        object: &NodeId,
        kind: RelationKind,
    ) -> Option<&RelationEdge> {
        self.edges
            .binary_search_by(|e| (&e.subject, &e.object, e.kind).cmp(&(subject, object, kind)))
            .ok()
            .map(|i| &self.edges[i])
    }

    pub fn has_edge(&self, subject: &NodeId, object: &NodeId, kind: RelationKind) -> bool {
        self.edge(subject, object, kind).is_some()
    }

    /// Edges from `subject` to `object`, in kind order.
    pub fn relations_between<'a>(
        &'a self,
        subject: &'a NodeId,
        object: &'a NodeId,
    ) -> impl Iterator<Item = &'a RelationEdge> + 'a {
        self.edges
            .iter()
            .filter(move |e| &e.subject == subject && &e.object == object)
    }

    /// Copy without the given edge. The result is no longer relation-consistent.
    pub fn without_edge(&self, subject: &NodeId, object: &NodeId, kind: RelationKind) -> Self {
        let mut g = self.clone();
        g.edges
            .retain(|e| !(&e.subject == subject && &e.object == object && e.kind == kind));
        g
    }

    /// Copy without the node and its incident edges, keeping every other edge as is.
    pub fn without_node(&self, id: &NodeId) -> Self {
        let mut g = self.clone();
        g.nodes.retain(|n| &n.id != id);
        g.edges.retain(|e| &e.subject != id && &e.object != id);
        g
    }

    /// Structural checks that do not depend on thresholds: sorted unique
    /// ids, resolvable edge endpoints, no self-edges, unique edge triples.
    pub fn check_structure(&self) -> Result<(), SceneError> {
        for w in self.nodes.windows(2) {
            if w[0].id >= w[1].id {
                return Err(SceneError::DuplicateNodeId(w[1].id.clone()));
            }
        }
        let mut keys = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            if e.subject == e.object {
                return Err(SceneError::SelfEdge(e.to_string()));
            }
            if !self.contains(&e.subject) || !self.contains(&e.object) {
                return Err(SceneError::DanglingEdge(e.to_string()));
            }
            keys.push(e.key());
        }
        keys.sort();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(SceneError::DuplicateEdge(format!(
                "{} {} {}",
                w[0].0, w[0].2, w[0].1
            )));
        }
        Ok(())
    }

    /// Whether the edge set equals full derivation over the nodes, ignoring
    /// confidence.
    pub fn is_relation_consistent(&self, th: &Thresholds) -> bool {
        let derived = geometry::derive_all(&self.nodes, th);
        derived.len() == self.edges.len()
            && derived
                .iter()
                .zip(&self.edges)
                .all(|(a, b)| a.same_relation(b))
    }

    /// Equal in nodes and edges, ignoring the step index.
    pub fn same_state(&self, other: &SceneGraph) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

/// Lowercase label with every non-alphanumeric character replaced by `_`.
pub fn label_slug(label: &str) -> String {
    let slug: String = label
        .trim()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    if slug.is_empty() {
        "object".to_string()
    } else {
        slug
    }
}

/// The first `{slug}-{k}` id, counting `k` from 0, for which `taken` is false.
pub fn fresh_id(label: &str, taken: impl Fn(&NodeId) -> bool) -> NodeId {
    let slug = label_slug(label);
    (0u64..)
        .map(|k| NodeId::new(format!("{slug}-{k}")))
        .find(|id| !taken(id))
        .expect("unbounded id space")
}
