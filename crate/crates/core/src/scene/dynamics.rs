use serde::{Deserialize, Serialize};

use crate::geometry::{self, CameraModel, Thresholds};
use crate::lego::BrickLayout;
use crate::planner::PlacementCommand;

use super::{fresh_id, NodeId, ObjectNode, Pose, RelationEdge, SceneError, SceneGraph, SizeClass};

/// Something the agent does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    PlaceBrick {
        command: PlacementCommand,
    },
    /// Grasp an object; its pose is unchanged and it is marked as held.
    PickObject {
        id: NodeId,
    },
    PlaceObject {
        id: NodeId,
        pose: Pose,
    },
    RemoveObject {
        id: NodeId,
    },
    NoOp,
}

/// An external edit to the scene that the agent did not cause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceEvent {
    AddNode { node: ObjectNode },
    RemoveNode { id: NodeId },
    MoveNode { id: NodeId, pose: Pose },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Event {
    Action { action: Action },
    Disturbance { disturbance: DisturbanceEvent },
}

impl From<Action> for Event {
    fn from(action: Action) -> Self {
        Event::Action { action }
    }
}

impl From<DisturbanceEvent> for Event {
    fn from(disturbance: DisturbanceEvent) -> Self {
        Event::Disturbance { disturbance }
    }
}

pub(crate) const HELD_ATTR: &str = "held";

/// The transition function. Holds everything a transition needs besides
/// the graph itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Dynamics {
    pub thresholds: Thresholds,
    pub camera: CameraModel,
    pub layout: BrickLayout,
}

fn position(nodes: &[ObjectNode], id: &NodeId) -> Result<usize, SceneError> {
    nodes
        .binary_search_by(|n| n.id.cmp(id))
        .map_err(|_| SceneError::UnknownNodeId(id.clone()))
}

fn insert_sorted(nodes: &mut Vec<ObjectNode>, node: ObjectNode) -> Result<(), SceneError> {
    match nodes.binary_search_by(|n| n.id.cmp(&node.id)) {
        Ok(_) => Err(SceneError::DuplicateNodeId(node.id)),
        Err(i) => {
            nodes.insert(i, node);
            Ok(())
        }
    }
}

impl Dynamics {
    pub fn new(thresholds: Thresholds) -> Self {
        Self {
            thresholds,
            ..Self::default()
        }
    }

    /// The node that a placement command adds to the scene.
    pub fn brick_node(
        &self,
        id: NodeId,
        command: &PlacementCommand,
    ) -> Result<ObjectNode, SceneError> {
        let brick = command.to_brick();
        let pose = self.layout.render(&brick)?;
        let label = format!("{} brick", brick.spec.footprint);
        let mut node = ObjectNode::new(
            id,
            label,
            brick.spec.color,
            pose,
            SizeClass::Footprint(brick.spec.footprint),
            &self.camera,
        )?;
        node.attributes.insert("kind".into(), "brick".into());
        Ok(node)
    }

    /// Successor node set under `action`.
    pub fn update_node_states(
        &self,
        g: &SceneGraph,
        action: &Action,
    ) -> Result<Vec<ObjectNode>, SceneError> {
        let mut nodes = g.nodes.clone();
        match action {
            Action::NoOp => {}
            Action::PlaceBrick { command } => {
                let label = format!("{} brick", command.spec.footprint);
                let id = fresh_id(&label, |id| g.contains(id));
                let node = self.brick_node(id, command)?;
                insert_sorted(&mut nodes, node)?;
            }
            Action::PickObject { id } => {
                let i = position(&nodes, id)?;
                nodes[i].attributes.insert(HELD_ATTR.into(), "true".into());
            }
            Action::PlaceObject { id, pose } => {
                let i = position(&nodes, id)?;
                let mut moved = nodes[i].with_pose(*pose, &self.camera)?;
                moved.attributes.remove(HELD_ATTR);
                nodes[i] = moved;
            }
            Action::RemoveObject { id } => {
                let i = position(&nodes, id)?;
                nodes.remove(i);
            }
        }
        Ok(nodes)
    }

    /// Full recomputation of relations over `nodes`. A derived edge keeps the
    /// confidence of a prior edge with the same triple and magnitude.
    pub fn update_relations(
        &self,
        nodes: &[ObjectNode],
        prev_edges: &[RelationEdge],
    ) -> Vec<RelationEdge> {
        let mut edges = geometry::derive_all(nodes, &self.thresholds);
        for e in &mut edges {
            let prior = prev_edges
                .binary_search_by(|p| {
                    (&p.subject, &p.object, p.kind).cmp(&(&e.subject, &e.object, e.kind))
                })
                .ok()
                .map(|i| &prev_edges[i]);
            if let Some(p) = prior {
                if p.magnitude == e.magnitude {
                    e.confidence = p.confidence;
                }
            }
        }
        edges
    }

    pub fn apply_action(&self, g: &SceneGraph, action: &Action) -> Result<SceneGraph, SceneError> {
        let nodes = self.update_node_states(g, action)?;
        Ok(self.successor(g, nodes))
    }

    pub fn apply_disturbance(
        &self,
        g: &SceneGraph,
        d: &DisturbanceEvent,
    ) -> Result<SceneGraph, SceneError> {
        let mut nodes = g.nodes.clone();
        match d {
            DisturbanceEvent::AddNode { node } => {
                let fresh = node.with_pose(node.pose(), &self.camera)?;
                insert_sorted(&mut nodes, fresh)?;
            }
            DisturbanceEvent::RemoveNode { id } => {
                let i = position(&nodes, id)?;
                nodes.remove(i);
            }
            DisturbanceEvent::MoveNode { id, pose } => {
                let i = position(&nodes, id)?;
                nodes[i] = nodes[i].with_pose(*pose, &self.camera)?;
            }
        }
        Ok(self.successor(g, nodes))
    }

    pub fn apply(&self, g: &SceneGraph, event: &Event) -> Result<SceneGraph, SceneError> {
        match event {
            Event::Action { action } => self.apply_action(g, action),
            Event::Disturbance { disturbance } => self.apply_disturbance(g, disturbance),
        }
    }

    /// The graph rebuilt from its nodes alone, with fresh confidences.
    pub fn rebuild(&self, g: &SceneGraph) -> SceneGraph {
        SceneGraph {
            t: g.t,
            provenance: g.provenance,
            nodes: g.nodes.clone(),
            edges: geometry::derive_all(&g.nodes, &self.thresholds),
        }
    }

    fn successor(&self, g: &SceneGraph, nodes: Vec<ObjectNode>) -> SceneGraph {
        let edges = self.update_relations(&nodes, &g.edges);
        SceneGraph {
            t: g.t + 1,
            provenance: g.provenance,
            nodes,
            edges,
        }
    }
}
