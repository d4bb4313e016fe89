use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EdgeKey, NodeId, ObjectNode, RelationEdge, SceneGraph};

/// Node and edge edits that turn one graph into another. `changed_nodes`
/// holds the new version of every node whose fields differ, moves included.
/// An edge whose magnitude or confidence changed appears as removed and added.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Changeset {
    pub added_nodes: Vec<ObjectNode>,
    pub removed_nodes: Vec<NodeId>,
    pub changed_nodes: Vec<ObjectNode>,
    pub added_edges: Vec<RelationEdge>,
    pub removed_edges: Vec<EdgeKey>,
}

impl Changeset {
    pub fn is_empty(&self) -> bool {
        self.added_nodes.is_empty()
            && self.removed_nodes.is_empty()
            && self.changed_nodes.is_empty()
            && self.added_edges.is_empty()
            && self.removed_edges.is_empty()
    }
}

pub fn diff(a: &SceneGraph, b: &SceneGraph) -> Changeset {
    let mut cs = Changeset::default();
    let a_nodes: BTreeMap<&NodeId, &ObjectNode> = a.nodes.iter().map(|n| (&n.id, n)).collect();
    let b_nodes: BTreeMap<&NodeId, &ObjectNode> = b.nodes.iter().map(|n| (&n.id, n)).collect();
    for (id, n) in &a_nodes {
        match b_nodes.get(id) {
            None => cs.removed_nodes.push((*id).clone()),
            Some(m) if m != n => cs.changed_nodes.push((*m).clone()),
            Some(_) => {}
        }
    }
    for (id, n) in &b_nodes {
        if !a_nodes.contains_key(id) {
            cs.added_nodes.push((*n).clone());
        }
    }

    let a_edges: BTreeMap<EdgeKey, &RelationEdge> = a.edges.iter().map(|e| (e.key(), e)).collect();
    let b_edges: BTreeMap<EdgeKey, &RelationEdge> = b.edges.iter().map(|e| (e.key(), e)).collect();
    for (k, e) in &a_edges {
        if b_edges.get(k) != Some(e) {
            cs.removed_edges.push(k.clone());
        }
    }
    for (k, e) in &b_edges {
        if a_edges.get(k) != Some(e) {
            cs.added_edges.push((*e).clone());
        }
    }
    cs
}

/// Apply `cs` to `a` as raw edits. The step index of `a` is kept.
pub fn apply_changeset(a: &SceneGraph, cs: &Changeset) -> SceneGraph {
    let mut nodes: BTreeMap<NodeId, ObjectNode> =
        a.nodes.iter().map(|n| (n.id.clone(), n.clone())).collect();
    for id in &cs.removed_nodes {
        nodes.remove(id);
    }
    for n in cs.changed_nodes.iter().chain(&cs.added_nodes) {
        nodes.insert(n.id.clone(), n.clone());
    }
    let mut edges: BTreeMap<EdgeKey, RelationEdge> =
        a.edges.iter().map(|e| (e.key(), e.clone())).collect();
    for k in &cs.removed_edges {
        edges.remove(k);
    }
    for e in &cs.added_edges {
        edges.insert(e.key(), e.clone());
    }
    SceneGraph {
        t: a.t,
        provenance: a.provenance,
        nodes: nodes.into_values().collect(),
        edges: edges.into_values().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::Color;
    use crate::geometry::{BBox, CameraModel, Thresholds};
    use crate::scene::{Action, Dynamics, Pose, Provenance, SizeClass};

    fn node(id: &str, x: f64) -> ObjectNode {
        let pose = Pose {
            bbox: BBox::new(x, 0.4, x + 0.1, 0.5).unwrap(),
            depth_m: 1.0,
        };
        ObjectNode::new(
            NodeId::new(id),
            "cup",
            Color::Red,
            pose,
            SizeClass::Small,
            &CameraModel::default(),
        )
        .unwrap()
    }

    #[test]
    fn self_diff_is_empty() {
        let g = SceneGraph::from_nodes(
            0,
            Provenance::Synthetic,
            vec![node("a", 0.1), node("b", 0.2)],
            &Thresholds::default(),
        )
        .unwrap();
        assert!(diff(&g, &g).is_empty());
    }

    #[test]
    fn removal_diff_lists_node_and_incident_edges() {
        let g = SceneGraph::from_nodes(
            0,
            Provenance::Synthetic,
            vec![node("a", 0.1), node("b", 0.2), node("c", 0.7)],
            &Thresholds::default(),
        )
        .unwrap();
        let next = Dynamics::default()
            .apply_action(&g, &Action::RemoveObject { id: "a".into() })
            .unwrap();
        let cs = diff(&g, &next);
        assert_eq!(cs.removed_nodes, vec![NodeId::new("a")]);
        let incident: Vec<EdgeKey> = g
            .edges
            .iter()
            .filter(|e| e.subject.as_str() == "a" || e.object.as_str() == "a")
            .map(|e| e.key())
            .collect();
        assert_eq!(cs.removed_edges, incident);
        assert!(
            cs.added_edges.is_empty() && cs.added_nodes.is_empty() && cs.changed_nodes.is_empty()
        );
        assert!(apply_changeset(&g, &cs).same_state(&next));
    }
}
