use serde::{Deserialize, Serialize};

use super::{Dynamics, Event, SceneError, SceneGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// The event that produced `graph`; `None` for the initial snapshot.
    pub event: Option<Event>,
    pub graph: SceneGraph,
}

/// The sequence of snapshots a scene passed through, with the event behind
/// each transition. Append-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphHistory {
    steps: Vec<HistoryEntry>,
}

impl GraphHistory {
    pub fn new(initial: SceneGraph) -> Self {
        Self {
            steps: vec![HistoryEntry {
                event: None,
                graph: initial,
            }],
        }
    }

    pub fn steps(&self) -> &[HistoryEntry] {
        &self.steps
    }

    pub fn current(&self) -> &SceneGraph {
        &self.steps.last().expect("history is never empty").graph
    }

    pub fn initial(&self) -> &SceneGraph {
        &self.steps[0].graph
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Apply `event` to the current graph and record the result. On error
    /// the history is unchanged.
    pub fn record(
        &mut self,
        dynamics: &Dynamics,
        event: impl Into<Event>,
    ) -> Result<&SceneGraph, SceneError> {
        let event = event.into();
        let next = dynamics.apply(self.current(), &event)?;
        self.steps.push(HistoryEntry {
            event: Some(event),
            graph: next,
        });
        Ok(self.current())
    }

    /// Replay every recorded event from the initial snapshot.
    pub fn fold(&self, dynamics: &Dynamics) -> Result<SceneGraph, SceneError> {
        let mut g = self.initial().clone();
        for entry in &self.steps[1..] {
            let event = entry
                .event
                .as_ref()
                .expect("only the first entry lacks an event");
            g = dynamics.apply(&g, event)?;
        }
        Ok(g)
    }

    /// Whether each snapshot is the transition of its predecessor and indices
    /// step by one.
    pub fn is_sound(&self, dynamics: &Dynamics) -> bool {
        self.steps.windows(2).all(|w| {
            let Some(event) = &w[1].event else {
                return false;
            };
            w[1].graph.t == w[0].graph.t + 1
                && dynamics.apply(&w[0].graph, event).as_ref() == Ok(&w[1].graph)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::Color;
    use crate::geometry::{BBox, CameraModel};
    use crate::scene::{Action, DisturbanceEvent, NodeId, ObjectNode, Pose, Provenance, SizeClass};

    #[test]
    fn fold_reproduces_current() {
        let dyn_ = Dynamics::default();
        let cam = CameraModel::default();
        let pose = |x: f64| Pose {
            bbox: BBox::new(x, 0.4, x + 0.1, 0.5).unwrap(),
            depth_m: 1.0,
        };
        let a = ObjectNode::new(
            NodeId::new("a"),
            "cup",
            Color::Red,
            pose(0.1),
            SizeClass::Small,
            &cam,
        )
        .unwrap();
        let b = ObjectNode::new(
            NodeId::new("b"),
            "bowl",
            Color::Green,
            pose(0.5),
            SizeClass::Small,
            &cam,
        )
        .unwrap();

        let mut h = GraphHistory::new(SceneGraph::empty(Provenance::Synthetic));
        h.record(&dyn_, DisturbanceEvent::AddNode { node: a })
            .unwrap();
        h.record(&dyn_, DisturbanceEvent::AddNode { node: b })
            .unwrap();
        h.record(&dyn_, Action::PickObject { id: "a".into() })
            .unwrap();
        h.record(
            &dyn_,
            Action::PlaceObject {
                id: "a".into(),
                pose: pose(0.8),
            },
        )
        .unwrap();
        h.record(&dyn_, Action::NoOp).unwrap();
        assert!(h
            .record(&dyn_, Action::RemoveObject { id: "x".into() })
            .is_err());

        assert_eq!(h.len(), 6);
        assert_eq!(h.current().t, 5);
        assert_eq!(&h.fold(&dyn_).unwrap(), h.current());
        assert!(h.is_sound(&dyn_));
    }
}
