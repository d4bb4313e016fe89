//! The seven query categories, answered from a scene graph and a workspace
//! envelope. Every answer comes with a trace of claims, each citing the graph
//! elements or workspace parameters it rests on.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{self, overlap_iou, Point3, RelationKind, Unit};
use crate::lego::{BrickLayout, BrickRecord, LegoError, LegoStructure};
use crate::scene::{NodeId, ObjectNode, SceneGraph};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("unresolved reference `{0}`")]
    UnresolvedReference(NodeId),
    #[error("{category} query: {message}")]
    CategoryParamMismatch { category: Category, message: String },
    #[error("invalid workspace envelope: {0}")]
    InvalidWorkspace(String),
    #[error("scene does not form a brick structure: {0}")]
    Structure(#[from] LegoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Adjacency,
    Distance,
    Reachability,
    SuccessJudgment,
    Overlap,
    ArmFeasibility,
    Direction,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Adjacency,
        Category::Distance,
        Category::Reachability,
        Category::SuccessJudgment,
        Category::Overlap,
        Category::ArmFeasibility,
        Category::Direction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Adjacency => "adjacency",
            Category::Distance => "distance",
            Category::Reachability => "reachability",
            Category::SuccessJudgment => "success_judgment",
            Category::Overlap => "overlap",
            Category::ArmFeasibility => "arm_feasibility",
            Category::Direction => "direction",
        }
    }

    fn wants_object(self) -> bool {
        matches!(
            self,
            Category::Adjacency | Category::Distance | Category::Overlap | Category::Direction
        )
    }

    fn wants_subject(self) -> bool {
        self != Category::SuccessJudgment
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reachable space of the arm: a spherical shell around `base3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkspaceEnvelope {
    /// Arm base in the camera frame, meters.
    pub base3: Point3,
    pub reach_m: f64,
    pub min_reach_m: f64,
}

impl Default for WorkspaceEnvelope {
    fn default() -> Self {
        Self {
            base3: Point3::new(0.0, 0.0, 0.5),
            reach_m: 0.85,
            min_reach_m: 0.1,
        }
    }
}

impl WorkspaceEnvelope {
    pub fn validate(&self) -> Result<(), QueryError> {
        if self.min_reach_m >= 0.0 && self.min_reach_m < self.reach_m && self.reach_m.is_finite() {
            Ok(())
        } else {
            Err(QueryError::InvalidWorkspace(format!(
                "need 0 <= min_reach_m < reach_m, got {} and {}",
                self.min_reach_m, self.reach_m
            )))
        }
    }

    pub fn distance_to_base(&self, n: &ObjectNode) -> f64 {
        n.center3.distance(&self.base3)
    }

    pub fn contains(&self, n: &ObjectNode) -> bool {
        let d = self.distance_to_base(n);
        self.min_reach_m <= d && d <= self.reach_m
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueryParams {
    /// Target structure for success judgment.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<LegoStructure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialQuery {
    pub category: Category,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<NodeId>,
    #[serde(default)]
    pub params: QueryParams,
}

impl SpatialQuery {
    pub fn pair(category: Category, subject: impl Into<NodeId>, object: impl Into<NodeId>) -> Self {
        Self {
            category,
            subject: Some(subject.into()),
            object: Some(object.into()),
            params: QueryParams::default(),
        }
    }

    pub fn single(category: Category, subject: impl Into<NodeId>) -> Self {
        Self {
            category,
            subject: Some(subject.into()),
            object: None,
            params: QueryParams::default(),
        }
    }

    pub fn success(target: LegoStructure) -> Self {
        Self {
            category: Category::SuccessJudgment,
            subject: None,
            object: None,
            params: QueryParams {
                target: Some(target),
            },
        }
    }

    /// Checks that the references and params fit the category.
    pub fn check_shape(&self) -> Result<(), QueryError> {
        let c = self.category;
        let bad = |message: &str| {
            Err(QueryError::CategoryParamMismatch {
                category: c,
                message: message.into(),
            })
        };
        match (c.wants_subject(), self.subject.is_some()) {
            (true, false) => return bad("missing subject"),
            (false, true) => return bad("takes no subject"),
            _ => {}
        }
        match (c.wants_object(), self.object.is_some()) {
            (true, false) => return bad("missing object"),
            (false, true) => return bad("takes no object"),
            _ => {}
        }
        match (c == Category::SuccessJudgment, self.params.target.is_some()) {
            (true, false) => bad("missing params.target"),
            (false, true) => bad("params.target is only used by success_judgment"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnswerValue {
    Bool { value: bool },
    Scalar { value: f64, unit: Unit },
    Relations { value: Vec<RelationKind> },
}

impl AnswerValue {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AnswerValue::Bool { value } => Some(*value),
            _ => None,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            AnswerValue::Scalar { value, .. } => Some(*value),
            _ => None,
        }
    }
}

impl fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerValue::Bool { value } => write!(f, "{}", if *value { "yes" } else { "no" }),
            AnswerValue::Scalar { value, unit } => write!(f, "{value:.3} {unit}"),
            AnswerValue::Relations { value } if value.is_empty() => f.write_str("none"),
            AnswerValue::Relations { value } => {
                let names: Vec<&str> = value.iter().map(|k| k.as_str()).collect();
                f.write_str(&names.join(", "))
            }
        }
    }
}

/// What a trace claim rests on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    Node {
        id: NodeId,
    },
    Edge {
        subject: NodeId,
        kind: RelationKind,
        object: NodeId,
    },
    /// A workspace parameter or the query's target structure.
    Param {
        name: String,
        value: f64,
    },
    /// A computed quantity; context only, never sufficient on its own.
    Measure {
        name: String,
        value: f64,
    },
}

impl Evidence {
    pub fn edge(subject: &NodeId, kind: RelationKind, object: &NodeId) -> Self {
        Evidence::Edge {
            subject: subject.clone(),
            kind,
            object: object.clone(),
        }
    }

    pub fn node(id: &NodeId) -> Self {
        Evidence::Node { id: id.clone() }
    }

    pub fn param(name: &str, value: f64) -> Self {
        Evidence::Param {
            name: name.into(),
            value,
        }
    }

    pub fn measure(name: &str, value: f64) -> Self {
        Evidence::Measure {
            name: name.into(),
            value,
        }
    }

    /// Graph elements and parameters count as grounding; measures do not.
    pub fn is_grounding(&self) -> bool {
        !matches!(self, Evidence::Measure { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceClaim {
    pub claim: String,
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub value: AnswerValue,
    pub trace: Vec<TraceClaim>,
}

fn claim(text: impl Into<String>, evidence: Vec<Evidence>) -> TraceClaim {
    TraceClaim {
        claim: text.into(),
        evidence,
    }
}

fn resolve<'g>(g: &'g SceneGraph, id: &NodeId) -> Result<&'g ObjectNode, QueryError> {
    g.node(id)
        .ok_or_else(|| QueryError::UnresolvedReference(id.clone()))
}

fn reachability_claims(a: &ObjectNode, w: &WorkspaceEnvelope) -> (bool, TraceClaim) {
    let d = w.distance_to_base(a);
    let ok = w.contains(a);
    let text = if ok {
        format!(
            "{} is {d:.3} m from the base, within [{}, {}] m",
            a.id, w.min_reach_m, w.reach_m
        )
    } else {
        format!(
            "{} is {d:.3} m from the base, outside [{}, {}] m",
            a.id, w.min_reach_m, w.reach_m
        )
    };
    let evidence = vec![
        Evidence::node(&a.id),
        Evidence::measure("distance_to_base", d),
        Evidence::param("min_reach_m", w.min_reach_m),
        Evidence::param("reach_m", w.reach_m),
    ];
    (ok, claim(text, evidence))
}

/// Nodes overlapping `a` in the image that sit strictly nearer to the base.
pub fn blockers<'g>(
    g: &'g SceneGraph,
    a: &ObjectNode,
    w: &WorkspaceEnvelope,
) -> Vec<&'g ObjectNode> {
    let da = w.distance_to_base(a);
    g.edges
        .iter()
        .filter(|e| e.subject == a.id && e.kind == RelationKind::Overlapping)
        .filter_map(|e| g.node(&e.object))
        .filter(|n| w.distance_to_base(n) < da)
        .collect()
}

/// Answer with the default brick layout.
pub fn answer(
    q: &SpatialQuery,
    g: &SceneGraph,
    w: &WorkspaceEnvelope,
) -> Result<Answer, QueryError> {
    answer_with_layout(q, g, w, &BrickLayout::default())
}

pub fn answer_with_layout(
    q: &SpatialQuery,
    g: &SceneGraph,
    w: &WorkspaceEnvelope,
    layout: &BrickLayout,
) -> Result<Answer, QueryError> {
    q.check_shape()?;
    w.validate()?;
    let subject = q.subject.as_ref().map(|id| resolve(g, id)).transpose()?;
    let object = q.object.as_ref().map(|id| resolve(g, id)).transpose()?;
    match q.category {
        Category::Adjacency => {
            let (a, b) = (subject.expect("checked"), object.expect("checked"));
            let kind = [RelationKind::AdjacentTo, RelationKind::Overlapping]
                .into_iter()
                .find(|k| g.has_edge(&a.id, &b.id, *k));
            let trace = match kind {
                Some(k) => vec![claim(
                    format!("{} {} {}", a.id, k, b.id),
                    vec![Evidence::edge(&a.id, k, &b.id)],
                )],
                None => vec![claim(
                    format!("{} is neither adjacent to nor overlapping {}", a.id, b.id),
                    vec![
                        Evidence::node(&a.id),
                        Evidence::node(&b.id),
                        Evidence::measure("gap", a.bbox.gap(&b.bbox)),
                    ],
                )],
            };
            Ok(Answer {
                value: AnswerValue::Bool {
                    value: kind.is_some(),
                },
                trace,
            })
        }
        Category::Distance => {
            let (a, b) = (subject.expect("checked"), object.expect("checked"));
            let d = geometry::distance(a, b);
            let trace = vec![claim(
                format!("distance {} {} {d}", a.id, b.id),
                vec![
                    Evidence::node(&a.id),
                    Evidence::node(&b.id),
                    Evidence::measure("distance_m", d),
                ],
            )];
            Ok(Answer {
                value: AnswerValue::Scalar {
                    value: d,
                    unit: Unit::Meters,
                },
                trace,
            })
        }
        Category::Overlap => {
            let (a, b) = (subject.expect("checked"), object.expect("checked"));
            let k = RelationKind::Overlapping;
            let present = g.has_edge(&a.id, &b.id, k);
            let iou = overlap_iou(&a.bbox, &b.bbox);
            let trace = if present {
                vec![claim(
                    format!("{} {k} {}", a.id, b.id),
                    vec![
                        Evidence::edge(&a.id, k, &b.id),
                        Evidence::measure("iou", iou),
                    ],
                )]
            } else {
                vec![claim(
                    format!("not {} {k} {}", a.id, b.id),
                    vec![
                        Evidence::node(&a.id),
                        Evidence::node(&b.id),
                        Evidence::measure("iou", iou),
                    ],
                )]
            };
            Ok(Answer {
                value: AnswerValue::Bool { value: present },
                trace,
            })
        }
        Category::Direction => {
            let (a, b) = (subject.expect("checked"), object.expect("checked"));
            let kinds: Vec<RelationKind> = g
                .relations_between(&a.id, &b.id)
                .map(|e| e.kind)
                .filter(|k| k.is_directional())
                .collect();
            let mut trace: Vec<TraceClaim> = kinds
                .iter()
                .map(|k| {
                    claim(
                        format!("{} {k} {}", a.id, b.id),
                        vec![Evidence::edge(&a.id, *k, &b.id)],
                    )
                })
                .collect();
            if trace.is_empty() {
                trace.push(claim(
                    format!("no directional relation from {} to {}", a.id, b.id),
                    vec![Evidence::node(&a.id), Evidence::node(&b.id)],
                ));
            }
            Ok(Answer {
                value: AnswerValue::Relations { value: kinds },
                trace,
            })
        }
        Category::Reachability => {
            let a = subject.expect("checked");
            let (ok, c) = reachability_claims(a, w);
            Ok(Answer {
                value: AnswerValue::Bool { value: ok },
                trace: vec![c],
            })
        }
        Category::ArmFeasibility => {
            let a = subject.expect("checked");
            let (reachable, c) = reachability_claims(a, w);
            let mut trace = vec![c];
            let blocking = blockers(g, a, w);
            for n in &blocking {
                trace.push(claim(
                    format!(
                        "{} is blocked by {}, which is nearer to the base",
                        a.id, n.id
                    ),
                    vec![
                        Evidence::edge(&a.id, RelationKind::Overlapping, &n.id),
                        Evidence::measure("blocker_distance_to_base", w.distance_to_base(n)),
                    ],
                ));
            }
            if blocking.is_empty() {
                trace.push(claim(
                    format!("nothing nearer to the base overlaps {}", a.id),
                    vec![Evidence::node(&a.id)],
                ));
            }
            Ok(Answer {
                value: AnswerValue::Bool {
                    value: reachable && blocking.is_empty(),
                },
                trace,
            })
        }
        Category::SuccessJudgment => {
            let target = q.params.target.as_ref().expect("checked");
            let built = LegoStructure::bricks_in_graph(g, layout)?;
            let diffs = built.canonical_difference(target);
            let target_ev = Evidence::param("target_bricks", target.len() as f64);
            let trace = if diffs.is_empty() {
                let mut ev = vec![target_ev];
                ev.extend(
                    g.nodes
                        .iter()
                        .filter(|n| n.is_brick())
                        .map(|n| Evidence::node(&n.id)),
                );
                vec![claim("structure equals target", ev)]
            } else {
                diffs
                    .iter()
                    .map(|(extra, b)| {
                        let b = BrickRecord::from(b);
                        let text = if *extra {
                            format!("built structure has {b}, which the target lacks")
                        } else {
                            format!("target has {b}, which the built structure lacks")
                        };
                        claim(text, vec![target_ev.clone()])
                    })
                    .collect()
            };
            Ok(Answer {
                value: AnswerValue::Bool {
                    value: diffs.is_empty(),
                },
                trace,
            })
        }
    }
}

/// Answers every query, in order, in parallel. Failures are reported per
/// item.
pub fn batch_answer(
    queries: &[SpatialQuery],
    g: &SceneGraph,
    w: &WorkspaceEnvelope,
) -> Vec<Result<Answer, QueryError>> {
    queries.par_iter().map(|q| answer(q, g, w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::Color;
    use crate::geometry::{BBox, CameraModel, Thresholds};
    use crate::lego::{Footprint, PlacedBrick};
    use crate::perception::{synth_scene, SynthParams};
    use crate::scene::{Dynamics, Pose, Provenance, SizeClass};

    fn node(id: &str, x: f64, depth: f64) -> ObjectNode {
        let pose = Pose {
            bbox: BBox::new(x, 0.45, x + 0.1, 0.55).unwrap(),
            depth_m: depth,
        };
        ObjectNode::new(
            id.into(),
            "cup",
            Color::Red,
            pose,
            SizeClass::Small,
            &CameraModel::default(),
        )
        .unwrap()
    }

    fn graph(nodes: Vec<ObjectNode>) -> SceneGraph {
        SceneGraph::from_nodes(0, Provenance::Synthetic, nodes, &Thresholds::default()).unwrap()
    }

    #[test]
    fn distance_to_self_is_zero() {
        let g = graph(vec![node("a", 0.2, 1.0)]);
        let ans = answer(
            &SpatialQuery::pair(Category::Distance, "a", "a"),
            &g,
            &WorkspaceEnvelope::default(),
        )
        .unwrap();
        assert_eq!(
            ans.value,
            AnswerValue::Scalar {
                value: 0.0,
                unit: Unit::Meters
            }
        );
    }

    #[test]
    fn reachability_inside_shell() {
        // Center at x = 0, depth 0.9, base at depth 0.5: 0.4 m away.
        let g = graph(vec![node("a", 0.45, 0.9)]);
        let w = WorkspaceEnvelope::default();
        let ans = answer(&SpatialQuery::single(Category::Reachability, "a"), &g, &w).unwrap();
        assert_eq!(ans.value.as_bool(), Some(true));
        assert!((w.distance_to_base(g.node(&"a".into()).unwrap()) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn direction_left_of() {
        let g = graph(vec![node("a", 0.15, 1.0), node("b", 0.75, 1.0)]);
        let ans = answer(
            &SpatialQuery::pair(Category::Direction, "a", "b"),
            &g,
            &WorkspaceEnvelope::default(),
        )
        .unwrap();
        assert_eq!(
            ans.value,
            AnswerValue::Relations {
                value: vec![RelationKind::LeftOf]
            }
        );
    }

    #[test]
    fn success_judgment_names_the_recolored_brick() {
        let dyn_ = Dynamics::default();
        let fp = Footprint::new(2, 2).unwrap();
        let target = LegoStructure::new(vec![
            PlacedBrick::new(Color::Gray, fp, 0, 0, 0),
            PlacedBrick::new(Color::Red, Footprint::new(1, 1).unwrap(), 1, 0, 1),
        ]);
        let built = target
            .without_brick(&target.bricks()[1])
            .with_brick(PlacedBrick::new(
                Color::Green,
                Footprint::new(1, 1).unwrap(),
                1,
                0,
                1,
            ));
        let frame = crate::perception::render_structure(&built, &dyn_, "b").unwrap();
        let g =
            crate::perception::build_graph(&frame.detections, &frame.depths, None, &dyn_).unwrap();
        let ans = answer(
            &SpatialQuery::success(target.clone()),
            &g,
            &WorkspaceEnvelope::default(),
        )
        .unwrap();
        assert_eq!(ans.value.as_bool(), Some(false));
        let text: Vec<&str> = ans.trace.iter().map(|c| c.claim.as_str()).collect();
        assert!(text
            .iter()
            .any(|t| t.contains("green, 1×1, position (1,0), layer 1")));
        assert!(text
            .iter()
            .any(|t| t.contains("red, 1×1, position (1,0), layer 1")));
        let same = crate::perception::render_structure(&target, &dyn_, "t").unwrap();
        let g2 =
            crate::perception::build_graph(&same.detections, &same.depths, None, &dyn_).unwrap();
        assert_eq!(
            answer(
                &SpatialQuery::success(target),
                &g2,
                &WorkspaceEnvelope::default()
            )
            .unwrap()
            .value
            .as_bool(),
            Some(true)
        );
    }

    #[test]
    fn shape_and_reference_errors() {
        let g = graph(vec![node("a", 0.2, 1.0)]);
        let w = WorkspaceEnvelope::default();
        let q = SpatialQuery::single(Category::Distance, "a");
        assert!(matches!(
            answer(&q, &g, &w),
            Err(QueryError::CategoryParamMismatch { .. })
        ));
        let q = SpatialQuery::pair(Category::Reachability, "a", "a");
        assert!(matches!(
            answer(&q, &g, &w),
            Err(QueryError::CategoryParamMismatch { .. })
        ));
        let q = SpatialQuery::pair(Category::Adjacency, "a", "zz");
        assert_eq!(
            answer(&q, &g, &w),
            Err(QueryError::UnresolvedReference("zz".into()))
        );
    }

    fn all_queries(g: &SceneGraph) -> Vec<SpatialQuery> {
        let mut qs = Vec::new();
        for a in &g.nodes {
            qs.push(SpatialQuery::single(Category::Reachability, a.id.clone()));
            qs.push(SpatialQuery::single(Category::ArmFeasibility, a.id.clone()));
            for b in &g.nodes {
                for c in [
                    Category::Adjacency,
                    Category::Distance,
                    Category::Overlap,
                    Category::Direction,
                ] {
                    qs.push(SpatialQuery::pair(c, a.id.clone(), b.id.clone()));
                }
            }
        }
        qs
    }

    #[test]
    fn batch_equals_sequential() {
        assert!(batch_answer(
            &[],
            &SceneGraph::empty(Provenance::Synthetic),
            &WorkspaceEnvelope::default()
        )
        .is_empty());
        let dyn_ = Dynamics::default();
        let w = WorkspaceEnvelope::default();
        let s = synth_scene(
            9,
            SynthParams {
                n_objects: 12,
                brick_mode: false,
            },
            &dyn_,
        );
        let qs: Vec<SpatialQuery> = all_queries(&s.graph)
            .into_iter()
            .cycle()
            .take(1000)
            .collect();
        let batch = batch_answer(&qs, &s.graph, &w);
        let seq: Vec<_> = qs.iter().map(|q| answer(q, &s.graph, &w)).collect();
        assert_eq!(batch, seq);
    }

    #[test]
    fn every_claim_is_grounded() {
        let dyn_ = Dynamics::default();
        for seed in 0..20 {
            let s = synth_scene(
                seed,
                SynthParams {
                    n_objects: 5,
                    brick_mode: false,
                },
                &dyn_,
            );
            for q in all_queries(&s.graph) {
                let ans = answer(&q, &s.graph, &WorkspaceEnvelope::default()).unwrap();
                assert!(!ans.trace.is_empty());
                assert!(ans
                    .trace
                    .iter()
                    .all(|c| c.evidence.iter().any(Evidence::is_grounding)));
            }
        }
    }

    #[test]
    fn cited_edges_flip_true_answers() {
        let dyn_ = Dynamics::default();
        let w = WorkspaceEnvelope::default();
        let mut checked = 0;
        for seed in 0..30 {
            let s = synth_scene(
                seed,
                SynthParams {
                    n_objects: 6,
                    brick_mode: false,
                },
                &dyn_,
            );
            for q in all_queries(&s.graph) {
                let ans = answer(&q, &s.graph, &w).unwrap();
                let Some(v) = ans.value.as_bool() else {
                    continue;
                };
                if q.category == Category::ArmFeasibility
                    && !w.contains(s.graph.node(q.subject.as_ref().unwrap()).unwrap())
                {
                    continue;
                }
                let edges: Vec<&Evidence> = ans
                    .trace
                    .iter()
                    .flat_map(|c| &c.evidence)
                    .filter(|e| matches!(e, Evidence::Edge { .. }))
                    .collect();
                if edges.len() != 1 {
                    continue;
                }
                let Evidence::Edge {
                    subject,
                    kind,
                    object,
                } = edges[0]
                else {
                    unreachable!()
                };
                let mutated = s.graph.without_edge(subject, object, *kind);
                assert_ne!(
                    answer(&q, &mutated, &w).unwrap().value.as_bool(),
                    Some(v),
                    "{q:?}"
                );
                checked += 1;
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn cited_params_flip_reachability() {
        let dyn_ = Dynamics::default();
        let w = WorkspaceEnvelope::default();
        let s = synth_scene(
            4,
            SynthParams {
                n_objects: 10,
                brick_mode: false,
            },
            &dyn_,
        );
        for n in &s.graph.nodes {
            let q = SpatialQuery::single(Category::Reachability, n.id.clone());
            let v = answer(&q, &s.graph, &w).unwrap().value.as_bool().unwrap();
            let d = w.distance_to_base(n);
            let flipped = if v {
                WorkspaceEnvelope {
                    reach_m: d * 0.99,
                    min_reach_m: 0.0,
                    ..w
                }
            } else if d > w.reach_m {
                WorkspaceEnvelope {
                    reach_m: d * 1.01,
                    ..w
                }
            } else {
                WorkspaceEnvelope {
                    min_reach_m: d * 0.99,
                    ..w
                }
            };
            assert_ne!(
                answer(&q, &s.graph, &flipped).unwrap().value.as_bool(),
                Some(v)
            );
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reach_is_monotone(seed in 0u64..200, grow in 0.0f64..1.0, shrink in 0.0f64..1.0) {
                let dyn_ = Dynamics::default();
                let s = synth_scene(seed, SynthParams { n_objects: 4, brick_mode: false }, &dyn_);
                let w = WorkspaceEnvelope::default();
                let wider = WorkspaceEnvelope { reach_m: w.reach_m + grow, min_reach_m: w.min_reach_m * shrink, ..w };
                for n in &s.graph.nodes {
                    let q = SpatialQuery::single(Category::Reachability, n.id.clone());
                    let before = answer(&q, &s.graph, &w).unwrap().value.as_bool().unwrap();
                    let after = answer(&q, &s.graph, &wider).unwrap().value.as_bool().unwrap();
                    prop_assert!(!before || after);
                    let qf = SpatialQuery::single(Category::ArmFeasibility, n.id.clone());
                    let feasible = answer(&qf, &s.graph, &w).unwrap().value.as_bool().unwrap();
                    prop_assert!(!feasible || before);
                }
            }

            #[test]
            fn distances_are_metric(seed in 0u64..200) {
                let dyn_ = Dynamics::default();
                let s = synth_scene(seed, SynthParams { n_objects: 4, brick_mode: false }, &dyn_);
                let w = WorkspaceEnvelope::default();
                let d = |a: &NodeId, b: &NodeId| {
                    answer(&SpatialQuery::pair(Category::Distance, a.clone(), b.clone()), &s.graph, &w)
                        .unwrap().value.as_scalar().unwrap()
                };
                for a in &s.graph.nodes {
                    for b in &s.graph.nodes {
                        prop_assert_eq!(d(&a.id, &b.id), d(&b.id, &a.id));
                        for c in &s.graph.nodes {
                            let (ab, bc, ac) = (d(&a.id, &b.id), d(&b.id, &c.id), d(&a.id, &c.id));
                            prop_assert!(ac <= (ab + bc) * (1.0 + 1e-9) + 1e-12);
                        }
                    }
                }
            }
        }
    }
}
