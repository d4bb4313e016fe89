//! The claim language and step validation.
//!
//! ```text
//! claim := ["not"] ID RELATION ID
//!        | ID ("reachable" | "unreachable")
//!        | ID ("feasible" | "infeasible")
//!        | "distance" ID ID METERS
//!        | "structure" ("equals" | "differs from") "target"
//!        | "supported:" COMMAND
//! ```
//!
//! `RELATION` is a snake_case relation name such as `left_of`; `COMMAND` is
//! a placement command in the planner grammar.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{self, RelationKind};
use crate::lego::{BrickLayout, LegoStructure, PlacedBrick};
use crate::planner::{parse_command, PlacementCommand};
use crate::query::{blockers, Evidence, WorkspaceEnvelope};
use crate::scene::{NodeId, SceneGraph};

/// Tolerance for claimed distances, relative to the true distance (with a
/// floor of one meter).
pub const DISTANCE_TOLERANCE: f64 = 1e-9;

/// Name of the parameter cited by ground-layer placements.
pub const GROUND_PARAM: &str = "ground";
/// Name of the parameter carrying the target's brick count.
pub const TARGET_PARAM: &str = "target_bricks";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("claim `{claim}`: {message}")]
pub struct ClaimGrammarError {
    pub claim: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Claim {
    Relation {
        negated: bool,
        subject: NodeId,
        kind: RelationKind,
        object: NodeId,
    },
    Reachable {
        id: NodeId,
        reachable: bool,
    },
    Feasible {
        id: NodeId,
        feasible: bool,
    },
    Distance {
        a: NodeId,
        b: NodeId,
        meters: f64,
    },
    Structure {
        equal: bool,
    },
    Supported(PlacementCommand),
}

impl Claim {
    /// Node ids the claim talks about.
    pub fn node_refs(&self) -> Vec<&NodeId> {
        match self {
            Claim::Relation {
                subject, object, ..
            } => vec![subject, object],
            Claim::Reachable { id, .. } | Claim::Feasible { id, .. } => vec![id],
            Claim::Distance { a, b, .. } => vec![a, b],
            Claim::Structure { .. } | Claim::Supported(_) => vec![],
        }
    }
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Claim::Relation {
                negated,
                subject,
                kind,
                object,
            } => {
                if *negated {
                    f.write_str("not ")?;
                }
                write!(f, "{subject} {kind} {object}")
            }
            Claim::Reachable { id, reachable } => write!(
                f,
                "{id} {}",
                if *reachable {
                    "reachable"
                } else {
                    "unreachable"
                }
            ),
            Claim::Feasible { id, feasible } => write!(
                f,
                "{id} {}",
                if *feasible { "feasible" } else { "infeasible" }
            ),
            Claim::Distance { a, b, meters } => write!(f, "distance {a} {b} {meters}"),
            Claim::Structure { equal: true } => f.write_str("structure equals target"),
            Claim::Structure { equal: false } => f.write_str("structure differs from target"),
            Claim::Supported(c) => write!(f, "supported: {c}"),
        }
    }
}

pub fn parse_claim(text: &str) -> Result<Claim, ClaimGrammarError> {
    let err = |message: String| ClaimGrammarError {
        claim: text.to_string(),
        message,
    };
    let text_trim = text.trim();
    if let Some(rest) = text_trim.strip_prefix("supported:") {
        return parse_command(rest.trim())
            .map(Claim::Supported)
            .map_err(|e| err(format!("bad placement command: {e}")));
    }
    let words: Vec<&str> = text_trim.split_whitespace().collect();
    let id = |w: &str| NodeId::new(w);
    match words.as_slice() {
        [] => Err(err("empty claim".into())),
        ["structure", "equals", "target"] => Ok(Claim::Structure { equal: true }),
        ["structure", "differs", "from", "target"] => Ok(Claim::Structure { equal: false }),
        ["distance", a, b, m] => {
            let meters: f64 = m
                .parse()
                .map_err(|_| err(format!("`{m}` is not a number")))?;
            if !meters.is_finite() {
                return Err(err(format!("`{m}` is not a finite distance")));
            }
            Ok(Claim::Distance {
                a: id(a),
                b: id(b),
                meters,
            })
        }
        [a, "reachable"] => Ok(Claim::Reachable {
            id: id(a),
            reachable: true,
        }),
        [a, "unreachable"] => Ok(Claim::Reachable {
            id: id(a),
            reachable: false,
        }),
        [a, "feasible"] => Ok(Claim::Feasible {
            id: id(a),
            feasible: true,
        }),
        [a, "infeasible"] => Ok(Claim::Feasible {
            id: id(a),
            feasible: false,
        }),
        ["not", a, k, b] | [a, k, b] => {
            let kind: RelationKind = k.parse().map_err(err)?;
            Ok(Claim::Relation {
                negated: words[0] == "not" && words.len() == 4,
                subject: id(a),
                kind,
                object: id(b),
            })
        }
        _ => Err(err("does not match any claim form".into())),
    }
}

/// Why a step was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    UnresolvedRef,
    ContradictsEdge,
    UnsupportedClaim,
    /// The claim text is outside the claim language.
    ClaimGrammar,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::UnresolvedRef => "UnresolvedRef",
            Rule::ContradictsEdge => "ContradictsEdge",
            Rule::UnsupportedClaim => "UnsupportedClaim",
            Rule::ClaimGrammar => "ClaimGrammar",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepStatus {
    Validated,
    Rejected { rule: Rule, detail: String },
}

impl StepStatus {
    pub fn is_validated(&self) -> bool {
        matches!(self, StepStatus::Validated)
    }

    pub fn rule(&self) -> Option<Rule> {
        match self {
            StepStatus::Validated => None,
            StepStatus::Rejected { rule, .. } => Some(*rule),
        }
    }
}

/// A step as proposed by a client, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposedStep {
    pub claim: String,
    #[serde(default)]
    pub grounded_refs: Vec<Evidence>,
}

/// Everything a step may be checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub graph: SceneGraph,
    #[serde(default)]
    pub workspace: WorkspaceEnvelope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<LegoStructure>,
    #[serde(default)]
    pub layout: BrickLayout,
}

impl Grounding {
    pub fn new(graph: SceneGraph) -> Self {
        Self {
            graph,
            workspace: WorkspaceEnvelope::default(),
            target: None,
            layout: BrickLayout::default(),
        }
    }

    pub fn with_workspace(self, workspace: WorkspaceEnvelope) -> Self {
        Self { workspace, ..self }
    }

    pub fn with_target(self, target: LegoStructure) -> Self {
        Self {
            target: Some(target),
            ..self
        }
    }

    pub fn with_layout(self, layout: BrickLayout) -> Self {
        Self { layout, ..self }
    }

    fn param(&self, name: &str) -> Option<f64> {
        match name {
            "reach_m" => Some(self.workspace.reach_m),
            "min_reach_m" => Some(self.workspace.min_reach_m),
            GROUND_PARAM => Some(0.0),
            TARGET_PARAM => self.target.as_ref().map(|t| t.len() as f64),
            _ => None,
        }
    }

    fn resolves(&self, ev: &Evidence) -> bool {
        match ev {
            Evidence::Node { id } => self.graph.contains(id),
            Evidence::Edge {
                subject,
                kind,
                object,
            } => self.graph.has_edge(subject, object, *kind),
            Evidence::Param { name, value } => self.param(name) == Some(*value),
            Evidence::Measure { .. } => true,
        }
    }

    /// Brick nodes snapped to the stud grid.
    pub fn placed_bricks(&self) -> Result<Vec<(NodeId, PlacedBrick)>, String> {
        self.graph
            .nodes
            .iter()
            .filter_map(|n| match n.size_class {
                crate::scene::SizeClass::Footprint(fp) => Some(
                    self.layout
                        .snap(&n.id, fp, &n.pose())
                        .map(|(x, y, layer)| {
                            (n.id.clone(), PlacedBrick::new(n.color, fp, x, y, layer))
                        })
                        .map_err(|e| e.to_string()),
                ),
                _ => None,
            })
            .collect()
    }

    /// Brick nodes that would hold up `brick`, and whether it collides.
    pub fn support_for(&self, brick: &PlacedBrick) -> Result<(Vec<NodeId>, bool), String> {
        let placed = self.placed_bricks()?;
        let cells: Vec<_> = brick.cells().collect();
        let collides = placed
            .iter()
            .any(|(_, p)| p.cells().any(|c| cells.contains(&c)));
        let supporters = if brick.layer == 0 {
            Vec::new()
        } else {
            placed
                .iter()
                .filter(|(_, p)| p.layer + 1 == brick.layer)
                .filter(|(_, p)| {
                    p.cells()
                        .any(|(x, y, _)| cells.iter().any(|&(cx, cy, _)| (cx, cy) == (x, y)))
                })
                .map(|(id, _)| id.clone())
                .collect()
        };
        Ok((supporters, collides))
    }
}

/// Graph edges that contradict a relation claim.
pub fn contradicting_edges(
    g: &SceneGraph,
    negated: bool,
    a: &NodeId,
    kind: RelationKind,
    b: &NodeId,
) -> Vec<Evidence> {
    use RelationKind::*;
    if negated {
        return if g.has_edge(a, b, kind) {
            vec![Evidence::edge(a, kind, b)]
        } else {
            vec![]
        };
    }
    let mut candidates: Vec<(NodeId, RelationKind, NodeId)> = Vec::new();
    if let Some(d) = kind.dual() {
        candidates.push((a.clone(), d, b.clone()));
        candidates.push((b.clone(), kind, a.clone()));
    }
    match kind {
        OnTopOf => {
            candidates.push((b.clone(), OnTopOf, a.clone()));
            candidates.push((a.clone(), Below, b.clone()));
        }
        AdjacentTo => candidates.push((a.clone(), Overlapping, b.clone())),
        Overlapping => candidates.push((a.clone(), AdjacentTo, b.clone())),
        _ => {}
    }
    candidates
        .into_iter()
        .filter(|(s, k, o)| s != o && g.has_edge(s, o, *k))
        .map(|(s, k, o)| Evidence::edge(&s, k, &o))
        .collect()
}

/// The grounding items a claim must cite to be accepted, given that the
/// claim is true. Each of them is individually necessary.
fn required_evidence(claim: &Claim, gr: &Grounding) -> Result<Vec<Evidence>, String> {
    let reach_params = |id: &NodeId| {
        vec![
            Evidence::node(id),
            Evidence::param("min_reach_m", gr.workspace.min_reach_m),
            Evidence::param("reach_m", gr.workspace.reach_m),
        ]
    };
    Ok(match claim {
        Claim::Relation {
            negated: false,
            subject,
            kind,
            object,
        } => vec![Evidence::edge(subject, *kind, object)],
        Claim::Relation {
            negated: true,
            subject,
            object,
            ..
        } => vec![Evidence::node(subject), Evidence::node(object)],
        Claim::Reachable { id, .. } => reach_params(id),
        Claim::Feasible { id, feasible } => {
            let n = gr.graph.node(id).expect("claim refs resolved");
            if *feasible || !gr.workspace.contains(n) {
                reach_params(id)
            } else {
                let mut ev = vec![Evidence::node(id)];
                ev.extend(
                    blockers(&gr.graph, n, &gr.workspace)
                        .iter()
                        .map(|b| Evidence::edge(id, RelationKind::Overlapping, &b.id)),
                );
                ev
            }
        }
        Claim::Distance { a, b, .. } => vec![Evidence::node(a), Evidence::node(b)],
        Claim::Structure { equal } => {
            let target = gr
                .target
                .as_ref()
                .ok_or("no target structure is available")?;
            let mut ev = vec![Evidence::param(TARGET_PARAM, target.len() as f64)];
            if *equal {
                ev.extend(
                    gr.graph
                        .nodes
                        .iter()
                        .filter(|n| n.is_brick())
                        .map(|n| Evidence::node(&n.id)),
                );
            }
            ev
        }
        Claim::Supported(c) => {
            let (supporters, _) = gr.support_for(&c.to_brick())?;
            if c.layer == 0 {
                vec![Evidence::param(GROUND_PARAM, 0.0)]
            } else {
                supporters.iter().map(Evidence::node).collect()
            }
        }
    })
}

/// Whether the claim holds in the grounding, with a reason when it does not.
fn check_truth(claim: &Claim, gr: &Grounding) -> Result<(), String> {
    let g = &gr.graph;
    let w = &gr.workspace;
    let node = |id: &NodeId| g.node(id).expect("claim refs resolved");
    match claim {
        Claim::Relation {
            negated,
            subject,
            kind,
            object,
        } => {
            let present = g.has_edge(subject, object, *kind);
            if present != *negated {
                Ok(())
            } else {
                Err(format!("edge {kind}({subject}, {object}) is absent"))
            }
        }
        Claim::Reachable { id, reachable } => {
            let actual = w.contains(node(id));
            if actual == *reachable {
                Ok(())
            } else {
                Err(format!(
                    "{id} is {:.4} m from the base",
                    w.distance_to_base(node(id))
                ))
            }
        }
        Claim::Feasible { id, feasible } => {
            let n = node(id);
            let actual = w.contains(n) && blockers(g, n, w).is_empty();
            if actual == *feasible {
                Ok(())
            } else {
                Err(format!(
                    "{id} is {}",
                    if actual { "feasible" } else { "infeasible" }
                ))
            }
        }
        Claim::Distance { a, b, meters } => {
            let d = geometry::distance(node(a), node(b));
            if (d - meters).abs() <= DISTANCE_TOLERANCE * d.max(1.0) {
                Ok(())
            } else {
                Err(format!("distance between {a} and {b} is {d} m"))
            }
        }
        Claim::Structure { equal } => {
            let target = gr
                .target
                .as_ref()
                .ok_or("no target structure is available")?;
            let built =
                LegoStructure::new(gr.placed_bricks()?.into_iter().map(|(_, b)| b).collect());
            if built.equals(target) == *equal {
                Ok(())
            } else {
                Err(format!(
                    "built structure {} the target",
                    if *equal { "differs from" } else { "equals" }
                ))
            }
        }
        Claim::Supported(c) => {
            let brick = c.to_brick();
            let (supporters, collides) = gr.support_for(&brick)?;
            if collides {
                Err(format!("{brick} collides with a placed brick"))
            } else if brick.layer > 0 && supporters.is_empty() {
                Err(format!(
                    "nothing under {brick} in layer {}",
                    brick.layer - 1
                ))
            } else {
                Ok(())
            }
        }
    }
}

fn rejected(rule: Rule, detail: impl Into<String>) -> StepStatus {
    StepStatus::Rejected {
        rule,
        detail: detail.into(),
    }
}

/// Checks a step against the grounding. Rules are tried in order: the
/// claim's own node ids must resolve, no edge may contradict it, every cited
/// item must resolve, and the claim must hold with every item it depends on
/// cited.
pub fn validate_step(step: &ProposedStep, gr: &Grounding) -> Result<StepStatus, ClaimGrammarError> {
    let claim = parse_claim(&step.claim)?;
    if let Some(id) = claim
        .node_refs()
        .into_iter()
        .find(|id| !gr.graph.contains(id))
    {
        return Ok(rejected(Rule::UnresolvedRef, format!("no node `{id}`")));
    }
    if let Claim::Relation {
        negated,
        subject,
        kind,
        object,
    } = &claim
    {
        if let Some(Evidence::Edge {
            subject: s,
            kind: k,
            object: o,
        }) = contradicting_edges(&gr.graph, *negated, subject, *kind, object).first()
        {
            return Ok(rejected(
                Rule::ContradictsEdge,
                format!("graph has {k}({s}, {o})"),
            ));
        }
    }
    if let Some(ev) = step.grounded_refs.iter().find(|ev| !gr.resolves(ev)) {
        return Ok(rejected(
            Rule::UnresolvedRef,
            format!("cited {} does not resolve", describe(ev)),
        ));
    }
    if !step.grounded_refs.iter().any(Evidence::is_grounding) {
        return Ok(rejected(
            Rule::UnsupportedClaim,
            "no graph element or parameter is cited",
        ));
    }
    if let Err(why) = check_truth(&claim, gr) {
        return Ok(rejected(Rule::UnsupportedClaim, why));
    }
    let required = match required_evidence(&claim, gr) {
        Ok(r) => r,
        Err(why) => return Ok(rejected(Rule::UnsupportedClaim, why)),
    };
    if let Some(missing) = required.iter().find(|r| !step.grounded_refs.contains(r)) {
        return Ok(rejected(
            Rule::UnsupportedClaim,
            format!("{} is not cited", describe(missing)),
        ));
    }
    Ok(StepStatus::Validated)
}

fn describe(ev: &Evidence) -> String {
    match ev {
        Evidence::Node { id } => format!("node `{id}`"),
        Evidence::Edge {
            subject,
            kind,
            object,
        } => format!("edge {kind}({subject}, {object})"),
        Evidence::Param { name, value } => format!("parameter {name}={value}"),
        Evidence::Measure { name, value } => format!("measure {name}={value}"),
    }
}
