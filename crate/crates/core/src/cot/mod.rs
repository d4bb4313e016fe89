//! Step-validated reasoning over a scene graph.
//!
//! A client (a remote language model or the offline [`FallbackReasoner`])
//! receives the graph rendered as text plus a question and proposes atomic
//! steps in the claim language of [`claim`]. Each step is checked against the
//! graph before the client's answer is accepted; a rejected step is fed back
//! to the client, and after `max_retries` failed attempts the question is
//! abstained from.

pub mod claim;
mod fallback;
mod remote;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::lego::LegoStructure;
use crate::planner::{
    order_commands, structure_hash, AssemblyPlan, PlacementCommand, PlannerError,
};
use crate::query::AnswerValue;
use crate::scene::{Action, Dynamics, SceneError, SceneGraph};

pub use claim::{
    parse_claim, validate_step, Claim, ClaimGrammarError, Grounding, ProposedStep, Rule, StepStatus,
};
pub use fallback::{parse_question, plan_question, question_for, FallbackReasoner, ParsedQuestion};
pub use remote::RemoteClient;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CotError {
    #[error("reasoning backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("command {index} failed validation: {diagnostic}")]
    PlanValidationFailure { index: usize, diagnostic: String },
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl From<crate::remote::RemoteError> for CotError {
    fn from(e: crate::remote::RemoteError) -> Self {
        CotError::BackendUnavailable(e.to_string())
    }
}

/// What a client is asked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRequest {
    /// The scene graph as rendered by [`serialize_graph`].
    pub context: String,
    pub question: String,
    /// One line per rejected step of earlier attempts.
    #[serde(default)]
    pub feedback: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub steps: Vec<ProposedStep>,
    /// `None` when the client declines to answer.
    #[serde(default)]
    pub answer: Option<AnswerValue>,
}

pub trait LmClient: Send + Sync {
    fn name(&self) -> &str;

    fn propose(
        &self,
        request: &ProposalRequest,
        grounding: &Grounding,
    ) -> Result<Proposal, CotError>;

    /// Deterministic clients get exactly one attempt.
    fn single_pass(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Policy {
    pub max_retries: u32,
}

impl Default for Policy {
    fn default() -> Self {
        Self { max_retries: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningStep {
    pub claim: String,
    pub grounded_refs: Vec<crate::query::Evidence>,
    #[serde(flatten)]
    pub status: StepStatus,
    /// 0 for the first attempt.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Answered { value: AnswerValue },
    Abstained { diagnostic: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub question: String,
    pub client: String,
    pub steps: Vec<ReasoningStep>,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub retries: u32,
    /// Step index of the graph the steps were checked against.
    pub graph_t: u64,
}

impl ReasoningTrace {
    pub fn answer(&self) -> Option<&AnswerValue> {
        match &self.outcome {
            Outcome::Answered { value } => Some(value),
            Outcome::Abstained { .. } => None,
        }
    }

    pub fn is_abstained(&self) -> bool {
        matches!(self.outcome, Outcome::Abstained { .. })
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

/// Line-oriented text rendering of `g`: a header, one line per node in id
/// order, then one line per edge in (subject, object, relation) order.
pub fn serialize_graph(g: &SceneGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# scene graph t={} provenance={}",
        g.t,
        serde_json::to_value(g.provenance)
            .unwrap_or_default()
            .as_str()
            .unwrap_or("")
    );
    let _ = writeln!(out, "# nodes: id label color bbox depth_m center3");
    for n in &g.nodes {
        let b = n.bbox.to_array().map(fmt_f).join(", ");
        let c = [n.center3.x, n.center3.y, n.center3.z]
            .map(fmt_f)
            .join(", ");
        let _ = writeln!(
            out,
            "node {} \"{}\" {} [{b}] {} [{c}]",
            n.id,
            n.label,
            n.color.name(),
            fmt_f(n.depth_m)
        );
    }
    let _ = writeln!(out, "# edges: subject relation object magnitude");
    for e in &g.edges {
        let _ = writeln!(
            out,
            "edge {} {} {} {}",
            e.subject,
            e.kind,
            e.object,
            fmt_f(e.magnitude)
        );
    }
    out
}

/// Runs the propose-validate loop for one question.
pub fn reason(
    question: &str,
    grounding: &Grounding,
    client: &dyn LmClient,
    policy: Policy,
) -> Result<ReasoningTrace, CotError> {
    let context = serialize_graph(&grounding.graph);
    let attempts = if client.single_pass() {
        1
    } else {
        policy.max_retries + 1
    };
    let mut steps = Vec::new();
    let mut feedback: Vec<String> = Vec::new();
    let mut diagnostic = String::from("no attempt was made");
    for attempt in 0..attempts {
        let request = ProposalRequest {
            context: context.clone(),
            question: question.to_string(),
            feedback: feedback.clone(),
        };
        let proposal = client.propose(&request, grounding)?;
        let mut failure = None;
        for (i, p) in proposal.steps.iter().enumerate() {
            let status = match validate_step(p, grounding) {
                Ok(s) => s,
                Err(e) => StepStatus::Rejected {
                    rule: Rule::ClaimGrammar,
                    detail: e.to_string(),
                },
            };
            let rejected = match &status {
                StepStatus::Validated => None,
                StepStatus::Rejected { rule, detail } => Some(format!(
                    "step {i} `{}` rejected ({rule}): {detail}",
                    p.claim
                )),
            };
            steps.push(ReasoningStep {
                claim: p.claim.clone(),
                grounded_refs: p.grounded_refs.clone(),
                status,
                attempt,
            });
            if rejected.is_some() {
                failure = rejected;
                break;
            }
        }
        match (failure, proposal.answer) {
            (None, Some(value)) if !proposal.steps.is_empty() => {
                return Ok(ReasoningTrace {
                    question: question.to_string(),
                    client: client.name().to_string(),
                    steps,
                    outcome: Outcome::Answered { value },
                    retries: attempt,
                    graph_t: grounding.graph.t,
                });
            }
            (None, Some(_)) => diagnostic = "the answer cites no reasoning steps".into(),
            (None, None) => diagnostic = "the client gave no answer".into(),
            (Some(why), _) => diagnostic = why,
        }
        feedback.push(diagnostic.clone());
    }
    Ok(ReasoningTrace {
        question: question.to_string(),
        client: client.name().to_string(),
        steps,
        outcome: Outcome::Abstained { diagnostic },
        retries: attempts - 1,
        graph_t: grounding.graph.t,
    })
}

/// A plan checked command by command against a simulated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTrace {
    pub plan: AssemblyPlan,
    /// One trace per command, in order.
    pub traces: Vec<ReasoningTrace>,
    /// The scene after every command was applied.
    pub final_graph: SceneGraph,
}

/// Orders `target` bottom-up and, before each command, asks the client to
/// justify that the brick is supported in the current simulated scene. The
/// scene is advanced with a place action after each accepted command.
pub fn reason_over_plan(
    target: &LegoStructure,
    g: &SceneGraph,
    client: &dyn LmClient,
    dynamics: &Dynamics,
    policy: Policy,
) -> Result<PlanTrace, CotError> {
    let canonical = target.canonicalize();
    let commands: Vec<PlacementCommand> = order_commands(&canonical)?;
    let mut graph = g.clone();
    let mut traces = Vec::with_capacity(commands.len());
    for (index, command) in commands.iter().enumerate() {
        let grounding = Grounding::new(graph.clone())
            .with_target(canonical.clone())
            .with_layout(dynamics.layout);
        let trace = reason(&plan_question(command), &grounding, client, policy)?;
        match &trace.outcome {
            Outcome::Answered {
                value: AnswerValue::Bool { value: true },
            } => {}
            Outcome::Answered { value } => {
                return Err(CotError::PlanValidationFailure {
                    index,
                    diagnostic: format!("client answered {value}"),
                })
            }
            Outcome::Abstained { diagnostic } => {
                return Err(CotError::PlanValidationFailure {
                    index,
                    diagnostic: diagnostic.clone(),
                })
            }
        }
        traces.push(trace);
        graph = dynamics.apply_action(&graph, &Action::PlaceBrick { command: *command })?;
    }
    let plan = AssemblyPlan {
        commands,
        target_hash: structure_hash(&canonical),
    };
    Ok(PlanTrace {
        plan,
        traces,
        final_graph: graph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::Color;
    use crate::geometry::{BBox, CameraModel, RelationKind, Thresholds};
    use crate::lego::{Footprint, PlacedBrick};
    use crate::query::Evidence;
    use crate::scene::{ObjectNode, Pose, Provenance, SizeClass};

    fn node(id: &str, x: f64) -> ObjectNode {
        let pose = Pose {
            bbox: BBox::new(x, 0.45, x + 0.1, 0.55).unwrap(),
            depth_m: 1.0,
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

    fn two_cups() -> SceneGraph {
        SceneGraph::from_nodes(
            0,
            Provenance::Synthetic,
            vec![node("a", 0.2), node("b", 0.8)],
            &Thresholds::default(),
        )
        .unwrap()
    }

    #[test]
    fn serialization_shape() {
        let empty = serialize_graph(&SceneGraph::empty(Provenance::Synthetic));
        assert!(empty.lines().all(|l| l.starts_with('#')));
        let one = SceneGraph::from_nodes(
            0,
            Provenance::Synthetic,
            vec![node("a", 0.2)],
            &Thresholds::default(),
        )
        .unwrap();
        let text = serialize_graph(&one);
        assert_eq!(text.lines().filter(|l| l.starts_with("node ")).count(), 1);
        assert_eq!(text.lines().filter(|l| l.starts_with("edge ")).count(), 0);
        assert_eq!(serialize_graph(&two_cups()), serialize_graph(&two_cups()));
    }

    #[test]
    fn left_of_question_answers_true() {
        let gr = Grounding::new(two_cups());
        let t = reason("Is a left of b?", &gr, &FallbackReasoner, Policy::default()).unwrap();
        assert_eq!(t.answer(), Some(&AnswerValue::Bool { value: true }));
        assert_eq!(t.steps.len(), 1);
        assert!(t.steps[0].status.is_validated());
    }

    #[test]
    fn unknown_object_abstains() {
        let gr = Grounding::new(two_cups());
        let t = reason(
            "Is ghost-0 left of b?",
            &gr,
            &FallbackReasoner,
            Policy::default(),
        )
        .unwrap();
        assert!(t.is_abstained());
        assert_eq!(
            t.steps.last().unwrap().status.rule(),
            Some(Rule::UnresolvedRef)
        );
    }

    #[test]
    fn completed_structure_is_judged_equal() {
        let dyn_ = Dynamics::default();
        let target = LegoStructure::new(vec![
            PlacedBrick::new(Color::Gray, Footprint::new(2, 2).unwrap(), 0, 0, 0),
            PlacedBrick::new(Color::Red, Footprint::new(1, 1).unwrap(), 1, 0, 1),
        ]);
        let planned = reason_over_plan(
            &target,
            &SceneGraph::empty(Provenance::Synthetic),
            &FallbackReasoner,
            &dyn_,
            Policy::default(),
        )
        .unwrap();
        assert_eq!(planned.plan.commands.len(), 2);
        assert!(planned
            .traces
            .iter()
            .all(|t| t.steps.iter().all(|s| s.status.is_validated())));
        let gr = Grounding::new(planned.final_graph).with_target(target);
        let t = reason(
            "Is the structure complete?",
            &gr,
            &FallbackReasoner,
            Policy::default(),
        )
        .unwrap();
        assert_eq!(t.answer(), Some(&AnswerValue::Bool { value: true }));
    }

    #[test]
    fn floating_brick_fails_at_its_index() {
        let dyn_ = Dynamics::default();
        let empty = reason_over_plan(
            &LegoStructure::empty(),
            &SceneGraph::empty(Provenance::Synthetic),
            &FallbackReasoner,
            &dyn_,
            Policy::default(),
        )
        .unwrap();
        assert!(empty.plan.commands.is_empty() && empty.traces.is_empty());
        let target = LegoStructure::new(vec![
            PlacedBrick::new(Color::Gray, Footprint::new(1, 1).unwrap(), 0, 0, 0),
            PlacedBrick::new(Color::Red, Footprint::new(1, 1).unwrap(), 0, 0, 1),
            PlacedBrick::new(Color::Red, Footprint::new(1, 1).unwrap(), 3, 0, 2),
        ]);
        let e = reason_over_plan(
            &target,
            &SceneGraph::empty(Provenance::Synthetic),
            &FallbackReasoner,
            &dyn_,
            Policy::default(),
        )
        .unwrap_err();
        assert!(
            matches!(e, CotError::PlanValidationFailure { index: 2, .. }),
            "{e:?}"
        );
    }

    /// A client that lies once, then tells the truth.
    struct Flaky(std::sync::atomic::AtomicU32);

    impl LmClient for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }

        fn propose(&self, req: &ProposalRequest, _: &Grounding) -> Result<Proposal, CotError> {
            let n = self.0.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            let (claim, refs) = if n == 0 {
                (
                    "b left_of a",
                    vec![Evidence::edge(
                        &"b".into(),
                        RelationKind::LeftOf,
                        &"a".into(),
                    )],
                )
            } else {
                assert_eq!(req.feedback.len(), 1);
                assert!(req.feedback[0].contains("ContradictsEdge"));
                (
                    "a left_of b",
                    vec![Evidence::edge(
                        &"a".into(),
                        RelationKind::LeftOf,
                        &"b".into(),
                    )],
                )
            };
            Ok(Proposal {
                steps: vec![ProposedStep {
                    claim: claim.into(),
                    grounded_refs: refs,
                }],
                answer: Some(AnswerValue::Bool { value: n > 0 }),
            })
        }
    }

    #[test]
    fn rejection_triggers_retry() {
        let gr = Grounding::new(two_cups());
        let t = reason("Is a left of b?", &gr, &Flaky(0.into()), Policy::default()).unwrap();
        assert_eq!(t.retries, 1);
        assert_eq!(t.answer(), Some(&AnswerValue::Bool { value: true }));
        assert_eq!(t.steps[0].status.rule(), Some(Rule::ContradictsEdge));

        let t = reason(
            "Is a left of b?",
            &gr,
            &Flaky(0.into()),
            Policy { max_retries: 0 },
        )
        .unwrap();
        assert!(t.is_abstained());
    }
}
