//! The offline reasoner: recognizes a fixed set of question templates and
//! answers them by graph lookups, emitting one claim per fact it relies on.

use std::sync::OnceLock;

use regex::Regex;

use crate::geometry::RelationKind;
use crate::planner::{parse_command, serialize_command, PlacementCommand};
use crate::query::{
    self, answer_with_layout, AnswerValue, Category, Evidence, QueryError, SpatialQuery,
};
use crate::scene::NodeId;

use super::claim::{Claim, Grounding, ProposedStep, GROUND_PARAM, TARGET_PARAM};
use super::{CotError, LmClient, Proposal, ProposalRequest};

/// A recognized question.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedQuestion {
    Query(SpatialQuery),
    /// "Is a left of b?" and similar yes/no relation checks.
    RelationCheck {
        subject: NodeId,
        kind: RelationKind,
        object: NodeId,
    },
    /// Whether the structure in the scene equals the grounding's target.
    StructureComplete,
    /// Whether a placement is physically valid in the current scene.
    Placement(PlacementCommand),
}

const ID: &str = r"([A-Za-z0-9_.\-]+)";

fn relation_phrase(kind: RelationKind) -> Option<&'static str> {
    use RelationKind::*;
    match kind {
        LeftOf => Some("left of"),
        RightOf => Some("right of"),
        Above => Some("above"),
        Below => Some("below"),
        InFrontOf => Some("in front of"),
        Behind => Some("behind"),
        Near => Some("near"),
        OnTopOf => Some("on top of"),
        AdjacentTo | Overlapping => None,
    }
}

struct Templates {
    adjacency: Regex,
    distance: Regex,
    overlap: Regex,
    direction: Regex,
    reach: Regex,
    feasible: Regex,
    complete: Regex,
    relation: Regex,
    placement: Regex,
}

fn templates() -> &'static Templates {
    static T: OnceLock<Templates> = OnceLock::new();
    T.get_or_init(|| {
        let re = |p: String| Regex::new(&format!("(?i)^{p}$")).expect("template regexes compile");
        let phrases: Vec<&str> = RelationKind::ALL
            .into_iter()
            .filter_map(relation_phrase)
            .collect();
        Templates {
            adjacency: re(format!(r"is (?:the )?{ID} adjacent to (?:the )?{ID}\?")),
            distance: re(format!(r"how far is (?:the )?{ID} from (?:the )?{ID}\?")),
            overlap: re(format!(r"does (?:the )?{ID} overlap (?:the )?{ID}\?")),
            direction: re(format!(
                r"where is (?:the )?{ID} relative to (?:the )?{ID}\?"
            )),
            reach: re(format!(r"can the arm reach (?:the )?{ID}\?")),
            feasible: re(format!(r"can the arm pick up (?:the )?{ID}\?")),
            complete: re(
                r"(?:is the structure complete|does the structure match the target)\?".into(),
            ),
            relation: re(format!(
                r"is (?:the )?{ID} ({}) (?:the )?{ID}\?",
                phrases.join("|")
            )),
            placement: re(r"is it physically valid to (.+)\?".into()),
        }
    })
}

/// The canonical question text for a query. Success judgment questions do
/// not carry their target; it comes from the grounding.
pub fn question_for(q: &SpatialQuery) -> String {
    let s = q.subject.as_ref().map(NodeId::as_str).unwrap_or("");
    let o = q.object.as_ref().map(NodeId::as_str).unwrap_or("");
    match q.category {
        Category::Adjacency => format!("Is {s} adjacent to {o}?"),
        Category::Distance => format!("How far is {s} from {o}?"),
        Category::Overlap => format!("Does {s} overlap {o}?"),
        Category::Direction => format!("Where is {s} relative to {o}?"),
        Category::Reachability => format!("Can the arm reach {s}?"),
        Category::ArmFeasibility => format!("Can the arm pick up {s}?"),
        Category::SuccessJudgment => "Is the structure complete?".into(),
    }
}

/// The question asked before each command of a plan.
pub fn plan_question(c: &PlacementCommand) -> String {
    format!("Is it physically valid to {}?", serialize_command(c))
}

pub fn parse_question(text: &str) -> Option<ParsedQuestion> {
    let t = templates();
    let text = text.trim();
    let id = |c: &regex::Captures, i: usize| NodeId::new(&c[i]);
    let pair = |re: &Regex, cat: Category| {
        re.captures(text)
            .map(|c| ParsedQuestion::Query(SpatialQuery::pair(cat, id(&c, 1), id(&c, 2))))
    };
    let single = |re: &Regex, cat: Category| {
        re.captures(text)
            .map(|c| ParsedQuestion::Query(SpatialQuery::single(cat, id(&c, 1))))
    };
    if let Some(c) = t.placement.captures(text) {
        return parse_command(&c[1]).ok().map(ParsedQuestion::Placement);
    }
    if t.complete.is_match(text) {
        return Some(ParsedQuestion::StructureComplete);
    }
    pair(&t.adjacency, Category::Adjacency)
        .or_else(|| pair(&t.distance, Category::Distance))
        .or_else(|| pair(&t.overlap, Category::Overlap))
        .or_else(|| pair(&t.direction, Category::Direction))
        .or_else(|| single(&t.reach, Category::Reachability))
        .or_else(|| single(&t.feasible, Category::ArmFeasibility))
        .or_else(|| {
            t.relation.captures(text).map(|c| {
                let phrase = c[2].to_lowercase();
                let kind = RelationKind::ALL
                    .into_iter()
                    .find(|k| relation_phrase(*k) == Some(phrase.as_str()))
                    .expect("regex alternatives come from the phrase table");
                ParsedQuestion::RelationCheck {
                    subject: id(&c, 1),
                    kind,
                    object: id(&c, 3),
                }
            })
        })
}

/// Deterministic, offline client. Always single-pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct FallbackReasoner;

/// Each item is cited once, so every citation is individually necessary.
fn step(claim: Claim, refs: Vec<Evidence>) -> ProposedStep {
    let mut grounded_refs: Vec<Evidence> = Vec::with_capacity(refs.len());
    for r in refs {
        if !grounded_refs.contains(&r) {
            grounded_refs.push(r);
        }
    }
    ProposedStep {
        claim: claim.to_string(),
        grounded_refs,
    }
}

fn relation_step(
    g: &crate::scene::SceneGraph,
    a: &NodeId,
    kind: RelationKind,
    b: &NodeId,
) -> ProposedStep {
    if g.has_edge(a, b, kind) {
        step(
            Claim::Relation {
                negated: false,
                subject: a.clone(),
                kind,
                object: b.clone(),
            },
            vec![Evidence::edge(a, kind, b)],
        )
    } else {
        step(
            Claim::Relation {
                negated: true,
                subject: a.clone(),
                kind,
                object: b.clone(),
            },
            vec![Evidence::node(a), Evidence::node(b)],
        )
    }
}

fn reach_refs(id: &NodeId, gr: &Grounding) -> Vec<Evidence> {
    vec![
        Evidence::node(id),
        Evidence::param("min_reach_m", gr.workspace.min_reach_m),
        Evidence::param("reach_m", gr.workspace.reach_m),
    ]
}

fn unresolved(q: &ParsedQuestion, missing: &NodeId) -> Proposal {
    let claim = match q {
        ParsedQuestion::RelationCheck {
            subject,
            kind,
            object,
        } => Claim::Relation {
            negated: false,
            subject: subject.clone(),
            kind: *kind,
            object: object.clone(),
        },
        ParsedQuestion::Query(sq) => {
            let a = sq.subject.clone().unwrap_or_else(|| missing.clone());
            let b = sq.object.clone().unwrap_or_else(|| missing.clone());
            match sq.category {
                Category::Reachability => Claim::Reachable {
                    id: a,
                    reachable: true,
                },
                Category::ArmFeasibility => Claim::Feasible {
                    id: a,
                    feasible: true,
                },
                Category::Distance => Claim::Distance { a, b, meters: 0.0 },
                Category::Overlap => Claim::Relation {
                    negated: false,
                    subject: a,
                    kind: RelationKind::Overlapping,
                    object: b,
                },
                _ => Claim::Relation {
                    negated: false,
                    subject: a,
                    kind: RelationKind::AdjacentTo,
                    object: b,
                },
            }
        }
        _ => Claim::Reachable {
            id: missing.clone(),
            reachable: true,
        },
    };
    Proposal {
        steps: vec![step(claim, vec![Evidence::node(missing)])],
        answer: None,
    }
}

impl FallbackReasoner {
    fn answer_query(&self, pq: &ParsedQuestion, sq: &SpatialQuery, gr: &Grounding) -> Proposal {
        let g = &gr.graph;
        let ans = match answer_with_layout(sq, g, &gr.workspace, &gr.layout) {
            Ok(a) => a,
            Err(QueryError::UnresolvedReference(id)) => return unresolved(pq, &id),
            Err(_) => {
                return Proposal {
                    steps: vec![],
                    answer: None,
                }
            }
        };
        let subject = sq.subject.clone();
        let object = sq.object.clone();
        let steps = match sq.category {
            Category::Adjacency => {
                let (a, b) = (subject.expect("pair"), object.expect("pair"));
                match [RelationKind::AdjacentTo, RelationKind::Overlapping]
                    .into_iter()
                    .find(|k| g.has_edge(&a, &b, *k))
                {
                    Some(k) => vec![relation_step(g, &a, k, &b)],
                    None => vec![
                        relation_step(g, &a, RelationKind::AdjacentTo, &b),
                        relation_step(g, &a, RelationKind::Overlapping, &b),
                    ],
                }
            }
            Category::Overlap => {
                let (a, b) = (subject.expect("pair"), object.expect("pair"));
                vec![relation_step(g, &a, RelationKind::Overlapping, &b)]
            }
            Category::Direction => {
                let (a, b) = (subject.expect("pair"), object.expect("pair"));
                RelationKind::DIRECTIONAL
                    .iter()
                    .map(|k| relation_step(g, &a, *k, &b))
                    .collect()
            }
            Category::Distance => {
                let (a, b) = (subject.expect("pair"), object.expect("pair"));
                let meters = ans.value.as_scalar().expect("distance is scalar");
                vec![step(
                    Claim::Distance {
                        a: a.clone(),
                        b: b.clone(),
                        meters,
                    },
                    vec![Evidence::node(&a), Evidence::node(&b)],
                )]
            }
            Category::Reachability => {
                let a = subject.expect("single");
                let reachable = ans.value.as_bool().expect("bool");
                vec![step(
                    Claim::Reachable {
                        id: a.clone(),
                        reachable,
                    },
                    reach_refs(&a, gr),
                )]
            }
            Category::ArmFeasibility => {
                let a = subject.expect("single");
                let feasible = ans.value.as_bool().expect("bool");
                let n = g.node(&a).expect("resolved");
                let refs = if feasible || !gr.workspace.contains(n) {
                    reach_refs(&a, gr)
                } else {
                    let mut r = vec![Evidence::node(&a)];
                    r.extend(
                        query::blockers(g, n, &gr.workspace)
                            .iter()
                            .map(|b| Evidence::edge(&a, RelationKind::Overlapping, &b.id)),
                    );
                    r
                };
                vec![step(Claim::Feasible { id: a, feasible }, refs)]
            }
            Category::SuccessJudgment => {
                let equal = ans.value.as_bool().expect("bool");
                let target = gr
                    .target
                    .as_ref()
                    .expect("query built from the grounding target");
                let mut refs = vec![Evidence::param(TARGET_PARAM, target.len() as f64)];
                if equal {
                    refs.extend(
                        g.nodes
                            .iter()
                            .filter(|n| n.is_brick())
                            .map(|n| Evidence::node(&n.id)),
                    );
                }
                vec![step(Claim::Structure { equal }, refs)]
            }
        };
        Proposal {
            steps,
            answer: Some(ans.value),
        }
    }
}

impl LmClient for FallbackReasoner {
    fn name(&self) -> &str {
        "fallback"
    }

    fn single_pass(&self) -> bool {
        true
    }

    fn propose(&self, request: &ProposalRequest, gr: &Grounding) -> Result<Proposal, CotError> {
        let Some(pq) = parse_question(&request.question) else {
            return Ok(Proposal {
                steps: vec![],
                answer: None,
            });
        };
        let g = &gr.graph;
        Ok(match &pq {
            ParsedQuestion::Query(sq) => self.answer_query(&pq, sq, gr),
            ParsedQuestion::StructureComplete => match &gr.target {
                Some(t) => self.answer_query(&pq, &SpatialQuery::success(t.clone()), gr),
                None => Proposal {
                    steps: vec![],
                    answer: None,
                },
            },
            ParsedQuestion::RelationCheck {
                subject,
                kind,
                object,
            } => {
                if let Some(missing) = [subject, object].into_iter().find(|id| !g.contains(id)) {
                    return Ok(unresolved(&pq, missing));
                }
                let present = g.has_edge(subject, object, *kind);
                Proposal {
                    steps: vec![relation_step(g, subject, *kind, object)],
                    answer: Some(AnswerValue::Bool { value: present }),
                }
            }
            ParsedQuestion::Placement(c) => {
                let brick = c.to_brick();
                let refs = match gr.support_for(&brick) {
                    Ok(_) if c.layer == 0 => vec![Evidence::param(GROUND_PARAM, 0.0)],
                    Ok((supporters, _)) => supporters.iter().map(Evidence::node).collect(),
                    Err(_) => vec![],
                };
                let ok = matches!(gr.support_for(&brick), Ok((s, false)) if c.layer == 0 || !s.is_empty());
                Proposal {
                    steps: vec![step(Claim::Supported(*c), refs)],
                    answer: Some(AnswerValue::Bool { value: ok }),
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::Color;
    use crate::lego::Footprint;

    #[test]
    fn templates_round_trip() {
        for c in Category::ALL {
            let q = match c {
                Category::Reachability | Category::ArmFeasibility => {
                    SpatialQuery::single(c, "cup-0")
                }
                Category::SuccessJudgment => continue,
                _ => SpatialQuery::pair(c, "cup-0", "2x4_brick-1"),
            };
            assert_eq!(
                parse_question(&question_for(&q)),
                Some(ParsedQuestion::Query(q))
            );
        }
        assert_eq!(
            parse_question("Is the structure complete?"),
            Some(ParsedQuestion::StructureComplete)
        );
        assert_eq!(
            parse_question("Is the cup-0 on top of bowl-1?"),
            Some(ParsedQuestion::RelationCheck {
                subject: "cup-0".into(),
                kind: RelationKind::OnTopOf,
                object: "bowl-1".into()
            })
        );
        let c = PlacementCommand::new(Color::Red, Footprint::new(1, 1).unwrap(), 2, 0, 1);
        assert_eq!(
            parse_question(&plan_question(&c)),
            Some(ParsedQuestion::Placement(c))
        );
        assert_eq!(parse_question("What color is the sky?"), None);
    }

    #[test]
    fn self_pair_cites_each_node_once() {
        use crate::perception::{synth_scene, SynthParams};
        use crate::scene::Dynamics;
        let g = synth_scene(
            3,
            SynthParams {
                n_objects: 3,
                brick_mode: false,
            },
            &Dynamics::default(),
        )
        .graph;
        let gr = Grounding::new(g.clone());
        let id = g.nodes[0].id.clone();
        for c in [Category::Adjacency, Category::Distance, Category::Overlap] {
            let req = ProposalRequest {
                context: String::new(),
                question: question_for(&SpatialQuery::pair(c, id.clone(), id.clone())),
                feedback: vec![],
            };
            let p = FallbackReasoner.propose(&req, &gr).unwrap();
            for s in &p.steps {
                assert_eq!(
                    s.grounded_refs,
                    vec![Evidence::node(&id)],
                    "{c:?}: {}",
                    s.claim
                );
                assert!(crate::cot::validate_step(s, &gr).unwrap().is_validated());
            }
        }
    }
}
