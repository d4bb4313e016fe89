//! Brute-force ground truth for generated questions.
//!
//! Works from the raw detection records of a synthetic frame and the
//! generator's brick structure, never from scene graphs or the query engine:
//! node ids, 3D centers, and every predicate are recomputed here from first
//! principles.

use std::collections::BTreeMap;

use crate::geometry::{RelationKind, Thresholds};
use crate::lego::{LegoStructure, PlacedBrick};
use crate::perception::PerceptionFrame;
use crate::query::{AnswerValue, Category, WorkspaceEnvelope};
use crate::scene::NodeId;

/// One object as the oracle sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleObject {
    pub id: NodeId,
    pub rect: [f64; 4],
    pub depth: f64,
    pub center3: [f64; 3],
}

fn slug(label: &str) -> String {
    let s: String = label
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
    if s.is_empty() {
        "object".into()
    } else {
        s
    }
}

/// Objects of a frame with the ids perception would assign: records sorted
/// by (label, box, depth, color, score), numbered per label slug.
pub fn objects(frame: &PerceptionFrame, camera: (f64, f64)) -> Vec<OracleObject> {
    let mut recs: Vec<usize> = (0..frame.detections.len()).collect();
    let key = |i: &usize| {
        let d = &frame.detections[*i];
        let mut v: Vec<f64> = d.bbox.to_array().to_vec();
        v.push(frame.depths[*i]);
        (d.label.clone(), v, d.rgb, d.score)
    };
    recs.sort_by(|a, b| {
        let (la, va, ca, sa) = key(a);
        let (lb, vb, cb, sb) = key(b);
        la.cmp(&lb)
            .then_with(|| va.partial_cmp(&vb).expect("finite coordinates"))
            .then_with(|| ca.cmp(&cb))
            .then_with(|| sa.total_cmp(&sb))
    });
    let mut counters: BTreeMap<String, u32> = BTreeMap::new();
    recs.into_iter()
        .map(|i| {
            let d = &frame.detections[i];
            let s = slug(&d.label);
            let k = counters.entry(s.clone()).or_insert(0);
            let id = NodeId::new(format!("{s}-{k}"));
            *k += 1;
            let r = d.bbox.to_array();
            let z = frame.depths[i];
            let (cx, cy) = ((r[0] + r[2]) / 2.0, (r[1] + r[3]) / 2.0);
            OracleObject {
                id,
                rect: r,
                depth: z,
                center3: [(cx - 0.5) * z * camera.0, (cy - 0.5) * z * camera.1, z],
            }
        })
        .collect()
}

fn center2(o: &OracleObject) -> (f64, f64) {
    ((o.rect[0] + o.rect[2]) / 2.0, (o.rect[1] + o.rect[3]) / 2.0)
}

fn dist3(p: [f64; 3], q: [f64; 3]) -> f64 {
    let d: [f64; 3] = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn iou(a: &OracleObject, b: &OracleObject) -> f64 {
    let iw = a.rect[2].min(b.rect[2]) - a.rect[0].max(b.rect[0]);
    let ih = a.rect[3].min(b.rect[3]) - a.rect[1].max(b.rect[1]);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let area = |r: &[f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    (inter / (area(&a.rect) + area(&b.rect) - inter)).clamp(0.0, 1.0)
}

fn boundary_gap(a: &OracleObject, b: &OracleObject) -> f64 {
    let gx = (a.rect[0].max(b.rect[0]) - a.rect[2].min(b.rect[2])).max(0.0);
    let gy = (a.rect[1].max(b.rect[1]) - a.rect[3].min(b.rect[3])).max(0.0);
    (gx * gx + gy * gy).sqrt()
}

fn overlaps(a: &OracleObject, b: &OracleObject, th: &Thresholds) -> bool {
    a.id != b.id && iou(a, b) > th.tau_iou
}

fn base_distance(o: &OracleObject, w: &WorkspaceEnvelope) -> f64 {
    dist3(o.center3, [w.base3.x, w.base3.y, w.base3.z])
}

fn reachable(o: &OracleObject, w: &WorkspaceEnvelope) -> bool {
    let d = base_distance(o, w);
    w.min_reach_m <= d && d <= w.reach_m
}

fn canonical(s: &LegoStructure) -> Vec<PlacedBrick> {
    let min_x = s.bricks().iter().map(|b| b.origin.0).min().unwrap_or(0);
    let min_y = s.bricks().iter().map(|b| b.origin.1).min().unwrap_or(0);
    let mut v: Vec<PlacedBrick> = s
        .bricks()
        .iter()
        .map(|b| PlacedBrick {
            origin: (b.origin.0 - min_x, b.origin.1 - min_y),
            ..*b
        })
        .collect();
    v.sort_by_key(|b| {
        (
            b.layer,
            b.origin.1,
            b.origin.0,
            b.spec.footprint.w(),
            b.spec.footprint.l(),
            b.spec.color,
        )
    });
    v
}

/// Everything a gold answer can depend on.
pub struct OracleScene<'a> {
    pub objects: &'a [OracleObject],
    pub thresholds: &'a Thresholds,
    pub workspace: &'a WorkspaceEnvelope,
    pub structure: Option<&'a LegoStructure>,
}

impl OracleScene<'_> {
    fn get(&self, id: &NodeId) -> Option<&OracleObject> {
        self.objects.iter().find(|o| &o.id == id)
    }

    /// Gold answer, or `None` when a reference does not resolve.
    pub fn gold(
        &self,
        category: Category,
        subject: Option<&NodeId>,
        object: Option<&NodeId>,
        target: Option<&LegoStructure>,
    ) -> Option<AnswerValue> {
        let th = self.thresholds;
        let w = self.workspace;
        let a = subject.map(|id| self.get(id));
        let b = object.map(|id| self.get(id));
        let pair = || Some((a??, b??));
        Some(match category {
            Category::Adjacency => {
                let (a, b) = pair()?;
                let v = a.id != b.id && (overlaps(a, b, th) || boundary_gap(a, b) < th.tau_adj);
                AnswerValue::Bool { value: v }
            }
            Category::Overlap => {
                let (a, b) = pair()?;
                AnswerValue::Bool {
                    value: overlaps(a, b, th),
                }
            }
            Category::Distance => {
                let (a, b) = pair()?;
                AnswerValue::Scalar {
                    value: dist3(a.center3, b.center3),
                    unit: crate::geometry::Unit::Meters,
                }
            }
            Category::Direction => {
                let (a, b) = pair()?;
                let mut v = Vec::new();
                if a.id != b.id {
                    let ((ax, ay), (bx, by)) = (center2(a), center2(b));
                    let checks = [
                        (bx - ax > th.tau_dir, RelationKind::LeftOf),
                        (ax - bx > th.tau_dir, RelationKind::RightOf),
                        (by - ay > th.tau_dir, RelationKind::Above),
                        (ay - by > th.tau_dir, RelationKind::Below),
                        (b.depth - a.depth > th.tau_depth, RelationKind::InFrontOf),
                        (a.depth - b.depth > th.tau_depth, RelationKind::Behind),
                    ];
                    v = checks
                        .into_iter()
                        .filter(|(hit, _)| *hit)
                        .map(|(_, k)| k)
                        .collect();
                    v.sort();
                }
                AnswerValue::Relations { value: v }
            }
            Category::Reachability => AnswerValue::Bool {
                value: reachable(a??, w),
            },
            Category::ArmFeasibility => {
                let a = a??;
                let da = base_distance(a, w);
                let blocked = self
                    .objects
                    .iter()
                    .any(|n| overlaps(a, n, th) && base_distance(n, w) < da);
                AnswerValue::Bool {
                    value: reachable(a, w) && !blocked,
                }
            }
            Category::SuccessJudgment => {
                let built = self.structure?;
                AnswerValue::Bool {
                    value: canonical(built) == canonical(target?),
                }
            }
        })
    }
}
