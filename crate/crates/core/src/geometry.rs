//! Spatial relations and metrics derived from normalized image boxes plus
//! per-object depth.
//!
//! Image coordinates are normalized to `[0, 1]` with the origin at the top
//! left, so a smaller `y` is higher in the image. Directional relations are
//! decided on box centers; depth relations on the per-object depth in meters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scene::{ObjectNode, RelationEdge};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid box [{0}, {1}, {2}, {3}]: need 0 <= min < max <= 1 on both axes")]
    InvalidBox(f64, f64, f64, f64),
    #[error("invalid depth {0}: must be a positive finite number of meters")]
    InvalidDepth(f64),
}

/// Axis-aligned box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let ok = |lo: f64, hi: f64| {
            lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= 1.0
        };
        if ok(x_min, x_max) && ok(y_min, y_max) {
            Ok(Self {
                x_min,
                y_min,
                x_max,
                y_max,
            })
        } else {
            Err(GeometryError::InvalidBox(x_min, y_min, x_max, y_max))
        }
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Euclidean distance between the two boxes' boundaries; zero when they
    /// touch or intersect.
    pub fn gap(&self, other: &BBox) -> f64 {
        let gx = (self.x_min.max(other.x_min) - self.x_max.min(other.x_max)).max(0.0);
        let gy = (self.y_min.max(other.y_min) - self.y_max.min(other.y_max)).max(0.0);
        (gx * gx + gy * gy).sqrt()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeometryError;
    fn try_from(a: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(a[0], a[1], a[2], a[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

/// A point in the camera frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// Normalized pinhole lift with per-axis scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub sx: f64,
    pub sy: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self { sx: 1.0, sy: 1.0 }
    }
}

/// Lift a box center and depth into the camera frame:
/// `((cx - 0.5) * depth * sx, (cy - 0.5) * depth * sy, depth)`.
pub fn lift_to_3d(bbox: &BBox, depth_m: f64, cam: &CameraModel) -> Result<Point3, GeometryError> {
    if !(depth_m.is_finite() && depth_m > 0.0) {
        return Err(GeometryError::InvalidDepth(depth_m));
    }
    let (cx, cy) = bbox.center();
    Ok(Point3::new(
        (cx - 0.5) * depth_m * cam.sx,
        (cy - 0.5) * depth_m * cam.sy,
        depth_m,
    ))
}

pub fn distance(a: &ObjectNode, b: &ObjectNode) -> f64 {
    a.center3.distance(&b.center3)
}

pub fn overlap_iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Decision thresholds for relation derivation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Minimum center offset for left/right and above/below (normalized units).
    pub tau_dir: f64,
    /// Minimum depth gap for in-front/behind, and maximum gap for on-top-of (meters).
    pub tau_depth: f64,
    /// Distance below which two objects are near (meters).
    pub tau_near: f64,
    /// IoU above which two boxes overlap.
    pub tau_iou: f64,
    /// Boundary gap below which non-overlapping boxes are adjacent (normalized units).
    pub tau_adj: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tau_dir: 0.05,
            tau_depth: 0.10,
            tau_near: 0.30,
            tau_iou: 0.10,
            tau_adj: 0.02,
        }
    }
}

/// Units of an edge magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Normalized,
    Meters,
    Ratio,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Normalized => "norm",
            Unit::Meters => "m",
            Unit::Ratio => "ratio",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    LeftOf,
    RightOf,
    Above,
    Below,
    InFrontOf,
    Behind,
    Near,
    Overlapping,
    AdjacentTo,
    OnTopOf,
}

impl RelationKind {
    pub const ALL: [RelationKind; 10] = [
        RelationKind::LeftOf,
        RelationKind::RightOf,
        RelationKind::Above,
        RelationKind::Below,
        RelationKind::InFrontOf,
        RelationKind::Behind,
        RelationKind::Near,
        RelationKind::Overlapping,
        RelationKind::AdjacentTo,
        RelationKind::OnTopOf,
    ];

    pub const DIRECTIONAL: [RelationKind; 6] = [
        RelationKind::LeftOf,
        RelationKind::RightOf,
        RelationKind::Above,
        RelationKind::Below,
        RelationKind::InFrontOf,
        RelationKind::Behind,
    ];

    /// The fixed dual of a directional kind: `K(a, b)` holds iff `dual(K)(b, a)` does.
    pub fn dual(self) -> Option<RelationKind> {
        use RelationKind::*;
        match self {
            LeftOf => Some(RightOf),
            RightOf => Some(LeftOf),
            Above => Some(Below),
            Below => Some(Above),
            InFrontOf => Some(Behind),
            Behind => Some(InFrontOf),
            _ => None,
        }
    }

    pub fn is_symmetric(self) -> bool {
        matches!(
            self,
            RelationKind::Near | RelationKind::Overlapping | RelationKind::AdjacentTo
        )
    }

    pub fn is_directional(self) -> bool {
        self.dual().is_some()
    }

    pub fn unit(self) -> Unit {
        use RelationKind::*;
        match self {
            LeftOf | RightOf | Above | Below | AdjacentTo | OnTopOf => Unit::Normalized,
            InFrontOf | Behind | Near => Unit::Meters,
            Overlapping => Unit::Ratio,
        }
    }

    pub fn as_str(self) -> &'static str {
        use RelationKind::*;
        match self {
            LeftOf => "left_of",
            RightOf => "right_of",
            Above => "above",
            Below => "below",
            InFrontOf => "in_front_of",
            Behind => "behind",
            Near => "near",
            Overlapping => "overlapping",
            AdjacentTo => "adjacent_to",
            OnTopOf => "on_top_of",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown relation `{s}`"))
    }
}

fn edge(a: &ObjectNode, b: &ObjectNode, kind: RelationKind, magnitude: f64) -> RelationEdge {
    RelationEdge {
        subject: a.id.clone(),
        object: b.id.clone(),
        kind,
        magnitude,
        confidence: a.confidence.min(b.confidence),
    }
}

/// All relations between `a` and `b`, in both directions.
pub fn derive_pairwise(a: &ObjectNode, b: &ObjectNode, th: &Thresholds) -> Vec<RelationEdge> {
    use RelationKind::*;
    let mut out = Vec::new();
    let (ax, ay) = a.bbox.center();
    let (bx, by) = b.bbox.center();

    let dx = bx - ax;
    if dx > th.tau_dir {
        out.push(edge(a, b, LeftOf, dx));
        out.push(edge(b, a, RightOf, dx));
    } else if -dx > th.tau_dir {
        out.push(edge(b, a, LeftOf, -dx));
        out.push(edge(a, b, RightOf, -dx));
    }

    // Image y grows downward: a positive dy puts `a` above `b`.
    let dy = by - ay;
    let a_above = dy > th.tau_dir;
    let b_above = -dy > th.tau_dir;
    if a_above {
        out.push(edge(a, b, Above, dy));
        out.push(edge(b, a, Below, dy));
    } else if b_above {
        out.push(edge(b, a, Above, -dy));
        out.push(edge(a, b, Below, -dy));
    }

    let dz = b.depth_m - a.depth_m;
    if dz > th.tau_depth {
        out.push(edge(a, b, InFrontOf, dz));
        out.push(edge(b, a, Behind, dz));
    } else if -dz > th.tau_depth {
        out.push(edge(b, a, InFrontOf, -dz));
        out.push(edge(a, b, Behind, -dz));
    }

    let dist = distance(a, b);
    if dist < th.tau_near {
        out.push(edge(a, b, Near, dist));
        out.push(edge(b, a, Near, dist));
    }

    let iou = overlap_iou(&a.bbox, &b.bbox);
    let overlapping = iou > th.tau_iou;
    if overlapping {
        out.push(edge(a, b, Overlapping, iou));
        out.push(edge(b, a, Overlapping, iou));
    }

    let gap = a.bbox.gap(&b.bbox);
    let adjacent = !overlapping && gap < th.tau_adj;
    if adjacent {
        out.push(edge(a, b, AdjacentTo, gap));
        out.push(edge(b, a, AdjacentTo, gap));
    }

    if (adjacent || overlapping) && dz.abs() <= th.tau_depth {
        if a_above {
            out.push(edge(a, b, OnTopOf, dy));
        } else if b_above {
            out.push(edge(b, a, OnTopOf, -dy));
        }
    }
    out
}

/// Union of pairwise derivations over every pair, ordered by
/// (subject id, object id, kind).
pub fn derive_all(nodes: &[ObjectNode], th: &Thresholds) -> Vec<RelationEdge> {
    let mut out = Vec::new();
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            out.extend(derive_pairwise(a, b, th));
        }
    }
    out.sort_by_key(|x| x.key());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::Color;
    use crate::scene::{NodeId, Pose, SizeClass};

    fn node(id: &str, center: (f64, f64), half: f64, depth: f64) -> ObjectNode {
        let bbox = BBox::new(
            center.0 - half,
            center.1 - half,
            center.0 + half,
            center.1 + half,
        )
        .unwrap();
        ObjectNode::new(
            NodeId::new(id),
            "block",
            Color::Red,
            Pose {
                bbox,
                depth_m: depth,
            },
            SizeClass::Small,
            &CameraModel::default(),
        )
        .unwrap()
    }

    fn kinds(edges: &[RelationEdge], s: &str, o: &str) -> Vec<RelationKind> {
        edges
            .iter()
            .filter(|e| e.subject.as_str() == s && e.object.as_str() == o)
            .map(|e| e.kind)
            .collect()
    }

    #[test]
    fn lift_examples() {
        let cam = CameraModel::default();
        let centered = BBox::new(0.4, 0.4, 0.6, 0.6).unwrap();
        assert_eq!(
            lift_to_3d(&centered, 1.0, &cam).unwrap(),
            Point3::new(0.0, 0.0, 1.0)
        );
        assert_eq!(
            lift_to_3d(&centered, 2.0, &cam).unwrap(),
            Point3::new(0.0, 0.0, 2.0)
        );
        // (0.75 - 0.5) * 2.0 * 1.0 = 0.5
        let right = BBox::new(0.7, 0.4, 0.8, 0.6).unwrap();
        let p = lift_to_3d(&right, 2.0, &cam).unwrap();
        assert!((p.x - 0.5).abs() < 1e-12);
        assert_eq!(
            lift_to_3d(&centered, 0.0, &cam),
            Err(GeometryError::InvalidDepth(0.0))
        );
        assert!(lift_to_3d(&centered, -1.0, &cam).is_err());
    }

    #[test]
    fn bbox_rejects_degenerate() {
        assert!(BBox::new(0.5, 0.1, 0.5, 0.2).is_err());
        assert!(BBox::new(0.1, 0.1, 1.2, 0.2).is_err());
        assert!(BBox::new(-0.1, 0.1, 0.2, 0.2).is_err());
        assert!(BBox::new(0.0, 0.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn distance_examples() {
        let a = node("a", (0.5, 0.5), 0.05, 1.0);
        let b = node("b", (0.5, 0.5), 0.05, 2.0);
        assert_eq!(distance(&a, &a), 0.0);
        assert!((distance(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iou_examples() {
        let b = BBox::new(0.1, 0.1, 0.3, 0.3).unwrap();
        let far = BBox::new(0.5, 0.5, 0.7, 0.7).unwrap();
        assert_eq!(overlap_iou(&b, &b), 1.0);
        assert_eq!(overlap_iou(&b, &far), 0.0);
        // Half-shifted copy: intersection 0.5, union 1.5.
        let unit = BBox::new(0.0, 0.0, 0.5, 0.5).unwrap();
        let shifted = BBox::new(0.25, 0.0, 0.75, 0.5).unwrap();
        assert!((overlap_iou(&unit, &shifted) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_matches_area_sampling() {
        // Grid sampling of the half-shifted pair over the union's bounding box.
        let a = BBox::new(0.0, 0.0, 0.5, 0.5).unwrap();
        let b = BBox::new(0.25, 0.0, 0.75, 0.5).unwrap();
        let inside = |bx: &BBox, x: f64, y: f64| {
            x >= bx.x_min() && x < bx.x_max() && y >= bx.y_min() && y < bx.y_max()
        };
        let n = 2000;
        let (mut inter, mut union) = (0u64, 0u64);
        for i in 0..n {
            for j in 0..n {
                let x = (i as f64 + 0.5) / n as f64;
                let y = (j as f64 + 0.5) / n as f64;
                let (ia, ib) = (inside(&a, x, y), inside(&b, x, y));
                if ia && ib {
                    inter += 1;
                }
                if ia || ib {
                    union += 1;
                }
            }
        }
        let sampled = inter as f64 / union as f64;
        assert!((overlap_iou(&a, &b) - sampled).abs() < 1e-3);
    }

    #[test]
    fn horizontal_pair_gets_left_and_right() {
        // dx = 0.6 > 0.05; dy = 0; depth gap 0; distance 0.6 >= 0.3; disjoint boxes.
        let a = node("a", (0.2, 0.5), 0.05, 1.0);
        let b = node("b", (0.8, 0.5), 0.05, 1.0);
        let edges = derive_pairwise(&a, &b, &Thresholds::default());
        assert_eq!(kinds(&edges, "a", "b"), vec![RelationKind::LeftOf]);
        assert_eq!(kinds(&edges, "b", "a"), vec![RelationKind::RightOf]);
        assert_eq!(edges.len(), 2);
    }

    #[test]
    fn identical_nodes_only_overlap_and_near() {
        let a = node("a", (0.5, 0.5), 0.1, 1.0);
        let mut b = a.clone();
        b.id = NodeId::new("b");
        let edges = derive_pairwise(&a, &b, &Thresholds::default());
        assert!(edges.iter().all(|e| !e.kind.is_directional()));
        let ov: Vec<_> = edges
            .iter()
            .filter(|e| e.kind == RelationKind::Overlapping)
            .collect();
        assert_eq!(ov.len(), 2);
        assert!(ov.iter().all(|e| e.magnitude == 1.0));
    }

    #[test]
    fn depth_gap_orders_front_and_back() {
        let a = node("a", (0.5, 0.5), 0.05, 0.5);
        let b = node("b", (0.5, 0.5), 0.05, 2.0);
        let edges = derive_pairwise(&a, &b, &Thresholds::default());
        assert!(kinds(&edges, "a", "b").contains(&RelationKind::InFrontOf));
        assert!(kinds(&edges, "b", "a").contains(&RelationKind::Behind));
        assert!(!kinds(&edges, "a", "b").contains(&RelationKind::OnTopOf));
    }

    #[test]
    fn stacked_boxes_are_on_top() {
        // a sits directly above b, touching, same depth.
        let a = ObjectNode::new(
            NodeId::new("a"),
            "block",
            Color::Red,
            Pose {
                bbox: BBox::new(0.4, 0.3, 0.6, 0.5).unwrap(),
                depth_m: 1.0,
            },
            SizeClass::Small,
            &CameraModel::default(),
        )
        .unwrap();
        let b = ObjectNode::new(
            NodeId::new("b"),
            "block",
            Color::Red,
            Pose {
                bbox: BBox::new(0.4, 0.5, 0.6, 0.7).unwrap(),
                depth_m: 1.0,
            },
            SizeClass::Small,
            &CameraModel::default(),
        )
        .unwrap();
        let edges = derive_pairwise(&a, &b, &Thresholds::default());
        let ab = kinds(&edges, "a", "b");
        assert!(ab.contains(&RelationKind::Above));
        assert!(ab.contains(&RelationKind::AdjacentTo));
        assert!(ab.contains(&RelationKind::OnTopOf));
        assert!(!kinds(&edges, "b", "a").contains(&RelationKind::OnTopOf));
    }

    #[test]
    fn derive_all_trivial_sizes() {
        let th = Thresholds::default();
        assert!(derive_all(&[], &th).is_empty());
        assert!(derive_all(&[node("a", (0.5, 0.5), 0.1, 1.0)], &th).is_empty());
    }

    #[test]
    fn relation_names_round_trip() {
        for k in RelationKind::ALL {
            assert_eq!(k.as_str().parse::<RelationKind>().unwrap(), k);
            if let Some(d) = k.dual() {
                assert_eq!(d.dual(), Some(k));
            }
        }
    }
}
