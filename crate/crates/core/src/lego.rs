//! The brick world: stud-grid structures, support and collision validation,
//! canonical forms, structural equality and attribute descriptions.
//!
//! Coordinates are relative to the bottom-left stud of the structure. `x` and
//! `y` are horizontal stud offsets and `layer` is the vertical level, with
//! layer 0 resting on the ground. A brick above the ground needs at least one
//! occupied cell directly beneath one of its own cells.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::color::Color;
use crate::geometry::BBox;
use crate::scene::{NodeId, Pose, SceneGraph, SizeClass};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LegoError {
    #[error("unsupported footprint {0}x{1}")]
    UnsupportedFootprint(u8, u8),
    #[error("node `{0}` is not a brick")]
    NonBrickNode(NodeId),
    #[error("node `{id}` sits midway between cells on the {axis} axis")]
    SnapAmbiguity { id: NodeId, axis: &'static str },
    #[error("node `{0}` lies off the stud grid")]
    OffGrid(NodeId),
    #[error("structure is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidStructure(Vec<Violation>),
}

/// Brick footprint `w × l` in studs. Both orientations of each supported
/// size are accepted and treated as distinct placements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u8; 2]", into = "[u8; 2]")]
pub struct Footprint {
    w: u8,
    l: u8,
}

impl Footprint {
    pub const SUPPORTED: [(u8, u8); 8] = [
        (1, 1),
        (1, 2),
        (2, 1),
        (2, 2),
        (1, 4),
        (4, 1),
        (2, 4),
        (4, 2),
    ];

    pub fn new(w: u8, l: u8) -> Result<Self, LegoError> {
        if Self::SUPPORTED.contains(&(w, l)) {
            Ok(Self { w, l })
        } else {
            Err(LegoError::UnsupportedFootprint(w, l))
        }
    }

    pub fn all() -> impl Iterator<Item = Footprint> {
        Self::SUPPORTED.into_iter().map(|(w, l)| Footprint { w, l })
    }

    pub fn w(&self) -> u8 {
        self.w
    }

    pub fn l(&self) -> u8 {
        self.l
    }
}

impl TryFrom<[u8; 2]> for Footprint {
    type Error = LegoError;
    fn try_from(a: [u8; 2]) -> Result<Self, Self::Error> {
        Footprint::new(a[0], a[1])
    }
}

impl From<Footprint> for [u8; 2] {
    fn from(f: Footprint) -> Self {
        [f.w, f.l]
    }
}

impl fmt::Display for Footprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.w, self.l)
    }
}

impl FromStr for Footprint {
    type Err = LegoError;
    /// Parses `2x4` or `2×4`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().replace('×', "x");
        let bad = || LegoError::UnsupportedFootprint(0, 0);
        let (w, l) = norm.split_once('x').ok_or_else(bad)?;
        let w = w.trim().parse().map_err(|_| bad())?;
        let l = l.trim().parse().map_err(|_| bad())?;
        Footprint::new(w, l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BrickSpec {
    pub color: Color,
    pub footprint: Footprint,
}

/// A grid cell `(x, y, layer)`.
pub type Cell = (i32, i32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlacedBrick {
    #[serde(flatten)]
    pub spec: BrickSpec,
    pub origin: (i32, i32),
    pub layer: u32,
}

impl PlacedBrick {
    pub fn new(color: Color, footprint: Footprint, x: i32, y: i32, layer: u32) -> Self {
        Self {
            spec: BrickSpec { color, footprint },
            origin: (x, y),
            layer,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let (x, y) = self.origin;
        let f = self.spec.footprint;
        (0..i32::from(f.w))
            .flat_map(move |i| (0..i32::from(f.l)).map(move |j| (x + i, y + j, self.layer)))
    }

    fn sort_key(&self) -> (u32, i32, i32, Footprint, Color) {
        (
            self.layer,
            self.origin.1,
            self.origin.0,
            self.spec.footprint,
            self.spec.color,
        )
    }
}

impl PartialOrd for PlacedBrick {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Bricks order by layer, then y, then x.
impl Ord for PlacedBrick {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl fmt::Display for PlacedBrick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} at ({}, {}) layer {}",
            self.spec.color, self.spec.footprint, self.origin.0, self.origin.1, self.layer
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Floating,
    CellCollision,
    NegativeCoordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub brick: PlacedBrick,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::Floating => "floating",
            ViolationKind::CellCollision => "collides with an earlier brick",
            ViolationKind::NegativeCoordinate => "has a negative coordinate",
        };
        write!(f, "{} {what}", self.brick)
    }
}

/// A multiset of placed bricks, kept sorted, with a derived occupancy index.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "StructureRepr", into = "StructureRepr")]
pub struct LegoStructure {
    bricks: Vec<PlacedBrick>,
    occupancy: BTreeMap<Cell, Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct StructureRepr {
    bricks: Vec<PlacedBrick>,
}

impl From<StructureRepr> for LegoStructure {
    fn from(r: StructureRepr) -> Self {
        LegoStructure::new(r.bricks)
    }
}

impl From<LegoStructure> for StructureRepr {
    fn from(s: LegoStructure) -> Self {
        StructureRepr { bricks: s.bricks }
    }
}

impl PartialEq for LegoStructure {
    fn eq(&self, other: &Self) -> bool {
        self.bricks == other.bricks
    }
}

impl Eq for LegoStructure {}

fn occupancy_of(bricks: &[PlacedBrick]) -> BTreeMap<Cell, Vec<usize>> {
    let mut occ: BTreeMap<Cell, Vec<usize>> = BTreeMap::new();
    for (i, b) in bricks.iter().enumerate() {
        for c in b.cells() {
            occ.entry(c).or_default().push(i);
        }
    }
    occ
}

impl LegoStructure {
    pub fn new(mut bricks: Vec<PlacedBrick>) -> Self {
        bricks.sort();
        let occupancy = occupancy_of(&bricks);
        Self { bricks, occupancy }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn bricks(&self) -> &[PlacedBrick] {
        &self.bricks
    }

    pub fn len(&self) -> usize {
        self.bricks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bricks.is_empty()
    }

    /// Cell → indices (into [`bricks`](Self::bricks)) of the bricks covering it.
    pub fn occupancy(&self) -> &BTreeMap<Cell, Vec<usize>> {
        &self.occupancy
    }

    pub fn with_brick(&self, brick: PlacedBrick) -> Self {
        let mut bricks = self.bricks.clone();
        bricks.push(brick);
        Self::new(bricks)
    }

    pub fn without_brick(&self, brick: &PlacedBrick) -> Self {
        let mut bricks = self.bricks.clone();
        if let Some(i) = bricks.iter().position(|b| b == brick) {
            bricks.remove(i);
        }
        Self::new(bricks)
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupancy.contains_key(&cell)
    }

    /// Whether some cell directly beneath `brick` is occupied. Ground bricks
    /// are always supported.
    pub fn supports(&self, brick: &PlacedBrick) -> bool {
        brick.layer == 0
            || brick
                .cells()
                .any(|(x, y, k)| self.is_occupied((x, y, k - 1)))
    }

    /// Bricks directly beneath `brick` that share at least one column with it.
    pub fn supporters(&self, brick: &PlacedBrick) -> Vec<PlacedBrick> {
        if brick.layer == 0 {
            return Vec::new();
        }
        let mut idx: Vec<usize> = brick
            .cells()
            .filter_map(|(x, y, k)| self.occupancy.get(&(x, y, k - 1)))
            .flatten()
            .copied()
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx.into_iter().map(|i| self.bricks[i]).collect()
    }

    /// Whether any cell of `brick` is already occupied.
    pub fn collides(&self, brick: &PlacedBrick) -> bool {
        brick.cells().any(|c| self.is_occupied(c))
    }

    /// Every violation, in brick order. A collision is charged to the later
    /// of the two bricks involved.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, b) in self.bricks.iter().enumerate() {
            if b.origin.0 < 0 || b.origin.1 < 0 {
                out.push(Violation {
                    brick: *b,
                    kind: ViolationKind::NegativeCoordinate,
                });
            }
            if !self.supports(b) {
                out.push(Violation {
                    brick: *b,
                    kind: ViolationKind::Floating,
                });
            }
            let collides = b.cells().any(|c| self.occupancy[&c].iter().any(|&j| j < i));
            if collides {
                out.push(Violation {
                    brick: *b,
                    kind: ViolationKind::CellCollision,
                });
            }
        }
        out.sort_by_key(|a| (a.brick, a.kind));
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn translate(&self, dx: i32, dy: i32) -> Self {
        Self::new(
            self.bricks
                .iter()
                .map(|b| PlacedBrick {
                    origin: (b.origin.0 + dx, b.origin.1 + dy),
                    ..*b
                })
                .collect(),
        )
    }

    /// Translate so that the minimum brick origin is `(0, 0)`.
    pub fn canonicalize(&self) -> Self {
        let min_x = self.bricks.iter().map(|b| b.origin.0).min().unwrap_or(0);
        let min_y = self.bricks.iter().map(|b| b.origin.1).min().unwrap_or(0);
        self.translate(-min_x, -min_y)
    }

    pub fn is_canonical(&self) -> bool {
        self.bricks.is_empty()
            || (self.bricks.iter().map(|b| b.origin.0).min() == Some(0)
                && self.bricks.iter().map(|b| b.origin.1).min() == Some(0))
    }

    /// Structural equality up to horizontal translation.
    pub fn equals(&self, other: &LegoStructure) -> bool {
        self.canonicalize() == other.canonicalize()
    }

    /// Bricks present in exactly one of the two canonical forms, tagged with
    /// the side they come from (`true` = `self`).
    pub fn canonical_difference(&self, other: &LegoStructure) -> Vec<(bool, PlacedBrick)> {
        let a = self.canonicalize();
        let b = other.canonicalize();
        let mut rest = b.bricks.clone();
        let mut out = Vec::new();
        for brick in &a.bricks {
            match rest.iter().position(|x| x == brick) {
                Some(i) => {
                    rest.remove(i);
                }
                None => out.push((true, *brick)),
            }
        }
        out.extend(rest.into_iter().map(|b| (false, b)));
        out
    }

    pub fn describe(&self) -> Result<StructureDescription, LegoError> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(LegoError::InvalidStructure(violations));
        }
        let mut color_counts = BTreeMap::new();
        let mut size_counts = BTreeMap::new();
        let bricks: Vec<BrickRecord> = self
            .bricks
            .iter()
            .map(|b| {
                *color_counts.entry(b.spec.color).or_insert(0) += 1;
                *size_counts.entry(b.spec.footprint.to_string()).or_insert(0) += 1;
                BrickRecord::from(b)
            })
            .collect();
        Ok(StructureDescription {
            total: bricks.len(),
            bricks,
            color_counts,
            size_counts,
        })
    }

    /// Build a structure from the brick nodes of a scene graph by snapping
    /// their poses to the stud grid. Every node must be a brick and the
    /// result must validate.
    pub fn from_graph(g: &SceneGraph, layout: &BrickLayout) -> Result<Self, LegoError> {
        let s = Self::from_brick_nodes(g, layout, false)?;
        let violations = s.validate();
        if violations.is_empty() {
            Ok(s)
        } else {
            Err(LegoError::InvalidStructure(violations))
        }
    }

    /// Like [`from_graph`](Self::from_graph) but skips non-brick nodes and
    /// does not validate.
    pub fn bricks_in_graph(g: &SceneGraph, layout: &BrickLayout) -> Result<Self, LegoError> {
        Self::from_brick_nodes(g, layout, true)
    }

    fn from_brick_nodes(
        g: &SceneGraph,
        layout: &BrickLayout,
        skip_others: bool,
    ) -> Result<Self, LegoError> {
        let mut bricks = Vec::new();
        for n in &g.nodes {
            let SizeClass::Footprint(fp) = n.size_class else {
                if skip_others {
                    continue;
                }
                return Err(LegoError::NonBrickNode(n.id.clone()));
            };
            let pose = Pose {
                bbox: n.bbox,
                depth_m: n.depth_m,
            };
            let (x, y, layer) = layout.snap(&n.id, fp, &pose)?;
            bricks.push(PlacedBrick::new(n.color, fp, x, y, layer));
        }
        Ok(Self::new(bricks))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrickRecord {
    pub color: Color,
    pub size: Footprint,
    pub position: (i32, i32),
    pub layer: u32,
}

impl From<&PlacedBrick> for BrickRecord {
    fn from(b: &PlacedBrick) -> Self {
        BrickRecord {
            color: b.spec.color,
            size: b.spec.footprint,
            position: b.origin,
            layer: b.layer,
        }
    }
}

impl fmt::Display for BrickRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}×{}, position ({},{}), layer {}",
            self.color,
            self.size.w(),
            self.size.l(),
            self.position.0,
            self.position.1,
            self.layer
        )
    }
}

/// Per-brick records (ordered by layer, y, x) and aggregate counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureDescription {
    pub bricks: Vec<BrickRecord>,
    pub color_counts: BTreeMap<Color, usize>,
    pub size_counts: BTreeMap<String, usize>,
    pub total: usize,
}

impl StructureDescription {
    pub fn to_structure(&self) -> LegoStructure {
        LegoStructure::new(
            self.bricks
                .iter()
                .map(|r| PlacedBrick::new(r.color, r.size, r.position.0, r.position.1, r.layer))
                .collect(),
        )
    }

    pub fn lines(&self) -> Vec<String> {
        self.bricks.iter().map(|r| r.to_string()).collect()
    }
}

/// How bricks appear to the camera: a front view where image x follows the
/// stud x axis, image y follows layers, and depth follows the stud y axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrickLayout {
    pub origin_x: f64,
    pub stud_width: f64,
    pub ground_y: f64,
    pub layer_height: f64,
    pub base_depth_m: f64,
    pub stud_depth_m: f64,
}

impl Default for BrickLayout {
    fn default() -> Self {
        Self {
            origin_x: 0.05,
            stud_width: 0.05,
            ground_y: 0.95,
            layer_height: 0.06,
            base_depth_m: 1.0,
            stud_depth_m: 0.05,
        }
    }
}

const SNAP_TIE_EPS: f64 = 1e-6;

impl BrickLayout {
    pub fn render(&self, brick: &PlacedBrick) -> Result<Pose, crate::geometry::GeometryError> {
        let (x, y) = brick.origin;
        let f = brick.spec.footprint;
        let x0 = self.origin_x + f64::from(x) * self.stud_width;
        let x1 = self.origin_x + f64::from(x + i32::from(f.w())) * self.stud_width;
        let y1 = self.ground_y - f64::from(brick.layer) * self.layer_height;
        let y0 = self.ground_y - f64::from(brick.layer + 1) * self.layer_height;
        let depth = self.base_depth_m + (f64::from(y) + f64::from(f.l()) / 2.0) * self.stud_depth_m;
        Ok(Pose {
            bbox: BBox::new(x0, y0, x1, y1)?,
            depth_m: depth,
        })
    }

    /// Inverse of [`render`](Self::render): recover `(x, y, layer)` for a
    /// brick of the given footprint.
    pub fn snap(
        &self,
        id: &NodeId,
        fp: Footprint,
        pose: &Pose,
    ) -> Result<(i32, i32, u32), LegoError> {
        let (cx, cy) = pose.bbox.center();
        let x = (cx - self.origin_x) / self.stud_width - f64::from(fp.w()) / 2.0;
        let y = (pose.depth_m - self.base_depth_m) / self.stud_depth_m - f64::from(fp.l()) / 2.0;
        let k = (self.ground_y - cy) / self.layer_height - 0.5;
        let snap_axis = |v: f64, axis: &'static str| -> Result<i32, LegoError> {
            let frac = v - v.floor();
            if (frac - 0.5).abs() < SNAP_TIE_EPS {
                return Err(LegoError::SnapAmbiguity {
                    id: id.clone(),
                    axis,
                });
            }
            Ok(v.round() as i32)
        };
        let x = snap_axis(x, "x")?;
        let y = snap_axis(y, "y")?;
        let k = snap_axis(k, "layer")?;
        let layer = u32::try_from(k).map_err(|_| LegoError::OffGrid(id.clone()))?;
        Ok((x, y, layer))
    }
}

/// Bounds for randomly generated structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridExtent {
    pub max_x: i32,
    pub max_y: i32,
    pub max_layer: u32,
}

impl Default for GridExtent {
    fn default() -> Self {
        Self {
            max_x: 12,
            max_y: 12,
            max_layer: 9,
        }
    }
}

/// A random valid canonical structure with up to `n_bricks` bricks.
///
/// Bricks are stacked on earlier bricks more often than not, and a stacked
/// brick frequently repeats its supporter's color so that same-color stacks
/// appear.
pub fn random_structure<R: Rng + ?Sized>(
    rng: &mut R,
    n_bricks: usize,
    extent: GridExtent,
) -> LegoStructure {
    let footprints: Vec<Footprint> = Footprint::all().collect();
    let mut s = LegoStructure::empty();
    for _ in 0..n_bricks {
        let mut placed = false;
        for _attempt in 0..64 {
            let fp = *footprints.choose(rng).expect("non-empty");
            let mut color = *Color::ALL.choose(rng).expect("non-empty");
            let stack = !s.is_empty() && rng.gen_bool(0.65);
            let (x, y, layer) = if stack {
                let base = s.bricks()[rng.gen_range(0..s.len())];
                if base.layer >= extent.max_layer {
                    continue;
                }
                if rng.gen_bool(0.4) {
                    color = base.spec.color;
                }
                let cells: Vec<Cell> = base.cells().collect();
                let (cx, cy, _) = cells[rng.gen_range(0..cells.len())];
                let ox = cx - rng.gen_range(0..i32::from(fp.w()));
                let oy = cy - rng.gen_range(0..i32::from(fp.l()));
                (ox, oy, base.layer + 1)
            } else {
                (
                    rng.gen_range(0..extent.max_x),
                    rng.gen_range(0..extent.max_y),
                    0,
                )
            };
            if x < 0
                || y < 0
                || x + i32::from(fp.w()) > extent.max_x
                || y + i32::from(fp.l()) > extent.max_y
            {
                continue;
            }
            let b = PlacedBrick::new(color, fp, x, y, layer);
            if s.collides(&b) || !s.supports(&b) {
                continue;
            }
            s = s.with_brick(b);
            placed = true;
            break;
        }
        if !placed {
            break;
        }
    }
    s.canonicalize()
}
