//! Oracle-labeled question sets over synthetic scenes.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::color::Color;
use crate::config::EngineConfig;
use crate::cot::question_for;
use crate::files::{self, FileError, QA_SCHEMA};
use crate::geometry::{CameraModel, Thresholds};
use crate::lego::{BrickLayout, LegoStructure};
use crate::perception::{load_scene, synth_scene, PerceptionError, PerceptionFrame, SynthParams};
use crate::query::{AnswerValue, Category, SpatialQuery, WorkspaceEnvelope};
use crate::scene::Dynamics;

use super::oracle::{self, OracleObject, OracleScene};

/// Where an item's scene comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SceneRef {
    Synthetic {
        seed: u64,
        n_objects: usize,
        brick_mode: bool,
    },
    /// A recorded scene file.
    File { path: PathBuf },
}

/// A resolved scene: the frame plus, for synthetic brick scenes, the
/// structure that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScene {
    pub frame: PerceptionFrame,
    pub structure: Option<LegoStructure>,
}

impl SceneRef {
    pub fn resolve(&self, dynamics: &Dynamics) -> Result<ResolvedScene, PerceptionError> {
        match self {
            SceneRef::Synthetic {
                seed,
                n_objects,
                brick_mode,
            } => {
                let s = synth_scene(
                    *seed,
                    SynthParams {
                        n_objects: *n_objects,
                        brick_mode: *brick_mode,
                    },
                    dynamics,
                );
                Ok(ResolvedScene {
                    frame: s.frame,
                    structure: s.structure,
                })
            }
            SceneRef::File { path } => Ok(ResolvedScene {
                frame: load_scene(path)?,
                structure: None,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    /// Seed the item was drawn with.
    pub seed: u64,
    pub question: String,
    pub scene: SceneRef,
    #[serde(flatten)]
    pub query: SpatialQuery,
    pub gold: AnswerValue,
}

impl QaItem {
    pub fn category(&self) -> Category {
        self.query.category
    }
}

/// Relative category weights; missing categories weigh zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryMix(pub BTreeMap<Category, f64>);

impl Default for CategoryMix {
    fn default() -> Self {
        Self(Category::ALL.iter().map(|c| (*c, 1.0)).collect())
    }
}

impl CategoryMix {
    fn sampler(&self) -> Option<(Vec<Category>, WeightedIndex<f64>)> {
        let cats: Vec<Category> = self
            .0
            .iter()
            .filter(|(_, w)| **w > 0.0)
            .map(|(c, _)| *c)
            .collect();
        let weights: Vec<f64> = cats.iter().map(|c| self.0[c]).collect();
        WeightedIndex::new(weights).ok().map(|w| (cats, w))
    }
}

/// Settings the gold answers depend on, echoed into the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_items: usize,
    pub mix: CategoryMix,
    pub thresholds: Thresholds,
    pub camera: CameraModel,
    pub layout: BrickLayout,
    pub workspace: WorkspaceEnvelope,
}

impl GeneratorConfig {
    /// An engine configuration with the settings the gold answers assume.
    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            thresholds: self.thresholds,
            camera: self.camera,
            layout: self.layout,
            workspace: self.workspace,
            ..EngineConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaDataset {
    pub generator: GeneratorConfig,
    pub items: Vec<QaItem>,
}

impl QaDataset {
    pub fn to_json(&self) -> String {
        files::encode(self, QA_SCHEMA)
    }

    pub fn from_json(text: &str) -> Result<Self, FileError> {
        files::decode(text, QA_SCHEMA)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, FileError> {
        files::load(path, QA_SCHEMA)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), FileError> {
        files::write(path, &self.to_json())
    }
}

/// Gold answer for `query` over `scene`, computed without the query engine.
pub fn oracle_gold(
    query: &SpatialQuery,
    scene: &ResolvedScene,
    cfg: &EngineConfig,
) -> Option<AnswerValue> {
    let objects = oracle::objects(&scene.frame, (cfg.camera.sx, cfg.camera.sy));
    OracleScene {
        objects: &objects,
        thresholds: &cfg.thresholds,
        workspace: &cfg.workspace,
        structure: scene.structure.as_ref(),
    }
    .gold(
        query.category,
        query.subject.as_ref(),
        query.object.as_ref(),
        query.params.target.as_ref(),
    )
}

/// A structure that differs from `s`: one brick recolored, or the topmost
/// brick removed.
fn perturbed(rng: &mut ChaCha8Rng, s: &LegoStructure) -> LegoStructure {
    let bricks = s.bricks();
    if bricks.len() > 1 && rng.gen_bool(0.5) {
        let top = *bricks.iter().max_by_key(|b| b.layer).expect("non-empty");
        return s.without_brick(&top);
    }
    let i = rng.gen_range(0..bricks.len());
    let old = bricks[i];
    let others: Vec<Color> = Color::ALL
        .iter()
        .copied()
        .filter(|c| *c != old.spec.color)
        .collect();
    let mut recolored = old;
    recolored.spec.color = *others.choose(rng).expect("palette has several colors");
    s.without_brick(&old).with_brick(recolored)
}

fn pick_pair(
    rng: &mut ChaCha8Rng,
    objs: &[OracleObject],
    prefer: impl Fn(&OracleObject, &OracleObject) -> bool,
) -> (usize, usize) {
    let pairs: Vec<(usize, usize)> = (0..objs.len())
        .flat_map(|i| {
            (0..objs.len())
                .filter(move |j| *j != i)
                .map(move |j| (i, j))
        })
        .collect();
    let positive: Vec<(usize, usize)> = pairs
        .iter()
        .copied()
        .filter(|(i, j)| prefer(&objs[*i], &objs[*j]))
        .collect();
    if !positive.is_empty() && rng.gen_bool(0.5) {
        *positive.choose(rng).expect("non-empty")
    } else {
        // A one-object scene can only ask about the object and itself.
        pairs.choose(rng).copied().unwrap_or((0, 0))
    }
}

fn rects_touch(a: &OracleObject, b: &OracleObject) -> bool {
    a.rect[0] <= b.rect[2] + 0.02
        && b.rect[0] <= a.rect[2] + 0.02
        && a.rect[1] <= b.rect[3] + 0.02
        && b.rect[1] <= a.rect[3] + 0.02
}

fn item(rng: &mut ChaCha8Rng, index: usize, category: Category, cfg: &EngineConfig) -> QaItem {
    let dynamics = cfg.dynamics();
    let seed: u64 = rng.gen();
    let brick_mode = category == Category::SuccessJudgment || rng.gen_bool(0.3);
    let n_objects = if brick_mode {
        rng.gen_range(2..=8)
    } else {
        rng.gen_range(3..=10)
    };
    let scene_ref = SceneRef::Synthetic {
        seed,
        n_objects,
        brick_mode,
    };
    let scene = scene_ref
        .resolve(&dynamics)
        .expect("synthetic scenes always resolve");
    let objs = oracle::objects(&scene.frame, (cfg.camera.sx, cfg.camera.sy));
    let query = match category {
        Category::SuccessJudgment => {
            let built = scene.structure.clone().expect("brick mode");
            let target = if rng.gen_bool(0.5) {
                built.translate(rng.gen_range(0..3), rng.gen_range(0..3))
            } else {
                perturbed(rng, &built)
            };
            SpatialQuery::success(target)
        }
        Category::Reachability | Category::ArmFeasibility => SpatialQuery::single(
            category,
            objs.choose(rng).expect("non-empty scene").id.clone(),
        ),
        _ => {
            let (i, j) = pick_pair(rng, &objs, rects_touch);
            SpatialQuery::pair(category, objs[i].id.clone(), objs[j].id.clone())
        }
    };
    let gold = oracle_gold(&query, &scene, cfg).expect("generated references resolve");
    QaItem {
        id: format!("q{index:05}"),
        seed,
        question: question_for(&query),
        scene: scene_ref,
        query,
        gold,
    }
}

/// `n_items` questions drawn from `mix`, deterministic in `seed`. An
/// all-zero mix yields no items.
pub fn generate_dataset(
    seed: u64,
    n_items: usize,
    mix: &CategoryMix,
    cfg: &EngineConfig,
) -> QaDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = match mix.sampler() {
        Some((cats, w)) => (0..n_items)
            .map(|i| {
                let c = cats[w.sample(&mut rng)];
                item(&mut rng, i, c, cfg)
            })
            .collect(),
        None => Vec::new(),
    };
    QaDataset {
        generator: GeneratorConfig {
            seed,
            n_items: items.len(),
            mix: mix.clone(),
            thresholds: cfg.thresholds,
            camera: cfg.camera,
            layout: cfg.layout,
            workspace: cfg.workspace,
        },
        items,
    }
}

/// Ids of items whose stored gold differs from a fresh oracle run under the
/// dataset's own generator settings.
pub fn recheck_gold(ds: &QaDataset) -> Vec<String> {
    let cfg = &ds.generator.engine();
    let dynamics = cfg.dynamics();
    ds.items
        .iter()
        .filter(|it| {
            let again = it
                .scene
                .resolve(&dynamics)
                .ok()
                .and_then(|s| oracle_gold(&it.query, &s, cfg));
            again.as_ref() != Some(&it.gold)
        })
        .map(|it| it.id.clone())
        .collect()
}
