//! Rule-based entity extraction from questions and label matching against
//! detections.

use serde::{Deserialize, Serialize};

use crate::color::Color;
use crate::lego::Footprint;

use super::{DetectionRecord, PerceptionError};

/// Object nouns the fallback extractor recognizes. Each inner slice is a
/// synonym group; the first entry is the group's canonical form.
const NOUNS: &[&[&str]] = &[
    &["block", "blocks", "brick", "bricks", "cube", "cubes"],
    &["cup", "cups", "mug", "mugs"],
    &["bowl", "bowls"],
    &["plate", "plates"],
    &["box", "boxes"],
    &["bottle", "bottles"],
    &["can", "cans"],
    &["ball", "balls"],
    &["apple", "apples"],
    &["banana", "bananas"],
    &["table", "tables"],
    &["tray", "trays"],
    &["basket", "baskets"],
    &["book", "books"],
    &["phone", "phones"],
    &["spoon", "spoons"],
    &["fork", "forks"],
    &["knife", "knives"],
    &["toy", "toys"],
    &["drawer", "drawers"],
    &["shelf", "shelves"],
    &["sponge", "sponges"],
    &["towel", "towels"],
    &["marker", "markers"],
    &["pen", "pens"],
    &["lid", "lids"],
    &["jar", "jars"],
];

fn noun_group(word: &str) -> Option<&'static str> {
    NOUNS.iter().find(|g| g.contains(&word)).map(|g| g[0])
}

fn simple_color(word: &str) -> Option<Color> {
    match word {
        "red" => Some(Color::Red),
        "green" => Some(Color::Green),
        "yellow" => Some(Color::Yellow),
        "orange" => Some(Color::Orange),
        "white" => Some(Color::White),
        "black" => Some(Color::Black),
        "gray" | "grey" => Some(Color::Gray),
        _ => None,
    }
}

/// Lowercase words with `×` folded to `x` and `1 x 2` merged into `1x2`.
fn tokenize(text: &str) -> Vec<String> {
    let raw: Vec<String> = text
        .to_lowercase()
        .replace('×', "x")
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect();
    let mut out: Vec<String> = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let is_num = |w: &str| !w.is_empty() && w.chars().all(|c| c.is_ascii_digit());
        if i + 2 < raw.len() && is_num(&raw[i]) && raw[i + 1] == "x" && is_num(&raw[i + 2]) {
            out.push(format!("{}x{}", raw[i], raw[i + 2]));
            i += 3;
        } else {
            out.push(raw[i].clone());
            i += 1;
        }
    }
    out
}

fn footprint_token(word: &str) -> Option<Footprint> {
    let (w, l) = word.split_once('x')?;
    Footprint::new(w.parse().ok()?, l.parse().ok()?).ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    /// Normalized phrase, e.g. `red 1×1 block`.
    pub label: String,
    /// Canonical noun of the phrase's synonym group.
    pub noun: String,
    /// Acceptable palette colors; empty means any.
    pub colors: Vec<Color>,
    pub footprint: Option<Footprint>,
    /// 0 is the most relevant.
    pub rank: usize,
}

impl Entity {
    pub fn matches(&self, det: &DetectionRecord) -> bool {
        let parsed = LabelInfo::parse(&det.label);
        if parsed.noun.as_deref() != Some(self.noun.as_str()) {
            return false;
        }
        if self.footprint.is_some() && parsed.footprint != self.footprint {
            return false;
        }
        self.colors.is_empty() || self.colors.contains(&Color::classify(det.rgb))
    }
}

/// Noun and footprint recognized in a detection label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LabelInfo {
    pub noun: Option<String>,
    pub footprint: Option<Footprint>,
}

impl LabelInfo {
    pub fn parse(label: &str) -> Self {
        let toks = tokenize(label);
        Self {
            noun: toks
                .iter()
                .rev()
                .find_map(|w| noun_group(w))
                .map(str::to_string),
            footprint: toks.iter().find_map(|w| footprint_token(w)),
        }
    }
}

/// Entities in priority order, without duplicate labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityQueue {
    entries: Vec<Entity>,
}

impl EntityQueue {
    /// Re-ranks `entries` in the given order, dropping repeated labels.
    pub fn new(entries: Vec<Entity>) -> Self {
        let mut out: Vec<Entity> = Vec::with_capacity(entries.len());
        for e in entries {
            if !out.iter().any(|o| o.label == e.label) {
                out.push(Entity {
                    rank: out.len(),
                    ..e
                });
            }
        }
        Self { entries: out }
    }

    pub fn entries(&self) -> &[Entity] {
        &self.entries
    }

    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.label.as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rank of the most relevant entity matching `det`.
    pub fn priority_of(&self, det: &DetectionRecord) -> Option<usize> {
        self.entries.iter().find(|e| e.matches(det)).map(|e| e.rank)
    }
}

/// Deterministic extractor: every recognized noun, together with the color
/// and size words directly before it, becomes an entity, ranked by first
/// occurrence.
pub fn extract_entities_fallback(question: &str) -> Result<EntityQueue, PerceptionError> {
    if question.trim().is_empty() {
        return Err(PerceptionError::EmptyQuestion);
    }
    let toks = tokenize(question);
    let mut found = Vec::new();
    for (i, w) in toks.iter().enumerate() {
        let Some(noun) = noun_group(w) else { continue };
        let mut j = i;
        let mut footprint = None;
        let mut size_word = None;
        if j > 0 {
            if let Some(fp) = footprint_token(&toks[j - 1]) {
                footprint = Some(fp);
                size_word = Some(format!("{}×{}", fp.w(), fp.l()));
                j -= 1;
            }
        }
        let mut colors = Vec::new();
        let mut color_words = Vec::new();
        if j > 0 {
            let prev = toks[j - 1].as_str();
            if prev == "blue" {
                let shade = if j > 1 { toks[j - 2].as_str() } else { "" };
                match shade {
                    "dark" => {
                        colors.push(Color::DarkBlue);
                        color_words.extend(["dark", "blue"]);
                    }
                    "light" => {
                        colors.push(Color::LightBlue);
                        color_words.extend(["light", "blue"]);
                    }
                    _ => {
                        colors.extend([Color::DarkBlue, Color::LightBlue]);
                        color_words.push("blue");
                    }
                }
            } else if let Some(c) = simple_color(prev) {
                colors.push(c);
                color_words.push(prev);
            }
        }
        let mut parts: Vec<String> = color_words.into_iter().map(str::to_string).collect();
        parts.extend(size_word);
        parts.push(w.clone());
        found.push(Entity {
            label: parts.join(" "),
            noun: noun.to_string(),
            colors,
            footprint,
            rank: 0,
        });
    }
    Ok(EntityQueue::new(found))
}
