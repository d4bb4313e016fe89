//! Assembly planning: order a target structure into placement commands that
//! are valid after every prefix, replay plans, and read and write the
//! command grammar
//!
//! ```text
//! place the <color> <w>x<l> block at position (<x>, <y>) in layer <k>
//! ```
//!
//! where `k` is the 0-based layer. The parser also accepts `×` for the size
//! separator, `brick` for `block`, and ordinal layers such as
//! `in the second layer` (layer 1).

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::color::Color;
use crate::lego::{BrickSpec, Footprint, LegoStructure, PlacedBrick, Violation, ViolationKind};
use crate::scene::Action;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("command {index} violates the structure: {violation}")]
    ReplayViolation { index: usize, violation: Violation },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("column {column}: expected {expected}, found {found}")]
pub struct GrammarError {
    /// 1-based character column.
    pub column: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlacementCommand {
    pub spec: BrickSpec,
    pub position: (u32, u32),
    pub layer: u32,
}

impl PlacementCommand {
    pub fn new(color: Color, footprint: Footprint, x: u32, y: u32, layer: u32) -> Self {
        Self {
            spec: BrickSpec { color, footprint },
            position: (x, y),
            layer,
        }
    }

    pub fn to_brick(&self) -> PlacedBrick {
        PlacedBrick {
            spec: self.spec,
            origin: (self.position.0 as i32, self.position.1 as i32),
            layer: self.layer,
        }
    }
}

impl fmt::Display for PlacementCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_command(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyPlan {
    pub commands: Vec<PlacementCommand>,
    /// SHA-256 of the canonical target's JSON encoding, hex.
    pub target_hash: String,
}

pub fn structure_hash(s: &LegoStructure) -> String {
    let json = serde_json::to_vec(&s.canonicalize()).expect("structures always serialize");
    hex::encode(Sha256::digest(json))
}

/// Commands for every brick of a non-negative structure, ordered by layer,
/// then y, then x. No validation.
pub fn order_commands(target: &LegoStructure) -> Result<Vec<PlacementCommand>, PlannerError> {
    target
        .bricks()
        .iter()
        .map(|b| {
            let (x, y) = b.origin;
            if x < 0 || y < 0 {
                return Err(PlannerError::InvalidTarget(format!(
                    "{b} has a negative coordinate"
                )));
            }
            Ok(PlacementCommand {
                spec: b.spec,
                position: (x as u32, y as u32),
                layer: b.layer,
            })
        })
        .collect()
}

/// A bottom-up plan for a valid canonical target.
pub fn plan(target: &LegoStructure) -> Result<AssemblyPlan, PlannerError> {
    if !target.is_canonical() {
        return Err(PlannerError::InvalidTarget(
            "target is not in canonical form".into(),
        ));
    }
    let violations = target.validate();
    if let Some(v) = violations.first() {
        return Err(PlannerError::InvalidTarget(v.to_string()));
    }
    let plan = AssemblyPlan {
        commands: order_commands(target)?,
        target_hash: structure_hash(target),
    };
    // Bottom-up order is always prefix-valid under the single-cell support
    // rule; this only fires if that rule changes.
    match replay(&plan) {
        Ok(built) if built == *target => Ok(plan),
        Ok(_) => Err(PlannerError::InvalidTarget(
            "replay does not reproduce the target".into(),
        )),
        Err(e) => Err(PlannerError::InvalidTarget(format!(
            "no linear order found: {e}"
        ))),
    }
}

/// Fold commands from the empty structure, stopping at the first command
/// that collides or floats.
pub fn replay(plan: &AssemblyPlan) -> Result<LegoStructure, PlannerError> {
    let mut s = LegoStructure::empty();
    for (index, c) in plan.commands.iter().enumerate() {
        let brick = c.to_brick();
        let kind = if s.collides(&brick) {
            Some(ViolationKind::CellCollision)
        } else if !s.supports(&brick) {
            Some(ViolationKind::Floating)
        } else {
            None
        };
        if let Some(kind) = kind {
            return Err(PlannerError::ReplayViolation {
                index,
                violation: Violation { brick, kind },
            });
        }
        s = s.with_brick(brick);
    }
    Ok(s)
}

pub fn to_actions(plan: &AssemblyPlan) -> Vec<Action> {
    plan.commands
        .iter()
        .map(|c| Action::PlaceBrick { command: *c })
        .collect()
}

pub fn serialize_command(c: &PlacementCommand) -> String {
    format!(
        "place the {} {}x{} block at position ({}, {}) in layer {}",
        c.spec.color.name(),
        c.spec.footprint.w(),
        c.spec.footprint.l(),
        c.position.0,
        c.position.1,
        c.layer
    )
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    column: usize,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Punct(c) => write!(f, "`{c}`"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Token>, GrammarError> {
    let mut out = Vec::new();
    let mut chars = text.chars().enumerate().peekable();
    while let Some((i, c)) = chars.next() {
        let column = i + 1;
        if c.is_whitespace() {
            continue;
        }
        if c.is_alphanumeric() || c == '×' {
            let mut w = String::new();
            w.push(c);
            while let Some(&(_, d)) = chars.peek() {
                if d.is_alphanumeric() || d == '×' {
                    w.push(d);
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Token {
                tok: Tok::Word(w.to_lowercase().replace('×', "x")),
                column,
            });
        } else if matches!(c, '(' | ')' | ',' | '.') {
            out.push(Token {
                tok: Tok::Punct(c),
                column,
            });
        } else {
            return Err(GrammarError {
                column,
                expected: "a word or one of `( ) , .`".into(),
                found: format!("`{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end_column: usize,
}

const ORDINALS: [&str; 10] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
];

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn column(&self) -> usize {
        self.peek().map_or(self.end_column, |t| t.column)
    }

    fn error(&self, expected: &str) -> GrammarError {
        GrammarError {
            column: self.column(),
            expected: expected.to_string(),
            found: self
                .peek()
                .map_or_else(|| "end of input".to_string(), |t| t.tok.to_string()),
        }
    }

    fn word(&mut self, expected: &str) -> Result<String, GrammarError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w), ..
            }) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.error(expected)),
        }
    }

    fn keyword(&mut self, options: &[&str]) -> Result<(), GrammarError> {
        let expected = options
            .iter()
            .map(|o| format!("`{o}`"))
            .collect::<Vec<_>>()
            .join(" or ");
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w), ..
            }) if options.contains(&w.as_str()) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(&expected)),
        }
    }

    fn punct(&mut self, c: char) -> Result<(), GrammarError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Punct(p), ..
            }) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(&format!("`{c}`"))),
        }
    }

    fn number(&mut self) -> Result<u32, GrammarError> {
        let err = self.error("a non-negative integer");
        let w = self.word("a non-negative integer")?;
        w.parse().map_err(|_| err)
    }

    fn color(&mut self) -> Result<Color, GrammarError> {
        let err = self.error("a palette color");
        let w = self.word("a palette color")?;
        let name = if w == "dark" || w == "light" {
            let second = self.word("`blue`")?;
            format!("{w} {second}")
        } else {
            w
        };
        name.parse().map_err(|_| err)
    }

    fn footprint(&mut self) -> Result<Footprint, GrammarError> {
        let err = self.error("a supported size such as `1x1` or `2x4`");
        let first = self.word("a brick size")?;
        let (w, l) = if let Some((w, l)) = first.split_once('x') {
            (w.to_string(), l.to_string())
        } else {
            self.keyword(&["x"])?;
            (first, self.word("a brick size")?)
        };
        let w: u8 = w.parse().map_err(|_| err.clone())?;
        let l: u8 = l.parse().map_err(|_| err.clone())?;
        Footprint::new(w, l).map_err(|_| err)
    }

    fn layer(&mut self) -> Result<u32, GrammarError> {
        self.keyword(&["in"])?;
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w), ..
            }) if w == "layer" => {
                self.pos += 1;
                self.number()
            }
            Some(Token {
                tok: Tok::Word(w), ..
            }) if w == "the" => {
                self.pos += 1;
                let err = self.error("an ordinal such as `second` or `2nd`");
                let ord = self.word("an ordinal")?;
                let k = ordinal_value(&ord).ok_or(err)?;
                self.keyword(&["layer"])?;
                Ok(k - 1)
            }
            _ => Err(self.error("`layer` or `the`")),
        }
    }
}

fn ordinal_value(w: &str) -> Option<u32> {
    if let Some(i) = ORDINALS.iter().position(|o| *o == w) {
        return Some(i as u32 + 1);
    }
    let digits: String = w.chars().take_while(char::is_ascii_digit).collect();
    let suffix = &w[digits.len()..];
    let n: u32 = digits.parse().ok()?;
    let expected = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    (n >= 1 && suffix == expected).then_some(n)
}

pub fn parse_command(text: &str) -> Result<PlacementCommand, GrammarError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        end_column: text.chars().count() + 1,
    };
    p.keyword(&["place"])?;
    p.keyword(&["the"])?;
    let color = p.color()?;
    let footprint = p.footprint()?;
    p.keyword(&["block", "brick"])?;
    p.keyword(&["at"])?;
    p.keyword(&["position"])?;
    p.punct('(')?;
    let x = p.number()?;
    p.punct(',')?;
    let y = p.number()?;
    p.punct(')')?;
    let layer = p.layer()?;
    if matches!(
        p.peek(),
        Some(Token {
            tok: Tok::Punct('.'),
            ..
        })
    ) {
        p.pos += 1;
    }
    if p.peek().is_some() {
        return Err(p.error("end of input"));
    }
    Ok(PlacementCommand::new(color, footprint, x, y, layer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lego::{random_structure, GridExtent};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fp(w: u8, l: u8) -> Footprint {
        Footprint::new(w, l).unwrap()
    }

    #[test]
    fn serializes_canonical_grammar() {
        let c = PlacementCommand::new(Color::Red, fp(1, 1), 2, 0, 1);
        assert_eq!(
            serialize_command(&c),
            "place the red 1x1 block at position (2, 0) in layer 1"
        );
        let c = PlacementCommand::new(Color::DarkBlue, fp(2, 4), 0, 3, 0);
        assert_eq!(parse_command(&serialize_command(&c)).unwrap(), c);
    }

    #[test]
    fn parses_ordinal_layer() {
        let c = parse_command("place the red 1×1 block at position (2, 0) in the second layer")
            .unwrap();
        assert_eq!(c, PlacementCommand::new(Color::Red, fp(1, 1), 2, 0, 1));
        let c =
            parse_command("Place the light blue 2 x 2 brick at position (0,4) in the 3rd layer.")
                .unwrap();
        assert_eq!(
            c,
            PlacementCommand::new(Color::LightBlue, fp(2, 2), 0, 4, 2)
        );
        assert!(
            parse_command("place the red 1x1 block at position (2, 0) in the 2th layer").is_err()
        );
    }

    #[test]
    fn grammar_errors_carry_columns() {
        let e =
            parse_command("place the purple 1x1 block at position (2, 0) in layer 1").unwrap_err();
        assert_eq!(e.column, 11);
        let e = parse_command("place the red 3x3 block at position (2, 0) in layer 1").unwrap_err();
        assert_eq!(e.column, 15);
        let e = parse_command("place the red 1x1 block at position (2 0) in layer 1").unwrap_err();
        assert_eq!((e.column, e.expected.as_str()), (40, "`,`"));
        let e = parse_command("place the red 1x1 block at position (2, 0)").unwrap_err();
        assert_eq!(e.found, "end of input");
        let e =
            parse_command("place the red 1x1 block at position (2, 0) in layer 1 now").unwrap_err();
        assert_eq!(e.expected, "end of input");
        assert!(parse_command("place the red 1x1 block at position (-2, 0) in layer 1").is_err());
    }

    #[test]
    fn empty_plan_and_replay() {
        let p = plan(&LegoStructure::empty()).unwrap();
        assert!(p.commands.is_empty());
        assert!(replay(&p).unwrap().is_empty());
        assert!(to_actions(&p).is_empty());
    }

    #[test]
    fn two_brick_tower_has_one_valid_order() {
        let lower = PlacementCommand::new(Color::Red, fp(1, 1), 0, 0, 0);
        let upper = PlacementCommand::new(Color::Red, fp(1, 1), 0, 0, 1);
        let target = LegoStructure::new(vec![lower.to_brick(), upper.to_brick()]);
        // Enumerate both orders; only bottom-up replays.
        let valid: Vec<Vec<PlacementCommand>> = [vec![lower, upper], vec![upper, lower]]
            .into_iter()
            .filter(|cmds| {
                replay(&AssemblyPlan {
                    commands: cmds.clone(),
                    target_hash: String::new(),
                })
                .is_ok()
            })
            .collect();
        assert_eq!(valid, vec![vec![lower, upper]]);
        assert_eq!(plan(&target).unwrap().commands, vec![lower, upper]);
    }

    #[test]
    fn replay_reports_first_violation() {
        let p = AssemblyPlan {
            commands: vec![PlacementCommand::new(Color::Red, fp(1, 1), 0, 0, 1)],
            target_hash: String::new(),
        };
        match replay(&p) {
            Err(PlannerError::ReplayViolation {
                index: 0,
                violation,
            }) => assert_eq!(violation.kind, ViolationKind::Floating),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_targets_rejected() {
        let floating = LegoStructure::new(vec![PlacedBrick::new(Color::Red, fp(1, 1), 0, 0, 1)]);
        assert!(matches!(
            plan(&floating),
            Err(PlannerError::InvalidTarget(_))
        ));
        let shifted = LegoStructure::new(vec![PlacedBrick::new(Color::Red, fp(1, 1), 2, 0, 0)]);
        assert!(matches!(
            plan(&shifted),
            Err(PlannerError::InvalidTarget(_))
        ));
    }

    #[test]
    fn single_command_action() {
        let target = LegoStructure::new(vec![PlacedBrick::new(Color::Red, fp(2, 2), 0, 0, 0)]);
        let p = plan(&target).unwrap();
        assert_eq!(
            to_actions(&p),
            vec![Action::PlaceBrick {
                command: p.commands[0]
            }]
        );
    }

    proptest! {
        #[test]
        fn plans_round_trip(seed in any::<u64>(), n in 0usize..16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let target = random_structure(&mut rng, n, GridExtent::default());
            let p = plan(&target).unwrap();
            prop_assert_eq!(p.commands.len(), target.len());
            prop_assert!(replay(&p).unwrap().equals(&target));
            for k in 0..p.commands.len() {
                let prefix = AssemblyPlan { commands: p.commands[..k].to_vec(), target_hash: String::new() };
                prop_assert!(replay(&prefix).unwrap().is_valid());
            }
            for c in &p.commands {
                prop_assert_eq!(parse_command(&serialize_command(c)).unwrap(), *c);
            }
            prop_assert_eq!(plan(&target).unwrap(), p);
        }
    }
}
