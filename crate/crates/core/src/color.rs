//! The brick color palette and nearest-anchor classification.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A palette entry. Anchors are fixed RGB triples; classification snaps any
/// 24-bit color to the nearest anchor in RGB Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Green,
    DarkBlue,
    LightBlue,
    Yellow,
    Orange,
    White,
    Black,
    Gray,
}

impl Color {
    pub const ALL: [Color; 9] = [
        Color::Red,
        Color::Green,
        Color::DarkBlue,
        Color::LightBlue,
        Color::Yellow,
        Color::Orange,
        Color::White,
        Color::Black,
        Color::Gray,
    ];

    pub const fn anchor(self) -> [u8; 3] {
        match self {
            Color::Red => [200, 30, 30],
            Color::Green => [40, 140, 60],
            Color::DarkBlue => [20, 40, 120],
            Color::LightBlue => [110, 170, 230],
            Color::Yellow => [240, 200, 40],
            Color::Orange => [245, 130, 30],
            Color::White => [245, 245, 245],
            Color::Black => [25, 25, 25],
            Color::Gray => [140, 140, 140],
        }
    }

    /// Nearest anchor; ties resolve to the earlier palette entry.
    pub fn classify(rgb: [u8; 3]) -> Color {
        let mut best = Color::ALL[0];
        let mut best_d = u32::MAX;
        for c in Color::ALL {
            let a = c.anchor();
            let d: u32 = (0..3)
                .map(|i| {
                    let diff = i32::from(rgb[i]) - i32::from(a[i]);
                    (diff * diff) as u32
                })
                .sum();
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        best
    }

    /// Human-readable name used in commands and descriptions ("dark blue").
    pub const fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::DarkBlue => "dark blue",
            Color::LightBlue => "light blue",
            Color::Yellow => "yellow",
            Color::Orange => "orange",
            Color::White => "white",
            Color::Black => "black",
            Color::Gray => "gray",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown color `{0}`")]
pub struct UnknownColor(pub String);

impl FromStr for Color {
    type Err = UnknownColor;

    /// Accepts the display name, the snake_case name, and "grey".
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', " ");
        let c = match norm.as_str() {
            "red" => Color::Red,
            "green" => Color::Green,
            "dark blue" => Color::DarkBlue,
            "light blue" => Color::LightBlue,
            "yellow" => Color::Yellow,
            "orange" => Color::Orange,
            "white" => Color::White,
            "black" => Color::Black,
            "gray" | "grey" => Color::Gray,
            _ => return Err(UnknownColor(s.to_string())),
        };
        Ok(c)
    }
}
