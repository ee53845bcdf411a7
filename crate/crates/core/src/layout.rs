//! QWERTY key geometry, start keys, thumb assignment and the tap-zone map.
//!
//! Key positions are in key units (one key width) with `q` at the origin
//! and Y growing downward.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recognizer::CellId;
use crate::types::{KeyId, Thumb};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("letter {0:?} appears {1} times")]
    LetterCount(char, usize),
    #[error("rows and row offsets differ in length")]
    OffsetMismatch,
    #[error("start key {0} is not a letter")]
    StartNotLetter(KeyId),
    #[error("tap map assigns the center cell")]
    CenterMapped,
    #[error("tap map assigns a letter ({0}) to a cell")]
    LetterInTapMap(KeyId),
    #[error("thumb map does not cover {0}")]
    ThumbMapIncomplete(KeyId),
    #[error("{0} has no position on the letter grid")]
    NotALetter(KeyId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapZone {
    pub cell: CellId,
    pub key: KeyId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutSpec", into = "LayoutSpec")]
pub struct Layout {
    rows: Vec<String>,
    row_offsets: Vec<f64>,
    start_left: KeyId,
    start_right: KeyId,
    tap_map: Vec<TapZone>,
    thumb_map: BTreeMap<KeyId, Thumb>,
    positions: [(f64, f64); 26],
}

/// Wire form of a [`Layout`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub rows: Vec<String>,
    pub row_offsets: Vec<f64>,
    pub start_left: KeyId,
    pub start_right: KeyId,
    pub tap_map: Vec<TapZone>,
    pub thumb_map: BTreeMap<KeyId, Thumb>,
}

impl TryFrom<LayoutSpec> for Layout {
    type Error = LayoutError;

    fn try_from(spec: LayoutSpec) -> Result<Self, LayoutError> {
        if spec.rows.len() != spec.row_offsets.len() {
            return Err(LayoutError::OffsetMismatch);
        }
        let mut positions = [(f64::NAN, f64::NAN); 26];
        let mut counts = [0usize; 26];
        for (r, (row, off)) in spec.rows.iter().zip(&spec.row_offsets).enumerate() {
            for (c, ch) in row.chars().enumerate() {
                if !ch.is_ascii_lowercase() {
                    return Err(LayoutError::LetterCount(ch, 0));
                }
                let i = (ch as u8 - b'a') as usize;
                counts[i] += 1;
                positions[i] = (off + c as f64, r as f64);
            }
        }
        if let Some(i) = counts.iter().position(|&n| n != 1) {
            return Err(LayoutError::LetterCount((b'a' + i as u8) as char, counts[i]));
        }
        for start in [spec.start_left, spec.start_right] {
            if !start.is_letter() {
                return Err(LayoutError::StartNotLetter(start));
            }
        }
        for zone in &spec.tap_map {
            if zone.cell.is_center() {
                return Err(LayoutError::CenterMapped);
            }
            if zone.key.is_letter() {
                return Err(LayoutError::LetterInTapMap(zone.key));
            }
        }
        for k in KeyId::letters().chain([KeyId::Space]) {
            if !spec.thumb_map.contains_key(&k) {
                return Err(LayoutError::ThumbMapIncomplete(k));
            }
        }
        Ok(Layout {
            rows: spec.rows,
            row_offsets: spec.row_offsets,
            start_left: spec.start_left,
            start_right: spec.start_right,
            tap_map: spec.tap_map,
            thumb_map: spec.thumb_map,
            positions,
        })
    }
}

impl From<Layout> for LayoutSpec {
    fn from(l: Layout) -> Self {
        LayoutSpec {
            rows: l.rows,
            row_offsets: l.row_offsets,
            start_left: l.start_left,
            start_right: l.start_right,
            tap_map: l.tap_map,
            thumb_map: l.thumb_map,
        }
    }
}

impl Default for Layout {
    fn default() -> Self {
        Layout::qwerty()
    }
}

impl Layout {
    /// Staggered QWERTY with start keys `d`/`k` and the default tap zones:
    /// Suggest1/Suggest2 top corners, Enter middle-right, Space bottom-left,
    /// Backspace bottom-right.
    pub fn qwerty() -> Layout {
        let left = "qwertasdfgzxcvb";
        let mut thumb_map: BTreeMap<KeyId, Thumb> = KeyId::letters()
            .map(|k| {
                let c = k.as_char().unwrap();
                (k, if left.contains(c) { Thumb::Left } else { Thumb::Right })
            })
            .collect();
        thumb_map.insert(KeyId::Space, Thumb::Left);
        let zone = |row, col, key| TapZone {
            cell: CellId::new(row, col).unwrap(),
            key,
        };
        LayoutSpec {
            rows: vec!["qwertyuiop".into(), "asdfghjkl".into(), "zxcvbnm".into()],
            row_offsets: vec![0.0, 0.5, 1.5],
            start_left: KeyId::Letter(b'd'),
            start_right: KeyId::Letter(b'k'),
            tap_map: vec![
                zone(0, 0, KeyId::Suggest1),
                zone(0, 2, KeyId::Suggest2),
                zone(1, 2, KeyId::Enter),
                zone(2, 0, KeyId::Space),
                zone(2, 2, KeyId::Backspace),
            ],
            thumb_map,
        }
        .try_into()
        .expect("built-in layout is valid")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Layout> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    /// Center of a letter key.
    pub fn key_position(&self, k: KeyId) -> Result<(f64, f64), LayoutError> {
        match k {
            KeyId::Letter(b) if b.is_ascii_lowercase() => Ok(self.positions[(b - b'a') as usize]),
            _ => Err(LayoutError::NotALetter(k)),
        }
    }

    pub fn letter_position(&self, c: char) -> Option<(f64, f64)> {
        KeyId::letter(c).and_then(|k| self.key_position(k).ok())
    }

    pub fn start_key(&self, thumb: Thumb) -> KeyId {
        match thumb {
            Thumb::Left => self.start_left,
            Thumb::Right => self.start_right,
        }
    }

    pub fn start_position(&self, thumb: Thumb) -> (f64, f64) {
        self.key_position(self.start_key(thumb))
            .expect("start keys are validated letters")
    }

    /// Thumb used for a key in the typing-time model.
    pub fn thumb_for(&self, k: KeyId) -> Option<Thumb> {
        self.thumb_map.get(&k).copied()
    }

    pub fn thumb_map(&self) -> &BTreeMap<KeyId, Thumb> {
        &self.thumb_map
    }

    pub fn tap_zones(&self) -> &[TapZone] {
        &self.tap_map
    }

    /// Function key for a tap cell; the center cell and unassigned cells
    /// return `None`.
    pub fn tap_function(&self, cell: CellId) -> Option<KeyId> {
        self.tap_map.iter().find(|z| z.cell == cell).map(|z| z.key)
    }

    pub fn tap_cell(&self, key: KeyId) -> Option<CellId> {
        self.tap_map.iter().find(|z| z.key == key).map(|z| z.cell)
    }

    /// Letter whose center is nearest to `(x, y)`; ties go to the
    /// alphabetically first letter.
    pub fn nearest_letter(&self, x: f64, y: f64) -> KeyId {
        let mut best = (f64::INFINITY, 0u8);
        for (i, &(kx, ky)) in self.positions.iter().enumerate() {
            let d = (kx - x).powi(2) + (ky - y).powi(2);
            if d < best.0 {
                best = (d, i as u8);
            }
        }
        KeyId::Letter(b'a' + best.1)
    }

    /// Mean center-to-center distance (in key units) from `from` to every
    /// other letter assigned to `side`.
    pub fn mean_key_distance(&self, from: KeyId, side: Thumb) -> Result<f64, LayoutError> {
        let (fx, fy) = self.key_position(from)?;
        let (sum, n) = KeyId::letters()
            .filter(|&k| k != from && self.thumb_for(k) == Some(side))
            .map(|k| {
                let (x, y) = self.positions[(k.as_char().unwrap() as u8 - b'a') as usize];
                (x - fx).hypot(y - fy)
            })
            .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
        Ok(if n == 0 { 0.0 } else { sum / n as f64 })
    }

    /// Returns a copy with one key's thumb reassigned.
    pub fn with_thumb(&self, key: KeyId, thumb: Thumb) -> Layout {
        let mut l = self.clone();
        l.thumb_map.insert(key, thumb);
        l
    }
}
