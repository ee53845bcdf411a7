//! Shared domain types.
//!
//! All touchpad coordinates are millimeters measured from the top-left
//! corner of the pad, with the Y axis growing downward. Times are
//! milliseconds since the session epoch.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GestureError {
    #[error("gesture has no samples")]
    Empty,
    #[error("sample {index} goes back in time ({prev} ms -> {next} ms)")]
    TimeReversal { index: usize, prev: f64, next: f64 },
    #[error("sample {index} has a non-finite coordinate")]
    NonFinite { index: usize },
}

/// One touch sample on the pad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchSample {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl TouchSample {
    pub const fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }
}

/// A single contiguous contact, from touch-down to touch-up.
#[derive(Debug, Clone, PartialEq)]
pub struct Gesture {
    samples: Vec<TouchSample>,
    pub pointer_id: u64,
}

impl Gesture {
    pub fn new(samples: Vec<TouchSample>, pointer_id: u64) -> Result<Self, GestureError> {
        if samples.is_empty() {
            return Err(GestureError::Empty);
        }
        for (index, s) in samples.iter().enumerate() {
            if !(s.x.is_finite() && s.y.is_finite() && s.t.is_finite()) {
                return Err(GestureError::NonFinite { index });
            }
        }
        for (index, w) in samples.windows(2).enumerate() {
            if w[1].t < w[0].t {
                return Err(GestureError::TimeReversal {
                    index: index + 1,
                    prev: w[0].t,
                    next: w[1].t,
                });
            }
        }
        Ok(Self {
            samples,
            pointer_id,
        })
    }

    /// Builds a gesture from `(x, y, t)` triples.
    pub fn from_points(points: &[(f64, f64, f64)]) -> Result<Self, GestureError> {
        Self::new(
            points
                .iter()
                .map(|&(x, y, t)| TouchSample::new(x, y, t))
                .collect(),
            0,
        )
    }

    pub fn samples(&self) -> &[TouchSample] {
        &self.samples
    }

    pub fn first(&self) -> TouchSample {
        self.samples[0]
    }

    pub fn last(&self) -> TouchSample {
        self.samples[self.samples.len() - 1]
    }

    pub fn down_t(&self) -> f64 {
        self.first().t
    }

    pub fn up_t(&self) -> f64 {
        self.last().t
    }

    pub fn duration_ms(&self) -> f64 {
        self.up_t() - self.down_t()
    }

    /// Endpoint minus start point.
    pub fn normalized_endpoint(&self) -> NormalizedEndpoint {
        let (a, b) = (self.first(), self.last());
        NormalizedEndpoint {
            dx: b.x - a.x,
            dy: b.y - a.y,
        }
    }

    /// Sum of distances between consecutive samples.
    pub fn path_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PadSpec {
    pub width: f64,
    pub height: f64,
}

impl PadSpec {
    pub fn new(width: f64, height: f64) -> Option<Self> {
        (width > height && height > 0.0 && width.is_finite()).then_some(Self { width, height })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width).contains(&x) && (0.0..=self.height).contains(&y)
    }

    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(0.0, self.width), y.clamp(0.0, self.height))
    }
}

impl Default for PadSpec {
    /// A 5.9" phone held in landscape.
    fn default() -> Self {
        Self {
            width: 134.0,
            height: 63.0,
        }
    }
}

impl FromStr for PadSpec {
    type Err = String;

    /// Parses `WIDTHxHEIGHT` in millimeters, e.g. `134x63`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
        let w: f64 = w.trim().parse().map_err(|e| format!("bad width: {e}"))?;
        let h: f64 = h.trim().parse().map_err(|e| format!("bad height: {e}"))?;
        PadSpec::new(w, h).ok_or_else(|| format!("pad must satisfy width > height > 0, got {s}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Thumb {
    Left,
    Right,
}

impl Thumb {
    pub const BOTH: [Thumb; 2] = [Thumb::Left, Thumb::Right];

    pub fn other(self) -> Thumb {
        match self {
            Thumb::Left => Thumb::Right,
            Thumb::Right => Thumb::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Thumb::Left => "left",
            Thumb::Right => "right",
        }
    }
}

impl fmt::Display for Thumb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Thumb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Thumb::Left),
            "right" | "r" => Ok(Thumb::Right),
            other => Err(format!("unknown thumb {other:?}")),
        }
    }
}

/// A selectable key: one of the 26 lowercase letters or a function key.
///
/// Serialized as the letter itself (`"q"`) or the lowercase function name
/// (`"space"`, `"backspace"`, `"enter"`, `"suggest1"`, `"suggest2"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeyId {
    Letter(u8),
    Space,
    Backspace,
    Enter,
    Suggest1,
    Suggest2,
}

impl KeyId {
    pub fn letter(c: char) -> Option<KeyId> {
        c.is_ascii_lowercase().then_some(KeyId::Letter(c as u8))
    }

    pub fn letters() -> impl Iterator<Item = KeyId> {
        (b'a'..=b'z').map(KeyId::Letter)
    }

    pub fn as_char(self) -> Option<char> {
        match self {
            KeyId::Letter(b) => Some(b as char),
            _ => None,
        }
    }

    pub fn is_letter(self) -> bool {
        matches!(self, KeyId::Letter(_))
    }

    pub fn name(self) -> String {
        match self {
            KeyId::Letter(b) => (b as char).to_string(),
            KeyId::Space => "space".into(),
            KeyId::Backspace => "backspace".into(),
            KeyId::Enter => "enter".into(),
            KeyId::Suggest1 => "suggest1".into(),
            KeyId::Suggest2 => "suggest2".into(),
        }
    }
}

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for KeyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let mut chars = lower.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            return KeyId::letter(c).ok_or_else(|| format!("unknown key {s:?}"));
        }
        match lower.as_str() {
            "space" => Ok(KeyId::Space),
            "backspace" => Ok(KeyId::Backspace),
            "enter" => Ok(KeyId::Enter),
            "suggest1" => Ok(KeyId::Suggest1),
            "suggest2" => Ok(KeyId::Suggest2),
            _ => Err(format!("unknown key {s:?}")),
        }
    }
}

impl Serialize for KeyId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for KeyId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Stroke displacement on the pad: end position minus start position, in mm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizedEndpoint {
    pub dx: f64,
    pub dy: f64,
}

impl NormalizedEndpoint {
    pub const fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(points: &[(f64, f64, f64)]) -> Gesture {
        Gesture::from_points(points).unwrap()
    }

    #[test]
    fn endpoint_is_last_minus_first() {
        let e = g(&[(10.0, 10.0, 0.0), (30.0, 5.0, 120.0)]).normalized_endpoint();
        assert_eq!(e, NormalizedEndpoint::new(20.0, -5.0));
        assert_eq!(
            g(&[(7.0, 7.0, 0.0)]).normalized_endpoint(),
            NormalizedEndpoint::new(0.0, 0.0)
        );
        let e = g(&[(0.0, 0.0, 0.0), (5.0, 5.0, 10.0), (2.0, 8.0, 20.0)]).normalized_endpoint();
        assert_eq!(e, NormalizedEndpoint::new(2.0, 8.0));
    }

    #[test]
    fn path_length_cases() {
        assert_eq!(g(&[(0.0, 0.0, 0.0), (3.0, 4.0, 1.0)]).path_length(), 5.0);
        assert_eq!(g(&[(0.0, 0.0, 0.0)]).path_length(), 0.0);
        assert_eq!(
            g(&[(0.0, 0.0, 0.0), (3.0, 4.0, 1.0), (3.0, 4.0, 2.0)]).path_length(),
            5.0
        );
    }

    #[test]
    fn rejects_empty_and_reversed() {
        assert_eq!(Gesture::new(vec![], 0), Err(GestureError::Empty));
        assert!(matches!(
            Gesture::from_points(&[(0.0, 0.0, 5.0), (1.0, 1.0, 4.0)]),
            Err(GestureError::TimeReversal { index: 1, .. })
        ));
    }

    #[test]
    fn key_id_names_round_trip() {
        for k in KeyId::letters().chain([
            KeyId::Space,
            KeyId::Backspace,
            KeyId::Enter,
            KeyId::Suggest1,
            KeyId::Suggest2,
        ]) {
            assert_eq!(k.name().parse::<KeyId>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(serde_json::from_str::<KeyId>(&json).unwrap(), k);
        }
        assert!("ß".parse::<KeyId>().is_err());
    }

    #[test]
    fn pad_parse() {
        assert_eq!("134x63".parse::<PadSpec>().unwrap(), PadSpec::default());
        assert!("63x134".parse::<PadSpec>().is_err());
    }

    fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 1..20)
    }

    proptest! {
        #[test]
        fn endpoint_translation_invariant(pts in points(), a in -50.0..50.0f64, b in -50.0..50.0f64) {
            let base: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| (x, y, i as f64)).collect();
            let moved: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| (x + a, y + b, i as f64)).collect();
            let e1 = g(&base).normalized_endpoint();
            let e2 = g(&moved).normalized_endpoint();
            prop_assert!((e1.dx - e2.dx).abs() < 1e-9 && (e1.dy - e2.dy).abs() < 1e-9);
        }

        #[test]
        fn path_length_bounds_endpoint(pts in points()) {
            let pts: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| (x, y, i as f64)).collect();
            let gesture = g(&pts);
            let len = gesture.path_length();
            let direct = gesture.normalized_endpoint().norm();
            prop_assert!(len + 1e-9 >= direct);
            if pts.len() == 2 {
                prop_assert!((len - direct).abs() < 1e-9);
            }
        }
    }
}
