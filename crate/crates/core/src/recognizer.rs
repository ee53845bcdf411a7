//! Gesture classification: tap/stroke split, thumb inference, 3×3 tap-cell
//! recognition, and DTW template matching over resampled angle sequences.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::types::{Gesture, PadSpec, Thumb};

/// Path length below which a contact counts as a tap.
pub const DEFAULT_TAP_THRESHOLD_MM: f64 = 10.0;
/// Number of resampled points used for angle sequences.
pub const DEFAULT_RESAMPLE_POINTS: usize = 10;
/// Leg length of the canonical template polylines.
pub const TEMPLATE_LEG_MM: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecognizerError {
    #[error("expected a tap, got a stroke of {path_mm:.2} mm")]
    NotATap { path_mm: f64 },
    #[error("expected a stroke, got a zero-length path")]
    NotAStroke,
    #[error("resampling needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("template set is empty")]
    NoTemplates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactClass {
    Tap,
    Stroke,
}

/// Tap iff the path is strictly shorter than the threshold.
pub fn classify_contact(g: &Gesture, threshold_mm: f64) -> ContactClass {
    if g.path_length() < threshold_mm {
        ContactClass::Tap
    } else {
        ContactClass::Stroke
    }
}

/// The thumb is decided by which half of the pad the contact started on.
/// A start exactly on the midline counts as right.
pub fn infer_thumb(g: &Gesture, pad: &PadSpec) -> Thumb {
    thumb_at(g.first().x, pad)
}

pub fn thumb_at(x: f64, pad: &PadSpec) -> Thumb {
    if x < pad.width / 2.0 {
        Thumb::Left
    } else {
        Thumb::Right
    }
}

/// One of the nine equal cells of the pad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub row: u8,
    pub col: u8,
}

impl CellId {
    pub const CENTER: CellId = CellId { row: 1, col: 1 };

    pub fn new(row: u8, col: u8) -> Option<CellId> {
        (row < 3 && col < 3).then_some(CellId { row, col })
    }

    pub fn all() -> impl Iterator<Item = CellId> {
        (0..3).flat_map(|row| (0..3).map(move |col| CellId { row, col }))
    }

    pub fn is_center(self) -> bool {
        self == Self::CENTER
    }
}

/// Cell containing a point. Points on the far edges belong to the last
/// row/column; out-of-range points are clamped.
pub fn cell_at(x: f64, y: f64, pad: &PadSpec) -> CellId {
    let idx = |v: f64, extent: f64| -> u8 { ((v / extent * 3.0).floor() as i64).clamp(0, 2) as u8 };
    CellId {
        row: idx(y, pad.height),
        col: idx(x, pad.width),
    }
}

/// Cell of the tap's first sample.
pub fn recognize_tap(g: &Gesture, pad: &PadSpec, threshold_mm: f64) -> Result<CellId, RecognizerError> {
    if classify_contact(g, threshold_mm) != ContactClass::Tap {
        return Err(RecognizerError::NotATap {
            path_mm: g.path_length(),
        });
    }
    let s = g.first();
    Ok(cell_at(s.x, s.y, pad))
}

/// Resamples a polyline to `n` points equally spaced by arc length.
///
/// Consecutive duplicate points are dropped first. Fails for fewer than two
/// requested points or a zero-length path.
pub fn resample(points: &[(f64, f64)], n: usize) -> Result<Vec<(f64, f64)>, RecognizerError> {
    if n < 2 {
        return Err(RecognizerError::TooFewPoints(n));
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    if pts.len() < 2 {
        return Err(RecognizerError::NotAStroke);
    }
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0);
    for w in pts.windows(2) {
        let d = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    if total <= 0.0 {
        return Err(RecognizerError::NotAStroke);
    }

    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        if k == n - 1 {
            out.push(*pts.last().unwrap());
            break;
        }
        let target = total * k as f64 / (n - 1) as f64;
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let u = if span > 0.0 { (target - cum[seg]) / span } else { 0.0 };
        let (a, b) = (pts[seg], pts[seg + 1]);
        out.push((a.0 + u * (b.0 - a.0), a.1 + u * (b.1 - a.1)));
    }
    Ok(out)
}

/// Segment angles of a polyline resampled to `n` points (`n - 1` angles).
pub fn polyline_angles(points: &[(f64, f64)], n: usize) -> Result<Vec<f64>, RecognizerError> {
    let pts = resample(points, n)?;
    Ok(pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).atan2(w[1].0 - w[0].0))
        .collect())
}

/// Angle sequence of a stroke gesture.
pub fn angle_sequence(g: &Gesture, n: usize) -> Result<Vec<f64>, RecognizerError> {
    let pts: Vec<_> = g.samples().iter().map(|s| (s.x, s.y)).collect();
    polyline_angles(&pts, n)
}

/// Shortest angular distance between two directions, in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Unconstrained DTW over angle sequences with circular per-cell cost.
pub fn dtw_deviation(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { f64::INFINITY };
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &x in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = angular_distance(x, b[j - 1]) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateFamily {
    Single8,
    LShape,
    VShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeTemplate {
    pub id: String,
    pub family: TemplateFamily,
    pub angle_seq: Vec<f64>,
    #[serde(skip)]
    polyline: Vec<(f64, f64)>,
}

impl StrokeTemplate {
    fn from_headings(id: String, family: TemplateFamily, headings: &[f64]) -> Self {
        let mut polyline = vec![(0.0, 0.0)];
        for &h in headings {
            let (x, y) = *polyline.last().unwrap();
            // Snap away rounding noise so axis-aligned legs are exact.
            let snap = |v: f64| (v * 1e9).round() / 1e9;
            polyline.push((snap(x + TEMPLATE_LEG_MM * h.cos()), snap(y + TEMPLATE_LEG_MM * h.sin())));
        }
        let angle_seq = polyline_angles(&polyline, DEFAULT_RESAMPLE_POINTS)
            .expect("template legs have nonzero length");
        Self {
            id,
            family,
            angle_seq,
            polyline,
        }
    }

    /// Canonical polyline in mm, starting at the origin. Empty for templates
    /// loaded from JSON.
    pub fn polyline(&self) -> &[(f64, f64)] {
        &self.polyline
    }
}

const COMPASS: [&str; 8] = ["E", "SE", "S", "SW", "W", "NW", "N", "NE"];

/// The 56 canonical stroke templates, in declaration order.
///
/// * 8 single strokes along the compass directions.
/// * 24 L-shapes: a first leg at each 30° heading followed by a 90° turn
///   either way.
/// * 24 V-shapes: same headings followed by a 135° turn either way, so the
///   two legs enclose 45°.
///
/// Angles follow the pad's Y-down convention, so a positive turn is
/// clockwise on screen.
pub fn default_templates() -> Vec<StrokeTemplate> {
    let mut out = Vec::with_capacity(56);
    for (i, name) in COMPASS.iter().enumerate() {
        let h = i as f64 * FRAC_PI_4;
        out.push(StrokeTemplate::from_headings(
            format!("single-{name}"),
            TemplateFamily::Single8,
            &[h],
        ));
    }
    for (family, prefix, turn) in [
        (TemplateFamily::LShape, "l", FRAC_PI_2),
        (TemplateFamily::VShape, "v", 3.0 * FRAC_PI_4),
    ] {
        for step in 0..12 {
            let h = step as f64 * PI / 6.0;
            for (dir, sign) in [("cw", 1.0), ("ccw", -1.0)] {
                out.push(StrokeTemplate::from_headings(
                    format!("{prefix}-{:03}-{dir}", step * 30),
                    family,
                    &[h, h + sign * turn],
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recognition {
    pub index: usize,
    pub id: String,
    pub deviation: f64,
}

/// Template with the lowest DTW deviation from an angle sequence; ties go to
/// the earlier template.
pub fn best_template(angles: &[f64], templates: &[StrokeTemplate]) -> Result<Recognition, RecognizerError> {
    let (index, deviation) = templates
        .iter()
        .enumerate()
        .map(|(i, t)| (i, dtw_deviation(angles, &t.angle_seq)))
        .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((i, d)),
        })
        .ok_or(RecognizerError::NoTemplates)?;
    Ok(Recognition {
        index,
        id: templates[index].id.clone(),
        deviation,
    })
}

pub fn recognize_stroke(g: &Gesture, templates: &[StrokeTemplate]) -> Result<Recognition, RecognizerError> {
    if templates.is_empty() {
        return Err(RecognizerError::NoTemplates);
    }
    let angles = angle_sequence(g, DEFAULT_RESAMPLE_POINTS)?;
    best_template(&angles, templates)
}

/// Recognizes a batch of gestures.
pub fn recognize_batch(
    gestures: &[Gesture],
    templates: &[StrokeTemplate],
    exec: Exec,
) -> Vec<Result<Recognition, RecognizerError>> {
    exec.map_slice(gestures, |g| recognize_stroke(g, templates))
}

pub fn templates_to_json(templates: &[StrokeTemplate]) -> String {
    serde_json::to_string_pretty(templates).expect("templates serialize")
}

pub fn templates_from_json(s: &str) -> serde_json::Result<Vec<StrokeTemplate>> {
    serde_json::from_str(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Gesture;
    use proptest::prelude::*;

    fn line(points: &[(f64, f64)]) -> Gesture {
        let pts: Vec<_> = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (x, y, i as f64 * 10.0))
            .collect();
        Gesture::from_points(&pts).unwrap()
    }

    #[test]
    fn tap_threshold_is_strict() {
        let pad = PadSpec::default();
        assert_eq!(classify_contact(&line(&[(5.0, 5.0)]), 10.0), ContactClass::Tap);
        assert_eq!(
            classify_contact(&line(&[(5.0, 5.0), (14.99, 5.0)]), 10.0),
            ContactClass::Tap
        );
        assert_eq!(
            classify_contact(&line(&[(5.0, 5.0), (15.0, 5.0)]), 10.0),
            ContactClass::Stroke
        );
        assert!(recognize_tap(&line(&[(5.0, 5.0), (15.0, 5.0)]), &pad, 10.0).is_err());
    }

    #[test]
    fn thumb_by_start_half() {
        let pad = PadSpec::default();
        let w = pad.width;
        assert_eq!(infer_thumb(&line(&[(0.1 * w, 5.0)]), &pad), Thumb::Left);
        assert_eq!(infer_thumb(&line(&[(0.9 * w, 5.0)]), &pad), Thumb::Right);
        assert_eq!(infer_thumb(&line(&[(0.5 * w, 5.0)]), &pad), Thumb::Right);
    }

    #[test]
    fn tap_cells() {
        let pad = PadSpec::default();
        let (w, h) = (pad.width, pad.height);
        assert_eq!(
            recognize_tap(&line(&[(0.1 * w, 0.1 * h)]), &pad, 10.0).unwrap(),
            CellId::new(0, 0).unwrap()
        );
        assert_eq!(
            recognize_tap(&line(&[(0.5 * w, 0.95 * h)]), &pad, 10.0).unwrap(),
            CellId::new(2, 1).unwrap()
        );
    }

    #[test]
    fn cells_tile_the_pad() {
        // Every point of a 100×100 scan maps to exactly one cell, each cell is
        // hit, and the membership agrees with an independent interval test.
        let pad = PadSpec::default();
        let mut hits = [0usize; 9];
        for i in 0..100 {
            for j in 0..100 {
                let x = pad.width * i as f64 / 99.0;
                let y = pad.height * j as f64 / 99.0;
                let cell = cell_at(x, y, &pad);
                let owners: Vec<_> = CellId::all()
                    .filter(|c| {
                        let (c0, c1) = (c.col as f64 * pad.width / 3.0, (c.col + 1) as f64 * pad.width / 3.0);
                        let (r0, r1) = (c.row as f64 * pad.height / 3.0, (c.row + 1) as f64 * pad.height / 3.0);
                        let in_x = x >= c0 && (x < c1 || (c.col == 2 && x <= c1));
                        let in_y = y >= r0 && (y < r1 || (c.row == 2 && y <= r1));
                        in_x && in_y
                    })
                    .collect();
                assert_eq!(owners, vec![cell], "point ({x}, {y})");
                hits[(cell.row * 3 + cell.col) as usize] += 1;
            }
        }
        assert!(hits.iter().all(|&n| n > 0));
    }

    #[test]
    fn straight_angles() {
        let a = angle_sequence(&line(&[(0.0, 0.0), (10.0, 0.0)]), 10).unwrap();
        assert_eq!(a.len(), 9);
        assert!(a.iter().all(|&x| x.abs() < 1e-12));
        let a = angle_sequence(&line(&[(0.0, 0.0), (0.0, 10.0)]), 10).unwrap();
        assert!(a.iter().all(|&x| (x - FRAC_PI_2).abs() < 1e-12));
    }

    #[test]
    fn l_path_angles_by_hand() {
        // Total length 20, spacing 20/9: points 0..=4 lie on the first leg
        // (x = 0, 2.22, 4.44, 6.67, 8.89), point 5 is (10, 1.11). Segment 4
        // straddles the corner at 45°.
        let a = angle_sequence(&line(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0)]), 10).unwrap();
        let expected = [0.0, 0.0, 0.0, 0.0, FRAC_PI_4, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2];
        for (got, want) in a.iter().zip(expected) {
            assert!((got - want).abs() < 1e-9, "{a:?}");
        }
    }

    #[test]
    fn tap_has_no_angles() {
        assert_eq!(
            angle_sequence(&line(&[(3.0, 3.0), (3.0, 3.0)]), 10),
            Err(RecognizerError::NotAStroke)
        );
    }

    #[test]
    fn dtw_hand_table() {
        assert_eq!(dtw_deviation(&[0.1, 0.2], &[0.1, 0.2]), 0.0);
        // Every cell of the 3×3 table costs π, and the diagonal path is the
        // cheapest at three cells.
        let d = dtw_deviation(&[0.0; 3], &[PI; 3]);
        assert!((d - 3.0 * PI).abs() < 1e-12);
        // Circular cost: 350° vs 10° is 20° apart.
        let d = dtw_deviation(&[350f64.to_radians()], &[10f64.to_radians()]);
        assert!((d - 20f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn template_counts() {
        let t = default_templates();
        assert_eq!(t.len(), 56);
        let count = |f| t.iter().filter(|x| x.family == f).count();
        assert_eq!(count(TemplateFamily::Single8), 8);
        assert_eq!(count(TemplateFamily::LShape), 24);
        assert_eq!(count(TemplateFamily::VShape), 24);
        let mut ids: Vec<_> = t.iter().map(|x| x.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 56);
    }

    #[test]
    fn templates_self_classify_with_margin() {
        let t = default_templates();
        for (i, tpl) in t.iter().enumerate() {
            let g = line(tpl.polyline());
            let r = recognize_stroke(&g, &t).unwrap();
            assert_eq!(r.index, i, "{}", tpl.id);
            assert_eq!(r.deviation, 0.0);
            let runner_up = t
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, o)| dtw_deviation(&tpl.angle_seq, &o.angle_seq))
                .fold(f64::INFINITY, f64::min);
            assert!(runner_up > 0.5, "{} too close to a neighbour: {runner_up}", tpl.id);
        }
    }

    #[test]
    fn up_stroke_is_single_north() {
        let t = default_templates();
        let r = recognize_stroke(&line(&[(50.0, 50.0), (50.0, 20.0)]), &t).unwrap();
        assert_eq!(r.id, "single-N");
        assert_eq!(r.deviation, 0.0);
    }

    #[test]
    fn empty_template_set() {
        let g = line(&[(0.0, 0.0), (20.0, 0.0)]);
        assert_eq!(recognize_stroke(&g, &[]), Err(RecognizerError::NoTemplates));
    }

    #[test]
    fn template_json_round_trip() {
        let t = default_templates();
        let back = templates_from_json(&templates_to_json(&t)).unwrap();
        assert_eq!(back.len(), t.len());
        for (a, b) in t.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.family, b.family);
            assert_eq!(a.angle_seq, b.angle_seq);
        }
    }

    proptest! {
        #[test]
        fn dtw_symmetric(a in prop::collection::vec(-PI..PI, 1..12), b in prop::collection::vec(-PI..PI, 1..12)) {
            let ab = dtw_deviation(&a, &b);
            let ba = dtw_deviation(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(dtw_deviation(&a, &a), 0.0);
        }

        #[test]
        fn recognition_is_scale_free(idx in 0usize..56, scale in 0.6f64..8.0) {
            let t = default_templates();
            let scaled: Vec<_> = t[idx].polyline().iter().map(|&(x, y)| (x * scale + 40.0, y * scale + 30.0)).collect();
            let r = recognize_stroke(&line(&scaled), &t).unwrap();
            prop_assert_eq!(r.index, idx);
        }
    }
}
