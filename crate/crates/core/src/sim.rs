//! Synthetic typists for simulation, sweeps and tests.
//!
//! Strokes start from a fixed resting point per thumb and travel in a
//! straight line to `mean + λ·L·z`, where `L` is the Cholesky factor of the
//! key model's covariance and `z` a standard normal draw. Start keys are
//! typed with a tap in the center cell; function keys with a tap in their
//! cell.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use crate::calibration::{CalibrationProfile, KeyEndpointModel};
use crate::decoder::{DecoderConfig, DecoderOptions, KeyEvent, Session};
use crate::exec::Exec;
use crate::layout::Layout;
use crate::log::{GestureLogRecord, LogLine};
use crate::recognizer::{best_template, polyline_angles, StrokeTemplate, DEFAULT_RESAMPLE_POINTS};
use crate::types::{Gesture, KeyId, NormalizedEndpoint, PadSpec, Thumb, TouchSample};

/// Character that makes [`Typist::gestures_for_text`] tap Backspace.
pub const BACKSPACE_CHAR: char = '\u{8}';

const TAP_MS: f64 = 80.0;
const STROKE_BASE_MS: f64 = 180.0;
const STROKE_MS_PER_MM: f64 = 6.0;
const DEFAULT_GAP_MS: f64 = 300.0;
const DEFAULT_STROKE_SAMPLES: usize = 8;
/// Stimulus to touch-down delay in simulated calibration logs.
const CALIBRATION_REACTION_MS: f64 = 450.0;

/// Resting point of each thumb on the pad.
pub fn stroke_origin(pad: &PadSpec, thumb: Thumb) -> (f64, f64) {
    match thumb {
        Thumb::Left => (pad.width * 0.25, pad.height * 0.5),
        Thumb::Right => (pad.width * 0.75, pad.height * 0.5),
    }
}

/// Point inside the center cell on the thumb's half of the pad.
pub fn center_tap_point(pad: &PadSpec, thumb: Thumb) -> (f64, f64) {
    let dx = pad.width / 12.0;
    match thumb {
        Thumb::Left => (pad.width * 0.5 - dx, pad.height * 0.5),
        Thumb::Right => (pad.width * 0.5 + dx, pad.height * 0.5),
    }
}

/// `L·z` for the Cholesky factor `L` of the model covariance.
pub fn correlated_offset(model: &KeyEndpointModel, z: [f64; 2]) -> [f64; 2] {
    let [[a, b], [_, d]] = model.cov;
    let l11 = a.sqrt();
    let l21 = b / l11;
    let l22 = (d - l21 * l21).max(0.0).sqrt();
    [l11 * z[0], l21 * z[0] + l22 * z[1]]
}

pub fn standard_normal_pair<R: Rng>(rng: &mut R) -> [f64; 2] {
    [StandardNormal.sample(rng), StandardNormal.sample(rng)]
}

/// Generates timestamped gestures for intended keys.
#[derive(Debug, Clone)]
pub struct Typist {
    profile: CalibrationProfile,
    layout: Layout,
    noise: f64,
    rng: ChaCha8Rng,
    clock: f64,
    next_pointer: u64,
    pub gap_ms: f64,
    pub stroke_samples: usize,
}

impl Typist {
    pub fn new(profile: CalibrationProfile, layout: Layout) -> Self {
        Self {
            profile,
            layout,
            noise: 0.0,
            rng: ChaCha8Rng::seed_from_u64(0),
            clock: 0.0,
            next_pointer: 1,
            gap_ms: DEFAULT_GAP_MS,
            stroke_samples: DEFAULT_STROKE_SAMPLES,
        }
    }

    /// Scales stroke endpoint noise by `lambda` (0 is noiseless).
    pub fn with_noise(mut self, lambda: f64, seed: u64) -> Self {
        self.noise = lambda;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn set_clock(&mut self, t: f64) {
        self.clock = t;
    }

    fn pad(&self) -> PadSpec {
        self.profile.pad
    }

    fn emit(&mut self, points: Vec<(f64, f64)>, duration: f64) -> Gesture {
        let pad = self.pad();
        let t0 = self.clock;
        let n = points.len();
        let samples = points
            .into_iter()
            .enumerate()
            .map(|(i, (x, y))| {
                let (x, y) = pad.clamp(x, y);
                let f = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                TouchSample::new(x, y, t0 + f * duration)
            })
            .collect();
        self.clock = t0 + duration + self.gap_ms;
        let id = self.next_pointer;
        self.next_pointer += 1;
        Gesture::new(samples, id).expect("generated gestures are valid")
    }

    pub fn tap_at(&mut self, x: f64, y: f64) -> Gesture {
        self.emit(vec![(x, y), (x, y)], TAP_MS)
    }

    /// Straight stroke from the thumb's resting point.
    pub fn stroke_to(&mut self, thumb: Thumb, e: NormalizedEndpoint) -> Gesture {
        let (sx, sy) = stroke_origin(&self.pad(), thumb);
        let n = self.stroke_samples.max(2);
        let points = (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                (sx + f * e.dx, sy + f * e.dy)
            })
            .collect();
        self.emit(points, STROKE_BASE_MS + STROKE_MS_PER_MM * e.norm())
    }

    /// Endpoint for `key` with noise `lambda·L·z`.
    pub fn endpoint_for(&self, key: KeyId, thumb: Thumb, lambda: f64, z: [f64; 2]) -> NormalizedEndpoint {
        let m = self
            .profile
            .model(key, thumb)
            .unwrap_or_else(|| panic!("profile has no model for {key} with the {thumb} thumb"));
        let off = correlated_offset(m, z);
        NormalizedEndpoint::new(m.mean[0] + lambda * off[0], m.mean[1] + lambda * off[1])
    }

    /// Stroke for `key` using the typist's own noise level and generator.
    pub fn stroke_key(&mut self, key: KeyId, thumb: Thumb) -> Gesture {
        let z = if self.noise > 0.0 {
            standard_normal_pair(&mut self.rng)
        } else {
            [0.0, 0.0]
        };
        let e = self.endpoint_for(key, thumb, self.noise, z);
        self.stroke_to(thumb, e)
    }

    /// Tap for a function key, or a center tap for a start key.
    pub fn tap_key(&mut self, key: KeyId) -> Gesture {
        let pad = self.pad();
        if key.is_letter() {
            let thumb = Thumb::BOTH
                .into_iter()
                .find(|&t| self.layout.start_key(t) == key)
                .unwrap_or_else(|| panic!("{key} is not a start key"));
            let (x, y) = center_tap_point(&pad, thumb);
            return self.tap_at(x, y);
        }
        let cell = self
            .layout
            .tap_cell(key)
            .unwrap_or_else(|| panic!("{key} has no tap zone"));
        let x = (cell.col as f64 + 0.5) * pad.width / 3.0;
        let y = (cell.row as f64 + 0.5) * pad.height / 3.0;
        self.tap_at(x, y)
    }

    pub fn tap_key_at(&mut self, key: KeyId, t: f64) -> Gesture {
        self.clock = t;
        self.tap_key(key)
    }

    /// Gesture for one letter with the thumb assigned by the layout.
    pub fn letter(&mut self, key: KeyId) -> Gesture {
        let thumb = self.layout.thumb_for(key).unwrap_or(Thumb::Left);
        if self.layout.start_key(thumb) == key {
            self.tap_key(key)
        } else {
            self.stroke_key(key, thumb)
        }
    }

    /// Gestures for a string of a–z, space, newline (Enter) and
    /// [`BACKSPACE_CHAR`]. Other characters are skipped.
    pub fn gestures_for_text(&mut self, text: &str) -> Vec<Gesture> {
        text.chars()
            .filter_map(|c| match c {
                ' ' => Some(self.tap_key(KeyId::Space)),
                '\n' => Some(self.tap_key(KeyId::Enter)),
                BACKSPACE_CHAR => Some(self.tap_key(KeyId::Backspace)),
                _ => KeyId::letter(c).map(|k| self.letter(k)),
            })
            .collect()
    }
}

/// Outcome of one (seed, λ) cell of a noise sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub seed: u64,
    pub correct: usize,
    pub total: usize,
}

impl SweepPoint {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Letters and noise draws for one seed. Draws are reused across noise
/// levels so that accuracy differences come from λ alone.
pub fn sweep_inputs(seed: u64, chars: usize) -> Vec<(KeyId, [f64; 2])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..chars)
        .map(|_| {
            let key = KeyId::Letter(b'a' + rng.random_range(0..26u8));
            (key, standard_normal_pair(&mut rng))
        })
        .collect()
}

/// Whether a single gesture decodes to `key` in a fresh deterministic session.
pub fn decodes_to(config: &Arc<DecoderConfig>, g: &Gesture, key: KeyId) -> bool {
    let mut s = Session::new(config.clone(), DecoderOptions { predictions_enabled: false });
    let want = key.as_char();
    s.feed_touch(g)
        .map(|events| {
            events
                .iter()
                .any(|e| matches!(e, KeyEvent::Char { ch, .. } if Some(*ch) == want))
        })
        .unwrap_or(false)
}

/// Per-character top-1 accuracy of the deterministic decoder at one noise level.
pub fn decode_accuracy(config: &Arc<DecoderConfig>, inputs: &[(KeyId, [f64; 2])], lambda: f64, exec: Exec) -> usize {
    let typist = Typist::new(config.profile.clone(), config.layout.clone());
    let hits = exec.map_slice(inputs, |&(key, z)| {
        let mut t = typist.clone();
        let thumb = config.layout.thumb_for(key).unwrap_or(Thumb::Left);
        let g = if config.layout.start_key(thumb) == key {
            t.tap_key(key)
        } else {
            let e = t.endpoint_for(key, thumb, lambda, z);
            t.stroke_to(thumb, e)
        };
        decodes_to(config, &g, key)
    });
    hits.into_iter().filter(|&h| h).count()
}

pub fn noise_sweep(
    config: &Arc<DecoderConfig>,
    lambdas: &[f64],
    seeds: &[u64],
    chars_per_seed: usize,
    exec: Exec,
) -> Vec<SweepPoint> {
    let mut out = Vec::new();
    for &seed in seeds {
        let inputs = sweep_inputs(seed, chars_per_seed);
        for &lambda in lambdas {
            out.push(SweepPoint {
                lambda,
                seed,
                correct: decode_accuracy(config, &inputs, lambda, exec),
                total: chars_per_seed,
            });
        }
    }
    out
}

/// Template polyline redrawn with every segment's heading perturbed by
/// `N(0, sigma)`. Each leg is split into `pieces` segments.
pub fn jitter_polyline<R: Rng>(polyline: &[(f64, f64)], sigma: f64, pieces: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut out = vec![polyline[0]];
    for w in polyline.windows(2) {
        let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        let heading = dy.atan2(dx);
        let step = dx.hypot(dy) / pieces as f64;
        for _ in 0..pieces {
            let h = heading + normal.sample(rng);
            let (x, y) = *out.last().unwrap();
            out.push((x + step * h.cos(), y + step * h.sin()));
        }
    }
    out
}

/// Correct classifications per template over `trials` jittered redraws.
pub fn template_jitter_accuracy(
    templates: &[StrokeTemplate],
    sigma_deg: f64,
    trials: usize,
    seed: u64,
    exec: Exec,
) -> Vec<usize> {
    let sigma = sigma_deg * PI / 180.0;
    let n = templates.len();
    let hits = exec.map_indexed(n * trials, |i| {
        let ti = i / trials;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let poly = jitter_polyline(templates[ti].polyline(), sigma, 4, &mut rng);
        let angles = polyline_angles(&poly, DEFAULT_RESAMPLE_POINTS).expect("jittered legs are long");
        best_template(&angles, templates).map(|r| r.index == ti).unwrap_or(false)
    });
    hits.chunks(trials)
        .map(|c| c.iter().filter(|&&h| h).count())
        .collect()
}

/// Session log for typing each phrase once, as a participant would: phrase
/// start marker, the gestures, phrase end marker.
pub fn simulate_session(
    profile: &CalibrationProfile,
    layout: &Layout,
    phrases: &[String],
    lambda: f64,
    seed: u64,
) -> Vec<LogLine> {
    let mut typist = Typist::new(profile.clone(), layout.clone()).with_noise(lambda, seed);
    let mut lines = Vec::new();
    for phrase in phrases {
        lines.push(LogLine::phrase_start(phrase.clone()));
        for g in typist.gestures_for_text(phrase) {
            lines.push(LogLine::Gesture(GestureLogRecord::from_gesture(&g)));
        }
        lines.push(LogLine::phrase_end());
        typist.clock += 2000.0;
    }
    lines
}

/// Calibration log: `reps` strokes per letter per thumb and `reps` Space
/// taps, each record tagged with its target key and thumb.
pub fn simulate_calibration(
    profile: &CalibrationProfile,
    layout: &Layout,
    reps: usize,
    lambda: f64,
    seed: u64,
) -> Vec<GestureLogRecord> {
    let mut typist = Typist::new(profile.clone(), layout.clone()).with_noise(lambda, seed);
    let mut out = Vec::new();
    for thumb in Thumb::BOTH {
        for key in KeyId::letters() {
            if profile.model(key, thumb).is_none() {
                continue;
            }
            for _ in 0..reps {
                let stimulus = typist.clock;
                typist.clock += CALIBRATION_REACTION_MS;
                let g = typist.stroke_key(key, thumb);
                let mut rec = GestureLogRecord::from_gesture(&g);
                rec.target_key = Some(key);
                rec.thumb = Some(thumb);
                rec.stimulus_t = Some(stimulus);
                out.push(rec);
            }
        }
    }
    for _ in 0..reps {
        let stimulus = typist.clock;
        typist.clock += CALIBRATION_REACTION_MS;
        let g = typist.tap_key(KeyId::Space);
        let mut rec = GestureLogRecord::from_gesture(&g);
        rec.target_key = Some(KeyId::Space);
        rec.thumb = Some(crate::expert::SPACE_THUMB);
        rec.stimulus_t = Some(stimulus);
        out.push(rec);
    }
    out
}
