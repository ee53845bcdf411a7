//! Per-key selection times for the typing-time model.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::log::GestureLogRecord;
use crate::recognizer::{classify_contact, ContactClass};
use crate::types::{KeyId, PadSpec, Thumb};

/// Added to median stroke durations: the time to tap in place.
pub const TAP_IN_PLACE_MS: f64 = 127.0;
/// Subtracted from stimulus-to-release tap times: visual reaction time.
pub const VISUAL_REACTION_MS: f64 = 230.0;
/// Lower bound for derived tap times.
pub const MIN_KEY_TIME_MS: f64 = 1.0;

#[derive(Debug, Error)]
pub enum TimingError {
    #[error("record {index} is a tap for {key} but has no stimulus_t")]
    MissingStimulus { index: usize, key: KeyId },
    #[error("record {index}: {reason}")]
    BadRecord { index: usize, reason: String },
    #[error("line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("no time for {key} with the {thumb} thumb")]
    Missing { key: KeyId, thumb: Thumb },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `t_key` in milliseconds per (key, thumb).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingTable {
    entries: BTreeMap<(KeyId, Thumb), f64>,
}

impl TimingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Same time for every letter and Space, on both thumbs.
    pub fn uniform(t_ms: f64) -> Self {
        let mut t = Self::new();
        for key in KeyId::letters().chain([KeyId::Space]) {
            for thumb in Thumb::BOTH {
                t.insert(key, thumb, t_ms);
            }
        }
        t
    }

    pub fn insert(&mut self, key: KeyId, thumb: Thumb, t_ms: f64) {
        self.entries.insert((key, thumb), t_ms);
    }

    pub fn get(&self, key: KeyId, thumb: Thumb) -> Option<f64> {
        self.entries.get(&(key, thumb)).copied()
    }

    pub fn require(&self, key: KeyId, thumb: Thumb) -> Result<f64, TimingError> {
        self.get(key, thumb).ok_or(TimingError::Missing { key, thumb })
    }

    pub fn entries(&self) -> impl Iterator<Item = (KeyId, Thumb, f64)> + '_ {
        self.entries.iter().map(|(&(k, th), &t)| (k, th, t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|(&k, &t)| (k, t * factor)).collect(),
        }
    }

    /// Letters and Space without a time for any thumb.
    pub fn missing_keys(&self) -> Vec<KeyId> {
        KeyId::letters()
            .chain([KeyId::Space])
            .filter(|&k| Thumb::BOTH.iter().all(|&th| self.get(k, th).is_none()))
            .collect()
    }

    /// Writes `key,thumb,t_ms` rows under a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "key,thumb,t_ms")?;
        for (k, th, t) in self.entries() {
            writeln!(w, "{k},{th},{t}")?;
        }
        Ok(())
    }

    /// Reads `key,thumb,t_ms` rows. A header row, blank lines and `#`
    /// comments are skipped. Times must be positive.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, TimingError> {
        let mut t = Self::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let lineno = i + 1;
            if line.is_empty() || line.starts_with('#') || line.eq_ignore_ascii_case("key,thumb,t_ms") {
                continue;
            }
            let err = |reason: String| TimingError::Csv { line: lineno, reason };
            let fields: Vec<_> = line.split(',').map(str::trim).collect();
            let [key, thumb, ms] = fields[..] else {
                return Err(err(format!("expected 3 fields, got {}", fields.len())));
            };
            let key: KeyId = key.parse().map_err(err)?;
            let thumb: Thumb = thumb.parse().map_err(err)?;
            let ms: f64 = ms.parse().map_err(|e| err(format!("bad time: {e}")))?;
            if !(ms > 0.0 && ms.is_finite()) {
                return Err(err(format!("time must be positive, got {ms}")));
            }
            t.insert(key, thumb, ms);
        }
        Ok(t)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct TimingReport {
    pub warnings: Vec<String>,
}

/// Derives `t_key` from a calibration log.
///
/// Keys selected by strokes get the median touch-down→touch-up duration plus
/// [`TAP_IN_PLACE_MS`]. Keys selected by taps get the median
/// stimulus→touch-up time minus [`VISUAL_REACTION_MS`], floored at
/// [`MIN_KEY_TIME_MS`]. When a (key, thumb) group mixes taps and strokes the
/// majority kind wins, strokes on a tie.
pub fn derive_timing_table(
    log: &[GestureLogRecord],
    pad: &PadSpec,
    tap_threshold_mm: f64,
) -> Result<(TimingTable, TimingReport), TimingError> {
    #[derive(Default)]
    struct Group {
        strokes: Vec<f64>,
        taps: Vec<f64>,
    }
    let mut groups: BTreeMap<(KeyId, Thumb), Group> = BTreeMap::new();
    for (index, rec) in log.iter().enumerate() {
        let Some(key) = rec.target_key else { continue };
        let g = rec.gesture().map_err(|e| TimingError::BadRecord {
            index,
            reason: e.to_string(),
        })?;
        let thumb = rec.thumb_or_inferred(pad).expect("nonempty gesture");
        let group = groups.entry((key, thumb)).or_default();
        match classify_contact(&g, tap_threshold_mm) {
            ContactClass::Stroke => group.strokes.push(g.duration_ms()),
            ContactClass::Tap => {
                let stim = rec
                    .stimulus_t
                    .ok_or(TimingError::MissingStimulus { index, key })?;
                group.taps.push(g.up_t() - stim);
            }
        }
    }

    let mut table = TimingTable::new();
    let mut report = TimingReport::default();
    for ((key, thumb), mut group) in groups {
        let t = if group.strokes.len() >= group.taps.len() {
            median(&mut group.strokes) + TAP_IN_PLACE_MS
        } else {
            let raw = median(&mut group.taps) - VISUAL_REACTION_MS;
            if raw < MIN_KEY_TIME_MS {
                let msg = format!("{key}/{thumb}: tap time {raw} ms is below the floor, using {MIN_KEY_TIME_MS} ms");
                log::warn!("{msg}");
                report.warnings.push(msg);
                MIN_KEY_TIME_MS
            } else {
                raw
            }
        };
        table.insert(key, thumb, t);
    }
    Ok((table, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recognizer::DEFAULT_TAP_THRESHOLD_MM;
    use crate::types::Gesture;

    fn rec(key: KeyId, points: &[(f64, f64, f64)], stimulus: Option<f64>) -> GestureLogRecord {
        let mut r = GestureLogRecord::from_gesture(&Gesture::from_points(points).unwrap());
        r.target_key = Some(key);
        r.stimulus_t = stimulus;
        r
    }

    fn derive(log: &[GestureLogRecord]) -> (TimingTable, TimingReport) {
        derive_timing_table(log, &PadSpec::default(), DEFAULT_TAP_THRESHOLD_MM).unwrap()
    }

    #[test]
    fn stroke_median_plus_tap_in_place() {
        let q = KeyId::Letter(b'q');
        let log: Vec<_> = [300.0, 350.0, 400.0]
            .iter()
            .map(|&d| rec(q, &[(40.0, 30.0, 1000.0), (10.0, 20.0, 1000.0 + d)], None))
            .collect();
        let (t, _) = derive(&log);
        assert_eq!(t.get(q, Thumb::Left), Some(477.0));
    }

    #[test]
    fn tap_median_minus_reaction() {
        let log: Vec<_> = [400.0, 420.0, 440.0]
            .iter()
            .map(|&d| rec(KeyId::Space, &[(10.0, 55.0, 5000.0), (10.0, 55.0, 5000.0 + d - 50.0)], Some(5000.0 - 50.0)))
            .collect();
        let (t, report) = derive(&log);
        assert_eq!(t.get(KeyId::Space, Thumb::Left), Some(190.0));
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn tap_floor_warns() {
        let log: Vec<_> = [190.0, 200.0, 210.0]
            .iter()
            .map(|&d| rec(KeyId::Space, &[(10.0, 55.0, d)], Some(0.0)))
            .collect();
        let (t, report) = derive(&log);
        assert_eq!(t.get(KeyId::Space, Thumb::Left), Some(1.0));
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn tap_without_stimulus_is_an_error() {
        let log = vec![rec(KeyId::Space, &[(10.0, 55.0, 0.0)], None)];
        assert!(matches!(
            derive_timing_table(&log, &PadSpec::default(), 10.0),
            Err(TimingError::MissingStimulus { index: 0, .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let t = TimingTable::uniform(400.0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = TimingTable::read_csv(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back, t);
        assert!(back.missing_keys().is_empty());
        assert!(matches!(
            TimingTable::read_csv(std::io::Cursor::new("a,left,-3\n")),
            Err(TimingError::Csv { line: 1, .. })
        ));
        assert!(TimingTable::new().missing_keys().len() == 27);
    }
}
