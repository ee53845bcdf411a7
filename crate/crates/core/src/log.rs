//! JSONL gesture logs.
//!
//! One JSON object per line. Gesture lines look like
//!
//! ```text
//! {"target_key":"q","thumb":"left","stimulus_t":1234,"samples":[[x_mm,y_mm,t_ms],...]}
//! ```
//!
//! where every field except `samples` is optional. Session logs may also
//! contain phrase markers (`{"marker":"phrase_start","text":"the cat"}` and
//! `{"marker":"phrase_end"}`). Unknown fields are kept and written back.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::types::{Gesture, GestureError, KeyId, PadSpec, Thumb, TouchSample};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Gesture {
        line: usize,
        #[source]
        source: GestureError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureLogRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_key: Option<KeyId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thumb: Option<Thumb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointer_id: Option<u64>,
    pub samples: Vec<[f64; 3]>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl GestureLogRecord {
    pub fn from_gesture(g: &Gesture) -> Self {
        Self {
            target_key: None,
            thumb: None,
            stimulus_t: None,
            pointer_id: Some(g.pointer_id),
            samples: g.samples().iter().map(|s| [s.x, s.y, s.t]).collect(),
            extra: Map::new(),
        }
    }

    pub fn gesture(&self) -> Result<Gesture, GestureError> {
        Gesture::new(
            self.samples
                .iter()
                .map(|&[x, y, t]| TouchSample::new(x, y, t))
                .collect(),
            self.pointer_id.unwrap_or(0),
        )
    }

    /// The recorded thumb, or the one inferred from the start position.
    pub fn thumb_or_inferred(&self, pad: &PadSpec) -> Option<Thumb> {
        self.thumb.or_else(|| {
            self.samples
                .first()
                .map(|s| crate::recognizer::thumb_at(s[0], pad))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "marker", rename_all = "snake_case")]
pub enum PhraseMarker {
    PhraseStart {
        text: String,
        #[serde(flatten)]
        extra: Map<String, Value>,
    },
    PhraseEnd {
        #[serde(flatten)]
        extra: Map<String, Value>,
    },
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogLine {
    Marker(PhraseMarker),
    Gesture(GestureLogRecord),
}

impl LogLine {
    pub fn phrase_start(text: impl Into<String>) -> Self {
        LogLine::Marker(PhraseMarker::PhraseStart {
            text: text.into(),
            extra: Map::new(),
        })
    }

    pub fn phrase_end() -> Self {
        LogLine::Marker(PhraseMarker::PhraseEnd { extra: Map::new() })
    }
}

pub fn parse_lines<R: BufRead>(reader: R) -> Result<Vec<LogLine>, LogError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine =
            serde_json::from_str(&line).map_err(|source| LogError::Parse { line: i + 1, source })?;
        if let LogLine::Gesture(rec) = &parsed {
            rec.gesture()
                .map_err(|source| LogError::Gesture { line: i + 1, source })?;
        }
        out.push(parsed);
    }
    Ok(out)
}

pub fn write_lines<W: Write>(mut w: W, lines: &[LogLine]) -> io::Result<()> {
    for line in lines {
        serde_json::to_writer(&mut w, line)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_session_log(path: impl AsRef<Path>) -> Result<Vec<LogLine>, LogError> {
    parse_lines(BufReader::new(File::open(path)?))
}

pub fn write_session_log(path: impl AsRef<Path>, lines: &[LogLine]) -> Result<(), LogError> {
    write_lines(BufWriter::new(File::create(path)?), lines)?;
    Ok(())
}

/// Gesture records only; phrase markers are skipped.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<GestureLogRecord>, LogError> {
    Ok(read_session_log(path)?
        .into_iter()
        .filter_map(|l| match l {
            LogLine::Gesture(r) => Some(r),
            LogLine::Marker(_) => None,
        })
        .collect())
}

pub fn write_records(path: impl AsRef<Path>, records: &[GestureLogRecord]) -> Result<(), LogError> {
    let lines: Vec<_> = records.iter().cloned().map(LogLine::Gesture).collect();
    write_session_log(path, &lines)
}
