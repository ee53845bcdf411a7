//! Replays recorded session logs through a decoder session.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::decoder::{DecodeError, DecoderConfig, DecoderOptions, KeyEvent, Session};
use crate::log::{LogLine, PhraseMarker};
use crate::metrics::{BlockReport, MetricsError, PhraseInput, PhraseReport};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("gesture {index}: {source}")]
    Gesture {
        index: usize,
        #[source]
        source: DecodeError,
    },
}

/// Measures for the phrase a session has typed since its last reset.
pub fn phrase_report(session: &Session, presented: &str, events: &[KeyEvent]) -> Result<PhraseReport, MetricsError> {
    let autocorrections = events
        .iter()
        .filter(|e| matches!(e, KeyEvent::AutocorrectApplied { .. }))
        .count()
        .saturating_sub(
            events
                .iter()
                .filter(|e| matches!(e, KeyEvent::AutocorrectReverted { .. }))
                .count(),
        );
    let completions_accepted = events
        .iter()
        .filter(|e| matches!(e, KeyEvent::SuggestAccepted { .. }))
        .count();
    let text = session.text();
    PhraseReport::compute(PhraseInput {
        presented,
        transcribed: &text,
        stream: session.input_stream(),
        timings: session.timings(),
        autocorrections,
        completions_accepted,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PhraseOutcome {
    pub presented: String,
    pub transcribed: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub options: DecoderOptions,
    pub block: BlockReport,
    pub outcomes: Vec<PhraseOutcome>,
    /// Session text at the end of the log.
    pub final_text: String,
    #[serde(skip)]
    pub events: Vec<KeyEvent>,
}

/// Feeds every gesture of a session log, in order, into one session. Each
/// phrase start marker resets the session; each phrase end marker closes a
/// phrase report.
pub fn replay(config: Arc<DecoderConfig>, options: DecoderOptions, lines: &[LogLine]) -> Result<ReplayReport, ReplayError> {
    let mut session = Session::new(config, options);
    let mut presented: Option<String> = None;
    let mut phrase_events: Vec<KeyEvent> = Vec::new();
    let mut all_events = Vec::new();
    let mut reports = Vec::new();
    let mut outcomes = Vec::new();
    let mut gesture_index = 0;
    for line in lines {
        match line {
            LogLine::Marker(PhraseMarker::PhraseStart { text, .. }) => {
                session.reset();
                phrase_events.clear();
                presented = Some(text.clone());
            }
            LogLine::Marker(PhraseMarker::PhraseEnd { .. }) => {
                if let Some(p) = presented.take() {
                    let transcribed = session.text();
                    let error = match phrase_report(&session, &p, &phrase_events) {
                        Ok(r) => {
                            reports.push(r);
                            None
                        }
                        Err(e) => Some(e.to_string()),
                    };
                    outcomes.push(PhraseOutcome {
                        presented: p,
                        transcribed,
                        error,
                    });
                }
            }
            LogLine::Gesture(rec) => {
                let g = rec.gesture().map_err(|e| ReplayError::Gesture {
                    index: gesture_index,
                    source: e.into(),
                })?;
                let events = session.feed_touch(&g).map_err(|source| ReplayError::Gesture {
                    index: gesture_index,
                    source,
                })?;
                gesture_index += 1;
                phrase_events.extend(events.iter().cloned());
                all_events.extend(events);
            }
        }
    }
    Ok(ReplayReport {
        options,
        block: BlockReport::new(reports),
        outcomes,
        final_text: session.text(),
        events: all_events,
    })
}
