//! Per-connection session state. Independent of the transport so that
//! transcripts can be replayed without a network.

use std::collections::BTreeMap;
use std::sync::Arc;

use dusk_core::decoder::KeyEvent;
use dusk_core::log::{GestureLogRecord, LogLine};
use dusk_core::recognizer::thumb_at;
use dusk_core::replay::phrase_report;
use dusk_core::{DecoderConfig, DecoderOptions, Gesture, Session, Thumb, TouchSample};

use crate::protocol::{ClientMessage, ErrorCode, ServerMessage, StatePayload, TouchPoint, PROTOCOL_VERSION};

/// Minimum client-time spacing of cursor messages for one thumb.
pub const CURSOR_INTERVAL_MS: f64 = 1000.0 / 60.0;

#[derive(Debug, Clone)]
struct OpenContact {
    thumb: Thumb,
    samples: Vec<TouchSample>,
}

pub struct Connection {
    session: Session,
    contacts: BTreeMap<u64, OpenContact>,
    last_cursor: BTreeMap<Thumb, f64>,
    phrase: Option<String>,
    phrase_events: Vec<KeyEvent>,
    log: Vec<LogLine>,
}

impl Connection {
    pub fn new(config: Arc<DecoderConfig>, options: DecoderOptions) -> Self {
        Self {
            session: Session::new(config, options),
            contacts: BTreeMap::new(),
            last_cursor: BTreeMap::new(),
            phrase: None,
            phrase_events: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn hello(&self) -> ServerMessage {
        let cfg = self.session.config();
        ServerMessage::Hello {
            version: PROTOCOL_VERSION,
            pad: cfg.profile.pad,
            layout: cfg.layout.clone(),
            options: self.session.options(),
        }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    /// Everything this connection has typed, as a session log that
    /// `replay` accepts.
    pub fn log(&self) -> &[LogLine] {
        &self.log
    }

    /// Parses and handles one text frame.
    pub fn handle_text(&mut self, text: &str) -> Vec<ServerMessage> {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => vec![error(ErrorCode::Malformed, e.to_string())],
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        match msg {
            ClientMessage::TouchDown(p) => self.down(p),
            ClientMessage::TouchMove(p) => self.moved(p),
            ClientMessage::TouchUp(p) => self.up(p),
            ClientMessage::StartPhrase { text } => {
                self.session.reset();
                self.contacts.clear();
                self.phrase_events.clear();
                self.log.push(LogLine::phrase_start(text.clone()));
                self.phrase = Some(text);
                vec![self.state(Vec::new())]
            }
            ClientMessage::EndPhrase => {
                let Some(presented) = self.phrase.take() else {
                    return vec![error(ErrorCode::Protocol, "end_phrase without start_phrase")];
                };
                self.log.push(LogLine::phrase_end());
                match phrase_report(&self.session, &presented, &self.phrase_events) {
                    Ok(report) => vec![ServerMessage::Metrics { report }],
                    Err(e) => vec![error(ErrorCode::Protocol, format!("no metrics for phrase: {e}"))],
                }
            }
            ClientMessage::SetOptions { predictions_enabled } => {
                self.session.set_options(DecoderOptions { predictions_enabled });
                vec![self.state(Vec::new())]
            }
        }
    }

    fn sample(&self, p: &TouchPoint) -> Result<TouchSample, Box<ServerMessage>> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(p.x) && in_unit(p.y) && p.t_ms.is_finite()) {
            return Err(Box::new(error(
                ErrorCode::Malformed,
                format!("touch point out of range: x={}, y={}, t_ms={}", p.x, p.y, p.t_ms),
            )));
        }
        let pad = self.session.config().profile.pad;
        Ok(TouchSample::new(p.x * pad.width, p.y * pad.height, p.t_ms))
    }

    fn down(&mut self, p: TouchPoint) -> Vec<ServerMessage> {
        if self.contacts.contains_key(&p.pointer_id) {
            return vec![error(ErrorCode::Protocol, format!("pointer {} is already down", p.pointer_id))];
        }
        let s = match self.sample(&p) {
            Ok(s) => s,
            Err(e) => return vec![*e],
        };
        let thumb = thumb_at(s.x, &self.session.config().profile.pad);
        self.contacts.insert(
            p.pointer_id,
            OpenContact {
                thumb,
                samples: vec![s],
            },
        );
        self.cursor(thumb, s, s, true).into_iter().collect()
    }

    fn moved(&mut self, p: TouchPoint) -> Vec<ServerMessage> {
        let s = match self.push_sample(&p) {
            Ok(s) => s,
            Err(e) => return vec![*e],
        };
        let c = &self.contacts[&p.pointer_id];
        let (thumb, start) = (c.thumb, c.samples[0]);
        self.cursor(thumb, start, s, false).into_iter().collect()
    }

    fn up(&mut self, p: TouchPoint) -> Vec<ServerMessage> {
        if let Err(e) = self.push_sample(&p) {
            return vec![*e];
        }
        let contact = self.contacts.remove(&p.pointer_id).expect("checked by push_sample");
        let gesture = match Gesture::new(contact.samples, p.pointer_id) {
            Ok(g) => g,
            Err(e) => return vec![error(ErrorCode::Malformed, format!("pointer {}: {e}", p.pointer_id))],
        };
        match self.session.feed_touch(&gesture) {
            Ok(events) => {
                self.log.push(LogLine::Gesture(GestureLogRecord::from_gesture(&gesture)));
                let events: Vec<KeyEvent> = events
                    .into_iter()
                    .filter(|e| !matches!(e, KeyEvent::CursorFeedback { .. }))
                    .collect();
                self.phrase_events.extend(events.iter().cloned());
                vec![self.state(events)]
            }
            Err(e) => vec![error(ErrorCode::Decode, e.to_string())],
        }
    }

    fn push_sample(&mut self, p: &TouchPoint) -> Result<TouchSample, Box<ServerMessage>> {
        if !self.contacts.contains_key(&p.pointer_id) {
            return Err(Box::new(error(ErrorCode::Protocol, format!("pointer {} is not down", p.pointer_id))));
        }
        let s = self.sample(p)?;
        let samples = &mut self.contacts.get_mut(&p.pointer_id).unwrap().samples;
        let prev = samples.last().unwrap().t;
        if s.t < prev {
            return Err(Box::new(error(
                ErrorCode::Protocol,
                format!("pointer {}: t_ms {} is before {prev}", p.pointer_id, s.t),
            )));
        }
        samples.push(s);
        Ok(s)
    }

    fn cursor(&mut self, thumb: Thumb, start: TouchSample, now: TouchSample, force: bool) -> Option<ServerMessage> {
        if !force {
            if let Some(&last) = self.last_cursor.get(&thumb) {
                if now.t - last < CURSOR_INTERVAL_MS {
                    return None;
                }
            }
        }
        self.last_cursor.insert(thumb, now.t);
        let (x, y) = self.session.cursor(thumb, start, now);
        Some(ServerMessage::Cursor { thumb, x, y })
    }

    fn state(&self, events: Vec<KeyEvent>) -> ServerMessage {
        ServerMessage::State(StatePayload {
            committed_text: self.session.committed_text().to_string(),
            current_word: self.session.current_word().to_string(),
            suggestions: self.session.suggestions().to_vec(),
            last_key: events.last().cloned(),
            events,
            phrase: self.phrase.clone(),
            options: self.session.options(),
        })
    }
}

fn error(code: ErrorCode, message: impl Into<String>) -> ServerMessage {
    ServerMessage::Error {
        code,
        message: message.into(),
    }
}
