//! TUIO 1.1 `/tuio/2Dcur` cursor tracking.
//!
//! A frame is the set of 2Dcur messages in one datagram: `alive` lists the
//! live session ids, `set` updates one cursor (normalized 0..1
//! coordinates) and `fseq` numbers the frame. Other profiles are ignored.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::osc::{OscArg, OscMessage, OscPacket, IMMEDIATELY};
use crate::types::{Gesture, PadSpec, TouchSample};

pub const CURSOR_ADDRESS: &str = "/tuio/2Dcur";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuioError {
    #[error("malformed {command:?} message")]
    Malformed { command: String },
    #[error("set for session {id}, which is not alive")]
    SetForDeadId { id: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CursorSet {
    pub id: i32,
    pub x: f32,
    pub y: f32,
    pub vx: f32,
    pub vy: f32,
    pub accel: f32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TuioFrame {
    pub fseq: Option<i32>,
    pub alive: Option<Vec<i32>>,
    pub set: Vec<CursorSet>,
}

impl TuioFrame {
    /// The frame as a TUIO bundle: `source`, `alive`, `set`s, `fseq`.
    pub fn to_packet(&self) -> OscPacket {
        let msg = |args: Vec<OscArg>| OscPacket::Message(OscMessage::new(CURSOR_ADDRESS, args));
        let mut elements = vec![msg(vec![OscArg::Str("source".into()), OscArg::Str("dusk".into())])];
        if let Some(alive) = &self.alive {
            let mut args = vec![OscArg::Str("alive".into())];
            args.extend(alive.iter().map(|&i| OscArg::Int(i)));
            elements.push(msg(args));
        }
        for s in &self.set {
            elements.push(msg(vec![
                OscArg::Str("set".into()),
                OscArg::Int(s.id),
                OscArg::Float(s.x),
                OscArg::Float(s.y),
                OscArg::Float(s.vx),
                OscArg::Float(s.vy),
                OscArg::Float(s.accel),
            ]));
        }
        if let Some(f) = self.fseq {
            elements.push(msg(vec![OscArg::Str("fseq".into()), OscArg::Int(f)]));
        }
        OscPacket::Bundle {
            timetag: IMMEDIATELY,
            elements,
        }
    }
}

/// Collects the cursor messages of one datagram into a frame. Returns the
/// frame (if any 2Dcur message was present) and how many messages from
/// other profiles were ignored.
pub fn frame_from_messages(msgs: &[OscMessage]) -> Result<(Option<TuioFrame>, usize), TuioError> {
    let mut frame = TuioFrame::default();
    let mut seen = false;
    let mut ignored = 0;
    for m in msgs {
        if m.address != CURSOR_ADDRESS {
            ignored += 1;
            continue;
        }
        seen = true;
        let command = m.args.first().and_then(OscArg::as_str).unwrap_or("");
        let bad = || TuioError::Malformed {
            command: command.to_string(),
        };
        match command {
            "alive" => {
                let ids = m.args[1..].iter().map(|a| a.as_int().ok_or_else(bad)).collect::<Result<_, _>>()?;
                frame.alive = Some(ids);
            }
            "set" => {
                if m.args.len() < 4 {
                    return Err(bad());
                }
                let f = |i: usize| m.args.get(i).map_or(Ok(0.0), |a| a.as_float().ok_or_else(bad));
                frame.set.push(CursorSet {
                    id: m.args[1].as_int().ok_or_else(bad)?,
                    x: f(2)?,
                    y: f(3)?,
                    vx: f(4)?,
                    vy: f(5)?,
                    accel: f(6)?,
                });
            }
            "fseq" => frame.fseq = Some(m.args.get(1).and_then(OscArg::as_int).ok_or_else(bad)?),
            "source" => {}
            _ => return Err(bad()),
        }
    }
    Ok((seen.then_some(frame), ignored))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum ContactEvent {
    Down { pointer_id: u64, sample: TouchSample },
    Move { pointer_id: u64, sample: TouchSample },
    Up { pointer_id: u64, sample: TouchSample },
}

impl ContactEvent {
    pub fn pointer_id(&self) -> u64 {
        match self {
            ContactEvent::Down { pointer_id, .. }
            | ContactEvent::Move { pointer_id, .. }
            | ContactEvent::Up { pointer_id, .. } => *pointer_id,
        }
    }

    pub fn sample(&self) -> TouchSample {
        match self {
            ContactEvent::Down { sample, .. } | ContactEvent::Move { sample, .. } | ContactEvent::Up { sample, .. } => {
                *sample
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TrackerStats {
    pub frames: u64,
    pub duplicate_frames: u64,
    pub rejected_frames: u64,
}

/// Turns TUIO frames into per-contact down/move/up events.
///
/// A session id produces `Down` followed by `Move` on its first `set`,
/// `Move` on every later `set` that changes its position, and `Up` (at the
/// last known position) when it leaves the alive list. Frames whose `fseq`
/// is not newer than the last accepted one are dropped, except `-1`, which
/// marks a redundant resend.
#[derive(Debug, Clone)]
pub struct TuioTracker {
    pad: PadSpec,
    last_fseq: Option<i32>,
    alive: BTreeSet<i32>,
    positions: BTreeMap<i32, TouchSample>,
    stats: TrackerStats,
}

impl TuioTracker {
    pub fn new(pad: PadSpec) -> Self {
        Self {
            pad,
            last_fseq: None,
            alive: BTreeSet::new(),
            positions: BTreeMap::new(),
            stats: TrackerStats::default(),
        }
    }

    pub fn stats(&self) -> TrackerStats {
        self.stats
    }

    fn to_pad(&self, s: &CursorSet, t: f64) -> TouchSample {
        let x = (s.x as f64).clamp(0.0, 1.0) * self.pad.width;
        let y = (s.y as f64).clamp(0.0, 1.0) * self.pad.height;
        TouchSample::new(x, y, t)
    }

    pub fn process(&mut self, frame: &TuioFrame, t_ms: f64) -> Result<Vec<ContactEvent>, TuioError> {
        if let (Some(f), Some(last)) = (frame.fseq, self.last_fseq) {
            if f != -1 && f <= last {
                self.stats.duplicate_frames += 1;
                return Ok(Vec::new());
            }
        }
        let alive: BTreeSet<i32> = match &frame.alive {
            Some(ids) => ids.iter().copied().collect(),
            None => self.alive.clone(),
        };
        if let Some(s) = frame.set.iter().find(|s| !alive.contains(&s.id)) {
            self.stats.rejected_frames += 1;
            return Err(TuioError::SetForDeadId { id: s.id });
        }
        self.stats.frames += 1;
        if let Some(f) = frame.fseq.filter(|&f| f != -1) {
            self.last_fseq = Some(f);
        }

        let mut events = Vec::new();
        let gone: Vec<i32> = self.alive.difference(&alive).copied().collect();
        for id in gone {
            if let Some(last) = self.positions.remove(&id) {
                events.push(ContactEvent::Up {
                    pointer_id: id as u64,
                    sample: TouchSample::new(last.x, last.y, t_ms.max(last.t)),
                });
            }
        }
        for s in &frame.set {
            let sample = self.to_pad(s, t_ms);
            let pointer_id = s.id as u64;
            match self.positions.get(&s.id) {
                None => {
                    events.push(ContactEvent::Down { pointer_id, sample });
                    events.push(ContactEvent::Move { pointer_id, sample });
                }
                Some(prev) if prev.x == sample.x && prev.y == sample.y => continue,
                Some(_) => events.push(ContactEvent::Move { pointer_id, sample }),
            }
            self.positions.insert(s.id, sample);
        }
        self.alive = alive;
        Ok(events)
    }
}

/// Builds gestures from contact events, one per down..up.
#[derive(Debug, Clone, Default)]
pub struct GestureAssembler {
    open: BTreeMap<u64, Vec<TouchSample>>,
    pub orphan_events: u64,
}

impl GestureAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_open(&self, pointer_id: u64) -> bool {
        self.open.contains_key(&pointer_id)
    }

    /// Returns the finished gesture on `Up`.
    pub fn push(&mut self, ev: &ContactEvent) -> Option<Gesture> {
        match *ev {
            ContactEvent::Down { pointer_id, sample } => {
                self.open.insert(pointer_id, vec![sample]);
                None
            }
            ContactEvent::Move { pointer_id, sample } => {
                match self.open.get_mut(&pointer_id) {
                    Some(v) => v.push(sample),
                    None => self.orphan_events += 1,
                }
                None
            }
            ContactEvent::Up { pointer_id, sample } => {
                let Some(mut v) = self.open.remove(&pointer_id) else {
                    self.orphan_events += 1;
                    return None;
                };
                v.push(sample);
                Gesture::new(v, pointer_id).ok()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osc::{encode_packet, parse_packet};

    fn frame(fseq: i32, alive: &[i32], set: &[(i32, f32, f32)]) -> TuioFrame {
        TuioFrame {
            fseq: Some(fseq),
            alive: Some(alive.to_vec()),
            set: set
                .iter()
                .map(|&(id, x, y)| CursorSet { id, x, y, vx: 0.0, vy: 0.0, accel: 0.0 })
                .collect(),
        }
    }

    fn phases(evs: &[ContactEvent]) -> Vec<(&'static str, u64)> {
        evs.iter()
            .map(|e| match e {
                ContactEvent::Down { pointer_id, .. } => ("down", *pointer_id),
                ContactEvent::Move { pointer_id, .. } => ("move", *pointer_id),
                ContactEvent::Up { pointer_id, .. } => ("up", *pointer_id),
            })
            .collect()
    }

    #[test]
    fn single_contact_lifecycle() {
        let mut t = TuioTracker::new(PadSpec::default());
        let mut evs = t.process(&frame(1, &[1], &[(1, 0.5, 0.5)]), 0.0).unwrap();
        evs.extend(t.process(&frame(2, &[], &[]), 16.0).unwrap());
        assert_eq!(phases(&evs), [("down", 1), ("move", 1), ("up", 1)]);
        let s = evs[0].sample();
        assert_eq!((s.x, s.y), (67.0, 31.5));
        let mut asm = GestureAssembler::new();
        let g: Vec<_> = evs.iter().filter_map(|e| asm.push(e)).collect();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].duration_ms(), 16.0);
    }

    #[test]
    fn interleaved_contacts() {
        let mut t = TuioTracker::new(PadSpec::default());
        let mut evs = Vec::new();
        evs.extend(t.process(&frame(1, &[1], &[(1, 0.2, 0.5)]), 0.0).unwrap());
        evs.extend(t.process(&frame(2, &[1, 2], &[(1, 0.25, 0.5), (2, 0.8, 0.5)]), 10.0).unwrap());
        evs.extend(t.process(&frame(3, &[2], &[(2, 0.7, 0.4)]), 20.0).unwrap());
        evs.extend(t.process(&frame(4, &[], &[]), 30.0).unwrap());
        let mut asm = GestureAssembler::new();
        let gs: Vec<_> = evs.iter().filter_map(|e| asm.push(e)).collect();
        assert_eq!(gs.len(), 2);
        assert_ne!(gs[0].pointer_id, gs[1].pointer_id);
        assert_eq!(asm.orphan_events, 0);
    }

    #[test]
    fn duplicate_fseq_is_dropped() {
        let mut t = TuioTracker::new(PadSpec::default());
        let f = frame(5, &[1], &[(1, 0.5, 0.5)]);
        assert_eq!(t.process(&f, 0.0).unwrap().len(), 2);
        assert!(t.process(&f, 1.0).unwrap().is_empty());
        assert_eq!(t.stats().duplicate_frames, 1);
        // Redundant resends are processed but repeat no moves.
        assert!(t.process(&frame(-1, &[1], &[(1, 0.5, 0.5)]), 2.0).unwrap().is_empty());
    }

    #[test]
    fn set_for_dead_id_rejects_frame() {
        let mut t = TuioTracker::new(PadSpec::default());
        assert_eq!(
            t.process(&frame(1, &[1], &[(2, 0.5, 0.5)]), 0.0),
            Err(TuioError::SetForDeadId { id: 2 })
        );
        assert_eq!(t.stats().rejected_frames, 1);
        assert!(t.process(&frame(2, &[1], &[(1, 0.5, 0.5)]), 1.0).is_ok());
    }

    #[test]
    fn frame_round_trips_through_osc() {
        let f = frame(9, &[3, 4], &[(3, 0.1, 0.2), (4, 0.9, 0.8)]);
        let msgs = parse_packet(&encode_packet(&f.to_packet())).unwrap();
        let (back, ignored) = frame_from_messages(&msgs).unwrap();
        assert_eq!(back.unwrap(), f);
        assert_eq!(ignored, 0);
        let other = [OscMessage::new("/tuio/2Dobj", vec![OscArg::Str("alive".into())])];
        assert_eq!(frame_from_messages(&other).unwrap(), (None, 1));
    }
}
