//! UDP listener thread for TUIO input.
//!
//! The thread decodes datagrams, tracks cursors and hands contact events to
//! the consumer over an unbounded channel, so it never waits on the
//! consumer. Malformed datagrams and rejected frames are counted and
//! dropped.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};
use serde::Serialize;

use crate::osc::parse_packet;
use crate::tuio::{frame_from_messages, ContactEvent, TuioTracker};
use crate::types::PadSpec;

pub const DEFAULT_TUIO_PORT: u16 = 3333;

#[derive(Debug, Default)]
pub struct ListenerStats {
    pub datagrams: AtomicU64,
    pub malformed: AtomicU64,
    pub rejected_frames: AtomicU64,
    pub duplicate_frames: AtomicU64,
    pub ignored_messages: AtomicU64,
    pub events: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StatsSnapshot {
    pub datagrams: u64,
    pub malformed: u64,
    pub rejected_frames: u64,
    pub duplicate_frames: u64,
    pub ignored_messages: u64,
    pub events: u64,
}

impl ListenerStats {
    pub fn snapshot(&self) -> StatsSnapshot {
        let get = |a: &AtomicU64| a.load(Ordering::Relaxed);
        StatsSnapshot {
            datagrams: get(&self.datagrams),
            malformed: get(&self.malformed),
            rejected_frames: get(&self.rejected_frames),
            duplicate_frames: get(&self.duplicate_frames),
            ignored_messages: get(&self.ignored_messages),
            events: get(&self.events),
        }
    }
}

/// Feeds one datagram through the decoder and tracker.
pub fn handle_datagram(
    bytes: &[u8],
    tracker: &mut TuioTracker,
    t_ms: f64,
    stats: &ListenerStats,
    out: &Sender<ContactEvent>,
) -> bool {
    stats.datagrams.fetch_add(1, Ordering::Relaxed);
    let msgs = match parse_packet(bytes) {
        Ok(m) => m,
        Err(e) => {
            ::log::debug!("dropping datagram: {e}");
            stats.malformed.fetch_add(1, Ordering::Relaxed);
            return true;
        }
    };
    let frame = match frame_from_messages(&msgs) {
        Ok((frame, ignored)) => {
            stats.ignored_messages.fetch_add(ignored as u64, Ordering::Relaxed);
            frame
        }
        Err(e) => {
            ::log::debug!("dropping datagram: {e}");
            stats.malformed.fetch_add(1, Ordering::Relaxed);
            return true;
        }
    };
    let Some(frame) = frame else { return true };
    let before = tracker.stats();
    let events = tracker.process(&frame, t_ms);
    let after = tracker.stats();
    stats
        .duplicate_frames
        .fetch_add(after.duplicate_frames - before.duplicate_frames, Ordering::Relaxed);
    match events {
        Ok(events) => {
            for e in events {
                stats.events.fetch_add(1, Ordering::Relaxed);
                if out.send(e).is_err() {
                    return false;
                }
            }
        }
        Err(e) => {
            ::log::debug!("rejecting frame: {e}");
            stats.rejected_frames.fetch_add(1, Ordering::Relaxed);
        }
    }
    true
}

pub struct TuioListener {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    stats: Arc<ListenerStats>,
    handle: Option<JoinHandle<()>>,
}

impl TuioListener {
    /// Binds `addr` and starts the listener thread. Event timestamps are
    /// milliseconds since `epoch`.
    pub fn spawn(addr: impl ToSocketAddrs, pad: PadSpec, epoch: Instant) -> io::Result<(Self, Receiver<ContactEvent>)> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let local_addr = socket.local_addr()?;
        let (tx, rx) = unbounded();
        let stop = Arc::new(AtomicBool::new(false));
        let stats = Arc::new(ListenerStats::default());
        let handle = {
            let stop = stop.clone();
            let stats = stats.clone();
            std::thread::Builder::new().name("tuio-listener".into()).spawn(move || {
                let mut tracker = TuioTracker::new(pad);
                let mut buf = vec![0u8; 65_536];
                while !stop.load(Ordering::Relaxed) {
                    match socket.recv_from(&mut buf) {
                        Ok((n, _)) => {
                            let t = epoch.elapsed().as_secs_f64() * 1000.0;
                            if !handle_datagram(&buf[..n], &mut tracker, t, &stats, &tx) {
                                break;
                            }
                        }
                        Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
                        Err(e) => {
                            ::log::warn!("tuio listener stopped: {e}");
                            break;
                        }
                    }
                }
            })?
        };
        Ok((
            Self {
                local_addr,
                stop,
                stats,
                handle: Some(handle),
            },
            rx,
        ))
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn stats(&self) -> StatsSnapshot {
        self.stats.snapshot()
    }

    pub fn shutdown(mut self) {
        self.stop_thread();
    }

    fn stop_thread(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for TuioListener {
    fn drop(&mut self) {
        self.stop_thread();
    }
}
