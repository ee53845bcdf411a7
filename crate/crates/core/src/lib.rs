//! Decoding engine for DuSK, a two-thumb stroke keyboard operated on a
//! touchpad without looking at it.
//!
//! Coordinates on the pad are millimetres from the top-left corner with Y
//! growing downward; times are milliseconds. Keyboard coordinates are key
//! units on a staggered QWERTY grid with 'q' at the origin.

pub mod calibration;
pub mod decoder;
pub mod exec;
pub mod expert;
pub mod layout;
pub mod lexicon;
pub mod listener;
pub mod log;
pub mod metrics;
pub mod osc;
pub mod recognizer;
pub mod replay;
pub mod sim;
pub mod tuio;
pub mod types;

pub use calibration::{CalibrationProfile, TimingTable};
pub use decoder::{DecoderConfig, DecoderOptions, KeyEvent, Session};
pub use exec::Exec;
pub use layout::Layout;
pub use lexicon::Lexicon;
pub use types::{Gesture, KeyId, NormalizedEndpoint, PadSpec, Thumb, TouchSample};
