//! JSON messages exchanged over the session WebSocket.
//!
//! Every frame is one JSON object with a `kind` field. The server speaks
//! first with `hello`. See `docs/protocol.md` for worked examples.

use serde::{Deserialize, Serialize};

use dusk_core::decoder::KeyEvent;
use dusk_core::metrics::PhraseReport;
use dusk_core::{DecoderOptions, Layout, PadSpec, Thumb};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    TouchDown(TouchPoint),
    TouchMove(TouchPoint),
    TouchUp(TouchPoint),
    StartPhrase { text: String },
    EndPhrase,
    SetOptions { predictions_enabled: bool },
}

/// A touch sample in normalized pad coordinates: x and y in `[0, 1]`,
/// origin top left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TouchPoint {
    #[serde(default)]
    pub pointer_id: u64,
    pub x: f64,
    pub y: f64,
    pub t_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ServerMessage {
    Hello {
        version: u32,
        pad: PadSpec,
        layout: Layout,
        options: DecoderOptions,
    },
    State(StatePayload),
    /// Keyboard-space position of a thumb's cursor, in key units.
    Cursor { thumb: Thumb, x: f64, y: f64 },
    Metrics { report: PhraseReport },
    Error { code: ErrorCode, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePayload {
    pub committed_text: String,
    pub current_word: String,
    pub suggestions: Vec<String>,
    /// Last key event of the gesture that produced this state.
    pub last_key: Option<KeyEvent>,
    /// All key events of that gesture, cursor feedback excluded.
    pub events: Vec<KeyEvent>,
    pub phrase: Option<String>,
    pub options: DecoderOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// The frame is not a valid client message.
    Malformed,
    /// The message is valid but not allowed now.
    Protocol,
    /// The decoder rejected a completed gesture.
    Decode,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_messages_parse() {
        let m: ClientMessage =
            serde_json::from_str(r#"{"kind":"touch_down","pointer_id":3,"x":0.25,"y":0.5,"t_ms":10}"#).unwrap();
        assert_eq!(
            m,
            ClientMessage::TouchDown(TouchPoint {
                pointer_id: 3,
                x: 0.25,
                y: 0.5,
                t_ms: 10.0
            })
        );
        let m: ClientMessage = serde_json::from_str(r#"{"kind":"end_phrase"}"#).unwrap();
        assert_eq!(m, ClientMessage::EndPhrase);
        assert!(serde_json::from_str::<ClientMessage>(r#"{"kind":"touch_up","x":0,"y":0}"#).is_err());
        assert!(serde_json::from_str::<ClientMessage>(r#"{"kind":"shout"}"#).is_err());
    }

    #[test]
    fn server_messages_round_trip() {
        let m = ServerMessage::Cursor {
            thumb: Thumb::Left,
            x: 2.5,
            y: 1.0,
        };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"kind":"cursor","thumb":"left","x":2.5,"y":1.0}"#);
        assert_eq!(serde_json::from_str::<ServerMessage>(&s).unwrap(), m);
    }
}
