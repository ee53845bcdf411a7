//! WebSocket session service: one decoder session per connection, fed by
//! browser touch events or a TUIO bridge.

pub mod connection;
pub mod protocol;
pub mod server;

pub use connection::Connection;
pub use protocol::{ClientMessage, ServerMessage};
pub use server::{router, serve, AppState, TuioBridge};
