//! HTTP and WebSocket front end.

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::broadcast;
use tower_http::services::ServeDir;

use dusk_core::listener::TuioListener;
use dusk_core::tuio::ContactEvent;
use dusk_core::{DecoderConfig, DecoderOptions, PadSpec};

use crate::connection::Connection;
use crate::protocol::{ClientMessage, ErrorCode, ServerMessage, TouchPoint};

/// TUIO contacts use pointer ids from here up so they never collide with
/// ids chosen by a browser client.
pub const TUIO_POINTER_BASE: u64 = 1 << 32;

const TUIO_CHANNEL_CAPACITY: usize = 4096;

#[derive(Clone)]
pub struct AppState {
    pub config: Arc<DecoderConfig>,
    pub options: DecoderOptions,
    pub tuio: Option<broadcast::Sender<ClientMessage>>,
}

impl AppState {
    pub fn new(config: Arc<DecoderConfig>, options: DecoderOptions) -> Self {
        Self {
            config,
            options,
            tuio: None,
        }
    }
}

/// Routes: `/ws` for sessions, everything else from `assets` if given.
pub fn router(state: AppState, assets: Option<PathBuf>) -> Router {
    let app = Router::new().route("/ws", get(ws_handler));
    let app = match assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { "dusk session service: connect a WebSocket to /ws\n" })),
    };
    app.with_state(state)
}

pub async fn serve(listener: TcpListener, state: AppState, assets: Option<PathBuf>) -> io::Result<()> {
    axum::serve(listener, router(state, assets)).await
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| run_socket(socket, state)).into_response()
}

async fn send_all(socket: &mut WebSocket, msgs: &[ServerMessage]) -> Result<(), axum::Error> {
    for m in msgs {
        let text = serde_json::to_string(m).expect("server messages serialize");
        socket.send(Message::Text(text.into())).await?;
    }
    Ok(())
}

async fn next_tuio(rx: &mut Option<broadcast::Receiver<ClientMessage>>) -> Option<ClientMessage> {
    let Some(rx) = rx else {
        return std::future::pending().await;
    };
    loop {
        match rx.recv().await {
            Ok(m) => return Some(m),
            Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("session dropped {n} TUIO events"),
            Err(broadcast::error::RecvError::Closed) => return None,
        }
    }
}

async fn run_socket(mut socket: WebSocket, state: AppState) {
    let mut conn = Connection::new(state.config.clone(), state.options);
    let mut tuio = state.tuio.as_ref().map(|tx| tx.subscribe());
    if send_all(&mut socket, &[conn.hello()]).await.is_err() {
        return;
    }
    loop {
        let out = tokio::select! {
            frame = socket.recv() => match frame {
                Some(Ok(Message::Text(t))) => conn.handle_text(t.as_str()),
                Some(Ok(Message::Binary(_))) => vec![ServerMessage::Error {
                    code: ErrorCode::Malformed,
                    message: "binary frames are not supported".into(),
                }],
                Some(Ok(Message::Close(_))) | None => break,
                Some(Ok(_)) => continue,
                Some(Err(e)) => {
                    log::debug!("websocket error: {e}");
                    break;
                }
            },
            msg = next_tuio(&mut tuio) => match msg {
                Some(m) => conn.handle(m),
                None => {
                    tuio = None;
                    continue;
                }
            },
        };
        if send_all(&mut socket, &out).await.is_err() {
            break;
        }
    }
}

/// A TUIO contact event as the client message a browser would have sent.
pub fn contact_to_client(ev: &ContactEvent, pad: &PadSpec) -> ClientMessage {
    let s = ev.sample();
    let p = TouchPoint {
        pointer_id: TUIO_POINTER_BASE + ev.pointer_id(),
        x: (s.x / pad.width).clamp(0.0, 1.0),
        y: (s.y / pad.height).clamp(0.0, 1.0),
        t_ms: s.t,
    };
    match ev {
        ContactEvent::Down { .. } => ClientMessage::TouchDown(p),
        ContactEvent::Move { .. } => ClientMessage::TouchMove(p),
        ContactEvent::Up { .. } => ClientMessage::TouchUp(p),
    }
}

/// Keeps the UDP listener alive while the service runs.
pub struct TuioBridge {
    listener: TuioListener,
}

impl TuioBridge {
    /// Listens for TUIO on `addr` and forwards every contact event to all
    /// connected sessions.
    pub fn start(addr: SocketAddr, pad: PadSpec, state: &mut AppState) -> io::Result<Self> {
        let (listener, rx) = TuioListener::spawn(addr, pad, Instant::now())?;
        let (tx, _) = broadcast::channel(TUIO_CHANNEL_CAPACITY);
        state.tuio = Some(tx.clone());
        std::thread::Builder::new().name("tuio-bridge".into()).spawn(move || {
            for ev in rx.iter() {
                // No subscribers is fine: nobody is connected yet.
                let _ = tx.send(contact_to_client(&ev, &pad));
            }
        })?;
        Ok(Self { listener })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr()
    }
}
