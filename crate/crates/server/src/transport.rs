use std::future::Future;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use futures_util::{SinkExt, StreamExt};
use planhub_core::protocol::{decode_message, encode_frame, Envelope, ErrorCode, FrameDecoder, Message, MAX_FRAME_LEN};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};
use tokio::task::AbortHandle;

use crate::hub::{HubEvent, SessionId, SessionSink};

#[derive(Clone)]
pub(crate) struct Transport {
    pub hub: mpsc::Sender<HubEvent>,
    pub next_session: Arc<AtomicU64>,
    pub queue_len: usize,
}

struct Outbound {
    queue: mpsc::Receiver<Envelope>,
    kill: oneshot::Receiver<Envelope>,
    finished: oneshot::Sender<()>,
}

impl Transport {
    async fn register(&self, transport: &'static str) -> Option<(SessionId, Outbound)> {
        let session = self.next_session.fetch_add(1, Ordering::Relaxed);
        let (queue_tx, queue) = mpsc::channel(self.queue_len.max(1));
        let (kill_tx, kill) = oneshot::channel();
        let (finished, finished_rx) = oneshot::channel();
        let sink = SessionSink {
            queue: queue_tx,
            kill: kill_tx,
            finished: finished_rx,
        };
        self.hub
            .send(HubEvent::Connected {
                session,
                transport,
                sink,
            })
            .await
            .ok()?;
        Some((session, Outbound { queue, kill, finished }))
    }

    async fn forward(
        &self,
        session: SessionId,
        decoded: Result<Envelope, planhub_core::protocol::DecodeError>,
    ) -> bool {
        let event = match decoded {
            Ok(envelope) => HubEvent::Received { session, envelope },
            Err(error) => HubEvent::Undecodable { session, error },
        };
        self.hub.send(event).await.is_ok()
    }

    async fn disconnected(&self, session: SessionId) {
        let _ = self.hub.send(HubEvent::Disconnected { session }).await;
    }
}

/// Runs one write unless the session is killed first. A kill that lands
/// mid-write abandons the connection, since a partial frame cannot be
/// followed by anything readable.
async fn unless_killed<F: Future<Output = bool>>(write: F, out: &mut Outbound, kill_open: &mut bool) -> bool {
    tokio::pin!(write);
    loop {
        tokio::select! {
            biased;
            ok = &mut write => return ok,
            killed = &mut out.kill, if *kill_open => match killed {
                Ok(_) => return false,
                Err(_) => *kill_open = false,
            },
        }
    }
}

/// Next message to write, or `None` once the session is over. A kill
/// message comes first and ends the session.
async fn next_outbound(out: &mut Outbound, kill_open: &mut bool) -> Option<(Envelope, bool)> {
    loop {
        tokio::select! {
            biased;
            killed = &mut out.kill, if *kill_open => match killed {
                Ok(last) => return Some((last, true)),
                Err(_) => *kill_open = false,
            },
            queued = out.queue.recv() => return queued.map(|e| (e, false)),
        }
    }
}

pub(crate) async fn accept_tcp(listener: TcpListener, transport: Transport) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                tracing::debug!(%peer, "tcp connection");
                let transport = transport.clone();
                tokio::spawn(async move { serve_tcp(stream, transport).await });
            }
            Err(e) => {
                tracing::warn!(%e, "accept failed");
                tokio::time::sleep(std::time::Duration::from_millis(50)).await;
            }
        }
    }
}

async fn serve_tcp(stream: TcpStream, transport: Transport) {
    let _ = stream.set_nodelay(true);
    let Some((session, out)) = transport.register("tcp").await else {
        return;
    };
    let (mut reader, writer) = stream.into_split();
    let reading = {
        let transport = transport.clone();
        tokio::spawn(async move {
            let mut decoder = FrameDecoder::new();
            let mut buf = vec![0u8; 64 * 1024];
            'read: loop {
                match reader.read(&mut buf).await {
                    Ok(0) | Err(_) => break,
                    Ok(n) => decoder.push(&buf[..n]),
                }
                while let Some(decoded) = decoder.next_message() {
                    let fatal = decoded.as_ref().is_err_and(|e| e.is_fatal());
                    if !transport.forward(session, decoded).await || fatal {
                        break 'read;
                    }
                }
            }
            transport.disconnected(session).await;
        })
    };
    write_tcp(writer, out, reading.abort_handle()).await;
}

async fn write_tcp(mut writer: tokio::net::tcp::OwnedWriteHalf, mut out: Outbound, reader: AbortHandle) {
    let mut kill_open = true;
    while let Some((envelope, last)) = next_outbound(&mut out, &mut kill_open).await {
        let frame = encode_frame(&envelope).unwrap_or_else(|e| {
            let text = format!("response not sent: {e}");
            encode_frame(&Envelope {
                id: envelope.id,
                message: Message::error(ErrorCode::Internal, envelope.id, text),
            })
            .expect("small error frame")
        });
        let written = unless_killed(
            async { writer.write_all(&frame).await.is_ok() },
            &mut out,
            &mut kill_open,
        )
        .await;
        if !written || last {
            break;
        }
    }
    let _ = writer.shutdown().await;
    reader.abort();
    let _ = out.finished.send(());
}

pub(crate) async fn ws_upgrade(ws: WebSocketUpgrade, State(transport): State<Transport>) -> Response {
    ws.max_message_size(MAX_FRAME_LEN)
        .on_upgrade(move |socket| serve_ws(socket, transport))
}

async fn serve_ws(socket: WebSocket, transport: Transport) {
    let Some((session, mut out)) = transport.register("ws").await else {
        return;
    };
    let (mut sink, mut stream) = socket.split();
    let reading = {
        let transport = transport.clone();
        tokio::spawn(async move {
            while let Some(Ok(frame)) = stream.next().await {
                let decoded = match frame {
                    WsMessage::Text(text) => decode_message(text.as_bytes()),
                    WsMessage::Binary(bytes) => decode_message(&bytes),
                    WsMessage::Close(_) => break,
                    WsMessage::Ping(_) | WsMessage::Pong(_) => continue,
                };
                let fatal = decoded.as_ref().is_err_and(|e| e.is_fatal());
                if !transport.forward(session, decoded).await || fatal {
                    break;
                }
            }
            transport.disconnected(session).await;
        })
    };
    let mut kill_open = true;
    while let Some((envelope, last)) = next_outbound(&mut out, &mut kill_open).await {
        let text = WsMessage::Text(envelope.to_json().into());
        let written = unless_killed(async { sink.send(text).await.is_ok() }, &mut out, &mut kill_open).await;
        if !written || last {
            break;
        }
    }
    let _ = sink.send(WsMessage::Close(None)).await;
    let _ = sink.close().await;
    reading.abort();
    let _ = out.finished.send(());
}
