use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use super::frame::{encode_frame, FrameDecoder};
use super::message::{DecodeError, Envelope, Hello, Message, PROTOCOL_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Oversize(#[from] super::frame::OversizeMessage),
    #[error("connection closed by server")]
    Closed,
    #[error("timed out waiting for a message")]
    Timeout,
}

/// Blocking TCP client for scripts and tests.
///
/// Messages that arrive while [`Client::request`] waits for its reply are
/// queued and returned by later [`Client::recv`] calls.
pub struct Client {
    stream: TcpStream,
    decoder: FrameDecoder,
    inbox: VecDeque<Envelope>,
    next_id: u64,
}

impl Client {
    /// Connects and sends `hello`.
    pub fn connect(addr: impl ToSocketAddrs, client_name: &str) -> Result<Self, ClientError> {
        Self::connect_with_version(addr, client_name, PROTOCOL_VERSION)
    }

    pub fn connect_with_version(
        addr: impl ToSocketAddrs,
        client_name: &str,
        protocol_version: u32,
    ) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let mut client = Self {
            stream,
            decoder: FrameDecoder::new(),
            inbox: VecDeque::new(),
            next_id: 1,
        };
        client.send(Message::Hello(Hello {
            client_name: client_name.into(),
            protocol_version,
        }))?;
        Ok(client)
    }

    pub fn send_envelope(&mut self, envelope: &Envelope) -> Result<(), ClientError> {
        self.stream.write_all(&encode_frame(envelope)?)?;
        Ok(())
    }

    /// Sends without a correlation id.
    pub fn send(&mut self, message: Message) -> Result<(), ClientError> {
        self.send_envelope(&Envelope::new(message))
    }

    /// Sends with a fresh correlation id and returns it.
    pub fn send_request(&mut self, message: Message) -> Result<u64, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        self.send_envelope(&Envelope::new(message).with_id(id))?;
        Ok(id)
    }

    /// Sends a request and waits for the first message echoing its id.
    pub fn request(&mut self, message: Message, timeout: Duration) -> Result<Envelope, ClientError> {
        let id = self.send_request(message)?;
        self.recv_matching(timeout, |e| e.id == Some(id))
    }

    pub fn recv(&mut self, timeout: Duration) -> Result<Envelope, ClientError> {
        self.recv_matching(timeout, |_| true)
    }

    /// First message satisfying `pred`; others stay queued in order.
    pub fn recv_matching(
        &mut self,
        timeout: Duration,
        mut pred: impl FnMut(&Envelope) -> bool,
    ) -> Result<Envelope, ClientError> {
        if let Some(i) = self.inbox.iter().position(&mut pred) {
            return Ok(self.inbox.remove(i).expect("index in range"));
        }
        let deadline = Instant::now() + timeout;
        let mut buf = [0u8; 64 * 1024];
        loop {
            while let Some(decoded) = self.decoder.next_message() {
                let envelope = decoded?;
                if pred(&envelope) {
                    return Ok(envelope);
                }
                self.inbox.push_back(envelope);
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(ClientError::Timeout);
            }
            self.stream.set_read_timeout(Some(left))?;
            match self.stream.read(&mut buf) {
                Ok(0) => return Err(ClientError::Closed),
                Ok(n) => self.decoder.push(&buf[..n]),
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Err(ClientError::Timeout)
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Everything that arrives within `window`.
    pub fn drain(&mut self, window: Duration) -> Result<Vec<Envelope>, ClientError> {
        let mut out: Vec<Envelope> = self.inbox.drain(..).collect();
        loop {
            match self.recv(window) {
                Ok(e) => out.push(e),
                Err(ClientError::Timeout) => return Ok(out),
                Err(e) => return Err(e),
            }
        }
    }

    pub fn shutdown(&self) -> io::Result<()> {
        self.stream.shutdown(std::net::Shutdown::Both)
    }
}
