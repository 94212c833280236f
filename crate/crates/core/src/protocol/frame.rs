use super::message::{decode_message, DecodeError, Envelope};

/// Largest payload accepted in either direction.
pub const MAX_FRAME_LEN: usize = 16 * 1024 * 1024;

const PREFIX_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("message of {len} bytes exceeds the {max} byte frame limit")]
pub struct OversizeMessage {
    pub len: usize,
    pub max: usize,
}

/// Length-prefixed frame around an already serialized payload.
pub fn frame_payload(payload: &[u8]) -> Result<Vec<u8>, OversizeMessage> {
    if payload.len() > MAX_FRAME_LEN {
        return Err(OversizeMessage {
            len: payload.len(),
            max: MAX_FRAME_LEN,
        });
    }
    let mut out = Vec::with_capacity(PREFIX_LEN + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn encode_frame(envelope: &Envelope) -> Result<Vec<u8>, OversizeMessage> {
    frame_payload(envelope.to_json().as_bytes())
}

/// Incremental decoder for a TCP byte stream.
///
/// Bytes may arrive split at any point. After a fatal error the decoder
/// yields nothing more.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    start: usize,
    failed: bool,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.failed {
            return;
        }
        if self.start > 0 && self.start >= self.buf.len() / 2 {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes received but not yet consumed.
    pub fn buffered(&self) -> usize {
        self.buf.len() - self.start
    }

    /// Next complete payload, if any.
    pub fn next_payload(&mut self) -> Result<Option<&[u8]>, DecodeError> {
        if self.failed {
            return Ok(None);
        }
        let pending = &self.buf[self.start..];
        if pending.len() < PREFIX_LEN {
            return Ok(None);
        }
        let len = u32::from_be_bytes(pending[..PREFIX_LEN].try_into().expect("4 bytes")) as usize;
        if len > MAX_FRAME_LEN {
            self.failed = true;
            return Err(DecodeError::FrameTooLong {
                len,
                max: MAX_FRAME_LEN,
            });
        }
        if pending.len() < PREFIX_LEN + len {
            return Ok(None);
        }
        let from = self.start + PREFIX_LEN;
        self.start = from + len;
        Ok(Some(&self.buf[from..from + len]))
    }

    /// Next decoded message, if a complete frame is buffered.
    pub fn next_message(&mut self) -> Option<Result<Envelope, DecodeError>> {
        match self.next_payload() {
            Ok(None) => None,
            Ok(Some(payload)) => {
                let decoded = decode_message(payload);
                if decoded.as_ref().is_err_and(DecodeError::is_fatal) {
                    self.failed = true;
                }
                Some(decoded)
            }
            Err(e) => Some(Err(e)),
        }
    }
}

/// Decodes every complete frame in `bytes`, stopping after a fatal error.
pub fn decode_frames(bytes: &[u8]) -> Vec<Result<Envelope, DecodeError>> {
    let mut decoder = FrameDecoder::new();
    decoder.push(bytes);
    std::iter::from_fn(|| decoder.next_message()).collect()
}
