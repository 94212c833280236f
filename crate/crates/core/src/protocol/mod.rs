//! Length-prefixed JSON messages shared by the TCP and WebSocket transports.

mod client;
mod frame;
mod message;

pub use client::{Client, ClientError};
pub use frame::{decode_frames, encode_frame, frame_payload, FrameDecoder, OversizeMessage, MAX_FRAME_LEN};
pub use message::*;
