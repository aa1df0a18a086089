//! Frames: a 4-byte big-endian payload length, then a JSON object tagged by `kind`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::Events;

pub const PROTOCOL_VERSION: u32 = 1;
/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadVersion,
    BadState,
    BadPayload,
    Internal,
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::BadVersion => "bad_version",
            Self::BadState => "bad_state",
            Self::BadPayload => "bad_payload",
            Self::Internal => "internal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum WireMessage {
    /// An empty `scenario_hash` accepts whatever scenario the server runs.
    Hello { protocol_version: u32, scenario_hash: String },
    HelloAck { protocol_version: u32, scenario_hash: String },
    Reset { seed: u64 },
    ResetAck { observation: Vec<f64>, achieved: [f64; 2] },
    Step { action: [f64; 2] },
    StepAck { observation: Vec<f64>, reward: f64, done: bool, events: Events, achieved: [f64; 2] },
    Error { code: ErrorCode, message: String },
    Bye,
}

impl WireMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Hello { .. } => "HELLO",
            Self::HelloAck { .. } => "HELLO_ACK",
            Self::Reset { .. } => "RESET",
            Self::ResetAck { .. } => "RESET_ACK",
            Self::Step { .. } => "STEP",
            Self::StepAck { .. } => "STEP_ACK",
            Self::Error { .. } => "ERROR",
            Self::Bye => "BYE",
        }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("malformed payload: {0}")]
    Payload(#[from] serde_json::Error),
}

/// Serializes `msg` to a complete frame.
pub fn encode(msg: &WireMessage) -> Result<Vec<u8>, WireError> {
    let body = serde_json::to_vec(msg)?;
    if body.len() > MAX_FRAME {
        return Err(WireError::TooLarge(body.len()));
    }
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Parses exactly one frame from `bytes`.
pub fn decode(bytes: &[u8]) -> Result<WireMessage, WireError> {
    let mut cursor = bytes;
    let msg = read_frame(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(WireError::Io(io::Error::new(io::ErrorKind::InvalidData, "bytes after frame")));
    }
    Ok(msg)
}

pub fn write_frame<W: Write>(w: &mut W, msg: &WireMessage) -> Result<(), WireError> {
    w.write_all(&encode(msg)?)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame; a clean end of stream before the header is `Closed`.
pub fn read_frame<R: Read>(r: &mut R) -> Result<WireMessage, WireError> {
    let mut header = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Err(WireError::Closed),
            Ok(0) => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME {
        return Err(WireError::TooLarge(len));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(serde_json::from_slice(&body)?)
}
