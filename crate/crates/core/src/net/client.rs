//! Blocking client for one remote environment session.

use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::time::Duration;

use thiserror::Error;

use crate::sim::StepResult;

use super::wire::{read_frame, write_frame, ErrorCode, WireError, WireMessage, PROTOCOL_VERSION};

pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Connected,
    Ready,
    MidEpisode,
    Done,
    Failed,
}

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("{addr}: no response within {deadline:?}")]
    Timeout { addr: String, deadline: Duration },
    #[error("{addr}: connection lost: {reason}")]
    Connection { addr: String, reason: String },
    #[error("{addr}: server error {code}: {message}")]
    Server { addr: String, code: ErrorCode, message: String },
    #[error("{addr}: unexpected {got} in reply to {sent}")]
    Protocol { addr: String, sent: &'static str, got: &'static str },
    #[error("{addr}: session has failed")]
    Failed { addr: String },
    #[error("{addr}: {op} is not allowed while {state:?}")]
    State { addr: String, op: &'static str, state: SessionState },
}

pub type Result<T> = std::result::Result<T, RemoteError>;

#[derive(Debug)]
pub struct RemoteEnv {
    addr: String,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    deadline: Duration,
    state: SessionState,
    scenario_hash: String,
    pending: Option<&'static str>,
}

impl RemoteEnv {
    /// Connects and completes the HELLO handshake. `scenario_hash` may be
    /// empty to accept whatever the server runs.
    pub fn connect(addr: impl ToSocketAddrs + std::fmt::Display, scenario_hash: &str, deadline: Duration) -> Result<Self> {
        let name = addr.to_string();
        let lost = |e: io::Error| RemoteError::Connection { addr: name.clone(), reason: e.to_string() };
        let socket = addr
            .to_socket_addrs()
            .map_err(lost)?
            .next()
            .ok_or_else(|| RemoteError::Connection { addr: name.clone(), reason: "address did not resolve".into() })?;
        let stream = TcpStream::connect_timeout(&socket, deadline).map_err(lost)?;
        stream.set_nodelay(true).map_err(lost)?;
        stream.set_read_timeout(Some(deadline)).map_err(lost)?;
        stream.set_write_timeout(Some(deadline)).map_err(lost)?;
        let mut env = Self {
            reader: BufReader::new(stream.try_clone().map_err(lost)?),
            writer: BufWriter::new(stream),
            addr: name,
            deadline,
            state: SessionState::Connected,
            scenario_hash: String::new(),
            pending: None,
        };
        let hello = WireMessage::Hello { protocol_version: PROTOCOL_VERSION, scenario_hash: scenario_hash.into() };
        match env.request(hello)? {
            WireMessage::HelloAck { scenario_hash, .. } => {
                env.scenario_hash = scenario_hash;
                env.state = SessionState::Ready;
                Ok(env)
            }
            other => Err(env.unexpected("HELLO", &other)),
        }
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    /// Fingerprint of the scenario the server reported.
    pub fn scenario_hash(&self) -> &str {
        &self.scenario_hash
    }

    pub fn reset(&mut self, seed: u64) -> Result<(Vec<f64>, [f64; 2])> {
        match self.request(WireMessage::Reset { seed })? {
            WireMessage::ResetAck { observation, achieved } => {
                self.state = SessionState::MidEpisode;
                Ok((observation, achieved))
            }
            other => Err(self.unexpected("RESET", &other)),
        }
    }

    pub fn step(&mut self, action: [f64; 2]) -> Result<StepResult<f64>> {
        self.send_step(action)?;
        self.recv_step()
    }

    /// First half of a step: sends STEP without waiting for the reply.
    pub fn send_step(&mut self, action: [f64; 2]) -> Result<()> {
        self.usable("STEP")?;
        let r = write_frame(&mut self.writer, &WireMessage::Step { action });
        self.check(r)?;
        self.pending = Some("STEP");
        Ok(())
    }

    /// Second half of a step: waits for the STEP_ACK.
    pub fn recv_step(&mut self) -> Result<StepResult<f64>> {
        if self.pending.take().is_none() {
            return Err(RemoteError::State { addr: self.addr.clone(), op: "recv_step", state: self.state });
        }
        let r = read_frame(&mut self.reader);
        match self.check(r)? {
            WireMessage::StepAck { observation, reward, done, events, achieved } => {
                if done {
                    self.state = SessionState::Done;
                }
                Ok(StepResult { observation, reward, done, events, achieved })
            }
            other => Err(self.reply_error("STEP", other)),
        }
    }

    /// Sends BYE and closes the socket.
    pub fn close(mut self) {
        let _ = write_frame(&mut self.writer, &WireMessage::Bye);
        let _ = self.writer.get_ref().shutdown(Shutdown::Both);
    }

    fn usable(&self, op: &'static str) -> Result<()> {
        if self.state == SessionState::Failed {
            return Err(RemoteError::Failed { addr: self.addr.clone() });
        }
        if self.pending.is_some() {
            return Err(RemoteError::State { addr: self.addr.clone(), op, state: self.state });
        }
        Ok(())
    }

    fn request(&mut self, msg: WireMessage) -> Result<WireMessage> {
        self.usable(msg.kind())?;
        let r = write_frame(&mut self.writer, &msg);
        self.check(r)?;
        let r = read_frame(&mut self.reader);
        match self.check(r)? {
            reply @ (WireMessage::Error { .. } | WireMessage::Bye) => Err(self.reply_error(msg.kind(), reply)),
            reply => Ok(reply),
        }
    }

    /// Maps transport failures to distinct errors and marks the session failed.
    fn check<T>(&mut self, r: std::result::Result<T, WireError>) -> Result<T> {
        r.map_err(|e| {
            self.state = SessionState::Failed;
            self.pending = None;
            match e {
                WireError::Io(io) if matches!(io.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    RemoteError::Timeout { addr: self.addr.clone(), deadline: self.deadline }
                }
                other => RemoteError::Connection { addr: self.addr.clone(), reason: other.to_string() },
            }
        })
    }

    fn reply_error(&mut self, sent: &'static str, reply: WireMessage) -> RemoteError {
        match reply {
            WireMessage::Error { code, message } => {
                // the server closes the connection after these
                if matches!(code, ErrorCode::BadVersion | ErrorCode::BadPayload) {
                    self.state = SessionState::Failed;
                }
                RemoteError::Server { addr: self.addr.clone(), code, message }
            }
            other => self.unexpected(sent, &other),
        }
    }

    fn unexpected(&mut self, sent: &'static str, got: &WireMessage) -> RemoteError {
        self.state = SessionState::Failed;
        RemoteError::Protocol { addr: self.addr.clone(), sent, got: got.kind() }
    }
}
