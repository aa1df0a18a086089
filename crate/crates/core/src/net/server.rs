//! Environment server: one private goal world per connection.

use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, warn};

use crate::sim::{GoalWorld, Scenario, SimError, VehicleState};

use super::wire::{read_frame, write_frame, ErrorCode, WireError, WireMessage, PROTOCOL_VERSION};

const ACCEPT_POLL: Duration = Duration::from_millis(5);

/// Handle to a running server. Dropping it shuts the server down.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    connections: Arc<Mutex<Vec<TcpStream>>>,
    acceptor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting and closes every open connection.
    pub fn shutdown(mut self) {
        self.stop_now();
    }

    /// Blocks until the server stops (from another handle or a signal).
    pub fn join(mut self) {
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Ok(conns) = self.connections.lock() {
            for c in conns.iter() {
                let _ = c.shutdown(Shutdown::Both);
            }
        }
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_now();
    }
}

/// Binds `bind` and serves `scenario` on a background thread.
pub fn serve(scenario: Scenario<f64>, bind: impl ToSocketAddrs) -> io::Result<ServerHandle> {
    scenario.validate().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
    let listener = TcpListener::bind(bind)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let connections = Arc::new(Mutex::new(Vec::new()));
    let acceptor = {
        let stop = Arc::clone(&stop);
        let connections = Arc::clone(&connections);
        let hash = scenario.fingerprint();
        thread::Builder::new()
            .name(format!("env-server-{addr}"))
            .spawn(move || accept_loop(listener, scenario, hash, stop, connections))?
    };
    Ok(ServerHandle { addr, stop, connections, acceptor: Some(acceptor) })
}

fn accept_loop(
    listener: TcpListener,
    scenario: Scenario<f64>,
    hash: String,
    stop: Arc<AtomicBool>,
    connections: Arc<Mutex<Vec<TcpStream>>>,
) {
    let mut workers = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                debug!("connection from {peer}");
                if stream.set_nonblocking(false).is_err() {
                    continue;
                }
                let _ = stream.set_nodelay(true);
                if let Ok(clone) = stream.try_clone() {
                    connections.lock().expect("connection list").push(clone);
                }
                let scenario = scenario.clone();
                let hash = hash.clone();
                workers.push(thread::spawn(move || {
                    if let Err(e) = Session::new(scenario, hash).run(stream) {
                        debug!("session with {peer} ended: {e}");
                    }
                }));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(ACCEPT_POLL);
            }
        }
    }
    for w in workers {
        let _ = w.join();
    }
}

enum Phase {
    AwaitHello,
    Ready,
    Running,
    Done,
}

struct Session {
    world: GoalWorld<f64>,
    hash: String,
    phase: Phase,
}

/// What to do after answering a request.
enum Next {
    Continue,
    Close,
}

impl Session {
    fn new(scenario: Scenario<f64>, hash: String) -> Self {
        let world = GoalWorld::with_state(scenario, VehicleState::at_rest(0.0, 0.0, 0.0));
        Self { world, hash, phase: Phase::AwaitHello }
    }

    fn run(self, stream: TcpStream) -> Result<(), WireError> {
        let closer = stream.try_clone()?;
        let r = self.serve_requests(stream);
        // the acceptor keeps a clone for shutdown, so close explicitly
        let _ = closer.shutdown(Shutdown::Both);
        r
    }

    fn serve_requests(mut self, stream: TcpStream) -> Result<(), WireError> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        loop {
            let request = match read_frame(&mut reader) {
                Ok(m) => m,
                Err(WireError::Closed) => return Ok(()),
                Err(WireError::Io(e)) => return Err(WireError::Io(e)),
                Err(e) => {
                    let reply = error(ErrorCode::BadPayload, e.to_string());
                    write_frame(&mut writer, &reply)?;
                    return Ok(());
                }
            };
            let (reply, next) = self.handle(request);
            if let Some(reply) = reply {
                write_frame(&mut writer, &reply)?;
            }
            if let Next::Close = next {
                return Ok(());
            }
        }
    }

    fn handle(&mut self, request: WireMessage) -> (Option<WireMessage>, Next) {
        match (request, &self.phase) {
            (WireMessage::Hello { protocol_version, scenario_hash }, Phase::AwaitHello) => {
                if protocol_version != PROTOCOL_VERSION {
                    let msg = format!("server speaks protocol {PROTOCOL_VERSION}, client sent {protocol_version}");
                    return (Some(error(ErrorCode::BadVersion, msg)), Next::Close);
                }
                if !scenario_hash.is_empty() && scenario_hash != self.hash {
                    let msg = format!("scenario hash {scenario_hash} does not match server scenario {}", self.hash);
                    return (Some(error(ErrorCode::BadPayload, msg)), Next::Close);
                }
                self.phase = Phase::Ready;
                let ack = WireMessage::HelloAck { protocol_version: PROTOCOL_VERSION, scenario_hash: self.hash.clone() };
                (Some(ack), Next::Continue)
            }
            (WireMessage::Bye, _) => (None, Next::Close),
            (WireMessage::Hello { .. }, _) => (Some(error(ErrorCode::BadState, "duplicate HELLO")), Next::Continue),
            (_, Phase::AwaitHello) => (Some(error(ErrorCode::BadState, "HELLO expected first")), Next::Continue),
            (WireMessage::Reset { seed }, _) => match self.world.reset(seed) {
                Ok(observation) => {
                    self.phase = Phase::Running;
                    let achieved = self.world.position();
                    (Some(WireMessage::ResetAck { observation, achieved }), Next::Continue)
                }
                Err(e) => (Some(error(ErrorCode::Internal, e.to_string())), Next::Continue),
            },
            (WireMessage::Step { .. }, Phase::Ready) => {
                (Some(error(ErrorCode::BadState, "STEP before RESET")), Next::Continue)
            }
            (WireMessage::Step { .. }, Phase::Done) => {
                (Some(error(ErrorCode::BadState, "STEP after the episode finished")), Next::Continue)
            }
            (WireMessage::Step { action }, Phase::Running) => match self.world.step(action) {
                Ok(r) => {
                    if r.done {
                        self.phase = Phase::Done;
                    }
                    let ack = WireMessage::StepAck {
                        observation: r.observation,
                        reward: r.reward,
                        done: r.done,
                        events: r.events,
                        achieved: r.achieved,
                    };
                    (Some(ack), Next::Continue)
                }
                Err(e @ SimError::InvalidInput(_)) => (Some(error(ErrorCode::BadPayload, e.to_string())), Next::Continue),
                Err(e) => (Some(error(ErrorCode::Internal, e.to_string())), Next::Continue),
            },
            (other, _) => {
                let msg = format!("{} is not a request", other.kind());
                (Some(error(ErrorCode::BadPayload, msg)), Next::Close)
            }
        }
    }
}

fn error(code: ErrorCode, message: impl Into<String>) -> WireMessage {
    WireMessage::Error { code, message: message.into() }
}
