//! Line-delimited JSON protocol that exposes [`Simulator`] sessions over
//! TCP, and [`RemoteSim`], a client that implements [`SimSession`].
//!
//! See `docs/protocol.md` for the wire format.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::harness::{run_episode_with, EpisodeConfig, EpisodeResult, HarnessError};
use crate::pilot::make_pilot;
use crate::sim::{DronePose, MotionCommand, Observation, SimConfig, SimError, SimSession, Simulator};
use crate::world::FloorPlan;

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_LINE: usize = 8 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WireMessage {
    Hello {
        #[serde(default)]
        session: Option<String>,
        v: u32,
        spawn: DronePose,
        #[serde(default)]
        frames: bool,
        /// Overrides the server's simulator settings for this session.
        #[serde(default)]
        config: Option<SimConfig>,
    },
    Obs {
        session: String,
        obs: Box<Observation>,
    },
    Act {
        session: String,
        /// Step of the observation this act answers.
        step: usize,
        command: String,
    },
    Result {
        session: String,
        reason: CloseReason,
        steps: usize,
        pose: DronePose,
    },
    Bye {
        session: String,
    },
    Error {
        #[serde(default)]
        session: Option<String>,
        code: ErrorCode,
        message: String,
        /// Whether the server closes the connection after this message.
        fatal: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        obstacle: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloseReason {
    Collision,
    Bye,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    LineTooLong,
    BadVersion,
    NoSession,
    SessionMismatch,
    OutOfOrder,
    UnknownCommand,
    StartInCollision,
    UnexpectedKind,
}

impl WireMessage {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("wire messages serialize");
        s.push('\n');
        s
    }
}

/// Reads one `\n`-terminated line of at most `MAX_LINE` bytes. `Ok(None)`
/// on a clean end of stream.
fn read_line<R: BufRead>(r: &mut R) -> io::Result<Option<String>> {
    let mut buf = Vec::new();
    let n = r.take(MAX_LINE as u64 + 1).read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() == Some(&b'\n') {
        buf.pop();
    } else if buf.len() > MAX_LINE {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "line exceeds 8 MiB"));
    }
    String::from_utf8(buf)
        .map(Some)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

struct Session {
    id: String,
    sim: Simulator,
    step: usize,
    pose: DronePose,
}

struct Connection {
    plan: Arc<FloorPlan>,
    config: SimConfig,
    ids: Arc<AtomicU64>,
    session: Option<Session>,
}

enum Reply {
    Continue(Vec<WireMessage>),
    Close(Vec<WireMessage>),
}

fn error(session: Option<&str>, code: ErrorCode, message: impl Into<String>, fatal: bool) -> WireMessage {
    WireMessage::Error {
        session: session.map(str::to_string),
        code,
        message: message.into(),
        fatal,
        obstacle: None,
    }
}

impl Connection {
    fn handle(&mut self, line: &str) -> Reply {
        let msg: WireMessage = match serde_json::from_str(line) {
            Ok(m) => m,
            Err(e) => {
                let id = self.session.as_ref().map(|s| s.id.as_str());
                return Reply::Close(vec![error(id, ErrorCode::Malformed, e.to_string(), true)]);
            }
        };
        match msg {
            WireMessage::Hello { v, spawn, frames, config, .. } => self.hello(v, spawn, frames, config),
            WireMessage::Act { session, step, command } => self.act(&session, step, &command),
            WireMessage::Bye { session } => match self.session.take() {
                Some(s) if s.id == session => Reply::Close(vec![WireMessage::Result {
                    session: s.id,
                    reason: CloseReason::Bye,
                    steps: s.step,
                    pose: s.pose,
                }]),
                other => {
                    self.session = other;
                    Reply::Continue(vec![self.mismatch(&session)])
                }
            },
            _ => {
                let id = self.session.as_ref().map(|s| s.id.as_str());
                Reply::Continue(vec![error(id, ErrorCode::UnexpectedKind, "servers accept hello, act and bye", false)])
            }
        }
    }

    fn mismatch(&self, session: &str) -> WireMessage {
        match &self.session {
            Some(s) => error(
                Some(&s.id),
                ErrorCode::SessionMismatch,
                format!("session `{session}` is not `{}`", s.id),
                false,
            ),
            None => error(None, ErrorCode::NoSession, "no session", false),
        }
    }

    fn hello(&mut self, v: u32, spawn: DronePose, frames: bool, config: Option<SimConfig>) -> Reply {
        if v != PROTOCOL_VERSION {
            return Reply::Close(vec![error(
                None,
                ErrorCode::BadVersion,
                format!("protocol version {v} unsupported; expected {PROTOCOL_VERSION}"),
                true,
            )]);
        }
        let mut sim = Simulator::new(self.plan.clone(), config.unwrap_or(self.config));
        sim.set_frames(frames);
        match sim.reset(spawn) {
            Ok(obs) => {
                let id = format!("s{}", self.ids.fetch_add(1, Ordering::Relaxed) + 1);
                self.session = Some(Session {
                    id: id.clone(),
                    sim,
                    step: obs.step,
                    pose: obs.pose,
                });
                Reply::Continue(vec![WireMessage::Obs { session: id, obs: Box::new(obs) }])
            }
            Err(e) => {
                let obstacle = match &e {
                    SimError::StartInCollision { obstacle, .. } => Some(obstacle.clone()),
                    _ => None,
                };
                self.session = None;
                Reply::Continue(vec![WireMessage::Error {
                    session: None,
                    code: ErrorCode::StartInCollision,
                    message: e.to_string(),
                    fatal: false,
                    obstacle,
                }])
            }
        }
    }

    fn act(&mut self, session: &str, step: usize, command: &str) -> Reply {
        let Some(s) = self.session.as_mut().filter(|s| s.id == session) else {
            return Reply::Continue(vec![self.mismatch(session)]);
        };
        if step != s.step {
            let msg = format!("act answers step {step}, last observation was step {}", s.step);
            return Reply::Continue(vec![error(Some(&s.id), ErrorCode::OutOfOrder, msg, false)]);
        }
        let cmd: MotionCommand = match command.parse() {
            Ok(c) => c,
            Err(bad) => {
                let msg = format!("unknown command `{bad}`");
                return Reply::Continue(vec![error(Some(&s.id), ErrorCode::UnknownCommand, msg, false)]);
            }
        };
        let obs = match s.sim.step(cmd) {
            Ok(o) => o,
            Err(e) => return Reply::Close(vec![error(Some(&s.id), ErrorCode::NoSession, e.to_string(), true)]),
        };
        s.step = obs.step;
        s.pose = obs.pose;
        let id = s.id.clone();
        if obs.collided {
            let s = self.session.take().expect("session present");
            Reply::Close(vec![
                WireMessage::Obs { session: id.clone(), obs: Box::new(obs) },
                WireMessage::Result {
                    session: id,
                    reason: CloseReason::Collision,
                    steps: s.step,
                    pose: s.pose,
                },
            ])
        } else {
            Reply::Continue(vec![WireMessage::Obs { session: id, obs: Box::new(obs) }])
        }
    }
}

fn serve_connection(stream: TcpStream, plan: Arc<FloorPlan>, config: SimConfig, ids: Arc<AtomicU64>) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut conn = Connection {
        plan,
        config,
        ids,
        session: None,
    };
    loop {
        let line = match read_line(&mut reader) {
            Ok(Some(l)) => l,
            Ok(None) => return Ok(()),
            Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                let code = if e.to_string().contains("8 MiB") {
                    ErrorCode::LineTooLong
                } else {
                    ErrorCode::Malformed
                };
                let id = conn.session.as_ref().map(|s| s.id.as_str());
                writer.write_all(error(id, code, e.to_string(), true).to_line().as_bytes())?;
                return writer.shutdown(Shutdown::Both);
            }
            Err(e) => return Err(e),
        };
        if line.trim().is_empty() {
            continue;
        }
        let (msgs, close) = match conn.handle(&line) {
            Reply::Continue(m) => (m, false),
            Reply::Close(m) => (m, true),
        };
        let out: String = msgs.iter().map(WireMessage::to_line).collect();
        writer.write_all(out.as_bytes())?;
        writer.flush()?;
        if close {
            return writer.shutdown(Shutdown::Both);
        }
    }
}

/// A running server. Dropping it without calling [`Server::shutdown`] leaves
/// the accept loop running in the background.
pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    open: Arc<Mutex<Vec<TcpStream>>>,
    accept: Option<JoinHandle<()>>,
}

impl Server {
    /// Binds `addr` and starts accepting connections on a background thread.
    pub fn start(plan: Arc<FloorPlan>, config: SimConfig, addr: impl ToSocketAddrs) -> io::Result<Server> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let open: Arc<Mutex<Vec<TcpStream>>> = Arc::default();
        let ids = Arc::new(AtomicU64::new(0));
        let accept = {
            let stop = stop.clone();
            let open = open.clone();
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let _ = stream.set_nodelay(true);
                    if let Ok(clone) = stream.try_clone() {
                        let mut open = open.lock().expect("connection registry");
                        open.retain(|s| s.peer_addr().is_ok());
                        open.push(clone);
                    }
                    let (plan, ids) = (plan.clone(), ids.clone());
                    std::thread::spawn(move || {
                        let _ = serve_connection(stream, plan, config, ids);
                    });
                }
            })
        };
        Ok(Server {
            addr,
            stop,
            open,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the accept loop exits.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    /// Stops accepting and drops every open connection.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
        for s in self.open.lock().expect("connection registry").drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

/// A simulator session on a remote server.
pub struct RemoteSim {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    config: Option<SimConfig>,
    frames: bool,
    session: Option<String>,
    step: usize,
}

fn transport(e: impl std::fmt::Display) -> SimError {
    SimError::Transport(e.to_string())
}

impl RemoteSim {
    pub fn connect(addr: impl ToSocketAddrs, config: Option<SimConfig>) -> Result<RemoteSim, SimError> {
        let stream = TcpStream::connect(addr).map_err(transport)?;
        let _ = stream.set_nodelay(true);
        stream
            .set_read_timeout(Some(Duration::from_secs(120)))
            .map_err(transport)?;
        Ok(RemoteSim {
            writer: stream.try_clone().map_err(transport)?,
            reader: BufReader::new(stream),
            config,
            frames: false,
            session: None,
            step: 0,
        })
    }

    pub fn session(&self) -> Option<&str> {
        self.session.as_deref()
    }

    fn send(&mut self, msg: &WireMessage) -> Result<(), SimError> {
        self.writer.write_all(msg.to_line().as_bytes()).map_err(transport)?;
        self.writer.flush().map_err(transport)
    }

    fn recv(&mut self) -> Result<WireMessage, SimError> {
        let line = read_line(&mut self.reader)
            .map_err(transport)?
            .ok_or_else(|| SimError::Transport("connection closed by server".into()))?;
        serde_json::from_str(&line).map_err(|e| SimError::Protocol(format!("undecodable server message: {e}")))
    }

    fn expect_obs(&mut self) -> Result<Observation, SimError> {
        match self.recv()? {
            WireMessage::Obs { session, obs } => {
                self.session = Some(session);
                self.step = obs.step;
                Ok(*obs)
            }
            WireMessage::Error {
                code: ErrorCode::StartInCollision,
                obstacle,
                ..
            } => Err(SimError::StartInCollision {
                obstacle: obstacle.unwrap_or_default(),
                x: 0.0,
                z: 0.0,
            }),
            WireMessage::Error { code, message, .. } => Err(SimError::Protocol(format!("{code:?}: {message}"))),
            other => Err(SimError::Protocol(format!("expected obs, got {other:?}"))),
        }
    }
}

impl SimSession for RemoteSim {
    fn reset(&mut self, spawn: DronePose) -> Result<Observation, SimError> {
        let hello = WireMessage::Hello {
            session: None,
            v: PROTOCOL_VERSION,
            spawn,
            frames: self.frames,
            config: self.config,
        };
        self.send(&hello)?;
        let obs = self.expect_obs();
        if let Err(SimError::StartInCollision { obstacle, .. }) = obs {
            return Err(SimError::StartInCollision {
                obstacle,
                x: spawn.x,
                z: spawn.z,
            });
        }
        obs
    }

    fn step(&mut self, cmd: MotionCommand) -> Result<Observation, SimError> {
        let session = self.session.clone().ok_or(SimError::NoSession)?;
        let act = WireMessage::Act {
            session,
            step: self.step,
            command: cmd.code().to_string(),
        };
        self.send(&act)?;
        let obs = self.expect_obs()?;
        if obs.collided {
            match self.recv()? {
                WireMessage::Result { .. } => self.session = None,
                other => return Err(SimError::Protocol(format!("expected result, got {other:?}"))),
            }
        }
        Ok(obs)
    }

    fn set_frames(&mut self, frames: bool) {
        self.frames = frames;
    }

    fn close(&mut self) {
        if let Some(session) = self.session.take() {
            if self.send(&WireMessage::Bye { session }).is_ok() {
                let _ = self.recv();
            }
        }
    }
}

impl Drop for RemoteSim {
    fn drop(&mut self) {
        self.close();
    }
}

/// Runs one episode against a simserve instance.
pub fn run_episode_remote(config: &EpisodeConfig, addr: &str) -> Result<EpisodeResult, HarnessError> {
    config.validate()?;
    let mut pilot = make_pilot(&config.pilot, config.plan.clone(), config.sim, &config.query)?;
    let mut sim = RemoteSim::connect(addr, Some(config.sim)).map_err(HarnessError::Sim)?;
    let result = run_episode_with(config, &mut sim, pilot.as_mut());
    sim.close();
    result
}
