use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::Value;

use indoor_pilot::harness::{default_suite, run_episode, run_episode_with, EpisodeConfig, Outcome};
use indoor_pilot::pilot::{Decision, DecisionContext, OraclePilot, Pilot, PilotConfig, PilotError};
use indoor_pilot::sim::{DronePose, MotionCommand, SimConfig, SimSession, Simulator};
use indoor_pilot::simserve::{run_episode_remote, RemoteSim, Server};
use indoor_pilot::world::{default_plan, FloorPlan};

fn server(plan: &Arc<FloorPlan>) -> Server {
    Server::start(plan.clone(), SimConfig::default(), "127.0.0.1:0").unwrap()
}

fn suite_configs(plan: &Arc<FloorPlan>) -> Vec<EpisodeConfig> {
    default_suite()
        .resolve(plan)
        .unwrap()
        .into_iter()
        .map(|(_, pose, query)| EpisodeConfig::new(plan.clone(), pose, query, PilotConfig::oracle()))
        .collect()
}

#[test]
fn remote_episodes_match_in_process() {
    let plan = Arc::new(default_plan());
    let srv = server(&plan);
    let addr = srv.local_addr().to_string();
    for cfg in suite_configs(&plan) {
        let local = run_episode(&cfg).unwrap();
        let remote = run_episode_remote(&cfg, &addr).unwrap();
        assert_eq!(remote, local, "{}", cfg.query.text);
    }
    srv.shutdown();
}

#[test]
fn observations_are_bit_identical_with_frames() {
    let plan = Arc::new(default_plan());
    let srv = server(&plan);
    let mut local = Simulator::new(plan.clone(), SimConfig::default());
    let mut remote = RemoteSim::connect(srv.local_addr(), None).unwrap();
    local.set_frames(true);
    remote.set_frames(true);
    let spawn = DronePose::new(5.0, 1.0, 2.5, 0.0);
    let a = local.reset(spawn).unwrap();
    let b = remote.reset(spawn).unwrap();
    assert!(a.front.is_some() && a.rear.is_some());
    assert_eq!(a, b);
    use MotionCommand::*;
    for cmd in [A2, B1, C2, D1, D2, A3, E, B3, A1] {
        let a = local.step(cmd).unwrap();
        let b = remote.step(cmd).unwrap();
        assert_eq!(a, b, "{cmd}");
        assert_eq!(a.pose.x.to_bits(), b.pose.x.to_bits());
    }
    remote.close();
    srv.shutdown();
}

/// Oracle that pulls the server down before deciding step `at`.
struct Saboteur {
    inner: OraclePilot,
    server: Mutex<Option<Server>>,
    at: usize,
}

impl Pilot for Saboteur {
    fn label(&self) -> String {
        self.inner.label()
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, PilotError> {
        if ctx.step == self.at {
            if let Some(s) = self.server.lock().unwrap().take() {
                s.shutdown();
            }
        }
        self.inner.decide(ctx)
    }
}

#[test]
fn server_shutdown_mid_episode_is_a_protocol_error() {
    let plan = Arc::new(default_plan());
    let srv = server(&plan);
    let addr = srv.local_addr();
    let cfg = suite_configs(&plan).remove(0);
    let mut pilot = Saboteur {
        inner: OraclePilot::new(plan.clone(), cfg.sim, cfg.query.clone()).unwrap(),
        server: Mutex::new(Some(srv)),
        at: 3,
    };
    let mut sim = RemoteSim::connect(addr, None).unwrap();
    let r = run_episode_with(&cfg, &mut sim, &mut pilot).unwrap();
    assert_eq!(r.outcome, Outcome::ProtocolError);
    assert_eq!(r.steps_used, 3);
    assert!(r.cause.is_some());
    assert!(TcpStream::connect(addr).is_err(), "listener is gone");
}

#[test]
fn concurrent_sessions_are_isolated() {
    let plan = Arc::new(default_plan());
    let srv = server(&plan);
    let addr = srv.local_addr().to_string();
    let configs = suite_configs(&plan);
    let expected: Vec<_> = configs.iter().map(|c| run_episode(c).unwrap()).collect();
    let got: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .chain(configs.iter())
            .map(|c| {
                let addr = addr.clone();
                s.spawn(move || run_episode_remote(c, &addr).unwrap())
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (i, r) in got.iter().enumerate() {
        assert_eq!(r, &expected[i % expected.len()]);
    }
    srv.shutdown();
}

struct Raw {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Raw {
    fn connect(addr: std::net::SocketAddr) -> Raw {
        let s = TcpStream::connect(addr).unwrap();
        Raw {
            reader: BufReader::new(s.try_clone().unwrap()),
            writer: s,
        }
    }

    fn send(&mut self, line: &str) {
        self.writer.write_all(line.as_bytes()).unwrap();
        self.writer.write_all(b"\n").unwrap();
    }

    fn recv(&mut self) -> Option<Value> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(serde_json::from_str(&line).unwrap()),
        }
    }
}

#[test]
fn collision_is_reported_then_the_connection_closes() {
    let plan = Arc::new(default_plan());
    let srv = server(&plan);
    let mut c = Raw::connect(srv.local_addr());
    c.send(r#"{"kind":"hello","v":1,"spawn":{"x":11.0,"y":1.0,"z":1.5,"yaw":0.0}}"#);
    let hello = c.recv().unwrap();
    assert_eq!(hello["kind"], "obs");
    let session = hello["session"].as_str().unwrap().to_string();
    let mut step = 0;
    loop {
        c.send(&format!(r#"{{"kind":"act","session":"{session}","step":{step},"command":"a3"}}"#));
        let obs = c.recv().unwrap();
        assert_eq!(obs["kind"], "obs");
        step = obs["obs"]["step"].as_u64().unwrap();
        if obs["obs"]["collided"] == true {
            assert_eq!(obs["obs"]["contact"]["obstacle"], "wall_east");
            break;
        }
        assert!(step < 10);
    }
    let result = c.recv().unwrap();
    assert_eq!(result["kind"], "result");
    assert_eq!(result["reason"], "collision");
    assert_eq!(result["steps"], step);
    assert!(c.recv().is_none());
    srv.shutdown();
}

#[test]
fn stale_step_and_foreign_session_are_rejected_without_ending_the_session() {
    let plan = Arc::new(default_plan());
    let srv = server(&plan);
    let mut c = Raw::connect(srv.local_addr());
    c.send(r#"{"kind":"hello","v":1,"spawn":{"x":5.0,"y":1.0,"z":2.5,"yaw":0.0}}"#);
    let session = c.recv().unwrap()["session"].as_str().unwrap().to_string();
    c.send(&format!(r#"{{"kind":"act","session":"{session}","step":0,"command":"E"}}"#));
    assert_eq!(c.recv().unwrap()["obs"]["step"], 1);
    c.send(&format!(r#"{{"kind":"act","session":"{session}","step":0,"command":"E"}}"#));
    let e = c.recv().unwrap();
    assert_eq!((e["code"].as_str(), e["fatal"].as_bool()), (Some("out_of_order"), Some(false)));
    c.send(r#"{"kind":"act","session":"nobody","step":1,"command":"E"}"#);
    assert_eq!(c.recv().unwrap()["code"], "session_mismatch");
    c.send(&format!(r#"{{"kind":"act","session":"{session}","step":1,"command":"Z9"}}"#));
    assert_eq!(c.recv().unwrap()["code"], "unknown_command");
    c.send(&format!(r#"{{"kind":"bye","session":"{session}"}}"#));
    let r = c.recv().unwrap();
    assert_eq!((r["reason"].as_str(), r["steps"].as_u64()), (Some("bye"), Some(1)));
    assert!(c.recv().is_none());
    srv.shutdown();
}
