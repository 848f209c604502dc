use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use indoor_pilot::fsm::FsmState;
use indoor_pilot::percept::DoorPosition;
use indoor_pilot::pilot::{
    build_prompt, DecisionContext, LivePilot, Pilot, PilotConfig, PilotError, PromptVariant, Provider,
};
use indoor_pilot::sim::{observe, DronePose, MotionCommand, RotationConvention, SimConfig};
use indoor_pilot::world::default_plan;

const EXAMPLE: &str = include_str!("fixtures/output_example.txt");

struct Reply {
    status: u16,
    body: String,
    delay: Duration,
}

impl Reply {
    fn ok(body: Value) -> Reply {
        Reply {
            status: 200,
            body: body.to_string(),
            delay: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    headers: Vec<(String, String)>,
    body: Value,
}

/// Serves scripted replies, one per connection, and records each request.
fn stub(replies: Vec<Reply>) -> (SocketAddr, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for reply in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
            let mut headers = Vec::new();
            let mut len = 0;
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                let h = h.trim_end();
                if h.is_empty() {
                    break;
                }
                let (k, v) = h.split_once(':').unwrap();
                let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
                if k == "content-length" {
                    len = v.parse().unwrap();
                }
                headers.push((k, v));
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Seen {
                path,
                headers,
                body: serde_json::from_slice(&body).unwrap_or(Value::Null),
            });
            thread::sleep(reply.delay);
            let mut out = stream;
            let _ = write!(
                out,
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.status,
                reply.body.len(),
                reply.body
            );
        }
    });
    (addr, seen)
}

fn openai_reply(text: &str) -> Reply {
    Reply::ok(json!({"choices": [{"message": {"role": "assistant", "content": text}}]}))
}

fn gemini_reply(text: &str) -> Reply {
    Reply::ok(json!({"candidates": [{"content": {"parts": [{"text": text}]}}]}))
}

fn config(provider: Provider, addr: SocketAddr) -> PilotConfig {
    PilotConfig {
        endpoint: Some(format!("http://{addr}/v1")),
        api_key: Some("test-key".into()),
        timeout_secs: 2,
        max_retries: 2,
        ..PilotConfig::new(provider)
    }
}

/// Asks `pilot` for one decision in `state`.
fn decide(pilot: &mut LivePilot, state: FsmState) -> Result<indoor_pilot::pilot::Decision, PilotError> {
    let plan = default_plan();
    let sim = SimConfig::default();
    let obs = observe(&plan, &sim, &DronePose::new(7.5, 1.0, 3.0, 90.0), 0, None, false).unwrap();
    let bundle = build_prompt(
        "Find the mirror in the bedroom",
        "{}",
        state,
        None,
        None,
        "",
        RotationConvention::BRight,
        PromptVariant::Standard,
    )
    .unwrap();
    pilot.decide(&DecisionContext {
        step: 0,
        state,
        observation: &obs,
        bundle: &bundle,
    })
}

#[test]
fn example_reply_is_accepted_first_time() {
    for (provider, reply) in [(Provider::OpenAi, openai_reply(EXAMPLE)), (Provider::Gemini, gemini_reply(EXAMPLE))] {
        let (addr, seen) = stub(vec![reply]);
        let mut pilot = LivePilot::from_config(&config(provider, addr)).unwrap();
        let d = decide(&mut pilot, FsmState::DescribeObject).unwrap();
        assert_eq!(d.attempts, 1);
        assert!(d.violations.is_empty());
        assert_eq!(d.response.room, "bedroom");
        assert_eq!(d.response.movement, MotionCommand::E);
        assert_eq!(d.response.state, FsmState::Final);
        assert_eq!(d.response.door_position, DoorPosition::NotVisible);
        assert!(d.response.description.starts_with("A large mirror"));
        assert_eq!(d.raw, EXAMPLE);
        let seen = seen.lock().unwrap();
        assert_eq!(seen.len(), 1);
        match provider {
            Provider::Gemini => {
                assert_eq!(seen[0].path, "/v1/models/gemini-2.5-flash:generateContent");
                assert!(seen[0].headers.contains(&("x-goog-api-key".into(), "test-key".into())));
            }
            _ => {
                assert_eq!(seen[0].path, "/v1/chat/completions");
                assert!(seen[0].headers.contains(&("authorization".into(), "Bearer test-key".into())));
                assert_eq!(seen[0].body["model"], "gpt-4.1");
            }
        }
    }
}

#[test]
fn invalid_reply_is_corrected_on_retry() {
    let bad = EXAMPLE.replace("'E'", "'A1'");
    let (addr, seen) = stub(vec![openai_reply(&bad), openai_reply(EXAMPLE)]);
    let mut pilot = LivePilot::from_config(&config(Provider::OpenAi, addr)).unwrap();
    let d = decide(&mut pilot, FsmState::DescribeObject).unwrap();
    assert_eq!(d.attempts, 2);
    assert_eq!(d.violations, ["move A1 not allowed in DescribeObject"]);
    let seen = seen.lock().unwrap();
    let user = |i: usize| seen[i].body["messages"][1]["content"][0]["text"].as_str().unwrap().to_string();
    assert!(!user(0).contains("CORRECTION"));
    assert!(user(1).contains("move A1 not allowed in DescribeObject"));
}

#[test]
fn retries_run_out() {
    let (addr, _) = stub((0..3).map(|_| openai_reply("I think we should move forward.")).collect());
    let mut pilot = LivePilot::from_config(&config(Provider::OpenAi, addr)).unwrap();
    match decide(&mut pilot, FsmState::DescribeObject) {
        Err(PilotError::RetriesExhausted { attempts, last, raw }) => {
            assert_eq!(attempts, 3);
            assert_eq!(last, ["no JSON object found in response"]);
            assert_eq!(raw, "I think we should move forward.");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn reply_without_text_counts_as_invalid() {
    let (addr, _) = stub(vec![Reply::ok(json!({"candidates": []})), gemini_reply(EXAMPLE)]);
    let mut pilot = LivePilot::from_config(&config(Provider::Gemini, addr)).unwrap();
    let d = decide(&mut pilot, FsmState::DescribeObject).unwrap();
    assert_eq!(d.attempts, 2);
    assert_eq!(d.violations, ["provider reply has no message text"]);
}

#[test]
fn http_error_status_is_surfaced() {
    let (addr, _) = stub(vec![Reply {
        status: 429,
        body: r#"{"error":"rate limited"}"#.into(),
        delay: Duration::ZERO,
    }]);
    let mut pilot = LivePilot::from_config(&config(Provider::OpenAi, addr)).unwrap();
    match decide(&mut pilot, FsmState::DescribeObject) {
        Err(PilotError::HttpStatus { code, body }) => {
            assert_eq!(code, 429);
            assert!(body.contains("rate limited"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn slow_server_times_out() {
    let (addr, _) = stub(vec![Reply {
        delay: Duration::from_secs(4),
        ..openai_reply(EXAMPLE)
    }]);
    let mut cfg = config(Provider::OpenAi, addr);
    cfg.timeout_secs = 1;
    let mut pilot = LivePilot::from_config(&cfg).unwrap();
    assert_eq!(decide(&mut pilot, FsmState::DescribeObject).unwrap_err(), PilotError::Timeout);
}

#[test]
fn refused_connection_is_a_transport_error() {
    let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let mut pilot = LivePilot::from_config(&config(Provider::Gemini, addr)).unwrap();
    assert!(matches!(decide(&mut pilot, FsmState::DescribeObject), Err(PilotError::Transport(_))));
}
