use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_indoor-pilot"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn oracle_run(dir: &Path) -> (Output, std::path::PathBuf) {
    let t = dir.join("run.jsonl");
    let o = run(&[
        "run",
        "--spawn",
        "bathroom",
        "--query",
        "Go to the living room/kitchen",
        "--transcript",
        t.to_str().unwrap(),
        "--plot",
        dir.join("run.svg").to_str().unwrap(),
        "--json",
    ]);
    (o, t)
}

#[test]
fn fsm_dump_lists_every_state() {
    let o = run(&["fsm", "dump"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 9);
    assert!(text.starts_with("state\tallowed_moves\tnext_states\tgoal\n"));
    assert!(text.contains("StayOnRoom\tE\tFinal\t"));
}

#[test]
fn plan_prints_a_loadable_plan() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["plan"]);
    assert!(o.status.success());
    let path = dir.path().join("plan.toml");
    std::fs::write(&path, &o.stdout).unwrap();
    let r = run(&["render", "--plan", path.to_str().unwrap(), "--pose", "5,1,2.5,0", "--out", dir.path().join("f.png").to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn oracle_run_then_replay_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (o, transcript) = oracle_run(dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(first["outcome"], "Success");
    assert!(std::fs::read_to_string(dir.path().join("run.svg")).unwrap().contains("</svg>"));
    let r = run(&["replay", "--transcript", transcript.to_str().unwrap(), "--json"]);
    assert!(r.status.success());
    let again: Value = serde_json::from_str(&stdout(&r)).unwrap();
    assert_eq!(again, first);
}

#[test]
fn illegal_transcript_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let (_, transcript) = oracle_run(dir.path());
    let text = std::fs::read_to_string(&transcript).unwrap();
    let mut lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    lines[1]["response"]["state"] = "Final".into();
    lines[1]["response"]["movement"] = "A1".into();
    let out: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(&transcript, out).unwrap();
    let r = run(&["replay", "--transcript", transcript.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stdout(&r).starts_with("ProtocolError after 0 steps"));
}

#[test]
fn bench_csv_has_one_line_per_row() {
    let o = run(&["bench", "--reps", "1", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 11);
    assert!(lines[0].starts_with("Starting Room,Query,oracle Ach."));
    assert!(lines[1..].iter().all(|l| l.contains(",1/1,--,--,--,--")));
}

#[test]
fn render_writes_png_frames() {
    let dir = tempfile::tempdir().unwrap();
    let (front, rear) = (dir.path().join("front.png"), dir.path().join("rear.png"));
    let o = run(&["render", "--pose", "7.5,1,3,90", "--out", front.to_str().unwrap(), "--rear", rear.to_str().unwrap()]);
    assert!(o.status.success());
    for p in [front, rear] {
        assert!(std::fs::read(p).unwrap().starts_with(b"\x89PNG\r\n\x1a\n"));
    }
}

#[test]
fn bad_input_exits_with_two() {
    let o = run(&["run", "--spawn", "attic", "--query", "Go to the bedroom"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("attic"));
    let o = run(&["run", "--spawn", "bathroom", "--query", "Go to the garage"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_against_simserve_matches_local() {
    let mut server = bin()
        .args(["simserve", "--bind", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit(' ').next().unwrap().to_string();
    let args = ["run", "--spawn", "living", "--query", "Find the refrigerator in the living room or kitchen", "--json"];
    let local = run(&args);
    let sim = format!("remote:{addr}");
    let remote = run(&[&args[..], &["--sim", &sim]].concat());
    server.kill().unwrap();
    let _ = server.wait();
    assert!(remote.status.success(), "{}", String::from_utf8_lossy(&remote.stderr));
    assert_eq!(stdout(&remote), stdout(&local));
}
