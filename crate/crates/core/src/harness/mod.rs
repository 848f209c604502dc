//! Episodes, benchmarks, reports and trajectory plots.

mod plot;
mod query;
mod report;
mod suite;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use plot::emit_trajectory_plot;
pub use query::{Query, QueryError};
pub use report::{emit_report, BenchmarkReport, ReportFormat, ReportRow, RowCounts};
pub use suite::{default_suite, run_benchmark, run_benchmark_with, Suite, SuiteCase, SuiteSpawn, DEFAULT_SUITE_TOML};

use crate::fsm::{initial_state, validate, FsmState, TransitionDecision};
use crate::percept::bearing_to;
use crate::pilot::transcript::{TranscriptHeader, TranscriptRecord, TranscriptWriter, TRANSCRIPT_VERSION};
use crate::pilot::{build_prompt, make_pilot, Decision, DecisionContext, Pilot, PilotConfig, PilotError, PROMPT_VERSION};
use crate::sim::{check_free, DronePose, MotionCommand, Observation, SimConfig, SimError, SimSession, Simulator};
use crate::world::{room_of, topological_map_of, FloorPlan};

pub const DEFAULT_MAX_STEPS: usize = 50;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("max_steps must be at least 1")]
    NoSteps,
    #[error(transparent)]
    Spawn(SimError),
    #[error("simulator: {0}")]
    Sim(SimError),
    #[error(transparent)]
    Pilot(#[from] PilotError),
    #[error("suite error: {0}")]
    Suite(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// How close and how squarely the drone must end up facing a target object.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachThresholds {
    pub distance_m: f64,
    pub bearing_deg: f64,
}

impl Default for ReachThresholds {
    fn default() -> Self {
        ReachThresholds {
            distance_m: 1.2,
            bearing_deg: 15.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    FalseSuccess,
    Collision,
    MaxStepsExceeded,
    ProtocolError,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Success,
        Outcome::FalseSuccess,
        Outcome::Collision,
        Outcome::MaxStepsExceeded,
        Outcome::ProtocolError,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    /// Pose after the command was applied.
    pub pose: DronePose,
    pub command: MotionCommand,
    pub state: FsmState,
    pub next_state: FsmState,
    pub collided: bool,
    /// SHA-256 prefix of the accepted raw response.
    pub response_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub steps_used: usize,
    pub spawn: DronePose,
    pub query: Query,
    pub pilot: String,
    pub trajectory: Vec<TrajectoryPoint>,
    pub final_pose: DronePose,
    pub final_state: FsmState,
    pub transcript: Option<PathBuf>,
    /// What went wrong, for collisions and protocol errors.
    pub cause: Option<String>,
}

impl EpisodeResult {
    pub fn commands(&self) -> impl Iterator<Item = MotionCommand> + '_ {
        self.trajectory.iter().map(|p| p.command)
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeConfig {
    pub plan: Arc<FloorPlan>,
    pub sim: SimConfig,
    pub spawn: DronePose,
    pub query: Query,
    pub max_steps: usize,
    pub pilot: PilotConfig,
    pub reach: ReachThresholds,
    /// Where to write the transcript, if anywhere.
    pub transcript: Option<PathBuf>,
    /// Directory for per-step PNG frames, if any.
    pub frames_dir: Option<PathBuf>,
}

impl EpisodeConfig {
    pub fn new(plan: Arc<FloorPlan>, spawn: DronePose, query: Query, pilot: PilotConfig) -> Self {
        EpisodeConfig {
            plan,
            sim: SimConfig::default(),
            spawn,
            query,
            max_steps: DEFAULT_MAX_STEPS,
            pilot,
            reach: ReachThresholds::default(),
            transcript: None,
            frames_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.query.validate(&self.plan)?;
        if self.max_steps == 0 {
            return Err(HarnessError::NoSteps);
        }
        check_free(&self.plan, &self.sim.body, &self.spawn).map_err(HarnessError::Spawn)
    }
}

/// Ground truth for a pilot that declares the goal reached from `state`.
pub fn check_success(plan: &FloorPlan, pose: &DronePose, query: &Query, state: FsmState, reach: &ReachThresholds) -> bool {
    if !state.is_pre_final() || room_of(plan, pose.x, pose.z) != query.target_room {
        return false;
    }
    let Some(id) = &query.target_object else {
        return true;
    };
    let Some(obj) = plan.object(id) else {
        return false;
    };
    pose.ground().distance(obj.position) <= reach.distance_m
        && bearing_to(pose.ground(), pose.yaw, obj.position).abs() <= reach.bearing_deg
}

/// Sign changes between consecutive rotation commands.
pub fn rotation_sign_flips(commands: impl IntoIterator<Item = MotionCommand>, sim: &SimConfig) -> usize {
    let signs: Vec<bool> = commands
        .into_iter()
        .filter(|c| c.is_rotation())
        .map(|c| sim.rotation_convention.yaw_delta(c) > 0.0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn digest_prefix(raw: &str) -> String {
    hex::encode(&Sha256::digest(raw.as_bytes())[..8])
}

/// Runs one episode against a local simulator.
pub fn run_episode(config: &EpisodeConfig) -> Result<EpisodeResult, HarnessError> {
    config.validate()?;
    let mut pilot = make_pilot(&config.pilot, config.plan.clone(), config.sim, &config.query)?;
    let mut sim = Simulator::new(config.plan.clone(), config.sim);
    run_episode_with(config, &mut sim, pilot.as_mut())
}

struct Run<'a> {
    config: &'a EpisodeConfig,
    trajectory: Vec<TrajectoryPoint>,
    pose: DronePose,
    state: FsmState,
    pilot: String,
}

impl Run<'_> {
    fn finish(self, outcome: Outcome, cause: Option<String>) -> EpisodeResult {
        EpisodeResult {
            outcome,
            steps_used: self.trajectory.len(),
            spawn: self.config.spawn,
            query: self.config.query.clone(),
            pilot: self.pilot,
            trajectory: self.trajectory,
            final_pose: self.pose,
            final_state: self.state,
            transcript: self.config.transcript.clone(),
            cause,
        }
    }
}

fn save_frames(dir: &std::path::Path, obs: &Observation) -> Result<(), HarnessError> {
    use base64::Engine;
    let io = |source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    for (name, data) in [("front", &obs.front), ("rear", &obs.rear)] {
        if let Some(b64) = data {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(b64)
                .map_err(|e| io(std::io::Error::other(e)))?;
            let path = dir.join(format!("step_{:03}_{name}.png", obs.step));
            std::fs::write(&path, bytes).map_err(|source| HarnessError::Io { path, source })?;
        }
    }
    Ok(())
}

/// Runs one episode with a caller-supplied simulator session and pilot.
pub fn run_episode_with(
    config: &EpisodeConfig,
    sim: &mut dyn SimSession,
    pilot: &mut dyn Pilot,
) -> Result<EpisodeResult, HarnessError> {
    config.validate()?;
    let map_json = topological_map_of(&config.plan).to_json();
    let mut writer = match &config.transcript {
        Some(path) => Some(TranscriptWriter::create(
            path,
            &TranscriptHeader {
                version: TRANSCRIPT_VERSION,
                pilot: pilot.label(),
                plan: config.plan.name.clone(),
                query: config.query.clone(),
                spawn: config.spawn,
                max_steps: config.max_steps,
                reach: config.reach,
                rotation_convention: config.sim.rotation_convention,
                prompt_version: PROMPT_VERSION.to_string(),
                prompt_variant: config.pilot.variant,
            },
        )?),
        None => None,
    };
    let mut run = Run {
        config,
        trajectory: Vec::new(),
        pose: config.spawn,
        state: initial_state(),
        pilot: pilot.label(),
    };
    sim.set_frames(pilot.needs_frames() || config.frames_dir.is_some());
    let mut obs = match sim.reset(config.spawn) {
        Ok(o) => o,
        Err(e @ SimError::StartInCollision { .. }) => return Err(HarnessError::Spawn(e)),
        Err(e) => return Ok(run.finish(Outcome::ProtocolError, Some(e.to_string()))),
    };
    if let Some(dir) = &config.frames_dir {
        save_frames(dir, &obs)?;
    }
    let mut prev: Option<(FsmState, MotionCommand)> = None;
    for step in 0..config.max_steps {
        let bundle = build_prompt(
            &config.query.text,
            &map_json,
            run.state,
            prev.map(|p| p.0),
            prev.map(|p| p.1),
            obs.front.as_deref().unwrap_or(""),
            config.sim.rotation_convention,
            config.pilot.variant,
        )
        .expect("non-terminal state has a prompt");
        let ctx = DecisionContext {
            step,
            state: run.state,
            observation: &obs,
            bundle: &bundle,
        };
        let decided = pilot.decide(&ctx);
        let (record, decision): (TranscriptRecord, Result<Decision, String>) = match decided {
            Ok(d) => {
                let violations = validate(
                    run.state,
                    &TransitionDecision {
                        movement: d.response.movement,
                        next_state: d.response.state,
                    },
                );
                let rec = TranscriptRecord {
                    step,
                    state: run.state,
                    prompt_digest: bundle.digest(),
                    raw: d.raw.clone(),
                    response: violations.is_empty().then(|| d.response.clone()),
                    violations: if violations.is_empty() {
                        d.violations.clone()
                    } else {
                        violations.iter().map(ToString::to_string).collect()
                    },
                    attempts: d.attempts,
                    latency_ms: d.latency_ms,
                };
                let result = if violations.is_empty() {
                    Ok(d)
                } else {
                    Err(format!(
                        "invalid decision: {}",
                        violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
                    ))
                };
                (rec, result)
            }
            Err(e) => {
                let (raw, violations, attempts) = match &e {
                    PilotError::RetriesExhausted { attempts, last, raw } => (raw.clone(), last.clone(), *attempts),
                    _ => (String::new(), Vec::new(), 0),
                };
                let rec = TranscriptRecord {
                    step,
                    state: run.state,
                    prompt_digest: bundle.digest(),
                    raw,
                    response: None,
                    violations,
                    attempts,
                    latency_ms: None,
                };
                (rec, Err(e.to_string()))
            }
        };
        if let Some(w) = writer.as_mut() {
            w.append(&record)?;
        }
        let d = match decision {
            Ok(d) => d,
            Err(cause) => return Ok(run.finish(Outcome::ProtocolError, Some(cause))),
        };
        let movement = d.response.movement;
        let next = d.response.state;
        obs = match sim.step(movement) {
            Ok(o) => o,
            Err(e) => return Ok(run.finish(Outcome::ProtocolError, Some(e.to_string()))),
        };
        if let Some(dir) = &config.frames_dir {
            save_frames(dir, &obs)?;
        }
        run.pose = obs.pose;
        run.trajectory.push(TrajectoryPoint {
            step,
            pose: obs.pose,
            command: movement,
            state: run.state,
            next_state: next,
            collided: obs.collided,
            response_digest: digest_prefix(&d.raw),
        });
        if obs.collided {
            let cause = obs
                .contact
                .as_ref()
                .map(|c| format!("collided with {}", c.obstacle));
            return Ok(run.finish(Outcome::Collision, cause));
        }
        if next == FsmState::Final {
            let ok = check_success(&config.plan, &obs.pose, &config.query, run.state, &config.reach);
            return Ok(run.finish(
                if ok { Outcome::Success } else { Outcome::FalseSuccess },
                None,
            ));
        }
        prev = Some((run.state, movement));
        run.state = next;
    }
    Ok(run.finish(Outcome::MaxStepsExceeded, None))
}

/// Re-runs a recorded episode from its transcript. The result points at the
/// replayed transcript, so it compares equal to the original run's result.
pub fn replay_episode(plan: Arc<FloorPlan>, sim: SimConfig, transcript: &std::path::Path) -> Result<EpisodeResult, HarnessError> {
    let mut pilot = crate::pilot::ReplayPilot::open(transcript)?;
    let header = pilot.transcript().header.clone();
    if header.plan != plan.name {
        return Err(HarnessError::Suite(format!(
            "transcript was recorded on plan `{}`, not `{}`",
            header.plan, plan.name
        )));
    }
    let mut config = EpisodeConfig::new(plan, header.spawn, header.query, PilotConfig::replay(transcript));
    config.sim = SimConfig {
        rotation_convention: header.rotation_convention,
        ..sim
    };
    config.max_steps = header.max_steps;
    config.reach = header.reach;
    config.pilot.variant = header.prompt_variant;
    let mut local = Simulator::new(config.plan.clone(), config.sim);
    let mut result = run_episode_with(&config, &mut local, &mut pilot)?;
    result.transcript = Some(transcript.to_path_buf());
    Ok(result)
}
