//! Kinematic drone simulator.
//!
//! The drone is a horizontal disc flying at constant altitude. Translations
//! are swept in sub-steps of at most [`SUB_STEP`] meters and stop at the last
//! collision-free sub-step; rotations happen in place and never collide.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::percept::{self, CameraModel, SemanticObservation};
use crate::world::geometry::CONTACT_EPS;
use crate::world::{normalize_yaw, FloorPlan, Vec2};

/// Maximum sub-step length for swept translation, meters.
pub const SUB_STEP: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("pose ({x:.3}, {z:.3}) starts in collision with `{obstacle}`")]
    StartInCollision { obstacle: String, x: f64, z: f64 },
    #[error("{0} is not a rotation command")]
    NotRotation(MotionCommand),
    #[error("no active session; reset first")]
    NoSession,
    #[error("render failed: {0}")]
    Render(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DronePose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Degrees counterclockwise from +X viewed from above, in [0, 360).
    pub yaw: f64,
}

impl DronePose {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        DronePose {
            x,
            y,
            z,
            yaw: normalize_yaw(yaw),
        }
    }

    pub fn ground(&self) -> Vec2 {
        Vec2::new(self.x, self.z)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_heading_deg(self.yaw)
    }

    /// Unit vector pointing to the drone's left.
    pub fn left(&self) -> Vec2 {
        self.heading().perp()
    }

    pub fn with_ground(&self, p: Vec2) -> DronePose {
        DronePose {
            x: p.x,
            z: p.z,
            ..*self
        }
    }
}

impl fmt::Display for DronePose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.z, self.yaw)
    }
}

impl FromStr for DronePose {
    type Err = String;

    /// Parses `x,y,z,yaw`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("bad pose `{s}`: {e}"))?;
        match parts[..] {
            [x, y, z, yaw] if parts.iter().all(|v| v.is_finite()) => Ok(DronePose::new(x, y, z, yaw)),
            _ => Err(format!("pose `{s}` must be four finite numbers x,y,z,yaw")),
        }
    }
}

/// The motion vocabulary: forward (A), rotate right (B), rotate left (C),
/// lateral (D) and hover (E).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MotionCommand {
    A1,
    A2,
    A3,
    B1,
    B2,
    B3,
    C1,
    C2,
    C3,
    D1,
    D2,
    E,
}

/// What a command physically does, with its magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Motion {
    /// Meters along the heading.
    Forward(f64),
    /// Degrees; B commands.
    RotateRight(f64),
    /// Degrees; C commands.
    RotateLeft(f64),
    /// Meters; positive is to the drone's left.
    Lateral(f64),
    Hover,
}

impl MotionCommand {
    pub const ALL: [MotionCommand; 12] = [
        MotionCommand::A1,
        MotionCommand::A2,
        MotionCommand::A3,
        MotionCommand::B1,
        MotionCommand::B2,
        MotionCommand::B3,
        MotionCommand::C1,
        MotionCommand::C2,
        MotionCommand::C3,
        MotionCommand::D1,
        MotionCommand::D2,
        MotionCommand::E,
    ];

    pub const ROTATIONS: [MotionCommand; 6] = [
        MotionCommand::B1,
        MotionCommand::B2,
        MotionCommand::B3,
        MotionCommand::C1,
        MotionCommand::C2,
        MotionCommand::C3,
    ];

    pub fn code(self) -> &'static str {
        use MotionCommand::*;
        match self {
            A1 => "A1",
            A2 => "A2",
            A3 => "A3",
            B1 => "B1",
            B2 => "B2",
            B3 => "B3",
            C1 => "C1",
            C2 => "C2",
            C3 => "C3",
            D1 => "D1",
            D2 => "D2",
            E => "E",
        }
    }

    pub fn motion(self) -> Motion {
        use MotionCommand::*;
        match self {
            A1 => Motion::Forward(0.10),
            A2 => Motion::Forward(0.25),
            A3 => Motion::Forward(0.50),
            B1 => Motion::RotateRight(15.0),
            B2 => Motion::RotateRight(45.0),
            B3 => Motion::RotateRight(90.0),
            C1 => Motion::RotateLeft(15.0),
            C2 => Motion::RotateLeft(45.0),
            C3 => Motion::RotateLeft(90.0),
            D1 => Motion::Lateral(0.10),
            D2 => Motion::Lateral(-0.10),
            E => Motion::Hover,
        }
    }

    /// Meters for translations, degrees for rotations, zero for E.
    pub fn magnitude(self) -> f64 {
        match self.motion() {
            Motion::Forward(m) | Motion::RotateRight(m) | Motion::RotateLeft(m) => m,
            Motion::Lateral(m) => m.abs(),
            Motion::Hover => 0.0,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self.motion(), Motion::RotateRight(_) | Motion::RotateLeft(_))
    }

    pub fn is_translation(self) -> bool {
        matches!(self.motion(), Motion::Forward(_) | Motion::Lateral(_))
    }

    /// Human description used in prompts, e.g. "move forward 10 cm".
    pub fn describe(self, convention: RotationConvention) -> String {
        match self.motion() {
            Motion::Forward(m) => format!("move forward {} cm", (m * 100.0).round()),
            Motion::Lateral(m) if m > 0.0 => format!("move left {} cm", (m * 100.0).round()),
            Motion::Lateral(m) => format!("move right {} cm", (-m * 100.0).round()),
            Motion::RotateRight(_) | Motion::RotateLeft(_) => {
                let dir = if convention.yaw_delta(self) < 0.0 { "right" } else { "left" };
                format!("rotate {dir} {}°", self.magnitude())
            }
            Motion::Hover => "no movement".to_string(),
        }
    }
}

impl fmt::Display for MotionCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for MotionCommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let code = s.trim().to_ascii_uppercase();
        MotionCommand::ALL
            .iter()
            .copied()
            .find(|c| c.code() == code)
            .ok_or_else(|| s.to_string())
    }
}

/// Which way B and C commands turn. The default has B turning right
/// (clockwise seen from above, yaw decreasing).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationConvention {
    #[default]
    BRight,
    BLeft,
}

impl RotationConvention {
    /// Signed yaw change in degrees (counterclockwise positive); zero for
    /// non-rotations.
    pub fn yaw_delta(self, cmd: MotionCommand) -> f64 {
        let sign = match self {
            RotationConvention::BRight => 1.0,
            RotationConvention::BLeft => -1.0,
        };
        match cmd.motion() {
            Motion::RotateRight(m) => -sign * m,
            Motion::RotateLeft(m) => sign * m,
            _ => 0.0,
        }
    }
}

impl FromStr for RotationConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "b_right" => Ok(RotationConvention::BRight),
            "b_left" => Ok(RotationConvention::BLeft),
            _ => Err(format!("unknown rotation convention `{s}` (b_right | b_left)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroneBody {
    /// Radius of the horizontal disc covering the propeller tips.
    pub bounding_radius: f64,
    pub height: f64,
}

impl Default for DroneBody {
    fn default() -> Self {
        DroneBody {
            bounding_radius: 0.12,
            height: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub obstacle: String,
    pub point: Vec2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub pose: DronePose,
    pub collided: bool,
    pub contact: Option<Contact>,
    /// Meters (translations) or degrees (rotations) actually executed.
    pub traveled: f64,
}

/// The nearest solid the disc touches at ground point `p`, if any. Boxes
/// lower than the bottom of the drone are flown over.
pub fn collision_at(plan: &FloorPlan, body: &DroneBody, p: Vec2, altitude: f64) -> Option<Contact> {
    let bottom = altitude - 0.5 * body.height;
    let mut best: Option<(f64, Contact)> = None;
    for solid in plan.solids() {
        if solid.height(plan.ceiling_height) <= bottom {
            continue;
        }
        let cp = solid.closest_point(p);
        let d = cp.distance(p);
        if d <= body.bounding_radius + CONTACT_EPS && best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((
                d,
                Contact {
                    obstacle: solid.id().to_string(),
                    point: cp,
                },
            ));
        }
    }
    best.map(|(_, c)| c)
}

/// Gap between the disc edge and the nearest relevant solid (negative when
/// penetrating), with that solid's id.
pub fn clearance(plan: &FloorPlan, body: &DroneBody, pose: &DronePose) -> (f64, Option<String>) {
    let bottom = pose.y - 0.5 * body.height;
    let p = pose.ground();
    plan.solids()
        .filter(|s| s.height(plan.ceiling_height) > bottom)
        .map(|s| (s.distance(p) - body.bounding_radius, Some(s.id().to_string())))
        .fold((f64::INFINITY, None), |a, b| if b.0 < a.0 { b } else { a })
}

pub fn check_free(plan: &FloorPlan, body: &DroneBody, pose: &DronePose) -> Result<(), SimError> {
    match collision_at(plan, body, pose.ground(), pose.y) {
        Some(c) => Err(SimError::StartInCollision {
            obstacle: c.obstacle,
            x: pose.x,
            z: pose.z,
        }),
        None => Ok(()),
    }
}

/// Applies a rotation command to the yaw only.
pub fn compose_rotation(
    pose: &DronePose,
    cmd: MotionCommand,
    convention: RotationConvention,
) -> Result<DronePose, SimError> {
    if !cmd.is_rotation() {
        return Err(SimError::NotRotation(cmd));
    }
    Ok(DronePose {
        yaw: normalize_yaw(pose.yaw + convention.yaw_delta(cmd)),
        ..*pose
    })
}

pub fn apply_motion(
    plan: &FloorPlan,
    body: &DroneBody,
    pose: &DronePose,
    cmd: MotionCommand,
    convention: RotationConvention,
) -> Result<StepResult, SimError> {
    check_free(plan, body, pose)?;
    let (dir, dist) = match cmd.motion() {
        Motion::Hover => {
            return Ok(StepResult {
                pose: *pose,
                collided: false,
                contact: None,
                traveled: 0.0,
            })
        }
        Motion::RotateLeft(m) | Motion::RotateRight(m) => {
            return Ok(StepResult {
                pose: compose_rotation(pose, cmd, convention)?,
                collided: false,
                contact: None,
                traveled: m,
            })
        }
        Motion::Forward(m) => (pose.heading(), m),
        Motion::Lateral(m) => (pose.left().scale(m.signum()), m.abs()),
    };
    let start = pose.ground();
    let n = (dist / SUB_STEP).ceil().max(1.0) as usize;
    for k in 1..=n {
        let p = start.add(dir.scale(dist * k as f64 / n as f64));
        if let Some(contact) = collision_at(plan, body, p, pose.y) {
            let done = dist * (k - 1) as f64 / n as f64;
            return Ok(StepResult {
                pose: pose.with_ground(start.add(dir.scale(done))),
                collided: true,
                contact: Some(contact),
                traveled: done,
            });
        }
    }
    Ok(StepResult {
        pose: pose.with_ground(start.add(dir.scale(dist))),
        collided: false,
        contact: None,
        traveled: dist,
    })
}

/// Everything the simulator reports after a reset or a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub step: usize,
    pub pose: DronePose,
    pub collided: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<Contact>,
    pub semantic: SemanticObservation,
    /// Base64 PNG of the frontal camera, when frames were requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub front: Option<String>,
    /// Base64 PNG of the rear camera, when frames were requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rear: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub body: DroneBody,
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub rotation_convention: RotationConvention,
}

pub fn observe(
    plan: &FloorPlan,
    config: &SimConfig,
    pose: &DronePose,
    step: usize,
    last: Option<&StepResult>,
    frames: bool,
) -> Result<Observation, SimError> {
    let (front, rear) = if frames {
        let f = percept::render_frontal(plan, pose, &config.camera)
            .to_base64_png()
            .map_err(|e| SimError::Render(e.to_string()))?;
        let r = percept::render_rear(plan, pose, &config.camera)
            .to_base64_png()
            .map_err(|e| SimError::Render(e.to_string()))?;
        (Some(f), Some(r))
    } else {
        (None, None)
    };
    Ok(Observation {
        step,
        pose: *pose,
        collided: last.is_some_and(|r| r.collided),
        contact: last.and_then(|r| r.contact.clone()),
        semantic: percept::semantic_observe(plan, pose, &config.camera),
        front,
        rear,
    })
}

/// A simulator the episode loop can drive: local or remote.
pub trait SimSession {
    fn reset(&mut self, spawn: DronePose) -> Result<Observation, SimError>;
    fn step(&mut self, cmd: MotionCommand) -> Result<Observation, SimError>;
    /// Ask for rendered frames in subsequent observations.
    fn set_frames(&mut self, frames: bool);
    fn close(&mut self) {}
}

/// In-process simulator session owning one mutable pose.
pub struct Simulator {
    plan: Arc<FloorPlan>,
    config: SimConfig,
    pose: Option<DronePose>,
    step: usize,
    frames: bool,
}

impl Simulator {
    pub fn new(plan: Arc<FloorPlan>, config: SimConfig) -> Self {
        Simulator {
            plan,
            config,
            pose: None,
            step: 0,
            frames: false,
        }
    }

    pub fn pose(&self) -> Option<DronePose> {
        self.pose
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }
}

impl SimSession for Simulator {
    fn reset(&mut self, spawn: DronePose) -> Result<Observation, SimError> {
        check_free(&self.plan, &self.config.body, &spawn)?;
        self.pose = Some(spawn);
        self.step = 0;
        observe(&self.plan, &self.config, &spawn, 0, None, self.frames)
    }

    fn step(&mut self, cmd: MotionCommand) -> Result<Observation, SimError> {
        let pose = self.pose.ok_or(SimError::NoSession)?;
        let result = apply_motion(
            &self.plan,
            &self.config.body,
            &pose,
            cmd,
            self.config.rotation_convention,
        )?;
        self.pose = Some(result.pose);
        self.step += 1;
        observe(
            &self.plan,
            &self.config,
            &result.pose,
            self.step,
            Some(&result),
            self.frames,
        )
    }

    fn set_frames(&mut self, frames: bool) {
        self.frames = frames;
    }
}
