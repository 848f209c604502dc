//! Ground-truth pilot: decides from the floor plan and the true pose, never
//! from pixels. Stateless between steps; everything is recomputed from the
//! observation and the current FSM state.

use std::sync::Arc;

use super::{serialize, Decision, DecisionContext, Pilot, PilotError, PilotResponse};
use crate::fsm::FsmState;
use crate::harness::Query;
use crate::percept::{bearing_to, DoorPosition};
use crate::sim::{apply_motion, DronePose, MotionCommand, Observation, SimConfig};
use crate::world::{room_of, room_path, topological_map_of, wrap_deg, Door, FloorPlan, TopologicalMap, Vec2};

use MotionCommand::*;

/// A heading counts as aligned once no rotation command brings the bearing
/// closer to zero, which for 15° steps means |bearing| ≤ 7.5°.
pub const ALIGN_TOLERANCE_DEG: f64 = 7.5;
/// Distance in front of a door where the straight final approach starts.
const STANDOFF: f64 = 0.5;
/// Depth beyond which the drone first steers toward the standoff point.
const FAR_DEPTH: f64 = 0.6;
/// Lateral error that triggers steering toward the standoff point.
const FAR_LATERAL: f64 = 0.08;
/// Lateral error tolerated on the final approach.
const LATERAL_TOLERANCE: f64 = 0.05;
const DESCRIBE_DISTANCE: f64 = 1.0;
const DESCRIBE_BEARING: f64 = 10.0;
/// Extra distance beyond which object search strides with A2.
const STRIDE_MARGIN: f64 = 0.5;

const FINE: [MotionCommand; 2] = [B1, C1];

/// The rotation among `candidates` that brings `bearing` closest to zero, if
/// any of them improves on it.
pub fn rotation_toward(bearing: f64, candidates: &[MotionCommand], sim: &SimConfig) -> Option<MotionCommand> {
    let mut best: Option<(f64, MotionCommand)> = None;
    for &c in candidates {
        let after = wrap_deg(bearing + sim.rotation_convention.yaw_delta(c)).abs();
        if best.is_none_or(|(b, _)| after < b) {
            best = Some((after, c));
        }
    }
    best.filter(|(after, _)| *after < bearing.abs() - 1e-9)
        .map(|(_, c)| c)
}

/// A door seen from the room the drone is leaving.
struct DoorFrame<'a> {
    door: &'a Door,
    center: Vec2,
    along: Vec2,
    /// Unit normal pointing into the next room.
    normal: Vec2,
}

pub struct OraclePilot {
    plan: Arc<FloorPlan>,
    map: TopologicalMap,
    sim: SimConfig,
    query: Query,
    /// Room the current door approach started from.
    departure: Option<String>,
}

impl OraclePilot {
    pub fn new(plan: Arc<FloorPlan>, sim: SimConfig, query: Query) -> Result<Self, PilotError> {
        query
            .validate(&plan)
            .map_err(|e| PilotError::MissionImpossible(e.to_string()))?;
        Ok(OraclePilot {
            map: topological_map_of(&plan),
            plan,
            sim,
            query,
            departure: None,
        })
    }

    fn bearing(&self, pose: &DronePose, p: Vec2) -> f64 {
        bearing_to(pose.ground(), pose.yaw, p)
    }

    fn dry_run(&self, pose: &DronePose, cmd: MotionCommand) -> Option<DronePose> {
        apply_motion(&self.plan, &self.sim.body, pose, cmd, self.sim.rotation_convention)
            .ok()
            .filter(|r| !r.collided)
            .map(|r| r.pose)
    }

    fn safe(&self, pose: &DronePose, cmd: MotionCommand) -> bool {
        self.dry_run(pose, cmd).is_some()
    }

    /// The door to take next from `room`, or `None` in the target room.
    fn route_door(&self, room: &str) -> Result<Option<DoorFrame<'_>>, PilotError> {
        if room == self.query.target_room {
            return Ok(None);
        }
        let path = room_path(&self.map, room, &self.query.target_room)
            .map_err(|e| PilotError::MissionImpossible(e.to_string()))?;
        let next = &path[1];
        let door = self
            .plan
            .doors
            .iter()
            .filter(|d| d.connects(room, next))
            .min_by(|a, b| a.id.cmp(&b.id))
            .expect("map edge has a door");
        let (a, b) = (door.opening.from, door.opening.to);
        let along = b.sub(a).scale(1.0 / a.distance(b));
        let center = door.opening.midpoint();
        let mut normal = along.perp();
        let into = self.plan.room(next).expect("route room exists").footprint.center();
        if normal.dot(into.sub(center)) < 0.0 {
            normal = normal.scale(-1.0);
        }
        Ok(Some(DoorFrame {
            door,
            center,
            along,
            normal,
        }))
    }

    fn target_object(&self) -> Option<Vec2> {
        let id = self.query.target_object.as_ref()?;
        self.plan.object(id).map(|o| o.position)
    }

    /// Rotate toward `p`, else move forward if free, else turn.
    fn approach(&self, pose: &DronePose, p: Vec2) -> MotionCommand {
        rotation_toward(self.bearing(pose, p), &MotionCommand::ROTATIONS, &self.sim)
            .unwrap_or(if self.safe(pose, A1) { A1 } else { B1 })
    }

    fn recognize(&self, pose: &DronePose, room: &str) -> Result<(MotionCommand, FsmState), PilotError> {
        if let Some(door) = self.route_door(room)? {
            return Ok((self.approach(pose, door.center), FsmState::SearchOpenDoor));
        }
        Ok(match self.target_object() {
            Some(q) => (self.approach(pose, q), FsmState::SearchObject),
            None => {
                let c = self.plan.room(room).expect("room exists").footprint.center();
                let rot = rotation_toward(self.bearing(pose, c), &MotionCommand::ROTATIONS, &self.sim);
                (rot.unwrap_or(B1), FsmState::StayOnRoom)
            }
        })
    }

    fn search_door(&self, pose: &DronePose, room: &str) -> Result<(MotionCommand, FsmState), PilotError> {
        let Some(door) = self.route_door(room)? else {
            return Ok((E, FsmState::OrientTowardsDoor));
        };
        let b = self.bearing(pose, door.center);
        Ok(match rotation_toward(b, &MotionCommand::ROTATIONS, &self.sim) {
            Some(rot) => (rot, FsmState::SearchOpenDoor),
            None if self.safe(pose, A1) => (A1, FsmState::OrientTowardsDoor),
            None => (E, FsmState::OrientTowardsDoor),
        })
    }

    /// Orient and GoThroughDoor cannot repeat themselves, so the approach
    /// alternates: one correction here, then the forced A1 of GoThroughDoor.
    /// When that A1 would hit something, fall back to SearchOpenDoor.
    fn orient(&self, pose: &DronePose, room: &str, from: &str) -> Result<(MotionCommand, FsmState), PilotError> {
        // Already across: push on so GoThroughDoor can report the new room.
        let cmd = if room != from && self.safe(pose, A1) {
            A1
        } else {
            self.orient_move(pose, room)?
        };
        let next = match self.dry_run(pose, cmd) {
            Some(after) if self.safe(&after, A1) => FsmState::GoThroughDoor,
            _ => FsmState::SearchOpenDoor,
        };
        Ok((cmd, next))
    }

    fn orient_move(&self, pose: &DronePose, room: &str) -> Result<MotionCommand, PilotError> {
        let Some(door) = self.route_door(room)? else {
            return Ok(if self.safe(pose, A1) { A1 } else { B1 });
        };
        let rel = pose.ground().sub(door.center);
        let depth = -rel.dot(door.normal);
        let lateral = rel.dot(door.along);
        if depth > FAR_DEPTH && lateral.abs() > FAR_LATERAL {
            let p = door.center.sub(door.normal.scale(STANDOFF));
            if let Some(rot) = rotation_toward(self.bearing(pose, p), &FINE, &self.sim) {
                return Ok(rot);
            }
            if self.safe(pose, A1) {
                return Ok(A1);
            }
        }
        let square = wrap_deg(pose.yaw - door.normal.angle_deg());
        if let Some(rot) = rotation_toward(square, &FINE, &self.sim) {
            return Ok(rot);
        }
        if lateral.abs() > LATERAL_TOLERANCE {
            let wanted = door.along.scale(-lateral);
            let cmd = if pose.left().dot(wanted) > 0.0 { D1 } else { D2 };
            if self.safe(pose, cmd) {
                return Ok(cmd);
            }
        }
        Ok(A1)
    }

    fn go_through(&self, pose: &DronePose, from: &str) -> (MotionCommand, FsmState) {
        let next = match self.dry_run(pose, A1) {
            Some(after) if room_of(&self.plan, after.x, after.z) != from => FsmState::RecognizeRoom,
            _ => FsmState::OrientTowardsDoor,
        };
        (A1, next)
    }

    fn search_object(&self, pose: &DronePose) -> (MotionCommand, FsmState) {
        let Some(q) = self.target_object() else {
            return (B1, FsmState::SearchObject);
        };
        let b = self.bearing(pose, q);
        if let Some(rot) = rotation_toward(b, &MotionCommand::ROTATIONS, &self.sim) {
            return (rot, FsmState::SearchObject);
        }
        let dist = pose.ground().distance(q);
        if dist > DESCRIBE_DISTANCE + STRIDE_MARGIN && self.safe(pose, A2) {
            return (A2, FsmState::SearchObject);
        }
        if dist > DESCRIBE_DISTANCE && self.safe(pose, A1) {
            return (A1, FsmState::ReachObject);
        }
        // Already close: any rotation keeps the drone in place.
        let rot = if b < 0.0 {
            MotionCommand::ROTATIONS
                .into_iter()
                .find(|&c| self.sim.rotation_convention.yaw_delta(c) == -15.0)
        } else {
            MotionCommand::ROTATIONS
                .into_iter()
                .find(|&c| self.sim.rotation_convention.yaw_delta(c) == 15.0)
        };
        (rot.unwrap_or(B1), FsmState::ReachObject)
    }

    fn reach_object(&self, pose: &DronePose) -> (MotionCommand, FsmState) {
        let Some(q) = self.target_object() else {
            return (E, FsmState::DescribeObject);
        };
        let b = self.bearing(pose, q);
        if let Some(rot) = rotation_toward(b, &FINE, &self.sim) {
            return (rot, FsmState::ReachObject);
        }
        let dist = pose.ground().distance(q);
        if dist <= DESCRIBE_DISTANCE && b.abs() <= DESCRIBE_BEARING {
            return (E, FsmState::DescribeObject);
        }
        if self.safe(pose, A1) {
            (A1, FsmState::ReachObject)
        } else {
            (E, FsmState::DescribeObject)
        }
    }

    fn door_position(&self, obs: &Observation, room: &str) -> DoorPosition {
        let route = self.route_door(room).ok().flatten();
        let seen = match route {
            Some(f) => obs.semantic.door(&f.door.id),
            None => obs.semantic.visible_doors.first(),
        };
        seen.map_or(DoorPosition::NotVisible, |d| d.position)
    }
}

impl Pilot for OraclePilot {
    fn label(&self) -> String {
        "oracle".to_string()
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, PilotError> {
        let pose = ctx.observation.pose;
        let room = room_of(&self.plan, pose.x, pose.z).to_string();
        let from = match ctx.state {
            FsmState::SearchOpenDoor | FsmState::OrientTowardsDoor | FsmState::GoThroughDoor => {
                self.departure.get_or_insert_with(|| room.clone()).clone()
            }
            _ => {
                self.departure = None;
                room.clone()
            }
        };
        let (movement, state) = match ctx.state {
            FsmState::RecognizeRoom => self.recognize(&pose, &room)?,
            FsmState::SearchOpenDoor => self.search_door(&pose, &room)?,
            FsmState::OrientTowardsDoor => self.orient(&pose, &room, &from)?,
            FsmState::GoThroughDoor => self.go_through(&pose, &from),
            FsmState::SearchObject => self.search_object(&pose),
            FsmState::ReachObject => self.reach_object(&pose),
            FsmState::StayOnRoom | FsmState::DescribeObject => (E, FsmState::Final),
            FsmState::Start | FsmState::Final => {
                return Err(PilotError::MissionImpossible(format!("no decision in {}", ctx.state)))
            }
        };
        let description = format!(
            "{} at ({:.2}, {:.2}) heading {:.0}°: {} then {}",
            ctx.state,
            pose.x,
            pose.z,
            pose.yaw,
            movement,
            state
        );
        let response = PilotResponse {
            door_position: self.door_position(ctx.observation, &room),
            room,
            movement,
            state,
            description,
        };
        Ok(Decision {
            raw: serialize(&response),
            response,
            attempts: 1,
            violations: Vec::new(),
            latency_ms: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsm::{validate, TransitionDecision};
    use crate::pilot::build_prompt;
    use crate::sim::{observe, RotationConvention};
    use crate::world::default_plan;

    fn decide(query: Query, pose: DronePose, state: FsmState) -> PilotResponse {
        let plan = Arc::new(default_plan());
        let cfg = SimConfig::default();
        let mut pilot = OraclePilot::new(plan.clone(), cfg, query.clone()).unwrap();
        let obs = observe(&plan, &cfg, &pose, 0, None, false).unwrap();
        let bundle = build_prompt(&query.text, "{}", state, None, None, "", RotationConvention::BRight, Default::default()).unwrap();
        let ctx = DecisionContext {
            step: 0,
            state,
            observation: &obs,
            bundle: &bundle,
        };
        let r = pilot.decide(&ctx).unwrap().response;
        let d = TransitionDecision {
            movement: r.movement,
            next_state: r.state,
        };
        assert!(validate(state, &d).is_empty(), "{state:?} -> {r:?}");
        r
    }

    #[test]
    fn rotation_choice() {
        let cfg = SimConfig::default();
        // bearing +20 (right): B1 gives +5
        assert_eq!(rotation_toward(20.0, &MotionCommand::ROTATIONS, &cfg), Some(B1));
        assert_eq!(rotation_toward(-50.0, &MotionCommand::ROTATIONS, &cfg), Some(C2));
        assert_eq!(rotation_toward(7.5, &MotionCommand::ROTATIONS, &cfg), None);
        assert_eq!(rotation_toward(-7.4, &MotionCommand::ROTATIONS, &cfg), None);
        assert_eq!(rotation_toward(100.0, &FINE, &cfg), Some(B1));
        let swapped = SimConfig {
            rotation_convention: RotationConvention::BLeft,
            ..cfg
        };
        assert_eq!(rotation_toward(20.0, &MotionCommand::ROTATIONS, &swapped), Some(C1));
    }

    #[test]
    fn at_goal_room_stays() {
        let q = Query::new("Go to the bathroom", "bathroom", None);
        let pose = DronePose::new(10.0, 1.0, 2.5, 180.0);
        let r = decide(q.clone(), pose, FsmState::RecognizeRoom);
        assert_eq!(r.state, FsmState::StayOnRoom);
        assert_eq!(r.room, "bathroom");
        let r = decide(q, pose, FsmState::StayOnRoom);
        assert_eq!((r.movement, r.state), (E, FsmState::Final));
    }

    #[test]
    fn facing_object_reaches_immediately() {
        let q = Query::new("Find the mirror", "bedroom", Some("mirror".into()));
        // 1.2 m south of the mirror, facing north
        let pose = DronePose::new(8.3, 1.0, 3.575, 90.0);
        let r = decide(q, pose, FsmState::SearchObject);
        assert_eq!((r.movement, r.state), (A1, FsmState::ReachObject));
    }

    #[test]
    fn other_room_searches_door() {
        let q = Query::new("Go to the bedroom", "bedroom", None);
        let r = decide(q.clone(), DronePose::new(5.0, 1.0, 2.5, 0.0), FsmState::RecognizeRoom);
        assert_eq!((r.movement, r.state), (A1, FsmState::SearchOpenDoor));
        assert_eq!(r.door_position, DoorPosition::Center);
        let r = decide(q, DronePose::new(5.0, 1.0, 2.5, 90.0), FsmState::SearchOpenDoor);
        assert_eq!((r.movement, r.state), (B3, FsmState::SearchOpenDoor));
    }

    #[test]
    fn impossible_missions() {
        let plan = Arc::new(default_plan());
        let q = Query::new("Find the piano", "bedroom", Some("piano".into()));
        assert!(matches!(
            OraclePilot::new(plan, SimConfig::default(), q),
            Err(PilotError::MissionImpossible(_))
        ));
    }
}
