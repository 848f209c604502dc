#![allow(dead_code)]

use indoor_pilot::fsm::FsmState;
use indoor_pilot::percept::DoorPosition;
use indoor_pilot::pilot::{serialize, Decision, DecisionContext, Pilot, PilotError, PilotResponse};
use indoor_pilot::sim::{collision_at, DroneBody, DronePose, MotionCommand};
use indoor_pilot::world::{FloorPlan, Vec2};
use rand::Rng;

/// Flies straight ahead every step, through states that allow A1.
pub struct ForwardPilot;

impl Pilot for ForwardPilot {
    fn label(&self) -> String {
        "forward".into()
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision, PilotError> {
        let response = PilotResponse {
            room: ctx.observation.semantic.current_room.clone(),
            movement: MotionCommand::A1,
            state: FsmState::SearchOpenDoor,
            description: "forward".into(),
            door_position: DoorPosition::NotVisible,
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

/// Distance the disc can slide along `dir` from `p` before touching a solid,
/// found by marching in `res` increments. `None` beyond `limit`.
pub fn march_to_contact(plan: &FloorPlan, body: &DroneBody, p: Vec2, dir: Vec2, y: f64, res: f64, limit: f64) -> Option<f64> {
    let mut d = 0.0;
    while d <= limit {
        if collision_at(plan, body, p.add(dir.scale(d)), y).is_some() {
            return Some(d);
        }
        d += res;
    }
    None
}

/// Uniform collision-free pose inside the plan bounds at flight altitude.
pub fn free_pose<R: Rng>(rng: &mut R, plan: &FloorPlan, body: &DroneBody, margin: f64) -> DronePose {
    let b = plan.bounds();
    loop {
        let pose = DronePose::new(
            rng.random_range(b.min.x..b.max.x),
            1.0,
            rng.random_range(b.min.z..b.max.z),
            rng.random_range(0.0..360.0),
        );
        let grown = DroneBody {
            bounding_radius: body.bounding_radius + margin,
            ..*body
        };
        if collision_at(plan, &grown, pose.ground(), pose.y).is_none() {
            return pose;
        }
    }
}

/// Two-pilot report with hand-picked outcomes covering every cell kind.
pub fn synthetic_report() -> indoor_pilot::harness::BenchmarkReport {
    use indoor_pilot::harness::{BenchmarkReport, Outcome::*};
    let mut r = BenchmarkReport::new("gpt-4.1");
    let mut g = BenchmarkReport::new("gemini-2.5-flash");
    let rows = [
        ("Living Room and Kitchen", "Go to the bathroom", [Success, Success, Collision, Collision, Collision], [Success, Success, Success, MaxStepsExceeded, MaxStepsExceeded]),
        ("Living Room and Kitchen", "Go to the bedroom", [Success; 5], [Success, Success, Success, Success, FalseSuccess]),
        ("Bedroom", "Go to the bedroom", [Success; 5], [Success; 5]),
        ("Bedroom", "Find the mirror in the bedroom", [Success, FalseSuccess, FalseSuccess, ProtocolError, Collision], [Collision; 5]),
        ("Bathroom", "Go to the living room/kitchen", [MaxStepsExceeded; 5], [Success, MaxStepsExceeded, Collision, Success, ProtocolError]),
    ];
    for (room, query, a, b) in rows {
        let i = r.add_row(room, query);
        let j = g.add_row(room, query);
        for o in a {
            r.record(i, 0, o);
        }
        for o in b {
            g.record(j, 0, o);
        }
    }
    r.merge(&g).expect("same rows");
    r
}
