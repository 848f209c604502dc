mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use indoor_pilot::sim::{
    apply_motion, clearance, observe, DroneBody, DronePose, Motion, MotionCommand, RotationConvention, SimConfig,
    SimSession, Simulator, SUB_STEP,
};
use indoor_pilot::world::{default_plan, normalize_yaw, wrap_deg, Vec2};

fn table_magnitude(cmd: MotionCommand) -> f64 {
    use MotionCommand::*;
    match cmd {
        A1 | D1 | D2 => 0.10,
        A2 => 0.25,
        A3 => 0.50,
        B1 | C1 => 15.0,
        B2 | C2 => 45.0,
        B3 | C3 => 90.0,
        E => 0.0,
    }
}

#[test]
fn a2_in_open_space() {
    let plan = default_plan();
    let r = apply_motion(
        &plan,
        &DroneBody::default(),
        &DronePose::new(1.0, 1.0, 2.5, 0.0),
        MotionCommand::A2,
        RotationConvention::BRight,
    )
    .unwrap();
    assert!(!r.collided);
    assert!((r.pose.x - 1.25).abs() < 1e-12);
    assert_eq!((r.pose.y, r.pose.z, r.pose.yaw), (1.0, 2.5, 0.0));
}

#[test]
fn motion_magnitudes_in_open_space() {
    let plan = default_plan();
    let body = DroneBody::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for conv in [RotationConvention::BRight, RotationConvention::BLeft] {
        for _ in 0..5_000 {
            let pose = common::free_pose(&mut rng, &plan, &body, 0.55);
            let cmd = MotionCommand::ALL[rng.random_range(0..MotionCommand::ALL.len())];
            let r = apply_motion(&plan, &body, &pose, cmd, conv).unwrap();
            assert!(!r.collided);
            let moved = r.pose.ground().sub(pose.ground());
            match cmd.motion() {
                Motion::Hover => assert_eq!(r.pose, pose),
                Motion::RotateLeft(_) | Motion::RotateRight(_) => {
                    assert_eq!(r.pose.ground(), pose.ground());
                    let turned = wrap_deg(r.pose.yaw - pose.yaw);
                    assert!((turned.abs() - table_magnitude(cmd)).abs() < 1e-9, "{cmd}: {turned}");
                    let is_b = cmd.code().starts_with('B');
                    let decreases = is_b == (conv == RotationConvention::BRight);
                    assert_eq!(turned < 0.0, decreases, "{cmd} under {conv:?}");
                }
                Motion::Forward(_) => {
                    assert!((moved.norm() - table_magnitude(cmd)).abs() < 1e-9);
                    assert!(moved.dot(pose.heading()) > 0.0);
                    assert!(moved.cross(pose.heading()).abs() < 1e-9);
                }
                Motion::Lateral(_) => {
                    assert!((moved.norm() - table_magnitude(cmd)).abs() < 1e-9);
                    let left = pose.left();
                    let sign = if cmd == MotionCommand::D1 { 1.0 } else { -1.0 };
                    assert!((moved.dot(left) - sign * 0.10).abs() < 1e-9);
                }
            }
            assert_eq!(r.pose.y, pose.y);
        }
    }
}

#[test]
fn a3_into_wall_stops_at_contact() {
    let plan = default_plan();
    let body = DroneBody::default();
    // East wall of the bathroom; find its inner face by marching.
    let start = DronePose::new(11.0, 1.0, 1.0, 0.0);
    let gap = common::march_to_contact(&plan, &body, start.ground(), start.heading(), 1.0, 1e-4, 3.0).unwrap();
    let pose = start.with_ground(start.ground().add(Vec2::new(gap - 0.15, 0.0)));
    let r = apply_motion(&plan, &body, &pose, MotionCommand::A3, RotationConvention::BRight).unwrap();
    assert!(r.collided);
    assert!((r.traveled - 0.15).abs() <= SUB_STEP + 1e-4, "traveled {}", r.traveled);
    let (gap_after, _) = clearance(&plan, &body, &r.pose);
    assert!((0.0..=SUB_STEP + 1e-9).contains(&gap_after), "gap {gap_after}");
}

#[test]
fn observation_reports_exact_yaw() {
    let plan = default_plan();
    let config = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let pose = common::free_pose(&mut rng, &plan, &config.body, 0.0);
        let obs = observe(&plan, &config, &pose, 0, None, false).unwrap();
        assert_eq!(obs.pose.yaw.to_bits(), pose.yaw.to_bits());
    }
}

#[test]
fn forward_pilot_hits_walls_within_geometric_bound() {
    use indoor_pilot::harness::{run_episode_with, EpisodeConfig, Outcome, Query};
    use indoor_pilot::pilot::PilotConfig;

    let plan = Arc::new(default_plan());
    let config = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ran = 0;
    while ran < 50 {
        let pose = common::free_pose(&mut rng, &plan, &config.body, 0.0);
        let Some(d) = common::march_to_contact(&plan, &config.body, pose.ground(), pose.heading(), 1.0, 1e-3, 4.5) else {
            continue;
        };
        let cfg = EpisodeConfig::new(plan.clone(), pose, Query::new("Go to the bedroom", "bedroom", None), PilotConfig::oracle());
        let mut sim = Simulator::new(plan.clone(), config);
        let r = run_episode_with(&cfg, &mut sim, &mut common::ForwardPilot).unwrap();
        assert_eq!(r.outcome, Outcome::Collision);
        assert!(r.steps_used <= ((d + 1e-3) / 0.10).ceil() as usize, "{} steps for {d} m", r.steps_used);
        ran += 1;
    }
}

proptest! {
    #[test]
    fn rotation_sequences_accumulate(
        start in 0.0f64..360.0,
        seq in prop::collection::vec(0usize..6, 0..40),
        left in any::<bool>(),
    ) {
        let conv = if left { RotationConvention::BLeft } else { RotationConvention::BRight };
        let plan = Arc::new(default_plan());
        let mut sim = Simulator::new(plan, SimConfig { rotation_convention: conv, ..SimConfig::default() });
        let spawn = DronePose::new(3.0, 1.0, 1.5, start);
        sim.reset(spawn).unwrap();
        let mut acc = 0.0_f64;
        let mut pose = spawn;
        for i in seq {
            let cmd = MotionCommand::ROTATIONS[i];
            let sign = match (cmd.code().starts_with('B'), left) {
                (true, false) | (false, true) => -1.0,
                _ => 1.0,
            };
            acc += sign * table_magnitude(cmd);
            pose = sim.step(cmd).unwrap().pose;
        }
        let expected = (start + acc).rem_euclid(360.0);
        prop_assert!(wrap_deg(pose.yaw - expected).abs() < 1e-9);
        prop_assert_eq!(pose.ground(), spawn.ground());
        prop_assert!((0.0..360.0).contains(&pose.yaw));
        prop_assert_eq!(normalize_yaw(pose.yaw), pose.yaw);
    }
}
