use std::fmt::Write;

use super::{EpisodeResult, Outcome};
use crate::fsm::FsmState;
use crate::world::{Color, FloorPlan, Vec2};

const PX_PER_M: f64 = 60.0;
const MARGIN: f64 = 20.0;
const TICK_M: f64 = 0.15;

fn state_color(s: FsmState) -> &'static str {
    match s {
        FsmState::RecognizeRoom => "#1f77b4",
        FsmState::SearchOpenDoor => "#ff7f0e",
        FsmState::OrientTowardsDoor => "#9467bd",
        FsmState::GoThroughDoor => "#2ca02c",
        FsmState::SearchObject => "#17becf",
        FsmState::ReachObject => "#8c564b",
        FsmState::StayOnRoom => "#bcbd22",
        FsmState::DescribeObject => "#e377c2",
        _ => "#7f7f7f",
    }
}

fn hex(c: Color) -> String {
    format!("#{:02x}{:02x}{:02x}", c.0[0], c.0[1], c.0[2])
}

struct Frame {
    min_x: f64,
    max_z: f64,
}

impl Frame {
    fn map(&self, p: Vec2) -> (f64, f64) {
        (MARGIN + (p.x - self.min_x) * PX_PER_M, MARGIN + (self.max_z - p.z) * PX_PER_M)
    }
}

fn polygon(out: &mut String, f: &Frame, pts: &[Vec2], fill: &str, extra: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = f.map(*p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(out, r#"<polygon points="{}" fill="{fill}" {extra}/>"#, coords.join(" "));
}

/// Top-down SVG of the plan with the episode's path. Segments are colored
/// by the state that issued the move; each pose gets a heading tick.
pub fn emit_trajectory_plot(result: &EpisodeResult, plan: &FloorPlan) -> String {
    let b = plan.bounds();
    let f = Frame { min_x: b.min.x, max_z: b.max.z };
    let w = (b.max.x - b.min.x) * PX_PER_M + 2.0 * MARGIN;
    let h = (b.max.z - b.min.z) * PX_PER_M + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(
        out,
        "<title>{} | {} | {:?} in {} steps</title>",
        escape(&result.pilot),
        escape(&result.query.text),
        result.outcome,
        result.steps_used
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    for room in &plan.rooms {
        polygon(&mut out, &f, &room.footprint.corners(), "none", r##"stroke="#999999" stroke-dasharray="4 3""##);
        let (x, y) = f.map(Vec2::new(room.footprint.min.x + 0.1, room.footprint.max.z - 0.25));
        let _ = writeln!(out, r##"<text x="{x:.2}" y="{y:.2}" font-size="11" fill="#555555">{}</text>"##, escape(&room.label));
    }
    for o in &plan.furniture {
        polygon(&mut out, &f, &o.footprint.corners(), &hex(o.color), r#"fill-opacity="0.5""#);
    }
    for o in &plan.objects {
        polygon(&mut out, &f, &o.footprint.corners(), &hex(o.color), r##"stroke="#000000""##);
        let (x, y) = f.map(o.position);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#, y - 12.0, escape(&o.label));
    }
    for wall in &plan.walls {
        polygon(&mut out, &f, &wall.corners(), "#444444", "");
    }
    for d in &plan.doors {
        let (x1, y1) = f.map(d.opening.from);
        let (x2, y2) = f.map(d.opening.to);
        let _ = writeln!(out, r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#00b400" stroke-width="4"/>"##);
    }

    let mut prev = result.spawn;
    for p in &result.trajectory {
        let (x1, y1) = f.map(prev.ground());
        let (x2, y2) = f.map(p.pose.ground());
        let color = state_color(p.state);
        if (x1 - x2).abs() > 1e-6 || (y1 - y2).abs() > 1e-6 {
            let _ = writeln!(out, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{color}" stroke-width="2"/>"#);
        }
        let (tx, ty) = f.map(p.pose.ground().add(p.pose.heading().scale(TICK_M)));
        let _ = writeln!(out, r#"<line x1="{x2:.2}" y1="{y2:.2}" x2="{tx:.2}" y2="{ty:.2}" stroke="{color}" stroke-width="1"/>"#);
        prev = p.pose;
    }

    let (sx, sy) = f.map(result.spawn.ground());
    let _ = writeln!(out, r##"<circle cx="{sx:.2}" cy="{sy:.2}" r="5" fill="none" stroke="#000000" stroke-width="2"/>"##);
    let (ex, ey) = f.map(result.final_pose.ground());
    let marker = match result.outcome {
        Outcome::Success => format!(r##"<circle cx="{ex:.2}" cy="{ey:.2}" r="6" fill="#2ca02c"/>"##),
        Outcome::FalseSuccess => format!(r##"<circle cx="{ex:.2}" cy="{ey:.2}" r="6" fill="#ff7f0e"/>"##),
        Outcome::Collision => format!(
            r##"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="#d62728" stroke-width="3"/>"##,
            ex - 6.0, ey - 6.0, ex + 6.0, ey + 6.0, ex - 6.0, ey + 6.0, ex + 6.0, ey - 6.0
        ),
        Outcome::MaxStepsExceeded => format!(r##"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="#7f7f7f"/>"##, ex - 5.0, ey - 5.0),
        Outcome::ProtocolError => format!(r##"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="#9467bd"/>"##, ex - 5.0, ey - 5.0),
    };
    out.push_str(&marker);
    out.push('\n');
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_episode, EpisodeConfig, Query};
    use crate::pilot::PilotConfig;
    use crate::sim::DronePose;
    use crate::world::default_plan;
    use std::sync::Arc;

    #[test]
    fn plot_is_deterministic_svg() {
        let plan = Arc::new(default_plan());
        let q = Query::infer(&plan, "Find the sink in the bathroom").unwrap();
        let cfg = EpisodeConfig::new(plan.clone(), DronePose::new(10.0, 1.0, 2.5, 180.0), q, PilotConfig::oracle());
        let r = run_episode(&cfg).unwrap();
        let a = emit_trajectory_plot(&r, &plan);
        let b = emit_trajectory_plot(&r, &plan);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert!(a.contains("Bathroom") || a.contains("bathroom"));
        assert_eq!(a.matches("<line").count() >= r.trajectory.len(), true);
    }
}
