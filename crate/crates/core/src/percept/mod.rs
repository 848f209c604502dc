//! What the drone perceives: rendered frames and a ground-truth semantic
//! summary of visible objects and doors.

mod raster;

pub use raster::{
    render_frontal, render_rear, RenderedImage, BACKGROUND, CEILING_COLOR, DOOR_COLOR, DOOR_HEIGHT, FLOOR_COLOR,
    WALL_COLOR,
};

use serde::{Deserialize, Serialize};

use crate::sim::DronePose;
use crate::world::{room_of, wrap_deg, FloorPlan, Vec2};

/// Half-width of the "center" band in normalized image coordinates.
pub const CENTER_BAND: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub horizontal_fov_deg: f64,
    pub width: u32,
    pub height: u32,
    /// Distance of the camera ahead of the drone center, meters.
    #[serde(default)]
    pub forward_offset: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            horizontal_fov_deg: 80.0,
            width: 640,
            height: 480,
            forward_offset: 0.0,
        }
    }
}

impl CameraModel {
    pub fn half_fov(&self) -> f64 {
        0.5 * self.horizontal_fov_deg
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        0.5 * self.width as f64 / self.half_fov().to_radians().tan()
    }

    /// Camera location in the ground plane.
    pub fn position(&self, pose: &DronePose) -> Vec2 {
        pose.ground().add(pose.heading().scale(self.forward_offset))
    }

    /// Normalized horizontal image coordinate of a bearing: -1 at the left
    /// image edge, +1 at the right.
    pub fn normalized(&self, bearing_deg: f64) -> f64 {
        bearing_deg.to_radians().tan() / self.half_fov().to_radians().tan()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoorPosition {
    Left,
    Center,
    Right,
    NotVisible,
}

impl DoorPosition {
    pub const ALL: [DoorPosition; 4] = [
        DoorPosition::Left,
        DoorPosition::Center,
        DoorPosition::Right,
        DoorPosition::NotVisible,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DoorPosition::Left => "left",
            DoorPosition::Center => "center",
            DoorPosition::Right => "right",
            DoorPosition::NotVisible => "not_visible",
        }
    }

    pub fn parse(s: &str) -> Option<DoorPosition> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-'))
            .flat_map(char::to_lowercase)
            .collect();
        match norm.as_str() {
            "left" => Some(DoorPosition::Left),
            "center" | "centre" => Some(DoorPosition::Center),
            "right" => Some(DoorPosition::Right),
            "notvisible" | "none" => Some(DoorPosition::NotVisible),
            _ => None,
        }
    }
}

/// Buckets a bearing (degrees, positive to the right) into left / center /
/// right, or not visible outside the horizontal field of view.
pub fn classify_door_position(bearing_deg: f64, camera: &CameraModel) -> DoorPosition {
    if !bearing_deg.is_finite() || bearing_deg.abs() > camera.half_fov() {
        DoorPosition::NotVisible
    } else if camera.normalized(bearing_deg).abs() <= CENTER_BAND {
        DoorPosition::Center
    } else if bearing_deg < 0.0 {
        DoorPosition::Left
    } else {
        DoorPosition::Right
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub id: String,
    pub label: String,
    /// Degrees, positive to the right of the optical axis.
    pub bearing_deg: f64,
    pub distance_m: f64,
    pub angular_width_deg: f64,
    pub occluded_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleDoor {
    pub id: String,
    pub rooms: [String; 2],
    pub bearing_deg: f64,
    pub distance_m: f64,
    pub angular_width_deg: f64,
    pub occluded_fraction: f64,
    pub position: DoorPosition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticObservation {
    pub current_room: String,
    pub visible_objects: Vec<VisibleObject>,
    pub visible_doors: Vec<VisibleDoor>,
}

impl SemanticObservation {
    pub fn object(&self, id: &str) -> Option<&VisibleObject> {
        self.visible_objects.iter().find(|o| o.id == id)
    }

    pub fn door(&self, id: &str) -> Option<&VisibleDoor> {
        self.visible_doors.iter().find(|d| d.id == id)
    }
}

/// Bearing of ground point `p` from a camera at `cam` facing `yaw`.
pub fn bearing_to(cam: Vec2, yaw: f64, p: Vec2) -> f64 {
    wrap_deg(yaw - p.sub(cam).angle_deg())
}

/// Apparent extent of an entity: the in-frame part of its angular span.
struct Extent {
    /// Full (unclipped) angular width.
    width: f64,
    /// Center of the in-frame part, expressed as a bearing.
    bearing: f64,
}

fn extent(cam: Vec2, yaw: f64, reference: Vec2, points: &[Vec2], camera: &CameraModel) -> Option<Extent> {
    let center = bearing_to(cam, yaw, reference);
    let rel = points
        .iter()
        .map(|&p| wrap_deg(bearing_to(cam, yaw, p) - center));
    let lo = center + rel.clone().fold(f64::INFINITY, f64::min);
    let hi = center + rel.fold(f64::NEG_INFINITY, f64::max);
    let h = camera.half_fov();
    for shift in [0.0, -360.0, 360.0] {
        let a = (lo + shift).max(-h);
        let b = (hi + shift).min(h);
        if a <= b {
            let t = 0.5 * (a.to_radians().tan() + b.to_radians().tan());
            return Some(Extent {
                width: hi - lo,
                bearing: t.atan().to_degrees(),
            });
        }
    }
    None
}

fn ray_blocked(plan: &FloorPlan, eye_y: f64, cam: Vec2, p: Vec2, skip: &str) -> bool {
    plan.solids()
        .filter(|s| s.id() != skip && s.height(plan.ceiling_height) > eye_y)
        .any(|s| s.blocks_segment(cam, p))
}

/// Fraction of `samples` whose sight line from the camera is blocked; the
/// first sample is the reference point.
fn occlusion(plan: &FloorPlan, eye_y: f64, cam: Vec2, samples: &[Vec2], skip: &str) -> (bool, f64) {
    let blocked: Vec<bool> = samples
        .iter()
        .map(|&p| ray_blocked(plan, eye_y, cam, p, skip))
        .collect();
    let frac = blocked.iter().filter(|&&b| b).count() as f64 / samples.len() as f64;
    (blocked[0], frac)
}

pub fn semantic_observe(plan: &FloorPlan, pose: &DronePose, camera: &CameraModel) -> SemanticObservation {
    let cam = camera.position(pose);
    let eye_y = pose.y;
    let mut visible_objects = Vec::new();
    for o in &plan.objects {
        if o.footprint.contains_closed(cam) {
            continue;
        }
        let corners = o.footprint.corners();
        let Some(ext) = extent(cam, pose.yaw, o.position, &corners, camera) else {
            continue;
        };
        let samples = [o.position, corners[0], corners[1], corners[2], corners[3]];
        let (center_blocked, frac) = occlusion(plan, eye_y, cam, &samples, &o.id);
        if center_blocked {
            continue;
        }
        visible_objects.push(VisibleObject {
            id: o.id.clone(),
            label: o.label.clone(),
            bearing_deg: ext.bearing,
            distance_m: cam.distance(o.position),
            angular_width_deg: ext.width,
            occluded_fraction: frac,
        });
    }
    let mut visible_doors = Vec::new();
    for d in &plan.doors {
        let seg = d.opening;
        if seg.distance(cam) < 1e-6 {
            continue;
        }
        let mid = seg.midpoint();
        let Some(ext) = extent(cam, pose.yaw, mid, &[seg.from, seg.to], camera) else {
            continue;
        };
        let samples = [
            mid,
            seg.point_at(0.05),
            seg.point_at(0.95),
            seg.point_at(0.25),
            seg.point_at(0.75),
        ];
        let (center_blocked, frac) = occlusion(plan, eye_y, cam, &samples, &d.id);
        if center_blocked {
            continue;
        }
        visible_doors.push(VisibleDoor {
            id: d.id.clone(),
            rooms: d.rooms.clone(),
            bearing_deg: ext.bearing,
            distance_m: cam.distance(mid),
            angular_width_deg: ext.width,
            occluded_fraction: frac,
            position: classify_door_position(ext.bearing, camera),
        });
    }
    visible_objects.sort_by(|a, b| a.id.cmp(&b.id));
    visible_doors.sort_by(|a, b| a.id.cmp(&b.id));
    SemanticObservation {
        current_room: room_of(plan, pose.x, pose.z).to_string(),
        visible_objects,
        visible_doors,
    }
}
