//! Floor plans: rooms, walls, doors, furniture and target objects.
//!
//! A plan is a TOML document. All geometry lives in the X–Z ground plane
//! with +Y up; lengths are meters.

pub mod geometry;
mod topology;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geometry::{normalize_yaw, wrap_deg, Rect, Segment, Vec2, WallSegment};
pub use topology::{room_path, topological_map_of, TopologicalMap};

/// Room id returned by [`room_of`] for points outside every footprint.
pub const UNKNOWN_ROOM: &str = "unknown";

const DEFAULT_PLAN_TOML: &str = include_str!("../../assets/default_plan.toml");

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("cannot read floor plan {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("floor plan parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("floor plan violates `{rule}`: {detail}")]
    Invariant { rule: &'static str, detail: String },
    #[error("no path from `{from}` to `{to}`")]
    NoPath { from: String, to: String },
    #[error("unknown room `{0}`")]
    UnknownRoom(String),
}

/// An 8-bit RGB color written as `#rrggbb` in plan files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Color(pub [u8; 3]);

impl TryFrom<String> for Color {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        let hex = s
            .strip_prefix('#')
            .ok_or_else(|| format!("color `{s}` must look like #rrggbb"))?;
        if hex.len() != 6 {
            return Err(format!("color `{s}` must look like #rrggbb"));
        }
        let mut out = [0u8; 3];
        for (i, c) in out.iter_mut().enumerate() {
            *c = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|_| format!("color `{s}` is not hexadecimal"))?;
        }
        Ok(Color(out))
    }
}

impl From<Color> for String {
    fn from(c: Color) -> String {
        c.to_string()
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.0[0], self.0[1], self.0[2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: String,
    pub label: String,
    /// Extra names a query may use for this room.
    #[serde(default)]
    pub aliases: Vec<String>,
    pub footprint: Rect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Door {
    pub id: String,
    pub rooms: [String; 2],
    pub opening: Segment,
    pub width: f64,
}

impl Door {
    pub fn connects(&self, a: &str, b: &str) -> bool {
        (self.rooms[0] == a && self.rooms[1] == b) || (self.rooms[0] == b && self.rooms[1] == a)
    }

    pub fn other_room(&self, room: &str) -> Option<&str> {
        if self.rooms[0] == room {
            Some(&self.rooms[1])
        } else if self.rooms[1] == room {
            Some(&self.rooms[0])
        } else {
            None
        }
    }
}

/// Furniture: a solid box standing on the floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    pub footprint: Rect,
    pub height: f64,
    pub color: Color,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetObject {
    pub id: String,
    pub label: String,
    pub position: Vec2,
    pub footprint: Rect,
    pub height: f64,
    pub room: String,
    pub color: Color,
}

/// Anything solid the drone can hit: a wall slab or a box.
#[derive(Clone, Copy, Debug)]
pub enum Solid<'a> {
    Wall(&'a WallSegment),
    Furniture(&'a Obstacle),
    Target(&'a TargetObject),
}

impl Solid<'_> {
    pub fn id(&self) -> &str {
        match self {
            Solid::Wall(w) => &w.id,
            Solid::Furniture(o) => &o.id,
            Solid::Target(t) => &t.id,
        }
    }

    /// Top of the solid; walls run floor to ceiling.
    pub fn height(&self, ceiling: f64) -> f64 {
        match self {
            Solid::Wall(_) => ceiling,
            Solid::Furniture(o) => o.height,
            Solid::Target(t) => t.height,
        }
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        match self {
            Solid::Wall(w) => w.closest_point(p),
            Solid::Furniture(o) => o.footprint.closest_point(p),
            Solid::Target(t) => t.footprint.closest_point(p),
        }
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        self.closest_point(p).distance(p)
    }

    pub fn blocks_segment(&self, a: Vec2, b: Vec2) -> bool {
        match self {
            Solid::Wall(w) => w.blocks_segment(a, b),
            Solid::Furniture(o) => o.footprint.blocks_segment(a, b),
            Solid::Target(t) => t.footprint.blocks_segment(a, b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorPlan {
    pub name: String,
    pub ceiling_height: f64,
    pub rooms: Vec<Room>,
    #[serde(default)]
    pub walls: Vec<WallSegment>,
    #[serde(default)]
    pub doors: Vec<Door>,
    #[serde(default)]
    pub furniture: Vec<Obstacle>,
    #[serde(default)]
    pub objects: Vec<TargetObject>,
}

impl FloorPlan {
    /// Parses and validates a plan from TOML text. `origin` names the source
    /// in error messages.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<FloorPlan, WorldError> {
        let plan: FloorPlan = toml::from_str(text).map_err(|e| WorldError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("floor plans always serialize")
    }

    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn door(&self, id: &str) -> Option<&Door> {
        self.doors.iter().find(|d| d.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&TargetObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Every solid in a fixed order: walls, furniture, then targets.
    pub fn solids(&self) -> impl Iterator<Item = Solid<'_>> {
        self.walls
            .iter()
            .map(Solid::Wall)
            .chain(self.furniture.iter().map(Solid::Furniture))
            .chain(self.objects.iter().map(Solid::Target))
    }

    /// Bounding rectangle of all rooms and walls.
    pub fn bounds(&self) -> Rect {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let pts = self
            .rooms
            .iter()
            .flat_map(|r| [r.footprint.min, r.footprint.max])
            .chain(self.walls.iter().flat_map(|w| w.corners()));
        for p in pts {
            min = Vec2::new(min.x.min(p.x), min.z.min(p.z));
            max = Vec2::new(max.x.max(p.x), max.z.max(p.z));
        }
        Rect::new(min, max)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        fn fail(rule: &'static str, detail: String) -> Result<(), WorldError> {
            Err(WorldError::Invariant { rule, detail })
        }
        if !(self.ceiling_height > 0.0) {
            return fail(
                "ceiling height is positive",
                format!("ceiling_height = {}", self.ceiling_height),
            );
        }
        let mut ids = BTreeSet::new();
        let all_ids = self
            .rooms
            .iter()
            .map(|r| &r.id)
            .chain(self.walls.iter().map(|w| &w.id))
            .chain(self.doors.iter().map(|d| &d.id))
            .chain(self.furniture.iter().map(|f| &f.id))
            .chain(self.objects.iter().map(|o| &o.id));
        for id in all_ids {
            if id == UNKNOWN_ROOM {
                return fail("ids are not reserved", format!("`{id}` is reserved"));
            }
            if !ids.insert(id.as_str()) {
                return fail("ids are unique", format!("duplicate id `{id}`"));
            }
        }
        for r in &self.rooms {
            if !(r.footprint.width() > 0.0 && r.footprint.depth() > 0.0) {
                return fail(
                    "room footprint has positive width and depth",
                    format!("room `{}`", r.id),
                );
            }
        }
        for (i, a) in self.rooms.iter().enumerate() {
            for b in &self.rooms[i + 1..] {
                if a.footprint.interiors_overlap(&b.footprint) {
                    return fail(
                        "room footprints do not overlap",
                        format!("`{}` overlaps `{}`", a.id, b.id),
                    );
                }
            }
        }
        for w in &self.walls {
            if !(w.thickness > 0.0) || w.segment().length() == 0.0 {
                return fail(
                    "walls have positive length and thickness",
                    format!("wall `{}`", w.id),
                );
            }
        }
        for d in &self.doors {
            for r in &d.rooms {
                if self.room(r).is_none() {
                    return fail(
                        "door references existing rooms",
                        format!("door `{}` references unknown room `{r}`", d.id),
                    );
                }
            }
            if d.rooms[0] == d.rooms[1] {
                return fail(
                    "door joins two distinct rooms",
                    format!("door `{}` joins `{}` to itself", d.id, d.rooms[0]),
                );
            }
            if !(d.width > 0.0) || (d.width - d.opening.length()).abs() > 1e-6 {
                return fail(
                    "door width equals opening length and is positive",
                    format!(
                        "door `{}`: width {} vs opening length {}",
                        d.id,
                        d.width,
                        d.opening.length()
                    ),
                );
            }
            for w in &self.walls {
                if w.segment().interior_overlap(&d.opening) > 0.0 {
                    return fail(
                        "door opening is a gap in the walls",
                        format!("wall `{}` crosses door `{}`", w.id, d.id),
                    );
                }
            }
        }
        for f in &self.furniture {
            if !(f.height > 0.0 && f.footprint.width() > 0.0 && f.footprint.depth() > 0.0) {
                return fail(
                    "furniture boxes have positive size",
                    format!("furniture `{}`", f.id),
                );
            }
        }
        for o in &self.objects {
            if self.room(&o.room).is_none() {
                return fail(
                    "object room exists",
                    format!("object `{}` names unknown room `{}`", o.id, o.room),
                );
            }
            let containing: Vec<&str> = self
                .rooms
                .iter()
                .filter(|r| r.footprint.contains(o.position))
                .map(|r| r.id.as_str())
                .collect();
            if containing != [o.room.as_str()] {
                return fail(
                    "object lies inside exactly its own room",
                    format!(
                        "object `{}` at ({}, {}) is inside {:?}, declared `{}`",
                        o.id, o.position.x, o.position.z, containing, o.room
                    ),
                );
            }
            if !(o.height > 0.0 && o.footprint.width() > 0.0 && o.footprint.depth() > 0.0) {
                return fail(
                    "object boxes have positive size",
                    format!("object `{}`", o.id),
                );
            }
        }
        Ok(())
    }
}

/// Reads a plan file.
pub fn load_floor_plan(path: impl AsRef<Path>) -> Result<FloorPlan, WorldError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
        path: path.display().to_string(),
        source,
    })?;
    FloorPlan::from_toml_str(&text, &path.display().to_string())
}

/// The bundled three-room plan (living room/kitchen, bedroom, bathroom).
pub fn default_plan() -> FloorPlan {
    FloorPlan::from_toml_str(DEFAULT_PLAN_TOML, "default_plan.toml")
        .expect("bundled plan is valid")
}

pub fn default_plan_toml() -> &'static str {
    DEFAULT_PLAN_TOML
}

/// The room whose footprint contains `(x, z)`, or [`UNKNOWN_ROOM`].
pub fn room_of(plan: &FloorPlan, x: f64, z: f64) -> &str {
    let p = Vec2::new(x, z);
    plan.rooms
        .iter()
        .find(|r| r.footprint.contains(p))
        .map(|r| r.id.as_str())
        .unwrap_or(UNKNOWN_ROOM)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_shape() {
        let plan = default_plan();
        assert_eq!(plan.rooms.len(), 3);
        assert_eq!(plan.doors.len(), 2);
        assert_eq!(plan.objects.len(), 3);
        let rooms: Vec<_> = plan.objects.iter().map(|o| (o.label.as_str(), o.room.as_str())).collect();
        assert!(rooms.contains(&("refrigerator", "living_kitchen")));
        assert!(rooms.contains(&("mirror", "bedroom")));
        assert!(rooms.contains(&("sink", "bathroom")));
    }

    #[test]
    fn room_centers() {
        let plan = default_plan();
        assert_eq!(room_of(&plan, 3.0, 2.5), "living_kitchen");
        assert_eq!(room_of(&plan, 8.0, 2.5), "bedroom");
        assert_eq!(room_of(&plan, 10.5, 2.5), "bathroom");
        assert_eq!(room_of(&plan, -1.0, 2.5), UNKNOWN_ROOM);
        // shared edges belong to the room on the +x side
        assert_eq!(room_of(&plan, 6.0, 2.5), "bedroom");
    }

    #[test]
    fn unknown_door_room_is_rejected() {
        let text = default_plan_toml().replacen("rooms = [\"living_kitchen\", \"bedroom\"]", "rooms = [\"living_kitchen\", \"garage\"]", 1);
        match FloorPlan::from_toml_str(&text, "t") {
            Err(WorldError::Invariant { rule, detail }) => {
                assert_eq!(rule, "door references existing rooms");
                assert!(detail.contains("garage"));
            }
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = FloorPlan::from_toml_str("name = \"x\"\nceiling_height = \"high\"\nrooms = []\n", "bad.toml")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.toml"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("ceiling_height"), "{msg}");
    }

    #[test]
    fn wall_through_door_is_rejected() {
        let mut plan = default_plan();
        plan.walls.push(WallSegment {
            id: "blocker".into(),
            from: Vec2::new(6.0, 1.0),
            to: Vec2::new(6.0, 4.0),
            thickness: 0.1,
        });
        let err = plan.validate().unwrap_err();
        assert!(err.to_string().contains("gap"), "{err}");
    }

    #[test]
    fn door_width_must_match_opening() {
        let mut plan = default_plan();
        plan.doors[0].width = 1.2;
        assert!(matches!(
            plan.validate(),
            Err(WorldError::Invariant { rule: "door width equals opening length and is positive", .. })
        ));
    }

    #[test]
    fn overlapping_rooms_rejected() {
        let mut plan = default_plan();
        plan.rooms[1].footprint.min.x = 5.0;
        assert!(matches!(
            plan.validate(),
            Err(WorldError::Invariant { rule: "room footprints do not overlap", .. })
        ));
    }

    #[test]
    fn object_outside_its_room_rejected() {
        let mut plan = default_plan();
        plan.objects[0].room = "bathroom".into();
        assert!(plan.validate().is_err());
    }

    #[test]
    fn doorless_plan_loads() {
        let mut plan = default_plan();
        plan.doors.clear();
        plan.validate().unwrap();
        assert!(topological_map_of(&plan).edges.is_empty());
    }

    #[test]
    fn toml_round_trip() {
        let plan = default_plan();
        let again = FloorPlan::from_toml_str(&plan.to_toml_string(), "rt").unwrap();
        assert_eq!(plan, again);
    }

    #[test]
    fn color_parsing() {
        assert_eq!(Color::try_from("#ff8000".to_string()).unwrap(), Color([255, 128, 0]));
        assert!(Color::try_from("ff8000".to_string()).is_err());
        assert!(Color::try_from("#gg0000".to_string()).is_err());
        assert_eq!(Color([1, 2, 3]).to_string(), "#010203");
    }
}
