//! Planar geometry in the X–Z ground plane.
//!
//! Everything here works in meters. The second coordinate is called `z` to
//! match the world axes (+Y is up and never appears in footprint math).

use serde::{Deserialize, Serialize};

/// Distances at or below this are treated as contact.
pub const CONTACT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2 { x: v[0], z: v[1] }
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.z]
    }
}

impl Vec2 {
    pub const fn new(x: f64, z: f64) -> Self {
        Vec2 { x, z }
    }

    /// Unit vector at `deg` degrees counterclockwise from +X (viewed from above).
    pub fn from_heading_deg(deg: f64) -> Self {
        let r = deg.to_radians();
        Vec2::new(r.cos(), r.sin())
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.z + o.z)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.z - o.z)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.z * s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.z * o.z
    }

    /// 2D cross product (z-component of the 3D cross).
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.z - self.z * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        self.sub(o).norm()
    }

    /// Rotated 90 degrees counterclockwise.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.z, self.x)
    }

    /// Heading angle in degrees, counterclockwise from +X, in (-180, 180].
    pub fn angle_deg(self) -> f64 {
        self.z.atan2(self.x).to_degrees()
    }
}

/// Wraps an angle in degrees into (-180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let mut w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w <= -180.0 {
        w += 360.0;
    }
    w
}

/// Normalizes an angle in degrees into [0, 360).
pub fn normalize_yaw(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Axis-aligned rectangle in the ground plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Rect { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn depth(&self) -> f64 {
        self.max.z - self.min.z
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.z + self.max.z),
        )
    }

    /// Half-open containment: `[min, max)` on both axes, so rooms sharing an
    /// edge never both claim a point.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x < self.max.x && p.z >= self.min.z && p.z < self.max.z
    }

    /// Closed containment, used for footprints of solid boxes.
    pub fn contains_closed(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.z >= self.min.z && p.z <= self.max.z
    }

    pub fn interiors_overlap(&self, o: &Rect) -> bool {
        let dx = self.max.x.min(o.max.x) - self.min.x.max(o.min.x);
        let dz = self.max.z.min(o.max.z) - self.min.z.max(o.min.z);
        dx > 1e-12 && dz > 1e-12
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            self.min,
            Vec2::new(self.max.x, self.min.z),
            self.max,
            Vec2::new(self.min.x, self.max.z),
        ]
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.min.x, self.max.x),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        self.closest_point(p).distance(p)
    }

    /// Whether the segment `a→b` passes through the open interior.
    pub fn blocks_segment(&self, a: Vec2, b: Vec2) -> bool {
        slab_interval(
            a,
            b.sub(a),
            [(self.min.x, self.max.x), (self.min.z, self.max.z)],
            [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            Vec2::new(0.0, 0.0),
        )
    }
}

/// A straight segment between two points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: Vec2,
    pub to: Vec2,
}

impl Segment {
    pub fn new(from: Vec2, to: Vec2) -> Self {
        Segment { from, to }
    }

    pub fn length(&self) -> f64 {
        self.from.distance(self.to)
    }

    pub fn midpoint(&self) -> Vec2 {
        self.from.add(self.to).scale(0.5)
    }

    pub fn point_at(&self, t: f64) -> Vec2 {
        self.from.add(self.to.sub(self.from).scale(t))
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let d = self.to.sub(self.from);
        let len2 = d.dot(d);
        if len2 == 0.0 {
            return self.from;
        }
        let t = (p.sub(self.from).dot(d) / len2).clamp(0.0, 1.0);
        self.point_at(t)
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        self.closest_point(p).distance(p)
    }

    /// Length of the portion of `self` that overlaps `other`, where the two
    /// either cross at an interior point or lie on a common line. Touching at
    /// an endpoint counts as zero.
    pub fn interior_overlap(&self, other: &Segment) -> f64 {
        let d1 = self.to.sub(self.from);
        let d2 = other.to.sub(other.from);
        let denom = d1.cross(d2);
        let len1 = d1.norm();
        let len2 = d2.norm();
        if len1 == 0.0 || len2 == 0.0 {
            return 0.0;
        }
        let w = other.from.sub(self.from);
        if denom.abs() <= 1e-12 * len1 * len2 {
            // parallel: overlap only when collinear
            if w.cross(d1).abs() > 1e-9 * len1 {
                return 0.0;
            }
            let u = d1.scale(1.0 / len1);
            let a0 = 0.0_f64;
            let a1 = len1;
            let b0 = w.dot(u);
            let b1 = other.to.sub(self.from).dot(u);
            let (b0, b1) = if b0 <= b1 { (b0, b1) } else { (b1, b0) };
            return (a1.min(b1) - a0.max(b0)).max(0.0);
        }
        let t = w.cross(d2) / denom;
        let s = w.cross(d1) / denom;
        let et = 1e-9 / len1;
        let es = 1e-9 / len2;
        if t > et && t < 1.0 - et && s > es && s < 1.0 - es {
            // a proper crossing has no length but still splits the opening
            f64::MIN_POSITIVE
        } else {
            0.0
        }
    }
}

/// Shared slab test: does the segment `origin + t * dir`, t in (0, 1), pass
/// through the open box described by `ranges` along `axes` (relative to
/// `base`)?
fn slab_interval(
    origin: Vec2,
    dir: Vec2,
    ranges: [(f64, f64); 2],
    axes: [Vec2; 2],
    base: Vec2,
) -> bool {
    let rel = origin.sub(base);
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (axis, (lo, hi)) in axes.iter().zip(ranges) {
        let o = rel.dot(*axis);
        let d = dir.dot(*axis);
        if d.abs() < 1e-15 {
            if o <= lo || o >= hi {
                return false;
            }
            continue;
        }
        let mut ta = (lo - o) / d;
        let mut tb = (hi - o) / d;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
    }
    t1 - t0 > 1e-9
}

/// A wall: a segment swept perpendicular by ±thickness/2, with square ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    pub id: String,
    pub from: Vec2,
    pub to: Vec2,
    #[serde(default = "default_wall_thickness")]
    pub thickness: f64,
}

pub fn default_wall_thickness() -> f64 {
    0.1
}

impl WallSegment {
    pub fn segment(&self) -> Segment {
        Segment::new(self.from, self.to)
    }

    fn frame(&self) -> (Vec2, Vec2, f64) {
        let d = self.to.sub(self.from);
        let len = d.norm();
        let along = if len > 0.0 {
            d.scale(1.0 / len)
        } else {
            Vec2::new(1.0, 0.0)
        };
        (along, along.perp(), len)
    }

    /// Nearest point of the solid wall slab to `p` (or `p` itself if inside).
    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let (along, across, len) = self.frame();
        let rel = p.sub(self.from);
        let h = 0.5 * self.thickness;
        let t = rel.dot(along).clamp(0.0, len);
        let s = rel.dot(across).clamp(-h, h);
        self.from.add(along.scale(t)).add(across.scale(s))
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        self.closest_point(p).distance(p)
    }

    /// The four corners of the wall slab.
    pub fn corners(&self) -> [Vec2; 4] {
        let (_, across, _) = self.frame();
        let h = across.scale(0.5 * self.thickness);
        [
            self.from.sub(h),
            self.to.sub(h),
            self.to.add(h),
            self.from.add(h),
        ]
    }

    pub fn blocks_segment(&self, a: Vec2, b: Vec2) -> bool {
        let (along, across, len) = self.frame();
        let h = 0.5 * self.thickness;
        slab_interval(a, b.sub(a), [(0.0, len), (-h, h)], [along, across], self.from)
    }
}
