//! Flat-shaded z-buffer rasterizer for the floor plan.

use std::io;

use base64::Engine;

use super::CameraModel;
use crate::sim::DronePose;
use crate::world::{Color, FloorPlan, Rect, Vec2};

pub const WALL_COLOR: Color = Color([0xc8, 0xc8, 0xc8]);
pub const FLOOR_COLOR: Color = Color([0x8c, 0x6e, 0x50]);
pub const CEILING_COLOR: Color = Color([0xf0, 0xf0, 0xf0]);
pub const DOOR_COLOR: Color = Color([0x00, 0xb4, 0x00]);
pub const BACKGROUND: Color = Color([0, 0, 0]);

/// Top of door openings; the wall above is drawn as a lintel.
pub const DOOR_HEIGHT: f64 = 2.0;
const THRESHOLD_Y: f64 = 0.005;
const NEAR: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedImage {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB8.
    pub pixels: Vec<u8>,
}

impl RenderedImage {
    fn filled(width: u32, height: u32, c: Color) -> Self {
        let n = width as usize * height as usize;
        RenderedImage {
            width,
            height,
            pixels: c.0.iter().copied().cycle().take(n * 3).collect(),
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn to_png(&self) -> io::Result<Vec<u8>> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, self.width, self.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(io::Error::other)?;
        writer
            .write_image_data(&self.pixels)
            .map_err(io::Error::other)?;
        writer.finish().map_err(io::Error::other)?;
        Ok(out)
    }

    pub fn to_base64_png(&self) -> io::Result<String> {
        Ok(base64::engine::general_purpose::STANDARD.encode(self.to_png()?))
    }
}

/// A planar convex polygon in world coordinates (x, y, z).
struct Face {
    verts: Vec<[f64; 3]>,
    color: Color,
}

fn at(p: Vec2, y: f64) -> [f64; 3] {
    [p.x, y, p.z]
}

/// Side faces of a prism over `corners` between heights `y0` and `y1`.
fn prism(out: &mut Vec<Face>, corners: [Vec2; 4], y0: f64, y1: f64, color: Color, top: bool, bottom: bool) {
    for i in 0..4 {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        out.push(Face {
            verts: vec![at(a, y0), at(b, y0), at(b, y1), at(a, y1)],
            color,
        });
    }
    if top {
        out.push(Face {
            verts: corners.iter().map(|&c| at(c, y1)).collect(),
            color,
        });
    }
    if bottom {
        out.push(Face {
            verts: corners.iter().map(|&c| at(c, y0)).collect(),
            color,
        });
    }
}

fn flat(rect: &Rect, y: f64, color: Color) -> Face {
    Face {
        verts: rect.corners().iter().map(|&c| at(c, y)).collect(),
        color,
    }
}

/// Thickness of the wall a door sits in: the thinnest wall touching one of
/// its jambs, or the default.
fn door_thickness(plan: &FloorPlan, from: Vec2, to: Vec2) -> f64 {
    plan.walls
        .iter()
        .filter(|w| {
            let s = w.segment();
            s.distance(from) < 1e-6 || s.distance(to) < 1e-6
        })
        .map(|w| w.thickness)
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))))
        .unwrap_or_else(crate::world::geometry::default_wall_thickness)
}

fn scene(plan: &FloorPlan) -> Vec<Face> {
    let mut faces = Vec::new();
    let ceiling = plan.ceiling_height;
    for room in &plan.rooms {
        faces.push(flat(&room.footprint, 0.0, FLOOR_COLOR));
        faces.push(flat(&room.footprint, ceiling, CEILING_COLOR));
    }
    for w in &plan.walls {
        prism(&mut faces, w.corners(), 0.0, ceiling, WALL_COLOR, false, false);
    }
    for d in &plan.doors {
        let (a, b) = (d.opening.from, d.opening.to);
        let len = a.distance(b);
        if len <= 0.0 {
            continue;
        }
        let across = b.sub(a).scale(1.0 / len).perp();
        let h = across.scale(0.5 * door_thickness(plan, a, b));
        let corners = [a.sub(h), b.sub(h), b.add(h), a.add(h)];
        if DOOR_HEIGHT < ceiling {
            prism(&mut faces, corners, DOOR_HEIGHT, ceiling, WALL_COLOR, false, true);
        }
        faces.push(Face {
            verts: corners.iter().map(|&c| at(c, THRESHOLD_Y)).collect(),
            color: DOOR_COLOR,
        });
    }
    for o in &plan.furniture {
        prism(&mut faces, o.footprint.corners(), 0.0, o.height, o.color, true, false);
    }
    for t in &plan.objects {
        prism(&mut faces, t.footprint.corners(), 0.0, t.height, t.color, true, false);
    }
    faces
}

struct View {
    eye: [f64; 3],
    right: Vec2,
    forward: Vec2,
    focal: f64,
    cx: f64,
    cy: f64,
}

impl View {
    fn new(pose: &DronePose, cam: &CameraModel) -> Self {
        let forward = pose.heading();
        let ground = cam.position(pose);
        View {
            eye: [ground.x, pose.y, ground.z],
            right: forward.perp().scale(-1.0),
            forward,
            focal: cam.focal_px(),
            cx: 0.5 * cam.width as f64,
            cy: 0.5 * cam.height as f64,
        }
    }

    fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let d = Vec2::new(p[0] - self.eye[0], p[2] - self.eye[2]);
        [d.dot(self.right), p[1] - self.eye[1], d.dot(self.forward)]
    }
}

/// Sutherland–Hodgman against the near plane `z >= NEAR`.
fn clip_near(poly: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ina, inb) = (a[2] >= NEAR, b[2] >= NEAR);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let t = (NEAR - a[2]) / (b[2] - a[2]);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), NEAR]);
        }
    }
    out
}

struct Target<'a> {
    img: &'a mut RenderedImage,
    depth: Vec<f64>,
}

impl Target<'_> {
    /// Fills one screen-space triangle; vertices are (sx, sy, 1/z).
    fn triangle(&mut self, v: [[f64; 3]; 3], color: Color) {
        let edge = |a: [f64; 3], b: [f64; 3], px: f64, py: f64| (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]);
        let area = edge(v[0], v[1], v[2][0], v[2][1]);
        if area.abs() < 1e-12 {
            return;
        }
        let (w, h) = (self.img.width as f64, self.img.height as f64);
        let min_x = v.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min).floor().max(0.0);
        let max_x = v.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max).ceil().min(w);
        let min_y = v.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min).floor().max(0.0);
        let max_y = v.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max).ceil().min(h);
        if min_x >= max_x || min_y >= max_y {
            return;
        }
        let width = self.img.width as usize;
        for py in min_y as usize..max_y as usize {
            let fy = py as f64 + 0.5;
            for px in min_x as usize..max_x as usize {
                let fx = px as f64 + 0.5;
                let b0 = edge(v[1], v[2], fx, fy) / area;
                let b1 = edge(v[2], v[0], fx, fy) / area;
                let b2 = edge(v[0], v[1], fx, fy) / area;
                if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                    continue;
                }
                let inv_z = b0 * v[0][2] + b1 * v[1][2] + b2 * v[2][2];
                let i = py * width + px;
                if inv_z > self.depth[i] {
                    self.depth[i] = inv_z;
                    self.img.pixels[3 * i..3 * i + 3].copy_from_slice(&color.0);
                }
            }
        }
    }
}

fn render(plan: &FloorPlan, pose: &DronePose, cam: &CameraModel) -> RenderedImage {
    let view = View::new(pose, cam);
    let mut img = RenderedImage::filled(cam.width, cam.height, BACKGROUND);
    let n = img.pixels.len() / 3;
    let mut target = Target {
        img: &mut img,
        depth: vec![0.0; n],
    };
    for face in scene(plan) {
        let cam_space: Vec<[f64; 3]> = face.verts.iter().map(|&p| view.to_camera(p)).collect();
        let clipped = clip_near(&cam_space);
        if clipped.len() < 3 {
            continue;
        }
        let screen: Vec<[f64; 3]> = clipped
            .iter()
            .map(|p| {
                [
                    view.cx + view.focal * p[0] / p[2],
                    view.cy - view.focal * p[1] / p[2],
                    1.0 / p[2],
                ]
            })
            .collect();
        for k in 1..screen.len() - 1 {
            target.triangle([screen[0], screen[k], screen[k + 1]], face.color);
        }
    }
    img
}

/// The forward camera view.
pub fn render_frontal(plan: &FloorPlan, pose: &DronePose, cam: &CameraModel) -> RenderedImage {
    render(plan, pose, cam)
}

/// The view looking backwards from the same camera position.
pub fn render_rear(plan: &FloorPlan, pose: &DronePose, cam: &CameraModel) -> RenderedImage {
    let ground = cam.position(pose);
    let back = DronePose::new(ground.x, pose.y, ground.z, pose.yaw + 180.0);
    let zero_offset = CameraModel {
        forward_offset: 0.0,
        ..*cam
    };
    render(plan, &back, &zero_offset)
}
