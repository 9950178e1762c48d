//! Procedural indoor scenes and a virtual RGB-D scanner.
//!
//! Scenes are unions of labeled axis-aligned boxes: a floor slab whose top is
//! at `z = 0`, a ceiling slab, exterior walls, interior partitions with
//! doorway gaps, and furniture. All coordinates sit on a 0.1 m lattice so a
//! default grid anchored at the scene's lower corner has no box face inside a
//! voxel.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::materials::MaterialTable;
use crate::sensing::{CameraIntrinsics, CameraPose, SensedFrame, VOID_LABEL};
use crate::voxelizer::VoxelGrid;

/// Minimum wall thickness, meters.
pub const MIN_WALL_THICKNESS: f64 = 0.1;
const LATTICE: f64 = 0.1;
const EPS: f64 = 1e-9;

const WALL_LABELS: &[&str] = &["wall", "brick_wall", "partition"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneElement {
    pub min: Vec3,
    pub max: Vec3,
    pub label: String,
}

impl SceneElement {
    pub fn new(min: Vec3, max: Vec3, label: impl Into<String>) -> Self {
        SceneElement {
            min,
            max,
            label: label.into(),
        }
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::new(self.min, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub bounds: Aabb,
    pub elements: Vec<SceneElement>,
    pub seed: u64,
    /// Interior free-space footprint of each room (floor to ceiling); used to
    /// place scan cameras. Optional in files.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rooms: Vec<Aabb>,
}

impl SceneDescription {
    pub fn validate(&self) -> Result<()> {
        if !self.bounds.is_valid() {
            return Err(Error::Validation(format!(
                "invalid scene bounds {:?}",
                self.bounds
            )));
        }
        let grown = Aabb::new(
            self.bounds.min - Vec3::new(EPS, EPS, EPS),
            self.bounds.max + Vec3::new(EPS, EPS, EPS),
        );
        for e in &self.elements {
            let b = e.aabb();
            if !b.is_valid() {
                return Err(Error::Validation(format!(
                    "element `{}` has an empty box",
                    e.label
                )));
            }
            if !grown.contains_box(&b) {
                return Err(Error::Validation(format!(
                    "element `{}` leaves the scene bounds",
                    e.label
                )));
            }
            if WALL_LABELS.contains(&e.label.as_str()) {
                let ext = b.extent();
                if ext.x.min(ext.y) < MIN_WALL_THICKNESS - EPS {
                    return Err(Error::Validation(format!(
                        "wall element thinner than {MIN_WALL_THICKNESS} m: {:?}",
                        ext.to_array()
                    )));
                }
            }
        }
        for needed in ["floor", "ceiling"] {
            if !self.elements.iter().any(|e| e.label == needed) {
                return Err(Error::Validation(format!("scene has no {needed}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: SceneDescription = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Label vocabulary of rendered frames: `void` first, then the scene's
    /// labels in sorted order.
    pub fn vocabulary(&self) -> Vec<String> {
        let labels: BTreeSet<&str> = self.elements.iter().map(|e| e.label.as_str()).collect();
        std::iter::once("void")
            .chain(labels)
            .map(str::to_string)
            .collect()
    }

    /// Whether `p` is outside every element box (faces count as inside).
    pub fn is_free(&self, p: Vec3) -> bool {
        self.bounds.contains_strict(p) && !self.elements.iter().any(|e| e.aabb().contains(p))
    }

    /// Exact occupancy on a grid anchored at the scene's lower corner: a
    /// voxel is occupied when its center lies in an element box; the first
    /// such element in list order sets the material.
    pub fn rasterize(&self, table: &MaterialTable, voxel_size: f64) -> Result<VoxelGrid> {
        let mut grid = VoxelGrid::covering(&self.bounds, voxel_size)?;
        let ids: Vec<_> = self
            .elements
            .iter()
            .map(|e| table.lookup(&e.label).id)
            .collect();
        for (e, id) in self.elements.iter().zip(ids) {
            let b = e.aabb();
            let lo = [0, 1, 2].map(|a| {
                ((b.min[a] - grid.origin()[a]) / voxel_size - 0.5)
                    .ceil()
                    .max(0.0) as usize
            });
            let hi = [0, 1, 2].map(|a| {
                let h = ((b.max[a] - grid.origin()[a]) / voxel_size - 0.5).floor();
                (h.min(grid.dims()[a] as f64 - 1.0)) as i64
            });
            if hi.iter().any(|&h| h < 0) {
                continue;
            }
            for z in lo[2]..=hi[2] as usize {
                for y in lo[1]..=hi[1] as usize {
                    for x in lo[0]..=hi[0] as usize {
                        let ix = [x, y, z];
                        if !grid.is_occupied(ix) && b.contains(grid.center(ix)) {
                            grid.set(ix, Some(id));
                        }
                    }
                }
            }
        }
        Ok(grid)
    }
}

/// Knobs of the procedural generator. Lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    /// Number of rooms, laid out in a row along x (1–4).
    pub rooms: usize,
    pub room_width: (f64, f64),
    pub room_depth: (f64, f64),
    pub ceiling_height: f64,
    pub wall_thickness: f64,
    pub door_width: f64,
    pub door_height: f64,
    /// Furniture pieces per square meter of room floor.
    pub furniture_density: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            rooms: 2,
            room_width: (3.5, 5.0),
            room_depth: (3.5, 4.5),
            ceiling_height: 2.8,
            wall_thickness: 0.1,
            door_width: 0.9,
            door_height: 2.1,
            furniture_density: 0.12,
        }
    }
}

/// (label, length along the wall, depth, height). Every piece stays below
/// camera height so scans see its top.
const FURNITURE: &[(&str, f64, f64, f64)] = &[
    ("bed", 2.0, 1.6, 0.5),
    ("sofa", 1.8, 0.8, 0.8),
    ("table", 1.2, 0.8, 0.8),
    ("desk", 1.2, 0.6, 0.8),
    ("cabinet", 0.8, 0.4, 0.9),
    ("shelf", 0.8, 0.3, 1.1),
    ("counter", 1.2, 0.6, 0.9),
    ("appliance", 0.6, 0.6, 0.9),
];

/// Gap kept around furniture so every exposed face stays in view of the
/// scan cameras.
const FURNITURE_CLEARANCE: f64 = 0.6;
/// Fraction of the room half-extent at which orbit cameras sit.
const ORBIT_FRACTION: f64 = 0.55;

fn snap(v: f64) -> f64 {
    // dividing keeps 4.1 as 4.1 where multiplying by 0.1 would not
    (v / LATTICE).round() / LATTICE.recip()
}

fn sample_lattice(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    let (a, b) = ((lo / LATTICE).ceil() as i64, (hi / LATTICE).floor() as i64);
    if a >= b {
        return snap(lo);
    }
    rng.gen_range(a..=b) as f64 / LATTICE.recip()
}

impl SceneParams {
    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Generation(m));
        if !(1..=4).contains(&self.rooms) {
            return fail(format!("room count must be 1–4, got {}", self.rooms));
        }
        for (name, (lo, hi)) in [
            ("room_width", self.room_width),
            ("room_depth", self.room_depth),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return fail(format!(
                    "{name} range ({lo}, {hi}) must be positive and ordered"
                ));
            }
        }
        if self.wall_thickness < MIN_WALL_THICKNESS - EPS {
            return fail(format!(
                "wall thickness {} is below {MIN_WALL_THICKNESS} m",
                self.wall_thickness
            ));
        }
        if !(self.ceiling_height > 0.0 && self.door_height > 0.0 && self.door_width > 0.0) {
            return fail("ceiling, door height and door width must be positive".into());
        }
        if self.door_height >= self.ceiling_height {
            return fail("door height must be below the ceiling".into());
        }
        if self.rooms > 1 && self.door_width + 2.0 * FURNITURE_CLEARANCE > self.room_depth.0 {
            return fail(format!(
                "door width {} does not fit a {} m deep room",
                self.door_width, self.room_depth.0
            ));
        }
        if !(self.furniture_density >= 0.0 && self.furniture_density.is_finite()) {
            return fail("furniture density must be non-negative".into());
        }
        if self.furniture_density > 0.0 {
            let smallest = FURNITURE.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
            let room = self.room_width.0.min(self.room_depth.0);
            if smallest + 2.0 * FURNITURE_CLEARANCE > room {
                return fail(format!("no furniture fits a {room} m room"));
            }
        }
        Ok(())
    }
}

/// Orbit camera positions for a room interior.
fn orbit_positions(room: &Aabb, views: usize, height: f64) -> Vec<(Vec3, f64)> {
    let c = (room.min + room.max) / 2.0;
    let half = room.extent() / 2.0;
    (0..views)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / views as f64;
            let p = Vec3::new(
                c.x + ORBIT_FRACTION * half.x * a.cos(),
                c.y + ORBIT_FRACTION * half.y * a.sin(),
                room.min.z + height,
            );
            // look back toward the room center
            (p, a + PI)
        })
        .collect()
}

/// Generates a deterministic scene for `seed`.
pub fn gen_scene(seed: u64, params: &SceneParams) -> Result<SceneDescription> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = snap(params.wall_thickness);
    let h = snap(params.ceiling_height);
    let depth = sample_lattice(&mut rng, params.room_depth);
    let widths: Vec<f64> = (0..params.rooms)
        .map(|_| sample_lattice(&mut rng, params.room_width))
        .collect();
    let total_w = t + widths.iter().map(|w| w + t).sum::<f64>();
    let total_d = depth + 2.0 * t;
    let ext_label = if rng.gen_bool(0.3) {
        "brick_wall"
    } else {
        "wall"
    };

    let v = Vec3::new;
    let mut elements = vec![
        SceneElement::new(v(0.0, 0.0, -t), v(total_w, total_d, 0.0), "floor"),
        SceneElement::new(v(0.0, 0.0, h), v(total_w, total_d, h + t), "ceiling"),
        SceneElement::new(v(0.0, 0.0, 0.0), v(t, total_d, h), ext_label),
        SceneElement::new(v(total_w - t, 0.0, 0.0), v(total_w, total_d, h), ext_label),
        SceneElement::new(v(t, 0.0, 0.0), v(total_w - t, t, h), ext_label),
        SceneElement::new(
            v(t, total_d - t, 0.0),
            v(total_w - t, total_d, h),
            ext_label,
        ),
    ];

    let mut rooms = Vec::new();
    // keep-out zones for furniture: doorways and camera spots
    let mut keep_out: Vec<Aabb> = Vec::new();
    let mut x = t;
    for (i, &w) in widths.iter().enumerate() {
        rooms.push(Aabb::new(v(x, t, 0.0), v(x + w, t + depth, h)));
        x += w;
        if i + 1 < widths.len() {
            let dw = snap(params.door_width);
            let y0 = sample_lattice(
                &mut rng,
                (
                    t + FURNITURE_CLEARANCE,
                    t + depth - FURNITURE_CLEARANCE - dw,
                ),
            );
            let dh = snap(params.door_height);
            let pieces = [
                (v(x, t, 0.0), v(x + t, y0, h)),
                (v(x, y0 + dw, 0.0), v(x + t, t + depth, h)),
                (v(x, y0, dh), v(x + t, y0 + dw, h)),
            ];
            for (lo, hi) in pieces {
                if (0..3).all(|a| hi[a] - lo[a] > EPS) {
                    elements.push(SceneElement::new(lo, hi, "partition"));
                }
            }
            keep_out.push(Aabb::new(v(x - 0.8, y0, 0.0), v(x + t + 0.8, y0 + dw, dh)));
        }
        x += t;
    }
    for room in &rooms {
        for (p, _) in orbit_positions(
            room,
            ScanOptions::default().views_per_room,
            ScanOptions::default().camera_height,
        ) {
            let r = 0.35;
            keep_out.push(Aabb::new(p - v(r, r, p.z), p + v(r, r, 1.0)));
        }
    }

    if params.furniture_density > 0.0 {
        for room in &rooms {
            let area = room.extent().x * room.extent().y;
            let count = (params.furniture_density * area).round() as usize;
            let mut placed: Vec<Aabb> = Vec::new();
            for _ in 0..count {
                let &(label, along, deep, tall) =
                    FURNITURE.choose(&mut rng).expect("catalog not empty");
                // back against one of the four walls
                let wall = rng.gen_range(0..4);
                let (sx, sy) = if wall < 2 {
                    (along, deep)
                } else {
                    (deep, along)
                };
                let span = |lo: f64, hi: f64, len: f64| {
                    (lo + FURNITURE_CLEARANCE, hi - FURNITURE_CLEARANCE - len)
                };
                let (xr, yr) = (
                    span(room.min.x, room.max.x, sx),
                    span(room.min.y, room.max.y, sy),
                );
                if xr.1 < xr.0 || yr.1 < yr.0 {
                    continue;
                }
                for _attempt in 0..40 {
                    let (px, py) = match wall {
                        0 => (sample_lattice(&mut rng, xr), room.min.y),
                        1 => (sample_lattice(&mut rng, xr), room.max.y - sy),
                        2 => (room.min.x, sample_lattice(&mut rng, yr)),
                        _ => (room.max.x - sx, sample_lattice(&mut rng, yr)),
                    };
                    let b = Aabb::new(v(px, py, 0.0), v(px + sx, py + sy, snap(tall)));
                    let padded = Aabb::new(
                        b.min - v(FURNITURE_CLEARANCE, FURNITURE_CLEARANCE, 0.0),
                        b.max + v(FURNITURE_CLEARANCE, FURNITURE_CLEARANCE, 0.0),
                    );
                    if placed.iter().chain(&keep_out).any(|o| o.overlaps(&padded)) {
                        continue;
                    }
                    placed.push(b);
                    elements.push(SceneElement::new(b.min, b.max, label));
                    break;
                }
            }
        }
    }

    // keep coordinates on the lattice despite accumulated rounding
    let on_lattice = |p: Vec3| v(snap(p.x), snap(p.y), snap(p.z));
    for e in &mut elements {
        e.min = on_lattice(e.min);
        e.max = on_lattice(e.max);
    }
    for r in &mut rooms {
        *r = Aabb::new(on_lattice(r.min), on_lattice(r.max));
    }
    let scene = SceneDescription {
        bounds: Aabb::new(
            on_lattice(v(0.0, 0.0, -t)),
            on_lattice(v(total_w, total_d, h + t)),
        ),
        elements,
        seed,
        rooms,
    };
    scene.validate()?;
    Ok(scene)
}

/// Camera poses and shared intrinsics of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPlan {
    pub poses: Vec<CameraPose>,
    pub intrinsics: CameraIntrinsics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanOptions {
    pub views_per_room: usize,
    /// Camera height above the floor, meters.
    pub camera_height: f64,
    /// Downward tilt of every view, degrees.
    pub pitch_deg: f64,
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            views_per_room: 6,
            camera_height: 1.5,
            pitch_deg: 5.0,
            width: 256,
            height: 256,
            hfov_deg: 100.0,
        }
    }
}

impl ScanPlan {
    /// Ring of inward-looking cameras in every room.
    pub fn orbit(scene: &SceneDescription, opts: &ScanOptions) -> Result<Self> {
        if !(6..=12).contains(&opts.views_per_room) {
            log::warn!(
                "{} views per room is outside the usual 6–12",
                opts.views_per_room
            );
        }
        if opts.views_per_room == 0 {
            return Err(Error::Argument(
                "a scan needs at least one view per room".into(),
            ));
        }
        let rooms = if scene.rooms.is_empty() {
            vec![scene.bounds]
        } else {
            scene.rooms.clone()
        };
        let intrinsics = CameraIntrinsics::from_fov(opts.width, opts.height, opts.hfov_deg)?;
        let poses = rooms
            .iter()
            .flat_map(|room| orbit_positions(room, opts.views_per_room, opts.camera_height))
            .map(|(p, yaw)| CameraPose::look(p, yaw, -opts.pitch_deg.to_radians()))
            .collect();
        Ok(ScanPlan { poses, intrinsics })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Returns are reported this far (optical-axis meters) beyond the hit
    /// surface so surface samples fall inside the occupied voxel.
    pub surface_bias_m: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            surface_bias_m: 1e-4,
        }
    }
}

/// Ray-casts depth and semantic rasters for every camera of `plan`.
///
/// Labels index into [`SceneDescription::vocabulary`].
pub fn render_views(
    scene: &SceneDescription,
    plan: &ScanPlan,
    opts: RenderOptions,
) -> Result<Vec<SensedFrame>> {
    plan.intrinsics.validate()?;
    let vocabulary = scene.vocabulary();
    let label_ids: Vec<u16> = scene
        .elements
        .iter()
        .map(|e| {
            vocabulary
                .iter()
                .position(|v| *v == e.label)
                .expect("label in vocabulary") as u16
        })
        .collect();
    let boxes: Vec<Aabb> = scene.elements.iter().map(SceneElement::aabb).collect();
    plan.poses
        .par_iter()
        .map(|pose| {
            pose.validate()?;
            let o = pose.translation;
            if let Some(e) = scene.elements.iter().find(|e| e.aabb().contains(o)) {
                return Err(Error::Render(format!(
                    "camera at {:?} is inside element `{}`",
                    o.to_array(),
                    e.label
                )));
            }
            let k = plan.intrinsics;
            let mut depth = vec![0.0f32; k.width * k.height];
            let mut semantic = vec![VOID_LABEL; k.width * k.height];
            for v in 0..k.height {
                for u in 0..k.width {
                    // camera-frame ray with unit z, so the hit parameter is the depth
                    let dir = pose.rotate(k.back_project(u as f64, v as f64, 1.0));
                    let hit = boxes
                        .iter()
                        .enumerate()
                        .filter_map(|(i, b)| b.ray_entry(o, dir).map(|t| (t, i)))
                        .min_by(|a, b| a.0.total_cmp(&b.0));
                    if let Some((t, i)) = hit {
                        let idx = v * k.width + u;
                        depth[idx] = (t + opts.surface_bias_m) as f32;
                        semantic[idx] = label_ids[i];
                    }
                }
            }
            Ok(SensedFrame {
                depth,
                semantic,
                intrinsics: k,
                pose: *pose,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let p = SceneParams::default();
        assert_eq!(gen_scene(7, &p).unwrap(), gen_scene(7, &p).unwrap());
        assert_ne!(gen_scene(7, &p).unwrap(), gen_scene(8, &p).unwrap());
    }

    #[test]
    fn zero_density_is_structure_only() {
        let p = SceneParams {
            furniture_density: 0.0,
            ..Default::default()
        };
        let s = gen_scene(3, &p).unwrap();
        let structural = ["floor", "ceiling", "wall", "brick_wall", "partition"];
        assert!(s
            .elements
            .iter()
            .all(|e| structural.contains(&e.label.as_str())));
    }

    #[test]
    fn two_rooms_have_a_doorway() {
        let p = SceneParams {
            rooms: 2,
            furniture_density: 0.0,
            ..Default::default()
        };
        let s = gen_scene(11, &p).unwrap();
        let parts: Vec<_> = s
            .elements
            .iter()
            .filter(|e| e.label == "partition")
            .collect();
        assert_eq!(parts.len(), 3);
        // a point in the door gap at mid-door height is free and lies on the partition plane
        let lintel = parts.iter().find(|e| e.min.z > 0.0).unwrap();
        let gap = Vec3::new(
            (lintel.min.x + lintel.max.x) / 2.0,
            (lintel.min.y + lintel.max.y) / 2.0,
            1.0,
        );
        assert!(s.is_free(gap));
    }

    #[test]
    fn infeasible_params_are_rejected() {
        let p = SceneParams {
            room_width: (0.5, 0.6),
            room_depth: (0.5, 0.6),
            rooms: 1,
            ..Default::default()
        };
        assert!(matches!(gen_scene(1, &p), Err(Error::Generation(_))));
        let p = SceneParams {
            rooms: 5,
            ..Default::default()
        };
        assert!(gen_scene(1, &p).is_err());
    }

    #[test]
    fn every_label_is_in_the_default_table() {
        let t = MaterialTable::builtin();
        for seed in 0..20 {
            let s = gen_scene(
                seed,
                &SceneParams {
                    furniture_density: 0.3,
                    ..Default::default()
                },
            )
            .unwrap();
            for e in &s.elements {
                assert!(t.contains_label(&e.label), "{}", e.label);
            }
        }
    }

    #[test]
    fn scene_json_round_trip() {
        let s = gen_scene(5, &SceneParams::default()).unwrap();
        assert_eq!(SceneDescription::from_json(&s.to_json()).unwrap(), s);
        let mut bad = s.clone();
        bad.elements.retain(|e| e.label != "ceiling");
        assert!(SceneDescription::from_json(&bad.to_json()).is_err());
    }

    fn box_room() -> SceneDescription {
        let v = Vec3::new;
        SceneDescription {
            bounds: Aabb::new(v(0.0, 0.0, -0.1), v(6.0, 4.0, 2.9)),
            elements: vec![
                SceneElement::new(v(0.0, 0.0, -0.1), v(6.0, 4.0, 0.0), "floor"),
                SceneElement::new(v(0.0, 0.0, 2.8), v(6.0, 4.0, 2.9), "ceiling"),
                SceneElement::new(v(4.0, 0.0, 0.0), v(4.1, 4.0, 2.8), "wall"),
            ],
            seed: 0,
            rooms: vec![],
        }
    }

    #[test]
    fn wall_three_meters_ahead() {
        let scene = box_room();
        let k = CameraIntrinsics::from_fov(33, 33, 60.0).unwrap();
        let pose = CameraPose::look(Vec3::new(1.0, 2.0, 1.5), 0.0, 0.0);
        let plan = ScanPlan {
            poses: vec![pose],
            intrinsics: k,
        };
        let f = &render_views(
            &scene,
            &plan,
            RenderOptions {
                surface_bias_m: 0.0,
            },
        )
        .unwrap()[0];
        let center = 16 * 33 + 16;
        assert_eq!(f.depth[center], 3.0);
        assert_eq!(scene.vocabulary()[f.semantic[center] as usize], "wall");
        let biased = &render_views(&scene, &plan, RenderOptions::default()).unwrap()[0];
        assert!((biased.depth[center] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn rays_through_open_space_have_no_return() {
        let scene = box_room();
        let k = CameraIntrinsics::from_fov(9, 9, 30.0).unwrap();
        // looking toward −x: nothing there but the open side of the box
        let plan = ScanPlan {
            poses: vec![CameraPose::look(Vec3::new(1.0, 2.0, 1.5), PI, 0.0)],
            intrinsics: k,
        };
        let f = &render_views(&scene, &plan, RenderOptions::default()).unwrap()[0];
        assert_eq!(f.depth[4 * 9 + 4], 0.0);
        assert_eq!(f.semantic[4 * 9 + 4], VOID_LABEL);
    }

    #[test]
    fn camera_inside_a_box_fails() {
        let scene = box_room();
        let plan = ScanPlan {
            poses: vec![CameraPose::look(Vec3::new(4.05, 2.0, 1.5), 0.0, 0.0)],
            intrinsics: CameraIntrinsics::from_fov(8, 8, 60.0).unwrap(),
        };
        assert!(matches!(
            render_views(&scene, &plan, RenderOptions::default()),
            Err(Error::Render(_))
        ));
    }

    #[test]
    fn rasterize_centers() {
        let t = MaterialTable::builtin();
        let g = box_room().rasterize(&t, 0.1).unwrap();
        assert_eq!(g.dims(), [60, 40, 30]);
        assert!(g.is_occupied([0, 0, 0]));
        assert!(!g.is_occupied([0, 0, 1]));
        assert!(g.is_occupied([40, 5, 10]));
        assert!(!g.is_occupied([39, 5, 10]) && !g.is_occupied([41, 5, 10]));
        assert_eq!(g.material_at([5, 5, 29]), t.id_of("ceiling_board"));
        assert_eq!(g.occupied_count(), 60 * 40 * 2 + 40 * 28);
    }
}
