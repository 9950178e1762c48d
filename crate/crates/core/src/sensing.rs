//! RGB-D back-projection and multi-view fusion.
//!
//! A pixel `(u, v)` with optical-axis depth `z` maps to the camera-frame point
//! `((u − cx)·z/fx, (v − cy)·z/fy, z)` (x right, y down, z forward), which the
//! camera-to-world pose takes to `Rcw·p + tcw`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::materials::MaterialTable;

/// Label id reserved for pixels without a return.
pub const VOID_LABEL: u16 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    /// Pinhole intrinsics with square pixels, the principal point at the
    /// image center and the given horizontal field of view.
    pub fn from_fov(width: usize, height: usize, hfov_deg: f64) -> Result<Self> {
        let fx = width as f64 / 2.0 / (hfov_deg.to_radians() / 2.0).tan();
        let k = CameraIntrinsics {
            fx,
            fy: fx,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "invalid camera intrinsics {self:?}"
            )))
        }
    }

    /// Camera-frame point of pixel `(u, v)` at depth `z`.
    pub fn back_project(&self, u: f64, v: f64, z: f64) -> Vec3 {
        Vec3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    /// Pixel coordinates and depth of a camera-frame point.
    pub fn project(&self, p: Vec3) -> (f64, f64, f64) {
        (
            p.x * self.fx / p.z + self.cx,
            p.y * self.fy / p.z + self.cy,
            p.z,
        )
    }
}

/// Camera-to-world rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// Row-major rotation `Rcw`; its columns are the camera axes in world
    /// coordinates.
    pub rotation: [[f64; 3]; 3],
    pub translation: Vec3,
}

impl CameraPose {
    pub const IDENTITY: CameraPose = CameraPose {
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: [[f64; 3]; 3], translation: Vec3) -> Result<Self> {
        let pose = CameraPose {
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    /// Camera at `position` looking along yaw (about +z, from +x) and pitch
    /// (positive up), with image "down" pointing toward −z.
    pub fn look(position: Vec3, yaw_rad: f64, pitch_rad: f64) -> Self {
        let forward = Vec3::new(
            pitch_rad.cos() * yaw_rad.cos(),
            pitch_rad.cos() * yaw_rad.sin(),
            pitch_rad.sin(),
        );
        let right = Vec3::new(yaw_rad.sin(), -yaw_rad.cos(), 0.0);
        let down = forward.cross(right);
        CameraPose {
            rotation: [
                [right.x, down.x, forward.x],
                [right.y, down.y, forward.y],
                [right.z, down.z, forward.z],
            ],
            translation: position,
        }
    }

    /// Checks that the rotation is orthonormal with determinant +1 (1e-6).
    pub fn validate(&self) -> Result<()> {
        const TOL: f64 = 1e-6;
        let r = &self.rotation;
        if !self.translation.is_finite() || r.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation(
                "camera pose has non-finite entries".into(),
            ));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > TOL {
                    return Err(Error::Validation(format!(
                        "camera rotation is not orthonormal (RᵀR[{i}][{j}] = {dot})"
                    )));
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > TOL {
            return Err(Error::Validation(format!(
                "camera rotation has determinant {det}"
            )));
        }
        Ok(())
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z,
            r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z,
            r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z,
        ) + self.translation
    }

    /// Rotates a direction without translating it.
    pub fn rotate(&self, d: Vec3) -> Vec3 {
        self.apply(d) - self.translation
    }

    pub fn inverse(&self) -> CameraPose {
        let r = &self.rotation;
        let rt = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let t = self.translation;
        let inv = CameraPose {
            rotation: rt,
            translation: Vec3::ZERO,
        };
        CameraPose {
            rotation: rt,
            translation: -inv.apply(t),
        }
    }
}

/// One RGB-D view: metric depth and semantic label rasters, row-major with
/// `u` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SensedFrame {
    /// Optical-axis depth in meters; `0` or NaN means no return.
    pub depth: Vec<f32>,
    pub semantic: Vec<u16>,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

impl SensedFrame {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.pose.validate()?;
        let n = self.intrinsics.width * self.intrinsics.height;
        if self.depth.len() != n || self.semantic.len() != n {
            return Err(Error::Validation(format!(
                "frame rasters ({} depth, {} labels) do not match {}×{}",
                self.depth.len(),
                self.semantic.len(),
                self.intrinsics.width,
                self.intrinsics.height
            )));
        }
        if self.depth.iter().any(|d| *d < 0.0 || d.is_infinite()) {
            return Err(Error::Validation(
                "frame has negative or infinite depth".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub position: Vec3,
    pub label: u16,
}

/// Back-projected pixels of one frame, in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPoints {
    pub points: Vec<LabeledPoint>,
    /// Pixels skipped for missing depth.
    pub invalid_pixels: usize,
}

/// Emits one camera-frame point per pixel with a valid depth.
pub fn back_project_frame(frame: &SensedFrame) -> Result<CameraPoints> {
    frame.validate()?;
    let k = &frame.intrinsics;
    let mut points = Vec::with_capacity(frame.depth.len());
    let mut invalid_pixels = 0;
    for v in 0..k.height {
        for u in 0..k.width {
            let i = v * k.width + u;
            let z = frame.depth[i];
            if !(z > 0.0) {
                invalid_pixels += 1;
                continue;
            }
            points.push(LabeledPoint {
                position: k.back_project(u as f64, v as f64, z as f64),
                label: frame.semantic[i],
            });
        }
    }
    Ok(CameraPoints {
        points,
        invalid_pixels,
    })
}

/// Maps camera-frame points to the world frame, preserving labels.
pub fn to_world(points: &[LabeledPoint], pose: &CameraPose) -> Result<Vec<LabeledPoint>> {
    pose.validate()?;
    Ok(points
        .iter()
        .map(|p| LabeledPoint {
            position: pose.apply(p.position),
            label: p.label,
        })
        .collect())
}

/// Fused world-frame point cloud. Point labels index into `vocabulary`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticPointCloud {
    pub points: Vec<LabeledPoint>,
    pub vocabulary: Vec<String>,
}

impl SemanticPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn label_name(&self, id: u16) -> Option<&str> {
        self.vocabulary.get(id as usize).map(String::as_str)
    }

    /// Number of points whose label is not in `table` (they would fall back
    /// to the default material).
    pub fn unresolved_labels(&self, table: &MaterialTable) -> usize {
        self.points
            .iter()
            .filter(|p| {
                !self
                    .label_name(p.label)
                    .is_some_and(|l| table.contains_label(l))
            })
            .count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FuseOptions {
    /// Upper bound on the fused point count; `None` keeps every point.
    pub max_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FuseStats {
    pub frames: usize,
    pub invalid_pixels: usize,
    pub points_before_subsampling: usize,
}

/// Picks `budget` evenly strided points, deterministic in input order.
fn stride_subsample(points: Vec<LabeledPoint>, budget: usize) -> Vec<LabeledPoint> {
    let n = points.len();
    if n <= budget {
        return points;
    }
    (0..budget).map(|i| points[i * n / budget]).collect()
}

/// Back-projects every frame and concatenates the world-frame points in
/// frame order.
pub fn fuse(
    frames: &[SensedFrame],
    vocabulary: &[String],
    opts: FuseOptions,
) -> Result<(SemanticPointCloud, FuseStats)> {
    if frames.is_empty() {
        return Err(Error::Argument("fuse needs at least one frame".into()));
    }
    let per_frame: Vec<(Vec<LabeledPoint>, usize)> = frames
        .par_iter()
        .map(|f| {
            let cam = back_project_frame(f)?;
            Ok((to_world(&cam.points, &f.pose)?, cam.invalid_pixels))
        })
        .collect::<Result<_>>()?;
    let mut stats = FuseStats {
        frames: frames.len(),
        ..Default::default()
    };
    let mut points = Vec::with_capacity(per_frame.iter().map(|(p, _)| p.len()).sum());
    for (p, invalid) in per_frame {
        stats.invalid_pixels += invalid;
        points.extend(p);
    }
    stats.points_before_subsampling = points.len();
    if let Some(budget) = opts.max_points {
        points = stride_subsample(points, budget);
    }
    if let Some(bad) = points.iter().find(|p| !p.position.is_finite()) {
        return Err(Error::Validation(format!(
            "non-finite fused point {:?}",
            bad.position
        )));
    }
    if let Some(bad) = points.iter().find(|p| p.label as usize >= vocabulary.len()) {
        return Err(Error::Validation(format!(
            "label id {} is outside the {}-entry vocabulary",
            bad.label,
            vocabulary.len()
        )));
    }
    Ok((
        SemanticPointCloud {
            points,
            vocabulary: vocabulary.to_vec(),
        },
        stats,
    ))
}

/// JSON sidecar of one view in a frame directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSidecar {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Row-major `Rcw`.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

const VOCABULARY_FILE: &str = "labels.json";

fn view_stem(i: usize) -> String {
    format!("view_{i:03}")
}

/// Writes frames in the directory format: `view_NNN.json` sidecar,
/// `view_NNN.depth` (little-endian f32 meters), `view_NNN.labels`
/// (little-endian u16) and a shared `labels.json` vocabulary.
pub fn write_frames(dir: &Path, frames: &[SensedFrame], vocabulary: &[String]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let vocab_path = dir.join(VOCABULARY_FILE);
    fs::write(&vocab_path, serde_json::to_string_pretty(vocabulary)?)
        .map_err(|e| Error::io(&vocab_path, e))?;
    for (i, f) in frames.iter().enumerate() {
        f.validate()?;
        let k = f.intrinsics;
        let r = f.pose.rotation;
        let sidecar = FrameSidecar {
            width: k.width,
            height: k.height,
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            rotation: [
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ],
            translation: f.pose.translation.to_array(),
        };
        let stem = view_stem(i);
        let p = dir.join(format!("{stem}.json"));
        fs::write(&p, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&p, e))?;
        let p = dir.join(format!("{stem}.depth"));
        let bytes: Vec<u8> = f.depth.iter().flat_map(|d| d.to_le_bytes()).collect();
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        let p = dir.join(format!("{stem}.labels"));
        let bytes: Vec<u8> = f.semantic.iter().flat_map(|d| d.to_le_bytes()).collect();
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// Reads a frame directory written by [`write_frames`], in view order.
pub fn read_frames(dir: &Path) -> Result<(Vec<SensedFrame>, Vec<String>)> {
    let vocab_path = dir.join(VOCABULARY_FILE);
    let text = fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    let vocabulary: Vec<String> = serde_json::from_str(&text)?;
    let mut frames = Vec::new();
    loop {
        let stem = view_stem(frames.len());
        let side_path = dir.join(format!("{stem}.json"));
        if !side_path.exists() {
            break;
        }
        let text = fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
        let s: FrameSidecar = serde_json::from_str(&text)?;
        let n = s.width * s.height;
        let p = dir.join(format!("{stem}.depth"));
        let raw = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        if raw.len() != 4 * n {
            return Err(Error::Format(format!(
                "{}: expected {} bytes, got {}",
                p.display(),
                4 * n,
                raw.len()
            )));
        }
        let depth = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let p = dir.join(format!("{stem}.labels"));
        let raw = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        if raw.len() != 2 * n {
            return Err(Error::Format(format!(
                "{}: expected {} bytes, got {}",
                p.display(),
                2 * n,
                raw.len()
            )));
        }
        let semantic = raw
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        let r = s.rotation;
        let frame = SensedFrame {
            depth,
            semantic,
            intrinsics: CameraIntrinsics {
                fx: s.fx,
                fy: s.fy,
                cx: s.cx,
                cy: s.cy,
                width: s.width,
                height: s.height,
            },
            pose: CameraPose {
                rotation: [[r[0], r[1], r[2]], [r[3], r[4], r[5]], [r[6], r[7], r[8]]],
                translation: s.translation.into(),
            },
        };
        frame
            .validate()
            .map_err(|e| Error::Format(format!("{}: {e}", side_path.display())))?;
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(Error::Format(format!(
            "{} contains no views",
            dir.display()
        )));
    }
    Ok((frames, vocabulary))
}
