//! Deterministic propagation oracle: direct path plus first-order specular
//! reflections, combined non-coherently, evaluated at receiver voxel centers.
//!
//! Transmitted power is normalized to 0 dB and antenna gains are 0 dB, so
//! every output is pure path loss in dB.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::materials::{MaterialFeatures, MaterialTable, DB_FLOOR};
use crate::stack::{Heatmap, Stack};
use crate::voxelizer::{clamped_distance, fspl_db, VoxelGrid, VoxelIndex};

/// Ties closer than this (in segment parameter units) cross together.
const TIE_EPS: f64 = 1e-12;
/// Reflection legs end this many voxel widths off the reflecting face.
const FACE_NUDGE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub frequency_hz: f64,
    /// Receiver heights, meters, strictly increasing.
    pub heights_m: Vec<f64>,
    pub enable_reflections: bool,
    /// Cells whose best path loses more than this are invalid.
    pub max_path_loss_db: f64,
    /// Largest reflecting planes kept, by face count.
    pub max_first_order_surfaces: usize,
}

/// `start, start+step, …` up to `stop` inclusive (within 1e-9).
pub fn height_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite()) || stop < start {
        return Err(Error::Argument(format!(
            "bad height range {start}:{stop}:{step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // rounding keeps 0.6 + 6·0.1 printing as 1.2
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            frequency_hz: 3.5e9,
            heights_m: height_range(0.6, 1.6, 0.1).expect("valid default range"),
            enable_reflections: true,
            max_path_loss_db: 160.0,
            max_first_order_surfaces: 64,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(Error::Domain(format!(
                "frequency must be positive, got {} Hz",
                self.frequency_hz
            )));
        }
        if self.heights_m.is_empty() {
            return Err(Error::Argument(
                "at least one receiver height is required".into(),
            ));
        }
        if self.heights_m.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument(format!(
                "heights must strictly increase: {:?}",
                self.heights_m
            )));
        }
        Ok(())
    }
}

/// Per-material losses at one frequency, indexed by material id.
#[derive(Debug, Clone, PartialEq)]
pub struct LossModel {
    pub frequency_hz: f64,
    /// |τ| in dB, applied once per crossed run.
    pub transmission_db: Vec<f64>,
    /// |ρ| in dB, applied at a bounce.
    pub reflection_db: Vec<f64>,
}

impl LossModel {
    pub fn new(table: &MaterialTable, frequency_hz: f64) -> Result<Self> {
        Ok(Self::from_features(
            &table.features_at(frequency_hz)?,
            frequency_hz,
        ))
    }

    pub fn from_features(features: &[MaterialFeatures], frequency_hz: f64) -> Self {
        LossModel {
            frequency_hz,
            transmission_db: features
                .iter()
                .map(|f| -f.tau_db_clamped(DB_FLOOR))
                .collect(),
            reflection_db: features
                .iter()
                .map(|f| -f.rho_db_clamped(DB_FLOOR))
                .collect(),
        }
    }

    fn check(&self, grid: &VoxelGrid) -> Result<()> {
        let max = grid.materials().iter().copied().max().unwrap_or(0) as usize;
        if max >= self.transmission_db.len() {
            return Err(Error::Argument(format!(
                "grid uses material id {max} but the loss model has {} entries",
                self.transmission_db.len()
            )));
        }
        Ok(())
    }
}

/// Calls `visit` with the linear index of every voxel the segment `a → b`
/// passes through, in order.
///
/// Voxels are half-open per axis, so a segment running exactly along a face
/// belongs to the higher-index voxel, and a point on a face belongs to the
/// voxel above it. When the segment crosses several faces at once, axes moving
/// up are stepped before axes moving down; this visits exactly the voxels
/// containing some point of the segment.
pub fn walk_voxels(grid: &VoxelGrid, a: Vec3, b: Vec3, mut visit: impl FnMut(usize)) -> Result<()> {
    let (Some(start), Some(end)) = (grid.index_of(a), grid.index_of(b)) else {
        return Err(Error::Argument(format!(
            "segment {:?} → {:?} leaves the grid",
            a.to_array(),
            b.to_array()
        )));
    };
    let dims = grid.dims();
    let mut idx = start.map(|i| i as i64);
    let end = end.map(|i| i as i64);
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for axis in 0..3 {
        let ca = grid.axis_coord(a[axis], axis);
        let d = grid.axis_coord(b[axis], axis) - ca;
        if idx[axis] == end[axis] || d == 0.0 {
            continue;
        }
        step[axis] = if d > 0.0 { 1 } else { -1 };
        t_delta[axis] = 1.0 / d.abs();
        t_max[axis] = if d > 0.0 {
            (idx[axis] as f64 + 1.0 - ca) / d
        } else {
            (idx[axis] as f64 - ca) / d
        };
    }
    let linear = |i: [i64; 3]| (i[0] + dims[0] as i64 * (i[1] + dims[1] as i64 * i[2])) as usize;
    visit(linear(idx));
    let budget: i64 = (0..3).map(|k| (end[k] - idx[k]).abs()).sum();
    for _ in 0..budget {
        if idx == end {
            break;
        }
        let t = t_max.iter().copied().fold(f64::INFINITY, f64::min);
        if !t.is_finite() {
            break;
        }
        let tied = [0, 1, 2].map(|k| t_max[k] - t <= TIE_EPS);
        let mut advance = |k: usize, idx: &mut [i64; 3]| {
            idx[k] += step[k];
            t_max[k] = if idx[k] == end[k] {
                f64::INFINITY
            } else {
                t_max[k] + t_delta[k]
            };
        };
        let mut moved_up = false;
        for k in (0..3).filter(|&k| tied[k] && step[k] > 0) {
            advance(k, &mut idx);
            moved_up = true;
        }
        let downs = (0..3).filter(|&k| tied[k] && step[k] < 0);
        let mut first_down = true;
        for k in downs {
            if moved_up && first_down {
                visit(linear(idx));
            }
            first_down = false;
            advance(k, &mut idx);
        }
        visit(linear(idx));
    }
    debug_assert_eq!(idx, end);
    Ok(())
}

/// The voxels crossed by `a → b`, in visiting order.
pub fn traverse(grid: &VoxelGrid, a: Vec3, b: Vec3) -> Result<Vec<VoxelIndex>> {
    let mut out = Vec::new();
    walk_voxels(grid, a, b, |i| out.push(grid.unlinear(i)))?;
    Ok(out)
}

/// Sum of |τ| over the occupied runs crossed by `a → b`, one term per
/// contiguous run of a single material.
pub fn transmission_loss(grid: &VoxelGrid, a: Vec3, b: Vec3, model: &LossModel) -> Result<f64> {
    let (occ, mat) = (grid.occupancy(), grid.materials());
    let mut loss = 0.0;
    let mut run: Option<u8> = None;
    walk_voxels(grid, a, b, |i| {
        if occ[i] == 0 {
            run = None;
        } else if run != Some(mat[i]) {
            run = Some(mat[i]);
            loss += model.transmission_db[mat[i] as usize];
        }
    })?;
    Ok(loss)
}

/// Direct-path loss: FSPL at the clamped distance plus crossed-run losses.
pub fn trace_direct(grid: &VoxelGrid, tx: Vec3, rx: Vec3, model: &LossModel) -> Result<f64> {
    Ok(fspl_db(clamped_distance(grid, tx, rx), model.frequency_hz)
        + transmission_loss(grid, tx, rx, model)?)
}

/// One axis-aligned reflecting plane made of voxel faces.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    /// Plane normal axis.
    pub axis: usize,
    /// Plane coordinate, meters.
    pub coord: f64,
    /// +1 when the face looks toward increasing `axis`, −1 otherwise.
    pub facing: i8,
    /// Per face cell over the two other axes (lower axis fastest): material
    /// id + 1 where a face exists, 0 elsewhere.
    faces: Vec<u8>,
    face_count: usize,
}

impl Surface {
    pub fn face_count(&self) -> usize {
        self.face_count
    }
}

fn other_axes(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Extracts interior occupied/free boundaries as planes, largest first, at
/// most `limit` of them.
pub fn extract_surfaces(grid: &VoxelGrid, limit: usize) -> Vec<Surface> {
    let dims = grid.dims();
    let occ = grid.occupancy();
    let mat = grid.materials();
    let mut planes: BTreeMap<(usize, usize, i8), Surface> = BTreeMap::new();
    for axis in 0..3 {
        let (u, v) = other_axes(axis);
        for k in 1..dims[axis] {
            for j in 0..dims[v] {
                for i in 0..dims[u] {
                    let mut lo = [0; 3];
                    lo[axis] = k - 1;
                    lo[u] = i;
                    lo[v] = j;
                    let mut hi = lo;
                    hi[axis] = k;
                    let (l, h) = (grid.linear(lo), grid.linear(hi));
                    let (facing, m) = match (occ[l] != 0, occ[h] != 0) {
                        (true, false) => (1i8, mat[l]),
                        (false, true) => (-1i8, mat[h]),
                        _ => continue,
                    };
                    let s = planes.entry((axis, k, facing)).or_insert_with(|| Surface {
                        axis,
                        coord: grid.origin()[axis] + k as f64 * grid.voxel_size(),
                        facing,
                        faces: vec![0; dims[u] * dims[v]],
                        face_count: 0,
                    });
                    s.faces[j * dims[u] + i] = m + 1;
                    s.face_count += 1;
                }
            }
        }
    }
    let mut out: Vec<Surface> = planes.into_values().collect();
    // stable: ties keep (axis, boundary, facing) order
    out.sort_by_key(|s| std::cmp::Reverse(s.face_count));
    out.truncate(limit);
    out
}

/// A single-bounce specular path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionPath {
    /// Index into the surface list.
    pub surface: usize,
    pub bounce_point: Vec3,
    /// |image(tx) − rx|, meters.
    pub length_m: f64,
    pub reflection_loss_db: f64,
    /// Transmission losses on both legs, dB.
    pub transmission_loss_db: f64,
    pub total_loss_db: f64,
}

/// First-order paths from `tx` to `rx` off `surfaces`, in surface order.
pub fn enumerate_reflections(
    grid: &VoxelGrid,
    surfaces: &[Surface],
    tx: Vec3,
    rx: Vec3,
    model: &LossModel,
) -> Result<Vec<ReflectionPath>> {
    let dims = grid.dims();
    let mut out = Vec::new();
    for (n, s) in surfaces.iter().enumerate() {
        let a = s.axis;
        let side = s.facing as f64;
        if side * (tx[a] - s.coord) <= 0.0 || side * (rx[a] - s.coord) <= 0.0 {
            continue;
        }
        let image = tx.with_axis(a, 2.0 * s.coord - tx[a]);
        let frac = (s.coord - image[a]) / (rx[a] - image[a]);
        let hit = (image + (rx - image) * frac).with_axis(a, s.coord);
        let (u, v) = other_axes(a);
        let (iu, iv) = (grid.axis_index(hit[u], u), grid.axis_index(hit[v], v));
        if iu < 0 || iv < 0 || iu >= dims[u] as i64 || iv >= dims[v] as i64 {
            continue;
        }
        let face = s.faces[iv as usize * dims[u] + iu as usize];
        if face == 0 {
            continue;
        }
        let bounce = hit.with_axis(a, s.coord + side * FACE_NUDGE * grid.voxel_size());
        let transmission = transmission_loss(grid, tx, bounce, model)?
            + transmission_loss(grid, bounce, rx, model)?;
        let length = image.distance(rx);
        let reflection = model.reflection_db[(face - 1) as usize];
        out.push(ReflectionPath {
            surface: n,
            bounce_point: hit,
            length_m: length,
            reflection_loss_db: reflection,
            transmission_loss_db: transmission,
            total_loss_db: fspl_db(length.max(grid.voxel_size() / 2.0), model.frequency_hz)
                + reflection
                + transmission,
        });
    }
    Ok(out)
}

/// Non-coherent power sum of path losses, in dB.
pub fn combine_paths(losses_db: &[f64]) -> f64 {
    let best = losses_db.iter().copied().fold(f64::INFINITY, f64::min);
    // factor out the strongest path to keep the sum well scaled
    let sum: f64 = losses_db
        .iter()
        .map(|l| 10f64.powf(-(l - best) / 10.0))
        .sum();
    best - 10.0 * sum.log10()
}

/// Per-height path-loss maps with validity and the aligned FSPL baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossStack {
    /// Total path loss, dB; NaN where invalid.
    pub pathloss: Stack,
    /// Oracle validity per cell, same layout as `pathloss.values`.
    pub valid: Vec<bool>,
    pub fspl: Stack,
    /// Grid layer of each level.
    pub layers: Vec<usize>,
}

impl PathLossStack {
    pub fn levels(&self) -> usize {
        self.layers.len()
    }

    pub fn heatmap(&self, level: usize) -> Heatmap {
        let n = self.pathloss.cells_per_level();
        Heatmap {
            nx: self.pathloss.nx,
            ny: self.pathloss.ny,
            values: self.pathloss.level(level).to_vec(),
            valid: self.valid[level * n..(level + 1) * n].to_vec(),
        }
    }

    /// Path loss with every invalid cell filled by [`fill_gaps`].
    pub fn filled(&self) -> Result<Stack> {
        let mut out = self.pathloss.clone();
        for l in 0..self.levels() {
            let filled = fill_gaps(&self.heatmap(l))?;
            out.level_mut(l).copy_from_slice(&filled);
        }
        Ok(out)
    }
}

/// Grid layer whose center is nearest to height `h`; exact ties go to the
/// lower layer.
pub fn layer_for_height(grid: &VoxelGrid, h: f64) -> Result<usize> {
    let nz = grid.dims()[2];
    let (oz, s) = (grid.origin().z, grid.voxel_size());
    if !h.is_finite() || h < oz || h > oz + nz as f64 * s {
        return Err(Error::Argument(format!(
            "height {h} m is outside the grid's vertical span [{oz}, {}]",
            oz + nz as f64 * s
        )));
    }
    let t = (h - oz) / s - 0.5;
    let lower = t.floor();
    let layer = if t - lower <= 0.5 + 1e-9 {
        lower
    } else {
        lower + 1.0
    };
    Ok(layer.clamp(0.0, nz as f64 - 1.0) as usize)
}

fn check_tx(grid: &VoxelGrid, tx: Vec3) -> Result<VoxelIndex> {
    let Some(ix) = grid.index_of(tx) else {
        return Err(Error::Argument(format!(
            "transmitter {:?} is outside the grid",
            tx.to_array()
        )));
    };
    if grid.is_occupied(ix) {
        return Err(Error::Argument(format!(
            "transmitter {:?} lies in an occupied voxel {ix:?}",
            tx.to_array()
        )));
    }
    Ok(ix)
}

fn simulate_layers(
    grid: &VoxelGrid,
    tx: Vec3,
    cfg: &SimConfig,
    model: &LossModel,
    layers: Vec<usize>,
    heights_m: Vec<f64>,
) -> Result<PathLossStack> {
    check_tx(grid, tx)?;
    model.check(grid)?;
    let surfaces = if cfg.enable_reflections {
        extract_surfaces(grid, cfg.max_first_order_surfaces)
    } else {
        Vec::new()
    };
    let [nx, ny, _] = grid.dims();
    let per_level = nx * ny;
    let cells: Vec<(f64, bool, f64)> = (0..per_level * layers.len())
        .into_par_iter()
        .map(|c| {
            let (level, i) = (c / per_level, c % per_level);
            let ix = [i % nx, i / nx, layers[level]];
            let rx = grid.center(ix);
            let fspl = fspl_db(clamped_distance(grid, tx, rx), model.frequency_hz);
            if grid.is_occupied(ix) {
                return Ok((f64::NAN, false, fspl));
            }
            let mut losses = vec![trace_direct(grid, tx, rx, model)?];
            for p in enumerate_reflections(grid, &surfaces, tx, rx, model)? {
                losses.push(p.total_loss_db);
            }
            let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
            if best > cfg.max_path_loss_db {
                return Ok((f64::NAN, false, fspl));
            }
            Ok((combine_paths(&losses), true, fspl))
        })
        .collect::<Result<_>>()?;
    let pathloss = Stack::new(
        nx,
        ny,
        heights_m.clone(),
        cells.iter().map(|c| c.0).collect(),
    )?;
    let fspl = Stack::new(nx, ny, heights_m, cells.iter().map(|c| c.2).collect())?;
    Ok(PathLossStack {
        pathloss,
        valid: cells.iter().map(|c| c.1).collect(),
        fspl,
        layers,
    })
}

/// Path loss at every voxel layer. Level heights are the layer centers.
pub fn simulate_volume(
    grid: &VoxelGrid,
    tx: Vec3,
    cfg: &SimConfig,
    model: &LossModel,
) -> Result<PathLossStack> {
    cfg.validate()?;
    let nz = grid.dims()[2];
    let heights = (0..nz).map(|z| grid.center([0, 0, z]).z).collect();
    simulate_layers(grid, tx, cfg, model, (0..nz).collect(), heights)
}

/// Path loss only at the configured heights; equal to slicing
/// [`simulate_volume`] at those heights.
pub fn simulate_heights(
    grid: &VoxelGrid,
    tx: Vec3,
    cfg: &SimConfig,
    model: &LossModel,
) -> Result<PathLossStack> {
    cfg.validate()?;
    let layers = cfg
        .heights_m
        .iter()
        .map(|&h| layer_for_height(grid, h))
        .collect::<Result<_>>()?;
    simulate_layers(grid, tx, cfg, model, layers, cfg.heights_m.clone())
}

/// Picks the levels nearest to `heights` out of a stack produced on `grid`.
pub fn slice_heights(
    stack: &PathLossStack,
    grid: &VoxelGrid,
    heights: &[f64],
) -> Result<PathLossStack> {
    let n = stack.pathloss.cells_per_level();
    let (mut pl, mut valid, mut fs, mut layers) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &h in heights {
        let layer = layer_for_height(grid, h)?;
        let Some(level) = stack.layers.iter().position(|&l| l == layer) else {
            return Err(Error::Argument(format!(
                "height {h} m (layer {layer}) is not in the stack"
            )));
        };
        pl.extend_from_slice(stack.pathloss.level(level));
        fs.extend_from_slice(stack.fspl.level(level));
        valid.extend_from_slice(&stack.valid[level * n..(level + 1) * n]);
        layers.push(layer);
    }
    let (nx, ny) = (stack.pathloss.nx, stack.pathloss.ny);
    Ok(PathLossStack {
        pathloss: Stack::new(nx, ny, heights.to_vec(), pl)?,
        valid,
        fspl: Stack::new(nx, ny, heights.to_vec(), fs)?,
        layers,
    })
}

/// Completes a map in two stages. Invalid cells with at least two valid axis
/// neighbors take the mean of their complete neighbor pairs (or of the valid
/// neighbors when no pair is complete); the rest copy the nearest valid cell,
/// ties going to the lower index. Valid cells are never modified.
pub fn fill_gaps(map: &Heatmap) -> Result<Vec<f64>> {
    let (nx, ny) = (map.nx, map.ny);
    if map.values.len() != nx * ny || map.valid.len() != nx * ny {
        return Err(Error::Argument(
            "heatmap buffers do not match its shape".into(),
        ));
    }
    if !map.valid.iter().any(|&v| v) {
        return Err(Error::Argument(
            "cannot fill a map without a single valid cell".into(),
        ));
    }
    let mut out = map.values.clone();
    let mut valid = map.valid.clone();
    let at = |x: i64, y: i64| -> Option<f64> {
        (x >= 0 && y >= 0 && x < nx as i64 && y < ny as i64)
            .then(|| map.idx(x as usize, y as usize))
            .filter(|&i| map.valid[i])
            .map(|i| map.values[i])
    };
    for y in 0..ny {
        for x in 0..nx {
            let i = map.idx(x, y);
            if map.valid[i] {
                continue;
            }
            let (xi, yi) = (x as i64, y as i64);
            let horizontal = [at(xi - 1, yi), at(xi + 1, yi)];
            let vertical = [at(xi, yi - 1), at(xi, yi + 1)];
            let found: Vec<f64> = horizontal
                .iter()
                .chain(&vertical)
                .flatten()
                .copied()
                .collect();
            if found.len() < 2 {
                continue;
            }
            let pairs: Vec<f64> = [horizontal, vertical]
                .iter()
                .filter_map(|p| Some((p[0]? + p[1]?) / 2.0))
                .collect();
            let src = if pairs.is_empty() { &found } else { &pairs };
            out[i] = src.iter().sum::<f64>() / src.len() as f64;
            valid[i] = true;
        }
    }
    let sources: Vec<usize> = (0..nx * ny).filter(|&i| valid[i]).collect();
    let filled: Vec<(usize, f64)> = (0..nx * ny)
        .into_par_iter()
        .filter(|&i| !valid[i])
        .map(|i| {
            let (x, y) = ((i % nx) as i64, (i / nx) as i64);
            let nearest = sources
                .iter()
                .min_by_key(|&&j| {
                    let (dx, dy) = ((j % nx) as i64 - x, (j / nx) as i64 - y);
                    (dx * dx + dy * dy, j)
                })
                .expect("at least one source");
            (i, out[*nearest])
        })
        .collect();
    for (i, v) in filled {
        out[i] = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::MaterialId;
    use approx::assert_abs_diff_eq;

    fn empty(dims: [usize; 3]) -> VoxelGrid {
        VoxelGrid::empty(Vec3::ZERO, 0.1, dims).unwrap()
    }

    fn model() -> LossModel {
        LossModel::new(&MaterialTable::builtin(), 3.5e9).unwrap()
    }

    fn concrete() -> MaterialId {
        MaterialTable::builtin().id_of("concrete").unwrap()
    }

    #[test]
    fn free_space_one_meter() {
        let g = empty([30, 5, 5]);
        let l = trace_direct(
            &g,
            Vec3::new(0.55, 0.25, 0.25),
            Vec3::new(1.55, 0.25, 0.25),
            &model(),
        )
        .unwrap();
        assert_abs_diff_eq!(l, 43.33, epsilon = 0.01);
    }

    #[test]
    fn slab_counts_once() {
        let mut g = empty([30, 5, 5]);
        for x in 10..13 {
            g.set([x, 2, 2], Some(concrete()));
        }
        let m = model();
        let (tx, rx) = (Vec3::new(0.25, 0.25, 0.25), Vec3::new(2.25, 0.25, 0.25));
        let tau = m.transmission_db[concrete().index()];
        assert_abs_diff_eq!(
            trace_direct(&g, tx, rx, &m).unwrap(),
            fspl_db(2.0, 3.5e9) + tau,
            epsilon = 1e-9
        );
    }

    #[test]
    fn mixed_run_splits_at_material_change() {
        let t = MaterialTable::builtin();
        let mut g = empty([20, 3, 3]);
        g.set([5, 1, 1], Some(concrete()));
        g.set([6, 1, 1], Some(t.id_of("wood").unwrap()));
        let m = model();
        let extra = transmission_loss(
            &g,
            Vec3::new(0.15, 0.15, 0.15),
            Vec3::new(1.55, 0.15, 0.15),
            &m,
        )
        .unwrap();
        let want = m.transmission_db[concrete().index()]
            + m.transmission_db[t.id_of("wood").unwrap().index()];
        assert_abs_diff_eq!(extra, want, epsilon = 1e-12);
    }

    #[test]
    fn grazing_face_uses_higher_voxel() {
        let g = empty([6, 6, 1]);
        // runs exactly along y = 0.2, the face between rows 1 and 2
        let cells = traverse(&g, Vec3::new(0.05, 0.2, 0.05), Vec3::new(0.55, 0.2, 0.05)).unwrap();
        assert!(cells.iter().all(|c| c[1] == 2), "{cells:?}");
        assert_eq!(cells.len(), 6);
    }

    #[test]
    fn diagonal_through_corners() {
        let g = empty([4, 4, 1]);
        let up = traverse(&g, Vec3::new(0.05, 0.05, 0.05), Vec3::new(0.35, 0.35, 0.05)).unwrap();
        assert_eq!(up, vec![[0, 0, 0], [1, 1, 0], [2, 2, 0], [3, 3, 0]]);
        // mixed directions pass through the voxel that owns each corner point
        let mixed = traverse(&g, Vec3::new(0.05, 0.25, 0.05), Vec3::new(0.25, 0.05, 0.05)).unwrap();
        assert_eq!(
            mixed,
            vec![[0, 2, 0], [1, 2, 0], [1, 1, 0], [2, 1, 0], [2, 0, 0]]
        );
    }

    #[test]
    fn same_point_is_clamped_fspl() {
        let g = empty([4, 4, 4]);
        let p = g.center([1, 1, 1]);
        assert_abs_diff_eq!(
            trace_direct(&g, p, p, &model()).unwrap(),
            fspl_db(0.05, 3.5e9),
            epsilon = 1e-12
        );
    }

    /// Two x-walls at x ∈ [0, 0.1) and [1.9, 2.0).
    fn corridor() -> VoxelGrid {
        let mut g = empty([20, 10, 10]);
        for y in 0..10 {
            for z in 0..10 {
                g.set([0, y, z], Some(concrete()));
                g.set([19, y, z], Some(concrete()));
            }
        }
        g
    }

    #[test]
    fn two_walls_two_paths() {
        let g = corridor();
        let s = extract_surfaces(&g, 64);
        assert_eq!(s.len(), 2);
        let (tx, rx) = (g.center([8, 3, 5]), g.center([11, 6, 5]));
        let paths = enumerate_reflections(&g, &s, tx, rx, &model()).unwrap();
        assert_eq!(paths.len(), 2);
        for p in &paths {
            let wall_x = if p.bounce_point.x < 1.0 { 0.1 } else { 1.9 };
            assert_abs_diff_eq!(p.bounce_point.x, wall_x, epsilon = 1e-12);
            assert_eq!(p.transmission_loss_db, 0.0);
        }
        // unrolled length from the mirrored source
        let image = tx.with_axis(0, 0.2 - tx.x);
        assert_abs_diff_eq!(
            paths[0].length_m.min(paths[1].length_m),
            image
                .distance(rx)
                .min(tx.with_axis(0, 3.8 - tx.x).distance(rx)),
            epsilon = 1e-12
        );
    }

    #[test]
    fn open_scene_has_no_reflections() {
        let g = empty([8, 8, 8]);
        let s = extract_surfaces(&g, 64);
        assert!(s.is_empty());
        assert!(
            enumerate_reflections(&g, &s, g.center([1, 1, 1]), g.center([5, 5, 5]), &model())
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn metal_bounce_costs_nothing() {
        let t = MaterialTable::builtin();
        let mut g = empty([10, 10, 10]);
        for y in 0..10 {
            for z in 0..10 {
                g.set([0, y, z], t.id_of("metal"));
            }
        }
        let s = extract_surfaces(&g, 64);
        let p = enumerate_reflections(&g, &s, g.center([4, 2, 5]), g.center([4, 7, 5]), &model())
            .unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].reflection_loss_db, 0.0);
    }

    #[test]
    fn power_sum() {
        assert_abs_diff_eq!(combine_paths(&[50.0]), 50.0);
        assert_abs_diff_eq!(
            combine_paths(&[50.0, 50.0]),
            50.0 - 10.0 * 2f64.log10(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn reflections_only_lower_the_loss() {
        let g = corridor();
        let m = model();
        let on = SimConfig {
            heights_m: vec![0.55],
            ..Default::default()
        };
        let off = SimConfig {
            enable_reflections: false,
            ..on.clone()
        };
        let tx = g.center([5, 5, 5]);
        let a = simulate_heights(&g, tx, &on, &m).unwrap();
        let b = simulate_heights(&g, tx, &off, &m).unwrap();
        for i in 0..a.valid.len() {
            if a.valid[i] {
                assert!(a.pathloss.values[i] <= b.pathloss.values[i]);
            }
        }
    }

    #[test]
    fn occupied_tx_is_rejected() {
        let g = corridor();
        let r = simulate_heights(
            &g,
            g.center([0, 5, 5]),
            &SimConfig {
                heights_m: vec![0.5],
                ..Default::default()
            },
            &model(),
        );
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn heights_map_to_layers() {
        let g = VoxelGrid::empty(Vec3::new(0.0, 0.0, -0.1), 0.1, [2, 2, 30]).unwrap();
        // 0.6 m sits between the centers 0.55 and 0.65; the lower wins
        assert_eq!(layer_for_height(&g, 0.6).unwrap(), 6);
        assert_eq!(layer_for_height(&g, 0.62).unwrap(), 7);
        assert_eq!(layer_for_height(&g, 0.55).unwrap(), 6);
        assert!(layer_for_height(&g, 3.5).is_err());
        assert_eq!(height_range(0.6, 1.6, 0.1).unwrap().len(), 11);
    }

    #[test]
    fn gap_fill_examples() {
        let mut vals = vec![0.0; 9];
        let mut valid = vec![false; 9];
        for (i, v) in [(1, 40.0), (3, 42.0), (5, 46.0), (7, 44.0)] {
            vals[i] = v;
            valid[i] = true;
        }
        let out = fill_gaps(&Heatmap::new(3, 3, vals.clone(), valid.clone()).unwrap()).unwrap();
        assert_eq!(out[4], 43.0);

        let map = Heatmap::new(
            2,
            2,
            vec![0.0, 50.0, 0.0, 0.0],
            vec![false, true, false, false],
        )
        .unwrap();
        let out = fill_gaps(&map).unwrap();
        assert_eq!(out[0], 50.0);
        assert!(out.iter().all(|&v| v == 50.0));

        let none = Heatmap::new(2, 1, vec![0.0; 2], vec![false; 2]).unwrap();
        assert!(fill_gaps(&none).is_err());
    }
}
