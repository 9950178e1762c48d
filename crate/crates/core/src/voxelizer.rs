//! Voxel grids, point-cloud voxelization, and the four-channel feature tensor.
//!
//! Grids are indexed `(x, y, z)` with `z` vertical and stored x-fastest: the
//! voxel `(x, y, z)` sits at `x + nx·(y + ny·z)`. Voxel `(i, j, k)` covers the
//! half-open box `origin + [i, i+1)·s × [j, j+1)·s × [k, k+1)·s`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::materials::{MaterialFeatures, MaterialId, MaterialTable, DB_FLOOR};
use crate::sensing::{fuse, FuseOptions, SemanticPointCloud, SensedFrame};

/// Default voxel edge length, meters.
pub const DEFAULT_VOXEL_SIZE: f64 = 0.1;

/// Offsets within this many voxel widths of a face snap onto it.
const SNAP_TOL: f64 = 1e-9;

/// Integer voxel coordinates.
pub type VoxelIndex = [usize; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    origin: Vec3,
    voxel_size: f64,
    dims: [usize; 3],
    occupancy: Vec<u8>,
    material: Vec<u8>,
}

impl VoxelGrid {
    /// An all-free grid.
    pub fn empty(origin: Vec3, voxel_size: f64, dims: [usize; 3]) -> Result<Self> {
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(Error::Argument(format!(
                "voxel size must be positive, got {voxel_size}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::Argument(format!(
                "grid dims must be ≥ 1, got {dims:?}"
            )));
        }
        if !origin.is_finite() {
            return Err(Error::Argument("grid origin must be finite".into()));
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(VoxelGrid {
            origin,
            voxel_size,
            dims,
            occupancy: vec![0; n],
            material: vec![0; n],
        })
    }

    /// Smallest grid anchored at `bounds.min` that covers `bounds`.
    pub fn covering(bounds: &Aabb, voxel_size: f64) -> Result<Self> {
        if !bounds.is_valid() {
            return Err(Error::Argument(format!("invalid grid bounds {bounds:?}")));
        }
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(Error::Argument(format!(
                "voxel size must be positive, got {voxel_size}"
            )));
        }
        let e = bounds.extent();
        let dims = [0, 1, 2].map(|a| ((e[a] / voxel_size) - SNAP_TOL).ceil().max(1.0) as usize);
        Self::empty(bounds.min, voxel_size, dims)
    }

    /// Builds a grid from raw x-fastest occupancy and material arrays.
    pub fn from_parts(
        origin: Vec3,
        voxel_size: f64,
        dims: [usize; 3],
        occupancy: Vec<u8>,
        material: Vec<u8>,
    ) -> Result<Self> {
        let mut g = Self::empty(origin, voxel_size, dims)?;
        if occupancy.len() != g.len() || material.len() != g.len() {
            return Err(Error::Argument(format!(
                "grid {dims:?} needs {} voxels, got {} occupancy / {} material",
                g.len(),
                occupancy.len(),
                material.len()
            )));
        }
        if occupancy.iter().any(|&o| o > 1) {
            return Err(Error::Argument("occupancy must be 0 or 1".into()));
        }
        g.occupancy = occupancy;
        g.material = material;
        for (o, m) in g.occupancy.iter().zip(g.material.iter_mut()) {
            if *o == 0 {
                *m = 0;
            }
        }
        Ok(g)
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    pub fn bounds(&self) -> Aabb {
        let s = self.voxel_size;
        Aabb::new(
            self.origin,
            self.origin
                + Vec3::new(
                    self.dims[0] as f64 * s,
                    self.dims[1] as f64 * s,
                    self.dims[2] as f64 * s,
                ),
        )
    }

    pub fn linear(&self, [x, y, z]: VoxelIndex) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn unlinear(&self, i: usize) -> VoxelIndex {
        let [nx, ny, _] = self.dims;
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    pub fn center(&self, [x, y, z]: VoxelIndex) -> Vec3 {
        let s = self.voxel_size;
        self.origin
            + Vec3::new(
                (x as f64 + 0.5) * s,
                (y as f64 + 0.5) * s,
                (z as f64 + 0.5) * s,
            )
    }

    /// Fractional voxel coordinate along one axis, snapped to the nearest
    /// face when within rounding noise of it.
    pub(crate) fn axis_coord(&self, p: f64, axis: usize) -> f64 {
        let t = (p - self.origin[axis]) / self.voxel_size;
        let r = t.round();
        if (t - r).abs() < SNAP_TOL {
            r
        } else {
            t
        }
    }

    /// Signed voxel index along one axis (may be out of range).
    pub fn axis_index(&self, p: f64, axis: usize) -> i64 {
        self.axis_coord(p, axis).floor() as i64
    }

    /// The voxel containing `p` under the half-open rule, if inside the grid.
    pub fn index_of(&self, p: Vec3) -> Option<VoxelIndex> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let i = self.axis_index(p[a], a);
            if i < 0 || i >= self.dims[a] as i64 {
                return None;
            }
            out[a] = i as usize;
        }
        Some(out)
    }

    pub fn is_occupied(&self, ix: VoxelIndex) -> bool {
        self.occupancy[self.linear(ix)] != 0
    }

    pub fn material_at(&self, ix: VoxelIndex) -> Option<MaterialId> {
        let i = self.linear(ix);
        (self.occupancy[i] != 0).then_some(MaterialId(self.material[i]))
    }

    pub fn set(&mut self, ix: VoxelIndex, material: Option<MaterialId>) {
        let i = self.linear(ix);
        match material {
            Some(m) => {
                self.occupancy[i] = 1;
                self.material[i] = m.0;
            }
            None => {
                self.occupancy[i] = 0;
                self.material[i] = 0;
            }
        }
    }

    /// Raw x-fastest occupancy (0/1).
    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }

    /// Raw x-fastest material ids (0 where free).
    pub fn materials(&self) -> &[u8] {
        &self.material
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o != 0).count()
    }

    /// Intersection-over-union of the occupied sets of two equally shaped grids.
    pub fn occupancy_iou(&self, other: &VoxelGrid) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::Argument(format!(
                "grid dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.occupancy.iter().zip(&other.occupancy) {
            inter += (*a != 0 && *b != 0) as usize;
            union += (*a != 0 || *b != 0) as usize;
        }
        Ok(if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelizeOptions {
    /// Minimum number of points for a voxel to count as occupied.
    pub min_points: u32,
}

impl Default for VoxelizeOptions {
    fn default() -> Self {
        VoxelizeOptions { min_points: 1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VoxelizeStats {
    /// Points outside the grid bounds.
    pub dropped_points: usize,
    /// Points whose label fell back to the default material.
    pub fallback_points: usize,
    pub occupied_voxels: usize,
    /// Voxels added by [`fill_enclosed`].
    pub enclosed_filled: usize,
}

/// Scatters a labeled cloud into a grid covering `bounds`.
///
/// A voxel is occupied when at least `min_points` points fall inside it; its
/// material is the majority vote of those points' materials, ties going to
/// the lowest material id.
pub fn voxelize_cloud(
    cloud: &SemanticPointCloud,
    table: &MaterialTable,
    bounds: &Aabb,
    voxel_size: f64,
    opts: VoxelizeOptions,
) -> Result<(VoxelGrid, VoxelizeStats)> {
    if !(voxel_size.is_finite() && voxel_size > 0.0) {
        return Err(Error::Argument(format!(
            "voxel size must be positive, got {voxel_size}"
        )));
    }
    if cloud.is_empty() {
        return Err(Error::Argument(
            "cannot voxelize an empty point cloud".into(),
        ));
    }
    let mut grid = VoxelGrid::covering(bounds, voxel_size)?;
    let resolved: Vec<(MaterialId, bool)> = cloud
        .vocabulary
        .iter()
        .map(|l| {
            let r = table.lookup(l);
            (r.id, r.fallback)
        })
        .collect();
    let resolve = |label: u16| {
        resolved
            .get(label as usize)
            .copied()
            .unwrap_or((table.default_id(), true))
    };

    let mut keyed: Vec<(usize, u8)> = cloud
        .points
        .par_iter()
        .filter_map(|p| {
            grid.index_of(p.position)
                .map(|ix| (grid.linear(ix), resolve(p.label).0 .0))
        })
        .collect();
    let mut stats = VoxelizeStats {
        dropped_points: cloud.len() - keyed.len(),
        fallback_points: cloud.points.iter().filter(|p| resolve(p.label).1).count(),
        occupied_voxels: 0,
        enclosed_filled: 0,
    };
    keyed.par_sort_unstable();

    let mut counts = vec![0u32; table.len()];
    let mut start = 0;
    while start < keyed.len() {
        let voxel = keyed[start].0;
        let mut end = start;
        counts.iter_mut().for_each(|c| *c = 0);
        while end < keyed.len() && keyed[end].0 == voxel {
            counts[keyed[end].1 as usize] += 1;
            end += 1;
        }
        if (end - start) as u32 >= opts.min_points {
            // first maximum wins, i.e. the lowest id among tied materials
            let (best, _) =
                counts.iter().enumerate().fold(
                    (0, 0),
                    |acc, (id, &c)| if c > acc.1 { (id, c) } else { acc },
                );
            grid.occupancy[voxel] = 1;
            grid.material[voxel] = best as u8;
            stats.occupied_voxels += 1;
        }
        start = end;
    }
    Ok((grid, stats))
}

/// Fuses scan frames, voxelizes the cloud and fills volumes enclosed away
/// from every camera.
pub fn voxelize_scan(
    frames: &[SensedFrame],
    vocabulary: &[String],
    table: &MaterialTable,
    bounds: &Aabb,
    voxel_size: f64,
    opts: VoxelizeOptions,
) -> Result<(VoxelGrid, VoxelizeStats)> {
    let (cloud, _) = fuse(frames, vocabulary, FuseOptions::default())?;
    let (mut grid, mut stats) = voxelize_cloud(&cloud, table, bounds, voxel_size, opts)?;
    let seeds: Vec<Vec3> = frames.iter().map(|f| f.pose.translation).collect();
    stats.enclosed_filled = fill_enclosed(&mut grid, &seeds)?;
    stats.occupied_voxels += stats.enclosed_filled;
    Ok((grid, stats))
}

/// Marks every free voxel that no seed can reach through free voxels
/// (6-connected) as occupied and returns how many were filled.
///
/// A scanner only records surfaces, so the insides of closed objects and
/// slab sections hidden under walls come out empty; seeding from the camera
/// centers recovers them. Single-voxel holes in a shell do not let the
/// flood in. Filled voxels inherit the material of the nearest occupied
/// voxel in breadth-first order.
pub fn fill_enclosed(grid: &mut VoxelGrid, seeds: &[Vec3]) -> Result<usize> {
    use std::collections::VecDeque;
    let [nx, ny, nz] = grid.dims;
    let neighbors = |i: usize| {
        let [x, y, z] = [i % nx, (i / nx) % ny, i / (nx * ny)];
        let mut out = [usize::MAX; 6];
        if x > 0 {
            out[0] = i - 1
        }
        if x + 1 < nx {
            out[1] = i + 1
        }
        if y > 0 {
            out[2] = i - nx
        }
        if y + 1 < ny {
            out[3] = i + nx
        }
        if z > 0 {
            out[4] = i - nx * ny
        }
        if z + 1 < nz {
            out[5] = i + nx * ny
        }
        out.into_iter().filter(|&j| j != usize::MAX)
    };
    let mut reached = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    for &p in seeds {
        match grid.index_of(p) {
            Some(ix) if !grid.is_occupied(ix) => {
                let i = grid.linear(ix);
                if !reached[i] {
                    reached[i] = true;
                    queue.push_back(i);
                }
            }
            _ => log::warn!(
                "fill seed {:?} is outside the grid or occupied; skipped",
                p.to_array()
            ),
        }
    }
    if queue.is_empty() {
        return Err(Error::Argument(
            "enclosed-volume fill needs at least one free seed".into(),
        ));
    }
    // a free voxel squeezed between two occupied ones along any axis is a
    // pinhole in a scanned shell; the flood does not pass through it
    let pinhole = |i: usize, g: &VoxelGrid| {
        let [x, y, z] = [i % nx, (i / nx) % ny, i / (nx * ny)];
        let occ = |j: usize| g.occupancy[j] != 0;
        (x > 0 && x + 1 < nx && occ(i - 1) && occ(i + 1))
            || (y > 0 && y + 1 < ny && occ(i - nx) && occ(i + nx))
            || (z > 0 && z + 1 < nz && occ(i - nx * ny) && occ(i + nx * ny))
    };
    while let Some(i) = queue.pop_front() {
        for j in neighbors(i) {
            if !reached[j] && grid.occupancy[j] == 0 && !pinhole(j, grid) {
                reached[j] = true;
                queue.push_back(j);
            }
        }
    }
    // grow materials inward from the occupied boundary
    let enclosed = |i: usize, g: &VoxelGrid| g.occupancy[i] == 0 && !reached[i];
    let mut frontier: VecDeque<usize> = (0..grid.len())
        .filter(|&i| grid.occupancy[i] != 0)
        .collect();
    let mut filled = 0;
    while let Some(i) = frontier.pop_front() {
        let m = grid.material[i];
        for j in neighbors(i) {
            if enclosed(j, grid) {
                grid.occupancy[j] = 1;
                grid.material[j] = m;
                filled += 1;
                frontier.push_back(j);
            }
        }
    }
    Ok(filled)
}

/// Voxel-center distance to `tx`, clamped below at half a voxel.
pub fn clamped_distance(grid: &VoxelGrid, a: Vec3, b: Vec3) -> f64 {
    a.distance(b).max(grid.voxel_size() / 2.0)
}

/// Free-space path loss in dB for distance `d_m` (meters) and `f_hz` (Hz):
/// `20·log10(d) + 20·log10(f) − 147.55`.
pub fn fspl_db(d_m: f64, f_hz: f64) -> f64 {
    20.0 * d_m.log10() + 20.0 * f_hz.log10() - 147.55
}

/// The four input channels, each `nx·ny·nz` values in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub dims: [usize; 3],
    /// 0 or 1.
    pub occupancy: Vec<f32>,
    /// ρ in dB, [`DB_FLOOR`] where free.
    pub reflection_db: Vec<f32>,
    /// τ in dB, 0 where free.
    pub transmission_db: Vec<f32>,
    /// Distance from voxel center to the transmitter, meters.
    pub distance_m: Vec<f32>,
    pub tx: Vec3,
    pub frequency_hz: f64,
}

fn check_tx(grid: &VoxelGrid, tx: Vec3) -> Result<()> {
    if !tx.is_finite() || !grid.bounds().contains(tx) {
        return Err(Error::Argument(format!(
            "transmitter {:?} lies outside the grid bounds {:?}",
            tx.to_array(),
            grid.bounds()
        )));
    }
    Ok(())
}

/// Assembles the feature channels for one transmitter. `features` is indexed
/// by material id (see [`MaterialTable::features_at`]).
pub fn build_feature_tensor(
    grid: &VoxelGrid,
    features: &[MaterialFeatures],
    tx: Vec3,
    frequency_hz: f64,
) -> Result<FeatureTensor> {
    check_tx(grid, tx)?;
    if let Some(&m) = grid.materials().iter().max() {
        if m as usize >= features.len() {
            return Err(Error::Argument(format!(
                "grid references material id {m} but only {} feature rows were given",
                features.len()
            )));
        }
    }
    let n = grid.len();
    let mut t = FeatureTensor {
        dims: grid.dims(),
        occupancy: vec![0.0; n],
        reflection_db: vec![DB_FLOOR as f32; n],
        transmission_db: vec![0.0; n],
        distance_m: vec![0.0; n],
        tx,
        frequency_hz,
    };
    t.distance_m
        .par_iter_mut()
        .enumerate()
        .for_each(|(i, d)| *d = clamped_distance(grid, grid.center(grid.unlinear(i)), tx) as f32);
    for i in 0..n {
        if grid.occupancy[i] != 0 {
            let f = &features[grid.material[i] as usize];
            t.occupancy[i] = 1.0;
            t.reflection_db[i] = f.rho_db_clamped(DB_FLOOR) as f32;
            t.transmission_db[i] = f.tau_db_clamped(DB_FLOOR) as f32;
        }
    }
    Ok(t)
}

/// Per-voxel free-space path loss, dB, grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct FsplVolume {
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

pub fn fspl_volume(grid: &VoxelGrid, tx: Vec3, f_hz: f64) -> Result<FsplVolume> {
    if !(f_hz.is_finite() && f_hz > 0.0) {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {f_hz} Hz"
        )));
    }
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            fspl_db(
                clamped_distance(grid, grid.center(grid.unlinear(i)), tx),
                f_hz,
            )
        })
        .collect();
    Ok(FsplVolume {
        dims: grid.dims(),
        values,
    })
}
