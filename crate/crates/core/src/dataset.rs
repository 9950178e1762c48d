//! Dataset samples, their HDF5 layout, rotational augmentation and splits.
//!
//! # File layout
//!
//! One file per dataset. Each sample is a group `/samples/<id>` holding
//!
//! | dataset           | type      | shape              |
//! |-------------------|-----------|--------------------|
//! | `occupancy`       | `u8`      | `(Nz, Ny, Nx)`     |
//! | `reflection_db`   | `f32`     | `(Nz, Ny, Nx)`     |
//! | `transmission_db` | `f32`     | `(Nz, Ny, Nx)`     |
//! | `distance_m`      | `f32`     | `(Nz, Ny, Nx)`     |
//! | `tx_position_m`   | `f32`     | `(3,)`             |
//! | `fspl_db`         | `f32`     | `(levels, Ny, Nx)` |
//! | `pathloss_db`     | `f32`     | `(levels, Ny, Nx)` |
//! | `valid_mask`      | `u8`      | `(levels, Ny, Nx)`, optional |
//!
//! HDF5 shapes are listed slowest axis first, so every array is stored with
//! x varying fastest. Group attributes: `scene_id` (string), `voxel_size_m`,
//! `frequency_hz`, `origin_m` (3 × f64), `heights_m` (f64 list), `rotation_k`,
//! `tx_id` and `format_version` = 1.
//!
//! `valid_mask` marks cells the oracle resolved before gap filling;
//! `pathloss_db` is always gap-filled.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use hdf5::types::VarLenUnicode;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::materials::{MaterialId, MaterialTable};
use crate::scenegen::{gen_scene, render_views, RenderOptions, ScanOptions, ScanPlan, SceneParams};
use crate::simulator::{simulate_heights, LossModel, SimConfig};
use crate::voxelizer::{build_feature_tensor, voxelize_scan, VoxelGrid, VoxelizeOptions};

pub const FORMAT_VERSION: u32 = 1;

/// Per-sample metadata, stored as group attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub scene_id: String,
    pub tx_id: u32,
    pub voxel_size_m: f64,
    pub frequency_hz: f64,
    pub origin_m: [f64; 3],
    pub heights_m: Vec<f64>,
    /// Quarter turns applied relative to the generated scene (0–3).
    pub rotation_k: u8,
    pub format_version: u32,
}

/// One transmitter configuration. Volumes are `Nx·Ny·Nz` and stacks
/// `levels·Nx·Ny`, all x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub dims: [usize; 3],
    pub occupancy: Vec<u8>,
    pub reflection_db: Vec<f32>,
    pub transmission_db: Vec<f32>,
    pub distance_m: Vec<f32>,
    pub tx_position_m: [f32; 3],
    pub fspl_db: Vec<f32>,
    pub pathloss_db: Vec<f32>,
    pub valid_mask: Option<Vec<u8>>,
    pub meta: SampleMeta,
}

impl DatasetSample {
    /// `<scene>_tx<NNN>_r<k>`; also the sample's group name.
    pub fn sample_id(&self) -> String {
        sample_id(&self.meta.scene_id, self.meta.tx_id, self.meta.rotation_k)
    }

    pub fn levels(&self) -> usize {
        self.meta.heights_m.len()
    }

    pub fn validate(&self) -> Result<()> {
        let [nx, ny, nz] = self.dims;
        let vol = nx * ny * nz;
        let stack = nx * ny * self.levels();
        let bad = |what: &str, got: usize, want: usize| {
            Err(Error::Validation(format!(
                "{what} has {got} values, expected {want}"
            )))
        };
        for (name, len) in [
            ("occupancy", self.occupancy.len()),
            ("reflection_db", self.reflection_db.len()),
            ("transmission_db", self.transmission_db.len()),
            ("distance_m", self.distance_m.len()),
        ] {
            if len != vol {
                return bad(name, len, vol);
            }
        }
        for (name, len) in [
            ("fspl_db", self.fspl_db.len()),
            ("pathloss_db", self.pathloss_db.len()),
        ] {
            if len != stack {
                return bad(name, len, stack);
            }
        }
        if let Some(m) = &self.valid_mask {
            if m.len() != stack {
                return bad("valid_mask", m.len(), stack);
            }
        }
        let floats = [
            &self.reflection_db,
            &self.transmission_db,
            &self.distance_m,
            &self.fspl_db,
            &self.pathloss_db,
        ];
        if floats.iter().any(|v| v.iter().any(|x| !x.is_finite()))
            || self.tx_position_m.iter().any(|x| !x.is_finite())
        {
            return Err(Error::Validation(format!(
                "sample {} has non-finite payload",
                self.sample_id()
            )));
        }
        if self.meta.rotation_k > 3 {
            return Err(Error::Validation(format!(
                "rotation_k {} is not in 0..4",
                self.meta.rotation_k
            )));
        }
        Ok(())
    }
}

pub fn sample_id(scene_id: &str, tx_id: u32, rotation_k: u8) -> String {
    format!("{scene_id}_tx{tx_id:03}_r{rotation_k}")
}

/// Builds one sample: features from `features_grid`, ground truth from
/// `truth_grid` (both sharing geometry).
pub fn build_sample(
    features_grid: &VoxelGrid,
    truth_grid: &VoxelGrid,
    table: &MaterialTable,
    tx: Vec3,
    cfg: &SimConfig,
    scene_id: &str,
    tx_id: u32,
) -> Result<DatasetSample> {
    if features_grid.dims() != truth_grid.dims() || features_grid.origin() != truth_grid.origin() {
        return Err(Error::Argument(
            "feature and truth grids must share geometry".into(),
        ));
    }
    let features = table.features_at(cfg.frequency_hz)?;
    let tensor = build_feature_tensor(features_grid, &features, tx, cfg.frequency_hz)?;
    let model = LossModel::from_features(&features, cfg.frequency_hz);
    let stack = simulate_heights(truth_grid, tx, cfg, &model)?;
    let filled = stack.filled()?;
    let to_f32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
    let sample = DatasetSample {
        dims: features_grid.dims(),
        occupancy: features_grid.occupancy().to_vec(),
        reflection_db: tensor.reflection_db,
        transmission_db: tensor.transmission_db,
        distance_m: tensor.distance_m,
        tx_position_m: tx.to_array().map(|x| x as f32),
        fspl_db: to_f32(&stack.fspl.values),
        pathloss_db: to_f32(&filled.values),
        valid_mask: Some(stack.valid.iter().map(|&v| v as u8).collect()),
        meta: SampleMeta {
            scene_id: scene_id.to_string(),
            tx_id,
            voxel_size_m: features_grid.voxel_size(),
            frequency_hz: cfg.frequency_hz,
            origin_m: features_grid.origin().to_array(),
            heights_m: cfg.heights_m.clone(),
            rotation_k: 0,
            format_version: FORMAT_VERSION,
        },
    };
    sample.validate()?;
    Ok(sample)
}

/// Transmitter height window, meters.
pub const TX_HEIGHT_RANGE: (f64, f64) = (1.0, 2.5);

/// Draws `n` distinct free voxel centers whose height lies in `z_range`,
/// uniformly and reproducibly for `seed`.
pub fn sample_tx(grid: &VoxelGrid, n: usize, seed: u64, z_range: (f64, f64)) -> Result<Vec<Vec3>> {
    let candidates: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.occupancy()[i] == 0)
        .filter(|&i| {
            let z = grid.center(grid.unlinear(i)).z;
            z >= z_range.0 - 1e-9 && z <= z_range.1 + 1e-9
        })
        .collect();
    if candidates.len() < n {
        return Err(Error::Sampling(format!(
            "need {n} transmitter positions but only {} free voxels lie in the {:?} m height band",
            candidates.len(),
            z_range
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, candidates.len(), n)
        .into_iter()
        .map(|k| grid.center(grid.unlinear(candidates[k])))
        .collect())
}

/// Rotates an `nx × ny` x-fastest layer a quarter turn counterclockwise:
/// cell `(x, y)` moves to `(y, nx − 1 − x)` in an `ny × nx` layer.
fn quarter_turn<T: Copy>(layer: &[T], nx: usize, ny: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(layer.len());
    // new dims (ny, nx); new (x', y') came from (x, y) = (nx − 1 − y', x')
    for yp in 0..nx {
        for xp in 0..ny {
            out.push(layer[xp * nx + (nx - 1 - yp)]);
        }
    }
    out
}

fn turn_layers<T: Copy>(data: &[T], nx: usize, ny: usize) -> Vec<T> {
    data.chunks(nx * ny)
        .flat_map(|l| quarter_turn(l, nx, ny))
        .collect()
}

fn turn_once(s: &DatasetSample) -> DatasetSample {
    let [nx, ny, nz] = s.dims;
    let vs = s.meta.voxel_size_m;
    let (wx, wy) = (nx as f64 * vs, ny as f64 * vs);
    let [ox, oy, oz] = s.meta.origin_m;
    let (cx, cy) = (ox + wx / 2.0, oy + wy / 2.0);
    let origin = [cx - wy / 2.0, cy - wx / 2.0, oz];
    let (u, v) = (
        s.tx_position_m[0] as f64 - ox,
        s.tx_position_m[1] as f64 - oy,
    );
    let tx = [
        (origin[0] + v) as f32,
        (origin[1] + wx - u) as f32,
        s.tx_position_m[2],
    ];
    DatasetSample {
        dims: [ny, nx, nz],
        occupancy: turn_layers(&s.occupancy, nx, ny),
        reflection_db: turn_layers(&s.reflection_db, nx, ny),
        transmission_db: turn_layers(&s.transmission_db, nx, ny),
        distance_m: turn_layers(&s.distance_m, nx, ny),
        tx_position_m: tx,
        fspl_db: turn_layers(&s.fspl_db, nx, ny),
        pathloss_db: turn_layers(&s.pathloss_db, nx, ny),
        valid_mask: s.valid_mask.as_ref().map(|m| turn_layers(m, nx, ny)),
        meta: SampleMeta {
            origin_m: origin,
            rotation_k: (s.meta.rotation_k + 1) % 4,
            ..s.meta.clone()
        },
    }
}

/// Rotates every volume and stack by `k` quarter turns about the grid's
/// vertical center axis.
pub fn rotate_sample(sample: &DatasetSample, k: u8) -> Result<DatasetSample> {
    if !(1..=3).contains(&k) {
        return Err(Error::Argument(format!(
            "rotation must be 1, 2 or 3 quarter turns, got {k}"
        )));
    }
    let mut out = turn_once(sample);
    for _ in 1..k {
        out = turn_once(&out);
    }
    Ok(out)
}

/// Parses `90,180,270` style degree lists into quarter-turn counts.
pub fn parse_rotations(text: &str) -> Result<Vec<u8>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| match t.trim() {
            "90" => Ok(1),
            "180" => Ok(2),
            "270" => Ok(3),
            other => Err(Error::Argument(format!(
                "rotation `{other}` is not one of 90, 180, 270"
            ))),
        })
        .collect()
}

/// The rotated copies of every sample, `ks.len()` per input.
pub fn augment(samples: &[DatasetSample], ks: &[u8]) -> Result<Vec<DatasetSample>> {
    let mut out = Vec::with_capacity(samples.len() * ks.len());
    for s in samples {
        for &k in ks {
            out.push(rotate_sample(s, k)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WriteOptions {
    /// Gzip level 4 on every array.
    pub compress: bool,
}

fn h5_create(path: &Path) -> Result<hdf5::File> {
    Ok(hdf5::File::with_options()
        .with_fcpl(|p| p.obj_track_times(false))
        .create(path)?)
}

fn h5_open(path: &Path) -> Result<hdf5::File> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::from(std::io::ErrorKind::NotFound),
        ));
    }
    Ok(hdf5::File::open(path)?)
}

fn put<T: hdf5::H5Type>(
    g: &hdf5::Group,
    name: &str,
    shape: &[usize],
    data: &[T],
    opts: WriteOptions,
) -> Result<()> {
    let mut b = g.new_dataset::<T>().obj_track_times(false);
    if opts.compress && !data.is_empty() {
        b = b.deflate(4);
    }
    let ds = b.shape(shape.to_vec()).create(name)?;
    ds.write_raw(data)?;
    Ok(())
}

fn get<T: hdf5::H5Type>(g: &hdf5::Group, name: &str, shape: &[usize]) -> Result<Vec<T>> {
    if !g.link_exists(name) {
        return Err(Error::Format(format!(
            "missing required dataset `{name}` in {}",
            g.name()
        )));
    }
    let ds = g.dataset(name)?;
    if ds.shape() != shape {
        return Err(Error::Format(format!(
            "dataset `{name}` has shape {:?}, expected {shape:?}",
            ds.shape()
        )));
    }
    Ok(ds.read_raw::<T>()?)
}

fn put_attr<T: hdf5::H5Type>(g: &hdf5::Group, name: &str, values: &[T]) -> Result<()> {
    g.new_attr::<T>()
        .shape([values.len()])
        .create(name)?
        .write_raw(values)?;
    Ok(())
}

fn put_scalar<T: hdf5::H5Type>(g: &hdf5::Group, name: &str, value: T) -> Result<()> {
    g.new_attr::<T>().create(name)?.write_scalar(&value)?;
    Ok(())
}

fn put_str(g: &hdf5::Group, name: &str, value: &str) -> Result<()> {
    let v: VarLenUnicode = value
        .parse()
        .map_err(|e| Error::Argument(format!("attribute `{name}` is not storable: {e}")))?;
    put_scalar(g, name, v)
}

fn attr(g: &hdf5::Group, name: &str) -> Result<hdf5::Attribute> {
    if !g.attr_names()?.iter().any(|n| n == name) {
        return Err(Error::Format(format!(
            "missing required attribute `{name}` on {}",
            g.name()
        )));
    }
    Ok(g.attr(name)?)
}

fn write_sample_group(root: &hdf5::Group, s: &DatasetSample, opts: WriteOptions) -> Result<()> {
    s.validate()?;
    let [nx, ny, nz] = s.dims;
    let vol = [nz, ny, nx];
    let stack = [s.levels(), ny, nx];
    let g = root.create_group(&s.sample_id())?;
    put(&g, "occupancy", &vol, &s.occupancy, opts)?;
    put(&g, "reflection_db", &vol, &s.reflection_db, opts)?;
    put(&g, "transmission_db", &vol, &s.transmission_db, opts)?;
    put(&g, "distance_m", &vol, &s.distance_m, opts)?;
    put(&g, "tx_position_m", &[3], &s.tx_position_m, opts)?;
    put(&g, "fspl_db", &stack, &s.fspl_db, opts)?;
    put(&g, "pathloss_db", &stack, &s.pathloss_db, opts)?;
    if let Some(m) = &s.valid_mask {
        put(&g, "valid_mask", &stack, m, opts)?;
    }
    let m = &s.meta;
    put_str(&g, "scene_id", &m.scene_id)?;
    put_scalar(&g, "tx_id", m.tx_id)?;
    put_scalar(&g, "voxel_size_m", m.voxel_size_m)?;
    put_scalar(&g, "frequency_hz", m.frequency_hz)?;
    put_attr(&g, "origin_m", &m.origin_m)?;
    put_attr(&g, "heights_m", &m.heights_m)?;
    put_scalar(&g, "rotation_k", m.rotation_k)?;
    put_scalar(&g, "format_version", m.format_version)?;
    Ok(())
}

fn read_sample_group(g: &hdf5::Group) -> Result<DatasetSample> {
    let version: u32 = attr(g, "format_version")?.read_scalar()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{} has format_version {version}; this reader understands {FORMAT_VERSION}",
            g.name()
        )));
    }
    let heights_m: Vec<f64> = attr(g, "heights_m")?.read_raw()?;
    let origin: Vec<f64> = attr(g, "origin_m")?.read_raw()?;
    let origin_m: [f64; 3] = origin
        .try_into()
        .map_err(|_| Error::Format("attribute `origin_m` must hold 3 values".into()))?;
    let scene_id: VarLenUnicode = attr(g, "scene_id")?.read_scalar()?;
    let meta = SampleMeta {
        scene_id: scene_id.as_str().to_string(),
        tx_id: attr(g, "tx_id")?.read_scalar()?,
        voxel_size_m: attr(g, "voxel_size_m")?.read_scalar()?,
        frequency_hz: attr(g, "frequency_hz")?.read_scalar()?,
        origin_m,
        heights_m,
        rotation_k: attr(g, "rotation_k")?.read_scalar()?,
        format_version: version,
    };
    if !g.link_exists("occupancy") {
        return Err(Error::Format(format!(
            "missing required dataset `occupancy` in {}",
            g.name()
        )));
    }
    let shape = g.dataset("occupancy")?.shape();
    let [nz, ny, nx]: [usize; 3] = shape
        .clone()
        .try_into()
        .map_err(|_| Error::Format(format!("`occupancy` must be 3-D, got shape {shape:?}")))?;
    let vol = [nz, ny, nx];
    let stack = [meta.heights_m.len(), ny, nx];
    let tx: Vec<f32> = get(g, "tx_position_m", &[3])?;
    let sample = DatasetSample {
        dims: [nx, ny, nz],
        occupancy: get(g, "occupancy", &vol)?,
        reflection_db: get(g, "reflection_db", &vol)?,
        transmission_db: get(g, "transmission_db", &vol)?,
        distance_m: get(g, "distance_m", &vol)?,
        tx_position_m: [tx[0], tx[1], tx[2]],
        fspl_db: get(g, "fspl_db", &stack)?,
        pathloss_db: get(g, "pathloss_db", &stack)?,
        valid_mask: if g.link_exists("valid_mask") {
            Some(get(g, "valid_mask", &stack)?)
        } else {
            None
        },
        meta,
    };
    sample
        .validate()
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(sample)
}

/// Writes a dataset file, replacing any existing one. Samples are written in
/// the given order; ids must be unique.
pub fn write_samples(path: &Path, samples: &[DatasetSample], opts: WriteOptions) -> Result<()> {
    let ids: BTreeSet<String> = samples.iter().map(DatasetSample::sample_id).collect();
    if ids.len() != samples.len() {
        return Err(Error::Argument("duplicate sample ids".into()));
    }
    let file = h5_create(path)?;
    let root = file.create_group("samples")?;
    for s in samples {
        write_sample_group(&root, s, opts)?;
    }
    file.close()?;
    Ok(())
}

pub fn write_sample(path: &Path, sample: &DatasetSample, opts: WriteOptions) -> Result<()> {
    write_samples(path, std::slice::from_ref(sample), opts)
}

fn samples_group(file: &hdf5::File) -> Result<hdf5::Group> {
    if !file.link_exists("samples") {
        return Err(Error::Format(format!(
            "{} has no `samples` group",
            file.filename()
        )));
    }
    Ok(file.group("samples")?)
}

/// Sample ids in a dataset file, sorted.
pub fn list_samples(path: &Path) -> Result<Vec<String>> {
    let file = h5_open(path)?;
    let mut ids = samples_group(&file)?.member_names()?;
    ids.sort();
    Ok(ids)
}

pub fn read_sample(path: &Path, id: &str) -> Result<DatasetSample> {
    let file = h5_open(path)?;
    let root = samples_group(&file)?;
    if !root.link_exists(id) {
        return Err(Error::Format(format!(
            "no sample `{id}` in {}",
            path.display()
        )));
    }
    read_sample_group(&root.group(id)?)
}

/// Every sample in a file, sorted by id.
pub fn read_samples(path: &Path) -> Result<Vec<DatasetSample>> {
    let file = h5_open(path)?;
    let root = samples_group(&file)?;
    let mut ids = root.member_names()?;
    ids.sort();
    ids.iter()
        .map(|id| read_sample_group(&root.group(id)?))
        .collect()
}

/// Stores a voxel grid with its material table under `/grid`.
pub fn write_grid(path: &Path, grid: &VoxelGrid, table: &MaterialTable) -> Result<()> {
    let file = h5_create(path)?;
    let g = file.create_group("grid")?;
    let [nx, ny, nz] = grid.dims();
    let opts = WriteOptions { compress: true };
    put(&g, "occupancy", &[nz, ny, nx], grid.occupancy(), opts)?;
    put(&g, "material", &[nz, ny, nx], grid.materials(), opts)?;
    put_attr(&g, "origin_m", &grid.origin().to_array())?;
    put_scalar(&g, "voxel_size_m", grid.voxel_size())?;
    put_str(&g, "materials_json", &table.to_json())?;
    put_scalar(&g, "format_version", FORMAT_VERSION)?;
    file.close()?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<(VoxelGrid, MaterialTable)> {
    let file = h5_open(path)?;
    if !file.link_exists("grid") {
        return Err(Error::Format(format!(
            "{} has no `grid` group",
            path.display()
        )));
    }
    let g = file.group("grid")?;
    let version: u32 = attr(&g, "format_version")?.read_scalar()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "grid format_version {version} is not {FORMAT_VERSION}"
        )));
    }
    let table_json: VarLenUnicode = attr(&g, "materials_json")?.read_scalar()?;
    let table = MaterialTable::from_json(table_json.as_str())?;
    let origin: Vec<f64> = attr(&g, "origin_m")?.read_raw()?;
    if origin.len() != 3 {
        return Err(Error::Format(
            "attribute `origin_m` must hold 3 values".into(),
        ));
    }
    let voxel_size: f64 = attr(&g, "voxel_size_m")?.read_scalar()?;
    if !g.link_exists("occupancy") {
        return Err(Error::Format(
            "missing required dataset `occupancy` in /grid".into(),
        ));
    }
    let shape = g.dataset("occupancy")?.shape();
    if shape.len() != 3 {
        return Err(Error::Format(format!(
            "`occupancy` must be 3-D, got {shape:?}"
        )));
    }
    let occupancy = get::<u8>(&g, "occupancy", &shape)?;
    let material = get::<u8>(&g, "material", &shape)?;
    if let Some(&m) = material.iter().max() {
        if m as usize >= table.len() {
            return Err(Error::Format(format!("material id {m} has no table entry")));
        }
    }
    let grid = VoxelGrid::from_parts(
        Vec3::new(origin[0], origin[1], origin[2]),
        voxel_size,
        [shape[2], shape[1], shape[0]],
        occupancy,
        material,
    )
    .map_err(|e| Error::Format(e.to_string()))?;
    Ok((grid, table))
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SplitEntry {
    pub scene_id: String,
    pub sample_id: String,
    pub tx_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<SplitEntry>,
    pub val: Vec<SplitEntry>,
    pub test: Vec<SplitEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitOptions {
    /// Scenes held out as test; when empty, `test_scene_count` are drawn.
    pub test_scenes: Vec<String>,
    pub test_scene_count: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            test_scenes: Vec::new(),
            test_scene_count: 1,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Splits samples at the scene level: held-out scenes form the test set and
/// every other scene's transmitters divide into train and validation. All
/// rotations of a transmitter follow it.
pub fn split_scenes(entries: &[SplitEntry], opts: &SplitOptions) -> Result<SplitManifest> {
    let mut by_scene: BTreeMap<&str, BTreeMap<u32, Vec<&SplitEntry>>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for e in entries {
        if !seen.insert(&e.sample_id) {
            return Err(Error::Argument(format!(
                "sample `{}` listed twice",
                e.sample_id
            )));
        }
        by_scene
            .entry(&e.scene_id)
            .or_default()
            .entry(e.tx_id)
            .or_default()
            .push(e);
    }
    if by_scene.len() < 2 {
        return Err(Error::Argument(format!(
            "splitting needs at least 2 scenes, got {}",
            by_scene.len()
        )));
    }
    if !(0.0..1.0).contains(&opts.val_fraction) {
        return Err(Error::Argument(format!(
            "val fraction {} must be in [0, 1)",
            opts.val_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let test: BTreeSet<&str> = if opts.test_scenes.is_empty() {
        if opts.test_scene_count == 0 || opts.test_scene_count >= by_scene.len() {
            return Err(Error::Argument(format!(
                "cannot hold out {} of {} scenes and keep both train and test non-empty",
                opts.test_scene_count,
                by_scene.len()
            )));
        }
        let mut scenes: Vec<&str> = by_scene.keys().copied().collect();
        scenes.shuffle(&mut rng);
        scenes.into_iter().take(opts.test_scene_count).collect()
    } else {
        for s in &opts.test_scenes {
            if !by_scene.contains_key(s.as_str()) {
                return Err(Error::Argument(format!(
                    "held-out scene `{s}` has no samples"
                )));
            }
        }
        let t: BTreeSet<&str> = opts.test_scenes.iter().map(String::as_str).collect();
        if t.len() >= by_scene.len() {
            return Err(Error::Argument(
                "every scene is held out; nothing left to train on".into(),
            ));
        }
        t
    };
    let mut m = SplitManifest::default();
    for (scene, txs) in &by_scene {
        if test.contains(scene) {
            m.test.extend(txs.values().flatten().map(|e| (*e).clone()));
            continue;
        }
        let mut ids: Vec<u32> = txs.keys().copied().collect();
        ids.shuffle(&mut rng);
        // a scene with two or more transmitters always lends one to val
        let mut n_val = (ids.len() as f64 * opts.val_fraction).round() as usize;
        if opts.val_fraction > 0.0 {
            n_val = n_val.max(1);
        }
        let n_val = n_val.min(ids.len() - 1);
        for (i, id) in ids.iter().enumerate() {
            let bucket = if i < n_val { &mut m.val } else { &mut m.train };
            bucket.extend(txs[id].iter().map(|e| (*e).clone()));
        }
    }
    for list in [&mut m.train, &mut m.val, &mut m.test] {
        list.sort();
    }
    Ok(m)
}

impl SplitManifest {
    /// Checks the scene/transmitter separation rules.
    pub fn check(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        let train_scenes: BTreeSet<&str> = self.train.iter().map(|e| e.scene_id.as_str()).collect();
        let train_tx: BTreeSet<(&str, u32)> = self
            .train
            .iter()
            .map(|e| (e.scene_id.as_str(), e.tx_id))
            .collect();
        for e in &self.val {
            if !train_scenes.contains(e.scene_id.as_str()) {
                return fail(format!(
                    "val scene `{}` is not a training scene",
                    e.scene_id
                ));
            }
            if train_tx.contains(&(e.scene_id.as_str(), e.tx_id)) {
                return fail(format!(
                    "val sample `{}` reuses a training transmitter",
                    e.sample_id
                ));
            }
        }
        for e in &self.test {
            if train_scenes.contains(e.scene_id.as_str()) {
                return fail(format!(
                    "test scene `{}` also appears in training",
                    e.scene_id
                ));
            }
        }
        let mut ids = BTreeSet::new();
        for e in self.train.iter().chain(&self.val).chain(&self.test) {
            if !ids.insert(&e.sample_id) {
                return fail(format!("sample `{}` appears twice", e.sample_id));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl From<&DatasetSample> for SplitEntry {
    fn from(s: &DatasetSample) -> Self {
        SplitEntry {
            scene_id: s.meta.scene_id.clone(),
            sample_id: s.sample_id(),
            tx_id: s.meta.tx_id,
        }
    }
}

/// Everything `dataset build` needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    pub scenes: usize,
    pub tx_per_scene: usize,
    /// Quarter turns of augmentation, e.g. `[1, 2, 3]`.
    pub rotations: Vec<u8>,
    pub seed: u64,
    pub voxel_size_m: f64,
    pub scene: SceneParams,
    pub scan: ScanOptions,
    pub sim: SimConfig,
    pub compress: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            scenes: 2,
            tx_per_scene: 5,
            rotations: vec![1, 2, 3],
            seed: 0,
            voxel_size_m: crate::voxelizer::DEFAULT_VOXEL_SIZE,
            scene: SceneParams::default(),
            scan: ScanOptions::default(),
            sim: SimConfig::default(),
            compress: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub scene_id: String,
    pub seed: u64,
    pub dims: [usize; 3],
    /// Occupancy IoU of the scanned grid against the exact rasterization.
    pub scan_iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub path: PathBuf,
    pub samples: usize,
    pub scenes: Vec<SceneSummary>,
}

/// Derives a per-purpose seed so streams for different scenes never overlap.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Generates, scans, voxelizes and simulates `opts.scenes` scenes and writes
/// originals plus rotated copies to `path`.
pub fn build_dataset(
    path: &Path,
    table: &MaterialTable,
    opts: &BuildOptions,
) -> Result<BuildReport> {
    if opts.scenes == 0 || opts.tx_per_scene == 0 {
        return Err(Error::Argument(
            "need at least one scene and one transmitter".into(),
        ));
    }
    let mut samples = Vec::new();
    let mut summaries = Vec::new();
    for s in 0..opts.scenes {
        let scene_seed = derive_seed(opts.seed, 2 * s as u64);
        let scene_id = format!("scene_{s:03}");
        let scene = gen_scene(scene_seed, &opts.scene)?;
        let plan = ScanPlan::orbit(&scene, &opts.scan)?;
        let frames = render_views(&scene, &plan, RenderOptions::default())?;
        let (scanned, _) = voxelize_scan(
            &frames,
            &scene.vocabulary(),
            table,
            &scene.bounds,
            opts.voxel_size_m,
            VoxelizeOptions::default(),
        )?;
        let truth = scene.rasterize(table, opts.voxel_size_m)?;
        log::info!(
            "{scene_id}: {} elements, grid {:?}",
            scene.elements.len(),
            truth.dims()
        );
        // transmitters must be free in both grids
        let mut both = truth.clone();
        for i in 0..both.len() {
            if scanned.occupancy()[i] != 0 && both.occupancy()[i] == 0 {
                both.set(both.unlinear(i), Some(MaterialId(0)));
            }
        }
        let txs = sample_tx(
            &both,
            opts.tx_per_scene,
            derive_seed(opts.seed, 2 * s as u64 + 1),
            TX_HEIGHT_RANGE,
        )?;
        for (t, tx) in txs.iter().enumerate() {
            let sample =
                build_sample(&scanned, &truth, table, *tx, &opts.sim, &scene_id, t as u32)?;
            let rotated = augment(std::slice::from_ref(&sample), &opts.rotations)?;
            samples.push(sample);
            samples.extend(rotated);
        }
        summaries.push(SceneSummary {
            scene_id,
            seed: scene_seed,
            dims: truth.dims(),
            scan_iou: scanned.occupancy_iou(&truth)?,
        });
    }
    write_samples(
        path,
        &samples,
        WriteOptions {
            compress: opts.compress,
        },
    )?;
    Ok(BuildReport {
        path: path.to_path_buf(),
        samples: samples.len(),
        scenes: summaries,
    })
}
