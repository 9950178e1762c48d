use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "voxelray",
    version,
    about = "Voxel scene features and path-loss ground truth for indoor radio"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads; falls back to VOXELRAY_THREADS, then all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON object of flag values for the subcommand; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a procedural indoor scene as JSON.
    Scenegen(ScenegenArgs),
    /// Render virtual RGB-D scans of a scene into a frame directory.
    Scan(ScanArgs),
    /// Build a voxel grid from scanned frames or directly from a scene.
    Voxelize(VoxelizeArgs),
    /// Run the propagation oracle for one transmitter and write a sample.
    Simulate(SimulateArgs),
    /// Dataset-level commands.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Write a scene-level train/val/test manifest for a dataset file.
    Split(SplitArgs),
    /// Score predicted path loss against ground truth.
    Eval(EvalArgs),
    /// Render one height slice of a sample as a PNG heatmap.
    Render(RenderArgs),
    /// Print material features at a frequency and the reference comparison.
    Materials(MaterialsArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Generate, scan, voxelize and simulate scenes end to end.
    Build(BuildArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ScenegenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub rooms: usize,
    /// Furniture pieces per square meter of floor.
    #[arg(long, default_value_t = 0.12)]
    pub furniture_density: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanOpts {
    #[arg(long, default_value_t = 6)]
    pub views_per_room: usize,
    /// Image width and height in pixels.
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub pitch_deg: f64,
    #[arg(long, default_value_t = 100.0)]
    pub hfov_deg: f64,
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    pub camera_height: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    pub scan: ScanOpts,
    /// Output frame directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VoxelizeArgs {
    /// Frame directory written by `scan`.
    #[arg(long, required_unless_present = "scene", conflicts_with = "scene")]
    pub frames: Option<PathBuf>,
    /// Scene JSON, rasterized exactly.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Grid bounds `x0,y0,z0,x1,y1,z1`; defaults to the bounds stored with the frames.
    #[arg(long, value_parser = parse_bounds, allow_negative_numbers = true)]
    pub bounds: Option<[f64; 6]>,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub voxel_size: f64,
    /// Material table JSON; defaults to the built-in table.
    #[arg(long)]
    pub materials: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimOpts {
    #[arg(long, default_value_t = 3.5, allow_negative_numbers = true)]
    pub freq_ghz: f64,
    /// Receiver heights `start:stop:step`, stop inclusive.
    #[arg(long, default_value = "0.6:1.6:0.1", value_parser = parse_heights)]
    pub heights: Heights,
    /// Direct path only.
    #[arg(long)]
    pub no_reflections: bool,
    #[arg(long, default_value_t = 64)]
    pub max_surfaces: usize,
    #[arg(long, default_value_t = 160.0, allow_negative_numbers = true)]
    pub max_path_loss_db: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Grid HDF5 written by `voxelize`.
    #[arg(long)]
    pub grid: PathBuf,
    /// Transmitter position `x,y,z` in meters.
    #[arg(long, value_parser = parse_point, allow_negative_numbers = true)]
    pub tx: [f64; 3],
    #[command(flatten)]
    pub sim: SimOpts,
    #[arg(long, default_value = "scene_000")]
    pub scene_id: String,
    #[arg(long, default_value_t = 0)]
    pub tx_id: u32,
    /// Store arrays uncompressed.
    #[arg(long)]
    pub no_compress: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    #[arg(long, default_value_t = 2)]
    pub scenes: usize,
    #[arg(long, default_value_t = 5)]
    pub tx_per_scene: usize,
    /// Augmentation angles in degrees, multiples of 90.
    #[arg(long, default_value = "90,180,270", value_parser = parse_rotations)]
    pub rotations: Rotations,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub voxel_size: f64,
    #[arg(long, default_value_t = 2)]
    pub rooms: usize,
    #[command(flatten)]
    pub scan: ScanOpts,
    #[command(flatten)]
    pub sim: SimOpts,
    #[arg(long)]
    pub materials: Option<PathBuf>,
    #[arg(long)]
    pub no_compress: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comma-separated scene ids held out as test.
    #[arg(long, value_delimiter = ',')]
    pub test_scenes: Vec<String>,
    /// Scenes drawn for test when `--test-scenes` is absent.
    #[arg(long, default_value_t = 1)]
    pub test_scene_count: usize,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskArg {
    All,
    OracleValid,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value_t = MaskArg::All)]
    pub mask: MaskArg,
    /// Report JSON path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-height CSV path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldArg {
    Pathloss,
    Fspl,
}

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    /// Dataset or sample HDF5.
    #[arg(long)]
    pub input: PathBuf,
    /// Sample id; defaults to the first sample in the file.
    #[arg(long)]
    pub id: Option<String>,
    /// Receiver height in meters; the nearest stored slice is drawn.
    #[arg(long, default_value_t = 1.2, allow_negative_numbers = true)]
    pub height: f64,
    #[arg(long, value_enum, default_value_t = FieldArg::Pathloss)]
    pub field: FieldArg,
    #[arg(long, default_value_t = 40.0, allow_negative_numbers = true)]
    pub vmin_db: f64,
    #[arg(long, default_value_t = 160.0, allow_negative_numbers = true)]
    pub vmax_db: f64,
    /// Paint cells the oracle left unresolved gray.
    #[arg(long)]
    pub mark_invalid: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MaterialsArgs {
    #[arg(long, default_value_t = 3.5, allow_negative_numbers = true)]
    pub freq_ghz: f64,
    #[arg(long)]
    pub materials: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heights(pub Vec<f64>);

/// Quarter-turn counts parsed from a degree list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rotations(pub Vec<u8>);

fn parse_floats(text: &str, sep: char, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = text
        .split(sep)
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!(
            "expected {n} values separated by `{sep}`, got {}",
            v.len()
        ));
    }
    Ok(v)
}

pub fn parse_point(text: &str) -> Result<[f64; 3], String> {
    let v = parse_floats(text, ',', 3)?;
    Ok([v[0], v[1], v[2]])
}

pub fn parse_bounds(text: &str) -> Result<[f64; 6], String> {
    let v = parse_floats(text, ',', 6)?;
    Ok([v[0], v[1], v[2], v[3], v[4], v[5]])
}

pub fn parse_heights(text: &str) -> Result<Heights, String> {
    let v = parse_floats(text, ':', 3)?;
    voxelray::simulator::height_range(v[0], v[1], v[2])
        .map(Heights)
        .map_err(|e| e.to_string())
}

pub fn parse_rotations(text: &str) -> Result<Rotations, String> {
    voxelray::dataset::parse_rotations(text)
        .map(Rotations)
        .map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_parsers() {
        assert_eq!(parse_point("2.0,3.0,1.5").unwrap(), [2.0, 3.0, 1.5]);
        assert!(parse_point("1,2").is_err());
        assert_eq!(parse_heights("0.6:1.6:0.1").unwrap().0.len(), 11);
        assert!(parse_heights("1:0:0.1").is_err());
        assert!(parse_bounds("0,0,0,1,1").is_err());
        assert_eq!(parse_rotations("270,90").unwrap().0, vec![3, 1]);
        assert!(parse_rotations("45").is_err());
    }
}
