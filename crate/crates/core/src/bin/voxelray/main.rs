mod args;
mod render;

use std::ffi::OsString;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;

use args::{BuildArgs, Cli, Command, DatasetCommand, FieldArg, MaskArg, ScanOpts, SimOpts};
use voxelray::dataset::{self, BuildOptions, SplitEntry, SplitOptions, WriteOptions};
use voxelray::evaluation::{self, MaskMode};
use voxelray::materials::MaterialTable;
use voxelray::scenegen::{
    self, RenderOptions, ScanOptions, ScanPlan, SceneDescription, SceneParams,
};
use voxelray::sensing;
use voxelray::simulator::SimConfig;
use voxelray::voxelizer::{self, VoxelizeOptions};
use voxelray::{Aabb, Error, Result, Vec3};

const THREADS_ENV: &str = "VOXELRAY_THREADS";
/// Written next to the frames by `scan` so `voxelize` knows the grid extent.
const BOUNDS_FILE: &str = "scene_bounds.json";

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_DOMAIN: u8 = 4;

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match inject_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let threads = match resolve_threads(cli.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_DOMAIN);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_DOMAIN
            })
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> std::result::Result<Option<usize>, String> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| format!("{THREADS_ENV}=`{v}` is not a count"))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err("thread count must be at least 1".into());
    }
    Ok(n)
}

/// Splices the flat JSON object named by `--config` into argv right after the
/// subcommand, so explicit flags that follow take precedence.
fn inject_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let text: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let mut config = None;
    for (i, a) in text.iter().enumerate() {
        if a == "--config" {
            config = text.get(i + 1).cloned();
        } else if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        }
    }
    let Some(config) = config else {
        return Ok(argv);
    };
    // the subcommand path ends at the first positional token (two for `dataset`)
    let mut at = None;
    let mut i = 1;
    while i < text.len() {
        let a = &text[i];
        if a == "--config" || a == "--threads" {
            i += 2;
            continue;
        }
        if !a.starts_with('-') {
            at = Some(if a == "dataset" { i + 2 } else { i + 1 });
            break;
        }
        i += 1;
    }
    let Some(at) = at.filter(|&a| a <= argv.len()) else {
        return Ok(argv);
    };

    let path = Path::new(&config);
    let body = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let value: serde_json::Value = serde_json::from_str(&body)?;
    let serde_json::Value::Object(map) = value else {
        return Err(Error::Format(format!(
            "{config}: config must be a JSON object"
        )));
    };
    let mut tokens = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &serde_json::Value| match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            other => Err(Error::Format(format!(
                "{config}: `{key}` has unsupported value {other}"
            ))),
        };
        match &v {
            serde_json::Value::Null | serde_json::Value::Bool(false) => {}
            serde_json::Value::Bool(true) => tokens.push(flag),
            serde_json::Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_>>()?;
                tokens.push(flag);
                tokens.push(parts.join(","));
            }
            other => {
                tokens.push(flag);
                tokens.push(scalar(other)?);
            }
        }
    }
    let mut out = argv;
    out.splice(at..at, tokens.into_iter().map(OsString::from));
    Ok(out)
}

/// Prints the fully resolved arguments of a run to stderr.
fn echo(command: &str, args: &impl Serialize) {
    let json = serde_json::to_string(args).unwrap_or_else(|e| format!("<unserializable: {e}>"));
    eprintln!("voxelray {command} {json}");
}

fn load_table(path: Option<&Path>) -> Result<MaterialTable> {
    match path {
        Some(p) => MaterialTable::load(p),
        None => Ok(MaterialTable::builtin()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

impl ScanOpts {
    fn options(&self) -> ScanOptions {
        ScanOptions {
            views_per_room: self.views_per_room,
            camera_height: self.camera_height,
            pitch_deg: self.pitch_deg,
            width: self.resolution,
            height: self.resolution,
            hfov_deg: self.hfov_deg,
        }
    }
}

impl SimOpts {
    fn config(&self) -> SimConfig {
        SimConfig {
            frequency_hz: self.freq_ghz * 1e9,
            heights_m: self.heights.0.clone(),
            enable_reflections: !self.no_reflections,
            max_path_loss_db: self.max_path_loss_db,
            max_first_order_surfaces: self.max_surfaces,
        }
    }
}

impl BuildArgs {
    fn options(&self) -> BuildOptions {
        BuildOptions {
            scenes: self.scenes,
            tx_per_scene: self.tx_per_scene,
            rotations: self.rotations.0.clone(),
            seed: self.seed,
            voxel_size_m: self.voxel_size,
            scene: SceneParams {
                rooms: self.rooms,
                ..SceneParams::default()
            },
            scan: self.scan.options(),
            sim: self.sim.config(),
            compress: !self.no_compress,
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Scenegen(a) => {
            echo("scenegen", &a);
            let params = SceneParams {
                rooms: a.rooms,
                furniture_density: a.furniture_density,
                ..SceneParams::default()
            };
            let scene = scenegen::gen_scene(a.seed, &params)?;
            write_text(&a.out, &scene.to_json())?;
            println!(
                "wrote {} ({} elements, seed {})",
                a.out.display(),
                scene.elements.len(),
                a.seed
            );
        }
        Command::Scan(a) => {
            echo("scan", &a);
            let scene = SceneDescription::load(&a.scene)?;
            let plan = ScanPlan::orbit(&scene, &a.scan.options())?;
            let frames = scenegen::render_views(&scene, &plan, RenderOptions::default())?;
            sensing::write_frames(&a.out, &frames, &scene.vocabulary())?;
            write_text(
                &a.out.join(BOUNDS_FILE),
                &serde_json::to_string_pretty(&scene.bounds)?,
            )?;
            println!("wrote {} views to {}", frames.len(), a.out.display());
        }
        Command::Voxelize(a) => {
            echo("voxelize", &a);
            let table = load_table(a.materials.as_deref())?;
            let bounds_flag = a
                .bounds
                .map(|b| Aabb::new(Vec3::new(b[0], b[1], b[2]), Vec3::new(b[3], b[4], b[5])));
            let grid = match (&a.frames, &a.scene) {
                (Some(dir), _) => {
                    let (frames, vocabulary) = sensing::read_frames(dir)?;
                    let bounds = match bounds_flag {
                        Some(b) => b,
                        None => {
                            let p = dir.join(BOUNDS_FILE);
                            let text = fs::read_to_string(&p).map_err(|e| Error::Io {
                                path: p.clone(),
                                source: e,
                            })?;
                            serde_json::from_str(&text)?
                        }
                    };
                    let (grid, stats) = voxelizer::voxelize_scan(
                        &frames,
                        &vocabulary,
                        &table,
                        &bounds,
                        a.voxel_size,
                        VoxelizeOptions::default(),
                    )?;
                    log::info!("{stats:?}");
                    grid
                }
                (None, Some(scene)) => {
                    SceneDescription::load(scene)?.rasterize(&table, a.voxel_size)?
                }
                (None, None) => unreachable!("clap requires one source"),
            };
            dataset::write_grid(&a.out, &grid, &table)?;
            println!(
                "wrote {} (dims {:?}, {} occupied)",
                a.out.display(),
                grid.dims(),
                grid.occupied_count()
            );
        }
        Command::Simulate(a) => {
            echo("simulate", &a);
            let (grid, table) = dataset::read_grid(&a.grid)?;
            let cfg = a.sim.config();
            let tx = Vec3::new(a.tx[0], a.tx[1], a.tx[2]);
            let sample =
                dataset::build_sample(&grid, &grid, &table, tx, &cfg, &a.scene_id, a.tx_id)?;
            dataset::write_sample(
                &a.out,
                &sample,
                WriteOptions {
                    compress: !a.no_compress,
                },
            )?;
            println!(
                "wrote {} ({}, {} height slices)",
                a.out.display(),
                sample.sample_id(),
                sample.levels()
            );
        }
        Command::Dataset {
            command: DatasetCommand::Build(a),
        } => {
            echo("dataset build", &a);
            let table = load_table(a.materials.as_deref())?;
            let opts = a.options();
            let report = dataset::build_dataset(&a.out, &table, &opts)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Split(a) => {
            echo("split", &a);
            let entries: Vec<SplitEntry> = dataset::read_samples(&a.dataset)?
                .iter()
                .map(SplitEntry::from)
                .collect();
            let opts = SplitOptions {
                test_scenes: a.test_scenes.clone(),
                test_scene_count: a.test_scene_count,
                val_fraction: a.val_fraction,
                seed: a.seed,
            };
            let manifest = dataset::split_scenes(&entries, &opts)?;
            write_text(&a.out, &manifest.to_json())?;
            println!(
                "wrote {} (train {}, val {}, test {})",
                a.out.display(),
                manifest.train.len(),
                manifest.val.len(),
                manifest.test.len()
            );
        }
        Command::Eval(a) => {
            echo("eval", &a);
            let mode = match a.mask {
                MaskArg::All => MaskMode::All,
                MaskArg::OracleValid => MaskMode::OracleValid,
            };
            let report = evaluation::evaluate_files(&a.pred, &a.truth, mode)?;
            match &a.out {
                Some(p) => write_text(p, &report.to_json())?,
                None => println!("{}", report.to_json()),
            }
            if let Some(p) = &a.csv {
                write_text(p, &report.to_csv())?;
            }
        }
        Command::Render(a) => {
            echo("render", &a);
            let id = match &a.id {
                Some(id) => id.clone(),
                None => dataset::list_samples(&a.input)?
                    .into_iter()
                    .next()
                    .ok_or_else(|| {
                        Error::Format(format!("{} holds no samples", a.input.display()))
                    })?,
            };
            let s = dataset::read_sample(&a.input, &id)?;
            let level = s
                .meta
                .heights_m
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - a.height).abs().total_cmp(&(y.1 - a.height).abs()))
                .map(|(l, _)| l)
                .ok_or_else(|| Error::Format(format!("sample `{id}` has no height slices")))?;
            let [nx, ny, _] = s.dims;
            let cells = nx * ny;
            let range = level * cells..(level + 1) * cells;
            let values = match a.field {
                FieldArg::Pathloss => &s.pathloss_db[range.clone()],
                FieldArg::Fspl => &s.fspl_db[range.clone()],
            };
            let invalid = match (&s.valid_mask, a.mark_invalid) {
                (Some(m), true) => Some(&m[range]),
                _ => None,
            };
            let height = s.meta.heights_m[level];
            let slice = render::Slice {
                nx,
                ny,
                values,
                invalid,
            };
            let text = [("sample_id", id.clone()), ("height_m", height.to_string())];
            render::write_png(&a.out, &slice, a.vmin_db, a.vmax_db, &text)?;
            println!("wrote {} ({id} at {height} m, {nx}x{ny})", a.out.display());
        }
        Command::Materials(a) => {
            echo("materials", &a);
            let table = load_table(a.materials.as_deref())?;
            let rows = evaluation::reference_report(&table, a.freq_ghz)?;
            print!("{}", evaluation::format_reference_report(&rows));
        }
    }
    Ok(())
}
