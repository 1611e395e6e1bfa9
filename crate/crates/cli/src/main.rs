//! `hawk`: simulate scenes, generate datasets, score depth-maps, render images.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hawk_core::config::RunConfig;
use hawk_core::dataset::{self, DatasetConfig, VariationConfig};
use hawk_core::format::{self, DEPTHMAP_MAGIC, HEATMAP_MAGIC};
use hawk_core::groundtruth::DepthMap2D;
use hawk_core::imager::{radar_depth_map, simulate_sample};
use hawk_core::perception::{evaluate, summarize, SceneAnnotations};
use hawk_core::scene::load_scene;
use hawk_core::HawkError;
use log::info;
use serde_json::json;

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_MISMATCH: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "hawk", version, about = "mmWave FMCW/SAR vehicle imaging simulator")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "HAWK_THREADS")]
    threads: Option<usize>,
    /// Log more to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scene; writes <name>.hwke, <name>.hwkd and <name>.ann.json.
    Simulate(SimulateArgs),
    /// Generate a dataset of single-vehicle samples with a manifest.
    Dataset(DatasetArgs),
    /// Score a depth-map (or a heat-map's radar projection) against annotations.
    Metrics(MetricsArgs),
    /// Render a .hwke heat-map or .hwkd depth-map as PNG.
    Render(RenderArgs),
    /// Assign the samples of a manifest to k folds.
    Kfold(KfoldArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Run config JSON (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scene JSON.
    #[arg(long)]
    scene: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file stem; defaults to the scene file stem.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct DatasetArgs {
    /// Run config JSON (defaults apply when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pose variation JSON (defaults apply when omitted).
    #[arg(long)]
    variation: Option<PathBuf>,
    /// OBJ mesh file, or a directory of them; repeatable.
    #[arg(long, required = true)]
    mesh: Vec<PathBuf>,
    #[arg(long)]
    count: usize,
    /// Dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also split into k folds.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Candidate .hwkd depth-map, or .hwke heat-map scored through its radar projection.
    #[arg(long, conflicts_with = "manifest", requires = "annotations")]
    candidate: Option<PathBuf>,
    /// Annotations JSON for --candidate.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Score every sample of a dataset; prints JSON lines and a summary line.
    #[arg(long, required_unless_present = "candidate")]
    manifest: Option<PathBuf>,
    /// Directory of <id>.hwkd predictions for --manifest; defaults to radar projections.
    #[arg(long, requires = "manifest")]
    predictions: Option<PathBuf>,
    /// Run config for radar projections of --candidate heat-maps.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// .hwke or .hwkd file.
    #[arg(long)]
    input: PathBuf,
    /// Output PNG.
    #[arg(long)]
    out: PathBuf,
    /// Write depth-maps as 16-bit millimetre PNG instead of colour.
    #[arg(long)]
    mm16: bool,
}

#[derive(Args)]
struct KfoldArgs {
    /// Manifest file or dataset directory; rewritten in place.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(e: &HawkError) -> u8 {
    match e {
        HawkError::Config { .. } | HawkError::UnambiguousRange { .. } | HawkError::Scene(_) => EXIT_CONFIG,
        HawkError::DimensionMismatch(_) | HawkError::Degenerate(_) => EXIT_MISMATCH,
        _ => EXIT_IO,
    }
}

fn load_config(path: Option<&Path>) -> hawk_core::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> hawk_core::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| HawkError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HawkError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn write_json_file<T: serde::Serialize>(path: &Path, value: &T) -> hawk_core::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    format::write_atomic(path, text.as_bytes())
}

fn simulate(a: &SimulateArgs) -> hawk_core::Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg = cfg.with_seed(s);
    }
    let scene = load_scene(&a.scene)?;
    let sample = simulate_sample(&scene, &cfg)?;
    let stem = a
        .name
        .clone()
        .or_else(|| a.scene.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "sample".into());
    std::fs::create_dir_all(&a.out).map_err(|e| HawkError::io(&a.out, e))?;
    let heatmap = a.out.join(format!("{stem}.hwke"));
    let depthmap = a.out.join(format!("{stem}.hwkd"));
    format::write_heatmap(&heatmap, &sample.heatmap)?;
    format::write_depthmap(&depthmap, &sample.depth)?;
    let annotations = match &sample.annotations {
        Some(ann) => {
            let p = a.out.join(format!("{stem}.ann.json"));
            write_json_file(&p, ann)?;
            Some(p)
        }
        None => None,
    };
    println!(
        "{}",
        json!({
            "heatmap": heatmap,
            "depthmap": depthmap,
            "annotations": annotations,
            "peak_power": sample.peak_power,
            "valid_pixels": sample.valid_pixels(),
            "reflectors": sample.reflectors.len(),
            "config_hash": cfg.hash(),
        })
    );
    Ok(())
}

fn mesh_paths(inputs: &[PathBuf]) -> hawk_core::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| HawkError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case("obj")))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn generate(a: &DatasetArgs) -> hawk_core::Result<()> {
    let variation: VariationConfig = match &a.variation {
        Some(p) => read_json(p).map_err(|e| match e {
            HawkError::Parse { message, .. } => HawkError::config("variation", message),
            other => other,
        })?,
        None => VariationConfig::default(),
    };
    let cfg = DatasetConfig {
        run: load_config(a.config.as_deref())?,
        variation,
        meshes: mesh_paths(&a.mesh)?,
        count: a.count,
        seed: a.seed,
    };
    let mut manifest = dataset::generate_dataset(&cfg, &a.out)?;
    if let Some(k) = a.k {
        manifest = dataset::split_kfold(&manifest, k, a.seed)?;
        dataset::write_manifest(&a.out, &manifest)?;
    }
    println!(
        "{}",
        json!({
            "manifest": a.out.join(dataset::MANIFEST_FILE),
            "samples": manifest.samples.len(),
            "skipped": manifest.skipped.len(),
            "config_hash": manifest.config_hash,
        })
    );
    Ok(())
}

/// Reads a depth-map, or projects a heat-map to the radar depth-map.
fn load_candidate(path: &Path, cfg: &RunConfig) -> hawk_core::Result<DepthMap2D> {
    let bytes = std::fs::read(path).map_err(|e| HawkError::io(path, e))?;
    if bytes.starts_with(HEATMAP_MAGIC) {
        let h = format::read_heatmap(path)?;
        Ok(radar_depth_map(&h, cfg.radar_threshold_db, cfg.depth_upscale))
    } else {
        format::read_depthmap(path)
    }
}

fn metrics(a: &MetricsArgs) -> hawk_core::Result<()> {
    if let Some(candidate) = &a.candidate {
        let cfg = load_config(a.config.as_deref())?;
        let ann_path = a.annotations.as_ref().expect("clap requires --annotations");
        let ann: SceneAnnotations = read_json(ann_path)?;
        let report = evaluate(&load_candidate(candidate, &cfg)?, &ann)?;
        println!("{}", serde_json::to_string(&report).expect("serializable"));
        return Ok(());
    }
    let manifest_path = a.manifest.as_ref().expect("clap requires --manifest");
    let manifest = dataset::read_manifest(manifest_path)?;
    let dir = if manifest_path.is_dir() {
        manifest_path.clone()
    } else {
        manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    let run = &manifest.config.run;
    let mut reports = Vec::with_capacity(manifest.samples.len());
    for s in &manifest.samples {
        let candidate = match &a.predictions {
            Some(p) => format::read_depthmap(&p.join(format!("{}.hwkd", dataset::sample_stem(s.id))))?,
            None => radar_depth_map(
                &format::read_heatmap(&dir.join(&s.heatmap))?,
                run.radar_threshold_db,
                run.depth_upscale,
            ),
        };
        let ann: SceneAnnotations = read_json(&dir.join(&s.annotations))?;
        let report = evaluate(&candidate, &ann)?;
        println!("{}", json!({ "id": s.id, "report": report }));
        reports.push(report);
    }
    println!("{}", json!({ "summary": summarize(&reports) }));
    Ok(())
}

fn render(a: &RenderArgs) -> hawk_core::Result<()> {
    let bytes = std::fs::read(&a.input).map_err(|e| HawkError::io(&a.input, e))?;
    if bytes.starts_with(HEATMAP_MAGIC) {
        format::write_heatmap_png(&a.out, &format::decode_heatmap(&bytes)?)
    } else if bytes.starts_with(DEPTHMAP_MAGIC) {
        let d = format::decode_depthmap(&bytes)?;
        if a.mm16 {
            format::write_depthmap_png16(&a.out, &d)
        } else {
            format::write_depthmap_png(&a.out, &d)
        }
    } else {
        Err(HawkError::Format {
            what: "input",
            message: format!("{} is neither a heat-map nor a depth-map", a.input.display()),
        })
    }?;
    info!("wrote {}", a.out.display());
    Ok(())
}

fn kfold(a: &KfoldArgs) -> hawk_core::Result<()> {
    let manifest = dataset::split_kfold(&dataset::read_manifest(&a.manifest)?, a.k, a.seed)?;
    let path = if a.manifest.is_dir() {
        a.manifest.join(dataset::MANIFEST_FILE)
    } else {
        a.manifest.clone()
    };
    write_json_file(&path, &manifest)?;
    let sizes: Vec<usize> = manifest.folds.iter().flat_map(|f| f.folds.iter().map(Vec::len)).collect();
    println!("{}", json!({ "manifest": path, "k": a.k, "fold_sizes": sizes }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Dataset(a) => generate(a),
        Command::Metrics(a) => metrics(a),
        Command::Render(a) => render(a),
        Command::Kfold(a) => kfold(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
