//! Batch generation of paired heat-map / depth-map samples, manifests and
//! k-fold splits.
//!
//! Layout of a dataset directory:
//!
//! ```text
//! dataset.json        generating config, written first
//! {id}.hwke           normalized heat-map
//! {id}.hwkd           ground-truth depth-map
//! {id}.ann.json       SceneAnnotations
//! manifest.json       written last
//! ```
//!
//! Every sample draws its pose and seed from its own stream, so samples can
//! be generated in any order and a crashed run resumes by id.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{config_hash, RunConfig};
use crate::format::{read_depthmap, read_heatmap, write_atomic, write_depthmap, write_heatmap};
use crate::geometry::Vec3;
use crate::imager::simulate_sample;
use crate::perception::SceneAnnotations;
use crate::scene::{load_mesh, Scene, TriangleMesh};
use crate::{rng, HawkError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "dataset.json";

/// Pose distribution of the single vehicle in each sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationConfig {
    /// Horizontal distance from the radar to the vehicle origin (m).
    pub range_m: [f64; 2],
    pub azimuth_deg: [f64; 2],
    pub yaw_deg: [f64; 2],
    /// Radar height above the ground plane (m).
    pub radar_height_m: f64,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self {
            range_m: [5.0, 10.0],
            azimuth_deg: [-30.0, 30.0],
            yaw_deg: [0.0, 360.0],
            radar_height_m: 1.0,
        }
    }
}

impl VariationConfig {
    pub fn validate(&self) -> Result<()> {
        let interval = |field: &str, [a, b]: [f64; 2]| {
            if a.is_finite() && b.is_finite() && a <= b {
                Ok(())
            } else {
                Err(HawkError::config(field, "must be a finite [min, max] with min <= max"))
            }
        };
        interval("variation.range_m", self.range_m)?;
        interval("variation.azimuth_deg", self.azimuth_deg)?;
        interval("variation.yaw_deg", self.yaw_deg)?;
        if self.range_m[0] <= 0.0 {
            return Err(HawkError::config("variation.range_m", "must be > 0"));
        }
        if self.azimuth_deg[0] < -90.0 || self.azimuth_deg[1] > 90.0 {
            return Err(HawkError::config("variation.azimuth_deg", "must lie within [-90, 90]"));
        }
        if !(self.radar_height_m.is_finite() && self.radar_height_m > 0.0) {
            return Err(HawkError::config("variation.radar_height_m", "must be > 0"));
        }
        Ok(())
    }
}

/// Everything that determines a dataset's bytes. Its canonical hash is
/// stamped on every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub run: RunConfig,
    pub variation: VariationConfig,
    /// Mesh paths as given; samples are assigned round-robin.
    pub meshes: Vec<PathBuf>,
    pub count: usize,
    pub seed: u64,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.variation.validate()?;
        if self.meshes.is_empty() {
            return Err(HawkError::config("meshes", "mesh library is empty"));
        }
        if self.count == 0 {
            return Err(HawkError::config("count", "must be >= 1"));
        }
        if self.count > u32::MAX as usize {
            return Err(HawkError::config("count", "too many samples"));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePose {
    pub x_m: f64,
    pub y_m: f64,
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub id: u32,
    /// Paths relative to the dataset directory.
    pub heatmap: PathBuf,
    pub depthmap: PathBuf,
    pub annotations: PathBuf,
    pub config_hash: String,
    /// Seed the sample was simulated with.
    pub seed: u64,
    pub mesh: PathBuf,
    pub pose: SamplePose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkippedSample {
    pub id: u32,
    pub mesh: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Folds {
    pub k: usize,
    pub seed: u64,
    /// Sample ids of each fold, ascending.
    pub folds: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub config_hash: String,
    pub samples: Vec<SampleRecord>,
    pub skipped: Vec<SkippedSample>,
    pub folds: Option<Folds>,
}

pub fn sample_stem(id: u32) -> String {
    format!("{id:06}")
}

fn file_names(id: u32) -> (PathBuf, PathBuf, PathBuf) {
    let s = sample_stem(id);
    (
        PathBuf::from(format!("{s}.hwke")),
        PathBuf::from(format!("{s}.hwkd")),
        PathBuf::from(format!("{s}.ann.json")),
    )
}

/// Library index used by each sample: round-robin over a fresh shuffle of
/// the library every round, so counts differ by at most one.
pub fn assign_meshes(library_len: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    let mut round = 0u64;
    while out.len() < count {
        let mut order: Vec<usize> = (0..library_len).collect();
        order.shuffle(&mut rng::stream(seed, rng::DATASET, (1 << 40) + round));
        out.extend(order.into_iter().take(count - out.len()));
        round += 1;
    }
    out
}

/// Pose and simulation seed of sample `id`.
pub fn draw_sample(variation: &VariationConfig, seed: u64, id: u32) -> (SamplePose, u64) {
    let mut r = rng::stream(seed, rng::DATASET, id as u64);
    let [r0, r1] = variation.range_m;
    let [a0, a1] = variation.azimuth_deg;
    let [y0, y1] = variation.yaw_deg;
    let range = r.random_range(r0..=r1);
    let az = r.random_range(a0..=a1).to_radians();
    let yaw = r.random_range(y0..=y1);
    let sample_seed = r.next_u64();
    (
        SamplePose {
            x_m: range * az.sin(),
            y_m: range * az.cos(),
            yaw_deg: yaw,
        },
        sample_seed,
    )
}

fn scene_for(mesh: Arc<TriangleMesh>, pose: &SamplePose, variation: &VariationConfig) -> Scene {
    Scene::empty(Vec3::new(0.0, 0.0, variation.radar_height_m), 0.0).with_vehicle(
        0,
        mesh,
        pose.x_m,
        pose.y_m,
        pose.yaw_deg.to_radians(),
    )
}

fn read_annotations(path: &Path) -> Result<SceneAnnotations> {
    let text = std::fs::read_to_string(path).map_err(|e| HawkError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HawkError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn sample_complete(dir: &Path, record: &SampleRecord) -> bool {
    read_heatmap(&dir.join(&record.heatmap)).is_ok()
        && read_depthmap(&dir.join(&record.depthmap)).is_ok()
        && read_annotations(&dir.join(&record.annotations)).is_ok()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("dataset types serialize to JSON");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Simulates and writes `cfg.count` samples into `out_dir`, then the manifest.
///
/// Samples whose files are already present and readable are kept, so an
/// interrupted run can be restarted with the same config. A directory that
/// holds a dataset from a different config is refused.
pub fn generate_dataset(cfg: &DatasetConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let hash = cfg.hash();
    std::fs::create_dir_all(out_dir).map_err(|e| HawkError::io(out_dir, e))?;
    let cfg_path = out_dir.join(CONFIG_FILE);
    if cfg_path.exists() {
        let text = std::fs::read_to_string(&cfg_path).map_err(|e| HawkError::io(&cfg_path, e))?;
        let previous: DatasetConfig = serde_json::from_str(&text).map_err(|e| HawkError::Parse {
            path: cfg_path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if previous.hash() != hash {
            return Err(HawkError::config(
                "out",
                format!("{} holds a dataset generated with a different config", out_dir.display()),
            ));
        }
    } else {
        write_json(&cfg_path, cfg)?;
    }

    let library: Vec<std::result::Result<Arc<TriangleMesh>, String>> = cfg
        .meshes
        .iter()
        .map(|p| {
            load_mesh(p).map(Arc::new).map_err(|e| {
                warn!("skipping mesh {}: {e}", p.display());
                e.to_string()
            })
        })
        .collect();
    let assignment = assign_meshes(library.len(), cfg.count, cfg.seed);

    let outcomes: Vec<Result<std::result::Result<SampleRecord, SkippedSample>>> = (0..cfg.count as u32)
        .into_par_iter()
        .map(|id| {
            let mesh_index = assignment[id as usize];
            let mesh_path = cfg.meshes[mesh_index].clone();
            let mesh = match &library[mesh_index] {
                Ok(m) => m.clone(),
                Err(reason) => {
                    return Ok(Err(SkippedSample {
                        id,
                        mesh: mesh_path,
                        reason: reason.clone(),
                    }))
                }
            };
            let (pose, seed) = draw_sample(&cfg.variation, cfg.seed, id);
            let (heatmap, depthmap, annotations) = file_names(id);
            let record = SampleRecord {
                id,
                heatmap,
                depthmap,
                annotations,
                config_hash: hash.clone(),
                seed,
                mesh: mesh_path,
                pose,
            };
            if sample_complete(out_dir, &record) {
                info!("sample {id}: already present");
                return Ok(Ok(record));
            }
            let run = cfg.run.clone().with_seed(seed);
            let sample = simulate_sample(&scene_for(mesh, &pose, &cfg.variation), &run)?;
            let ann = sample
                .annotations
                .as_ref()
                .ok_or_else(|| HawkError::Scene("sample scene has no vehicle".into()))?;
            write_heatmap(&out_dir.join(&record.heatmap), &sample.heatmap)?;
            write_depthmap(&out_dir.join(&record.depthmap), &sample.depth)?;
            write_json(&out_dir.join(&record.annotations), ann)?;
            info!(
                "sample {id}: {} reflectors, {} valid pixels",
                sample.reflectors.len(),
                sample.valid_pixels()
            );
            Ok(Ok(record))
        })
        .collect();

    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o? {
            Ok(r) => samples.push(r),
            Err(s) => skipped.push(s),
        }
    }
    let manifest = Manifest {
        config: cfg.clone(),
        config_hash: hash,
        samples,
        skipped,
        folds: None,
    };
    write_manifest(out_dir, &manifest)?;
    Ok(manifest)
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    write_json(&dir.join(MANIFEST_FILE), m)
}

/// Reads a manifest, from either its file path or its dataset directory.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&path).map_err(|e| HawkError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| HawkError::Parse {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Assigns every sample to exactly one of `k` folds. Sizes differ by at most one.
pub fn split_kfold(m: &Manifest, k: usize, seed: u64) -> Result<Manifest> {
    if k < 2 {
        return Err(HawkError::config("k", "must be >= 2"));
    }
    if k > m.samples.len() {
        return Err(HawkError::config(
            "k",
            format!("{k} folds requested for {} samples", m.samples.len()),
        ));
    }
    let mut ids: Vec<u32> = m.samples.iter().map(|s| s.id).collect();
    ids.sort_unstable();
    ids.shuffle(&mut rng::stream(seed, rng::DATASET, 1 << 41));
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(Manifest {
        folds: Some(Folds { k, seed, folds }),
        ..m.clone()
    })
}

impl Manifest {
    /// Checks the manifest against its dataset directory: config hash,
    /// sample files, and the fold partition.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        let hash = self.config.hash();
        if hash != self.config_hash {
            return Err(HawkError::Format {
                what: "manifest",
                message: "config hash does not match the embedded config".into(),
            });
        }
        let grid = self.config.run.depth_grid();
        for s in &self.samples {
            if s.config_hash != hash {
                return Err(HawkError::Format {
                    what: "manifest",
                    message: format!("sample {} carries a foreign config hash", s.id),
                });
            }
            read_heatmap(&dir.join(&s.heatmap))?;
            let d = read_depthmap(&dir.join(&s.depthmap))?;
            let ann = read_annotations(&dir.join(&s.annotations))?;
            if !d.grid.same_as(&grid) || !ann.grid.same_as(&grid) {
                return Err(HawkError::DimensionMismatch(format!(
                    "sample {} does not match the configured depth grid",
                    s.id
                )));
            }
        }
        if let Some(f) = &self.folds {
            if f.k < 2 || f.folds.len() != f.k {
                return Err(HawkError::Format {
                    what: "manifest",
                    message: format!("{} folds listed for k = {}", f.folds.len(), f.k),
                });
            }
            let mut seen: Vec<u32> = f.folds.iter().flatten().copied().collect();
            seen.sort_unstable();
            let mut ids: Vec<u32> = self.samples.iter().map(|s| s.id).collect();
            ids.sort_unstable();
            if seen != ids {
                return Err(HawkError::Format {
                    what: "manifest",
                    message: "folds do not partition the samples".into(),
                });
            }
        }
        Ok(())
    }
}
