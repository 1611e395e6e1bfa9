//! Top-level simulation config and its canonical hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::channel::ChannelConfig;
use crate::geometry::AngularGrid;
use crate::imager::{ArrayConfig, RangeAxis};
use crate::rcs::RcsConfig;
use crate::waveform::FmcwConfig;
use crate::{HawkError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySpec {
    pub nx: usize,
    pub nz: usize,
    /// Element spacing in wavelengths of the carrier.
    pub spacing_wavelengths: f64,
}

impl Default for ArraySpec {
    fn default() -> Self {
        Self {
            nx: 40,
            nz: 40,
            spacing_wavelengths: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapSpec {
    pub angular: AngularGrid,
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub n_range: usize,
}

impl Default for HeatmapSpec {
    fn default() -> Self {
        Self {
            angular: AngularGrid::heatmap_default(),
            range_min_m: 0.5,
            range_max_m: 10.0,
            n_range: 96,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fmcw: FmcwConfig,
    pub array: ArraySpec,
    pub channel: ChannelConfig,
    pub rcs: RcsConfig,
    pub heatmap: HeatmapSpec,
    /// Depth-map resolution relative to the heat-map's angular grid.
    pub depth_upscale: usize,
    /// Occlusion-culling resolution relative to the depth-map grid.
    pub cull_upscale: usize,
    /// Skip channels kept by the top-m projection.
    pub top_m: usize,
    /// Radar depth-map floor below the heat-map peak (dB).
    pub radar_threshold_db: f64,
    /// Range FFT length; defaults to the next power of two ≥ 4× the sweep.
    pub fft_len: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fmcw: FmcwConfig::default(),
            array: ArraySpec::default(),
            channel: ChannelConfig::default(),
            rcs: RcsConfig::default(),
            heatmap: HeatmapSpec::default(),
            depth_upscale: 4,
            cull_upscale: 4,
            top_m: 8,
            radar_threshold_db: 10.0,
            fft_len: None,
            out_dir: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Parses JSON; unknown keys are rejected. Does not validate values.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            HawkError::config(
                "config",
                format!("line {} column {}: {e}", e.line(), e.column()),
            )
        })
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HawkError::io(path, e))?;
        let cfg = Self::from_json(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets the run seed and the RCS and channel seeds derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.rcs.seed = seed;
        self.channel.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.fmcw.validate()?;
        self.channel.validate()?;
        self.rcs.validate()?;
        if self.array.nx == 0 {
            return Err(HawkError::config("array.nx", "must be >= 1"));
        }
        if self.array.nz == 0 {
            return Err(HawkError::config("array.nz", "must be >= 1"));
        }
        let sw = self.array.spacing_wavelengths;
        if !(sw.is_finite() && sw > 0.0) {
            return Err(HawkError::config("array.spacing_wavelengths", "must be > 0"));
        }
        let h = &self.heatmap;
        h.angular.validate("heatmap.angular")?;
        if !(h.range_min_m.is_finite() && h.range_min_m >= 0.0) {
            return Err(HawkError::config("heatmap.range_min_m", "must be >= 0"));
        }
        if !(h.range_max_m.is_finite() && h.range_max_m > h.range_min_m) {
            return Err(HawkError::config("heatmap.range_max_m", "must exceed range_min_m"));
        }
        // The slowest ground bounce within the imaged volume must stay unambiguous.
        if 4.0 * h.range_max_m >= self.fmcw.max_round_trip_m() {
            return Err(HawkError::config(
                "heatmap.range_max_m",
                format!(
                    "beats beyond the sample rate; keep below {:.2} m",
                    self.fmcw.max_round_trip_m() / 4.0
                ),
            ));
        }
        let dims_ok = |n: usize| (1..=u16::MAX as usize).contains(&n);
        if !dims_ok(h.n_range) {
            return Err(HawkError::config("heatmap.n_range", "must lie in 1..=65535"));
        }
        if !dims_ok(h.angular.n_az) || !dims_ok(h.angular.n_el) {
            return Err(HawkError::config("heatmap.angular", "bin counts must lie in 1..=65535"));
        }
        if self.depth_upscale == 0 || !dims_ok(h.angular.n_az * self.depth_upscale) || !dims_ok(h.angular.n_el * self.depth_upscale) {
            return Err(HawkError::config("depth_upscale", "must be >= 1 and keep depth-map dims within 65535"));
        }
        if self.cull_upscale == 0 {
            return Err(HawkError::config("cull_upscale", "must be >= 1"));
        }
        if self.top_m == 0 || self.top_m > h.n_range {
            return Err(HawkError::config("top_m", "must lie in 1..=heatmap.n_range"));
        }
        if !(self.radar_threshold_db.is_finite() && self.radar_threshold_db >= 0.0) {
            return Err(HawkError::config("radar_threshold_db", "must be >= 0"));
        }
        if let Some(n) = self.fft_len {
            if n < self.fmcw.samples_per_sweep {
                return Err(HawkError::config("fft_len", "must be >= fmcw.samples_per_sweep"));
            }
        }
        Ok(())
    }

    pub fn array_config(&self) -> ArrayConfig {
        let lambda = self.fmcw.wavelength_m();
        ArrayConfig {
            nx: self.array.nx,
            nz: self.array.nz,
            spacing_m: self.array.spacing_wavelengths * lambda,
            wavelength_m: lambda,
        }
    }

    pub fn range_axis(&self) -> RangeAxis {
        RangeAxis {
            min_m: self.heatmap.range_min_m,
            max_m: self.heatmap.range_max_m,
            n: self.heatmap.n_range,
        }
    }

    pub fn depth_grid(&self) -> AngularGrid {
        self.heatmap.angular.upscaled(self.depth_upscale)
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len.unwrap_or_else(|| self.fmcw.default_fft_len())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("config types serialize to JSON");
    let mut out = String::new();
    write_canonical(&v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&m[k], out);
            }
            out.push('}');
        }
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(x, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// SHA-256 of the canonical JSON, lowercase hex.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(canonical_json(value).as_bytes()))
}
