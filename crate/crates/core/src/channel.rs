//! Monostatic propagation from an array element to each point reflector:
//! the direct echo plus an optional single ground bounce found with the
//! mirror-image method.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::rcs::{PointReflector, PointReflectorCloud, ScatterClass};
use crate::{HawkError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundReflection {
    pub magnitude: f64,
    pub phase_deg: f64,
}

impl GroundReflection {
    pub fn coefficient(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase_deg.to_radians())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Beat-signal SNR in dB relative to the strongest direct return;
    /// `None` disables thermal noise.
    pub snr_db: Option<f64>,
    /// Standard deviation of the per-axis antenna position error (m).
    pub jitter_m: f64,
    pub ground_reflection: GroundReflection,
    pub multipath: bool,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            snr_db: Some(20.0),
            jitter_m: 0.2e-3,
            ground_reflection: GroundReflection {
                magnitude: 0.5,
                phase_deg: 180.0,
            },
            multipath: true,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    /// Noise-free, jitter-free channel.
    pub fn ideal() -> Self {
        Self {
            snr_db: None,
            jitter_m: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(HawkError::config("channel.snr_db", "must be finite"));
            }
        }
        if !(self.jitter_m.is_finite() && self.jitter_m >= 0.0) {
            return Err(HawkError::config("channel.jitter_m", "must be >= 0"));
        }
        let g = &self.ground_reflection;
        if !(g.magnitude.is_finite() && (0.0..=1.0).contains(&g.magnitude)) || !g.phase_deg.is_finite() {
            return Err(HawkError::config(
                "channel.ground_reflection",
                "magnitude must lie in [0, 1] with a finite phase",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Direct,
    GroundBounce,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationPath {
    /// Total round-trip length (m).
    pub length_m: f64,
    /// Complex amplitude excluding the propagation phase.
    pub gain: Complex64,
    pub kind: PathKind,
}

impl PropagationPath {
    /// One-way equivalent range (half the round trip).
    pub fn range_m(&self) -> f64 {
        self.length_m / 2.0
    }
}

/// Round-trip spreading: amplitude falls as the square of the one-way
/// equivalent range.
pub fn spreading_amplitude(reflectivity: f64, length_m: f64) -> f64 {
    let r = length_m / 2.0;
    reflectivity / (r * r)
}

/// Mirror image of a point across the horizontal plane `z = ground`.
pub fn mirror(p: &Vec3, ground: f64) -> Vec3 {
    Vec3::new(p.x, p.y, 2.0 * ground - p.z)
}

/// Paths for a single reflector: the direct echo (zero amplitude for
/// specular points) and, with multipath on, the element → ground →
/// reflector → element bounce.
pub fn trace_reflector(
    r: &PointReflector,
    element: &Vec3,
    ground: f64,
    cfg: &ChannelConfig,
) -> (PropagationPath, Option<PropagationPath>) {
    let leg = (r.position - element).norm();
    let direct_len = 2.0 * leg;
    let direct_amp = if r.class == ScatterClass::Specular {
        0.0
    } else {
        spreading_amplitude(r.reflectivity, direct_len)
    };
    let direct = PropagationPath {
        length_m: direct_len,
        gain: Complex64::new(direct_amp, 0.0),
        kind: PathKind::Direct,
    };
    let bounce = (cfg.multipath && element.z > ground && r.position.z > ground).then(|| {
        let len = leg + (r.position - mirror(element, ground)).norm();
        PropagationPath {
            length_m: len,
            gain: cfg.ground_reflection.coefficient() * spreading_amplitude(r.reflectivity, len),
            kind: PathKind::GroundBounce,
        }
    });
    (direct, bounce)
}

/// Paths from one element to every reflector, grouped per reflector.
pub fn trace_paths(
    cloud: &PointReflectorCloud,
    element: &Vec3,
    ground: f64,
    cfg: &ChannelConfig,
) -> Vec<Vec<PropagationPath>> {
    cloud
        .points
        .iter()
        .map(|r| {
            let (d, b) = trace_reflector(r, element, ground, cfg);
            std::iter::once(d).chain(b).collect()
        })
        .collect()
}

/// Flat variant of [`trace_paths`] that skips zero-amplitude paths.
pub fn trace_paths_flat(
    cloud: &PointReflectorCloud,
    element: &Vec3,
    ground: f64,
    cfg: &ChannelConfig,
    out: &mut Vec<PropagationPath>,
) {
    out.clear();
    for r in &cloud.points {
        let (d, b) = trace_reflector(r, element, ground, cfg);
        if d.gain.norm_sqr() > 0.0 {
            out.push(d);
        }
        if let Some(b) = b.filter(|b| b.gain.norm_sqr() > 0.0) {
            out.push(b);
        }
    }
}

/// Applies the configured antenna position error. Element `i` draws from its
/// own RNG stream, so the result does not depend on evaluation order.
pub fn jitter_elements(nominal: &[Vec3], cfg: &ChannelConfig) -> Vec<Vec3> {
    if cfg.jitter_m == 0.0 {
        return nominal.to_vec();
    }
    nominal
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = crate::rng::stream(cfg.seed, crate::rng::JITTER, i as u64);
            let mut d = || -> f64 { StandardNormal.sample(&mut rng) };
            p + Vec3::new(d(), d(), d()) * cfg.jitter_m
        })
        .collect()
}
