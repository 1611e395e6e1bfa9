//! Millimeter-wave imaging simulator for vehicles.
//!
//! The pipeline runs scene → point reflectors → ray-traced propagation paths
//! → FMCW beat signals → range FFT → beamformed 3D heat-map, alongside a
//! ray-cast ground-truth depth-map and the perception metrics used to score
//! any depth-map against the scene annotations.
//!
//! ```text
//! scene ──► rcs ──► channel ──► waveform ──► imager ──► HeatMap3D (.hwke)
//!   │                                                        │
//!   └──────► groundtruth ──► DepthMap2D (.hwkd) ◄── radar_depth_map
//!                                   │
//!                              perception ──► MetricsReport
//! ```
//!
//! Coordinates are right-handed with `x` cross-range, `y` range (boresight)
//! and `z` up. Azimuth is measured in the x–y plane from `+y` towards `+x`,
//! elevation from the x–y plane towards `+z`.

pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod format;
pub mod geometry;
pub mod groundtruth;
pub mod imager;
pub mod meshgen;
pub mod perception;
pub mod rcs;
pub mod scene;
pub mod waveform;

pub use error::{HawkError, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// RNG domains, so that one user seed drives independent streams.
pub(crate) mod rng {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub const RCS: u64 = 1;
    pub const JITTER: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const DATASET: u64 = 4;

    pub fn stream(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&domain.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        rng
    }
}
