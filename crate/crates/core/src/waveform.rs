//! FMCW chirp model: beat-signal synthesis from propagation paths and range
//! extraction by FFT.
//!
//! A path of round-trip length `L` (delay `τ = L/c`) mixes down to a tone
//!
//! ```text
//! s(t) = g · exp(j2π (f_b·t + f_c·τ)),   f_b = B·L / (c·T)
//! ```
//!
//! so the one-way range `R = L/2` maps to `f_b = 2RB/(cT)`, and the carrier
//! phase `f_c·τ` is kept for beamforming. Only the up-sweep is modelled.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConfig, PathKind, PropagationPath};
use crate::{HawkError, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic (DFT-even) window coefficients.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FmcwConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub sweep_s: f64,
    pub samples_per_sweep: usize,
    pub window: Window,
}

impl Default for FmcwConfig {
    /// 59.5–61 GHz sweep (centre 60.25 GHz, 1.5 GHz bandwidth), 1 ms, 4096 samples.
    fn default() -> Self {
        Self {
            carrier_hz: 60.25e9,
            bandwidth_hz: 1.5e9,
            sweep_s: 1e-3,
            samples_per_sweep: 4096,
            window: Window::Hann,
        }
    }
}

impl FmcwConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.carrier_hz) {
            return Err(HawkError::config("fmcw.carrier_hz", "must be > 0"));
        }
        if !positive(self.bandwidth_hz) {
            return Err(HawkError::config("fmcw.bandwidth_hz", "must be > 0"));
        }
        if !positive(self.sweep_s) {
            return Err(HawkError::config("fmcw.sweep_s", "must be > 0"));
        }
        if self.samples_per_sweep < 2 {
            return Err(HawkError::config("fmcw.samples_per_sweep", "must be >= 2"));
        }
        Ok(())
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.samples_per_sweep as f64 / self.sweep_s
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Range resolution `c / 2B`.
    pub fn range_resolution_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    pub fn beat_frequency_hz(&self, round_trip_m: f64) -> f64 {
        self.bandwidth_hz * round_trip_m / (SPEED_OF_LIGHT * self.sweep_s)
    }

    /// Longest round trip whose beat tone stays below half the sample rate.
    pub fn max_round_trip_m(&self) -> f64 {
        self.sample_rate_hz() * SPEED_OF_LIGHT * self.sweep_s / (2.0 * self.bandwidth_hz)
    }

    /// Default FFT length: next power of two ≥ 4× the samples per sweep.
    pub fn default_fft_len(&self) -> usize {
        (4 * self.samples_per_sweep).next_power_of_two()
    }
}

/// Complex I/Q beat samples of one array element for one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl BeatSignal {
    pub fn zeros(cfg: &FmcwConfig) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); cfg.samples_per_sweep],
            sample_rate_hz: cfg.sample_rate_hz(),
        }
    }

    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }
}

const CHUNK: usize = 64;

/// Adds `gain · exp(j(phase0 + ω n))` for n in 0..len into `re`/`im`.
/// Phasors are re-anchored exactly every `CHUNK` samples so no error
/// accumulates across the sweep.
fn accumulate_tone(re: &mut [f64], im: &mut [f64], gain: Complex64, phase0: f64, omega: f64) {
    let mut tr = [0.0; CHUNK];
    let mut ti = [0.0; CHUNK];
    for b in 0..CHUNK {
        let (s, c) = (omega * b as f64).sin_cos();
        tr[b] = c;
        ti[b] = s;
    }
    for (chunk, (cr, ci)) in re.chunks_mut(CHUNK).zip(im.chunks_mut(CHUNK)).enumerate() {
        let n0 = (chunk * CHUNK) as f64;
        let anchor = gain * Complex64::from_polar(1.0, phase0 + omega * n0);
        let (ar, ai) = (anchor.re, anchor.im);
        for b in 0..cr.len() {
            cr[b] += ar * tr[b] - ai * ti[b];
            ci[b] += ar * ti[b] + ai * tr[b];
        }
    }
}

/// Synthesises the beat signal for one element from its propagation paths.
///
/// With noise enabled, circular complex Gaussian noise is added at the
/// configured SNR relative to the strongest direct path (the strongest path
/// of any kind when no direct path carries energy). `stream` selects the
/// element's noise RNG stream.
pub fn synthesize_beat(
    paths: &[PropagationPath],
    cfg: &FmcwConfig,
    noise: &ChannelConfig,
    stream: u64,
) -> Result<BeatSignal> {
    let limit = cfg.max_round_trip_m();
    if let Some(p) = paths.iter().find(|p| p.length_m >= limit) {
        return Err(HawkError::UnambiguousRange {
            length_m: p.length_m,
            limit_m: limit,
        });
    }
    let n = cfg.samples_per_sweep;
    let fs = cfg.sample_rate_hz();
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for p in paths {
        if p.gain.norm_sqr() == 0.0 {
            continue;
        }
        let omega = TAU * cfg.beat_frequency_hz(p.length_m) / fs;
        let cycles = cfg.carrier_hz * p.length_m / SPEED_OF_LIGHT;
        accumulate_tone(&mut re, &mut im, p.gain, TAU * cycles.fract(), omega);
    }
    if let Some(snr_db) = noise.snr_db {
        let strongest = |kind: Option<PathKind>| {
            paths
                .iter()
                .filter(|p| kind.is_none_or(|k| p.kind == k))
                .map(|p| p.gain.norm_sqr())
                .fold(0.0, f64::max)
        };
        let mut reference = strongest(Some(PathKind::Direct));
        if reference == 0.0 {
            reference = strongest(None);
        }
        if reference > 0.0 {
            let sigma = (reference * 10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
            let mut rng = crate::rng::stream(noise.seed, crate::rng::NOISE, stream);
            for k in 0..n {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                re[k] += sigma * a;
                im[k] += sigma * b;
            }
        }
    }
    Ok(BeatSignal {
        samples: re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect(),
        sample_rate_hz: fs,
    })
}

/// Complex range profile; bin `k` sits at `k · bin_width_m` one-way range.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub bins: Vec<Complex64>,
    pub bin_width_m: f64,
}

impl RangeProfile {
    pub fn range_of_bin(&self, k: usize) -> f64 {
        k as f64 * self.bin_width_m
    }

    /// Bin whose centre is nearest to `range_m`, clamped to the profile.
    pub fn bin_of_range(&self, range_m: f64) -> usize {
        ((range_m / self.bin_width_m).round().max(0.0) as usize).min(self.bins.len().saturating_sub(1))
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.norm()).collect()
    }

    pub fn power(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn peak_bin(&self) -> usize {
        let m = self.magnitudes();
        (0..m.len()).fold(0, |best, k| if m[k] > m[best] { k } else { best })
    }
}

/// Windowed, zero-padded FFT from beat samples to range bins. The transform
/// is scaled by `1/√fft_len`, so with a rectangular window the profile
/// carries the same energy as the signal.
#[derive(Clone)]
pub struct RangeProcessor {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    fft_len: usize,
    bin_width_m: f64,
}

impl std::fmt::Debug for RangeProcessor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RangeProcessor")
            .field("fft_len", &self.fft_len)
            .field("bin_width_m", &self.bin_width_m)
            .finish()
    }
}

impl RangeProcessor {
    /// `fft_len` is raised to the sweep length when shorter.
    pub fn new(cfg: &FmcwConfig, fft_len: usize) -> Self {
        let n = cfg.samples_per_sweep;
        let fft_len = fft_len.max(n);
        Self {
            fft: FftPlanner::new().plan_fft_forward(fft_len),
            window: cfg.window.coefficients(n),
            fft_len,
            bin_width_m: cfg.range_resolution_m() * n as f64 / fft_len as f64,
        }
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn bin_width_m(&self) -> f64 {
        self.bin_width_m
    }

    pub fn process(&self, sig: &BeatSignal) -> RangeProfile {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for ((b, s), w) in buf.iter_mut().zip(&sig.samples).zip(&self.window) {
            *b = s * *w;
        }
        self.fft.process(&mut buf);
        let scale = 1.0 / (self.fft_len as f64).sqrt();
        buf.iter_mut().for_each(|b| *b *= scale);
        RangeProfile {
            bins: buf,
            bin_width_m: self.bin_width_m,
        }
    }
}

pub fn range_fft(sig: &BeatSignal, cfg: &FmcwConfig, fft_len: usize) -> RangeProfile {
    RangeProcessor::new(cfg, fft_len).process(sig)
}

/// Local maxima of `|profile|` at or above `rel_threshold` × global maximum,
/// restricted to the positive-frequency half.
pub fn find_peaks(profile: &RangeProfile, rel_threshold: f64) -> Vec<usize> {
    let m = profile.magnitudes();
    let half = m.len() / 2;
    let max = m[..half].iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    (1..half.saturating_sub(1))
        .filter(|&k| m[k] >= rel_threshold * max && m[k] > m[k - 1] && m[k] >= m[k + 1])
        .collect()
}
