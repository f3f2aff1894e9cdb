//! Synthetic sustained phonation with known F0, jitter, shimmer and HNR.
//!
//! The source is a harmonic pulse `sum_k cos(k phi) / k` whose phase runs
//! from 0 to 2π over each cycle, so every cycle starts at a waveform peak.
//! Cycle periods are `T0 (1 + j e)` and cycle amplitudes `1 + s e'` with
//! i.i.d. standard normal `e, e'`. A cycle's amplitude holds from the trough
//! before its peak to the trough after it. White Gaussian noise is added at
//! the requested harmonics-to-noise power ratio and the result is scaled to
//! a peak of 0.9.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{write_wav_pcm16, CorpusError, Recording};

pub const PEAK: f64 = 0.9;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{n_harmonics} harmonics of {f0_hz} Hz reach the Nyquist frequency of {rate} Hz audio")]
    AliasingRisk {
        f0_hz: f64,
        n_harmonics: usize,
        rate: u32,
    },
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] CorpusError),
    #[error("sidecar write failed: {0}")]
    Sidecar(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub f0_hz: f64,
    pub jitter_pct: f64,
    pub shimmer_pct: f64,
    /// Harmonics-to-noise power ratio; `f64::INFINITY` for no noise.
    #[serde(with = "hnr_serde")]
    pub hnr_db: f64,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub n_harmonics: usize,
    pub seed: u64,
}

mod hnr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Harmonics up to 5 kHz (or 0.45 of the sample rate, if lower).
pub fn default_harmonics(f0_hz: f64, sample_rate_hz: u32) -> usize {
    let top = 5000f64.min(0.45 * sample_rate_hz as f64);
    ((top / f0_hz).floor() as usize).max(1)
}

impl SynthParams {
    /// Clean 3 s phonation at 44.1 kHz with the default harmonic count.
    pub fn new(f0_hz: f64) -> Self {
        SynthParams {
            f0_hz,
            jitter_pct: 0.0,
            shimmer_pct: 0.0,
            hnr_db: f64::INFINITY,
            duration_s: 3.0,
            sample_rate_hz: 44_100,
            n_harmonics: default_harmonics(f0_hz, 44_100),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParams(m.to_string()));
        if !(50.0..=500.0).contains(&self.f0_hz) {
            return bad("f0_hz must lie in [50, 500]");
        }
        if !(self.jitter_pct >= 0.0 && self.jitter_pct.is_finite()) {
            return bad("jitter_pct must be finite and non-negative");
        }
        if !(self.shimmer_pct >= 0.0 && self.shimmer_pct.is_finite()) {
            return bad("shimmer_pct must be finite and non-negative");
        }
        if self.hnr_db.is_nan() || self.hnr_db == f64::NEG_INFINITY {
            return bad("hnr_db must be a number or +infinity");
        }
        if !(self.duration_s >= 0.5 && self.duration_s.is_finite()) {
            return bad("duration_s must be at least 0.5");
        }
        if self.sample_rate_hz < crate::corpus::MIN_SAMPLE_RATE_HZ {
            return bad("sample_rate_hz must be at least 8000");
        }
        if self.n_harmonics < 1 {
            return bad("n_harmonics must be at least 1");
        }
        if self.f0_hz * self.n_harmonics as f64 >= self.sample_rate_hz as f64 / 2.0 {
            return Err(SynthError::AliasingRisk {
                f0_hz: self.f0_hz,
                n_harmonics: self.n_harmonics,
                rate: self.sample_rate_hz,
            });
        }
        Ok(())
    }
}

/// What was actually injected, measured with the same definitions the
/// feature extractor uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub params: SynthParams,
    /// Periods (samples) of the cycles that lie completely inside the output.
    pub periods_samples: Vec<f64>,
    /// Amplitude of those cycles before peak normalization.
    pub amplitudes: Vec<f64>,
    /// Mean absolute period difference over mean period, in percent.
    pub realized_jitter_pct: f64,
    /// Mean absolute amplitude difference over mean amplitude, in percent.
    pub realized_shimmer_pct: f64,
    /// Harmonic to realized-noise power ratio; `None` without noise.
    pub realized_hnr_db: Option<f64>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phonation {
    pub recording: Recording,
    pub truth: GroundTruth,
}

fn relative_mean_abs_diff(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let d = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (x.len() - 1) as f64;
    d / m * 100.0
}

/// Generates one phonation with its ground truth.
pub fn synthesize(p: &SynthParams) -> Result<Phonation, SynthError> {
    p.validate()?;
    let rate = p.sample_rate_hz as f64;
    let n = (p.duration_s * rate).round() as usize;
    let t0 = rate / p.f0_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    // Cycle boundaries (peaks) covering the whole output.
    let mut starts = vec![0.0];
    let mut periods = Vec::new();
    let mut amps = Vec::new();
    let (j, s) = (p.jitter_pct / 100.0, p.shimmer_pct / 100.0);
    while *starts.last().unwrap() <= n as f64 + t0 {
        let period = (t0 * (1.0 + j * normal(&mut rng))).max(0.5 * t0);
        let amp = (1.0 + s * normal(&mut rng)).max(0.05);
        periods.push(period);
        amps.push(amp);
        starts.push(starts.last().unwrap() + period);
    }
    amps.push(1.0);

    let k_max = p.n_harmonics;
    let mut x = Vec::with_capacity(n);
    let mut c = 0usize;
    for i in 0..n {
        let t = i as f64;
        while t >= starts[c + 1] {
            c += 1;
        }
        let frac = (t - starts[c]) / periods[c];
        let phi = 2.0 * std::f64::consts::PI * frac;
        let amp = if frac < 0.5 { amps[c] } else { amps[c + 1] };
        // sum_k cos(k phi) / k via the Chebyshev recurrence.
        let cos1 = phi.cos();
        let (mut prev, mut cur) = (1.0, cos1);
        let mut acc = cur;
        for k in 2..=k_max {
            let next = 2.0 * cos1 * cur - prev;
            prev = cur;
            cur = next;
            acc += cur / k as f64;
        }
        x.push(amp * acc);
    }
    let p_h = x.iter().map(|v| v * v).sum::<f64>() / n as f64;

    let mut realized_hnr_db = None;
    if p.hnr_db.is_finite() {
        let sigma = (p_h / 10f64.powf(p.hnr_db / 10.0)).sqrt();
        let mut p_n = 0.0;
        for v in x.iter_mut() {
            let e = sigma * normal(&mut rng);
            p_n += e * e;
            *v += e;
        }
        p_n /= n as f64;
        realized_hnr_db = Some(10.0 * (p_h / p_n).log10());
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { PEAK / peak } else { 1.0 };
    for v in x.iter_mut() {
        *v *= scale;
    }

    let complete = starts.iter().skip(1).take_while(|&&e| e <= n as f64).count();
    let periods_in: Vec<f64> = periods[..complete].to_vec();
    let amps_in: Vec<f64> = amps[..complete].to_vec();
    let truth = GroundTruth {
        params: p.clone(),
        realized_jitter_pct: relative_mean_abs_diff(&periods_in),
        realized_shimmer_pct: relative_mean_abs_diff(&amps_in),
        periods_samples: periods_in,
        amplitudes: amps_in,
        realized_hnr_db,
        n_samples: n,
    };
    let recording = Recording::new(format!("synth-{}", p.seed), x, p.sample_rate_hz)?;
    Ok(Phonation { recording, truth })
}

/// Generates one phonation.
pub fn generate_phonation(p: &SynthParams) -> Result<Recording, SynthError> {
    Ok(synthesize(p)?.recording)
}

/// Writes `<path>` as 16-bit PCM and `<path>.json` with the ground truth.
/// Returns the sidecar path.
pub fn write_phonation(path: &Path, ph: &Phonation) -> Result<PathBuf, SynthError> {
    write_wav_pcm16(path, &ph.recording.samples, ph.recording.sample_rate_hz)?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".json");
    let sidecar = PathBuf::from(sidecar);
    let json = serde_json::to_string_pretty(&ph.truth).map_err(|e| SynthError::Sidecar(e.to_string()))?;
    std::fs::write(&sidecar, json).map_err(|e| SynthError::Sidecar(e.to_string()))?;
    Ok(sidecar)
}
