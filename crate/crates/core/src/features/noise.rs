//! Noise measures: harmonics-to-noise ratio, glottal-to-noise excitation and
//! vocal fold excitation ratios.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::stats::{mean, median, normalized_entropy, sd};
use super::{FeatureError, NamedValues};
use crate::contour::tkeo;
use crate::corpus::Segment;
use crate::dsp::{fft_real, ifft, next_pow2, normalized_autocorr, periodicity_candidates};

pub const HNR_CAP_DB: (f64, f64) = (-20.0, 40.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnrConfig {
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub frame_seconds: f64,
    pub hop_seconds: f64,
    /// Frames span at least this many periods of the lowest F0.
    pub min_periods: f64,
}

impl Default for HnrConfig {
    fn default() -> Self {
        HnrConfig {
            f0_min_hz: 50.0,
            f0_max_hz: 500.0,
            frame_seconds: 0.040,
            hop_seconds: 0.010,
            min_periods: 3.0,
        }
    }
}

/// Per-frame harmonics-to-noise ratios in dB, capped.
pub fn hnr_frames(seg: &Segment<'_>, cfg: &HnrConfig) -> Result<Vec<f64>, FeatureError> {
    let rate = seg.rate();
    let x = seg.samples;
    let min_lag = ((rate / cfg.f0_max_hz).floor() as usize).max(2);
    let max_lag = (rate / cfg.f0_min_hz).ceil() as usize;
    let win = ((cfg.frame_seconds * rate).round() as usize)
        .max((cfg.min_periods * rate / cfg.f0_min_hz).ceil() as usize);
    let hop = ((cfg.hop_seconds * rate).round() as usize).max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start + win <= x.len() {
        let r = normalized_autocorr(&x[start..start + win], max_lag + 1);
        if let Some(best) = periodicity_candidates(&r, min_lag, max_lag).first() {
            let p = best.score.clamp(0.0, 1.0);
            let db = if p >= 1.0 {
                HNR_CAP_DB.1
            } else if p <= 0.0 {
                HNR_CAP_DB.0
            } else {
                10.0 * (p / (1.0 - p)).log10()
            };
            out.push(db.clamp(HNR_CAP_DB.0, HNR_CAP_DB.1));
        }
        start += hop;
    }
    if out.is_empty() {
        return Err(FeatureError::NoVoicedFrames);
    }
    Ok(out)
}

/// Mean frame HNR in dB.
pub fn hnr(seg: &Segment<'_>, cfg: &HnrConfig) -> Result<f64, FeatureError> {
    Ok(mean(&hnr_frames(seg, cfg)?))
}

pub fn hnr_summary(seg: &Segment<'_>, cfg: &HnrConfig) -> Result<NamedValues, FeatureError> {
    let f = hnr_frames(seg, cfg)?;
    Ok(vec![
        ("HNR(1)".into(), mean(&f)),
        ("HNR_median".into(), median(&f)),
        ("HNR_std".into(), sd(&f)),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GneConfig {
    pub band_width_hz: f64,
    pub band_step_hz: f64,
    pub first_band_hz: f64,
    pub last_band_top_hz: f64,
    /// Minimum distance between band centres for a pair to count.
    pub min_center_distance_hz: f64,
    /// Envelope smoothing window for the energy-operator variants.
    pub smooth_seconds: f64,
    /// Rate the band signals are analysed at (at least).
    pub analysis_rate_hz: f64,
    pub envelope_rate_hz: f64,
}

impl Default for GneConfig {
    fn default() -> Self {
        GneConfig {
            band_width_hz: 500.0,
            band_step_hz: 100.0,
            first_band_hz: 500.0,
            last_band_top_hz: 5000.0,
            min_center_distance_hz: 250.0,
            smooth_seconds: 0.002,
            analysis_rate_hz: 10_000.0,
            envelope_rate_hz: 1000.0,
        }
    }
}

fn boxcar(x: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += x[i];
        if i >= w {
            acc -= x[i - w];
        }
        out.push(acc / w.min(i + 1) as f64);
    }
    out
}

/// Zero-mean, unit-norm copy, or `None` for a flat envelope.
fn standardize(x: &[f64]) -> Option<Vec<f64>> {
    let m = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm > 1e-12 * (m.abs() + 1e-300) * (x.len() as f64).sqrt()).then(|| c.iter().map(|v| v / norm).collect())
}

fn pair_stats(envs: &[(f64, Vec<f64>)], min_dist: f64) -> [f64; 3] {
    let mut corr = Vec::new();
    for i in 0..envs.len() {
        for j in i + 1..envs.len() {
            if (envs[j].0 - envs[i].0).abs() + 1e-9 >= min_dist {
                let c: f64 = envs[i].1.iter().zip(&envs[j].1).map(|(a, b)| a * b).sum();
                corr.push(c.clamp(0.0, 1.0));
            }
        }
    }
    if corr.is_empty() {
        return [f64::NAN; 3];
    }
    let max = corr.iter().cloned().fold(0.0, f64::max);
    [max, mean(&corr), sd(&corr)]
}

/// Glottal-to-noise excitation from Hilbert, squared-energy and
/// Teager-Kaiser band envelopes: max, mean and SD over band pairs.
pub fn gne(seg: &Segment<'_>, cfg: &GneConfig) -> Result<NamedValues, FeatureError> {
    let rate = seg.rate();
    let x = seg.samples;
    let n = next_pow2(x.len());
    // Decimate by a power of two while staying above the analysis rate.
    let mut dec = 1usize;
    while rate / (2 * dec) as f64 >= cfg.analysis_rate_hz && n / (2 * dec) >= 64 {
        dec *= 2;
    }
    let m = n / dec;
    let arate = rate / dec as f64;
    let nyquist = arate / 2.0;
    let mut lows = Vec::new();
    let mut lo = cfg.first_band_hz;
    while lo + cfg.band_width_hz <= cfg.last_band_top_hz + 1e-9 && lo + cfg.band_width_hz <= nyquist {
        lows.push(lo);
        lo += cfg.band_step_hz;
    }
    if lows.len() < 2 {
        return Err(FeatureError::InsufficientBandwidth {
            rate: seg.sample_rate_hz,
            needed: (2.0 * (cfg.first_band_hz + cfg.band_width_hz + cfg.band_step_hz)) as u32,
        });
    }
    let spec = fft_real(x, n);
    let len = x.len() / dec;
    let smooth = ((cfg.smooth_seconds * arate).round() as usize).max(1);
    let step = ((arate / cfg.envelope_rate_hz).round() as usize).max(1);

    let mut energies = Vec::new();
    let mut bands = Vec::new();
    for &lo in &lows {
        let hi = lo + cfg.band_width_hz;
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let mut energy = 0.0;
        for (k, slot) in buf.iter_mut().enumerate().take(m / 2).skip(1) {
            let f = k as f64 * rate / n as f64;
            if f >= lo && f < hi {
                *slot = spec[k] * 2.0 / dec as f64;
                energy += spec[k].norm_sqr();
            }
        }
        ifft(&mut buf);
        energies.push(energy);
        bands.push((lo + cfg.band_width_hz / 2.0, buf));
    }
    let peak_energy = energies.iter().cloned().fold(0.0, f64::max);

    let mut hil = Vec::new();
    let mut seo = Vec::new();
    let mut teo = Vec::new();
    for ((centre, z), e) in bands.iter().zip(&energies) {
        if *e <= 1e-10 * peak_energy || *e == 0.0 {
            continue;
        }
        let z = &z[..len];
        let real: Vec<f64> = z.iter().map(|c| c.re).collect();
        let env_h: Vec<f64> = z.iter().map(|c| c.norm()).collect();
        let env_s = boxcar(&real.iter().map(|v| v * v).collect::<Vec<_>>(), smooth);
        let env_t = boxcar(&tkeo(&real).unwrap_or_default(), smooth);
        let pick = |e: &[f64]| e.iter().step_by(step).cloned().collect::<Vec<_>>();
        let skip = smooth.min(len / 4);
        for (store, env) in [(&mut hil, env_h), (&mut seo, env_s), (&mut teo, env_t)] {
            let trimmed = if env.len() > 2 * skip { &env[skip..env.len() - skip] } else { &env[..] };
            if let Some(s) = standardize(&pick(trimmed)) {
                store.push((*centre, s));
            }
        }
    }
    if hil.len() < 2 {
        return Err(FeatureError::Degenerate("gne needs two bands with energy"));
    }
    let mut out = Vec::new();
    for (name, envs) in [("GNE", &hil), ("GNE-SEO", &seo), ("GNE-TKEO", &teo)] {
        let [max, mu, s] = pair_stats(envs, cfg.min_center_distance_hz);
        out.push((name.to_string(), max));
        out.push((format!("{name}_mean"), mu));
        out.push((format!("{name}_std"), s));
    }
    if out.iter().any(|(_, v)| !v.is_finite()) {
        return Err(FeatureError::Degenerate("gne envelopes"));
    }
    Ok(out)
}

pub const VFER_SPLIT_HZ: f64 = 2500.0;
pub const VFER_MIN_RATE_HZ: u32 = 16_000;

/// Low/high band energy shares split at 2.5 kHz, using linear and
/// Teager-Kaiser energy, plus the normalized spectral entropy per band.
pub fn vfer(seg: &Segment<'_>) -> Result<NamedValues, FeatureError> {
    if seg.sample_rate_hz < VFER_MIN_RATE_HZ {
        return Err(FeatureError::InsufficientBandwidth {
            rate: seg.sample_rate_hz,
            needed: VFER_MIN_RATE_HZ,
        });
    }
    let rate = seg.rate();
    let n = next_pow2(seg.len());
    let spec = fft_real(seg.samples, n);
    let (mut el, mut eh, mut tl, mut th) = (0.0, 0.0, 0.0, 0.0);
    let mut pl = Vec::new();
    let mut ph = Vec::new();
    for (k, c) in spec.iter().enumerate().take(n / 2 + 1).skip(1) {
        let f = k as f64 * rate / n as f64;
        let p = c.norm_sqr();
        // Sum of the Teager-Kaiser operator of a bin's sinusoid.
        let omega = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let t = p * (1.0 - (2.0 * omega).cos());
        if f < VFER_SPLIT_HZ {
            el += p;
            tl += t;
            pl.push(p);
        } else {
            eh += p;
            th += t;
            ph.push(p);
        }
    }
    let share = |a: f64, b: f64| if a + b > 0.0 { a / (a + b) } else { 0.5 };
    let ratio_db = |hi: f64, lo: f64| (10.0 * ((hi + 1e-300) / (lo + 1e-300)).log10()).clamp(-100.0, 100.0);
    let lf = share(el, eh);
    let lft = share(tl, th);
    let names = [
        "VFER-LF",
        "VFER-HF",
        "VFER-ratio",
        "VFER-LF-TKEO",
        "VFER-HF-TKEO",
        "VFER-ratio-TKEO",
        "VFER-LF-entropy",
        "VFER-HF-entropy",
    ];
    let values = [
        lf,
        1.0 - lf,
        ratio_db(eh, el),
        lft,
        1.0 - lft,
        ratio_db(th, tl),
        normalized_entropy(&pl, pl.len()),
        normalized_entropy(&ph, ph.len()),
    ];
    Ok(names.iter().map(|s| s.to_string()).zip(values).collect())
}
