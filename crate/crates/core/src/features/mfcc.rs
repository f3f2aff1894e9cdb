//! Mel-frequency cepstral coefficients and their summaries.

use serde::{Deserialize, Serialize};

use super::schema::{Block, MFCC_COEFFS};
use super::stats::{mean, median, sd};
use super::{FeatureError, NamedValues};
use crate::corpus::Segment;
use crate::dsp::{fft_real, next_pow2};

const LOG_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub window_seconds: f64,
    pub hop_seconds: f64,
    pub n_filters: usize,
    pub min_seconds: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            window_seconds: 0.025,
            hop_seconds: 0.010,
            n_filters: 26,
            min_seconds: 2.0,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters over FFT bins `0..=n_fft/2`, edges equally
/// spaced on the mel scale from 0 Hz to Nyquist.
fn mel_filterbank(n_filters: usize, n_fft: usize, rate: f64) -> Vec<Vec<(usize, f64)>> {
    let top = hz_to_mel(rate / 2.0);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
        .collect();
    let bin_hz = rate / n_fft as f64;
    (0..n_filters)
        .map(|j| {
            let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
            (0..=n_fft / 2)
                .filter_map(|k| {
                    let f = k as f64 * bin_hz;
                    let w = if f > lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    };
                    (w > 0.0).then_some((k, w))
                })
                .collect()
        })
        .collect()
}

/// Per-frame cepstra `c1..c13` and log energies.
pub struct Cepstra {
    pub coeffs: Vec<[f64; MFCC_COEFFS]>,
    pub log_energy: Vec<f64>,
}

pub fn mfcc_frames(seg: &Segment<'_>, cfg: &MfccConfig) -> Result<Cepstra, FeatureError> {
    let rate = seg.rate();
    let x = seg.samples;
    let win = (cfg.window_seconds * rate).round() as usize;
    let hop = ((cfg.hop_seconds * rate).round() as usize).max(1);
    if x.len() < win + hop || seg.duration_seconds() < cfg.min_seconds {
        return Err(FeatureError::TooShort {
            what: "mfcc",
            len: x.len(),
            needed: ((cfg.min_seconds * rate).ceil() as usize).max(win + hop),
        });
    }
    let n_fft = next_pow2(win);
    let bank = mel_filterbank(cfg.n_filters, n_fft, rate);
    let hamming: Vec<f64> = (0..win)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (win - 1) as f64).cos())
        .collect();
    // Orthonormal DCT-II rows 1..=13.
    let m = cfg.n_filters as f64;
    let dct: Vec<Vec<f64>> = (1..=MFCC_COEFFS)
        .map(|k| {
            (0..cfg.n_filters)
                .map(|j| {
                    (2.0 / m).sqrt()
                        * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / m).cos()
                })
                .collect()
        })
        .collect();

    let mut coeffs = Vec::new();
    let mut log_energy = Vec::new();
    let mut frame = vec![0.0; win];
    let mut start = 0;
    while start + win <= x.len() {
        let raw = &x[start..start + win];
        log_energy.push((raw.iter().map(|v| v * v).sum::<f64>() + LOG_FLOOR).ln());
        for (f, (v, w)) in frame.iter_mut().zip(raw.iter().zip(&hamming)) {
            *f = v * w;
        }
        let spec = fft_real(&frame, n_fft);
        let power: Vec<f64> = spec[..=n_fft / 2].iter().map(|c| c.norm_sqr()).collect();
        let logmel: Vec<f64> = bank
            .iter()
            .map(|filt| (filt.iter().map(|&(k, w)| w * power[k]).sum::<f64>() + LOG_FLOOR).ln())
            .collect();
        let mut c = [0.0; MFCC_COEFFS];
        for (ck, row) in c.iter_mut().zip(&dct) {
            *ck = row.iter().zip(&logmel).map(|(a, b)| a * b).sum();
        }
        coeffs.push(c);
        start += hop;
    }
    Ok(Cepstra { coeffs, log_energy })
}

/// Median, mean, SD, mean absolute delta and delta SD per coefficient, then
/// log-energy mean, SD and mean absolute delta.
pub fn mfcc_summaries(seg: &Segment<'_>, cfg: &MfccConfig) -> Result<NamedValues, FeatureError> {
    let cep = mfcc_frames(seg, cfg)?;
    let column = |k: usize| cep.coeffs.iter().map(|c| c[k]).collect::<Vec<_>>();
    let delta = |x: &[f64]| x.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
    let abs_mean = |d: &[f64]| d.iter().map(|v| v.abs()).sum::<f64>() / d.len() as f64;

    let mut med = Vec::new();
    let mut mu = Vec::new();
    let mut sds = Vec::new();
    let mut mu_diff = Vec::new();
    let mut sd_diff = Vec::new();
    for k in 0..MFCC_COEFFS {
        let col = column(k);
        let d = delta(&col);
        med.push(median(&col));
        mu.push(mean(&col));
        sds.push(sd(&col));
        mu_diff.push(abs_mean(&d));
        sd_diff.push(sd(&d));
    }
    let de = delta(&cep.log_energy);
    let mut values = Vec::with_capacity(68);
    for block in [med, mu, sds, mu_diff, sd_diff] {
        values.extend(block);
    }
    values.extend([mean(&cep.log_energy), sd(&cep.log_energy), abs_mean(&de)]);
    Ok(Block::Mfcc.feature_names().into_iter().zip(values).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn get(v: &NamedValues, name: &str) -> f64 {
        v.iter().find(|(n, _)| n == name).unwrap().1
    }

    #[test]
    fn each_frame_has_13_coefficients() {
        let x: Vec<f64> = (0..44_100 * 2).map(|i| (i as f64 * 0.05).sin()).collect();
        let cep = mfcc_frames(&Segment::from_samples(&x, 44_100), &MfccConfig::default()).unwrap();
        assert!(cep.coeffs.len() > 190);
        assert_eq!(cep.coeffs[0].len(), 13);
        assert_eq!(cep.coeffs.len(), cep.log_energy.len());
    }

    #[test]
    fn identical_frames_have_zero_deltas() {
        // A 100 Hz tone at 44.1 kHz repeats every 441 samples, exactly one hop.
        let x: Vec<f64> = (0..44_100 * 2)
            .map(|i| (2.0 * std::f64::consts::PI * (i % 441) as f64 / 441.0).sin())
            .collect();
        let v = mfcc_summaries(&Segment::from_samples(&x, 44_100), &MfccConfig::default()).unwrap();
        for k in 1..=13 {
            assert_eq!(get(&v, &format!("muDiffMFCC{k}")), 0.0);
        }
    }

    #[test]
    fn tone_and_noise_differ() {
        let rate = 44_100;
        let n = rate * 2;
        let tone: Vec<f64> = (0..n)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / rate as f64).sin())
            .collect();
        let rms = (0.125f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Uniform noise with matching RMS.
        let a = rms * 3f64.sqrt();
        let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-a..a)).collect();
        let cfg = MfccConfig::default();
        let vt = mfcc_summaries(&Segment::from_samples(&tone, rate as u32), &cfg).unwrap();
        let vn = mfcc_summaries(&Segment::from_samples(&noise, rate as u32), &cfg).unwrap();
        let differing = (1..=13)
            .filter(|k| {
                let name = format!("medMFCC{k}");
                (get(&vt, &name) - get(&vn, &name)).abs() > 1.0
            })
            .count();
        assert!(differing >= 8, "{differing}");
    }

    #[test]
    fn too_short_segment() {
        let x = vec![0.1; 44_100];
        assert!(matches!(
            mfcc_summaries(&Segment::from_samples(&x, 44_100), &MfccConfig::default()),
            Err(FeatureError::TooShort { .. })
        ));
    }
}
