//! Usable-segment selection and the duration/noise quality gate.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Recording, Result, Segment};
use crate::contour::{track_pitch, PitchConfig};
use crate::features::noise::{hnr, HnrConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub frame_seconds: f64,
    /// Frames quieter than this fraction of the median voiced-frame energy
    /// are unusable.
    pub energy_floor: f64,
    pub voicing_threshold: f64,
    pub voicing_window_seconds: f64,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            frame_seconds: 0.010,
            energy_floor: 0.05,
            voicing_threshold: 0.3,
            voicing_window_seconds: 0.040,
            f0_min_hz: 50.0,
            f0_max_hz: 500.0,
        }
    }
}

/// Longest run of voiced frames with sufficient energy, on the frame grid.
pub fn select_segment<'a>(rec: &'a Recording, cfg: &SegmentConfig) -> Result<Segment<'a>> {
    let x = &rec.samples;
    let rate = rec.sample_rate_hz as f64;
    let frame = ((cfg.frame_seconds * rate).round() as usize).max(1);
    let pitch = PitchConfig {
        f0_min_hz: cfg.f0_min_hz,
        f0_max_hz: cfg.f0_max_hz,
        frame_seconds: cfg.voicing_window_seconds,
        hop_seconds: frame as f64 / rate,
        voicing_threshold: cfg.voicing_threshold,
        ..PitchConfig::default()
    };
    // Frame i is centred on the i-th grid cell [i*frame, (i+1)*frame).
    let voiced: Vec<bool> = track_pitch(x, rec.sample_rate_hz, &pitch)
        .iter()
        .map(|f| f.period.is_some())
        .collect();
    let n_frames = voiced.len();
    let energy: Vec<f64> = (0..n_frames)
        .map(|i| {
            let cell = &x[i * frame..((i + 1) * frame).min(x.len())];
            cell.iter().map(|v| v * v).sum::<f64>() / cell.len().max(1) as f64
        })
        .collect();
    let mut voiced_energy: Vec<f64> = (0..n_frames).filter(|&i| voiced[i]).map(|i| energy[i]).collect();
    if voiced_energy.is_empty() {
        return Err(CorpusError::NoUsableSegment);
    }
    voiced_energy.sort_by(f64::total_cmp);
    let median = voiced_energy[voiced_energy.len() / 2];
    let floor = cfg.energy_floor * median;
    let usable = |i: usize| voiced[i] && energy[i] >= floor && energy[i] > 0.0;

    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for i in 0..=n_frames {
        let ok = i < n_frames && usable(i);
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.is_none_or(|(bs, be)| i - s > be - bs) {
                    best = Some((s, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    let (s, e) = best.ok_or(CorpusError::NoUsableSegment)?;
    let start_sample = s * frame;
    let end_sample = (e * frame).min(x.len());
    if end_sample <= start_sample {
        return Err(CorpusError::NoUsableSegment);
    }
    Ok(Segment {
        recording_id: &rec.id,
        start_sample,
        end_sample,
        samples: &x[start_sample..end_sample],
        sample_rate_hz: rec.sample_rate_hz,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    pub min_duration_seconds: f64,
    pub hnr_floor_db: f64,
    pub hnr: HnrConfig,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            min_duration_seconds: 2.0,
            hnr_floor_db: 5.0,
            hnr: HnrConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason")]
pub enum RejectReason {
    TooShort { duration_seconds: f64 },
    /// `hnr_db` is `None` when no HNR estimate could be formed at all.
    TooNoisy { hnr_db: Option<f64> },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::TooShort { duration_seconds } => {
                write!(f, "TooShort: usable phonation lasts {duration_seconds:.3} s")
            }
            RejectReason::TooNoisy { hnr_db: Some(h) } => write!(f, "TooNoisy: HNR {h:.2} dB"),
            RejectReason::TooNoisy { hnr_db: None } => write!(f, "TooNoisy: no periodicity found"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GateDecision {
    Accept,
    Reject(RejectReason),
}

impl GateDecision {
    pub fn is_accept(&self) -> bool {
        matches!(self, GateDecision::Accept)
    }
}

/// Rejects segments shorter than the minimum duration (the boundary itself
/// is accepted) and segments whose HNR falls below the floor.
pub fn quality_gate(seg: &Segment<'_>, cfg: &GateConfig) -> GateDecision {
    let d = seg.duration_seconds();
    if d < cfg.min_duration_seconds {
        return GateDecision::Reject(RejectReason::TooShort { duration_seconds: d });
    }
    match hnr(seg, &cfg.hnr) {
        Ok(h) if h >= cfg.hnr_floor_db => GateDecision::Accept,
        Ok(h) => GateDecision::Reject(RejectReason::TooNoisy { hnr_db: Some(h) }),
        Err(_) => GateDecision::Reject(RejectReason::TooNoisy { hnr_db: None }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone_with_silence(lead: f64, body: f64, trail: f64) -> Recording {
        let rate = 44_100.0;
        let (a, b, c) = ((lead * rate) as usize, (body * rate) as usize, (trail * rate) as usize);
        let mut x = vec![0.0; a];
        x.extend((0..b).map(|i| 0.6 * (2.0 * PI * 180.0 * i as f64 / rate).sin()));
        x.extend(vec![0.0; c]);
        Recording::new("t", x, 44_100).unwrap()
    }

    #[test]
    fn trims_leading_and_trailing_silence() {
        let rec = tone_with_silence(0.5, 4.0, 0.5);
        let seg = select_segment(&rec, &SegmentConfig::default()).unwrap();
        let start = seg.start_sample as f64 / 44_100.0;
        let end = seg.end_sample as f64 / 44_100.0;
        assert!((start - 0.5).abs() <= 0.011, "{start}");
        assert!((end - 4.5).abs() <= 0.011, "{end}");
    }

    #[test]
    fn silence_has_no_segment() {
        let rec = Recording::new("s", vec![0.0; 44_100], 44_100).unwrap();
        assert!(matches!(
            select_segment(&rec, &SegmentConfig::default()),
            Err(CorpusError::NoUsableSegment)
        ));
    }

    #[test]
    fn uninterrupted_tone_is_kept_whole() {
        let rec = tone_with_silence(0.0, 3.0, 0.0);
        let seg = select_segment(&rec, &SegmentConfig::default()).unwrap();
        assert_eq!((seg.start_sample, seg.end_sample), (0, rec.samples.len()));
    }

    #[test]
    fn duration_boundary_is_inclusive() {
        let short = tone_with_silence(0.0, 1.9, 0.0);
        let exact = tone_with_silence(0.0, 2.0, 0.0);
        let cfg = GateConfig::default();
        assert!(matches!(
            quality_gate(&short.as_segment(), &cfg),
            GateDecision::Reject(RejectReason::TooShort { .. })
        ));
        assert_eq!(quality_gate(&exact.as_segment(), &cfg), GateDecision::Accept);
    }
}
