//! Glottal-cycle tracking and the Teager–Kaiser energy operator.
//!
//! Cycle detection runs in two passes. A frame-level autocorrelation tracker
//! (40 ms frames, 10 ms hop) estimates the local period and voicing; cycles
//! are then marked peak-to-peak, each next peak searched within ±25 % of the
//! local period and refined to sub-sample precision with a parabola.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Segment;
use crate::dsp::{normalized_autocorr, parabolic_peak, periodicity_candidates, Candidate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContourError {
    #[error("found {found} voiced cycles, need at least {needed}")]
    NoVoicedCycles { found: usize, needed: usize },
    #[error("invalid pitch band: f0_min {min} Hz must be below f0_max {max} Hz")]
    InvalidBand { min: String, max: String },
    #[error("sequence of length {0} is too short for the Teager-Kaiser operator (need 3)")]
    TooShort(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchConfig {
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub frame_seconds: f64,
    pub hop_seconds: f64,
    /// Minimum normalized autocorrelation peak for a frame to count as voiced.
    pub voicing_threshold: f64,
    /// Octave alternatives scoring within this fraction of the best
    /// candidate are resolved toward contour continuity.
    pub octave_tolerance: f64,
    /// A candidate at a half, third or quarter of the best lag replaces it
    /// when scoring at least this fraction of the best score.
    pub subharmonic_ratio: f64,
    pub min_cycles: usize,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            f0_min_hz: 50.0,
            f0_max_hz: 500.0,
            frame_seconds: 0.040,
            hop_seconds: 0.010,
            voicing_threshold: 0.35,
            octave_tolerance: 0.10,
            subharmonic_ratio: 0.75,
            min_cycles: 10,
        }
    }
}

impl PitchConfig {
    pub(crate) fn lag_range(&self, rate: f64) -> (usize, usize) {
        let lo = (rate / self.f0_max_hz).floor().max(2.0) as usize;
        let hi = (rate / self.f0_min_hz).ceil() as usize;
        (lo, hi)
    }

    fn validate(&self) -> Result<(), ContourError> {
        if !(self.f0_min_hz > 0.0 && self.f0_min_hz < self.f0_max_hz) {
            return Err(ContourError::InvalidBand {
                min: self.f0_min_hz.to_string(),
                max: self.f0_max_hz.to_string(),
            });
        }
        Ok(())
    }
}

/// One analysis frame of the pitch tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchFrame {
    /// Centre of the frame in samples.
    pub center: usize,
    /// Period in samples when voiced.
    pub period: Option<f64>,
    /// Best normalized autocorrelation in the search band.
    pub score: f64,
}

/// Per-cycle F0 and peak-amplitude series.
///
/// Cycle `i` starts at the fractional sample position `marks[i]` (a waveform
/// peak) and lasts `sample_rate_hz / f0_hz[i]` samples. Cycles from separate
/// voiced runs are concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleContour {
    pub cycle_starts: Vec<usize>,
    pub marks: Vec<f64>,
    pub f0_hz: Vec<f64>,
    pub a0: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl CycleContour {
    /// Builds a contour from explicit periods (in samples) and amplitudes,
    /// laying the cycles end to end from sample 0.
    pub fn from_periods(periods: &[f64], a0: &[f64], sample_rate_hz: u32) -> Self {
        assert_eq!(periods.len(), a0.len(), "one amplitude per period");
        let mut marks = Vec::with_capacity(periods.len());
        let mut t = 0.0;
        for p in periods {
            marks.push(t);
            t += p;
        }
        CycleContour {
            cycle_starts: marks.iter().map(|m| *m as usize).collect(),
            marks,
            f0_hz: periods.iter().map(|p| sample_rate_hz as f64 / p).collect(),
            a0: a0.to_vec(),
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    /// Cycle periods in seconds.
    pub fn periods_seconds(&self) -> Vec<f64> {
        self.f0_hz.iter().map(|f| 1.0 / f).collect()
    }

    /// Cycle periods in samples.
    pub fn periods_samples(&self) -> Vec<f64> {
        let rate = self.sample_rate_hz as f64;
        self.f0_hz.iter().map(|f| rate / f).collect()
    }

    /// Debug dump: `cycle_start,f0_hz,a0` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cycle_start,f0_hz,a0\n");
        for i in 0..self.len() {
            out.push_str(&format!("{},{},{}\n", self.cycle_starts[i], self.f0_hz[i], self.a0[i]));
        }
        out
    }
}

/// Teager–Kaiser energy: `x[n]^2 - x[n-1] x[n+1]` for interior samples.
pub fn tkeo(x: &[f64]) -> Result<Vec<f64>, ContourError> {
    if x.len() < 3 {
        return Err(ContourError::TooShort(x.len()));
    }
    Ok(x.windows(3).map(|w| w[1] * w[1] - w[0] * w[2]).collect())
}

fn pick_candidate(cands: &[Candidate], previous: Option<f64>, cfg: &PitchConfig) -> Candidate {
    let near = |lag: f64, target: f64| (lag / target - 1.0).abs() < 0.06;
    let top = cands[0];
    // A periodic frame also correlates at multiples of its period; prefer
    // the shortest submultiple that still scores well.
    let mut best = top;
    for m in (2..=4).rev() {
        if let Some(c) = cands
            .iter()
            .find(|c| near(c.lag, top.lag / m as f64) && c.score >= cfg.subharmonic_ratio * top.score)
        {
            best = *c;
            break;
        }
    }
    let floor = best.score * (1.0 - cfg.octave_tolerance);
    let mut options = vec![best];
    for c in cands {
        if c.score >= floor && (near(c.lag, best.lag * 2.0) || near(c.lag, best.lag * 0.5)) {
            options.push(*c);
        }
    }
    match previous {
        Some(prev) => *options
            .iter()
            .min_by(|a, b| {
                let da = (a.lag / prev).ln().abs();
                let db = (b.lag / prev).ln().abs();
                da.total_cmp(&db)
            })
            .unwrap(),
        None => *options.iter().min_by(|a, b| a.lag.total_cmp(&b.lag)).unwrap(),
    }
}

/// Frame-level period and voicing track.
pub fn track_pitch(samples: &[f64], sample_rate_hz: u32, cfg: &PitchConfig) -> Vec<PitchFrame> {
    let rate = sample_rate_hz as f64;
    let (min_lag, max_lag) = cfg.lag_range(rate);
    let win = ((cfg.frame_seconds * rate).round() as usize).max(max_lag + 2);
    let hop = ((cfg.hop_seconds * rate).round() as usize).max(1);
    let n = samples.len();
    if n < min_lag * 3 {
        return Vec::new();
    }
    let win = win.min(n);
    let mut frames = Vec::new();
    let mut previous: Option<f64> = None;
    let mut center = hop / 2;
    while center < n {
        let start = center.saturating_sub(win / 2).min(n - win);
        let frame = &samples[start..start + win];
        let r = normalized_autocorr(frame, max_lag + 1);
        let cands = periodicity_candidates(&r, min_lag, max_lag);
        let (period, score) = match cands.first() {
            Some(best) if best.score >= cfg.voicing_threshold => {
                let c = pick_candidate(&cands, previous, cfg);
                (Some(c.lag), c.score)
            }
            Some(best) => (None, best.score),
            None => (None, 0.0),
        };
        previous = period.or(previous);
        frames.push(PitchFrame {
            center,
            period,
            score,
        });
        center += hop;
    }
    frames
}

/// Voiced runs as `(first_frame, last_frame)` inclusive index pairs.
fn voiced_runs(frames: &[PitchFrame]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, f) in frames.iter().enumerate() {
        match (f.period.is_some(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, frames.len() - 1));
    }
    runs
}

fn local_period(frames: &[PitchFrame], run: (usize, usize), pos: f64) -> f64 {
    let slice = &frames[run.0..=run.1];
    let first = &slice[0];
    if pos <= first.center as f64 {
        return first.period.unwrap();
    }
    for w in slice.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if pos <= b.center as f64 {
            let t = (pos - a.center as f64) / (b.center - a.center) as f64;
            return a.period.unwrap() * (1.0 - t) + b.period.unwrap() * t;
        }
    }
    slice.last().unwrap().period.unwrap()
}

fn argmax(x: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo..hi {
        if x[i] > x[best] {
            best = i;
        }
    }
    best
}

fn refine(x: &[f64], i: usize) -> (f64, f64) {
    if i == 0 || i + 1 >= x.len() {
        return (i as f64, x[i]);
    }
    let (d, v) = parabolic_peak(x[i - 1], x[i], x[i + 1]);
    (i as f64 + d, v)
}

/// Locates glottal cycles in a segment.
pub fn detect_cycles(seg: &Segment<'_>, cfg: &PitchConfig) -> Result<CycleContour, ContourError> {
    cfg.validate()?;
    let rate = seg.rate();
    let samples = seg.samples;
    let frames = track_pitch(samples, seg.sample_rate_hz, cfg);
    let too_few = |found| ContourError::NoVoicedCycles {
        found,
        needed: cfg.min_cycles,
    };
    if frames.is_empty() {
        return Err(too_few(0));
    }

    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let flipped: Vec<f64>;
    let x: &[f64] = if -lo > hi {
        flipped = samples.iter().map(|v| -v).collect();
        &flipped
    } else {
        samples
    };

    let hop = ((cfg.hop_seconds * rate).round() as usize).max(1);
    let min_period = rate / cfg.f0_max_hz;
    let max_period = rate / cfg.f0_min_hz;
    let mut contour = CycleContour {
        cycle_starts: Vec::new(),
        marks: Vec::new(),
        f0_hz: Vec::new(),
        a0: Vec::new(),
        sample_rate_hz: seg.sample_rate_hz,
    };

    for run in voiced_runs(&frames) {
        let span_lo = frames[run.0].center.saturating_sub(hop / 2);
        let span_hi = (frames[run.1].center + hop / 2 + 1).min(x.len());
        let mut marks: Vec<(f64, f64)> = Vec::new();
        let mut anchor: Option<usize> = None;
        loop {
            let next = match anchor {
                None => {
                    let start = marks.last().map(|m| m.0.ceil() as usize + 1).unwrap_or(span_lo);
                    let t = local_period(&frames, run, start as f64);
                    let end = (start + t.ceil() as usize).min(span_hi);
                    if start >= end {
                        break;
                    }
                    argmax(x, start, end)
                }
                Some(p) => {
                    let t = local_period(&frames, run, p as f64);
                    let lo = p + (0.75 * t).round() as usize;
                    let hi = (p + (1.25 * t).round() as usize + 1).min(span_hi);
                    if lo >= hi {
                        break;
                    }
                    argmax(x, lo, hi)
                }
            };
            let (pos, height) = refine(x, next);
            if let (Some(_), Some(last)) = (anchor, marks.last()) {
                let period = pos - last.0;
                if period < min_period || period > max_period {
                    // Lost lock: close the run of marks and re-anchor.
                    push_cycles(&mut contour, &marks, samples, rate);
                    marks.clear();
                    marks.push((pos, height));
                    anchor = Some(next);
                    continue;
                }
            }
            marks.push((pos, height));
            anchor = Some(next);
        }
        push_cycles(&mut contour, &marks, samples, rate);
    }

    if contour.len() < cfg.min_cycles {
        return Err(too_few(contour.len()));
    }
    Ok(contour)
}

fn push_cycles(contour: &mut CycleContour, marks: &[(f64, f64)], samples: &[f64], rate: f64) {
    for w in marks.windows(2) {
        let (start, peak) = w[0];
        let end = w[1].0;
        // Amplitude is read over the peak-centred cycle so the rise toward
        // the next peak is not attributed to this one.
        let half = 0.5 * (end - start);
        let lo = (start - half).max(0.0).floor() as usize;
        let hi = ((start + half).ceil() as usize).min(samples.len()).max(lo + 1);
        let sample_max = samples[lo..hi].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        contour.cycle_starts.push(start.max(0.0).floor() as usize);
        contour.marks.push(start);
        contour.f0_hz.push(rate / (end - start));
        contour.a0.push(sample_max.max(peak.abs()));
    }
}
