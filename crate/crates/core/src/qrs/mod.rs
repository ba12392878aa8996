//! Classical QRS detectors used as heart-rate baselines.
//!
//! Every detector runs the same outer steps: the input is shifted by its
//! first sample and scaled by its largest deviation (so offsets and gains do
//! not change the result), the detector-specific front end and thresholding
//! produce candidate beats, candidates are moved to the nearest R-wave
//! extremum and finally thinned to the refractory period.

mod christov;
mod hamilton;
mod pan_tompkins;
mod swt;
mod tma;

pub use swt::swt_detail;

use crate::dsp::{centered_mean, local_maxima};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const REFRACTORY_S: f64 = 0.2;
pub const LEARNING_S: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum QrsError {
    #[error("signal of {len} samples is shorter than the {needed}-sample learning period")]
    SignalTooShort { len: usize, needed: usize },
    #[error("sample rate must be positive, got {0}")]
    BadRate(f64),
    #[error("unknown detector {0:?}")]
    UnknownDetector(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    PanTompkins,
    Hamilton,
    Christov,
    Tma,
    Swt,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::PanTompkins,
        DetectorKind::Hamilton,
        DetectorKind::Christov,
        DetectorKind::Tma,
        DetectorKind::Swt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::PanTompkins => "pan_tompkins",
            DetectorKind::Hamilton => "hamilton",
            DetectorKind::Christov => "christov",
            DetectorKind::Tma => "tma",
            DetectorKind::Swt => "swt",
        }
    }

    /// Minimum spacing between reported beats, in samples.
    pub fn refractory(self, fs: f64) -> usize {
        refractory_samples(fs)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = QrsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['-', ' '], "_");
        match norm.as_str() {
            "pan_tompkins" | "pantompkins" | "pt" => Ok(DetectorKind::PanTompkins),
            "hamilton" => Ok(DetectorKind::Hamilton),
            "christov" => Ok(DetectorKind::Christov),
            "tma" | "two_average" | "elgendi" => Ok(DetectorKind::Tma),
            "swt" | "wavelet" | "kalidas" => Ok(DetectorKind::Swt),
            _ => Err(QrsError::UnknownDetector(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub detector: DetectorKind,
    pub peak_indices: Vec<usize>,
}

pub fn detect(kind: DetectorKind, samples: &[f64], fs: f64) -> Result<DetectionResult, QrsError> {
    if !(fs > 0.0) || !fs.is_finite() {
        return Err(QrsError::BadRate(fs));
    }
    let needed = (LEARNING_S * fs).ceil() as usize;
    if samples.len() < needed {
        return Err(QrsError::SignalTooShort { len: samples.len(), needed });
    }
    let Some(x) = normalize(samples) else {
        return Ok(DetectionResult { detector: kind, peak_indices: Vec::new() });
    };
    let candidates = match kind {
        DetectorKind::PanTompkins => pan_tompkins::candidates(&x, fs),
        DetectorKind::Hamilton => hamilton::candidates(&x, fs),
        DetectorKind::Christov => christov::candidates(&x, fs),
        DetectorKind::Tma => tma::candidates(&x, fs),
        DetectorKind::Swt => swt::candidates(&x, fs),
    };
    let peaks = finalize(&x, fs, &candidates, lookback(kind, fs));
    Ok(DetectionResult { detector: kind, peak_indices: peaks })
}

pub fn detect_pan_tompkins(samples: &[f64], fs: f64) -> Result<DetectionResult, QrsError> {
    detect(DetectorKind::PanTompkins, samples, fs)
}

pub fn detect_hamilton(samples: &[f64], fs: f64) -> Result<DetectionResult, QrsError> {
    detect(DetectorKind::Hamilton, samples, fs)
}

pub fn detect_christov(samples: &[f64], fs: f64) -> Result<DetectionResult, QrsError> {
    detect(DetectorKind::Christov, samples, fs)
}

pub fn detect_tma(samples: &[f64], fs: f64) -> Result<DetectionResult, QrsError> {
    detect(DetectorKind::Tma, samples, fs)
}

pub fn detect_swt(samples: &[f64], fs: f64) -> Result<DetectionResult, QrsError> {
    detect(DetectorKind::Swt, samples, fs)
}

pub(crate) fn refractory_samples(fs: f64) -> usize {
    ((REFRACTORY_S * fs).ceil() as usize).max(1)
}

pub(crate) fn samples_for(seconds: f64, fs: f64) -> usize {
    ((seconds * fs).round() as usize).max(1)
}

// how far before a candidate the R wave may sit, given the front-end lag
fn lookback(kind: DetectorKind, fs: f64) -> usize {
    let s = match kind {
        DetectorKind::PanTompkins => 0.25,
        DetectorKind::Hamilton => 0.2,
        DetectorKind::Christov => 0.1,
        DetectorKind::Tma => 0.08,
        DetectorKind::Swt => 0.2,
    };
    samples_for(s, fs)
}

/// Shift by the first sample, scale by the largest deviation. `None` for a
/// flat signal.
fn normalize(samples: &[f64]) -> Option<Vec<f64>> {
    let x0 = samples[0];
    let shifted: Vec<f64> = samples.iter().map(|v| v - x0).collect();
    let scale = shifted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    Some(shifted.into_iter().map(|v| v / scale).collect())
}

/// Moves each candidate to the largest deviation from the local baseline in
/// `[c - lookback, c + 50 ms]`, drops positions on the signal edges, then
/// keeps beats at least one refractory period apart (the larger deviation
/// wins).
fn finalize(x: &[f64], fs: f64, candidates: &[usize], lookback: usize) -> Vec<usize> {
    let baseline = centered_mean(x, samples_for(0.2, fs));
    let dev: Vec<f64> = x.iter().zip(&baseline).map(|(v, b)| (v - b).abs()).collect();
    let ahead = samples_for(0.05, fs);
    let mut refined: Vec<usize> = candidates
        .iter()
        .filter(|&&c| c < x.len())
        .map(|&c| {
            let lo = c.saturating_sub(lookback);
            let hi = (c + ahead).min(x.len() - 1);
            let mut best = lo;
            for i in lo..=hi {
                if dev[i] > dev[best] {
                    best = i;
                }
            }
            best
        })
        // an extremum on the first or last sample may belong to a beat
        // that lies outside the signal
        .filter(|&p| p > 0 && p + 1 < x.len())
        .collect();
    refined.sort_unstable();
    refined.dedup();

    let refractory = refractory_samples(fs);
    let mut out: Vec<usize> = Vec::with_capacity(refined.len());
    for p in refined {
        match out.last_mut() {
            Some(last) if p - *last < refractory => {
                if dev[p] > dev[*last] {
                    *last = p;
                }
            }
            _ => out.push(p),
        }
    }
    out
}

/// Adaptive dual-threshold peak classification over a feature signal:
/// running signal/noise peak levels, a refractory period, an optional
/// T-wave slope test and search-back for missed beats.
pub(crate) struct PeakThresholds<'a> {
    pub fs: f64,
    /// Slope proxy compared against the previous beat's within 360 ms.
    pub slope: Option<&'a [f64]>,
    pub searchback_factor: f64,
}

impl PeakThresholds<'_> {
    pub fn run(&self, feature: &[f64]) -> Vec<usize> {
        let fs = self.fs;
        let refractory = refractory_samples(fs);
        let twave = samples_for(0.36, fs);
        let slope_span = samples_for(0.075, fs);
        let learn = ((LEARNING_S * fs) as usize).min(feature.len());

        let learn_max = feature[..learn].iter().cloned().fold(0.0, f64::max);
        let learn_mean = feature[..learn].iter().sum::<f64>() / learn.max(1) as f64;
        let mut spki = 0.5 * learn_max;
        let mut npki = learn_mean;
        let threshold = |s: f64, n: f64| n + 0.25 * (s - n);

        let slope_at = |p: usize| -> f64 {
            self.slope
                .map(|s| s[p.saturating_sub(slope_span)..=p].iter().cloned().fold(0.0, f64::max))
                .unwrap_or(0.0)
        };

        let peaks = local_maxima(feature);
        let mut qrs: Vec<usize> = Vec::new();
        let mut qrs_slope = 0.0;
        let mut rr: Vec<usize> = Vec::new();
        // index into `peaks` of the first candidate after the last beat
        let mut since_last = 0usize;

        for (k, &p) in peaks.iter().enumerate() {
            let value = feature[p];
            let i1 = threshold(spki, npki);

            if let (Some(&last), Some(avg)) = (qrs.last(), rr_average(&rr)) {
                let limit = (self.searchback_factor * avg).round() as usize;
                if p - last > limit {
                    let i2 = 0.5 * i1;
                    let best = peaks[since_last..k]
                        .iter()
                        .copied()
                        .filter(|&c| c >= last + refractory && p - c >= refractory && feature[c] > i2)
                        .max_by(|&a, &b| feature[a].total_cmp(&feature[b]).then(b.cmp(&a)));
                    if let Some(c) = best {
                        spki = 0.25 * feature[c] + 0.75 * spki;
                        rr.push(c - last);
                        qrs.push(c);
                        qrs_slope = slope_at(c);
                        since_last = k;
                    }
                }
            }

            let i1 = threshold(spki, npki);
            match qrs.last().copied() {
                Some(last) if p - last < refractory => {
                    if value > feature[last] {
                        *qrs.last_mut().unwrap() = p;
                        qrs_slope = slope_at(p);
                        since_last = k + 1;
                        if let Some(prev) = qrs.len().checked_sub(2).map(|j| qrs[j]) {
                            *rr.last_mut().unwrap() = p - prev;
                        }
                    }
                    continue;
                }
                _ => {}
            }
            if value > i1 {
                let is_twave = match (qrs.last(), self.slope) {
                    (Some(&last), Some(_)) if p - last < twave => slope_at(p) < 0.5 * qrs_slope,
                    _ => false,
                };
                if is_twave {
                    npki = 0.125 * value + 0.875 * npki;
                } else {
                    spki = 0.125 * value + 0.875 * spki;
                    if let Some(&last) = qrs.last() {
                        rr.push(p - last);
                    }
                    qrs.push(p);
                    qrs_slope = slope_at(p);
                    since_last = k + 1;
                }
            } else {
                npki = 0.125 * value + 0.875 * npki;
            }
        }
        qrs
    }
}

fn rr_average(rr: &[usize]) -> Option<f64> {
    if rr.is_empty() {
        return None;
    }
    let recent = &rr[rr.len().saturating_sub(8)..];
    Some(recent.iter().sum::<usize>() as f64 / recent.len() as f64)
}

#[cfg(test)]
pub(crate) mod testsig {
    /// Gaussian R-like pulses on a slow baseline, integer valued.
    pub fn pulse_train(fs: f64, seconds: f64, period_s: f64, first_s: f64) -> (Vec<f64>, Vec<usize>) {
        let n = (fs * seconds).round() as usize;
        let mut x = vec![0.0; n];
        let mut truth = Vec::new();
        let sigma = 0.012 * fs;
        let mut t = first_s;
        while t < seconds {
            let c = t * fs;
            truth.push(c.round() as usize);
            for (i, v) in x.iter_mut().enumerate() {
                let d = i as f64 - c;
                if d.abs() < 8.0 * sigma + 2.0 {
                    *v += 1000.0 * (-0.5 * (d / sigma).powi(2)).exp();
                }
                let dt = i as f64 - (c + 0.25 * fs);
                if dt.abs() < 0.2 * fs {
                    *v += 150.0 * (-0.5 * (dt / (0.04 * fs)).powi(2)).exp();
                }
            }
            t += period_s;
        }
        for (i, v) in x.iter_mut().enumerate() {
            *v = (*v + 40.0 * (i as f64 / fs * 0.7).sin()).round();
        }
        (x, truth)
    }
}
