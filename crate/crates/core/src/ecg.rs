//! ECG preparation: decimation, integer quantization and windowing into
//! prompt-sized queries.

use crate::wfdb::EcgRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const QUERY_RATE: f64 = 72.0;
pub const DEFAULT_WINDOW_S: f64 = 5.0;
pub const SWEEP_WINDOWS: [f64; 4] = [2.5, 5.0, 7.5, 10.0];

#[derive(Debug, Error, PartialEq)]
pub enum EcgError {
    #[error("{fs} Hz cannot be decimated to {target} Hz by an integer stride")]
    NonIntegerStride { fs: f64, target: f64 },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("window of {window} samples exceeds the {available} available")]
    WindowTooLarge { window: usize, available: usize },
    #[error("window length must be positive, got {0} s")]
    BadWindow(f64),
    #[error("queries are cut from 72 Hz records; this one is {0} Hz")]
    NotDownsampled(f64),
    #[error("query has no samples")]
    EmptyQuery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum WindowMode {
    Sequential,
    Random { seed: u64 },
}

/// One ECG prompt input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcgQuery {
    pub record: String,
    /// First sample of the window at the stored record's rate.
    pub start: usize,
    pub window_s: f64,
    pub values: Vec<i64>,
    pub truth_peaks: usize,
    pub truth_hr: f64,
    /// Annotated beat positions relative to the window start.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub peak_positions: Vec<usize>,
}

/// A window of a record at its own rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Keeps every `fs / target_fs`-th sample starting at 0; beats map to
/// `index / stride`.
pub fn downsample(record: &EcgRecord, target_fs: f64) -> Result<EcgRecord, EcgError> {
    let ratio = record.sample_rate / target_fs;
    let stride = ratio.round();
    if !(target_fs > 0.0) || stride < 1.0 || (ratio - stride).abs() > 1e-9 {
        return Err(EcgError::NonIntegerStride { fs: record.sample_rate, target: target_fs });
    }
    let stride = stride as usize;
    let samples = record.samples.iter().step_by(stride).copied().collect();
    let mut peaks: Vec<usize> = record.peak_indices.iter().map(|p| p / stride).collect();
    peaks.dedup();
    Ok(EcgRecord {
        name: record.name.clone(),
        samples,
        sample_rate: target_fs,
        peak_indices: peaks,
        stride: record.stride * stride,
    })
}

/// Integer part of each value (truncation toward zero).
pub fn quantize(values: &[f64]) -> Result<Vec<i64>, EcgError> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| if v.is_finite() { Ok(v.trunc() as i64) } else { Err(EcgError::NonFinite(i)) })
        .collect()
}

pub fn heart_rate(peak_count: usize, window_s: f64) -> f64 {
    peak_count as f64 * 60.0 / window_s
}

pub fn window_len(window_s: f64, fs: f64) -> usize {
    (window_s * fs).round() as usize
}

/// Window placement over `n_samples`. Sequential tiles from 0 without
/// overlap; random draws uniform starts. `count` caps the number returned.
pub fn plan_windows(
    n_samples: usize,
    fs: f64,
    window_s: f64,
    mode: WindowMode,
    count: Option<usize>,
) -> Result<Vec<Window>, EcgError> {
    if !(window_s > 0.0) {
        return Err(EcgError::BadWindow(window_s));
    }
    let len = window_len(window_s, fs);
    if len == 0 {
        return Err(EcgError::BadWindow(window_s));
    }
    if len > n_samples {
        return Err(EcgError::WindowTooLarge { window: len, available: n_samples });
    }
    Ok(match mode {
        WindowMode::Sequential => {
            let tiles = n_samples / len;
            (0..count.map_or(tiles, |c| c.min(tiles))).map(|k| Window { start: k * len, len }).collect()
        }
        WindowMode::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = count.unwrap_or(n_samples / len);
            (0..n).map(|_| Window { start: rng.gen_range(0..=n_samples - len), len }).collect()
        }
    })
}

/// Beats inside the half-open window.
pub fn peaks_in(peaks: &[usize], w: Window) -> &[usize] {
    let lo = peaks.partition_point(|&p| p < w.start);
    let hi = peaks.partition_point(|&p| p < w.end());
    &peaks[lo..hi]
}

/// Cuts queries from a 72 Hz record.
pub fn extract_queries(
    record: &EcgRecord,
    window_s: f64,
    mode: WindowMode,
    count: Option<usize>,
) -> Result<Vec<EcgQuery>, EcgError> {
    if (record.sample_rate - QUERY_RATE).abs() > 1e-9 {
        return Err(EcgError::NotDownsampled(record.sample_rate));
    }
    let windows = plan_windows(record.samples.len(), record.sample_rate, window_s, mode, count)?;
    Ok(windows
        .into_iter()
        .map(|w| {
            let inside = peaks_in(&record.peak_indices, w);
            EcgQuery {
                record: record.name.clone(),
                start: w.start * record.stride,
                window_s,
                values: record.samples[w.start..w.end()].iter().map(|&v| v as i64).collect(),
                truth_peaks: inside.len(),
                truth_hr: heart_rate(inside.len(), window_s),
                peak_positions: inside.iter().map(|p| p - w.start).collect(),
            }
        })
        .collect())
}
