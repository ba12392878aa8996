//! Activity-sensing inputs: raw smartphone channels reduced to the short
//! textual states that fill the activity prompt templates.

use crate::dsp::{find_peaks, Band, Iir};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::BufRead;
use thiserror::Error;

pub const GRAVITY: f64 = 9.81;
pub const DEFAULT_RSSI_THRESHOLD: i32 = -70;

const STEP_LOWPASS_HZ: f64 = 3.0;
const STEP_MIN_PROMINENCE: f64 = 1.5;
const STEP_MIN_GAP_S: f64 = 0.3;

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("accelerometer trace has no samples")]
    EmptyTrace,
    #[error("sample rate must be positive, got {0}")]
    BadRate(f64),
    #[error("trace of {samples} samples does not match {rate} Hz x {duration} s")]
    LengthMismatch { samples: usize, rate: f64, duration: f64 },
    #[error("trace lasts {0} s; at least 1 s is needed")]
    TooShort(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("window_s must be positive, got {0}")]
    BadWindow(f64),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Triaxial accelerometer samples in m/s^2.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelerometerTrace {
    sample_rate: f64,
    samples: Vec<[f64; 3]>,
    duration_s: f64,
}

impl AccelerometerTrace {
    pub fn new(sample_rate: f64, samples: Vec<[f64; 3]>, duration_s: f64) -> Result<Self, SensorError> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(SensorError::BadRate(sample_rate));
        }
        if samples.is_empty() {
            return Err(SensorError::EmptyTrace);
        }
        let expected = (sample_rate * duration_s).round();
        if (samples.len() as f64 - expected).abs() > 1.0 {
            return Err(SensorError::LengthMismatch {
                samples: samples.len(),
                rate: sample_rate,
                duration: duration_s,
            });
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SensorError::NonFinite("accelerometer samples"));
        }
        Ok(Self { sample_rate, samples, duration_s })
    }

    /// Builds a trace whose duration is implied by the sample count.
    pub fn from_samples(sample_rate: f64, samples: Vec<[f64; 3]>) -> Result<Self, SensorError> {
        let duration = samples.len() as f64 / sample_rate;
        Self::new(sample_rate, samples, duration)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[[f64; 3]] {
        &self.samples
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub steps_per_minute: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteMeasurement {
    pub prn: u32,
    pub cn0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteSummary {
    pub count: usize,
    pub avg_cn0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WifiAp {
    pub ssid: String,
    pub rssi: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    Stationary,
    Walking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Indoors,
    Outdoors,
}

impl Motion {
    pub fn as_str(self) -> &'static str {
        match self {
            Motion::Stationary => "stationary",
            Motion::Walking => "walking",
        }
    }
}

impl Environment {
    pub fn as_str(self) -> &'static str {
        match self {
            Environment::Indoors => "indoors",
            Environment::Outdoors => "outdoors",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub motion: Motion,
    pub environment: Environment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssid_informative: Option<bool>,
}

/// One activity-sensing instance after preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSnapshot {
    pub step: StepSummary,
    pub satellites: SatelliteSummary,
    pub wifi: Vec<WifiAp>,
    pub window_s: f64,
    pub labels: GroundTruth,
}

/// One line of the snapshot dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub step_per_min: f64,
    pub satellites: Vec<SatelliteMeasurement>,
    pub wifi: Vec<WifiAp>,
    pub window_s: f64,
    pub labels: GroundTruth,
}

impl SnapshotRecord {
    pub fn to_snapshot(&self) -> Result<SensorSnapshot, SensorError> {
        if !self.step_per_min.is_finite() || self.step_per_min < 0.0 {
            return Err(SensorError::NonFinite("step_per_min"));
        }
        if self.satellites.iter().any(|s| !s.cn0.is_finite()) {
            return Err(SensorError::NonFinite("satellite cn0"));
        }
        if !(self.window_s > 0.0) {
            return Err(SensorError::BadWindow(self.window_s));
        }
        Ok(SensorSnapshot {
            step: StepSummary { steps_per_minute: self.step_per_min },
            satellites: summarize_satellites(&self.satellites),
            wifi: filter_wifi(&self.wifi, DEFAULT_RSSI_THRESHOLD),
            window_s: self.window_s,
            labels: self.labels.clone(),
        })
    }
}

/// Reads a JSON Lines snapshot file. Instances without an `id` are named by
/// their zero-based line number.
pub fn read_snapshots<R: BufRead>(reader: R) -> Result<Vec<(String, SnapshotRecord)>, SensorError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| SensorError::Format { line: n + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SnapshotRecord = serde_json::from_str(&line)
            .map_err(|e| SensorError::Format { line: n + 1, message: e.to_string() })?;
        let id = rec.id.clone().unwrap_or_else(|| out.len().to_string());
        out.push((id, rec));
    }
    Ok(out)
}

/// Reference step counter: gravity-removed acceleration magnitude, 3 Hz
/// low-pass, then peaks with prominence >= 1.5 m/s^2 at least 0.3 s apart.
pub fn count_steps(trace: &AccelerometerTrace) -> Result<StepSummary, SensorError> {
    if trace.duration_s < 1.0 {
        return Err(SensorError::TooShort(trace.duration_s));
    }
    let fs = trace.sample_rate;
    let magnitude: Vec<f64> = trace
        .samples
        .iter()
        .map(|[x, y, z]| (x * x + y * y + z * z).sqrt() - GRAVITY)
        .collect();
    let cutoff = STEP_LOWPASS_HZ.min(0.45 * fs);
    let smoothed = Iir::butterworth(2, Band::Lowpass(cutoff), fs).apply(&magnitude);
    let gap = (STEP_MIN_GAP_S * fs).ceil() as usize;
    let steps = find_peaks(&smoothed, STEP_MIN_PROMINENCE, gap).len();
    Ok(StepSummary { steps_per_minute: steps as f64 * 60.0 / trace.duration_s })
}

pub fn summarize_satellites(measurements: &[SatelliteMeasurement]) -> SatelliteSummary {
    let count = measurements.len();
    let avg_cn0 = (count > 0).then(|| measurements.iter().map(|m| m.cn0).sum::<f64>() / count as f64);
    SatelliteSummary { count, avg_cn0 }
}

/// Drops access points weaker than `threshold_dbm`; an AP exactly at the
/// threshold is kept.
pub fn filter_wifi(aps: &[WifiAp], threshold_dbm: i32) -> Vec<WifiAp> {
    aps.iter().filter(|ap| ap.rssi >= threshold_dbm).cloned().collect()
}

pub type FieldMap = BTreeMap<String, String>;

pub const ACTIVITY_FIELDS: [&str; 5] = [
    "DATA_STEP",
    "DATA_SATELLITE_COUNT",
    "DATA_SATELLITE_SNR",
    "DATA_WIFI_COUNT",
    "DATA_WIFI_LIST",
];

/// Renders the snapshot into the five activity placeholders.
pub fn textualize(snapshot: &SensorSnapshot) -> FieldMap {
    let mut fields = FieldMap::new();
    fields.insert("DATA_STEP".into(), format_steps(snapshot.step.steps_per_minute));
    fields.insert("DATA_SATELLITE_COUNT".into(), snapshot.satellites.count.to_string());
    fields.insert(
        "DATA_SATELLITE_SNR".into(),
        format!("{:.2}", snapshot.satellites.avg_cn0.unwrap_or(0.0)),
    );
    fields.insert("DATA_WIFI_COUNT".into(), snapshot.wifi.len().to_string());
    fields.insert("DATA_WIFI_LIST".into(), format_ssid_list(&snapshot.wifi));
    fields
}

/// One decimal place, with a trailing `.0` dropped ("5.2", "5", "120").
pub fn format_steps(steps_per_minute: f64) -> String {
    let rounded = (steps_per_minute * 10.0).round() / 10.0;
    if rounded == rounded.trunc() {
        format!("{}", rounded as i64)
    } else {
        format!("{rounded:.1}")
    }
}

/// `['ssid1', 'ssid2']`; SSIDs are written verbatim, quotes included.
pub fn format_ssid_list(aps: &[WifiAp]) -> String {
    let inner: Vec<String> = aps.iter().map(|ap| format!("'{}'", ap.ssid)).collect();
    format!("[{}]", inner.join(", "))
}
