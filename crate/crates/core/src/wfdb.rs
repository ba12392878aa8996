//! Reader for PhysioNet WFDB records stored in format 212 with MIT-format
//! annotation files.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WfdbError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported storage format {0}; only 212 is read")]
    UnsupportedFormat(String),
    #[error("malformed annotation file: {0}")]
    MalformedAnnotation(String),
    #[error("no channel named {0:?}")]
    ChannelNotFound(String),
    #[error("signal holds {found} samples per channel, header says {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub file_name: String,
    pub storage_format: u32,
    pub byte_offset: usize,
    pub adc_gain: f64,
    pub baseline: i32,
    pub units: String,
    pub adc_resolution: u32,
    pub adc_zero: i32,
    pub initial_value: i32,
    pub checksum: i32,
    pub block_size: u32,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub record_name: String,
    pub n_signals: usize,
    pub sample_rate: f64,
    pub n_samples: usize,
    pub signals: Vec<SignalSpec>,
}

/// One channel of a record with its beat annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcgRecord {
    pub name: String,
    pub samples: Vec<i32>,
    pub sample_rate: f64,
    pub peak_indices: Vec<usize>,
    /// Decimation applied relative to the stored record (1 when untouched).
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

impl EcgRecord {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

fn header_err(msg: impl Into<String>) -> WfdbError {
    WfdbError::MalformedHeader(msg.into())
}

pub fn parse_header(bytes: &[u8]) -> Result<RecordHeader, WfdbError> {
    let text = std::str::from_utf8(bytes).map_err(|_| header_err("not UTF-8 text"))?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));

    let record_line = lines.next().ok_or_else(|| header_err("empty header"))?;
    let fields: Vec<&str> = record_line.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(header_err(format!("record line {record_line:?}")));
    }
    let record_name = fields[0].to_string();
    if record_name.contains('/') {
        return Err(header_err("multi-segment records are not supported"));
    }
    let n_signals: usize = fields[1]
        .parse()
        .map_err(|_| header_err(format!("signal count {:?}", fields[1])))?;
    if n_signals == 0 {
        return Err(header_err("record has no signals"));
    }
    let sample_rate = match fields.get(2) {
        Some(f) => {
            let rate = f.split(['/', '(']).next().unwrap_or(f);
            rate.parse::<f64>().map_err(|_| header_err(format!("sample rate {f:?}")))?
        }
        None => 250.0,
    };
    if !(sample_rate > 0.0) {
        return Err(header_err(format!("sample rate {sample_rate}")));
    }
    let n_samples: usize = match fields.get(3) {
        Some(f) => f.parse().map_err(|_| header_err(format!("sample count {f:?}")))?,
        None => 0,
    };
    if n_samples == 0 {
        return Err(header_err("sample count missing or zero"));
    }

    let mut signals = Vec::with_capacity(n_signals);
    for _ in 0..n_signals {
        let line = lines.next().ok_or_else(|| header_err("fewer signal lines than declared"))?;
        signals.push(parse_signal_line(line)?);
    }
    Ok(RecordHeader { record_name, n_signals, sample_rate, n_samples, signals })
}

fn parse_signal_line(line: &str) -> Result<SignalSpec, WfdbError> {
    let mut parts = line.splitn(9, char::is_whitespace).filter(|s| !s.is_empty());
    let file_name = parts.next().ok_or_else(|| header_err("blank signal line"))?.to_string();
    let fmt_field = parts.next().ok_or_else(|| header_err(format!("no format in {line:?}")))?;

    let fmt_digits: String = fmt_field.chars().take_while(char::is_ascii_digit).collect();
    if fmt_digits != "212" {
        return Err(WfdbError::UnsupportedFormat(fmt_field.to_string()));
    }
    if fmt_field[3..].starts_with('x') {
        return Err(WfdbError::UnsupportedFormat(fmt_field.to_string()));
    }
    let byte_offset = match fmt_field.split_once('+') {
        Some((_, off)) => off.parse().map_err(|_| header_err(format!("byte offset in {fmt_field:?}")))?,
        None => 0,
    };

    let int = |s: Option<&str>, what: &str| -> Result<Option<i64>, WfdbError> {
        s.map(|v| v.parse::<i64>().map_err(|_| header_err(format!("{what} {v:?}"))))
            .transpose()
    };

    let gain_field = parts.next();
    let adc_resolution = int(parts.next(), "ADC resolution")?.unwrap_or(12) as u32;
    let adc_zero = int(parts.next(), "ADC zero")?.unwrap_or(0) as i32;
    let initial_value = int(parts.next(), "initial value")?.unwrap_or(0) as i32;
    let checksum = int(parts.next(), "checksum")?.unwrap_or(0) as i32;
    let block_size = int(parts.next(), "block size")?.unwrap_or(0) as u32;
    let description = parts.next().map(|s| s.trim().to_string()).unwrap_or_default();

    let (mut adc_gain, mut baseline, mut units) = (200.0, adc_zero, String::from("mV"));
    if let Some(g) = gain_field {
        let (head, unit) = match g.split_once('/') {
            Some((h, u)) => (h, Some(u)),
            None => (g, None),
        };
        let (gain_text, base_text) = match head.split_once('(') {
            Some((gt, rest)) => (gt, Some(rest.trim_end_matches(')'))),
            None => (head, None),
        };
        let gain: f64 = gain_text.parse().map_err(|_| header_err(format!("gain {g:?}")))?;
        if gain != 0.0 {
            adc_gain = gain;
        }
        if let Some(b) = base_text {
            baseline = b.parse().map_err(|_| header_err(format!("baseline {g:?}")))?;
        }
        if let Some(u) = unit {
            units = u.to_string();
        }
    }

    Ok(SignalSpec {
        file_name,
        storage_format: 212,
        byte_offset,
        adc_gain,
        baseline,
        units,
        adc_resolution,
        adc_zero,
        initial_value,
        checksum,
        block_size,
        description,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded212 {
    /// One sequence per signal.
    pub signals: Vec<Vec<i32>>,
    /// Set when trailing bytes or an incomplete frame were dropped.
    pub truncated: bool,
}

fn sign_extend_12(v: u16) -> i32 {
    ((v as i32) << 20) >> 20
}

/// Decodes packed 212 data. Samples alternate across signals in frame order.
pub fn parse_212(bytes: &[u8], n_signals: usize) -> Decoded212 {
    let n_signals = n_signals.max(1);
    let mut flat = Vec::with_capacity(bytes.len() / 3 * 2);
    for g in bytes.chunks_exact(3) {
        let (b0, b1, b2) = (g[0] as u16, g[1] as u16, g[2] as u16);
        flat.push(sign_extend_12(((b1 & 0x0F) << 8) | b0));
        flat.push(sign_extend_12(((b1 & 0xF0) << 4) | b2));
    }
    let mut truncated = bytes.len() % 3 != 0;
    let frames = flat.len() / n_signals;
    if frames * n_signals != flat.len() {
        // a lone sample in the last triplet of an odd frame count is padding
        truncated |= flat.len() - frames * n_signals > 1 || n_signals % 2 == 0;
    }
    let mut signals = vec![Vec::with_capacity(frames); n_signals];
    for frame in flat.chunks_exact(n_signals) {
        for (s, &v) in signals.iter_mut().zip(frame) {
            s.push(v);
        }
    }
    Decoded212 { signals, truncated }
}

/// Packs interleaved signals into 212 bytes. Values are wrapped to 12 bits;
/// an odd total is padded with a zero sample.
pub fn encode_212(signals: &[Vec<i32>]) -> Vec<u8> {
    let frames = signals.iter().map(Vec::len).min().unwrap_or(0);
    let mut flat: Vec<u16> = Vec::with_capacity(frames * signals.len() + 1);
    for i in 0..frames {
        for s in signals {
            flat.push((s[i] as u16) & 0x0FFF);
        }
    }
    if flat.len() % 2 == 1 {
        flat.push(0);
    }
    let mut out = Vec::with_capacity(flat.len() / 2 * 3);
    for pair in flat.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        out.push((a & 0xFF) as u8);
        out.push((((a >> 8) & 0x0F) | ((b >> 4) & 0xF0)) as u8);
        out.push((b & 0xFF) as u8);
    }
    out
}

/// 16-bit checksum of a signal (sum of samples, wrapped).
pub fn signal_checksum(samples: &[i32]) -> u16 {
    samples.iter().fold(0i64, |acc, &v| acc + v as i64) as u16
}

/// Header checksums appear both signed and unsigned in the wild.
pub fn checksum_matches(samples: &[i32], stored: i32) -> bool {
    signal_checksum(samples) == stored as u16
}

pub const MIT_SKIP: u8 = 59;
pub const MIT_NUM: u8 = 60;
pub const MIT_SUB: u8 = 61;
pub const MIT_CHN: u8 = 62;
pub const MIT_AUX: u8 = 63;

pub fn is_beat_code(code: u8) -> bool {
    matches!(code, 1..=13 | 25 | 34..=38)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub time: u64,
    pub code: u8,
    pub subtype: i8,
    pub chan: u8,
    pub num: i8,
    pub aux: Vec<u8>,
}

fn ann_err(msg: impl Into<String>) -> WfdbError {
    WfdbError::MalformedAnnotation(msg.into())
}

/// Decodes every annotation in an MIT-format annotation file. `chan` and
/// `num` carry over from the previous annotation, as in the format's writer.
pub fn parse_annotation_list(bytes: &[u8]) -> Result<Vec<Annotation>, WfdbError> {
    let word = |pos: usize| -> Option<u16> {
        bytes.get(pos..pos + 2).map(|w| u16::from_le_bytes([w[0], w[1]]))
    };
    let mut out: Vec<Annotation> = Vec::new();
    let mut time: u64 = 0;
    let mut pos = 0;
    let (mut chan, mut num) = (0u8, 0i8);
    while pos + 1 < bytes.len() {
        let w = word(pos).unwrap();
        pos += 2;
        let code = (w >> 10) as u8;
        let interval = (w & 0x03FF) as u64;
        match code {
            0 if interval == 0 => return Ok(out),
            MIT_SKIP => {
                let hi = word(pos).ok_or_else(|| ann_err("SKIP interval truncated"))?;
                let lo = word(pos + 2).ok_or_else(|| ann_err("SKIP interval truncated"))?;
                pos += 4;
                let skip = (((hi as u32) << 16) | lo as u32) as i32;
                time = time
                    .checked_add_signed(skip as i64)
                    .ok_or_else(|| ann_err("SKIP moves time before zero"))?;
            }
            MIT_NUM => {
                num = interval as u16 as i16 as i8;
                if let Some(last) = out.last_mut() {
                    last.num = num;
                }
            }
            MIT_SUB => {
                if let Some(last) = out.last_mut() {
                    last.subtype = (interval as u8) as i8;
                }
            }
            MIT_CHN => {
                chan = interval as u8;
                if let Some(last) = out.last_mut() {
                    last.chan = chan;
                }
            }
            MIT_AUX => {
                let len = interval as usize;
                let data = bytes.get(pos..pos + len).ok_or_else(|| ann_err("AUX data truncated"))?;
                if let Some(last) = out.last_mut() {
                    last.aux = data.to_vec();
                }
                pos += len + (len % 2);
            }
            _ => {
                time += interval;
                out.push(Annotation { time, code, subtype: 0, chan, num, aux: Vec::new() });
            }
        }
    }
    if pos < bytes.len() {
        return Err(ann_err("odd trailing byte"));
    }
    Ok(out)
}

/// Sample times of beat annotations, strictly increasing.
pub fn parse_annotations(bytes: &[u8]) -> Result<Vec<usize>, WfdbError> {
    let beats: Vec<usize> = parse_annotation_list(bytes)?
        .into_iter()
        .filter(|a| is_beat_code(a.code))
        .map(|a| a.time as usize)
        .collect();
    if let Some(w) = beats.windows(2).find(|w| w[1] <= w[0]) {
        return Err(ann_err(format!("beat at {} does not follow beat at {}", w[1], w[0])));
    }
    Ok(beats)
}

pub const DEFAULT_CHANNEL: &str = "MLII";

/// Builds a single-channel record from the header and the raw file contents.
pub fn load_record(
    header: &RecordHeader,
    signal_bytes: &[u8],
    annotation_bytes: &[u8],
    channel: &str,
) -> Result<EcgRecord, WfdbError> {
    let idx = header
        .signals
        .iter()
        .position(|s| s.description == channel)
        .ok_or_else(|| WfdbError::ChannelNotFound(channel.to_string()))?;
    let offset = header.signals[0].byte_offset.min(signal_bytes.len());
    let decoded = parse_212(&signal_bytes[offset..], header.n_signals);
    if decoded.truncated {
        log::warn!("{}: dropped a partial 212 frame", header.record_name);
    }
    let mut samples = decoded.signals.into_iter().nth(idx).unwrap_or_default();
    if samples.len() < header.n_samples {
        return Err(WfdbError::LengthMismatch { expected: header.n_samples, found: samples.len() });
    }
    samples.truncate(header.n_samples);
    let peaks = parse_annotations(annotation_bytes)?;
    if let Some(&p) = peaks.iter().find(|&&p| p >= samples.len()) {
        return Err(ann_err(format!("beat at {p} lies past the end of the signal")));
    }
    Ok(EcgRecord {
        name: header.record_name.clone(),
        samples,
        sample_rate: header.sample_rate,
        peak_indices: peaks,
        stride: 1,
    })
}

fn read(path: PathBuf) -> Result<Vec<u8>, WfdbError> {
    fs::read(&path).map_err(|source| WfdbError::Io { path, source })
}

/// Reads `<dir>/<name>.hea`, its signal file and `<name>.<annotator>`.
pub fn read_record(dir: &Path, name: &str, annotator: &str, channel: &str) -> Result<EcgRecord, WfdbError> {
    let header = parse_header(&read(dir.join(format!("{name}.hea")))?)?;
    let signal = read(dir.join(&header.signals[0].file_name))?;
    let ann = read(dir.join(format!("{name}.{annotator}")))?;
    load_record(&header, &signal, &ann, channel)
}

/// The JSON Lines form of a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub record: String,
    pub fs: f64,
    pub samples: Vec<i32>,
    pub peaks: Vec<usize>,
}

impl From<&EcgRecord> for RecordLine {
    fn from(r: &EcgRecord) -> Self {
        RecordLine {
            record: r.name.clone(),
            fs: r.sample_rate,
            samples: r.samples.clone(),
            peaks: r.peak_indices.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEA: &str = "100 2 360 650000\n\
        100.dat 212 200 11 1024 995 -22131 0 MLII\n\
        100.dat 212 200 11 1024 1011 20052 0 V5\n\
        # 69 M 1085 1629 x1\n";

    #[test]
    fn header_first_line_and_signals() {
        let h = parse_header(HEA.as_bytes()).unwrap();
        assert_eq!(h.record_name, "100");
        assert_eq!((h.n_signals, h.sample_rate, h.n_samples), (2, 360.0, 650000));
        assert_eq!(h.signals[0].description, "MLII");
        assert_eq!(h.signals[1].adc_zero, 1024);
        assert_eq!(h.signals[1].baseline, 1024);
        assert_eq!(h.signals[0].checksum, -22131);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(parse_header(b""), Err(WfdbError::MalformedHeader(_))));
        assert!(matches!(parse_header(b"# only a comment\n"), Err(WfdbError::MalformedHeader(_))));
        let h16 = "r 1 360 10\nr.dat 16 200 12 0 0 0 0 I\n";
        assert!(matches!(parse_header(h16.as_bytes()), Err(WfdbError::UnsupportedFormat(f)) if f == "16"));
        let short = "r 2 360 10\nr.dat 212 200 12 0 0 0 0 I\n";
        assert!(matches!(parse_header(short.as_bytes()), Err(WfdbError::MalformedHeader(_))));
    }

    #[test]
    fn gain_with_baseline_and_units() {
        let h = parse_header(b"s 1 360 4\ns.dat 212 200.0(1024)/mV 12 0 1230 20475 0 MLII\n").unwrap();
        let s = &h.signals[0];
        assert_eq!((s.adc_gain, s.baseline, s.adc_zero), (200.0, 1024, 0));
        assert_eq!(s.units, "mV");
        assert_eq!(s.initial_value, 1230);
    }

    #[test]
    fn bit_layout() {
        let d = parse_212(&[0xE8, 0x03, 0x3F], 2);
        assert_eq!(d.signals, vec![vec![1000], vec![63]]);
        let d = parse_212(&[0x00, 0x08, 0x00], 2);
        assert_eq!(d.signals, vec![vec![-2048], vec![0]]);
        // the high nibble of the middle byte belongs to the second sample
        let d = parse_212(&[0x00, 0xF8, 0x00], 2);
        assert_eq!(d.signals, vec![vec![-2048], vec![-256]]);
        assert!(!d.truncated);
        let d = parse_212(&[0xE8, 0x03, 0x3F, 0x01], 2);
        assert!(d.truncated);
        assert_eq!(d.signals[0], vec![1000]);
    }

    #[test]
    fn encode_matches_layout() {
        assert_eq!(encode_212(&[vec![1000], vec![63]]), vec![0xE8, 0x03, 0x3F]);
        assert_eq!(encode_212(&[vec![-2048], vec![0]]), vec![0x00, 0x08, 0x00]);
        assert_eq!(encode_212(&[vec![-2048], vec![-256]]), vec![0x00, 0xF8, 0x00]);
    }

    #[test]
    fn annotation_words() {
        assert_eq!(parse_annotations(&0x0405u16.to_le_bytes()).unwrap(), vec![5]);
        let bytes: Vec<u8> = [0x0405u16, 0x040A, 0x0000].iter().flat_map(|w| w.to_le_bytes()).collect();
        assert_eq!(parse_annotations(&bytes).unwrap(), vec![5, 15]);
    }

    fn words(ws: &[u16]) -> Vec<u8> {
        ws.iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    #[test]
    fn skip_aux_and_modifiers() {
        // rhythm '+' (28) at 18 with aux "(N", SKIP 100000, N beat at +7
        let mut b = words(&[(28 << 10) | 18, (63 << 10) | 3]);
        b.extend_from_slice(b"(N\0\0");
        b.extend(words(&[(59 << 10), 0x0001, 0x86A0, (1 << 10) | 7, (61 << 10) | 1, (62 << 10) | 1, 0]));
        let list = parse_annotation_list(&b).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[0].aux, b"(N\0".to_vec());
        assert_eq!(list[1].time, 18 + 100_000 + 7);
        assert_eq!((list[1].subtype, list[1].chan), (1, 1));
        assert_eq!(parse_annotations(&b).unwrap(), vec![100_025]);
    }

    #[test]
    fn annotation_errors() {
        let b = words(&[(59 << 10), 0x0001]);
        assert!(matches!(parse_annotations(&b), Err(WfdbError::MalformedAnnotation(_))));
        let mut b = words(&[(1 << 10) | 4, (63 << 10) | 6]);
        b.extend_from_slice(b"ab");
        assert!(matches!(parse_annotations(&b), Err(WfdbError::MalformedAnnotation(_))));
        let b = words(&[(1 << 10) | 4, (5 << 10)]);
        assert!(matches!(parse_annotations(&b), Err(WfdbError::MalformedAnnotation(_))));
    }

    #[test]
    fn load_selects_channel() {
        let header = parse_header(b"t 2 360 3\nt.dat 212 200 12 0 0 0 0 MLII\nt.dat 212 200 12 0 0 0 0 V1\n").unwrap();
        let sig = encode_212(&[vec![1, 2, 3], vec![-1, -2, -3]]);
        let ann = words(&[(1 << 10) | 1, 0]);
        let r = load_record(&header, &sig, &ann, "V1").unwrap();
        assert_eq!(r.samples, vec![-1, -2, -3]);
        assert_eq!(r.peak_indices, vec![1]);
        assert!(matches!(load_record(&header, &sig, &ann, "V9"), Err(WfdbError::ChannelNotFound(_))));
        let late = words(&[(1 << 10) | 9, 0]);
        assert!(load_record(&header, &sig, &late, "MLII").is_err());
    }

    #[test]
    fn checksum_wraps_to_signed_16_bits() {
        assert_eq!(signal_checksum(&[1, 2, 3]), 6);
        assert!(checksum_matches(&[40000], 40000 - 65536));
        assert!(checksum_matches(&[40000], 40000));
        assert!(checksum_matches(&[-5], -5));
    }
}
