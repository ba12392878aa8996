//! Evaluation metrics and reports.

use crate::ecg::heart_rate;
use crate::parse::{extract_location, ActivityParse, RPeakParse};
use crate::sensor::GroundTruth;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("nothing to evaluate")]
    EmptyEval,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no instance has an informative SSID list")]
    NoInformativeInstances,
    #[error("every instance was a hallucination")]
    AllHallucinated,
    #[error("score given for unknown instance {0}")]
    UnknownInstance(String),
}

fn same_len(left: usize, right: usize) -> Result<(), MetricError> {
    if left == right {
        Ok(())
    } else {
        Err(MetricError::LengthMismatch { left, right })
    }
}

fn rate(hits: usize, total: usize) -> Result<f64, MetricError> {
    if total == 0 {
        return Err(MetricError::EmptyEval);
    }
    Ok(hits as f64 / total as f64)
}

pub fn failure_rate(parses: &[ActivityParse]) -> Result<f64, MetricError> {
    rate(parses.iter().filter(|p| p.failed).count(), parses.len())
}

/// Share of answers carrying both states; adds to `failure_rate` to exactly 1.
pub fn valid_rate(parses: &[ActivityParse]) -> Result<f64, MetricError> {
    Ok(1.0 - failure_rate(parses)?)
}

pub fn hallucination_rate(parses: &[RPeakParse]) -> Result<f64, MetricError> {
    rate(parses.iter().filter(|p| p.hallucinated).count(), parses.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subtask {
    Motion,
    Environment,
}

fn is_correct(p: &ActivityParse, t: &GroundTruth, subtask: Subtask) -> bool {
    match subtask {
        Subtask::Motion => p.motion == Some(t.motion),
        Subtask::Environment => p.environment == Some(t.environment),
    }
}

/// Correct over total. A failed parse is counted as incorrect, even when
/// the other state was valid.
pub fn accuracy(parses: &[ActivityParse], truths: &[GroundTruth], subtask: Subtask) -> Result<f64, MetricError> {
    same_len(parses.len(), truths.len())?;
    let correct = parses.iter().zip(truths).filter(|(p, t)| !p.failed && is_correct(p, t, subtask)).count();
    rate(correct, parses.len())
}

/// Per-instance location judgment. `correct` overrides the default, which
/// counts a claim correct exactly when the SSID list was informative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationLabel {
    pub informative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

impl LocationLabel {
    fn claim_correct(&self) -> bool {
        self.correct.unwrap_or(self.informative)
    }
}

/// (precision, recall). Precision is `None` when no claim was made.
pub fn location_pr(claimed: &[bool], labels: &[LocationLabel]) -> Result<(Option<f64>, f64), MetricError> {
    same_len(claimed.len(), labels.len())?;
    let informative = labels.iter().filter(|l| l.informative).count();
    if informative == 0 {
        return Err(MetricError::NoInformativeInstances);
    }
    let emitted = claimed.iter().filter(|c| **c).count();
    let correct = claimed.iter().zip(labels).filter(|(c, l)| **c && l.claim_correct()).count();
    let found = claimed.iter().zip(labels).filter(|(c, l)| **c && l.informative && l.claim_correct()).count();
    let precision = (emitted > 0).then(|| correct as f64 / emitted as f64);
    Ok((precision, found as f64 / informative as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChrfConfig {
    pub max_n: usize,
    pub beta: f64,
    /// Keep (single) spaces inside n-grams; otherwise all whitespace is removed.
    pub whitespace: bool,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        ChrfConfig { max_n: 6, beta: 2.0, whitespace: false }
    }
}

fn char_ngrams(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut counts = HashMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn prepare(s: &str, whitespace: bool) -> Vec<char> {
    if whitespace {
        s.split_whitespace().collect::<Vec<_>>().join(" ").chars().collect()
    } else {
        s.chars().filter(|c| !c.is_whitespace()).collect()
    }
}

/// chrF with the default configuration (n up to 6, beta 2, spaces kept).
pub fn chrf(hypothesis: &str, reference: &str) -> f64 {
    chrf_with(hypothesis, reference, &ChrfConfig::default())
}

/// Character n-gram F-score in [0, 1]. Precision and recall are averaged
/// over the orders both sides have n-grams for, then combined.
pub fn chrf_with(hypothesis: &str, reference: &str, cfg: &ChrfConfig) -> f64 {
    let hyp = prepare(hypothesis, cfg.whitespace);
    let refr = prepare(reference, cfg.whitespace);
    match (hyp.is_empty(), refr.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let (mut prec, mut rec, mut orders) = (0.0, 0.0, 0usize);
    for n in 1..=cfg.max_n {
        let h = char_ngrams(&hyp, n);
        let r = char_ngrams(&refr, n);
        let n_hyp: usize = h.values().sum();
        let n_ref: usize = r.values().sum();
        if n_hyp == 0 || n_ref == 0 {
            continue;
        }
        let matched: usize = h.iter().map(|(g, c)| (*c).min(*r.get(g).unwrap_or(&0))).sum();
        prec += matched as f64 / n_hyp as f64;
        rec += matched as f64 / n_ref as f64;
        orders += 1;
    }
    if orders == 0 {
        return 0.0;
    }
    let (p, r) = (prec / orders as f64, rec / orders as f64);
    if p + r == 0.0 {
        return 0.0;
    }
    let b2 = cfg.beta * cfg.beta;
    (1.0 + b2) * p * r / (b2 * p + r)
}

pub fn mae_bpm(detected: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    same_len(detected.len(), truth.len())?;
    if detected.is_empty() {
        return Err(MetricError::AllHallucinated);
    }
    Ok(detected.iter().zip(truth).map(|(d, t)| (d - t).abs()).sum::<f64>() / detected.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Activity,
    Ecg,
    EcgVision,
    Baseline,
}

/// One evaluated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceRow {
    Activity {
        instance_id: String,
        #[serde(flatten)]
        parse: ActivityParse,
        truth: GroundTruth,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        location_claim: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chrf: Option<f64>,
    },
    Ecg {
        instance_id: String,
        peaks: Vec<f64>,
        hallucinated: bool,
        window_s: f64,
        truth_peaks: usize,
        truth_hr: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detected_hr: Option<f64>,
    },
}

impl InstanceRow {
    pub fn instance_id(&self) -> &str {
        match self {
            InstanceRow::Activity { instance_id, .. } | InstanceRow::Ecg { instance_id, .. } => instance_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_s: Option<f64>,
    pub n_instances: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chrf: Option<f64>,
    /// Reserved: supplied from an external scorer, never computed here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bertscore: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mae_bpm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hallucination_rate: Option<f64>,
    pub rows: Vec<InstanceRow>,
}

impl EvalReport {
    fn empty(task: TaskKind, rows: Vec<InstanceRow>) -> Self {
        EvalReport {
            task,
            scheme: None,
            detector: None,
            window_s: None,
            n_instances: rows.len(),
            failure_rate: None,
            motion_accuracy: None,
            environment_accuracy: None,
            location_precision: None,
            location_recall: None,
            chrf: None,
            bertscore: None,
            mae_bpm: None,
            hallucination_rate: None,
            rows,
        }
    }
}

/// Input for one activity instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityInstance {
    pub instance_id: String,
    pub parse: ActivityParse,
    pub truth: GroundTruth,
    /// Manual judgment of the location claim, when one exists.
    pub location_correct: Option<bool>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Rows are sorted by instance id first, so the report does not depend on
/// input order.
pub fn activity_report(mut instances: Vec<ActivityInstance>) -> Result<EvalReport, MetricError> {
    if instances.is_empty() {
        return Err(MetricError::EmptyEval);
    }
    instances.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let parses: Vec<ActivityParse> = instances.iter().map(|i| i.parse.clone()).collect();
    let truths: Vec<GroundTruth> = instances.iter().map(|i| i.truth.clone()).collect();
    let claims: Vec<Option<String>> = instances.iter().map(|i| extract_location(i.parse.summary.as_deref())).collect();

    let labelled: Vec<(bool, LocationLabel)> = instances
        .iter()
        .zip(&claims)
        .filter_map(|(i, c)| {
            i.truth.ssid_informative.map(|informative| (c.is_some(), LocationLabel { informative, correct: i.location_correct }))
        })
        .collect();
    let (claimed, labels): (Vec<bool>, Vec<LocationLabel>) = labelled.into_iter().unzip();
    let pr = match location_pr(&claimed, &labels) {
        Ok(pr) => Some(pr),
        Err(MetricError::NoInformativeInstances) | Err(MetricError::EmptyEval) => None,
        Err(e) => return Err(e),
    };

    let mut chrfs = Vec::new();
    let rows: Vec<InstanceRow> = instances
        .iter()
        .zip(claims)
        .map(|(i, claim)| {
            let score = match (&claim, &i.truth.location_text) {
                (Some(c), Some(t)) => Some(chrf(c, t)),
                _ => None,
            };
            chrfs.extend(score);
            InstanceRow::Activity {
                instance_id: i.instance_id.clone(),
                parse: i.parse.clone(),
                truth: i.truth.clone(),
                location_claim: claim,
                chrf: score,
            }
        })
        .collect();

    let mut report = EvalReport::empty(TaskKind::Activity, rows);
    report.failure_rate = Some(failure_rate(&parses)?);
    report.motion_accuracy = Some(accuracy(&parses, &truths, Subtask::Motion)?);
    report.environment_accuracy = Some(accuracy(&parses, &truths, Subtask::Environment)?);
    report.location_precision = pr.and_then(|p| p.0);
    report.location_recall = pr.map(|p| p.1);
    report.chrf = mean(&chrfs);
    Ok(report)
}

/// A per-instance score from an external scorer (e.g. BERTScore).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScore {
    pub instance_id: String,
    pub score: f64,
}

/// Sets `bertscore` to the mean of the supplied scores. Every score must
/// name an instance of the report.
pub fn attach_bertscore(report: &mut EvalReport, scores: &[ExternalScore]) -> Result<(), MetricError> {
    let known: std::collections::HashSet<&str> = report.rows.iter().map(InstanceRow::instance_id).collect();
    if let Some(s) = scores.iter().find(|s| !known.contains(s.instance_id.as_str())) {
        return Err(MetricError::UnknownInstance(s.instance_id.clone()));
    }
    report.bertscore = mean(&scores.iter().map(|s| s.score).collect::<Vec<_>>());
    Ok(())
}

/// Input for one ECG instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgInstance {
    pub instance_id: String,
    pub parse: RPeakParse,
    pub window_s: f64,
    pub truth_peaks: usize,
}

/// MAE covers only instances with a parsed peak list; it is absent when
/// every instance hallucinated.
pub fn ecg_report(task: TaskKind, mut instances: Vec<EcgInstance>) -> Result<EvalReport, MetricError> {
    if instances.is_empty() {
        return Err(MetricError::EmptyEval);
    }
    instances.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let parses: Vec<RPeakParse> = instances.iter().map(|i| i.parse.clone()).collect();
    let (mut detected, mut truth) = (Vec::new(), Vec::new());
    let rows = instances
        .iter()
        .map(|i| {
            let truth_hr = heart_rate(i.truth_peaks, i.window_s);
            let detected_hr = (!i.parse.hallucinated).then(|| heart_rate(i.parse.peaks.len(), i.window_s));
            if let Some(d) = detected_hr {
                detected.push(d);
                truth.push(truth_hr);
            }
            InstanceRow::Ecg {
                instance_id: i.instance_id.clone(),
                peaks: i.parse.peaks.clone(),
                hallucinated: i.parse.hallucinated,
                window_s: i.window_s,
                truth_peaks: i.truth_peaks,
                truth_hr,
                detected_hr,
            }
        })
        .collect();
    let mut report = EvalReport::empty(task, rows);
    report.hallucination_rate = Some(hallucination_rate(&parses)?);
    report.mae_bpm = match mae_bpm(&detected, &truth) {
        Ok(m) => Some(m),
        Err(MetricError::AllHallucinated) => None,
        Err(e) => return Err(e),
    };
    let windows: Vec<f64> = instances.iter().map(|i| i.window_s).collect();
    if windows.windows(2).all(|w| w[0] == w[1]) {
        report.window_s = windows.first().copied();
    }
    Ok(report)
}

/// MAE rows for detector output: each instance's detections count as its
/// parsed peak list.
pub fn baseline_report(detector: &str, window_s: f64, instances: Vec<EcgInstance>) -> Result<EvalReport, MetricError> {
    let mut r = ecg_report(TaskKind::Baseline, instances)?;
    r.detector = Some(detector.to_string());
    r.window_s = Some(window_s);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::{Environment, Motion};

    fn parse(m: Option<Motion>, e: Option<Environment>) -> ActivityParse {
        ActivityParse { motion: m, environment: e, summary: None, failed: m.is_none() || e.is_none() }
    }

    fn truth() -> GroundTruth {
        GroundTruth { motion: Motion::Walking, environment: Environment::Indoors, location_text: None, ssid_informative: None }
    }

    #[test]
    fn external_scores() {
        let mut ps = vec![parse(Some(Motion::Walking), Some(Environment::Indoors)); 2];
        ps[1].summary = Some("x".into());
        let instances = ps
            .into_iter()
            .enumerate()
            .map(|(i, p)| ActivityInstance { instance_id: format!("a{i}"), parse: p, truth: truth(), location_correct: None })
            .collect();
        let mut r = activity_report(instances).unwrap();
        let s = |id: &str, score| ExternalScore { instance_id: id.into(), score };
        attach_bertscore(&mut r, &[s("a0", 0.5), s("a1", 0.75)]).unwrap();
        assert_eq!(r.bertscore, Some(0.625));
        assert_eq!(attach_bertscore(&mut r, &[s("zz", 1.0)]), Err(MetricError::UnknownInstance("zz".into())));
        attach_bertscore(&mut r, &[]).unwrap();
        assert_eq!(r.bertscore, None);
    }

    #[test]
    fn rates() {
        let mut ps = vec![parse(Some(Motion::Walking), Some(Environment::Indoors)); 97];
        ps.extend(vec![parse(None, Some(Environment::Indoors)); 3]);
        assert_eq!(failure_rate(&ps).unwrap(), 0.03);
        assert_eq!(failure_rate(&[]), Err(MetricError::EmptyEval));
        let ts = vec![truth(); 100];
        assert_eq!(accuracy(&ps, &ts, Subtask::Motion).unwrap(), 0.97);
        assert_eq!(accuracy(&ps, &ts, Subtask::Environment).unwrap(), 0.97);
        assert!(matches!(accuracy(&ps, &ts[..5], Subtask::Motion), Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn hallucinations() {
        let ok = RPeakParse { peaks: vec![1.0], hallucinated: false };
        let bad = RPeakParse { peaks: vec![], hallucinated: true };
        assert_eq!(hallucination_rate(&vec![ok.clone(); 40]).unwrap(), 0.0);
        assert_eq!(hallucination_rate(&[ok, bad.clone()]).unwrap(), 0.5);
        assert_eq!(hallucination_rate(&[bad]).unwrap(), 1.0);
    }

    #[test]
    fn location_precision_recall() {
        let labels: Vec<LocationLabel> = (0..115).map(|_| LocationLabel { informative: true, correct: None }).collect();
        let claimed: Vec<bool> = (0..115).map(|i| i < 112).collect();
        let (p, r) = location_pr(&claimed, &labels).unwrap();
        assert_eq!(p, Some(1.0));
        assert_eq!(format!("{r:.2}"), "0.97");
        let (p, r) = location_pr(&[false; 115], &labels).unwrap();
        assert_eq!((p, r), (None, 0.0));
        let no = [LocationLabel { informative: false, correct: None }];
        assert_eq!(location_pr(&[true], &no), Err(MetricError::NoInformativeInstances));
        let judged = [LocationLabel { informative: true, correct: Some(false) }, LocationLabel { informative: true, correct: None }];
        assert_eq!(location_pr(&[true, true], &judged).unwrap(), (Some(0.5), 0.5));
    }

    #[test]
    fn chrf_edges() {
        assert_eq!(chrf("", ""), 1.0);
        assert_eq!(chrf("", "a"), 0.0);
        assert_eq!(chrf("abc", "xyz"), 0.0);
        assert_eq!(chrf("near the library", "near the library"), 1.0);
        assert_eq!(chrf("near  the\tlibrary", "near the library"), 1.0);
    }

    #[test]
    fn chrf_beta_two_is_recall_weighted() {
        let (short, long) = ("the library", "the library building near the park");
        assert!(chrf(short, long) < chrf(long, short));
        let f1 = ChrfConfig { beta: 1.0, ..Default::default() };
        assert!((chrf_with(short, long, &f1) - chrf_with(long, short, &f1)).abs() < 1e-12);
    }

    #[test]
    fn mae() {
        assert_eq!(mae_bpm(&[70.0, 74.0], &[72.0, 72.0]).unwrap(), 2.0);
        assert_eq!(mae_bpm(&[72.0], &[72.0]).unwrap(), 0.0);
        assert_eq!(mae_bpm(&[], &[]), Err(MetricError::AllHallucinated));
    }

    #[test]
    fn ecg_report_skips_hallucinations_in_mae() {
        let inst = |id: &str, peaks: usize, halluc: bool| EcgInstance {
            instance_id: id.into(),
            parse: RPeakParse { peaks: vec![1.0; peaks], hallucinated: halluc },
            window_s: 5.0,
            truth_peaks: 6,
        };
        let r = ecg_report(TaskKind::Ecg, vec![inst("b", 7, false), inst("a", 6, false), inst("c", 0, true)]).unwrap();
        assert_eq!(r.mae_bpm, Some(6.0));
        assert_eq!(r.hallucination_rate, Some(1.0 / 3.0));
        assert_eq!(r.rows[0].instance_id(), "a");
        assert_eq!(r.window_s, Some(5.0));
        let all_bad = ecg_report(TaskKind::Ecg, vec![inst("x", 0, true)]).unwrap();
        assert_eq!(all_bad.mae_bpm, None);
    }

    #[test]
    fn activity_report_fields() {
        let mut t = truth();
        t.ssid_informative = Some(true);
        t.location_text = Some("Starbucks on Main Street".into());
        let mut p = parse(Some(Motion::Walking), Some(Environment::Indoors));
        p.summary = Some("The user is walking inside a Starbucks.".into());
        let inst = ActivityInstance { instance_id: "1".into(), parse: p, truth: t, location_correct: None };
        let r = activity_report(vec![inst]).unwrap();
        assert_eq!(r.failure_rate, Some(0.0));
        assert_eq!(r.motion_accuracy, Some(1.0));
        assert_eq!((r.location_precision, r.location_recall), (Some(1.0), Some(1.0)));
        assert!(r.chrf.unwrap() > 0.0);
        assert!(r.bertscore.is_none());
    }
}
