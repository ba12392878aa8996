//! Keyword extraction from model responses.

use crate::sensor::{Environment, Motion};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActivityParse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<Motion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Environment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RPeakParse {
    pub peaks: Vec<f64>,
    pub hallucinated: bool,
}

/// One line of a parsed-results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParsedRow {
    RPeaks {
        instance_id: String,
        #[serde(flatten)]
        parse: RPeakParse,
    },
    Activity {
        instance_id: String,
        #[serde(flatten)]
        parse: ActivityParse,
    },
}

impl ParsedRow {
    pub fn instance_id(&self) -> &str {
        match self {
            ParsedRow::RPeaks { instance_id, .. } | ParsedRow::Activity { instance_id, .. } => instance_id,
        }
    }
}

// Leading markdown emphasis, headings, quotes and bullets.
fn strip_line_prefix(line: &str) -> &str {
    let s = line.trim_start_matches(|c: char| c.is_whitespace() || "*#>-_`•+".contains(c));
    // numbered bullets such as "4. " or "4) "
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 && matches!(s.as_bytes().get(digits), Some(b'.') | Some(b')')) {
        let rest = &s[digits + 1..];
        if rest.starts_with(char::is_whitespace) {
            return rest.trim_start_matches(|c: char| c.is_whitespace() || "*_`".contains(c));
        }
    }
    s
}

// Value after `key:` when the line starts with it, case-insensitively.
fn keyed_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let s = strip_line_prefix(line);
    let head = s.get(..key.len())?;
    if !head.eq_ignore_ascii_case(key) {
        return None;
    }
    let rest = s[key.len()..].trim_start_matches(['*', '_', '`', ' ']);
    let rest = rest.strip_prefix(':')?;
    Some(rest.trim_start_matches(['*', '_', '`']).trim())
}

fn first_word(value: &str) -> String {
    value
        .trim_start_matches(|c: char| !c.is_alphabetic())
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase()
}

pub fn fold_motion(word: &str) -> Option<Motion> {
    match word {
        "stationary" | "still" => Some(Motion::Stationary),
        "walking" | "moving" => Some(Motion::Walking),
        _ => None,
    }
}

pub fn fold_environment(word: &str) -> Option<Environment> {
    match word {
        "indoors" | "indoor" => Some(Environment::Indoors),
        "outdoors" | "outdoor" => Some(Environment::Outdoors),
        _ => None,
    }
}

/// Last `Motion:`, `Environment:` and `Summary:` lines win.
pub fn parse_activity(text: &str) -> ActivityParse {
    let mut motion_line = None;
    let mut env_line = None;
    let mut summary = None;
    for line in text.lines() {
        if let Some(v) = keyed_value(line, "motion") {
            motion_line = Some(v);
        } else if let Some(v) = keyed_value(line, "environment") {
            env_line = Some(v);
        } else if let Some(v) = keyed_value(line, "summary") {
            summary = Some(v);
        }
    }
    let motion = motion_line.and_then(|v| fold_motion(&first_word(v)));
    let environment = env_line.and_then(|v| fold_environment(&first_word(v)));
    ActivityParse {
        failed: motion.is_none() || environment.is_none(),
        motion,
        environment,
        summary: summary.filter(|s| !s.is_empty()).map(str::to_string),
    }
}

/// Canonical text form; parsing it returns the same parse.
pub fn render_activity(p: &ActivityParse) -> String {
    let mut out = String::new();
    if let Some(s) = &p.summary {
        out.push_str(&format!("Summary: {s}\n"));
    }
    out.push_str(&format!("Motion: {}.\n", p.motion.map_or("unknown", Motion::as_str)));
    out.push_str(&format!("Environment: {}.", p.environment.map_or("unknown", Environment::as_str)));
    out
}

// Numbers in `[...]` at the start of `s`, after optional markup.
fn bracketed_list(s: &str) -> Option<Vec<f64>> {
    let s = s.trim_start_matches(|c: char| c.is_whitespace() || c == '*' || c == '_' || c == '`');
    let inner = s.strip_prefix('[')?;
    let inner = &inner[..inner.find(']')?];
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    inner
        .split(',')
        .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect()
}

/// The last `R-peaks:` label followed by a well-formed list.
pub fn parse_rpeaks(text: &str) -> RPeakParse {
    const LABEL: &str = "r-peaks";
    let lower = text.to_ascii_lowercase();
    let mut found = None;
    for (at, _) in lower.match_indices(LABEL) {
        let rest = text[at + LABEL.len()..].trim_start_matches(['*', '_', '`', ' ']);
        if let Some(rest) = rest.strip_prefix(':') {
            if let Some(list) = bracketed_list(rest) {
                found = Some(list);
            }
        }
    }
    match found {
        Some(peaks) => RPeakParse { peaks, hallucinated: false },
        None => RPeakParse { peaks: Vec::new(), hallucinated: true },
    }
}

// Words that carry no place information.
const STOPLIST: [&str; 8] = ["user", "stationary", "walking", "indoors", "outdoors", "likely", "environment", "area"];

const FUNCTION_WORDS: [&str; 41] = [
    "the", "a", "an", "is", "are", "was", "be", "being", "in", "on", "at", "and", "or", "of", "to", "with", "it",
    "they", "he", "she", "their", "s", "currently", "probably", "possibly", "most", "appears", "seems", "based",
    "data", "sensor", "setting", "location", "inside", "outside", "motion", "state", "either", "while", "who", "which",
];

fn normalize_token(t: &str) -> &str {
    match t {
        "indoor" => "indoors",
        "outdoor" => "outdoors",
        "moving" => "walking",
        "still" => "stationary",
        "users" => "user",
        other => other,
    }
}

/// The summary when it says more than motion and environment.
pub fn extract_location(summary: Option<&str>) -> Option<String> {
    let summary = summary?.trim();
    let lower = summary.to_lowercase();
    let informative = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(normalize_token)
        .any(|t| !STOPLIST.contains(&t) && !FUNCTION_WORDS.contains(&t));
    informative.then(|| summary.to_string())
}
