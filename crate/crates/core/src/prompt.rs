//! Prompt templates and rendering.
//!
//! Built-in templates live under `prompts/` and are compiled in. Lines
//! starting with `#% ` are fixture headers and are not part of the body; the
//! file's final newline is not part of the body either.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown prompt scheme: {0}")]
    UnknownScheme(String),
    #[error("no value for placeholder ${0}$")]
    MissingPlaceholder(String),
    #[error("field {0} has no placeholder in the template")]
    ExtraField(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Activity,
    Ecg,
    EcgVision,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Activity => "activity",
            Task::Ecg => "ecg",
            Task::EcgVision => "ecg_vision",
        }
    }
}

/// A (task, variant) pair from the closed set of built-in schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PromptScheme {
    task: Task,
    variant: &'static str,
}

const SCHEMES: [(Task, &str, &str); 10] = [
    (Task::Activity, "plain", include_str!("../prompts/activity/plain.txt")),
    (Task::Activity, "expert", include_str!("../prompts/activity/expert.txt")),
    (Task::Activity, "expert_example", include_str!("../prompts/activity/expert_example.txt")),
    (Task::Ecg, "description", include_str!("../prompts/ecg/description.txt")),
    (Task::Ecg, "procedure", include_str!("../prompts/ecg/procedure.txt")),
    (Task::Ecg, "procedure_1ex", include_str!("../prompts/ecg/procedure_1ex.txt")),
    (Task::Ecg, "procedure_2ex", include_str!("../prompts/ecg/procedure_2ex.txt")),
    (Task::Ecg, "one_shot", include_str!("../prompts/ecg/one_shot.txt")),
    (Task::EcgVision, "description", include_str!("../prompts/ecg_vision/description.txt")),
    (Task::EcgVision, "procedure_example", include_str!("../prompts/ecg_vision/procedure_example.txt")),
];

impl PromptScheme {
    pub fn new(task: Task, variant: &str) -> Result<Self, PromptError> {
        SCHEMES
            .iter()
            .find(|(t, v, _)| *t == task && *v == variant)
            .map(|(t, v, _)| PromptScheme { task: *t, variant: v })
            .ok_or_else(|| PromptError::UnknownScheme(format!("{}/{}", task.as_str(), variant)))
    }

    pub fn all() -> impl Iterator<Item = PromptScheme> {
        SCHEMES.iter().map(|(t, v, _)| PromptScheme { task: *t, variant: v })
    }

    pub fn of_task(task: Task) -> impl Iterator<Item = PromptScheme> {
        Self::all().filter(move |s| s.task == task)
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn variant(&self) -> &'static str {
        self.variant
    }

    pub fn is_vision(&self) -> bool {
        self.task == Task::EcgVision
    }

    /// Whether the vision variant expects a reference figure before the query.
    pub fn has_reference_figure(&self) -> bool {
        self.is_vision() && self.variant == "procedure_example"
    }
}

impl fmt::Display for PromptScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.task.as_str(), self.variant)
    }
}

/// Parses `task/variant`.
impl FromStr for PromptScheme {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || PromptError::UnknownScheme(s.to_string());
        let (task, variant) = s.split_once('/').ok_or_else(unknown)?;
        let task = match task {
            "activity" => Task::Activity,
            "ecg" => Task::Ecg,
            "ecg_vision" => Task::EcgVision,
            _ => return Err(unknown()),
        };
        PromptScheme::new(task, variant).map_err(|_| unknown())
    }
}

impl Serialize for PromptScheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PromptScheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub scheme: PromptScheme,
    pub body: String,
    pub required_placeholders: BTreeSet<String>,
}

impl PromptTemplate {
    pub fn new(scheme: PromptScheme, body: impl Into<String>) -> Self {
        let body = body.into();
        let required_placeholders = placeholder_spans(&body).into_iter().map(|(_, _, n)| n.to_string()).collect();
        PromptTemplate { scheme, body, required_placeholders }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub scheme: PromptScheme,
    /// PNG bytes, reference figure first and query figure last.
    #[serde(skip)]
    pub attachments: Vec<Vec<u8>>,
    pub fingerprint: String,
}

pub fn builtin_template(scheme: PromptScheme) -> PromptTemplate {
    let raw = SCHEMES
        .iter()
        .find(|(t, v, _)| *t == scheme.task && *v == scheme.variant)
        .map(|(_, _, raw)| *raw)
        .expect("schemes are only constructed from the table");
    PromptTemplate::new(scheme, strip_headers(raw))
}

fn strip_headers(raw: &str) -> String {
    let body: String = raw.split_inclusive('\n').filter(|l| !l.starts_with("#% ")).collect();
    body.strip_suffix('\n').unwrap_or(&body).to_string()
}

fn is_name_char(b: u8) -> bool {
    b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_'
}

// (start, end, name) of each `$NAME$` token, end exclusive
fn placeholder_spans(body: &str) -> Vec<(usize, usize, &str)> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'$' {
            let mut j = i + 1;
            while j < bytes.len() && is_name_char(bytes[j]) {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'$' && bytes[i + 1].is_ascii_uppercase() {
                out.push((i, j + 1, &body[i + 1..j]));
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Single-pass literal substitution. `fields` must name exactly the
/// template's placeholders.
pub fn render(
    template: &PromptTemplate,
    fields: &BTreeMap<String, String>,
    attachments: Vec<Vec<u8>>,
) -> Result<RenderedPrompt, PromptError> {
    if let Some(missing) = template.required_placeholders.iter().find(|n| !fields.contains_key(*n)) {
        return Err(PromptError::MissingPlaceholder(missing.clone()));
    }
    if let Some(extra) = fields.keys().find(|k| !template.required_placeholders.contains(*k)) {
        return Err(PromptError::ExtraField(extra.clone()));
    }
    let body = &template.body;
    let mut text = String::with_capacity(body.len() + fields.values().map(String::len).sum::<usize>());
    let mut at = 0;
    for (start, end, name) in placeholder_spans(body) {
        text.push_str(&body[at..start]);
        text.push_str(&fields[name]);
        at = end;
    }
    text.push_str(&body[at..]);
    let fingerprint = content_digest(&text, &attachments);
    Ok(RenderedPrompt { text, scheme: template.scheme, attachments, fingerprint })
}

/// `[v1, v2, ..., vn]`
pub fn format_values(values: &[i64]) -> String {
    let items: Vec<String> = values.iter().map(i64::to_string).collect();
    format!("[{}]", items.join(", "))
}

/// Renders an ECG template with `$DATA$` bound to the query digits.
pub fn render_ecg(template: &PromptTemplate, values: &[i64]) -> Result<RenderedPrompt, PromptError> {
    let fields = BTreeMap::from([("DATA".to_string(), format_values(values))]);
    render(template, &fields, Vec::new())
}

/// SHA-256 over the text and each attachment, length-prefixed.
pub fn content_digest(text: &str, attachments: &[Vec<u8>]) -> String {
    let mut h = Sha256::new();
    h.update((text.len() as u64).to_le_bytes());
    h.update(text.as_bytes());
    h.update((attachments.len() as u64).to_le_bytes());
    for a in attachments {
        h.update((a.len() as u64).to_le_bytes());
        h.update(a);
    }
    hex::encode(h.finalize())
}

/// Rough token count. Prose costs a quarter token per character, ASCII
/// punctuation one token each, and numeric literals one token per character
/// plus one.
/// An estimate only.
pub fn estimate_tokens(text: &str) -> usize {
    let bytes = text.as_bytes();
    let mut prose: usize = 0;
    let mut units = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || (bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))) {
                i += 1;
            }
            units += i - start + 1;
        } else {
            let ch = text[i..].chars().next().unwrap();
            if ch.is_ascii_punctuation() {
                units += 1;
            } else {
                prose += 1;
            }
            i += ch.len_utf8();
        }
    }
    prose.div_ceil(4) + units
}

/// ECG digits used by the worked example in the procedure templates; the
/// vision reference figure is drawn from them.
pub fn reference_example_values() -> Vec<i64> {
    let body = builtin_template(PromptScheme { task: Task::Ecg, variant: "procedure_1ex" }).body;
    let line = body.lines().find(|l| l.starts_with("ECG data: [")).expect("example data line");
    parse_value_list(&line["ECG data: ".len()..]).expect("example data parses")
}

fn parse_value_list(s: &str) -> Option<Vec<i64>> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
    inner.split(',').map(|v| v.trim().parse().ok()).collect()
}
