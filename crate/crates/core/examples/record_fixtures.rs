//! Records scripted responses into a replay store through the same path a
//! live recording takes.
//!
//!     cargo run --example record_fixtures -- PROMPTS SCRIPT MODEL STORE
//!
//! SCRIPT is JSON Lines of `{instance_id, response_text}`.

use anyhow::{anyhow, Context, Result};
use sensorpen::experiment::{read_jsonl, run_prompts, PromptLine, RunOptions};
use sensorpen::llm::{BackendKind, ChatRequest, LlmError, ModelResponse, RecordBackend, ReplayStore, RetryPolicy, SystemClock};
use serde::Deserialize;
use std::collections::HashMap;
use std::path::PathBuf;

#[derive(Deserialize)]
struct Scripted {
    instance_id: String,
    response_text: String,
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [prompts, script, model, store] = args.as_slice() else {
        return Err(anyhow!("usage: record_fixtures PROMPTS SCRIPT MODEL STORE"));
    };
    let prompts: Vec<PromptLine> = read_jsonl(&PathBuf::from(prompts))?;
    let script: Vec<Scripted> = read_jsonl(&PathBuf::from(script))?;
    let by_id: HashMap<String, String> = script.into_iter().map(|s| (s.instance_id, s.response_text)).collect();
    let by_text: HashMap<String, String> = prompts
        .iter()
        .map(|p| Ok((p.text.clone(), by_id.get(&p.instance_id).cloned().with_context(|| format!("no script for {}", p.instance_id))?)))
        .collect::<Result<_>>()?;
    let scripted = move |req: &ChatRequest| {
        let text = by_text.get(&req.messages[0].text).cloned().ok_or(LlmError::Malformed("unscripted prompt".into()))?;
        Ok(ModelResponse { text, usage: None, latency_ms: 0, backend_kind: BackendKind::Mock })
    };
    let backend = RecordBackend::new(scripted, ReplayStore::open_or_create(store)?);
    let opts = RunOptions { model, parallelism: 1, retry: RetryPolicy::default(), clock: &SystemClock };
    let out = run_prompts(&backend, &prompts, &opts)?;
    if let Some(bad) = out.iter().find(|r| r.error.is_some()) {
        return Err(anyhow!("{}: {:?}", bad.instance_id, bad.error));
    }
    eprintln!("recorded {} responses into {store}", out.len());
    Ok(())
}
