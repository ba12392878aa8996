use super::{fingerprint, Backend, BackendKind, ChatRequest, LlmError, ModelResponse, Usage};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

/// One JSON Lines entry of a replay store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub fingerprint: String,
    pub response_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    /// Seconds since the Unix epoch.
    pub recorded_at: u64,
}

/// Fingerprint-keyed responses persisted as JSON Lines. Reads are
/// concurrent; appends are serialized. A later entry for the same
/// fingerprint shadows an earlier one.
#[derive(Debug)]
pub struct ReplayStore {
    path: PathBuf,
    entries: RwLock<HashMap<String, StoredResponse>>,
    writer: Mutex<Option<File>>,
}

impl ReplayStore {
    /// Loads an existing store.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| store_err(&path, e))?;
        let mut entries = HashMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| store_err(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: StoredResponse = serde_json::from_str(&line)
                .map_err(|e| LlmError::Store { path: path.clone(), message: format!("line {}: {e}", n + 1) })?;
            entries.insert(entry.fingerprint.clone(), entry);
        }
        Ok(ReplayStore { path, entries: RwLock::new(entries), writer: Mutex::new(None) })
    }

    /// Opens for recording, creating the file if needed.
    pub fn open_or_create(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let p = path.as_ref();
        if !p.exists() {
            File::create(p).map_err(|e| store_err(p, e))?;
        }
        Self::open(p)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, fingerprint: &str) -> Option<StoredResponse> {
        self.entries.read().unwrap().get(fingerprint).cloned()
    }

    pub fn append(&self, entry: StoredResponse) -> Result<(), LlmError> {
        let mut line = serde_json::to_string(&entry).expect("entry serializes");
        line.push('\n');
        let mut writer = self.writer.lock().unwrap();
        if writer.is_none() {
            let f = OpenOptions::new().append(true).open(&self.path).map_err(|e| store_err(&self.path, e))?;
            *writer = Some(f);
        }
        let f = writer.as_mut().unwrap();
        f.write_all(line.as_bytes()).and_then(|_| f.flush()).map_err(|e| store_err(&self.path, e))?;
        self.entries.write().unwrap().insert(entry.fingerprint.clone(), entry);
        Ok(())
    }
}

fn store_err(path: &Path, e: std::io::Error) -> LlmError {
    LlmError::Store { path: path.to_path_buf(), message: e.to_string() }
}

/// Answers only from the store; never touches the network.
pub struct ReplayBackend {
    store: ReplayStore,
}

impl ReplayBackend {
    pub fn new(store: ReplayStore) -> Self {
        ReplayBackend { store }
    }

    pub fn store(&self) -> &ReplayStore {
        &self.store
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ModelResponse, LlmError> {
        let fp = fingerprint(request);
        let entry = self.store.get(&fp).ok_or(LlmError::ReplayMiss(fp))?;
        Ok(ModelResponse {
            text: entry.response_text,
            usage: entry.usage,
            latency_ms: 0,
            backend_kind: BackendKind::Replay,
        })
    }
}

/// Forwards to an inner backend and appends every success to the store.
pub struct RecordBackend<B> {
    inner: B,
    store: ReplayStore,
}

impl<B: Backend> RecordBackend<B> {
    pub fn new(inner: B, store: ReplayStore) -> Self {
        RecordBackend { inner, store }
    }

    pub fn into_store(self) -> ReplayStore {
        self.store
    }
}

impl<B: Backend> Backend for RecordBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ModelResponse, LlmError> {
        let response = self.inner.complete(request)?;
        let recorded_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.store.append(StoredResponse {
            fingerprint: fingerprint(request),
            response_text: response.text.clone(),
            usage: response.usage,
            recorded_at,
        })?;
        Ok(ModelResponse { backend_kind: BackendKind::Record, ..response })
    }
}
