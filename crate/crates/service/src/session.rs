//! Persisted session state and the on-disk store.
//!
//! Each session is a directory under `<state_root>/sessions/<id>/` holding
//! stage artifacts (`query.csv`, `mapping.json`, `integrated.<op>.csv`, ...)
//! and `session.json`. Artifacts are written first and `session.json` last,
//! each through an atomic rename, so a restart sees the last committed state.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use lakefuse_core::align::IntegrationMapping;
use lakefuse_core::analyze::AnalysisResult;
use lakefuse_core::artifact;
use lakefuse_core::discovery::DiscoveryResult;
use lakefuse_core::table::HeaderMode;
use serde::{Deserialize, Serialize};
use tokio::sync::OwnedMutexGuard;

use crate::error::{Result, ServiceError};

pub const STATE_FILE: &str = "session.json";
pub const QUERY_FILE: &str = "query.csv";
pub const MAPPING_FILE: &str = "mapping.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Discover,
    Align,
    Integrate,
    Analyze,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Discover => "discover",
            Stage::Align => "align",
            Stage::Integrate => "integrate",
            Stage::Analyze => "analyze",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stage {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| ServiceError::BadRequest(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryInfo {
    pub table_id: String,
    pub file: String,
    pub columns: Vec<String>,
    pub rows: usize,
    /// How `file` is re-read; uploads keep their original bytes.
    pub header: HeaderMode,
    /// `upload` or `provider:<name>`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingInfo {
    pub file: String,
    pub mapping: IntegrationMapping,
    pub edited: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationInfo {
    pub operator: String,
    pub file: String,
    pub lineage: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub operator: String,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    pub result: AnalysisResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    /// Next stage to run.
    pub stage: Stage,
    pub created_at: u64,
    pub updated_at: u64,
    pub query: Option<QueryInfo>,
    /// Latest result per discovery method.
    pub discovery: BTreeMap<String, DiscoveryResult>,
    pub selection: Option<Vec<String>>,
    pub mapping: Option<MappingInfo>,
    pub integrations: BTreeMap<String, IntegrationInfo>,
    pub analyses: Vec<AnalysisRecord>,
}

impl SessionState {
    fn new(session_id: String) -> Self {
        let now = unix_now();
        SessionState {
            session_id,
            stage: Stage::Discover,
            created_at: now,
            updated_at: now,
            query: None,
            discovery: BTreeMap::new(),
            selection: None,
            mapping: None,
            integrations: BTreeMap::new(),
            analyses: Vec::new(),
        }
    }

    /// Drop the outputs of `stage` and every later stage. Returns the
    /// artifact files that are no longer referenced.
    pub fn reset_to(&mut self, stage: Stage) -> Vec<String> {
        let mut stale = Vec::new();
        if stage <= Stage::Analyze {
            stale.extend(self.analyses.drain(..).flat_map(|a| std::iter::once(a.file).chain(a.csv)));
        }
        if stage <= Stage::Integrate {
            stale.extend(
                std::mem::take(&mut self.integrations)
                    .into_values()
                    .flat_map(|i| [i.file, i.lineage]),
            );
        }
        if stage <= Stage::Align {
            stale.extend(self.mapping.take().map(|m| m.file));
        }
        if stage <= Stage::Discover {
            for method in std::mem::take(&mut self.discovery).into_keys() {
                stale.push(discovery_file(&method));
            }
            self.selection = None;
        }
        self.stage = self.stage.min(stage);
        stale
    }
}

pub fn discovery_file(method: &str) -> String {
    format!("discovery.{method}.json")
}

pub fn integration_file(operator: &str) -> String {
    format!("integrated.{operator}.csv")
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

/// Directory-backed session store with one async lock per session.
pub struct SessionStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    counter: AtomicU64,
}

impl SessionStore {
    pub fn open(state_root: impl AsRef<Path>) -> Result<Self> {
        let root = state_root.as_ref().join("sessions");
        std::fs::create_dir_all(&root)
            .map_err(|e| ServiceError::Internal(format!("cannot create {}: {e}", root.display())))?;
        Ok(SessionStore {
            root,
            locks: Mutex::new(HashMap::new()),
            counter: AtomicU64::new(0),
        })
    }

    pub fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn create(&self) -> Result<SessionState> {
        loop {
            let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
            let n = self.counter.fetch_add(1, Ordering::Relaxed);
            let id = format!("{:x}-{:x}-{n:x}", nanos, std::process::id());
            let dir = self.dir(&id);
            match std::fs::create_dir(&dir) {
                Ok(()) => {
                    let state = SessionState::new(id);
                    self.commit(&state)?;
                    return Ok(state);
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(ServiceError::Internal(format!("cannot create {}: {e}", dir.display()))),
            }
        }
    }

    pub fn load(&self, id: &str) -> Result<SessionState> {
        if !valid_id(id) {
            return Err(ServiceError::UnknownSession(id.to_string()));
        }
        let path = self.dir(id).join(STATE_FILE);
        if !path.is_file() {
            return Err(ServiceError::UnknownSession(id.to_string()));
        }
        Ok(artifact::read_json(&path)?)
    }

    /// Persist `state` as the session's committed state.
    pub fn commit(&self, state: &SessionState) -> Result<()> {
        artifact::write_json(self.dir(&state.session_id).join(STATE_FILE), state)?;
        Ok(())
    }

    pub fn save(&self, state: &mut SessionState) -> Result<()> {
        state.updated_at = unix_now();
        self.commit(state)
    }

    /// Remove artifacts no longer referenced by the committed state.
    pub fn remove_files(&self, id: &str, files: &[String]) {
        let dir = self.dir(id);
        for f in files {
            let _ = std::fs::remove_file(dir.join(f));
        }
    }

    /// Serialize access to one session. Unknown ids are rejected before a
    /// lock is allocated.
    pub async fn lock(&self, id: &str) -> Result<OwnedMutexGuard<()>> {
        if !valid_id(id) || !self.dir(id).join(STATE_FILE).is_file() {
            return Err(ServiceError::UnknownSession(id.to_string()));
        }
        let m = {
            let mut locks = self.locks.lock().expect("lock table poisoned");
            Arc::clone(locks.entry(id.to_string()).or_default())
        };
        Ok(m.lock_owned().await)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let a = store.create().unwrap();
        let b = store.create().unwrap();
        assert_ne!(a.session_id, b.session_id);
        assert_eq!(a.stage, Stage::Discover);
        assert_eq!(store.load(&a.session_id).unwrap(), a);
        let reopened = SessionStore::open(dir.path()).unwrap();
        assert_eq!(reopened.load(&b.session_id).unwrap(), b);
    }

    #[test]
    fn unknown_and_hostile_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        for id in ["nope", "../etc", "", "a/b"] {
            assert!(matches!(store.load(id), Err(ServiceError::UnknownSession(_))));
        }
    }

    #[test]
    fn reset_discards_later_stages() {
        let mut s = SessionState::new("x".into());
        s.stage = Stage::Analyze;
        s.selection = Some(vec!["a".into()]);
        s.integrations.insert(
            "fd".into(),
            IntegrationInfo {
                operator: "fd".into(),
                file: integration_file("fd"),
                lineage: "integrated.fd.lineage.json".into(),
                columns: vec![],
                rows: 0,
            },
        );
        let stale = s.reset_to(Stage::Integrate);
        assert_eq!(s.stage, Stage::Integrate);
        assert!(s.integrations.is_empty());
        assert_eq!(stale, ["integrated.fd.csv", "integrated.fd.lineage.json"]);
        assert!(s.selection.is_some());
        s.reset_to(Stage::Discover);
        assert_eq!(s.stage, Stage::Discover);
        assert!(s.selection.is_none());
    }

    #[test]
    fn stage_order_and_names() {
        assert!(Stage::Discover < Stage::Align && Stage::Integrate < Stage::Analyze);
        assert_eq!("integrate".parse::<Stage>().unwrap(), Stage::Integrate);
        assert!("later".parse::<Stage>().is_err());
    }
}
