//! File-backed aggregates: one JSON document per study and per session.
//!
//! Every mutation is written to a temporary file in the target directory and
//! renamed over the previous version before the in-memory copy changes, so an
//! acknowledged request survives a restart.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use dewat_mca::delphi::{DelphiSession, ExpertId};
use dewat_mca::pipeline::StudyResults;
use dewat_mca::report::ReportDocument;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRecord {
    pub id: String,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
    /// The uploaded CSV, re-validated whenever it is used.
    pub dataset_csv: String,
    pub dataset_sha256: String,
    pub technologies: Vec<String>,
    pub sessions: Vec<String>,
    #[serde(default)]
    pub results: Option<StudyResults>,
    #[serde(default)]
    pub report: Option<ReportDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub study_id: String,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
    pub session: DelphiSession,
    /// Opaque bearer token for each panel member.
    pub tokens: BTreeMap<String, ExpertId>,
}

pub type Shared<T> = Arc<RwLock<T>>;

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    studies: RwLock<HashMap<String, Shared<StudyRecord>>>,
    sessions: RwLock<HashMap<String, Shared<SessionRecord>>>,
}

const STUDIES: &str = "studies";
const SESSIONS: &str = "sessions";

fn load_dir<T: DeserializeOwned>(dir: &Path) -> std::io::Result<Vec<T>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let bytes = std::fs::read(&path)?;
        let value = serde_json::from_slice(&bytes).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}: {e}", path.display()),
            )
        })?;
        out.push(value);
    }
    Ok(out)
}

impl Store {
    /// Opens (creating if needed) a data directory and loads every document in it.
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Store> {
        let root = root.into();
        std::fs::create_dir_all(root.join(STUDIES))?;
        std::fs::create_dir_all(root.join(SESSIONS))?;
        let studies = load_dir::<StudyRecord>(&root.join(STUDIES))?
            .into_iter()
            .map(|s| (s.id.clone(), Arc::new(RwLock::new(s))))
            .collect();
        let sessions = load_dir::<SessionRecord>(&root.join(SESSIONS))?
            .into_iter()
            .map(|s| (s.id.clone(), Arc::new(RwLock::new(s))))
            .collect();
        Ok(Store {
            root,
            studies: RwLock::new(studies),
            sessions: RwLock::new(sessions),
        })
    }

    fn write<T: Serialize>(&self, kind: &str, id: &str, value: &T) -> std::io::Result<()> {
        let dir = self.root.join(kind);
        let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
        serde_json::to_writer_pretty(&mut tmp, value)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(dir.join(format!("{id}.json")))
            .map_err(|e| e.error)?;
        Ok(())
    }

    pub fn save_study(&self, study: &StudyRecord) -> std::io::Result<()> {
        self.write(STUDIES, &study.id, study)
    }

    pub fn save_session(&self, session: &SessionRecord) -> std::io::Result<()> {
        self.write(SESSIONS, &session.id, session)
    }

    pub async fn insert_study(&self, study: StudyRecord) -> std::io::Result<()> {
        self.save_study(&study)?;
        self.studies
            .write()
            .await
            .insert(study.id.clone(), Arc::new(RwLock::new(study)));
        Ok(())
    }

    pub async fn insert_session(&self, session: SessionRecord) -> std::io::Result<()> {
        self.save_session(&session)?;
        self.sessions
            .write()
            .await
            .insert(session.id.clone(), Arc::new(RwLock::new(session)));
        Ok(())
    }

    pub async fn study(&self, id: &str) -> Option<Shared<StudyRecord>> {
        self.studies.read().await.get(id).cloned()
    }

    pub async fn session(&self, id: &str) -> Option<Shared<SessionRecord>> {
        self.sessions.read().await.get(id).cloned()
    }
}
