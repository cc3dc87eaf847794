//! Sessions on disk: one directory per session plus an index.
//!
//! ```text
//! <root>/index.txt                  ids in creation order, one per line
//! <root>/<id>/session.json          latest SessionRecord
//! <root>/<id>/transcript.jsonl      append-only event log
//! <root>/<id>/runs/<run id>/        RunLog files and plan.json
//! ```

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use apsc_core::guidance::{GuidanceExecutables, Plan, RunDigest, SessionState};
use apsc_core::runlog::RunLog;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage error at {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt record at {}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown run {0}")]
    UnknownRun(String),
    #[error("session {0} is busy")]
    Busy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Idle,
    Planning,
    Running,
    Done,
    Error,
}

impl Status {
    /// A new instruction may start from here.
    pub fn accepts_submissions(self) -> bool {
        matches!(self, Status::Idle | Status::Done | Status::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub run_id: String,
    pub instruction: String,
    pub seed: u64,
    pub status: Status,
    pub dir: PathBuf,
    pub rationale: Option<String>,
    pub executables: Option<GuidanceExecutables>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub status: Status,
    pub state: SessionState,
    pub runs: Vec<RunEntry>,
}

impl SessionRecord {
    pub fn run(&self, run_id: &str) -> Option<&RunEntry> {
        self.runs.iter().find(|r| r.run_id == run_id)
    }
}

/// Events appended to a session's transcript.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TranscriptEvent {
    Created { provider: String, prompt_version: String },
    Submitted { run_id: String, instruction: String, seed: u64 },
    Planned { run_id: String, plan: Box<Plan> },
    Finished { run_id: String, digest: RunDigest },
    Failed { run_id: String, error: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io(&tmp))?;
    fs::rename(&tmp, path).map_err(io(path))
}

fn append_line(path: &Path, line: &str) -> Result<(), StoreError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io(path))?;
    f.write_all(format!("{line}\n").as_bytes()).map_err(io(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path).map_err(io(path))?;
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt { path: path.to_path_buf(), message: e.to_string() })
}

/// Thread-safe session store. Every mutation is written through to disk
/// before it returns.
const INDEX_FILE: &str = "index.txt";

#[derive(Debug)]
pub struct SessionStore {
    root: PathBuf,
    sessions: Mutex<HashMap<String, SessionRecord>>,
    order: Mutex<Vec<String>>,
}

impl SessionStore {
    /// Opens (or creates) a store. Sessions interrupted mid-run by a restart
    /// are marked as errored.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io(&root))?;
        let index_path = root.join(INDEX_FILE);
        let order: Vec<String> = match fs::read_to_string(&index_path) {
            Ok(text) => text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io(&index_path)(e)),
        };
        let store = Self { root, sessions: Mutex::new(HashMap::new()), order: Mutex::new(Vec::new()) };
        for id in &order {
            let mut rec: SessionRecord = read_json(&store.session_file(id))?;
            if !rec.status.accepts_submissions() {
                rec.status = Status::Error;
                for run in rec.runs.iter_mut().filter(|r| !r.status.accepts_submissions()) {
                    run.status = Status::Error;
                    run.error = Some("interrupted by a service restart".into());
                }
                store.persist(&rec)?;
            }
            store.sessions.lock().expect("store lock").insert(id.clone(), rec);
        }
        *store.order.lock().expect("store lock") = order;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    fn session_file(&self, id: &str) -> PathBuf {
        self.session_dir(id).join("session.json")
    }

    pub fn run_dir(&self, id: &str, run_id: &str) -> PathBuf {
        self.session_dir(id).join("runs").join(run_id)
    }

    fn persist(&self, rec: &SessionRecord) -> Result<(), StoreError> {
        let dir = self.session_dir(&rec.id);
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        write_atomic(&self.session_file(&rec.id), &serde_json::to_vec_pretty(rec).expect("record serializes"))
    }

    pub fn append_transcript(&self, id: &str, event: &TranscriptEvent) -> Result<(), StoreError> {
        let path = self.session_dir(id).join("transcript.jsonl");
        append_line(&path, &serde_json::to_string(event).expect("event serializes"))
    }

    pub fn transcript(&self, id: &str) -> Result<Vec<TranscriptEvent>, StoreError> {
        let path = self.session_dir(id).join("transcript.jsonl");
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        text.lines()
            .map(|l| {
                serde_json::from_str(l).map_err(|e| StoreError::Corrupt { path: path.clone(), message: e.to_string() })
            })
            .collect()
    }

    pub fn create(&self, provider: &str) -> Result<SessionRecord, StoreError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let rec = SessionRecord {
            id: id.clone(),
            created_at,
            status: Status::Idle,
            state: SessionState::new(provider),
            runs: Vec::new(),
        };
        self.persist(&rec)?;
        self.append_transcript(
            &id,
            &TranscriptEvent::Created { provider: provider.into(), prompt_version: rec.state.prompt_version.clone() },
        )?;
        let mut order = self.order.lock().expect("store lock");
        order.push(id.clone());
        append_line(&self.root.join(INDEX_FILE), &id)?;
        self.sessions.lock().expect("store lock").insert(id, rec.clone());
        Ok(rec)
    }

    pub fn get(&self, id: &str) -> Result<SessionRecord, StoreError> {
        self.sessions.lock().expect("store lock").get(id).cloned().ok_or_else(|| StoreError::UnknownSession(id.into()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.order.lock().expect("store lock").clone()
    }

    /// Atomically claims an idle session for a new run. Concurrent callers
    /// get [`StoreError::Busy`] once one of them has won.
    pub fn begin_run(&self, id: &str, instruction: &str, seed: u64) -> Result<RunEntry, StoreError> {
        let mut sessions = self.sessions.lock().expect("store lock");
        let rec = sessions.get_mut(id).ok_or_else(|| StoreError::UnknownSession(id.into()))?;
        if !rec.status.accepts_submissions() {
            return Err(StoreError::Busy(id.into()));
        }
        let run_id = format!("run-{:03}", rec.runs.len() + 1);
        let entry = RunEntry {
            run_id: run_id.clone(),
            instruction: instruction.into(),
            seed,
            status: Status::Planning,
            dir: self.run_dir(id, &run_id),
            rationale: None,
            executables: None,
            error: None,
        };
        let mut next = rec.clone();
        next.status = Status::Planning;
        next.runs.push(entry.clone());
        self.persist(&next)?;
        *rec = next;
        drop(sessions);
        self.append_transcript(id, &TranscriptEvent::Submitted { run_id, instruction: instruction.into(), seed })?;
        Ok(entry)
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut SessionRecord)) -> Result<SessionRecord, StoreError> {
        let mut sessions = self.sessions.lock().expect("store lock");
        let rec = sessions.get_mut(id).ok_or_else(|| StoreError::UnknownSession(id.into()))?;
        let mut next = rec.clone();
        f(&mut next);
        self.persist(&next)?;
        *rec = next.clone();
        Ok(next)
    }

    fn update_run(
        &self,
        id: &str,
        run_id: &str,
        status: Status,
        f: impl FnOnce(&mut RunEntry),
    ) -> Result<(), StoreError> {
        let mut missing = false;
        self.update(id, |rec| {
            rec.status = status;
            match rec.runs.iter_mut().find(|r| r.run_id == run_id) {
                Some(run) => {
                    run.status = status;
                    f(run);
                }
                None => missing = true,
            }
        })?;
        if missing {
            return Err(StoreError::UnknownRun(run_id.into()));
        }
        Ok(())
    }

    pub fn mark_running(&self, id: &str, run_id: &str, plan: &Plan) -> Result<(), StoreError> {
        self.update_run(id, run_id, Status::Running, |run| {
            run.rationale = Some(plan.rationale.clone());
            run.executables = Some(plan.executables.clone());
        })?;
        let dir = self.run_dir(id, run_id);
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        write_atomic(&dir.join("plan.json"), &serde_json::to_vec_pretty(plan).expect("plan serializes"))?;
        self.append_transcript(id, &TranscriptEvent::Planned { run_id: run_id.into(), plan: Box::new(plan.clone()) })
    }

    /// Stores the finished run and appends the turn to the session state.
    pub fn finish(
        &self,
        id: &str,
        run_id: &str,
        instruction: &str,
        plan: &Plan,
        log: &RunLog,
        digest: &RunDigest,
    ) -> Result<(), StoreError> {
        let dir = self.run_dir(id, run_id);
        log.save(&dir).map_err(|e| StoreError::Corrupt { path: dir.clone(), message: e.to_string() })?;
        self.update_run(id, run_id, Status::Done, |_| {})?;
        self.update(id, |rec| {
            // Ordering is guaranteed by begin_run, so these cannot fail.
            let _ = rec.state.record_plan(instruction, plan);
            let _ = rec.state.record_run(digest.clone());
        })?;
        self.append_transcript(id, &TranscriptEvent::Finished { run_id: run_id.into(), digest: digest.clone() })
    }

    pub fn fail(&self, id: &str, run_id: &str, error: &str) -> Result<(), StoreError> {
        self.update_run(id, run_id, Status::Error, |run| run.error = Some(error.into()))?;
        self.append_transcript(id, &TranscriptEvent::Failed { run_id: run_id.into(), error: error.into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let ids: std::collections::HashSet<_> = (0..200).map(|_| store.create("mock").unwrap().id).collect();
        assert_eq!(ids.len(), 200);
    }

    #[test]
    fn second_claim_is_busy() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let id = store.create("mock").unwrap().id;
        store.begin_run(&id, "a", 0).unwrap();
        assert!(matches!(store.begin_run(&id, "b", 0), Err(StoreError::Busy(_))));
        store.fail(&id, "run-001", "boom").unwrap();
        assert_eq!(store.begin_run(&id, "c", 0).unwrap().run_id, "run-002");
    }

    #[test]
    fn reopen_restores_and_flags_interrupted_runs() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let store = SessionStore::open(dir.path()).unwrap();
            let id = store.create("mock").unwrap().id;
            store.begin_run(&id, "a", 0).unwrap();
            id
        };
        let store = SessionStore::open(dir.path()).unwrap();
        let rec = store.get(&id).unwrap();
        assert_eq!(rec.status, Status::Error);
        assert_eq!(rec.runs[0].status, Status::Error);
        assert_eq!(store.ids(), vec![id.clone()]);
        assert_eq!(store.transcript(&id).unwrap().len(), 2);
    }
}
