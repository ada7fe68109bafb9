//! JSON-file persistence: `index.json`, one document per graph under
//! `graphs/`, one report per finished job under `reports/`. Every write goes
//! through a temp file and a rename, and every mutation happens under one
//! lock so version checks linearize.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::http::StatusCode;
use chrono::{DateTime, Utc};
use levers_core::controllability::Progress;
use levers_core::model::{parse_graph, serialize_graph};
use levers_core::{AnalysisReport, Budget, ControllabilityScale, FcmGraph, Perspective};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ApiError, ApiResult, ErrorBody};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed | JobStatus::Cancelled)
    }
}

#[derive(Clone, Debug)]
pub struct GraphEntry {
    pub id: String,
    pub version: u64,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub graph: Arc<FcmGraph>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub id: String,
    pub version: u64,
    pub title: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GraphIndexEntry {
    id: String,
    version: u64,
    created_at: DateTime<Utc>,
    updated_at: DateTime<Utc>,
}

/// Everything about a job except its report, which lives in its own file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobMeta {
    pub id: String,
    pub graph_id: String,
    pub graph_version: u64,
    pub status: JobStatus,
    pub budget: Budget,
    #[serde(default)]
    pub perspective: Option<Perspective>,
    #[serde(default)]
    pub scale: ControllabilityScale,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub candidates_tested: u64,
    #[serde(default)]
    pub error: Option<ErrorBody>,
}

#[derive(Clone, Debug, Serialize)]
pub struct JobProgress {
    pub candidates_tested: u64,
}

/// What `GET /analyses/{job}` returns. `result` is present iff the job is done.
#[derive(Clone, Debug, Serialize)]
pub struct JobView {
    pub id: String,
    pub graph_id: String,
    pub graph_version: u64,
    pub status: JobStatus,
    pub budget: Budget,
    pub perspective: Option<String>,
    pub progress: JobProgress,
    pub created_at: DateTime<Utc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
}

struct JobEntry {
    meta: JobMeta,
    progress: Arc<Progress>,
    report: Option<Arc<String>>,
}

#[derive(Default, Serialize, Deserialize)]
struct Index {
    #[serde(default)]
    graphs: Vec<GraphIndexEntry>,
    #[serde(default)]
    jobs: Vec<JobMeta>,
}

#[derive(Default)]
struct Inner {
    graphs: BTreeMap<String, GraphEntry>,
    jobs: BTreeMap<String, JobEntry>,
}

pub struct Store {
    dir: PathBuf,
    inner: Mutex<Inner>,
}

impl Store {
    /// Opens (or creates) a data directory. Jobs that were queued or running
    /// when the previous process stopped are marked failed.
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("graphs"))?;
        fs::create_dir_all(dir.join("reports"))?;
        let index: Index = match fs::read_to_string(dir.join("index.json")) {
            Ok(text) => serde_json::from_str(&text).map_err(invalid_data)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Index::default(),
            Err(e) => return Err(e),
        };

        let mut inner = Inner::default();
        for g in index.graphs {
            let text = fs::read_to_string(graph_path(&dir, &g.id))?;
            let graph = parse_graph(&text).map_err(invalid_data)?;
            inner.graphs.insert(
                g.id.clone(),
                GraphEntry {
                    id: g.id,
                    version: g.version,
                    created_at: g.created_at,
                    updated_at: g.updated_at,
                    graph: Arc::new(graph),
                },
            );
        }
        let mut interrupted = false;
        for mut meta in index.jobs {
            let mut report = None;
            match meta.status {
                JobStatus::Queued | JobStatus::Running => {
                    interrupted = true;
                    meta.status = JobStatus::Failed;
                    meta.finished_at = Some(Utc::now());
                    meta.error = Some(ErrorBody {
                        code: "INTERRUPTED".into(),
                        message: "service stopped before the analysis finished".into(),
                        path: None,
                        ids: Vec::new(),
                    });
                }
                JobStatus::Done => {
                    report = Some(Arc::new(fs::read_to_string(report_path(&dir, &meta.id))?));
                }
                JobStatus::Failed | JobStatus::Cancelled => {}
            }
            inner.jobs.insert(
                meta.id.clone(),
                JobEntry {
                    meta,
                    progress: Arc::new(Progress::new()),
                    report,
                },
            );
        }

        let store = Self {
            dir,
            inner: Mutex::new(inner),
        };
        if interrupted {
            let inner = store.lock();
            store
                .write_index(&inner)
                .map_err(|e| io::Error::other(e.to_string()))?;
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn list_graphs(&self) -> Vec<GraphSummary> {
        self.lock()
            .graphs
            .values()
            .map(|g| GraphSummary {
                id: g.id.clone(),
                version: g.version,
                title: g.graph.title().to_string(),
                created_at: g.created_at,
                updated_at: g.updated_at,
            })
            .collect()
    }

    pub fn graph(&self, id: &str) -> ApiResult<GraphEntry> {
        self.lock()
            .graphs
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("graph", id))
    }

    pub fn create_graph(&self, graph: FcmGraph) -> ApiResult<GraphEntry> {
        let now = Utc::now();
        let entry = GraphEntry {
            id: uuid::Uuid::new_v4().to_string(),
            version: 1,
            created_at: now,
            updated_at: now,
            graph: Arc::new(graph),
        };
        let mut inner = self.lock();
        write_atomic(&graph_path(&self.dir, &entry.id), &serialize_graph(&entry.graph))?;
        inner.graphs.insert(entry.id.clone(), entry.clone());
        self.write_index(&inner)?;
        Ok(entry)
    }

    /// Replaces a graph if its current version is `expected`; exactly one of
    /// several writers holding the same version wins.
    pub fn replace_graph(&self, id: &str, expected: u64, graph: FcmGraph) -> ApiResult<GraphEntry> {
        let mut inner = self.lock();
        let current = inner.graphs.get(id).ok_or_else(|| ApiError::not_found("graph", id))?;
        check_version(current.version, expected)?;
        let entry = GraphEntry {
            version: current.version + 1,
            updated_at: Utc::now(),
            graph: Arc::new(graph),
            ..current.clone()
        };
        write_atomic(&graph_path(&self.dir, id), &serialize_graph(&entry.graph))?;
        inner.graphs.insert(id.to_string(), entry.clone());
        self.write_index(&inner)?;
        Ok(entry)
    }

    /// Deletes a graph. Jobs and reports that referenced it are kept.
    pub fn delete_graph(&self, id: &str, expected: Option<u64>) -> ApiResult<()> {
        let mut inner = self.lock();
        let current = inner.graphs.get(id).ok_or_else(|| ApiError::not_found("graph", id))?;
        if let Some(expected) = expected {
            check_version(current.version, expected)?;
        }
        inner.graphs.remove(id);
        self.write_index(&inner)?;
        match fs::remove_file(graph_path(&self.dir, id)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(io_error(e)),
            _ => Ok(()),
        }
    }

    pub fn create_job(&self, meta: JobMeta) -> ApiResult<Arc<Progress>> {
        let progress = Arc::new(Progress::new());
        let mut inner = self.lock();
        inner.jobs.insert(
            meta.id.clone(),
            JobEntry {
                meta,
                progress: progress.clone(),
                report: None,
            },
        );
        self.write_index(&inner)?;
        Ok(progress)
    }

    /// Moves a queued job to running. Returns false if it was cancelled
    /// while waiting for a slot.
    pub fn start_job(&self, id: &str) -> ApiResult<bool> {
        let mut inner = self.lock();
        let job = inner.jobs.get_mut(id).ok_or_else(|| ApiError::not_found("analysis", id))?;
        if job.meta.status != JobStatus::Queued {
            return Ok(false);
        }
        job.meta.status = JobStatus::Running;
        job.meta.started_at = Some(Utc::now());
        self.write_index(&inner)?;
        Ok(true)
    }

    pub fn finish_job(&self, id: &str, outcome: Result<AnalysisReport, ApiError>) -> ApiResult<()> {
        let mut inner = self.lock();
        let job = inner.jobs.get_mut(id).ok_or_else(|| ApiError::not_found("analysis", id))?;
        job.meta.finished_at = Some(Utc::now());
        job.meta.candidates_tested = job.progress.candidates_tested();
        if job.progress.is_cancelled() {
            job.meta.status = JobStatus::Cancelled;
        } else {
            match outcome {
                Ok(report) => {
                    let text = report.to_json();
                    write_atomic(&report_path(&self.dir, id), &text)?;
                    job.meta.status = JobStatus::Done;
                    job.report = Some(Arc::new(text));
                }
                Err(e) => {
                    job.meta.status = JobStatus::Failed;
                    job.meta.error = Some(e.body);
                }
            }
        }
        self.write_index(&inner)
    }

    /// Requests cancellation. Finished jobs are immutable and answer 409.
    pub fn cancel_job(&self, id: &str) -> ApiResult<JobView> {
        let mut inner = self.lock();
        let job = inner.jobs.get_mut(id).ok_or_else(|| ApiError::not_found("analysis", id))?;
        if job.meta.status.is_terminal() {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "JOB_FINISHED",
                format!("analysis {id:?} already {}", status_name(job.meta.status)),
            ));
        }
        job.progress.cancel();
        if job.meta.status == JobStatus::Queued {
            job.meta.status = JobStatus::Cancelled;
            job.meta.finished_at = Some(Utc::now());
        }
        let view = view_of(job);
        self.write_index(&inner)?;
        Ok(view)
    }

    /// All jobs, oldest first, without their results.
    pub fn list_jobs(&self) -> Vec<JobView> {
        let mut jobs: Vec<JobView> = self
            .lock()
            .jobs
            .values()
            .map(|j| JobView {
                result: None,
                ..view_of(j)
            })
            .collect();
        jobs.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
        jobs
    }

    pub fn job(&self, id: &str) -> ApiResult<JobView> {
        self.lock()
            .jobs
            .get(id)
            .map(view_of)
            .ok_or_else(|| ApiError::not_found("analysis", id))
    }

    pub fn job_meta(&self, id: &str) -> ApiResult<JobMeta> {
        self.lock()
            .jobs
            .get(id)
            .map(|j| j.meta.clone())
            .ok_or_else(|| ApiError::not_found("analysis", id))
    }

    /// Exact bytes of a finished report.
    pub fn report_text(&self, id: &str) -> ApiResult<Arc<String>> {
        let inner = self.lock();
        let job = inner.jobs.get(id).ok_or_else(|| ApiError::not_found("analysis", id))?;
        job.report.clone().ok_or_else(|| {
            ApiError::new(
                StatusCode::CONFLICT,
                "JOB_NOT_DONE",
                format!("analysis {id:?} is {}", status_name(job.meta.status)),
            )
        })
    }

    pub fn report(&self, id: &str) -> ApiResult<AnalysisReport> {
        let text = self.report_text(id)?;
        serde_json::from_str(&text).map_err(|e| ApiError::internal(format!("stored report unreadable: {e}")))
    }

    fn write_index(&self, inner: &Inner) -> ApiResult<()> {
        let index = Index {
            graphs: inner
                .graphs
                .values()
                .map(|g| GraphIndexEntry {
                    id: g.id.clone(),
                    version: g.version,
                    created_at: g.created_at,
                    updated_at: g.updated_at,
                })
                .collect(),
            jobs: inner.jobs.values().map(|j| j.meta.clone()).collect(),
        };
        let text = serde_json::to_string_pretty(&index).expect("index serializes");
        write_atomic(&self.dir.join("index.json"), &text)
    }
}

fn view_of(job: &JobEntry) -> JobView {
    let meta = &job.meta;
    let live = job.progress.candidates_tested();
    JobView {
        id: meta.id.clone(),
        graph_id: meta.graph_id.clone(),
        graph_version: meta.graph_version,
        status: meta.status,
        budget: meta.budget,
        perspective: meta.perspective.as_ref().map(|p| p.label.clone()),
        progress: JobProgress {
            candidates_tested: live.max(meta.candidates_tested),
        },
        created_at: meta.created_at,
        started_at: meta.started_at,
        finished_at: meta.finished_at,
        error: meta.error.clone(),
        result: job.report.as_ref().and_then(|t| serde_json::from_str(t).ok()),
    }
}

fn check_version(current: u64, expected: u64) -> ApiResult<()> {
    if current == expected {
        return Ok(());
    }
    Err(ApiError::new(
        StatusCode::CONFLICT,
        "VERSION_CONFLICT",
        format!("graph is at version {current}, request was based on {expected}"),
    ))
}

fn status_name(status: JobStatus) -> &'static str {
    match status {
        JobStatus::Queued => "queued",
        JobStatus::Running => "running",
        JobStatus::Done => "done",
        JobStatus::Failed => "failed",
        JobStatus::Cancelled => "cancelled",
    }
}

fn graph_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("graphs").join(format!("{id}.json"))
}

fn report_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("reports").join(format!("{id}.json"))
}

fn write_atomic(path: &Path, contents: &str) -> ApiResult<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, contents).and_then(|_| fs::rename(&tmp, path)).map_err(io_error)
}

fn io_error(e: io::Error) -> ApiError {
    ApiError::internal(format!("storage: {e}"))
}

fn invalid_data(e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}
