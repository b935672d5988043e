//! Job records: state machine, progress and history.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use geoseg::ede_removal::EdeConfig;
use geoseg::progress::Monitor;
use geoseg::supervised::Trainer;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{AnalyzeSpec, Stage};

fn raw() -> String {
    "raw".into()
}

fn name_filtered() -> String {
    "filtered".into()
}

fn name_labels() -> String {
    "labels".into()
}

fn name_ede() -> String {
    "ede".into()
}

fn name_classified() -> String {
    "classified".into()
}

/// What a job does. `input` names a volume artifact of the session, `name`
/// the artifact the job publishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum JobSpec {
    /// A chain of filter stages.
    Filter {
        #[serde(default = "raw")]
        input: String,
        #[serde(default = "name_filtered")]
        name: String,
        steps: Vec<Stage>,
    },
    /// One k-means or fuzzy c-means stage.
    Segment {
        #[serde(default = "raw")]
        input: String,
        #[serde(default = "name_labels")]
        name: String,
        method: Stage,
    },
    /// The dual-clustering artefact removal pipeline.
    Ede {
        #[serde(default = "raw")]
        input: String,
        #[serde(default = "name_ede")]
        name: String,
        #[serde(default)]
        config: EdeConfig,
    },
    /// Trains on the session's training table and labels the whole input.
    Classify {
        #[serde(default = "raw")]
        input: String,
        #[serde(default = "name_classified")]
        name: String,
        trainer: Trainer,
    },
    /// Analyses of a label artifact; publishes nothing.
    Analyze { labels: String, analysis: AnalyzeSpec },
}

impl JobSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            JobSpec::Filter { .. } => "filter",
            JobSpec::Segment { .. } => "segment",
            JobSpec::Ede { .. } => "ede",
            JobSpec::Classify { .. } => "classify",
            JobSpec::Analyze { .. } => "analyze",
        }
    }

    /// The artifact the job reads.
    pub fn input(&self) -> &str {
        match self {
            JobSpec::Filter { input, .. }
            | JobSpec::Segment { input, .. }
            | JobSpec::Ede { input, .. }
            | JobSpec::Classify { input, .. } => input,
            JobSpec::Analyze { labels, .. } => labels,
        }
    }

    /// The artifact the job publishes, if any.
    pub fn output(&self) -> Option<&str> {
        match self {
            JobSpec::Filter { name, .. }
            | JobSpec::Segment { name, .. }
            | JobSpec::Ede { name, .. }
            | JobSpec::Classify { name, .. } => Some(name),
            JobSpec::Analyze { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_final(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed | JobState::Cancelled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub at_ms: u64,
    pub state: JobState,
    pub message: String,
}

/// Serializable view of a job at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSnapshot {
    pub id: String,
    pub session: String,
    pub kind: String,
    pub params: JobSpec,
    pub state: JobState,
    pub progress: f64,
    pub cancel_requested: bool,
    pub history: Vec<HistoryEntry>,
    pub result: Option<Value>,
    pub error: Option<String>,
}

#[derive(Debug)]
struct Inner {
    state: JobState,
    history: Vec<HistoryEntry>,
    result: Option<Value>,
    error: Option<String>,
}

#[derive(Debug)]
pub struct Job {
    pub id: String,
    pub session: String,
    pub spec: JobSpec,
    /// Bits of a non-negative f64, so integer max is numeric max.
    progress: AtomicU64,
    cancel: AtomicBool,
    inner: Mutex<Inner>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Rejected state change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidTransition {
    pub from: JobState,
    pub to: JobState,
}

impl Job {
    pub fn new(id: String, session: String, spec: JobSpec) -> Self {
        let job = Job {
            id,
            session,
            spec,
            progress: AtomicU64::new(0f64.to_bits()),
            cancel: AtomicBool::new(false),
            inner: Mutex::new(Inner {
                state: JobState::Queued,
                history: Vec::new(),
                result: None,
                error: None,
            }),
        };
        job.log("queued");
        job
    }

    pub fn state(&self) -> JobState {
        self.inner.lock().unwrap().state
    }

    pub fn progress(&self) -> f64 {
        f64::from_bits(self.progress.load(Ordering::Acquire))
    }

    /// Appends a history line under the current state.
    pub fn log(&self, message: impl Into<String>) {
        let mut g = self.inner.lock().unwrap();
        let entry = HistoryEntry {
            seq: g.history.len() as u64,
            at_ms: now_ms(),
            state: g.state,
            message: message.into(),
        };
        g.history.push(entry);
    }

    /// Moves along queued → running → {done, failed, cancelled}.
    pub fn transition(&self, to: JobState, message: impl Into<String>) -> Result<(), InvalidTransition> {
        let mut g = self.inner.lock().unwrap();
        let ok = matches!(
            (g.state, to),
            (JobState::Queued, JobState::Running)
                | (JobState::Running, JobState::Done | JobState::Failed | JobState::Cancelled)
        );
        if !ok {
            return Err(InvalidTransition { from: g.state, to });
        }
        g.state = to;
        let entry = HistoryEntry {
            seq: g.history.len() as u64,
            at_ms: now_ms(),
            state: to,
            message: message.into(),
        };
        g.history.push(entry);
        if to == JobState::Done {
            self.progress.store(1f64.to_bits(), Ordering::Release);
        }
        Ok(())
    }

    pub fn finish_ok(&self, result: Value) {
        self.inner.lock().unwrap().result = Some(result);
        let _ = self.transition(JobState::Done, "done");
    }

    pub fn finish_err(&self, error: String) {
        self.inner.lock().unwrap().error = Some(error.clone());
        let _ = self.transition(JobState::Failed, format!("failed: {error}"));
    }

    /// Requests a stop. Fails once the job has finished.
    pub fn request_cancel(&self) -> Result<(), JobState> {
        let g = self.inner.lock().unwrap();
        if g.state.is_final() {
            return Err(g.state);
        }
        self.cancel.store(true, Ordering::Release);
        drop(g);
        self.log("cancel requested");
        Ok(())
    }

    pub fn snapshot(&self) -> JobSnapshot {
        let g = self.inner.lock().unwrap();
        JobSnapshot {
            id: self.id.clone(),
            session: self.session.clone(),
            kind: self.spec.kind().into(),
            params: self.spec.clone(),
            state: g.state,
            progress: self.progress(),
            cancel_requested: self.cancel.load(Ordering::Acquire),
            history: g.history.clone(),
            result: g.result.clone(),
            error: g.error.clone(),
        }
    }
}

impl Monitor for Job {
    fn report(&self, fraction: f64) {
        let f = if fraction.is_nan() { 0.0 } else { fraction.clamp(0.0, 1.0) };
        self.progress.fetch_max(f.to_bits(), Ordering::AcqRel);
    }

    fn is_cancelled(&self) -> bool {
        self.cancel.load(Ordering::Acquire)
    }
}
