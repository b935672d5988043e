//! Sessions: one loaded volume, its ROI view, the training table, named
//! artifacts and a FIFO job worker.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use geoseg::progress::{Monitor, Scaled};
use geoseg::supervised::TrainingTable;
use geoseg::volume::crop;
use geoseg::{LabelVolume, Roi, VoxelVolume};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ClassifySpec, RunConfig, Source, Stage, TableSource};
use crate::error::{Result, ServiceError};
use crate::hash;
use crate::jobs::{Job, JobSpec, JobState};
use crate::manifest::{InputRecord, Manifest, MANIFEST_FILE, MANIFEST_FORMAT, MANIFEST_VERSION};
use crate::runner::{apply_stage, StageRecord, State};

#[derive(Debug, Clone)]
pub enum Data {
    Volume(Arc<VoxelVolume>),
    Labels(Arc<LabelVolume>),
}

impl Data {
    pub fn dims(&self) -> geoseg::Dims {
        match self {
            Data::Volume(v) => v.dims(),
            Data::Labels(l) => l.dims(),
        }
    }

    pub fn is_labels(&self) -> bool {
        matches!(self, Data::Labels(_))
    }
}

/// A named product of the session, with the stages that made it from the
/// ROI view and their digests.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub data: Data,
    pub lineage: Vec<Stage>,
    pub records: Vec<StageRecord>,
    /// Publication order within the session.
    pub seq: u64,
}

impl Artifact {
    pub fn digest(&self) -> String {
        match &self.data {
            Data::Volume(v) => hash::volume(v),
            Data::Labels(l) => hash::labels(l),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactInfo {
    pub name: String,
    pub kind: &'static str,
    pub dims: geoseg::Dims,
    pub lineage: Vec<String>,
    pub sha256: String,
}

#[derive(Debug)]
pub struct SessionState {
    pub source: Source,
    pub inputs: Vec<InputRecord>,
    /// The volume as loaded, before the ROI.
    pub base: Arc<VoxelVolume>,
    pub roi: Option<Roi>,
    pub artifacts: BTreeMap<String, Artifact>,
    pub training: Option<TrainingTable>,
    /// Bumped whenever the ROI changes; results computed under an older
    /// epoch are discarded.
    pub epoch: u64,
    next_seq: u64,
}

pub const RAW: &str = "raw";

impl SessionState {
    /// The ROI view everything else derives from.
    pub fn view(&self) -> Arc<VoxelVolume> {
        match &self.artifacts[RAW].data {
            Data::Volume(v) => v.clone(),
            Data::Labels(_) => unreachable!("raw is always a volume"),
        }
    }

    fn publish(&mut self, name: &str, data: Data, lineage: Vec<Stage>, records: Vec<StageRecord>) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.artifacts.insert(
            name.to_string(),
            Artifact {
                data,
                lineage,
                records,
                seq,
            },
        );
    }

    /// Most recently published artifact of the wanted kind, other than raw.
    pub fn latest(&self, labels: bool) -> Option<(&String, &Artifact)> {
        self.artifacts
            .iter()
            .filter(|(n, a)| n.as_str() != RAW && a.data.is_labels() == labels)
            .max_by_key(|(_, a)| a.seq)
    }

    pub fn artifact_infos(&self) -> Vec<ArtifactInfo> {
        let mut v: Vec<(&String, &Artifact)> = self.artifacts.iter().collect();
        v.sort_by_key(|(_, a)| a.seq);
        v.into_iter()
            .map(|(name, a)| ArtifactInfo {
                name: name.clone(),
                kind: if a.data.is_labels() { "labels" } else { "volume" },
                dims: a.data.dims(),
                lineage: a.lineage.iter().map(|s| s.op().to_string()).collect(),
                sha256: a.digest(),
            })
            .collect()
    }

    /// Replaces the ROI, rebuilds the view and drops derived artifacts. A
    /// training table that no longer fits is cleared; returns whether it was.
    pub fn set_roi(&mut self, roi: Option<Roi>) -> geoseg::Result<bool> {
        let view = match &roi {
            Some(r) => crop(&self.base, r)?,
            None => (*self.base).clone(),
        };
        self.roi = roi;
        self.epoch += 1;
        self.artifacts.clear();
        self.publish(RAW, Data::Volume(Arc::new(view)), Vec::new(), Vec::new());
        let dims = self.view().dims();
        let cleared = match &self.training {
            Some(t) if t.validate(dims).is_err() => {
                self.training = None;
                true
            }
            _ => false,
        };
        Ok(cleared)
    }
}

pub struct Session {
    pub id: String,
    pub state: RwLock<SessionState>,
    queue: Mutex<mpsc::Sender<Arc<Job>>>,
}

impl Session {
    /// Loads the source and starts the session's worker thread. Jobs write
    /// their run directories under `runs_dir`.
    pub fn open(id: String, source: Source, runs_dir: PathBuf) -> Result<Arc<Session>> {
        let inputs = source
            .files()
            .into_iter()
            .map(|p| {
                let (sha256, bytes) = hash::file(p)?;
                Ok(InputRecord {
                    path: p.to_path_buf(),
                    sha256,
                    bytes,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let base = Arc::new(source.load()?);
        let mut state = SessionState {
            source,
            inputs,
            base,
            roi: None,
            artifacts: BTreeMap::new(),
            training: None,
            epoch: 0,
            next_seq: 0,
        };
        state.set_roi(None)?;
        let (tx, rx) = mpsc::channel::<Arc<Job>>();
        let session = Arc::new(Session {
            id,
            state: RwLock::new(state),
            queue: Mutex::new(tx),
        });
        let weak = Arc::downgrade(&session);
        std::thread::Builder::new()
            .name(format!("geoseg-worker-{}", session.id))
            .spawn(move || {
                for job in rx {
                    let Some(session) = weak.upgrade() else { break };
                    session.execute(&job, &runs_dir);
                }
            })
            .map_err(|e| ServiceError::io(PathBuf::from("<worker thread>"), e))?;
        Ok(session)
    }

    pub fn enqueue(&self, job: Arc<Job>) {
        // The worker only exits once the session is gone.
        let _ = self.queue.lock().unwrap().send(job);
    }

    fn execute(&self, job: &Job, runs_dir: &Path) {
        if job.transition(JobState::Running, "running").is_err() {
            return;
        }
        if job.is_cancelled() {
            let _ = job.transition(JobState::Cancelled, "cancelled before start");
            return;
        }
        let started = Instant::now();
        match self.run_job(job, &runs_dir.join(&job.id)) {
            Ok(result) => {
                job.log(format!("finished in {} ms", started.elapsed().as_millis()));
                job.finish_ok(result);
            }
            Err(e) if e.is_cancelled() => {
                let _ = job.transition(JobState::Cancelled, "cancelled at a slice boundary; nothing published");
            }
            Err(e) => job.finish_err(e.to_string()),
        }
    }

    fn run_job(&self, job: &Job, run_dir: &Path) -> Result<Value> {
        // Snapshot the inputs; computation runs without holding the lock.
        let (epoch, input, state, stages, base_cfg, inputs, loaded) = {
            let s = self.state.read().unwrap();
            let input = s.artifacts.get(job.spec.input()).cloned().ok_or_else(|| {
                ServiceError::config("job", "input", format!("no artifact named '{}'", job.spec.input()))
            })?;
            if input.data.is_labels() != matches!(job.spec, JobSpec::Analyze { .. }) {
                return Err(ServiceError::config("job", "input", "artifact has the wrong kind for this job"));
            }
            let stages = job_stages(&job.spec, s.training.as_ref())?;
            let state = match &input.data {
                Data::Volume(v) => State {
                    volume: v.clone(),
                    labels: None,
                },
                Data::Labels(l) => State {
                    volume: s.view(),
                    labels: Some(l.clone()),
                },
            };
            let base_cfg = (s.source.clone(), s.roi);
            let loaded = hash::volume(&s.view());
            (s.epoch, input, state, stages, base_cfg, s.inputs.clone(), loaded)
        };
        std::fs::create_dir_all(run_dir).map_err(|e| ServiceError::io(run_dir, e))?;

        let mut state = state;
        let offset = input.lineage.len();
        let n = stages.len() as f64;
        let mut records = input.records.clone();
        let mut summaries = Vec::new();
        let threads = rayon::current_num_threads();
        let started = Instant::now();
        for (i, stage) in stages.iter().enumerate() {
            let scaled = Scaled {
                inner: job,
                start: i as f64 / n,
                span: 1.0 / n,
            };
            let t = Instant::now();
            let out = apply_stage(&mut state, offset + i, stage, run_dir, &scaled)?;
            job.log(format!(
                "stage {} ({}) finished in {} ms",
                offset + i,
                stage.op(),
                t.elapsed().as_millis()
            ));
            summaries.push(out.summary);
            records.push(out.record);
        }

        let mut lineage = input.lineage.clone();
        lineage.extend(stages.iter().cloned());
        let manifest = Manifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            tool: format!("geoseg {}", env!("CARGO_PKG_VERSION")),
            config: RunConfig {
                input: base_cfg.0,
                roi: base_cfg.1,
                stages: lineage.clone(),
            },
            threads,
            inputs,
            loaded,
            stages: records.clone(),
            elapsed_ms: started.elapsed().as_millis() as u64,
        };
        let manifest_path = run_dir.join(MANIFEST_FILE);
        manifest.save(&manifest_path)?;

        let mut result = json!({
            "run_dir": run_dir,
            "manifest": manifest_path,
            "stages": summaries,
            "product": records.last().map(|r| r.product.clone()),
            "files": records.last().map(|r| r.files.clone()).unwrap_or_default(),
        });
        if let Some(name) = job.spec.output() {
            let data = if job.spec.kind() == "filter" {
                Data::Volume(state.volume.clone())
            } else {
                Data::Labels(state.labels.clone().expect("segmentation stages produce labels"))
            };
            let mut s = self.state.write().unwrap();
            if s.epoch != epoch {
                return Err(ServiceError::config(
                    "job",
                    "roi",
                    "the ROI changed while the job ran; result discarded",
                ));
            }
            s.publish(name, data, lineage, records);
            result["artifact"] = json!(name);
        }
        Ok(result)
    }
}

/// The stages a job applies to its input.
pub fn job_stages(spec: &JobSpec, training: Option<&TrainingTable>) -> Result<Vec<Stage>> {
    let bad = |field: &str, msg: String| Err(ServiceError::config("job", field, msg));
    match spec {
        JobSpec::Filter { steps, .. } => {
            if steps.is_empty() {
                return bad("steps", "list at least one filter".into());
            }
            if let Some((i, s)) = steps.iter().enumerate().find(|(_, s)| !s.is_filter()) {
                return bad(&format!("steps[{i}]"), format!("'{}' is not a filter", s.op()));
            }
            Ok(steps.clone())
        }
        JobSpec::Segment { method, .. } => match method {
            Stage::Kmeans(_) | Stage::Fcm(_) => Ok(vec![method.clone()]),
            other => bad("method", format!("'{}' is not kmeans or fcm", other.op())),
        },
        JobSpec::Ede { config, .. } => Ok(vec![Stage::Ede(config.clone())]),
        JobSpec::Classify { trainer, .. } => {
            let Some(table) = training else {
                return bad("training_table", "no training table; PUT /training-table first".into());
            };
            Ok(vec![Stage::Classify(ClassifySpec {
                table: TableSource::Inline(table.clone()),
                trainer: *trainer,
            })])
        }
        JobSpec::Analyze { analysis, .. } => Ok(vec![Stage::Analyze(analysis.clone())]),
    }
}

/// Process-wide registry of sessions and jobs.
pub struct Registry {
    pub data_dir: PathBuf,
    sessions: RwLock<BTreeMap<String, Arc<Session>>>,
    latest: RwLock<Option<String>>,
    jobs: RwLock<BTreeMap<String, Arc<Job>>>,
    counter: AtomicU64,
}

impl Registry {
    pub fn new(data_dir: PathBuf) -> Self {
        Registry {
            data_dir,
            sessions: RwLock::new(BTreeMap::new()),
            latest: RwLock::new(None),
            jobs: RwLock::new(BTreeMap::new()),
            counter: AtomicU64::new(0),
        }
    }

    /// Short unique token: a process-local counter plus random bits.
    pub fn token(&self, prefix: &str) -> String {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let r = uuid::Uuid::new_v4().simple().to_string();
        format!("{prefix}{n:06}-{}", &r[..8])
    }

    pub fn open_session(&self, source: Source) -> Result<Arc<Session>> {
        let id = self.token("s");
        let session = Session::open(id.clone(), source, self.data_dir.join("runs"))?;
        self.sessions.write().unwrap().insert(id.clone(), session.clone());
        *self.latest.write().unwrap() = Some(id);
        Ok(session)
    }

    /// The named session, or the most recently opened one.
    pub fn session(&self, id: Option<&str>) -> Option<Arc<Session>> {
        let id = match id {
            Some(id) => id.to_string(),
            None => self.latest.read().unwrap().clone()?,
        };
        self.sessions.read().unwrap().get(&id).cloned()
    }

    pub fn submit(&self, session: &Session, spec: JobSpec) -> Arc<Job> {
        let job = Arc::new(Job::new(self.token("j"), session.id.clone(), spec));
        self.jobs.write().unwrap().insert(job.id.clone(), job.clone());
        session.enqueue(job.clone());
        job
    }

    pub fn job(&self, id: &str) -> Option<Arc<Job>> {
        self.jobs.read().unwrap().get(id).cloned()
    }

    pub fn jobs(&self) -> Vec<Arc<Job>> {
        self.jobs.read().unwrap().values().cloned().collect()
    }
}
