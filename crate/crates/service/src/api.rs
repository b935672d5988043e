//! HTTP/JSON API over the session registry.
//!
//! Requests pick their session with a `session` query parameter or an
//! `x-session` header and fall back to the most recently opened session.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use geoseg::supervised::TrainingTable;
use geoseg::volume::{vtk_bytes, ByteOrder, VtkEncoding, VtkSource};
use geoseg::{BitDepth, Roi};
use serde_json::{json, Value};

use crate::config::{AnalyzeOp, AnalyzeSpec, Source};
use crate::error::ServiceError;
use crate::jobs::JobSpec;
use crate::render::{gray_slice, label_slice, Window};
use crate::runner::analysis;
use crate::session::{job_stages, Data, Registry, Session, RAW};

type Q = Query<HashMap<String, String>>;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            field: None,
        }
    }

    fn bad(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(f) = self.field {
            body["field"] = json!(f);
        }
        (self.status, Json(body)).into_response()
    }
}

/// Status for a toolkit error: bad input shape is the caller's request,
/// parameters that cannot work on this data are unprocessable.
fn core_status(e: &geoseg::Error) -> StatusCode {
    use geoseg::Error as E;
    match e {
        E::InvalidParameter(_)
        | E::InfeasibleK(_)
        | E::DegenerateHistogram(_)
        | E::Conditioning(_)
        | E::EmptyRegion(_)
        | E::EmptyPhase(_)
        | E::RangeOverlap(_)
        | E::UndefinedRoc(_)
        | E::Model(_) => StatusCode::UNPROCESSABLE_ENTITY,
        E::Cancelled => StatusCode::CONFLICT,
        _ => StatusCode::BAD_REQUEST,
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        match &e {
            ServiceError::Config { field, message, .. } => ApiError::bad(message.clone()).field(field.clone()),
            _ => match e.core() {
                Some(c) => ApiError::new(core_status(c), e.to_string()),
                None => ApiError::bad(e.to_string()),
            },
        }
    }
}

impl From<geoseg::Error> for ApiError {
    fn from(e: geoseg::Error) -> Self {
        ApiError::new(core_status(&e), e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad(format!("invalid JSON body: {e}")))
}

fn session_of(reg: &Registry, q: &HashMap<String, String>, headers: &HeaderMap) -> ApiResult<Arc<Session>> {
    let id = q
        .get("session")
        .map(String::as_str)
        .or_else(|| headers.get("x-session").and_then(|v| v.to_str().ok()));
    reg.session(id).ok_or_else(|| match id {
        Some(id) => ApiError::not_found(format!("no session '{id}'")),
        None => ApiError::not_found("no volume loaded; POST /volume first"),
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/volume", post(post_volume))
        .route("/session", get(get_session))
        .route("/slice/{z}", get(get_slice))
        .route("/roi", put(put_roi))
        .route("/training-table", put(put_training).get(get_training))
        .route("/jobs", post(post_job).get(list_jobs))
        .route("/jobs/{id}", get(get_job).delete(cancel_job))
        .route("/metrics/{label}", get(get_metrics))
        .route("/export/{artifact}", get(get_export))
        .with_state(registry)
}

async fn post_volume(State(reg): State<Arc<Registry>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let source: Source = parse_json(&body)?;
    let session = blocking(move || Ok(reg.open_session(source)?)).await?;
    let s = session.state.read().unwrap();
    let v = s.view();
    let body = json!({
        "session": session.id,
        "dims": v.dims(),
        "bit_depth": v.bit_depth(),
        "voxel_size": v.voxel_size(),
        "min": v.data().iter().min(),
        "max": v.data().iter().max(),
        "sha256": crate::hash::volume(&v),
    });
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(reg): State<Arc<Registry>>, Query(q): Q, headers: HeaderMap) -> ApiResult<Json<Value>> {
    let session = session_of(&reg, &q, &headers)?;
    let s = session.state.read().unwrap();
    Ok(Json(json!({
        "session": session.id,
        "source": s.source,
        "full_dims": s.base.dims(),
        "roi": s.roi,
        "artifacts": s.artifact_infos(),
        "training_rows": s.training.as_ref().map(|t| t.rows.len()),
    })))
}

async fn get_slice(
    State(reg): State<Arc<Registry>>,
    Path(z): Path<String>,
    Query(q): Q,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let session = session_of(&reg, &q, &headers)?;
    let z: usize = z.parse().map_err(|_| ApiError::bad(format!("slice '{z}' is not an index")).field("z"))?;
    let layer = q.get("layer").map(String::as_str).unwrap_or("raw");
    let data = {
        let s = session.state.read().unwrap();
        let found = match (q.get("name"), layer) {
            (Some(name), _) => s.artifacts.get(name).map(|a| a.data.clone()),
            (None, "raw") => Some(s.artifacts[RAW].data.clone()),
            (None, "filtered") => s.latest(false).map(|(_, a)| a.data.clone()),
            (None, "labels") => s.latest(true).map(|(_, a)| a.data.clone()),
            (None, other) => {
                return Err(ApiError::bad(format!("layer '{other}' is not raw, filtered or labels")).field("layer"))
            }
        };
        found.ok_or_else(|| ApiError::not_found(format!("no {layer} layer in this session")))?
    };
    let nz = data.dims().nz;
    if z >= nz {
        return Err(ApiError::bad(format!("slice {z} outside {nz} slices")).field("z"));
    }
    let window = q
        .get("window")
        .map(|w| Window::parse(w).map_err(|m| ApiError::bad(m).field("window")))
        .transpose()?;
    let png = blocking(move || {
        Ok(match &data {
            Data::Volume(v) => gray_slice(v, z, window.unwrap_or_else(|| Window::full(v))),
            Data::Labels(l) => label_slice(l, z),
        })
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn put_roi(
    State(reg): State<Arc<Registry>>,
    Query(q): Q,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let session = session_of(&reg, &q, &headers)?;
    let roi: Option<Roi> = parse_json(&body)?;
    let mut s = session.state.write().unwrap();
    if let Some(r) = &roi {
        r.validate(s.base.dims())
            .map_err(|e| ApiError::bad(e.to_string()).field("roi"))?;
    }
    let cleared = s.set_roi(roi)?;
    Ok(Json(json!({
        "roi": s.roi,
        "dims": s.view().dims(),
        "training_table_cleared": cleared,
    })))
}

async fn put_training(
    State(reg): State<Arc<Registry>>,
    Query(q): Q,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let session = session_of(&reg, &q, &headers)?;
    let is_csv = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv"));
    let table: TrainingTable = if is_csv {
        TrainingTable::from_csv_reader(&body[..]).map_err(|e| ApiError::bad(e.to_string()).field("rows"))?
    } else {
        parse_json(&body)?
    };
    let mut s = session.state.write().unwrap();
    table
        .validate(s.view().dims())
        .map_err(|e| ApiError::bad(e.to_string()).field("rows"))?;
    let body = json!({ "rows": table.rows.len(), "classes": table.classes() });
    s.training = Some(table);
    Ok(Json(body))
}

async fn get_training(State(reg): State<Arc<Registry>>, Query(q): Q, headers: HeaderMap) -> ApiResult<Json<Value>> {
    let session = session_of(&reg, &q, &headers)?;
    let s = session.state.read().unwrap();
    let t = s
        .training
        .as_ref()
        .ok_or_else(|| ApiError::not_found("no training table set"))?;
    Ok(Json(json!(t)))
}

async fn post_job(
    State(reg): State<Arc<Registry>>,
    Query(q): Q,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let spec: JobSpec = parse_json(&body)?;
    let session = session_of(&reg, &q, &headers)?;
    {
        let s = session.state.read().unwrap();
        let stages = job_stages(&spec, s.training.as_ref())?;
        for (i, st) in stages.iter().enumerate() {
            st.check().map_err(|(field, msg)| {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, msg).field(format!("stage[{i}].{field}"))
            })?;
        }
        if spec.output() == Some(RAW) {
            return Err(ApiError::bad("'raw' is reserved for the ROI view").field("name"));
        }
        let want_labels = matches!(spec, JobSpec::Analyze { .. });
        let input = spec.input();
        match s.artifacts.get(input) {
            Some(a) if a.data.is_labels() != want_labels => {
                let need = if want_labels { "a label volume" } else { "an intensity volume" };
                return Err(ApiError::bad(format!("artifact '{input}' is not {need}")).field("input"));
            }
            Some(_) => {}
            None => {
                // Inputs may come from a job still waiting in this session's queue.
                let pending = reg.jobs().into_iter().any(|j| {
                    j.session == session.id && !j.state().is_final() && j.spec.output() == Some(input)
                });
                if !pending {
                    return Err(ApiError::not_found(format!("no artifact named '{input}'")).field("input"));
                }
            }
        }
    }
    let job = reg.submit(&session, spec);
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "id": job.id, "session": session.id, "state": job.state() })),
    ))
}

async fn list_jobs(State(reg): State<Arc<Registry>>, Query(q): Q) -> Json<Value> {
    let jobs: Vec<_> = reg
        .jobs()
        .iter()
        .filter(|j| q.get("session").is_none_or(|s| &j.session == s))
        .map(|j| j.snapshot())
        .collect();
    Json(json!(jobs))
}

async fn get_job(State(reg): State<Arc<Registry>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let job = reg.job(&id).ok_or_else(|| ApiError::not_found(format!("no job '{id}'")))?;
    Ok(Json(json!(job.snapshot())))
}

async fn cancel_job(State(reg): State<Arc<Registry>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let job = reg.job(&id).ok_or_else(|| ApiError::not_found(format!("no job '{id}'")))?;
    job.request_cancel().map_err(|state| {
        ApiError::new(
            StatusCode::CONFLICT,
            format!("job '{id}' already finished ({})", json!(state).as_str().unwrap_or("")),
        )
    })?;
    Ok(Json(json!(job.snapshot())))
}

fn labels_artifact(session: &Session, name: &str) -> ApiResult<Arc<geoseg::LabelVolume>> {
    let s = session.state.read().unwrap();
    match s.artifacts.get(name).map(|a| &a.data) {
        Some(Data::Labels(l)) => Ok(l.clone()),
        Some(Data::Volume(_)) => Err(ApiError::bad(format!("artifact '{name}' is not a label volume"))),
        None => Err(ApiError::not_found(format!("no artifact named '{name}'"))),
    }
}

fn parse_param<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str) -> ApiResult<Option<T>> {
    q.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| ApiError::bad(format!("'{v}' is not a valid {key}")).field(key))
        })
        .transpose()
}

async fn get_metrics(
    State(reg): State<Arc<Registry>>,
    Path(label): Path<String>,
    Query(q): Q,
    headers: HeaderMap,
) -> ApiResult<Json<Value>> {
    let session = session_of(&reg, &q, &headers)?;
    let labels = labels_artifact(&session, &label)?;
    let op: AnalyzeOp = q
        .get("op")
        .ok_or_else(|| ApiError::bad("missing op").field("op"))?
        .parse()
        .map_err(|m: String| ApiError::bad(m).field("op"))?;
    let mut spec = AnalyzeSpec::new(vec![op]);
    if let Some(pc) = parse_param(&q, "pore_class")? {
        spec.pore_class = pc;
    }
    spec.voxel_size = parse_param(&q, "voxel_size")?;
    if let Some(b) = parse_param(&q, "bins")? {
        spec.psd.bins = b;
    }
    if let Some(sig) = parse_param(&q, "sigma")? {
        spec.psd.sigma = sig;
    }
    let value = blocking(move || Ok(analysis(&labels, &spec, op)?.0)).await?;
    Ok(Json(value))
}

async fn get_export(
    State(reg): State<Arc<Registry>>,
    Path(name): Path<String>,
    Query(q): Q,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let session = session_of(&reg, &q, &headers)?;
    let data = {
        let s = session.state.read().unwrap();
        s.artifacts
            .get(&name)
            .map(|a| a.data.clone())
            .ok_or_else(|| ApiError::not_found(format!("no artifact named '{name}'")))?
    };
    let format = q.get("format").map(String::as_str).unwrap_or("vtk").to_string();
    let encoding = match q.get("encoding").map(String::as_str) {
        None | Some("binary") => VtkEncoding::Binary,
        Some("ascii") => VtkEncoding::Ascii,
        Some(other) => return Err(ApiError::bad(format!("encoding '{other}' is not ascii or binary")).field("encoding")),
    };
    let order = match q.get("byte_order").map(String::as_str) {
        None | Some("little") => ByteOrder::Little,
        Some("big") => ByteOrder::Big,
        Some(other) => return Err(ApiError::bad(format!("byte order '{other}' is not little or big")).field("byte_order")),
    };
    let pore_class: u8 = parse_param(&q, "pore_class")?.unwrap_or(1);
    let (bytes, ctype, ext) = blocking(move || {
        Ok(match (format.as_str(), &data) {
            ("vtk", Data::Volume(v)) => (vtk_bytes(&VtkSource::from(&**v), encoding), "application/octet-stream", "vtk"),
            ("vtk", Data::Labels(l)) => (vtk_bytes(&VtkSource::from(&**l), encoding), "application/octet-stream", "vtk"),
            ("raw", Data::Volume(v)) => (raw_bytes(v, order), "application/octet-stream", "raw"),
            ("raw", Data::Labels(l)) => (l.labels().to_vec(), "application/octet-stream", "raw"),
            ("csv", Data::Labels(l)) => {
                let spec = AnalyzeSpec {
                    pore_class,
                    ..AnalyzeSpec::new(vec![AnalyzeOp::Trend])
                };
                let (_, table) = analysis(l, &spec, AnalyzeOp::Trend)?;
                (table.to_csv_string().into_bytes(), "text/csv", "csv")
            }
            ("csv", Data::Volume(_)) => {
                return Err(ApiError::bad("csv export needs a label volume").field("format"));
            }
            (other, _) => {
                return Err(ApiError::bad(format!("format '{other}' is not vtk, raw or csv")).field("format"));
            }
        })
    })
    .await?;
    let disposition = format!("attachment; filename=\"{name}.{ext}\"");
    Ok((
        [(header::CONTENT_TYPE, ctype.to_string()), (header::CONTENT_DISPOSITION, disposition)],
        bytes,
    )
        .into_response())
}

/// Samples as written by the raw exporter.
pub fn raw_bytes(v: &geoseg::VoxelVolume, order: ByteOrder) -> Vec<u8> {
    match v.bit_depth() {
        BitDepth::U8 => v.data().iter().map(|&s| s as u8).collect(),
        BitDepth::U16 => v
            .data()
            .iter()
            .flat_map(|&s| match order {
                ByteOrder::Little => s.to_le_bytes(),
                ByteOrder::Big => s.to_be_bytes(),
            })
            .collect(),
    }
}
