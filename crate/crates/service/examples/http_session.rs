//! Drives the HTTP API in-process: load a volume, set an ROI and a training
//! table, queue a classification job, poll it and read porosity back.
//!
//! cargo run --release -p geoseg-service --example http_session

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::Request;
use axum::Router;
use geoseg::synthetic::{random_spheres, sphere_labels};
use geoseg::volume::{export_raw, ByteOrder};
use geoseg::{BitDepth, Dims, VoxelVolume};
use geoseg_service::api::router;
use geoseg_service::Registry;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> anyhow::Result<(u16, Value)> {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(serde_json::to_vec(&b)?))?,
        None => req.body(Body::empty())?,
    };
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await?.to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes)? };
    Ok((status, v))
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join("geoseg-http");
    std::fs::create_dir_all(&dir)?;
    let d = Dims::new(48, 48, 24);
    let truth = sphere_labels(d, &random_spheres(d, 12, 3.0, 7.0, 1.0, 2)?, 1, 2)?;
    let vol = VoxelVolume::from_fn(d, 1.0, BitDepth::U8, |x, y, z| {
        if truth.get(x, y, z) == 1 { 60 } else { 180 }
    })?;
    let raw = dir.join("pack.raw");
    export_raw(&vol, &raw, ByteOrder::Little)?;

    let app = router(Arc::new(Registry::new(dir.join("data"))));
    let (_, s) = call(&app, "POST", "/volume", Some(json!({"kind": "raw", "path": raw, "dims": [48, 48, 24], "bits": 8}))).await?;
    println!("session {}", s["session"]);

    let (_, s) = call(&app, "PUT", "/roi", Some(json!({"x0": 4, "y0": 4, "z0": 2, "dx": 40, "dy": 40, "dz": 20}))).await?;
    println!("roi view {}", s["dims"]);

    // training rows are in ROI coordinates
    let mut rows = Vec::new();
    for z in [3, 10, 17] {
        for y in (1..40).step_by(6) {
            for x in (1..40).step_by(6) {
                let c = truth.get(x + 4, y + 4, z + 2);
                rows.push(json!({"class": c, "feature": if c == 1 { "pore" } else { "matrix" }, "x": x, "y": y, "slice": z}));
            }
        }
    }
    let (status, _) = call(&app, "PUT", "/training-table", Some(json!({ "rows": rows }))).await?;
    println!("training table: HTTP {status}, {} rows", rows.len());

    let (_, job) = call(&app, "POST", "/jobs", Some(json!({"kind": "classify", "trainer": {"kind": "lssvm"}}))).await?;
    let id = job["id"].as_str().unwrap_or_default().to_string();
    let job = loop {
        let (_, j) = call(&app, "GET", &format!("/jobs/{id}"), None).await?;
        println!("  {} {:.0}%", j["state"], 100.0 * j["progress"].as_f64().unwrap_or(0.0));
        if ["done", "failed", "cancelled"].contains(&j["state"].as_str().unwrap_or("")) {
            break j;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    };
    if job["state"] != "done" {
        anyhow::bail!("job ended {}: {}", job["state"], job["error"]);
    }
    let (_, m) = call(&app, "GET", "/metrics/classified?op=porosity", None).await?;
    println!("porosity of the classified ROI: {}", m["porosity"]);
    println!("job manifest {}", job["result"]["manifest"]);
    Ok(())
}
