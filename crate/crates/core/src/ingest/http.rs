use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Method, Request, Response, Server};

use super::{CloudLink, ConfigSnapshot, DetectionRequest, DetectionResponse, IngestError, IngestService};
use crate::telemetry::BulkUpload;

const H_SENSOR: &str = "X-Sensor-Id";
const H_SESSION: &str = "X-Session-Id";
const H_SHIP: &str = "X-Ship-Present";
const H_ROWS: &str = "X-Row-Count";

/// Request/response endpoints of the ingest service:
///
/// - `PUT /upload` with the session CSV as body and `X-Sensor-Id`,
///   `X-Session-Id`, `X-Ship-Present`, `X-Row-Count` headers
/// - `PUT /scene` with the scene document as body and the same id headers
/// - `POST /detect` with a [`DetectionRequest`] body
/// - `GET /config/<sensor>?since=<version>` (204 when nothing newer)
/// - `POST /config/<sensor>` with a JSON object of parameter updates
pub struct HttpServer {
    server: Arc<Server>,
    addr: SocketAddr,
    worker: Option<JoinHandle<()>>,
}

fn header<'a>(req: &'a Request, name: &str) -> Option<&'a str> {
    req.headers().iter().find(|h| h.field.as_str().as_str().eq_ignore_ascii_case(name)).map(|h| h.value.as_str())
}

type Reply = (u16, String);

fn bad(e: impl std::fmt::Display) -> Reply {
    (400, e.to_string())
}

fn route(svc: &IngestService, req: &mut Request) -> Reply {
    let mut body = String::new();
    if let Err(e) = req.as_reader().read_to_string(&mut body) {
        return bad(e);
    }
    let url = req.url().to_string();
    let (path, query) = url.split_once('?').unwrap_or((&url, ""));
    match (req.method(), path) {
        (Method::Put, "/upload") | (Method::Put, "/scene") => {
            let (Some(sensor), Some(session), Some(ship)) =
                (header(req, H_SENSOR), header(req, H_SESSION), header(req, H_SHIP))
            else {
                return bad("missing id headers");
            };
            let ship_present = ship.eq_ignore_ascii_case("true") || ship == "1";
            if path == "/scene" {
                return match svc.store().store_scene(sensor, session, ship_present, &body) {
                    Ok(()) => (200, "ok".into()),
                    Err(e) => bad(e),
                };
            }
            let Some(row_count) = header(req, H_ROWS).and_then(|v| v.parse::<usize>().ok()) else {
                return bad("missing or invalid X-Row-Count");
            };
            let bulk = BulkUpload {
                sensor_id: sensor.to_string(),
                session_id: session.to_string(),
                ship_present,
                row_count,
                csv: body,
                scene: None,
            };
            match svc.upload(&bulk) {
                Ok(()) => (200, "ok".into()),
                Err(e) => bad(e),
            }
        }
        (Method::Post, "/detect") => match serde_json::from_str::<DetectionRequest>(&body) {
            Ok(r) => (200, serde_json::to_string(&svc.handle_detection(&r)).expect("response serializes")),
            Err(e) => bad(e),
        },
        (Method::Get, p) if p.starts_with("/config/") => {
            let sensor = &p["/config/".len()..];
            let since =
                query.split('&').find_map(|kv| kv.strip_prefix("since=")).and_then(|v| v.parse().ok()).unwrap_or(0);
            match svc.config().get_config(sensor, since) {
                Some(snap) => (200, serde_json::to_string(&snap).expect("snapshot serializes")),
                None => (204, String::new()),
            }
        }
        (Method::Post, p) if p.starts_with("/config/") => {
            let sensor = &p["/config/".len()..];
            let updates: BTreeMap<String, f64> = match serde_json::from_str(&body) {
                Ok(u) => u,
                Err(e) => return bad(e),
            };
            match svc.config().set_config(sensor, &updates) {
                Ok(v) => (200, format!("{{\"version\":{v}}}")),
                Err(e) => bad(e),
            }
        }
        _ => (404, format!("no route for {} {path}", req.method())),
    }
}

impl HttpServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and serves on a background thread.
    pub fn start(service: Arc<IngestService>, addr: &str) -> Result<Self, IngestError> {
        let server = Arc::new(Server::http(addr).map_err(|e| IngestError::Link(e.to_string()))?);
        let bound = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| IngestError::Link("server is not bound to an IP address".into()))?;
        let srv = Arc::clone(&server);
        let worker = std::thread::spawn(move || {
            for mut req in srv.incoming_requests() {
                let (code, body) = route(&service, &mut req);
                let ctype = if body.starts_with('{') { "application/json" } else { "text/plain" };
                let resp = Response::from_string(body)
                    .with_status_code(code)
                    .with_header(Header::from_bytes("Content-Type", ctype).expect("static header"));
                if let Err(e) = req.respond(resp) {
                    log::warn!("http respond failed: {e}");
                }
            }
        });
        Ok(Self { server, addr: bound, worker: Some(worker) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

/// [`CloudLink`] over the HTTP endpoints of [`HttpServer`].
#[derive(Debug, Clone)]
pub struct HttpLink {
    base: String,
    agent: ureq::Agent,
}

fn link_err(e: ureq::Error) -> IngestError {
    match e {
        ureq::Error::Status(code, resp) => {
            IngestError::Link(format!("status {code}: {}", resp.into_string().unwrap_or_default()))
        }
        other => IngestError::Link(other.to_string()),
    }
}

impl HttpLink {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    pub fn set_config(&self, sensor_id: &str, updates: &BTreeMap<String, f64>) -> Result<u64, IngestError> {
        let body = serde_json::to_string(updates).expect("map serializes");
        let resp =
            self.agent.post(&format!("{}/config/{sensor_id}", self.base)).send_string(&body).map_err(link_err)?;
        let v: serde_json::Value =
            serde_json::from_str(&resp.into_string()?).map_err(|e| IngestError::Link(e.to_string()))?;
        v["version"].as_u64().ok_or_else(|| IngestError::Link("missing version".into()))
    }
}

impl CloudLink for HttpLink {
    fn detect(&self, request: &DetectionRequest) -> Result<DetectionResponse, IngestError> {
        let body = serde_json::to_string(request).expect("request serializes");
        let resp = self.agent.post(&format!("{}/detect", self.base)).send_string(&body).map_err(link_err)?;
        serde_json::from_str(&resp.into_string()?).map_err(|e| IngestError::Link(e.to_string()))
    }

    fn poll_config(&self, sensor_id: &str, since_version: u64) -> Result<Option<ConfigSnapshot>, IngestError> {
        let resp = self
            .agent
            .get(&format!("{}/config/{sensor_id}?since={since_version}", self.base))
            .call()
            .map_err(link_err)?;
        if resp.status() == 204 {
            return Ok(None);
        }
        serde_json::from_str(&resp.into_string()?).map(Some).map_err(|e| IngestError::Link(e.to_string()))
    }

    fn upload(&self, bulk: &BulkUpload) -> Result<(), IngestError> {
        let put = |path: &str| {
            self.agent
                .put(&format!("{}{path}", self.base))
                .set(H_SENSOR, &bulk.sensor_id)
                .set(H_SESSION, &bulk.session_id)
                .set(H_SHIP, if bulk.ship_present { "true" } else { "false" })
        };
        put("/upload").set(H_ROWS, &bulk.row_count.to_string()).send_string(&bulk.csv).map_err(link_err)?;
        if let Some(scene) = &bulk.scene {
            put("/scene").send_string(scene).map_err(link_err)?;
        }
        Ok(())
    }
}
