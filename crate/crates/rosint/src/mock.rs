//! Fixture-driven emulation of everything the scanner meets in the wild:
//! fake ROS masters, fake Rosbridge servers, tarpits that accept on every
//! probed port, plain HTTP servers, closed hosts, and a logging honeypot.
//!
//! Every fixture records inbound requests, so tests can assert not just what
//! the scanner found but exactly what it sent. Fixtures bind loopback
//! addresses only unless explicitly unlocked.

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::Path;
use std::sync::atomic::{AtomicU16, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde_json::json;
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;

use crate::http::{self, RequestHead};
use crate::recfile::{self, RecError};
use crate::ws;
use crate::xmlrpc::{self, MethodCall, XmlRpcValue};

#[derive(Debug, Error)]
pub enum MockError {
    #[error("port {0} already in use (or claimed twice in the fleet spec)")]
    PortInUse(SocketAddr),
    #[error("fixture would bind non-loopback {0}; pass the explicit unsafe flag to allow")]
    NonLoopbackBind(Ipv4Addr),
    #[error("fleet spec: {0}")]
    Spec(#[from] RecError),
    #[error("fleet spec line {line_no}: {reason}")]
    BadFixture { line_no: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    Master,
    Rosbridge,
    Tarpit,
    PlainHttp,
    Closed,
    Honeypot,
}

#[derive(Debug, Clone, Default)]
pub struct TopicSpec {
    pub name: String,
    pub publishers: Vec<String>,
    pub subscribers: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ServiceSpec {
    pub name: String,
    pub providers: Vec<String>,
}

/// Fault injections, first-class so partial-failure paths are testable.
#[derive(Debug, Clone, Default)]
pub struct Behaviors {
    /// Delay before any response is written.
    pub slow: Option<Duration>,
    /// Close the connection halfway through the response body.
    pub truncate_response: bool,
    /// Master methods answered with a status -1 triple instead of data.
    pub fault_methods: Vec<String>,
    /// Rosbridge: refuse every op as unauthorized.
    pub auth_refuse: bool,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub kind: FixtureKind,
    pub addr: Ipv4Addr,
    pub port: u16,
    /// Additional listeners (tarpits answer on every probed port).
    pub extra_ports: Vec<u16>,
    pub topics: Vec<TopicSpec>,
    pub services: Vec<ServiceSpec>,
    pub params: BTreeMap<String, XmlRpcValue>,
    /// Rosbridge: topics withheld from the topic-list service.
    pub protected_topics: Vec<String>,
    pub behaviors: Behaviors,
    pub allow_non_loopback: bool,
}

impl Fixture {
    pub fn new(kind: FixtureKind, addr: Ipv4Addr, port: u16) -> Self {
        Fixture {
            kind,
            addr,
            port,
            extra_ports: Vec::new(),
            topics: Vec::new(),
            services: Vec::new(),
            params: BTreeMap::new(),
            protected_topics: Vec::new(),
            behaviors: Behaviors::default(),
            allow_non_loopback: false,
        }
    }

    pub fn master(addr: Ipv4Addr, port: u16) -> Self {
        Self::new(FixtureKind::Master, addr, port)
    }

    pub fn rosbridge(addr: Ipv4Addr, port: u16) -> Self {
        Self::new(FixtureKind::Rosbridge, addr, port)
    }

    pub fn tarpit(addr: Ipv4Addr, ports: &[u16]) -> Self {
        let mut fixture = Self::new(FixtureKind::Tarpit, addr, ports[0]);
        fixture.extra_ports = ports[1..].to_vec();
        fixture
    }

    pub fn plain_http(addr: Ipv4Addr, port: u16) -> Self {
        Self::new(FixtureKind::PlainHttp, addr, port)
    }

    pub fn closed(addr: Ipv4Addr, port: u16) -> Self {
        Self::new(FixtureKind::Closed, addr, port)
    }

    pub fn honeypot(addr: Ipv4Addr, port: u16) -> Self {
        Self::new(FixtureKind::Honeypot, addr, port)
    }

    pub fn with_topic(mut self, name: &str, publishers: &[&str]) -> Self {
        self.topics.push(TopicSpec {
            name: name.to_string(),
            publishers: publishers.iter().map(|p| p.to_string()).collect(),
            subscribers: Vec::new(),
        });
        self
    }

    pub fn with_service(mut self, name: &str, providers: &[&str]) -> Self {
        self.services.push(ServiceSpec {
            name: name.to_string(),
            providers: providers.iter().map(|p| p.to_string()).collect(),
        });
        self
    }

    pub fn with_param(mut self, name: &str, value: &str) -> Self {
        self.params
            .insert(name.to_string(), XmlRpcValue::string(value));
        self
    }

    pub fn with_protected_topics(mut self, names: &[&str]) -> Self {
        self.protected_topics = names.iter().map(|n| n.to_string()).collect();
        self
    }

    pub fn with_behaviors(mut self, behaviors: Behaviors) -> Self {
        self.behaviors = behaviors;
        self
    }

    /// A plausible empty-core master: rosout topics, logger services, run_id.
    pub fn empty_core(addr: Ipv4Addr, port: u16) -> Self {
        Self::master(addr, port)
            .with_topic("/rosout", &["/rosout"])
            .with_topic("/rosout_agg", &["/rosout"])
            .with_service("/rosout/get_loggers", &["/rosout"])
            .with_service("/rosout/set_logger_level", &["/rosout"])
            .with_param("/run_id", "c2dd9170-1d68-11e8-b615-1c6f65c4efd7")
    }

    fn all_ports(&self) -> Vec<u16> {
        let mut ports = vec![self.port];
        ports.extend(&self.extra_ports);
        ports
    }

    pub fn primary_addr(&self) -> SocketAddr {
        SocketAddr::new(IpAddr::V4(self.addr), self.port)
    }
}

#[derive(Debug, Clone)]
pub struct RequestLogEntry {
    pub at: DateTime<Utc>,
    pub peer: SocketAddr,
    pub local_port: u16,
    pub detail: RequestDetail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestDetail {
    Connected,
    HttpRequest { method: String, path: String },
    XmlRpcCall { method: String, caller_id: Option<String> },
    BridgeOp { op: String, service: Option<String> },
    RawBytes { len: usize },
}

/// Concurrent-append, snapshot-read request log shared by one fixture's
/// listeners.
#[derive(Debug, Clone, Default)]
pub struct RequestLog {
    entries: Arc<Mutex<Vec<RequestLogEntry>>>,
}

impl RequestLog {
    pub fn snapshot(&self) -> Vec<RequestLogEntry> {
        self.entries.lock().expect("request log poisoned").clone()
    }

    /// Method names of all XML-RPC calls seen, in arrival order.
    pub fn xmlrpc_methods(&self) -> Vec<String> {
        self.snapshot()
            .into_iter()
            .filter_map(|e| match e.detail {
                RequestDetail::XmlRpcCall { method, .. } => Some(method),
                _ => None,
            })
            .collect()
    }

    /// (op, service) pairs of all Rosbridge ops seen.
    pub fn bridge_ops(&self) -> Vec<(String, Option<String>)> {
        self.snapshot()
            .into_iter()
            .filter_map(|e| match e.detail {
                RequestDetail::BridgeOp { op, service } => Some((op, service)),
                _ => None,
            })
            .collect()
    }

    pub fn connection_count(&self) -> usize {
        self.snapshot()
            .iter()
            .filter(|e| e.detail == RequestDetail::Connected)
            .count()
    }

    fn push(&self, peer: SocketAddr, local_port: u16, detail: RequestDetail) {
        self.entries
            .lock()
            .expect("request log poisoned")
            .push(RequestLogEntry {
                at: Utc::now(),
                peer,
                local_port,
                detail,
            });
    }
}

pub struct ServerHandle {
    pub fixture: Fixture,
    log: RequestLog,
    bound: Vec<SocketAddr>,
    tasks: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    /// The fixture's primary bound address (real port even if 0 was asked).
    pub fn addr(&self) -> SocketAddr {
        self.bound
            .first()
            .copied()
            .unwrap_or_else(|| self.fixture.primary_addr())
    }

    pub fn bound_addrs(&self) -> &[SocketAddr] {
        &self.bound
    }

    pub fn request_log(&self) -> &RequestLog {
        &self.log
    }

    pub fn shutdown(&mut self) {
        for task in self.tasks.drain(..) {
            task.abort();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Start one fixture. Closed fixtures get no listener; every other kind gets
/// one accept loop per port.
pub async fn serve(fixture: Fixture) -> Result<ServerHandle, MockError> {
    if !fixture.addr.is_loopback() && !fixture.allow_non_loopback {
        return Err(MockError::NonLoopbackBind(fixture.addr));
    }
    let log = RequestLog::default();
    let mut bound = Vec::new();
    let mut tasks = Vec::new();

    if fixture.kind != FixtureKind::Closed {
        for port in fixture.all_ports() {
            let target = SocketAddr::new(IpAddr::V4(fixture.addr), port);
            let listener = TcpListener::bind(target).await.map_err(|err| {
                if err.kind() == std::io::ErrorKind::AddrInUse {
                    MockError::PortInUse(target)
                } else {
                    MockError::Io(err)
                }
            })?;
            bound.push(listener.local_addr()?);
            tasks.push(tokio::spawn(accept_loop(
                listener,
                fixture.clone(),
                log.clone(),
            )));
        }
    }

    Ok(ServerHandle {
        fixture,
        log,
        bound,
        tasks,
    })
}

async fn accept_loop(listener: TcpListener, fixture: Fixture, log: RequestLog) {
    let local_port = listener.local_addr().map(|a| a.port()).unwrap_or(0);
    loop {
        let Ok((stream, peer)) = listener.accept().await else {
            return;
        };
        log.push(peer, local_port, RequestDetail::Connected);
        let fixture = fixture.clone();
        let log = log.clone();
        tokio::spawn(async move {
            let _ = handle_connection(stream, peer, local_port, &fixture, &log).await;
        });
    }
}

async fn handle_connection(
    mut stream: TcpStream,
    peer: SocketAddr,
    local_port: u16,
    fixture: &Fixture,
    log: &RequestLog,
) -> Result<(), MockError> {
    match fixture.kind {
        FixtureKind::Tarpit | FixtureKind::Honeypot => {
            // Accept, log whatever arrives, never answer.
            let mut buf = [0u8; 4096];
            loop {
                match tokio::time::timeout(Duration::from_secs(30), stream.read(&mut buf)).await {
                    Ok(Ok(0)) | Ok(Err(_)) | Err(_) => return Ok(()),
                    Ok(Ok(n)) => log.push(peer, local_port, RequestDetail::RawBytes { len: n }),
                }
            }
        }
        FixtureKind::Closed => Ok(()),
        FixtureKind::PlainHttp => {
            let Ok((head, _)) = http::read_request_head(&mut stream).await else {
                return Ok(());
            };
            log_http(log, peer, local_port, &head);
            apply_slow(fixture).await;
            let body = b"<html><head><title>It works</title></head><body>hello</body></html>";
            let _ = http::write_response(
                &mut stream,
                200,
                "OK",
                &[("Server", "mock-httpd/1.0"), ("Content-Type", "text/html")],
                body,
            )
            .await;
            Ok(())
        }
        FixtureKind::Master => handle_master(stream, peer, local_port, fixture, log).await,
        FixtureKind::Rosbridge => handle_rosbridge(stream, peer, local_port, fixture, log).await,
    }
}

fn log_http(log: &RequestLog, peer: SocketAddr, local_port: u16, head: &RequestHead) {
    log.push(
        peer,
        local_port,
        RequestDetail::HttpRequest {
            method: head.method.clone(),
            path: head.path.clone(),
        },
    );
}

async fn apply_slow(fixture: &Fixture) {
    if let Some(delay) = fixture.behaviors.slow {
        tokio::time::sleep(delay).await;
    }
}

// --- mock ROS master --------------------------------------------------------

async fn handle_master(
    mut stream: TcpStream,
    peer: SocketAddr,
    local_port: u16,
    fixture: &Fixture,
    log: &RequestLog,
) -> Result<(), MockError> {
    let Ok((head, leftover)) = http::read_request_head(&mut stream).await else {
        return Ok(()); // bare connect probe
    };
    log_http(log, peer, local_port, &head);
    apply_slow(fixture).await;

    if head.method != "POST" {
        // XML-RPC endpoints reject plain GETs; answer like one rejecting the
        // method, with an XML fault body.
        let body = xmlrpc::serialize_fault(-1, "method GET is not supported");
        let _ = http::write_response(
            &mut stream,
            501,
            "Unsupported method ('GET')",
            &[
                ("Server", "BaseHTTP/0.6 Python/2.7.12"),
                ("Content-Type", "text/xml"),
            ],
            body.as_bytes(),
        )
        .await;
        return Ok(());
    }

    let len: usize = head
        .header("Content-Length")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let Ok(body) = http::read_request_body(&mut stream, leftover, len).await else {
        return Ok(());
    };
    let document = String::from_utf8_lossy(&body);
    let response = match xmlrpc::parse_call(&document) {
        Ok(call) => {
            log.push(
                peer,
                local_port,
                RequestDetail::XmlRpcCall {
                    method: call.name.clone(),
                    caller_id: call.params.first().and_then(|p| p.as_str()).map(String::from),
                },
            );
            dispatch_master_call(fixture, &call)
        }
        Err(_) => xmlrpc::serialize_fault(-1, "request is not a method call"),
    };

    if fixture.behaviors.truncate_response {
        // Crash simulation: half the head+body, then a hard close.
        let full = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: text/xml\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            response.len(),
            response
        );
        let cut = full.len() / 2;
        let _ = stream.write_all(&full.as_bytes()[..cut]).await;
        let _ = stream.shutdown().await;
        return Ok(());
    }

    let _ = http::write_response(
        &mut stream,
        200,
        "OK",
        &[
            ("Server", "BaseHTTP/0.6 Python/2.7.12"),
            ("Content-Type", "text/xml"),
        ],
        response.as_bytes(),
    )
    .await;
    Ok(())
}

fn ros_triple(code: i32, message: &str, payload: XmlRpcValue) -> String {
    xmlrpc::serialize_response(&XmlRpcValue::array([
        XmlRpcValue::Int(code),
        XmlRpcValue::string(message),
        payload,
    ]))
}

fn dispatch_master_call(fixture: &Fixture, call: &MethodCall) -> String {
    if fixture
        .behaviors
        .fault_methods
        .iter()
        .any(|m| m == &call.name)
    {
        return ros_triple(
            -1,
            &format!("injected fault for {}", call.name),
            XmlRpcValue::Int(0),
        );
    }
    match call.name.as_str() {
        "getSystemState" => {
            let entry = |name: &str, nodes: &[String]| {
                XmlRpcValue::array([
                    XmlRpcValue::string(name),
                    XmlRpcValue::Array(nodes.iter().map(|n| XmlRpcValue::string(n)).collect()),
                ])
            };
            let publishers: Vec<XmlRpcValue> = fixture
                .topics
                .iter()
                .filter(|t| !t.publishers.is_empty())
                .map(|t| entry(&t.name, &t.publishers))
                .collect();
            let subscribers: Vec<XmlRpcValue> = fixture
                .topics
                .iter()
                .filter(|t| !t.subscribers.is_empty())
                .map(|t| entry(&t.name, &t.subscribers))
                .collect();
            let services: Vec<XmlRpcValue> = fixture
                .services
                .iter()
                .map(|s| entry(&s.name, &s.providers))
                .collect();
            ros_triple(
                1,
                "current system state",
                XmlRpcValue::array([
                    XmlRpcValue::Array(publishers),
                    XmlRpcValue::Array(subscribers),
                    XmlRpcValue::Array(services),
                ]),
            )
        }
        "getParamNames" => ros_triple(
            1,
            "Parameter names",
            XmlRpcValue::Array(
                fixture
                    .params
                    .keys()
                    .map(|k| XmlRpcValue::string(k))
                    .collect(),
            ),
        ),
        "getParam" => {
            let key = call
                .params
                .get(1)
                .and_then(|p| p.as_str())
                .unwrap_or_default();
            match fixture.params.get(key) {
                Some(value) => ros_triple(1, &format!("Parameter [{key}]"), value.clone()),
                None => ros_triple(
                    -1,
                    &format!("Parameter [{key}] is not set"),
                    XmlRpcValue::Int(0),
                ),
            }
        }
        "getUri" => ros_triple(
            1,
            "",
            XmlRpcValue::string(format!("http://{}:{}/", fixture.addr, fixture.port)),
        ),
        _ => xmlrpc::serialize_fault(-1, &format!("method {:?} is not supported", call.name)),
    }
}

// --- mock Rosbridge ----------------------------------------------------------

async fn handle_rosbridge(
    mut stream: TcpStream,
    peer: SocketAddr,
    local_port: u16,
    fixture: &Fixture,
    log: &RequestLog,
) -> Result<(), MockError> {
    let Ok((head, leftover)) = http::read_request_head(&mut stream).await else {
        return Ok(());
    };
    log_http(log, peer, local_port, &head);
    apply_slow(fixture).await;

    let wants_upgrade = head
        .header("Upgrade")
        .map(|u| u.eq_ignore_ascii_case("websocket"))
        .unwrap_or(false);
    let Some(key) = head.header("Sec-WebSocket-Key").map(str::to_string) else {
        let _ = http::write_response(
            &mut stream,
            400,
            "Bad Request",
            &[("Content-Type", "text/plain")],
            b"WebSocket upgrade required",
        )
        .await;
        return Ok(());
    };
    if !wants_upgrade {
        let _ = http::write_response(&mut stream, 400, "Bad Request", &[], b"").await;
        return Ok(());
    }

    let Ok(mut socket) = ws::server_upgrade(stream, &key, leftover).await else {
        return Ok(());
    };

    while let Ok(Some(message)) = socket.next_message(Duration::from_secs(30)).await {
        let ws::WsMessage::Text(text) = message else {
            continue;
        };
        let Ok(request) = serde_json::from_str::<serde_json::Value>(&text) else {
            continue;
        };
        let op = request
            .get("op")
            .and_then(|v| v.as_str())
            .unwrap_or_default()
            .to_string();
        let service = request
            .get("service")
            .and_then(|v| v.as_str())
            .map(String::from);
        let id = request.get("id").and_then(|v| v.as_str()).unwrap_or("");
        log.push(
            peer,
            local_port,
            RequestDetail::BridgeOp {
                op: op.clone(),
                service: service.clone(),
            },
        );

        if fixture.behaviors.auth_refuse {
            let status = json!({"op": "status", "level": "error", "msg": "not authorized"});
            let _ = socket.send_text(&status.to_string()).await;
            socket.close().await;
            return Ok(());
        }

        if op != "call_service" {
            continue;
        }
        let response = match service.as_deref() {
            Some("/rosapi/topics") => {
                let topics: Vec<&str> = fixture
                    .topics
                    .iter()
                    .map(|t| t.name.as_str())
                    .filter(|name| !fixture.protected_topics.iter().any(|p| p == name))
                    .collect();
                let types: Vec<&str> = topics.iter().map(|_| "std_msgs/String").collect();
                json!({
                    "op": "service_response",
                    "service": "/rosapi/topics",
                    "id": id,
                    "values": {"topics": topics, "types": types},
                    "result": true,
                })
            }
            Some("/rosapi/get_param_names") => json!({
                "op": "service_response",
                "service": "/rosapi/get_param_names",
                "id": id,
                "values": {"names": fixture.params.keys().collect::<Vec<_>>()},
                "result": true,
            }),
            Some(other) => json!({
                "op": "service_response",
                "service": other,
                "id": id,
                "values": format!("service {other} not found"),
                "result": false,
            }),
            None => continue,
        };
        if socket.send_text(&response.to_string()).await.is_err() {
            return Ok(());
        }
    }
    Ok(())
}

// --- fleets -------------------------------------------------------------------

pub struct Fleet {
    handles: Vec<ServerHandle>,
}

impl Fleet {
    pub fn handles(&self) -> &[ServerHandle] {
        &self.handles
    }

    pub fn handle_at(&self, addr: Ipv4Addr) -> Option<&ServerHandle> {
        self.handles.iter().find(|h| h.fixture.addr == addr)
    }

    pub fn shutdown(&mut self) {
        for handle in &mut self.handles {
            handle.shutdown();
        }
    }
}

/// Start every fixture of a fleet, failing before any bind if the spec
/// claims the same address twice.
pub async fn spawn_fleet(fixtures: Vec<Fixture>) -> Result<Fleet, MockError> {
    let mut claimed = std::collections::BTreeSet::new();
    for fixture in &fixtures {
        if fixture.kind == FixtureKind::Closed {
            continue;
        }
        for port in fixture.all_ports() {
            if port == 0 {
                continue; // ephemeral, assigned at bind time
            }
            let target = SocketAddr::new(IpAddr::V4(fixture.addr), port);
            if !claimed.insert(target) {
                return Err(MockError::PortInUse(target));
            }
        }
    }
    let mut handles = Vec::with_capacity(fixtures.len());
    for fixture in fixtures {
        handles.push(serve(fixture).await?);
    }
    Ok(Fleet { handles })
}

/// Distinct loopback /24 blocks for concurrently running tests. Every call
/// returns a fresh 127.x.y.0 base; fixtures take .1, .2, … within it.
pub fn next_loopback_block() -> Ipv4Addr {
    static NEXT: AtomicU16 = AtomicU16::new(0);
    let n = NEXT.fetch_add(1, Ordering::Relaxed);
    // Spread across 127.77.0.0 .. 127.77.255.0 then 127.78.*, plenty for one
    // test run; process-unique offset avoids clashes between test binaries.
    let offset = (std::process::id() % 23) as u16;
    let block = n + offset * 256;
    Ipv4Addr::new(127, 77 + (block >> 8) as u8, (block & 0xff) as u8, 0)
}

/// Address `host` inside a block from [`next_loopback_block`].
pub fn block_host(block: Ipv4Addr, host: u8) -> Ipv4Addr {
    let octets = block.octets();
    Ipv4Addr::new(octets[0], octets[1], octets[2], host)
}

// --- fleet spec files ----------------------------------------------------------

/// Parse a fleet spec in the shared record-file dialect.
///
/// ```text
/// fixture kind=master addr=127.0.0.1 port=11311
/// topic name=/camera/image_raw pub=/cam_node
/// param name=/rosversion value=1.12.14
/// behavior slow_ms=50 fault_method=getParamNames
/// fixture kind=tarpit port=11311 ports=11311,58243
/// ```
pub fn parse_fleet_spec(text: &str) -> Result<Vec<Fixture>, MockError> {
    let records = recfile::parse_records(text)?;
    let mut fixtures: Vec<Fixture> = Vec::new();
    for record in &records {
        let line_no = record.line_no;
        let bad = |reason: String| MockError::BadFixture { line_no, reason };
        match record.kind.as_str() {
            "fixture" => {
                let kind = match record.require("kind").map_err(MockError::Spec)? {
                    "master" => FixtureKind::Master,
                    "rosbridge" => FixtureKind::Rosbridge,
                    "tarpit" => FixtureKind::Tarpit,
                    "plain-http" => FixtureKind::PlainHttp,
                    "closed" => FixtureKind::Closed,
                    "honeypot" => FixtureKind::Honeypot,
                    other => return Err(bad(format!("unknown fixture kind {other:?}"))),
                };
                let addr: Ipv4Addr = record
                    .first("addr")
                    .unwrap_or("127.0.0.1")
                    .parse()
                    .map_err(|_| bad("bad addr".into()))?;
                let port: u16 = record
                    .require("port")
                    .map_err(MockError::Spec)?
                    .parse()
                    .map_err(|_| bad("bad port".into()))?;
                let mut fixture = Fixture::new(kind, addr, port);
                if let Some(ports) = record.first("ports") {
                    for item in ports.split(',') {
                        let p: u16 = item.trim().parse().map_err(|_| bad("bad ports list".into()))?;
                        if p != port {
                            fixture.extra_ports.push(p);
                        }
                    }
                }
                for protected in record.all("protected") {
                    fixture.protected_topics.push(protected.to_string());
                }
                fixtures.push(fixture);
            }
            "topic" | "service" | "param" | "behavior" => {
                let fixture = fixtures
                    .last_mut()
                    .ok_or_else(|| bad(format!("{} record before any fixture", record.kind)))?;
                match record.kind.as_str() {
                    "topic" => {
                        let mut topic = TopicSpec {
                            name: record.require("name").map_err(MockError::Spec)?.to_string(),
                            publishers: record.all("pub").map(String::from).collect(),
                            subscribers: record.all("sub").map(String::from).collect(),
                        };
                        if topic.publishers.is_empty() && topic.subscribers.is_empty() {
                            topic.publishers.push("/mock_node".to_string());
                        }
                        fixture.topics.push(topic);
                    }
                    "service" => {
                        let mut providers: Vec<String> =
                            record.all("provider").map(String::from).collect();
                        if providers.is_empty() {
                            providers.push("/mock_node".to_string());
                        }
                        fixture.services.push(ServiceSpec {
                            name: record.require("name").map_err(MockError::Spec)?.to_string(),
                            providers,
                        });
                    }
                    "param" => {
                        let name = record.require("name").map_err(MockError::Spec)?.to_string();
                        let value = if let Some(path) = record.first("value_file") {
                            std::fs::read_to_string(path)?
                        } else {
                            record.first("value").unwrap_or("").to_string()
                        };
                        fixture.params.insert(name, XmlRpcValue::String(value));
                    }
                    "behavior" => {
                        if let Some(ms) = record.first("slow_ms") {
                            let ms: u64 = ms.parse().map_err(|_| bad("bad slow_ms".into()))?;
                            fixture.behaviors.slow = Some(Duration::from_millis(ms));
                        }
                        if record.first("truncate") == Some("true") {
                            fixture.behaviors.truncate_response = true;
                        }
                        for method in record.all("fault_method") {
                            fixture.behaviors.fault_methods.push(method.to_string());
                        }
                        if record.first("auth_refuse") == Some("true") {
                            fixture.behaviors.auth_refuse = true;
                        }
                    }
                    _ => unreachable!(),
                }
            }
            other => {
                return Err(MockError::Spec(RecError::UnknownKind {
                    line_no,
                    kind: other.to_string(),
                }))
            }
        }
    }
    Ok(fixtures)
}

pub fn load_fleet_spec(path: &Path) -> Result<Vec<Fixture>, MockError> {
    let text = std::fs::read_to_string(path).map_err(MockError::Io)?;
    parse_fleet_spec(&text)
}
