//! Passive Rosbridge interrogation over JSON WebSocket.
//!
//! Outbound traffic is limited to `call_service` ops against exactly two
//! read-only rosapi services: the topic list and the parameter-name list.
//! The resulting snapshot has the same shape as a master snapshot so the
//! classifier can consume either.

use std::net::SocketAddr;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value as Json;
use thiserror::Error;

use crate::fingerprint::HttpFingerprint;
use crate::rate::RateLimiter;
use crate::snapshot::{RosSnapshot, SystemState, Transport};
use crate::ws::{self, WsError, WsMessage};

pub const DEFAULT_TOPIC_SERVICE: &str = "/rosapi/topics";
pub const DEFAULT_PARAM_SERVICE: &str = "/rosapi/get_param_names";

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("websocket handshake with {target} failed: {reason}")]
    Handshake { target: SocketAddr, reason: String },
    #[error("service {service} unavailable on {target}: {reason}")]
    ServiceUnavailable {
        target: SocketAddr,
        service: String,
        reason: String,
    },
    #[error("every snapshot service call against {target} failed: {reason}")]
    SnapshotEmpty { target: SocketAddr, reason: String },
}

/// Outbound protocol message. The op whitelist is structural: this client
/// only ever constructs `call_service`.
#[derive(Debug, Serialize)]
pub struct BridgeMessage<'a> {
    pub op: &'a str,
    pub id: &'a str,
    pub service: &'a str,
}

/// Outcome of a stage-3 WebSocket detection probe.
#[derive(Debug, Clone)]
pub struct WsDetection {
    pub websocket: bool,
    pub reason: Option<String>,
    pub fingerprint: HttpFingerprint,
}

#[derive(Debug, Clone)]
pub struct BridgeClient {
    pub timeout: Duration,
    pub user_agent: String,
    pub topic_service: String,
    pub param_service: String,
    limiter: Option<RateLimiter>,
}

impl Default for BridgeClient {
    fn default() -> Self {
        Self::new()
    }
}

impl BridgeClient {
    pub fn new() -> Self {
        BridgeClient {
            timeout: Duration::from_secs(5),
            user_agent: format!("rosint/{}", env!("CARGO_PKG_VERSION")),
            topic_service: DEFAULT_TOPIC_SERVICE.to_string(),
            param_service: DEFAULT_PARAM_SERVICE.to_string(),
            limiter: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_user_agent(mut self, user_agent: impl Into<String>) -> Self {
        self.user_agent = user_agent.into();
        self
    }

    pub fn with_limiter(mut self, limiter: RateLimiter) -> Self {
        self.limiter = Some(limiter);
        self
    }

    /// Older Rosbridge deployments expose differently named rosapi services;
    /// operators can remap the pair, but it stays a pair.
    pub fn with_services(mut self, topic_service: &str, param_service: &str) -> Self {
        self.topic_service = topic_service.to_string();
        self.param_service = param_service.to_string();
        self
    }

    /// Stage 3 in rosbridge mode: one upgrade handshake, closed immediately.
    /// True only for a 101 response carrying the correct accept key.
    pub async fn detect_websocket(&self, target: SocketAddr) -> WsDetection {
        if let Some(limiter) = &self.limiter {
            limiter.acquire().await;
        }
        match ws::client_connect(target, &self.user_agent, self.timeout).await {
            Ok(outcome) => {
                let mut fingerprint = HttpFingerprint {
                    status_code: outcome.response.status,
                    headers: ["Server", "Content-Type"]
                        .iter()
                        .filter_map(|name| {
                            outcome
                                .response
                                .header(name)
                                .map(|v| (name.to_string(), v.to_string()))
                        })
                        .collect(),
                    body_prefix: String::from_utf8_lossy(&outcome.response.body).into_owned(),
                    looks_like_xmlrpc: false,
                    looks_like_websocket: outcome.stream.is_some(),
                };
                if let Some(mut stream) = outcome.stream {
                    stream.close().await;
                    fingerprint.looks_like_websocket = true;
                }
                WsDetection {
                    websocket: fingerprint.looks_like_websocket,
                    reason: outcome.reject_reason,
                    fingerprint,
                }
            }
            Err(err) => WsDetection {
                websocket: false,
                reason: Some(err.to_string()),
                fingerprint: HttpFingerprint {
                    status_code: 0,
                    headers: Default::default(),
                    body_prefix: String::new(),
                    looks_like_xmlrpc: false,
                    looks_like_websocket: false,
                },
            },
        }
    }

    /// Stage 4 over rosbridge: topic list and parameter-name list via the two
    /// whitelisted services, mapped into the common snapshot shape.
    pub async fn snapshot_rosbridge(&self, target: SocketAddr) -> Result<RosSnapshot, BridgeError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire().await;
        }
        let outcome = ws::client_connect(target, &self.user_agent, self.timeout)
            .await
            .map_err(|e| BridgeError::Handshake {
                target,
                reason: e.to_string(),
            })?;
        let mut stream = outcome.stream.ok_or_else(|| BridgeError::Handshake {
            target,
            reason: outcome
                .reject_reason
                .unwrap_or_else(|| "upgrade rejected".into()),
        })?;

        let mut snapshot = RosSnapshot::new(target, Transport::Rosbridge);
        snapshot
            .limitations
            .push("node attribution unavailable over rosbridge".to_string());

        let topics = self
            .call_service(&mut stream, target, &self.topic_service, "rosint-topics")
            .await;
        let params = self
            .call_service(&mut stream, target, &self.param_service, "rosint-params")
            .await;
        stream.close().await;

        match topics {
            Ok(values) => {
                let names = string_list(&values, "topics");
                let mut state = SystemState::default();
                for name in names {
                    state.publishers.insert(name, Vec::new());
                }
                snapshot.system_state = Some(state);
            }
            Err(err) => snapshot.warnings.push(err.to_string()),
        }
        match params {
            Ok(values) => snapshot.param_names = Some(string_list(&values, "names")),
            Err(err) => snapshot.warnings.push(err.to_string()),
        }

        if snapshot.system_state.is_none() && snapshot.param_names.is_none() {
            return Err(BridgeError::SnapshotEmpty {
                target,
                reason: snapshot.warnings.join("; "),
            });
        }
        Ok(snapshot)
    }

    async fn call_service(
        &self,
        stream: &mut ws::WsStream,
        target: SocketAddr,
        service: &str,
        id: &str,
    ) -> Result<Json, BridgeError> {
        let unavailable = |reason: String| BridgeError::ServiceUnavailable {
            target,
            service: service.to_string(),
            reason,
        };
        let message = BridgeMessage {
            op: "call_service",
            id,
            service,
        };
        let text = serde_json::to_string(&message).expect("static message serializes");
        stream
            .send_text(&text)
            .await
            .map_err(|e| unavailable(e.to_string()))?;

        loop {
            let msg = match stream.next_message(self.timeout).await {
                Ok(Some(msg)) => msg,
                Ok(None) => return Err(unavailable("connection closed mid-call".into())),
                Err(WsError::Timeout) => return Err(unavailable("timed out".into())),
                Err(err) => return Err(unavailable(err.to_string())),
            };
            let WsMessage::Text(text) = msg else {
                continue;
            };
            let Ok(json) = serde_json::from_str::<Json>(&text) else {
                return Err(unavailable(format!("non-JSON frame {text:?}")));
            };
            match json.get("op").and_then(Json::as_str) {
                Some("service_response") => {
                    if json.get("id").and_then(Json::as_str) != Some(id) {
                        continue;
                    }
                    // Protocol versions before "result" was added implied
                    // success by answering at all.
                    let ok = json.get("result").and_then(Json::as_bool).unwrap_or(true);
                    let values = json.get("values").cloned().unwrap_or(Json::Null);
                    if ok {
                        return Ok(values);
                    }
                    let reason = match values {
                        Json::String(s) => s,
                        other => other.to_string(),
                    };
                    return Err(unavailable(format!("refused: {reason}")));
                }
                Some("status") => {
                    let level = json.get("level").and_then(Json::as_str).unwrap_or("");
                    if level == "error" {
                        let msg = json.get("msg").and_then(Json::as_str).unwrap_or("");
                        return Err(unavailable(format!("status error: {msg}")));
                    }
                }
                _ => {}
            }
        }
    }
}

fn string_list(values: &Json, key: &str) -> Vec<String> {
    values
        .get(key)
        .and_then(Json::as_array)
        .map(|items| {
            items
                .iter()
                .filter_map(|v| v.as_str().map(str::to_string))
                .collect()
        })
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outbound_message_shape_is_call_service_only() {
        let msg = BridgeMessage {
            op: "call_service",
            id: "rosint-topics",
            service: "/rosapi/topics",
        };
        let json = serde_json::to_value(&msg).unwrap();
        assert_eq!(json["op"], "call_service");
        assert_eq!(json["service"], "/rosapi/topics");
    }

    #[test]
    fn string_list_handles_missing_and_mixed_entries() {
        let values: Json = serde_json::json!({"topics": ["/a", 7, "/b"]});
        assert_eq!(string_list(&values, "topics"), vec!["/a", "/b"]);
        assert!(string_list(&values, "names").is_empty());
        assert!(string_list(&Json::Null, "topics").is_empty());
    }
}
