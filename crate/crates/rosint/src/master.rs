//! Read-only ROS master client. Every call goes through a method whitelist
//! before any bytes leave the process, and parameter values are only ever
//! fetched for a fixed key whitelist.

use std::net::SocketAddr;
use std::time::Duration;

use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpStream;

use crate::http::{self, BodyLimit, HttpError};
use crate::rate::RateLimiter;
use crate::snapshot::{RosSnapshot, SystemState, Transport};
use crate::xmlrpc::{self, XmlRpcResponse, XmlRpcValue};

/// The only methods this client will put on the wire.
pub const METHOD_WHITELIST: &[&str] = &["getSystemState", "getParamNames", "getParam", "getUri"];

/// The only parameters whose values are ever requested. Both version keys
/// are probed because ROS populates both; robot_description carries the URDF.
pub const PARAM_WHITELIST: &[&str] = &["/rosdistro", "/rosversion", "/robot_description"];

pub const DEFAULT_CALLER_ID: &str = "/rosint_scanner";

const RESPONSE_CAP: usize = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum MasterError {
    /// Whitelist violation: a programming error caught before any bytes are
    /// sent.
    #[error("method {0:?} is not on the read-only whitelist")]
    ForbiddenMethod(String),
    #[error("transport error calling {target}: {reason}")]
    Transport { target: SocketAddr, reason: String },
    #[error("XML-RPC fault from {target}: code {code}, {message:?}")]
    XmlRpcFault {
        target: SocketAddr,
        code: i32,
        message: String,
    },
    #[error("malformed response from {target}: {reason}")]
    MalformedResponse { target: SocketAddr, reason: String },
    #[error("every snapshot sub-call against {target} failed: {reason}")]
    SnapshotEmpty { target: SocketAddr, reason: String },
}

#[derive(Debug, Clone)]
pub struct MasterClient {
    pub caller_id: String,
    pub user_agent: String,
    pub timeout: Duration,
    limiter: Option<RateLimiter>,
}

impl Default for MasterClient {
    fn default() -> Self {
        Self::new()
    }
}

impl MasterClient {
    pub fn new() -> Self {
        MasterClient {
            caller_id: DEFAULT_CALLER_ID.to_string(),
            user_agent: format!("rosint/{}", env!("CARGO_PKG_VERSION")),
            timeout: Duration::from_secs(5),
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

    /// One whitelisted XML-RPC call over a fresh connection. Returns the full
    /// `[status_code, status_message, payload]` triple after validating the
    /// ROS response convention.
    pub async fn call(
        &self,
        target: SocketAddr,
        method: &str,
        args: Vec<XmlRpcValue>,
    ) -> Result<XmlRpcValue, MasterError> {
        if !METHOD_WHITELIST.contains(&method) {
            return Err(MasterError::ForbiddenMethod(method.to_string()));
        }
        let document = xmlrpc::serialize_call(method, &args);
        if let Some(limiter) = &self.limiter {
            limiter.acquire().await;
        }
        let response_doc = tokio::time::timeout(self.timeout, self.post(target, &document))
            .await
            .map_err(|_| MasterError::Transport {
                target,
                reason: "timed out".into(),
            })??;
        let value = match xmlrpc::parse_response(&response_doc) {
            Ok(XmlRpcResponse::Success(value)) => value,
            Ok(XmlRpcResponse::Fault { code, message }) => {
                return Err(MasterError::XmlRpcFault {
                    target,
                    code,
                    message,
                })
            }
            Err(err) => {
                return Err(MasterError::MalformedResponse {
                    target,
                    reason: err.to_string(),
                })
            }
        };
        let triple = value
            .as_array()
            .filter(|items| items.len() == 3)
            .ok_or_else(|| MasterError::MalformedResponse {
                target,
                reason: "response payload is not a [code, message, value] triple".into(),
            })?;
        let code = triple[0]
            .as_i32()
            .ok_or_else(|| MasterError::MalformedResponse {
                target,
                reason: "status code is not an integer".into(),
            })?;
        if code != 1 {
            let message = triple[1].as_str().unwrap_or("").to_string();
            return Err(MasterError::XmlRpcFault {
                target,
                code,
                message,
            });
        }
        Ok(value)
    }

    async fn post(&self, target: SocketAddr, document: &str) -> Result<String, MasterError> {
        let transport = |reason: String| MasterError::Transport { target, reason };
        let mut stream = TcpStream::connect(target)
            .await
            .map_err(|e| transport(e.to_string()))?;
        let request = format!(
            "POST / HTTP/1.1\r\nHost: {target}\r\nUser-Agent: {user_agent}\r\n\
             Content-Type: text/xml\r\nContent-Length: {len}\r\nConnection: close\r\n\r\n",
            user_agent = self.user_agent,
            len = document.len(),
        );
        stream
            .write_all(request.as_bytes())
            .await
            .map_err(|e| transport(e.to_string()))?;
        stream
            .write_all(document.as_bytes())
            .await
            .map_err(|e| transport(e.to_string()))?;
        let response = http::read_response(&mut stream, BodyLimit::Exact(RESPONSE_CAP))
            .await
            .map_err(|err| match err {
                HttpError::Io(e) => transport(e.to_string()),
                other => MasterError::MalformedResponse {
                    target,
                    reason: other.to_string(),
                },
            })?;
        if response.status != 200 {
            return Err(MasterError::MalformedResponse {
                target,
                reason: format!("HTTP status {} to an XML-RPC POST", response.status),
            });
        }
        String::from_utf8(response.body).map_err(|_| MasterError::MalformedResponse {
            target,
            reason: "response body is not UTF-8".into(),
        })
    }

    fn payload(triple: XmlRpcValue) -> XmlRpcValue {
        match triple {
            XmlRpcValue::Array(mut items) => items.remove(2),
            _ => unreachable!("call() validated the triple shape"),
        }
    }

    pub async fn get_system_state(
        &self,
        target: SocketAddr,
    ) -> Result<(SystemState, Vec<String>), MasterError> {
        let triple = self
            .call(
                target,
                "getSystemState",
                vec![XmlRpcValue::string(&self.caller_id)],
            )
            .await?;
        decode_system_state(target, &Self::payload(triple))
    }

    pub async fn get_param_names(&self, target: SocketAddr) -> Result<Vec<String>, MasterError> {
        let triple = self
            .call(
                target,
                "getParamNames",
                vec![XmlRpcValue::string(&self.caller_id)],
            )
            .await?;
        let payload = Self::payload(triple);
        let items = payload
            .as_array()
            .ok_or_else(|| MasterError::MalformedResponse {
                target,
                reason: "getParamNames payload is not an array".into(),
            })?;
        Ok(items
            .iter()
            .filter_map(|v| v.as_str().map(str::to_string))
            .collect())
    }

    pub async fn get_param(
        &self,
        target: SocketAddr,
        key: &str,
    ) -> Result<XmlRpcValue, MasterError> {
        let triple = self
            .call(
                target,
                "getParam",
                vec![
                    XmlRpcValue::string(&self.caller_id),
                    XmlRpcValue::string(key),
                ],
            )
            .await?;
        Ok(Self::payload(triple))
    }

    pub async fn get_uri(&self, target: SocketAddr) -> Result<String, MasterError> {
        let triple = self
            .call(target, "getUri", vec![XmlRpcValue::string(&self.caller_id)])
            .await?;
        Ok(Self::payload(triple).as_str().unwrap_or_default().to_string())
    }

    /// Stage 4 for the master transport: system state, parameter names, then
    /// values for whitelisted parameters that actually exist. Partial
    /// failures degrade to warnings; only total failure is an error.
    pub async fn snapshot_host(&self, target: SocketAddr) -> Result<RosSnapshot, MasterError> {
        let mut snapshot = RosSnapshot::new(target, Transport::XmlRpcMaster);

        match self.get_system_state(target).await {
            Ok((state, warnings)) => {
                snapshot.system_state = Some(state);
                snapshot.warnings.extend(warnings);
            }
            Err(err) => snapshot.warnings.push(format!("getSystemState failed: {err}")),
        }

        match self.get_param_names(target).await {
            Ok(names) => snapshot.param_names = Some(names),
            Err(err) => snapshot.warnings.push(format!("getParamNames failed: {err}")),
        }

        if snapshot.system_state.is_none() && snapshot.param_names.is_none() {
            return Err(MasterError::SnapshotEmpty {
                target,
                reason: snapshot.warnings.join("; "),
            });
        }

        // Fetch values only for whitelisted keys the instance actually
        // advertises; without a name list no value is fetched at all.
        if let Some(names) = &snapshot.param_names {
            for key in PARAM_WHITELIST {
                if !names.iter().any(|n| n == key) {
                    continue;
                }
                match self.get_param(target, key).await {
                    Ok(value) => {
                        snapshot.raw_params_fetched.insert(key.to_string(), value);
                    }
                    Err(err) => snapshot
                        .warnings
                        .push(format!("getParam {key} failed: {err}")),
                }
            }
        }

        if let Some(value) = snapshot.raw_params_fetched.get("/rosversion") {
            snapshot.ros_comm_version = value.as_str().map(str::to_string);
        }
        if let Some(value) = snapshot.raw_params_fetched.get("/rosdistro") {
            snapshot.distro_hint = value.as_str().map(|s| s.trim().to_string());
        }
        if let Some(value) = snapshot.raw_params_fetched.get("/robot_description") {
            snapshot.urdf_xml = value.as_str().map(str::to_string);
        }

        Ok(snapshot)
    }
}

fn decode_system_state(
    target: SocketAddr,
    payload: &XmlRpcValue,
) -> Result<(SystemState, Vec<String>), MasterError> {
    let lists = payload
        .as_array()
        .filter(|items| items.len() == 3)
        .ok_or_else(|| MasterError::MalformedResponse {
            target,
            reason: "system state payload is not a 3-list".into(),
        })?;
    let mut state = SystemState::default();
    let mut warnings = Vec::new();
    for (idx, bucket) in [&mut state.publishers, &mut state.subscribers, &mut state.services]
        .into_iter()
        .enumerate()
    {
        let entries = lists[idx]
            .as_array()
            .ok_or_else(|| MasterError::MalformedResponse {
                target,
                reason: format!("system state section {idx} is not an array"),
            })?;
        for entry in entries {
            let pair = entry
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| MasterError::MalformedResponse {
                    target,
                    reason: "system state entry is not a [name, nodes] pair".into(),
                })?;
            let name = pair[0]
                .as_str()
                .ok_or_else(|| MasterError::MalformedResponse {
                    target,
                    reason: "system state name is not a string".into(),
                })?
                .to_string();
            if name.is_empty() || !name.starts_with('/') {
                warnings.push(format!("suspicious ROS name {name:?} (kept)"));
            }
            let nodes = pair[1]
                .as_array()
                .map(|nodes| {
                    nodes
                        .iter()
                        .filter_map(|n| n.as_str().map(str::to_string))
                        .collect()
                })
                .unwrap_or_default();
            bucket.insert(name, nodes);
        }
    }
    Ok((state, warnings))
}
