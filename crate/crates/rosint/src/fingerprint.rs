//! Stage 3: fingerprint the service behind an open port with a single
//! `HTTP GET /`.
//!
//! An XML-RPC server (the ROS master included) rejects plain GETs with a
//! characteristic error status. Exactly which status and trimmings vary by
//! server stack, so the matcher is data-driven and can be tightened per
//! deployment.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpStream;

use crate::http::{self, BodyLimit, HttpError, HttpResponse};
use crate::recfile;

pub const BODY_PREFIX_LIMIT: usize = 1024;

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("timed out fingerprinting {0}")]
    Timeout(SocketAddr),
    #[error("malformed HTTP from {target}: {reason}")]
    MalformedHttp { target: SocketAddr, reason: String },
    #[error("transport error fingerprinting {target}: {source}")]
    Transport {
        target: SocketAddr,
        source: std::io::Error,
    },
}

/// What one `GET /` told us about a host:port.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpFingerprint {
    pub status_code: u16,
    /// Retained header subset: Server and Content-Type.
    pub headers: BTreeMap<String, String>,
    /// Lossy text of the first kilobyte of the body.
    pub body_prefix: String,
    pub looks_like_xmlrpc: bool,
    pub looks_like_websocket: bool,
}

impl HttpFingerprint {
    pub fn from_response(response: &HttpResponse, matcher: &XmlRpcMatcher) -> Self {
        let mut headers = BTreeMap::new();
        for name in ["Server", "Content-Type"] {
            if let Some(value) = response.header(name) {
                headers.insert(name.to_string(), value.to_string());
            }
        }
        let body_prefix = String::from_utf8_lossy(
            &response.body[..response.body.len().min(BODY_PREFIX_LIMIT)],
        )
        .into_owned();
        let looks_like_xmlrpc = matcher.matches(
            response.status,
            response.header("Content-Type"),
            response.header("Server"),
            &body_prefix,
        );
        HttpFingerprint {
            status_code: response.status,
            headers,
            body_prefix,
            looks_like_xmlrpc,
            looks_like_websocket: false,
        }
    }
}

/// Rules deciding whether a GET response came from an XML-RPC endpoint:
/// the status must be one of `status_codes` AND at least one of the marker
/// lists must hit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XmlRpcMatcher {
    pub status_codes: Vec<u16>,
    pub body_markers: Vec<String>,
    pub content_type_markers: Vec<String>,
    pub server_tokens: Vec<String>,
}

impl Default for XmlRpcMatcher {
    fn default() -> Self {
        XmlRpcMatcher {
            status_codes: vec![400, 405, 501],
            body_markers: vec!["<?xml".into()],
            content_type_markers: vec!["text/xml".into()],
            // BaseHTTP covers the Python stdlib server the stock ROS master
            // runs on.
            server_tokens: vec!["basehttp".into(), "xmlrpc".into()],
        }
    }
}

impl XmlRpcMatcher {
    pub fn matches(
        &self,
        status: u16,
        content_type: Option<&str>,
        server: Option<&str>,
        body_prefix: &str,
    ) -> bool {
        if !self.status_codes.contains(&status) {
            return false;
        }
        let body = body_prefix.to_ascii_lowercase();
        if self.body_markers.iter().any(|m| body.contains(&m.to_ascii_lowercase())) {
            return true;
        }
        if let Some(ct) = content_type {
            let ct = ct.to_ascii_lowercase();
            if self
                .content_type_markers
                .iter()
                .any(|m| ct.contains(&m.to_ascii_lowercase()))
            {
                return true;
            }
        }
        if let Some(server) = server {
            let server = server.to_ascii_lowercase();
            if self
                .server_tokens
                .iter()
                .any(|t| server.contains(&t.to_ascii_lowercase()))
            {
                return true;
            }
        }
        false
    }

    /// Load matcher rules from a record file. Record kinds: `xmlrpc-status`
    /// (field `code`), `xmlrpc-body`, `xmlrpc-content-type`, `xmlrpc-server`
    /// (field `marker`). The file replaces the defaults wholesale.
    pub fn from_rules_file(path: &Path) -> Result<Self, recfile::RecError> {
        let records = recfile::parse_file(path)?;
        let mut matcher = XmlRpcMatcher {
            status_codes: Vec::new(),
            body_markers: Vec::new(),
            content_type_markers: Vec::new(),
            server_tokens: Vec::new(),
        };
        for record in &records {
            match record.kind.as_str() {
                "xmlrpc-status" => {
                    let code = record.require("code")?;
                    matcher.status_codes.push(code.parse().map_err(|_| {
                        recfile::RecError::BadValue {
                            line_no: record.line_no,
                            key: "code".into(),
                            reason: format!("{code:?} is not a status code"),
                        }
                    })?);
                }
                "xmlrpc-body" => matcher.body_markers.push(record.require("marker")?.to_string()),
                "xmlrpc-content-type" => matcher
                    .content_type_markers
                    .push(record.require("marker")?.to_string()),
                "xmlrpc-server" => matcher
                    .server_tokens
                    .push(record.require("marker")?.to_string()),
                other => {
                    return Err(recfile::RecError::UnknownKind {
                        line_no: record.line_no,
                        kind: other.to_string(),
                    })
                }
            }
        }
        Ok(matcher)
    }
}

pub fn get_request_bytes(host_header: &str, user_agent: &str) -> Vec<u8> {
    format!(
        "GET / HTTP/1.1\r\nHost: {host_header}\r\nUser-Agent: {user_agent}\r\nAccept: */*\r\nConnection: close\r\n\r\n"
    )
    .into_bytes()
}

/// Send exactly one `GET /` and fingerprint the answer. The connection is
/// closed afterward regardless of outcome.
pub async fn http_fingerprint(
    target: SocketAddr,
    timeout: Duration,
    user_agent: &str,
    matcher: &XmlRpcMatcher,
) -> Result<HttpFingerprint, FingerprintError> {
    let work = async {
        let mut stream = TcpStream::connect(target)
            .await
            .map_err(|source| FingerprintError::Transport { target, source })?;
        stream
            .write_all(&get_request_bytes(&target.to_string(), user_agent))
            .await
            .map_err(|source| FingerprintError::Transport { target, source })?;
        let response = http::read_response(&mut stream, BodyLimit::Prefix(BODY_PREFIX_LIMIT))
            .await
            .map_err(|err| match err {
                HttpError::Io(source) => FingerprintError::Transport { target, source },
                other => FingerprintError::MalformedHttp {
                    target,
                    reason: other.to_string(),
                },
            })?;
        Ok(HttpFingerprint::from_response(&response, matcher))
    };
    tokio::time::timeout(timeout, work)
        .await
        .map_err(|_| FingerprintError::Timeout(target))?
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xml_fault_body_with_501_matches() {
        let m = XmlRpcMatcher::default();
        assert!(m.matches(501, None, None, "<?xml version='1.0'?><methodResponse>"));
    }

    #[test]
    fn html_200_does_not_match() {
        let m = XmlRpcMatcher::default();
        assert!(!m.matches(200, Some("text/html"), Some("nginx"), "<html><body>hi</body></html>"));
    }

    #[test]
    fn stock_master_shape_matches_via_server_token() {
        // Python's stdlib HTTP server answers GET with a 501 HTML error page;
        // the Server header is what gives it away.
        let m = XmlRpcMatcher::default();
        assert!(m.matches(
            501,
            Some("text/html;charset=utf-8"),
            Some("BaseHTTP/0.6 Python/2.7.12"),
            "<html><head><title>Error response</title></head></html>",
        ));
    }

    #[test]
    fn status_gate_applies_before_markers() {
        let m = XmlRpcMatcher::default();
        assert!(!m.matches(404, Some("text/xml"), None, "<?xml"));
        assert!(m.matches(405, Some("text/xml"), None, ""));
        assert!(m.matches(400, None, None, "<?xml version='1.0'?>"));
    }

    #[test]
    fn matcher_rules_file_replaces_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matcher.rules");
        std::fs::write(
            &path,
            "# tightened matcher\nxmlrpc-status code=501\nxmlrpc-body marker=\"<?xml\"\n",
        )
        .unwrap();
        let m = XmlRpcMatcher::from_rules_file(&path).unwrap();
        assert_eq!(m.status_codes, vec![501]);
        assert!(m.matches(501, None, None, "<?xml"));
        assert!(!m.matches(405, Some("text/xml"), None, ""));
    }
}
