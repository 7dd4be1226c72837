//! Transport-level port probes: stage 1 and stage 2 of the funnel.
//!
//! The default backend is a full TCP connect that is closed as soon as the
//! handshake resolves. No application bytes are ever written. A raw half-open
//! backend would need elevated privileges and is deliberately out of scope;
//! verdict semantics would be identical.

use std::net::SocketAddr;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpStream;

#[derive(Debug, Error)]
pub enum ProbeError {
    /// Local resource exhaustion or misconfiguration; distinct from the
    /// target looking filtered.
    #[error("local socket error probing {target}: {source}")]
    LocalSocket {
        target: SocketAddr,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PortVerdict {
    Open,
    Closed,
    Filtered,
}

/// Evidence from one transport probe of one host:port.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub target: SocketAddr,
    pub verdict: PortVerdict,
    /// Milliseconds until the transport answered; absent on timeout.
    pub rtt_ms: Option<f64>,
    /// When the probe was initiated; rate ceilings are measured from these.
    pub observed_at: DateTime<Utc>,
}

/// Probe one port. `Open`/`Closed` reflect a positive transport answer;
/// `Filtered` means the timeout elapsed with no response.
pub async fn probe_port(target: SocketAddr, timeout: Duration) -> Result<ProbeOutcome, ProbeError> {
    let observed_at = Utc::now();
    let started = tokio::time::Instant::now();
    let attempt = tokio::time::timeout(timeout, TcpStream::connect(target)).await;
    let rtt = started.elapsed().as_secs_f64() * 1000.0;
    let outcome = |verdict, rtt_ms| ProbeOutcome {
        target,
        verdict,
        rtt_ms,
        observed_at,
    };
    match attempt {
        Ok(Ok(stream)) => {
            // Close immediately; the handshake itself was the probe.
            drop(stream);
            Ok(outcome(PortVerdict::Open, Some(rtt)))
        }
        Ok(Err(err)) => match classify_error(&err) {
            ErrorClass::Closed => Ok(outcome(PortVerdict::Closed, Some(rtt))),
            ErrorClass::Filtered => Ok(outcome(PortVerdict::Filtered, None)),
            ErrorClass::Local => Err(ProbeError::LocalSocket {
                target,
                source: err,
            }),
        },
        Err(_elapsed) => Ok(outcome(PortVerdict::Filtered, None)),
    }
}

enum ErrorClass {
    Closed,
    Filtered,
    Local,
}

fn classify_error(err: &std::io::Error) -> ErrorClass {
    use std::io::ErrorKind;
    match err.kind() {
        ErrorKind::ConnectionRefused | ErrorKind::ConnectionReset => ErrorClass::Closed,
        ErrorKind::TimedOut => ErrorClass::Filtered,
        _ => match err.raw_os_error() {
            // EHOSTUNREACH, ENETUNREACH, ETIMEDOUT, EHOSTDOWN: the network
            // said nothing definitive about the port.
            Some(113) | Some(101) | Some(110) | Some(112) => ErrorClass::Filtered,
            _ => ErrorClass::Local,
        },
    }
}
