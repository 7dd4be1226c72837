//! The four-stage probe funnel. Each stage runs on strictly fewer hosts than
//! the one before it, every host that enters stage 1 yields exactly one
//! report, and everything that touches the wire takes a token from one
//! global rate limiter first.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;
use tokio::sync::{mpsc, Semaphore};
use tokio::task::JoinSet;

use crate::classify::{categorize, match_rules, Rulebook};
use crate::fingerprint::{self, FingerprintError, XmlRpcMatcher};
use crate::master::MasterClient;
use crate::plan::AddressPlan;
use crate::probe::{self, PortVerdict, ProbeOutcome};
use crate::rate::{ProbeLog, RateLimiter};
use crate::rosbridge::BridgeClient;
use crate::store::{HostReport, StageOutcomes};

pub const DEFAULT_MASTER_PORT: u16 = 11311;
pub const DEFAULT_CONTROL_PORT: u16 = 58243;
pub const DEFAULT_ROSBRIDGE_PORT: u16 = 9090;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("control port {0} must differ from the probed service port")]
    ControlPortCollision(u16),
    #[error("rate limit must be positive")]
    ZeroRate,
    #[error("max_in_flight must be positive")]
    ZeroInFlight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    Master,
    Rosbridge,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: ScanMode,
    pub master_port: u16,
    pub control_port: u16,
    pub rosbridge_port: u16,
    /// Stage 1–2 transport probe timeout.
    pub connect_timeout: Duration,
    /// Stage 3 fingerprint timeout.
    pub http_timeout: Duration,
    /// Per-request timeout inside stage 4.
    pub interrogate_timeout: Duration,
    pub max_in_flight: usize,
    /// Global probes-per-second ceiling.
    pub rate_limit: u32,
    pub caller_id: String,
    pub user_agent: String,
    pub matcher: XmlRpcMatcher,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: ScanMode::Master,
            master_port: DEFAULT_MASTER_PORT,
            control_port: DEFAULT_CONTROL_PORT,
            rosbridge_port: DEFAULT_ROSBRIDGE_PORT,
            connect_timeout: Duration::from_millis(1500),
            http_timeout: Duration::from_millis(3000),
            interrogate_timeout: Duration::from_millis(5000),
            max_in_flight: 64,
            rate_limit: 128,
            caller_id: crate::master::DEFAULT_CALLER_ID.to_string(),
            user_agent: format!("rosint/{}", env!("CARGO_PKG_VERSION")),
            matcher: XmlRpcMatcher::default(),
        }
    }
}

impl PipelineConfig {
    pub fn target_port(&self) -> u16 {
        match self.mode {
            ScanMode::Master => self.master_port,
            ScanMode::Rosbridge => self.rosbridge_port,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.control_port == self.target_port() {
            return Err(EngineError::ControlPortCollision(self.control_port));
        }
        if self.rate_limit == 0 {
            return Err(EngineError::ZeroRate);
        }
        if self.max_in_flight == 0 {
            return Err(EngineError::ZeroInFlight);
        }
        Ok(())
    }
}

pub struct ProbeEngine {
    config: PipelineConfig,
    limiter: RateLimiter,
    rulebook: Arc<Rulebook>,
    master: MasterClient,
    bridge: BridgeClient,
}

impl ProbeEngine {
    pub fn new(config: PipelineConfig) -> Result<Self, EngineError> {
        Self::build(config, None)
    }

    /// Same as [`ProbeEngine::new`] but records the timestamp of every probe
    /// token grant for rate-ceiling measurements.
    pub fn with_probe_log(config: PipelineConfig) -> Result<(Self, ProbeLog), EngineError> {
        let log = ProbeLog::new();
        Ok((Self::build(config, Some(log.clone()))?, log))
    }

    fn build(config: PipelineConfig, log: Option<ProbeLog>) -> Result<Self, EngineError> {
        config.validate()?;
        let limiter = match log {
            Some(log) => RateLimiter::with_log(config.rate_limit, log),
            None => RateLimiter::new(config.rate_limit),
        };
        let mut master = MasterClient::new()
            .with_timeout(config.interrogate_timeout)
            .with_user_agent(config.user_agent.clone())
            .with_limiter(limiter.clone());
        master.caller_id = config.caller_id.clone();
        let bridge = BridgeClient::new()
            .with_timeout(config.interrogate_timeout)
            .with_user_agent(config.user_agent.clone())
            .with_limiter(limiter.clone());
        Ok(ProbeEngine {
            config,
            limiter,
            rulebook: Arc::new(Rulebook::shipped()),
            master,
            bridge,
        })
    }

    /// Classify stage-4 snapshots with this rulebook instead of the shipped
    /// default.
    pub fn with_rulebook(mut self, rulebook: Rulebook) -> Self {
        self.rulebook = Arc::new(rulebook);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Drive the funnel over every address the plan emits. Reports stream
    /// out in completion order; their count equals the number of planned
    /// addresses.
    pub fn run(self, plan: AddressPlan) -> ScanStream {
        self.run_inner(plan, true)
    }

    /// Stages 1–3 only: exposure checking without interrogation.
    pub fn run_survey(self, plan: AddressPlan) -> ScanStream {
        self.run_inner(plan, false)
    }

    fn run_inner(self, mut plan: AddressPlan, interrogate: bool) -> ScanStream {
        let (tx, rx) = mpsc::channel(64);
        let engine = Arc::new(self);
        let driver = tokio::spawn(async move {
            let semaphore = Arc::new(Semaphore::new(engine.config.max_in_flight));
            let mut tasks = JoinSet::new();
            while let Some(addr) = plan.next_address() {
                let permit = semaphore
                    .clone()
                    .acquire_owned()
                    .await
                    .expect("semaphore never closed");
                let engine = engine.clone();
                let tx = tx.clone();
                tasks.spawn(async move {
                    let report = engine.scan_host(addr, interrogate).await;
                    let _ = tx.send(report).await;
                    drop(permit);
                });
                while tasks.try_join_next().is_some() {}
            }
            while tasks.join_next().await.is_some() {}
        });
        ScanStream { rx, _driver: driver }
    }

    /// One probe token per transport attempt; one retry when the first
    /// attempt looked filtered.
    async fn probe_with_retry(&self, target: SocketAddr) -> Result<ProbeOutcome, probe::ProbeError> {
        self.limiter.acquire().await;
        let first = probe::probe_port(target, self.config.connect_timeout).await?;
        if first.verdict != PortVerdict::Filtered {
            return Ok(first);
        }
        self.limiter.acquire().await;
        probe::probe_port(target, self.config.connect_timeout).await
    }

    /// Run one host through the funnel. Stages execute strictly in order and
    /// each stage runs only if the previous one passed.
    pub async fn scan_host(&self, addr: Ipv4Addr, interrogate: bool) -> HostReport {
        let target = SocketAddr::new(IpAddr::V4(addr), self.config.target_port());
        let mut report = HostReport {
            target,
            stage_reached: 1,
            outcomes: StageOutcomes::default(),
            snapshot: None,
            hits: Vec::new(),
            category: None,
            warnings: Vec::new(),
        };

        // Stage 1: is the service port open at all?
        match self.probe_with_retry(target).await {
            Ok(outcome) => {
                let open = outcome.verdict == PortVerdict::Open;
                report.outcomes.port_probe = Some(outcome);
                if !open {
                    return report;
                }
            }
            Err(err) => {
                report.warnings.push(err.to_string());
                return report;
            }
        }

        // Stage 2: hosts that also answer on a normally-closed control port
        // answer on anything; drop them.
        report.stage_reached = 2;
        let control = SocketAddr::new(IpAddr::V4(addr), self.config.control_port);
        match self.probe_with_retry(control).await {
            Ok(outcome) => {
                let open = outcome.verdict == PortVerdict::Open;
                report.outcomes.control_probe = Some(outcome);
                if open {
                    report
                        .warnings
                        .push("control port open: host answers on any port".to_string());
                    return report;
                }
            }
            Err(err) => {
                // A local socket error says nothing about the host; keep it.
                report.warnings.push(err.to_string());
            }
        }

        // Stage 3: one application-layer request to fingerprint the service.
        report.stage_reached = 3;
        let fingerprint_ok = match self.config.mode {
            ScanMode::Master => {
                let mut attempt = self.fingerprint_once(target).await;
                if matches!(attempt, Err(FingerprintError::Timeout(_))) {
                    attempt = self.fingerprint_once(target).await;
                }
                match attempt {
                    Ok(fp) => {
                        let ok = fp.looks_like_xmlrpc;
                        report.outcomes.http = Some(fp);
                        ok
                    }
                    Err(err) => {
                        report.warnings.push(err.to_string());
                        false
                    }
                }
            }
            ScanMode::Rosbridge => {
                // The bridge client takes its own probe token.
                let detection = self.bridge.detect_websocket(target).await;
                let ok = detection.websocket;
                if let Some(reason) = detection.reason {
                    report.warnings.push(format!("websocket detect: {reason}"));
                }
                report.outcomes.http = Some(detection.fingerprint);
                ok
            }
        };
        if !fingerprint_ok || !interrogate {
            return report;
        }

        // Stage 4: the passive interrogation itself.
        let snapshot = match self.config.mode {
            ScanMode::Master => self
                .master
                .snapshot_host(target)
                .await
                .map_err(|e| e.to_string()),
            ScanMode::Rosbridge => self
                .bridge
                .snapshot_rosbridge(target)
                .await
                .map_err(|e| e.to_string()),
        };
        match snapshot {
            Ok(snapshot) => {
                report.stage_reached = 4;
                report.hits = match_rules(&snapshot, &self.rulebook);
                report.category = Some(categorize(&snapshot, &report.hits));
                report.snapshot = Some(snapshot);
            }
            Err(reason) => {
                report.warnings.push(format!("interrogation failed: {reason}"));
            }
        }
        report
    }

    async fn fingerprint_once(
        &self,
        target: SocketAddr,
    ) -> Result<fingerprint::HttpFingerprint, FingerprintError> {
        self.limiter.acquire().await;
        fingerprint::http_fingerprint(
            target,
            self.config.http_timeout,
            &self.config.user_agent,
            &self.config.matcher,
        )
        .await
    }
}

/// Stream of host reports from a running scan.
pub struct ScanStream {
    rx: mpsc::Receiver<HostReport>,
    _driver: tokio::task::JoinHandle<()>,
}

impl ScanStream {
    pub async fn next(&mut self) -> Option<HostReport> {
        self.rx.recv().await
    }

    pub async fn collect(mut self) -> Vec<HostReport> {
        let mut reports = Vec::new();
        while let Some(report) = self.next().await {
            reports.push(report);
        }
        reports
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_catches_collisions_and_zeroes() {
        let mut config = PipelineConfig {
            control_port: DEFAULT_MASTER_PORT,
            ..PipelineConfig::default()
        };
        assert!(matches!(
            config.validate(),
            Err(EngineError::ControlPortCollision(_))
        ));
        config.control_port = DEFAULT_CONTROL_PORT;
        config.rate_limit = 0;
        assert!(matches!(config.validate(), Err(EngineError::ZeroRate)));
        config.rate_limit = 10;
        config.max_in_flight = 0;
        assert!(matches!(config.validate(), Err(EngineError::ZeroInFlight)));
    }

    #[test]
    fn rosbridge_mode_probes_port_9090_by_default() {
        let config = PipelineConfig {
            mode: ScanMode::Rosbridge,
            ..PipelineConfig::default()
        };
        assert_eq!(config.target_port(), 9090);
        assert_eq!(PipelineConfig::default().target_port(), 11311);
    }
}
