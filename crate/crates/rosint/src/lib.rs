//! Passive reconnaissance toolkit for ROS masters and Rosbridge servers.
//!
//! `rosint` discovers, fingerprints, classifies, and tracks publicly reachable
//! ROS deployments while staying strictly read-only on the wire. A scan walks
//! a pseudorandom permutation of the target address space and runs a staged
//! funnel per host, so that application-level traffic only ever reaches hosts
//! that already look like ROS:
//!
//! 1. transport probe on the ROS master port (or the Rosbridge port),
//! 2. probe on a normally-closed control port to weed out hosts that answer
//!    on every port to deter scanning,
//! 3. a single `HTTP GET /` (or WebSocket upgrade) to fingerprint the service,
//! 4. a minimal set of passive ROS calls (`getSystemState`, `getParamNames`,
//!    and `getParam` for a small whitelist) to capture a [`RosSnapshot`].
//!
//! Snapshots then feed a rule-driven classifier (sensors, actuators,
//! simulators, robot types, libraries), a scan-to-scan identity resolver, and
//! summary/diff reports. Everything is testable offline against the built-in
//! [`mock`] fleet: fixture-driven fake masters, Rosbridge servers, tarpits,
//! plain HTTP servers, and a logging honeypot.
//!
//! The `examples/` directory has one runnable example per capability; start
//! with `scan_mock_fleet`. The `rosint` binary wraps the same library surface
//! in `scan` / `audit` / `classify` / `report` / `diff` / `mock` subcommands.
//!
//! ```no_run
//! use rosint::engine::{PipelineConfig, ProbeEngine};
//! use rosint::plan::{build_plan, TargetSpec};
//!
//! # async fn demo() -> Result<(), Box<dyn std::error::Error>> {
//! let spec = TargetSpec::parse(&["192.168.7.0/24"], &[], 11311)?;
//! let plan = build_plan(&spec, 42)?;
//! let engine = ProbeEngine::new(PipelineConfig::default())?;
//! let mut stream = engine.run(plan);
//! while let Some(report) = stream.next().await {
//!     println!("{} reached stage {}", report.target, report.stage_reached);
//! }
//! # Ok(())
//! # }
//! ```

pub mod classify;
pub mod cli;
pub mod engine;
pub mod fingerprint;
pub mod http;
pub mod identity;
pub mod master;
pub mod mock;
pub mod plan;
pub mod probe;
pub mod rate;
pub mod recfile;
pub mod report;
pub mod rosbridge;
pub mod snapshot;
pub mod store;
pub mod ws;
pub mod xmlrpc;

pub use classify::{categorize, map_distro, match_rules, FeatureHit, HostCategory, Rulebook};
pub use engine::{PipelineConfig, ProbeEngine, ScanMode};
pub use plan::{build_plan, AddressPlan, TargetSpec};
pub use snapshot::{RosSnapshot, SystemState, Transport};
pub use store::{HostReport, ScanRecord};
