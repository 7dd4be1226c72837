//! Operator surface: `scan`, `audit`, `classify`, `report`, `diff`, `mock`.
//!
//! Safe by default: loopback and RFC1918 targets scan without ceremony;
//! anything public requires the explicit authorization flag, a blocklist
//! path, and a notice URL that gets embedded in the HTTP User-Agent so scan
//! targets can identify and contact the operator.

use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::classify::{categorize, match_rules, Rulebook};
use crate::engine::{PipelineConfig, ProbeEngine, ScanMode};
use crate::fingerprint::XmlRpcMatcher;
use crate::identity::{match_hosts, persistence_report, DEFAULT_SIMILARITY_THRESHOLD};
use crate::mock;
use crate::plan::{build_plan, load_cidr_file, TargetSpec};
use crate::report::{diff, render_diff, render_summary, summarize};
use crate::store::{config_fingerprint, load_scan, ScanWriter};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_EXPOSED: i32 = 3;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

type CliResult = Result<i32, CliError>;

#[derive(Parser)]
#[command(
    name = "rosint",
    version,
    about = "Passive reconnaissance toolkit for ROS masters and Rosbridge servers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the staged scan pipeline over a target list.
    Scan(ScanArgs),
    /// Probe an address or CIDR for exposed ROS ports (stages 1-3 only).
    Audit(AuditArgs),
    /// Reclassify a stored scan record with a rulebook, without rescanning.
    Classify(ClassifyArgs),
    /// Render the summary tables for a stored scan record.
    Report(ReportArgs),
    /// Match hosts across two scan records and report the differences.
    Diff(DiffArgs),
    /// Serve a mock fleet described by a fixture spec file.
    Mock(MockArgs),
}

#[derive(Args, Debug, Default)]
struct ScanArgs {
    /// Target list file: one CIDR per line, # comments.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Blocklist file (one CIDR per line); exclusion always wins.
    #[arg(long)]
    blocklist: Option<PathBuf>,
    /// master (XML-RPC, port 11311) or rosbridge (WebSocket, port 9090).
    #[arg(long)]
    mode: Option<String>,
    /// Probes per second across all hosts and stages.
    #[arg(long)]
    rate: Option<u32>,
    /// Permutation seed; same seed and targets give the same order.
    #[arg(long)]
    seed: Option<u64>,
    /// Output record file (JSON lines).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Classifier rulebook file; defaults to the built-in rulebook.
    #[arg(long)]
    rulebook: Option<PathBuf>,
    /// Base per-stage timeout in milliseconds.
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Concurrent hosts in flight.
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long)]
    master_port: Option<u16>,
    #[arg(long)]
    control_port: Option<u16>,
    #[arg(long)]
    rosbridge_port: Option<u16>,
    /// Required for any target outside loopback/RFC1918 space.
    #[arg(long)]
    i_have_authorization: bool,
    /// Public URL describing the scan; embedded in the User-Agent.
    #[arg(long)]
    notice_url: Option<String>,
    /// XML-RPC matcher rules file (overrides the built-in matcher).
    #[arg(long)]
    matcher_rules: Option<PathBuf>,
    /// Config file (key=value lines); explicit flags win over it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    /// Address or CIDR to check, e.g. 192.168.1.10 or 192.168.1.0/24.
    target: String,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    rate: Option<u32>,
    /// Required for any target outside loopback/RFC1918 space.
    #[arg(long)]
    i_have_authorization: bool,
    #[arg(long)]
    notice_url: Option<String>,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    /// Scan record file produced by `rosint scan`.
    record: PathBuf,
    #[arg(long)]
    rulebook: Option<PathBuf>,
    /// Write the reclassified record here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit machine-readable JSON instead of tables.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    record: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct DiffArgs {
    record_a: PathBuf,
    record_b: PathBuf,
    /// Topic-similarity threshold for equal-IP matching.
    #[arg(long, default_value_t = DEFAULT_SIMILARITY_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct MockArgs {
    /// Fixture spec file (see the fleet spec format in the README).
    #[arg(long)]
    spec: PathBuf,
    /// Allow fixtures to bind non-loopback addresses. Never exposes a fake
    /// robot by accident.
    #[arg(long)]
    allow_nonloopback: bool,
    /// Exit after this many seconds instead of waiting for Ctrl-C.
    #[arg(long)]
    duration_secs: Option<u64>,
}

/// Entry point for the `rosint` binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = err.print();
            return code;
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(err) => {
            eprintln!("error: cannot start runtime: {err}");
            return EXIT_RUNTIME;
        }
    };
    let result = runtime.block_on(async {
        match cli.command {
            Command::Scan(args) => cmd_scan(args).await,
            Command::Audit(args) => cmd_audit(args).await,
            Command::Classify(args) => cmd_classify(args),
            Command::Report(args) => cmd_report(args),
            Command::Diff(args) => cmd_diff(args),
            Command::Mock(args) => cmd_mock(args).await,
        }
    });
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

// --- scan -----------------------------------------------------------------

/// Everything `scan` needs, after merging config file and flags (flags win).
#[derive(Debug)]
struct ScanSettings {
    targets: PathBuf,
    blocklist: Option<PathBuf>,
    mode: ScanMode,
    rate: u32,
    seed: u64,
    out: PathBuf,
    rulebook: Option<PathBuf>,
    timeout_ms: u64,
    max_in_flight: usize,
    master_port: u16,
    control_port: u16,
    rosbridge_port: u16,
    authorized: bool,
    notice_url: Option<String>,
    matcher_rules: Option<PathBuf>,
}

fn parse_mode(raw: &str) -> Result<ScanMode, CliError> {
    match raw {
        "master" => Ok(ScanMode::Master),
        "rosbridge" => Ok(ScanMode::Rosbridge),
        other => Err(CliError::usage(format!(
            "mode must be 'master' or 'rosbridge', not {other:?}"
        ))),
    }
}

fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!(
                "{} line {}: expected key=value",
                path.display(),
                idx + 1
            ))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn resolve_scan_settings(args: &ScanArgs) -> Result<ScanSettings, CliError> {
    let mut settings = ScanSettings {
        targets: PathBuf::new(),
        blocklist: None,
        mode: ScanMode::Master,
        rate: 128,
        seed: rand::random(),
        out: PathBuf::new(),
        rulebook: None,
        timeout_ms: 1500,
        max_in_flight: 64,
        master_port: 11311,
        control_port: 58243,
        rosbridge_port: 9090,
        authorized: args.i_have_authorization,
        notice_url: None,
        matcher_rules: None,
    };

    if let Some(config_path) = &args.config {
        for (key, value) in read_config_file(config_path)? {
            let bad = |what: &str| CliError::usage(format!("config {key}={value}: bad {what}"));
            match key.as_str() {
                "targets" => settings.targets = PathBuf::from(&value),
                "blocklist" => settings.blocklist = Some(PathBuf::from(&value)),
                "mode" => settings.mode = parse_mode(&value)?,
                "rate" => settings.rate = value.parse().map_err(|_| bad("number"))?,
                "seed" => settings.seed = value.parse().map_err(|_| bad("number"))?,
                "out" => settings.out = PathBuf::from(&value),
                "rulebook" => settings.rulebook = Some(PathBuf::from(&value)),
                "timeout_ms" => settings.timeout_ms = value.parse().map_err(|_| bad("number"))?,
                "max_in_flight" => {
                    settings.max_in_flight = value.parse().map_err(|_| bad("number"))?
                }
                "master_port" => settings.master_port = value.parse().map_err(|_| bad("port"))?,
                "control_port" => settings.control_port = value.parse().map_err(|_| bad("port"))?,
                "rosbridge_port" => {
                    settings.rosbridge_port = value.parse().map_err(|_| bad("port"))?
                }
                "notice_url" => settings.notice_url = Some(value),
                "matcher_rules" => settings.matcher_rules = Some(PathBuf::from(&value)),
                other => {
                    return Err(CliError::usage(format!("config: unknown key {other:?}")));
                }
            }
        }
    }

    // Flags last.
    if let Some(v) = &args.targets {
        settings.targets = v.clone();
    }
    if let Some(v) = &args.blocklist {
        settings.blocklist = Some(v.clone());
    }
    if let Some(v) = &args.mode {
        settings.mode = parse_mode(v)?;
    }
    if let Some(v) = args.rate {
        settings.rate = v;
    }
    if let Some(v) = args.seed {
        settings.seed = v;
    }
    if let Some(v) = &args.out {
        settings.out = v.clone();
    }
    if let Some(v) = &args.rulebook {
        settings.rulebook = Some(v.clone());
    }
    if let Some(v) = args.timeout_ms {
        settings.timeout_ms = v;
    }
    if let Some(v) = args.max_in_flight {
        settings.max_in_flight = v;
    }
    if let Some(v) = args.master_port {
        settings.master_port = v;
    }
    if let Some(v) = args.control_port {
        settings.control_port = v;
    }
    if let Some(v) = args.rosbridge_port {
        settings.rosbridge_port = v;
    }
    if let Some(v) = &args.notice_url {
        settings.notice_url = Some(v.clone());
    }
    if let Some(v) = &args.matcher_rules {
        settings.matcher_rules = Some(v.clone());
    }

    if settings.targets.as_os_str().is_empty() {
        return Err(CliError::usage(
            "no targets file: pass --targets FILE (or set targets= in --config)",
        ));
    }
    if settings.out.as_os_str().is_empty() {
        settings.out = PathBuf::from(format!("rosint-{}.jsonl", chrono::Utc::now().timestamp()));
    }
    Ok(settings)
}

fn user_agent_for(notice_url: &Option<String>) -> String {
    match notice_url {
        Some(url) => format!("rosint/{} (+{url})", env!("CARGO_PKG_VERSION")),
        None => format!("rosint/{}", env!("CARGO_PKG_VERSION")),
    }
}

/// The responsible-scan gate. Private/loopback targets pass freely; public
/// targets demand explicit authorization, a blocklist path, and a notice URL.
fn enforce_guardrails(
    spec: &TargetSpec,
    authorized: bool,
    blocklist: &Option<PathBuf>,
    notice_url: &Option<String>,
) -> Result<(), CliError> {
    if spec.is_private_only() {
        return Ok(());
    }
    if !authorized {
        return Err(CliError::usage(
            "targets include public address space; refusing to send any probe. \
             Re-run with --i-have-authorization if you are authorized to scan these ranges",
        ));
    }
    if blocklist.is_none() {
        return Err(CliError::usage(
            "public scans require --blocklist FILE (an empty file is acceptable, \
             the path is not optional)",
        ));
    }
    if notice_url.is_none() {
        return Err(CliError::usage(
            "public scans require --notice-url URL; it is embedded in the User-Agent \
             so probed networks can reach you",
        ));
    }
    Ok(())
}

fn load_rulebook(path: &Option<PathBuf>) -> Result<Rulebook, CliError> {
    match path {
        Some(path) => Rulebook::from_file(path)
            .map_err(|e| CliError::usage(format!("rulebook {}: {e}", path.display()))),
        None => Ok(Rulebook::shipped()),
    }
}

async fn cmd_scan(args: ScanArgs) -> CliResult {
    let settings = resolve_scan_settings(&args)?;
    let include = load_cidr_file(&settings.targets).map_err(|e| CliError::usage(e.to_string()))?;
    let exclude = match &settings.blocklist {
        Some(path) => load_cidr_file(path).map_err(|e| CliError::usage(e.to_string()))?,
        None => Vec::new(),
    };
    let port = match settings.mode {
        ScanMode::Master => settings.master_port,
        ScanMode::Rosbridge => settings.rosbridge_port,
    };
    let spec = TargetSpec::new(include, exclude, port)
        .map_err(|e| CliError::usage(format!("targets: {e}")))?;
    enforce_guardrails(
        &spec,
        settings.authorized,
        &settings.blocklist,
        &settings.notice_url,
    )?;

    let matcher = match &settings.matcher_rules {
        Some(path) => XmlRpcMatcher::from_rules_file(path)
            .map_err(|e| CliError::usage(format!("matcher rules: {e}")))?,
        None => XmlRpcMatcher::default(),
    };
    let rulebook = load_rulebook(&settings.rulebook)?;

    let config = PipelineConfig {
        mode: settings.mode,
        master_port: settings.master_port,
        control_port: settings.control_port,
        rosbridge_port: settings.rosbridge_port,
        connect_timeout: Duration::from_millis(settings.timeout_ms),
        http_timeout: Duration::from_millis(settings.timeout_ms * 2),
        interrogate_timeout: Duration::from_millis(settings.timeout_ms * 3),
        max_in_flight: settings.max_in_flight,
        rate_limit: settings.rate,
        user_agent: user_agent_for(&settings.notice_url),
        matcher,
        ..PipelineConfig::default()
    };
    config
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;

    let plan =
        build_plan(&spec, settings.seed).map_err(|e| CliError::usage(format!("plan: {e}")))?;
    let universe = plan.universe_size();

    let scan_id = format!(
        "scan-{}-{:04x}",
        chrono::Utc::now().format("%Y%m%d%H%M%S"),
        rand::random::<u16>()
    );
    let config_hash = config_fingerprint(&format!("{settings:?}"));
    let mut writer = ScanWriter::create(&settings.out, &scan_id, &config_hash)
        .map_err(|e| CliError::runtime(e.to_string()))?;

    println!(
        "{scan_id}: scanning {universe} addresses in {:?} mode (seed {}, rate {}/s)",
        settings.mode, settings.seed, settings.rate
    );

    let engine = ProbeEngine::new(config)
        .map_err(|e| CliError::usage(e.to_string()))?
        .with_rulebook(rulebook);
    let mut stream = engine.run(plan);
    let mut scanned = 0u64;
    let mut snapshots = 0u64;
    while let Some(report) = stream.next().await {
        scanned += 1;
        if report.snapshot.is_some() {
            snapshots += 1;
            let category = report
                .category
                .map(|c| c.display().to_string())
                .unwrap_or_default();
            println!("  {} stage={} {}", report.target, report.stage_reached, category);
        }
        writer
            .append(&report)
            .map_err(|e| CliError::runtime(e.to_string()))?;
    }
    writer
        .finalize()
        .map_err(|e| CliError::runtime(e.to_string()))?;

    println!("{scan_id}: {scanned} hosts probed, {snapshots} ROS instances");
    let (record, _) = load_scan(&settings.out).map_err(|e| CliError::runtime(e.to_string()))?;
    print!("{}", render_summary(&summarize(&record)));
    println!("record written to {}", settings.out.display());
    Ok(EXIT_OK)
}

// --- audit ------------------------------------------------------------------

async fn cmd_audit(args: AuditArgs) -> CliResult {
    let spec = TargetSpec::parse(&[args.target.as_str()], &[], 11311)
        .map_err(|e| CliError::usage(format!("target: {e}")))?;
    if !spec.is_private_only() && !args.i_have_authorization {
        return Err(CliError::usage(
            "target includes public address space; pass --i-have-authorization if you \
             are authorized to scan it",
        ));
    }
    let timeout = Duration::from_millis(args.timeout_ms.unwrap_or(1000));
    let user_agent = user_agent_for(&args.notice_url);
    let base = PipelineConfig {
        connect_timeout: timeout,
        http_timeout: timeout * 2,
        rate_limit: args.rate.unwrap_or(100),
        user_agent,
        ..PipelineConfig::default()
    };
    let master_engine = ProbeEngine::new(PipelineConfig {
        mode: ScanMode::Master,
        ..base.clone()
    })
    .map_err(|e| CliError::usage(e.to_string()))?;
    let bridge_engine = ProbeEngine::new(PipelineConfig {
        mode: ScanMode::Rosbridge,
        ..base
    })
    .map_err(|e| CliError::usage(e.to_string()))?;

    let plan = build_plan(&spec, 1).map_err(|e| CliError::usage(e.to_string()))?;
    let mut exposed = 0usize;
    let mut open_unconfirmed = 0usize;
    let mut checked = 0usize;
    for addr in plan {
        checked += 1;
        let (master, bridge) = tokio::join!(
            master_engine.scan_host(addr, false),
            bridge_engine.scan_host(addr, false)
        );
        let mut notes: Vec<String> = Vec::new();
        let master_open = master
            .outcomes
            .port_probe
            .as_ref()
            .map(|o| o.verdict == crate::probe::PortVerdict::Open)
            .unwrap_or(false);
        let master_positive = master
            .outcomes
            .http
            .as_ref()
            .map(|f| f.looks_like_xmlrpc)
            .unwrap_or(false);
        let bridge_open = bridge
            .outcomes
            .port_probe
            .as_ref()
            .map(|o| o.verdict == crate::probe::PortVerdict::Open)
            .unwrap_or(false);
        let bridge_positive = bridge
            .outcomes
            .http
            .as_ref()
            .map(|f| f.looks_like_websocket)
            .unwrap_or(false);
        let tarpit = master
            .outcomes
            .control_probe
            .as_ref()
            .map(|o| o.verdict == crate::probe::PortVerdict::Open)
            .unwrap_or(false);

        if tarpit {
            notes.push("answers on arbitrary ports (scan deterrent?)".into());
        }
        if master_positive {
            exposed += 1;
            notes.push(format!(
                "EXPOSED: ROS master port {} open, XML-RPC fingerprint positive",
                master.target.port()
            ));
        } else if master_open {
            open_unconfirmed += 1;
            notes.push(format!(
                "port {} open, fingerprint negative",
                master.target.port()
            ));
        }
        if bridge_positive {
            exposed += 1;
            notes.push(format!(
                "EXPOSED: Rosbridge port {} open, WebSocket endpoint answered",
                bridge.target.port()
            ));
        } else if bridge_open && !tarpit {
            open_unconfirmed += 1;
            notes.push(format!(
                "port {} open, not a WebSocket endpoint",
                bridge.target.port()
            ));
        }
        if !notes.is_empty() {
            println!("{addr}: {}", notes.join("; "));
        }
    }
    if exposed == 0 {
        println!("no exposure detected across {checked} hosts ({open_unconfirmed} open-but-unconfirmed ports)");
        Ok(EXIT_OK)
    } else {
        println!("{exposed} exposed service(s) across {checked} hosts");
        Ok(EXIT_EXPOSED)
    }
}

// --- offline commands ---------------------------------------------------------

fn cmd_classify(args: ClassifyArgs) -> CliResult {
    let rulebook = load_rulebook(&args.rulebook)?;
    let (mut record, warnings) =
        load_scan(&args.record).map_err(|e| CliError::runtime(e.to_string()))?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    for report in &mut record.host_reports {
        if let Some(snapshot) = &report.snapshot {
            report.hits = match_rules(snapshot, &rulebook);
            report.category = Some(categorize(snapshot, &report.hits));
        }
    }
    if let Some(out) = &args.out {
        let mut writer = ScanWriter::create(out, &record.meta.scan_id, &record.meta.config_hash)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        for report in &record.host_reports {
            writer
                .append(report)
                .map_err(|e| CliError::runtime(e.to_string()))?;
        }
        writer
            .finalize()
            .map_err(|e| CliError::runtime(e.to_string()))?;
        println!("reclassified record written to {}", out.display());
    }
    let tables = summarize(&record);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&tables).map_err(|e| CliError::runtime(e.to_string()))?
        );
    } else {
        print!("{}", render_summary(&tables));
    }
    Ok(EXIT_OK)
}

fn cmd_report(args: ReportArgs) -> CliResult {
    let (record, warnings) =
        load_scan(&args.record).map_err(|e| CliError::runtime(e.to_string()))?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    let tables = summarize(&record);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&tables).map_err(|e| CliError::runtime(e.to_string()))?
        );
    } else {
        print!("{}", render_summary(&tables));
    }
    Ok(EXIT_OK)
}

fn cmd_diff(args: DiffArgs) -> CliResult {
    let (record_a, _) =
        load_scan(&args.record_a).map_err(|e| CliError::runtime(e.to_string()))?;
    let (record_b, _) =
        load_scan(&args.record_b).map_err(|e| CliError::runtime(e.to_string()))?;
    let matches = match_hosts(&record_a, &record_b, args.threshold);
    let report = diff(&record_a, &record_b, &matches);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?
        );
    } else {
        print!("{}", render_diff(&report));
        let persistence = persistence_report(&[record_a, record_b], args.threshold);
        for (k, n) in persistence.presence_counts.iter().rev() {
            println!("identities seen in {k} scan(s): {n}");
        }
        for (scan, name, records) in &persistence.ambiguities {
            println!(
                "ambiguous machine name {name:?} in {scan}: {} (flagged, not merged)",
                records.join(", ")
            );
        }
    }
    Ok(EXIT_OK)
}

// --- mock ----------------------------------------------------------------------

async fn cmd_mock(args: MockArgs) -> CliResult {
    let mut fixtures =
        mock::load_fleet_spec(&args.spec).map_err(|e| CliError::usage(e.to_string()))?;
    for fixture in &mut fixtures {
        fixture.allow_non_loopback = args.allow_nonloopback;
    }
    let fleet = mock::spawn_fleet(fixtures)
        .await
        .map_err(|e| CliError::runtime(e.to_string()))?;
    for handle in fleet.handles() {
        for addr in handle.bound_addrs() {
            println!("serving {:?} fixture on {addr}", handle.fixture.kind);
        }
        if handle.fixture.kind == mock::FixtureKind::Closed {
            println!(
                "closed fixture at {} (no listener)",
                handle.fixture.primary_addr()
            );
        }
    }
    match args.duration_secs {
        Some(secs) => tokio::time::sleep(Duration::from_secs(secs)).await,
        None => {
            println!("press Ctrl-C to stop");
            tokio::signal::ctrl_c()
                .await
                .map_err(|e| CliError::runtime(e.to_string()))?;
        }
    }
    Ok(EXIT_OK)
}

// Re-exported so integration tests can target loopback helper addresses the
// same way the library tests do.
pub fn loopback_block() -> Ipv4Addr {
    mock::next_loopback_block()
}
