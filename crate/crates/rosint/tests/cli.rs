//! Binary-level tests: exit codes, guardrails, the offline commands, and the
//! standalone mock server.

use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use rosint::mock::{block_host, next_loopback_block, spawn_fleet, Fixture};

fn rosint_bin() -> &'static str {
    env!("CARGO_BIN_EXE_rosint")
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn run(args: &[&str]) -> (i32, String, String) {
    let output = Command::new(rosint_bin())
        .args(args)
        .output()
        .expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

struct ScanSetup {
    _rt: tokio::runtime::Runtime,
    _fleet: rosint::mock::Fleet,
    dir: tempfile::TempDir,
    targets: PathBuf,
    block: Ipv4Addr,
}

/// One master + one tarpit + closed space, served while the binary runs.
fn scan_setup() -> ScanSetup {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let block = next_loopback_block();
    let fleet = rt
        .block_on(spawn_fleet(vec![
            Fixture::master(block_host(block, 1), 11311)
                .with_topic("/camera/image_raw", &["/cam"])
                .with_topic("/cmd_vel", &["/base"])
                .with_param("/rosversion", "1.12.14")
                .with_param("/rosdistro", "kinetic")
                .with_param("/roslaunch/uris/host_potato__46636", "http://potato:46636/"),
            Fixture::tarpit(block_host(block, 2), &[11311, 58243]),
        ]))
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let targets = dir.path().join("targets.txt");
    write(&targets, &format!("{block}/28\n"));
    ScanSetup {
        _rt: rt,
        _fleet: fleet,
        dir,
        targets,
        block,
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).0, 0);
    assert_eq!(run(&["--version"]).0, 0);
    assert_eq!(run(&["scan", "--help"]).0, 0);
}

#[test]
fn unknown_flags_are_usage_errors() {
    let (code, _, stderr) = run(&["scan", "--definitely-not-a-flag"]);
    assert_eq!(code, 1, "stderr: {stderr}");
}

#[test]
fn scan_report_classify_and_diff_round_trip() {
    let setup = scan_setup();
    let out = setup.dir.path().join("scan.jsonl");

    let (code, stdout, stderr) = run(&[
        "scan",
        "--targets",
        setup.targets.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "7",
        "--rate",
        "2000",
        "--timeout-ms",
        "400",
    ]);
    assert_eq!(code, 0, "stdout: {stdout}\nstderr: {stderr}");
    assert!(stdout.contains("1 ROS instances"), "{stdout}");
    assert!(out.exists());

    let (code, stdout, _) = run(&["report", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("Identified robots"));
    assert!(stdout.contains("Kinetic"));

    let (code, stdout, _) = run(&["report", out.to_str().unwrap(), "--json"]);
    assert_eq!(code, 0);
    let parsed: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(parsed["total_instances"], 1);

    // Reclassify offline with a stripped-down rulebook: the camera rule is
    // gone, so the robot degrades to only-actuators. No rescan involved.
    let rulebook = setup.dir.path().join("tiny.rules");
    write(
        &rulebook,
        "rule id=only.base kind=actuator label=\"Movable base\" match_on=topic pattern=cmd_vel provenance=inferred\n",
    );
    let (code, stdout, _) = run(&[
        "classify",
        out.to_str().unwrap(),
        "--rulebook",
        rulebook.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(code, 0);
    let parsed: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let counts = parsed["category_counts"].as_array().unwrap();
    let only_actuators = counts
        .iter()
        .find(|row| row[0] == "OnlyActuators")
        .unwrap();
    assert_eq!(only_actuators[1], 1);

    // Diff a scan against itself: everything persists.
    let (code, stdout, _) = run(&[
        "diff",
        out.to_str().unwrap(),
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("persisted: 1"), "{stdout}");
    drop(setup);
}

#[test]
fn rosbridge_mode_scans_port_9090() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let block = next_loopback_block();
    let _fleet = rt
        .block_on(spawn_fleet(vec![Fixture::rosbridge(
            block_host(block, 1),
            9090,
        )
        .with_topic("/cmd_vel", &[])
        .with_topic("/scan", &[])]))
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let targets = dir.path().join("targets.txt");
    write(&targets, &format!("{block}/29\n"));
    let out = dir.path().join("bridges.jsonl");

    let (code, stdout, stderr) = run(&[
        "scan",
        "--targets",
        targets.to_str().unwrap(),
        "--mode",
        "rosbridge",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
        "--timeout-ms",
        "400",
    ]);
    assert_eq!(code, 0, "stdout: {stdout}\nstderr: {stderr}");
    assert!(stdout.contains("1 ROS instances"), "{stdout}");
    assert!(stdout.contains(":9090"), "default rosbridge port applied: {stdout}");
}

#[test]
fn public_targets_require_the_authorization_flag() {
    let dir = tempfile::tempdir().unwrap();
    let targets = dir.path().join("targets.txt");
    write(&targets, "198.51.100.0/30\n");
    let (code, _, stderr) = run(&["scan", "--targets", targets.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("refusing"), "stderr: {stderr}");

    // Authorization alone is not enough: a blocklist path and notice URL are
    // both mandatory for public space.
    let (code, _, stderr) = run(&[
        "scan",
        "--targets",
        targets.to_str().unwrap(),
        "--i-have-authorization",
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("blocklist"), "stderr: {stderr}");

    let blocklist = dir.path().join("block.txt");
    write(&blocklist, "");
    let (code, _, stderr) = run(&[
        "scan",
        "--targets",
        targets.to_str().unwrap(),
        "--i-have-authorization",
        "--blocklist",
        blocklist.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("notice-url"), "stderr: {stderr}");
}

#[test]
fn missing_targets_is_a_usage_error() {
    let (code, _, stderr) = run(&["scan"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("targets"), "stderr: {stderr}");
}

#[test]
fn audit_flags_exposed_masters_with_exit_code_three() {
    let setup = scan_setup();

    // A mixed range: one exposed master, one tarpit, the rest closed.
    let (code, stdout, _) = run(&[
        "audit",
        &format!("{}/28", setup.block),
        "--timeout-ms",
        "400",
    ]);
    assert_eq!(code, 3, "stdout: {stdout}");
    let master_line = stdout
        .lines()
        .find(|l| l.starts_with(&block_host(setup.block, 1).to_string()))
        .expect("per-host line for the master");
    assert!(master_line.contains("EXPOSED"), "{master_line}");
    assert!(
        master_line.contains("XML-RPC fingerprint positive"),
        "{master_line}"
    );
    let tarpit_line = stdout
        .lines()
        .find(|l| l.starts_with(&block_host(setup.block, 2).to_string()))
        .expect("per-host line for the tarpit");
    assert!(tarpit_line.contains("deterrent"), "{tarpit_line}");

    // The tarpit alone is flagged but not exposure.
    let tarpit_ip = block_host(setup.block, 2).to_string();
    let (code, stdout, _) = run(&["audit", &tarpit_ip, "--timeout-ms", "400"]);
    assert_eq!(code, 0, "stdout: {stdout}");
    assert!(stdout.contains("deterrent"), "{stdout}");
    drop(setup);
}

#[test]
fn audit_of_closed_space_reports_no_exposure() {
    let block = next_loopback_block();
    let (code, stdout, _) = run(&[
        "audit",
        &format!("{}/30", block_host(block, 200)),
        "--timeout-ms",
        "300",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("no exposure detected"), "{stdout}");
}

#[test]
fn audit_of_public_space_requires_authorization() {
    let (code, _, stderr) = run(&["audit", "203.0.113.7"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("authorization"), "stderr: {stderr}");
}

#[test]
fn mock_serves_a_fleet_from_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let block = next_loopback_block();
    let addr = block_host(block, 9);
    let spec = dir.path().join("fleet.rules");
    write(
        &spec,
        &format!(
            "fixture kind=master addr={addr} port=11311\ntopic name=/rosout pub=/rosout\nparam name=/rosversion value=1.11.21\n"
        ),
    );
    let mut child = Command::new(rosint_bin())
        .args(["mock", "--spec", spec.to_str().unwrap(), "--duration-secs", "4"])
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();

    // Poll until the fixture answers, then interrogate it for real.
    let rt = tokio::runtime::Runtime::new().unwrap();
    let mut connected = false;
    for _ in 0..40 {
        std::thread::sleep(Duration::from_millis(100));
        if std::net::TcpStream::connect((addr, 11311)).is_ok() {
            connected = true;
            break;
        }
    }
    assert!(connected, "mock fleet never came up");
    let names = rt
        .block_on(
            rosint::master::MasterClient::new()
                .get_param_names(std::net::SocketAddr::from((addr, 11311))),
        )
        .unwrap();
    assert_eq!(names, vec!["/rosversion".to_string()]);

    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn mock_rejects_nonloopback_without_the_unsafe_flag() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("fleet.rules");
    write(&spec, "fixture kind=master addr=0.0.0.0 port=0\n");
    let (code, _, stderr) = run(&["mock", "--spec", spec.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("unsafe flag"), "stderr: {stderr}");
}
