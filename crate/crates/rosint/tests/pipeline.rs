//! End-to-end funnel behavior against the mock fleet: elimination stages,
//! passive interrogation, fault injection, and both transports.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::time::Duration;

use rosint::classify::HostCategory;
use rosint::engine::{PipelineConfig, ProbeEngine, ScanMode};
use rosint::master::{MasterClient, MasterError, METHOD_WHITELIST};
use rosint::mock::{
    block_host, next_loopback_block, serve, spawn_fleet, Behaviors, Fixture, Fleet, RequestDetail,
};
use rosint::plan::{build_plan, TargetSpec};
use rosint::probe::PortVerdict;
use rosint::rosbridge::BridgeClient;
use rosint::snapshot::Transport;
use rosint::store::HostReport;

fn test_config(mode: ScanMode) -> PipelineConfig {
    PipelineConfig {
        mode,
        connect_timeout: Duration::from_millis(400),
        http_timeout: Duration::from_millis(800),
        interrogate_timeout: Duration::from_millis(1500),
        rate_limit: 4000,
        max_in_flight: 32,
        ..PipelineConfig::default()
    }
}

fn block_spec(block: Ipv4Addr, prefix: u8, port: u16) -> TargetSpec {
    TargetSpec::parse(&[&format!("{block}/{prefix}")], &[], port).unwrap()
}

/// Every fixture log must show only whitelisted master methods and only the
/// two whitelisted Rosbridge service calls.
fn assert_passive(fleet: &Fleet) {
    for handle in fleet.handles() {
        for method in handle.request_log().xmlrpc_methods() {
            assert!(
                METHOD_WHITELIST.contains(&method.as_str()),
                "non-whitelisted method {method:?} reached {:?} fixture at {}",
                handle.fixture.kind,
                handle.addr(),
            );
        }
        for (op, service) in handle.request_log().bridge_ops() {
            assert_eq!(op, "call_service", "forbidden op {op:?}");
            let service = service.unwrap_or_default();
            assert!(
                service == "/rosapi/topics" || service == "/rosapi/get_param_names",
                "forbidden service {service:?}"
            );
        }
    }
}

#[tokio::test]
async fn funnel_eliminates_each_kind_at_its_stage() {
    let block = next_loopback_block();
    let fixtures = vec![
        Fixture::master(block_host(block, 1), 11311)
            .with_topic("/camera/image_raw", &["/cam_node"])
            .with_topic("/cmd_vel", &["/base"])
            .with_param("/rosversion", "1.12.14")
            .with_param("/rosdistro", "kinetic"),
        Fixture::tarpit(block_host(block, 2), &[11311, 58243]),
        Fixture::plain_http(block_host(block, 3), 11311),
    ];
    let fleet = spawn_fleet(fixtures).await.unwrap();

    // 1 master + 1 tarpit + 1 plain server + 13 closed addresses in the /28.
    let plan = build_plan(&block_spec(block, 28, 11311), 7).unwrap();
    let engine = ProbeEngine::new(test_config(ScanMode::Master)).unwrap();
    let reports = engine.run(plan).collect().await;

    assert_eq!(reports.len(), 16, "one report per planned address");
    let by_ip = |ip: Ipv4Addr| {
        reports
            .iter()
            .find(|r| r.target.ip() == IpAddr::V4(ip))
            .unwrap()
    };

    let master = by_ip(block_host(block, 1));
    assert_eq!(master.stage_reached, 4);
    let snapshot = master.snapshot.as_ref().expect("master snapshot");
    assert_eq!(snapshot.transport, Transport::XmlRpcMaster);
    assert_eq!(snapshot.ros_comm_version.as_deref(), Some("1.12.14"));
    assert_eq!(master.category, Some(HostCategory::IdentifiedRobot));

    let tarpit = by_ip(block_host(block, 2));
    assert_eq!(tarpit.stage_reached, 2, "tarpit dies at the control probe");
    assert!(tarpit.snapshot.is_none());
    assert_eq!(
        tarpit
            .outcomes
            .control_probe
            .as_ref()
            .map(|o| o.verdict),
        Some(PortVerdict::Open)
    );

    let plain = by_ip(block_host(block, 3));
    assert_eq!(plain.stage_reached, 3, "web server dies at the fingerprint");
    assert!(!plain.outcomes.http.as_ref().unwrap().looks_like_xmlrpc);

    let snapshots = reports.iter().filter(|r| r.snapshot.is_some()).count();
    assert_eq!(snapshots, 1, "exactly one ROS instance in this fleet");

    for report in &reports {
        let ip = report.target.ip();
        if ip != IpAddr::V4(block_host(block, 1))
            && ip != IpAddr::V4(block_host(block, 2))
            && ip != IpAddr::V4(block_host(block, 3))
        {
            assert_eq!(report.stage_reached, 1, "{ip} should be closed");
        }
    }

    // The tarpit saw connections but never a single application byte.
    let tarpit_log = fleet
        .handle_at(block_host(block, 2))
        .unwrap()
        .request_log()
        .snapshot();
    assert!(tarpit_log
        .iter()
        .all(|e| e.detail == RequestDetail::Connected));
    assert!(!tarpit_log.is_empty());

    // The web server saw exactly one request per fingerprint attempt, all GET.
    let plain_log = fleet
        .handle_at(block_host(block, 3))
        .unwrap()
        .request_log()
        .snapshot();
    let gets: Vec<_> = plain_log
        .iter()
        .filter_map(|e| match &e.detail {
            RequestDetail::HttpRequest { method, path } => Some((method.clone(), path.clone())),
            _ => None,
        })
        .collect();
    assert_eq!(gets, vec![("GET".to_string(), "/".to_string())]);

    assert_passive(&fleet);
}

#[tokio::test]
async fn filtered_control_port_does_not_disqualify() {
    // Only a positive Open on the control port marks a tarpit; a silent
    // (filtered) control port keeps the host in the funnel.
    let block = next_loopback_block();
    let addr = block_host(block, 1);
    let fleet = spawn_fleet(vec![Fixture::master(addr, 11311)
        .with_topic("/camera/image_raw", &["/cam"])
        .with_param("/rosversion", "1.12.14")])
    .await
    .unwrap();

    // Saturate a backlog-1 listener on the control port so probes of it
    // time out instead of getting an RST.
    let socket = tokio::net::TcpSocket::new_v4().unwrap();
    socket
        .bind(SocketAddr::new(IpAddr::V4(addr), 58243))
        .unwrap();
    let listener = socket.listen(1).unwrap();
    let mut fillers = Vec::new();
    for _ in 0..16 {
        match tokio::time::timeout(
            Duration::from_millis(100),
            tokio::net::TcpStream::connect((addr, 58243)),
        )
        .await
        {
            Ok(Ok(stream)) => fillers.push(stream),
            _ => break,
        }
    }

    let engine = ProbeEngine::new(test_config(ScanMode::Master)).unwrap();
    let report = engine.scan_host(addr, true).await;
    assert_eq!(
        report
            .outcomes
            .control_probe
            .as_ref()
            .map(|o| o.verdict),
        Some(PortVerdict::Filtered)
    );
    assert_eq!(report.stage_reached, 4, "filtered control port must retain the host");
    assert!(report.snapshot.is_some());

    drop(fillers);
    drop(listener);
    assert_passive(&fleet);
}

#[tokio::test]
async fn exhausted_plan_yields_an_empty_stream() {
    let block = next_loopback_block();
    let spec = TargetSpec::single(block_host(block, 1), 11311);
    let mut plan = build_plan(&spec, 3).unwrap();
    while plan.next_address().is_some() {}
    let engine = ProbeEngine::new(test_config(ScanMode::Master)).unwrap();
    let reports = engine.run(plan).collect().await;
    assert!(reports.is_empty());
}

#[tokio::test]
async fn pipeline_paces_probes_with_the_token_bucket() {
    let block = next_loopback_block();
    // 30 closed addresses at 20 probes/s from an empty bucket: >= ~1.45s.
    let spec = block_spec(block, 27, 11311);
    let plan = build_plan(&spec, 9).unwrap();
    let config = PipelineConfig {
        rate_limit: 20,
        ..test_config(ScanMode::Master)
    };
    let engine = ProbeEngine::new(config).unwrap();
    let started = std::time::Instant::now();
    let reports = engine.run(plan).collect().await;
    assert_eq!(reports.len(), 32);
    assert!(
        started.elapsed() >= Duration::from_millis(1300),
        "32 probes at 20/s finished too fast: {:?}",
        started.elapsed()
    );
}

#[tokio::test]
async fn snapshot_skips_getparam_for_absent_whitelist_keys() {
    let fixture = Fixture::master(Ipv4Addr::LOCALHOST, 0)
        .with_topic("/rosout", &["/rosout"])
        .with_param("/rosversion", "1.11.21")
        .with_param("/run_id", "abc");
    let handle = serve(fixture).await.unwrap();
    let client = MasterClient::new();
    let snapshot = client.snapshot_host(handle.addr()).await.unwrap();

    assert_eq!(snapshot.ros_comm_version.as_deref(), Some("1.11.21"));
    assert!(snapshot.urdf_xml.is_none());
    assert!(snapshot.distro_hint.is_none());
    // /robot_description and /rosdistro are whitelisted but absent from the
    // instance, so no getParam may be issued for them; /run_id is present
    // but not whitelisted, so no getParam either.
    let log = handle.request_log().snapshot();
    let get_params: Vec<String> = log
        .iter()
        .filter_map(|e| match &e.detail {
            RequestDetail::XmlRpcCall { method, .. } if method == "getParam" => Some(method),
            _ => None,
        })
        .cloned()
        .collect();
    assert_eq!(get_params.len(), 1, "only /rosversion may be fetched");
    assert_eq!(
        handle.request_log().xmlrpc_methods(),
        vec!["getSystemState", "getParamNames", "getParam"]
    );
}

#[tokio::test]
async fn urdf_lands_in_the_snapshot_when_advertised() {
    let urdf = r#"<?xml version="1.0"?><robot name="turtlebot"><link name="b"/></robot>"#;
    let fixture = Fixture::master(Ipv4Addr::LOCALHOST, 0)
        .with_topic("/camera/rgb/image_raw", &["/cam"])
        .with_param("/robot_description", urdf)
        .with_param("/rosdistro", "indigo");
    let handle = serve(fixture).await.unwrap();
    let snapshot = MasterClient::new()
        .snapshot_host(handle.addr())
        .await
        .unwrap();
    assert_eq!(snapshot.urdf_xml.as_deref(), Some(urdf));
    assert_eq!(snapshot.distro_hint.as_deref(), Some("indigo"));
}

#[tokio::test]
async fn partial_failure_degrades_to_warnings() {
    let fixture = Fixture::master(Ipv4Addr::LOCALHOST, 0)
        .with_topic("/camera/image_raw", &["/cam"])
        .with_param("/rosversion", "1.12.14")
        .with_behaviors(Behaviors {
            fault_methods: vec!["getParamNames".into()],
            ..Behaviors::default()
        });
    let handle = serve(fixture).await.unwrap();
    let snapshot = MasterClient::new()
        .snapshot_host(handle.addr())
        .await
        .unwrap();
    assert!(snapshot.system_state.is_some());
    assert!(snapshot.param_names.is_none());
    assert!(snapshot
        .warnings
        .iter()
        .any(|w| w.contains("getParamNames")));
    // Without a name list, no parameter value may be fetched.
    assert!(snapshot.raw_params_fetched.is_empty());
}

#[tokio::test]
async fn all_subcalls_failing_is_snapshot_empty() {
    let fixture = Fixture::master(Ipv4Addr::LOCALHOST, 0).with_behaviors(Behaviors {
        fault_methods: vec!["getSystemState".into(), "getParamNames".into()],
        ..Behaviors::default()
    });
    let handle = serve(fixture).await.unwrap();
    let err = MasterClient::new()
        .snapshot_host(handle.addr())
        .await
        .unwrap_err();
    assert!(matches!(err, MasterError::SnapshotEmpty { .. }));
}

#[tokio::test]
async fn ros_fault_status_surfaces_as_fault_error() {
    let fixture = Fixture::master(Ipv4Addr::LOCALHOST, 0).with_behaviors(Behaviors {
        fault_methods: vec!["getParamNames".into()],
        ..Behaviors::default()
    });
    let handle = serve(fixture).await.unwrap();
    let err = MasterClient::new()
        .get_param_names(handle.addr())
        .await
        .unwrap_err();
    match err {
        MasterError::XmlRpcFault { code, .. } => assert_eq!(code, -1),
        other => panic!("expected fault, got {other}"),
    }
}

#[tokio::test]
async fn truncated_response_is_a_transport_level_failure() {
    let fixture = Fixture::master(Ipv4Addr::LOCALHOST, 0)
        .with_topic("/rosout", &["/rosout"])
        .with_behaviors(Behaviors {
            truncate_response: true,
            ..Behaviors::default()
        });
    let handle = serve(fixture).await.unwrap();
    assert!(MasterClient::new()
        .get_system_state(handle.addr())
        .await
        .is_err());
}

#[tokio::test]
async fn bulk_parameter_lists_come_back_whole() {
    let mut fixture = Fixture::master(Ipv4Addr::LOCALHOST, 0);
    for i in 0..10_000 {
        fixture = fixture.with_param(&format!("/auto/param_{i:05}"), "x");
    }
    let handle = serve(fixture).await.unwrap();
    let names = MasterClient::new()
        .get_param_names(handle.addr())
        .await
        .unwrap();
    assert_eq!(names.len(), 10_000);
}

#[tokio::test]
async fn consecutive_snapshots_differ_only_in_capture_time() {
    let fixture = Fixture::master(Ipv4Addr::LOCALHOST, 0)
        .with_topic("/scan", &["/lidar"])
        .with_param("/rosversion", "1.12.14");
    let handle = serve(fixture).await.unwrap();
    let client = MasterClient::new();
    let mut a = client.snapshot_host(handle.addr()).await.unwrap();
    let mut b = client.snapshot_host(handle.addr()).await.unwrap();
    assert_ne!(a.captured_at, b.captured_at);
    let t = chrono::Utc::now();
    a.captured_at = t;
    b.captured_at = t;
    assert_eq!(a, b);
}

#[tokio::test]
async fn rosbridge_snapshot_respects_protected_topics() {
    let fixture = Fixture::rosbridge(Ipv4Addr::LOCALHOST, 0)
        .with_topic("/cmd_vel", &[])
        .with_topic("/scan", &[])
        .with_topic("/secret_cam/image", &[])
        .with_param("/rosdistro", "kinetic")
        .with_protected_topics(&["/secret_cam/image"]);
    let handle = serve(fixture).await.unwrap();

    let client = BridgeClient::new();
    let detection = client.detect_websocket(handle.addr()).await;
    assert!(detection.websocket);
    assert!(detection.fingerprint.looks_like_websocket);

    let snapshot = client.snapshot_rosbridge(handle.addr()).await.unwrap();
    assert_eq!(snapshot.transport, Transport::Rosbridge);
    let topics = snapshot.topics();
    assert!(topics.contains("/cmd_vel") && topics.contains("/scan"));
    assert!(
        !topics.contains("/secret_cam/image"),
        "protected topic leaked: {topics:?}"
    );
    assert_eq!(snapshot.param_names.as_deref(), Some(&["/rosdistro".to_string()][..]));
    assert!(snapshot
        .limitations
        .iter()
        .any(|l| l.contains("node attribution")));

    // Node lists are empty over this transport.
    let state = snapshot.system_state.as_ref().unwrap();
    assert!(state.publishers.values().all(|nodes| nodes.is_empty()));

    let ops = handle.request_log().bridge_ops();
    assert_eq!(ops.len(), 2);
    assert!(ops.iter().all(|(op, _)| op == "call_service"));
}

#[tokio::test]
async fn rosbridge_auth_refusal_means_snapshot_empty() {
    let fixture = Fixture::rosbridge(Ipv4Addr::LOCALHOST, 0)
        .with_topic("/cmd_vel", &[])
        .with_behaviors(Behaviors {
            auth_refuse: true,
            ..Behaviors::default()
        });
    let handle = serve(fixture).await.unwrap();
    let client = BridgeClient::new().with_timeout(Duration::from_millis(800));
    let err = client.snapshot_rosbridge(handle.addr()).await.unwrap_err();
    let text = err.to_string();
    assert!(text.contains("not authorized"), "unexpected reason: {text}");
}

#[tokio::test]
async fn plain_http_on_9090_fails_websocket_detection() {
    let fixture = Fixture::plain_http(Ipv4Addr::LOCALHOST, 0);
    let handle = serve(fixture).await.unwrap();
    let detection = BridgeClient::new().detect_websocket(handle.addr()).await;
    assert!(!detection.websocket);
    assert_eq!(detection.fingerprint.status_code, 200);
    assert!(detection.reason.is_some());
}

#[tokio::test]
async fn honeypot_records_the_scanner_and_gets_no_stage_four() {
    let block = next_loopback_block();
    let honeypot = Fixture::honeypot(block_host(block, 1), 11311);
    let fleet = spawn_fleet(vec![honeypot]).await.unwrap();

    let config = PipelineConfig {
        http_timeout: Duration::from_millis(300),
        ..test_config(ScanMode::Master)
    };
    let engine = ProbeEngine::new(config).unwrap();
    let report: HostReport = engine.scan_host(block_host(block, 1), true).await;

    // Opens, passes the control probe, then never answers the fingerprint.
    assert_eq!(report.stage_reached, 3);
    assert!(report.snapshot.is_none());

    let log = fleet.handles()[0].request_log().snapshot();
    assert!(log.iter().any(|e| e.detail == RequestDetail::Connected));
    // The only bytes it ever saw are the stage-3 GET, none of them XML-RPC.
    assert!(log
        .iter()
        .all(|e| !matches!(e.detail, RequestDetail::XmlRpcCall { .. })));
    assert_passive(&fleet);
}

#[tokio::test]
async fn local_socket_addr_of_target(){
    // Regression guard: reports carry the probed port, which differs by mode.
    let block = next_loopback_block();
    let engine = ProbeEngine::new(test_config(ScanMode::Rosbridge)).unwrap();
    let report = engine.scan_host(block_host(block, 200), false).await;
    assert_eq!(report.target, SocketAddr::new(IpAddr::V4(block_host(block, 200)), 9090));
    assert_eq!(report.stage_reached, 1);
}
