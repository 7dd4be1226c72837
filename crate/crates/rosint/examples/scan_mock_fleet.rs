//! The whole pipeline against a built-in mock fleet: a master, a tarpit, a
//! plain web server, and closed space, all on loopback.
//!
//! ```bash
//! cargo run -p rosint --example scan_mock_fleet
//! ```

use std::time::Duration;

use rosint::engine::{PipelineConfig, ProbeEngine, ScanMode};
use rosint::mock::{block_host, next_loopback_block, spawn_fleet, Fixture};
use rosint::plan::{build_plan, TargetSpec};
use rosint::report::{render_summary, summarize};
use rosint::store::ScanRecord;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let block = next_loopback_block();
    let fleet = spawn_fleet(vec![
        Fixture::master(block_host(block, 1), 11311)
            .with_topic("/camera/rgb/image_raw", &["/camera_node"])
            .with_topic("/cmd_vel", &["/mobile_base"])
            .with_topic("/scan", &["/laser"])
            .with_param("/rosversion", "1.12.14")
            .with_param("/rosdistro", "kinetic")
            .with_param("/roslaunch/uris/host_lab_pc__38200", "http://lab_pc:38200/"),
        Fixture::master(block_host(block, 2), 11311)
            .with_topic("/gazebo/model_states", &["/gazebo"])
            .with_param("/use_sim_time", "1"),
        Fixture::tarpit(block_host(block, 3), &[11311, 58243]),
        Fixture::plain_http(block_host(block, 4), 11311),
    ])
    .await?;
    println!("fleet up: 2 masters, 1 tarpit, 1 web server in {block}/28\n");

    let spec = TargetSpec::parse(&[&format!("{block}/28")], &[], 11311)?;
    let plan = build_plan(&spec, 7)?;
    let config = PipelineConfig {
        mode: ScanMode::Master,
        connect_timeout: Duration::from_millis(400),
        http_timeout: Duration::from_millis(800),
        rate_limit: 500,
        ..PipelineConfig::default()
    };
    let engine = ProbeEngine::new(config)?;

    let mut stream = engine.run(plan);
    let mut reports = Vec::new();
    while let Some(report) = stream.next().await {
        if report.stage_reached > 1 {
            println!(
                "{} reached stage {} {}",
                report.target,
                report.stage_reached,
                report
                    .category
                    .map(|c| format!("-> {}", c.display()))
                    .unwrap_or_default()
            );
        }
        reports.push(report);
    }

    let record = ScanRecord::synthetic("example-scan", reports);
    println!("\n{}", render_summary(&summarize(&record)));

    // The fixture logs show exactly what the scanner sent.
    for handle in fleet.handles() {
        let methods = handle.request_log().xmlrpc_methods();
        if !methods.is_empty() {
            println!(
                "{} answered XML-RPC calls: {}",
                handle.addr(),
                methods.join(", ")
            );
        }
    }
    Ok(())
}
