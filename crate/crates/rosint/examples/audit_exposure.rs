//! Exposure check, stages 1-3 only: is anything answering like a ROS master
//! or Rosbridge here? No interrogation is performed.
//!
//! ```bash
//! cargo run -p rosint --example audit_exposure
//! ```

use std::time::Duration;

use rosint::engine::{PipelineConfig, ProbeEngine, ScanMode};
use rosint::mock::{block_host, next_loopback_block, spawn_fleet, Fixture};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let block = next_loopback_block();
    let _fleet = spawn_fleet(vec![
        Fixture::master(block_host(block, 1), 11311).with_param("/rosversion", "1.12.14"),
        Fixture::rosbridge(block_host(block, 2), 9090).with_topic("/cmd_vel", &[]),
        Fixture::plain_http(block_host(block, 3), 11311),
    ])
    .await?;

    let config = PipelineConfig {
        connect_timeout: Duration::from_millis(400),
        http_timeout: Duration::from_millis(800),
        ..PipelineConfig::default()
    };
    let master_engine = ProbeEngine::new(PipelineConfig {
        mode: ScanMode::Master,
        ..config.clone()
    })?;
    let bridge_engine = ProbeEngine::new(PipelineConfig {
        mode: ScanMode::Rosbridge,
        ..config
    })?;

    for host in 1..=4u8 {
        let addr = block_host(block, host);
        // interrogate=false keeps this to stages 1-3.
        let master = master_engine.scan_host(addr, false).await;
        let bridge = bridge_engine.scan_host(addr, false).await;

        let master_hit = master
            .outcomes
            .http
            .as_ref()
            .map(|f| f.looks_like_xmlrpc)
            .unwrap_or(false);
        let bridge_hit = bridge
            .outcomes
            .http
            .as_ref()
            .map(|f| f.looks_like_websocket)
            .unwrap_or(false);
        let verdict = match (master_hit, bridge_hit) {
            (true, _) => "EXPOSED: ROS master port open, XML-RPC fingerprint positive",
            (_, true) => "EXPOSED: Rosbridge WebSocket endpoint answered",
            _ if master.stage_reached >= 3 => "open port, but fingerprint negative",
            _ => "no exposure detected",
        };
        println!("{addr}: {verdict}");
    }
    Ok(())
}
