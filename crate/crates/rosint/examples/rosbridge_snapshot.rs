//! Interrogate a mock Rosbridge server over JSON WebSocket: detection,
//! snapshotting, and the protected-topic filter.
//!
//! ```bash
//! cargo run -p rosint --example rosbridge_snapshot
//! ```

use std::net::Ipv4Addr;

use rosint::mock::{serve, Fixture};
use rosint::rosbridge::BridgeClient;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = Fixture::rosbridge(Ipv4Addr::LOCALHOST, 0)
        .with_topic("/cmd_vel", &[])
        .with_topic("/scan", &[])
        .with_topic("/operator_cam/image", &[])
        .with_param("/rosdistro", "kinetic")
        .with_param("/roslaunch/uris/host_bridgebox__40001", "http://bridgebox:40001/")
        .with_protected_topics(&["/operator_cam/image"]);
    let handle = serve(fixture).await?;
    println!("mock rosbridge on {}", handle.addr());

    let client = BridgeClient::new();

    let detection = client.detect_websocket(handle.addr()).await;
    println!(
        "websocket detection: {} (status {})",
        detection.websocket, detection.fingerprint.status_code
    );

    let snapshot = client.snapshot_rosbridge(handle.addr()).await?;
    println!("topics: {:?}", snapshot.topics());
    println!("params: {:?}", snapshot.param_names.as_deref().unwrap_or_default());
    println!("limitations: {:?}", snapshot.limitations);
    println!("note: /operator_cam/image is protected and absent above");

    // The request log doubles as passivity evidence.
    println!("\nops the server saw:");
    for (op, service) in handle.request_log().bridge_ops() {
        println!("  {op} {}", service.unwrap_or_default());
    }
    Ok(())
}
