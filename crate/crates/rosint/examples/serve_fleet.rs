//! Parse a fleet spec, serve it, talk to it with the master client, and dump
//! the request logs — the same evidence the passivity tests assert on.
//!
//! ```bash
//! cargo run -p rosint --example serve_fleet
//! ```

use rosint::master::MasterClient;
use rosint::mock::{parse_fleet_spec, spawn_fleet, FixtureKind};

const FLEET_SPEC: &str = r#"
# a master with a camera and an injected getParamNames fault
fixture kind=master addr=127.0.0.1 port=0
topic name=/camera/image_raw pub=/cam_node
topic name=/rosout pub=/rosout
param name=/rosversion value=1.12.14
param name=/rosdistro value=kinetic
behavior fault_method=getParamNames

# a honeypot that logs whoever connects
fixture kind=honeypot addr=127.0.0.1 port=0
"#;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = parse_fleet_spec(FLEET_SPEC)?;
    let fleet = spawn_fleet(fixtures).await?;
    for handle in fleet.handles() {
        println!("{:?} fixture listening on {}", handle.fixture.kind, handle.addr());
    }

    let master = fleet
        .handles()
        .iter()
        .find(|h| h.fixture.kind == FixtureKind::Master)
        .unwrap();

    let client = MasterClient::new();
    let snapshot = client.snapshot_host(master.addr()).await?;
    println!("\nsnapshot topics: {:?}", snapshot.topics());
    println!("snapshot warnings (injected fault): {:?}", snapshot.warnings);

    println!("\nmaster request log:");
    for entry in master.request_log().snapshot() {
        println!("  {} {} {:?}", entry.at.format("%H:%M:%S%.3f"), entry.peer, entry.detail);
    }
    Ok(())
}
