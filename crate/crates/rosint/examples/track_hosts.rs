//! Link host records across three synthetic scans: hostname matching first,
//! IP-plus-topic-similarity as the fallback, then persistence clustering.
//!
//! ```bash
//! cargo run -p rosint --example track_hosts
//! ```

use std::net::{IpAddr, Ipv4Addr, SocketAddr};

use rosint::classify::{categorize, match_rules, Rulebook};
use rosint::identity::{extract_machine_names, match_hosts, persistence_report, topic_similarity};
use rosint::snapshot::RosSnapshot;
use rosint::store::{HostReport, ScanRecord, StageOutcomes};

fn host(ip: [u8; 4], topics: &[&str], params: &[&str]) -> HostReport {
    let book = Rulebook::shipped();
    let target = SocketAddr::new(IpAddr::V4(Ipv4Addr::from(ip)), 11311);
    let mut snapshot = RosSnapshot::synthetic(topics, params);
    snapshot.endpoint = target;
    let hits = match_rules(&snapshot, &book);
    let category = categorize(&snapshot, &hits);
    HostReport {
        target,
        stage_reached: 4,
        outcomes: StageOutcomes::default(),
        snapshot: Some(snapshot),
        hits,
        category: Some(category),
        warnings: Vec::new(),
    }
}

fn main() {
    // The parameter server leaks the launching machine's hostname.
    let params = ["/roslaunch/uris/host_potato__46636".to_string()];
    for name in extract_machine_names(&params) {
        println!("machine name {:?} from {}", name.name, name.source_param);
    }

    // potato drifts across IPs and usage patterns; another lab machine keeps
    // its IP but has no roslaunch parameters, so similarity carries it.
    let potato = "/roslaunch/uris/host_potato__46636";
    let scans = vec![
        ScanRecord::synthetic(
            "scan-1",
            vec![
                host([128, 100, 1, 5], &["/gazebo/model_states", "/clock"], &[potato]),
                host([128, 100, 1, 9], &["/camera/image_raw", "/tf", "/joint_states"], &[]),
            ],
        ),
        ScanRecord::synthetic(
            "scan-2",
            vec![
                host([128, 100, 7, 7], &["/gazebo/model_states", "/clock"], &[potato]),
                host([128, 100, 1, 9], &["/camera/image_raw", "/tf"], &[]),
            ],
        ),
        ScanRecord::synthetic(
            "scan-3",
            vec![host([73, 12, 9, 4], &["/rosout", "/rosout_agg"], &[potato])],
        ),
    ];

    println!("\npairwise matches:");
    for (i, j) in [(0usize, 1usize), (1, 2), (0, 2)] {
        for m in match_hosts(&scans[i], &scans[j], 0.5) {
            println!(
                "  {}/{} <-> {}/{} via {:?} (similarity {:.2})",
                m.left.scan_id,
                m.left.record_id,
                m.right.scan_id,
                m.right.record_id,
                m.basis,
                m.similarity.unwrap_or(0.0)
            );
        }
    }

    let report = persistence_report(&scans, 0.5);
    println!("\nidentity clusters:");
    for cluster in &report.clusters {
        let ids: Vec<String> = cluster
            .members
            .iter()
            .map(|m| format!("{}/{}", m.scan_id, m.record_id))
            .collect();
        println!(
            "  seen in {} scan(s), category changed: {} [{}]",
            cluster.presence,
            cluster.category_changed,
            ids.join(", ")
        );
        for (scan, category) in &cluster.category_history {
            println!(
                "    {scan}: {}",
                category.map(|c| c.display()).unwrap_or("unknown")
            );
        }
    }
    for (k, n) in report.presence_counts.iter().rev() {
        println!("hosts present in {k} scan(s): {n}");
    }

    let a: std::collections::BTreeSet<String> =
        ["/x", "/y", "/z"].iter().map(|s| s.to_string()).collect();
    let b: std::collections::BTreeSet<String> =
        ["/y", "/z", "/w"].iter().map(|s| s.to_string()).collect();
    println!("\nJaccard of {{x,y,z}} and {{y,z,w}}: {}", topic_similarity(&a, &b));
}
