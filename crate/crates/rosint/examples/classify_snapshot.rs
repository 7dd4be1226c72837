//! Classify synthetic snapshots: taxonomy hits, the mutually exclusive host
//! category, robot types, and the version-to-distro mapping.
//!
//! ```bash
//! cargo run -p rosint --example classify_snapshot
//! ```

use rosint::classify::{
    categorize, detect_simulator, extract_robot_types, map_distro, match_rules, Rulebook,
};
use rosint::snapshot::RosSnapshot;

fn main() {
    let book = Rulebook::shipped();
    println!("shipped rulebook: {} rules\n", book.len());

    let cases = [
        (
            "camera + movable base (a robot)",
            RosSnapshot::synthetic(&["/camera/image_raw", "/cmd_vel", "/tf"], &[]),
        ),
        (
            "the same hardware inside a simulator",
            RosSnapshot::synthetic(
                &["/camera/image_raw", "/cmd_vel", "/gazebo/link_states"],
                &[],
            ),
        ),
        (
            "an idle core with only rosout plumbing",
            RosSnapshot::synthetic(&["/rosout", "/rosout_agg"], &[])
                .with_services(&["/rosout/get_loggers", "/rosout/set_logger_level"]),
        ),
        (
            "simulated time without simulator topics",
            RosSnapshot::synthetic(&["/experiment/results"], &["/use_sim_time"]),
        ),
        (
            "a turtlebot, recognized from its topics",
            RosSnapshot::synthetic(&["/turtlebot/odom", "/cmd_vel", "/joy"], &[]),
        ),
    ];

    for (label, snapshot) in cases {
        let hits = match_rules(&snapshot, &book);
        let category = categorize(&snapshot, &hits);
        let mut labels: Vec<&str> = hits.iter().map(|h| h.label.as_str()).collect();
        labels.dedup();
        println!("{label}");
        println!("  hits: {}", if labels.is_empty() { "none".into() } else { labels.join(", ") });
        println!("  simulator evidence: {}", detect_simulator(&snapshot, &hits));
        println!("  category: {}\n", category.display());
    }

    // URDF names feed robot-type extraction too.
    let baxter = RosSnapshot::synthetic(&["/camera/image_raw"], &[])
        .with_urdf(r#"<robot name="baxter"><link name="torso"/></robot>"#)
        .with_version("1.11.21");
    println!(
        "URDF robot name: types {:?}, distro {}",
        extract_robot_types(&baxter, &book),
        map_distro(baxter.ros_comm_version.as_deref().unwrap())
    );
}
