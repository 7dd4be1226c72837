//! Summary tables and scan-to-scan diffs: the category distribution, the
//! distro histogram, and the per-label search results split into physical
//! versus simulated columns.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::classify::{detect_simulator, map_distro, HostCategory, RuleKind};
use crate::identity::MatchResult;
use crate::store::ScanRecord;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchRow {
    pub kind: RuleKind,
    pub label: String,
    /// Hosts with this label and no simulator evidence.
    pub physical: usize,
    /// Hosts with this label on simulator-flagged instances.
    pub simulated: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryTables {
    pub scan_id: String,
    /// Hosts that yielded a snapshot — the ROS instances of this scan.
    pub total_instances: usize,
    /// All seven categories in report order, zero counts included.
    pub category_counts: Vec<(HostCategory, usize)>,
    /// Distro name -> instance count, from ros_comm versions.
    pub version_counts: BTreeMap<String, usize>,
    /// Hosts per taxonomy label; a host counts once per label no matter how
    /// many of its names matched.
    pub search_rows: Vec<SearchRow>,
}

/// Pure function of a loaded record: same input, same tables.
pub fn summarize(scan: &ScanRecord) -> SummaryTables {
    let mut category_counts: BTreeMap<HostCategory, usize> = BTreeMap::new();
    let mut version_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_label: BTreeMap<(RuleKind, String), (usize, usize)> = BTreeMap::new();
    let mut total_instances = 0usize;

    for report in &scan.host_reports {
        let Some(snapshot) = &report.snapshot else {
            continue;
        };
        total_instances += 1;
        if let Some(category) = report.category {
            *category_counts.entry(category).or_insert(0) += 1;
        }
        if let Some(version) = &snapshot.ros_comm_version {
            *version_counts.entry(map_distro(version)).or_insert(0) += 1;
        }
        let simulated = detect_simulator(snapshot, &report.hits);
        let labels: BTreeSet<(RuleKind, String)> = report
            .hits
            .iter()
            .map(|h| (h.kind, h.label.clone()))
            .collect();
        for key in labels {
            let entry = per_label.entry(key).or_insert((0, 0));
            if simulated {
                entry.1 += 1;
            } else {
                entry.0 += 1;
            }
        }
    }

    let category_counts = HostCategory::ALL
        .iter()
        .map(|c| (*c, category_counts.get(c).copied().unwrap_or(0)))
        .collect();

    let mut search_rows = Vec::new();
    for kind in RuleKind::ALL {
        for ((row_kind, label), (physical, simulated)) in &per_label {
            if *row_kind == kind {
                search_rows.push(SearchRow {
                    kind,
                    label: label.clone(),
                    physical: *physical,
                    simulated: *simulated,
                });
            }
        }
    }

    SummaryTables {
        scan_id: scan.meta.scan_id.clone(),
        total_instances,
        category_counts,
        version_counts,
        search_rows,
    }
}

pub fn render_summary(tables: &SummaryTables) -> String {
    let mut out = String::new();
    out.push_str(&format!("Scan summary for {}\n\n", tables.scan_id));

    out.push_str("Category                    Hosts\n");
    out.push_str("--------------------------- -----\n");
    for (category, count) in &tables.category_counts {
        out.push_str(&format!("{:<27} {:>5}\n", category.display(), count));
    }
    out.push_str(&format!(
        "{:<27} {:>5}\n",
        "Total ROS instances", tables.total_instances
    ));

    out.push_str("\nIdentified ROS versions\n");
    out.push_str("Distro                      Hosts\n");
    out.push_str("--------------------------- -----\n");
    if tables.version_counts.is_empty() {
        out.push_str("(no version data)\n");
    }
    for (distro, count) in &tables.version_counts {
        out.push_str(&format!("{distro:<27} {count:>5}\n"));
    }

    out.push_str("\nTopic and parameter search results\n");
    out.push_str(&format!(
        "{:<12} {:<28} {:>9} {:>9}\n",
        "Kind", "Label", "Phys. HW", "Sim./Log"
    ));
    out.push_str(&format!("{:-<12} {:-<28} {:->9} {:->9}\n", "", "", "", ""));
    for row in &tables.search_rows {
        out.push_str(&format!(
            "{:<12} {:<28} {:>9} {:>9}\n",
            row.kind.display(),
            row.label,
            row.physical,
            row.simulated
        ));
    }
    out
}

/// Partition of two scans' hosts by the identity matching between them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffReport {
    pub scan_a: String,
    pub scan_b: String,
    /// (record in A, record in B, category in A, category in B).
    pub persisted: Vec<(String, String, Option<HostCategory>, Option<HostCategory>)>,
    /// Persisted hosts whose category changed between the scans.
    pub category_changed: Vec<(String, String, HostCategory, HostCategory)>,
    /// Records of A with no match in B.
    pub disappeared: Vec<String>,
    /// Records of B with no match in A.
    pub appeared: Vec<String>,
}

pub fn diff(scan_a: &ScanRecord, scan_b: &ScanRecord, matches: &[MatchResult]) -> DiffReport {
    let category_of = |scan: &ScanRecord, record_id: &str| {
        scan.host_reports
            .iter()
            .find(|r| r.record_id() == record_id)
            .and_then(|r| r.category)
    };

    let mut matched_a = BTreeSet::new();
    let mut matched_b = BTreeSet::new();
    let mut persisted = Vec::new();
    let mut category_changed = Vec::new();
    for m in matches {
        matched_a.insert(m.left.record_id.clone());
        matched_b.insert(m.right.record_id.clone());
        let cat_a = category_of(scan_a, &m.left.record_id);
        let cat_b = category_of(scan_b, &m.right.record_id);
        persisted.push((
            m.left.record_id.clone(),
            m.right.record_id.clone(),
            cat_a,
            cat_b,
        ));
        if let (Some(a), Some(b)) = (cat_a, cat_b) {
            if a != b {
                category_changed.push((m.left.record_id.clone(), m.right.record_id.clone(), a, b));
            }
        }
    }

    let instances = |scan: &ScanRecord, matched: &BTreeSet<String>| {
        scan.host_reports
            .iter()
            .filter(|r| r.snapshot.is_some() && !matched.contains(&r.record_id()))
            .map(|r| r.record_id())
            .collect::<Vec<_>>()
    };

    DiffReport {
        scan_a: scan_a.meta.scan_id.clone(),
        scan_b: scan_b.meta.scan_id.clone(),
        disappeared: instances(scan_a, &matched_a),
        appeared: instances(scan_b, &matched_b),
        persisted,
        category_changed,
    }
}

pub fn render_diff(report: &DiffReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Diff {} -> {}\n  persisted: {}\n  appeared: {}\n  disappeared: {}\n  category changed: {}\n",
        report.scan_a,
        report.scan_b,
        report.persisted.len(),
        report.appeared.len(),
        report.disappeared.len(),
        report.category_changed.len(),
    ));
    for (a, b, cat_a, cat_b) in &report.category_changed {
        out.push_str(&format!(
            "    {a} -> {b}: {} -> {}\n",
            cat_a.display(),
            cat_b.display()
        ));
    }
    if !report.appeared.is_empty() {
        out.push_str(&format!("  new: {}\n", report.appeared.join(", ")));
    }
    if !report.disappeared.is_empty() {
        out.push_str(&format!("  gone: {}\n", report.disappeared.join(", ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{categorize, match_rules, Rulebook};
    use crate::identity::match_hosts;
    use crate::snapshot::RosSnapshot;
    use crate::store::{HostReport, StageOutcomes};
    use std::net::SocketAddr;

    fn classified_report(ip: [u8; 4], topics: &[&str], params: &[&str]) -> HostReport {
        let book = Rulebook::shipped();
        let mut snapshot = RosSnapshot::synthetic(topics, params);
        snapshot.endpoint = SocketAddr::from((ip, 11311));
        let hits = match_rules(&snapshot, &book);
        let category = categorize(&snapshot, &hits);
        HostReport {
            target: SocketAddr::from((ip, 11311)),
            stage_reached: 4,
            outcomes: StageOutcomes::default(),
            snapshot: Some(snapshot),
            hits,
            category: Some(category),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn empty_scan_summarizes_to_zero_tables() {
        let tables = summarize(&ScanRecord::synthetic("empty", Vec::new()));
        assert_eq!(tables.total_instances, 0);
        assert!(tables.category_counts.iter().all(|(_, n)| *n == 0));
        assert!(tables.version_counts.is_empty());
        assert!(tables.search_rows.is_empty());
    }

    #[test]
    fn category_counts_sum_to_total_instances() {
        let scan = ScanRecord::synthetic(
            "s",
            vec![
                classified_report([10, 0, 0, 1], &["/camera/image_raw", "/cmd_vel"], &[]),
                classified_report([10, 0, 0, 2], &["/gazebo/model_states"], &[]),
                classified_report([10, 0, 0, 3], &["/zzz_widget_alpha"], &[]),
            ],
        );
        let tables = summarize(&scan);
        let sum: usize = tables.category_counts.iter().map(|(_, n)| n).sum();
        assert_eq!(sum, tables.total_instances);
        assert_eq!(tables.total_instances, 3);
    }

    #[test]
    fn sim_host_hits_land_in_the_simulated_column_once_per_label() {
        let scan = ScanRecord::synthetic(
            "s",
            vec![classified_report(
                [10, 0, 0, 1],
                &[
                    "/gazebo/model_states",
                    "/camera/depth_registered/points",
                    "/camera/image_raw",
                ],
                &[],
            )],
        );
        let tables = summarize(&scan);
        let camera = tables
            .search_rows
            .iter()
            .find(|r| r.label == "Camera")
            .unwrap();
        assert_eq!((camera.physical, camera.simulated), (0, 1));
        let depth = tables
            .search_rows
            .iter()
            .find(|r| r.label == "Camera + Depth")
            .unwrap();
        assert_eq!((depth.physical, depth.simulated), (0, 1));
    }

    #[test]
    fn version_histogram_uses_distro_names() {
        let mut report = classified_report([10, 0, 0, 1], &["/camera/x"], &[]);
        report.snapshot = report.snapshot.map(|s| s.with_version("1.12.14"));
        let tables = summarize(&ScanRecord::synthetic("s", vec![report]));
        assert_eq!(tables.version_counts["Kinetic"], 1);
    }

    #[test]
    fn summarize_is_deterministic() {
        let scan = ScanRecord::synthetic(
            "s",
            vec![classified_report([10, 0, 0, 1], &["/camera/image", "/tf"], &[])],
        );
        let a = serde_json::to_string(&summarize(&scan)).unwrap();
        let b = serde_json::to_string(&summarize(&scan)).unwrap();
        assert_eq!(a, b);
        assert!(render_summary(&summarize(&scan)).contains("Camera"));
    }

    #[test]
    fn diff_partitions_identities() {
        let a = ScanRecord::synthetic(
            "a",
            vec![
                classified_report([1, 1, 1, 1], &["/rosout"], &[]),
                classified_report([3, 3, 3, 3], &["/gone_host_topic_zzz"], &[]),
            ],
        );
        let b = ScanRecord::synthetic(
            "b",
            vec![
                classified_report([1, 1, 1, 1], &["/rosout"], &[]),
                classified_report([4, 4, 4, 4], &["/new_host_topic_zzz"], &[]),
            ],
        );
        let matches = match_hosts(&a, &b, 0.5);
        let report = diff(&a, &b, &matches);
        assert_eq!(report.persisted.len(), 1);
        assert_eq!(report.disappeared, vec!["3.3.3.3".to_string()]);
        assert_eq!(report.appeared, vec!["4.4.4.4".to_string()]);
        assert!(report.category_changed.is_empty());
    }

    #[test]
    fn identical_scans_diff_to_all_persisted() {
        let mk = || {
            ScanRecord::synthetic(
                "x",
                vec![classified_report([1, 1, 1, 1], &["/camera/image"], &[])],
            )
        };
        let (a, b) = (mk(), mk());
        let matches = match_hosts(&a, &b, 0.5);
        let report = diff(&a, &b, &matches);
        assert_eq!(report.persisted.len(), 1);
        assert!(report.appeared.is_empty() && report.disappeared.is_empty());
    }

    #[test]
    fn category_change_shows_up_in_diff() {
        let a = ScanRecord::synthetic(
            "a",
            vec![classified_report(
                [1, 1, 1, 1],
                &["/rosout", "/rosout_agg"],
                &["/roslaunch/uris/host_potato__1"],
            )],
        );
        let b = ScanRecord::synthetic(
            "b",
            vec![classified_report(
                [2, 2, 2, 2],
                &["/gazebo/model_states"],
                &["/roslaunch/uris/host_potato__2"],
            )],
        );
        let matches = match_hosts(&a, &b, 0.5);
        let report = diff(&a, &b, &matches);
        assert_eq!(report.category_changed.len(), 1);
        let (_, _, from, to) = &report.category_changed[0];
        assert_eq!(*from, HostCategory::EmptyCore);
        assert_eq!(*to, HostCategory::SimulationOnly);
    }
}
