//! Cross-scan host identity: machine hostnames mined from roslaunch
//! parameters first, equal-IP-plus-topic-similarity as the fallback, then
//! transitive clustering for persistence reporting.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::classify::HostCategory;
use crate::store::{HostReport, ScanRecord};

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.5;

/// A physical machine name recovered from a roslaunch URI parameter such as
/// `/roslaunch/uris/host_potato__46636`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MachineName {
    pub name: String,
    pub source_param: String,
}

/// Parse machine names out of parameter names. The hostname ends at the
/// final `__<digits>` suffix, so hostnames containing underscores survive.
pub fn extract_machine_names(param_names: &[String]) -> BTreeSet<MachineName> {
    let mut names = BTreeSet::new();
    for param in param_names {
        let Some(rest) = param.strip_prefix("/roslaunch/uris/host_") else {
            continue;
        };
        let Some(split) = rest.rfind("__") else {
            continue;
        };
        let (name, port) = rest.split_at(split);
        let port = &port[2..];
        if name.is_empty() || port.is_empty() || !port.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        names.insert(MachineName {
            name: name.to_string(),
            source_param: param.clone(),
        });
    }
    names
}

/// Jaccard index of two topic-name sets; defined as 0 when both are empty.
pub fn topic_similarity(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let intersection = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    intersection / union
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchBasis {
    Hostname,
    IpSimilarity,
}

/// A reference to one host record inside one scan.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HostRef {
    pub scan_id: String,
    pub record_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchResult {
    pub left: HostRef,
    pub right: HostRef,
    pub basis: MatchBasis,
    pub similarity: Option<f64>,
}

fn machine_names_of(report: &HostReport) -> BTreeSet<String> {
    report
        .snapshot
        .as_ref()
        .map(|s| {
            extract_machine_names(s.params())
                .into_iter()
                .map(|m| m.name)
                .collect()
        })
        .unwrap_or_default()
}

fn topics_of(report: &HostReport) -> BTreeSet<String> {
    report
        .snapshot
        .as_ref()
        .map(|s| s.topics())
        .unwrap_or_default()
}

/// Hostnames that appear on more than one record within a single scan. These
/// are ambiguous (cloned images or one host on several IPs) and are flagged,
/// never merged.
pub fn duplicate_machine_names(scan: &ScanRecord) -> BTreeMap<String, Vec<String>> {
    let mut owners: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for report in &scan.host_reports {
        for name in machine_names_of(report) {
            owners.entry(name).or_default().push(report.record_id());
        }
    }
    owners.retain(|_, records| records.len() > 1);
    owners
}

/// Match host records across two scans.
///
/// Hostname-based matches are computed first and take precedence; leftover
/// records pair up when they share an IP and their topic similarity clears
/// `threshold`. Each record joins at most one match; ties break toward the
/// higher similarity, then the lexically smaller record id pair.
pub fn match_hosts(scan_a: &ScanRecord, scan_b: &ScanRecord, threshold: f64) -> Vec<MatchResult> {
    let candidates_a: Vec<&HostReport> = scan_a
        .host_reports
        .iter()
        .filter(|r| r.snapshot.is_some())
        .collect();
    let candidates_b: Vec<&HostReport> = scan_b
        .host_reports
        .iter()
        .filter(|r| r.snapshot.is_some())
        .collect();

    let ambiguous_a: BTreeSet<String> = duplicate_machine_names(scan_a).into_keys().collect();
    let ambiguous_b: BTreeSet<String> = duplicate_machine_names(scan_b).into_keys().collect();

    let href = |scan: &ScanRecord, report: &HostReport| HostRef {
        scan_id: scan.meta.scan_id.clone(),
        record_id: report.record_id(),
    };

    // Hostname phase: every unambiguous shared name is a candidate pair.
    let mut candidate_pairs: Vec<(f64, String, String, usize, usize)> = Vec::new();
    for (ia, a) in candidates_a.iter().enumerate() {
        let names_a = machine_names_of(a);
        if names_a.is_empty() {
            continue;
        }
        for (ib, b) in candidates_b.iter().enumerate() {
            let names_b = machine_names_of(b);
            let shared = names_a
                .intersection(&names_b)
                .any(|n| !ambiguous_a.contains(n) && !ambiguous_b.contains(n));
            if shared {
                let similarity = topic_similarity(&topics_of(a), &topics_of(b));
                candidate_pairs.push((similarity, a.record_id(), b.record_id(), ia, ib));
            }
        }
    }
    candidate_pairs.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| x.1.cmp(&y.1))
            .then_with(|| x.2.cmp(&y.2))
    });

    let mut used_a = vec![false; candidates_a.len()];
    let mut used_b = vec![false; candidates_b.len()];
    let mut matches = Vec::new();
    for (similarity, _, _, ia, ib) in candidate_pairs {
        if used_a[ia] || used_b[ib] {
            continue;
        }
        used_a[ia] = true;
        used_b[ib] = true;
        matches.push(MatchResult {
            left: href(scan_a, candidates_a[ia]),
            right: href(scan_b, candidates_b[ib]),
            basis: MatchBasis::Hostname,
            similarity: Some(similarity),
        });
    }

    // IP phase for whatever is left. IPs are unique within a scan, so the
    // pairing is unambiguous.
    let mut by_ip_b: BTreeMap<String, usize> = BTreeMap::new();
    for (ib, b) in candidates_b.iter().enumerate() {
        if !used_b[ib] {
            by_ip_b.insert(b.record_id(), ib);
        }
    }
    for (ia, a) in candidates_a.iter().enumerate() {
        if used_a[ia] {
            continue;
        }
        let Some(&ib) = by_ip_b.get(&a.record_id()) else {
            continue;
        };
        if used_b[ib] {
            continue;
        }
        let similarity = topic_similarity(&topics_of(a), &topics_of(&candidates_b[ib]));
        if similarity >= threshold {
            used_a[ia] = true;
            used_b[ib] = true;
            matches.push(MatchResult {
                left: href(scan_a, a),
                right: href(scan_b, candidates_b[ib]),
                basis: MatchBasis::IpSimilarity,
                similarity: Some(similarity),
            });
        }
    }

    matches.sort_by(|x, y| {
        x.left
            .record_id
            .cmp(&y.left.record_id)
            .then_with(|| x.right.record_id.cmp(&y.right.record_id))
    });
    matches
}

/// One identity across scans: the records matched together plus what they
/// looked like each time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityCluster {
    pub members: Vec<HostRef>,
    /// Number of distinct scans this identity was seen in.
    pub presence: usize,
    /// (scan_id, category) per sighting, in scan order.
    pub category_history: Vec<(String, Option<HostCategory>)>,
    pub category_changed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PersistenceReport {
    pub clusters: Vec<IdentityCluster>,
    /// presence count -> number of identities seen in exactly that many scans.
    pub presence_counts: BTreeMap<usize, usize>,
    /// Machine names that appeared on multiple records within one scan:
    /// (scan_id, machine name, record ids).
    pub ambiguities: Vec<(String, String, Vec<String>)>,
}

/// Cluster pairwise matches across all scans transitively and count
/// per-cluster presence and category churn.
pub fn persistence_report(scans: &[ScanRecord], threshold: f64) -> PersistenceReport {
    // Node space: every snapshot-bearing record of every scan.
    let mut nodes: Vec<(usize, String)> = Vec::new();
    let mut node_index: BTreeMap<(usize, String), usize> = BTreeMap::new();
    let mut categories: Vec<Option<HostCategory>> = Vec::new();
    for (si, scan) in scans.iter().enumerate() {
        for report in &scan.host_reports {
            if report.snapshot.is_none() {
                continue;
            }
            let key = (si, report.record_id());
            node_index.insert(key.clone(), nodes.len());
            nodes.push(key);
            categories.push(report.category);
        }
    }

    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }

    for i in 0..scans.len() {
        for j in i + 1..scans.len() {
            for m in match_hosts(&scans[i], &scans[j], threshold) {
                let a = node_index[&(i, m.left.record_id.clone())];
                let b = node_index[&(j, m.right.record_id.clone())];
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for node in 0..nodes.len() {
        let root = find(&mut parent, node);
        groups.entry(root).or_default().push(node);
    }

    let mut clusters = Vec::new();
    for (_, members) in groups {
        let mut refs = Vec::new();
        let mut seen_scans = BTreeSet::new();
        let mut history = Vec::new();
        for &node in &members {
            let (si, record_id) = &nodes[node];
            seen_scans.insert(*si);
            refs.push(HostRef {
                scan_id: scans[*si].meta.scan_id.clone(),
                record_id: record_id.clone(),
            });
            history.push((*si, scans[*si].meta.scan_id.clone(), categories[node]));
        }
        history.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let category_history: Vec<(String, Option<HostCategory>)> = history
            .into_iter()
            .map(|(_, scan_id, category)| (scan_id, category))
            .collect();
        let distinct: BTreeSet<_> = category_history.iter().filter_map(|(_, c)| *c).collect();
        refs.sort();
        clusters.push(IdentityCluster {
            members: refs,
            presence: seen_scans.len(),
            category_changed: distinct.len() > 1,
            category_history,
        });
    }
    clusters.sort_by(|a, b| a.members.cmp(&b.members));

    let mut presence_counts = BTreeMap::new();
    for cluster in &clusters {
        *presence_counts.entry(cluster.presence).or_insert(0) += 1;
    }

    let mut ambiguities = Vec::new();
    for scan in scans {
        for (name, records) in duplicate_machine_names(scan) {
            ambiguities.push((scan.meta.scan_id.clone(), name, records));
        }
    }

    PersistenceReport {
        clusters,
        presence_counts,
        ambiguities,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::RosSnapshot;
    use crate::store::{HostReport, StageOutcomes};
    use proptest::prelude::*;
    use std::net::SocketAddr;

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    pub(crate) fn report_with(
        ip: [u8; 4],
        topics: &[&str],
        params: &[&str],
        category: HostCategory,
    ) -> HostReport {
        let mut snapshot = RosSnapshot::synthetic(topics, params);
        snapshot.endpoint = SocketAddr::from((ip, 11311));
        HostReport {
            target: SocketAddr::from((ip, 11311)),
            stage_reached: 4,
            outcomes: StageOutcomes::default(),
            snapshot: Some(snapshot),
            hits: Vec::new(),
            category: Some(category),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn potato_parameter_yields_the_machine_name() {
        let names = extract_machine_names(&strings(&["/roslaunch/uris/host_potato__46636"]));
        assert_eq!(names.len(), 1);
        let first = names.iter().next().unwrap();
        assert_eq!(first.name, "potato");
        assert_eq!(first.source_param, "/roslaunch/uris/host_potato__46636");
    }

    #[test]
    fn hostnames_with_underscores_split_at_the_final_double_underscore() {
        let names = extract_machine_names(&strings(&["/roslaunch/uris/host_lab_pc_3__40001"]));
        assert_eq!(names.iter().next().unwrap().name, "lab_pc_3");
        // Degenerate shape: digits inside the name region.
        let tricky = extract_machine_names(&strings(&["/roslaunch/uris/host_a__b__123"]));
        assert_eq!(tricky.iter().next().unwrap().name, "a__b");
    }

    #[test]
    fn ordinary_parameters_yield_nothing() {
        assert!(extract_machine_names(&strings(&["/run_id", "/rosdistro"])).is_empty());
        assert!(extract_machine_names(&strings(&["/roslaunch/uris/host_x__"])).is_empty());
        assert!(extract_machine_names(&strings(&["/roslaunch/uris/host___1"])).is_empty());
    }

    #[test]
    fn jaccard_hand_checks() {
        let set = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        let a = set(&["x", "y", "z"]);
        let b = set(&["y", "z", "w"]);
        assert!((topic_similarity(&a, &b) - 0.5).abs() < 1e-12);
        assert_eq!(topic_similarity(&a, &a), 1.0);
        assert_eq!(topic_similarity(&a, &set(&[])), 0.0);
        assert_eq!(topic_similarity(&set(&[]), &set(&[])), 0.0);
    }

    #[test]
    fn hostname_match_spans_different_ips() {
        let a = ScanRecord::synthetic(
            "scan-a",
            vec![report_with(
                [1, 2, 3, 4],
                &["/camera/image"],
                &["/roslaunch/uris/host_potato__46636"],
                HostCategory::OnlySensors,
            )],
        );
        let b = ScanRecord::synthetic(
            "scan-b",
            vec![report_with(
                [5, 6, 7, 8],
                &["/camera/image", "/tf"],
                &["/roslaunch/uris/host_potato__33221"],
                HostCategory::OnlySensors,
            )],
        );
        let matches = match_hosts(&a, &b, 0.5);
        assert_eq!(matches.len(), 1);
        assert_eq!(matches[0].basis, MatchBasis::Hostname);
        assert_eq!(matches[0].left.record_id, "1.2.3.4");
        assert_eq!(matches[0].right.record_id, "5.6.7.8");
    }

    #[test]
    fn ip_fallback_respects_the_threshold() {
        let mk = |topics: &[&str]| {
            ScanRecord::synthetic(
                "s",
                vec![report_with([9, 9, 9, 9], topics, &[], HostCategory::Unclassified)],
            )
        };
        let a = mk(&["/a", "/b", "/c", "/d", "/e", "/f", "/g", "/h", "/i"]);
        let close = mk(&["/a", "/b", "/c", "/d", "/e", "/f", "/g", "/h", "/i", "/j"]);
        let matches = match_hosts(&a, &close, 0.5);
        assert_eq!(matches.len(), 1);
        assert_eq!(matches[0].basis, MatchBasis::IpSimilarity);
        assert!(matches[0].similarity.unwrap() > 0.8);

        let far = mk(&["/q", "/r"]);
        assert!(match_hosts(&a, &far, 0.5).is_empty());
    }

    #[test]
    fn hostname_precedence_beats_ip_similarity() {
        // Same IP in both scans but the hostname points at a different record.
        let a = ScanRecord::synthetic(
            "a",
            vec![report_with(
                [1, 1, 1, 1],
                &["/x", "/y"],
                &["/roslaunch/uris/host_potato__1"],
                HostCategory::Unclassified,
            )],
        );
        let b = ScanRecord::synthetic(
            "b",
            vec![
                report_with([1, 1, 1, 1], &["/x", "/y"], &[], HostCategory::Unclassified),
                report_with(
                    [2, 2, 2, 2],
                    &["/z"],
                    &["/roslaunch/uris/host_potato__2"],
                    HostCategory::Unclassified,
                ),
            ],
        );
        let matches = match_hosts(&a, &b, 0.5);
        assert_eq!(matches.len(), 1, "{matches:?}");
        assert_eq!(matches[0].basis, MatchBasis::Hostname);
        assert_eq!(matches[0].right.record_id, "2.2.2.2");
    }

    #[test]
    fn duplicate_names_within_one_scan_are_flagged_not_merged() {
        let scan = ScanRecord::synthetic(
            "s1",
            vec![
                report_with(
                    [1, 0, 0, 1],
                    &["/a"],
                    &["/roslaunch/uris/host_clone__1"],
                    HostCategory::Unclassified,
                ),
                report_with(
                    [1, 0, 0, 2],
                    &["/b"],
                    &["/roslaunch/uris/host_clone__2"],
                    HostCategory::Unclassified,
                ),
            ],
        );
        let dupes = duplicate_machine_names(&scan);
        assert_eq!(dupes["clone"].len(), 2);

        let other = ScanRecord::synthetic(
            "s2",
            vec![report_with(
                [9, 0, 0, 1],
                &["/a"],
                &["/roslaunch/uris/host_clone__3"],
                HostCategory::Unclassified,
            )],
        );
        // Ambiguous names must not produce hostname matches.
        assert!(match_hosts(&scan, &other, 0.99).is_empty());
        let report = persistence_report(&[scan, other], 0.5);
        assert_eq!(report.ambiguities.len(), 1);
        assert_eq!(report.ambiguities[0].1, "clone");
    }

    #[test]
    fn three_scan_cluster_with_category_churn() {
        let scans = vec![
            ScanRecord::synthetic(
                "s1",
                vec![report_with(
                    [1, 2, 3, 4],
                    &["/gazebo/model_states"],
                    &["/roslaunch/uris/host_potato__1"],
                    HostCategory::SimulationOnly,
                )],
            ),
            ScanRecord::synthetic(
                "s2",
                vec![report_with(
                    [4, 3, 2, 1],
                    &["/gazebo/model_states"],
                    &["/roslaunch/uris/host_potato__9"],
                    HostCategory::SimulationOnly,
                )],
            ),
            ScanRecord::synthetic(
                "s3",
                vec![report_with(
                    [8, 8, 8, 8],
                    &["/rosout"],
                    &["/roslaunch/uris/host_potato__4"],
                    HostCategory::EmptyCore,
                )],
            ),
        ];
        let report = persistence_report(&scans, 0.5);
        assert_eq!(report.clusters.len(), 1);
        let cluster = &report.clusters[0];
        assert_eq!(cluster.presence, 3);
        assert!(cluster.category_changed);
        assert_eq!(report.presence_counts[&3], 1);
    }

    proptest! {
        #[test]
        fn jaccard_symmetry_and_bounds(
            a in proptest::collection::btree_set("[a-d]{1,3}", 0..8),
            b in proptest::collection::btree_set("[a-d]{1,3}", 0..8),
        ) {
            let ab = topic_similarity(&a, &b);
            let ba = topic_similarity(&b, &a);
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
            if !a.is_empty() && a == b {
                prop_assert_eq!(ab, 1.0);
            }
            if ab == 1.0 {
                prop_assert!(a == b && !a.is_empty());
            }
        }
    }
}
