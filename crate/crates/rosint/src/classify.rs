//! Rule-driven classification of snapshots: taxonomy labels, the
//! physical-vs-simulated split, a mutually exclusive host category, and the
//! ros_comm-version-to-distro mapping.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recfile::{self, RecError, Record};
use crate::snapshot::RosSnapshot;

const DEFAULT_RULEBOOK: &str = include_str!("../data/default.rules");

/// Topics and services a bare ROS core exposes with no application nodes.
pub const BASE_TOPICS: &[&str] = &["/rosout", "/rosout_agg"];
pub const BASE_SERVICES: &[&str] = &["/rosout/get_loggers", "/rosout/set_logger_level"];

#[derive(Debug, Error)]
pub enum RuleError {
    #[error(transparent)]
    File(#[from] RecError),
    #[error("line {line_no}: duplicate rule id {id:?}")]
    DuplicateId { line_no: usize, id: String },
    #[error("line {line_no}: empty pattern")]
    EmptyPattern { line_no: usize },
    #[error("line {line_no}: {field} has unknown value {value:?}")]
    UnknownValue {
        line_no: usize,
        field: &'static str,
        value: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    Sensor,
    Actuator,
    Simulator,
    RobotType,
    Library,
}

impl RuleKind {
    /// Report-table ordering.
    pub const ALL: [RuleKind; 5] = [
        RuleKind::Sensor,
        RuleKind::Actuator,
        RuleKind::Simulator,
        RuleKind::RobotType,
        RuleKind::Library,
    ];

    pub fn display(&self) -> &'static str {
        match self {
            RuleKind::Sensor => "Sensors",
            RuleKind::Actuator => "Actuators",
            RuleKind::Simulator => "Simulators",
            RuleKind::RobotType => "Robot Types",
            RuleKind::Library => "Libraries",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchOn {
    Topic,
    Parameter,
    Service,
    UrdfName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Paper,
    Inferred,
}

/// `token:` patterns match a whole path segment; everything else is a
/// case-insensitive substring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    pub text: String,
    pub whole_token: bool,
}

impl Pattern {
    fn parse(raw: &str) -> Self {
        match raw.strip_prefix("token:") {
            Some(token) => Pattern {
                text: token.to_ascii_lowercase(),
                whole_token: true,
            },
            None => Pattern {
                text: raw.to_ascii_lowercase(),
                whole_token: false,
            },
        }
    }

    pub fn matches(&self, name: &str) -> bool {
        let name = name.to_ascii_lowercase();
        if self.whole_token {
            name.split('/').any(|segment| segment == self.text)
        } else {
            name.contains(&self.text)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub kind: RuleKind,
    pub label: String,
    pub match_on: MatchOn,
    pub pattern: Pattern,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct Rulebook {
    rules: Vec<Rule>,
}

impl Rulebook {
    /// The rulebook embedded in the binary.
    pub fn shipped() -> Self {
        Self::parse(DEFAULT_RULEBOOK).expect("embedded rulebook is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self, RuleError> {
        let records = recfile::parse_file(path)?;
        Self::from_records(&records)
    }

    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let records = recfile::parse_records(text)?;
        Self::from_records(&records)
    }

    fn from_records(records: &[Record]) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        let mut seen = BTreeSet::new();
        for record in records {
            if record.kind != "rule" {
                return Err(RecError::UnknownKind {
                    line_no: record.line_no,
                    kind: record.kind.clone(),
                }
                .into());
            }
            let line_no = record.line_no;
            let id = record.require("id")?.to_string();
            if !seen.insert(id.clone()) {
                return Err(RuleError::DuplicateId { line_no, id });
            }
            let kind = match record.require("kind")? {
                "sensor" => RuleKind::Sensor,
                "actuator" => RuleKind::Actuator,
                "simulator" => RuleKind::Simulator,
                "robot-type" => RuleKind::RobotType,
                "library" => RuleKind::Library,
                other => {
                    return Err(RuleError::UnknownValue {
                        line_no,
                        field: "kind",
                        value: other.to_string(),
                    })
                }
            };
            let match_on = match record.require("match_on")? {
                "topic" => MatchOn::Topic,
                "parameter" => MatchOn::Parameter,
                "service" => MatchOn::Service,
                "urdf-name" => MatchOn::UrdfName,
                other => {
                    return Err(RuleError::UnknownValue {
                        line_no,
                        field: "match_on",
                        value: other.to_string(),
                    })
                }
            };
            let provenance = match record.first("provenance").unwrap_or("inferred") {
                "paper" => Provenance::Paper,
                "inferred" => Provenance::Inferred,
                other => {
                    return Err(RuleError::UnknownValue {
                        line_no,
                        field: "provenance",
                        value: other.to_string(),
                    })
                }
            };
            let raw_pattern = record.require("pattern")?;
            if raw_pattern.is_empty() || raw_pattern == "token:" {
                return Err(RuleError::EmptyPattern { line_no });
            }
            rules.push(Rule {
                id,
                kind,
                label: record.require("label")?.to_string(),
                match_on,
                pattern: Pattern::parse(raw_pattern),
                provenance,
            });
        }
        Ok(Rulebook { rules })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// One rule firing on one name in the snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureHit {
    pub rule_id: String,
    pub label: String,
    pub kind: RuleKind,
    pub matched_name: String,
}

/// The mutually exclusive per-host category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HostCategory {
    IdentifiedRobot,
    SimulationOnly,
    EmptyCore,
    OnlySensors,
    OnlyActuators,
    OnlyIdentifiedServices,
    Unclassified,
}

impl HostCategory {
    /// Summary-table ordering.
    pub const ALL: [HostCategory; 7] = [
        HostCategory::IdentifiedRobot,
        HostCategory::SimulationOnly,
        HostCategory::EmptyCore,
        HostCategory::OnlySensors,
        HostCategory::OnlyActuators,
        HostCategory::OnlyIdentifiedServices,
        HostCategory::Unclassified,
    ];

    pub fn display(&self) -> &'static str {
        match self {
            HostCategory::IdentifiedRobot => "Identified robots",
            HostCategory::SimulationOnly => "Simulation only",
            HostCategory::EmptyCore => "Empty ROS cores",
            HostCategory::OnlySensors => "Only sensors",
            HostCategory::OnlyActuators => "Only actuators",
            HostCategory::OnlyIdentifiedServices => "Only identified services",
            HostCategory::Unclassified => "Unclassified",
        }
    }
}

/// Robot name attribute and rough element counts of a URDF document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UrdfSummary {
    pub robot_name: Option<String>,
    pub link_count: usize,
    pub joint_count: usize,
}

/// Pull the robot name and link/joint counts out of a URDF. Full kinematics
/// are irrelevant here.
pub fn parse_urdf_summary(urdf: &str) -> UrdfSummary {
    use quick_xml::events::Event;
    let mut reader = quick_xml::Reader::from_str(urdf);
    let mut summary = UrdfSummary::default();
    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) | Ok(Event::Empty(e)) => {
                let name = e.name();
                match name.as_ref() {
                    b"robot" if summary.robot_name.is_none() => {
                        for attr in e.attributes().flatten() {
                            if attr.key.as_ref() == b"name" {
                                if let Ok(value) = attr.unescape_value() {
                                    summary.robot_name = Some(value.into_owned());
                                }
                            }
                        }
                    }
                    b"link" => summary.link_count += 1,
                    b"joint" => summary.joint_count += 1,
                    _ => {}
                }
            }
            Ok(Event::Eof) | Err(_) => break,
            _ => {}
        }
    }
    summary
}

/// Run every rule against every applicable name. Output order is
/// deterministic: rulebook order, then matched name.
pub fn match_rules(snapshot: &RosSnapshot, rulebook: &Rulebook) -> Vec<FeatureHit> {
    let topics = snapshot.topics();
    let services = snapshot.services();
    let params = snapshot.params();
    let urdf_name = snapshot
        .urdf_xml
        .as_deref()
        .and_then(|u| parse_urdf_summary(u).robot_name);

    let mut hits = Vec::new();
    for rule in rulebook.rules() {
        let matched: Vec<&str> = match rule.match_on {
            MatchOn::Topic => topics
                .iter()
                .filter(|t| rule.pattern.matches(t))
                .map(String::as_str)
                .collect(),
            MatchOn::Service => services
                .iter()
                .filter(|s| rule.pattern.matches(s))
                .map(String::as_str)
                .collect(),
            MatchOn::Parameter => params
                .iter()
                .filter(|p| rule.pattern.matches(p))
                .map(String::as_str)
                .collect(),
            MatchOn::UrdfName => urdf_name
                .as_deref()
                .filter(|n| rule.pattern.matches(n))
                .into_iter()
                .collect(),
        };
        for name in matched {
            hits.push(FeatureHit {
                rule_id: rule.id.clone(),
                label: rule.label.clone(),
                kind: rule.kind,
                matched_name: name.to_string(),
            });
        }
    }
    hits
}

/// Simulator evidence: any simulator-kind hit, or a parameter name carrying
/// use_sim_time or the whole token "fake". The parameter check is applied
/// even under custom rulebooks that dropped those rules.
pub fn detect_simulator(snapshot: &RosSnapshot, hits: &[FeatureHit]) -> bool {
    if hits.iter().any(|h| h.kind == RuleKind::Simulator) {
        return true;
    }
    snapshot.params().iter().any(|p| {
        let lower = p.to_ascii_lowercase();
        lower.contains("use_sim_time") || lower.split('/').any(|segment| segment == "fake")
    })
}

fn is_empty_core(snapshot: &RosSnapshot) -> bool {
    let Some(state) = &snapshot.system_state else {
        return false;
    };
    state
        .topic_names()
        .iter()
        .all(|t| BASE_TOPICS.contains(&t.as_str()))
        && state
            .service_names()
            .iter()
            .all(|s| BASE_SERVICES.contains(&s.as_str()))
}

/// Fold hits into the single mutually-exclusive category.
///
/// Precedence: empty core, then simulator, then robot (sensor + actuator),
/// then the single-evidence buckets.
pub fn categorize(snapshot: &RosSnapshot, hits: &[FeatureHit]) -> HostCategory {
    if is_empty_core(snapshot) {
        return HostCategory::EmptyCore;
    }
    if detect_simulator(snapshot, hits) {
        return HostCategory::SimulationOnly;
    }
    let sensors = hits.iter().any(|h| h.kind == RuleKind::Sensor);
    let actuators = hits.iter().any(|h| h.kind == RuleKind::Actuator);
    match (sensors, actuators) {
        (true, true) => HostCategory::IdentifiedRobot,
        (true, false) => HostCategory::OnlySensors,
        (false, true) => HostCategory::OnlyActuators,
        (false, false) if !hits.is_empty() => HostCategory::OnlyIdentifiedServices,
        _ => HostCategory::Unclassified,
    }
}

/// ros_comm version prefix to distro name.
pub fn map_distro(ros_comm_version: &str) -> String {
    let version = ros_comm_version.trim();
    for (prefix, distro) in [
        ("1.10.", "Hydro"),
        ("1.11.", "Indigo/Jade"),
        ("1.12.", "Kinetic"),
        ("1.13.", "Lunar"),
    ] {
        if version.starts_with(prefix) {
            return distro.to_string();
        }
    }
    format!("unknown({version})")
}

/// Robot-type labels for a snapshot, deduplicated in rulebook order.
pub fn extract_robot_types(snapshot: &RosSnapshot, rulebook: &Rulebook) -> Vec<String> {
    let mut labels = Vec::new();
    for hit in match_rules(snapshot, rulebook) {
        if hit.kind == RuleKind::RobotType && !labels.contains(&hit.label) {
            labels.push(hit.label);
        }
    }
    labels
}
