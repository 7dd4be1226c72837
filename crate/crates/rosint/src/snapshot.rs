//! The passive read of one ROS instance, shared by both transports.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::xmlrpc::XmlRpcValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transport {
    #[serde(rename = "xmlrpc-master")]
    XmlRpcMaster,
    #[serde(rename = "rosbridge")]
    Rosbridge,
}

/// Publishers, subscribers, and services as reported by `getSystemState`.
/// Rosbridge snapshots populate topic keys with empty node lists, since node
/// attribution is unavailable over that transport.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemState {
    pub publishers: BTreeMap<String, Vec<String>>,
    pub subscribers: BTreeMap<String, Vec<String>>,
    pub services: BTreeMap<String, Vec<String>>,
}

impl SystemState {
    pub fn topic_names(&self) -> BTreeSet<String> {
        self.publishers
            .keys()
            .chain(self.subscribers.keys())
            .cloned()
            .collect()
    }

    pub fn service_names(&self) -> BTreeSet<String> {
        self.services.keys().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosSnapshot {
    pub endpoint: SocketAddr,
    pub captured_at: DateTime<Utc>,
    pub transport: Transport,
    pub system_state: Option<SystemState>,
    pub param_names: Option<Vec<String>>,
    /// ros_comm version string, e.g. "1.12.14".
    pub ros_comm_version: Option<String>,
    /// Distro name as reported by the instance itself, e.g. "kinetic".
    pub distro_hint: Option<String>,
    /// robot_description parameter, stored verbatim.
    pub urdf_xml: Option<String>,
    /// Values fetched for the parameter whitelist only; nothing outside it
    /// is ever requested or stored.
    pub raw_params_fetched: BTreeMap<String, XmlRpcValue>,
    pub warnings: Vec<String>,
    /// Structural caveats of the transport, e.g. missing node attribution.
    pub limitations: Vec<String>,
}

impl RosSnapshot {
    pub fn new(endpoint: SocketAddr, transport: Transport) -> Self {
        RosSnapshot {
            endpoint,
            captured_at: Utc::now(),
            transport,
            system_state: None,
            param_names: None,
            ros_comm_version: None,
            distro_hint: None,
            urdf_xml: None,
            raw_params_fetched: BTreeMap::new(),
            warnings: Vec::new(),
            limitations: Vec::new(),
        }
    }

    /// Hand-built snapshot over topic and parameter names; the workhorse of
    /// classifier tests and examples.
    pub fn synthetic(topics: &[&str], params: &[&str]) -> Self {
        let mut state = SystemState::default();
        for topic in topics {
            state
                .publishers
                .insert(topic.to_string(), vec!["/node".to_string()]);
        }
        let mut snapshot = RosSnapshot::new(
            SocketAddr::from(([127, 0, 0, 1], 11311)),
            Transport::XmlRpcMaster,
        );
        snapshot.system_state = Some(state);
        snapshot.param_names = Some(params.iter().map(|p| p.to_string()).collect());
        snapshot
    }

    pub fn with_services(mut self, services: &[&str]) -> Self {
        let state = self.system_state.get_or_insert_with(SystemState::default);
        for service in services {
            state
                .services
                .insert(service.to_string(), vec!["/node".to_string()]);
        }
        self
    }

    pub fn with_urdf(mut self, urdf: &str) -> Self {
        self.urdf_xml = Some(urdf.to_string());
        self
    }

    pub fn with_version(mut self, version: &str) -> Self {
        self.ros_comm_version = Some(version.to_string());
        self
    }

    pub fn topics(&self) -> BTreeSet<String> {
        self.system_state
            .as_ref()
            .map(SystemState::topic_names)
            .unwrap_or_default()
    }

    pub fn services(&self) -> BTreeSet<String> {
        self.system_state
            .as_ref()
            .map(SystemState::service_names)
            .unwrap_or_default()
    }

    pub fn params(&self) -> &[String] {
        self.param_names.as_deref().unwrap_or(&[])
    }
}
