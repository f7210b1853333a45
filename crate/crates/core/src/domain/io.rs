//! YAML file formats for topologies and fleet configurations.
//!
//! Topology document:
//!
//! ```yaml
//! schema_version: 1
//! meta: { name: desk, horizon: 60, empty_return_delay: 2 }
//! ports:   [{ id, capacity, initial_stock, handling_cap? }]
//! routes:  [{ id, stops: [port ids], leg_distances: [days] }]
//! vessels: [{ id, capacity, speed_noise: { sigma } }]
//! orders:
//!   pairs:     [{ origin, destination, base_volume, periods: [{ amplitude, period_days, phase }], noise_cv }]
//!   sail_days: [{ origin, destination, days }]
//! ```
//!
//! Fleet configuration document:
//!
//! ```yaml
//! schema_version: 1
//! assignments: [{ vessel, route, start_port }]
//! ```

use super::{Assignment, FleetConfiguration, OrderModel, Port, Route, Topology, VesselSpec};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const TOPOLOGY_SCHEMA_VERSION: u32 = 1;
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    #[serde(default)]
    name: String,
    horizon: u32,
    #[serde(default = "default_delay")]
    empty_return_delay: u32,
}

fn default_delay() -> u32 {
    2
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    schema_version: u32,
    meta: Meta,
    ports: Vec<Port>,
    routes: Vec<Route>,
    vessels: Vec<VesselSpec>,
    orders: OrderModel,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema_version: u32,
    assignments: Vec<Assignment>,
}

fn format_err(what: &'static str, e: impl std::fmt::Display) -> Error {
    // serde_yaml messages may span lines; diagnostics stay on one.
    let message = e.to_string().replace('\n', " ");
    Error::Format { what, message }
}

impl Topology {
    pub fn from_yaml_str(s: &str) -> Result<Self> {
        let f: TopologyFile = serde_yaml::from_str(s).map_err(|e| format_err("topology", e))?;
        if f.schema_version != TOPOLOGY_SCHEMA_VERSION {
            return Err(Error::Format {
                what: "topology",
                message: format!(
                    "schema_version: expected {TOPOLOGY_SCHEMA_VERSION}, found {}",
                    f.schema_version
                ),
            });
        }
        Ok(Topology {
            name: f.meta.name,
            ports: f.ports,
            routes: f.routes,
            vessels: f.vessels,
            order_model: f.orders,
            empty_return_delay: f.meta.empty_return_delay,
            horizon: f.meta.horizon,
        })
    }

    pub fn to_yaml_string(&self) -> String {
        let f = TopologyFile {
            schema_version: TOPOLOGY_SCHEMA_VERSION,
            meta: Meta {
                name: self.name.clone(),
                horizon: self.horizon,
                empty_return_delay: self.empty_return_delay,
            },
            ports: self.ports.clone(),
            routes: self.routes.clone(),
            vessels: self.vessels.clone(),
            orders: self.order_model.clone(),
        };
        serde_yaml::to_string(&f).expect("topology serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_yaml_str(&read_file(path.as_ref())?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_yaml_string())?;
        Ok(())
    }
}

impl FleetConfiguration {
    pub fn from_yaml_str(s: &str) -> Result<Self> {
        let f: ConfigFile = serde_yaml::from_str(s).map_err(|e| format_err("configuration", e))?;
        if f.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Format {
                what: "configuration",
                message: format!(
                    "schema_version: expected {CONFIG_SCHEMA_VERSION}, found {}",
                    f.schema_version
                ),
            });
        }
        Ok(FleetConfiguration::new(f.assignments))
    }

    pub fn to_yaml_string(&self) -> String {
        let f = ConfigFile {
            schema_version: CONFIG_SCHEMA_VERSION,
            assignments: self.assignments.clone(),
        };
        serde_yaml::to_string(&f).expect("configuration serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_yaml_str(&read_file(path.as_ref())?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_yaml_string())?;
        Ok(())
    }
}

/// Read a file, naming it in the error.
pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::tests::two_port;

    #[test]
    fn topology_round_trip() {
        let t = two_port();
        let text = t.to_yaml_string();
        assert!(text.starts_with("schema_version: 1"));
        let back = Topology::from_yaml_str(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_yaml_string(), text);
    }

    #[test]
    fn configuration_round_trip() {
        let t = two_port();
        let p = FleetConfiguration::round_robin(&t);
        let back = FleetConfiguration::from_yaml_str(&p.to_yaml_string()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn wrong_schema_version_names_the_field() {
        let text = two_port()
            .to_yaml_string()
            .replace("schema_version: 1", "schema_version: 7");
        let err = Topology::from_yaml_str(&text).unwrap_err().to_string();
        assert!(err.contains("schema_version"), "{err}");
    }

    #[test]
    fn missing_field_is_one_line_and_named() {
        let text = two_port().to_yaml_string().replace(
            "  capacity: 10\n  initial_stock: 5\n",
            "  initial_stock: 5\n",
        );
        let err = Topology::from_yaml_str(&text).unwrap_err().to_string();
        assert!(err.contains("capacity"), "{err}");
        assert!(!err.contains('\n'));
    }
}
