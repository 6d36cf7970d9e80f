//! Airflow network description: zones, exterior nodes and the links between them.
//!
//! A [`Network`] is plain data. It is read from (and written to) a single JSON
//! document and checked with [`validate`], which reports every problem it finds
//! rather than stopping at the first one.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of wind-direction sectors in an exterior node's Cp table.
pub const CP_SECTORS: usize = 8;

fn default_cd() -> f64 {
    0.6
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// A well-mixed room whose reference pressure is solved for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub id: String,
    /// Imposed air temperature, K.
    #[serde(rename = "temperature_k")]
    pub temperature: f64,
    /// Absolute elevation of the reference-pressure point, m.
    #[serde(rename = "ref_height_m")]
    pub ref_height: f64,
    /// Mechanical ventilation mass gain, kg/s (positive into the zone).
    #[serde(rename = "mech_flow_kg_s", default, skip_serializing_if = "is_zero")]
    pub mech_flow: f64,
}

/// An exterior facade node whose pressure comes from the wind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalNode {
    pub id: String,
    #[serde(rename = "ref_height_m")]
    pub ref_height: f64,
    /// Wind pressure coefficients at 0°, 45°, ... 315° (clockwise from north).
    pub cp: [f64; CP_SECTORS],
}

/// Flow law attached to a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkModel {
    /// Power-law crack, `m = K·ΔP^n`.
    Crack { k: f64, n: f64 },
    /// Vertical opening (door, window) that may carry two-way flow.
    LargeOpening {
        #[serde(rename = "width_m")]
        width: f64,
        #[serde(rename = "height_m")]
        height: f64,
        #[serde(default = "default_cd")]
        cd: f64,
    },
    /// Fixed mass flow from `from` to `to`.
    Fan {
        #[serde(rename = "flow_kg_s")]
        flow: f64,
    },
}

impl LinkModel {
    /// Whether the link's flow depends on the pressures at its ends.
    pub fn is_pressure_driven(&self) -> bool {
        !matches!(self, LinkModel::Fan { .. })
    }
}

/// A flow path between two nodes. Positive flow goes from `from` to `to`.
///
/// `elevation` is the absolute height of the link midpoint. For a large
/// opening the bottom edge sits at `elevation - height / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub id: String,
    pub from: String,
    pub to: String,
    #[serde(rename = "elevation_m")]
    pub elevation: f64,
    pub model: LinkModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub zones: Vec<Zone>,
    pub external_nodes: Vec<ExternalNode>,
    pub links: Vec<Link>,
}

/// Index of a node inside a [`Network`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRef {
    Zone(usize),
    External(usize),
}

impl Network {
    /// Looks a node id up among zones, then exterior nodes.
    pub fn node(&self, id: &str) -> Option<NodeRef> {
        if let Some(i) = self.zones.iter().position(|z| z.id == id) {
            return Some(NodeRef::Zone(i));
        }
        self.external_nodes
            .iter()
            .position(|e| e.id == id)
            .map(NodeRef::External)
    }

    pub fn zone_index(&self, id: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.id == id)
    }

    pub fn zone_ids(&self) -> Vec<&str> {
        self.zones.iter().map(|z| z.id.as_str()).collect()
    }

    /// Pretty-printed JSON in the network file format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization cannot fail")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoZones,
    DuplicateId(String),
    UnknownEndpoint {
        link: String,
        node: String,
    },
    SelfLoop {
        link: String,
    },
    NonPositiveTemperature {
        zone: String,
        value: f64,
    },
    CpOutOfRange {
        node: String,
        sector: usize,
        value: f64,
    },
    NonPositiveCoefficient {
        link: String,
        value: f64,
    },
    ExponentOutOfRange {
        link: String,
        value: f64,
    },
    BadOpeningGeometry {
        link: String,
    },
    DischargeCoefficientOutOfRange {
        link: String,
        value: f64,
    },
    NonFinite {
        item: String,
        field: &'static str,
    },
    UnreachableZone(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoZones => write!(f, "network has no zones"),
            Violation::DuplicateId(id) => write!(f, "duplicate id \"{id}\""),
            Violation::UnknownEndpoint { link, node } => {
                write!(f, "link \"{link}\" refers to unknown node \"{node}\"")
            }
            Violation::SelfLoop { link } => write!(f, "link \"{link}\" connects a node to itself"),
            Violation::NonPositiveTemperature { zone, value } => {
                write!(f, "zone \"{zone}\" has non-positive temperature {value} K")
            }
            Violation::CpOutOfRange {
                node,
                sector,
                value,
            } => write!(
                f,
                "external node \"{node}\" cp[{sector}] = {value} is outside [-2, 2]"
            ),
            Violation::NonPositiveCoefficient { link, value } => {
                write!(
                    f,
                    "crack \"{link}\" has non-positive flow coefficient k = {value}"
                )
            }
            Violation::ExponentOutOfRange { link, value } => {
                write!(
                    f,
                    "crack \"{link}\" exponent out of range: n = {value} (expected 0.5..=1)"
                )
            }
            Violation::BadOpeningGeometry { link } => {
                write!(
                    f,
                    "large opening \"{link}\" needs positive width and height"
                )
            }
            Violation::DischargeCoefficientOutOfRange { link, value } => write!(
                f,
                "large opening \"{link}\" discharge coefficient {value} outside (0, 1]"
            ),
            Violation::NonFinite { item, field } => write!(f, "\"{item}\": {field} is not finite"),
            Violation::UnreachableZone(id) => write!(
                f,
                "zone \"{id}\" is unreachable from any external node through pressure-driven links"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid network: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parses a network file and validates it.
pub fn parse_network(text: &str) -> Result<Network, NetworkError> {
    let net: Network = serde_json::from_str(text).map_err(|e| {
        let (line, column, message) = (e.line(), e.column(), e.to_string());
        match e.classify() {
            serde_json::error::Category::Data => NetworkError::Schema {
                line,
                column,
                message,
            },
            _ => NetworkError::Syntax {
                line,
                column,
                message,
            },
        }
    })?;
    let violations = validate(&net);
    if violations.is_empty() {
        Ok(net)
    } else {
        Err(NetworkError::Invalid(violations))
    }
}

/// Returns every invariant violation found in `net` (empty when valid).
pub fn validate(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    if net.zones.is_empty() {
        out.push(Violation::NoZones);
    }

    let mut seen = HashSet::new();
    let mut reported = HashSet::new();
    let ids = net
        .zones
        .iter()
        .map(|z| &z.id)
        .chain(net.external_nodes.iter().map(|e| &e.id));
    for id in ids {
        if !seen.insert(id.as_str()) && reported.insert(id.as_str()) {
            out.push(Violation::DuplicateId(id.clone()));
        }
    }
    let mut link_ids = HashSet::new();
    for link in &net.links {
        if !link_ids.insert(link.id.as_str()) {
            out.push(Violation::DuplicateId(link.id.clone()));
        }
    }

    for z in &net.zones {
        for (field, v) in [
            ("temperature_k", z.temperature),
            ("ref_height_m", z.ref_height),
            ("mech_flow_kg_s", z.mech_flow),
        ] {
            if !v.is_finite() {
                out.push(Violation::NonFinite {
                    item: z.id.clone(),
                    field,
                });
            }
        }
        if z.temperature.is_finite() && z.temperature <= 0.0 {
            out.push(Violation::NonPositiveTemperature {
                zone: z.id.clone(),
                value: z.temperature,
            });
        }
    }

    for e in &net.external_nodes {
        if !e.ref_height.is_finite() {
            out.push(Violation::NonFinite {
                item: e.id.clone(),
                field: "ref_height_m",
            });
        }
        for (sector, &cp) in e.cp.iter().enumerate() {
            if !(-2.0..=2.0).contains(&cp) {
                out.push(Violation::CpOutOfRange {
                    node: e.id.clone(),
                    sector,
                    value: cp,
                });
            }
        }
    }

    for link in &net.links {
        for end in [&link.from, &link.to] {
            if net.node(end).is_none() {
                out.push(Violation::UnknownEndpoint {
                    link: link.id.clone(),
                    node: end.clone(),
                });
            }
        }
        if link.from == link.to {
            out.push(Violation::SelfLoop {
                link: link.id.clone(),
            });
        }
        if !link.elevation.is_finite() {
            out.push(Violation::NonFinite {
                item: link.id.clone(),
                field: "elevation_m",
            });
        }
        match link.model {
            LinkModel::Crack { k, n } => {
                if !(k > 0.0 && k.is_finite()) {
                    out.push(Violation::NonPositiveCoefficient {
                        link: link.id.clone(),
                        value: k,
                    });
                }
                if !(0.5..=1.0).contains(&n) {
                    out.push(Violation::ExponentOutOfRange {
                        link: link.id.clone(),
                        value: n,
                    });
                }
            }
            LinkModel::LargeOpening { width, height, cd } => {
                if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
                    out.push(Violation::BadOpeningGeometry {
                        link: link.id.clone(),
                    });
                }
                if !(cd > 0.0 && cd <= 1.0) {
                    out.push(Violation::DischargeCoefficientOutOfRange {
                        link: link.id.clone(),
                        value: cd,
                    });
                }
            }
            LinkModel::Fan { flow } => {
                if !flow.is_finite() {
                    out.push(Violation::NonFinite {
                        item: link.id.clone(),
                        field: "flow_kg_s",
                    });
                }
            }
        }
    }

    for id in unreachable_zones(net) {
        out.push(Violation::UnreachableZone(id));
    }
    out
}

/// Zones with no pressure-driven path to an exterior node. Fans do not count:
/// they fix a flow but leave the pressure undetermined.
fn unreachable_zones(net: &Network) -> Vec<String> {
    let index: HashMap<&str, NodeRef> = net
        .zones
        .iter()
        .enumerate()
        .map(|(i, z)| (z.id.as_str(), NodeRef::Zone(i)))
        .chain(
            net.external_nodes
                .iter()
                .enumerate()
                .map(|(i, e)| (e.id.as_str(), NodeRef::External(i))),
        )
        .collect();

    let mut adjacency: HashMap<NodeRef, Vec<NodeRef>> = HashMap::new();
    for link in net.links.iter().filter(|l| l.model.is_pressure_driven()) {
        if let (Some(&a), Some(&b)) = (index.get(link.from.as_str()), index.get(link.to.as_str())) {
            adjacency.entry(a).or_default().push(b);
            adjacency.entry(b).or_default().push(a);
        }
    }

    let mut reached = vec![false; net.zones.len()];
    let mut queue: VecDeque<NodeRef> = (0..net.external_nodes.len())
        .map(NodeRef::External)
        .collect();
    let mut visited: HashSet<NodeRef> = queue.iter().copied().collect();
    while let Some(node) = queue.pop_front() {
        if let NodeRef::Zone(i) = node {
            reached[i] = true;
        }
        for &next in adjacency.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
            if visited.insert(next) {
                queue.push_back(next);
            }
        }
    }

    net.zones
        .iter()
        .zip(reached)
        .filter(|(_, r)| !r)
        .map(|(z, _)| z.id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "zones": [{"id": "Z1", "temperature_k": 293.15, "ref_height_m": 0}],
        "external_nodes": [{"id": "E", "ref_height_m": 0, "cp": [0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5]}],
        "links": [{"id": "c1", "from": "E", "to": "Z1", "elevation_m": 1.0,
                   "model": {"type": "crack", "k": 0.01, "n": 0.65}}]
    }"#;

    fn two_zone() -> Network {
        let mut net = parse_network(MINIMAL).unwrap();
        net.zones.push(Zone {
            id: "Z2".into(),
            temperature: 293.15,
            ref_height: 0.0,
            mech_flow: 0.0,
        });
        net.links.push(Link {
            id: "door".into(),
            from: "Z1".into(),
            to: "Z2".into(),
            elevation: 1.0,
            model: LinkModel::LargeOpening {
                width: 0.8,
                height: 2.0,
                cd: 0.6,
            },
        });
        net
    }

    #[test]
    fn minimal_file_parses() {
        let net = parse_network(MINIMAL).unwrap();
        assert_eq!(net.zones.len(), 1);
        assert_eq!(net.links.len(), 1);
        assert_eq!(net.zones[0].mech_flow, 0.0);
    }

    #[test]
    fn discharge_coefficient_defaults() {
        let text = MINIMAL.replace(
            r#"{"type": "crack", "k": 0.01, "n": 0.65}"#,
            r#"{"type": "large_opening", "width_m": 1, "height_m": 2}"#,
        );
        let net = parse_network(&text).unwrap();
        assert_eq!(
            net.links[0].model,
            LinkModel::LargeOpening {
                width: 1.0,
                height: 2.0,
                cd: 0.6
            }
        );
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = MINIMAL
            .replace(r#""id": "E""#, r#""id": "Z1""#)
            .replace(r#""from": "E""#, r#""from": "Z1""#);
        let err = parse_network(&text).unwrap_err();
        assert!(matches!(err, NetworkError::Invalid(_)));
        assert!(err.to_string().contains("\"Z1\""), "{err}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_network("{\n  \"zones\": [,]\n}").unwrap_err();
        match err {
            NetworkError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_error_names_field() {
        let text = MINIMAL.replace(r#""k": 0.01, "#, "");
        let err = parse_network(&text).unwrap_err();
        assert!(matches!(err, NetworkError::Schema { .. }));
        assert!(err.to_string().contains("`k`"), "{err}");

        let text = MINIMAL.replace("ref_height_m\": 0}]", "ref_height_m\": 0, \"colour\": 1}]");
        let err = parse_network(&text).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn cp_table_must_have_eight_entries() {
        let text = MINIMAL.replace("[0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5]", "[0.5,0.5]");
        assert!(matches!(
            parse_network(&text),
            Err(NetworkError::Schema { .. })
        ));
    }

    #[test]
    fn valid_two_zone_network() {
        assert!(validate(&two_zone()).is_empty());
    }

    #[test]
    fn zone_without_links_is_unreachable() {
        let mut net = two_zone();
        net.zones.push(Zone {
            id: "Z3".into(),
            temperature: 290.0,
            ref_height: 0.0,
            mech_flow: 0.0,
        });
        assert_eq!(
            validate(&net),
            vec![Violation::UnreachableZone("Z3".into())]
        );
    }

    #[test]
    fn fan_alone_does_not_connect() {
        let mut net = two_zone();
        net.links.pop();
        net.links.push(Link {
            id: "f".into(),
            from: "E".into(),
            to: "Z2".into(),
            elevation: 1.0,
            model: LinkModel::Fan { flow: 0.02 },
        });
        assert_eq!(
            validate(&net),
            vec![Violation::UnreachableZone("Z2".into())]
        );
    }

    #[test]
    fn exponent_out_of_range() {
        let mut net = two_zone();
        net.links[0].model = LinkModel::Crack { k: 0.01, n: 1.5 };
        let v = validate(&net);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::ExponentOutOfRange { value, .. } if value == 1.5));
    }

    #[test]
    fn reports_all_violations() {
        let mut net = two_zone();
        net.links[0].model = LinkModel::Crack { k: -1.0, n: 0.65 };
        net.links[1].to = "nowhere".into();
        net.zones[0].temperature = 0.0;
        let v = validate(&net);
        assert!(v.contains(&Violation::NonPositiveCoefficient {
            link: "c1".into(),
            value: -1.0
        }));
        assert!(v.contains(&Violation::UnknownEndpoint {
            link: "door".into(),
            node: "nowhere".into()
        }));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::NonPositiveTemperature { .. })));
        // Z2 lost its only pressure path.
        assert!(v.contains(&Violation::UnreachableZone("Z2".into())));
    }

    #[test]
    fn round_trip() {
        let net = two_zone();
        assert_eq!(parse_network(&net.to_json()).unwrap(), net);
    }
}
