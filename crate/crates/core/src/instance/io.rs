//! JSON instance files.
//!
//! Every number is written as a decimal string (shortest representation that
//! parses back to the same `f64`), and infinite capacities use the token
//! `"inf"`. Nodes are referenced by name.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Capacity, CloudNode, Instance, Link, Network, Service, Stage};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("invalid value for field `{field}`: {message}")]
    Field { field: String, message: String },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    schema_version: u32,
    nodes: Vec<String>,
    links: Vec<LinkFile>,
    clouds: Vec<CloudFile>,
    services: Vec<ServiceFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkFile {
    tail: String,
    head: String,
    capacity: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CloudFile {
    node: String,
    capacity: String,
    power: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServiceFile {
    id: String,
    source: String,
    destination: String,
    rate_in: String,
    chain: Vec<StageFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageFile {
    function: String,
    rate: String,
    /// Cloud node name -> placement cost.
    costs: BTreeMap<String, String>,
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn fmt_cap(c: Capacity) -> String {
    match c {
        Capacity::Finite(x) => fmt_num(x),
        Capacity::Infinite => "inf".to_string(),
    }
}

fn parse_num(field: &str, text: &str) -> Result<f64, LoadError> {
    let value: f64 = text.trim().parse().map_err(|_| LoadError::Field {
        field: field.to_string(),
        message: format!("`{text}` is not a decimal number"),
    })?;
    if !value.is_finite() {
        return Err(LoadError::Field {
            field: field.to_string(),
            message: format!("`{text}` must be finite"),
        });
    }
    Ok(value)
}

fn parse_cap(field: &str, text: &str) -> Result<Capacity, LoadError> {
    if text.trim() == "inf" {
        Ok(Capacity::Infinite)
    } else {
        parse_num(field, text).map(Capacity::Finite)
    }
}

/// Serialize to the pretty-printed file format.
pub fn to_json_string(instance: &Instance) -> String {
    let net = &instance.network;
    let name = |i: usize| net.nodes.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
    let file = InstanceFile {
        schema_version: SCHEMA_VERSION,
        nodes: net.nodes.clone(),
        links: net
            .links
            .iter()
            .map(|l| LinkFile {
                tail: name(l.tail),
                head: name(l.head),
                capacity: fmt_cap(l.capacity),
            })
            .collect(),
        clouds: net
            .clouds
            .iter()
            .map(|c| CloudFile {
                node: name(c.node),
                capacity: fmt_cap(c.capacity),
                power: fmt_num(c.power),
            })
            .collect(),
        services: instance
            .services
            .iter()
            .map(|s| ServiceFile {
                id: s.id.clone(),
                source: name(s.source),
                destination: name(s.destination),
                rate_in: fmt_num(s.rate_in),
                chain: s
                    .chain
                    .iter()
                    .map(|st| StageFile {
                        function: st.function.clone(),
                        rate: fmt_num(st.rate),
                        costs: st
                            .costs
                            .iter()
                            .map(|(&c, &cost)| {
                                let node = net
                                    .clouds
                                    .get(c)
                                    .map(|cl| name(cl.node))
                                    .unwrap_or_else(|| format!("#cloud{c}"));
                                (node, fmt_num(cost))
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut text =
        serde_json::to_string_pretty(&file).expect("instance serialization is infallible");
    text.push('\n');
    text
}

/// Parse the file format. Structural validity is checked separately by
/// [`super::validate`]; this only resolves names and numbers.
pub fn from_json_str(text: &str) -> Result<Instance, LoadError> {
    // Check the version before the full schema so a future format fails with
    // the right diagnostic.
    #[derive(Deserialize)]
    struct Version {
        schema_version: u32,
    }
    let version: Version = serde_json::from_str(text)?;
    if version.schema_version != SCHEMA_VERSION {
        return Err(LoadError::SchemaVersion {
            found: version.schema_version,
        });
    }
    let file: InstanceFile = serde_json::from_str(text)?;

    let lookup: BTreeMap<&str, usize> = file
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let node = |field: String, name: &str| -> Result<usize, LoadError> {
        lookup.get(name).copied().ok_or_else(|| LoadError::Field {
            field,
            message: format!("unknown node `{name}`"),
        })
    };

    let mut links = Vec::with_capacity(file.links.len());
    for (i, l) in file.links.iter().enumerate() {
        links.push(Link {
            tail: node(format!("links[{i}].tail"), &l.tail)?,
            head: node(format!("links[{i}].head"), &l.head)?,
            capacity: parse_cap(&format!("links[{i}].capacity"), &l.capacity)?,
        });
    }
    let mut clouds = Vec::with_capacity(file.clouds.len());
    for (i, c) in file.clouds.iter().enumerate() {
        clouds.push(CloudNode {
            node: node(format!("clouds[{i}].node"), &c.node)?,
            capacity: parse_cap(&format!("clouds[{i}].capacity"), &c.capacity)?,
            power: parse_num(&format!("clouds[{i}].power"), &c.power)?,
        });
    }
    let cloud_pos: BTreeMap<usize, usize> = clouds
        .iter()
        .enumerate()
        .map(|(p, c)| (c.node, p))
        .collect();

    let mut services = Vec::with_capacity(file.services.len());
    for (k, s) in file.services.iter().enumerate() {
        let mut chain = Vec::with_capacity(s.chain.len());
        for (i, st) in s.chain.iter().enumerate() {
            let mut costs = BTreeMap::new();
            for (name, cost) in &st.costs {
                let field = format!("services[{k}].chain[{i}].costs.{name}");
                let n = node(field.clone(), name)?;
                let pos = *cloud_pos.get(&n).ok_or_else(|| LoadError::Field {
                    field: field.clone(),
                    message: format!("node `{name}` is not a cloud node"),
                })?;
                costs.insert(pos, parse_num(&field, cost)?);
            }
            chain.push(Stage {
                function: st.function.clone(),
                rate: parse_num(&format!("services[{k}].chain[{i}].rate"), &st.rate)?,
                costs,
            });
        }
        services.push(Service {
            id: s.id.clone(),
            source: node(format!("services[{k}].source"), &s.source)?,
            destination: node(format!("services[{k}].destination"), &s.destination)?,
            rate_in: parse_num(&format!("services[{k}].rate_in"), &s.rate_in)?,
            chain,
        });
    }

    Ok(Instance {
        network: Network {
            nodes: file.nodes,
            links,
            clouds,
        },
        services,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<Instance, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_json_str(&text)
}

pub fn save(instance: &Instance, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, to_json_string(instance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::examples;

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.json");
        let inst = examples::chain_of_three();
        save(&inst, &path).unwrap();
        assert_eq!(load(&path).unwrap(), inst);
    }

    #[test]
    fn missing_services_names_the_field() {
        let text = r#"{"schema_version": 1, "nodes": [], "links": [], "clouds": []}"#;
        let err = from_json_str(text).unwrap_err();
        assert!(err.to_string().contains("services"), "{err}");
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "{\n\"schema_version\": 1,\n\"nodes\": [,]\n}";
        let err = from_json_str(text).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn inf_token_loads_as_infinite() {
        let text = to_json_string(&examples::chain_of_three());
        assert!(text.contains("\"inf\""));
        let inst = from_json_str(&text).unwrap();
        assert!(inst
            .network
            .links
            .iter()
            .all(|l| l.capacity == Capacity::Infinite));
        assert_eq!(inst.network.clouds[2].capacity, Capacity::Finite(3.0));
    }

    #[test]
    fn schema_version_mismatch() {
        let text = to_json_string(&examples::diamond())
            .replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(matches!(
            from_json_str(&text),
            Err(LoadError::SchemaVersion { found: 7 })
        ));
    }

    #[test]
    fn unknown_node_names_field() {
        let text =
            to_json_string(&examples::diamond()).replacen("\"tail\": \"A\"", "\"tail\": \"Z\"", 1);
        let err = from_json_str(&text).unwrap_err();
        assert!(err.to_string().contains("links[0].tail"), "{err}");
    }

    #[test]
    fn awkward_floats_round_trip_exactly() {
        let mut inst = examples::diamond();
        inst.network.clouds[0].power = 0.1 + 0.2;
        inst.services[0].rate_in = 1.0 / 3.0;
        inst.network.links[0].capacity = Capacity::Finite(1e-300);
        let back = from_json_str(&to_json_string(&inst)).unwrap();
        assert_eq!(
            back.network.clouds[0].power.to_bits(),
            (0.1f64 + 0.2).to_bits()
        );
        assert_eq!(back.services[0].rate_in.to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(back, inst);
    }
}
