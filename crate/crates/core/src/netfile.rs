//! JSON network file format.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "n": 3,
//!   "inputs": [[1, 2], [0, 2], [0, 1]],
//!   "tables": ["0001", "0111", "0110"],
//!   "input_nodes": [{ "node": 0, "role": "sound" }],
//!   "output_nodes": [{ "node": 2, "role": "wheel_left" }]
//! }
//! ```
//!
//! Tables are bitstrings with row 0 first; row indices read the sources in
//! list order, first source most significant.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::{INPUT_ROLES, OUTPUT_ROLES};
use crate::error::{Error, Result};
use crate::network::{BooleanNetwork, TruthTable};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleBinding {
    pub node: usize,
    pub role: String,
}

/// On-disk representation of a [`BooleanNetwork`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub format_version: u32,
    pub n: usize,
    pub inputs: Vec<Vec<usize>>,
    pub tables: Vec<String>,
    pub input_nodes: Vec<RoleBinding>,
    pub output_nodes: Vec<RoleBinding>,
}

fn role_tag(standard: &[&str], prefix: &str, pos: usize, count: usize) -> String {
    if count == standard.len() {
        standard[pos].to_string()
    } else {
        format!("{prefix}{pos}")
    }
}

impl From<&BooleanNetwork> for NetworkFile {
    fn from(net: &BooleanNetwork) -> Self {
        let bind = |nodes: &[usize], standard: &[&str], prefix: &str| {
            nodes
                .iter()
                .enumerate()
                .map(|(pos, &node)| RoleBinding {
                    node,
                    role: role_tag(standard, prefix, pos, nodes.len()),
                })
                .collect()
        };
        NetworkFile {
            format_version: FORMAT_VERSION,
            n: net.n(),
            inputs: net.all_sources().to_vec(),
            tables: net.tables().iter().map(TruthTable::to_bitstring).collect(),
            input_nodes: bind(net.input_nodes(), &INPUT_ROLES, "input"),
            output_nodes: bind(net.output_nodes(), &OUTPUT_ROLES, "output"),
        }
    }
}

impl TryFrom<NetworkFile> for BooleanNetwork {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        if file.format_version != FORMAT_VERSION {
            return Err(Error::parse(
                "format_version",
                format!(
                    "unsupported version {} (expected {FORMAT_VERSION})",
                    file.format_version
                ),
            ));
        }
        if file.inputs.len() != file.n {
            return Err(Error::parse(
                "inputs",
                format!("{} source lists for n = {}", file.inputs.len(), file.n),
            ));
        }
        if file.tables.len() != file.n {
            return Err(Error::parse(
                "tables",
                format!("{} tables for n = {}", file.tables.len(), file.n),
            ));
        }
        let tables = file
            .tables
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let rows = s
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(Error::parse(
                            format!("tables[{i}]"),
                            format!("unexpected character {other:?}"),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let expected = 1usize << file.inputs[i].len().min(31);
                if rows.len() != expected {
                    return Err(Error::parse(
                        format!("tables[{i}]"),
                        format!(
                            "{} bits but node has {} sources (expected {expected})",
                            rows.len(),
                            file.inputs[i].len()
                        ),
                    ));
                }
                TruthTable::from_rows(&rows)
            })
            .collect::<Result<Vec<_>>>()?;
        for (field, bindings, standard, prefix) in [
            ("input_nodes", &file.input_nodes, &INPUT_ROLES[..], "input"),
            (
                "output_nodes",
                &file.output_nodes,
                &OUTPUT_ROLES[..],
                "output",
            ),
        ] {
            for (pos, b) in bindings.iter().enumerate() {
                let want = role_tag(standard, prefix, pos, bindings.len());
                if b.role != want {
                    return Err(Error::parse(
                        format!("{field}[{pos}].role"),
                        format!("expected {want:?}, found {:?}", b.role),
                    ));
                }
            }
        }
        let nodes = |b: &[RoleBinding]| b.iter().map(|r| r.node).collect::<Vec<_>>();
        BooleanNetwork::new(
            file.inputs,
            tables,
            nodes(&file.input_nodes),
            nodes(&file.output_nodes),
        )
    }
}

pub fn to_json(net: &BooleanNetwork) -> String {
    serde_json::to_string_pretty(&NetworkFile::from(net)).expect("network file serializes")
}

pub fn from_json(text: &str) -> Result<BooleanNetwork> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| {
        Error::parse(
            format!("network file line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    BooleanNetwork::try_from(file)
}

pub fn save(net: &BooleanNetwork, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(net) + "\n")?;
    Ok(())
}

pub fn load(path: &Path) -> Result<BooleanNetwork> {
    let text = std::fs::read_to_string(path)?;
    from_json(&text).map_err(|e| match e {
        Error::Parse { context, reason } => Error::Parse {
            context: format!("{}: {context}", path.display()),
            reason,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::random_controller_network;
    use proptest::prelude::*;

    #[test]
    fn standard_roles_are_tagged() {
        let net = random_controller_network(20, 3, 1).unwrap();
        let f = NetworkFile::from(&net);
        let roles: Vec<&str> = f.input_nodes.iter().map(|b| b.role.as_str()).collect();
        assert_eq!(roles, INPUT_ROLES);
        assert_eq!(f.output_nodes[1].role, "wheel_right");
        assert_eq!(f.tables[0].len(), 8);
    }

    #[test]
    fn bad_table_length_names_the_field() {
        let net = random_controller_network(20, 3, 1).unwrap();
        let mut f = NetworkFile::from(&net);
        f.tables[3].pop();
        let err = BooleanNetwork::try_from(f).unwrap_err().to_string();
        assert!(err.contains("tables[3]"), "{err}");
    }

    #[test]
    fn wrong_role_is_rejected() {
        let net = random_controller_network(20, 3, 1).unwrap();
        let mut f = NetworkFile::from(&net);
        f.output_nodes[0].role = "wheel_right".into();
        assert!(BooleanNetwork::try_from(f).is_err());
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = from_json("{\n  \"n\": 3,\n  oops").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(n in 7usize..30, k in 1usize..5, seed in any::<u64>()) {
            let net = random_controller_network(n, k, seed).unwrap();
            let text = to_json(&net);
            let back = from_json(&text).unwrap();
            prop_assert_eq!(&back, &net);
            prop_assert_eq!(to_json(&back), text);
        }
    }
}
