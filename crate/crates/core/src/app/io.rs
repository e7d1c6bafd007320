//! JSON formats for instances and cake densities.
//!
//! Instance:
//! ```json
//! {"kind": "goods",
//!  "groups": [{"size": 2}, {"size": 3}],
//!  "types": [{"copies": 6, "values": ["1/2", "3"]}]}
//! ```
//! `values` holds one rational per group, in the order the groups are
//! listed. Densities: `{"agents": [[["0", "2"], ["1", "0"]], ...]}`, each agent
//! a list of `(breakpoint, value)` pairs.

use serde::{Deserialize, Serialize};

use crate::cake::PiecewiseLinearDensity;
use crate::error::{Error, Result};
use crate::model::{Instance, Kind, Rational};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    kind: Kind,
    groups: Vec<GroupDoc>,
    types: Vec<TypeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupDoc {
    size: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TypeDoc {
    copies: i64,
    values: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityDoc {
    agents: Vec<Vec<(String, String)>>,
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    }
}

fn parse_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

/// Parse `p/q` or `p` exactly, reduced to lowest terms.
pub fn parse_rational(text: &str, location: &str) -> Result<Rational> {
    let trimmed = text.trim();
    let r: Rational = trimmed
        .parse()
        .map_err(|_| parse_error(location, format!("{text:?} is not a rational p/q")))?;
    Ok(r)
}

/// Lowest terms, always with an explicit denominator.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn positive_count(v: i64, location: String) -> Result<u64> {
    if v <= 0 {
        return Err(parse_error(location, format!("{v} must be a positive integer")));
    }
    Ok(v as u64)
}

/// Parse and validate an instance. Groups end up sorted by size.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(json_error)?;
    if doc.groups.is_empty() {
        return Err(parse_error("groups", "at least one group is required"));
    }
    if doc.types.is_empty() {
        return Err(parse_error("types", "at least one item type is required"));
    }
    let sizes = doc
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| positive_count(g.size, format!("groups[{i}].size")))
        .collect::<Result<Vec<_>>>()?;
    let d = sizes.len();
    let mut copies = Vec::with_capacity(doc.types.len());
    let mut values = vec![Vec::with_capacity(doc.types.len()); d];
    for (z, ty) in doc.types.iter().enumerate() {
        copies.push(positive_count(ty.copies, format!("types[{z}].copies"))?);
        if ty.values.len() != d {
            return Err(parse_error(
                format!("types[{z}].values"),
                format!("{} values for {d} groups", ty.values.len()),
            ));
        }
        for (i, text) in ty.values.iter().enumerate() {
            let location = format!("types[{z}].values[{i}]");
            let v = parse_rational(text, &location)?;
            if v < Rational::from_integer(0.into()) {
                return Err(parse_error(location, format!("{text} is negative")));
            }
            if doc.kind == Kind::Chores && v == Rational::from_integer(0.into()) {
                return Err(parse_error(location, "chore costs must be strictly positive"));
            }
            values[i].push(v);
        }
    }
    Instance::new(sizes, copies, values, doc.kind)
}

/// Serialize with groups in sorted order and rationals in lowest terms.
pub fn serialize_instance(instance: &Instance) -> String {
    let doc = InstanceDoc {
        kind: instance.kind(),
        groups: instance
            .group_sizes()
            .iter()
            .map(|&s| GroupDoc { size: s as i64 })
            .collect(),
        types: (0..instance.types())
            .map(|z| TypeDoc {
                copies: instance.type_copies()[z] as i64,
                values: (0..instance.groups())
                    .map(|i| format_rational(instance.value(i, z)))
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("instance documents always serialize")
}

pub fn parse_densities(text: &str) -> Result<Vec<PiecewiseLinearDensity>> {
    let doc: DensityDoc = serde_json::from_str(text).map_err(json_error)?;
    doc.agents
        .iter()
        .enumerate()
        .map(|(i, points)| {
            let pts = points
                .iter()
                .enumerate()
                .map(|(p, (b, v))| {
                    let location = format!("agents[{i}][{p}]");
                    Ok((parse_rational(b, &location)?, parse_rational(v, &location)?))
                })
                .collect::<Result<Vec<_>>>()?;
            PiecewiseLinearDensity::new(pts).map_err(|e| parse_error(format!("agents[{i}]"), e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_goods() {
        let inst = parse_instance(r#"{"kind":"goods","groups":[{"size":1}],"types":[{"copies":1,"values":["1/1"]}]}"#)
            .unwrap();
        assert_eq!(inst.groups(), 1);
        assert_eq!(inst.value(0, 0), &Rational::from_integer(1.into()));
    }

    #[test]
    fn zero_cost_chore_rejected() {
        let err = parse_instance(
            r#"{"kind":"chores","groups":[{"size":1},{"size":1}],"types":[{"copies":1,"values":["0/1","1"]}]}"#,
        )
        .unwrap_err();
        match err {
            Error::Parse { location, .. } => assert_eq!(location, "types[0].values[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn groups_are_sorted() {
        let inst = parse_instance(
            r#"{"kind":"goods","groups":[{"size":7},{"size":5}],"types":[{"copies":35,"values":["1","2"]}]}"#,
        )
        .unwrap();
        assert_eq!(inst.group_sizes(), &[5, 7]);
        assert_eq!(inst.value(0, 0), &Rational::from_integer(2.into()));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_instance("{"), Err(Error::Parse { .. })));
        let neg = r#"{"kind":"goods","groups":[{"size":-1}],"types":[{"copies":1,"values":["1"]}]}"#;
        assert!(matches!(parse_instance(neg), Err(Error::Parse { location, .. }) if location == "groups[0].size"));
        let dims = r#"{"kind":"goods","groups":[{"size":1},{"size":1}],"types":[{"copies":1,"values":["1"]}]}"#;
        assert!(parse_instance(dims).is_err());
        let negv = r#"{"kind":"goods","groups":[{"size":1}],"types":[{"copies":1,"values":["-1/2"]}]}"#;
        assert!(parse_instance(negv).is_err());
    }

    #[test]
    fn round_trip_reduces() {
        let text = r#"{"kind":"goods","groups":[{"size":3},{"size":2}],"types":[{"copies":6,"values":["2/4","3"]}]}"#;
        let inst = parse_instance(text).unwrap();
        let out = serialize_instance(&inst);
        assert!(out.contains("\"1/2\""));
        let back = parse_instance(&out).unwrap();
        assert_eq!(back.values(), inst.values());
        assert_eq!(back.group_sizes(), inst.group_sizes());
        assert_eq!(serialize_instance(&parse_instance(&out).unwrap()), out);
    }

    #[test]
    fn densities() {
        let ds = parse_densities(r#"{"agents":[[["0","0"],["1","2"]],[["0","1"],["1/2","1"],["1","1"]]]}"#).unwrap();
        assert_eq!(ds.len(), 2);
        assert!(parse_densities(r#"{"agents":[[["0","1"],["1/2","1"]]]}"#).is_err());
    }
}
