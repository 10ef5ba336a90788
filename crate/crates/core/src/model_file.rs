//! TOML model files.
//!
//! ```toml
//! parameterization = "mean"      # or "natural", "canonical", "centered"
//! vertices = ["a", "b", "c"]
//! root = "a"                     # optional, defaults to the first vertex
//! q = 0.01                       # scalar, list in vertex order, or { a = 0.01, ... }
//! edges = [["a", "b", 0.7], ["a", "c", 0.7]]
//! ```
//!
//! The vertex values are named `q` (mean), `eta_vertex` (natural),
//! `theta_vertex` (canonical) or `kappa` (centered). The third entry of each
//! edge is the correlation, `eta_e`, `theta_e` or `eta_e` respectively.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MeanParamIsing, ModelError};
use crate::params::{
    canonical_to_natural, centered_to_natural, mean_to_natural, natural_to_canonical,
    natural_to_centered, natural_to_mean, CanonicalParamIsing, CenteredParamIsing, ExponentialForm,
    NaturalParamIsing, ParamError,
};
use crate::tree::{TreeError, TreeTopology, Vertex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelFileError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

fn field_error(field: &str, message: impl Into<String>) -> ModelFileError {
    ModelFileError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Parameterization {
    #[default]
    Mean,
    Natural,
    Canonical,
    Centered,
}

impl Parameterization {
    fn vertex_field(self) -> &'static str {
        match self {
            Parameterization::Mean => "q",
            Parameterization::Natural => "eta_vertex",
            Parameterization::Canonical => "theta_vertex",
            Parameterization::Centered => "kappa",
        }
    }
}

impl fmt::Display for Parameterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Parameterization::Mean => "mean",
            Parameterization::Natural => "natural",
            Parameterization::Canonical => "canonical",
            Parameterization::Centered => "centered",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum VertexValues {
    Scalar(f64),
    List(Vec<f64>),
    Map(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default)]
    parameterization: Parameterization,
    vertices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    root: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<VertexValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta_vertex: Option<VertexValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_vertex: Option<VertexValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<VertexValues>,
    #[serde(default)]
    edges: Vec<(String, String, f64)>,
}

/// A model in whichever parameterization the file used.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Mean(MeanParamIsing),
    Natural(NaturalParamIsing),
    Canonical(CanonicalParamIsing),
    Centered(CenteredParamIsing),
}

/// Parsed model file: the model plus the preferred root.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub spec: ModelSpec,
    pub root: Vertex,
}

/// Mean-parameterized input as written, before admissibility checks.
#[derive(Debug, Clone, PartialEq)]
pub struct UncheckedMean {
    pub topology: TreeTopology,
    pub root: Vertex,
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn parse_raw(text: &str) -> Result<RawModel, ModelFileError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ModelFileError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })
}

struct Parts {
    parameterization: Parameterization,
    topology: TreeTopology,
    root: Vertex,
    vertex_values: Vec<f64>,
    edge_values: Vec<f64>,
}

fn resolve(raw: RawModel) -> Result<Parts, ModelFileError> {
    let labels = raw.vertices;
    if labels.is_empty() {
        return Err(field_error("vertices", "at least one vertex is required"));
    }
    let index_of = |label: &str, field: &str| {
        labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| field_error(field, format!("unknown vertex `{label}`")))
    };
    let mut pairs = Vec::with_capacity(raw.edges.len());
    let mut weights = Vec::with_capacity(raw.edges.len());
    for (a, b, w) in &raw.edges {
        pairs.push((index_of(a, "edges")?, index_of(b, "edges")?));
        weights.push(*w);
    }
    let topology = TreeTopology::with_labels(labels.clone(), &pairs)?;
    let root = match &raw.root {
        Some(label) => index_of(label, "root")?,
        None => 0,
    };

    let p = raw.parameterization;
    let wanted = p.vertex_field();
    let supplied = [
        ("q", &raw.q),
        ("eta_vertex", &raw.eta_vertex),
        ("theta_vertex", &raw.theta_vertex),
        ("kappa", &raw.kappa),
    ];
    let mut values = None;
    for (name, v) in supplied {
        match (name == wanted, v) {
            (true, Some(v)) => values = Some(v.clone()),
            (true, None) => {
                return Err(field_error(
                    wanted,
                    format!("required for the {p} parameterization"),
                ))
            }
            (false, Some(_)) => {
                return Err(field_error(
                    name,
                    format!("not used by the {p} parameterization"),
                ))
            }
            (false, None) => {}
        }
    }
    let d = labels.len();
    let vertex_values = match values.expect("checked above") {
        VertexValues::Scalar(x) => vec![x; d],
        VertexValues::List(xs) if xs.len() == d => xs,
        VertexValues::List(xs) => {
            return Err(field_error(
                wanted,
                format!("expected {d} values, got {}", xs.len()),
            ))
        }
        VertexValues::Map(map) => {
            let mut out = vec![f64::NAN; d];
            for (label, x) in &map {
                out[index_of(label, wanted)?] = *x;
            }
            if let Some(v) = out.iter().position(|x| x.is_nan()) {
                return Err(field_error(
                    wanted,
                    format!("no value for vertex `{}`", labels[v]),
                ));
            }
            out
        }
    };
    if let Some(x) = vertex_values
        .iter()
        .chain(&weights)
        .find(|x| !x.is_finite())
    {
        return Err(field_error(wanted, format!("non-finite value {x}")));
    }
    Ok(Parts {
        parameterization: p,
        topology,
        root,
        vertex_values,
        edge_values: weights,
    })
}

/// Read a mean-parameterized file without checking admissibility, so that
/// violations can be reported rather than rejected.
pub fn parse_unchecked_mean(text: &str) -> Result<Option<UncheckedMean>, ModelFileError> {
    let parts = resolve(parse_raw(text)?)?;
    if parts.parameterization != Parameterization::Mean {
        return Ok(None);
    }
    Ok(Some(UncheckedMean {
        topology: parts.topology,
        root: parts.root,
        q: parts.vertex_values,
        alpha: parts.edge_values,
    }))
}

pub fn parse_model(text: &str) -> Result<ModelFile, ModelFileError> {
    let parts = resolve(parse_raw(text)?)?;
    let Parts {
        parameterization,
        topology,
        root,
        vertex_values,
        edge_values,
    } = parts;
    let spec = match parameterization {
        Parameterization::Mean => ModelSpec::Mean(MeanParamIsing::new(
            topology.root_at(root)?,
            vertex_values,
            edge_values,
        )?),
        Parameterization::Natural => ModelSpec::Natural(NaturalParamIsing::new(
            topology,
            vertex_values,
            edge_values,
        )?),
        Parameterization::Canonical => ModelSpec::Canonical(CanonicalParamIsing::new(
            topology,
            vertex_values,
            edge_values,
        )?),
        Parameterization::Centered => ModelSpec::Centered(CenteredParamIsing::new(
            topology,
            vertex_values,
            edge_values,
        )?),
    };
    Ok(ModelFile { spec, root })
}

pub fn read_text(path: &Path) -> Result<String, ModelFileError> {
    std::fs::read_to_string(path).map_err(|e| ModelFileError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_model(path: &Path) -> Result<ModelFile, ModelFileError> {
    parse_model(&read_text(path)?)
}

impl ModelSpec {
    pub fn parameterization(&self) -> Parameterization {
        match self {
            ModelSpec::Mean(_) => Parameterization::Mean,
            ModelSpec::Natural(_) => Parameterization::Natural,
            ModelSpec::Canonical(_) => Parameterization::Canonical,
            ModelSpec::Centered(_) => Parameterization::Centered,
        }
    }

    pub fn topology(&self) -> &TreeTopology {
        match self {
            ModelSpec::Mean(m) => m.tree().topology(),
            ModelSpec::Natural(m) => m.topology(),
            ModelSpec::Canonical(m) => m.topology(),
            ModelSpec::Centered(m) => m.topology(),
        }
    }

    fn to_natural(&self) -> Result<NaturalParamIsing, ModelFileError> {
        Ok(match self {
            ModelSpec::Mean(m) => mean_to_natural(m)?,
            ModelSpec::Natural(m) => m.clone(),
            ModelSpec::Canonical(m) => canonical_to_natural(m)?,
            ModelSpec::Centered(m) => centered_to_natural(m)?,
        })
    }

    /// Mean parameters rooted at `root`.
    pub fn to_mean(&self, root: Vertex) -> Result<MeanParamIsing, ModelFileError> {
        let m = match self {
            ModelSpec::Mean(m) => m.clone(),
            other => natural_to_mean(&other.to_natural()?)?,
        };
        Ok(m.reroot(root)?)
    }

    pub fn convert(&self, to: Parameterization, root: Vertex) -> Result<ModelSpec, ModelFileError> {
        if to == self.parameterization() {
            return Ok(self.clone());
        }
        Ok(match to {
            Parameterization::Mean => ModelSpec::Mean(self.to_mean(root)?),
            Parameterization::Natural => ModelSpec::Natural(self.to_natural()?),
            Parameterization::Canonical => {
                ModelSpec::Canonical(natural_to_canonical(&self.to_natural()?)?)
            }
            Parameterization::Centered => {
                ModelSpec::Centered(natural_to_centered(&self.to_natural()?)?)
            }
        })
    }

    fn values(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ModelSpec::Mean(m) => (m.q().to_vec(), m.alpha().to_vec()),
            ModelSpec::Natural(m) => (m.eta_vertex().to_vec(), m.eta_edge().to_vec()),
            ModelSpec::Canonical(m) => (m.theta_vertex().to_vec(), m.theta_edge().to_vec()),
            ModelSpec::Centered(m) => (m.kappa().to_vec(), m.eta_edge().to_vec()),
        }
    }
}

/// Serialize in the file format. Values use the shortest representation
/// that reads back exactly.
pub fn to_toml(file: &ModelFile) -> String {
    let topology = file.spec.topology();
    let labels = topology.labels();
    let (vertex_values, edge_values) = file.spec.values();
    let p = file.spec.parameterization();
    let list = Some(VertexValues::List(vertex_values));
    let mut raw = RawModel {
        parameterization: p,
        vertices: labels.to_vec(),
        root: Some(labels[file.root].clone()),
        q: None,
        eta_vertex: None,
        theta_vertex: None,
        kappa: None,
        edges: topology
            .edges()
            .iter()
            .zip(edge_values)
            .map(|(e, w)| (labels[e.u].clone(), labels[e.v].clone(), w))
            .collect(),
    };
    match p {
        Parameterization::Mean => raw.q = list,
        Parameterization::Natural => raw.eta_vertex = list,
        Parameterization::Canonical => raw.theta_vertex = list,
        Parameterization::Centered => raw.kappa = list,
    }
    toml::to_string(&raw).expect("model files always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1: &str = r#"
parameterization = "mean"
vertices = ["0", "1", "2", "3", "4", "5", "6"]
q = 0.01
edges = [["0", "1", 0.7], ["0", "2", 0.7], ["1", "3", 0.7], ["1", "4", 0.7],
         ["2", "5", 0.7], ["2", "6", 0.7]]
"#;

    #[test]
    fn parses_mean_file() {
        let f = parse_model(TABLE1).unwrap();
        let ModelSpec::Mean(m) = &f.spec else {
            panic!()
        };
        assert_eq!(m.d(), 7);
        assert!(m.q().iter().all(|&q| q == 0.01));
        assert_eq!(f.root, 0);
    }

    #[test]
    fn vertex_value_forms() {
        let text = r#"
vertices = ["x", "y"]
root = "y"
q = { y = 0.2, x = 0.4 }
edges = [["y", "x", 0.1]]
"#;
        let f = parse_model(text).unwrap();
        let ModelSpec::Mean(m) = &f.spec else {
            panic!()
        };
        assert_eq!(m.q(), &[0.4, 0.2]);
        assert_eq!(m.tree().root(), 1);
        let text = "vertices = [\"x\", \"y\"]\nq = [0.4]\nedges = [[\"x\", \"y\", 0.1]]\n";
        assert!(matches!(
            parse_model(text),
            Err(ModelFileError::Field { .. })
        ));
    }

    #[test]
    fn reports_positions_and_fields() {
        let err = parse_model("vertices = [\"a\"]\nq = \n").unwrap_err();
        match err {
            ModelFileError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let err =
            parse_model("vertices = [\"a\", \"b\"]\nq = 0.2\nedges = [[\"a\", \"c\", 0.1]]\n")
                .unwrap_err();
        assert!(matches!(err, ModelFileError::Field { ref field, .. } if field == "edges"));
        let err = parse_model("vertices = [\"a\"]\neta_vertex = 0.2\n").unwrap_err();
        assert!(matches!(err, ModelFileError::Field { .. }));
        let err =
            parse_model("vertices = [\"a\", \"b\"]\nq = 0.01\nedges = [[\"a\", \"b\", -0.5]]\n")
                .unwrap_err();
        assert!(matches!(err, ModelFileError::Model(ModelError::Invalid(_))));
    }

    #[test]
    fn round_trip_through_text() {
        let f = parse_model(TABLE1).unwrap();
        let again = parse_model(&to_toml(&f)).unwrap();
        assert_eq!(f, again);

        let natural = ModelFile {
            spec: f.spec.convert(Parameterization::Natural, 0).unwrap(),
            root: 0,
        };
        let back = parse_model(&to_toml(&natural)).unwrap();
        assert_eq!(natural, back);
        let mean = back.spec.to_mean(0).unwrap();
        let ModelSpec::Mean(orig) = &f.spec else {
            panic!()
        };
        for (a, b) in mean.alpha().iter().zip(orig.alpha()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
