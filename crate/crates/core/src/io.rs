//! JSON file formats for graphs, datasets and learned models.
//!
//! A graph is stored as
//! `{"attr_dim": d, "undirected": bool, "vertices": [[..]], "edges": [{"i", "j", "attr"}]}`.
//! Only nonzero edges are listed. Floats are written in shortest round-trip
//! form, so reading back a written file reproduces every cell bit for bit.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeVector, AttributedGraph, GraphDataset};
use crate::learners::{AdalineModel, Codebook};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeJson {
    pub i: usize,
    pub j: usize,
    pub attr: AttributeVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub attr_dim: usize,
    pub undirected: bool,
    pub vertices: Vec<AttributeVector>,
    #[serde(default)]
    pub edges: Vec<EdgeJson>,
}

impl TryFrom<GraphJson> for AttributedGraph {
    type Error = Error;

    fn try_from(g: GraphJson) -> Result<Self> {
        if let Some(v) = g.vertices.iter().find(|v| v.len() != g.attr_dim) {
            return Err(Error::DimensionMismatch {
                expected: g.attr_dim,
                found: v.len(),
            });
        }
        let edges: Vec<_> = g.edges.into_iter().map(|e| (e.i, e.j, e.attr)).collect();
        AttributedGraph::from_edge_list(&g.vertices, &edges, g.undirected)
    }
}

impl From<AttributedGraph> for GraphJson {
    fn from(g: AttributedGraph) -> Self {
        GraphJson::from(&g)
    }
}

impl From<&AttributedGraph> for GraphJson {
    fn from(g: &AttributedGraph) -> Self {
        let (vertices, edges, undirected) = g.to_edge_list();
        GraphJson {
            attr_dim: g.dim(),
            undirected,
            vertices,
            edges: edges.into_iter().map(|(i, j, attr)| EdgeJson { i, j, attr }).collect(),
        }
    }
}

impl Serialize for AttributedGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for AttributedGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let g = GraphJson::deserialize(d)?;
        AttributedGraph::try_from(g).map_err(serde::de::Error::custom)
    }
}

/// On disk a dataset is either a bare array of graphs or an object with
/// `graphs` and optional `labels`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabeledJson {
    graphs: Vec<AttributedGraph>,
    #[serde(default)]
    labels: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct AdalineJson {
    #[serde(flatten)]
    weight: GraphJson,
    bias: f64,
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T, context: &str) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: context.to_string(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn from_json_str<T: DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        context: context.to_string(),
        source,
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json_str(&read_text(path)?, &path.display().to_string())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value, &path.display().to_string())?)
}

pub fn read_graph(path: &Path) -> Result<AttributedGraph> {
    read_json(path)
}

pub fn write_graph(path: &Path, g: &AttributedGraph) -> Result<()> {
    write_json(path, g)
}

pub fn dataset_to_json(graphs: &[AttributedGraph], labels: Option<&[f64]>) -> Result<String> {
    match labels {
        None => to_json_string(graphs, "dataset"),
        Some(l) => to_json_string(
            &LabeledJson {
                graphs: graphs.to_vec(),
                labels: Some(l.to_vec()),
            },
            "dataset",
        ),
    }
}

pub fn dataset_from_json(text: &str, context: &str) -> Result<GraphDataset> {
    let json_err = |source| Error::Json {
        context: context.to_string(),
        source,
    };
    let value: serde_json::Value = from_json_str(text, context)?;
    let (graphs, labels) = if value.is_array() {
        (serde_json::from_value(value).map_err(json_err)?, None)
    } else {
        let l: LabeledJson = serde_json::from_value(value).map_err(json_err)?;
        (l.graphs, l.labels)
    };
    GraphDataset::new(graphs, labels)
}

/// Reads a dataset and pads it to its common order.
pub fn read_dataset(path: &Path) -> Result<GraphDataset> {
    dataset_from_json(&read_text(path)?, &path.display().to_string())
}

pub fn write_dataset(path: &Path, graphs: &[AttributedGraph], labels: Option<&[f64]>) -> Result<()> {
    write_text(path, &dataset_to_json(graphs, labels)?)
}

pub fn read_codebook(path: &Path) -> Result<Codebook> {
    Codebook::new(read_json(path)?)
}

pub fn write_codebook(path: &Path, codebook: &Codebook) -> Result<()> {
    write_json(path, &codebook.centroids)
}

pub fn adaline_to_json(model: &AdalineModel) -> Result<String> {
    to_json_string(
        &AdalineJson {
            weight: GraphJson::from(&model.weight),
            bias: model.bias,
        },
        "adaline model",
    )
}

pub fn adaline_from_json(text: &str, context: &str) -> Result<AdalineModel> {
    let m: AdalineJson = from_json_str(text, context)?;
    Ok(AdalineModel {
        weight: AttributedGraph::try_from(m.weight)?,
        bias: m.bias,
    })
}

pub fn read_adaline(path: &Path) -> Result<AdalineModel> {
    adaline_from_json(&read_text(path)?, &path.display().to_string())
}

pub fn write_adaline(path: &Path, model: &AdalineModel) -> Result<()> {
    write_text(path, &adaline_to_json(model)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIANGLE: &str = r#"{
        "attr_dim": 2, "undirected": true,
        "vertices": [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]],
        "edges": [{"i": 0, "j": 1, "attr": [0.1, 0.2]}, {"i": 1, "j": 2, "attr": [1e-300, 3.0]}]
    }"#;

    #[test]
    fn parses_and_rewrites_graph() {
        let g: AttributedGraph = from_json_str(TRIANGLE, "t").unwrap();
        assert_eq!(g.order(), 3);
        assert_eq!(g.cell(1, 0), &[0.1, 0.2]);
        assert_eq!(g.cell(2, 1), &[1e-300, 3.0]);
        let back: AttributedGraph = from_json_str(&to_json_string(&g, "t").unwrap(), "t").unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn rejects_bad_graphs() {
        let bad_dim = r#"{"attr_dim": 1, "undirected": true, "vertices": [[1.0, 2.0]], "edges": []}"#;
        assert!(from_json_str::<AttributedGraph>(bad_dim, "x").is_err());
        let bad_edge = r#"{"attr_dim": 1, "undirected": true, "vertices": [[1.0]], "edges": [{"i": 0, "j": 3, "attr": [1.0]}]}"#;
        let err = from_json_str::<AttributedGraph>(bad_edge, "x").unwrap_err().to_string();
        assert!(err.contains('3'), "{err}");
        assert!(from_json_str::<AttributedGraph>("{", "x").is_err());
    }

    #[test]
    fn dataset_forms() {
        let g: AttributedGraph = from_json_str(TRIANGLE, "t").unwrap();
        let plain = dataset_to_json(&[g.clone(), g.clone()], None).unwrap();
        let ds = dataset_from_json(&plain, "p").unwrap();
        assert_eq!(ds.len(), 2);
        assert!(ds.labels.is_none());
        let labeled = dataset_to_json(&[g.clone()], Some(&[-1.0])).unwrap();
        let ds = dataset_from_json(&labeled, "l").unwrap();
        assert_eq!(ds.labels, Some(vec![-1.0]));
    }

    #[test]
    fn adaline_model_has_bias_field() {
        let g: AttributedGraph = from_json_str(TRIANGLE, "t").unwrap();
        let m = AdalineModel { weight: g, bias: -0.25 };
        let text = adaline_to_json(&m).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["bias"], -0.25);
        assert_eq!(v["attr_dim"], 2);
        assert_eq!(adaline_from_json(&text, "m").unwrap(), m);
    }
}
