//! Attributed graphs, collections, and the dataset file format.
//!
//! Graphs are undirected: an edge is stored once and mirrored where the edge
//! features are assembled.  Every graph in a collection has the same vertex
//! count; collections with naturally unequal sizes are padded with dummy
//! vertices first (`pad_with_dummies`).  Dummies carry a constant, deliberately
//! out-of-scale attribute vector and never touch an edge.
//!
//! Datasets are single JSON documents: top-level `n`, `m`, `d_v`, `d_e`, a
//! `graphs` array (per graph `vertex_attrs`, `edges`, `edge_attrs`,
//! `dummy_mask`), and an optional `ground_truth` dense 0/1 matching matrix,
//! row-major, `n*m` on a side.  Indices are 0-based throughout.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consistency::BulkPermutation;
use crate::{from_f64, Error, Real, Result};

pub const SPEC_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph<T> {
    vertex_attrs: Vec<Vec<T>>,
    edges: Vec<(usize, usize)>,
    edge_attrs: Vec<Vec<T>>,
    dummy: Vec<bool>,
}

impl<T: Real> AttributedGraph<T> {
    /// Validating constructor.  `edges` holds each undirected edge once; none
    /// of them may touch a dummy vertex or repeat an unordered pair.
    pub fn new(
        vertex_attrs: Vec<Vec<T>>,
        edges: Vec<(usize, usize)>,
        edge_attrs: Vec<Vec<T>>,
        dummy: Vec<bool>,
    ) -> Result<Self> {
        let m = vertex_attrs.len();
        if m == 0 {
            return Err(Error::Validation("graphs need at least one vertex".into()));
        }
        let d_v = vertex_attrs[0].len();
        for (v, a) in vertex_attrs.iter().enumerate() {
            if a.len() != d_v {
                return Err(Error::Dimension(format!(
                    "vertex {v} has {} attributes, vertex 0 has {d_v}",
                    a.len()
                )));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("vertex {v} has a non-finite attribute")));
            }
        }
        if dummy.len() != m {
            return Err(Error::Dimension(format!(
                "dummy mask has length {}, graph has {m} vertices",
                dummy.len()
            )));
        }
        if edge_attrs.len() != edges.len() {
            return Err(Error::Dimension(format!(
                "{} edges but {} edge attribute vectors",
                edges.len(),
                edge_attrs.len()
            )));
        }
        let d_e = edge_attrs.first().map(|a| a.len());
        let mut seen = std::collections::HashSet::new();
        for (e, (&(i, j), a)) in edges.iter().zip(&edge_attrs).enumerate() {
            if i >= m || j >= m {
                return Err(Error::Validation(format!(
                    "edge {e} = ({i}, {j}) out of range for {m} vertices"
                )));
            }
            if dummy[i] || dummy[j] {
                return Err(Error::Validation(format!(
                    "edge {e} = ({i}, {j}) touches a dummy vertex"
                )));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::Validation(format!("edge ({i}, {j}) appears twice")));
            }
            if Some(a.len()) != d_e {
                return Err(Error::Dimension(format!(
                    "edge {e} has {} attributes, edge 0 has {}",
                    a.len(),
                    d_e.unwrap()
                )));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("edge {e} has a non-finite attribute")));
            }
        }
        Ok(AttributedGraph { vertex_attrs, edges, edge_attrs, dummy })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_attrs.len()
    }

    pub fn vertex_dim(&self) -> usize {
        self.vertex_attrs[0].len()
    }

    /// Edge attribute dimension, unknown when the graph has no edges.
    pub fn edge_dim(&self) -> Option<usize> {
        self.edge_attrs.first().map(|a| a.len())
    }

    pub fn vertex_attr(&self, v: usize) -> &[T] {
        &self.vertex_attrs[v]
    }

    pub fn vertex_attrs(&self) -> &[Vec<T>] {
        &self.vertex_attrs
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_attr(&self, e: usize) -> &[T] {
        &self.edge_attrs[e]
    }

    pub fn is_dummy(&self, v: usize) -> bool {
        self.dummy[v]
    }

    pub fn dummy_mask(&self) -> &[bool] {
        &self.dummy
    }

    pub fn num_dummies(&self) -> usize {
        self.dummy.iter().filter(|d| **d).count()
    }
}

/// Appends dummy vertices with the given attribute vector until the graph has
/// `target_m` vertices.
pub fn pad_with_dummies<T: Real>(
    g: &AttributedGraph<T>,
    target_m: usize,
    dummy_attr: &[T],
) -> Result<AttributedGraph<T>> {
    let m = g.num_vertices();
    if target_m < m {
        return Err(Error::Validation(format!(
            "cannot pad {m} vertices down to {target_m}"
        )));
    }
    if dummy_attr.len() != g.vertex_dim() {
        return Err(Error::Dimension(format!(
            "dummy attribute has dim {}, graph uses {}",
            dummy_attr.len(),
            g.vertex_dim()
        )));
    }
    let mut vertex_attrs = g.vertex_attrs.clone();
    let mut dummy = g.dummy.clone();
    vertex_attrs.resize(target_m, dummy_attr.to_vec());
    dummy.resize(target_m, true);
    AttributedGraph::new(vertex_attrs, g.edges.clone(), g.edge_attrs.clone(), dummy)
}

/// Drops every dummy vertex, keeping real vertices in their original order.
pub fn strip_dummies<T: Real>(g: &AttributedGraph<T>) -> AttributedGraph<T> {
    let mut remap = vec![usize::MAX; g.num_vertices()];
    let mut vertex_attrs = Vec::new();
    for v in 0..g.num_vertices() {
        if !g.dummy[v] {
            remap[v] = vertex_attrs.len();
            vertex_attrs.push(g.vertex_attrs[v].clone());
        }
    }
    let edges = g.edges.iter().map(|&(i, j)| (remap[i], remap[j])).collect();
    let dummy = vec![false; vertex_attrs.len()];
    AttributedGraph::new(vertex_attrs, edges, g.edge_attrs.clone(), dummy)
        .expect("stripping dummies preserves validity")
}

/// Default dummy attribute: a constant vector at ten times the largest
/// attribute magnitude in the collection, so dummies pair with each other
/// rather than with real vertices.
pub fn default_dummy_attr<T: Real>(graphs: &[AttributedGraph<T>]) -> Vec<T> {
    let mut max_abs = T::zero();
    for g in graphs {
        for a in &g.vertex_attrs {
            for &x in a {
                max_abs = max_abs.max(x.abs());
            }
        }
        for a in &g.edge_attrs {
            for &x in a {
                max_abs = max_abs.max(x.abs());
            }
        }
    }
    let d_v = graphs.first().map_or(0, |g| g.vertex_dim());
    vec![from_f64::<T>(10.0) * max_abs; d_v]
}

/// A collection of equally sized attributed graphs, optionally with the true
/// matching attached.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphCollection<T> {
    graphs: Vec<AttributedGraph<T>>,
    d_e: usize,
    ground_truth: Option<BulkPermutation>,
}

impl<T: Real> GraphCollection<T> {
    /// `d_e` must be given explicitly because edge lists may be empty.
    pub fn new(
        graphs: Vec<AttributedGraph<T>>,
        d_e: usize,
        ground_truth: Option<BulkPermutation>,
    ) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Validation("collections need at least one graph".into()));
        }
        let m = graphs[0].num_vertices();
        let d_v = graphs[0].vertex_dim();
        for (l, g) in graphs.iter().enumerate() {
            if g.num_vertices() != m {
                return Err(Error::Dimension(format!(
                    "graph {l} has {} vertices, graph 0 has {m}; pad with dummies first",
                    g.num_vertices()
                )));
            }
            if g.vertex_dim() != d_v {
                return Err(Error::Dimension(format!(
                    "graph {l} has vertex dim {}, graph 0 has {d_v}",
                    g.vertex_dim()
                )));
            }
            if let Some(de) = g.edge_dim() {
                if de != d_e {
                    return Err(Error::Dimension(format!(
                        "graph {l} has edge dim {de}, collection declares {d_e}"
                    )));
                }
            }
        }
        if let Some(t) = &ground_truth {
            if t.n_graphs() != graphs.len() || t.block_size() != m {
                return Err(Error::Dimension(format!(
                    "ground truth is {} blocks of {}, collection is {} graphs of {m}",
                    t.n_graphs(),
                    t.block_size(),
                    graphs.len()
                )));
            }
        }
        Ok(GraphCollection { graphs, d_e, ground_truth })
    }

    pub fn n_graphs(&self) -> usize {
        self.graphs.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.graphs[0].num_vertices()
    }

    pub fn vertex_dim(&self) -> usize {
        self.graphs[0].vertex_dim()
    }

    pub fn edge_dim(&self) -> usize {
        self.d_e
    }

    pub fn graph(&self, l: usize) -> &AttributedGraph<T> {
        &self.graphs[l]
    }

    pub fn graphs(&self) -> &[AttributedGraph<T>] {
        &self.graphs
    }

    pub fn ground_truth(&self) -> Option<&BulkPermutation> {
        self.ground_truth.as_ref()
    }
}

// ---------------------------------------------------------------------------
// Dataset file format

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    vertex_attrs: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
    edge_attrs: Vec<Vec<f64>>,
    dummy_mask: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct DatasetDoc {
    #[serde(default)]
    spec_version: Option<String>,
    n: usize,
    m: usize,
    d_v: usize,
    d_e: usize,
    graphs: Vec<GraphDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<Vec<Vec<u8>>>,
}

fn collection_to_doc<T: Real>(c: &GraphCollection<T>) -> DatasetDoc {
    let to_f64 = |a: &Vec<T>| a.iter().map(|x| x.to_f64().expect("Real fits f64")).collect();
    DatasetDoc {
        spec_version: Some(SPEC_VERSION.to_string()),
        n: c.n_graphs(),
        m: c.num_vertices(),
        d_v: c.vertex_dim(),
        d_e: c.edge_dim(),
        graphs: c
            .graphs
            .iter()
            .map(|g| GraphDoc {
                vertex_attrs: g.vertex_attrs.iter().map(to_f64).collect(),
                edges: g.edges.iter().map(|&(i, j)| [i, j]).collect(),
                edge_attrs: g.edge_attrs.iter().map(to_f64).collect(),
                dummy_mask: g.dummy.iter().map(|&d| d as u8).collect(),
            })
            .collect(),
        ground_truth: c.ground_truth.as_ref().map(|t| t.to_binary_rows()),
    }
}

fn doc_to_collection<T: Real>(doc: DatasetDoc) -> Result<GraphCollection<T>> {
    if let Some(v) = &doc.spec_version {
        if v != SPEC_VERSION {
            return Err(Error::Validation(format!(
                "unsupported spec_version {v:?}, this build reads {SPEC_VERSION:?}"
            )));
        }
    }
    if doc.graphs.len() != doc.n {
        return Err(Error::Validation(format!(
            "document declares n = {} but contains {} graphs",
            doc.n,
            doc.graphs.len()
        )));
    }
    let from = |a: &[f64]| a.iter().map(|&x| from_f64::<T>(x)).collect::<Vec<T>>();
    let mut graphs = Vec::with_capacity(doc.n);
    for (l, g) in doc.graphs.iter().enumerate() {
        if g.vertex_attrs.len() != doc.m {
            return Err(Error::Validation(format!(
                "graph {l} has {} vertices, document declares m = {}",
                g.vertex_attrs.len(),
                doc.m
            )));
        }
        if g.vertex_attrs.iter().any(|a| a.len() != doc.d_v) {
            return Err(Error::Validation(format!(
                "graph {l} has a vertex attribute of the wrong dim, document declares d_v = {}",
                doc.d_v
            )));
        }
        if g.edge_attrs.iter().any(|a| a.len() != doc.d_e) {
            return Err(Error::Validation(format!(
                "graph {l} has an edge attribute of the wrong dim, document declares d_e = {}",
                doc.d_e
            )));
        }
        let mut dummy = Vec::with_capacity(g.dummy_mask.len());
        for (v, &flag) in g.dummy_mask.iter().enumerate() {
            match flag {
                0 => dummy.push(false),
                1 => dummy.push(true),
                other => {
                    return Err(Error::Validation(format!(
                        "graph {l} dummy_mask[{v}] is {other}, expected 0 or 1"
                    )));
                }
            }
        }
        graphs.push(
            AttributedGraph::new(
                g.vertex_attrs.iter().map(|a| from(a)).collect(),
                g.edges.iter().map(|&[i, j]| (i, j)).collect(),
                g.edge_attrs.iter().map(|a| from(a)).collect(),
                dummy,
            )
            .map_err(|e| Error::Validation(format!("graph {l}: {e}")))?,
        );
    }
    let ground_truth = doc
        .ground_truth
        .as_ref()
        .map(|rows| BulkPermutation::from_binary_rows(rows, doc.n, doc.m))
        .transpose()
        .map_err(|e| Error::Validation(format!("ground_truth: {e}")))?;
    GraphCollection::new(graphs, doc.d_e, ground_truth)
}

pub fn save_dataset<T: Real, P: AsRef<Path>>(path: P, c: &GraphCollection<T>) -> Result<()> {
    let file = File::create(path)?;
    serde_json::to_writer(BufWriter::new(file), &collection_to_doc(c))
        .map_err(|e| Error::Io(std::io::Error::other(e)))
}

pub fn load_dataset<T: Real, P: AsRef<Path>>(path: P) -> Result<GraphCollection<T>> {
    let file = File::open(path)?;
    let doc: DatasetDoc = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Parse(e.to_string()))?;
    doc_to_collection(doc)
}
