//! Random fixtures shared by the unit tests of several modules.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::consistency::{BulkPermutation, PartialPerm, UniverseAssignment};
use crate::graphs::{AttributedGraph, GraphCollection};

/// Collection of dense-ish random graphs with attributes drawn from `range`.
pub(crate) fn random_collection_in(
    rng: &mut StdRng,
    n: usize,
    m: usize,
    d_v: usize,
    d_e: usize,
    edge_prob: f64,
    range: (f64, f64),
) -> GraphCollection<f64> {
    let (lo, hi) = range;
    let graphs = (0..n)
        .map(|_| {
            let attrs = (0..m)
                .map(|_| (0..d_v).map(|_| rng.random_range(lo..hi)).collect())
                .collect();
            let mut edges = Vec::new();
            let mut edge_attrs = Vec::new();
            for i in 0..m {
                for j in i + 1..m {
                    if rng.random::<f64>() < edge_prob {
                        edges.push((i, j));
                        edge_attrs.push((0..d_e).map(|_| rng.random_range(lo..hi)).collect());
                    }
                }
            }
            AttributedGraph::new(attrs, edges, edge_attrs, vec![false; m]).unwrap()
        })
        .collect();
    GraphCollection::new(graphs, d_e, None).unwrap()
}

pub(crate) fn random_collection(
    rng: &mut StdRng,
    n: usize,
    m: usize,
    d_v: usize,
    d_e: usize,
    edge_prob: f64,
) -> GraphCollection<f64> {
    random_collection_in(rng, n, m, d_v, d_e, edge_prob, (-1.0, 1.0))
}

/// Collection of `n` vertex-relabelled copies of one random graph, with the
/// ground truth attached.  Copy 0 keeps the base labelling.  `noise` jitters
/// every attribute of every copy by U(-noise, noise).
pub(crate) fn shuffled_copies(
    rng: &mut StdRng,
    n: usize,
    m: usize,
    d_v: usize,
    d_e: usize,
    edge_prob: f64,
    range: (f64, f64),
    noise: f64,
) -> GraphCollection<f64> {
    let (lo, hi) = range;
    let base_attrs: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..d_v).map(|_| rng.random_range(lo..hi)).collect())
        .collect();
    let mut base_edges = Vec::new();
    let mut base_edge_attrs: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if rng.random::<f64>() < edge_prob {
                base_edges.push((i, j));
                base_edge_attrs.push((0..d_e).map(|_| rng.random_range(lo..hi)).collect());
            }
        }
    }
    let jitter = |x: &f64, rng: &mut StdRng| {
        if noise > 0.0 {
            x + rng.random_range(-noise..noise)
        } else {
            *x
        }
    };
    let mut graphs = Vec::new();
    let mut assigns: Vec<Vec<usize>> = Vec::new();
    for copy in 0..n {
        // base vertex u lands at slot p[u] of the copy
        let mut p: Vec<usize> = (0..m).collect();
        if copy > 0 {
            p.shuffle(rng);
        }
        let mut attrs = vec![Vec::new(); m];
        let mut inv = vec![0; m];
        for u in 0..m {
            attrs[p[u]] = base_attrs[u].iter().map(|x| jitter(x, rng)).collect();
            inv[p[u]] = u;
        }
        let edges = base_edges.iter().map(|&(a, b)| (p[a], p[b])).collect();
        let edge_attrs = base_edge_attrs
            .iter()
            .map(|ea| ea.iter().map(|x| jitter(x, rng)).collect())
            .collect();
        graphs.push(AttributedGraph::new(attrs, edges, edge_attrs, vec![false; m]).unwrap());
        assigns.push(inv);
    }
    let truth = UniverseAssignment::from_permutations(assigns).unwrap().expand();
    GraphCollection::new(graphs, d_e, Some(truth)).unwrap()
}

/// Cycle-consistent bulk permutation built from random full per-graph
/// permutations.
pub(crate) fn random_expand(rng: &mut StdRng, n: usize, m: usize) -> BulkPermutation {
    let perms = (0..n)
        .map(|_| {
            let mut p: Vec<usize> = (0..m).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    UniverseAssignment::from_permutations(perms).unwrap().expand()
}

/// Valid but generally not cycle-consistent bulk permutation; each block row
/// is matched with probability `fill`.
pub(crate) fn random_bulk(rng: &mut StdRng, n: usize, m: usize, fill: f64) -> BulkPermutation {
    let upper = (0..n * (n - 1) / 2)
        .map(|_| {
            let mut cols: Vec<usize> = (0..m).collect();
            cols.shuffle(rng);
            let mut next = 0;
            let map = (0..m)
                .map(|_| {
                    if rng.random::<f64>() < fill {
                        next += 1;
                        Some(cols[next - 1])
                    } else {
                        None
                    }
                })
                .collect();
            PartialPerm::from_map(map).unwrap()
        })
        .collect();
    BulkPermutation::from_upper_triangle(n, m, upper).unwrap()
}
