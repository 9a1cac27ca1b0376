//! Synthetic benchmark protocol: shuffled noisy copies of one random graph.
//!
//! A run builds one Erdős–Rényi base graph with uniform attributes, makes
//! `n_copies` vertex-shuffled copies (copy 0 keeps the base labelling), adds
//! i.i.d. Gaussian attribute noise to every copy, and finally converts a
//! random subset of vertices per copy into disconnected dummies.  The ground
//! truth is the expansion of the shuffle permutations with dummy vertices
//! left unmatched, and it ships inside the returned collection.
//!
//! The sweep harnesses rerun the full pipeline per grid point and repeat,
//! scoring the ascent solver against a vertex-only spectral baseline.  Each
//! (sigma, max_removed, repeat) cell derives its own generator seed from the
//! base seed and the cell values, so two sweeps that share a cell see
//! identical data no matter how their grids are shaped.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::affinity::{build_phi, build_vertex_affinity};
use crate::consistency::{BulkPermutation, PartialPerm, UniverseAssignment};
use crate::graphs::{default_dummy_attr, AttributedGraph, GraphCollection};
use crate::kernels::KernelSpec;
use crate::metrics::{score, strip_dummy_matches};
use crate::projectors::match_eig;
use crate::solver::{solve, SolverConfig};
use crate::{from_f64, from_usize, Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec<T> {
    pub m: usize,
    pub edge_prob: f64,
    pub attr_dim: usize,
    pub n_copies: usize,
    pub noise_sigma: T,
    pub max_removed: usize,
    pub seed: u64,
}

impl<T: Real> SynthSpec<T> {
    /// Benchmark defaults: 10 copies of a 50-vertex graph, edge probability
    /// 0.05, 10-dimensional attributes, no noise, no removal.
    pub fn protocol(seed: u64) -> Self {
        SynthSpec {
            m: 50,
            edge_prob: 0.05,
            attr_dim: 10,
            n_copies: 10,
            noise_sigma: T::zero(),
            max_removed: 0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Validation("graphs need at least one vertex".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::Validation(format!(
                "edge probability {} outside [0, 1]",
                self.edge_prob
            )));
        }
        if self.attr_dim == 0 {
            return Err(Error::Validation("attribute dimension must be at least 1".into()));
        }
        if self.n_copies == 0 {
            return Err(Error::Validation("need at least one copy".into()));
        }
        if !(self.noise_sigma >= T::zero()) || !self.noise_sigma.is_finite() {
            return Err(Error::Validation("noise sigma must be finite and non-negative".into()));
        }
        if self.max_removed >= self.m {
            return Err(Error::Validation(format!(
                "cannot remove up to {} vertices from graphs of {}",
                self.max_removed, self.m
            )));
        }
        Ok(())
    }
}

/// Generates a collection according to `spec`, ground truth included.
pub fn generate<T: Real>(spec: &SynthSpec<T>) -> Result<GraphCollection<T>> {
    spec.validate()?;
    let (m, d, n) = (spec.m, spec.attr_dim, spec.n_copies);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // base graph: ER edges over unordered pairs, U(0, 1) attributes
    let base_attrs: Vec<Vec<f64>> =
        (0..m).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let mut base_edges: Vec<(usize, usize)> = Vec::new();
    let mut base_edge_attrs: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if rng.random::<f64>() < spec.edge_prob {
                base_edges.push((i, j));
                base_edge_attrs.push((0..d).map(|_| rng.random::<f64>()).collect());
            }
        }
    }

    // placements[c][u] = slot of base vertex u in copy c; copy 0 unshuffled
    let mut placements: Vec<Vec<usize>> = vec![(0..m).collect()];
    for _ in 1..n {
        let mut p: Vec<usize> = (0..m).collect();
        p.shuffle(&mut rng);
        placements.push(p);
    }
    let mut vertex_attrs: Vec<Vec<Vec<f64>>> = placements
        .iter()
        .map(|p| {
            let mut attrs = vec![Vec::new(); m];
            for u in 0..m {
                attrs[p[u]] = base_attrs[u].clone();
            }
            attrs
        })
        .collect();
    let edges: Vec<Vec<(usize, usize)>> = placements
        .iter()
        .map(|p| base_edges.iter().map(|&(a, b)| (p[a], p[b])).collect())
        .collect();
    let mut edge_attrs: Vec<Vec<Vec<f64>>> = vec![base_edge_attrs.clone(); n];

    // the same noise model on every copy, the base-labelled one included
    let sigma = spec.noise_sigma.to_f64().expect("sigma is finite");
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("validated sigma");
        for c in 0..n {
            for a in vertex_attrs[c].iter_mut().chain(edge_attrs[c].iter_mut()) {
                for x in a.iter_mut() {
                    *x += normal.sample(&mut rng);
                }
            }
        }
    }

    // removal happens after the noise: pick 0..=max_removed slots per copy
    let mut removed = vec![vec![false; m]; n];
    if spec.max_removed > 0 {
        for flags in removed.iter_mut() {
            let k = rng.random_range(0..=spec.max_removed);
            let mut slots: Vec<usize> = (0..m).collect();
            slots.shuffle(&mut rng);
            for &v in slots.iter().take(k) {
                flags[v] = true;
            }
        }
    }

    // dummy attributes are scaled off the noisy collection as a whole
    let provisional = build_graphs::<T>(&vertex_attrs, &edges, &edge_attrs, None)?;
    let dummy_attr = default_dummy_attr(&provisional);
    let graphs = build_graphs(&vertex_attrs, &edges, &edge_attrs, Some((&removed, &dummy_attr)))?;

    let assigns: Vec<Vec<usize>> = placements
        .iter()
        .map(|p| {
            let mut inv = vec![0; m];
            for (u, &slot) in p.iter().enumerate() {
                inv[slot] = u;
            }
            inv
        })
        .collect();
    let full = UniverseAssignment::from_permutations(assigns)?.expand();
    let truth = unmatch_removed(&full, &removed)?;
    GraphCollection::new(graphs, d, Some(truth))
}

fn build_graphs<T: Real>(
    vertex_attrs: &[Vec<Vec<f64>>],
    edges: &[Vec<(usize, usize)>],
    edge_attrs: &[Vec<Vec<f64>>],
    removal: Option<(&[Vec<bool>], &[T])>,
) -> Result<Vec<AttributedGraph<T>>> {
    let m = vertex_attrs[0].len();
    (0..vertex_attrs.len())
        .map(|c| {
            let gone = removal.map(|(r, _)| &r[c]);
            let attrs = (0..m)
                .map(|v| {
                    if gone.is_some_and(|g| g[v]) {
                        removal.expect("checked").1.to_vec()
                    } else {
                        vertex_attrs[c][v].iter().map(|&x| from_f64(x)).collect()
                    }
                })
                .collect();
            let mut kept_edges = Vec::new();
            let mut kept_attrs: Vec<Vec<T>> = Vec::new();
            for (e, &(a, b)) in edges[c].iter().enumerate() {
                if gone.is_some_and(|g| g[a] || g[b]) {
                    continue;
                }
                kept_edges.push((a, b));
                kept_attrs.push(edge_attrs[c][e].iter().map(|&x| from_f64(x)).collect());
            }
            let mask = (0..m).map(|v| gone.is_some_and(|g| g[v])).collect();
            AttributedGraph::new(attrs, kept_edges, kept_attrs, mask)
        })
        .collect()
}

/// Drops every cross-graph match that touches a removed vertex; diagonal
/// blocks stay identity.
fn unmatch_removed(full: &BulkPermutation, removed: &[Vec<bool>]) -> Result<BulkPermutation> {
    let (n, m) = (full.n_graphs(), full.block_size());
    let mut blocks = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                blocks.push(full.block(i, i).clone());
                continue;
            }
            let map = (0..m)
                .map(|v| full.block(i, j).apply(v).filter(|&w| !removed[i][v] && !removed[j][w]))
                .collect();
            blocks.push(PartialPerm::from_map(map)?);
        }
    }
    BulkPermutation::from_blocks(n, m, blocks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMethod {
    /// Full ascent on the kernelized objective.
    Solver,
    /// Spectral matching of the vertex affinity alone.
    MatchEigKv,
}

impl SweepMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepMethod::Solver => "solver",
            SweepMethod::MatchEigKv => "matcheig_kv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub sigma: T,
    pub max_removed: usize,
    pub method: SweepMethod,
    pub f1_mean: T,
    pub f1_std: T,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig<T> {
    pub vertex_kernel: KernelSpec<T>,
    pub edge_kernel: KernelSpec<T>,
    pub solver: SolverConfig<T>,
    pub repeats: usize,
}

/// F1 of both methods across a noise grid, holding `base.max_removed` fixed.
pub fn noise_sweep<T: Real>(
    base: &SynthSpec<T>,
    sigmas: &[T],
    cfg: &SweepConfig<T>,
) -> Result<Vec<SweepRow<T>>> {
    removal_sweep(base, &[base.max_removed], sigmas, cfg)
}

/// F1 of both methods across the (sigma, max_removed) grid.  Row order is
/// sigma-major, then removal, then method (solver before baseline).
pub fn removal_sweep<T: Real>(
    base: &SynthSpec<T>,
    removals: &[usize],
    sigmas: &[T],
    cfg: &SweepConfig<T>,
) -> Result<Vec<SweepRow<T>>> {
    if cfg.repeats == 0 {
        return Err(Error::Validation("sweeps need at least one repeat".into()));
    }
    if sigmas.is_empty() || removals.is_empty() {
        return Err(Error::Validation("sweep grids must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(sigmas.len() * removals.len() * 2);
    for &sigma in sigmas {
        for &mr in removals {
            let mut f1s: [Vec<T>; 2] = [Vec::new(), Vec::new()];
            for rep in 0..cfg.repeats {
                let mut point = *base;
                point.noise_sigma = sigma;
                point.max_removed = mr;
                point.seed = cell_seed(
                    base.seed,
                    sigma.to_f64().expect("finite sigma"),
                    mr,
                    rep,
                );
                let (s, b) = run_cell(&point, cfg)?;
                f1s[0].push(s);
                f1s[1].push(b);
            }
            for (vals, method) in f1s.iter().zip([SweepMethod::Solver, SweepMethod::MatchEigKv]) {
                let (f1_mean, f1_std) = mean_std(vals);
                rows.push(SweepRow {
                    sigma,
                    max_removed: mr,
                    method,
                    f1_mean,
                    f1_std,
                    repeats: cfg.repeats,
                });
            }
        }
    }
    Ok(rows)
}

/// One generated instance, solved and scored by both methods.
fn run_cell<T: Real>(spec: &SynthSpec<T>, cfg: &SweepConfig<T>) -> Result<(T, T)> {
    let c = generate(spec)?;
    let truth = c.ground_truth().expect("generate attaches the truth").clone();
    let kv = build_vertex_affinity(&c, &cfg.vertex_kernel)?;
    let phi = build_phi(&c, &cfg.edge_kernel)?;
    let (x, _) = solve(&c, &kv, &phi, &cfg.solver)?;
    let solver_f1 = score(&strip_dummy_matches(&x, &c)?, &truth)?.f1;
    let rank = cfg.solver.projector.rank;
    let b = match_eig(kv.matrix(), c.n_graphs(), c.num_vertices(), rank)?;
    let baseline_f1 = score(&strip_dummy_matches(&b, &c)?, &truth)?.f1;
    Ok((solver_f1, baseline_f1))
}

fn mean_std<T: Real>(vals: &[T]) -> (T, T) {
    let len = from_usize::<T>(vals.len());
    let mean = vals.iter().fold(T::zero(), |a, &b| a + b) / len;
    if vals.len() < 2 {
        return (mean, T::zero());
    }
    let ss = vals.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean));
    (mean, (ss / (len - T::one())).sqrt())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one sweep cell, derived from the cell's values rather than grid
/// positions so overlapping grids agree.
fn cell_seed(base: u64, sigma: f64, max_removed: usize, repeat: usize) -> u64 {
    let mut s = splitmix64(base);
    s = splitmix64(s ^ sigma.to_bits());
    s = splitmix64(s ^ max_removed as u64);
    splitmix64(s ^ repeat as u64)
}
