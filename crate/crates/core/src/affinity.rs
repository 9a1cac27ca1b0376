//! Bulk affinity operands: the vertex kernel matrix and the edge feature
//! array a collection induces.
//!
//! For an `n`-graph collection with `m` vertices each, `build_vertex_affinity`
//! returns the `nm x nm` matrix whose `(i, j)` block is the vertex kernel
//! Gram between graphs `i` and `j`.  `build_phi` returns the `D x nm x nm`
//! feature array whose diagonal blocks hold one feature vector per directed
//! edge copy (undirected edges are mirrored); off-diagonal blocks are zero.
//!
//! The pairwise edge affinity never has to be materialized: for any matching
//! matrix `x`, `inner3(phi.dot_right(x), phi.dot_left(x))` equals the
//! quadratic form `vec(x)^T K_e vec(x)`.  [`explicit_edge_affinity`] builds
//! that `(nm)^2 x (nm)^2` matrix anyway for tiny instances so the identity
//! can be checked against an independent route.

use nalgebra::{DMatrix, DVector};

use crate::graphs::GraphCollection;
use crate::harray::FeatureArray3;
use crate::kernels::{gram, KernelKind, KernelSpec, RffMap};
use crate::{Error, Real, Result};

/// Vertex kernel values for every vertex pair across the collection.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexAffinity<T> {
    n: usize,
    m: usize,
    mat: DMatrix<T>,
}

impl<T: Real> VertexAffinity<T> {
    pub fn n_graphs(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.mat
    }

    pub fn block(&self, i: usize, j: usize) -> DMatrix<T> {
        self.mat.view((i * self.m, j * self.m), (self.m, self.m)).into_owned()
    }
}

/// Block-diagonal edge feature array plus its shape bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkEdgeFeatures<T> {
    n: usize,
    m: usize,
    array: FeatureArray3<T>,
}

impl<T: Real> BulkEdgeFeatures<T> {
    pub fn n_graphs(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    pub fn feature_dim(&self) -> usize {
        self.array.feature_dim()
    }

    pub fn array(&self) -> &FeatureArray3<T> {
        &self.array
    }

    /// Copy of diagonal block `k` as a standalone `D x m x m` array.
    pub fn diagonal_block(&self, k: usize) -> FeatureArray3<T> {
        let slices = (0..self.feature_dim())
            .map(|l| {
                self.array
                    .slice(l)
                    .view((k * self.m, k * self.m), (self.m, self.m))
                    .into_owned()
            })
            .collect();
        FeatureArray3::from_slices(slices).expect("block extraction preserves shape")
    }
}

/// Assembles the bulk vertex affinity; block `(j, i)` is always the exact
/// transpose of block `(i, j)`, so the matrix is symmetric.
pub fn build_vertex_affinity<T: Real>(
    c: &GraphCollection<T>,
    spec: &KernelSpec<T>,
) -> Result<VertexAffinity<T>> {
    spec.validate()?;
    let (n, m) = (c.n_graphs(), c.num_vertices());
    let mut mat = DMatrix::zeros(n * m, n * m);
    for i in 0..n {
        for j in i..n {
            let block = gram(spec, c.graph(i).vertex_attrs(), c.graph(j).vertex_attrs())?;
            mat.view_mut((i * m, j * m), (m, m)).copy_from(&block);
            if i != j {
                mat.view_mut((j * m, i * m), (m, m)).copy_from(&block.transpose());
            }
        }
    }
    Ok(VertexAffinity { n, m, mat })
}

/// Assembles the edge feature array.  Linear kernels store raw edge
/// attributes (`D = d_e`); Gaussian kernels store random Fourier features
/// (`D = rff_dim`) drawn once for the whole collection.  Each undirected edge
/// writes its feature vector at `(i, j)` and `(j, i)` inside the graph's
/// diagonal block, so every block is symmetric under `transpose3`.
pub fn build_phi<T: Real>(
    c: &GraphCollection<T>,
    spec: &KernelSpec<T>,
) -> Result<BulkEdgeFeatures<T>> {
    spec.validate()?;
    let (n, m) = (c.n_graphs(), c.num_vertices());
    let (feat_dim, rff) = match spec.kind {
        // max(1) keeps the edgeless / zero-dim case a valid all-zero array.
        KernelKind::Linear => (c.edge_dim().max(1), None),
        KernelKind::Gaussian => (spec.rff_dim, Some(RffMap::new(spec, c.edge_dim())?)),
    };
    let mut array = FeatureArray3::zeros(feat_dim, n * m);
    for (k, g) in c.graphs().iter().enumerate() {
        for (e, &(i, j)) in g.edges().iter().enumerate() {
            let feat: Vec<T> = match &rff {
                Some(map) => map.map(g.edge_attr(e))?,
                None => g.edge_attr(e).to_vec(),
            };
            array.set_fiber(k * m + i, k * m + j, &feat)?;
            if i != j {
                array.set_fiber(k * m + j, k * m + i, &feat)?;
            }
        }
    }
    Ok(BulkEdgeFeatures { n, m, array })
}

/// Column-major vectorization, matching the convention `explicit_edge_affinity`
/// is written against.
pub fn vec_col_major<T: Real>(x: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(x.as_slice())
}

/// Upper bound on `n * m` for [`explicit_edge_affinity`]; the result has
/// `(n * m)^4` entries.
pub const EXPLICIT_AFFINITY_LIMIT: usize = 12;

/// Materializes the pairwise edge affinity `K_e` with
/// `vec(x)^T K_e vec(x) = inner3(phi . x, x . phi)` for every `x`.
/// Quartic in `n * m`, so refuses anything beyond tiny instances.
pub fn explicit_edge_affinity<T: Real>(phi: &BulkEdgeFeatures<T>) -> Result<DMatrix<T>> {
    let big_n = phi.n_graphs() * phi.block_size();
    if big_n > EXPLICIT_AFFINITY_LIMIT {
        return Err(Error::Validation(format!(
            "explicit edge affinity is limited to n*m <= {EXPLICIT_AFFINITY_LIMIT}, got {big_n}"
        )));
    }
    let arr = phi.array();
    let d = arr.feature_dim();
    let mut k = DMatrix::zeros(big_n * big_n, big_n * big_n);
    // vec(x)[c * N + r] = x[r, c]; the entry below couples x[kk, j] with
    // x[i, p] at weight <arr[:, i, kk], arr[:, p, j]>.
    for i in 0..big_n {
        for j in 0..big_n {
            for kk in 0..big_n {
                for p in 0..big_n {
                    let mut w = T::zero();
                    for l in 0..d {
                        w += arr.at(l, i, kk) * arr.at(l, p, j);
                    }
                    k[(j * big_n + kk, p * big_n + i)] += w;
                }
            }
        }
    }
    Ok(k)
}
