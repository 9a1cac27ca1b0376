//! Integral bulk permutations and cycle consistency.
//!
//! A matching of an `n`-graph collection is an `n x n` grid of `m x m`
//! partial permutation blocks: block `(i, j)` matches vertices of graph `i`
//! to vertices of graph `j`.  Diagonal blocks are the identity and block
//! `(j, i)` is always the transpose of block `(i, j)`; both are enforced at
//! construction.  Transitivity (block `(i,j)` composed with `(j,l)` never
//! matches outside block `(i,l)`) is the part that can fail, and
//! [`check_cycle_consistency`] reports the first ordered triple where it does.
//!
//! Consistent matchings factor through a universe: vertex `v` of graph `l`
//! gets a universe class, and two vertices are matched exactly when their
//! classes agree.  [`UniverseAssignment::expand`] materializes that matching
//! and [`recover_universe`] inverts it.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Real, Result};

/// Square 0/1 matrix with at most one 1 per row and per column, stored as a
/// row -> column map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialPerm {
    map: Vec<Option<usize>>,
}

impl PartialPerm {
    pub fn empty(size: usize) -> Self {
        PartialPerm { map: vec![None; size] }
    }

    pub fn identity(size: usize) -> Self {
        PartialPerm { map: (0..size).map(Some).collect() }
    }

    /// Builds from a row -> column map; columns must be in range and distinct.
    pub fn from_map(map: Vec<Option<usize>>) -> Result<Self> {
        let size = map.len();
        let mut col_used = vec![false; size];
        for (row, &col) in map.iter().enumerate() {
            if let Some(c) = col {
                if c >= size {
                    return Err(Error::Validation(format!(
                        "row {row} maps to column {c}, size is {size}"
                    )));
                }
                if col_used[c] {
                    return Err(Error::Validation(format!("column {c} matched twice")));
                }
                col_used[c] = true;
            }
        }
        Ok(PartialPerm { map })
    }

    /// Builds a full permutation; `perm` must be a bijection on `0..len`.
    pub fn from_full(perm: Vec<usize>) -> Result<Self> {
        let full = PartialPerm::from_map(perm.into_iter().map(Some).collect())?;
        if !full.is_full() {
            return Err(Error::Validation("permutation is not a bijection".into()));
        }
        Ok(full)
    }

    pub fn size(&self) -> usize {
        self.map.len()
    }

    pub fn apply(&self, row: usize) -> Option<usize> {
        self.map[row]
    }

    pub fn map(&self) -> &[Option<usize>] {
        &self.map
    }

    pub fn match_count(&self) -> usize {
        self.map.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_full(&self) -> bool {
        self.match_count() == self.size()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(r, &c)| c == Some(r))
    }

    /// Matched `(row, column)` pairs in row order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.map.iter().enumerate().filter_map(|(r, c)| c.map(|c| (r, c)))
    }

    /// The transpose, i.e. the inverse map.
    pub fn transposed(&self) -> Self {
        let mut map = vec![None; self.size()];
        for (r, c) in self.pairs() {
            map[c] = Some(r);
        }
        PartialPerm { map }
    }

    /// Composition `self` then `other` (the matrix product of the two).
    pub fn then(&self, other: &Self) -> Self {
        let map = self.map.iter().map(|c| c.and_then(|c| other.map[c])).collect();
        PartialPerm { map }
    }

    pub fn to_dense<T: Real>(&self) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.size(), self.size());
        for (r, c) in self.pairs() {
            out[(r, c)] = T::one();
        }
        out
    }
}

/// Symmetric grid of partial permutation blocks with identity diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BulkPermutation {
    n: usize,
    m: usize,
    blocks: Vec<PartialPerm>,
}

impl BulkPermutation {
    pub fn identity(n: usize, m: usize) -> Self {
        assert!(n >= 1 && m >= 1);
        let blocks = (0..n * n)
            .map(|b| {
                if b / n == b % n {
                    PartialPerm::identity(m)
                } else {
                    PartialPerm::empty(m)
                }
            })
            .collect();
        BulkPermutation { n, m, blocks }
    }

    /// Builds from all `n * n` blocks in row-major order, checking the
    /// identity diagonal and pairwise symmetry.
    pub fn from_blocks(n: usize, m: usize, blocks: Vec<PartialPerm>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Dimension("bulk permutations need n, m >= 1".into()));
        }
        if blocks.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} blocks, got {}",
                n * n,
                blocks.len()
            )));
        }
        if let Some(b) = blocks.iter().find(|b| b.size() != m) {
            return Err(Error::Dimension(format!(
                "block size {} does not match m = {m}",
                b.size()
            )));
        }
        for i in 0..n {
            if !blocks[i * n + i].is_identity() {
                return Err(Error::Validation(format!("diagonal block {i} is not the identity")));
            }
            for j in i + 1..n {
                if blocks[j * n + i] != blocks[i * n + j].transposed() {
                    return Err(Error::Validation(format!(
                        "block ({j}, {i}) is not the transpose of block ({i}, {j})"
                    )));
                }
            }
        }
        Ok(BulkPermutation { n, m, blocks })
    }

    /// Builds from the strict upper triangle (row-major `(i, j)` with
    /// `i < j`); mirrors and the identity diagonal are filled in.
    pub fn from_upper_triangle(n: usize, m: usize, upper: Vec<PartialPerm>) -> Result<Self> {
        if upper.len() != n * (n - 1) / 2 {
            return Err(Error::Dimension(format!(
                "expected {} upper blocks, got {}",
                n * (n - 1) / 2,
                upper.len()
            )));
        }
        let mut blocks = vec![PartialPerm::empty(m); n * n];
        for i in 0..n {
            blocks[i * n + i] = PartialPerm::identity(m);
        }
        let mut it = upper.into_iter();
        for i in 0..n {
            for j in i + 1..n {
                let b = it.next().unwrap();
                blocks[j * n + i] = b.transposed();
                blocks[i * n + j] = b;
            }
        }
        BulkPermutation::from_blocks(n, m, blocks)
    }

    pub fn n_graphs(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    /// Side length of the dense bulk matrix.
    pub fn dim(&self) -> usize {
        self.n * self.m
    }

    pub fn block(&self, i: usize, j: usize) -> &PartialPerm {
        &self.blocks[i * self.n + j]
    }

    pub fn blocks(&self) -> &[PartialPerm] {
        &self.blocks
    }

    /// Total number of 1 entries, diagonal included.
    pub fn total_matches(&self) -> usize {
        self.blocks.iter().map(|b| b.match_count()).sum()
    }

    /// Number of 1 entries outside the diagonal blocks.
    pub fn off_diagonal_matches(&self) -> usize {
        self.total_matches() - self.n * self.m
    }

    /// Off-diagonal 1 entries shared between two matchings.
    pub fn off_diagonal_overlap(&self, other: &Self) -> usize {
        assert_eq!((self.n, self.m), (other.n, other.m));
        let mut common = 0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                let (a, b) = (self.block(i, j), other.block(i, j));
                common += a.pairs().filter(|&(r, c)| b.apply(r) == Some(c)).count();
            }
        }
        common
    }

    /// Frobenius distance between the dense 0/1 forms, computed exactly from
    /// the number of differing entries.
    pub fn frob_dist(&self, other: &Self) -> f64 {
        assert_eq!((self.n, self.m), (other.n, other.m));
        let mut differing = 0usize;
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            for r in 0..self.m {
                match (a.apply(r), b.apply(r)) {
                    (Some(x), Some(y)) if x != y => differing += 2,
                    (Some(_), None) | (None, Some(_)) => differing += 1,
                    _ => {}
                }
            }
        }
        (differing as f64).sqrt()
    }

    pub fn to_dense<T: Real>(&self) -> DMatrix<T> {
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for i in 0..self.n {
            for j in 0..self.n {
                for (r, c) in self.block(i, j).pairs() {
                    out[(i * self.m + r, j * self.m + c)] = T::one();
                }
            }
        }
        out
    }

    /// Dense 0/1 rows, row-major, as written to result files.
    pub fn to_binary_rows(&self) -> Vec<Vec<u8>> {
        let d = self.dim();
        let mut rows = vec![vec![0u8; d]; d];
        for i in 0..self.n {
            for j in 0..self.n {
                for (r, c) in self.block(i, j).pairs() {
                    rows[i * self.m + r][j * self.m + c] = 1;
                }
            }
        }
        rows
    }

    /// Parses dense 0/1 rows back into blocks, validating everything the type
    /// promises: entries in {0, 1}, partial permutation blocks, identity
    /// diagonal, pairwise symmetry.
    pub fn from_binary_rows(rows: &[Vec<u8>], n: usize, m: usize) -> Result<Self> {
        let d = n * m;
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension(format!("expected a dense {d} x {d} matrix")));
        }
        let mut blocks = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut map = vec![None; m];
                for r in 0..m {
                    for c in 0..m {
                        match rows[i * m + r][j * m + c] {
                            0 => {}
                            1 => {
                                if map[r].is_some() {
                                    return Err(Error::Validation(format!(
                                        "block ({i}, {j}) row {r} has two matches"
                                    )));
                                }
                                map[r] = Some(c);
                            }
                            e => {
                                return Err(Error::Validation(format!(
                                    "entry ({}, {}) is {e}, expected 0 or 1",
                                    i * m + r,
                                    j * m + c
                                )));
                            }
                        }
                    }
                }
                blocks.push(PartialPerm::from_map(map).map_err(|err| {
                    Error::Validation(format!("block ({i}, {j}): {err}"))
                })?);
            }
        }
        BulkPermutation::from_blocks(n, m, blocks)
    }
}

/// Vertex -> universe-class table; row sums of the per-graph assignment
/// matrices are all 1 and no class repeats within a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniverseAssignment {
    rank: usize,
    assigns: Vec<Vec<usize>>,
}

impl UniverseAssignment {
    pub fn new(assigns: Vec<Vec<usize>>, rank: usize) -> Result<Self> {
        if assigns.is_empty() || assigns[0].is_empty() {
            return Err(Error::Dimension("universe assignments need n, m >= 1".into()));
        }
        let m = assigns[0].len();
        for (l, a) in assigns.iter().enumerate() {
            if a.len() != m {
                return Err(Error::Dimension(format!(
                    "graph {l} assigns {} vertices, expected {m}",
                    a.len()
                )));
            }
            let mut used = vec![false; rank];
            for (v, &c) in a.iter().enumerate() {
                if c >= rank {
                    return Err(Error::Validation(format!(
                        "graph {l} vertex {v} uses class {c}, rank is {rank}"
                    )));
                }
                if used[c] {
                    return Err(Error::Validation(format!(
                        "graph {l} assigns class {c} twice"
                    )));
                }
                used[c] = true;
            }
        }
        Ok(UniverseAssignment { rank, assigns })
    }

    /// Full per-graph permutations; the universe is the vertex set itself.
    pub fn from_permutations(perms: Vec<Vec<usize>>) -> Result<Self> {
        let m = perms.first().map_or(0, |p| p.len());
        UniverseAssignment::new(perms, m)
    }

    pub fn n_graphs(&self) -> usize {
        self.assigns.len()
    }

    pub fn size(&self) -> usize {
        self.assigns[0].len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn assignment(&self, l: usize) -> &[usize] {
        &self.assigns[l]
    }

    /// Number of distinct classes actually assigned.
    pub fn used_classes(&self) -> usize {
        let mut seen = vec![false; self.rank];
        for a in &self.assigns {
            for &c in a {
                seen[c] = true;
            }
        }
        seen.iter().filter(|s| **s).count()
    }

    /// Materializes the matching: vertices are matched exactly when their
    /// classes agree.  The result is always cycle-consistent.
    pub fn expand(&self) -> BulkPermutation {
        let (n, m) = (self.n_graphs(), self.size());
        // class -> vertex lookup per graph
        let inverse: Vec<Vec<Option<usize>>> = self
            .assigns
            .iter()
            .map(|a| {
                let mut inv = vec![None; self.rank];
                for (v, &c) in a.iter().enumerate() {
                    inv[c] = Some(v);
                }
                inv
            })
            .collect();
        let mut blocks = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let map = self.assigns[i].iter().map(|&c| inverse[j][c]).collect();
                blocks.push(PartialPerm { map });
            }
        }
        BulkPermutation { n, m, blocks }
    }
}

/// First place a matching stops being cycle-consistent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsistencyViolation {
    /// Diagonal block `i` is not the identity.
    Identity(usize),
    /// Block `(j, i)` is not the transpose of block `(i, j)`.
    Symmetry(usize, usize),
    /// Composing blocks `(i, j)` and `(j, l)` leaves block `(i, l)`.
    Transitivity(usize, usize, usize),
}

impl std::fmt::Display for ConsistencyViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConsistencyViolation::Identity(i) => write!(f, "diagonal block {i} is not the identity"),
            ConsistencyViolation::Symmetry(i, j) => {
                write!(f, "blocks ({i}, {j}) and ({j}, {i}) are not transposes")
            }
            ConsistencyViolation::Transitivity(i, j, l) => {
                write!(f, "transitivity fails on triple ({i}, {j}, {l})")
            }
        }
    }
}

impl From<ConsistencyViolation> for Error {
    fn from(v: ConsistencyViolation) -> Self {
        Error::Validation(v.to_string())
    }
}

fn transitive_violation(
    x: &BulkPermutation,
    i: usize,
    j: usize,
    l: usize,
) -> Option<ConsistencyViolation> {
    let (ij, jl, il) = (x.block(i, j), x.block(j, l), x.block(i, l));
    for v in 0..x.block_size() {
        if let Some(w) = ij.apply(v) {
            if let Some(u) = jl.apply(w) {
                if il.apply(v) != Some(u) {
                    return Some(ConsistencyViolation::Transitivity(i, j, l));
                }
            }
        }
    }
    None
}

/// Checks identity, symmetry and transitivity over all ordered triples,
/// reporting the lexicographically first violation.
pub fn check_cycle_consistency(x: &BulkPermutation) -> std::result::Result<(), ConsistencyViolation> {
    let n = x.n_graphs();
    for i in 0..n {
        if !x.block(i, i).is_identity() {
            return Err(ConsistencyViolation::Identity(i));
        }
        for j in 0..n {
            if *x.block(j, i) != x.block(i, j).transposed() {
                return Err(ConsistencyViolation::Symmetry(i.min(j), i.max(j)));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                if let Some(v) = transitive_violation(x, i, j, l) {
                    return Err(v);
                }
            }
        }
    }
    Ok(())
}

pub fn is_cycle_consistent(x: &BulkPermutation) -> bool {
    check_cycle_consistency(x).is_ok()
}

/// Spot-checks `samples` random ordered triples instead of all `n^3`; meant
/// for large collections where the full scan is too slow.
pub fn check_cycle_consistency_sampled(
    x: &BulkPermutation,
    samples: usize,
    seed: u64,
) -> std::result::Result<(), ConsistencyViolation> {
    let n = x.n_graphs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let l = rng.random_range(0..n);
        if let Some(v) = transitive_violation(x, i, j, l) {
            return Err(v);
        }
    }
    Ok(())
}

/// Inverts [`UniverseAssignment::expand`] on cycle-consistent input: matched
/// vertices are grouped into classes, classes are numbered by their smallest
/// member slot (`graph * m + vertex`), and the rank is the class count.
pub fn recover_universe(
    x: &BulkPermutation,
) -> std::result::Result<UniverseAssignment, ConsistencyViolation> {
    check_cycle_consistency(x)?;
    let (n, m) = (x.n_graphs(), x.block_size());
    let mut dsu = Dsu::new(n * m);
    for i in 0..n {
        for j in i + 1..n {
            for (v, w) in x.block(i, j).pairs() {
                dsu.union(i * m + v, j * m + w);
            }
        }
    }
    // Deterministic class ids, ordered by smallest member slot.
    let mut class_of_root = vec![usize::MAX; n * m];
    let mut next = 0;
    for slot in 0..n * m {
        let root = dsu.find(slot);
        if class_of_root[root] == usize::MAX {
            class_of_root[root] = next;
            next += 1;
        }
    }
    let assigns = (0..n)
        .map(|l| (0..m).map(|v| class_of_root[dsu.find(l * m + v)]).collect())
        .collect();
    Ok(UniverseAssignment { rank: next, assigns })
}

/// Whether `x` is cycle-consistent and factors through a universe of at most
/// `rank` classes.
pub fn has_universe_of_rank(x: &BulkPermutation, rank: usize) -> bool {
    recover_universe(x).map(|u| u.rank() <= rank).unwrap_or(false)
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(len: usize) -> Self {
        Dsu { parent: (0..len).collect() }
    }

    fn find(&mut self, a: usize) -> usize {
        let mut root = a;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = a;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // Smaller root wins so class numbering never depends on merge order.
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
    }
}
