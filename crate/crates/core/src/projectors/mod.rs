//! Projections from dense score matrices onto bulk permutations.
//!
//! All three projectors share the same first move: symmetrize the input,
//! take the r algebraically largest eigenvalues, and scale the matching
//! eigenvectors by the square roots of the clamped eigenvalues.  The row
//! blocks of that embedding act as per-graph vertex coordinates.
//!
//! * `match_eig` matches every pair of graphs independently on the inner
//!   products of their coordinates.  Fast, but nothing ties the pairwise
//!   results together, so the output can violate transitivity.
//! * `gpow` alternates a multiplication by the (symmetrized) input with a
//!   `match_eig` projection, a projected power iteration that usually
//!   sharpens noisy inputs within a few rounds.
//! * `msync` matches every graph against graph 0 only and composes through
//!   that reference, which makes the result cycle-consistent by
//!   construction.
//!
//! Tie-breaks inherit the deterministic lexicographic rule of the
//! underlying assignment solver, so every projector is a pure function of
//! its input.

mod hungarian;

pub use hungarian::hungarian;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::consistency::{BulkPermutation, UniverseAssignment};
use crate::{from_f64, Error, Real, Result};

pub const DEFAULT_PROJECTOR_TOL: f64 = 1e-3;
pub const DEFAULT_PROJECTOR_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectorKind {
    MatchEig,
    GPow,
    MSync,
}

impl FromStr for ProjectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matcheig" => Ok(ProjectorKind::MatchEig),
            "gpow" => Ok(ProjectorKind::GPow),
            "msync" => Ok(ProjectorKind::MSync),
            other => Err(Error::Parse(format!(
                "unknown projector {other:?}, expected matcheig, gpow or msync"
            ))),
        }
    }
}

impl fmt::Display for ProjectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProjectorKind::MatchEig => "matcheig",
            ProjectorKind::GPow => "gpow",
            ProjectorKind::MSync => "msync",
        })
    }
}

/// Projector choice plus the knobs that only `gpow` consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorSpec<T> {
    pub kind: ProjectorKind,
    pub rank: usize,
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> ProjectorSpec<T> {
    pub fn new(kind: ProjectorKind, rank: usize) -> Self {
        ProjectorSpec {
            kind,
            rank,
            tol: from_f64(DEFAULT_PROJECTOR_TOL),
            max_iter: DEFAULT_PROJECTOR_MAX_ITER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Validation("projector rank must be at least 1".into()));
        }
        if !(self.tol > T::zero()) || !self.tol.is_finite() {
            return Err(Error::Validation("projector tolerance must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Validation("projector iteration cap must be at least 1".into()));
        }
        Ok(())
    }

    pub fn project(&self, x: &DMatrix<T>, n: usize, m: usize) -> Result<BulkPermutation> {
        self.validate()?;
        match self.kind {
            ProjectorKind::MatchEig => match_eig(x, n, m, self.rank),
            ProjectorKind::GPow => {
                gpow(x, n, m, self.rank, self.tol, self.max_iter).map(|out| out.perm)
            }
            ProjectorKind::MSync => msync(x, n, m, self.rank),
        }
    }
}

/// Result of the `gpow` iteration.  `perm` is the final iterate whether or
/// not the fixed point was reached within the cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GpowOutcome {
    pub perm: BulkPermutation,
    pub iterations: usize,
    pub converged: bool,
}

fn check_bulk_shape<T: Real>(x: &DMatrix<T>, n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::Dimension("need at least one graph with one vertex".into()));
    }
    if x.nrows() != n * m || x.ncols() != n * m {
        return Err(Error::Dimension(format!(
            "expected a {s} x {s} matrix for {n} blocks of size {m}, got {r} x {c}",
            s = n * m,
            r = x.nrows(),
            c = x.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("score matrix has non-finite entries".into()));
    }
    Ok(())
}

fn check_rank(r: usize, n: usize, m: usize) -> Result<()> {
    if r == 0 || r > n * m {
        return Err(Error::Validation(format!(
            "rank {r} outside 1..={} for {n} blocks of size {m}",
            n * m
        )));
    }
    Ok(())
}

fn symmetrized<T: Real>(x: &DMatrix<T>) -> DMatrix<T> {
    let half = from_f64::<T>(0.5);
    (x + x.transpose()) * half
}

/// Eigenvectors of the symmetrized input for the r algebraically largest
/// eigenvalues, each column scaled by sqrt(max(eigenvalue, 0)).
fn scaled_top_eigvecs<T: Real>(x: &DMatrix<T>, r: usize) -> Result<DMatrix<T>> {
    let dim = x.nrows();
    let eig = SymmetricEigen::try_new(symmetrized(x), T::default_epsilon(), 100 * dim.max(10))
        .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
            .then(a.cmp(&b))
    });
    let mut u = DMatrix::zeros(dim, r);
    for (k, &idx) in order.iter().take(r).enumerate() {
        let lambda = eig.eigenvalues[idx];
        let s = if lambda > T::zero() { lambda.sqrt() } else { T::zero() };
        u.column_mut(k).axpy(s, &eig.eigenvectors.column(idx), T::zero());
    }
    Ok(u)
}

/// Independent pairwise matching on the rank-r spectral embedding.
pub fn match_eig<T: Real>(x: &DMatrix<T>, n: usize, m: usize, r: usize) -> Result<BulkPermutation> {
    check_bulk_shape(x, n, m)?;
    check_rank(r, n, m)?;
    let u = scaled_top_eigvecs(x, r)?;
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let ui = u.rows(i * m, m);
        for j in (i + 1)..n {
            let scores = &ui * u.rows(j * m, m).transpose();
            upper.push(hungarian(&scores, true)?);
        }
    }
    BulkPermutation::from_upper_triangle(n, m, upper)
}

/// Matching through a reference graph: every graph is matched against graph
/// 0 on the spectral embedding and cross-graph blocks are composed from
/// those anchors, so the result is always cycle-consistent.
pub fn msync<T: Real>(x: &DMatrix<T>, n: usize, m: usize, r: usize) -> Result<BulkPermutation> {
    check_bulk_shape(x, n, m)?;
    check_rank(r, n, m)?;
    let u = scaled_top_eigvecs(x, r)?;
    let u0 = u.rows(0, m).clone_owned();
    let mut assigns: Vec<Vec<usize>> = vec![(0..m).collect()];
    for i in 1..n {
        let scores = u.rows(i * m, m) * u0.transpose();
        let p = hungarian(&scores, true)?;
        assigns.push((0..m).map(|v| p.apply(v).expect("assignment is full")).collect());
    }
    Ok(UniverseAssignment::from_permutations(assigns)?.expand())
}

/// Projected power iteration: alternate multiplying by the symmetrized input
/// with a `match_eig` projection until the iterate stops moving.
pub fn gpow<T: Real>(
    x: &DMatrix<T>,
    n: usize,
    m: usize,
    r: usize,
    tol: T,
    max_iter: usize,
) -> Result<GpowOutcome> {
    if !(tol > T::zero()) || !tol.is_finite() || max_iter == 0 {
        return Err(Error::Validation("gpow needs a positive tolerance and iteration cap".into()));
    }
    check_bulk_shape(x, n, m)?;
    check_rank(r, n, m)?;
    let sym = symmetrized(x);
    let tol = tol.to_f64().expect("tolerance is finite");
    let mut z = match_eig(x, n, m, r)?;
    for t in 1..=max_iter {
        let powered = mul_by_bulk(&sym, &z);
        let next = match_eig(&powered, n, m, r)?;
        let moved = z.frob_dist(&next);
        z = next;
        if moved < tol {
            return Ok(GpowOutcome { perm: z, iterations: t, converged: true });
        }
    }
    Ok(GpowOutcome { perm: z, iterations: max_iter, converged: false })
}

/// Dense matrix times a bulk permutation, using the 0/1 block structure:
/// each output column is a sum of gathered input columns.
fn mul_by_bulk<T: Real>(x: &DMatrix<T>, z: &BulkPermutation) -> DMatrix<T> {
    let (n, m) = (z.n_graphs(), z.block_size());
    let mut out = DMatrix::zeros(x.nrows(), n * m);
    for jb in 0..n {
        for w in 0..m {
            let mut col = out.column_mut(jb * m + w);
            for ib in 0..n {
                // z[(ib, v), (jb, w)] = 1 exactly when the mirror block maps w to v
                if let Some(v) = z.block(jb, ib).apply(w) {
                    col.axpy(T::one(), &x.column(ib * m + v), T::one());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    use crate::consistency::is_cycle_consistent;
    use crate::testutil::random_expand;

    fn perturbed(rng: &mut StdRng, x: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
        let noise = DMatrix::from_fn(x.nrows(), x.ncols(), |_, _| rng.random_range(-eps..eps));
        x + symmetrized(&noise)
    }

    #[test]
    fn match_eig_recovers_exact_bulk_permutations() {
        let mut rng = StdRng::seed_from_u64(7);
        for (n, m) in [(2, 2), (3, 4), (4, 3), (5, 5)] {
            let truth = random_expand(&mut rng, n, m);
            let x = truth.to_dense::<f64>();
            assert_eq!(match_eig(&x, n, m, m).unwrap(), truth, "n={n} m={m}");
        }
    }

    #[test]
    fn match_eig_survives_small_perturbations() {
        let mut rng = StdRng::seed_from_u64(8);
        for case in 0..10 {
            let truth = random_expand(&mut rng, 4, 4);
            let x = perturbed(&mut rng, &truth.to_dense(), 0.02);
            assert_eq!(match_eig(&x, 4, 4, 4).unwrap(), truth, "case {case}");
        }
    }

    #[test]
    fn negative_definite_input_projects_to_identity_blocks() {
        // all eigenvalues clamp to zero, scores vanish, and every pairwise
        // tie resolves to the identity permutation
        let x = -DMatrix::<f64>::identity(6, 6);
        let out = match_eig(&x, 2, 3, 3).unwrap();
        let expected =
            UniverseAssignment::from_permutations(vec![vec![0, 1, 2]; 2]).unwrap().expand();
        assert_eq!(out, expected);
    }

    #[test]
    fn msync_is_always_cycle_consistent() {
        let mut rng = StdRng::seed_from_u64(9);
        for case in 0..10 {
            let truth = random_expand(&mut rng, 4, 3);
            let x = perturbed(&mut rng, &truth.to_dense(), 0.8);
            let out = msync(&x, 4, 3, 3).unwrap();
            assert!(is_cycle_consistent(&out), "case {case}");
        }
    }

    #[test]
    fn msync_recovers_exact_bulk_permutations() {
        let mut rng = StdRng::seed_from_u64(10);
        let truth = random_expand(&mut rng, 5, 4);
        let out = msync(&truth.to_dense::<f64>(), 5, 4, 4).unwrap();
        assert_eq!(out, truth);
    }

    #[test]
    fn gpow_fixed_point_on_exact_input() {
        let mut rng = StdRng::seed_from_u64(11);
        let truth = random_expand(&mut rng, 4, 4);
        let out = gpow(&truth.to_dense::<f64>(), 4, 4, 4, 1e-3, 100).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.perm, truth);
    }

    #[test]
    fn gpow_reports_running_out_of_iterations() {
        let mut rng = StdRng::seed_from_u64(12);
        let x = {
            let raw = DMatrix::from_fn(12, 12, |_, _| rng.random_range(-1.0..1.0));
            symmetrized(&raw)
        };
        let full = gpow(&x, 4, 3, 3, 1e-3, 100).unwrap();
        if full.iterations > 1 {
            let capped = gpow(&x, 4, 3, 3, 1e-3, 1).unwrap();
            assert!(!capped.converged);
            assert_eq!(capped.iterations, 1);
        }
        assert!(full.iterations <= 100);
    }

    #[test]
    fn multiply_by_bulk_matches_dense_product() {
        let mut rng = StdRng::seed_from_u64(13);
        let z = random_expand(&mut rng, 3, 4);
        let x = DMatrix::from_fn(12, 12, |_, _| rng.random_range(-2.0..2.0));
        let fast = mul_by_bulk(&x, &z);
        let dense = &x * z.to_dense::<f64>();
        assert!((fast - dense).norm() < 1e-12);
    }

    #[test]
    fn spec_dispatch_matches_direct_calls() {
        let mut rng = StdRng::seed_from_u64(14);
        let truth = random_expand(&mut rng, 3, 3);
        let x = perturbed(&mut rng, &truth.to_dense(), 0.3);
        for kind in [ProjectorKind::MatchEig, ProjectorKind::GPow, ProjectorKind::MSync] {
            let spec = ProjectorSpec::<f64>::new(kind, 3);
            let via_spec = spec.project(&x, 3, 3).unwrap();
            let direct = match kind {
                ProjectorKind::MatchEig => match_eig(&x, 3, 3, 3).unwrap(),
                ProjectorKind::GPow => gpow(&x, 3, 3, 3, spec.tol, spec.max_iter).unwrap().perm,
                ProjectorKind::MSync => msync(&x, 3, 3, 3).unwrap(),
            };
            assert_eq!(via_spec, direct, "{kind}");
        }
    }

    #[test]
    fn rejects_bad_shapes_and_ranks() {
        let x = DMatrix::<f64>::zeros(6, 6);
        assert!(match_eig(&x, 2, 2, 2).is_err());
        assert!(match_eig(&x, 2, 3, 0).is_err());
        assert!(match_eig(&x, 2, 3, 7).is_err());
        assert!(match_eig(&DMatrix::from_element(6, 6, f64::NAN), 2, 3, 3).is_err());
        let mut bad = ProjectorSpec::<f64>::new(ProjectorKind::GPow, 3);
        bad.tol = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kind_parsing_roundtrips() {
        for kind in [ProjectorKind::MatchEig, ProjectorKind::GPow, ProjectorKind::MSync] {
            assert_eq!(kind.to_string().parse::<ProjectorKind>().unwrap(), kind);
        }
        assert!("eig".parse::<ProjectorKind>().is_err());
    }
}
