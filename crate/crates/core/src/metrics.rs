//! Matching quality scores.
//!
//! Scores compare the off-diagonal parts of an estimated and a true matching;
//! the always-present identity diagonal carries no information and is
//! subtracted before counting.  All three scores are ratios of exact integer
//! counts: precision divides the shared cross-graph matches by the estimate's,
//! recall by the truth's, and f1 is their harmonic mean.  A denominator of 0
//! scores 0, except when both matchings are exactly the identity, which
//! counts as a perfect (if empty) recovery.

use crate::consistency::{BulkPermutation, PartialPerm};
use crate::graphs::GraphCollection;
use crate::{from_usize, Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

pub fn score<T: Real>(x: &BulkPermutation, truth: &BulkPermutation) -> Result<Scores<T>> {
    if x.n_graphs() != truth.n_graphs() || x.block_size() != truth.block_size() {
        return Err(Error::Dimension(format!(
            "scoring {} x {} blocks against {} x {}",
            x.n_graphs(),
            x.block_size(),
            truth.n_graphs(),
            truth.block_size()
        )));
    }
    let common = x.off_diagonal_overlap(truth);
    let est = x.off_diagonal_matches();
    let tru = truth.off_diagonal_matches();
    if est == 0 && tru == 0 {
        let one = T::one();
        return Ok(Scores { precision: one, recall: one, f1: one });
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            T::zero()
        } else {
            from_usize::<T>(num) / from_usize::<T>(den)
        }
    };
    let precision = ratio(common, est);
    let recall = ratio(common, tru);
    let two = T::one() + T::one();
    let f1 = if (precision + recall) > T::zero() {
        two * precision * recall / (precision + recall)
    } else {
        T::zero()
    };
    Ok(Scores { precision, recall, f1 })
}

/// Removes every cross-graph match whose either endpoint is a dummy vertex.
/// Diagonal blocks stay identity; symmetry survives because both directions
/// of a pair are dropped by the same test.
pub fn strip_dummy_matches<T: Real>(
    x: &BulkPermutation,
    c: &GraphCollection<T>,
) -> Result<BulkPermutation> {
    let (n, m) = (x.n_graphs(), x.block_size());
    if n != c.n_graphs() || m != c.num_vertices() {
        return Err(Error::Dimension(format!(
            "matching is {n} x {m} blocks, collection is {} graphs of {}",
            c.n_graphs(),
            c.num_vertices()
        )));
    }
    let mut blocks = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                blocks.push(x.block(i, j).clone());
                continue;
            }
            let map = (0..m)
                .map(|v| {
                    x.block(i, j)
                        .apply(v)
                        .filter(|&w| !c.graph(i).is_dummy(v) && !c.graph(j).is_dummy(w))
                })
                .collect();
            blocks.push(PartialPerm::from_map(map).expect("dropping matches keeps blocks valid"));
        }
    }
    BulkPermutation::from_blocks(n, m, blocks)
}
