//! Rank-3 feature arrays and their contractions.
//!
//! A [`FeatureArray3`] is a stack of `d` square `m x m` slices, indexed
//! `[l, i, j]` with the feature axis `l` outermost.  Storing per-feature
//! slices keeps every operation below a batch of plain matrix products:
//!
//! * `transpose3`  swaps the two trailing axes of every slice,
//! * `star`        contracts two arrays to an `m x m` matrix,
//!                 `(a * b)[i, j] = sum_{k, l} a[l, i, k] b[l, k, j]`,
//! * `dot_right`   right-multiplies a matrix into each slice,
//!                 `(a . x)[l, i, j] = sum_k a[l, i, k] x[k, j]`,
//! * `dot_left`    left-multiplies, `(x . a)[l, i, j] = sum_k x[i, k] a[l, k, j]`,
//! * `inner3`      full scalar contraction, equal to
//!                 `trace(star(transpose3(a), b))`.

use nalgebra::DMatrix;

use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureArray3<T> {
    slices: Vec<DMatrix<T>>,
    feat: usize,
    size: usize,
}

impl<T: Real> FeatureArray3<T> {
    /// All-zero array with `feat` slices of size `size x size`.
    pub fn zeros(feat: usize, size: usize) -> Self {
        assert!(feat >= 1 && size >= 1, "feature arrays have positive dims");
        FeatureArray3 {
            slices: vec![DMatrix::zeros(size, size); feat],
            feat,
            size,
        }
    }

    /// Builds an array from per-feature slices.  Slices must be non-empty,
    /// square, of one common size, and finite everywhere.
    pub fn from_slices(slices: Vec<DMatrix<T>>) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::Dimension("feature array needs at least one slice".into()));
        }
        let size = slices[0].nrows();
        if size == 0 {
            return Err(Error::Dimension("feature array slices must be non-empty".into()));
        }
        for (l, s) in slices.iter().enumerate() {
            if s.nrows() != size || s.ncols() != size {
                return Err(Error::Dimension(format!(
                    "slice {l} is {}x{}, expected {size}x{size}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("slice {l} has a non-finite entry")));
            }
        }
        let feat = slices.len();
        Ok(FeatureArray3 { slices, feat, size })
    }

    pub fn feature_dim(&self) -> usize {
        self.feat
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn slice(&self, l: usize) -> &DMatrix<T> {
        &self.slices[l]
    }

    pub fn slices(&self) -> &[DMatrix<T>] {
        &self.slices
    }

    pub fn at(&self, l: usize, i: usize, j: usize) -> T {
        self.slices[l][(i, j)]
    }

    /// The feature vector sitting at position `(i, j)`.
    pub fn fiber(&self, i: usize, j: usize) -> Vec<T> {
        self.slices.iter().map(|s| s[(i, j)]).collect()
    }

    /// Writes one feature vector at position `(i, j)`.
    pub fn set_fiber(&mut self, i: usize, j: usize, v: &[T]) -> Result<()> {
        if v.len() != self.feat {
            return Err(Error::Dimension(format!(
                "fiber has length {}, array has feature dim {}",
                v.len(),
                self.feat
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("non-finite fiber at ({i}, {j})")));
        }
        for (s, &x) in self.slices.iter_mut().zip(v) {
            s[(i, j)] = x;
        }
        Ok(())
    }

    /// Swaps the two trailing axes.  An involution.
    pub fn transpose3(&self) -> Self {
        FeatureArray3 {
            slices: self.slices.iter().map(|s| s.transpose()).collect(),
            feat: self.feat,
            size: self.size,
        }
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.feat != other.feat || self.size != other.size {
            return Err(Error::Dimension(format!(
                "{op}: {}x{}x{} does not combine with {}x{}x{}",
                self.feat, self.size, self.size, other.feat, other.size, other.size
            )));
        }
        Ok(())
    }

    fn check_square(&self, x: &DMatrix<T>, op: &str) -> Result<()> {
        if x.nrows() != self.size || x.ncols() != self.size {
            return Err(Error::Dimension(format!(
                "{op}: matrix is {}x{}, slices are {}x{}",
                x.nrows(),
                x.ncols(),
                self.size,
                self.size
            )));
        }
        Ok(())
    }

    /// Contraction to a matrix: `star(a, b) = sum_l a_l b_l` over slices.
    pub fn star(&self, other: &Self) -> Result<DMatrix<T>> {
        self.check_same_shape(other, "star")?;
        let mut acc = DMatrix::zeros(self.size, self.size);
        for (a, b) in self.slices.iter().zip(&other.slices) {
            acc += a * b;
        }
        Ok(acc)
    }

    /// `self . x`: every slice right-multiplied by `x`.
    pub fn dot_right(&self, x: &DMatrix<T>) -> Result<Self> {
        self.check_square(x, "dot_right")?;
        Ok(FeatureArray3 {
            slices: self.slices.iter().map(|s| s * x).collect(),
            feat: self.feat,
            size: self.size,
        })
    }

    /// `x . self`: every slice left-multiplied by `x`.
    pub fn dot_left(&self, x: &DMatrix<T>) -> Result<Self> {
        self.check_square(x, "dot_left")?;
        Ok(FeatureArray3 {
            slices: self.slices.iter().map(|s| x * s).collect(),
            feat: self.feat,
            size: self.size,
        })
    }

    /// Scalar contraction `trace(star(transpose3(self), other))`, evaluated as
    /// the elementwise dot product of the two arrays.
    pub fn inner3(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other, "inner3")?;
        let mut acc = T::zero();
        for (a, b) in self.slices.iter().zip(&other.slices) {
            acc += a.dot(b);
        }
        Ok(acc)
    }
}
