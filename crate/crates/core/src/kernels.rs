//! Vertex and edge kernels.
//!
//! Two kernels are supported: `linear`, the plain dot product, and
//! `gaussian`, `k(x, y) = exp(-gamma * ||x - y||^2)`.  Vertex affinities use
//! the kernel exactly; edge features under the Gaussian kernel go through a
//! random Fourier feature map so the pairwise edge affinity factorizes into
//! finite-dimensional feature vectors.
//!
//! The feature map is `phi(x) = sqrt(2 / D) * cos(W x + b)` with `W` entries
//! i.i.d. `N(0, 2 * gamma)` and `b` uniform on `[0, 2*pi)`; one `(W, b)` pair
//! is drawn per collection from the spec's seed, so `E[<phi(x), phi(y)>]`
//! recovers the kernel and repeated runs are reproducible.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{from_f64, from_usize, Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Gaussian,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelKind::Linear),
            "gaussian" => Ok(KernelKind::Gaussian),
            other => Err(Error::Validation(format!(
                "unknown kernel {other:?}, expected \"linear\" or \"gaussian\""
            ))),
        }
    }
}

/// Everything needed to evaluate one kernel deterministically.  `gamma` and
/// `rff_dim` only matter for the Gaussian kind; `seed` fixes the feature map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<T> {
    pub kind: KernelKind,
    pub gamma: T,
    pub rff_dim: usize,
    pub seed: u64,
}

pub const DEFAULT_RFF_DIM: usize = 100;

impl<T: Real> KernelSpec<T> {
    pub fn linear() -> Self {
        KernelSpec { kind: KernelKind::Linear, gamma: T::one(), rff_dim: DEFAULT_RFF_DIM, seed: 0 }
    }

    pub fn gaussian(gamma: T, rff_dim: usize, seed: u64) -> Self {
        KernelSpec { kind: KernelKind::Gaussian, gamma, rff_dim, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::Gaussian {
            if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
                return Err(Error::Validation(format!(
                    "gaussian kernels need finite gamma > 0, got {}",
                    self.gamma
                )));
            }
            if self.rff_dim == 0 {
                return Err(Error::Validation("rff_dim must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Kernel value for two attribute vectors of equal length.
    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        assert_eq!(x.len(), y.len(), "kernel operands must share a dimension");
        match self.kind {
            KernelKind::Linear => dot(x, y),
            KernelKind::Gaussian => {
                let mut sq = T::zero();
                for (&a, &b) in x.iter().zip(y) {
                    let d = a - b;
                    sq += d * d;
                }
                (-self.gamma * sq).exp()
            }
        }
    }
}

fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        acc += a * b;
    }
    acc
}

/// Gram matrix `out[i, j] = k(xs[i], ys[j])`.  All vectors must share one
/// dimension; symmetric (and PSD for these kernels) when `xs` is `ys`.
pub fn gram<T: Real>(spec: &KernelSpec<T>, xs: &[Vec<T>], ys: &[Vec<T>]) -> Result<DMatrix<T>> {
    spec.validate()?;
    let dim = xs
        .first()
        .or_else(|| ys.first())
        .map(|v| v.len())
        .unwrap_or(0);
    if xs.iter().chain(ys).any(|v| v.len() != dim) {
        return Err(Error::Dimension("gram operands must share one attribute dim".into()));
    }
    Ok(DMatrix::from_fn(xs.len(), ys.len(), |i, j| spec.eval(&xs[i], &ys[j])))
}

/// Materialized random Fourier feature map for one Gaussian kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct RffMap<T> {
    w: DMatrix<T>,
    b: DVector<T>,
    scale: T,
}

impl<T: Real> RffMap<T> {
    /// Draws the shared `(W, b)` pair from `spec.seed`.  Rejects non-Gaussian
    /// specs: the linear kernel already is its own feature map.
    pub fn new(spec: &KernelSpec<T>, input_dim: usize) -> Result<Self> {
        if spec.kind != KernelKind::Gaussian {
            return Err(Error::Validation(
                "random Fourier features only apply to the gaussian kernel".into(),
            ));
        }
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let std_dev = (from_f64::<T>(2.0) * spec.gamma).sqrt();
        let mut w = DMatrix::zeros(spec.rff_dim, input_dim);
        for r in 0..spec.rff_dim {
            for c in 0..input_dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                w[(r, c)] = std_dev * from_f64::<T>(z);
            }
        }
        let two_pi = from_f64::<T>(2.0) * T::pi();
        let b = DVector::from_fn(spec.rff_dim, |_, _| two_pi * from_f64::<T>(rng.random::<f64>()));
        let scale = (from_f64::<T>(2.0) / from_usize::<T>(spec.rff_dim)).sqrt();
        Ok(RffMap { w, b, scale })
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    /// `sqrt(2 / D) * cos(W x + b)`.
    pub fn map(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "feature map expects dim {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let x = DVector::from_column_slice(x);
        let phase = &self.w * x + &self.b;
        Ok(phase.iter().map(|&p| self.scale * p.cos()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;

    fn random_vecs(rng: &mut StdRng, count: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn linear_is_the_dot_product() {
        let spec = KernelSpec::<f64>::linear();
        assert_eq!(spec.eval(&[1.0, 2.0, -1.0], &[0.5, 1.0, 2.0]), 0.5);
    }

    #[test]
    fn gaussian_matches_closed_form() {
        let spec = KernelSpec::gaussian(0.5, 16, 0);
        // squared distance 2 at gamma 0.5 -> exp(-1)
        let v = spec.eval(&[1.0, 1.0], &[0.0, 0.0]);
        assert_relative_eq!(v, (-1.0f64).exp(), max_relative = 1e-15);
        assert_eq!(spec.eval(&[0.3, -0.7], &[0.3, -0.7]), 1.0);
    }

    #[test]
    fn gram_shapes_and_symmetry() {
        let mut rng = StdRng::seed_from_u64(31);
        let xs = random_vecs(&mut rng, 4, 3);
        let ys = random_vecs(&mut rng, 6, 3);
        let spec = KernelSpec::gaussian(1.0, 16, 0);
        let g = gram(&spec, &xs, &ys).unwrap();
        assert_eq!((g.nrows(), g.ncols()), (4, 6));
        let s = gram(&spec, &xs, &xs).unwrap();
        assert_relative_eq!(s.clone(), s.transpose(), max_relative = 1e-15);
        // ragged inputs are rejected
        let ragged = vec![vec![0.0; 3], vec![0.0; 2]];
        assert!(gram(&spec, &ragged, &xs).is_err());
    }

    #[test]
    fn self_grams_are_positive_semidefinite() {
        let mut rng = StdRng::seed_from_u64(32);
        let xs = random_vecs(&mut rng, 12, 4);
        for spec in [KernelSpec::<f64>::linear(), KernelSpec::gaussian(0.8, 16, 0)] {
            let g = gram(&spec, &xs, &xs).unwrap();
            let sym = (&g + g.transpose()) * 0.5;
            let eig = nalgebra::SymmetricEigen::new(sym);
            let min = eig.eigenvalues.min();
            assert!(min > -1e-8, "{:?} gram has eigenvalue {min}", spec.kind);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(KernelSpec::gaussian(0.0, 16, 0).validate().is_err());
        assert!(KernelSpec::gaussian(-1.0, 16, 0).validate().is_err());
        assert!(KernelSpec::gaussian(1.0, 0, 0).validate().is_err());
        assert!(RffMap::new(&KernelSpec::<f64>::linear(), 3).is_err());
    }

    #[test]
    fn feature_map_is_deterministic_per_seed() {
        let spec = KernelSpec::gaussian(0.6, 64, 42);
        let a = RffMap::new(&spec, 5).unwrap();
        let b = RffMap::new(&spec, 5).unwrap();
        assert_eq!(a, b);
        let x = vec![0.1, -0.2, 0.3, 0.0, 0.5];
        assert_eq!(a.map(&x).unwrap(), b.map(&x).unwrap());
        let other = RffMap::new(&KernelSpec::gaussian(0.6, 64, 43), 5).unwrap();
        assert_ne!(a, other);
        assert!(a.map(&[0.0; 4]).is_err());
    }

    #[test]
    fn feature_map_approximates_the_kernel() {
        // Monte-Carlo accuracy at D = 5000: mean absolute error below 0.05
        // over 100 random pairs.
        let gamma = 0.7;
        let spec = KernelSpec::gaussian(gamma, 5000, 7);
        let rff = RffMap::new(&spec, 4).unwrap();
        let mut rng = StdRng::seed_from_u64(33);
        let mut mae = 0.0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let exact = spec.eval(&x, &y);
            let approx: f64 = rff
                .map(&x)
                .unwrap()
                .iter()
                .zip(rff.map(&y).unwrap())
                .map(|(a, b)| a * b)
                .sum();
            mae += (exact - approx).abs();
        }
        mae /= 100.0;
        assert!(mae <= 0.05, "feature-map MAE {mae} too large at D = 5000");
    }

    #[test]
    fn self_inner_product_concentrates_at_one() {
        let spec = KernelSpec::gaussian(0.9, 10_000, 11);
        let rff = RffMap::new(&spec, 3).unwrap();
        let phi = rff.map(&[0.4, -0.1, 0.8]).unwrap();
        let norm_sq: f64 = phi.iter().map(|v| v * v).sum();
        assert!((norm_sq - 1.0).abs() <= 0.05, "||phi(x)||^2 = {norm_sq}");
    }
}
