//! Rank-M discretisation of a Q-Wiener process: `W = sum_m sqrt(q_m) b_m beta_m`.
//!
//! Every random quantity comes from a ChaCha8 generator seeded with the user seed
//! and a purpose-specific stream, so eigenvalues, basis and each replica's
//! increments never share a stream.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EIGENVALUE_STREAM: u64 = 1;
pub const BASIS_STREAM: u64 = 2;
/// Replica `r` draws its increments from stream `REPLICA_STREAM_BASE + r`.
pub const REPLICA_STREAM_BASE: u64 = 1 << 32;

/// Generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `m` independent draws from the uniform distribution on `[0.5, 2]`.
pub fn sample_eigenvalues(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, EIGENVALUE_STREAM);
    (0..m).map(|_| rng.random_range(0.5..=2.0)).collect()
}

/// Haar-distributed `m x m` orthogonal matrix; the columns are the basis vectors.
pub fn sample_haar_basis(m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_for(seed, BASIS_STREAM);
    haar_from(m, &mut rng)
}

/// QR of a standard Gaussian matrix, with columns flipped so `diag(R) > 0`; this
/// makes the factorisation unique and the law of `Q` uniform on `O(m)`.
fn haar_from<R: Rng>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let z = DMatrix::<f64>::from_fn(m, m, |_, _| rng.sample(StandardNormal));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (c, mut col) in q.column_iter_mut().enumerate() {
        if r[(c, c)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// `max |B^T B - I|` over the basis columns.
pub fn gram_error(basis: &DMatrix<f64>) -> f64 {
    let gram = basis.transpose() * basis;
    let n = gram.nrows();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (gram[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

/// Rank-M covariance `Q = B diag(q) B^T` restricted to the support of the probe.
///
/// Basis vectors live on the support points and are zero elsewhere; directions
/// off the support never enter the projection, so no completion is needed.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    eigenvalues: Vec<f64>,
    /// `support.len() x M`, orthonormal columns.
    basis: DMatrix<f64>,
    support: Vec<usize>,
    mesh_size: usize,
    seed: u64,
}

impl NoiseModel {
    /// Builds a model from explicit parts, checking orthonormality.
    pub fn new(eigenvalues: Vec<f64>, basis: DMatrix<f64>, support: Vec<usize>, mesh_size: usize, seed: u64) -> Result<Self> {
        let m = eigenvalues.len();
        if m == 0 {
            return Err(Error::Config("noise rank must be at least 1".into()));
        }
        if basis.ncols() != m || basis.nrows() != support.len() {
            return Err(Error::Config(format!(
                "basis is {}x{}, expected {}x{m}",
                basis.nrows(),
                basis.ncols(),
                support.len()
            )));
        }
        if m > mesh_size || support.iter().any(|&i| i >= mesh_size) {
            return Err(Error::Config("noise rank or support exceeds the mesh".into()));
        }
        if eigenvalues.iter().any(|q| !(*q > 0.0) || !q.is_finite()) {
            return Err(Error::Config("noise eigenvalues must be positive".into()));
        }
        let err = gram_error(&basis);
        if err > 1e-12 {
            return Err(Error::Config(format!("basis not orthonormal: Gram error {err:e}")));
        }
        Ok(NoiseModel {
            eigenvalues,
            basis,
            support,
            mesh_size,
            seed,
        })
    }

    /// Samples eigenvalues and a Haar basis for `m` directions on `support`.
    /// With `m` below the support size, the first `m` columns of a Haar matrix on the
    /// support are used.
    pub fn sample(m: usize, support: Vec<usize>, mesh_size: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > support.len() {
            return Err(Error::Config(format!(
                "noise rank {m} must lie in 1..={} (support points)",
                support.len()
            )));
        }
        let eigenvalues = sample_eigenvalues(m, seed);
        let full = sample_haar_basis(support.len(), seed);
        let basis = full.columns(0, m).into_owned();
        Self::new(eigenvalues, basis, support, mesh_size, seed)
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Basis restricted to the support, one column per direction.
    pub fn support_basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn mesh_size(&self) -> usize {
        self.mesh_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Basis vector `m` on the full mesh.
    pub fn basis_vector(&self, m: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.mesh_size];
        for (row, &idx) in self.support.iter().enumerate() {
            v[idx] = self.basis[(row, m)];
        }
        v
    }

    /// `B diag(q) B^T` on the support.
    pub fn support_covariance(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.basis.nrows(), self.rank(), |i, j| self.basis[(i, j)] * self.eigenvalues[j]);
        scaled * self.basis.transpose()
    }

    /// Adds `scale * sqrt(dt) * sum_m sqrt(q_m) xi_m b_m` on the support to `out`,
    /// which is indexed like [`NoiseModel::support`].
    pub fn add_support_increment<R: Rng>(&self, dt: f64, scale: f64, rng: &mut R, out: &mut [f64]) {
        let root_dt = dt.sqrt() * scale;
        for (m, q) in self.eigenvalues.iter().enumerate() {
            let xi: f64 = rng.sample(StandardNormal);
            let a = root_dt * q.sqrt() * xi;
            for (o, b) in out.iter_mut().zip(self.basis.column(m).iter()) {
                *o += a * b;
            }
        }
    }
}

/// One increment on the full mesh.
pub fn noise_increment<R: Rng>(model: &NoiseModel, dt: f64, rng: &mut R) -> Vec<f64> {
    let mut local = vec![0.0; model.support.len()];
    model.add_support_increment(dt, 1.0, rng, &mut local);
    let mut full = vec![0.0; model.mesh_size];
    for (v, &idx) in local.iter().zip(&model.support) {
        full[idx] = *v;
    }
    full
}

/// Noise configuration of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// `Q = I`: independent `N(0, dt)` increments at every mesh point.
    Identity,
    /// Sampled eigenvalues and Haar basis of the given rank on the probe's support.
    Rank { m: usize },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_in_range_and_reproducible() {
        let a = sample_eigenvalues(3, 42);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|q| (0.5..=2.0).contains(q)));
        assert_eq!(a, sample_eigenvalues(3, 42));
        assert_ne!(a, sample_eigenvalues(3, 43));
        let big = sample_eigenvalues(10_000, 7);
        let mean = big.iter().sum::<f64>() / big.len() as f64;
        assert!((mean - 1.25).abs() < 0.02, "{mean}");
    }

    #[test]
    fn haar_is_orthogonal() {
        for m in [1, 4, 17, 64] {
            let b = sample_haar_basis(m, 3);
            assert!(gram_error(&b) <= 1e-12, "m={m}");
        }
        let one = sample_haar_basis(1, 9);
        assert!((one[(0, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_dt_gives_zero_increment() {
        let model = NoiseModel::sample(4, vec![1, 2, 3, 4], 6, 5).unwrap();
        let mut rng = rng_for(5, 99);
        assert!(noise_increment(&model, 0.0, &mut rng).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_direction_variance() {
        let model = NoiseModel::new(vec![1.0], DMatrix::from_element(1, 1, 1.0), vec![0], 3, 0).unwrap();
        let mut rng = rng_for(11, 0);
        let dt = 0.01;
        let n = 100_000;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let inc = noise_increment(&model, dt, &mut rng);
            assert_eq!(inc[1], 0.0);
            sum2 += inc[0] * inc[0];
        }
        let var = sum2 / n as f64;
        assert!((var / dt - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn rejects_bad_models() {
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(NoiseModel::new(vec![1.0, 1.0], skew, vec![0, 1], 2, 0).is_err());
        assert!(NoiseModel::sample(5, vec![0, 1, 2], 3, 0).is_err());
    }
}
