use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

use super::matrix::EmbeddingMatrix;

const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct Pca2d {
    /// V×2 projections of the centred rows.
    pub coordinates: Array2<f64>,
    /// Variance captured along each direction.
    pub explained_variance: [f64; 2],
    /// Orthonormal principal directions, each with its first non-zero
    /// component positive.
    pub directions: [Array1<f64>; 2],
}

/// Projects the rows of `matrix` onto their two leading principal directions.
pub fn pca_2d(matrix: &EmbeddingMatrix) -> Result<Pca2d> {
    let data = matrix.rows().mapv(|v| v as f64);
    pca_2d_dense(&data)
}

pub fn pca_2d_dense(data: &Array2<f64>) -> Result<Pca2d> {
    let (n, d) = data.dim();
    if n < 2 || d < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 rows and 2 columns, got {n}x{d}")));
    }
    let mean = data.mean_axis(Axis(0)).expect("non-empty");
    let centred = data - &mean;
    let covariance = centred.t().dot(&centred) / (n - 1) as f64;
    let trace: f64 = covariance.diag().sum();
    if trace <= f64::EPSILON * covariance.iter().map(|v| v.abs()).fold(1.0, f64::max) {
        return Err(Error::DegenerateCovariance);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5ca1e);
    let first = leading_direction(&covariance, &[], &mut rng);
    let first_var = rayleigh(&covariance, &first);
    let second = leading_direction(&covariance, std::slice::from_ref(&first), &mut rng);
    let second_var = rayleigh(&covariance, &second).max(0.0);

    let mut coordinates = Array2::zeros((n, 2));
    coordinates.column_mut(0).assign(&centred.dot(&first));
    coordinates.column_mut(1).assign(&centred.dot(&second));
    Ok(Pca2d { coordinates, explained_variance: [first_var, second_var], directions: [first, second] })
}

fn rayleigh(c: &Array2<f64>, v: &Array1<f64>) -> f64 {
    v.dot(&c.dot(v))
}

fn orthogonalize(v: &mut Array1<f64>, against: &[Array1<f64>]) {
    for u in against {
        let p = v.dot(u);
        v.scaled_add(-p, u);
    }
}

fn canonical_sign(v: &mut Array1<f64>) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.mapv_inplace(|x| -x);
        }
    }
}

/// Power iteration restricted to the orthogonal complement of `found`
/// (deflation by projection).
fn leading_direction(c: &Array2<f64>, found: &[Array1<f64>], rng: &mut ChaCha8Rng) -> Array1<f64> {
    let d = c.nrows();
    let mut v: Array1<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    orthogonalize(&mut v, found);
    v /= v.dot(&v).sqrt();
    let scale = c.iter().map(|x| x.abs()).fold(0.0, f64::max);

    for _ in 0..MAX_ITERATIONS {
        let mut next = c.dot(&v);
        orthogonalize(&mut next, found);
        let len = next.dot(&next).sqrt();
        if len <= 1e-14 * scale.max(1e-300) {
            // Remaining spectrum is zero: any unit vector in the complement will do.
            break;
        }
        next /= len;
        canonical_sign(&mut next);
        let mut aligned = v.clone();
        canonical_sign(&mut aligned);
        let delta = (&next - &aligned).mapv(|x| x * x).sum().sqrt();
        v = next;
        if delta < TOLERANCE {
            break;
        }
    }
    orthogonalize(&mut v, found);
    v /= v.dot(&v).sqrt();
    canonical_sign(&mut v);
    v
}
