//! Seeded, splittable random source.
//!
//! Each `(seed, stream_id)` pair maps to an independent ChaCha8 keystream, so
//! replication `r` draws the same numbers no matter how many other
//! replications run or in which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{DenseMatrix, DenseVector};

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
    stream_id: u64,
    spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            inner,
            stream_id,
            spare: None,
        }
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in the open-closed interval `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        1.0 - self.inner.gen::<f64>()
    }

    /// Standard normal draw via the Box-Muller transform.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for z in out.iter_mut() {
            *z = self.standard_normal();
        }
    }
}

/// Draws `L z` with `z` standard normal, i.e. a centered Gaussian vector with
/// covariance `L L^T`.
pub fn gaussian_vector(rng: &mut RngStream, factor: &DenseMatrix) -> DenseVector {
    let mut out = vec![0.0; factor.rows()];
    gaussian_into(rng, factor, &mut out);
    DenseVector::from_vec_unchecked(out)
}

/// In-place form of [`gaussian_vector`]; `out` must have `factor.rows()`
/// entries. Only the lower triangle of `factor` is read.
pub(crate) fn gaussian_into(rng: &mut RngStream, factor: &DenseMatrix, out: &mut [f64]) {
    let n = factor.cols();
    let mut z = [0.0f64; 16];
    let mut heap;
    let z: &mut [f64] = if n <= z.len() {
        &mut z[..n]
    } else {
        heap = vec![0.0; n];
        &mut heap
    };
    rng.fill_standard_normal(z);
    for (i, o) in out.iter_mut().enumerate() {
        let row = factor.row(i);
        let upto = (i + 1).min(n);
        *o = row[..upto].iter().zip(&z[..upto]).map(|(a, b)| a * b).sum();
    }
}


#[cfg(test)]
mod stream_props {
    use super::*;

    #[test]
    fn disjoint_streams_are_uncorrelated() {
        let n = 100_000;
        for (a, b) in [(0, 1), (1, 2), (0, 7), (3, 1000)] {
            let mut s = RngStream::new(42, a);
            let mut t = RngStream::new(42, b);
            let (x, y): (Vec<f64>, Vec<f64>) = (0..n).map(|_| (s.standard_normal(), t.standard_normal())).unzip();
            let mx = x.iter().sum::<f64>() / n as f64;
            let my = y.iter().sum::<f64>() / n as f64;
            let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
            let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
            let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
            let rho = cov / (vx * vy).sqrt();
            assert!(rho.abs() < 0.01, "streams {a}, {b}: rho = {rho}");
        }
    }
}
