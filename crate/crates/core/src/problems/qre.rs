use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector};

const MAX_ITERS: usize = 1_000_000;
const DAMPING: f64 = 0.5;

/// Quantal response equilibrium of the entropy-regularized zero-sum game with
/// payoff `A` (row player maximizes `z^T A w`).
///
/// Solves `z ∝ exp(A w / lambda)`, `w ∝ exp(-A^T z / lambda)` by damped
/// simultaneous fixed-point iteration, stopping once the sup-norm of the
/// update falls below `tol`.
pub fn qre_oracle(payoff: &DenseMatrix, lambda: f64, tol: f64) -> Result<(DenseVector, DenseVector)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if !payoff.is_square() {
        return Err(Error::DimensionMismatch {
            expected: payoff.rows(),
            got: payoff.cols(),
        });
    }
    let d = payoff.rows();
    let mut z = vec![1.0 / d as f64; d];
    let mut w = vec![1.0 / d as f64; d];
    for _ in 0..MAX_ITERS {
        let az = payoff.matvec(&w)?;
        let atz = payoff.matvec_t(&z)?;
        let bz = softmax(az.iter().map(|v| v / lambda));
        let bw = softmax(atz.iter().map(|v| -v / lambda));
        let mut step = 0.0f64;
        for i in 0..d {
            let nz = (1.0 - DAMPING) * z[i] + DAMPING * bz[i];
            let nw = (1.0 - DAMPING) * w[i] + DAMPING * bw[i];
            step = step.max((nz - z[i]).abs()).max((nw - w[i]).abs());
            z[i] = nz;
            w[i] = nw;
        }
        if step <= tol {
            return Ok((
                DenseVector::from_vec_unchecked(normalize(z)),
                DenseVector::from_vec_unchecked(normalize(w)),
            ));
        }
    }
    Err(Error::NonConvergence {
        what: "qre_oracle",
        iterations: MAX_ITERS,
    })
}

fn softmax(logits: impl Iterator<Item = f64>) -> Vec<f64> {
    let v: Vec<f64> = logits.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_payoff_is_uniform() {
        let (z, w) = qre_oracle(&DenseMatrix::zeros(4, 4), 0.3, 1e-14).unwrap();
        assert!(z.iter().chain(w.iter()).all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn high_temperature_is_nearly_uniform() {
        let a = DenseMatrix::from_rows(&[&[1.0, -0.7, 0.2], &[0.1, 0.9, -1.0], &[-0.4, 0.3, 0.5]]);
        let (z, w) = qre_oracle(&a, 1e6, 1e-14).unwrap();
        assert!(z.iter().chain(w.iter()).all(|&p| (p - 1.0 / 3.0).abs() < 1e-5));
    }

    #[test]
    fn symmetric_coordination_payoff() {
        let a = DenseMatrix::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        let (z, w) = qre_oracle(&a, 1.0, 1e-13).unwrap();
        for p in z.iter().chain(w.iter()) {
            assert!((p - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn solution_satisfies_fixed_point() {
        let a = DenseMatrix::from_rows(&[&[0.3, -0.2, 0.1], &[-0.1, 0.2, -0.3], &[0.2, -0.1, 0.0]]);
        let lambda = 0.2;
        let (z, w) = qre_oracle(&a, lambda, 1e-14).unwrap();
        let bz = softmax(a.matvec(w.as_slice()).unwrap().iter().map(|v| v / lambda));
        let bw = softmax(a.matvec_t(z.as_slice()).unwrap().iter().map(|v| -v / lambda));
        for i in 0..3 {
            assert!((bz[i] - z[i]).abs() < 1e-12);
            assert!((bw[i] - w[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        assert!(qre_oracle(&DenseMatrix::zeros(2, 2), 0.0, 1e-8).is_err());
    }
}
