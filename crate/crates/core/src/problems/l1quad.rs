use serde::Serialize;

use super::prox::soft_threshold_in_place;
use super::{sign0, Dynamics, GroundTruth, Method, SigmaTruthMode};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector};

const COMPLEMENTARITY_TOL: f64 = 1e-8;

/// `min_x (x - b)^T Q (x - b) / 2 + lambda ||x||_1` with diagonal `Q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L1QuadParams {
    pub q_diag: Vec<f64>,
    pub b: Vec<f64>,
    pub lambda: f64,
    pub sigma: f64,
}

impl Default for L1QuadParams {
    fn default() -> Self {
        Self {
            q_diag: vec![1.0, 2.0, 1.0, 2.0, 1.0],
            b: vec![2.0, 1.0, 0.1, -0.1, -2.0],
            lambda: 1.0,
            sigma: 0.25,
        }
    }
}

impl L1QuadParams {
    fn validate(&self) -> Result<()> {
        if self.q_diag.is_empty() {
            return Err(Error::InvalidParameter("q_diag must be nonempty".into()));
        }
        if self.b.len() != self.q_diag.len() {
            return Err(Error::DimensionMismatch {
                expected: self.q_diag.len(),
                got: self.b.len(),
            });
        }
        if let Some(q) = self.q_diag.iter().find(|&&q| !(q > 0.0 && q.is_finite())) {
            return Err(Error::InvalidParameter(format!("q_diag entries must be positive, got {q}")));
        }
        if let Some(i) = self.b.iter().position(|b| !b.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }

    fn smooth_grad(&self, x: &[f64], i: usize) -> f64 {
        self.q_diag[i] * (x[i] - self.b[i])
    }
}

impl Dynamics for L1QuadParams {
    fn dim(&self) -> usize {
        self.q_diag.len()
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn admissible(&self, method: Method) -> bool {
        matches!(method, Method::ForwardBackward | Method::Subgradient)
    }

    fn check_domain(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }

    fn next_into(&self, method: Method, eta: f64, x: &[f64], nu: &[f64], out: &mut [f64]) {
        match method {
            Method::ForwardBackward => {
                for i in 0..x.len() {
                    out[i] = x[i] - eta * (self.smooth_grad(x, i) + nu[i]);
                }
                soft_threshold_in_place(out, eta * self.lambda);
            }
            _ => {
                for i in 0..x.len() {
                    out[i] = x[i] - eta * (self.smooth_grad(x, i) + self.lambda * sign0(x[i]) + nu[i]);
                }
            }
        }
    }

    fn mean_field(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| self.smooth_grad(x, i) + self.lambda * sign0(x[i]))
            .collect()
    }

    fn derive_truth(&self, noise_cov: &DenseMatrix) -> Result<GroundTruth> {
        self.validate()?;
        let d = self.dim();
        // coordinatewise 0 in q (x - b) + lambda d|x|
        let x_star: Vec<f64> = (0..d)
            .map(|i| {
                let shrink = (self.b[i].abs() - self.lambda / self.q_diag[i]).max(0.0);
                shrink.copysign(self.b[i]) + 0.0
            })
            .collect();
        let mut active = Vec::new();
        let mut free = Vec::new();
        for i in 0..d {
            if x_star[i] == 0.0 {
                let gradient = (self.q_diag[i] * self.b[i]).abs();
                if (gradient - self.lambda).abs() <= COMPLEMENTARITY_TOL {
                    return Err(Error::StrictComplementarityViolated {
                        index: i,
                        gradient,
                        threshold: self.lambda,
                    });
                }
                active.push(i);
            } else {
                free.push(i);
            }
        }
        let u = DenseMatrix::from_columns(d, &free.iter().map(|&i| DenseVector::basis(d, i)).collect::<Vec<_>>());
        let h = DenseMatrix::diag(&free.iter().map(|&i| self.q_diag[i]).collect::<Vec<_>>());
        GroundTruth::assemble(
            DenseVector::new(x_star)?,
            u,
            h,
            noise_cov,
            active,
            SigmaTruthMode::Analytic,
        )
    }

    fn project_manifold(&self, truth: &GroundTruth, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for &i in &truth.active_index_set {
            y[i] = 0.0;
        }
        y
    }

    fn on_manifold_exact(&self, truth: &GroundTruth, x: &[f64]) -> Option<bool> {
        Some(truth.active_index_set.iter().all(|&i| x[i] == 0.0))
    }

    fn default_x0(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Problem, ProblemParams};
    use super::*;

    fn problem(q_diag: Vec<f64>, b: Vec<f64>, lambda: f64, sigma: f64) -> Result<Problem> {
        Problem::new(
            ProblemParams::L1Quad(L1QuadParams { q_diag, b, lambda, sigma }),
            Method::ForwardBackward,
        )
    }

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn two_dimensional_truth() {
        let p = problem(vec![1.0, 1.0], vec![2.0, 0.1], 1.0, 0.3).unwrap();
        let t = p.ground_truth();
        assert_eq!(t.x_star, v(&[1.0, 0.0]));
        assert_eq!(t.active_index_set, vec![1]);
        assert_eq!(t.tangent_basis, DenseMatrix::from_rows(&[&[1.0], &[0.0]]));
        assert_eq!(t.jacobian_h, DenseMatrix::from_rows(&[&[1.0]]));
        assert!((t.noise_cov_s[(0, 0)] - 0.09).abs() < 1e-15);
        let expected = DenseMatrix::from_rows(&[&[0.09, 0.0], &[0.0, 0.0]]);
        assert!(t.sigma_limit.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn zero_target_gives_empty_tangent() {
        let p = problem(vec![1.0; 3], vec![0.0; 3], 0.4, 0.5).unwrap();
        let t = p.ground_truth();
        assert_eq!(t.x_star, DenseVector::zeros(3));
        assert_eq!(t.active_index_set, vec![0, 1, 2]);
        assert_eq!(t.tangent_dim(), 0);
        assert_eq!(t.sigma_limit, DenseMatrix::zeros(3, 3));
    }

    #[test]
    fn defaults_have_two_active_coordinates() {
        let p = Problem::from_id(super::super::ProblemId::L1Quad).unwrap();
        let t = p.ground_truth();
        assert_eq!(t.x_star, v(&[1.0, 0.5, 0.0, 0.0, -1.0]));
        assert_eq!(t.active_index_set, vec![2, 3]);
        assert_eq!(t.jacobian_h, DenseMatrix::diag(&[1.0, 2.0, 1.0]));
    }

    #[test]
    fn degenerate_complementarity_is_rejected() {
        let err = problem(vec![1.0], vec![1.0], 1.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::StrictComplementarityViolated { index: 0, .. }));
    }

    #[test]
    fn prox_gradient_example() {
        let p = problem(vec![1.0], vec![2.0], 1.0, 0.0).unwrap();
        let g = p.step_map_g(1.0, &v(&[2.0]), &v(&[0.0])).unwrap();
        assert_eq!(g, v(&[1.0]));
    }

    #[test]
    fn solution_is_a_fixed_point() {
        let p = Problem::from_id(super::super::ProblemId::L1Quad).unwrap();
        let x_star = p.ground_truth().x_star.clone();
        let g = p.step_map_g(0.1, &x_star, &DenseVector::zeros(5)).unwrap();
        assert!(g.iter().all(|&gi| gi.abs() < 1e-12));
    }

    #[test]
    fn manifold_projection_zeroes_active_coordinates() {
        let p = problem(vec![1.0, 1.0], vec![2.0, 0.1], 1.0, 0.3).unwrap();
        let y = p.project_manifold(&v(&[1.2, 0.3]));
        assert_eq!(y, v(&[1.2, 0.0]));
        assert_eq!(p.project_manifold(&y), y);
        assert_eq!(p.on_manifold_exact(y.as_slice()), Some(true));
        assert_eq!(p.on_manifold_exact(&[1.2, 1e-300]), Some(false));
    }

    #[test]
    fn subgradient_uses_zero_at_kink() {
        let p = Problem::new(
            ProblemParams::L1Quad(L1QuadParams {
                q_diag: vec![1.0],
                b: vec![0.0],
                lambda: 1.0,
                sigma: 0.0,
            }),
            Method::Subgradient,
        )
        .unwrap();
        assert_eq!(p.step_map_g(0.5, &v(&[0.0]), &v(&[0.0])).unwrap(), v(&[0.0]));
        assert_eq!(p.mean_field(&v(&[0.5])), v(&[1.5]));
    }
}
