use serde::Serialize;

use super::prox::project_box_in_place;
use super::{matrix_from_nested, Dynamics, GroundTruth, Method, SigmaTruthMode, DOMAIN_TOL};
use crate::error::{Error, Result};
use crate::numerics::{operator_norm, solve_linear, spd_factor, DenseMatrix, DenseVector};

const COMPLEMENTARITY_TOL: f64 = 1e-8;
const SOLVER_MAX_ITERS: usize = 1_000_000;

/// `min_x (x - c)^T Q (x - c) / 2` over the box `[lo, hi]`, with `Q`
/// symmetric positive definite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxQpParams {
    pub q: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub sigma: f64,
}

impl Default for BoxQpParams {
    fn default() -> Self {
        let d: usize = 4;
        let q = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| match i.abs_diff(j) {
                        0 => 2.0,
                        1 => 0.5,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        Self {
            q,
            c: vec![1.5, 0.4, 0.6, -0.5],
            lo: vec![0.0; d],
            hi: vec![1.0; d],
            sigma: 0.2,
        }
    }
}

impl BoxQpParams {
    fn q_matrix(&self) -> Result<DenseMatrix> {
        let q = matrix_from_nested(&self.q, "q")?;
        let d = self.c.len();
        if q.rows() != d || q.cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: q.rows(),
            });
        }
        if q.max_abs_diff(&q.transpose()) > 1e-12 {
            return Err(Error::InvalidParameter("q must be symmetric".into()));
        }
        spd_factor(&q)?;
        Ok(q)
    }

    fn validate(&self) -> Result<DenseMatrix> {
        let d = self.c.len();
        if d == 0 {
            return Err(Error::InvalidParameter("c must be nonempty".into()));
        }
        for other in [&self.lo, &self.hi] {
            if other.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: other.len(),
                });
            }
        }
        if let Some(i) = (0..d).find(|&i| !(self.lo[i] <= self.hi[i])) {
            return Err(Error::InvalidBounds {
                index: i,
                lo: self.lo[i],
                hi: self.hi[i],
            });
        }
        self.q_matrix()
    }

    fn grad_i(&self, x: &[f64], i: usize) -> f64 {
        self.q[i]
            .iter()
            .zip(x.iter().zip(&self.c))
            .map(|(q, (x, c))| q * (x - c))
            .sum()
    }

    /// Solves the QP by projected gradient, then polishes the free
    /// coordinates with a linear solve on the detected active face.
    fn solve(&self, q: &DenseMatrix) -> Result<(Vec<f64>, Vec<usize>)> {
        let d = self.c.len();
        let step = 1.0 / operator_norm(q)?;
        let mut x: Vec<f64> = (0..d).map(|i| 0.5 * (self.lo[i] + self.hi[i])).collect();
        let mut next = vec![0.0; d];
        let mut converged = false;
        for _ in 0..SOLVER_MAX_ITERS {
            for i in 0..d {
                next[i] = x[i] - step * self.grad_i(&x, i);
            }
            project_box_in_place(&mut next, &self.lo, &self.hi);
            let change = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            std::mem::swap(&mut x, &mut next);
            if change <= 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                what: "box QP solver",
                iterations: SOLVER_MAX_ITERS,
            });
        }

        let active: Vec<usize> = (0..d)
            .filter(|&i| (x[i] - self.lo[i]).abs() <= 1e-9 || (x[i] - self.hi[i]).abs() <= 1e-9)
            .collect();
        for &i in &active {
            x[i] = if (x[i] - self.lo[i]).abs() <= 1e-9 { self.lo[i] } else { self.hi[i] };
        }
        let free: Vec<usize> = (0..d).filter(|i| !active.contains(i)).collect();
        if !free.is_empty() {
            // Q_FF (x_F - c_F) = -Q_FA (x_A - c_A)
            let q_ff = DenseMatrix::new(
                free.len(),
                free.len(),
                free.iter().flat_map(|&i| free.iter().map(move |&j| q[(i, j)])).collect(),
            )?;
            let rhs: Vec<f64> = free
                .iter()
                .map(|&i| -active.iter().map(|&j| q[(i, j)] * (x[j] - self.c[j])).sum::<f64>())
                .collect();
            let delta = solve_linear(&q_ff, &DenseMatrix::new(free.len(), 1, rhs)?)?;
            for (k, &i) in free.iter().enumerate() {
                x[i] = self.c[i] + delta[(k, 0)];
            }
        }

        for &i in &free {
            let slack = (x[i] - self.lo[i]).min(self.hi[i] - x[i]);
            if slack <= COMPLEMENTARITY_TOL {
                return Err(Error::StrictComplementarityViolated {
                    index: i,
                    gradient: self.grad_i(&x, i).abs(),
                    threshold: 0.0,
                });
            }
        }
        for &i in &active {
            let g = self.grad_i(&x, i);
            // at the lower bound the gradient must push down, at the upper bound up
            let signed = if x[i] == self.lo[i] { g } else { -g };
            if signed <= COMPLEMENTARITY_TOL {
                return Err(Error::StrictComplementarityViolated {
                    index: i,
                    gradient: g.abs(),
                    threshold: COMPLEMENTARITY_TOL,
                });
            }
        }
        Ok((x, active))
    }
}

impl Dynamics for BoxQpParams {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn admissible(&self, method: Method) -> bool {
        method == Method::ProjectedForward
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        let violation = x
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.lo[i] - v).max(v - self.hi[i]))
            .fold(0.0, f64::max);
        if violation > DOMAIN_TOL || x.iter().any(|v| v.is_nan()) {
            return Err(Error::InfeasibleInput { violation });
        }
        Ok(())
    }

    fn next_into(&self, _method: Method, eta: f64, x: &[f64], nu: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = x[i] - eta * (self.grad_i(x, i) + nu[i]);
        }
        project_box_in_place(out, &self.lo, &self.hi);
    }

    fn mean_field(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|i| self.grad_i(x, i)).collect()
    }

    fn derive_truth(&self, noise_cov: &DenseMatrix) -> Result<GroundTruth> {
        let q = self.validate()?;
        let d = self.dim();
        let (x_star, active) = self.solve(&q)?;
        let free: Vec<usize> = (0..d).filter(|i| !active.contains(i)).collect();
        let u = DenseMatrix::from_columns(d, &free.iter().map(|&i| DenseVector::basis(d, i)).collect::<Vec<_>>());
        let h = u.transpose().matmul(&q)?.matmul(&u)?;
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
            y[i] = truth.x_star[i];
        }
        y
    }

    fn on_manifold_exact(&self, truth: &GroundTruth, x: &[f64]) -> Option<bool> {
        Some(truth.active_index_set.iter().all(|&i| x[i] == truth.x_star[i]))
    }

    fn default_x0(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }
}
