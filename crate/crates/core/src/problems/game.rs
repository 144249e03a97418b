use serde::Serialize;

use super::prox::project_simplex_in_place;
use super::qre::qre_oracle;
use super::{matrix_from_nested, Dynamics, GroundTruth, Method, SigmaTruthMode, DOMAIN_TOL};
use crate::error::{Error, Result};
use crate::numerics::{spd_factor, DenseMatrix, DenseVector};

const LOG_FLOOR: f64 = 1e-12;
const QRE_TOL: f64 = 1e-13;

/// Entropy-regularized zero-sum matrix game
/// `max_z min_w z^T A w - lambda H(z) + lambda H(w)` over two simplices.
/// The state is `x = (z, w)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameParams {
    pub payoff: Vec<Vec<f64>>,
    pub lambda: f64,
    pub sigma: f64,
}

impl Default for GameParams {
    fn default() -> Self {
        Self {
            payoff: vec![
                vec![0.3, -0.2, 0.1],
                vec![-0.1, 0.2, -0.3],
                vec![0.2, -0.1, 0.0],
            ],
            lambda: 0.2,
            sigma: 0.1,
        }
    }
}

impl GameParams {
    fn m(&self) -> usize {
        self.payoff.len()
    }

    fn payoff_matrix(&self) -> Result<DenseMatrix> {
        let a = matrix_from_nested(&self.payoff, "payoff")?;
        if !a.is_square() || a.rows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "payoff must be a nonempty square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(a)
    }

    /// `(-A w + lambda (ln z + 1), A^T z + lambda (ln w + 1))`
    fn field_into(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m();
        let (z, w) = x.split_at(m);
        for i in 0..m {
            let aw: f64 = self.payoff[i].iter().zip(w).map(|(a, w)| a * w).sum();
            let atz: f64 = (0..m).map(|k| self.payoff[k][i] * z[k]).sum();
            out[i] = -aw + self.lambda * (z[i].max(LOG_FLOOR).ln() + 1.0);
            out[m + i] = atz + self.lambda * (w[i].max(LOG_FLOOR).ln() + 1.0);
        }
    }
}

/// Orthonormal basis of `{v : sum v = 0}` in `R^m` (Helmert contrasts).
fn simplex_tangent(m: usize) -> Vec<Vec<f64>> {
    (1..m)
        .map(|j| {
            let norm = ((j * (j + 1)) as f64).sqrt();
            (0..m)
                .map(|i| match i.cmp(&j) {
                    std::cmp::Ordering::Less => 1.0 / norm,
                    std::cmp::Ordering::Equal => -(j as f64) / norm,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect()
}

impl Dynamics for GameParams {
    fn dim(&self) -> usize {
        2 * self.m()
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn admissible(&self, method: Method) -> bool {
        method == Method::ProjectedForward
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        let m = self.m();
        let mut violation = 0.0f64;
        for block in [&x[..m], &x[m..]] {
            violation = violation.max((block.iter().sum::<f64>() - 1.0).abs());
            violation = block.iter().fold(violation, |v, &p| v.max(-p));
        }
        if violation > DOMAIN_TOL || x.iter().any(|v| v.is_nan()) {
            return Err(Error::InfeasibleInput { violation });
        }
        Ok(())
    }

    fn next_into(&self, _method: Method, eta: f64, x: &[f64], nu: &[f64], out: &mut [f64]) {
        let m = self.m();
        self.field_into(x, out);
        for i in 0..2 * m {
            out[i] = x[i] - eta * (out[i] + nu[i]);
        }
        let (z, w) = out.split_at_mut(m);
        project_simplex_in_place(z);
        project_simplex_in_place(w);
    }

    fn mean_field(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.field_into(x, &mut out);
        out
    }

    fn derive_truth(&self, noise_cov: &DenseMatrix) -> Result<GroundTruth> {
        let a = self.payoff_matrix()?;
        let m = self.m();
        let d = 2 * m;
        let (z, w) = qre_oracle(&a, self.lambda, QRE_TOL)?;
        let mut x_star = z.clone().into_vec();
        x_star.extend_from_slice(w.as_slice());

        // U = blockdiag(T, T) with T an orthonormal basis of the simplex tangent
        let tangent = simplex_tangent(m);
        let mut columns = Vec::with_capacity(2 * (m - 1));
        for offset in [0, m] {
            for t in &tangent {
                let mut col = vec![0.0; d];
                col[offset..offset + m].copy_from_slice(t);
                columns.push(DenseVector::new(col)?);
            }
        }
        let u = DenseMatrix::from_columns(d, &columns);

        // Jacobian of the field at the equilibrium
        let mut jac = DenseMatrix::zeros(d, d);
        for i in 0..m {
            jac[(i, i)] = self.lambda / z[i];
            jac[(m + i, m + i)] = self.lambda / w[i];
            for k in 0..m {
                jac[(i, m + k)] = -a[(i, k)];
                jac[(m + k, i)] = a[(i, k)];
            }
        }
        let h = u.transpose().matmul(&jac)?.matmul(&u)?;
        // local strong monotonicity on the tangent space
        spd_factor(&h.symmetrized()).map_err(|_| {
            Error::InvalidParameter("game field is not strongly monotone on the tangent space".into())
        })?;

        GroundTruth::assemble(
            DenseVector::new(x_star)?,
            u,
            h,
            noise_cov,
            Vec::new(),
            SigmaTruthMode::Analytic,
        )
    }

    fn project_manifold(&self, _truth: &GroundTruth, x: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut y = x.to_vec();
        for block in y.chunks_mut(m) {
            let shift = (1.0 - block.iter().sum::<f64>()) / m as f64;
            block.iter_mut().for_each(|p| *p += shift);
        }
        y
    }

    fn default_x0(&self) -> Vec<f64> {
        vec![1.0 / self.m() as f64; self.dim()]
    }
}
