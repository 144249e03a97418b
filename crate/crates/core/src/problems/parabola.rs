use serde::Serialize;

use super::{sign0, Dynamics, GroundTruth, Method, SigmaTruthMode};
use crate::error::Result;
use crate::numerics::{DenseMatrix, DenseVector};

/// `f(x, y) = |x - y^2| + (x^2 + y^2) / 2`, minimized at the origin, with
/// active manifold `{x = y^2}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParabolaParams {
    pub sigma: f64,
}

impl Default for ParabolaParams {
    fn default() -> Self {
        Self { sigma: 0.5 }
    }
}

fn subgradient(x: &[f64]) -> [f64; 2] {
    let s = sign0(x[0] - x[1] * x[1]);
    [x[0] + s, x[1] - 2.0 * x[1] * s]
}

/// Real roots of `2 y^3 + (1 - 2p) y - q = 0`, the stationarity condition of
/// `(y^2 - p)^2 + (y - q)^2`.
fn stationary_points(p: f64, q: f64) -> Vec<f64> {
    let a = 1.0 - 2.0 * p;
    let g = |y: f64| 2.0 * y * y * y + a * y - q;
    let dg = |y: f64| 6.0 * y * y + a;
    // Cauchy bound on the roots of the monic cubic
    let bound = 1.0 + (0.5 * a.abs()).max(0.5 * q.abs());
    let mut knots = vec![-bound];
    if a < 0.0 {
        let c = (-a / 6.0).sqrt();
        knots.extend([-c, c]);
    }
    knots.push(bound);

    let mut roots = Vec::with_capacity(3);
    for pair in knots.windows(2) {
        let (mut lo, mut hi) = (pair[0], pair[1]);
        let (glo, ghi) = (g(lo), g(hi));
        if glo == 0.0 {
            roots.push(lo);
            continue;
        }
        if glo.signum() == ghi.signum() {
            if ghi == 0.0 {
                roots.push(hi);
            }
            continue;
        }
        // safeguarded Newton: fall back to bisection when a step leaves the bracket
        let rising = ghi > 0.0;
        let mut y = 0.5 * (lo + hi);
        for _ in 0..200 {
            let gy = g(y);
            if gy == 0.0 {
                break;
            }
            if (gy > 0.0) == rising {
                hi = y;
            } else {
                lo = y;
            }
            let slope = dg(y);
            let newton = y - gy / slope;
            let next = if slope != 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - y).abs() <= 1e-16 * (1.0 + y.abs()) {
                y = next;
                break;
            }
            y = next;
        }
        roots.push(y);
    }
    roots
}

impl Dynamics for ParabolaParams {
    fn dim(&self) -> usize {
        2
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn admissible(&self, method: Method) -> bool {
        method == Method::Subgradient
    }

    fn check_domain(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }

    fn next_into(&self, _method: Method, eta: f64, x: &[f64], nu: &[f64], out: &mut [f64]) {
        let g = subgradient(x);
        out[0] = x[0] - eta * (g[0] + nu[0]);
        out[1] = x[1] - eta * (g[1] + nu[1]);
    }

    fn mean_field(&self, x: &[f64]) -> Vec<f64> {
        subgradient(x).to_vec()
    }

    fn derive_truth(&self, noise_cov: &DenseMatrix) -> Result<GroundTruth> {
        // On M, f(y^2, y) = (y^2 + y^4) / 2 has second derivative 1 at the
        // origin; the tangent there is the y axis.
        let u = DenseMatrix::from_rows(&[&[0.0], &[1.0]]);
        let h = DenseMatrix::from_rows(&[&[1.0]]);
        GroundTruth::assemble(
            DenseVector::zeros(2),
            u,
            h,
            noise_cov,
            Vec::new(),
            SigmaTruthMode::MonteCarloOnly,
        )
    }

    fn project_manifold(&self, _truth: &GroundTruth, x: &[f64]) -> Vec<f64> {
        let (p, q) = (x[0], x[1]);
        let best = stationary_points(p, q)
            .into_iter()
            .map(|y| ((y * y - p).powi(2) + (y - q).powi(2), y))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map_or(0.0, |(_, y)| y);
        vec![best * best, best]
    }

    fn default_x0(&self) -> Vec<f64> {
        vec![0.5, 0.5]
    }
}
