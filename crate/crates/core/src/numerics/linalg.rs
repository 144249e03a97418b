use super::matrix::{dot, DenseMatrix};
use crate::error::{Error, Result};

const SINGULAR_RTOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 2_000;
const JACOBI_MAX_SWEEPS: usize = 100;
const POWER_RTOL: f64 = 1e-15;

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
///
/// `A` need not be symmetric. A pivot smaller than `1e-12` times the largest
/// initial entry of `A` is reported as [`Error::SingularMatrix`].
pub fn solve_linear(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.cols(),
        });
    }
    if b.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.rows(),
        });
    }
    let m = b.cols();
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, m));
    }
    let threshold = SINGULAR_RTOL * a.max_abs();

    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let (piv_row, piv_abs) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs < threshold || piv_abs == 0.0 {
            return Err(Error::SingularMatrix {
                column: col,
                pivot: piv_abs,
            });
        }
        if piv_row != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(piv_row, j)];
                lu[(piv_row, j)] = tmp;
            }
            for j in 0..m {
                let tmp = x[(col, j)];
                x[(col, j)] = x[(piv_row, j)];
                x[(piv_row, j)] = tmp;
            }
        }
        let pivot = lu[(col, col)];
        for r in (col + 1)..n {
            let factor = lu[(r, col)] / pivot;
            if factor == 0.0 {
                continue;
            }
            lu[(r, col)] = 0.0;
            for j in (col + 1)..n {
                let v = lu[(col, j)];
                lu[(r, j)] -= factor * v;
            }
            for j in 0..m {
                let v = x[(col, j)];
                x[(r, j)] -= factor * v;
            }
        }
    }
    // back substitution
    for j in 0..m {
        for i in (0..n).rev() {
            let mut acc = x[(i, j)];
            for k in (i + 1)..n {
                acc -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = acc / lu[(i, i)];
        }
    }
    Ok(x)
}

/// Largest singular value by power iteration on `A^T A`.
///
/// Starts from the all-ones vector and re-seeds once with a fixed
/// non-symmetric vector if the iterate collapses to zero. Nearly tied top
/// singular values make power iteration crawl; when it runs out of
/// iterations the answer comes from a Jacobi eigen-solve of `A^T A` instead.
pub fn operator_norm(a: &DenseMatrix) -> Result<f64> {
    let n = a.cols();
    if n == 0 || a.rows() == 0 || a.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let starts = [vec![1.0; n], (0..n).map(|i| 1.0 + 0.5 * i as f64 + (i as f64).sin()).collect::<Vec<_>>()];
    for start in starts.iter() {
        match power_iterate(a, start) {
            Ok(Some(sigma)) => return Ok(sigma),
            Ok(None) => {}
            Err(Error::NonConvergence { .. }) => return jacobi_top_singular_value(a),
            Err(e) => return Err(e),
        }
    }
    // both starts collapsed: the start vectors lie in the null space of A.
    // A is nonzero, so fall back to the basis vector of its largest column.
    let best = (0..n)
        .max_by(|&i, &j| {
            let ci: f64 = (0..a.rows()).map(|r| a[(r, i)].powi(2)).sum();
            let cj: f64 = (0..a.rows()).map(|r| a[(r, j)].powi(2)).sum();
            ci.total_cmp(&cj)
        })
        .unwrap_or(0);
    let mut e = vec![0.0; n];
    e[best] = 1.0;
    power_iterate(a, &e)?.ok_or(Error::NonConvergence {
        what: "operator_norm",
        iterations: POWER_MAX_ITERS,
    })
}

/// Largest eigenvalue of the Gram matrix of `a / max|a|` by cyclic Jacobi
/// rotations, mapped back to a singular value of `a`.
fn jacobi_top_singular_value(a: &DenseMatrix) -> Result<f64> {
    let scale = a.max_abs();
    let b = a.scale(1.0 / scale);
    let mut m = b.transpose().matmul(&b)?;
    let n = m.rows();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)] * m[(p, q)])
            .sum();
        if off <= f64::EPSILON * f64::EPSILON * m.frobenius_norm().powi(2) {
            let top = (0..n).map(|i| m[(i, i)]).fold(0.0, f64::max);
            return Ok(scale * top.sqrt());
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    Err(Error::NonConvergence {
        what: "operator_norm",
        iterations: JACOBI_MAX_SWEEPS,
    })
}

/// Returns `Ok(None)` if the iterate collapsed (start in the null space).
fn power_iterate(a: &DenseMatrix, start: &[f64]) -> Result<Option<f64>> {
    let norm0 = dot(start, start).sqrt();
    let mut v: Vec<f64> = start.iter().map(|x| x / norm0).collect();
    let scale = a.max_abs();
    let mut lambda_prev = f64::NAN;
    let mut stable = 0;
    for _ in 0..POWER_MAX_ITERS {
        let av = a.matvec(&v)?;
        let lambda = av.norm_sq();
        let w = a.matvec_t(av.as_slice())?;
        let wn = w.norm();
        if wn <= f64::MIN_POSITIVE.sqrt() * scale * scale {
            return Ok(None);
        }
        v = w.into_vec().into_iter().map(|x| x / wn).collect();
        // Rayleigh quotients of A^T A never decrease in exact arithmetic, so a
        // drop is rounding and counts as stagnation.
        if lambda - lambda_prev <= POWER_RTOL * lambda {
            stable += 1;
            if stable >= 3 {
                let av = a.matvec(&v)?;
                return Ok(Some(av.norm()));
            }
        } else {
            stable = 0;
        }
        lambda_prev = lambda;
    }
    Err(Error::NonConvergence {
        what: "operator_norm",
        iterations: POWER_MAX_ITERS,
    })
}

/// Cholesky factor `L` with `L L^T = S` for symmetric positive definite `S`.
pub fn spd_factor(s: &DenseMatrix) -> Result<DenseMatrix> {
    let n = s.rows();
    if !s.is_square() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.cols(),
        });
    }
    let scale = s.max_abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in (i + 1)..n {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::InvalidParameter(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { row: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut acc = s[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / djj;
        }
    }
    Ok(l)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn square(max: usize) -> impl Strategy<Value = DenseMatrix> {
        (1..=max).prop_flat_map(|r| {
            proptest::collection::vec(-1.0..1.0f64, r * r).prop_map(move |v| DenseMatrix::new(r, r, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn spd_factor_reproduces_its_input(b in square(8)) {
            let r = b.rows();
            let s = b.matmul(&b.transpose()).unwrap().add(&DenseMatrix::identity(r).scale(0.1)).unwrap();
            let l = spd_factor(&s).unwrap();
            let back = l.matmul(&l.transpose()).unwrap();
            prop_assert!(operator_norm(&back.sub(&s).unwrap()).unwrap() <= 1e-9 * operator_norm(&s).unwrap());
        }

        #[test]
        fn solve_inverts(b in square(8)) {
            // diagonal shift keeps the condition number moderate
            let r = b.rows();
            let a = b.add(&DenseMatrix::identity(r).scale(3.0)).unwrap();
            let inv = solve_linear(&a, &DenseMatrix::identity(r)).unwrap();
            let gap = a.matmul(&inv).unwrap().sub(&DenseMatrix::identity(r)).unwrap();
            prop_assert!(operator_norm(&gap).unwrap() <= 1e-8);
        }

        #[test]
        fn two_by_two_norm_matches_closed_form(e in proptest::collection::vec(-10.0..10.0f64, 4)) {
            let m = DenseMatrix::new(2, 2, e.clone()).unwrap();
            let (a, b, c, d) = (e[0], e[1], e[2], e[3]);
            let s1 = a * a + b * b + c * c + d * d;
            let det = a * d - b * c;
            let top = ((s1 + (s1 * s1 - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt();
            prop_assert!((operator_norm(&m).unwrap() - top).abs() <= 1e-8 * top.max(1.0));
        }
    }
}
