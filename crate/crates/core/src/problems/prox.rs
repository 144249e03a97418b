//! Proximal maps and projections used by the zoo's step maps.

use crate::error::{Error, Result};
use crate::numerics::DenseVector;

/// Entrywise `sign(x_i) * max(|x_i| - theta, 0)`, the proximal map of
/// `theta * ||.||_1`.
pub fn soft_threshold(x: &DenseVector, theta: f64) -> DenseVector {
    let mut out = x.clone();
    soft_threshold_in_place(out.as_mut_slice(), theta);
    out
}

pub(crate) fn soft_threshold_in_place(x: &mut [f64], theta: f64) {
    debug_assert!(theta >= 0.0);
    for v in x.iter_mut() {
        let mag = v.abs() - theta;
        *v = if mag > 0.0 { mag.copysign(*v) } else { 0.0 };
    }
}

/// Euclidean projection onto the probability simplex `{x >= 0, sum x = 1}`.
///
/// Sort-based: with `u` sorted in decreasing order, the threshold is
/// `(sum_{i<=rho} u_i - 1) / rho` for the largest `rho` keeping `u_rho` above it.
pub fn project_simplex(v: &DenseVector) -> DenseVector {
    let mut out = v.clone();
    project_simplex_in_place(out.as_mut_slice());
    out
}

pub(crate) fn project_simplex_in_place(v: &mut [f64]) {
    let n = v.len();
    if n == 0 {
        return;
    }
    let mut u: Vec<f64> = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // scrub the last rounding error so the output sums to one
    let total: f64 = v.iter().sum();
    let residual = 1.0 - total;
    if residual != 0.0 {
        if let Some(imax) = (0..n).max_by(|&a, &b| v[a].total_cmp(&v[b])) {
            v[imax] = (v[imax] + residual).max(0.0);
        }
    }
}

/// Entrywise clamp onto `[lo, hi]`.
pub fn project_box(v: &DenseVector, lo: &DenseVector, hi: &DenseVector) -> Result<DenseVector> {
    let d = v.dim();
    for other in [lo, hi] {
        if other.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: other.dim(),
            });
        }
    }
    if let Some(i) = (0..d).find(|&i| lo[i] > hi[i]) {
        return Err(Error::InvalidBounds {
            index: i,
            lo: lo[i],
            hi: hi[i],
        });
    }
    let mut out = v.clone();
    project_box_in_place(out.as_mut_slice(), lo.as_slice(), hi.as_slice());
    Ok(out)
}

pub(crate) fn project_box_in_place(v: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((x, &l), &h) in v.iter_mut().zip(lo).zip(hi) {
        *x = x.clamp(l, h);
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn simplex_projection_matches_grid_search(a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let v = DenseVector::new(vec![a, b]).unwrap();
            let p = project_simplex(&v);
            let best = (0..=1000)
                .map(|i| i as f64 * 1e-3)
                .min_by(|s, t| {
                    let ds = (s - a).powi(2) + (1.0 - s - b).powi(2);
                    let dt = (t - a).powi(2) + (1.0 - t - b).powi(2);
                    ds.total_cmp(&dt)
                })
                .unwrap();
            prop_assert!((p[0] - best).abs() <= 1e-3 && (p[1] - (1.0 - best)).abs() <= 1e-3);
        }
    }
}
