//! Limiting covariance, normal quantiles, confidence intervals and the
//! coverage and rate studies built on them.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{run, RunConfig};
use crate::error::{Error, Result};
use crate::numerics::{operator_norm, solve_linear, DenseMatrix, DenseVector, RngStream};
use crate::problems::Problem;

const ORTHONORMAL_TOL: f64 = 1e-6;
const NEGATIVE_VARIANCE_TOL: f64 = 1e-10;

/// `U H^{-1} S H^{-T} U^T`, computed with linear solves and symmetrized.
pub fn limiting_sigma(u: &DenseMatrix, h: &DenseMatrix, s: &DenseMatrix) -> Result<DenseMatrix> {
    let (d, r) = (u.rows(), u.cols());
    for m in [h, s] {
        if m.rows() != r || m.cols() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: m.rows().max(m.cols()),
            });
        }
    }
    let gram = u.transpose().matmul(u)?;
    let deviation = gram.max_abs_diff(&DenseMatrix::identity(r));
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal { deviation });
    }
    if r == 0 {
        return Ok(DenseMatrix::zeros(d, d));
    }
    // H^{-1} S H^{-T} = (H^{-1} (H^{-1} S)^T)^T
    let left = solve_linear(h, s)?;
    let core = solve_linear(h, &left.transpose())?.transpose();
    Ok(u.matmul(&core)?.matmul(&u.transpose())?.symmetrized())
}

/// `erf` by its Maclaurin series in the form
/// `2/sqrt(pi) e^{-x^2} sum_n 2^n x^{2n+1} / (1 3 ... (2n+1))`, all terms
/// positive.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term.abs() > 1e-17 * sum.abs() {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
    }
    std::f64::consts::FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// `erfc(x)` for `x >= 3` by the Laplace continued fraction (modified Lentz).
fn erfc_continued_fraction(x: f64) -> f64 {
    // erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = x + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
}

fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x < 3.0 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`normal_cdf`]: Acklam's rational approximation refined by one
/// Halley step.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfDomain {
            value: p,
            domain: "(0, 1)",
        });
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };

    // Halley refinement; the residual is taken on the smaller tail
    let e = if x > 0.0 {
        (1.0 - p) - 0.5 * erfc(x / std::f64::consts::SQRT_2)
    } else {
        normal_cdf(x) - p
    };
    let u = e / normal_pdf(x);
    Ok(x - u / (1.0 + 0.5 * x * u))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub direction: DenseVector,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

fn directional_variance(sigma_hat: &DenseMatrix, v: &DenseVector) -> Result<f64> {
    let var = sigma_hat.quadratic_form(v.as_slice())?;
    if var < -NEGATIVE_VARIANCE_TOL || var.is_nan() {
        return Err(Error::DegenerateDirection { variance: var });
    }
    Ok(var.max(0.0))
}

/// `v^T x_bar +- z_{1 - (1 - level)/2} sqrt(v^T Sigma_hat v / n)`.
pub fn confidence_interval(
    x_bar: &DenseVector,
    sigma_hat: &DenseMatrix,
    n: u64,
    v: &DenseVector,
    level: f64,
) -> Result<ConfidenceInterval> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if v.norm() == 0.0 {
        return Err(Error::InvalidParameter("direction must be nonzero".into()));
    }
    if x_bar.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: x_bar.dim(),
            got: v.dim(),
        });
    }
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::OutOfDomain {
            value: level,
            domain: "(0, 1)",
        });
    }
    let var = directional_variance(sigma_hat, v)?;
    let center = v.dot(x_bar);
    let w = z * (var / n as f64).sqrt();
    Ok(ConfidenceInterval {
        lo: center - w,
        hi: center + w,
        level,
        direction: v.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WaldTest {
    pub statistic: f64,
}

impl WaldTest {
    /// Two-sided rejection at significance `q`.
    pub fn rejects_at(&self, q: f64) -> Result<bool> {
        Ok(self.statistic.abs() > normal_quantile(1.0 - q / 2.0)?)
    }

    pub fn p_value(&self) -> f64 {
        2.0 * normal_cdf(-self.statistic.abs())
    }
}

/// `T = sqrt(n) (v^T x_bar - null_value) / sqrt(v^T Sigma_hat v)`.
pub fn wald_test(
    x_bar: &DenseVector,
    sigma_hat: &DenseMatrix,
    n: u64,
    v: &DenseVector,
    null_value: f64,
) -> Result<WaldTest> {
    let var = directional_variance(sigma_hat, v)?;
    if var <= 0.0 {
        return Err(Error::DegenerateDirection { variance: var });
    }
    Ok(WaldTest {
        statistic: (n as f64).sqrt() * (v.dot(x_bar) - null_value) / var.sqrt(),
    })
}

/// One replication of a coverage study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageRow {
    pub n: u64,
    pub rep: u64,
    /// `||Sigma_hat - Sigma||_2` against the problem's reference covariance.
    pub error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub covered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageStudy {
    pub coverage: f64,
    pub target: f64,
    pub rows: Vec<CoverageRow>,
}

/// Runs `reps` replications (replication `r` on stream `r`) on the current
/// rayon pool and reports the fraction of intervals containing `v^T x*`.
pub fn coverage_study(
    problem: &Problem,
    config: &RunConfig,
    reps: u64,
    v: &DenseVector,
    level: f64,
) -> Result<CoverageStudy> {
    if reps == 0 {
        return Err(Error::InvalidReps);
    }
    normal_quantile(1.0 - (1.0 - level) / 2.0)?;
    let truth = problem.ground_truth();
    let target = v.dot(&truth.x_star);
    let rows = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let result = run(problem, &config.with_stream(rep))?;
            let ci = confidence_interval(&result.x_bar, &result.sigma_hat, config.n, v, level)?;
            Ok(CoverageRow {
                n: config.n,
                rep,
                error: operator_norm(&result.sigma_hat.sub(&truth.sigma_limit)?)?,
                ci_lo: ci.lo,
                ci_hi: ci.hi,
                covered: ci.contains(target),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageStudy {
        coverage: rows.iter().filter(|r| r.covered).count() as f64 / reps as f64,
        target,
        rows,
    })
}

/// Coverage of the same interval construction when `v^T x_bar` is drawn
/// exactly from `N(v^T x*, v^T Sigma v / n)` and `Sigma_hat = Sigma`.
pub fn synthetic_coverage(
    x_star: &DenseVector,
    sigma: &DenseMatrix,
    n: u64,
    v: &DenseVector,
    level: f64,
    reps: u64,
    seed: u64,
) -> Result<f64> {
    if reps == 0 {
        return Err(Error::InvalidReps);
    }
    let target = v.dot(x_star);
    let sd = (directional_variance(sigma, v)? / n as f64).sqrt();
    let mut rng = RngStream::new(seed, 0);
    let mut covered = 0u64;
    for _ in 0..reps {
        let mut x_bar = x_star.clone();
        // move only along v so that v^T x_bar has the prescribed law
        let shift = sd * rng.standard_normal() / v.norm_sq();
        x_bar.axpy(shift, v);
        if confidence_interval(&x_bar, sigma, n, v, level)?.contains(target) {
            covered += 1;
        }
    }
    Ok(covered as f64 / reps as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `log(error)` on `log(n)`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints { got: points.len() });
    }
    if let Some(&(n, error)) = points
        .iter()
        .find(|(n, e)| !(*n > 0.0 && *e > 0.0 && n.is_finite() && e.is_finite()))
    {
        return Err(Error::NonPositiveValue { n, error });
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, e)| (n.ln(), e.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints { got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy <= 1e-300 { 1.0 } else { (1.0 - ssr / syy).clamp(0.0, 1.0) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Averages a sampled series `(k, value)` over `bins` logarithmically spaced
/// bins covering `[k_lo, k_hi]` and returns `(geometric bin center, mean)`
/// for every bin that received samples. Bins whose mean is zero are kept; the
/// caller decides how to treat them.
pub fn log_binned_means(series: &[(u64, f64)], k_lo: u64, k_hi: u64, bins: usize) -> Result<Vec<(f64, f64)>> {
    if bins == 0 || k_lo == 0 || k_hi <= k_lo {
        return Err(Error::InvalidParameter(format!(
            "need bins >= 1 and 0 < k_lo < k_hi, got {bins}, {k_lo}, {k_hi}"
        )));
    }
    let (llo, lhi) = ((k_lo as f64).ln(), (k_hi as f64).ln());
    let width = (lhi - llo) / bins as f64;
    let mut sums = vec![(0.0, 0u64); bins];
    for &(k, value) in series {
        if k < k_lo || k > k_hi {
            continue;
        }
        let b = (((k as f64).ln() - llo) / width).floor() as usize;
        let b = b.min(bins - 1);
        sums[b].0 += value;
        sums[b].1 += 1;
    }
    Ok(sums
        .iter()
        .enumerate()
        .filter(|(_, s)| s.1 > 0)
        .map(|(b, s)| ((llo + (b as f64 + 0.5) * width).exp(), s.0 / s.1 as f64))
        .collect())
}

/// Sample covariance over replications of `sqrt(n) (x_bar - x*)`.
pub fn monte_carlo_sigma(problem: &Problem, config: &RunConfig, reps: u64) -> Result<DenseMatrix> {
    if reps < 2 {
        return Err(Error::InvalidReps);
    }
    let x_star = problem.ground_truth().x_star.clone();
    let scale = (config.n as f64).sqrt();
    let samples = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let r = run(problem, &config.with_stream(rep))?;
            Ok(r.x_bar.sub(&x_star).scale(scale))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sample_covariance(&samples))
}

pub(crate) fn sample_covariance(samples: &[DenseVector]) -> DenseMatrix {
    let d = samples[0].dim();
    let k = samples.len() as f64;
    let mut mean = DenseVector::zeros(d);
    for s in samples {
        mean.axpy(1.0 / k, s);
    }
    let mut cov = DenseMatrix::zeros(d, d);
    for s in samples {
        let dev = s.sub(&mean);
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += dev[i] * dev[j] / (k - 1.0);
            }
        }
    }
    cov.symmetrized()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn limiting_sigma_examples() {
        let i2 = DenseMatrix::identity(2);
        assert_eq!(limiting_sigma(&i2, &i2, &i2).unwrap(), i2);

        let e1 = DenseMatrix::from_rows(&[&[1.0], &[0.0]]);
        let s = limiting_sigma(&e1, &DenseMatrix::from_rows(&[&[2.0]]), &DenseMatrix::from_rows(&[&[4.0]])).unwrap();
        assert_eq!(s, DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]));

        let h = DenseMatrix::from_rows(&[&[2.0, 1.0], &[0.0, 1.0]]);
        let s = limiting_sigma(&i2, &h, &i2).unwrap();
        let expected = DenseMatrix::from_rows(&[&[0.5, -0.5], &[-0.5, 1.0]]);
        assert!(s.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn limiting_sigma_rejects_bad_bases() {
        let u = DenseMatrix::from_rows(&[&[1.0], &[1.0]]);
        let one = DenseMatrix::identity(1);
        assert!(matches!(limiting_sigma(&u, &one, &one), Err(Error::NotOrthonormal { .. })));
        let h = DenseMatrix::zeros(2, 2);
        assert!(matches!(
            limiting_sigma(&DenseMatrix::identity(2), &h, &DenseMatrix::identity(2)),
            Err(Error::SingularMatrix { .. })
        ));
    }

    /// Bisection on the series CDF, independent of the rational approximation.
    fn bisect_quantile(p: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-15);
        // both sides of the series / continued fraction switch
        let series = 1.0 - erf_series(3.0);
        let fraction = erfc_continued_fraction(3.0);
        assert!((series - fraction).abs() < 1e-10 * fraction);
        assert!((normal_cdf(-8.0) - 6.220_960_574_271_785e-16).abs() < 1e-28);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_98).abs() < 1e-8);
        assert!((normal_quantile(0.975).unwrap() - bisect_quantile(0.975)).abs() < 1e-12);
        assert!((normal_quantile(0.841_344_746).unwrap() - 1.0).abs() < 1e-8);
        for p in [1.0, 0.0, -0.1, f64::NAN] {
            assert!(matches!(normal_quantile(p), Err(Error::OutOfDomain { .. })));
        }
    }

    #[test]
    fn confidence_interval_examples() {
        let ci = confidence_interval(&v(&[0.0, 0.0]), &DenseMatrix::identity(2), 100, &v(&[1.0, 0.0]), 0.95).unwrap();
        assert!((ci.lo + 0.195_996).abs() < 1e-6 && (ci.hi - 0.195_996).abs() < 1e-6);

        let ci = confidence_interval(&v(&[0.7]), &DenseMatrix::zeros(1, 1), 10, &v(&[1.0]), 0.95).unwrap();
        assert_eq!((ci.lo, ci.hi), (0.7, 0.7));

        let bad = DenseMatrix::from_rows(&[&[-1.0]]);
        assert!(matches!(
            confidence_interval(&v(&[0.0]), &bad, 10, &v(&[1.0]), 0.95),
            Err(Error::DegenerateDirection { .. })
        ));
        assert!(matches!(
            confidence_interval(&v(&[0.0]), &DenseMatrix::identity(1), 10, &v(&[1.0]), 1.0),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn wald_examples() {
        let s = DenseMatrix::identity(1);
        let t = wald_test(&v(&[0.3]), &s, 25, &v(&[1.0]), 0.3).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!(!t.rejects_at(0.05).unwrap());
        assert!(WaldTest { statistic: 2.5 }.rejects_at(0.05).unwrap());
        assert!(!WaldTest { statistic: 1.0 }.rejects_at(0.05).unwrap());
        assert!(wald_test(&v(&[0.3]), &DenseMatrix::zeros(1, 1), 25, &v(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn rate_fit_examples() {
        let pts: Vec<(f64, f64)> = (4..12).map(|k| 2f64.powi(k)).map(|n| (n, n.powf(-0.5))).collect();
        let fit = rate_fit(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let fit = rate_fit(&[(10.0, 3.0), (100.0, 1.5)]).unwrap();
        assert!((fit.slope + 2f64.ln() / 10f64.ln()).abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);

        assert!(matches!(rate_fit(&[(1.0, 1.0)]), Err(Error::InsufficientPoints { .. })));
        assert!(matches!(rate_fit(&[(1.0, 1.0), (2.0, 0.0)]), Err(Error::NonPositiveValue { .. })));
    }

    #[test]
    fn synthetic_coverage_matches_level() {
        let sigma = DenseMatrix::from_rows(&[&[0.5, 0.1], &[0.1, 0.3]]);
        let cov = synthetic_coverage(&v(&[1.0, -1.0]), &sigma, 1000, &v(&[1.0, 2.0]), 0.95, 2000, 5).unwrap();
        let se = (0.95 * 0.05 / 2000.0f64).sqrt();
        assert!((cov - 0.95).abs() <= 2.0 * se, "{cov}");
        assert!(matches!(
            synthetic_coverage(&v(&[0.0]), &DenseMatrix::identity(1), 10, &v(&[1.0]), 0.95, 0, 1),
            Err(Error::InvalidReps)
        ));
    }

    #[test]
    fn binned_means() {
        let series: Vec<(u64, f64)> = (1..=1000).map(|k| (k, 1.0 / k as f64)).collect();
        let bins = log_binned_means(&series, 10, 1000, 4).unwrap();
        assert_eq!(bins.len(), 4);
        let pts: Vec<(f64, f64)> = bins.into_iter().collect();
        let fit = rate_fit(&pts).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.1);
    }
}
