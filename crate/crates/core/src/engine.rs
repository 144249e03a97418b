//! The stochastic approximation loop
//! `x_{k+1} = x_k - eta_{k+1} G_{eta_{k+1}}(x_k, nu_{k+1})` with streaming
//! observers for the running average, the batch-means estimator and the
//! trajectory diagnostics.

use rayon::prelude::*;
use serde::Serialize;

use crate::covest::BatchMeansState;
use crate::error::{Error, Result};
use crate::numerics::{dist_sq, DenseMatrix, DenseVector, RngStream};
use crate::problems::{sample_noise_into, NoiseModel, Problem};
use crate::schedules::{BatchSchedule, StepSchedule};

/// Iterates with norm above this are treated as a diverged run.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

pub const DEFAULT_ALPHA: f64 = 0.51;
pub const DEFAULT_BATCH_C: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub n: u64,
    pub seed: u64,
    /// Independent stream of the master seed; replication `r` uses `r`.
    pub stream_id: u64,
    pub step: StepSchedule,
    pub batch: BatchSchedule,
    pub k_s: u64,
    pub delta: f64,
    pub x0: DenseVector,
    pub noise: NoiseModel,
    pub diagnostics_stride: u64,
    /// Iterates `x_1..x_burn_in` are not averaged. Zero by default.
    pub burn_in: u64,
}

impl RunConfig {
    /// Defaults for `problem`: `alpha = 0.51`, `beta = 2 / (1 - alpha)`,
    /// `C = 1`, the problem's base stepsize, start point and noise model.
    pub fn for_problem(problem: &Problem, n: u64, seed: u64) -> Result<Self> {
        let step = StepSchedule::new(problem.default_eta(), DEFAULT_ALPHA)?;
        let batch = BatchSchedule::new(DEFAULT_BATCH_C, step.recommended_beta())?;
        Ok(Self {
            n,
            seed,
            stream_id: 0,
            step,
            batch,
            k_s: 0,
            delta: DEFAULT_DELTA,
            x0: problem.x0().clone(),
            noise: problem.noise_model().clone(),
            diagnostics_stride: (n / 1000).max(1),
            burn_in: 0,
        })
    }

    pub fn with_stream(&self, stream_id: u64) -> Self {
        Self {
            stream_id,
            ..self.clone()
        }
    }

    pub fn validate(&self, problem: &Problem) -> Result<()> {
        if self.k_s > self.n {
            return Err(Error::InvalidParameter(format!(
                "k_s = {} exceeds n = {}",
                self.k_s, self.n
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {}", self.delta)));
        }
        if self.diagnostics_stride == 0 {
            return Err(Error::InvalidParameter("diagnostics_stride must be at least 1".into()));
        }
        for got in [self.x0.dim(), self.noise.dim()] {
            if got != problem.dim() {
                return Err(Error::DimensionMismatch {
                    expected: problem.dim(),
                    got,
                });
            }
        }
        Ok(())
    }
}

/// `tau_{k_s, delta}`, the first index at or after `k_s` whose iterate leaves
/// the `delta`-ball around `x*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StoppingTime {
    At(u64),
    Never,
}

impl StoppingTime {
    pub fn is_never(&self) -> bool {
        matches!(self, StoppingTime::Never)
    }

    /// Integer encoding with `n + 1` standing for "never".
    pub fn encode(&self, n: u64) -> u64 {
        match *self {
            StoppingTime::At(k) => k,
            StoppingTime::Never => n + 1,
        }
    }
}

impl Serialize for StoppingTime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            StoppingTime::At(k) => s.serialize_u64(k),
            StoppingTime::Never => s.serialize_str("inf"),
        }
    }
}

/// Stopping time over distances `dists[l] = ||x_l - x*||`, `l = 0..=n`.
pub fn stopping_time(dists: &[f64], k_s: u64, delta: f64, n: u64) -> StoppingTime {
    dists
        .iter()
        .enumerate()
        .take(n as usize + 1)
        .skip(k_s as usize)
        .find(|(_, &d)| d > delta)
        .map_or(StoppingTime::Never, |(l, _)| StoppingTime::At(l as u64))
}

/// Running arithmetic mean.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanState {
    count: u64,
    mean: DenseVector,
}

impl MeanState {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: DenseVector::zeros(dim),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &DenseVector {
        &self.mean
    }

    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.mean.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.dim(),
                got: x.len(),
            });
        }
        self.push(x);
        Ok(())
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for (m, v) in self.mean.as_mut_slice().iter_mut().zip(x) {
            *m += (v - *m) * inv;
        }
    }
}

/// `mean <- mean + (x - mean) / count`.
pub fn update_mean(state: &mut MeanState, x: &DenseVector) -> Result<()> {
    state.update(x.as_slice())
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub n: u64,
    pub x_final: DenseVector,
    pub x_bar: DenseVector,
    pub sigma_hat: DenseMatrix,
    pub tau: StoppingTime,
    /// `(k, dist(x_k, M)^2)` every `diagnostics_stride` steps.
    pub shadow_sq_dist: Vec<(u64, f64)>,
    /// `(k, ||x_k - x*||^2)` every `diagnostics_stride` steps.
    pub dist_to_star: Vec<(u64, f64)>,
    pub containment: bool,
    /// Fraction of `k` in `[n/2, n]` with `x_k` exactly on the active
    /// manifold; `None` when the problem's manifold is not a coordinate face.
    pub identified_fraction: Option<f64>,
}

/// Runs `config.n` steps of the method configured on `problem`.
pub fn run(problem: &Problem, config: &RunConfig) -> Result<RunResult> {
    config.validate(problem)?;
    let d = problem.dim();
    let x_star = problem.ground_truth().x_star.as_slice();
    let mut rng = RngStream::new(config.seed, config.stream_id);
    let mut x = config.x0.as_slice().to_vec();
    problem.check_domain(&x)?;

    let mut next = vec![0.0; d];
    let mut nu = vec![0.0; d];
    let mut mean = MeanState::new(d);
    let mut bm = BatchMeansState::new(d, config.batch);
    let stride = config.diagnostics_stride;
    let capacity = (config.n / stride) as usize + 1;
    let mut shadow = Vec::with_capacity(capacity);
    let mut dists = Vec::with_capacity(capacity);
    let threshold_sq = config.delta * config.delta;
    let mut tau = if config.k_s == 0 && dist_sq(&x, x_star) > threshold_sq {
        StoppingTime::At(0)
    } else {
        StoppingTime::Never
    };
    let tracks_identification = problem.on_manifold_exact(&x).is_some();
    let mut identified = 0u64;
    let mut identification_window = 0u64;

    for k in 1..=config.n {
        let eta = config.step.step_at(k);
        sample_noise_into(x_star, &config.noise, &mut rng, &x, &mut nu);
        problem.next_into(eta, &x, &nu, &mut next);
        std::mem::swap(&mut x, &mut next);

        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        if !(norm_sq <= DIVERGENCE_THRESHOLD * DIVERGENCE_THRESHOLD) {
            return Err(Error::NumericalDivergence {
                step: k as usize,
                norm: norm_sq.sqrt(),
            });
        }
        if k > config.burn_in {
            mean.push(&x);
            bm.update(&x)?;
        }
        let dsq = dist_sq(&x, x_star);
        if tau.is_never() && k >= config.k_s && dsq > threshold_sq {
            tau = StoppingTime::At(k);
        }
        if k % stride == 0 {
            dists.push((k, dsq));
            shadow.push((k, problem.shadow_sq_dist(&x)));
        }
        if tracks_identification && 2 * k >= config.n {
            identification_window += 1;
            if problem.on_manifold_exact(&x) == Some(true) {
                identified += 1;
            }
        }
    }

    let (x_bar, sigma_hat) = if mean.count() == 0 {
        (config.x0.clone(), DenseMatrix::zeros(d, d))
    } else {
        let sigma_hat = bm.finalize(&mean)?;
        (mean.mean().clone(), sigma_hat)
    };
    Ok(RunResult {
        n: config.n,
        x_final: DenseVector::new(x)?,
        x_bar,
        sigma_hat,
        containment: tau.is_never(),
        tau,
        shadow_sq_dist: shadow,
        dist_to_star: dists,
        identified_fraction: (tracks_identification && identification_window > 0)
            .then(|| identified as f64 / identification_window as f64),
    })
}

/// Runs replications `0..reps` on the current rayon pool, replication `r`
/// drawing from stream `r` of the master seed. Results come back in
/// replication order whatever the pool size.
pub fn run_replications(problem: &Problem, config: &RunConfig, reps: u64) -> Result<Vec<RunResult>> {
    if reps == 0 {
        return Err(Error::InvalidReps);
    }
    (0..reps)
        .into_par_iter()
        .map(|r| run(problem, &config.with_stream(r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemId;

    #[test]
    fn mean_examples() {
        let mut m = MeanState::new(1);
        m.update(&[1.0]).unwrap();
        assert_eq!(m.mean().as_slice(), &[1.0]);
        m.update(&[3.0]).unwrap();
        assert_eq!(m.mean().as_slice(), &[2.0]);
        assert_eq!(m.count(), 2);
        assert!(m.update(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn stopping_time_examples() {
        assert_eq!(stopping_time(&[0.1, 0.1, 0.1], 0, 0.2, 2), StoppingTime::Never);
        assert_eq!(stopping_time(&[0.1, 0.3], 0, 0.2, 1), StoppingTime::At(1));
        assert_eq!(stopping_time(&[0.3, 0.3, 0.1], 2, 0.2, 2), StoppingTime::Never);
        assert_eq!(StoppingTime::Never.encode(2), 3);
    }

    #[test]
    fn empty_run() {
        let p = Problem::from_id(ProblemId::L1Quad).unwrap();
        let mut cfg = RunConfig::for_problem(&p, 0, 1).unwrap();
        let r = run(&p, &cfg).unwrap();
        assert_eq!(&r.x_final, p.x0());
        assert_eq!(r.sigma_hat, DenseMatrix::zeros(5, 5));
        // the start point is farther than delta from x*, so it already exits
        assert_eq!(r.tau, StoppingTime::At(0));
        cfg.x0 = p.ground_truth().x_star.clone();
        let r = run(&p, &cfg).unwrap();
        assert_eq!(r.sigma_hat, DenseMatrix::zeros(5, 5));
        assert!(r.tau.is_never());
    }

    #[test]
    fn runs_are_deterministic() {
        let p = Problem::from_id(ProblemId::EntropyGame).unwrap();
        let cfg = RunConfig::for_problem(&p, 2000, 42).unwrap();
        let a = run(&p, &cfg).unwrap();
        let b = run(&p, &cfg).unwrap();
        assert_eq!(a.x_bar, b.x_bar);
        assert_eq!(a.sigma_hat, b.sigma_hat);
        assert_eq!(a.dist_to_star, b.dist_to_star);
        let c = run(&p, &cfg.with_stream(1)).unwrap();
        assert_ne!(a.x_bar, c.x_bar);
    }

    #[test]
    fn deterministic_box_run_converges() {
        let p = Problem::from_id(ProblemId::BoxQp).unwrap();
        let mut cfg = RunConfig::for_problem(&p, 10_000, 0).unwrap();
        cfg.noise = NoiseModel::new(DenseMatrix::zeros(4, 4), 0.0).unwrap();
        let r = run(&p, &cfg).unwrap();
        assert!(r.x_final.distance(&p.ground_truth().x_star) < 1e-3);
    }

    #[test]
    fn x_bar_is_the_mean_of_the_iterates() {
        let p = Problem::from_id(ProblemId::L1Quad).unwrap();
        let mut cfg = RunConfig::for_problem(&p, 500, 3).unwrap();
        cfg.diagnostics_stride = 1;
        let r = run(&p, &cfg).unwrap();
        // replay the recursion to collect the iterates
        let mut rng = RngStream::new(3, 0);
        let mut x = p.x0().as_slice().to_vec();
        let mut sum = vec![0.0; 5];
        let mut nu = vec![0.0; 5];
        let mut next = vec![0.0; 5];
        for k in 1..=500 {
            sample_noise_into(p.ground_truth().x_star.as_slice(), &cfg.noise, &mut rng, &x, &mut nu);
            p.next_into(cfg.step.step_at(k), &x, &nu, &mut next);
            std::mem::swap(&mut x, &mut next);
            sum.iter_mut().zip(&x).for_each(|(s, v)| *s += v);
        }
        assert_eq!(r.x_final.as_slice(), x.as_slice());
        for (m, s) in r.x_bar.iter().zip(&sum) {
            assert!((m - s / 500.0).abs() <= 1e-12 * (1.0 + m.abs()));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let p = Problem::from_id(ProblemId::L1Quad).unwrap();
        let mut cfg = RunConfig::for_problem(&p, 1000, 3).unwrap();
        cfg.step = StepSchedule::new(50.0, 0.51).unwrap();
        assert!(matches!(run(&p, &cfg), Err(Error::NumericalDivergence { .. })));
    }

    #[test]
    fn replications_do_not_depend_on_pool_size() {
        let p = Problem::from_id(ProblemId::L1Quad).unwrap();
        let cfg = RunConfig::for_problem(&p, 300, 11).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_replications(&p, &cfg, 8)).unwrap();
        let b = four.install(|| run_replications(&p, &cfg, 8)).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.x_bar, rb.x_bar);
            assert_eq!(ra.sigma_hat, rb.sigma_hat);
        }
        assert!(matches!(run_replications(&p, &cfg, 0), Err(Error::InvalidReps)));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::problems::ProblemId;

    #[test]
    fn projected_iterates_stay_feasible() {
        for id in [ProblemId::BoxQp, ProblemId::EntropyGame] {
            let problem = Problem::from_id(id).unwrap();
            let config = RunConfig::for_problem(&problem, 5_000, 1).unwrap();
            let mut rng = RngStream::new(config.seed, 0);
            let x_star = problem.ground_truth().x_star.as_slice();
            let mut x = config.x0.as_slice().to_vec();
            let mut nu = vec![0.0; problem.dim()];
            let mut next = vec![0.0; problem.dim()];
            for k in 1..=config.n {
                sample_noise_into(x_star, &config.noise, &mut rng, &x, &mut nu);
                problem.next_into(config.step.step_at(k), &x, &nu, &mut next);
                std::mem::swap(&mut x, &mut next);
                assert!(problem.check_domain(&x).is_ok(), "{} step {k}: {x:?}", id.as_str());
            }
        }
    }

    #[test]
    fn averaged_iterates_have_the_limiting_variance() {
        let problem = Problem::from_id(ProblemId::L1Quad).unwrap();
        let truth = problem.ground_truth();
        let v = truth.tangent_direction(0);
        let n = 100_000;
        let config = RunConfig::for_problem(&problem, n, 77).unwrap();
        let samples: Vec<f64> = run_replications(&problem, &config, 500)
            .unwrap()
            .iter()
            .map(|r| (n as f64).sqrt() * v.dot(&r.x_bar.sub(&truth.x_star)))
            .collect();
        let m = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        let target = truth.sigma_limit.quadratic_form(v.as_slice()).unwrap();
        assert!((var - target).abs() <= 0.25 * target, "{var} vs {target}");
    }
}
