//! Operator-norm error of the estimator across a grid of horizons, with a
//! log-log slope fit.

use sacovest::engine::{run_replications, RunConfig};
use sacovest::inference::rate_fit;
use sacovest::numerics::operator_norm;
use sacovest::problems::{Problem, ProblemId};

fn main() -> sacovest::Result<()> {
    let problem = Problem::from_id(ProblemId::L1Quad)?;
    let sigma = &problem.ground_truth().sigma_limit;
    let mut points = Vec::new();
    for e in 10..=15 {
        let n = 1u64 << e;
        let results = run_replications(&problem, &RunConfig::for_problem(&problem, n, 2)?, 20)?;
        let mut total = 0.0;
        for r in &results {
            total += operator_norm(&r.sigma_hat.sub(sigma)?)?;
        }
        let mean = total / results.len() as f64;
        println!("n = {n:>6}  mean error {mean:.4}");
        points.push((n as f64, mean));
    }
    let fit = rate_fit(&points)?;
    println!("slope {:.3}, r^2 {:.3}", fit.slope, fit.r_squared);
    Ok(())
}
