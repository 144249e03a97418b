//! Empirical coverage of batch-means confidence intervals over independent
//! replications, next to the exact-normal baseline.

use sacovest::engine::RunConfig;
use sacovest::inference::{coverage_study, synthetic_coverage};
use sacovest::problems::{Problem, ProblemId};

fn main() -> sacovest::Result<()> {
    let problem = Problem::from_id(ProblemId::L1Quad)?;
    let truth = problem.ground_truth();
    let v = truth.tangent_direction(0);
    let n = 20_000;
    let reps = 100;

    let study = coverage_study(&problem, &RunConfig::for_problem(&problem, n, 5)?, reps, &v, 0.95)?;
    let mean_error = study.rows.iter().map(|r| r.error).sum::<f64>() / reps as f64;
    println!("batch-means coverage : {:.3} ({reps} reps, n = {n})", study.coverage);
    println!("mean opnorm error    : {mean_error:.4}");

    let exact = synthetic_coverage(&truth.x_star, &truth.sigma_limit, n, &v, 0.95, 5000, 5)?;
    println!("exact-normal baseline: {exact:.3}");
    Ok(())
}
