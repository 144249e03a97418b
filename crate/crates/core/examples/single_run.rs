//! One stochastic proximal-gradient run on the l1-regularized quadratic,
//! followed by a confidence interval for the first tangent coordinate.

use sacovest::engine::{run, RunConfig};
use sacovest::inference::confidence_interval;
use sacovest::numerics::operator_norm;
use sacovest::problems::{Problem, ProblemId};

fn main() -> sacovest::Result<()> {
    let problem = Problem::from_id(ProblemId::L1Quad)?;
    let truth = problem.ground_truth();
    let config = RunConfig::for_problem(&problem, 50_000, 1)?;
    let result = run(&problem, &config)?;

    println!("x*      = {:?}", truth.x_star.as_slice());
    println!("x_bar   = {:?}", result.x_bar.as_slice());
    println!("x_final = {:?}", result.x_final.as_slice());
    println!(
        "||Sigma_hat - Sigma||_2 = {:.4}",
        operator_norm(&result.sigma_hat.sub(&truth.sigma_limit)?)?
    );

    let v = truth.tangent_direction(0);
    let ci = confidence_interval(&result.x_bar, &result.sigma_hat, result.n, &v, 0.95)?;
    println!(
        "95% CI for v^T x*: [{:.5}, {:.5}], truth {:.5}",
        ci.lo,
        ci.hi,
        v.dot(&truth.x_star)
    );
    Ok(())
}
