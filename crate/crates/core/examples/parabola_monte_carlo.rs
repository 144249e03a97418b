//! The nonconvex parabola has no trusted analytic covariance, so the
//! estimator is compared with a Monte Carlo covariance of `sqrt(n) x_bar`.

use sacovest::engine::{run, RunConfig};
use sacovest::inference::monte_carlo_sigma;
use sacovest::numerics::operator_norm;
use sacovest::problems::{Problem, ProblemId, SigmaTruthMode};

fn main() -> sacovest::Result<()> {
    let problem = Problem::from_id(ProblemId::NonconvexParabola)?;
    assert_eq!(problem.ground_truth().sigma_mode, SigmaTruthMode::MonteCarloOnly);
    let config = RunConfig::for_problem(&problem, 20_000, 4)?;

    let result = run(&problem, &config)?;
    let mc = monte_carlo_sigma(&problem, &config, 400)?;
    println!("Sigma_hat = {:?}", result.sigma_hat);
    println!("Sigma_mc  = {:?}", mc);
    println!(
        "relative gap {:.3}",
        operator_norm(&result.sigma_hat.sub(&mc)?)? / operator_norm(&mc)?
    );
    println!("||x_bar|| = {:.3e}", result.x_bar.norm());
    Ok(())
}
