//! Projected stochastic play of the entropy-regularized matrix game, compared
//! with the deterministic quantal response equilibrium.

use sacovest::engine::{run, RunConfig};
use sacovest::numerics::DenseMatrix;
use sacovest::problems::{qre_oracle, GameParams, Problem, ProblemId};

fn main() -> sacovest::Result<()> {
    let params = GameParams::default();
    let rows: Vec<&[f64]> = params.payoff.iter().map(|r| r.as_slice()).collect();
    let (z, w) = qre_oracle(&DenseMatrix::from_rows(&rows), params.lambda, 1e-12)?;
    println!("QRE row player    : {:?}", z.as_slice());
    println!("QRE column player : {:?}", w.as_slice());

    let problem = Problem::from_id(ProblemId::EntropyGame)?;
    let result = run(&problem, &RunConfig::for_problem(&problem, 100_000, 8)?)?;
    let (zb, wb) = result.x_bar.as_slice().split_at(3);
    println!("averaged row      : {zb:?}");
    println!("averaged column   : {wb:?}");
    println!("distance          : {:.2e}", result.x_bar.distance(&problem.ground_truth().x_star));
    Ok(())
}
