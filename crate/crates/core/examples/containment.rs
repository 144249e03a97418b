//! Stopping times of the projected method on the box-constrained QP: after a
//! short warm-up the iterates rarely leave a ball around the solution.

use sacovest::engine::{run_replications, RunConfig, StoppingTime};
use sacovest::problems::{Problem, ProblemId};

fn main() -> sacovest::Result<()> {
    let problem = Problem::from_id(ProblemId::BoxQp)?;
    let mut config = RunConfig::for_problem(&problem, 10_000, 12)?;
    config.k_s = 200;
    config.delta = 0.5;
    let results = run_replications(&problem, &config, 200)?;
    let exits: Vec<u64> = results
        .iter()
        .filter_map(|r| match r.tau {
            StoppingTime::At(k) => Some(k),
            StoppingTime::Never => None,
        })
        .collect();
    println!("x* = {:?}", problem.ground_truth().x_star.as_slice());
    println!("contained: {}/{}", results.len() - exits.len(), results.len());
    println!("exit times: {exits:?}");
    Ok(())
}
