//! Exact zeros from the soft-threshold step and the decay of the distance to
//! the active manifold.

use sacovest::engine::{run, RunConfig};
use sacovest::inference::{log_binned_means, rate_fit};
use sacovest::problems::{Problem, ProblemId};

fn main() -> sacovest::Result<()> {
    let problem = Problem::from_id(ProblemId::L1Quad)?;
    println!("active coordinates: {:?}", problem.ground_truth().active_index_set);

    let n = 100_000;
    let mut config = RunConfig::for_problem(&problem, n, 6)?;
    config.diagnostics_stride = 1;
    let result = run(&problem, &config)?;
    println!(
        "identified fraction on [n/2, n]: {:.4}",
        result.identified_fraction.unwrap_or(f64::NAN)
    );

    let bins = log_binned_means(&result.shadow_sq_dist, 100, n, 12)?;
    for (k, m) in &bins {
        println!("k ~ {k:>9.0}  mean dist^2 {m:.3e}");
    }
    let nonzero: Vec<_> = bins.into_iter().filter(|b| b.1 > 0.0).collect();
    if let Ok(fit) = rate_fit(&nonzero) {
        println!("slope {:.3}", fit.slope);
    }
    Ok(())
}
