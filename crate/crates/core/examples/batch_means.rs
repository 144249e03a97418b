//! The streaming batch-means estimator on an AR(1) sequence, checked against
//! the direct formula and the known long-run variance `1 / (1 - rho)^2`.

use sacovest::covest::{bm_direct, BatchMeansState};
use sacovest::engine::MeanState;
use sacovest::numerics::{operator_norm, DenseVector, RngStream};
use sacovest::schedules::BatchSchedule;

fn main() -> sacovest::Result<()> {
    let rho = 0.5;
    let n = 200_000;
    let schedule = BatchSchedule::new(1.0, 1.6)?;
    let mut rng = RngStream::new(3, 0);

    let mut state = BatchMeansState::new(1, schedule);
    let mut mean = MeanState::new(1);
    let mut xs = Vec::with_capacity(n);
    let mut x = 0.0;
    for _ in 0..n {
        x = rho * x + rng.standard_normal();
        state.update(&[x])?;
        mean.update(&[x])?;
        xs.push(DenseVector::new(vec![x])?);
    }
    let streamed = state.finalize(&mean)?;
    let direct = bm_direct(&xs, &schedule)?;

    println!("blocks used        : {}", schedule.boundaries_upto(n as u64).len());
    println!("streaming estimate : {:.4}", streamed[(0, 0)]);
    println!("direct estimate    : {:.4}", direct[(0, 0)]);
    println!("gap (opnorm)       : {:.3e}", operator_norm(&streamed.sub(&direct)?)?);
    println!("long-run variance  : {:.4}", 1.0 / (1.0 - rho) / (1.0 - rho));
    Ok(())
}
