//! Online batch-means covariance estimator.
//!
//! For the block `B_i = {x_{t_i}, ..., x_i}` with partial sum `s_i` and length
//! `l_i`, the estimator is
//!
//! ```text
//! Sigma_hat = sum_i (s_i - l_i xbar)(s_i - l_i xbar)^T / sum_i l_i
//! ```
//!
//! Expanding the square gives `A - b xbar^T - xbar b^T + c xbar xbar^T` with
//! `A = sum s_i s_i^T`, `b = sum l_i s_i`, `c = sum l_i^2`, all of which can be
//! accumulated as the iterates arrive. The state is `O(d^2)` and holds no
//! history.

use crate::engine::MeanState;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector};
use crate::schedules::BatchSchedule;

#[derive(Clone, Debug)]
pub struct BatchMeansState {
    dim: usize,
    /// Upper triangle (row-major, full storage) of `sum s_i s_i^T`.
    a_mat: Vec<f64>,
    b_vec: Vec<f64>,
    // Block lengths are integers, so these two sums are kept exactly.
    c_scalar: u128,
    l_total: u128,
    s_cur: Vec<f64>,
    l_cur: u64,
    n: u64,
    schedule: BatchSchedule,
    next_boundary: u64,
    cursor: crate::schedules::BoundaryCursor,
}

impl BatchMeansState {
    pub fn new(dim: usize, schedule: BatchSchedule) -> Self {
        let cursor = schedule.cursor();
        Self {
            dim,
            a_mat: vec![0.0; dim * dim],
            b_vec: vec![0.0; dim],
            c_scalar: 0,
            l_total: 0,
            s_cur: vec![0.0; dim],
            l_cur: 0,
            n: 0,
            schedule,
            next_boundary: cursor.current(),
            cursor,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn schedule(&self) -> &BatchSchedule {
        &self.schedule
    }

    /// `sum_i s_i s_i^T` as a full symmetric matrix.
    pub fn a_mat(&self) -> DenseMatrix {
        let d = self.dim;
        let mut m = DenseMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                m[(i, j)] = self.a_mat[i * d + j];
                m[(j, i)] = self.a_mat[i * d + j];
            }
        }
        m
    }

    pub fn b_vec(&self) -> &[f64] {
        &self.b_vec
    }

    pub fn c_scalar(&self) -> u128 {
        self.c_scalar
    }

    pub fn l_total(&self) -> u128 {
        self.l_total
    }

    pub fn s_cur(&self) -> &[f64] {
        &self.s_cur
    }

    pub fn l_cur(&self) -> u64 {
        self.l_cur
    }

    /// Feeds the next iterate.
    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        self.n += 1;
        if self.n == self.next_boundary {
            self.s_cur.copy_from_slice(x);
            self.l_cur = 1;
            self.next_boundary = self.cursor.advance();
        } else {
            for (s, v) in self.s_cur.iter_mut().zip(x) {
                *s += v;
            }
            self.l_cur += 1;
        }
        let d = self.dim;
        let l = self.l_cur as f64;
        for i in 0..d {
            let si = self.s_cur[i];
            let row = &mut self.a_mat[i * d..(i + 1) * d];
            for j in i..d {
                row[j] += si * self.s_cur[j];
            }
            self.b_vec[i] += l * si;
        }
        self.c_scalar += (self.l_cur as u128) * (self.l_cur as u128);
        self.l_total += self.l_cur as u128;
        Ok(())
    }

    /// Evaluates the estimator against the running mean of the same iterates.
    /// Read-only, so it can be called mid-run for snapshots.
    pub fn finalize(&self, mean: &MeanState) -> Result<DenseMatrix> {
        if self.n == 0 || mean.count() == 0 {
            return Err(Error::EmptyState);
        }
        if mean.count() != self.n {
            return Err(Error::InvalidParameter(format!(
                "mean state saw {} iterates but estimator saw {}",
                mean.count(),
                self.n
            )));
        }
        self.finalize_with_mean(mean.mean().as_slice())
    }

    pub(crate) fn finalize_with_mean(&self, xbar: &[f64]) -> Result<DenseMatrix> {
        if self.n == 0 {
            return Err(Error::EmptyState);
        }
        if xbar.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: xbar.len(),
            });
        }
        let d = self.dim;
        let c = self.c_scalar as f64;
        let l_total = self.l_total as f64;
        let mut out = DenseMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = self.a_mat[i * d + j] - self.b_vec[i] * xbar[j] - xbar[i] * self.b_vec[j]
                    + c * xbar[i] * xbar[j];
                out[(i, j)] = v / l_total;
                out[(j, i)] = v / l_total;
            }
        }
        Ok(out)
    }
}

/// Streaming update; see [`BatchMeansState::update`].
pub fn bm_update(state: &mut BatchMeansState, x: &DenseVector) -> Result<()> {
    state.update(x.as_slice())
}

/// Finalization; see [`BatchMeansState::finalize`].
pub fn bm_finalize(state: &BatchMeansState, mean: &MeanState) -> Result<DenseMatrix> {
    state.finalize(mean)
}

/// Direct evaluation of the batch-means estimator by materializing every
/// block sum. `O(n d^2)` time and `O(n d)` memory; used as the reference for
/// the streaming state.
pub fn bm_direct(xs: &[DenseVector], schedule: &BatchSchedule) -> Result<DenseMatrix> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let d = xs[0].dim();
    if let Some(bad) = xs.iter().find(|x| x.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.dim(),
        });
    }
    let mut xbar = vec![0.0; d];
    for x in xs {
        for (m, v) in xbar.iter_mut().zip(x.iter()) {
            *m += v;
        }
    }
    for m in xbar.iter_mut() {
        *m /= n as f64;
    }

    let boundaries = schedule.boundaries_upto(n as u64);
    let mut num = DenseMatrix::zeros(d, d);
    let mut l_sum = 0.0;
    let mut block_sum = vec![0.0; d];
    let mut dev = vec![0.0; d];
    for i in 1..=n {
        let block = boundaries.block_index(i as u64);
        if block.is_new_block {
            block_sum.iter_mut().for_each(|s| *s = 0.0);
        }
        for (s, v) in block_sum.iter_mut().zip(xs[i - 1].iter()) {
            *s += v;
        }
        let l = block.len as f64;
        for j in 0..d {
            dev[j] = block_sum[j] - l * xbar[j];
        }
        for r in 0..d {
            for c in 0..d {
                num[(r, c)] += dev[r] * dev[c];
            }
        }
        l_sum += l;
    }
    Ok(num.scale(1.0 / l_sum).symmetrized())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(v: &[f64]) -> Vec<DenseVector> {
        v.iter().map(|&x| DenseVector::new(vec![x]).unwrap()).collect()
    }

    fn stream(xs: &[DenseVector], schedule: BatchSchedule) -> (BatchMeansState, MeanState) {
        let mut st = BatchMeansState::new(xs[0].dim(), schedule);
        let mut mean = MeanState::new(xs[0].dim());
        for x in xs {
            bm_update(&mut st, x).unwrap();
            mean.update(x.as_slice()).unwrap();
        }
        (st, mean)
    }

    #[test]
    fn first_update_is_a_single_term() {
        let sched = BatchSchedule::new(1.0, 2.0).unwrap();
        let x1 = DenseVector::new(vec![1.0, -2.0]).unwrap();
        let (st, _) = stream(&[x1.clone()], sched);
        assert_eq!(st.s_cur(), x1.as_slice());
        assert_eq!(st.l_cur(), 1);
        assert_eq!(st.l_total(), 1);
        assert_eq!(st.a_mat(), DenseMatrix::outer(x1.as_slice(), x1.as_slice()));
    }

    #[test]
    fn l_total_follows_block_lengths() {
        // boundaries 1, 4, 9: l = (1, 2, 3, 1, 2)
        let sched = BatchSchedule::new(1.0, 2.0).unwrap();
        let (st, _) = stream(&scalars(&[0.3; 5]), sched);
        assert_eq!(st.l_total(), 9);
        assert_eq!(st.c_scalar(), 1 + 4 + 9 + 1 + 4);
    }

    #[test]
    fn zero_vectors_leave_zero_accumulators() {
        let sched = BatchSchedule::new(1.0, 2.0).unwrap();
        let xs = vec![DenseVector::zeros(3); 7];
        let (st, mean) = stream(&xs, sched);
        assert_eq!(st.a_mat(), DenseMatrix::zeros(3, 3));
        assert!(st.b_vec().iter().all(|&b| b == 0.0));
        assert_eq!(st.finalize(&mean).unwrap(), DenseMatrix::zeros(3, 3));
    }

    #[test]
    fn single_iterate_gives_zero_matrix() {
        let sched = BatchSchedule::new(1.0, 2.0).unwrap();
        let xs = vec![DenseVector::new(vec![2.5, -1.0]).unwrap()];
        let (st, mean) = stream(&xs, sched);
        assert_eq!(st.finalize(&mean).unwrap(), DenseMatrix::zeros(2, 2));
        assert_eq!(bm_direct(&xs, &sched).unwrap(), DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn two_scalars_each_in_own_block() {
        // boundaries [1, 2, ...]: (1-2)^2 + (3-2)^2 over L = 2
        let sched = BatchSchedule::new(1.0, 1.5).unwrap();
        assert_eq!(&sched.boundaries_upto(2).as_slice()[..2], &[1, 2]);
        let xs = scalars(&[1.0, 3.0]);
        let (st, mean) = stream(&xs, sched);
        assert!((st.finalize(&mean).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((bm_direct(&xs, &sched).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_scalars_in_one_block() {
        // boundaries [1, 3]: i=1 gives 1, i=2 gives (4 - 4)^2 = 0, L = 3
        let sched13 = BatchSchedule::new(0.75, 2.0).unwrap();
        assert_eq!(sched13.boundaries_upto(3).as_slice(), &[1, 3]);
        let xs = scalars(&[1.0, 3.0]);
        let (st, mean) = stream(&xs, sched13);
        assert!((st.finalize(&mean).unwrap()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((bm_direct(&xs, &sched13).unwrap()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_sequence_has_zero_covariance() {
        let sched = BatchSchedule::new(1.0, 2.0).unwrap();
        let xs = vec![DenseVector::new(vec![0.25, -4.0]).unwrap(); 50];
        let direct = bm_direct(&xs, &sched).unwrap();
        assert!(direct.max_abs() < 1e-12);
        let (st, mean) = stream(&xs, sched);
        assert!(st.finalize(&mean).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn empty_inputs_are_errors() {
        let sched = BatchSchedule::new(1.0, 2.0).unwrap();
        assert!(matches!(bm_direct(&[], &sched), Err(Error::EmptySequence)));
        let st = BatchMeansState::new(2, sched);
        assert!(matches!(st.finalize(&MeanState::new(2)), Err(Error::EmptyState)));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::numerics::{operator_norm, spd_factor};
    use proptest::prelude::*;

    fn sequence() -> impl Strategy<Value = Vec<DenseVector>> {
        (1..=6usize, 1..400usize).prop_flat_map(|(d, n)| {
            proptest::collection::vec(proptest::collection::vec(-3.0..3.0f64, d), n)
                .prop_map(|rows| rows.into_iter().map(|r| DenseVector::new(r).unwrap()).collect())
        })
    }

    fn streamed(xs: &[DenseVector], schedule: BatchSchedule) -> DenseMatrix {
        let mut state = BatchMeansState::new(xs[0].dim(), schedule);
        let mut mean = MeanState::new(xs[0].dim());
        for x in xs {
            state.update(x.as_slice()).unwrap();
            mean.update(x.as_slice()).unwrap();
        }
        state.finalize(&mean).unwrap()
    }

    proptest! {
        #[test]
        fn streaming_matches_direct(xs in sequence(), c in 0.1..3.0f64, beta in 1.2..5.0f64) {
            let schedule = BatchSchedule::new(c, beta).unwrap();
            let direct = bm_direct(&xs, &schedule).unwrap();
            let gap = operator_norm(&streamed(&xs, schedule).sub(&direct).unwrap()).unwrap();
            prop_assert!(gap <= 1e-10 * (1.0 + operator_norm(&direct).unwrap()));
        }

        #[test]
        fn shift_leaves_estimate_unchanged(xs in sequence(), shift in -5.0..5.0f64) {
            let schedule = BatchSchedule::new(1.0, 2.0).unwrap();
            let moved: Vec<DenseVector> = xs
                .iter()
                .map(|x| DenseVector::new(x.iter().enumerate().map(|(i, v)| v + shift * (i + 1) as f64).collect()).unwrap())
                .collect();
            let a = streamed(&xs, schedule);
            let b = streamed(&moved, schedule);
            prop_assert!(a.max_abs_diff(&b) <= 1e-10 * (1.0 + a.max_abs()));
        }

        #[test]
        fn estimate_is_psd(xs in sequence()) {
            let s = streamed(&xs, BatchSchedule::new(1.0, 2.0).unwrap());
            let d = s.rows();
            let jitter = DenseMatrix::identity(d).scale(1e-12 * (1.0 + s.max_abs()));
            prop_assert!(spd_factor(&s.add(&jitter).unwrap()).is_ok());
        }
    }
}
