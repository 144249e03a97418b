//! Stepsize and batch-boundary schedules.

use serde::Serialize;

use crate::error::{Error, Result};

/// Polynomially decaying stepsize `eta * k^(-alpha)` with `alpha` in `(1/2, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepSchedule {
    eta: f64,
    alpha: f64,
}

impl StepSchedule {
    pub fn new(eta: f64, alpha: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0.5, 1), got {alpha}"
            )));
        }
        Ok(Self { eta, alpha })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Stepsize for iteration `k >= 1`.
    pub fn step_at(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        self.eta * (k as f64).powf(-self.alpha)
    }

    /// The batch exponent `2 / (1 - alpha)` that balances the two error
    /// terms of the estimator's rate.
    pub fn recommended_beta(&self) -> f64 {
        2.0 / (1.0 - self.alpha)
    }
}

/// Batch boundaries `a_1 = 1`, `a_m = max(floor(C m^beta), a_{m-1} + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BatchSchedule {
    c: f64,
    beta: f64,
}

/// Position of an iterate inside its block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockIndex {
    /// First index of the block containing `k`.
    pub start: u64,
    /// `k - start + 1`.
    pub len: u64,
    pub is_new_block: bool,
}

impl BatchSchedule {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("batch constant C must be positive, got {c}")));
        }
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must exceed 1, got {beta}")));
        }
        Ok(Self { c, beta })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Checks `beta > 1 / (1 - alpha)` for the paired stepsize schedule.
    pub fn validate_against(&self, step: &StepSchedule) -> Result<()> {
        let bound = 1.0 / (1.0 - step.alpha());
        if self.beta > bound {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "beta must exceed 1/(1-alpha) = {bound:.6} (alpha = {}), got {}",
                step.alpha(),
                self.beta
            )))
        }
    }

    fn raw(&self, m: u64) -> u64 {
        let v = (self.c * (m as f64).powf(self.beta)).floor();
        if v >= u64::MAX as f64 {
            u64::MAX
        } else {
            v as u64
        }
    }

    pub fn cursor(&self) -> BoundaryCursor {
        BoundaryCursor {
            schedule: *self,
            m: 1,
            current: 1,
        }
    }

    /// All boundaries `a_m <= n`.
    pub fn boundaries_upto(&self, n: u64) -> Boundaries {
        let estimate = ((n as f64 / self.c).powf(1.0 / self.beta)).ceil() as usize + 2;
        let mut list = Vec::with_capacity(estimate.min(1 << 20));
        let mut cursor = self.cursor();
        while cursor.current() <= n {
            list.push(cursor.current());
            cursor.advance();
        }
        Boundaries { list }
    }

    /// Block membership of iterate `k >= 1`.
    pub fn block_index(&self, k: u64) -> BlockIndex {
        self.boundaries_upto(k).block_index(k)
    }
}

/// Streaming generator of the boundary sequence.
#[derive(Clone, Debug)]
pub struct BoundaryCursor {
    schedule: BatchSchedule,
    m: u64,
    current: u64,
}

impl BoundaryCursor {
    /// The boundary `a_m` the cursor points at.
    pub fn current(&self) -> u64 {
        self.current
    }

    pub fn advance(&mut self) -> u64 {
        self.m += 1;
        self.current = self.schedule.raw(self.m).max(self.current.saturating_add(1));
        self.current
    }

    /// Smallest boundary strictly greater than the current one, without
    /// moving the cursor.
    pub fn peek_next(&self) -> u64 {
        self.schedule
            .raw(self.m + 1)
            .max(self.current.saturating_add(1))
    }
}

/// A materialized prefix of the boundary sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Boundaries {
    list: Vec<u64>,
}

impl Boundaries {
    pub fn as_slice(&self) -> &[u64] {
        &self.list
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    /// Block membership of `k`; `k` must not precede the first boundary and
    /// should not exceed the horizon the list was built for.
    pub fn block_index(&self, k: u64) -> BlockIndex {
        debug_assert!(k >= 1);
        let pos = self.list.partition_point(|&a| a <= k);
        let start = self.list[pos.saturating_sub(1)];
        BlockIndex {
            start,
            len: k - start + 1,
            is_new_block: start == k,
        }
    }
}
