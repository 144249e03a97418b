//! Nonsmooth stochastic approximation with online batch-means covariance
//! estimation.
//!
//! The crate runs stochastic proximal, projected and subgradient methods on a
//! small zoo of nonsmooth problems, tracks the Polyak average `x_bar_n`, and
//! estimates the covariance of `sqrt(n) (x_bar_n - x*)` in `O(d^2)` memory
//! with the batch-means estimator. The estimate feeds confidence intervals,
//! Wald tests and coverage and rate studies against analytic ground truth.
//!
//! ```
//! use sacovest::{engine, problems::{Problem, ProblemId}};
//!
//! let problem = Problem::from_id(ProblemId::L1Quad).unwrap();
//! let config = engine::RunConfig::for_problem(&problem, 5_000, 7).unwrap();
//! let result = engine::run(&problem, &config).unwrap();
//! assert_eq!(result.sigma_hat.rows(), problem.dim());
//! ```

pub mod covest;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod numerics;
pub mod problems;
pub mod schedules;

pub use error::{Error, Result};
