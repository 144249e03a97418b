//! The problem zoo.
//!
//! Every problem is a variational inclusion `0 ∈ F(x)` with a solution `x*`
//! lying on an active manifold `M`. Each exposes the stochastic step map
//! `G_eta(x, nu)`, a noise model, the manifold projection used for
//! diagnostics, and analytic ground truth for the limiting covariance of the
//! averaged iterates.

mod boxqp;
mod game;
mod l1quad;
mod parabola;
mod prox;
mod qre;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use boxqp::BoxQpParams;
pub use game::GameParams;
pub use l1quad::L1QuadParams;
pub use parabola::ParabolaParams;
pub use prox::{project_box, project_simplex, soft_threshold};
pub use qre::qre_oracle;

use crate::error::{Error, Result};
use crate::inference::limiting_sigma;
use crate::numerics::{dist_sq, gaussian_into, DenseMatrix, DenseVector, RngStream};

/// Tolerance for domain membership checks.
pub const DOMAIN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProblemId {
    #[serde(rename = "l1quad")]
    L1Quad,
    #[serde(rename = "boxqp")]
    BoxQp,
    #[serde(rename = "game")]
    EntropyGame,
    #[serde(rename = "parabola")]
    NonconvexParabola,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [
        ProblemId::L1Quad,
        ProblemId::BoxQp,
        ProblemId::EntropyGame,
        ProblemId::NonconvexParabola,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemId::L1Quad => "l1quad",
            ProblemId::BoxQp => "boxqp",
            ProblemId::EntropyGame => "game",
            ProblemId::NonconvexParabola => "parabola",
        }
    }

    pub fn valid_ids() -> String {
        Self::ALL.map(|id| id.as_str()).join(", ")
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown problem id {s:?}; valid ids are: {}",
                    Self::valid_ids()
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `x+ = P_X(x - eta (A(x) + s_g(x) + nu))`
    ProjectedForward,
    /// `x+ = prox_{eta f}(x - eta (A(x) + nu))`
    ForwardBackward,
    /// `x+ = x - eta (A(x) + s_g(x) + nu)` with a fixed subgradient selection.
    Subgradient,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ProjectedForward => "projected_forward",
            Method::ForwardBackward => "forward_backward",
            Method::Subgradient => "subgradient",
        })
    }
}

/// Whether the reference limiting covariance is trusted analytically or has
/// to be checked against a Monte Carlo oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaTruthMode {
    Analytic,
    MonteCarloOnly,
}

/// Ground truth at the solution: `x*`, an orthonormal tangent basis `U` of
/// the active manifold, the restricted Jacobian `H = U^T ∇_M F_M(x*) U`, the
/// tangent noise covariance `S = U^T Cov(nu) U` and
/// `Sigma = U H^{-1} S H^{-T} U^T`.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub x_star: DenseVector,
    pub tangent_basis: DenseMatrix,
    pub jacobian_h: DenseMatrix,
    pub noise_cov_s: DenseMatrix,
    pub sigma_limit: DenseMatrix,
    /// Coordinates (or constraints) active at `x*`.
    pub active_index_set: Vec<usize>,
    pub sigma_mode: SigmaTruthMode,
}

impl GroundTruth {
    pub(crate) fn assemble(
        x_star: DenseVector,
        tangent_basis: DenseMatrix,
        jacobian_h: DenseMatrix,
        ambient_noise_cov: &DenseMatrix,
        active_index_set: Vec<usize>,
        sigma_mode: SigmaTruthMode,
    ) -> Result<Self> {
        let noise_cov_s = tangent_basis
            .transpose()
            .matmul(ambient_noise_cov)?
            .matmul(&tangent_basis)?
            .symmetrized();
        let sigma_limit = limiting_sigma(&tangent_basis, &jacobian_h, &noise_cov_s)?;
        Ok(Self {
            x_star,
            tangent_basis,
            jacobian_h,
            noise_cov_s,
            sigma_limit,
            active_index_set,
            sigma_mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_star.dim()
    }

    pub fn tangent_dim(&self) -> usize {
        self.tangent_basis.cols()
    }

    /// `U e_j`, the `j`-th tangent direction.
    pub fn tangent_direction(&self, j: usize) -> DenseVector {
        self.tangent_basis.column(j)
    }
}

/// Gradient noise `nu = L z + c2 ||x - x*|| u` with `z` standard normal and
/// `u` an independent isotropic Gaussian direction scaled to unit second
/// moment.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub factor_l: DenseMatrix,
    pub state_scale: f64,
}

impl NoiseModel {
    pub fn new(factor_l: DenseMatrix, state_scale: f64) -> Result<Self> {
        if !factor_l.is_square() {
            return Err(Error::DimensionMismatch {
                expected: factor_l.rows(),
                got: factor_l.cols(),
            });
        }
        if !(state_scale >= 0.0 && state_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "state_scale must be nonnegative, got {state_scale}"
            )));
        }
        Ok(Self {
            factor_l,
            state_scale,
        })
    }

    /// Isotropic noise `sigma * I_d` with no state-dependent part.
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        Self::new(DenseMatrix::identity(dim).scale(sigma), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.factor_l.rows()
    }

    /// Covariance `L L^T` of the state-independent component.
    pub fn covariance(&self) -> DenseMatrix {
        self.factor_l
            .matmul(&self.factor_l.transpose())
            .expect("square factor")
    }
}

/// Parameter overrides accepted from configuration files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_diag: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl ProblemOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// Per-problem parameter record.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum ProblemParams {
    #[serde(rename = "l1quad")]
    L1Quad(L1QuadParams),
    #[serde(rename = "boxqp")]
    BoxQp(BoxQpParams),
    #[serde(rename = "game")]
    EntropyGame(GameParams),
    #[serde(rename = "parabola")]
    NonconvexParabola(ParabolaParams),
}

/// Problem-specific dynamics behind [`Problem`].
pub(crate) trait Dynamics {
    fn dim(&self) -> usize;
    fn sigma(&self) -> f64;
    fn admissible(&self, method: Method) -> bool;
    fn check_domain(&self, x: &[f64]) -> Result<()>;
    /// Writes the next iterate (the inner prox/projection output, not
    /// `x - eta G`) into `out`. `x` and `out` have length `dim()`.
    fn next_into(&self, method: Method, eta: f64, x: &[f64], nu: &[f64], out: &mut [f64]);
    /// Deterministic single-valued selection of `F` (`A(x) + s_g(x)`, plus
    /// the regularizer's subgradient for composite problems).
    fn mean_field(&self, x: &[f64]) -> Vec<f64>;
    fn derive_truth(&self, noise_cov: &DenseMatrix) -> Result<GroundTruth>;
    fn project_manifold(&self, truth: &GroundTruth, x: &[f64]) -> Vec<f64>;
    fn on_manifold_exact(&self, _truth: &GroundTruth, _x: &[f64]) -> Option<bool> {
        None
    }
    fn default_x0(&self) -> Vec<f64>;
}

impl ProblemParams {
    pub fn defaults(id: ProblemId) -> Self {
        match id {
            ProblemId::L1Quad => Self::L1Quad(L1QuadParams::default()),
            ProblemId::BoxQp => Self::BoxQp(BoxQpParams::default()),
            ProblemId::EntropyGame => Self::EntropyGame(GameParams::default()),
            ProblemId::NonconvexParabola => Self::NonconvexParabola(ParabolaParams::default()),
        }
    }

    pub fn id(&self) -> ProblemId {
        match self {
            Self::L1Quad(_) => ProblemId::L1Quad,
            Self::BoxQp(_) => ProblemId::BoxQp,
            Self::EntropyGame(_) => ProblemId::EntropyGame,
            Self::NonconvexParabola(_) => ProblemId::NonconvexParabola,
        }
    }

    pub fn default_method(&self) -> Method {
        match self {
            Self::L1Quad(_) => Method::ForwardBackward,
            Self::BoxQp(_) | Self::EntropyGame(_) => Method::ProjectedForward,
            Self::NonconvexParabola(_) => Method::Subgradient,
        }
    }

    fn dynamics(&self) -> &dyn Dynamics {
        match self {
            Self::L1Quad(p) => p,
            Self::BoxQp(p) => p,
            Self::EntropyGame(p) => p,
            Self::NonconvexParabola(p) => p,
        }
    }

    fn apply(&mut self, o: &ProblemOverrides) -> Result<()> {
        let reject = |key: &str, id: ProblemId| {
            Err(Error::Validation(format!("override {key:?} does not apply to problem {id}")))
        };
        let id = self.id();
        match self {
            Self::L1Quad(p) => {
                if let Some(v) = o.sigma {
                    p.sigma = v;
                }
                if let Some(v) = o.lambda {
                    p.lambda = v;
                }
                if let Some(v) = &o.q_diag {
                    p.q_diag = v.clone();
                }
                if let Some(v) = &o.b {
                    p.b = v.clone();
                }
                for (key, set) in [("q", o.q.is_some()), ("c", o.c.is_some()), ("lo", o.lo.is_some()), ("hi", o.hi.is_some()), ("payoff", o.payoff.is_some())] {
                    if set {
                        return reject(key, id);
                    }
                }
            }
            Self::BoxQp(p) => {
                if let Some(v) = o.sigma {
                    p.sigma = v;
                }
                if let Some(v) = &o.q {
                    p.q = v.clone();
                }
                if let Some(v) = &o.c {
                    p.c = v.clone();
                }
                if let Some(v) = &o.lo {
                    p.lo = v.clone();
                }
                if let Some(v) = &o.hi {
                    p.hi = v.clone();
                }
                for (key, set) in [("lambda", o.lambda.is_some()), ("q_diag", o.q_diag.is_some()), ("b", o.b.is_some()), ("payoff", o.payoff.is_some())] {
                    if set {
                        return reject(key, id);
                    }
                }
            }
            Self::EntropyGame(p) => {
                if let Some(v) = o.sigma {
                    p.sigma = v;
                }
                if let Some(v) = o.lambda {
                    p.lambda = v;
                }
                if let Some(v) = &o.payoff {
                    p.payoff = v.clone();
                }
                for (key, set) in [("q", o.q.is_some()), ("q_diag", o.q_diag.is_some()), ("b", o.b.is_some()), ("c", o.c.is_some()), ("lo", o.lo.is_some()), ("hi", o.hi.is_some())] {
                    if set {
                        return reject(key, id);
                    }
                }
            }
            Self::NonconvexParabola(p) => {
                if let Some(v) = o.sigma {
                    p.sigma = v;
                }
                for (key, set) in [("lambda", o.lambda.is_some()), ("q", o.q.is_some()), ("q_diag", o.q_diag.is_some()), ("b", o.b.is_some()), ("c", o.c.is_some()), ("lo", o.lo.is_some()), ("hi", o.hi.is_some()), ("payoff", o.payoff.is_some())] {
                    if set {
                        return reject(key, id);
                    }
                }
            }
        }
        Ok(())
    }
}

/// A zoo problem together with its solver method, default noise model, start
/// point and precomputed ground truth. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Problem {
    params: ProblemParams,
    method: Method,
    noise: NoiseModel,
    x0: DenseVector,
    truth: GroundTruth,
}

impl Problem {
    pub fn new(params: ProblemParams, method: Method) -> Result<Self> {
        Self::build(params, method, 0.0, None)
    }

    /// Default parameters and method for `id`.
    pub fn from_id(id: ProblemId) -> Result<Self> {
        Self::with_overrides(id, &ProblemOverrides::default())
    }

    pub fn with_overrides(id: ProblemId, overrides: &ProblemOverrides) -> Result<Self> {
        let mut params = ProblemParams::defaults(id);
        params.apply(overrides)?;
        let method = overrides.method.unwrap_or_else(|| params.default_method());
        Self::build(
            params,
            method,
            overrides.state_scale.unwrap_or(0.0),
            overrides.x0.clone(),
        )
    }

    fn build(params: ProblemParams, method: Method, state_scale: f64, x0: Option<Vec<f64>>) -> Result<Self> {
        let dynamics = params.dynamics();
        if !dynamics.admissible(method) {
            return Err(Error::Validation(format!(
                "method {method} is not admissible for problem {}",
                params.id()
            )));
        }
        let sigma = dynamics.sigma();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be nonnegative, got {sigma}")));
        }
        let noise = NoiseModel::new(DenseMatrix::identity(dynamics.dim()).scale(sigma), state_scale)?;
        let truth = dynamics.derive_truth(&noise.covariance())?;
        let x0 = DenseVector::new(x0.unwrap_or_else(|| dynamics.default_x0()))?;
        if x0.dim() != dynamics.dim() {
            return Err(Error::DimensionMismatch {
                expected: dynamics.dim(),
                got: x0.dim(),
            });
        }
        dynamics.check_domain(x0.as_slice())?;
        Ok(Self {
            params,
            method,
            noise,
            x0,
            truth,
        })
    }

    pub fn id(&self) -> ProblemId {
        self.params.id()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dynamics().dim()
    }

    pub fn noise_model(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn x0(&self) -> &DenseVector {
        &self.x0
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        self.params.dynamics().check_domain(x)
    }

    /// The next iterate `x - eta G_eta(x, nu)`, computed directly from the
    /// prox/projection output so that exact zeros and exact bounds survive.
    pub fn next_iterate(&self, eta: f64, x: &DenseVector, nu: &DenseVector) -> Result<DenseVector> {
        self.check_domain(x.as_slice())?;
        if nu.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: nu.dim(),
            });
        }
        let mut out = vec![0.0; self.dim()];
        self.next_into(eta, x.as_slice(), nu.as_slice(), &mut out);
        Ok(DenseVector::from_vec_unchecked(out))
    }

    pub(crate) fn next_into(&self, eta: f64, x: &[f64], nu: &[f64], out: &mut [f64]) {
        self.params
            .dynamics()
            .next_into(self.method, eta, x, nu, out)
    }

    /// `G_eta(x, nu) = (x - next) / eta`.
    pub fn step_map_g(&self, eta: f64, x: &DenseVector, nu: &DenseVector) -> Result<DenseVector> {
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        let next = self.next_iterate(eta, x, nu)?;
        Ok(DenseVector::from_vec_unchecked(
            x.iter().zip(next.iter()).map(|(a, b)| (a - b) / eta).collect(),
        ))
    }

    /// Deterministic field `A(x) + s_g(x)` (with the regularizer's fixed
    /// subgradient selection where applicable).
    pub fn mean_field(&self, x: &DenseVector) -> DenseVector {
        DenseVector::from_vec_unchecked(self.params.dynamics().mean_field(x.as_slice()))
    }

    /// Nearest point of the active manifold; meaningful near `x*`.
    pub fn project_manifold(&self, x: &DenseVector) -> DenseVector {
        DenseVector::from_vec_unchecked(self.project_manifold_slice(x.as_slice()))
    }

    pub(crate) fn project_manifold_slice(&self, x: &[f64]) -> Vec<f64> {
        self.params.dynamics().project_manifold(&self.truth, x)
    }

    /// Squared distance to the active manifold.
    pub fn shadow_sq_dist(&self, x: &[f64]) -> f64 {
        dist_sq(x, &self.project_manifold_slice(x))
    }

    /// For coordinate manifolds, whether `x` lies on `M` exactly (active
    /// coordinates bit-equal to their fixed values). `None` for curved or
    /// affine-hull manifolds where exact membership is not meaningful.
    pub fn on_manifold_exact(&self, x: &[f64]) -> Option<bool> {
        self.params.dynamics().on_manifold_exact(&self.truth, x)
    }

    /// Default base stepsize for this problem.
    pub fn default_eta(&self) -> f64 {
        match self.params {
            ProblemParams::EntropyGame(_) => 0.25,
            _ => 0.5,
        }
    }
}

/// Free-function form of [`Problem::step_map_g`].
pub fn step_map_g(problem: &Problem, eta: f64, x: &DenseVector, nu: &DenseVector) -> Result<DenseVector> {
    problem.step_map_g(eta, x, nu)
}

/// Draws `nu = nu1 + nu2(x)`: `nu1 = L z` and
/// `nu2 = c2 ||x - x*|| u / sqrt(d)` with `z, u` independent standard normal.
/// Both parts are conditionally centered and
/// `E ||nu2||^2 = c2^2 ||x - x*||^2`.
pub fn sample_noise(problem: &Problem, model: &NoiseModel, rng: &mut RngStream, x: &DenseVector) -> DenseVector {
    let mut out = vec![0.0; model.dim()];
    sample_noise_into(problem.ground_truth().x_star.as_slice(), model, rng, x.as_slice(), &mut out);
    DenseVector::from_vec_unchecked(out)
}

pub(crate) fn sample_noise_into(x_star: &[f64], model: &NoiseModel, rng: &mut RngStream, x: &[f64], out: &mut [f64]) {
    gaussian_into(rng, &model.factor_l, out);
    if model.state_scale > 0.0 {
        let d = out.len();
        let scale = model.state_scale * dist_sq(x, x_star).sqrt() / (d as f64).sqrt();
        for o in out.iter_mut() {
            *o += scale * rng.standard_normal();
        }
    }
}

/// Free-function form of [`Problem::ground_truth`].
pub fn ground_truth(problem: &Problem) -> &GroundTruth {
    problem.ground_truth()
}

/// Free-function form of [`Problem::project_manifold`].
pub fn project_manifold(problem: &Problem, x: &DenseVector) -> DenseVector {
    problem.project_manifold(x)
}

pub(crate) fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn matrix_from_nested(rows: &[Vec<f64>], what: &str) -> Result<DenseMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidParameter(format!("{what} has ragged rows")));
    }
    DenseMatrix::new(r, c, rows.iter().flatten().copied().collect())
}
