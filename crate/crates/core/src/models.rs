//! Parametric extreme-value copula families.
//!
//! A model is described by its Pickands dependence function `A` on the
//! unit simplex; the stable tail dependence function is
//! `l(x) = (x_1 + ... + x_d) A(x / sum(x))` and the copula is
//! `C(u) = exp(-l(-ln u_1, ..., -ln u_d))`.
//!
//! Bivariate families are written in a scalar `t`, which is always the
//! weight of the second coordinate: `w = (1 - t, t)`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::simplex::Weights;
use crate::special::{normal_cdf, student_t_cdf};

/// Distance to a vertex below which derivatives are not evaluated.
pub const VERTEX_EPS: f64 = 1e-9;

// Clamp for the scalar argument of bivariate derivatives.
const T_CLAMP: f64 = 1e-12;

/// One subset `b` of an asymmetric logistic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticBlock {
    /// Zero-based coordinates in the subset, strictly increasing.
    pub members: Vec<usize>,
    /// Dependence exponent `theta_b >= 1`.
    pub theta: f64,
    /// Asymmetry weight `theta_{j,b}` of each member.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub enum PickandsModel {
    /// Gumbel: `A(w) = (sum w_j^theta)^(1/theta)`.
    SymmetricLogistic { d: usize, theta: f64 },
    /// `A(w) = sum_b (sum_{j in b} (theta_{j,b} w_j)^theta_b)^(1/theta_b)`.
    AsymmetricLogistic { d: usize, blocks: Vec<LogisticBlock> },
    /// Asymmetric Galambos, bivariate.
    AsymmetricNegativeLogistic { theta: f64, psi1: f64, psi2: f64 },
    /// `A(t) = 1 - (theta + kappa) t + theta t^2 + kappa t^3`, bivariate.
    AsymmetricMixed { theta: f64, kappa: f64 },
    /// Husler-Reiss, bivariate.
    HuslerReiss { theta: f64 },
    /// Extremal-t with correlation `theta` and `nu` degrees of freedom,
    /// bivariate.
    StudentT { theta: f64, nu: f64 },
    Independence { d: usize },
}

fn param_err(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

impl PickandsModel {
    pub fn symmetric_logistic(d: usize, theta: f64) -> Result<Self> {
        let m = Self::SymmetricLogistic { d, theta };
        m.validate()?;
        Ok(m)
    }

    pub fn asymmetric_logistic(d: usize, blocks: Vec<LogisticBlock>) -> Result<Self> {
        let m = Self::AsymmetricLogistic { d, blocks };
        m.validate()?;
        Ok(m)
    }

    /// Bivariate asymmetric logistic
    /// `A(t) = (1 - psi1) t + (1 - psi2)(1 - t) + ((psi1 t)^theta + (psi2 (1 - t))^theta)^(1/theta)`.
    pub fn asymmetric_logistic_bivariate(theta: f64, psi1: f64, psi2: f64) -> Result<Self> {
        for (name, v) in [("psi1", psi1), ("psi2", psi2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(param_err(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Self::asymmetric_logistic(
            2,
            vec![
                LogisticBlock {
                    members: vec![0],
                    theta: 1.0,
                    weights: vec![1.0 - psi2],
                },
                LogisticBlock {
                    members: vec![1],
                    theta: 1.0,
                    weights: vec![1.0 - psi1],
                },
                LogisticBlock {
                    members: vec![0, 1],
                    theta,
                    weights: vec![psi2, psi1],
                },
            ],
        )
    }

    /// Trivariate asymmetric logistic from per-coordinate weight vectors.
    ///
    /// `alpha` spreads coordinate 1 over `{1}, {1,2}, {1,3}, {1,2,3}`,
    /// `psi` spreads coordinate 2 over `{2}, {1,2}, {2,3}, {1,2,3}` and
    /// `phi` spreads coordinate 3 over `{3}, {1,3}, {2,3}, {1,2,3}`.
    /// `theta` holds the exponents of `{1,2}, {1,3}, {2,3}, {1,2,3}`.
    pub fn asymmetric_logistic_trivariate(
        alpha: [f64; 4],
        psi: [f64; 4],
        phi: [f64; 4],
        theta: [f64; 4],
    ) -> Result<Self> {
        let block = |members: Vec<usize>, theta: f64, weights: Vec<f64>| LogisticBlock {
            members,
            theta,
            weights,
        };
        Self::asymmetric_logistic(
            3,
            vec![
                block(vec![0], 1.0, vec![alpha[0]]),
                block(vec![1], 1.0, vec![psi[0]]),
                block(vec![2], 1.0, vec![phi[0]]),
                block(vec![0, 1], theta[0], vec![alpha[1], psi[1]]),
                block(vec![0, 2], theta[1], vec![alpha[2], phi[1]]),
                block(vec![1, 2], theta[2], vec![psi[2], phi[2]]),
                block(vec![0, 1, 2], theta[3], vec![alpha[3], psi[3], phi[3]]),
            ],
        )
    }

    pub fn asymmetric_negative_logistic(theta: f64, psi1: f64, psi2: f64) -> Result<Self> {
        let m = Self::AsymmetricNegativeLogistic { theta, psi1, psi2 };
        m.validate()?;
        Ok(m)
    }

    pub fn asymmetric_mixed(theta: f64, kappa: f64) -> Result<Self> {
        let m = Self::AsymmetricMixed { theta, kappa };
        m.validate()?;
        Ok(m)
    }

    pub fn husler_reiss(theta: f64) -> Result<Self> {
        let m = Self::HuslerReiss { theta };
        m.validate()?;
        Ok(m)
    }

    pub fn student_t(theta: f64, nu: f64) -> Result<Self> {
        let m = Self::StudentT { theta, nu };
        m.validate()?;
        Ok(m)
    }

    pub fn independence(d: usize) -> Result<Self> {
        let m = Self::Independence { d };
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::SymmetricLogistic { d, .. }
            | Self::AsymmetricLogistic { d, .. }
            | Self::Independence { d } => *d,
            _ => 2,
        }
    }

    pub fn is_bivariate_only(&self) -> bool {
        matches!(
            self,
            Self::AsymmetricNegativeLogistic { .. }
                | Self::AsymmetricMixed { .. }
                | Self::HuslerReiss { .. }
                | Self::StudentT { .. }
        )
    }

    /// Family name used in JSON model files.
    pub fn family(&self) -> &'static str {
        match self {
            Self::SymmetricLogistic { .. } => "symmetric-logistic",
            Self::AsymmetricLogistic { .. } => "asymmetric-logistic",
            Self::AsymmetricNegativeLogistic { .. } => "asymmetric-negative-logistic",
            Self::AsymmetricMixed { .. } => "asymmetric-mixed",
            Self::HuslerReiss { .. } => "husler-reiss",
            Self::StudentT { .. } => "student-t",
            Self::Independence { .. } => "independence",
        }
    }

    /// Checks the parameter constraints of the family.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d < 2 {
            return Err(param_err(format!("dimension {d} < 2")));
        }
        match self {
            Self::SymmetricLogistic { theta, .. } => {
                if !(theta.is_finite() && *theta >= 1.0) {
                    return Err(param_err(format!("theta = {theta} must be in [1, inf)")));
                }
            }
            Self::AsymmetricLogistic { d, blocks } => validate_blocks(*d, blocks)?,
            Self::AsymmetricNegativeLogistic { theta, psi1, psi2 } => {
                if !(theta.is_finite() && *theta > 0.0) {
                    return Err(param_err(format!("theta = {theta} must be positive")));
                }
                for (name, v) in [("psi1", psi1), ("psi2", psi2)] {
                    if !(*v > 0.0 && *v <= 1.0) {
                        return Err(param_err(format!("{name} = {v} outside (0, 1]")));
                    }
                }
            }
            Self::AsymmetricMixed { theta, kappa } => {
                let (t, k) = (*theta, *kappa);
                let ok = t.is_finite()
                    && k.is_finite()
                    && t >= 0.0
                    && t + 3.0 * k >= 0.0
                    && t + k <= 1.0
                    && t + 2.0 * k <= 1.0;
                if !ok {
                    return Err(param_err(format!(
                        "(theta, kappa) = ({t}, {k}) violates theta >= 0, theta + 3 kappa >= 0, \
                         theta + kappa <= 1, theta + 2 kappa <= 1"
                    )));
                }
            }
            Self::HuslerReiss { theta } => {
                if !(theta.is_finite() && *theta > 0.0) {
                    return Err(param_err(format!("theta = {theta} must be positive")));
                }
            }
            Self::StudentT { theta, nu } => {
                if !(*theta > -1.0 && *theta < 1.0) {
                    return Err(param_err(format!("theta = {theta} outside (-1, 1)")));
                }
                if !(nu.is_finite() && *nu > 0.0) {
                    return Err(param_err(format!("nu = {nu} must be positive")));
                }
            }
            Self::Independence { .. } => {}
        }
        Ok(())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// Pickands dependence function `A(w)`.
    pub fn pickands(&self, w: &Weights) -> Result<f64> {
        self.check_dim(w.dim())?;
        Ok(self.pickands_at(w.as_slice()))
    }

    /// `A` at a simplex point given as a slice; no dimension check.
    pub(crate) fn pickands_at(&self, w: &[f64]) -> f64 {
        match self {
            Self::SymmetricLogistic { .. } | Self::AsymmetricLogistic { .. } => self.stdf_at(w),
            Self::Independence { .. } => 1.0,
            _ => self.pickands_scalar(w[1]),
        }
    }

    /// Bivariate Pickands function in the scalar `t = w_2`.
    pub fn pickands_scalar(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 1.0;
        }
        match *self {
            Self::AsymmetricNegativeLogistic { theta, psi1, psi2 } => {
                let a = (psi1 * (1.0 - t)).powf(-theta);
                let b = (psi2 * t).powf(-theta);
                1.0 - (a + b).powf(-1.0 / theta)
            }
            Self::AsymmetricMixed { theta, kappa } => {
                1.0 - (theta + kappa) * t + theta * t * t + kappa * t * t * t
            }
            Self::HuslerReiss { theta } => {
                let r = ((1.0 - t) / t).ln() / (2.0 * theta);
                (1.0 - t) * normal_cdf(theta + r) + t * normal_cdf(theta - r)
            }
            Self::StudentT { theta, nu } => {
                let k = (1.0 + nu).sqrt() / (1.0 - theta * theta).sqrt();
                let z = |s: f64| k * ((s / (1.0 - s)).powf(1.0 / nu) - theta);
                t * student_t_cdf(z(t), nu + 1.0) + (1.0 - t) * student_t_cdf(z(1.0 - t), nu + 1.0)
            }
            _ => self.pickands_at(&[1.0 - t, t]),
        }
    }

    /// Derivative of the bivariate Pickands function in `t`.
    pub fn pickands_scalar_derivative(&self, t: f64) -> f64 {
        let t = t.clamp(T_CLAMP, 1.0 - T_CLAMP);
        match *self {
            Self::AsymmetricNegativeLogistic { theta, psi1, psi2 } => {
                let a = psi1 * (1.0 - t);
                let b = psi2 * t;
                let s = a.powf(-theta) + b.powf(-theta);
                s.powf(-1.0 / theta - 1.0)
                    * (psi1 * a.powf(-theta - 1.0) - psi2 * b.powf(-theta - 1.0))
            }
            Self::AsymmetricMixed { theta, kappa } => {
                -(theta + kappa) + 2.0 * theta * t + 3.0 * kappa * t * t
            }
            Self::HuslerReiss { theta } => {
                // the density terms cancel
                let r = ((1.0 - t) / t).ln() / (2.0 * theta);
                normal_cdf(theta - r) - normal_cdf(theta + r)
            }
            Self::StudentT { theta, nu } => {
                let k = (1.0 + nu).sqrt() / (1.0 - theta * theta).sqrt();
                let z = |s: f64| k * ((s / (1.0 - s)).powf(1.0 / nu) - theta);
                student_t_cdf(z(t), nu + 1.0) - student_t_cdf(z(1.0 - t), nu + 1.0)
            }
            _ => {
                let x = [1.0 - t, t];
                self.stdf_partial_at(&x, 1) - self.stdf_partial_at(&x, 0)
            }
        }
    }

    /// Stable tail dependence function `l(x)` for `x >= 0`, `x != 0`.
    pub fn stdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        check_tail_argument(x)?;
        Ok(self.stdf_at(x))
    }

    fn stdf_at(&self, x: &[f64]) -> f64 {
        match self {
            Self::SymmetricLogistic { theta, .. } => logistic_norm(x.iter().copied(), *theta),
            Self::AsymmetricLogistic { blocks, .. } => blocks
                .iter()
                .map(|b| {
                    let terms = b.members.iter().zip(&b.weights).map(|(&j, &a)| a * x[j]);
                    logistic_norm(terms, b.theta)
                })
                .sum(),
            Self::Independence { .. } => x.iter().sum(),
            _ => {
                let s = x[0] + x[1];
                s * self.pickands_scalar(x[1] / s)
            }
        }
    }

    /// Partial derivative of `l` in coordinate `j` at `x >= 0`, `x != 0`.
    pub fn stdf_partial(&self, x: &[f64], j: usize) -> Result<f64> {
        self.check_dim(x.len())?;
        check_tail_argument(x)?;
        if j >= x.len() {
            return Err(Error::InvalidArgument(format!("index {j} >= d = {}", x.len())));
        }
        Ok(self.stdf_partial_at(x, j))
    }

    fn stdf_partial_at(&self, x: &[f64], j: usize) -> f64 {
        match self {
            Self::SymmetricLogistic { theta, .. } => logistic_partial(x, j, *theta),
            Self::AsymmetricLogistic { blocks, .. } => {
                let mut total = 0.0;
                for b in blocks {
                    let Some(pos) = b.members.iter().position(|&m| m == j) else {
                        continue;
                    };
                    let a_j = b.weights[pos];
                    if a_j == 0.0 {
                        continue;
                    }
                    let scaled: Vec<f64> =
                        b.members.iter().zip(&b.weights).map(|(&m, &a)| a * x[m]).collect();
                    total += a_j * logistic_partial(&scaled, pos, b.theta);
                }
                total
            }
            Self::Independence { .. } => 1.0,
            _ => {
                let s = x[0] + x[1];
                let t = x[1] / s;
                let a = self.pickands_scalar(t);
                let da = self.pickands_scalar_derivative(t);
                if j == 0 {
                    a - t * da
                } else {
                    a + (1.0 - t) * da
                }
            }
        }
    }

    /// `mu_j(w)`: partial derivative of `l` in coordinate `j` at the
    /// simplex point `w` (degree-0 homogeneous, so the scale of the
    /// argument does not matter).
    pub fn mu(&self, w: &Weights, j: usize) -> Result<f64> {
        self.check_dim(w.dim())?;
        if w.near_vertex(VERTEX_EPS) {
            return Err(Error::VertexPoint(format!("{:?}", w.as_slice())));
        }
        if j >= w.dim() {
            return Err(Error::InvalidArgument(format!("index {j} >= d = {}", w.dim())));
        }
        Ok(self.stdf_partial_at(w.as_slice(), j))
    }

    /// All `mu_j(w)`; debug builds check Euler's relation
    /// `sum_j w_j mu_j(w) = A(w)`.
    pub fn mu_all(&self, w: &Weights) -> Result<Vec<f64>> {
        let mu: Vec<f64> = (0..w.dim())
            .map(|j| self.mu(w, j))
            .collect::<Result<_>>()?;
        debug_assert!({
            let euler: f64 = mu.iter().zip(w.as_slice()).map(|(m, w)| m * w).sum();
            (euler - self.pickands_at(w.as_slice())).abs() <= 1e-5
        });
        Ok(mu)
    }

    /// Copula distribution function `C(u)`; zero when some `u_j = 0`.
    pub fn copula_cdf(&self, u: &[f64]) -> Result<f64> {
        self.check_dim(u.len())?;
        check_unit_cube(u)?;
        Ok(self.copula_cdf_at(u))
    }

    pub(crate) fn copula_cdf_at(&self, u: &[f64]) -> f64 {
        if u.iter().any(|&v| v <= 0.0) {
            return 0.0;
        }
        let x: Vec<f64> = u.iter().map(|v| -v.ln()).collect();
        if x.iter().all(|&v| v == 0.0) {
            return 1.0;
        }
        (-self.stdf_at(&x)).exp()
    }

    /// Partial derivative `dC/du_j = C(u) / u_j * l_j(-ln u)`, for
    /// `0 < u_j < 1`.
    pub fn copula_partial(&self, u: &[f64], j: usize) -> Result<f64> {
        self.check_dim(u.len())?;
        check_unit_cube(u)?;
        if j >= u.len() {
            return Err(Error::InvalidArgument(format!("index {j} >= d = {}", u.len())));
        }
        if !(u[j] > 0.0 && u[j] < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "u_{j} = {} must lie strictly inside (0, 1)",
                u[j]
            )));
        }
        Ok(self.copula_partial_at(u, j))
    }

    pub(crate) fn copula_partial_at(&self, u: &[f64], j: usize) -> f64 {
        if u.iter().any(|&v| v <= 0.0) {
            return 0.0;
        }
        let x: Vec<f64> = u.iter().map(|v| -v.ln()).collect();
        let c = (-self.stdf_at(&x)).exp();
        c / u[j] * self.stdf_partial_at(&x, j)
    }

    /// Model as its JSON description.
    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec::from(self.clone())
    }
}

fn validate_blocks(d: usize, blocks: &[LogisticBlock]) -> Result<()> {
    if blocks.is_empty() {
        return Err(param_err("asymmetric logistic model needs at least one block"));
    }
    let mut totals = vec![0.0; d];
    let mut seen: Vec<&[usize]> = Vec::new();
    for b in blocks {
        if b.members.is_empty() || b.members.len() != b.weights.len() {
            return Err(param_err(format!(
                "block {:?} needs one weight per member",
                b.members
            )));
        }
        if b.members.windows(2).any(|p| p[0] >= p[1]) || b.members.iter().any(|&m| m >= d) {
            return Err(param_err(format!(
                "block members {:?} must be strictly increasing and below d = {d}",
                b.members
            )));
        }
        if seen.contains(&b.members.as_slice()) {
            return Err(param_err(format!("block {:?} listed twice", b.members)));
        }
        seen.push(&b.members);
        if b.members.len() >= 2 && !(b.theta.is_finite() && b.theta >= 1.0) {
            return Err(param_err(format!(
                "theta = {} of block {:?} must be in [1, inf)",
                b.theta, b.members
            )));
        }
        for (&m, &a) in b.members.iter().zip(&b.weights) {
            if !(0.0..=1.0).contains(&a) {
                return Err(param_err(format!(
                    "weight {a} of coordinate {m} in block {:?} outside [0, 1]",
                    b.members
                )));
            }
            totals[m] += a;
        }
    }
    for (j, t) in totals.iter().enumerate() {
        if (t - 1.0).abs() > 1e-9 {
            return Err(param_err(format!(
                "weights of coordinate {j} sum to {t} over its blocks, not 1"
            )));
        }
    }
    Ok(())
}

fn check_tail_argument(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tail argument {x:?} must be finite and nonnegative"
        )));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("tail argument is all zero".into()));
    }
    Ok(())
}

fn check_unit_cube(u: &[f64]) -> Result<()> {
    if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument(format!("{u:?} outside [0, 1]^d")));
    }
    Ok(())
}

// (sum x_i^theta)^(1/theta), scaled by the largest term to avoid overflow.
fn logistic_norm(x: impl Iterator<Item = f64> + Clone, theta: f64) -> f64 {
    if theta == 1.0 {
        return x.sum();
    }
    let m = x.clone().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = x.map(|v| (v / m).powf(theta)).sum();
    m * s.powf(1.0 / theta)
}

// d/dx_j of (sum x_i^theta)^(1/theta) = (x_j / norm)^(theta - 1).
fn logistic_partial(x: &[f64], j: usize, theta: f64) -> f64 {
    if theta == 1.0 {
        return 1.0;
    }
    if x[j] == 0.0 {
        return 0.0;
    }
    let norm = logistic_norm(x.iter().copied(), theta);
    (x[j] / norm).powf(theta - 1.0)
}

/// `c(w) = d^-1 sum_j w_j / (1 + w_j)`.
pub fn c_correction(w: &Weights) -> f64 {
    let d = w.dim() as f64;
    w.as_slice().iter().map(|x| x / (1.0 + x)).sum::<f64>() / d
}

/// `A = (nu + c) / (1 - nu - c)`.
pub fn mado_to_pickands(nu: f64, w: &Weights) -> Result<f64> {
    let s = nu + c_correction(w);
    if !(s < 1.0) {
        return Err(Error::InvalidMadogram(s));
    }
    Ok(s / (1.0 - s))
}

/// `nu = A / (1 + A) - c`.
pub fn pickands_to_mado(a: f64, w: &Weights) -> Result<f64> {
    if !(a >= w.max() - 1e-12 && a <= 1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "A = {a} outside [max w_j, 1] = [{}, 1]",
            w.max()
        )));
    }
    Ok(a / (1.0 + a) - c_correction(w))
}

/// Extremal coefficient `d A(1/d, ..., 1/d)` of a model.
pub fn extremal_coefficient(model: &PickandsModel) -> f64 {
    let d = model.dim();
    d as f64 * model.pickands_at(&vec![1.0 / d as f64; d])
}

/// Extremal coefficient from a value of `A` at the barycenter.
pub fn extremal_coefficient_from_pickands(a: f64, d: usize) -> f64 {
    d as f64 * a
}

/// JSON form of a model: `{"family": ..., "d": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    pub d: usize,
    #[serde(default)]
    pub params: Map<String, Value>,
}

fn number(params: &Map<String, Value>, key: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Parse(format!("missing numeric parameter \"{key}\"")))
}

fn require_bivariate(spec: &ModelSpec) -> Result<()> {
    if spec.d != 2 {
        return Err(param_err(format!("family {} is bivariate, got d = {}", spec.family, spec.d)));
    }
    Ok(())
}

fn check_keys(params: &Map<String, Value>, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Parse(format!("unknown parameter \"{k}\""))),
        None => Ok(()),
    }
}

impl TryFrom<ModelSpec> for PickandsModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        let p = &spec.params;
        match spec.family.as_str() {
            "symmetric-logistic" => {
                check_keys(p, &["theta"])?;
                Self::symmetric_logistic(spec.d, number(p, "theta")?)
            }
            "asymmetric-logistic" => {
                if let Some(blocks) = p.get("blocks") {
                    check_keys(p, &["blocks"])?;
                    let blocks: Vec<LogisticBlock> = serde_json::from_value(blocks.clone())?;
                    Self::asymmetric_logistic(spec.d, blocks)
                } else {
                    check_keys(p, &["theta", "psi1", "psi2"])?;
                    require_bivariate(&spec)?;
                    Self::asymmetric_logistic_bivariate(
                        number(p, "theta")?,
                        number(p, "psi1")?,
                        number(p, "psi2")?,
                    )
                }
            }
            "asymmetric-negative-logistic" => {
                check_keys(p, &["theta", "psi1", "psi2"])?;
                require_bivariate(&spec)?;
                Self::asymmetric_negative_logistic(
                    number(p, "theta")?,
                    number(p, "psi1")?,
                    number(p, "psi2")?,
                )
            }
            "asymmetric-mixed" => {
                check_keys(p, &["theta", "kappa"])?;
                require_bivariate(&spec)?;
                Self::asymmetric_mixed(number(p, "theta")?, number(p, "kappa")?)
            }
            "husler-reiss" => {
                check_keys(p, &["theta"])?;
                require_bivariate(&spec)?;
                Self::husler_reiss(number(p, "theta")?)
            }
            "student-t" => {
                check_keys(p, &["theta", "nu"])?;
                require_bivariate(&spec)?;
                Self::student_t(number(p, "theta")?, number(p, "nu")?)
            }
            "independence" => {
                check_keys(p, &[])?;
                Self::independence(spec.d)
            }
            other => Err(Error::Parse(format!("unknown family \"{other}\""))),
        }
    }
}

impl From<PickandsModel> for ModelSpec {
    fn from(m: PickandsModel) -> Self {
        let family = m.family().to_string();
        let d = m.dim();
        let params = match m {
            PickandsModel::SymmetricLogistic { theta, .. } => json!({ "theta": theta }),
            PickandsModel::AsymmetricLogistic { blocks, .. } => json!({ "blocks": blocks }),
            PickandsModel::AsymmetricNegativeLogistic { theta, psi1, psi2 } => {
                json!({ "theta": theta, "psi1": psi1, "psi2": psi2 })
            }
            PickandsModel::AsymmetricMixed { theta, kappa } => {
                json!({ "theta": theta, "kappa": kappa })
            }
            PickandsModel::HuslerReiss { theta } => json!({ "theta": theta }),
            PickandsModel::StudentT { theta, nu } => json!({ "theta": theta, "nu": nu }),
            PickandsModel::Independence { .. } => json!({}),
        };
        let Value::Object(params) = params else {
            unreachable!("params built as an object")
        };
        ModelSpec { family, d, params }
    }
}
