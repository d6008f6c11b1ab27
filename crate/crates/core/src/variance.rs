//! Closed-form asymptotic variances of the hybrid and corrected
//! madogram estimators under MCAR missingness.
//!
//! Every component with a double-integral definition is reduced to a
//! one-dimensional integral of `[A(z(s)) + linear(s)]^(-2)` over `s`
//! after the substitution `(x, y) -> (r, s)` that makes the stable tail
//! dependence function homogeneous in `r`. Notation: `A = A(w)`,
//! `mu_j = mu_j(w)`, `A_j = A / w_j`.

use serde::Serialize;

use crate::data::MissingnessProfile;
use crate::error::{Error, Result};
use crate::estimation::LambdaScheme;
use crate::models::PickandsModel;
use crate::quadrature::{integrate, QuadratureSpec};
use crate::simplex::Weights;

/// Smallest coordinate for which variances are evaluated.
pub const INTERIOR_EPS: f64 = 1e-3;

/// `sigma_j^2 = w_j / ((1 + w_j)^2 (2 + w_j))`.
pub fn sigma_j_sq(w_j: f64) -> f64 {
    w_j / ((1.0 + w_j).powi(2) * (2.0 + w_j))
}

/// `gamma_1^2 = A / ((1 + A)^2 (2 + A))`.
pub fn gamma1_sq(a: f64) -> f64 {
    a / ((1.0 + a).powi(2) * (2.0 + a))
}

/// `gamma_j^2 = mu_j^2 w_j / ((1 + A)^2 (2A + 2 - w_j))`.
pub fn gamma_j_sq(a: f64, mu_j: f64, w_j: f64) -> f64 {
    mu_j * mu_j * w_j / ((1.0 + a).powi(2) * (2.0 * a + 2.0 - w_j))
}

/// Point evaluation state shared by the component integrals.
struct Point<'a> {
    model: &'a PickandsModel,
    w: &'a [f64],
    a: f64,
    mu: Vec<f64>,
    spec: &'a QuadratureSpec,
    error: std::cell::Cell<f64>,
}

impl<'a> Point<'a> {
    fn new(model: &'a PickandsModel, w: &'a Weights, spec: &'a QuadratureSpec) -> Result<Self> {
        if model.dim() != w.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: w.dim(),
            });
        }
        if w.min() < INTERIOR_EPS {
            return Err(Error::VertexPoint(format!(
                "variance needs min_j w_j >= {INTERIOR_EPS}, got {:?}",
                w.as_slice()
            )));
        }
        let a = model.pickands(w)?;
        let mu = model.mu_all(w)?;
        Ok(Self {
            model,
            w: w.as_slice(),
            a,
            mu,
            spec,
            error: std::cell::Cell::new(0.0),
        })
    }

    fn quad<F: Fn(f64) -> f64>(&self, f: F, hi: f64) -> Result<f64> {
        let r = integrate(f, 0.0, hi, self.spec)?;
        self.error.set(self.error.get() + r.error);
        Ok(r.value)
    }

    // A at the point with (1 - s) in coordinate j, s in coordinate k and
    // zero elsewhere.
    fn a_pair(&self, j: usize, k: usize, s: f64) -> f64 {
        let mut z = vec![0.0; self.w.len()];
        z[j] = 1.0 - s;
        z[k] = s;
        self.model.pickands_at(&z)
    }

    // A at the point with (1 - s) in coordinate j and s w_i / (1 - w_j)
    // elsewhere.
    fn a_spread(&self, j: usize, s: f64) -> f64 {
        let wj = self.w[j];
        let z: Vec<f64> = self
            .w
            .iter()
            .enumerate()
            .map(|(i, &wi)| if i == j { 1.0 - s } else { s * wi / (1.0 - wj) })
            .collect();
        self.model.pickands_at(&z)
    }

    fn a_j(&self, j: usize) -> f64 {
        self.a / self.w[j]
    }

    fn sigma_jk(&self, j: usize, k: usize) -> Result<f64> {
        let (wj, wk) = (self.w[j], self.w[k]);
        let i = self.quad(
            |s| (self.a_pair(j, k, s) + (1.0 - s) / wj + s / wk).powi(-2),
            1.0,
        )?;
        Ok(i / (wj * wk) - 1.0 / ((1.0 + wj) * (1.0 + wk)))
    }

    fn sigma_j1(&self, j: usize) -> Result<f64> {
        let wj = self.w[j];
        let a = self.a;
        let i = self.quad(
            |s| (self.a_spread(j, s) + (1.0 - s) / wj + s / (1.0 - wj)).powi(-2),
            1.0 - wj,
        )?;
        Ok(i / (wj * (1.0 - wj)) + (1.0 / (1.0 + a)) * (1.0 / (2.0 + a) - 1.0 / (1.0 + wj)))
    }

    fn sigma_jk2(&self, j: usize, k: usize) -> Result<f64> {
        if j == k {
            return Ok(0.0);
        }
        let (wj, wk) = (self.w[j], self.w[k]);
        let (a, ak, mk) = (self.a, self.a_j(k), self.mu[k]);
        let i = self.quad(
            |s| (self.a_pair(j, k, s) + (1.0 - s) / wj + s * (ak + 1.0 / wk - 1.0)).powi(-2),
            1.0,
        )?;
        Ok(mk * i / (wj * wk) - mk / ((1.0 + a) * (1.0 + wj)))
    }

    fn gamma_1j(&self, j: usize) -> Result<f64> {
        let wj = self.w[j];
        let (a, aj, mj) = (self.a, self.a_j(j), self.mu[j]);
        // triangle where the j-th minimum is attained by x, minus the
        // product term, plus the triangle where it is attained by y
        let lower = mj / ((1.0 + a) * (2.0 * a + 2.0 - wj));
        let product = mj / (1.0 + a).powi(2);
        let i = self.quad(
            |s| {
                (self.a_spread(j, s) + (1.0 - s) * (aj + 1.0 / wj - 1.0) + s / (1.0 - wj)).powi(-2)
            },
            1.0 - wj,
        )?;
        Ok(lower - product + mj * i / (wj * (1.0 - wj)))
    }

    fn tau_jk(&self, j: usize, k: usize) -> Result<f64> {
        let (wj, wk) = (self.w[j], self.w[k]);
        let (a, aj, ak) = (self.a, self.a_j(j), self.a_j(k));
        let (mj, mk) = (self.mu[j], self.mu[k]);
        let i = self.quad(
            |s| {
                (self.a_pair(j, k, s)
                    + (1.0 - s) * (aj + 1.0 / wj - 1.0)
                    + s * (ak + 1.0 / wk - 1.0))
                    .powi(-2)
            },
            1.0,
        )?;
        Ok(mj * mk * i / (wj * wk) - mj * mk / (1.0 + a).powi(2))
    }
}

/// Every component of the asymptotic variances at one simplex point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceBreakdown {
    pub w: Vec<f64>,
    pub pickands: f64,
    pub mu: Vec<f64>,
    /// `sigma_j^2`.
    pub sigma_sq: Vec<f64>,
    /// `sigma_{jk}`, symmetric with zero diagonal.
    pub sigma_pair: Vec<Vec<f64>>,
    /// `sigma_j^(1)`.
    pub sigma1: Vec<f64>,
    /// `sigma_{jk}^(2)`, zero diagonal.
    pub sigma2: Vec<Vec<f64>>,
    pub gamma1_sq: f64,
    pub gamma_sq: Vec<f64>,
    pub gamma_1j: Vec<f64>,
    /// `tau_{jk}`, symmetric with zero diagonal.
    pub tau: Vec<Vec<f64>>,
    pub sigma_dplus1_sq: f64,
    /// Asymptotic variance of the hybrid estimator.
    pub s_hybrid: f64,
    /// Asymptotic variance of the corrected estimator.
    pub s_corrected: f64,
    /// Asymptotic variance of the Pickands estimator, `(1 + A)^4 S^{H*}`.
    pub pickands_variance: f64,
    /// Sum of the quadrature error estimates of all integrals.
    pub quadrature_error: f64,
}

/// Components that do not depend on the missingness probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Components {
    pub w: Vec<f64>,
    pub pickands: f64,
    pub mu: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub sigma_pair: Vec<Vec<f64>>,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<Vec<f64>>,
    pub gamma1_sq: f64,
    pub gamma_sq: Vec<f64>,
    pub gamma_1j: Vec<f64>,
    pub tau: Vec<Vec<f64>>,
    pub quadrature_error: f64,
}

impl Components {
    /// Evaluates every component at an interior point `w`.
    pub fn compute(model: &PickandsModel, w: &Weights, spec: &QuadratureSpec) -> Result<Self> {
        let pt = Point::new(model, w, spec)?;
        let d = w.dim();
        let mut sigma_pair = vec![vec![0.0; d]; d];
        let mut tau = vec![vec![0.0; d]; d];
        let mut sigma2 = vec![vec![0.0; d]; d];
        for j in 0..d {
            for k in (j + 1)..d {
                let s = pt.sigma_jk(j, k)?;
                sigma_pair[j][k] = s;
                sigma_pair[k][j] = s;
                let t = pt.tau_jk(j, k)?;
                tau[j][k] = t;
                tau[k][j] = t;
            }
            for k in 0..d {
                sigma2[j][k] = pt.sigma_jk2(j, k)?;
            }
        }
        let sigma1 = (0..d).map(|j| pt.sigma_j1(j)).collect::<Result<Vec<_>>>()?;
        let gamma_1j = (0..d).map(|j| pt.gamma_1j(j)).collect::<Result<Vec<_>>>()?;
        let sigma_sq = w.as_slice().iter().map(|&x| sigma_j_sq(x)).collect();
        let gamma_sq = (0..d).map(|j| gamma_j_sq(pt.a, pt.mu[j], pt.w[j])).collect();
        Ok(Self {
            w: w.as_slice().to_vec(),
            pickands: pt.a,
            mu: pt.mu.clone(),
            sigma_sq,
            sigma_pair,
            sigma1,
            sigma2,
            gamma1_sq: gamma1_sq(pt.a),
            gamma_sq,
            gamma_1j,
            tau,
            quadrature_error: pt.error.get(),
        })
    }

    /// `sigma_{d+1}^2 = p^-1 g_1^2 + sum p_j^-1 g_j^2 - 2 sum p_j^-1 g_1j
    /// + 2 sum_{j<k} p_jk / (p_j p_k) tau_jk`.
    pub fn sigma_dplus1_sq(&self, profile: &MissingnessProfile) -> f64 {
        let d = self.w.len();
        let mut v = self.gamma1_sq / profile.complete_prob();
        for j in 0..d {
            let pj = profile.marginal(j);
            v += self.gamma_sq[j] / pj - 2.0 * self.gamma_1j[j] / pj;
            for k in (j + 1)..d {
                let r = profile.pair(j, k) / (pj * profile.marginal(k));
                v += 2.0 * r * self.tau[j][k];
            }
        }
        v
    }

    /// Asymptotic variance with per-coordinate factors `c_j`
    /// (`c_j = 1` for the hybrid estimator, `1 + lambda_j (d - 1)` for the
    /// corrected one).
    pub fn assemble(&self, profile: &MissingnessProfile, c: &[f64]) -> f64 {
        let d = self.w.len();
        let df = d as f64;
        let inv_p = 1.0 / profile.complete_prob();
        let inv = |j: usize| 1.0 / profile.marginal(j);
        let ratio = |j: usize, k: usize| profile.pair(j, k) / (profile.marginal(j) * profile.marginal(k));
        let mut s = self.sigma_dplus1_sq(profile);
        for j in 0..d {
            s += (inv_p - inv(j)) * c[j] * c[j] * self.sigma_sq[j] / (df * df);
            for k in (j + 1)..d {
                let coef = inv_p - inv(j) - inv(k) + ratio(j, k);
                s += 2.0 * coef * c[j] * c[k] * self.sigma_pair[j][k] / (df * df);
            }
            s -= 2.0 * (inv_p - inv(j)) * c[j] * self.sigma1[j] / df;
            for k in (0..d).filter(|&k| k != j) {
                s += 2.0 * (inv(k) - ratio(j, k)) * c[j] * self.sigma2[j][k] / df;
            }
        }
        s
    }

    /// Variances of both estimators and of the Pickands estimator.
    pub fn breakdown(&self, profile: &MissingnessProfile, lambda: &LambdaScheme) -> Result<VarianceBreakdown> {
        let d = self.w.len();
        if profile.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: profile.dim(),
            });
        }
        let w = Weights::new(self.w.clone())?;
        let lam = lambda.eval(&w);
        let c_star: Vec<f64> = lam.iter().map(|l| 1.0 + l * (d as f64 - 1.0)).collect();
        let s_hybrid = self.assemble(profile, &vec![1.0; d]);
        let s_corrected = self.assemble(profile, &c_star);
        Ok(VarianceBreakdown {
            w: self.w.clone(),
            pickands: self.pickands,
            mu: self.mu.clone(),
            sigma_sq: self.sigma_sq.clone(),
            sigma_pair: self.sigma_pair.clone(),
            sigma1: self.sigma1.clone(),
            sigma2: self.sigma2.clone(),
            gamma1_sq: self.gamma1_sq,
            gamma_sq: self.gamma_sq.clone(),
            gamma_1j: self.gamma_1j.clone(),
            tau: self.tau.clone(),
            sigma_dplus1_sq: self.sigma_dplus1_sq(profile),
            s_hybrid,
            s_corrected,
            pickands_variance: (1.0 + self.pickands).powi(4) * s_corrected,
            quadrature_error: self.quadrature_error,
        })
    }
}

/// `sigma_{jk}` for `j != k`.
pub fn sigma_jk(model: &PickandsModel, w: &Weights, j: usize, k: usize) -> Result<f64> {
    check_indices(w, &[j, k])?;
    if j == k {
        return Err(Error::InvalidArgument("sigma_jk needs j != k".into()));
    }
    Point::new(model, w, &QuadratureSpec::default())?.sigma_jk(j, k)
}

/// `sigma_j^(1)`.
pub fn sigma_j1(model: &PickandsModel, w: &Weights, j: usize) -> Result<f64> {
    check_indices(w, &[j])?;
    Point::new(model, w, &QuadratureSpec::default())?.sigma_j1(j)
}

/// `sigma_{jk}^(2)`; zero when `j = k`.
pub fn sigma_jk2(model: &PickandsModel, w: &Weights, j: usize, k: usize) -> Result<f64> {
    check_indices(w, &[j, k])?;
    Point::new(model, w, &QuadratureSpec::default())?.sigma_jk2(j, k)
}

/// `gamma_{1j}`.
pub fn gamma_1j(model: &PickandsModel, w: &Weights, j: usize) -> Result<f64> {
    check_indices(w, &[j])?;
    Point::new(model, w, &QuadratureSpec::default())?.gamma_1j(j)
}

/// `tau_{jk}` for `j != k`.
pub fn tau_jk(model: &PickandsModel, w: &Weights, j: usize, k: usize) -> Result<f64> {
    check_indices(w, &[j, k])?;
    if j == k {
        return Err(Error::InvalidArgument("tau_jk needs j != k".into()));
    }
    Point::new(model, w, &QuadratureSpec::default())?.tau_jk(j, k)
}

fn check_indices(w: &Weights, idx: &[usize]) -> Result<()> {
    match idx.iter().find(|&&j| j >= w.dim()) {
        Some(j) => Err(Error::InvalidArgument(format!("index {j} >= d = {}", w.dim()))),
        None => Ok(()),
    }
}

/// `sigma_{d+1}^2(p, w)`.
pub fn sigma_dplus1_sq(model: &PickandsModel, profile: &MissingnessProfile, w: &Weights) -> Result<f64> {
    Ok(Components::compute(model, w, &QuadratureSpec::default())?.sigma_dplus1_sq(profile))
}

/// Full breakdown with `lambda_j(w) = w_j` for the corrected estimator.
pub fn variance_hybrid(model: &PickandsModel, profile: &MissingnessProfile, w: &Weights) -> Result<VarianceBreakdown> {
    variance_corrected(model, profile, w, &LambdaScheme::Identity)
}

/// Full breakdown for a given correction scheme.
pub fn variance_corrected(
    model: &PickandsModel,
    profile: &MissingnessProfile,
    w: &Weights,
    lambda: &LambdaScheme,
) -> Result<VarianceBreakdown> {
    variance_with(model, profile, w, lambda, &QuadratureSpec::default())
}

/// Full breakdown with explicit quadrature tolerances.
pub fn variance_with(
    model: &PickandsModel,
    profile: &MissingnessProfile,
    w: &Weights,
    lambda: &LambdaScheme,
    spec: &QuadratureSpec,
) -> Result<VarianceBreakdown> {
    if profile.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: profile.dim(),
        });
    }
    Components::compute(model, w, spec)?.breakdown(profile, lambda)
}

/// `V(p, w) = (1 + A(w))^4 S^{H*}(p, w)`.
pub fn pickands_variance(
    model: &PickandsModel,
    profile: &MissingnessProfile,
    w: &Weights,
    lambda: &LambdaScheme,
) -> Result<f64> {
    Ok(variance_corrected(model, profile, w, lambda)?.pickands_variance)
}

/// Closed forms for the independence copula.
pub mod independence {
    use crate::data::MissingnessProfile;
    use crate::simplex::Weights;

    /// `sigma_{d+1}^2 = (1/4) (1 / (3p) - sum_j p_j^-1 w_j / (4 - w_j))`.
    pub fn sigma_dplus1_sq(profile: &MissingnessProfile, w: &Weights) -> f64 {
        let sum: f64 = (0..w.dim())
            .map(|j| w.get(j) / (profile.marginal(j) * (4.0 - w.get(j))))
            .sum();
        0.25 * (1.0 / (3.0 * profile.complete_prob()) - sum)
    }

    /// `sigma_j^(1) = w_j / (6 (1 + w_j))`.
    pub fn sigma_j1(w_j: f64) -> f64 {
        w_j / (6.0 * (1.0 + w_j))
    }

    /// `gamma_{1j} = w_j / (4 (4 - w_j))`.
    pub fn gamma_1j(w_j: f64) -> f64 {
        w_j / (4.0 * (4.0 - w_j))
    }
}

/// Which limit-process covariance to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceKind {
    /// `cov(beta_j(u_j), beta_j(v_j)) = p_j^-1 (u_j ^ v_j - u_j v_j)`.
    BetaBetaSame { j: usize },
    /// `cov(beta_j(u_j), beta_k(v_k)) = p_jk / (p_j p_k) (C(1_jk(u_j, v_k)) - u_j v_k)`.
    BetaBetaCross { j: usize, k: usize },
    /// `cov(alpha(u), alpha(v)) = p^-1 (C(u ^ v) - C(u) C(v))`.
    AlphaAlpha,
    /// `cov(alpha(u), beta_j(v_j)) = p_j^-1 (C(u with u_j ^ v_j) - C(u) v_j)`.
    AlphaBeta { j: usize },
}

impl std::str::FromStr for CovarianceKind {
    type Err = Error;

    /// Parses `beta-beta-same:j`, `beta-beta-cross:j:k`, `alpha-alpha` or
    /// `alpha-beta:j` (zero-based indices).
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let idx = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| Error::Parse(format!("covariance kind \"{s}\" needs index {i}")))
        };
        match (parts[0], parts.len()) {
            ("beta-beta-same", 2) => Ok(Self::BetaBetaSame { j: idx(1)? }),
            ("beta-beta-cross", 3) => Ok(Self::BetaBetaCross {
                j: idx(1)?,
                k: idx(2)?,
            }),
            ("alpha-alpha", 1) => Ok(Self::AlphaAlpha),
            ("alpha-beta", 2) => Ok(Self::AlphaBeta { j: idx(1)? }),
            _ => Err(Error::Parse(format!("unknown covariance kind \"{s}\""))),
        }
    }
}

/// Covariances of the limits of `sqrt(n)(F_hat_j - F_j)` (beta) and of
/// the complete-row process `sqrt(n)(F_hat - F)` (alpha), on the copula
/// scale.
pub fn limit_covariance(
    kind: CovarianceKind,
    model: &PickandsModel,
    profile: &MissingnessProfile,
    u: &[f64],
    v: &[f64],
) -> Result<f64> {
    let d = model.dim();
    if u.len() != d || v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: u.len().min(v.len()),
        });
    }
    if u.iter().chain(v).any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidArgument("arguments must lie in [0, 1]".into()));
    }
    let check = |j: usize| {
        if j >= d {
            Err(Error::InvalidArgument(format!("index {j} >= d = {d}")))
        } else {
            Ok(())
        }
    };
    match kind {
        CovarianceKind::BetaBetaSame { j } => {
            check(j)?;
            Ok((u[j].min(v[j]) - u[j] * v[j]) / profile.marginal(j))
        }
        CovarianceKind::BetaBetaCross { j, k } => {
            check(j)?;
            check(k)?;
            if j == k {
                return Err(Error::InvalidArgument("beta-beta-cross needs j != k".into()));
            }
            let mut pt = vec![1.0; d];
            pt[j] = u[j];
            pt[k] = v[k];
            let r = profile.pair(j, k) / (profile.marginal(j) * profile.marginal(k));
            Ok(r * (model.copula_cdf_at(&pt) - u[j] * v[k]))
        }
        CovarianceKind::AlphaAlpha => {
            let m: Vec<f64> = u.iter().zip(v).map(|(a, b)| a.min(*b)).collect();
            let cov = model.copula_cdf_at(&m) - model.copula_cdf_at(u) * model.copula_cdf_at(v);
            Ok(cov / profile.complete_prob())
        }
        CovarianceKind::AlphaBeta { j } => {
            check(j)?;
            let mut m = u.to_vec();
            m[j] = u[j].min(v[j]);
            let cov = model.copula_cdf_at(&m) - model.copula_cdf_at(u) * v[j];
            Ok(cov / profile.marginal(j))
        }
    }
}
