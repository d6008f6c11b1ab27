//! Rank-based estimation of the w-madogram and the Pickands dependence
//! function from incomplete data.
//!
//! Margins are estimated from every observed value of a column; the
//! dependence functional uses the fully observed rows only.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::data::MaskedMatrix;
use crate::error::{Error, Result};
use crate::simplex::Weights;

/// Empirical distribution function of column `j` at `x`, over its
/// observed values.
pub fn marginal_ecdf(data: &MaskedMatrix, j: usize, x: f64) -> Result<f64> {
    if j >= data.dim() {
        return Err(Error::InvalidArgument(format!("column {j} >= d = {}", data.dim())));
    }
    let col = data.column(j);
    if col.is_empty() {
        return Err(Error::EmptyColumn { column: j });
    }
    Ok(col.iter().filter(|&&v| v <= x).count() as f64 / col.len() as f64)
}

/// Joint empirical distribution function at `x`, over the fully observed
/// rows.
pub fn joint_ecdf(data: &MaskedMatrix, x: &[f64]) -> Result<f64> {
    if x.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: x.len(),
        });
    }
    let mut total = 0usize;
    let mut below = 0usize;
    for i in (0..data.n_rows()).filter(|&i| data.row_complete(i)) {
        total += 1;
        if (0..data.dim()).all(|j| data.get(i, j).expect("complete row") <= x[j]) {
            below += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoCompleteRows);
    }
    Ok(below as f64 / total as f64)
}

/// Scaled ranks `rank / (n_j + 1)` of the observed cells; ties get their
/// average rank and unobserved cells have no rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledRanks {
    n: usize,
    d: usize,
    ranks: Vec<Option<f64>>,
    column_counts: Vec<usize>,
}

impl ScaledRanks {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.ranks[i * self.d + j]
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn column_counts(&self) -> &[usize] {
        &self.column_counts
    }
}

/// Scaled ranks of every observed cell.
pub fn scaled_ranks(data: &MaskedMatrix) -> Result<ScaledRanks> {
    let (n, d) = (data.n_rows(), data.dim());
    let mut ranks = vec![None; n * d];
    let mut column_counts = vec![0; d];
    for j in 0..d {
        let mut col: Vec<(f64, usize)> =
            (0..n).filter_map(|i| data.get(i, j).map(|v| (v, i))).collect();
        if col.is_empty() {
            return Err(Error::EmptyColumn { column: j });
        }
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        let nj = col.len();
        column_counts[j] = nj;
        let scale = 1.0 / (nj as f64 + 1.0);
        let mut start = 0;
        while start < nj {
            let mut end = start + 1;
            while end < nj && col[end].0 == col[start].0 {
                end += 1;
            }
            // ranks start..end (1-based start+1..=end) share their mean
            let avg = (start + 1 + end) as f64 / 2.0;
            for &(_, i) in &col[start..end] {
                ranks[i * d + j] = Some(avg * scale);
            }
            start = end;
        }
    }
    Ok(ScaledRanks {
        n,
        d,
        ranks,
        column_counts,
    })
}

/// Weights `lambda_j(w)` of the endpoint correction.
#[derive(Clone)]
pub enum LambdaScheme {
    /// `lambda_j(w) = w_j`.
    Identity,
    /// Any other map; see [`LambdaScheme::custom`].
    Custom(Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>),
}

impl fmt::Debug for LambdaScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Default for LambdaScheme {
    fn default() -> Self {
        Self::Identity
    }
}

impl LambdaScheme {
    /// Custom scheme, checked against `lambda_j(e_k) = delta_jk` at the
    /// vertices of the `d`-dimensional simplex.
    pub fn custom<F>(d: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        for k in 0..d {
            let e = Weights::vertex(d, k)?;
            let l = f(e.as_slice());
            let ok = l.len() == d
                && l.iter()
                    .enumerate()
                    .all(|(j, v)| (v - if j == k { 1.0 } else { 0.0 }).abs() <= 1e-12);
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "lambda(e_{}) = {l:?} is not the {}-th basis vector",
                    k + 1,
                    k + 1
                )));
            }
        }
        Ok(Self::Custom(Arc::new(f)))
    }

    /// Custom scheme without the vertex check, for algebraic checks at
    /// interior points only.
    pub fn unchecked<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::Custom(Arc::new(f))
    }

    pub fn eval(&self, w: &Weights) -> Vec<f64> {
        match self {
            Self::Identity => w.as_slice().to_vec(),
            Self::Custom(f) => f(w.as_slice()),
        }
    }
}

/// A madogram estimate at `w`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MadogramValue {
    pub w: Weights,
    pub value: f64,
}

/// Pickands estimate at `w`, clipped into `[max_j w_j, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PickandsEstimate {
    pub value: f64,
    /// Value before clipping.
    pub raw: f64,
    pub clipped: bool,
}

/// Every estimate at one simplex point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub w: Weights,
    pub nu_hybrid: f64,
    pub nu_corrected: f64,
    pub pickands: f64,
    pub clipped: bool,
    #[serde(rename = "N")]
    pub n_complete: usize,
    pub n_j: Vec<usize>,
}

/// Scaled ranks of the fully observed rows, ready for evaluation at many
/// simplex points.
#[derive(Debug, Clone)]
pub struct Estimator {
    d: usize,
    rows: Vec<f64>,
    column_counts: Vec<usize>,
}

// u^(1/w), with the convention u^(1/0) = 0.
fn power(u: f64, w: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        u.powf(1.0 / w)
    }
}

impl Estimator {
    pub fn new(data: &MaskedMatrix) -> Result<Self> {
        let ranks = scaled_ranks(data)?;
        let d = data.dim();
        let mut rows = Vec::new();
        for i in (0..data.n_rows()).filter(|&i| data.row_complete(i)) {
            rows.extend((0..d).map(|j| ranks.get(i, j).expect("complete row")));
        }
        if rows.is_empty() {
            return Err(Error::NoCompleteRows);
        }
        Ok(Self {
            d,
            rows,
            column_counts: ranks.column_counts,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `N`.
    pub fn complete_rows(&self) -> usize {
        self.rows.len() / self.d
    }

    /// `n_j`.
    pub fn column_counts(&self) -> &[usize] {
        &self.column_counts
    }

    /// Scaled ranks of the `k`-th fully observed row.
    pub fn complete_row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.d..(k + 1) * self.d]
    }

    fn check(&self, w: &Weights) -> Result<()> {
        if w.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: w.dim(),
            });
        }
        Ok(())
    }

    // (hybrid estimate, column means of u^(1/w_j)) over complete rows
    fn sums(&self, w: &Weights) -> (f64, Vec<f64>) {
        let d = self.d;
        let ws = w.as_slice();
        let mut total = 0.0;
        let mut means = vec![0.0; d];
        let mut p = vec![0.0; d];
        for row in self.rows.chunks_exact(d) {
            for j in 0..d {
                p[j] = power(row[j], ws[j]);
                means[j] += p[j];
            }
            let max = p.iter().cloned().fold(0.0, f64::max);
            let mean = p.iter().sum::<f64>() / d as f64;
            total += max - mean;
        }
        let big_n = self.complete_rows() as f64;
        for m in &mut means {
            *m /= big_n;
        }
        (total / big_n, means)
    }

    /// Hybrid w-madogram estimate.
    pub fn hybrid(&self, w: &Weights) -> Result<f64> {
        self.check(w)?;
        Ok(self.sums(w).0)
    }

    /// Endpoint-corrected w-madogram estimate.
    pub fn corrected(&self, w: &Weights, lambda: &LambdaScheme) -> Result<f64> {
        self.check(w)?;
        let (hybrid, means) = self.sums(w);
        Ok(self.correct(w, lambda, hybrid, &means))
    }

    fn correct(&self, w: &Weights, lambda: &LambdaScheme, hybrid: f64, means: &[f64]) -> f64 {
        let d = self.d as f64;
        let lam = lambda.eval(w);
        let correction: f64 = (0..self.d)
            .map(|j| {
                let wj = w.get(j);
                lam[j] * (d - 1.0) / d * (means[j] - wj / (1.0 + wj))
            })
            .sum();
        hybrid - correction
    }

    /// Both madogram estimates at once.
    pub fn both(&self, w: &Weights, lambda: &LambdaScheme) -> Result<(f64, f64)> {
        self.check(w)?;
        let (hybrid, means) = self.sums(w);
        Ok((hybrid, self.correct(w, lambda, hybrid, &means)))
    }

    /// Pickands estimate from the corrected madogram.
    pub fn pickands(&self, w: &Weights, lambda: &LambdaScheme) -> Result<PickandsEstimate> {
        let nu = self.corrected(w, lambda)?;
        pickands_from_madogram(nu, w)
    }

    /// Every estimate at `w`.
    pub fn estimate(&self, w: &Weights, lambda: &LambdaScheme) -> Result<Estimate> {
        let (nu_hybrid, nu_corrected) = self.both(w, lambda)?;
        let a = pickands_from_madogram(nu_corrected, w)?;
        Ok(Estimate {
            w: w.clone(),
            nu_hybrid,
            nu_corrected,
            pickands: a.value,
            clipped: a.clipped,
            n_complete: self.complete_rows(),
            n_j: self.column_counts.clone(),
        })
    }

    /// Rank copula: fraction of complete rows with every scaled rank at or
    /// below `u`.
    pub fn rank_copula(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: u.len(),
            });
        }
        let below = self
            .rows
            .chunks_exact(self.d)
            .filter(|row| row.iter().zip(u).all(|(r, u)| r <= u))
            .count();
        Ok(below as f64 / self.complete_rows() as f64)
    }

    /// Extremal coefficient estimate `d A(1/d, ..., 1/d)`, in `[1, d]`.
    pub fn extremal_coefficient(&self, lambda: &LambdaScheme) -> Result<ExtremalEstimate> {
        let w = Weights::equal(self.d)?;
        let (_, nu) = self.both(&w, lambda)?;
        let a = pickands_from_madogram(nu, &w)?;
        Ok(ExtremalEstimate {
            value: self.d as f64 * a.value,
            clipped: a.clipped,
            madogram: nu,
        })
    }
}

/// Extremal coefficient estimate with the madogram it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtremalEstimate {
    pub value: f64,
    pub clipped: bool,
    pub madogram: f64,
}

/// `A = (nu + c) / (1 - nu - c)`, clipped into `[max_j w_j, 1]`.
pub fn pickands_from_madogram(nu: f64, w: &Weights) -> Result<PickandsEstimate> {
    let raw = crate::models::mado_to_pickands(nu, w)?;
    let lo = w.max();
    let value = raw.clamp(lo, 1.0);
    // the vertex value 1 may come out a rounding error away
    let clipped = value != raw && (raw - value).abs() > 1e-12;
    Ok(PickandsEstimate {
        value,
        raw,
        clipped,
    })
}

/// Hybrid w-madogram estimate.
pub fn hybrid_madogram(data: &MaskedMatrix, w: &Weights) -> Result<MadogramValue> {
    let value = Estimator::new(data)?.hybrid(w)?;
    Ok(MadogramValue { w: w.clone(), value })
}

/// Endpoint-corrected w-madogram estimate.
pub fn corrected_madogram(data: &MaskedMatrix, w: &Weights, lambda: &LambdaScheme) -> Result<MadogramValue> {
    let value = Estimator::new(data)?.corrected(w, lambda)?;
    Ok(MadogramValue { w: w.clone(), value })
}

/// Pickands estimate from the corrected madogram.
pub fn pickands_estimate(data: &MaskedMatrix, w: &Weights, lambda: &LambdaScheme) -> Result<PickandsEstimate> {
    Estimator::new(data)?.pickands(w, lambda)
}

/// Extremal coefficient estimate with `lambda_j(w) = w_j`.
pub fn extremal_coefficient_estimate(data: &MaskedMatrix) -> Result<ExtremalEstimate> {
    Estimator::new(data)?.extremal_coefficient(&LambdaScheme::Identity)
}

/// Rank copula of the fully observed rows.
pub fn rank_copula(data: &MaskedMatrix, u: &[f64]) -> Result<f64> {
    Estimator::new(data)?.rank_copula(u)
}
