//! Exact simulation from the copula families and MCAR masking.
//!
//! Samples have uniform margins. Row `i` draws from its own stream, so
//! output does not depend on how rows are spread over threads.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::data::{MaskedMatrix, MissingnessMode, MissingnessProfile};
use crate::error::{Error, Result};
use crate::models::{LogisticBlock, PickandsModel};
use crate::rng::{stream, Domain};

const BISECTION_STEPS: usize = 200;
const ROOT_TOL: f64 = 1e-10;

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -open01(rng).ln()
}

/// Positive stable variable with Laplace transform `exp(-t^alpha)`,
/// `0 < alpha < 1` (Kanter's representation).
fn positive_stable<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    let u = PI * open01(rng);
    let e = unit_exponential(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
    a * b
}

// One symmetric logistic draw of dimension `d` written into `out`.
fn logistic_row<R: Rng + ?Sized>(rng: &mut R, theta: f64, out: &mut [f64]) {
    if theta == 1.0 {
        for v in out.iter_mut() {
            *v = open01(rng);
        }
        return;
    }
    let s = positive_stable(rng, 1.0 / theta);
    for v in out.iter_mut() {
        let e = unit_exponential(rng);
        *v = (-(e / s).powf(1.0 / theta)).exp();
    }
}

fn build_rows(n: usize, d: usize, seed: u64, row: impl Fn(&mut rand_chacha::ChaCha8Rng, &mut [f64]) + Sync) -> Result<MaskedMatrix> {
    let mut values = vec![0.0; n * d];
    values
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(i, out)| {
            let mut rng = stream(seed, Domain::Data, i as u64);
            row(&mut rng, out);
        });
    MaskedMatrix::complete(n, d, values)
}

/// Symmetric logistic (Gumbel) sample via a positive stable frailty.
pub fn sample_symmetric_logistic(d: usize, theta: f64, n: usize, seed: u64) -> Result<MaskedMatrix> {
    PickandsModel::symmetric_logistic(d, theta)?;
    build_rows(n, d, seed, |rng, out| logistic_row(rng, theta, out))
}

/// Asymmetric logistic sample: one symmetric logistic vector per block on
/// the Frechet scale, combined by `X_j = max_b theta_{j,b} Z_{b,j}`.
pub fn sample_asymmetric_logistic(d: usize, blocks: &[LogisticBlock], n: usize, seed: u64) -> Result<MaskedMatrix> {
    PickandsModel::asymmetric_logistic(d, blocks.to_vec())?;
    let widest = blocks.iter().map(|b| b.members.len()).max().unwrap_or(1);
    build_rows(n, d, seed, |rng, out| {
        let mut frechet = vec![0.0f64; d];
        let mut block = vec![0.0; widest];
        for b in blocks {
            let v = &mut block[..b.members.len()];
            logistic_row(rng, b.theta, v);
            for ((&j, &a), &u) in b.members.iter().zip(&b.weights).zip(v.iter()) {
                if a > 0.0 {
                    let z = -1.0 / u.ln();
                    frechet[j] = frechet[j].max(a * z);
                }
            }
        }
        for (o, x) in out.iter_mut().zip(&frechet) {
            *o = (-1.0 / x).exp();
        }
    })
}

/// Bivariate sample by conditional inversion: `U_1` uniform, then `U_2`
/// solves `dC/du_1(U_1, U_2) = V` for an independent uniform `V`.
pub fn sample_bivariate_conditional(model: &PickandsModel, n: usize, seed: u64) -> Result<MaskedMatrix> {
    model.validate()?;
    if model.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: model.dim(),
        });
    }
    build_rows(n, 2, seed, |rng, out| {
        let u = open01(rng);
        let target = open01(rng);
        out[0] = u;
        out[1] = conditional_quantile(model, u, target);
    })
}

/// Solves `dC/du_1(u, v) = target` for `v` by bisection.
pub fn conditional_quantile(model: &PickandsModel, u: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut mid = 0.5;
    for _ in 0..BISECTION_STEPS {
        mid = 0.5 * (lo + hi);
        let f = model.copula_partial_at(&[u, mid], 0) - target;
        if f.abs() <= ROOT_TOL || hi - lo <= f64::EPSILON * mid {
            break;
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

/// Draws a sample from any supported model.
pub fn sample(model: &PickandsModel, n: usize, seed: u64) -> Result<MaskedMatrix> {
    match model {
        PickandsModel::SymmetricLogistic { d, theta } => sample_symmetric_logistic(*d, *theta, n, seed),
        PickandsModel::AsymmetricLogistic { d, blocks } => sample_asymmetric_logistic(*d, blocks, n, seed),
        PickandsModel::Independence { d } => sample_symmetric_logistic(*d, 1.0, n, seed),
        _ => sample_bivariate_conditional(model, n, seed),
    }
}

/// Masks cells completely at random. Independent mode draws one
/// Bernoulli(`p_j`) per cell; all-or-none mode one Bernoulli(`p`) per
/// row. Cells already missing stay missing.
pub fn apply_mcar_mask(data: &MaskedMatrix, profile: &MissingnessProfile, seed: u64) -> Result<MaskedMatrix> {
    let d = data.dim();
    if profile.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: profile.dim(),
        });
    }
    let mode = profile.mode();
    if mode == MissingnessMode::Custom {
        return Err(Error::InvalidArgument(
            "custom profiles carry no sampling mechanism; use independent or all-or-none".into(),
        ));
    }
    let mut mask = vec![true; data.n_rows() * d];
    mask.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        let mut rng = stream(seed, Domain::Mask, i as u64);
        match mode {
            MissingnessMode::Independent => {
                for (j, m) in row.iter_mut().enumerate() {
                    *m = rng.gen::<f64>() < profile.marginal(j);
                }
            }
            _ => {
                let keep = rng.gen::<f64>() < profile.complete_prob();
                row.fill(keep);
            }
        }
    });
    data.with_mask(&mask)
}
