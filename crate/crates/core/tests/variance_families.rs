//! Variance components of every family against 2-D cubature of their
//! defining double integrals.

use madogram::simplex::Weights;
use madogram::variance::{gamma_1j, sigma_j1, sigma_jk, sigma_jk2, tau_jk};
use madogram::PickandsModel;
use validation::{refine, square, square_split, Cubature};

const TOL: f64 = 1e-6;

fn with(model: &PickandsModel, w: &[f64], y: f64, j: usize, vj: f64) -> f64 {
    let mut u: Vec<f64> = w.iter().map(|&wi| y.powf(wi)).collect();
    u[j] = vj;
    model.copula_cdf(&u).unwrap()
}

fn pair(model: &PickandsModel, j: usize, k: usize, a: f64, b: f64) -> f64 {
    let mut u = vec![1.0; model.dim()];
    u[j] = a;
    u[k] = b;
    model.copula_cdf(&u).unwrap()
}

fn assert_close(name: &str, lib: f64, c: Cubature) {
    assert!(c.change < 1e-9, "{name}: cubature not converged ({})", c.change);
    assert!((lib - c.value).abs() < TOL, "{name}: {lib} vs {}", c.value);
}

fn check_point(model: &PickandsModel, w: &Weights, level: u32) {
    let d = w.dim();
    let ws = w.as_slice().to_vec();
    let a = model.pickands(w).unwrap();
    let mu: Vec<f64> = (0..d).map(|j| model.mu(w, j).unwrap()).collect();
    for j in 0..d {
        let wj = ws[j];
        assert_close(
            "sigma_j^(1)",
            sigma_j1(model, w, j).unwrap(),
            refine(
                |l| square_split(|x, y| with(model, &ws, y, j, x.powf(wj).min(y.powf(wj))) - x.powf(wj) * y.powf(a), l),
                level,
            ),
        );
        assert_close(
            "gamma_1j",
            gamma_1j(model, w, j).unwrap(),
            refine(
                |l| {
                    square_split(
                        |x, y| {
                            mu[j] * y.powf(a - wj)
                                * (with(model, &ws, x, j, x.powf(wj).min(y.powf(wj))) - x.powf(a) * y.powf(wj))
                        },
                        l,
                    )
                },
                level,
            ),
        );
        for k in (0..d).filter(|&k| k != j) {
            let wk = ws[k];
            let cov = |x: f64, y: f64| pair(model, j, k, x.powf(wj), y.powf(wk)) - x.powf(wj) * y.powf(wk);
            assert_close("sigma_jk", sigma_jk(model, w, j, k).unwrap(), refine(|l| square(cov, l), level));
            assert_close(
                "sigma_jk^(2)",
                sigma_jk2(model, w, j, k).unwrap(),
                refine(|l| square(|x, y| mu[k] * y.powf(a - wk) * cov(x, y), l), level),
            );
            assert_close(
                "tau_jk",
                tau_jk(model, w, j, k).unwrap(),
                refine(
                    |l| square(|x, y| mu[j] * x.powf(a - wj) * mu[k] * y.powf(a - wk) * cov(x, y), l),
                    level,
                ),
            );
        }
    }
}

fn bivariate_points() -> Vec<Weights> {
    [0.1, 0.35, 0.5, 0.8].iter().map(|&t| Weights::bivariate(t).unwrap()).collect()
}

#[test]
fn husler_reiss() {
    let m = PickandsModel::husler_reiss(1.0).unwrap();
    bivariate_points().iter().for_each(|w| check_point(&m, w, 5));
}

// Strong dependence bends the integrands sharply near the diagonal, so
// this family and the next use a finer cubature level.
#[test]
fn extremal_t() {
    let m = PickandsModel::student_t(0.8, 0.2).unwrap();
    bivariate_points().iter().for_each(|w| check_point(&m, w, 7));
}

#[test]
fn asymmetric_negative_logistic() {
    let m = PickandsModel::asymmetric_negative_logistic(10.0, 0.5, 1.0).unwrap();
    bivariate_points().iter().for_each(|w| check_point(&m, w, 7));
}

#[test]
fn asymmetric_mixed() {
    let m = PickandsModel::asymmetric_mixed(4.0 / 3.0, -1.0 / 3.0).unwrap();
    bivariate_points().iter().for_each(|w| check_point(&m, w, 5));
}

#[test]
fn asymmetric_logistic_bivariate() {
    let m = PickandsModel::asymmetric_logistic_bivariate(2.5, 0.1, 1.0).unwrap();
    bivariate_points().iter().for_each(|w| check_point(&m, w, 5));
}

#[test]
fn asymmetric_logistic_trivariate() {
    let m = PickandsModel::asymmetric_logistic_trivariate(
        [0.4, 0.3, 0.1, 0.2],
        [0.1, 0.2, 0.4, 0.3],
        [0.6, 0.1, 0.1, 0.2],
        [1.0 / 0.6, 1.0 / 0.5, 1.0 / 0.8, 1.0 / 0.3],
    )
    .unwrap();
    for w in [[0.2, 0.3, 0.5], [0.6, 0.2, 0.2], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]] {
        check_point(&m, &Weights::new(w.to_vec()).unwrap(), 5);
    }
}
