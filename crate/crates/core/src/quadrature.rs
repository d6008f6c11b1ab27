//! Adaptive Gauss-Legendre quadrature on a finite interval.
//!
//! Each panel carries a coarse rule on the whole panel and a fine rule on
//! its two halves; their difference is the panel's error estimate. The
//! panel with the largest estimate is split until the summed estimate
//! meets the tolerance. Nodes are interior, so integrands may be
//! undefined at the interval endpoints.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 15;

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_splits: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_splits: 60,
        }
    }
}

/// Value of an integral together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        // Tricomi's initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        sum += w * f(mid + half * x);
    }
    sum * half
}

struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    error: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64) -> Self {
        let m = 0.5 * (a + b);
        let left = panel(f, a, m);
        let right = panel(f, m, b);
        let error = (whole - left - right).abs();
        Self {
            a,
            b,
            left,
            right,
            error,
        }
    }

    fn value(&self) -> f64 {
        self.left + self.right
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
        });
    }
    let whole = panel(&f, a, b);
    let mut panels = vec![Panel::new(&f, a, b, whole)];
    let mut splits = 0;
    loop {
        let value: f64 = panels.iter().map(Panel::value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Quadrature {
                estimate: value,
                error,
            });
        }
        if error <= spec.abs_tol.max(spec.rel_tol * value.abs()) {
            return Ok(Integral { value, error });
        }
        if splits >= spec.max_splits {
            return Err(Error::Quadrature {
                estimate: value,
                error,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        panels.push(Panel::new(&f, p.a, m, p.left));
        panels.push(Panel::new(&f, m, p.b, p.right));
        splits += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(ORDER);
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-14);
        // x^28 is within the exactness degree 2n - 1 = 29
        let moment: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(28)).sum();
        assert_abs_diff_eq!(moment, 2.0 / 29.0, epsilon = 1e-14);
    }

    #[test]
    fn smooth_integrals() {
        let spec = QuadratureSpec::default();
        let r = integrate(f64::exp, 0.0, 1.0, &spec).unwrap();
        assert_abs_diff_eq!(r.value, std::f64::consts::E - 1.0, epsilon = 1e-13);
        let r = integrate(|x: f64| 1.0 / (1.0 + x * x), -3.0, 3.0, &spec).unwrap();
        assert_abs_diff_eq!(r.value, 2.0 * 3f64.atan(), epsilon = 1e-10);
    }

    #[test]
    fn endpoint_singularity_is_refined() {
        // the integrand is never evaluated at 0
        let spec = QuadratureSpec::default();
        let r = integrate(|x: f64| x.sqrt(), 0.0, 1.0, &spec).unwrap();
        assert_abs_diff_eq!(r.value, 2.0 / 3.0, epsilon = 1e-8);
        let r = integrate(|x: f64| x.ln(), 0.0, 1.0, &spec).unwrap();
        assert_abs_diff_eq!(r.value, -1.0, epsilon = 1e-8);
    }

    #[test]
    fn reports_failure() {
        let spec = QuadratureSpec {
            max_splits: 3,
            ..QuadratureSpec::default()
        };
        let err = integrate(|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, &spec).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
