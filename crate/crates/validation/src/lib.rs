//! Reference numerics used to check the estimation library: tanh-sinh
//! cubature on the unit square, Kolmogorov distances to the uniform law
//! and empirical copula distances.

use std::f64::consts::PI;

/// Abscissae and weights of the tanh-sinh rule on `(0, 1)` with step
/// `2^-level`. Nodes with weight below `1e-20` are dropped, which is
/// harmless for integrands growing no faster than `x^(-1/2)` at the
/// ends. Nodes next to 1 may round to exactly `1.0`, so integrands
/// singular at 1 should be reflected to 0 first.
pub fn tanh_sinh(level: u32) -> Vec<(f64, f64)> {
    let h = 0.5f64.powi(level as i32);
    let mut nodes = Vec::new();
    let mut k = 0i64;
    loop {
        let t = k as f64 * h;
        let a = PI * t.sinh();
        let x = 1.0 / (1.0 + (-a).exp());
        let xc = 1.0 / (1.0 + a.exp());
        let w = h * PI * t.cosh() * x * xc;
        if w < 1e-20 || xc == 0.0 {
            break;
        }
        nodes.push((x, w));
        if k > 0 {
            nodes.push((xc, w));
        }
        k += 1;
    }
    nodes
}

/// `∫∫_[0,1]^2 f(x, y) dx dy` by the tensor tanh-sinh rule.
pub fn square<F: Fn(f64, f64) -> f64>(f: F, level: u32) -> f64 {
    let nodes = tanh_sinh(level);
    let mut total = 0.0;
    for &(y, wy) in &nodes {
        let mut inner = 0.0;
        for &(x, wx) in &nodes {
            inner += wx * f(x, y);
        }
        total += wy * inner;
    }
    total
}

/// Same integral split along the diagonal, for integrands with a kink
/// at `x = y`. Each triangle is mapped to the square.
pub fn square_split<F: Fn(f64, f64) -> f64>(f: F, level: u32) -> f64 {
    let lower = square(|t, y| y * f(y * t, y), level);
    let upper = square(|x, t| x * f(x, x * t), level);
    lower + upper
}

/// Cubature value with the change from the next coarser level.
#[derive(Debug, Clone, Copy)]
pub struct Cubature {
    pub value: f64,
    pub change: f64,
}

/// Evaluates `rule` at `level` and `level - 1`.
pub fn refine<R: Fn(u32) -> f64>(rule: R, level: u32) -> Cubature {
    let fine = rule(level);
    let coarse = rule(level - 1);
    Cubature {
        value: fine,
        change: (fine - coarse).abs(),
    }
}

/// Half-width of the Dvoretzky-Kiefer-Wolfowitz band at level `alpha`.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// `sup_u |F_n(u) - u|` of a sample on `[0, 1]`.
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

/// Pseudo-observations `rank / (n + 1)` of each column.
pub fn pseudo_observations(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| rows[a][j].total_cmp(&rows[b][j]));
        for (r, &i) in idx.iter().enumerate() {
            out[i][j] = (r + 1) as f64 / (n + 1) as f64;
        }
    }
    out
}

/// Largest gap between the empirical copula of `rows` and `copula` over
/// the grid `{1/(m+1), ..., m/(m+1)}^d`.
pub fn empirical_copula_distance<C: Fn(&[f64]) -> f64>(rows: &[Vec<f64>], m: usize, copula: C) -> f64 {
    let pseudo = pseudo_observations(rows);
    let n = pseudo.len() as f64;
    let d = pseudo.first().map_or(0, Vec::len);
    let levels: Vec<f64> = (1..=m).map(|i| i as f64 / (m + 1) as f64).collect();
    let mut worst: f64 = 0.0;
    let mut digits = vec![0usize; d];
    loop {
        let u: Vec<f64> = digits.iter().map(|&i| levels[i]).collect();
        let count = pseudo
            .iter()
            .filter(|row| row.iter().zip(&u).all(|(a, b)| a <= b))
            .count();
        worst = worst.max((count as f64 / n - copula(&u)).abs());
        let mut pos = 0;
        loop {
            if pos == d {
                return worst;
            }
            digits[pos] += 1;
            if digits[pos] < m {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        let rule = tanh_sinh(5);
        let s: f64 = rule.iter().map(|&(x, w)| w * x.powf(-0.5)).sum();
        assert!((s - 2.0).abs() < 1e-9, "{s}");
        let s: f64 = rule.iter().map(|&(x, w)| w * x.ln()).sum();
        assert!((s + 1.0).abs() < 1e-10, "{s}");
    }

    #[test]
    fn split_square_integrates_minimum() {
        // ∫∫ min(x, y) = 1/3
        let c = refine(|l| square_split(|x, y| x.min(y), l), 5);
        assert!((c.value - 1.0 / 3.0).abs() < 1e-12);
        let c = refine(|l| square(|x, y| x * y.powf(0.1), l), 5);
        assert!((c.value - 0.5 / 1.1).abs() < 1e-10);
    }

    #[test]
    fn ks_and_dkw() {
        let v: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_uniform(&v) - 0.005).abs() < 1e-12);
        assert!((dkw_epsilon(100_000, 1e-3) - 0.0061655).abs() < 1e-6);
    }

    #[test]
    fn copula_distance_of_independent_grid() {
        let rows: Vec<Vec<f64>> = (0..10)
            .flat_map(|i| (0..10).map(move |j| vec![i as f64, j as f64]))
            .collect();
        let dist = empirical_copula_distance(&rows, 4, |u| u[0] * u[1]);
        assert!(dist < 0.05, "{dist}");
    }
}
