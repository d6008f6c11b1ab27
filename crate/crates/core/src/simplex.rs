//! Points of the unit simplex and the grids used to sweep it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// A point `w` of the unit simplex in dimension `d >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weights {
    entries: Vec<f64>,
    has_zero: bool,
}

impl Weights {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InvalidWeights(format!(
                "need at least 2 entries, got {}",
                entries.len()
            )));
        }
        if let Some(bad) = entries
            .iter()
            .find(|w| !w.is_finite() || **w < 0.0 || **w > 1.0)
        {
            return Err(Error::InvalidWeights(format!("entry {bad} outside [0, 1]")));
        }
        let total: f64 = entries.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!("entries sum to {total}, not 1")));
        }
        let has_zero = entries.iter().any(|&w| w == 0.0);
        Ok(Self { entries, has_zero })
    }

    /// Bivariate point `(1 - t, t)`: `t` is the weight of the second
    /// coordinate, the scalar argument of the bivariate Pickands formulas.
    pub fn bivariate(t: f64) -> Result<Self> {
        Self::new(vec![1.0 - t, t])
    }

    /// Barycenter `(1/d, ..., 1/d)`.
    pub fn equal(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidWeights(format!("dimension {d} < 2")));
        }
        Self::new(vec![1.0 / d as f64; d])
    }

    /// Canonical basis vector `e_j`.
    pub fn vertex(d: usize, j: usize) -> Result<Self> {
        if j >= d {
            return Err(Error::InvalidWeights(format!("vertex index {j} >= d = {d}")));
        }
        let mut entries = vec![0.0; d];
        entries[j] = 1.0;
        Self::new(entries)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, j: usize) -> f64 {
        self.entries[j]
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.entries.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// True when some `w_j` is exactly zero, so the `u^{1/0} = 0`
    /// convention applies (this covers every vertex).
    pub fn has_zero_entry(&self) -> bool {
        self.has_zero
    }

    /// True when `w` lies within `eps` of some vertex `e_j`.
    pub fn near_vertex(&self, eps: f64) -> bool {
        self.max() >= 1.0 - eps
    }

    /// Second coordinate, the scalar `w` of bivariate formulas.
    pub fn scalar(&self) -> f64 {
        self.entries[1]
    }
}

impl TryFrom<Vec<f64>> for Weights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Weights::new(v)
    }
}

impl From<Weights> for Vec<f64> {
    fn from(w: Weights) -> Self {
        w.entries
    }
}

/// Bivariate grid `{k/m : k = 1..m-1}`, as points `(1 - k/m, k/m)`.
pub fn bivariate_grid(m: usize) -> Vec<Weights> {
    (1..m)
        .map(|k| Weights::bivariate(k as f64 / m as f64).expect("grid point in [0,1]"))
        .collect()
}

/// Regular lattice of the simplex with spacing `1/m`: all points whose
/// coordinates are multiples of `1/m`. `interior_only` drops points with
/// a zero coordinate.
pub fn lattice(d: usize, m: usize, interior_only: bool) -> Vec<Weights> {
    let mut out = Vec::new();
    let mut counts = vec![0usize; d];
    fill_lattice(&mut counts, 0, m, m, interior_only, &mut out);
    out
}

fn fill_lattice(
    counts: &mut [usize],
    pos: usize,
    remaining: usize,
    m: usize,
    interior_only: bool,
    out: &mut Vec<Weights>,
) {
    let d = counts.len();
    if pos == d - 1 {
        counts[pos] = remaining;
        if interior_only && counts.iter().any(|&c| c == 0) {
            return;
        }
        let mut entries: Vec<f64> = counts.iter().map(|&c| c as f64 / m as f64).collect();
        // absorb rounding in the last coordinate
        let head: f64 = entries[..d - 1].iter().sum();
        entries[d - 1] = 1.0 - head;
        if let Ok(w) = Weights::new(entries) {
            out.push(w);
        }
        return;
    }
    for c in 0..=remaining {
        counts[pos] = c;
        fill_lattice(counts, pos + 1, remaining - c, m, interior_only, out);
    }
}

/// Uniform draw from the simplex (normalized unit exponentials), rejecting
/// points with some coordinate below `min_entry`.
pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, d: usize, min_entry: f64) -> Weights {
    loop {
        let e: Vec<f64> = (0..d).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = e.iter().sum();
        let mut entries: Vec<f64> = e.iter().map(|x| x / total).collect();
        let head: f64 = entries[..d - 1].iter().sum();
        entries[d - 1] = 1.0 - head;
        if entries.iter().all(|&x| x >= min_entry) {
            if let Ok(w) = Weights::new(entries) {
                return w;
            }
        }
    }
}
