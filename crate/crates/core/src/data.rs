//! Observations with missing entries and the probabilities of observing
//! them.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Text written for an unobserved cell.
pub const NA: &str = "NA";

/// `n x d` observations together with an observedness mask.
///
/// Values of unobserved cells are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl MaskedMatrix {
    /// Fully observed matrix from row-major values.
    pub fn complete(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(n, d, values, vec![true; n * d])
    }

    /// Matrix from row-major values and mask.
    pub fn new(n: usize, d: usize, values: Vec<f64>, observed: Vec<bool>) -> Result<Self> {
        if values.len() != n * d || observed.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: values.len().min(observed.len()),
            });
        }
        if d == 0 {
            return Err(Error::InvalidArgument("matrix needs at least one column".into()));
        }
        if let Some(k) = (0..n * d).find(|&k| observed[k] && !values[k].is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "observed cell ({}, {}) is not finite",
                k / d,
                k % d
            )));
        }
        Ok(Self {
            n,
            d,
            values,
            observed,
        })
    }

    /// Matrix from rows of optional values; `None` marks a missing cell.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * d);
        let mut observed = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            for cell in row {
                values.push(cell.unwrap_or(0.0));
                observed.push(cell.is_some());
            }
        }
        Self::new(rows.len(), d, values, observed)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = i * self.d + j;
        self.observed[k].then(|| self.values[k])
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.d + j]
    }

    pub fn row_complete(&self, i: usize) -> bool {
        self.observed[i * self.d..(i + 1) * self.d].iter().all(|&o| o)
    }

    /// `n_j`: number of observed cells in each column.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.d];
        for (k, &o) in self.observed.iter().enumerate() {
            if o {
                counts[k % self.d] += 1;
            }
        }
        counts
    }

    /// `N`: number of fully observed rows.
    pub fn complete_rows(&self) -> usize {
        (0..self.n).filter(|&i| self.row_complete(i)).count()
    }

    /// Observed values of column `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).filter_map(|i| self.get(i, j)).collect()
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.d) {
            return Err(Error::InvalidArgument(format!("column {c} >= d = {}", self.d)));
        }
        let mut values = Vec::with_capacity(self.n * cols.len());
        let mut observed = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            for &c in cols {
                values.push(self.values[i * self.d + c]);
                observed.push(self.observed[i * self.d + c]);
            }
        }
        Self::new(self.n, cols.len(), values, observed)
    }

    /// Same mask, with a new observedness pattern intersected in.
    pub fn with_mask(&self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.observed.len() {
            return Err(Error::DimensionMismatch {
                expected: self.observed.len(),
                got: mask.len(),
            });
        }
        let observed = self.observed.iter().zip(mask).map(|(a, b)| *a && *b).collect();
        Self::new(self.n, self.d, self.values.clone(), observed)
    }

    /// Converts uniform margins to unit Frechet, `x = -1 / ln u`.
    pub fn to_frechet(&self) -> Self {
        let values = self
            .values
            .iter()
            .zip(&self.observed)
            .map(|(&u, &o)| if o { -1.0 / u.ln() } else { 0.0 })
            .collect();
        Self {
            values,
            ..self.clone()
        }
    }

    /// Writes the matrix as CSV with header `x1,...,xd` and `NA` for
    /// unobserved cells.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let header: Vec<String> = (1..=self.d).map(|j| format!("x{j}")).collect();
        write_na_csv(writer, &header, self.n, |i, j| self.get(i, j), None)
    }

    /// Reads the CSV written by [`MaskedMatrix::write_csv`] (any header).
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let d = rdr.headers()?.len();
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != d {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {d}",
                    line + 1,
                    record.len()
                )));
            }
            let row = record
                .iter()
                .map(parse_cell)
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        Self::from_rows(&rows)
    }
}

/// Parses a numeric cell or the literal `NA`.
pub fn parse_cell(s: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s == NA {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("cell \"{s}\" is neither a number nor {NA}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("cell \"{s}\" is not finite")));
    }
    Ok(Some(v))
}

pub(crate) fn write_na_csv<W: Write>(
    writer: W,
    header: &[String],
    n: usize,
    cell: impl Fn(usize, usize) -> Option<f64>,
    leading: Option<&dyn Fn(usize) -> String>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(header)?;
    let d = header.len() - usize::from(leading.is_some());
    let mut record = Vec::with_capacity(header.len());
    for i in 0..n {
        record.clear();
        if let Some(f) = leading {
            record.push(f(i));
        }
        for j in 0..d {
            record.push(cell(i, j).map_or_else(|| NA.to_string(), |v| v.to_string()));
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// How observedness indicators depend on each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingnessMode {
    /// Indicators independent across columns.
    Independent,
    /// A row is observed entirely or not at all.
    AllOrNone,
    /// Probabilities given explicitly; no sampling mechanism attached.
    Custom,
}

/// Observation probabilities `p_j`, `p_{jk}` and `p` of a missingness
/// mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileSpec", into = "ProfileSpec")]
pub struct MissingnessProfile {
    mode: MissingnessMode,
    p_marginal: Vec<f64>,
    p_complete: f64,
    p_pair: Vec<Vec<f64>>,
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("{name} = {p} outside (0, 1]")));
    }
    Ok(())
}

impl MissingnessProfile {
    /// Nothing missing.
    pub fn complete(d: usize) -> Self {
        Self::independent(vec![1.0; d]).expect("unit probabilities are valid")
    }

    /// Column `j` observed with probability `p_j`, independently.
    pub fn independent(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidParameter("profile needs d >= 2".into()));
        }
        for (j, &pj) in p.iter().enumerate() {
            check_probability(&format!("p_{}", j + 1), pj)?;
        }
        let d = p.len();
        let p_pair = (0..d)
            .map(|j| (0..d).map(|k| if j == k { p[j] } else { p[j] * p[k] }).collect())
            .collect();
        Ok(Self {
            mode: MissingnessMode::Independent,
            p_complete: p.iter().product(),
            p_marginal: p,
            p_pair,
        })
    }

    /// Whole rows observed with probability `p`.
    pub fn all_or_none(d: usize, p: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter("profile needs d >= 2".into()));
        }
        check_probability("p", p)?;
        Ok(Self {
            mode: MissingnessMode::AllOrNone,
            p_marginal: vec![p; d],
            p_complete: p,
            p_pair: vec![vec![p; d]; d],
        })
    }

    /// Explicit probabilities; must satisfy `p <= p_jk <= min(p_j, p_k)`.
    pub fn custom(p_marginal: Vec<f64>, p_complete: f64, p_pair: Vec<Vec<f64>>) -> Result<Self> {
        let d = p_marginal.len();
        if d < 2 {
            return Err(Error::InvalidParameter("profile needs d >= 2".into()));
        }
        for (j, &pj) in p_marginal.iter().enumerate() {
            check_probability(&format!("p_{}", j + 1), pj)?;
        }
        check_probability("p", p_complete)?;
        if p_pair.len() != d || p_pair.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter(format!("p_pair must be {d} x {d}")));
        }
        for j in 0..d {
            for k in 0..d {
                let pjk = p_pair[j][k];
                let tol = 1e-12;
                if (pjk - p_pair[k][j]).abs() > tol {
                    return Err(Error::InvalidParameter("p_pair must be symmetric".into()));
                }
                if j == k && (pjk - p_marginal[j]).abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "p_pair[{j}][{j}] must equal p_{}",
                        j + 1
                    )));
                }
                if pjk < p_complete - tol || pjk > p_marginal[j].min(p_marginal[k]) + tol {
                    return Err(Error::InvalidParameter(format!(
                        "p_pair[{j}][{k}] = {pjk} violates p <= p_jk <= min(p_j, p_k)"
                    )));
                }
            }
        }
        Ok(Self {
            mode: MissingnessMode::Custom,
            p_marginal,
            p_complete,
            p_pair,
        })
    }

    pub fn mode(&self) -> MissingnessMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.p_marginal.len()
    }

    /// `p_j`.
    pub fn marginal(&self, j: usize) -> f64 {
        self.p_marginal[j]
    }

    pub fn marginals(&self) -> &[f64] {
        &self.p_marginal
    }

    /// `p`, probability that a row is fully observed.
    pub fn complete_prob(&self) -> f64 {
        self.p_complete
    }

    /// `p_{jk}`.
    pub fn pair(&self, j: usize, k: usize) -> f64 {
        self.p_pair[j][k]
    }
}

/// JSON form of a [`MissingnessProfile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Independent {
        p: Vec<f64>,
    },
    AllOrNone {
        d: usize,
        p: f64,
    },
    Custom {
        p_marginal: Vec<f64>,
        p_complete: f64,
        p_pair: Vec<Vec<f64>>,
    },
}

impl TryFrom<ProfileSpec> for MissingnessProfile {
    type Error = Error;

    fn try_from(spec: ProfileSpec) -> Result<Self> {
        match spec {
            ProfileSpec::Independent { p } => Self::independent(p),
            ProfileSpec::AllOrNone { d, p } => Self::all_or_none(d, p),
            ProfileSpec::Custom {
                p_marginal,
                p_complete,
                p_pair,
            } => Self::custom(p_marginal, p_complete, p_pair),
        }
    }
}

impl From<MissingnessProfile> for ProfileSpec {
    fn from(p: MissingnessProfile) -> Self {
        match p.mode {
            MissingnessMode::Independent => ProfileSpec::Independent { p: p.p_marginal },
            MissingnessMode::AllOrNone => ProfileSpec::AllOrNone {
                d: p.p_marginal.len(),
                p: p.p_complete,
            },
            MissingnessMode::Custom => ProfileSpec::Custom {
                p_marginal: p.p_marginal,
                p_complete: p.p_complete,
                p_pair: p.p_pair,
            },
        }
    }
}
