//! Station records, equal-size spatial clustering and per-cluster
//! extremal coefficients.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{parse_cell, write_na_csv, MaskedMatrix, MissingnessProfile};
use crate::error::{Error, Result};
use crate::estimation::{Estimator, LambdaScheme};
use crate::rng::{derive_seed, stream, Domain};
use crate::samplers::{apply_mcar_mask, sample_symmetric_logistic};

/// Annual maxima of several stations, one row per year.
#[derive(Debug, Clone, PartialEq)]
pub struct StationTable {
    pub ids: Vec<String>,
    pub years: Vec<i64>,
    /// Planar `(x, y)` per station, if known.
    pub coords: Option<Vec<[f64; 2]>>,
    pub values: MaskedMatrix,
    /// Stations removed at load time because they had no observation.
    pub dropped: Vec<String>,
}

impl StationTable {
    pub fn new(ids: Vec<String>, years: Vec<i64>, values: MaskedMatrix) -> Result<Self> {
        if ids.len() != values.dim() {
            return Err(Error::DimensionMismatch {
                expected: values.dim(),
                got: ids.len(),
            });
        }
        if years.len() != values.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: values.n_rows(),
                got: years.len(),
            });
        }
        let mut seen = HashSet::new();
        for y in &years {
            if !seen.insert(*y) {
                return Err(Error::Parse(format!("duplicate year {y}")));
            }
        }
        let mut ids_seen = HashSet::new();
        for id in &ids {
            if !ids_seen.insert(id.as_str()) {
                return Err(Error::Parse(format!("duplicate station id \"{id}\"")));
            }
        }
        if let Some(j) = values.column_counts().iter().position(|&c| c == 0) {
            return Err(Error::EmptyColumn { column: j });
        }
        Ok(Self {
            ids,
            years,
            coords: None,
            values,
            dropped: Vec::new(),
        })
    }

    pub fn n_stations(&self) -> usize {
        self.ids.len()
    }

    /// Reads `year,<id>,<id>,...` rows with `NA` gaps. Stations without
    /// any observation are dropped and listed in `dropped`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(Error::Parse("need a year column and at least one station".into()));
        }
        let ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let d = ids.len();
        let mut years = Vec::new();
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != d + 1 {
                return Err(Error::Parse(format!(
                    "row {} has {} fields, expected {}",
                    line + 1,
                    record.len(),
                    d + 1
                )));
            }
            let year: i64 = record[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad year \"{}\"", line + 1, &record[0])))?;
            years.push(year);
            rows.push(record.iter().skip(1).map(parse_cell).collect::<Result<Vec<_>>>()?);
        }
        if rows.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        let keep: Vec<usize> = (0..d).filter(|&j| rows.iter().any(|r| r[j].is_some())).collect();
        if keep.is_empty() {
            return Err(Error::Parse("every station is empty".into()));
        }
        let dropped = (0..d).filter(|j| !keep.contains(j)).map(|j| ids[j].clone()).collect();
        let rows: Vec<Vec<Option<f64>>> = rows
            .iter()
            .map(|r| keep.iter().map(|&j| r[j]).collect())
            .collect();
        let ids = keep.iter().map(|&j| ids[j].clone()).collect();
        let mut table = Self::new(ids, years, MaskedMatrix::from_rows(&rows)?)?;
        table.dropped = dropped;
        Ok(table)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut header = vec!["year".to_string()];
        header.extend(self.ids.iter().cloned());
        let year = |i: usize| self.years[i].to_string();
        write_na_csv(writer, &header, self.years.len(), |i, j| self.values.get(i, j), Some(&year))
    }

    /// Attaches coordinates from `id,x,y` rows. Coordinates of dropped or
    /// unknown stations are ignored; every kept station needs one.
    pub fn read_coords<R: Read>(&mut self, reader: R) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut map = BTreeMap::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 3 {
                return Err(Error::Parse(format!("coordinate row {} needs id,x,y", line + 1)));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse(format!("coordinate row {}: bad number \"{s}\"", line + 1)))
            };
            let id = record[0].trim().to_string();
            if map.insert(id.clone(), [parse(&record[1])?, parse(&record[2])?]).is_some() {
                return Err(Error::Parse(format!("duplicate coordinates for \"{id}\"")));
            }
        }
        let coords = self
            .ids
            .iter()
            .map(|id| {
                map.get(id)
                    .copied()
                    .ok_or_else(|| Error::Parse(format!("no coordinates for station \"{id}\"")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.coords = Some(coords);
        Ok(())
    }

    pub fn write_coords<W: Write>(&self, writer: W) -> Result<()> {
        let coords = self
            .coords
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("table has no coordinates".into()))?;
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["id", "x", "y"])?;
        for (id, c) in self.ids.iter().zip(coords) {
            wtr.write_record([id.clone(), c[0].to_string(), c[1].to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Minimum-cost perfect matching on a square `n x n` cost matrix
/// (row-major). Returns the column assigned to each row.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    // shortest augmenting paths with dual potentials; index 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

/// Options of [`constrained_kmeans`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 100,
        }
    }
}

/// Equal-size clustering of points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering {
    /// Cluster of each point.
    pub labels: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    /// Within-cluster sum of squared distances.
    pub objective: f64,
    /// Objective after each iteration of the retained restart.
    pub history: Vec<f64>,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn objective(coords: &[[f64; 2]], labels: &[usize], centroids: &[[f64; 2]]) -> f64 {
    coords.iter().zip(labels).map(|(c, &l)| dist2(c, &centroids[l])).sum()
}

fn plus_plus_init<R: Rng>(rng: &mut R, coords: &[[f64; 2]], k: usize) -> Vec<[f64; 2]> {
    let n = coords.len();
    let mut centroids = vec![coords[rng.gen_range(0..n)]];
    while centroids.len() < k {
        let d2: Vec<f64> = coords
            .iter()
            .map(|c| centroids.iter().map(|m| dist2(c, m)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut idx = n - 1;
            for (i, v) in d2.iter().enumerate() {
                if target < *v {
                    idx = i;
                    break;
                }
                target -= v;
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(coords[pick]);
    }
    centroids
}

fn balanced_assign(coords: &[[f64; 2]], centroids: &[[f64; 2]], size: usize) -> Vec<usize> {
    let n = coords.len();
    let mut cost = Vec::with_capacity(n * n);
    for c in coords {
        for slot in 0..n {
            cost.push(dist2(c, &centroids[slot / size]));
        }
    }
    min_cost_assignment(&cost, n).into_iter().map(|slot| slot / size).collect()
}

fn update_centroids(coords: &[[f64; 2]], labels: &[usize], k: usize) -> Vec<[f64; 2]> {
    let mut sums = vec![[0.0; 2]; k];
    let mut counts = vec![0usize; k];
    for (c, &l) in coords.iter().zip(labels) {
        sums[l][0] += c[0];
        sums[l][1] += c[1];
        counts[l] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &m)| [s[0] / m as f64, s[1] / m as f64])
        .collect()
}

/// k-means with every cluster holding exactly `size` points. The
/// assignment step is an exact min-cost matching of points to cluster
/// slots; initial centroids come from seeded k-means++ and the best of
/// several restarts is kept.
pub fn constrained_kmeans(
    coords: &[[f64; 2]],
    k: usize,
    size: usize,
    seed: u64,
    options: KMeansOptions,
) -> Result<Clustering> {
    let n = coords.len();
    if k == 0 || size == 0 || k * size != n {
        return Err(Error::InfeasibleClustering(format!(
            "{k} clusters of size {size} cannot hold {n} stations"
        )));
    }
    if coords.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
        return Err(Error::InvalidArgument("non-finite coordinate".into()));
    }
    let mut best: Option<Clustering> = None;
    for restart in 0..options.restarts.max(1) {
        let mut rng = stream(seed, Domain::Cluster, restart as u64);
        let mut centroids = plus_plus_init(&mut rng, coords, k);
        let mut labels = balanced_assign(coords, &centroids, size);
        let mut history = Vec::new();
        for _ in 0..options.max_iter.max(1) {
            centroids = update_centroids(coords, &labels, k);
            history.push(objective(coords, &labels, &centroids));
            let next = balanced_assign(coords, &centroids, size);
            if next == labels {
                break;
            }
            labels = next;
        }
        let obj = *history.last().expect("at least one iteration");
        if best.as_ref().map_or(true, |b| obj < b.objective) {
            best = Some(Clustering {
                labels,
                centroids,
                objective: obj,
                history,
            });
        }
    }
    let best = best.expect("at least one restart");
    for c in 0..k {
        assert_eq!(best.members(c).len(), size, "unbalanced cluster {c}");
    }
    Ok(best)
}

/// Extremal coefficient of one retained cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub cluster: usize,
    pub stations: Vec<String>,
    /// Years observed at every member station.
    pub overlap: usize,
    pub theta: f64,
    pub clipped: bool,
    /// Corrected madogram at equal weights.
    pub madogram: f64,
}

/// Cluster left out of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmittedCluster {
    pub cluster: usize,
    pub stations: Vec<String>,
    pub overlap: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAnalysis {
    pub retained: Vec<ClusterReport>,
    pub omitted: Vec<OmittedCluster>,
}

pub const INSUFFICIENT_OVERLAP: &str = "insufficient overlap";

/// Estimates the extremal coefficient of each cluster from its stations'
/// common years. Clusters with fewer than `min_overlap` common years, or
/// whose estimate fails, are listed as omitted.
pub fn cluster_report(table: &StationTable, labels: &[usize], min_overlap: usize) -> Result<ClusterAnalysis> {
    if labels.len() != table.n_stations() {
        return Err(Error::DimensionMismatch {
            expected: table.n_stations(),
            got: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let groups: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect();
    let size = groups.first().map_or(0, Vec::len);
    if groups.iter().any(|g| g.len() != size || g.is_empty()) {
        return Err(Error::InfeasibleClustering("clusters must all have the same size".into()));
    }
    let outcomes: Vec<std::result::Result<ClusterReport, OmittedCluster>> = groups
        .par_iter()
        .enumerate()
        .map(|(c, members)| {
            let stations: Vec<String> = members.iter().map(|&j| table.ids[j].clone()).collect();
            let sub = table.values.select_columns(members).expect("valid columns");
            let overlap = sub.complete_rows();
            let omit = |reason: String| OmittedCluster {
                cluster: c,
                stations: stations.clone(),
                overlap,
                reason,
            };
            if overlap < min_overlap {
                return Err(omit(INSUFFICIENT_OVERLAP.to_string()));
            }
            let est = Estimator::new(&sub)
                .and_then(|e| e.extremal_coefficient(&LambdaScheme::Identity))
                .map_err(|e| omit(e.to_string()))?;
            Ok(ClusterReport {
                cluster: c,
                stations: stations.clone(),
                overlap,
                theta: est.value,
                clipped: est.clipped,
                madogram: est.madogram,
            })
        })
        .collect();
    let mut analysis = ClusterAnalysis {
        retained: Vec::new(),
        omitted: Vec::new(),
    };
    for o in outcomes {
        match o {
            Ok(r) => analysis.retained.push(r),
            Err(m) => analysis.omitted.push(m),
        }
    }
    Ok(analysis)
}

/// Number of positions where ordering by `estimated` and by `truth`
/// agree.
pub fn ranking_agreement(estimated: &[f64], truth: &[f64]) -> usize {
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        idx
    };
    order(estimated)
        .iter()
        .zip(order(truth))
        .filter(|(a, b)| **a == *b)
        .count()
}

/// Stations in well separated spatial clusters, each cluster drawn from
/// a symmetric logistic model with its own `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStations {
    pub thetas: Vec<f64>,
    /// Stations per cluster.
    pub size: usize,
    pub n_years: usize,
    /// Probability that a station records a given year.
    pub p_observed: f64,
    pub first_year: i64,
    /// `(cluster, N)`: force exactly `N` common years in that cluster.
    pub overlap_override: Option<(usize, usize)>,
}

impl Default for SyntheticStations {
    /// Seven clusters of seven stations with `theta = 1.2, 1.4, ..., 2.4`
    /// and 3000 years, long enough to order neighbouring coefficients.
    fn default() -> Self {
        Self {
            thetas: (0..7).map(|i| 1.2 + 0.2 * i as f64).collect(),
            size: 7,
            n_years: 3000,
            p_observed: 0.95,
            first_year: 1900,
            overlap_override: None,
        }
    }
}

impl SyntheticStations {
    /// True extremal coefficients `size^(1/theta)`.
    pub fn true_coefficients(&self) -> Vec<f64> {
        self.thetas.iter().map(|t| (self.size as f64).powf(1.0 / t)).collect()
    }

    /// Generates the table (with coordinates) and the true cluster of
    /// each station.
    pub fn generate(&self, seed: u64) -> Result<(StationTable, Vec<usize>)> {
        let k = self.thetas.len();
        let (size, n) = (self.size, self.n_years);
        if k == 0 || size == 0 || n == 0 {
            return Err(Error::InvalidArgument("empty synthetic configuration".into()));
        }
        if let Some((c, m)) = self.overlap_override {
            if c >= k || m > n {
                return Err(Error::InvalidArgument(format!("bad overlap override ({c}, {m})")));
            }
        }
        let profile = MissingnessProfile::independent(vec![self.p_observed; size])?;
        let d = k * size;
        let mut values = vec![0.0; n * d];
        let mut observed = vec![false; n * d];
        let mut coords = Vec::with_capacity(d);
        let mut ids = Vec::with_capacity(d);
        let mut truth = Vec::with_capacity(d);
        let mut jitter = stream(seed, Domain::Cluster, u64::MAX);
        for (c, &theta) in self.thetas.iter().enumerate() {
            let block_seed = derive_seed(seed, Domain::Data, c as u64);
            let sample = sample_symmetric_logistic(size, theta, n, block_seed)?;
            let mut masked = apply_mcar_mask(&sample, &profile, derive_seed(block_seed, Domain::Mask, 0))?;
            if let Some((_, m)) = self.overlap_override.filter(|o| o.0 == c) {
                // first m years complete, later years miss one rotating station
                let mask: Vec<bool> = (0..n * size)
                    .map(|idx| {
                        let (i, j) = (idx / size, idx % size);
                        i < m || (j != i % size && masked.is_observed(i, j))
                    })
                    .collect();
                masked = sample.with_mask(&mask)?;
            }
            let angle = 2.0 * PI * c as f64 / k as f64;
            let center = [20.0 * angle.cos(), 20.0 * angle.sin()];
            for s in 0..size {
                let col = c * size + s;
                for i in 0..n {
                    if let Some(v) = masked.get(i, s) {
                        values[i * d + col] = v;
                        observed[i * d + col] = true;
                    }
                }
                ids.push(format!("c{c}s{s}"));
                truth.push(c);
                coords.push([
                    center[0] + jitter.gen_range(-1.0..1.0),
                    center[1] + jitter.gen_range(-1.0..1.0),
                ]);
            }
        }
        let years = (0..n as i64).map(|i| self.first_year + i).collect();
        let mut table = StationTable::new(ids, years, MaskedMatrix::new(n, d, values, observed)?)?;
        table.coords = Some(coords);
        Ok((table, truth))
    }
}
