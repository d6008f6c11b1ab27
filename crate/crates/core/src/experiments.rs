//! Monte Carlo comparison of empirical and asymptotic variances.
//!
//! Each replicate draws a sample, masks it, and evaluates both madogram
//! estimators on the whole simplex grid, so every grid point sees the
//! same samples. Replicates use derived seeds and are reduced in index
//! order: results do not depend on the number of worker threads.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::MissingnessProfile;
use crate::error::{Error, Result};
use crate::estimation::{Estimator, LambdaScheme};
use crate::models::{pickands_to_mado, ModelSpec, PickandsModel};
use crate::rng::{derive_seed, stream, Domain};
use crate::samplers::{apply_mcar_mask, sample};
use crate::simplex::{bivariate_grid, lattice, sample_uniform, Weights};
use crate::variance::{variance_corrected, INTERIOR_EPS};

const MAX_RESAMPLES: u64 = 1000;

/// Simplex points of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    /// `{k/m : k = 1..m-1}` for `d = 2`.
    Bivariate { m: usize },
    /// Interior points of the regular lattice with spacing `1/m`.
    Lattice { m: usize },
    /// `count` uniform draws, rejecting points with a coordinate below
    /// `1e-3`.
    Random { count: usize },
    Points { points: Vec<Weights> },
}

impl GridSpec {
    /// Materializes the grid; random grids depend only on `seed` and `d`.
    pub fn points(&self, d: usize, seed: u64) -> Result<Vec<Weights>> {
        let pts = match self {
            Self::Bivariate { m } => {
                if d != 2 {
                    return Err(Error::InvalidArgument(format!(
                        "bivariate grid needs d = 2, got {d}"
                    )));
                }
                bivariate_grid(*m)
            }
            Self::Lattice { m } => lattice(d, *m, true),
            Self::Random { count } => {
                let mut rng = stream(seed, Domain::Grid, d as u64);
                (0..*count).map(|_| sample_uniform(&mut rng, d, INTERIOR_EPS)).collect()
            }
            Self::Points { points } => points.clone(),
        };
        if pts.is_empty() {
            return Err(Error::InvalidArgument("empty simplex grid".into()));
        }
        for w in &pts {
            if w.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: w.dim(),
                });
            }
            if w.min() < INTERIOR_EPS {
                return Err(Error::VertexPoint(format!(
                    "grid point {:?} has a coordinate below {INTERIOR_EPS}",
                    w.as_slice()
                )));
            }
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Hybrid,
    Corrected,
}

/// Correction weights usable from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaChoice {
    /// `lambda_j(w) = w_j`.
    #[default]
    Identity,
}

impl LambdaChoice {
    pub fn scheme(self) -> LambdaScheme {
        match self {
            Self::Identity => LambdaScheme::Identity,
        }
    }
}

fn both_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Hybrid, EstimatorKind::Corrected]
}

/// Configuration of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub model: PickandsModel,
    pub profile: MissingnessProfile,
    /// Sample size.
    pub n: usize,
    /// Number of replicates.
    pub n_iter: usize,
    /// Replicates per group in the MISE estimate.
    pub group_size: usize,
    pub grid: GridSpec,
    pub seed: u64,
    #[serde(default)]
    pub lambda: LambdaChoice,
    #[serde(default = "both_estimators")]
    pub estimators: Vec<EstimatorKind>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.profile.dim() != self.model.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model.dim(),
                got: self.profile.dim(),
            });
        }
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("n = {} < 2", self.n)));
        }
        if self.n_iter < 2 {
            return Err(Error::InvalidArgument(format!("n_iter = {} < 2", self.n_iter)));
        }
        if self.group_size < 2 || self.n_iter % self.group_size != 0 {
            return Err(Error::InvalidArgument(format!(
                "n_iter = {} must be a multiple of group_size = {} >= 2",
                self.n_iter, self.group_size
            )));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimator selected".into()));
        }
        self.grid.points(self.model.dim(), self.seed)?;
        Ok(())
    }

    fn wants(&self, kind: EstimatorKind) -> bool {
        self.estimators.contains(&kind)
    }
}

/// Empirical and asymptotic variances at one simplex point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub w: Vec<f64>,
    /// True madogram value.
    pub nu: f64,
    pub e_hybrid: Option<f64>,
    pub e_corrected: Option<f64>,
    pub s_hybrid: f64,
    pub s_corrected: f64,
    pub delta_hybrid: Option<f64>,
    pub delta_corrected: Option<f64>,
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub seed: u64,
    pub model: ModelSpec,
    pub n: usize,
    pub n_iter: usize,
    pub group_size: usize,
    pub points: Vec<PointResult>,
    pub mise_hybrid: Option<f64>,
    pub mise_corrected: Option<f64>,
    pub median_delta_hybrid: Option<f64>,
    pub median_delta_corrected: Option<f64>,
    /// Replicates drawn again because no row was fully observed.
    pub resampled: u64,
    /// `sqrt(n) (nu_hat - nu)` of the hybrid estimator, replicate-major
    /// (`n_iter x points`).
    #[serde(skip)]
    pub errors_hybrid: Vec<f64>,
    /// Same for the corrected estimator.
    #[serde(skip)]
    pub errors_corrected: Vec<f64>,
}

/// Unbiased sample variance.
pub fn empirical_variance(values: &[f64]) -> Result<f64> {
    let m = values.len();
    if m < 2 {
        return Err(Error::InvalidArgument("variance needs at least 2 values".into()));
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    Ok(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0))
}

/// `|E - S| / S`.
pub fn delta_ratio(empirical: f64, theoretical: f64) -> Result<f64> {
    if theoretical == 0.0 {
        return Err(Error::InvalidArgument("theoretical variance is zero".into()));
    }
    Ok((empirical - theoretical).abs() / theoretical)
}

/// MISE estimate from replicate-major errors (`n_iter x K`): the mean
/// over groups of the grid-averaged squared gap between each group's
/// empirical variance and the theoretical one.
pub fn mise(errors: &[f64], n_points: usize, group_size: usize, theory: &[f64]) -> Result<f64> {
    if n_points == 0 || theory.len() != n_points || errors.len() % n_points != 0 {
        return Err(Error::InvalidArgument("grid and error table do not match".into()));
    }
    let n_iter = errors.len() / n_points;
    if group_size < 2 || n_iter % group_size != 0 || n_iter == 0 {
        return Err(Error::InvalidArgument(format!(
            "{n_iter} replicates cannot form groups of {group_size}"
        )));
    }
    let groups = n_iter / group_size;
    let mut total = 0.0;
    let mut column = vec![0.0; group_size];
    for g in 0..groups {
        let mut sq = 0.0;
        for (k, s) in theory.iter().enumerate() {
            for (r, c) in column.iter_mut().enumerate() {
                *c = errors[(g * group_size + r) * n_points + k];
            }
            sq += (empirical_variance(&column)? - s).powi(2);
        }
        total += sq / n_points as f64;
    }
    Ok(total / groups as f64)
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len();
    Some(if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    })
}

struct Replicate {
    hybrid: Vec<f64>,
    corrected: Vec<f64>,
    resampled: u64,
}

fn run_replicate(spec: &ExperimentSpec, grid: &[Weights], truth: &[f64], r: u64) -> Result<Replicate> {
    let lambda = spec.lambda.scheme();
    let base = derive_seed(spec.seed, Domain::Replicate, r);
    let root_n = (spec.n as f64).sqrt();
    for attempt in 0..MAX_RESAMPLES {
        let seed = derive_seed(base, Domain::Replicate, attempt);
        let data = sample(&spec.model, spec.n, seed)?;
        let data = apply_mcar_mask(&data, &spec.profile, derive_seed(seed, Domain::Mask, 0))?;
        let est = match Estimator::new(&data) {
            Ok(e) => e,
            Err(Error::NoCompleteRows | Error::EmptyColumn { .. }) => continue,
            Err(e) => return Err(e),
        };
        let mut hybrid = Vec::with_capacity(grid.len());
        let mut corrected = Vec::with_capacity(grid.len());
        for (w, nu) in grid.iter().zip(truth) {
            let (h, c) = est.both(w, &lambda)?;
            hybrid.push(root_n * (h - nu));
            corrected.push(root_n * (c - nu));
        }
        return Ok(Replicate {
            hybrid,
            corrected,
            resampled: attempt,
        });
    }
    Err(Error::InvalidArgument(format!(
        "replicate {r}: no fully observed row after {MAX_RESAMPLES} draws"
    )))
}

/// Runs the experiment on the current rayon pool.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let d = spec.model.dim();
    let grid = spec.grid.points(d, spec.seed)?;
    let k = grid.len();
    let lambda = spec.lambda.scheme();

    let truth = grid
        .iter()
        .map(|w| pickands_to_mado(spec.model.pickands(w)?, w))
        .collect::<Result<Vec<_>>>()?;
    let theory = grid
        .par_iter()
        .map(|w| variance_corrected(&spec.model, &spec.profile, w, &lambda))
        .collect::<Result<Vec<_>>>()?;

    let replicates = (0..spec.n_iter as u64)
        .into_par_iter()
        .map(|r| run_replicate(spec, &grid, &truth, r))
        .collect::<Result<Vec<_>>>()?;

    let mut errors_hybrid = Vec::with_capacity(spec.n_iter * k);
    let mut errors_corrected = Vec::with_capacity(spec.n_iter * k);
    let mut resampled = 0;
    for rep in replicates {
        errors_hybrid.extend(rep.hybrid);
        errors_corrected.extend(rep.corrected);
        resampled += rep.resampled;
    }

    let column = |errors: &[f64], j: usize| -> Vec<f64> {
        (0..spec.n_iter).map(|r| errors[r * k + j]).collect()
    };
    let want_h = spec.wants(EstimatorKind::Hybrid);
    let want_c = spec.wants(EstimatorKind::Corrected);
    let mut points = Vec::with_capacity(k);
    for (j, w) in grid.iter().enumerate() {
        let th = &theory[j];
        let e_h = if want_h {
            Some(empirical_variance(&column(&errors_hybrid, j))?)
        } else {
            None
        };
        let e_c = if want_c {
            Some(empirical_variance(&column(&errors_corrected, j))?)
        } else {
            None
        };
        points.push(PointResult {
            w: w.as_slice().to_vec(),
            nu: truth[j],
            e_hybrid: e_h,
            e_corrected: e_c,
            s_hybrid: th.s_hybrid,
            s_corrected: th.s_corrected,
            delta_hybrid: e_h.map(|e| delta_ratio(e, th.s_hybrid)).transpose()?,
            delta_corrected: e_c.map(|e| delta_ratio(e, th.s_corrected)).transpose()?,
        });
    }

    let s_h: Vec<f64> = points.iter().map(|p| p.s_hybrid).collect();
    let s_c: Vec<f64> = points.iter().map(|p| p.s_corrected).collect();
    let mise_hybrid = if want_h {
        Some(mise(&errors_hybrid, k, spec.group_size, &s_h)?)
    } else {
        None
    };
    let mise_corrected = if want_c {
        Some(mise(&errors_corrected, k, spec.group_size, &s_c)?)
    } else {
        None
    };
    let mut dh: Vec<f64> = points.iter().filter_map(|p| p.delta_hybrid).collect();
    let mut dc: Vec<f64> = points.iter().filter_map(|p| p.delta_corrected).collect();

    Ok(ExperimentResult {
        name: spec.name.clone(),
        seed: spec.seed,
        model: spec.model.to_spec(),
        n: spec.n,
        n_iter: spec.n_iter,
        group_size: spec.group_size,
        points,
        mise_hybrid,
        mise_corrected,
        median_delta_hybrid: median(&mut dh),
        median_delta_corrected: median(&mut dc),
        resampled,
        errors_hybrid,
        errors_corrected,
    })
}

/// Empirical variances `(E^H, E^{H*})` of a spec restricted to one point.
pub fn empirical_variance_at(spec: &ExperimentSpec, w: &Weights) -> Result<(f64, f64)> {
    let mut single = spec.clone();
    single.grid = GridSpec::Points {
        points: vec![w.clone()],
    };
    single.group_size = single.n_iter;
    single.estimators = both_estimators();
    let r = run_experiment(&single)?;
    let p = &r.points[0];
    Ok((p.e_hybrid.expect("requested"), p.e_corrected.expect("requested")))
}

impl ExperimentResult {
    /// Per-point CSV: `w1..wd, nu, E_H, E_Hstar, S_H, S_Hstar, delta_H,
    /// delta_Hstar`; `NA` for estimators not run.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let d = self.points.first().map_or(0, |p| p.w.len());
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=d).map(|j| format!("w{j}")).collect();
        header.extend(
            ["nu", "E_H", "E_Hstar", "S_H", "S_Hstar", "delta_H", "delta_Hstar"].map(String::from),
        );
        wtr.write_record(&header)?;
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for p in &self.points {
            let mut rec: Vec<String> = p.w.iter().map(f64::to_string).collect();
            rec.push(p.nu.to_string());
            rec.push(opt(p.e_hybrid));
            rec.push(opt(p.e_corrected));
            rec.push(p.s_hybrid.to_string());
            rec.push(p.s_corrected.to_string());
            rec.push(opt(p.delta_hybrid));
            rec.push(opt(p.delta_corrected));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Summary without the per-point table.
    pub fn summary(&self) -> Summary {
        Summary {
            name: self.name.clone(),
            seed: self.seed,
            model: self.model.clone(),
            n: self.n,
            n_iter: self.n_iter,
            group_size: self.group_size,
            grid_points: self.points.len(),
            mise_hybrid: self.mise_hybrid,
            mise_corrected: self.mise_corrected,
            median_delta_hybrid: self.median_delta_hybrid,
            median_delta_corrected: self.median_delta_corrected,
            resampled: self.resampled,
        }
    }
}

/// JSON summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub model: ModelSpec,
    pub n: usize,
    pub n_iter: usize,
    pub group_size: usize,
    pub grid_points: usize,
    pub mise_hybrid: Option<f64>,
    pub mise_corrected: Option<f64>,
    pub median_delta_hybrid: Option<f64>,
    pub median_delta_corrected: Option<f64>,
    pub resampled: u64,
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 6] = ["e1", "e2", "e3", "desk-e1", "desk-e2", "desk-e3"];

fn e2_asymmetric_logistic() -> Result<PickandsModel> {
    // dependence values below 1 are exponents 1/theta_b
    PickandsModel::asymmetric_logistic_trivariate(
        [0.4, 0.3, 0.1, 0.2],
        [0.1, 0.2, 0.4, 0.3],
        [0.6, 0.1, 0.1, 0.2],
        [1.0 / 0.6, 1.0 / 0.5, 1.0 / 0.8, 1.0 / 0.3],
    )
}

/// Built-in experiment sweeps. `e1`, `e2` and `e3` are the full-scale
/// sweeps; `desk-*` presets are reduced for routine runs.
pub fn preset(name: &str, seed: u64) -> Result<Vec<ExperimentSpec>> {
    let e1_profile = MissingnessProfile::independent(vec![0.75, 0.75])?;
    let e2_profile = MissingnessProfile::independent(vec![0.9, 0.9, 0.9])?;
    let spec = |name: &str, model: PickandsModel, profile: &MissingnessProfile, n, n_iter, group_size, grid| {
        ExperimentSpec {
            name: name.to_string(),
            model,
            profile: profile.clone(),
            n,
            n_iter,
            group_size,
            grid,
            seed,
            lambda: LambdaChoice::Identity,
            estimators: both_estimators(),
        }
    };
    let specs = match name {
        "e1" => {
            let models = [
                ("gal", PickandsModel::asymmetric_negative_logistic(2.5, 1.0, 1.0)?),
                ("anl", PickandsModel::asymmetric_negative_logistic(10.0, 0.5, 1.0)?),
                ("asl", PickandsModel::asymmetric_logistic_bivariate(2.5, 0.1, 1.0)?),
                ("asm", PickandsModel::asymmetric_mixed(4.0 / 3.0, -1.0 / 3.0)?),
                ("hr", PickandsModel::husler_reiss(1.0)?),
                ("tev", PickandsModel::student_t(0.8, 0.2)?),
            ];
            models
                .into_iter()
                .map(|(tag, m)| {
                    spec(&format!("e1-{tag}"), m, &e1_profile, 1024, 300, 30, GridSpec::Bivariate { m: 200 })
                })
                .collect()
        }
        "desk-e1" => vec![spec(
            "desk-e1-log",
            PickandsModel::symmetric_logistic(2, 2.5)?,
            &e1_profile,
            1024,
            300,
            30,
            GridSpec::Bivariate { m: 40 },
        )],
        "e2" => {
            let models = [
                ("ind", PickandsModel::symmetric_logistic(3, 1.0)?),
                ("log", PickandsModel::symmetric_logistic(3, 2.0)?),
                ("asl", e2_asymmetric_logistic()?),
            ];
            models
                .into_iter()
                .map(|(tag, m)| {
                    spec(&format!("e2-{tag}"), m, &e2_profile, 512, 300, 30, GridSpec::Random { count: 199 })
                })
                .collect()
        }
        "desk-e2" => vec![spec(
            "desk-e2-log",
            PickandsModel::symmetric_logistic(3, 2.0)?,
            &e2_profile,
            512,
            300,
            30,
            GridSpec::Random { count: 50 },
        )],
        "e3" | "desk-e3" => {
            let (dims, count): (Vec<usize>, usize) = if name == "e3" {
                ((1..=8).map(|k| 5 * k).collect(), 300)
            } else {
                (vec![5, 10], 50)
            };
            let mut out = Vec::new();
            for d in dims {
                for n in [216, 512, 1024] {
                    out.push(spec(
                        &format!("{name}-d{d}-n{n}"),
                        PickandsModel::symmetric_logistic(d, 2.0)?,
                        &MissingnessProfile::complete(d),
                        n,
                        100,
                        100,
                        GridSpec::Random { count },
                    ));
                }
            }
            out
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset \"{other}\"; expected one of {PRESETS:?}"
            )))
        }
    };
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small(seed: u64) -> ExperimentSpec {
        ExperimentSpec {
            name: "smoke".into(),
            model: PickandsModel::symmetric_logistic(2, 2.0).unwrap(),
            profile: MissingnessProfile::independent(vec![0.75, 0.75]).unwrap(),
            n: 50,
            n_iter: 6,
            group_size: 3,
            grid: GridSpec::Bivariate { m: 4 },
            seed,
            lambda: LambdaChoice::Identity,
            estimators: both_estimators(),
        }
    }

    #[test]
    fn smoke_run() {
        let r = run_experiment(&small(1)).unwrap();
        assert_eq!(r.points.len(), 3);
        assert!(r.mise_hybrid.unwrap() >= 0.0);
        assert!(r.points.iter().all(|p| p.e_hybrid.unwrap() >= 0.0));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("w1,w2,nu,E_H,E_Hstar,S_H,S_Hstar,delta_H,delta_Hstar"));
    }

    #[test]
    fn seed_determinism() {
        let a = run_experiment(&small(3)).unwrap();
        let b = run_experiment(&small(3)).unwrap();
        assert_eq!(a, b);
        let c = run_experiment(&small(4)).unwrap();
        assert_ne!(a.errors_hybrid, c.errors_hybrid);
    }

    #[test]
    fn mise_of_exact_variances_is_zero() {
        // groups {1,2,3} and {4,5,6} have variance 1 at both points
        let errors = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 5.0, 5.0, 6.0, 6.0];
        assert_abs_diff_eq!(mise(&errors, 2, 3, &[1.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(mise(&errors, 2, 3, &[2.0, 1.0]).unwrap(), 0.5);
        assert!(mise(&errors, 2, 4, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn variance_and_delta() {
        assert_abs_diff_eq!(empirical_variance(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 5.0 / 3.0);
        assert_eq!(empirical_variance(&[2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(delta_ratio(0.3, 0.3).unwrap(), 0.0);
        assert!(delta_ratio(0.3, 0.0).is_err());
    }

    #[test]
    fn validation() {
        let mut s = small(1);
        s.group_size = 4;
        assert!(run_experiment(&s).is_err());
        let mut s = small(1);
        s.grid = GridSpec::Points {
            points: vec![Weights::bivariate(0.0).unwrap()],
        };
        assert!(matches!(run_experiment(&s), Err(Error::VertexPoint(_))));
    }

    #[test]
    fn preset_settings() {
        let e1 = preset("e1", 0).unwrap();
        assert_eq!(e1.len(), 6);
        for s in &e1 {
            assert_eq!((s.n, s.n_iter, s.group_size), (1024, 300, 30));
            assert_eq!(s.grid.points(2, 0).unwrap().len(), 199);
            assert_eq!(s.profile.marginals(), &[0.75, 0.75]);
        }
        let e3 = preset("e3", 0).unwrap();
        assert_eq!(e3.len(), 24);
        assert!(e3.iter().all(|s| s.n_iter == 100 && s.profile.complete_prob() == 1.0));
        let desk = preset("desk-e1", 0).unwrap();
        assert_eq!(desk[0].grid.points(2, 0).unwrap().len(), 39);
        assert!(preset("e9", 0).is_err());
        for name in PRESETS {
            for s in preset(name, 5).unwrap() {
                s.validate().unwrap();
                let text = serde_json::to_string(&s).unwrap();
                assert_eq!(serde_json::from_str::<ExperimentSpec>(&text).unwrap(), s);
            }
        }
    }
}
