//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! with a failure status if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use madogram::clusters::{
    cluster_report, constrained_kmeans, ranking_agreement, KMeansOptions, SyntheticStations, INSUFFICIENT_OVERLAP,
};
use madogram::data::{MaskedMatrix, MissingnessProfile};
use madogram::estimation::{Estimator, LambdaScheme};
use madogram::experiments::{preset, run_experiment, EstimatorKind, ExperimentSpec, GridSpec, LambdaChoice};
use madogram::models::pickands_to_mado;
use madogram::rng::{derive_seed, stream, Domain};
use madogram::samplers::{apply_mcar_mask, sample};
use madogram::simplex::{lattice, sample_uniform};
use madogram::variance::{
    gamma1_sq, gamma_1j, gamma_j_sq, independence, sigma_dplus1_sq, sigma_j1, sigma_j_sq, sigma_jk, sigma_jk2, tau_jk,
};
use madogram::{PickandsModel, Weights};
use rayon::prelude::*;
use validation::{dkw_epsilon, empirical_copula_distance, ks_uniform, refine, square, square_split};

const SEED: u64 = 20_241_016;

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines.push(format!("    [{}] {line}", if ok { "ok" } else { "FAILED" }));
    }

    fn deadline(&mut self, start: Instant, limit: Duration) {
        let used = start.elapsed();
        self.check(used <= limit, format!("runtime {:.1}s <= {}s", used.as_secs_f64(), limit.as_secs()));
    }
}

fn power(u: f64, w: f64) -> f64 {
    u.powf(w)
}

/// Copula of the coordinates `j`, `k` at `(a, b)`.
fn pair_copula(model: &PickandsModel, j: usize, k: usize, a: f64, b: f64) -> f64 {
    let mut u = vec![1.0; model.dim()];
    u[j] = a;
    u[k] = b;
    model.copula_cdf(&u).unwrap()
}

fn copula_at(model: &PickandsModel, w: &[f64], y: f64, j: usize, vj: f64) -> f64 {
    let mut u: Vec<f64> = w.iter().map(|&wi| power(y, wi)).collect();
    u[j] = vj;
    model.copula_cdf(&u).unwrap()
}

const LEVEL: u32 = 5;

/// Largest gap between each variance component and the cubature of its
/// defining double integral at one point; also the largest refinement
/// change of the cubatures.
fn oracle_gaps(model: &PickandsModel, w: &Weights) -> (f64, f64) {
    let d = w.dim();
    let ws = w.as_slice().to_vec();
    let a = model.pickands(w).unwrap();
    let mu: Vec<f64> = (0..d).map(|j| model.mu(w, j).unwrap()).collect();
    let mut gap: f64 = 0.0;
    let mut change: f64 = 0.0;
    let mut record = |lib: f64, c: validation::Cubature| {
        gap = gap.max((lib - c.value).abs());
        change = change.max(c.change);
    };

    record(
        gamma1_sq(a),
        refine(|l| square_split(|x, y| x.min(y).powf(a) - x.powf(a) * y.powf(a), l), LEVEL),
    );
    for j in 0..d {
        let wj = ws[j];
        record(
            sigma_j_sq(wj),
            refine(|l| square_split(|x, y| x.min(y).powf(wj) - x.powf(wj) * y.powf(wj), l), LEVEL),
        );
        record(
            gamma_j_sq(a, mu[j], wj),
            refine(
                |l| {
                    square_split(
                        |x, y| {
                            mu[j] * mu[j] * x.powf(a - wj) * y.powf(a - wj) * (x.min(y).powf(wj) - x.powf(wj) * y.powf(wj))
                        },
                        l,
                    )
                },
                LEVEL,
            ),
        );
        record(
            sigma_j1(model, w, j).unwrap(),
            refine(
                |l| {
                    square_split(
                        |x, y| copula_at(model, &ws, y, j, x.powf(wj).min(y.powf(wj))) - x.powf(wj) * y.powf(a),
                        l,
                    )
                },
                LEVEL,
            ),
        );
        record(
            gamma_1j(model, w, j).unwrap(),
            refine(
                |l| {
                    square_split(
                        |x, y| {
                            let inner = copula_at(model, &ws, x, j, x.powf(wj).min(y.powf(wj))) - x.powf(a) * y.powf(wj);
                            mu[j] * y.powf(a - wj) * inner
                        },
                        l,
                    )
                },
                LEVEL,
            ),
        );
        for k in 0..d {
            if k == j {
                continue;
            }
            let wk = ws[k];
            let cov = |x: f64, y: f64| pair_copula(model, j, k, x.powf(wj), y.powf(wk)) - x.powf(wj) * y.powf(wk);
            record(
                sigma_jk2(model, w, j, k).unwrap(),
                refine(|l| square(|x, y| mu[k] * y.powf(a - wk) * cov(x, y), l), LEVEL),
            );
            if j < k {
                record(sigma_jk(model, w, j, k).unwrap(), refine(|l| square(cov, l), LEVEL));
                record(
                    tau_jk(model, w, j, k).unwrap(),
                    refine(
                        |l| square(|x, y| mu[j] * x.powf(a - wj) * mu[k] * y.powf(a - wk) * cov(x, y), l),
                        LEVEL,
                    ),
                );
            }
        }
    }
    (gap, change)
}

fn fifteen_points(d: usize) -> Vec<Weights> {
    if d == 2 {
        (1..16).map(|k| Weights::bivariate(k as f64 / 16.0).unwrap()).collect()
    } else {
        lattice(3, 7, true)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut out = Outcome::new();
    for d in [2, 3] {
        let points = fifteen_points(d);
        assert_eq!(points.len(), 15);
        for theta in [1.0, 2.0] {
            let model = PickandsModel::symmetric_logistic(d, theta).unwrap();
            let gaps: Vec<(f64, f64)> = points.par_iter().map(|w| oracle_gaps(&model, w)).collect();
            let gap = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
            let change = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
            out.check(
                gap <= 1e-6,
                format!("M1 theta={theta} d={d}: max |closed form - 2-D cubature| = {gap:.2e} (cubature refinement change {change:.1e})"),
            );
        }

        let model = PickandsModel::independence(d).unwrap();
        let profile = if d == 2 {
            MissingnessProfile::independent(vec![0.75, 0.75]).unwrap()
        } else {
            MissingnessProfile::independent(vec![0.9, 0.8, 0.7]).unwrap()
        };
        let mut s_gap: f64 = 0.0;
        let mut zero_gap: f64 = 0.0;
        let mut form_gap: f64 = 0.0;
        let mut direct_gap: f64 = 0.0;
        for w in &points {
            let general = sigma_dplus1_sq(&model, &profile, w).unwrap();
            s_gap = s_gap.max((general - independence::sigma_dplus1_sq(&profile, w)).abs());
            for j in 0..d {
                let wj = w.get(j);
                let s1 = sigma_j1(&model, w, j).unwrap();
                let stated = 0.5 * (1.0 / 3.0 - 1.0 / (1.0 + wj)) + wj / (3.0 * (1.0 + wj) * (3.0 + wj));
                form_gap = form_gap.max((s1 - stated).abs());
                direct_gap = direct_gap.max((s1 - independence::sigma_j1(wj)).abs());
                for k in 0..d {
                    if k != j {
                        zero_gap = zero_gap.max(sigma_jk(&model, w, j, k).unwrap().abs());
                        zero_gap = zero_gap.max(sigma_jk2(&model, w, j, k).unwrap().abs());
                    }
                }
            }
        }
        out.check(s_gap <= 1e-9, format!("independence d={d}: sigma_(d+1)^2 general vs closed form gap {s_gap:.2e}"));
        out.check(zero_gap <= 1e-9, format!("independence d={d}: max |sigma_jk|, |sigma_jk^(2)| = {zero_gap:.2e}"));
        out.check(
            form_gap <= 1e-9,
            format!(
                "independence d={d}: sigma_j^(1) vs (1/2)(1/3 - 1/(1+w_j)) + w_j/(3(1+w_j)(3+w_j)), gap {form_gap:.3e} \
                 (that form is off by 1/((1+w_j)(3+w_j)); direct integration gives w_j/(6(1+w_j)), gap {direct_gap:.2e})"
            ),
        );
    }
    out.deadline(start, Duration::from_secs(120));
    out
}

fn single_point_spec(model: PickandsModel, points: Vec<Weights>, n: usize, n_iter: usize, profile: MissingnessProfile) -> ExperimentSpec {
    ExperimentSpec {
        name: "acceptance".into(),
        model,
        profile,
        n,
        n_iter,
        group_size: n_iter,
        grid: GridSpec::Points { points },
        seed: SEED,
        lambda: LambdaChoice::Identity,
        estimators: vec![EstimatorKind::Hybrid, EstimatorKind::Corrected],
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut out = Outcome::new();
    let profile = MissingnessProfile::independent(vec![0.75, 0.75]).unwrap();
    let points: Vec<Weights> = [0.2, 0.5, 0.8].iter().map(|&t| Weights::bivariate(t).unwrap()).collect();
    let models = [
        ("Husler-Reiss theta=1", PickandsModel::husler_reiss(1.0).unwrap()),
        ("Gumbel theta=2.5", PickandsModel::symmetric_logistic(2, 2.5).unwrap()),
    ];
    for (name, model) in models {
        let spec = single_point_spec(model, points.clone(), 1024, 5000, profile.clone());
        let r = run_experiment(&spec).unwrap();
        for p in &r.points {
            let rh = (p.e_hybrid.unwrap() - p.s_hybrid).abs() / p.s_hybrid;
            let rc = (p.e_corrected.unwrap() - p.s_corrected).abs() / p.s_corrected;
            out.check(
                rh <= 0.10 && rc <= 0.10,
                format!(
                    "{name} w2={:.1}: E^H={:.5} S^H={:.5} ({:.1}%), E^H*={:.5} S^H*={:.5} ({:.1}%)",
                    p.w[1],
                    p.e_hybrid.unwrap(),
                    p.s_hybrid,
                    100.0 * rh,
                    p.e_corrected.unwrap(),
                    p.s_corrected,
                    100.0 * rc
                ),
            );
        }
    }
    out.deadline(start, Duration::from_secs(600));
    out
}

fn criterion_3() -> Outcome {
    let mut out = Outcome::new();
    for name in ["desk-e1", "desk-e2"] {
        let start = Instant::now();
        for spec in preset(name, SEED).unwrap() {
            let r = run_experiment(&spec).unwrap();
            let mh = r.mise_hybrid.unwrap();
            let mc = r.mise_corrected.unwrap();
            out.check(
                mh <= 5e-4 && mc <= 5e-4,
                format!("{}: MISE hybrid {mh:.3e}, corrected {mc:.3e} (<= 5e-4)", r.name),
            );
        }
        out.deadline(start, Duration::from_secs(900));
    }
    out
}

fn random_fixture(index: u64) -> MaskedMatrix {
    let d = 2 + (index % 4) as usize;
    let n = 10 + (index % 7) as usize * 5;
    let model = PickandsModel::symmetric_logistic(d, 1.0 + (index % 3) as f64).unwrap();
    let seed = derive_seed(SEED, Domain::Data, index);
    let data = sample(&model, n, seed).unwrap();
    let p: Vec<f64> = (0..d).map(|j| 0.5 + 0.1 * ((index as usize + j) % 5) as f64).collect();
    loop {
        let masked = apply_mcar_mask(&data, &MissingnessProfile::independent(p.clone()).unwrap(), seed).unwrap();
        if masked.complete_rows() >= 1 {
            return masked;
        }
    }
}

fn criterion_4() -> Outcome {
    let mut out = Outcome::new();
    let mut nu_gap: f64 = 0.0;
    let mut a_gap: f64 = 0.0;
    for index in 0..40 {
        let data = random_fixture(index);
        let d = data.dim();
        let est = Estimator::new(&data).unwrap();
        for j in 0..d {
            let e = Weights::vertex(d, j).unwrap();
            let nu = est.corrected(&e, &LambdaScheme::Identity).unwrap();
            nu_gap = nu_gap.max((nu - (d as f64 - 1.0) / (2.0 * d as f64)).abs());
            let a = est.pickands(&e, &LambdaScheme::Identity).unwrap();
            a_gap = a_gap.max((a.raw - 1.0).abs());
        }
    }
    out.check(nu_gap <= 1e-12, format!("corrected madogram at vertices: max gap to (d-1)/(2d) = {nu_gap:.2e} over 40 fixtures"));
    out.check(a_gap <= 1e-12, format!("Pickands estimate at vertices: max gap to 1 = {a_gap:.2e}"));
    out
}

/// `∫ g_w dC` where the measure of every grid cell comes from the rank
/// copula by inclusion-exclusion.
fn stieltjes_integral(est: &Estimator, w: &Weights) -> f64 {
    let d = est.dim();
    let big_n = est.complete_rows();
    let mut levels: Vec<Vec<f64>> = (0..d)
        .map(|j| (0..big_n).map(|k| est.complete_row(k)[j]).collect())
        .collect();
    for l in &mut levels {
        l.sort_by(f64::total_cmp);
        l.dedup();
    }
    let g = |u: &[f64]| {
        let p: Vec<f64> = u.iter().zip(w.as_slice()).map(|(&x, &wj)| if wj == 0.0 { 0.0 } else { x.powf(1.0 / wj) }).collect();
        p.iter().cloned().fold(0.0, f64::max) - p.iter().sum::<f64>() / d as f64
    };
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let mut mass = 0.0;
        for corner in 0..(1usize << d) {
            let mut u = vec![0.0; d];
            let mut sign = 1.0;
            let mut empty = false;
            for j in 0..d {
                if corner >> j & 1 == 1 {
                    sign = -sign;
                    if idx[j] == 0 {
                        empty = true;
                    } else {
                        u[j] = levels[j][idx[j] - 1];
                    }
                } else {
                    u[j] = levels[j][idx[j]];
                }
            }
            if !empty {
                mass += sign * est.rank_copula(&u).unwrap();
            }
        }
        if mass != 0.0 {
            let u: Vec<f64> = (0..d).map(|j| levels[j][idx[j]]).collect();
            total += mass * g(&u);
        }
        let mut pos = 0;
        loop {
            if pos == d {
                return total;
            }
            idx[pos] += 1;
            if idx[pos] < levels[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn criterion_5() -> Outcome {
    let mut out = Outcome::new();
    let mut gap: f64 = 0.0;
    for index in 0..20 {
        let data = random_fixture(index);
        let est = Estimator::new(&data).unwrap();
        let mut rng = stream(SEED, Domain::Grid, index);
        let w = sample_uniform(&mut rng, data.dim(), 0.01);
        gap = gap.max((est.hybrid(&w).unwrap() - stieltjes_integral(&est, &w)).abs());
    }
    out.check(gap <= 1e-12, format!("hybrid madogram vs integral of g_w against the rank copula: max gap {gap:.2e} over 20 fixtures"));
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn criterion_6() -> Outcome {
    let mut out = Outcome::new();
    let model = PickandsModel::symmetric_logistic(2, 2.0).unwrap();
    let w = Weights::equal(2).unwrap();
    let nu = pickands_to_mado(model.pickands(&w).unwrap(), &w).unwrap();
    for (label, profile) in [
        ("complete", MissingnessProfile::complete(2)),
        ("p_j=0.75", MissingnessProfile::independent(vec![0.75, 0.75]).unwrap()),
    ] {
        let medians: Vec<f64> = [100usize, 400, 1600, 6400]
            .iter()
            .map(|&n| {
                let errs: Vec<f64> = (0..50u64)
                    .into_par_iter()
                    .map(|r| {
                        let seed = derive_seed(SEED + n as u64, Domain::Replicate, r);
                        let data = sample(&model, n, seed).unwrap();
                        let data = apply_mcar_mask(&data, &profile, seed).unwrap();
                        let est = Estimator::new(&data).unwrap();
                        (est.corrected(&w, &LambdaScheme::Identity).unwrap() - nu).abs()
                    })
                    .collect();
                median(errs)
            })
            .collect();
        let decreasing = medians.windows(2).all(|p| p[1] < p[0]);
        out.check(decreasing, format!("{label}: median |nu_hat - nu| at n=100,400,1600,6400: {:?}", medians.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>()));
    }
    out
}

fn criterion_7() -> Outcome {
    let mut out = Outcome::new();
    let runs: Vec<_> = preset("desk-e3", SEED)
        .unwrap()
        .iter()
        .map(|s| run_experiment(s).unwrap())
        .collect();
    for d in [5usize, 10] {
        let meds: Vec<(usize, f64)> = runs
            .iter()
            .filter(|r| r.model.d == d)
            .map(|r| (r.n, r.median_delta_hybrid.unwrap()))
            .collect();
        let at_1024 = meds.iter().find(|m| m.0 == 1024).unwrap().1;
        let decreasing = meds.windows(2).all(|p| p[1].1 < p[0].1);
        out.check(
            at_1024 <= 0.25 && decreasing,
            format!("d={d}: median delta^H at n=216,512,1024: {:.3?}", meds.iter().map(|m| m.1).collect::<Vec<_>>()),
        );
    }
    out
}

fn criterion_8() -> Outcome {
    let mut out = Outcome::new();
    let n = 100_000;
    let eps = dkw_epsilon(n, 1e-3);
    let matrix = [
        ("symmetric logistic d=2 theta=2.5", PickandsModel::symmetric_logistic(2, 2.5).unwrap()),
        ("symmetric logistic d=3 theta=2", PickandsModel::symmetric_logistic(3, 2.0).unwrap()),
        ("independence d=3", PickandsModel::independence(3).unwrap()),
        ("asymmetric logistic (2.5, .1, 1)", PickandsModel::asymmetric_logistic_bivariate(2.5, 0.1, 1.0).unwrap()),
        (
            "asymmetric logistic d=3",
            PickandsModel::asymmetric_logistic_trivariate(
                [0.4, 0.3, 0.1, 0.2],
                [0.1, 0.2, 0.4, 0.3],
                [0.6, 0.1, 0.1, 0.2],
                [1.0 / 0.6, 1.0 / 0.5, 1.0 / 0.8, 1.0 / 0.3],
            )
            .unwrap(),
        ),
        ("Galambos theta=2.5", PickandsModel::asymmetric_negative_logistic(2.5, 1.0, 1.0).unwrap()),
        ("asymmetric negative logistic (10, .5, 1)", PickandsModel::asymmetric_negative_logistic(10.0, 0.5, 1.0).unwrap()),
        ("asymmetric mixed (4/3, -1/3)", PickandsModel::asymmetric_mixed(4.0 / 3.0, -1.0 / 3.0).unwrap()),
        ("Husler-Reiss theta=1", PickandsModel::husler_reiss(1.0).unwrap()),
        ("extremal t (0.8, 0.2)", PickandsModel::student_t(0.8, 0.2).unwrap()),
    ];
    for (i, (name, model)) in matrix.iter().enumerate() {
        let data = sample(model, n, derive_seed(SEED, Domain::Data, i as u64)).unwrap();
        let d = data.dim();
        let rows: Vec<Vec<f64>> = (0..n).map(|r| (0..d).map(|j| data.get(r, j).unwrap()).collect()).collect();
        let ks = (0..d).map(|j| ks_uniform(&data.column(j))).fold(0.0, f64::max);
        let dist = empirical_copula_distance(&rows, 9, |u| model.copula_cdf(u).unwrap());
        out.check(
            ks <= eps && dist <= 0.015,
            format!("{name}: margin KS {ks:.4} (DKW {eps:.4}), copula sup-grid gap {dist:.4}"),
        );
    }
    out
}

fn criterion_9() -> Outcome {
    let mut out = Outcome::new();
    let fixture = SyntheticStations::default();
    let truth_theta = fixture.true_coefficients();
    let k = fixture.thetas.len();
    let mut good = 0;
    let mut balanced = true;
    let mut agreements = Vec::new();
    for seed in 0..20u64 {
        let (table, truth) = fixture.generate(seed).unwrap();
        let clustering = constrained_kmeans(table.coords.as_ref().unwrap(), k, fixture.size, seed, KMeansOptions::default()).unwrap();
        balanced &= (0..k).all(|c| clustering.members(c).len() == fixture.size);
        let report = cluster_report(&table, &clustering.labels, 10).unwrap();
        balanced &= report.retained.iter().all(|r| r.stations.len() == fixture.size);
        let est: Vec<f64> = report.retained.iter().map(|r| r.theta).collect();
        // true coefficient of the majority source cluster of each found cluster
        let tru: Vec<f64> = report
            .retained
            .iter()
            .map(|r| {
                let mut counts = vec![0usize; k];
                for s in &r.stations {
                    counts[truth[table.ids.iter().position(|id| id == s).unwrap()]] += 1;
                }
                let src = (0..k).max_by_key(|&c| counts[c]).unwrap();
                truth_theta[src]
            })
            .collect();
        let agree = ranking_agreement(&est, &tru);
        agreements.push(agree);
        if report.retained.len() == k && agree >= 6 {
            good += 1;
        }
    }
    out.check(balanced, "every cluster holds exactly 7 stations in all 20 runs".into());
    out.check(good >= 16, format!("ranking agreement >= 6/7 in {good}/20 seeds (positions: {agreements:?})"));

    let mut dropped_ok = true;
    for (n_common, retained) in [(9usize, false), (10, true)] {
        let short = SyntheticStations {
            overlap_override: Some((3, n_common)),
            ..SyntheticStations::default()
        };
        let (table, _) = short.generate(5).unwrap();
        let clustering = constrained_kmeans(table.coords.as_ref().unwrap(), k, short.size, 5, KMeansOptions::default()).unwrap();
        let report = cluster_report(&table, &clustering.labels, 10).unwrap();
        let omitted = report.omitted.iter().any(|o| o.overlap == n_common && o.reason == INSUFFICIENT_OVERLAP);
        let kept = report.retained.iter().any(|r| r.overlap == n_common);
        dropped_ok &= if retained { kept && !omitted } else { omitted && !kept };
    }
    out.check(dropped_ok, "cluster with 9 common years dropped as insufficient overlap, 10 retained".into());
    out
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("closed-form variance components vs 2-D cubature", criterion_1),
        ("variance formulas vs Monte Carlo (5000 replicates)", criterion_2),
        ("MISE of the desk presets", criterion_3),
        ("endpoint identities", criterion_4),
        ("integral representation of the hybrid madogram", criterion_5),
        ("consistency trend", criterion_6),
        ("relative variance error trend in d = 5, 10", criterion_7),
        ("sampler fidelity", criterion_8),
        ("equal-size cluster pipeline", criterion_9),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        all &= outcome.pass;
        println!(
            "acceptance criterion {}: {} - {name} ({:.1}s)",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for line in &outcome.lines {
            println!("{line}");
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
