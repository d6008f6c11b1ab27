use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use madogram::clusters::{
    cluster_report, constrained_kmeans, ClusterAnalysis, KMeansOptions, StationTable, SyntheticStations,
};
use madogram::data::{MaskedMatrix, MissingnessProfile};
use madogram::estimation::{Estimator, LambdaScheme};
use madogram::experiments::{preset, run_experiment, ExperimentSpec, PRESETS};
use madogram::models::ModelSpec;
use madogram::quadrature::QuadratureSpec;
use madogram::rng::{derive_seed, Domain};
use madogram::samplers::{apply_mcar_mask, sample};
use madogram::simplex::bivariate_grid;
use madogram::variance::{variance_with, VarianceBreakdown};
use madogram::{PickandsModel, Weights};

#[derive(Debug, Parser)]
#[command(name = "madogram", version, about = "Madogram estimation from incomplete extreme-value data")]
pub struct Cli {
    /// Worker threads; outputs do not depend on this value.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a sample from a model, optionally masked.
    Sample(SampleArgs),
    /// Hybrid and corrected madogram estimates from a CSV file.
    Estimate(EstimateArgs),
    /// Asymptotic variances on a simplex grid.
    Variance(VarianceArgs),
    /// Monte Carlo comparison of empirical and asymptotic variances.
    Experiment(ExperimentArgs),
    /// Equal-size clustering of stations and per-cluster extremal
    /// coefficients.
    Clusters(ClustersArgs),
    /// Write the synthetic station fixture.
    Fixture(FixtureArgs),
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Number of bivariate grid points `k/(K+1)`, `k = 1..K`.
    #[arg(long, conflicts_with = "points")]
    grid: Option<usize>,

    /// JSON file with a list of simplex points.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Model JSON file.
    #[arg(long, conflicts_with_all = ["family", "theta", "params"])]
    model: Option<PathBuf>,

    /// Model family, e.g. symmetric-logistic.
    #[arg(long)]
    family: Option<String>,

    #[arg(long, default_value_t = 2)]
    d: usize,

    #[arg(long)]
    theta: Option<f64>,

    /// Further family parameters as a JSON object.
    #[arg(long)]
    params: Option<String>,

    #[arg(long)]
    n: usize,

    #[arg(long)]
    seed: u64,

    /// Missingness profile JSON file; cells are masked when given.
    #[arg(long)]
    profile: Option<PathBuf>,

    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// NA-CSV with one column per variable.
    #[arg(long)]
    input: PathBuf,

    #[command(flatten)]
    grid: GridArgs,

    /// Print the extremal coefficient as JSON instead of the grid table.
    #[arg(long)]
    extremal: bool,

    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VarianceArgs {
    #[arg(long)]
    model: PathBuf,

    #[arg(long)]
    profile: PathBuf,

    #[command(flatten)]
    grid: GridArgs,

    #[arg(long)]
    abs_tol: Option<f64>,

    #[arg(long)]
    rel_tol: Option<f64>,

    #[arg(long)]
    max_splits: Option<usize>,

    /// Write every variance component as JSON instead of CSV.
    #[arg(long)]
    json: bool,

    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Built-in sweep: e1, e2, e3, desk-e1, desk-e2, desk-e3.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,

    /// JSON file with one experiment or a list of them.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Run only the experiment with this name.
    #[arg(long)]
    only: Option<String>,

    #[arg(long)]
    seed: u64,

    #[arg(long)]
    n_iter: Option<usize>,

    #[arg(long)]
    group_size: Option<usize>,

    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ClustersArgs {
    /// Station CSV: `year` column then one column per station.
    #[arg(long)]
    input: PathBuf,

    /// Coordinates CSV with columns `id,x,y`.
    #[arg(long)]
    coords: PathBuf,

    #[arg(long)]
    k: usize,

    #[arg(long)]
    size: usize,

    #[arg(long, default_value_t = 10)]
    min_overlap: usize,

    #[arg(long)]
    seed: u64,

    #[arg(long, default_value_t = 10)]
    restarts: usize,

    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct FixtureArgs {
    #[arg(long)]
    seed: u64,

    #[arg(long, default_value_t = 3000)]
    years: usize,

    #[arg(long, default_value_t = 0.95)]
    p_observed: f64,

    /// Cluster whose common years are forced to `--short-overlap`.
    #[arg(long, requires = "short_overlap")]
    short_cluster: Option<usize>,

    #[arg(long, requires = "short_cluster")]
    short_overlap: Option<usize>,

    #[arg(long)]
    output_dir: PathBuf,
}

/// Failure of a command, mapped to an exit status.
#[derive(Debug)]
pub enum CliError {
    /// Invalid flags, configuration or input schema (exit 2).
    Schema(String),
    /// Numerical or estimation failure (exit 1).
    Compute(String),
    /// File system failure (exit 1).
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Schema(_) => "schema",
            Self::Compute(_) => "computation",
            Self::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Schema(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Schema(m) | Self::Compute(m) | Self::Io(m) => f.write_str(m),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn schema(e: impl fmt::Display) -> CliError {
    CliError::Schema(e.to_string())
}

fn compute(e: impl fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| schema(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text.into_bytes()
}

fn grid_points(args: &GridArgs, d: usize) -> Result<Vec<Weights>> {
    let points = match (&args.grid, &args.points) {
        (Some(k), None) => {
            if d != 2 {
                return Err(schema(format!("--grid needs d = 2 (got d = {d}); use --points")));
            }
            if *k == 0 {
                return Err(schema("--grid must be positive"));
            }
            bivariate_grid(k + 1)
        }
        (None, Some(path)) => read_json::<Vec<Weights>>(path)?,
        _ => return Err(schema("give one of --grid or --points")),
    };
    if let Some(w) = points.iter().find(|w| w.dim() != d) {
        return Err(schema(format!("point {:?} does not have {d} coordinates", w.as_slice())));
    }
    Ok(points)
}

pub fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(schema("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(compute)?;
    }
    match cli.command {
        Command::Sample(a) => run_sample(a),
        Command::Estimate(a) => run_estimate(a),
        Command::Variance(a) => run_variance(a),
        Command::Experiment(a) => run_experiments(a),
        Command::Clusters(a) => run_clusters(a),
        Command::Fixture(a) => run_fixture(a),
    }
}

fn run_sample(a: SampleArgs) -> Result<()> {
    let model: PickandsModel = match (&a.model, &a.family) {
        (Some(path), None) => read_json(path)?,
        (None, Some(family)) => {
            let mut params = match &a.params {
                Some(text) => serde_json::from_str(text).map_err(|e| schema(format!("--params: {e}")))?,
                None => serde_json::Map::new(),
            };
            if let Some(theta) = a.theta {
                params.insert("theta".into(), theta.into());
            }
            let spec = ModelSpec {
                family: family.clone(),
                d: a.d,
                params,
            };
            PickandsModel::try_from(spec).map_err(schema)?
        }
        _ => return Err(schema("give --model or --family")),
    };
    let profile: Option<MissingnessProfile> = a.profile.as_deref().map(read_json).transpose()?;
    if a.n == 0 {
        return Err(schema("--n must be positive"));
    }
    let mut data = sample(&model, a.n, a.seed).map_err(compute)?;
    if let Some(p) = &profile {
        data = apply_mcar_mask(&data, p, derive_seed(a.seed, Domain::Mask, 0)).map_err(schema)?;
    }
    data.write_csv(output(a.output.as_deref())?).map_err(compute)
}

fn run_estimate(a: EstimateArgs) -> Result<()> {
    let data = MaskedMatrix::read_csv(open(&a.input)?).map_err(schema)?;
    let est = Estimator::new(&data).map_err(compute)?;
    let lambda = LambdaScheme::Identity;
    let mut out = output(a.output.as_deref())?;
    if a.extremal {
        let e = est.extremal_coefficient(&lambda).map_err(compute)?;
        let body = serde_json::json!({
            "theta": e.value,
            "clipped": e.clipped,
            "madogram": e.madogram,
            "complete_rows": est.complete_rows(),
        });
        return out.write_all(&json_bytes(&body)).map_err(compute);
    }
    let points = grid_points(&a.grid, data.dim())?;
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("w{j}")).collect();
    header.extend(["nu_H", "nu_Hstar", "A", "clipped", "N"].map(String::from));
    writeln!(out, "{}", header.join(",")).map_err(compute)?;
    for w in &points {
        let e = est.estimate(w, &lambda).map_err(compute)?;
        let mut row: Vec<String> = w.as_slice().iter().map(f64::to_string).collect();
        row.extend([
            e.nu_hybrid.to_string(),
            e.nu_corrected.to_string(),
            e.pickands.to_string(),
            e.clipped.to_string(),
            e.n_complete.to_string(),
        ]);
        writeln!(out, "{}", row.join(",")).map_err(compute)?;
    }
    out.flush().map_err(compute)
}

fn run_variance(a: VarianceArgs) -> Result<()> {
    let model: PickandsModel = read_json(&a.model)?;
    let profile: MissingnessProfile = read_json(&a.profile)?;
    if profile.dim() != model.dim() {
        return Err(schema(format!(
            "profile has {} coordinates, model has {}",
            profile.dim(),
            model.dim()
        )));
    }
    let mut quad = QuadratureSpec::default();
    if let Some(t) = a.abs_tol {
        quad.abs_tol = t;
    }
    if let Some(t) = a.rel_tol {
        quad.rel_tol = t;
    }
    if let Some(s) = a.max_splits {
        quad.max_splits = s;
    }
    if !(quad.abs_tol > 0.0 && quad.rel_tol > 0.0) {
        return Err(schema("tolerances must be positive"));
    }
    let points = grid_points(&a.grid, model.dim())?;
    let rows: Vec<VarianceBreakdown> = {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|w| variance_with(&model, &profile, w, &LambdaScheme::Identity, &quad))
            .collect::<std::result::Result<_, _>>()
            .map_err(compute)?
    };
    let mut out = output(a.output.as_deref())?;
    if a.json {
        return out.write_all(&json_bytes(&rows)).map_err(compute);
    }
    let mut header: Vec<String> = (1..=model.dim()).map(|j| format!("w{j}")).collect();
    header.extend(["A", "sigma_dplus1_sq", "S_H", "S_Hstar", "V_Hstar"].map(String::from));
    writeln!(out, "{}", header.join(",")).map_err(compute)?;
    for r in &rows {
        let mut row: Vec<String> = r.w.iter().map(f64::to_string).collect();
        row.extend([r.pickands, r.sigma_dplus1_sq, r.s_hybrid, r.s_corrected, r.pickands_variance].map(|v| v.to_string()));
        writeln!(out, "{}", row.join(",")).map_err(compute)?;
    }
    out.flush().map_err(compute)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    One(Box<ExperimentSpec>),
    Many(Vec<ExperimentSpec>),
}

#[derive(Serialize)]
struct Runtime {
    name: String,
    seconds: f64,
}

fn run_experiments(a: ExperimentArgs) -> Result<()> {
    let mut specs = match (&a.preset, &a.config) {
        (Some(name), None) => preset(name, a.seed).map_err(|_| {
            schema(format!("unknown preset \"{name}\"; expected one of {}", PRESETS.join(", ")))
        })?,
        (None, Some(path)) => match read_json::<ConfigFile>(path)? {
            ConfigFile::One(s) => vec![*s],
            ConfigFile::Many(v) => v,
        },
        _ => return Err(schema("give --preset or --config")),
    };
    if let Some(only) = &a.only {
        specs.retain(|s| &s.name == only);
        if specs.is_empty() {
            return Err(schema(format!("no experiment named \"{only}\"")));
        }
    }
    for s in &mut specs {
        s.seed = a.seed;
        if let Some(n) = a.n_iter {
            s.n_iter = n;
        }
        if let Some(g) = a.group_size {
            s.group_size = g;
        }
        s.validate().map_err(|e| schema(format!("{}: {e}", s.name)))?;
    }
    let mut names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|p| p[0] == p[1]) {
        return Err(schema("experiment names must be unique"));
    }

    create_dir(&a.output_dir)?;
    let mut runtimes = Vec::new();
    for spec in &specs {
        let start = Instant::now();
        let result = run_experiment(spec).map_err(|e| compute(format!("{}: {e}", spec.name)))?;
        let dir = a.output_dir.join(&spec.name);
        create_dir(&dir)?;
        let mut csv = Vec::new();
        result.write_csv(&mut csv).map_err(compute)?;
        write_file(&dir.join("result.csv"), &csv)?;
        write_file(&dir.join("summary.json"), &json_bytes(&result.summary()))?;
        write_file(&dir.join("spec.json"), &json_bytes(spec))?;
        runtimes.push(Runtime {
            name: spec.name.clone(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    write_file(&a.output_dir.join("runtime.json"), &json_bytes(&runtimes))
}

#[derive(Serialize)]
struct Assignment<'a> {
    station: &'a str,
    cluster: usize,
}

#[derive(Serialize)]
struct ClustersOutput<'a> {
    k: usize,
    size: usize,
    min_overlap: usize,
    seed: u64,
    objective: f64,
    dropped_stations: &'a [String],
    assignments: Vec<Assignment<'a>>,
    #[serde(flatten)]
    analysis: &'a ClusterAnalysis,
}

fn run_clusters(a: ClustersArgs) -> Result<()> {
    let mut table = StationTable::read_csv(open(&a.input)?).map_err(schema)?;
    for id in &table.dropped {
        eprintln!("warning: station {id} has no observation and was dropped");
    }
    table.read_coords(open(&a.coords)?).map_err(schema)?;
    if a.k * a.size != table.n_stations() {
        return Err(schema(format!(
            "{} clusters of size {} cannot hold {} stations",
            a.k,
            a.size,
            table.n_stations()
        )));
    }
    let options = KMeansOptions {
        restarts: a.restarts,
        ..KMeansOptions::default()
    };
    let coords = table.coords.as_ref().expect("coordinates attached");
    let clustering = constrained_kmeans(coords, a.k, a.size, a.seed, options).map_err(compute)?;
    let analysis = cluster_report(&table, &clustering.labels, a.min_overlap).map_err(compute)?;

    create_dir(&a.output_dir)?;
    let body = ClustersOutput {
        k: a.k,
        size: a.size,
        min_overlap: a.min_overlap,
        seed: a.seed,
        objective: clustering.objective,
        dropped_stations: &table.dropped,
        assignments: table
            .ids
            .iter()
            .zip(&clustering.labels)
            .map(|(id, &c)| Assignment { station: id, cluster: c })
            .collect(),
        analysis: &analysis,
    };
    write_file(&a.output_dir.join("clusters.json"), &json_bytes(&body))?;

    let mut csv = String::from("cluster,status,overlap,theta,clipped,madogram,reason,stations\n");
    let mut rows: Vec<(usize, String)> = analysis
        .retained
        .iter()
        .map(|r| {
            (
                r.cluster,
                format!(
                    "{},retained,{},{},{},{},,{}\n",
                    r.cluster,
                    r.overlap,
                    r.theta,
                    r.clipped,
                    r.madogram,
                    r.stations.join(";")
                ),
            )
        })
        .collect();
    rows.extend(analysis.omitted.iter().map(|o| {
        (
            o.cluster,
            format!("{},omitted,{},NA,NA,NA,{},{}\n", o.cluster, o.overlap, o.reason, o.stations.join(";")),
        )
    }));
    rows.sort_by_key(|r| r.0);
    rows.iter().for_each(|r| csv.push_str(&r.1));
    write_file(&a.output_dir.join("clusters.csv"), csv.as_bytes())
}

fn run_fixture(a: FixtureArgs) -> Result<()> {
    let fixture = SyntheticStations {
        n_years: a.years,
        p_observed: a.p_observed,
        overlap_override: a.short_cluster.zip(a.short_overlap),
        ..SyntheticStations::default()
    };
    let (table, truth) = fixture.generate(a.seed).map_err(schema)?;
    create_dir(&a.output_dir)?;
    let mut stations = Vec::new();
    table.write_csv(&mut stations).map_err(compute)?;
    write_file(&a.output_dir.join("stations.csv"), &stations)?;
    let mut coords = Vec::new();
    table.write_coords(&mut coords).map_err(compute)?;
    write_file(&a.output_dir.join("coords.csv"), &coords)?;
    let body = serde_json::json!({
        "seed": a.seed,
        "thetas": fixture.thetas,
        "extremal_coefficients": fixture.true_coefficients(),
        "clusters": table.ids.iter().zip(&truth).map(|(id, c)| serde_json::json!({"station": id, "cluster": c})).collect::<Vec<_>>(),
    });
    write_file(&a.output_dir.join("truth.json"), &json_bytes(&body))
}
