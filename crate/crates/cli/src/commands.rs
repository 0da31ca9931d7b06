use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use pcdag::data::Dataset;
use pcdag::eval::{
    fit, frobenius_diff, kfold_cv_curve, kl_loss, run_benchmark, BenchmarkSetting, FitOptions,
    Method, ReplicateFailure, ReportRow,
};
use pcdag::graph::Dag;
use pcdag::linalg::{from_rows, to_rows};
use pcdag::rng::rng_from_seed;
use pcdag::simgen::{sample_dag_model, sample_data, sample_nondag_model, ErrorDistribution, Model};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

const SEED_ENV: &str = "PCDAG_SEED";

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Draw a model and data from it
    Simulate(SimulateArgs),
    /// Fit one estimator to a CSV data file
    Estimate(EstimateArgs),
    /// Monte-Carlo comparison on a named setting
    Benchmark(BenchmarkArgs),
    /// k-fold cross-validated negative log-likelihood along a grid
    Cv(CvArgs),
    /// Re-run the command recorded in a manifest
    Replay(ReplayArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Dag,
    Nondag,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorArg {
    Gaussian,
    T3,
    Cauchy,
}

impl From<ErrorArg> for ErrorDistribution {
    fn from(e: ErrorArg) -> Self {
        match e {
            ErrorArg::Gaussian => ErrorDistribution::Gaussian,
            ErrorArg::T3 => ErrorDistribution::T3Contaminated,
            ErrorArg::Cauchy => ErrorDistribution::CauchyContaminated,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodArg {
    #[value(name = "pcdag")]
    #[serde(rename = "pcdag")]
    PcDag,
    #[value(name = "glasso")]
    #[serde(rename = "glasso")]
    Glasso,
    #[value(name = "pcdag-robust")]
    #[serde(rename = "pcdag-robust")]
    PcDagRobust,
    #[value(name = "glasso-robust")]
    #[serde(rename = "glasso-robust")]
    GlassoRobust,
    #[value(name = "diagonal")]
    #[serde(rename = "diagonal")]
    Diagonal,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::PcDag => Method::PcDag,
            MethodArg::Glasso => Method::Glasso,
            MethodArg::PcDagRobust => Method::RobustPcDag,
            MethodArg::GlassoRobust => Method::RobustGlasso,
            MethodArg::Diagonal => Method::Diagonal,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    /// Edge probability of the DAG model
    #[arg(long)]
    pub s: Option<f64>,
    /// Off-diagonal density of the non-DAG model
    #[arg(long)]
    pub pi: Option<f64>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub error: ErrorArg,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// Headerless CSV, one observation per row
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = pcdag::dagcov::DEFAULT_N_DAGS)]
    pub n_dags: usize,
    /// Largest conditioning-set size in the PC tests
    #[arg(long)]
    pub max_order: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Truth JSON written by `simulate`; adds losses to the diagnostics
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkArgs {
    /// One of D1-D4, nD1-nD4, R
    #[arg(long)]
    pub setting: String,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<usize>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<MethodArg>>,
    #[arg(long, value_enum)]
    pub error: Option<ErrorArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_dags: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub lambda_len: Option<usize>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CvArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = pcdag::dagcov::DEFAULT_N_DAGS)]
    pub n_dags: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Record written next to every command's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub invocation: Command,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_secs: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Files produced by a command, relative to its output directory.
pub struct Outcome {
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Command {
    pub fn out_dir(&self) -> Option<&Path> {
        match self {
            Command::Simulate(a) => Some(&a.out_dir),
            Command::Estimate(a) => Some(&a.out_dir),
            Command::Benchmark(a) => Some(&a.out_dir),
            Command::Cv(a) => Some(&a.out_dir),
            Command::Replay(_) => None,
        }
    }

    fn set_out_dir(&mut self, dir: PathBuf) {
        match self {
            Command::Simulate(a) => a.out_dir = dir,
            Command::Estimate(a) => a.out_dir = dir,
            Command::Benchmark(a) => a.out_dir = dir,
            Command::Cv(a) => a.out_dir = dir,
            Command::Replay(_) => {}
        }
    }
}

/// Runs `cmd` and writes its manifest.
pub fn execute(cmd: Command) -> CliResult<()> {
    let cmd = match cmd {
        Command::Replay(r) => {
            let text = fs::read_to_string(&r.manifest)
                .map_err(|e| CliError::Input(format!("{}: {e}", r.manifest.display())))?;
            let manifest: RunManifest = serde_json::from_str(&text)?;
            let mut inner = manifest.invocation;
            if matches!(inner, Command::Replay(_)) {
                return Err(CliError::Input("manifest records a replay".into()));
            }
            if let Some(dir) = r.out_dir {
                inner.set_out_dir(dir);
            }
            inner
        }
        other => other,
    };
    let started = std::time::Instant::now();
    let out_dir = cmd.out_dir().expect("replay resolved above").to_path_buf();
    fs::create_dir_all(&out_dir)?;
    let outcome = match &cmd {
        Command::Simulate(a) => simulate(a)?,
        Command::Estimate(a) => estimate(a)?,
        Command::Benchmark(a) => benchmark(a)?,
        Command::Cv(a) => cv(a)?,
        Command::Replay(_) => unreachable!(),
    };
    let manifest = RunManifest {
        tool: "pcdag".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        invocation: cmd,
        seed: outcome.seed,
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(out_dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_data(path: &Path) -> CliResult<Dataset> {
    let file =
        fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(Dataset::read_csv(std::io::BufReader::new(file))?)
}

#[derive(Serialize)]
struct TruthOut<'a> {
    model: ModelArg,
    p: usize,
    n: usize,
    s: Option<f64>,
    pi: Option<f64>,
    error: ErrorArg,
    seed: u64,
    delta: Option<f64>,
    sigma: Vec<Vec<f64>>,
    omega: Vec<Vec<f64>>,
    dag: Option<&'a Dag>,
}

#[derive(Deserialize)]
struct TruthIn {
    sigma: Vec<Vec<f64>>,
    omega: Vec<Vec<f64>>,
}

fn simulate(a: &SimulateArgs) -> CliResult<Outcome> {
    let model = match (a.model, a.s, a.pi) {
        (ModelArg::Dag, Some(s), None) => {
            let mut rng = rng_from_seed(a.seed);
            (Model::Dag(sample_dag_model(a.p, s, &mut rng)?), rng)
        }
        (ModelArg::Nondag, None, Some(pi)) => {
            let mut rng = rng_from_seed(a.seed);
            (Model::NonDag(sample_nondag_model(a.p, pi, &mut rng)?), rng)
        }
        (ModelArg::Dag, _, _) => {
            return Err(CliError::Usage(
                "invalid flags: --model dag needs --s and no --pi".into(),
            ))
        }
        (ModelArg::Nondag, _, _) => {
            return Err(CliError::Usage(
                "invalid flags: --model nondag needs --pi and no --s".into(),
            ))
        }
    };
    let (model, mut rng) = model;
    let data = sample_data(&model, a.n, a.error.into(), &mut rng)?;

    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    fs::write(a.out_dir.join("data.csv"), buf)?;
    let (dag, delta) = match &model {
        Model::Dag(m) => (Some(&m.dag), None),
        Model::NonDag(m) => (None, Some(m.delta).filter(|d| d.is_finite())),
        Model::Covariance(_) => (None, None),
    };
    let truth = TruthOut {
        model: a.model,
        p: a.p,
        n: a.n,
        s: a.s,
        pi: a.pi,
        error: a.error,
        seed: a.seed,
        delta,
        sigma: to_rows(model.sigma()),
        omega: to_rows(&model.truth()?.omega),
        dag,
    };
    write_json(&a.out_dir.join("truth.json"), &truth)?;
    Ok(Outcome {
        seed: a.seed,
        inputs: vec![],
        outputs: vec!["data.csv".into(), "truth.json".into()],
    })
}

fn estimate(a: &EstimateArgs) -> CliResult<Outcome> {
    let method: Method = a.method.into();
    let param = match method {
        Method::PcDag | Method::RobustPcDag => a.alpha.ok_or_else(|| {
            CliError::Usage(format!(
                "missing flag: --method {} needs --alpha",
                method.name()
            ))
        })?,
        Method::Glasso | Method::RobustGlasso => a.lambda.ok_or_else(|| {
            CliError::Usage(format!(
                "missing flag: --method {} needs --lambda",
                method.name()
            ))
        })?,
        Method::Diagonal => 0.0,
    };
    let data = read_data(&a.input)?;
    let opts = FitOptions {
        n_dags: a.n_dags,
        seed: a.seed,
        max_order: a.max_order,
        glasso_tol: a.tol,
        glasso_max_iter: a.max_iter,
        ..FitOptions::default()
    };
    let mut result = fit(method, &data, param, &opts)?;
    let mut inputs = vec![a.input.clone()];
    if let Some(path) = &a.truth {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let t: TruthIn = serde_json::from_str(&text)?;
        let sigma = from_rows(&t.sigma)?;
        let omega = from_rows(&t.omega)?;
        if sigma.shape() != result.sigma.shape() {
            return Err(CliError::Input(format!(
                "truth is {}x{}, data has {} columns",
                sigma.nrows(),
                sigma.ncols(),
                result.p()
            )));
        }
        result.set("kl_loss", kl_loss(&sigma, &result.omega)?);
        result.set("frobenius_sigma", frobenius_diff(&result.sigma, &sigma)?);
        result.set("frobenius_omega", frobenius_diff(&result.omega, &omega)?);
        inputs.push(path.clone());
    }
    write_json(&a.out_dir.join("result.json"), &result)?;
    Ok(Outcome {
        seed: a.seed,
        inputs,
        outputs: vec!["result.json".into()],
    })
}

#[derive(Serialize)]
struct ReportJson<'a> {
    setting: &'a BenchmarkSetting,
    master_seed: u64,
    excluded_replicates: usize,
    rows: &'a [ReportRow],
    failures: &'a [ReplicateFailure],
}

fn benchmark(a: &BenchmarkArgs) -> CliResult<Outcome> {
    let mut setting = BenchmarkSetting::named(&a.setting).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown setting {:?} (expected D1-D4, nD1-nD4 or R)",
            a.setting
        ))
    })?;
    if let Some(r) = a.reps {
        setting.replicates = r;
    }
    if let Some(p) = &a.p_grid {
        setting.p_grid = p.clone();
    }
    if let Some(m) = &a.methods {
        setting.methods = m.iter().map(|&m| m.into()).collect();
    }
    if let Some(e) = a.error {
        setting.error = e.into();
    }
    if let Some(n) = a.n {
        setting.n = n;
    }
    if let Some(k) = a.n_dags {
        setting.n_dags = k;
    }
    if let Some(g) = &a.alpha_grid {
        setting.alpha_grid = g.clone();
    }
    if let Some(l) = a.lambda_len {
        setting.lambda_len = l;
    }
    let report = run_benchmark(&setting, a.seed)?;
    for f in &report.failures {
        log::warn!(
            "p = {} replicate {} excluded: {} failed: {}",
            f.p,
            f.replicate,
            f.method.name(),
            f.error
        );
    }
    fs::write(a.out_dir.join("report.csv"), report.to_csv())?;
    fs::write(a.out_dir.join("replicates.csv"), report.records_csv())?;
    let json = ReportJson {
        setting: &report.setting,
        master_seed: report.master_seed,
        excluded_replicates: report.failures.len(),
        rows: &report.rows,
        failures: &report.failures,
    };
    write_json(&a.out_dir.join("report.json"), &json)?;
    Ok(Outcome {
        seed: a.seed,
        inputs: vec![],
        outputs: vec![
            "report.csv".into(),
            "report.json".into(),
            "replicates.csv".into(),
        ],
    })
}

fn cv(a: &CvArgs) -> CliResult<Outcome> {
    let mut seen = BTreeSet::new();
    let mut grid = Vec::with_capacity(a.grid.len());
    for &g in &a.grid {
        if seen.insert(g.to_bits()) {
            grid.push(g);
        } else {
            log::warn!("duplicate grid value {g} ignored");
        }
    }
    if grid.is_empty() {
        return Err(CliError::Usage("invalid flags: --grid is empty".into()));
    }
    let data = read_data(&a.input)?;
    let opts = FitOptions {
        n_dags: a.n_dags,
        seed: a.seed,
        ..FitOptions::default()
    };
    let curve = kfold_cv_curve(&data, a.folds, a.method.into(), &grid, a.seed, &opts)?;
    let mut out = String::from("param,mean_neg_loglik,mean_nonzero\n");
    for pt in &curve {
        out.push_str(&format!(
            "{:?},{:?},{:?}\n",
            pt.param, pt.mean_neg_loglik, pt.mean_nonzero
        ));
    }
    fs::write(a.out_dir.join("cv.csv"), out)?;
    Ok(Outcome {
        seed: a.seed,
        inputs: vec![a.input.clone()],
        outputs: vec!["cv.csv".into()],
    })
}
