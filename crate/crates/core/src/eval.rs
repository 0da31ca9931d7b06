//! Losses, tuning-parameter selection, cross-validation and the Monte-Carlo
//! benchmark runner.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dagcov::{
    pc_dag_from_covariance, sample_covariance, InitialEstimator, PcDagConfig, DEFAULT_N_DAGS,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glasso::{glasso_path, lambda_grid, GlassoConfig};
use crate::linalg::{log_det_spd, require_square};
use crate::result::{EstimationResult, Tuning};
use crate::rng::{derived_rng, derived_seed, rng_from_seed};
use crate::robust::{ogk_covariance, OgkConfig};
use crate::simgen::{sample_dag_model, sample_data, sample_nondag_model, ErrorDistribution, Model};

/// Entries with `|v| > NONZERO_TOL` count as nonzero.
pub const NONZERO_TOL: f64 = 1e-8;

/// Default significance levels searched for PC-DAG.
pub const DEFAULT_ALPHA_GRID: [f64; 8] = [0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.2, 0.3];
pub const DEFAULT_LAMBDA_LEN: usize = 20;
pub const DEFAULT_LAMBDA_RATIO: f64 = 1e-2;

/// `tr(ΣΩ̂) - log det(ΣΩ̂) - p`.
pub fn kl_loss(sigma_true: &DMatrix<f64>, omega_hat: &DMatrix<f64>) -> Result<f64> {
    let p = require_square(sigma_true, "true covariance")?;
    if omega_hat.shape() != (p, p) {
        return Err(Error::DimensionMismatch {
            expected: format!("{p}x{p}"),
            got: format!("{}x{}", omega_hat.nrows(), omega_hat.ncols()),
        });
    }
    let ld_omega = log_det_spd(omega_hat)?;
    let ld_sigma = log_det_spd(sigma_true)?;
    let tr = (sigma_true * omega_hat).trace();
    Ok((tr - ld_sigma - ld_omega - p as f64).max(0.0))
}

pub fn frobenius_diff(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<f64> {
    if m1.shape() != m2.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", m1.shape()),
            got: format!("{:?}", m2.shape()),
        });
    }
    Ok((m1 - m2).norm())
}

/// Gaussian negative log-likelihood of centered `data` under precision `omega`.
pub fn neg_gauss_loglik(omega: &DMatrix<f64>, data: &Dataset) -> Result<f64> {
    let p = require_square(omega, "precision")?;
    if data.p() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("{p} columns"),
            got: format!("{}", data.p()),
        });
    }
    let n = data.n() as f64;
    let x = data.matrix();
    let s = x.transpose() * x / n;
    let ld = log_det_spd(omega)?;
    Ok(0.5 * n * (-ld + (s * omega).trace()) + 0.5 * n * p as f64 * (2.0 * PI).ln())
}

pub fn nonzero_count(omega: &DMatrix<f64>, tol: f64) -> usize {
    omega.iter().filter(|v| v.abs() > tol).count()
}

/// Estimators available to tuning, CV and the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "pcdag")]
    PcDag,
    #[serde(rename = "glasso")]
    Glasso,
    #[serde(rename = "pcdag-robust")]
    RobustPcDag,
    #[serde(rename = "glasso-robust")]
    RobustGlasso,
    /// Diagonal sample variances; ignores the tuning parameter.
    #[serde(rename = "diagonal")]
    Diagonal,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::PcDag => "pcdag",
            Method::Glasso => "glasso",
            Method::RobustPcDag => "pcdag-robust",
            Method::RobustGlasso => "glasso-robust",
            Method::Diagonal => "diagonal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "pcdag" => Method::PcDag,
            "glasso" => Method::Glasso,
            "pcdag-robust" => Method::RobustPcDag,
            "glasso-robust" => Method::RobustGlasso,
            "diagonal" => Method::Diagonal,
            other => return Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        })
    }

    fn is_robust(&self) -> bool {
        matches!(self, Method::RobustPcDag | Method::RobustGlasso)
    }

    fn is_glasso(&self) -> bool {
        matches!(self, Method::Glasso | Method::RobustGlasso)
    }

    /// Orders parameters from sparsest to densest fit.
    fn sparser_first(&self, a: f64, b: f64) -> std::cmp::Ordering {
        if self.is_glasso() {
            b.total_cmp(&a)
        } else {
            a.total_cmp(&b)
        }
    }
}

/// Settings shared by every fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub n_dags: usize,
    pub seed: u64,
    pub max_order: Option<usize>,
    pub glasso_tol: f64,
    pub glasso_max_iter: usize,
    pub ogk: OgkConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_dags: DEFAULT_N_DAGS,
            seed: 0,
            max_order: None,
            glasso_tol: 1e-4,
            glasso_max_iter: 100,
            ogk: OgkConfig::default(),
        }
    }
}

/// Tuning-parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    Values(Vec<f64>),
    /// Geometric λ grid from `max_{i<j} |S_ij|` of the training initial covariance.
    LambdaPath {
        len: usize,
        ratio: f64,
    },
}

impl Grid {
    pub fn default_for(method: Method) -> Grid {
        if method.is_glasso() {
            Grid::LambdaPath {
                len: DEFAULT_LAMBDA_LEN,
                ratio: DEFAULT_LAMBDA_RATIO,
            }
        } else {
            Grid::Values(DEFAULT_ALPHA_GRID.to_vec())
        }
    }

    fn resolve(&self, s: &DMatrix<f64>) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::LambdaPath { len, ratio } => lambda_grid(s, *len, *ratio),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Grid::Values(v) => v.is_empty(),
            Grid::LambdaPath { len, .. } => *len == 0,
        }
    }
}

fn initial_covariance(method: Method, data: &Dataset, opts: &FitOptions) -> Result<DMatrix<f64>> {
    if method.is_robust() {
        Ok(ogk_covariance(data, &opts.ogk)?.cov)
    } else {
        Ok(sample_covariance(data))
    }
}

/// Fits `method` at every grid value on `data`. Results are aligned with the
/// resolved grid, which is returned alongside.
pub fn fit_grid(
    method: Method,
    data: &Dataset,
    grid: &Grid,
    opts: &FitOptions,
) -> Result<(Vec<f64>, Vec<Result<EstimationResult>>)> {
    let s = initial_covariance(method, data, opts)?;
    let values = grid.resolve(&s);
    let fits = match method {
        Method::Diagonal => values.iter().map(|_| Ok(diagonal_fit(&s))).collect(),
        Method::PcDag | Method::RobustPcDag => values
            .iter()
            .map(|&alpha| {
                let cfg = PcDagConfig {
                    alpha,
                    n_dags: opts.n_dags,
                    initial: InitialEstimator::Mle,
                    seed: opts.seed,
                    max_order: opts.max_order,
                };
                pc_dag_from_covariance(&s, data.n(), &cfg).map(|mut r| {
                    r.method = method.name().into();
                    r
                })
            })
            .collect(),
        Method::Glasso | Method::RobustGlasso => {
            // warm-started path in decreasing λ, mapped back to grid order
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
            let sorted: Vec<f64> = order.iter().map(|&k| values[k]).collect();
            let base = GlassoConfig {
                lambda: 0.0,
                tol: opts.glasso_tol,
                max_iter: opts.glasso_max_iter,
            };
            let mut out: Vec<Option<Result<EstimationResult>>> =
                (0..values.len()).map(|_| None).collect();
            match glasso_path(&s, &sorted, &base) {
                Ok(path) => {
                    for (fit, &k) in path.into_iter().zip(&order) {
                        let mut r = EstimationResult::new(
                            method.name(),
                            fit.sigma,
                            fit.omega,
                            Tuning::Lambda(fit.lambda),
                        );
                        r.set("iterations", fit.iterations as f64);
                        r.set("converged", fit.converged as u8 as f64);
                        out[k] = Some(Ok(r));
                    }
                }
                Err(e) => {
                    for slot in out.iter_mut() {
                        *slot = Some(Err(e.clone()));
                    }
                }
            }
            out.into_iter().map(Option::unwrap).collect()
        }
    };
    Ok((values, fits))
}

/// Single fit at `param`.
pub fn fit(
    method: Method,
    data: &Dataset,
    param: f64,
    opts: &FitOptions,
) -> Result<EstimationResult> {
    let (_, mut fits) = fit_grid(method, data, &Grid::Values(vec![param]), opts)?;
    fits.pop().expect("one grid value")
}

fn diagonal_fit(s: &DMatrix<f64>) -> EstimationResult {
    let p = s.nrows();
    let d = DVector::from_fn(p, |i, _| s[(i, i)].max(f64::MIN_POSITIVE));
    EstimationResult::new(
        "diagonal",
        DMatrix::from_diagonal(&d),
        DMatrix::from_diagonal(&d.map(|v| 1.0 / v)),
        Tuning::None,
    )
}

/// Outcome of validation-set tuning.
#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best_param: f64,
    pub best_index: usize,
    pub grid: Vec<f64>,
    /// Validation negative log-likelihood per grid value, `None` where the fit failed.
    pub scores: Vec<Option<f64>>,
    pub fits: Vec<Result<EstimationResult>>,
}

/// Picks the grid value whose training fit has the smallest validation negative
/// log-likelihood. The validation data are centered with the training means.
/// Ties go to the sparser estimate.
pub fn tune_by_validation(
    train: &Dataset,
    valid: &Dataset,
    method: Method,
    grid: &Grid,
    opts: &FitOptions,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::Tuning("empty grid".into()));
    }
    let (values, fits) = fit_grid(method, train, grid, opts)?;
    let valid_c = valid.centered_by(&train.column_means());
    let scores: Vec<Option<f64>> = fits
        .iter()
        .map(|f| {
            f.as_ref()
                .ok()
                .and_then(|r| neg_gauss_loglik(&r.omega, &valid_c).ok())
        })
        .collect();
    let mut best: Option<usize> = None;
    for (k, sc) in scores.iter().enumerate() {
        let Some(sc) = *sc else { continue };
        best = match best {
            None => Some(k),
            Some(b) => {
                let bs = scores[b].unwrap();
                let tie = (sc - bs).abs() <= 1e-12 * bs.abs().max(1.0);
                if (!tie && sc < bs)
                    || (tie
                        && method.sparser_first(values[k], values[b]) == std::cmp::Ordering::Less)
                {
                    Some(k)
                } else {
                    Some(b)
                }
            }
        };
    }
    let best_index = best.ok_or_else(|| Error::Tuning("every fit on the grid failed".into()))?;
    Ok(TuneResult {
        best_param: values[best_index],
        best_index,
        grid: values,
        scores,
        fits,
    })
}

/// Point of a cross-validation curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvPoint {
    pub param: f64,
    pub mean_neg_loglik: f64,
    pub mean_nonzero: f64,
}

fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!("n = {n} < folds = {k}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// `k`-fold cross-validated negative log-likelihood along a grid.
///
/// Folds are contiguous blocks of a seeded shuffle. Each training split is
/// centered and the same centering is applied to its held-out split.
pub fn kfold_cv_curve(
    data: &Dataset,
    folds: usize,
    method: Method,
    grid: &[f64],
    seed: u64,
    opts: &FitOptions,
) -> Result<Vec<CvPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let assignment = fold_assignment(data.n(), folds, seed)?;
    let n = data.n();
    let per_fold: Vec<Vec<(f64, usize)>> = assignment
        .iter()
        .map(|held| {
            let mut in_held = vec![false; n];
            for &i in held {
                in_held[i] = true;
            }
            let train_rows: Vec<usize> = (0..n).filter(|&i| !in_held[i]).collect();
            let train = data.select_rows(&train_rows);
            let means = train.column_means();
            let train_c = train.centered_by(&means);
            let test_c = data.select_rows(held).centered_by(&means);
            let (_, fits) = fit_grid(method, &train_c, &Grid::Values(grid.to_vec()), opts)?;
            fits.into_iter()
                .map(|f| {
                    let f = f?;
                    Ok((
                        neg_gauss_loglik(&f.omega, &test_c)?,
                        nonzero_count(&f.omega, NONZERO_TOL),
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let k = per_fold.len() as f64;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(g, &param)| CvPoint {
            param,
            mean_neg_loglik: per_fold.iter().map(|f| f[g].0).sum::<f64>() / k,
            mean_nonzero: per_fold.iter().map(|f| f[g].1 as f64).sum::<f64>() / k,
        })
        .collect())
}

/// Mean held-out negative log-likelihood at a single parameter value.
pub fn kfold_cv_loglik(
    data: &Dataset,
    folds: usize,
    method: Method,
    param: f64,
    seed: u64,
    opts: &FitOptions,
) -> Result<f64> {
    Ok(kfold_cv_curve(data, folds, method, &[param], seed, opts)?[0].mean_neg_loglik)
}

/// Generating model family of a benchmark setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dag { s: f64 },
    NonDag { pi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSetting {
    pub name: String,
    pub model: ModelKind,
    pub n: usize,
    pub p_grid: Vec<usize>,
    pub error: ErrorDistribution,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub alpha_grid: Vec<f64>,
    pub lambda_len: usize,
    pub lambda_ratio: f64,
    pub n_dags: usize,
}

pub const FULL_P_GRID: [usize; 9] = [40, 50, 60, 70, 80, 90, 100, 110, 120];

impl BenchmarkSetting {
    fn base(name: &str, model: ModelKind, n: usize) -> Self {
        Self {
            name: name.into(),
            model,
            n,
            p_grid: FULL_P_GRID.to_vec(),
            error: ErrorDistribution::Gaussian,
            replicates: 50,
            methods: vec![Method::Glasso, Method::PcDag],
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            lambda_len: DEFAULT_LAMBDA_LEN,
            lambda_ratio: DEFAULT_LAMBDA_RATIO,
            n_dags: DEFAULT_N_DAGS,
        }
    }

    /// One of D1-D4, nD1-nD4, R.
    pub fn named(name: &str) -> Option<Self> {
        use ModelKind::*;
        Some(match name {
            "D1" => Self::base(name, Dag { s: 0.01 }, 30),
            "D2" => Self::base(name, Dag { s: 0.01 }, 50),
            "D3" => Self::base(name, Dag { s: 0.05 }, 30),
            "D4" => Self::base(name, Dag { s: 0.05 }, 50),
            "nD1" => Self::base(name, NonDag { pi: 0.1 }, 30),
            "nD2" => Self::base(name, NonDag { pi: 0.1 }, 50),
            "nD3" => Self::base(name, NonDag { pi: 0.5 }, 30),
            "nD4" => Self::base(name, NonDag { pi: 0.5 }, 50),
            "R" => Self {
                p_grid: vec![80],
                methods: vec![
                    Method::Glasso,
                    Method::PcDag,
                    Method::RobustGlasso,
                    Method::RobustPcDag,
                ],
                ..Self::base(name, Dag { s: 0.01 }, 50)
            },
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_grid.is_empty()
            || self.methods.is_empty()
            || self.alpha_grid.is_empty()
            || self.lambda_len == 0
        {
            return Err(Error::InvalidArgument(
                "benchmark grids must be non-empty".into(),
            ));
        }
        if self.replicates == 0 || self.n < 4 {
            return Err(Error::InvalidArgument(
                "benchmark needs replicates >= 1 and n >= 4".into(),
            ));
        }
        if matches!(self.model, ModelKind::NonDag { .. })
            && self.error != ErrorDistribution::Gaussian
        {
            return Err(Error::Unsupported(
                "contaminated errors are only defined for DAG models".into(),
            ));
        }
        Ok(())
    }

    fn grid_for(&self, m: Method) -> Grid {
        if m.is_glasso() {
            Grid::LambdaPath {
                len: self.lambda_len,
                ratio: self.lambda_ratio,
            }
        } else if m == Method::Diagonal {
            Grid::Values(vec![0.0])
        } else {
            Grid::Values(self.alpha_grid.clone())
        }
    }
}

/// Losses of one method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub p: usize,
    pub replicate: usize,
    pub seed: u64,
    pub method: Method,
    /// Validation-selected parameter.
    pub param: f64,
    pub kl: f64,
    pub frob_sigma: f64,
    pub frob_omega: f64,
    pub nonzero: usize,
    pub true_nonzero: usize,
    /// KL loss and nonzero count at every grid point (grid order).
    pub grid_params: Vec<f64>,
    pub grid_kl: Vec<f64>,
    pub grid_nonzero: Vec<usize>,
}

/// Aggregated row: mean and standard error of one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub setting: String,
    pub p: usize,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub se: Option<f64>,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateFailure {
    pub p: usize,
    pub replicate: usize,
    pub method: Method,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub setting: BenchmarkSetting,
    pub master_seed: u64,
    pub rows: Vec<ReportRow>,
    pub records: Vec<ReplicateRecord>,
    pub failures: Vec<ReplicateFailure>,
}

/// Mean and standard error (`sd / sqrt(n)`, absent for a single value).
pub fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some((var / n as f64).sqrt()))
}

/// Seed of replicate `r` at dimension `p`.
pub fn replicate_seed(master_seed: u64, p: usize, r: usize) -> u64 {
    derived_seed(derived_seed(master_seed, p as u64), r as u64)
}

fn run_replicate(
    setting: &BenchmarkSetting,
    p: usize,
    r: usize,
    master_seed: u64,
) -> std::result::Result<Vec<ReplicateRecord>, ReplicateFailure> {
    let seed = replicate_seed(master_seed, p, r);
    let fail = |method: Method, e: Error| ReplicateFailure {
        p,
        replicate: r,
        method,
        error: e.to_string(),
    };
    let mut rng = derived_rng(seed, 0);
    let model = match setting.model {
        ModelKind::Dag { s } => sample_dag_model(p, s, &mut rng).map(Model::Dag),
        ModelKind::NonDag { pi } => sample_nondag_model(p, pi, &mut rng).map(Model::NonDag),
    }
    .map_err(|e| fail(setting.methods[0], e))?;
    let train = sample_data(&model, setting.n, setting.error, &mut rng)
        .map_err(|e| fail(setting.methods[0], e))?;
    let valid = sample_data(&model, setting.n, setting.error, &mut rng)
        .map_err(|e| fail(setting.methods[0], e))?;
    let truth = train.truth().expect("simulated data carries truth").clone();
    let true_nonzero = nonzero_count(&truth.omega, NONZERO_TOL);

    let mut out = Vec::with_capacity(setting.methods.len());
    for (mi, &method) in setting.methods.iter().enumerate() {
        let opts = FitOptions {
            n_dags: setting.n_dags,
            seed: derived_seed(seed, 1 + mi as u64),
            ..FitOptions::default()
        };
        let tuned = tune_by_validation(&train, &valid, method, &setting.grid_for(method), &opts)
            .map_err(|e| fail(method, e))?;
        let mut grid_kl = Vec::with_capacity(tuned.grid.len());
        let mut grid_nonzero = Vec::with_capacity(tuned.grid.len());
        for f in &tuned.fits {
            match f {
                Ok(f) => {
                    grid_kl.push(kl_loss(&truth.sigma, &f.omega).unwrap_or(f64::NAN));
                    grid_nonzero.push(nonzero_count(&f.omega, NONZERO_TOL));
                }
                Err(_) => {
                    grid_kl.push(f64::NAN);
                    grid_nonzero.push(0);
                }
            }
        }
        let best = tuned.fits[tuned.best_index]
            .as_ref()
            .expect("best fit succeeded");
        let kl = kl_loss(&truth.sigma, &best.omega).map_err(|e| fail(method, e))?;
        out.push(ReplicateRecord {
            p,
            replicate: r,
            seed,
            method,
            param: tuned.best_param,
            kl,
            frob_sigma: frobenius_diff(&best.sigma, &truth.sigma).map_err(|e| fail(method, e))?,
            frob_omega: frobenius_diff(&best.omega, &truth.omega).map_err(|e| fail(method, e))?,
            nonzero: nonzero_count(&best.omega, NONZERO_TOL),
            true_nonzero,
            grid_params: tuned.grid.clone(),
            grid_kl,
            grid_nonzero,
        });
    }
    Ok(out)
}

/// Runs every replicate of `setting`. Replicates run in parallel on the current
/// rayon pool; results are folded in replicate order, so the report does not
/// depend on scheduling.
pub fn run_benchmark(setting: &BenchmarkSetting, master_seed: u64) -> Result<BenchmarkReport> {
    setting.validate()?;
    let jobs: Vec<(usize, usize)> = setting
        .p_grid
        .iter()
        .flat_map(|&p| (0..setting.replicates).map(move |r| (p, r)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(p, r)| run_replicate(setting, p, r, master_seed))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for res in results {
        match res {
            Ok(recs) => records.extend(recs),
            Err(f) => failures.push(f),
        }
    }
    let rows = aggregate(setting, &records);
    Ok(BenchmarkReport {
        setting: setting.clone(),
        master_seed,
        rows,
        records,
        failures,
    })
}

fn aggregate(setting: &BenchmarkSetting, records: &[ReplicateRecord]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for &p in &setting.p_grid {
        let at_p: Vec<&ReplicateRecord> = records.iter().filter(|r| r.p == p).collect();
        let mut push = |method: &str, metric: &str, vals: &[f64]| {
            let (mean, se) = mean_se(vals);
            rows.push(ReportRow {
                setting: setting.name.clone(),
                p,
                method: method.into(),
                metric: metric.into(),
                mean,
                se,
                replicates: vals.len(),
            });
        };
        let truth: Vec<f64> = at_p
            .iter()
            .filter(|r| r.method == setting.methods[0])
            .map(|r| r.true_nonzero as f64)
            .collect();
        if !truth.is_empty() {
            push("truth", "nonzero", &truth);
        }
        for &m in &setting.methods {
            let recs: Vec<&&ReplicateRecord> = at_p.iter().filter(|r| r.method == m).collect();
            if recs.is_empty() {
                continue;
            }
            let col = |f: &dyn Fn(&ReplicateRecord) -> f64| {
                recs.iter().map(|r| f(r)).collect::<Vec<f64>>()
            };
            push(m.name(), "kl", &col(&|r| r.kl));
            push(m.name(), "frob_sigma", &col(&|r| r.frob_sigma));
            push(m.name(), "frob_omega", &col(&|r| r.frob_omega));
            push(m.name(), "nonzero", &col(&|r| r.nonzero as f64));
            push(m.name(), "param", &col(&|r| r.param));

            // Curve over the grid (by grid index) and its minimum.
            let len = recs[0].grid_kl.len();
            let mut best: Option<(usize, f64)> = None;
            for g in 0..len {
                let kls: Vec<f64> = recs
                    .iter()
                    .map(|r| r.grid_kl[g])
                    .filter(|v| v.is_finite())
                    .collect();
                if kls.len() < recs.len() {
                    continue;
                }
                let (mean, _) = mean_se(&kls);
                if best.is_none_or(|(_, b)| mean < b) {
                    best = Some((g, mean));
                }
            }
            if let Some((g, _)) = best {
                push(m.name(), "best_grid_kl", &col(&|r| r.grid_kl[g]));
                push(
                    m.name(),
                    "best_grid_nonzero",
                    &col(&|r| r.grid_nonzero[g] as f64),
                );
            }
        }
    }
    rows
}

impl BenchmarkReport {
    pub fn row(&self, p: usize, method: &str, metric: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.p == p && r.method == method && r.metric == metric)
    }

    /// `setting,p,method,metric,mean,se,replicates`; an absent SE is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,p,method,metric,mean,se,replicates\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:?},{},{}\n",
                r.setting,
                r.p,
                r.method,
                r.metric,
                r.mean,
                r.se.map(|v| format!("{v:?}")).unwrap_or_default(),
                r.replicates
            ));
        }
        out
    }

    /// Per-replicate losses in tidy form, plus the per-grid-point curve.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("setting,p,replicate,seed,method,grid_index,param,kl,nonzero,selected,frob_sigma,frob_omega\n");
        for r in &self.records {
            for (g, (&param, (&kl, &nz))) in r
                .grid_params
                .iter()
                .zip(r.grid_kl.iter().zip(&r.grid_nonzero))
                .enumerate()
            {
                let selected = param == r.param;
                let (fs, fo) = if selected {
                    (format!("{:?}", r.frob_sigma), format!("{:?}", r.frob_omega))
                } else {
                    (String::new(), String::new())
                };
                out.push_str(&format!(
                    "{},{},{},{},{},{},{:?},{:?},{},{},{},{}\n",
                    self.setting.name,
                    r.p,
                    r.replicate,
                    r.seed,
                    r.method.name(),
                    g,
                    param,
                    kl,
                    nz,
                    selected as u8,
                    fs,
                    fo
                ));
            }
        }
        out
    }
}
