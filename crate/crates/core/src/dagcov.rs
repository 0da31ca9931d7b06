//! DAG-structured covariance and precision estimation.
//!
//! For a DAG with parent sets `pa(i)`, each variable is regressed on its parents:
//! `X_i = β_iᵀ X_pa(i) + ε_i`. Collecting the rows `A_ii = 1`, `A_ij = -β_ij` and
//! the residual variances `D` gives `Σ = A⁻¹ D A⁻ᵀ` and `Σ⁻¹ = Aᵀ D⁻¹ A`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{extend_to_dag, Dag};
use crate::linalg::{require_square, spd_inverse, submatrix, sym_pseudo_inverse, symmetrize};
use crate::pcalg::{pc_cpdag, CiTestContext};
use crate::result::{EstimationResult, Tuning};
use crate::rng::derived_rng;
use crate::robust::{ogk_covariance, OgkConfig};

/// Relative floor on conditional variances: `d_i >= FLOOR * max(diag(Σ_init))`.
pub const VARIANCE_FLOOR: f64 = 1e-8;

pub const DEFAULT_N_DAGS: usize = 10;

/// Divisor-`n` sample covariance around the column means.
pub fn sample_covariance(data: &Dataset) -> DMatrix<f64> {
    let n = data.n();
    let p = data.p();
    if n == 0 {
        return DMatrix::zeros(p, p);
    }
    let centered = data.centered();
    let x = centered.matrix();
    symmetrize(&(x.transpose() * x / n as f64))
}

/// One parent regression.
#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    /// Coefficients, aligned with the parent list passed in.
    pub beta: Vec<f64>,
    pub variance: f64,
    pub used_pseudo_inverse: bool,
    pub floored: bool,
}

/// `β = Σ_{i,pa} Σ_{pa,pa}⁻¹` and `Σ_{i|pa} = Σ_ii - β Σ_{pa,i}`, floored.
pub fn regress_on_parents(sigma: &DMatrix<f64>, i: usize, pa: &[usize]) -> Result<Regression> {
    let p = require_square(sigma, "covariance")?;
    if i >= p || pa.iter().any(|&j| j == i || j >= p) {
        return Err(Error::InvalidArgument(format!(
            "bad regression {i} on {pa:?}"
        )));
    }
    let max_diag = (0..p).map(|k| sigma[(k, k)]).fold(0.0_f64, f64::max);
    let floor = VARIANCE_FLOOR * max_diag;
    if pa.is_empty() {
        let v = sigma[(i, i)];
        return Ok(Regression {
            beta: Vec::new(),
            variance: v.max(floor),
            used_pseudo_inverse: false,
            floored: v < floor,
        });
    }
    let s_pp = submatrix(sigma, pa, pa);
    let (inv, used_pseudo_inverse) = match spd_inverse(&s_pp) {
        Some(inv) => (inv, false),
        None => (sym_pseudo_inverse(&s_pp), true),
    };
    let s_ip = DVector::from_fn(pa.len(), |r, _| sigma[(i, pa[r])]);
    let beta = &inv * &s_ip;
    let v = sigma[(i, i)] - beta.dot(&s_ip);
    Ok(Regression {
        beta: beta.iter().copied().collect(),
        variance: v.max(floor),
        used_pseudo_inverse,
        floored: v < floor,
    })
}

/// Regression matrix `A` and residual variances `d` for a fixed DAG.
#[derive(Debug, Clone)]
pub struct DagLinearSystem {
    pub a: DMatrix<f64>,
    pub d: DVector<f64>,
    order: Vec<usize>,
    pub n_pseudo_inverse: usize,
    pub n_floored: usize,
}

impl DagLinearSystem {
    /// Builds a system from raw parts; `order` must make `a` lower triangular.
    pub fn from_parts(a: DMatrix<f64>, d: DVector<f64>, order: Vec<usize>) -> Result<Self> {
        let p = require_square(&a, "regression matrix")?;
        if d.len() != p || order.len() != p {
            return Err(Error::DimensionMismatch {
                expected: format!("{p}"),
                got: format!("d: {}, order: {}", d.len(), order.len()),
            });
        }
        let mut pos = vec![usize::MAX; p];
        for (r, &v) in order.iter().enumerate() {
            if v >= p || pos[v] != usize::MAX {
                return Err(Error::InvalidArgument("order is not a permutation".into()));
            }
            pos[v] = r;
        }
        for i in 0..p {
            if a[(i, i)] != 1.0 {
                return Err(Error::InvalidArgument(
                    "regression matrix needs a unit diagonal".into(),
                ));
            }
            for j in 0..p {
                if i != j && a[(i, j)] != 0.0 && pos[j] > pos[i] {
                    return Err(Error::InvalidArgument(
                        "regression matrix is not triangular in the given order".into(),
                    ));
                }
            }
        }
        Ok(Self {
            a,
            d,
            order,
            n_pseudo_inverse: 0,
            n_floored: 0,
        })
    }

    pub fn p(&self) -> usize {
        self.d.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

/// Assembles row `i` of `A` from the regression of `i` on `pa(i)`.
pub fn dag_linear_system(sigma_init: &DMatrix<f64>, dag: &Dag) -> Result<DagLinearSystem> {
    let p = require_square(sigma_init, "covariance")?;
    if dag.p() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("{p} nodes"),
            got: format!("{} nodes", dag.p()),
        });
    }
    if (0..p).any(|i| !(sigma_init[(i, i)] > 0.0)) {
        return Err(Error::InvalidArgument(
            "initial covariance needs a positive diagonal".into(),
        ));
    }
    let mut a = DMatrix::identity(p, p);
    let mut d = DVector::zeros(p);
    let mut n_pseudo_inverse = 0;
    let mut n_floored = 0;
    for i in 0..p {
        let pa = dag.parents(i);
        let reg = regress_on_parents(sigma_init, i, &pa)?;
        for (&j, &b) in pa.iter().zip(&reg.beta) {
            a[(i, j)] = -b;
        }
        d[i] = reg.variance;
        n_pseudo_inverse += reg.used_pseudo_inverse as usize;
        n_floored += reg.floored as usize;
    }
    Ok(DagLinearSystem {
        a,
        d,
        order: dag.topological_order().to_vec(),
        n_pseudo_inverse,
        n_floored,
    })
}

/// `(Σ, Σ⁻¹) = (A⁻¹ D A⁻ᵀ, Aᵀ D⁻¹ A)`.
pub fn dag_covariance(sys: &DagLinearSystem) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = sys.p();
    if sys.d.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let dinv = DMatrix::from_diagonal(&sys.d.map(|v| 1.0 / v));
    let omega = symmetrize(&(sys.a.transpose() * dinv * &sys.a));

    // In topological order A is unit lower triangular.
    let ord = &sys.order;
    let l = DMatrix::from_fn(p, p, |r, c| sys.a[(ord[r], ord[c])]);
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::NotPositiveDefinite)?;
    let dp = DMatrix::from_diagonal(&DVector::from_fn(p, |r, _| sys.d[ord[r]]));
    let s_perm = &linv * dp * linv.transpose();
    let mut sigma = DMatrix::zeros(p, p);
    for r in 0..p {
        for c in 0..p {
            sigma[(ord[r], ord[c])] = s_perm[(r, c)];
        }
    }
    Ok((symmetrize(&sigma), omega))
}

/// Plug-in estimate for one DAG.
pub fn dag_estimate(
    sigma_init: &DMatrix<f64>,
    dag: &Dag,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DagLinearSystem)> {
    let sys = dag_linear_system(sigma_init, dag)?;
    let (s, o) = dag_covariance(&sys)?;
    Ok((s, o, sys))
}

/// Initial covariance feeding both the PC tests and the regressions.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialEstimator {
    Mle,
    Ogk(OgkConfig),
}

impl InitialEstimator {
    pub fn estimate(&self, data: &Dataset) -> Result<DMatrix<f64>> {
        match self {
            InitialEstimator::Mle => Ok(sample_covariance(data)),
            InitialEstimator::Ogk(cfg) => Ok(ogk_covariance(data, cfg)?.cov),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcDagConfig {
    pub alpha: f64,
    pub n_dags: usize,
    pub initial: InitialEstimator,
    pub seed: u64,
    pub max_order: Option<usize>,
}

impl PcDagConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            n_dags: DEFAULT_N_DAGS,
            initial: InitialEstimator::Mle,
            seed: 0,
            max_order: None,
        }
    }
}

/// The PC-DAG estimator on raw data.
pub fn pc_dag_estimate(data: &Dataset, cfg: &PcDagConfig) -> Result<EstimationResult> {
    if data.n() < 4 {
        return Err(Error::InvalidArgument(format!(
            "PC-DAG needs n >= 4, got {}",
            data.n()
        )));
    }
    let sigma_init = cfg.initial.estimate(data)?;
    let mut r = pc_dag_from_covariance(&sigma_init, data.n(), cfg)?;
    if matches!(cfg.initial, InitialEstimator::Ogk(_)) {
        r.method = "pcdag-robust".into();
    }
    Ok(r)
}

/// The PC-DAG estimator from a precomputed initial covariance.
///
/// Estimates the CPDAG, draws `n_dags` consistent DAG extensions (stream `k` of
/// `seed` for the `k`-th draw) and averages the plug-in `Σ̂` and `Σ̂⁻¹` entrywise.
pub fn pc_dag_from_covariance(
    sigma_init: &DMatrix<f64>,
    n: usize,
    cfg: &PcDagConfig,
) -> Result<EstimationResult> {
    if cfg.n_dags == 0 {
        return Err(Error::InvalidArgument("n_dags must be >= 1".into()));
    }
    let p = require_square(sigma_init, "covariance")?;
    let ctx = CiTestContext::from_covariance(sigma_init, n, cfg.alpha)?;
    let pc = pc_cpdag(&ctx, cfg.max_order)?;
    let cpdag = &pc.cpdag;

    let draws: Vec<Result<Dag>> = (0..cfg.n_dags)
        .into_par_iter()
        .map(|k| extend_to_dag(cpdag, &mut derived_rng(cfg.seed, k as u64)))
        .collect();
    let failed = draws.iter().filter(|d| d.is_err()).count();
    let mut dags: Vec<Dag> = draws.into_iter().filter_map(Result::ok).collect();
    let fallback = dags.is_empty();
    if fallback {
        dags.push(Dag::empty(p));
    }

    let fits: Vec<(DMatrix<f64>, DMatrix<f64>, DagLinearSystem)> = dags
        .par_iter()
        .map(|d| dag_estimate(sigma_init, d))
        .collect::<Result<_>>()?;
    let k = fits.len() as f64;
    let mut sigma = DMatrix::zeros(p, p);
    let mut omega = DMatrix::zeros(p, p);
    let mut n_pinv = 0;
    let mut n_floor = 0;
    for (s, o, sys) in &fits {
        sigma += s;
        omega += o;
        n_pinv += sys.n_pseudo_inverse;
        n_floor += sys.n_floored;
    }
    sigma /= k;
    omega /= k;

    let mut r = EstimationResult::new("pcdag", sigma, omega, Tuning::Alpha(cfg.alpha));
    r.graph = Some(cpdag.graph().clone());
    r.set("cpdag_edges", cpdag.graph().n_edges() as f64);
    r.set("cpdag_extendable", cpdag.is_extendable() as u8 as f64);
    r.set("ci_tests", pc.diagnostics.n_tests as f64);
    r.set("singular_tests", pc.diagnostics.n_singular as f64);
    r.set("v_structure_conflicts", pc.diagnostics.conflicts as f64);
    r.set(
        "orient_stage",
        match pc.diagnostics.stage {
            crate::pcalg::OrientStage::Direct => 0.0,
            crate::pcalg::OrientStage::ReversedOrder => 1.0,
            crate::pcalg::OrientStage::DroppedConflicts => 2.0,
            crate::pcalg::OrientStage::Invalid => 3.0,
        },
    );
    r.set("dags_averaged", k);
    r.set("failed_extensions", failed as f64);
    r.set("empty_dag_fallback", fallback as u8 as f64);
    r.set("pseudo_inverse_regressions", n_pinv as f64);
    r.set("floored_variances", n_floor as f64);
    Ok(r)
}
