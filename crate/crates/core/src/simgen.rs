//! Synthetic models with known covariance: sparse DAG models, dense/sparse
//! non-DAG precision models, and contaminated-error variants.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroundTruth};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::linalg::{spd_inverse, sym_eigenvalues, symmetrize};

/// Mixture weight of the heavy-tailed component in contaminated errors.
pub const CONTAMINATION: f64 = 0.1;

const DELTA_REL_TOL: f64 = 1e-9;

/// Linear Gaussian DAG model `X_i = Σ_{r<i} B_ir X_r + ε_i` with unit error variances.
#[derive(Debug, Clone)]
pub struct DagModel {
    pub b: DMatrix<f64>,
    pub dag: Dag,
    pub sigma_true: DMatrix<f64>,
    pub omega_true: DMatrix<f64>,
}

impl DagModel {
    /// Builds the model and its exact moments from a strictly lower-triangular `b`.
    pub fn from_weights(b: DMatrix<f64>) -> Result<Self> {
        let p = b.nrows();
        if !b.is_square() || (0..p).any(|i| (i..p).any(|j| b[(i, j)] != 0.0)) {
            return Err(Error::InvalidArgument(
                "B must be strictly lower triangular".into(),
            ));
        }
        let mut arcs = Vec::new();
        for i in 0..p {
            for r in 0..i {
                if b[(i, r)] != 0.0 {
                    arcs.push((r, i));
                }
            }
        }
        let dag = Dag::from_arcs(p, &arcs)?;
        let i_minus_b = DMatrix::identity(p, p) - &b;
        let inv = i_minus_b
            .solve_lower_triangular(&DMatrix::identity(p, p))
            .ok_or(Error::NotPositiveDefinite)?;
        let sigma_true = symmetrize(&(&inv * inv.transpose()));
        let omega_true = symmetrize(&(i_minus_b.transpose() * &i_minus_b));
        Ok(Self {
            b,
            dag,
            sigma_true,
            omega_true,
        })
    }

    pub fn p(&self) -> usize {
        self.b.nrows()
    }
}

/// Draws a DAG model: each lower-triangular entry is nonzero with probability `s`,
/// nonzero weights are Uniform[0.1, 1].
pub fn sample_dag_model<R: Rng + ?Sized>(p: usize, s: f64, rng: &mut R) -> Result<DagModel> {
    sample_dag_model_signed(p, s, false, rng)
}

/// As [`sample_dag_model`]; with `random_signs` each weight is negated with probability ½.
pub fn sample_dag_model_signed<R: Rng + ?Sized>(
    p: usize,
    s: f64,
    random_signs: bool,
    rng: &mut R,
) -> Result<DagModel> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!(
            "DAG model needs p >= 2, got {p}"
        )));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!(
            "sparsity s = {s} not in [0, 1]"
        )));
    }
    let mut b = DMatrix::zeros(p, p);
    for i in 1..p {
        for r in 0..i {
            if rng.random_bool(s) {
                let w = rng.random_range(0.1..=1.0);
                b[(i, r)] = if random_signs && rng.random_bool(0.5) {
                    -w
                } else {
                    w
                };
            }
        }
    }
    DagModel::from_weights(b)
}

/// Non-DAG model `Σ⁻¹ = B + δI` with condition number `p`.
#[derive(Debug, Clone)]
pub struct NonDagModel {
    pub b: DMatrix<f64>,
    pub omega_true: DMatrix<f64>,
    pub sigma_true: DMatrix<f64>,
    pub delta: f64,
    pub pi: f64,
    /// `B = 0`: no δ achieves condition number `p`; `Σ⁻¹ = I` is returned.
    pub degenerate: bool,
}

/// `λ_max / λ_min` of a symmetric matrix, `+∞` when `λ_min <= 0`.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let ev = sym_eigenvalues(m);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Solves `(λ_max + δ) / (λ_min + δ) = target` for `δ > -λ_min`: closed form,
/// with bisection as the fallback when the closed form misses the tolerance.
fn solve_delta(lo: f64, hi: f64, target: f64) -> f64 {
    let closed = (hi - target * lo) / (target - 1.0);
    let cond = |d: f64| (hi + d) / (lo + d);
    if lo + closed > 0.0 && ((cond(closed) - target) / target).abs() <= DELTA_REL_TOL {
        return closed;
    }
    bisect_delta(lo, hi, target)
}

/// `cond(δ)` is decreasing on `(-λ_min, ∞)`.
fn bisect_delta(lo: f64, hi: f64, target: f64) -> f64 {
    let cond = |d: f64| (hi + d) / (lo + d);
    let mut a = -lo + f64::EPSILON * (1.0 + lo.abs());
    let mut b = (hi - lo).abs() + 1.0;
    while cond(b) > target {
        b *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if cond(mid) > target {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a) <= DELTA_REL_TOL * 1e-3 * b.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (a + b)
}

pub fn sample_nondag_model<R: Rng + ?Sized>(p: usize, pi: f64, rng: &mut R) -> Result<NonDagModel> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!(
            "non-DAG model needs p >= 2, got {p}"
        )));
    }
    if !(0.0..=1.0).contains(&pi) {
        return Err(Error::InvalidArgument(format!("pi = {pi} not in [0, 1]")));
    }
    let mut b = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random_bool(pi) {
                b[(i, j)] = 0.5;
                b[(j, i)] = 0.5;
            }
        }
    }
    nondag_from_b(b, pi)
}

fn nondag_from_b(b: DMatrix<f64>, pi: f64) -> Result<NonDagModel> {
    let p = b.nrows();
    let ev = sym_eigenvalues(&b);
    let (lo, hi) = (ev[0], ev[p - 1]);
    if hi - lo <= 1e-12 {
        let id = DMatrix::identity(p, p);
        return Ok(NonDagModel {
            b,
            omega_true: id.clone(),
            sigma_true: id,
            delta: f64::NAN,
            pi,
            degenerate: true,
        });
    }
    let delta = solve_delta(lo, hi, p as f64);
    let omega_true = &b + DMatrix::identity(p, p) * delta;
    let sigma_true = symmetrize(&spd_inverse(&omega_true).ok_or(Error::NotPositiveDefinite)?);
    Ok(NonDagModel {
        b,
        omega_true,
        sigma_true,
        delta,
        pi,
        degenerate: false,
    })
}

/// Distribution of each error coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorDistribution {
    Gaussian,
    /// `0.9 N(0,1) + 0.1 t_3`
    T3Contaminated,
    /// `0.9 N(0,1) + 0.1 Cauchy(0,1)`
    CauchyContaminated,
}

impl ErrorDistribution {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ErrorDistribution::Gaussian => StandardNormal.sample(rng),
            ErrorDistribution::T3Contaminated => {
                if rng.random_bool(CONTAMINATION) {
                    StudentT::new(3.0).unwrap().sample(rng)
                } else {
                    StandardNormal.sample(rng)
                }
            }
            ErrorDistribution::CauchyContaminated => {
                if rng.random_bool(CONTAMINATION) {
                    Cauchy::new(0.0, 1.0).unwrap().sample(rng)
                } else {
                    StandardNormal.sample(rng)
                }
            }
        }
    }
}

/// A generating model.
#[derive(Debug, Clone)]
pub enum Model {
    Dag(DagModel),
    NonDag(NonDagModel),
    Covariance(DMatrix<f64>),
}

impl Model {
    pub fn p(&self) -> usize {
        match self {
            Model::Dag(m) => m.p(),
            Model::NonDag(m) => m.b.nrows(),
            Model::Covariance(s) => s.nrows(),
        }
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        match self {
            Model::Dag(m) => &m.sigma_true,
            Model::NonDag(m) => &m.sigma_true,
            Model::Covariance(s) => s,
        }
    }

    pub fn truth(&self) -> Result<GroundTruth> {
        Ok(match self {
            Model::Dag(m) => GroundTruth {
                sigma: m.sigma_true.clone(),
                omega: m.omega_true.clone(),
                dag: Some(m.dag.clone()),
            },
            Model::NonDag(m) => GroundTruth {
                sigma: m.sigma_true.clone(),
                omega: m.omega_true.clone(),
                dag: None,
            },
            Model::Covariance(s) => GroundTruth {
                sigma: s.clone(),
                omega: spd_inverse(s).ok_or(Error::NotPositiveDefinite)?,
                dag: None,
            },
        })
    }
}

/// Draws `n` observations. DAG models run the structural recursion with errors
/// from `err`; other models are sampled as `N(0, Σ)` and require Gaussian errors.
pub fn sample_data<R: Rng + ?Sized>(
    model: &Model,
    n: usize,
    err: ErrorDistribution,
    rng: &mut R,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let p = model.p();
    let x = match model {
        Model::Dag(m) => {
            let mut x = DMatrix::zeros(n, p);
            for r in 0..n {
                for i in 0..p {
                    let mut v = err.draw(rng);
                    for k in 0..i {
                        let w = m.b[(i, k)];
                        if w != 0.0 {
                            v += w * x[(r, k)];
                        }
                    }
                    x[(r, i)] = v;
                }
            }
            x
        }
        _ => {
            if err != ErrorDistribution::Gaussian {
                return Err(Error::Unsupported(
                    "contaminated errors are only defined for DAG models".into(),
                ));
            }
            let l = model
                .sigma()
                .clone()
                .cholesky()
                .ok_or(Error::NotPositiveDefinite)?
                .l();
            let mut x = DMatrix::zeros(n, p);
            for r in 0..n {
                let z = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
                let row = &l * z;
                for i in 0..p {
                    x[(r, i)] = row[i];
                }
            }
            x
        }
    };
    Ok(Dataset::with_truth(x, model.truth()?))
}
