//! ℓ₁-penalized Gaussian likelihood (graphical lasso) with an unpenalized diagonal.
//!
//! Minimizes `-log det Ω + tr(SΩ) + λ Σ_{i≠j} |Ω_ij|` by block coordinate descent
//! over the columns of Ω. Each column update minimizes the objective exactly over
//! that row/column (a lasso solved by coordinate descent), so the objective never
//! increases and Ω stays positive definite. `W = Ω⁻¹` is maintained alongside.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, log_det_spd, submatrix, symmetrize};

const MAX_LASSO_PASSES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlassoConfig {
    pub lambda: f64,
    /// Convergence tolerance, relative to the mean absolute off-diagonal of S.
    pub tol: f64,
    pub max_iter: usize,
}

impl GlassoConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            tol: 1e-4,
            max_iter: 100,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda = {} must be >= 0",
                self.lambda
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be > 0".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GlassoFit {
    pub sigma: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized objective at the start and after every sweep.
    pub objective_trace: Vec<f64>,
}

/// `max_{i<j} |S_ij|`: the smallest λ giving a diagonal solution.
pub fn lambda_max(s: &DMatrix<f64>) -> f64 {
    let p = s.nrows();
    let mut m = 0.0_f64;
    for i in 0..p {
        for j in (i + 1)..p {
            m = m.max(s[(i, j)].abs());
        }
    }
    m
}

/// Geometric grid of `len` values from `lambda_max(s)` down to `ratio * lambda_max(s)`.
pub fn lambda_grid(s: &DMatrix<f64>, len: usize, ratio: f64) -> Vec<f64> {
    let hi = lambda_max(s);
    if len <= 1 {
        return vec![hi];
    }
    (0..len)
        .map(|k| hi * ratio.powf(k as f64 / (len - 1) as f64))
        .collect()
}

/// Scale used by the convergence and optimality tolerances.
pub fn tolerance_scale(s: &DMatrix<f64>) -> f64 {
    let p = s.nrows();
    if p < 2 {
        return s
            .iter()
            .map(|v| v.abs())
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
    }
    let off: f64 = (0..p)
        .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| s[(i, j)].abs())
        .sum::<f64>()
        / (p * (p - 1)) as f64;
    if off > 0.0 {
        off
    } else {
        (0..p).map(|i| s[(i, i)]).sum::<f64>() / p as f64
    }
}

/// Penalized negative log-likelihood (up to constants).
pub fn glasso_objective(s: &DMatrix<f64>, omega: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    let p = s.nrows();
    let mut pen = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                pen += omega[(i, j)].abs();
            }
        }
    }
    Ok(-log_det_spd(omega)? + (s * omega).trace() + lambda * pen)
}

/// Largest violation of the stationarity conditions
/// `S - Σ + λ ∂|Ω|₁ ∋ 0` (off-diagonal) and `S_ii = Σ_ii`.
pub fn glasso_kkt_residual(
    s: &DMatrix<f64>,
    lambda: f64,
    omega: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
) -> f64 {
    let p = s.nrows();
    let mut worst = 0.0_f64;
    for i in 0..p {
        for j in 0..p {
            let g = s[(i, j)] - sigma[(i, j)];
            let v = if i == j {
                g.abs()
            } else if omega[(i, j)] != 0.0 {
                (g + lambda * omega[(i, j)].signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

fn check_input(s: &DMatrix<f64>) -> Result<usize> {
    if !s.is_square() {
        return Err(Error::InvalidArgument("covariance must be square".into()));
    }
    if !is_symmetric(s, 1e-10) {
        return Err(Error::InvalidArgument(
            "covariance must be symmetric".into(),
        ));
    }
    let p = s.nrows();
    if (0..p).any(|i| !(s[(i, i)] > 0.0)) {
        return Err(Error::InvalidArgument(
            "covariance needs a positive diagonal".into(),
        ));
    }
    Ok(p)
}

pub fn glasso_fit(s: &DMatrix<f64>, cfg: &GlassoConfig) -> Result<GlassoFit> {
    glasso_fit_warm(s, cfg, None)
}

/// Fit starting from a previous solution (same `s`, typically a larger λ).
pub fn glasso_fit_warm(
    s: &DMatrix<f64>,
    cfg: &GlassoConfig,
    warm: Option<&GlassoFit>,
) -> Result<GlassoFit> {
    cfg.validate()?;
    let p = check_input(s)?;
    let s = symmetrize(s);
    let (mut omega, mut w) = match warm {
        Some(f) if f.omega.nrows() == p => (f.omega.clone(), f.sigma.clone()),
        _ => (
            DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / s[(i, i)] } else { 0.0 }),
            DMatrix::from_fn(p, p, |i, j| if i == j { s[(i, i)] } else { 0.0 }),
        ),
    };
    let lambda = cfg.lambda;
    let mut trace = vec![glasso_objective(&s, &omega, lambda)?];
    if p == 1 {
        return Ok(GlassoFit {
            sigma: s.clone(),
            omega,
            lambda,
            iterations: 0,
            converged: true,
            objective_trace: trace,
        });
    }

    let scale = tolerance_scale(&s);
    let outer_tol = cfg.tol * scale;
    let inner_tol = 1e-3 * outer_tol;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let w_before = w.clone();
        for j in 0..p {
            update_column(&s, &mut omega, &mut w, j, lambda, inner_tol);
        }
        trace.push(glasso_objective(&s, &omega, lambda)?);
        let mut change = 0.0;
        for i in 0..p {
            for k in 0..p {
                if i != k {
                    change += (w[(i, k)] - w_before[(i, k)]).abs();
                }
            }
        }
        change /= (p * (p - 1)) as f64;
        if change < outer_tol && glasso_kkt_residual(&s, lambda, &omega, &w) <= outer_tol {
            converged = true;
            break;
        }
    }

    Ok(GlassoFit {
        sigma: symmetrize(&w),
        omega: symmetrize(&omega),
        lambda,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Exact minimization over row/column `j` of Ω.
///
/// With `Θ = (Ω_{-j,-j})⁻¹` the Schur complement is optimal at `1/S_jj` and the
/// off-diagonal column `x` solves `min ½ xᵀ(S_jj Θ)x + S_{-j,j}ᵀx + λ|x|₁`.
fn update_column(
    s: &DMatrix<f64>,
    omega: &mut DMatrix<f64>,
    w: &mut DMatrix<f64>,
    j: usize,
    lambda: f64,
    tol: f64,
) {
    let p = s.nrows();
    let idx: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    let m = idx.len();
    let w11 = submatrix(w, &idx, &idx);
    let w12 = DVector::from_fn(m, |r, _| w[(idx[r], j)]);
    let w22 = w[(j, j)];
    let theta = w11 - &w12 * w12.transpose() / w22;
    let s22 = s[(j, j)];
    let c = DVector::from_fn(m, |r, _| s[(idx[r], j)]);
    let mut x = DVector::from_fn(m, |r, _| omega[(idx[r], j)]);

    // grad = s22 Θ x + c, kept up to date
    let mut grad = &theta * &x * s22 + &c;
    for _ in 0..MAX_LASSO_PASSES {
        let mut max_step = 0.0_f64;
        for k in 0..m {
            let qkk = s22 * theta[(k, k)];
            let r = grad[k] - qkk * x[k];
            let new = -soft_threshold(r, lambda) / qkk;
            let delta = new - x[k];
            if delta != 0.0 {
                for t in 0..m {
                    grad[t] += s22 * theta[(t, k)] * delta;
                }
                x[k] = new;
                max_step = max_step.max((delta * qkk).abs());
            }
        }
        if max_step < tol {
            break;
        }
    }

    let tx = &theta * &x;
    for (r, &k) in idx.iter().enumerate() {
        omega[(k, j)] = x[r];
        omega[(j, k)] = x[r];
    }
    omega[(j, j)] = 1.0 / s22 + x.dot(&tx);

    // Block inverse with Schur complement 1/s22.
    for (r, &a) in idx.iter().enumerate() {
        for (t, &b) in idx.iter().enumerate() {
            w[(a, b)] = theta[(r, t)] + s22 * tx[r] * tx[t];
        }
        w[(a, j)] = -s22 * tx[r];
        w[(j, a)] = -s22 * tx[r];
    }
    w[(j, j)] = s22;
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Warm-started fits along a λ grid (processed in the given order, which
/// should be decreasing).
pub fn glasso_path(
    s: &DMatrix<f64>,
    lambdas: &[f64],
    base: &GlassoConfig,
) -> Result<Vec<GlassoFit>> {
    let mut out: Vec<GlassoFit> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = GlassoConfig { lambda, ..*base };
        let fit = glasso_fit_warm(s, &cfg, out.last())?;
        out.push(fit);
    }
    Ok(out)
}
