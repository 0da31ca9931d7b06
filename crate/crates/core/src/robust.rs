//! Orthogonalized Gnanadesikan-Kettenring (OGK) covariance.
//!
//! Pairwise covariances come from the identity
//! `cov(x, y) = ¼ [σ(x + y)² - σ(x - y)²]` with a robust scale `σ`, after which
//! the matrix is made positive semi-definite by re-estimating variances along its
//! eigenvectors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::symmetrize;

/// Gaussian consistency factor of the MAD, `1 / Φ⁻¹(3/4)`.
pub const MAD_CONSISTENCY: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OgkConfig {
    pub iterations: usize,
    /// Eigenvalues below `psd_floor * λ_max` are raised to that value.
    pub psd_floor: f64,
}

impl Default for OgkConfig {
    fn default() -> Self {
        Self {
            iterations: 2,
            psd_floor: 1e-8,
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `1.4826 * median(|x - median(x)|)`.
pub fn robust_scale(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "robust scale needs at least 2 values".into(),
        ));
    }
    let mut buf = x.to_vec();
    let med = median(&mut buf);
    for (b, &v) in buf.iter_mut().zip(x) {
        *b = (v - med).abs();
    }
    let mad = median(&mut buf);
    if mad > 0.0 && mad.is_finite() {
        Ok(MAD_CONSISTENCY * mad)
    } else {
        Err(Error::DegenerateScale)
    }
}

/// Gnanadesikan-Kettenring covariance of a pair, standardizing each by its robust scale first.
pub fn gk_pairwise_cov(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}", x.len()),
            got: format!("{}", y.len()),
        });
    }
    let sx = robust_scale(x)?;
    let sy = robust_scale(y)?;
    let plus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a / sx + b / sy).collect();
    let minus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a / sx - b / sy).collect();
    let sp = robust_scale(&plus).unwrap_or(0.0);
    let sm = robust_scale(&minus).unwrap_or(0.0);
    Ok(0.25 * (sp * sp - sm * sm) * sx * sy)
}

#[derive(Debug, Clone)]
pub struct OgkResult {
    pub cov: DMatrix<f64>,
    /// Columns with zero robust scale; they get their classical variance and no covariances.
    pub degenerate_columns: Vec<usize>,
    pub clipped_eigenvalues: usize,
}

fn column(x: &DMatrix<f64>, j: usize) -> Vec<f64> {
    x.column(j).iter().copied().collect()
}

/// GK matrix of already-standardized columns (unit diagonal).
fn gk_matrix(y: &DMatrix<f64>) -> DMatrix<f64> {
    let p = y.ncols();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| column(y, j)).collect();
    let mut u = DMatrix::identity(p, p);
    for a in 0..p {
        for b in (a + 1)..p {
            let plus: Vec<f64> = cols[a].iter().zip(&cols[b]).map(|(s, t)| s + t).collect();
            let minus: Vec<f64> = cols[a].iter().zip(&cols[b]).map(|(s, t)| s - t).collect();
            let sp = robust_scale(&plus).unwrap_or(0.0);
            let sm = robust_scale(&minus).unwrap_or(0.0);
            let v = 0.25 * (sp * sp - sm * sm);
            u[(a, b)] = v;
            u[(b, a)] = v;
        }
    }
    u
}

/// OGK scatter matrix of `data`.
pub fn ogk_covariance(data: &Dataset, cfg: &OgkConfig) -> Result<OgkResult> {
    if cfg.iterations == 0 || !(cfg.psd_floor >= 0.0) {
        return Err(Error::InvalidArgument(
            "OGK needs iterations >= 1 and psd_floor >= 0".into(),
        ));
    }
    let n = data.n();
    let p = data.p();
    if n < 2 {
        return Err(Error::InvalidArgument("OGK needs n >= 2".into()));
    }
    let x = data.matrix();
    let mut degenerate = Vec::new();
    let mut good = Vec::new();
    for j in 0..p {
        match robust_scale(&column(x, j)) {
            Ok(_) => good.push(j),
            Err(_) => degenerate.push(j),
        }
    }

    let mut cov = DMatrix::zeros(p, p);
    let mut clipped = 0;
    if !good.is_empty() {
        let q = good.len();
        let mut z = DMatrix::from_fn(n, q, |i, c| x[(i, good[c])]);
        // accumulated transform: original coordinates = z_final * transform^T
        let mut transform = DMatrix::<f64>::identity(q, q);
        for _ in 0..cfg.iterations {
            let scales: Vec<f64> = (0..q)
                .map(|c| robust_scale(&column(&z, c)).unwrap_or(0.0))
                .collect();
            if scales.iter().any(|&s| s <= 0.0) {
                break;
            }
            let y = DMatrix::from_fn(n, q, |i, c| z[(i, c)] / scales[c]);
            let u = gk_matrix(&y);
            let e = SymmetricEigen::new(u).eigenvectors;
            z = &y * &e;
            transform = transform * DMatrix::from_diagonal(&DVector::from_vec(scales)) * e;
        }
        let gamma: Vec<f64> = (0..q)
            .map(|c| robust_scale(&column(&z, c)).map(|s| s * s).unwrap_or(0.0))
            .collect();
        let v =
            &transform * DMatrix::from_diagonal(&DVector::from_vec(gamma)) * transform.transpose();
        let v = symmetrize(&v);
        let (v, c) = clip_eigenvalues(&v, cfg.psd_floor);
        clipped = c;
        for (r, &a) in good.iter().enumerate() {
            for (t, &b) in good.iter().enumerate() {
                cov[(a, b)] = v[(r, t)];
            }
        }
    }
    for &j in &degenerate {
        let col = column(x, j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let top = (0..p).map(|k| cov[(k, k)]).fold(0.0_f64, f64::max).max(1.0);
        cov[(j, j)] = var.max(cfg.psd_floor * top).max(f64::MIN_POSITIVE);
    }
    Ok(OgkResult {
        cov,
        degenerate_columns: degenerate,
        clipped_eigenvalues: clipped,
    })
}

fn clip_eigenvalues(m: &DMatrix<f64>, floor: f64) -> (DMatrix<f64>, usize) {
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v));
    let lo = floor * top;
    let mut clipped = 0;
    let vals = eig.eigenvalues.map(|v| {
        if v < lo {
            clipped += 1;
            lo
        } else {
            v
        }
    });
    if clipped == 0 {
        return (m.clone(), 0);
    }
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    (symmetrize(&out), clipped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mad_of_three_points() {
        assert!((robust_scale(&[-1.0, 0.0, 1.0]).unwrap() - 1.4826).abs() < 1e-12);
    }

    #[test]
    fn constant_sample_is_degenerate() {
        assert_eq!(robust_scale(&[2.0, 2.0, 2.0]), Err(Error::DegenerateScale));
        assert!(robust_scale(&[1.0]).is_err());
    }

    #[test]
    fn gk_identities() {
        let x = [0.3, -1.2, 2.2, 0.9, -0.4, 1.7, -2.5];
        let s = robust_scale(&x).unwrap();
        assert!((gk_pairwise_cov(&x, &x).unwrap() - s * s).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((gk_pairwise_cov(&x, &neg).unwrap() + s * s).abs() < 1e-12);
        assert!(gk_pairwise_cov(&x, &x[..3]).is_err());
    }

    #[test]
    fn degenerate_column_is_reported() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.5, 5.0]);
        let r = ogk_covariance(&Dataset::new(x), &OgkConfig::default()).unwrap();
        assert_eq!(r.degenerate_columns, vec![1]);
        assert_eq!(r.cov[(0, 1)], 0.0);
        assert!(r.cov[(1, 1)] > 0.0);
    }
}
