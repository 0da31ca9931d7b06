//! Shared output type of the covariance estimators.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::graph::PartiallyDirectedGraph;
use crate::linalg::{sym_eigenvalues, to_rows};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    Alpha(f64),
    Lambda(f64),
    None,
}

impl Tuning {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Tuning::Alpha(v) | Tuning::Lambda(v) => Some(v),
            Tuning::None => None,
        }
    }
}

/// Covariance and precision estimates with the graph and tuning that produced them.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationResult {
    pub method: String,
    #[serde(serialize_with = "rows")]
    pub sigma: DMatrix<f64>,
    #[serde(serialize_with = "rows")]
    pub omega: DMatrix<f64>,
    pub graph: Option<PartiallyDirectedGraph>,
    pub tuning: Tuning,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimationResult {
    pub fn new(method: &str, sigma: DMatrix<f64>, omega: DMatrix<f64>, tuning: Tuning) -> Self {
        let mut r = Self {
            method: method.to_string(),
            sigma,
            omega,
            graph: None,
            tuning,
            diagnostics: BTreeMap::new(),
        };
        r.refresh_matrix_diagnostics();
        r
    }

    pub fn p(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.diagnostics.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    fn refresh_matrix_diagnostics(&mut self) {
        let nnz = crate::eval::nonzero_count(&self.omega, crate::eval::NONZERO_TOL);
        self.set("omega_nonzero", nnz as f64);
        let ev = sym_eigenvalues(&self.sigma);
        if let (Some(&lo), Some(&hi)) = (ev.first(), ev.last()) {
            self.set("sigma_min_eigenvalue", lo);
            self.set(
                "sigma_condition_number",
                if lo > 0.0 { hi / lo } else { f64::INFINITY },
            );
        }
        let ev = sym_eigenvalues(&self.omega);
        if let Some(&lo) = ev.first() {
            self.set("omega_min_eigenvalue", lo);
        }
        let p = self.p();
        let dev = (&self.omega * &self.sigma - DMatrix::<f64>::identity(p, p))
            .abs()
            .max();
        self.set("inverse_deviation", dev);
    }
}

fn rows<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    to_rows(m).serialize(s)
}
