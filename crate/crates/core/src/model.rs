//! Finite kernel expansions `f(x) = sum_j a_j k(x, z_j; w_j)`.

use serde::{Deserialize, Serialize};

use crate::kernels::{gaussian_kernel, sq_dist};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub a: f64,
    pub z: Vec<f64>,
    pub w: f64,
}

/// Discrete Gaussian-kernel model; the JSON form
/// `{"terms":[{"a":..,"z":[..],"w":..}]}` is the saved-model format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModel {
    pub terms: Vec<Term>,
}

impl DiscreteModel {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        predict_discrete(self, x)
    }

    /// Predictions for the rows of a row-major `n x p` buffer.
    pub fn predict_rows(&self, xs: &[f64], dim: usize) -> Vec<f64> {
        xs.chunks_exact(dim).map(|x| self.predict(x)).collect()
    }

    /// Terms whose amplitude exceeds `tol` in magnitude.
    pub fn nonzero_terms(&self, tol: f64) -> usize {
        self.terms.iter().filter(|t| t.a.abs() > tol).count()
    }

    /// True when no two terms share `(z, w)` up to `tol`.
    pub fn is_deduplicated(&self, tol: f64) -> bool {
        for (i, s) in self.terms.iter().enumerate() {
            for t in &self.terms[i + 1..] {
                if sq_dist(&s.z, &t.z).sqrt() <= tol && (s.w - t.w).abs() <= tol {
                    return false;
                }
            }
        }
        true
    }
}

pub fn predict_discrete(model: &DiscreteModel, x: &[f64]) -> f64 {
    model
        .terms
        .iter()
        .map(|t| t.a * gaussian_kernel(x, &t.z, t.w))
        .sum()
}

/// Mean squared residual of `pred` against `y`.
pub fn mse(pred: &[f64], y: &[f64]) -> f64 {
    assert_eq!(pred.len(), y.len());
    if y.is_empty() {
        return 0.0;
    }
    pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
}
