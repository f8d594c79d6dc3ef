//! Finite-dimensional comparators: kernel ridge regression with kernels at
//! every sample, and backward kernel orthogonal matching pursuit (KOMP).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::SampleSet;
use crate::error::{config, Error, Result};
use crate::kernels::KernelSpec;
use crate::model::{DiscreteModel, Term};

fn gram(samples: &SampleSet, kernel: &KernelSpec, w0: f64) -> DMatrix<f64> {
    let n = samples.len();
    DMatrix::from_fn(n, n, |i, j| kernel.eval_unchecked(samples.row(i), samples.row(j), w0))
}

fn model_at_samples(samples: &SampleSet, w0: f64, idx: &[usize], a: &[f64]) -> DiscreteModel {
    DiscreteModel::new(
        idx.iter()
            .zip(a)
            .map(|(&i, &a)| Term {
                a,
                z: samples.row(i).to_vec(),
                w: w0,
            })
            .collect(),
    )
}

/// Kernels at every sample with width `w0`, amplitudes from `(K + reg I) a = y`.
pub fn ridge_fit(samples: &SampleSet, kernel: &KernelSpec, w0: f64, reg: f64) -> Result<DiscreteModel> {
    if !(reg > 0.0 && reg.is_finite()) {
        return config(format!("ridge regularization must be > 0, got {reg}"));
    }
    kernel.check_width(w0)?;
    let k = gram(samples, kernel, w0) + DMatrix::identity(samples.len(), samples.len()) * reg;
    let a = k
        .cholesky()
        .ok_or_else(|| Error::Numeric("ridge system is not positive definite".into()))?
        .solve(&DVector::from_column_slice(samples.y()));
    let idx: Vec<usize> = (0..samples.len()).collect();
    Ok(model_at_samples(samples, w0, &idx, a.as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KompStop {
    /// Keep removing kernels while the training MSE stays at or below this.
    ErrorTarget(f64),
    /// Remove kernels until this many remain.
    KernelCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KompConfig {
    pub stop: KompStop,
    /// Refit the surviving amplitudes by least squares after every removal.
    #[serde(default = "default_refit")]
    pub refit: bool,
    /// Ridge added to the normal equations.
    #[serde(default = "default_komp_ridge")]
    pub ridge: f64,
}

fn default_refit() -> bool {
    true
}

fn default_komp_ridge() -> f64 {
    1e-8
}

impl KompConfig {
    pub fn new(stop: KompStop) -> Self {
        Self {
            stop,
            refit: true,
            ridge: default_komp_ridge(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self.stop {
            KompStop::ErrorTarget(e) if !(e >= 0.0) => config("KOMP error target must be >= 0"),
            KompStop::KernelCount(0) => config("KOMP kernel count must be >= 1"),
            KompStop::KernelCount(k) if k > n => config(format!("KOMP kernel count {k} exceeds the sample count {n}")),
            _ if !(self.ridge >= 0.0) => config("KOMP ridge must be >= 0"),
            _ => Ok(()),
        }
    }
}

/// One backward-elimination run, recorded step by step.
#[derive(Debug, Clone, PartialEq)]
pub struct KompPath {
    /// Sample index removed at each step.
    pub removed: Vec<usize>,
    /// Training MSE before any removal, then after each one.
    pub mse: Vec<f64>,
    /// Survivors and their amplitudes at the stopping point.
    pub survivors: Vec<usize>,
    pub amplitudes: Vec<f64>,
}

/// State of the least-squares problem restricted to the active kernels.
struct Active {
    idx: Vec<usize>,
    /// `(Phi_A^T Phi_A + ridge I)^-1`.
    inv: DMatrix<f64>,
    /// `Phi_A^T y`.
    rhs: DVector<f64>,
    a: DVector<f64>,
}

impl Active {
    fn full(gtg: &DMatrix<f64>, gty: &DVector<f64>, ridge: f64) -> Result<Self> {
        let n = gtg.nrows();
        let idx: Vec<usize> = (0..n).collect();
        Self::build(gtg, gty, idx, ridge)
    }

    fn build(gtg: &DMatrix<f64>, gty: &DVector<f64>, idx: Vec<usize>, ridge: f64) -> Result<Self> {
        let m = idx.len();
        let sub = DMatrix::from_fn(m, m, |r, c| gtg[(idx[r], idx[c])]);
        let rhs = DVector::from_fn(m, |r, _| gty[idx[r]]);
        let mut r = ridge;
        let inv = loop {
            let reg = &sub + DMatrix::identity(m, m) * r;
            if let Some(ch) = reg.cholesky() {
                break ch.inverse();
            }
            r = if r == 0.0 { 1e-12 } else { r * 10.0 };
            if r > 1.0 {
                return Err(Error::Numeric("KOMP normal equations are singular".into()));
            }
        };
        let a = &inv * &rhs;
        Ok(Self { idx, inv, rhs, a })
    }

    /// Removes active position `p` by a rank-one downdate of the inverse.
    fn remove(&mut self, p: usize) {
        let m = self.idx.len();
        let piv = self.inv[(p, p)];
        let col = self.inv.column(p).clone_owned();
        let keep: Vec<usize> = (0..m).filter(|&r| r != p).collect();
        let inv = DMatrix::from_fn(m - 1, m - 1, |r, c| {
            let (i, j) = (keep[r], keep[c]);
            self.inv[(i, j)] - col[i] * col[j] / piv
        });
        self.rhs = self.rhs.clone().remove_row(p);
        self.idx.remove(p);
        self.inv = inv;
        self.a = &self.inv * &self.rhs;
    }
}

fn mse_of(phi: &DMatrix<f64>, y: &DVector<f64>, idx: &[usize], a: &[f64]) -> f64 {
    let n = y.len();
    let mut sse = 0.0;
    for i in 0..n {
        let f: f64 = idx.iter().zip(a).map(|(&j, aj)| phi[(i, j)] * aj).sum();
        sse += (y[i] - f).powi(2);
    }
    sse / n as f64
}

/// Backward elimination starting from a kernel at every sample. Each step
/// removes the kernel whose removal costs least (ties go to the lowest
/// sample index).
pub fn komp_path(samples: &SampleSet, kernel: &KernelSpec, w0: f64, cfg: &KompConfig) -> Result<KompPath> {
    let n = samples.len();
    cfg.validate(n)?;
    kernel.check_width(w0)?;
    let phi = gram(samples, kernel, w0);
    let y = DVector::from_column_slice(samples.y());
    let gtg = phi.transpose() * &phi;
    let gty = phi.transpose() * &y;
    let mut act = Active::full(&gtg, &gty, cfg.ridge)?;
    let fixed_a = act.a.clone();
    let amps = |act: &Active| -> Vec<f64> {
        if cfg.refit {
            act.a.as_slice().to_vec()
        } else {
            act.idx.iter().map(|&i| fixed_a[i]).collect()
        }
    };
    let mut path = KompPath {
        removed: Vec::new(),
        mse: vec![mse_of(&phi, &y, &act.idx, &amps(&act))],
        survivors: Vec::new(),
        amplitudes: Vec::new(),
    };
    let mut since_rebuild = 0;
    while !act.idx.is_empty() {
        if let KompStop::KernelCount(k) = cfg.stop {
            if act.idx.len() <= k {
                break;
            }
        }
        // cost of dropping each active kernel
        let scores: Vec<f64> = (0..act.idx.len())
            .into_par_iter()
            .map(|p| {
                if cfg.refit {
                    act.a[p] * act.a[p] / act.inv[(p, p)]
                } else {
                    let j = act.idx[p];
                    let aj = fixed_a[j];
                    // change in SSE from removing a_j phi_j with the rest fixed
                    let cur: Vec<f64> = act.idx.iter().map(|&i| fixed_a[i]).collect();
                    let mut d = 0.0;
                    for i in 0..n {
                        let f: f64 = act.idx.iter().zip(&cur).map(|(&c, a)| phi[(i, c)] * a).sum();
                        let r = y[i] - f;
                        d += (r + aj * phi[(i, j)]).powi(2) - r * r;
                    }
                    d
                }
            })
            .collect();
        let best = (0..scores.len())
            .min_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(act.idx[a].cmp(&act.idx[b])))
            .expect("active set is nonempty");
        let removed = act.idx[best];
        let mut next_idx = act.idx.clone();
        next_idx.remove(best);
        let next = if cfg.refit && since_rebuild >= 32 {
            since_rebuild = 0;
            Active::build(&gtg, &gty, next_idx, cfg.ridge)?
        } else {
            since_rebuild += 1;
            let mut a = Active {
                idx: act.idx.clone(),
                inv: act.inv.clone(),
                rhs: act.rhs.clone(),
                a: act.a.clone(),
            };
            a.remove(best);
            a
        };
        let err = mse_of(&phi, &y, &next.idx, &amps(&next));
        if let KompStop::ErrorTarget(t) = cfg.stop {
            if err > t {
                break;
            }
        }
        path.removed.push(removed);
        path.mse.push(err);
        act = next;
    }
    path.amplitudes = amps(&act);
    path.survivors = act.idx;
    Ok(path)
}

pub fn komp_fit(samples: &SampleSet, kernel: &KernelSpec, w0: f64, cfg: &KompConfig) -> Result<DiscreteModel> {
    let path = komp_path(samples, kernel, w0, cfg)?;
    Ok(model_at_samples(samples, w0, &path.survivors, &path.amplitudes))
}
