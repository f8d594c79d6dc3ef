//! Reproducible synthetic experiments. Every repetition derives its seed as
//! `seed + rep`, repetitions run concurrently and results are collected in
//! repetition order, so outputs depend only on the configuration and seed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{komp_fit, ridge_fit, KompConfig, KompStop};
use crate::datasets::{
    gen_mixed_gauss, gen_remark1, gen_sin_squared, remark1_signal, sample_signal, sin_squared_test, MixedGauss,
    SampleSet, DEFAULT_NOISE_SD, REMARK1_CENTER,
};
use crate::dual_field::{Integrator, ProblemVariant, QuadratureSpec};
use crate::error::{config, Error, Result};
use crate::kernels::{DomainBox, KernelSpec};
use crate::losses::{Loss, LossKind, DEFAULT_REGRESSION_EPSILON};
use crate::model::{mse, DiscreteModel};
use crate::pipeline::{fit_extract, FitOptions};
use crate::solver::{dual_objective, max_constraint_violation, DualProblem, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    GridVsPii2,
    PiiFull,
    KompSparsity,
    SampleStability,
    Remark1,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::GridVsPii2,
        ExperimentId::PiiFull,
        ExperimentId::KompSparsity,
        ExperimentId::SampleStability,
        ExperimentId::Remark1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::GridVsPii2 => "grid_vs_pii2",
            ExperimentId::PiiFull => "pii_full",
            ExperimentId::KompSparsity => "komp_sparsity",
            ExperimentId::SampleStability => "sample_stability",
            ExperimentId::Remark1 => "remark1",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment id {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Reduced repetition counts that finish in minutes.
    Desk,
    /// Full repetition counts (1000) and the complete sample-size sweep.
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => config(format!("unknown scale {s:?}")),
        }
    }
}

/// Seed of the held-out set drawn for repetition seed `s`.
pub fn test_seed(s: u64) -> u64 {
    s.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x5851_F42D_4C95_7F2D)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn regression_loss(epsilon: f64, y: &[f64]) -> Result<Loss> {
    Loss::for_labels(LossKind::QuadraticEps, epsilon, y)
}

fn test_mse(model: &DiscreteModel, test: &SampleSet) -> f64 {
    mse(&model.predict_rows(test.x(), test.dim()), test.y())
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Value of `column` in the first row whose first cell equals `key`.
    pub fn lookup(&self, key: &str, column: &str) -> Option<&str> {
        let c = self.columns.iter().position(|h| h == column)?;
        self.rows.iter().find(|r| r[0] == key).map(|r| r[c].as_str())
    }
}

fn cells<I: IntoIterator<Item = T>, T: ToString>(it: I) -> Vec<String> {
    it.into_iter().map(|v| v.to_string()).collect()
}

/// Per-repetition rows, a summary and an optional histogram table.
#[derive(Debug, Clone)]
pub struct Report {
    pub id: ExperimentId,
    pub reps: Table,
    pub summary: Table,
    pub hist: Option<Table>,
}

impl Report {
    /// Writes `<id>_reps.csv`, `<id>_summary.csv` and `<id>_hist.csv` into
    /// `outdir`, returning the written paths.
    pub fn write(&self, outdir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = outdir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let mut put = |suffix: &str, t: &Table| -> Result<()> {
            let p = dir.join(format!("{}_{suffix}.csv", self.id));
            t.write(&p)?;
            out.push(p);
            Ok(())
        };
        put("reps", &self.reps)?;
        put("summary", &self.summary)?;
        if let Some(h) = &self.hist {
            put("hist", h)?;
        }
        Ok(out)
    }
}

fn count_hist(name: &str, values: impl IntoIterator<Item = usize>, t: &mut Table) {
    let mut counts = std::collections::BTreeMap::new();
    for v in values {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    for (k, c) in counts {
        t.push(cells([name.to_string(), k.to_string(), c.to_string()]));
    }
}

/// Width histogram with bins of 0.05.
fn width_hist(name: &str, widths: impl IntoIterator<Item = f64>, t: &mut Table) {
    let mut counts = std::collections::BTreeMap::new();
    for w in widths {
        *counts.entry((w / 0.05).floor() as i64).or_insert(0usize) += 1;
    }
    for (b, c) in counts {
        t.push(cells([name.to_string(), format!("{:.2}", b as f64 * 0.05), c.to_string()]));
    }
}

fn solver(gamma: f64, eta_lambda: f64, eta_mu: f64, iters: usize, quadrature: QuadratureSpec) -> SolverConfig {
    SolverConfig {
        gamma,
        eta_lambda,
        eta_mu,
        iters,
        quadrature,
        trace_every: 0,
        ..SolverConfig::default()
    }
}

// ---------------------------------------------------------------------------
// Single-kernel recovery

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Remark1Config {
    pub n: usize,
    /// Held-out evaluation grid size on `[0, 5]`.
    pub test_points: usize,
    pub epsilon: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    pub options: FitOptions,
    /// Ridge strengths tried for the baseline, strongest first.
    pub ridge_regs: Vec<f64>,
    /// Test MSE the baseline must reach.
    pub target_mse: f64,
    /// Coefficients with `|a|` above this count as nonzero.
    pub nonzero_tol: f64,
}

impl Remark1Config {
    pub fn desk() -> Self {
        let mut s = solver(1.0, 0.02, 3.0, 5000, QuadratureSpec::new(2048, 1));
        s.mu_init = 10.0;
        Self {
            n: 20,
            test_points: 1000,
            epsilon: 1e-4,
            w_lo: 0.5,
            w_hi: 1.5,
            options: FitOptions {
                solver: s,
                ..FitOptions::default()
            },
            ridge_regs: (1..=12).map(|e| 10f64.powi(-e)).collect(),
            target_mse: 1e-3,
            nonzero_tol: 1e-3,
        }
    }

    pub fn for_scale(_scale: Scale) -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone)]
pub struct Remark1Result {
    pub model: DiscreteModel,
    pub kernel_count: usize,
    pub center_error: f64,
    pub test_mse: f64,
    pub primal: f64,
    pub dual: f64,
    pub max_violation: f64,
    /// Nonzero ridge coefficients at the sparsest strength reaching the target.
    pub ridge_nonzero: usize,
    pub ridge_test_mse: f64,
    pub ridge_reg: f64,
}

impl Remark1Result {
    pub fn gap(&self) -> f64 {
        self.primal - self.dual
    }
}

pub fn remark1(cfg: &Remark1Config, seed: u64) -> Result<Remark1Result> {
    let s = gen_remark1(cfg.n, seed)?;
    let kernel = KernelSpec::gaussian(cfg.w_lo, cfg.w_hi, s.domain().clone())?;
    let loss = regression_loss(cfg.epsilon, s.y())?;
    let variant = ProblemVariant::FixedWidth { w0: 1.0 };
    let fitted = fit_extract(&s, &kernel, &loss, &variant, &cfg.options)?;
    let spec = cfg.options.solver.quadrature;
    let problem = DualProblem::new(s.clone(), kernel.clone(), loss, variant, cfg.options.solver.gamma)?;
    let dual = dual_objective(&fitted.fit.state, &problem, spec)?;
    let primal = fitted.fit.field.primal_objective(spec)?;
    let max_violation = max_constraint_violation(&fitted.fit.field, &loss, &Integrator::Quadrature(spec))?;

    let grid: Vec<f64> = (0..cfg.test_points)
        .map(|i| 5.0 * (i as f64 + 0.5) / cfg.test_points as f64)
        .collect();
    let truth: Vec<f64> = grid.iter().map(|&x| remark1_signal(x)).collect();
    let test = SampleSet::new(1, grid, truth, DomainBox::cube(1, 0.0, 5.0)?)?;
    let model = fitted.model;
    let center_error = model
        .terms
        .iter()
        .map(|t| (t.z[0] - REMARK1_CENTER).abs())
        .fold(f64::INFINITY, f64::min);

    let mut ridge_best: Option<(usize, f64, f64)> = None;
    let mut ridge_closest = (s.len(), f64::INFINITY, f64::NAN);
    for &reg in &cfg.ridge_regs {
        let r = ridge_fit(&s, &kernel, 1.0, reg)?;
        let e = test_mse(&r, &test);
        let nz = r.nonzero_terms(cfg.nonzero_tol);
        if e < ridge_closest.1 {
            ridge_closest = (nz, e, reg);
        }
        if e < cfg.target_mse && ridge_best.is_none_or(|b| nz < b.0) {
            ridge_best = Some((nz, e, reg));
        }
    }
    let (ridge_nonzero, ridge_test_mse, ridge_reg) = ridge_best.unwrap_or(ridge_closest);
    Ok(Remark1Result {
        kernel_count: model.len(),
        center_error,
        test_mse: test_mse(&model, &test),
        model,
        primal,
        dual,
        max_violation,
        ridge_nonzero,
        ridge_test_mse,
        ridge_reg,
    })
}

fn remark1_report(r: &Remark1Result) -> Report {
    let mut reps = Table::new(&["term", "a", "z", "w"]);
    for (j, t) in r.model.terms.iter().enumerate() {
        reps.push(cells([j.to_string(), t.a.to_string(), t.z[0].to_string(), t.w.to_string()]));
    }
    let mut summary = Table::new(&["metric", "value"]);
    for (k, v) in [
        ("kernel_count", r.kernel_count as f64),
        ("center_error", r.center_error),
        ("test_mse", r.test_mse),
        ("primal", r.primal),
        ("dual", r.dual),
        ("gap", r.gap()),
        ("max_violation", r.max_violation),
        ("ridge_nonzero", r.ridge_nonzero as f64),
        ("ridge_test_mse", r.ridge_test_mse),
        ("ridge_reg", r.ridge_reg),
    ] {
        summary.push(cells([k.to_string(), v.to_string()]));
    }
    Report {
        id: ExperimentId::Remark1,
        reps,
        summary,
        hist: None,
    }
}

// ---------------------------------------------------------------------------
// Width grid search versus candidate-center search

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub reps: usize,
    pub m: usize,
    pub w0: f64,
    pub n: usize,
    pub n_test: usize,
    pub noise_sd: f64,
    pub epsilon: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    /// Baseline widths.
    pub grid: Vec<f64>,
    pub ridge_reg: f64,
    pub options: FitOptions,
}

impl GridConfig {
    pub fn desk() -> Self {
        Self {
            reps: 50,
            m: 10,
            w0: 0.453,
            n: 100,
            n_test: 1000,
            noise_sd: DEFAULT_NOISE_SD,
            epsilon: DEFAULT_REGRESSION_EPSILON,
            w_lo: 0.1,
            w_hi: 1.0,
            grid: (1..=10).map(|i| i as f64 / 10.0).collect(),
            ridge_reg: 1e-3,
            options: FitOptions {
                solver: solver(10.0, 3e-4, 1.0, 10_000, QuadratureSpec::new(1, 32)),
                ..FitOptions::default()
            },
        }
    }

    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::desk(),
            Scale::Paper => Self {
                reps: 1000,
                ..Self::desk()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRep {
    pub seed: u64,
    pub pii2_mse: f64,
    pub pii2_kernels: usize,
    pub pii2_widths: Vec<f64>,
    /// Baseline test MSE per grid width.
    pub ridge_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub grid: Vec<f64>,
    pub reps: Vec<GridRep>,
}

impl GridResult {
    pub fn pii2_mean_mse(&self) -> f64 {
        mean(&self.reps.iter().map(|r| r.pii2_mse).collect::<Vec<_>>())
    }

    pub fn ridge_mean_mse(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|j| mean(&self.reps.iter().map(|r| r.ridge_mse[j]).collect::<Vec<_>>()))
            .collect()
    }

    /// Smallest mean baseline MSE over the width grid.
    pub fn best_grid_mse(&self) -> f64 {
        self.ridge_mean_mse().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Mixed-Gaussian training and test sets for repetition seed `s`.
fn mixed_instance(m: usize, w0: f64, n: usize, n_test: usize, noise_sd: f64, s: u64) -> Result<(SampleSet, SampleSet)> {
    let gen = MixedGauss::new(m, w0, n, noise_sd);
    let (train, truth) = gen_mixed_gauss(&gen, s)?;
    let test = sample_signal(&truth, n_test, noise_sd, &gen.domain, test_seed(s))?;
    Ok((train, test))
}

/// Candidate-center fit with every training point as a candidate.
pub fn pii2_fit(cfg: &GridConfig, train: &SampleSet, gamma: f64) -> Result<DiscreteModel> {
    let kernel = KernelSpec::gaussian(cfg.w_lo, cfg.w_hi, train.domain().clone())?;
    let loss = regression_loss(cfg.epsilon, train.y())?;
    let variant = ProblemVariant::FixedCenters {
        centers: train.rows().map(<[f64]>::to_vec).collect(),
    };
    let mut opts = cfg.options.clone();
    opts.solver.gamma = gamma;
    Ok(fit_extract(train, &kernel, &loss, &variant, &opts)?.model)
}

pub fn grid_vs_pii2(cfg: &GridConfig, seed: u64) -> Result<GridResult> {
    let reps = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let s = seed.wrapping_add(rep);
            let (train, test) = mixed_instance(cfg.m, cfg.w0, cfg.n, cfg.n_test, cfg.noise_sd, s)?;
            let kernel = KernelSpec::gaussian(cfg.w_lo, cfg.w_hi, train.domain().clone())?;
            let ridge_mse = cfg
                .grid
                .iter()
                .map(|&w| Ok(test_mse(&ridge_fit(&train, &kernel, w, cfg.ridge_reg)?, &test)))
                .collect::<Result<Vec<_>>>()?;
            let model = pii2_fit(cfg, &train, cfg.options.solver.gamma)?;
            Ok(GridRep {
                seed: s,
                pii2_mse: test_mse(&model, &test),
                pii2_kernels: model.len(),
                pii2_widths: model.terms.iter().map(|t| t.w).collect(),
                ridge_mse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridResult {
        grid: cfg.grid.clone(),
        reps,
    })
}

/// Extracted kernel count of the candidate-center fit on the instance of
/// repetition seed `seed`, for each `gamma`.
pub fn kernel_count_vs_gamma(cfg: &GridConfig, gammas: &[f64], seed: u64) -> Result<Vec<usize>> {
    let (train, _) = mixed_instance(cfg.m, cfg.w0, cfg.n, cfg.n_test, cfg.noise_sd, seed)?;
    gammas
        .par_iter()
        .map(|&g| Ok(pii2_fit(cfg, &train, g)?.len()))
        .collect()
}

fn grid_report(r: &GridResult) -> Report {
    let mut cols = vec!["rep".to_string(), "seed".into(), "pii2_mse".into(), "pii2_kernels".into()];
    cols.extend(r.grid.iter().map(|w| format!("ridge_mse_w{w}")));
    let mut reps = Table {
        columns: cols,
        rows: Vec::new(),
    };
    for (i, rep) in r.reps.iter().enumerate() {
        let mut row = cells([i.to_string(), rep.seed.to_string(), rep.pii2_mse.to_string(), rep.pii2_kernels.to_string()]);
        row.extend(cells(rep.ridge_mse.iter()));
        reps.push(row);
    }
    let pii2: Vec<f64> = r.reps.iter().map(|x| x.pii2_mse).collect();
    let kernels: Vec<f64> = r.reps.iter().map(|x| x.pii2_kernels as f64).collect();
    let mut summary = Table::new(&[
        "w",
        "ridge_mse_mean",
        "ridge_mse_std",
        "pii2_mse_mean",
        "pii2_mse_std",
        "pii2_kernels_mean",
    ]);
    for (j, w) in r.grid.iter().enumerate() {
        let col: Vec<f64> = r.reps.iter().map(|x| x.ridge_mse[j]).collect();
        summary.push(cells([
            *w,
            mean(&col),
            std_dev(&col),
            mean(&pii2),
            std_dev(&pii2),
            mean(&kernels),
        ]));
    }
    let mut hist = Table::new(&["kind", "bin", "count"]);
    count_hist("kernel_count", r.reps.iter().map(|x| x.pii2_kernels), &mut hist);
    width_hist("width", r.reps.iter().flat_map(|x| x.pii2_widths.iter().copied()), &mut hist);
    Report {
        id: ExperimentId::GridVsPii2,
        reps,
        summary,
        hist: Some(hist),
    }
}

// ---------------------------------------------------------------------------
// Free centers and widths on the mixed-Gaussian signal

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullConfig {
    pub reps: usize,
    pub m: usize,
    pub w0: f64,
    pub n: usize,
    pub n_test: usize,
    pub noise_sd: f64,
    pub epsilon: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    pub options: FitOptions,
}

impl FullConfig {
    pub fn desk() -> Self {
        Self {
            reps: 20,
            m: 10,
            w0: 0.453,
            n: 100,
            n_test: 1000,
            noise_sd: DEFAULT_NOISE_SD,
            epsilon: DEFAULT_REGRESSION_EPSILON,
            w_lo: 0.1,
            w_hi: 1.0,
            options: FitOptions {
                solver: solver(10.0, 3e-4, 1.0, 5000, QuadratureSpec::new(96, 24)),
                ..FitOptions::default()
            },
        }
    }

    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::desk(),
            Scale::Paper => Self {
                reps: 1000,
                ..Self::desk()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullRep {
    pub seed: u64,
    pub mse: f64,
    pub kernels: usize,
    pub widths: Vec<f64>,
}

pub fn pii_full(cfg: &FullConfig, seed: u64) -> Result<Vec<FullRep>> {
    (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let s = seed.wrapping_add(rep);
            let (train, test) = mixed_instance(cfg.m, cfg.w0, cfg.n, cfg.n_test, cfg.noise_sd, s)?;
            let kernel = KernelSpec::gaussian(cfg.w_lo, cfg.w_hi, train.domain().clone())?;
            let loss = regression_loss(cfg.epsilon, train.y())?;
            let model = fit_extract(&train, &kernel, &loss, &ProblemVariant::Full, &cfg.options)?.model;
            Ok(FullRep {
                seed: s,
                mse: test_mse(&model, &test),
                kernels: model.len(),
                widths: model.terms.iter().map(|t| t.w).collect(),
            })
        })
        .collect()
}

fn full_report(r: &[FullRep]) -> Report {
    let mut reps = Table::new(&["rep", "seed", "mse", "kernels"]);
    for (i, x) in r.iter().enumerate() {
        reps.push(cells([i.to_string(), x.seed.to_string(), x.mse.to_string(), x.kernels.to_string()]));
    }
    let mses: Vec<f64> = r.iter().map(|x| x.mse).collect();
    let ks: Vec<f64> = r.iter().map(|x| x.kernels as f64).collect();
    let mut summary = Table::new(&["metric", "mean", "std"]);
    summary.push(cells(["mse".to_string(), mean(&mses).to_string(), std_dev(&mses).to_string()]));
    summary.push(cells(["kernels".to_string(), mean(&ks).to_string(), std_dev(&ks).to_string()]));
    let mut hist = Table::new(&["kind", "bin", "count"]);
    count_hist("kernel_count", r.iter().map(|x| x.kernels), &mut hist);
    width_hist("width", r.iter().flat_map(|x| x.widths.iter().copied()), &mut hist);
    Report {
        id: ExperimentId::PiiFull,
        reps,
        summary,
        hist: Some(hist),
    }
}

// ---------------------------------------------------------------------------
// Sparsity against error-matched KOMP

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KompSparsityConfig {
    pub reps: usize,
    pub m: usize,
    pub w0: f64,
    pub n: usize,
    pub n_test: usize,
    pub noise_sd: f64,
    pub epsilon: f64,
    pub options: FitOptions,
}

impl KompSparsityConfig {
    pub fn desk() -> Self {
        Self {
            reps: 50,
            m: 5,
            w0: 0.5,
            n: 20,
            n_test: 1000,
            noise_sd: DEFAULT_NOISE_SD,
            epsilon: DEFAULT_REGRESSION_EPSILON,
            options: FitOptions {
                solver: solver(100.0, 1e-3, 0.1, 5000, QuadratureSpec::new(256, 1)),
                ..FitOptions::default()
            },
        }
    }

    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::desk(),
            Scale::Paper => Self {
                reps: 1000,
                ..Self::desk()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KompSparsityRep {
    pub seed: u64,
    pub ours_kernels: usize,
    pub komp_kernels: usize,
    pub train_mse: f64,
    pub komp_train_mse: f64,
    pub ours_test_mse: f64,
    pub komp_test_mse: f64,
}

impl KompSparsityRep {
    pub fn strictly_sparser(&self) -> bool {
        self.ours_kernels < self.komp_kernels
    }
}

pub fn komp_sparsity(cfg: &KompSparsityConfig, seed: u64) -> Result<Vec<KompSparsityRep>> {
    (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let s = seed.wrapping_add(rep);
            let (train, test) = mixed_instance(cfg.m, cfg.w0, cfg.n, cfg.n_test, cfg.noise_sd, s)?;
            let kernel = KernelSpec::gaussian(cfg.w0.min(0.1), cfg.w0.max(1.0), train.domain().clone())?;
            let loss = regression_loss(cfg.epsilon, train.y())?;
            let variant = ProblemVariant::FixedWidth { w0: cfg.w0 };
            let model = fit_extract(&train, &kernel, &loss, &variant, &cfg.options)?.model;
            let train_mse = test_mse(&model, &train);
            let komp = komp_fit(&train, &kernel, cfg.w0, &KompConfig::new(KompStop::ErrorTarget(train_mse)))?;
            Ok(KompSparsityRep {
                seed: s,
                ours_kernels: model.len(),
                komp_kernels: komp.len(),
                train_mse,
                komp_train_mse: test_mse(&komp, &train),
                ours_test_mse: test_mse(&model, &test),
                komp_test_mse: test_mse(&komp, &test),
            })
        })
        .collect()
}

pub fn sparser_fraction(reps: &[KompSparsityRep]) -> f64 {
    reps.iter().filter(|r| r.strictly_sparser()).count() as f64 / reps.len() as f64
}

fn komp_report(r: &[KompSparsityRep]) -> Report {
    let mut reps = Table::new(&[
        "rep",
        "seed",
        "ours_kernels",
        "komp_kernels",
        "train_mse",
        "komp_train_mse",
        "ours_test_mse",
        "komp_test_mse",
    ]);
    for (i, x) in r.iter().enumerate() {
        reps.push(cells([
            i.to_string(),
            x.seed.to_string(),
            x.ours_kernels.to_string(),
            x.komp_kernels.to_string(),
            x.train_mse.to_string(),
            x.komp_train_mse.to_string(),
            x.ours_test_mse.to_string(),
            x.komp_test_mse.to_string(),
        ]));
    }
    let col = |f: fn(&KompSparsityRep) -> f64| r.iter().map(f).collect::<Vec<_>>();
    let mut summary = Table::new(&["metric", "value"]);
    for (k, v) in [
        ("strictly_sparser_fraction", sparser_fraction(r)),
        ("ours_kernels_mean", mean(&col(|x| x.ours_kernels as f64))),
        ("komp_kernels_mean", mean(&col(|x| x.komp_kernels as f64))),
        ("train_mse_mean", mean(&col(|x| x.train_mse))),
        ("ours_test_mse_mean", mean(&col(|x| x.ours_test_mse))),
        ("komp_test_mse_mean", mean(&col(|x| x.komp_test_mse))),
    ] {
        summary.push(cells([k.to_string(), v.to_string()]));
    }
    let mut hist = Table::new(&["kind", "bin", "count"]);
    count_hist("ours_kernels", r.iter().map(|x| x.ours_kernels), &mut hist);
    count_hist("komp_kernels", r.iter().map(|x| x.komp_kernels), &mut hist);
    Report {
        id: ExperimentId::KompSparsity,
        reps,
        summary,
        hist: Some(hist),
    }
}

// ---------------------------------------------------------------------------
// Sample-size stability on the varying-smoothness signal

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub reps: usize,
    pub sizes: Vec<usize>,
    pub n_test: usize,
    pub noise_sd: f64,
    pub epsilon: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    /// Width of the KOMP dictionary.
    pub komp_width: f64,
    pub options: FitOptions,
}

impl StabilityConfig {
    pub fn desk() -> Self {
        Self {
            reps: 10,
            sizes: vec![51, 101, 201],
            n_test: 1000,
            noise_sd: DEFAULT_NOISE_SD,
            epsilon: DEFAULT_REGRESSION_EPSILON,
            w_lo: 0.05,
            w_hi: 1.0,
            komp_width: 0.1,
            options: FitOptions {
                solver: solver(2.0, 0.01, 30.0, 1000, QuadratureSpec::new(256, 32)),
                ..FitOptions::default()
            },
        }
    }

    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::desk(),
            Scale::Paper => Self {
                reps: 100,
                sizes: vec![51, 101, 201, 301, 401, 501],
                ..Self::desk()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRep {
    pub n: usize,
    pub seed: u64,
    pub kernels: usize,
    pub ours_mse: f64,
    pub komp_mse: f64,
}

pub fn sample_stability(cfg: &StabilityConfig, seed: u64) -> Result<Vec<StabilityRep>> {
    let jobs: Vec<(usize, u64)> = cfg
        .sizes
        .iter()
        .flat_map(|&n| (0..cfg.reps as u64).map(move |r| (n, r)))
        .collect();
    jobs.into_par_iter()
        .map(|(n, rep)| {
            let s = seed.wrapping_add(rep);
            let train = gen_sin_squared(n, cfg.noise_sd, s)?;
            let test = sin_squared_test(cfg.n_test, cfg.noise_sd, test_seed(s))?;
            let kernel = KernelSpec::gaussian(cfg.w_lo, cfg.w_hi, train.domain().clone())?;
            let loss = regression_loss(cfg.epsilon, train.y())?;
            let model = fit_extract(&train, &kernel, &loss, &ProblemVariant::Full, &cfg.options)?.model;
            let count = model.len().clamp(1, n);
            let komp = komp_fit(&train, &kernel, cfg.komp_width, &KompConfig::new(KompStop::KernelCount(count)))?;
            Ok(StabilityRep {
                n,
                seed: s,
                kernels: model.len(),
                ours_mse: test_mse(&model, &test),
                komp_mse: test_mse(&komp, &test),
            })
        })
        .collect()
}

/// Per sample size: `(n, mean kernels, mean ours MSE, mean KOMP MSE)`.
pub fn stability_means(reps: &[StabilityRep], sizes: &[usize]) -> Vec<(usize, f64, f64, f64)> {
    sizes
        .iter()
        .map(|&n| {
            let rs: Vec<&StabilityRep> = reps.iter().filter(|r| r.n == n).collect();
            let m = |f: fn(&StabilityRep) -> f64| mean(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            (n, m(|r| r.kernels as f64), m(|r| r.ours_mse), m(|r| r.komp_mse))
        })
        .collect()
}

fn stability_report(r: &[StabilityRep], sizes: &[usize]) -> Report {
    let mut reps = Table::new(&["n", "seed", "kernels", "ours_mse", "komp_mse"]);
    for x in r {
        reps.push(cells([
            x.n.to_string(),
            x.seed.to_string(),
            x.kernels.to_string(),
            x.ours_mse.to_string(),
            x.komp_mse.to_string(),
        ]));
    }
    let mut summary = Table::new(&[
        "n",
        "kernels_mean",
        "kernels_std",
        "ours_mse_mean",
        "ours_mse_std",
        "komp_mse_mean",
        "komp_mse_std",
    ]);
    for &n in sizes {
        let rs: Vec<&StabilityRep> = r.iter().filter(|x| x.n == n).collect();
        let k: Vec<f64> = rs.iter().map(|x| x.kernels as f64).collect();
        let o: Vec<f64> = rs.iter().map(|x| x.ours_mse).collect();
        let c: Vec<f64> = rs.iter().map(|x| x.komp_mse).collect();
        summary.push(cells([
            n as f64,
            mean(&k),
            std_dev(&k),
            mean(&o),
            std_dev(&o),
            mean(&c),
            std_dev(&c),
        ]));
    }
    Report {
        id: ExperimentId::SampleStability,
        reps,
        summary,
        hist: None,
    }
}

/// Runs an experiment at `scale` and returns its tables.
pub fn run(id: ExperimentId, scale: Scale, seed: u64) -> Result<Report> {
    Ok(match id {
        ExperimentId::Remark1 => remark1_report(&remark1(&Remark1Config::for_scale(scale), seed)?),
        ExperimentId::GridVsPii2 => grid_report(&grid_vs_pii2(&GridConfig::for_scale(scale), seed)?),
        ExperimentId::PiiFull => full_report(&pii_full(&FullConfig::for_scale(scale), seed)?),
        ExperimentId::KompSparsity => komp_report(&komp_sparsity(&KompSparsityConfig::for_scale(scale), seed)?),
        ExperimentId::SampleStability => {
            let cfg = StabilityConfig::for_scale(scale);
            stability_report(&sample_stability(&cfg, seed)?, &cfg.sizes)
        }
    })
}
