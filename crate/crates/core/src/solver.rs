//! Dual problem: objective, supergradients and projected stochastic
//! supergradient ascent on `(lambda, mu)`.
//!
//! The Lagrangian separates into a per-sample part
//! `sum_i mu_i c(yhat_i, y_i) + lambda_i yhat_i`, minimized by
//! [`inner_minimize`](crate::losses::inner_minimize), and an integral part
//! whose pointwise minimum is `min(0, gamma - abar^2 / 2)` (attained by the
//! thresholded field). The supergradients are the constraint violations of
//! those minimizers.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::SampleSet;
use crate::dual_field::{
    hard_threshold, AlphaField, DomainSampler, Integrator, KernelTable, Nodes, ProblemVariant, QuadratureSpec,
};
use crate::error::{config, domain, Error, Result};
use crate::kernels::KernelSpec;
use crate::losses::{inner_minimize_unchecked, loss_value, Loss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub gamma: f64,
    pub eta_lambda: f64,
    pub eta_mu: f64,
    /// Number of ascent steps `T`.
    pub iters: usize,
    /// Monte-Carlo batch size `B`.
    pub batch: usize,
    pub seed: u64,
    /// Lower bound of the `mu` projection.
    pub mu_floor: f64,
    /// Initial value of every `mu_i`.
    pub mu_init: f64,
    pub integrator: IntegratorKind,
    pub quadrature: QuadratureSpec,
    /// Record a trace point every this many steps (0 disables).
    pub trace_every: usize,
    /// Scale both step sizes by `1 / sqrt(t + 1)`.
    pub step_decay: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            eta_lambda: 1e-2,
            eta_mu: 1.0,
            iters: 1000,
            batch: 256,
            seed: 0,
            mu_floor: 1e-8,
            mu_init: 1.0,
            integrator: IntegratorKind::Quadrature,
            quadrature: QuadratureSpec::default(),
            trace_every: 10,
            step_decay: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return config(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.eta_lambda > 0.0 && self.eta_mu > 0.0) {
            return config("step sizes must be positive");
        }
        if self.iters == 0 {
            return config("iteration count must be >= 1");
        }
        if self.batch == 0 {
            return config("batch size must be >= 1");
        }
        if !(self.mu_floor >= 0.0) {
            return config("mu_floor must be >= 0");
        }
        if !(self.mu_init > 0.0) {
            return config("mu_init must be > 0");
        }
        self.quadrature.validate()
    }

    pub fn integrator_for_step(&self, step_seed: u64) -> Integrator {
        match self.integrator {
            IntegratorKind::Quadrature => Integrator::Quadrature(self.quadrature),
            IntegratorKind::MonteCarlo => Integrator::MonteCarlo {
                batch: self.batch,
                seed: step_seed,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: usize,
    /// Dual objective (exact under quadrature, an estimate under Monte Carlo).
    pub g_estimate: f64,
    pub grad_norm: f64,
    /// `max_i c(integral alpha_d k(x_i, .), y_i)`.
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestIterate {
    pub t: usize,
    pub g: f64,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub t: usize,
    pub g_trace: Vec<TracePoint>,
    pub best: Option<BestIterate>,
}

impl DualState {
    pub fn new(lambda: Vec<f64>, mu: Vec<f64>) -> Self {
        Self {
            lambda,
            mu,
            t: 0,
            g_trace: Vec::new(),
            best: None,
        }
    }

    /// `lambda = 0`, `mu = mu0`.
    pub fn initial(n: usize, mu0: f64) -> Self {
        Self::new(vec![0.0; n], vec![mu0; n])
    }
}

/// A sparse functional program instance.
#[derive(Debug, Clone)]
pub struct DualProblem {
    pub samples: SampleSet,
    pub kernel: KernelSpec,
    pub loss: Loss,
    pub variant: ProblemVariant,
    pub gamma: f64,
}

impl DualProblem {
    pub fn new(
        samples: SampleSet,
        kernel: KernelSpec,
        loss: Loss,
        variant: ProblemVariant,
        gamma: f64,
    ) -> Result<Self> {
        kernel.validate()?;
        loss.validate()?;
        variant.validate(&kernel)?;
        if samples.dim() != kernel.dim() {
            return config("sample dimension differs from the kernel's center box");
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return config(format!("gamma must be >= 0, got {gamma}"));
        }
        Ok(Self {
            samples,
            kernel,
            loss,
            variant,
            gamma,
        })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn threshold(&self) -> f64 {
        (2.0 * self.gamma).sqrt()
    }

    fn check_state(&self, lambda: &[f64], mu: &[f64]) -> Result<()> {
        if lambda.len() != self.n() || mu.len() != self.n() {
            return config("dual state length differs from the sample count");
        }
        if let Some(i) = mu.iter().position(|m| !(*m >= 0.0)) {
            return domain(format!("mu[{i}] = {} is negative", mu[i]));
        }
        Ok(())
    }

    /// Per-sample minimizers, their objective share and `d_mu`.
    fn inner(&self, lambda: &[f64], mu: &[f64]) -> (Vec<f64>, f64, Vec<f64>) {
        let y = self.samples.y();
        let mut yhat = Vec::with_capacity(y.len());
        let mut d_mu = Vec::with_capacity(y.len());
        let mut part = 0.0;
        for i in 0..y.len() {
            let yd = inner_minimize_unchecked(&self.loss, lambda[i], mu[i], y[i]);
            let c = loss_value(&self.loss, yd, y[i]);
            part += mu[i] * c + lambda[i] * yd;
            yhat.push(yd);
            d_mu.push(c);
        }
        (yhat, part, d_mu)
    }

    pub fn field(&self, lambda: Vec<f64>) -> Result<AlphaField> {
        AlphaField::new(
            self.samples.clone(),
            lambda,
            self.gamma,
            self.kernel.clone(),
            self.variant.clone(),
        )
    }

    /// Prepares cached kernel values for repeated evaluations.
    pub fn evaluator(&self, integrator: &Integrator) -> Result<DualEvaluator<'_>> {
        integrator.validate()?;
        let table = match integrator {
            Integrator::Quadrature(spec) => Some(KernelTable::new(
                Nodes::midpoint(&self.kernel, &self.variant, *spec)?,
                &self.kernel,
                &self.samples,
            )),
            Integrator::MonteCarlo { .. } => None,
        };
        Ok(DualEvaluator {
            problem: self,
            table,
            batch: match integrator {
                Integrator::MonteCarlo { batch, .. } => *batch,
                Integrator::Quadrature(_) => 0,
            },
        })
    }
}

/// Supergradient together with the quantities it is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Supergradient {
    pub d_lambda: Vec<f64>,
    pub d_mu: Vec<f64>,
    /// Inner minimizers `yhat_d`.
    pub yhat: Vec<f64>,
    /// `integral alpha_d k(x_i, .)` (estimated under Monte Carlo).
    pub fitted: Vec<f64>,
    /// Dual objective at the evaluation point (estimated under Monte Carlo).
    pub g: f64,
}

/// Chunk size for Monte-Carlo draws; fixed so sums are reproducible.
const MC_CHUNK: usize = 64;

pub struct DualEvaluator<'p> {
    problem: &'p DualProblem,
    table: Option<KernelTable>,
    batch: usize,
}

impl DualEvaluator<'_> {
    /// Supergradient at `(lambda, mu)`. `rng` drives the Monte-Carlo draws
    /// and is ignored under quadrature.
    pub fn supergradient(&self, lambda: &[f64], mu: &[f64], rng: &mut ChaCha8Rng) -> Result<Supergradient> {
        let p = self.problem;
        p.check_state(lambda, mu)?;
        let (yhat, ypart, d_mu) = p.inner(lambda, mu);
        let thr = p.threshold();
        let (fitted, integral) = match &self.table {
            Some(table) => {
                let abar = table.abar(lambda);
                let nodes = table.nodes();
                let alpha: Vec<f64> = abar.iter().map(|&a| hard_threshold(a, thr)).collect();
                let integral: f64 = alpha
                    .iter()
                    .zip(&abar)
                    .enumerate()
                    .filter(|(_, (a, _))| **a != 0.0)
                    .map(|(k, (_, b))| nodes.weight(k) * (p.gamma - 0.5 * b * b))
                    .sum();
                (table.integrate(&alpha), integral)
            }
            None => self.monte_carlo(lambda, rng),
        };
        let d_lambda = yhat.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        Ok(Supergradient {
            d_lambda,
            d_mu,
            yhat,
            fitted,
            g: ypart + integral,
        })
    }

    fn monte_carlo(&self, lambda: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        let p = self.problem;
        let n = p.n();
        let dim = p.kernel.dim();
        let sampler = DomainSampler::new(&p.kernel, &p.variant);
        let mut zs = Vec::with_capacity(self.batch * dim);
        let mut ws = Vec::with_capacity(self.batch);
        let mut z = Vec::with_capacity(dim);
        for _ in 0..self.batch {
            ws.push(sampler.draw(rng, &mut z));
            zs.extend_from_slice(&z);
        }
        let thr = p.threshold();
        let x = p.samples.x();
        let partials: Vec<(Vec<f64>, f64)> = ws
            .par_chunks(MC_CHUNK)
            .enumerate()
            .map(|(c, wchunk)| {
                let mut acc = vec![0.0; n];
                let mut integral = 0.0;
                let mut row = vec![0.0; n];
                for (off, &w) in wchunk.iter().enumerate() {
                    let k = c * MC_CHUNK + off;
                    let zk = &zs[k * dim..(k + 1) * dim];
                    for (i, r) in row.iter_mut().enumerate() {
                        *r = p.kernel.eval_unchecked(&x[i * dim..(i + 1) * dim], zk, w);
                    }
                    let abar: f64 = row.iter().zip(lambda).map(|(r, l)| r * l).sum();
                    let a = hard_threshold(abar, thr);
                    if a != 0.0 {
                        integral += p.gamma - 0.5 * abar * abar;
                        for (o, r) in acc.iter_mut().zip(&row) {
                            *o += a * r;
                        }
                    }
                }
                (acc, integral)
            })
            .collect();
        let scale = sampler.volume() / self.batch as f64;
        let mut fitted = vec![0.0; n];
        let mut integral = 0.0;
        for (acc, int) in partials {
            for (f, a) in fitted.iter_mut().zip(acc) {
                *f += a;
            }
            integral += int;
        }
        fitted.iter_mut().for_each(|f| *f *= scale);
        (fitted, integral * scale)
    }

    /// Dual objective; exact for the quadrature rule, an estimate otherwise.
    pub fn dual_objective(&self, lambda: &[f64], mu: &[f64], rng: &mut ChaCha8Rng) -> Result<f64> {
        Ok(self.supergradient(lambda, mu, rng)?.g)
    }
}

/// `g(lambda, mu)` under the quadrature rule `spec`.
pub fn dual_objective(state: &DualState, problem: &DualProblem, spec: QuadratureSpec) -> Result<f64> {
    let ev = problem.evaluator(&Integrator::Quadrature(spec))?;
    ev.dual_objective(&state.lambda, &state.mu, &mut ChaCha8Rng::seed_from_u64(0))
}

/// `(d_lambda, d_mu)` at `state`; a Monte-Carlo integrator draws one batch
/// from its own seed.
pub fn supergradient(state: &DualState, problem: &DualProblem, integrator: &Integrator) -> Result<Supergradient> {
    let seed = match integrator {
        Integrator::MonteCarlo { seed, .. } => *seed,
        Integrator::Quadrature(_) => 0,
    };
    problem
        .evaluator(integrator)?
        .supergradient(&state.lambda, &state.mu, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: DualState,
    pub field: AlphaField,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs `T` projected supergradient ascent steps from `lambda = 0`,
/// `mu = mu_init` and returns the final state with the field built from
/// `lambda(T)`.
pub fn fit(
    samples: &SampleSet,
    kernel: &KernelSpec,
    loss: &Loss,
    variant: &ProblemVariant,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let problem = DualProblem::new(samples.clone(), kernel.clone(), *loss, variant.clone(), cfg.gamma)?;
    fit_problem(&problem, cfg)
}

pub fn fit_problem(problem: &DualProblem, cfg: &SolverConfig) -> Result<FitResult> {
    cfg.validate()?;
    let n = problem.n();
    let ev = problem.evaluator(&cfg.integrator_for_step(cfg.seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = DualState::initial(n, cfg.mu_init.max(cfg.mu_floor));
    let y = problem.samples.y();
    for t in 0..cfg.iters {
        let sg = ev.supergradient(&state.lambda, &state.mu, &mut rng)?;
        let finite = sg.d_lambda.iter().chain(&sg.d_mu).all(|v| v.is_finite()) && sg.g.is_finite();
        if !finite {
            return Err(Error::Numeric(format!(
                "non-finite supergradient at iteration {t}: |lambda| = {:.3e}, |mu| = {:.3e}",
                norm(&state.lambda),
                norm(&state.mu)
            )));
        }
        if cfg.trace_every > 0 && (t % cfg.trace_every == 0 || t + 1 == cfg.iters) {
            let max_violation = sg
                .fitted
                .iter()
                .zip(y)
                .map(|(f, yi)| loss_value(&problem.loss, *f, *yi))
                .fold(f64::NEG_INFINITY, f64::max);
            state.g_trace.push(TracePoint {
                t,
                g_estimate: sg.g,
                grad_norm: norm(&sg.d_lambda),
                max_violation,
            });
        }
        if state.best.as_ref().is_none_or(|b| sg.g > b.g) {
            state.best = Some(BestIterate {
                t,
                g: sg.g,
                lambda: state.lambda.clone(),
                mu: state.mu.clone(),
            });
        }
        let decay = if cfg.step_decay { 1.0 / ((t + 1) as f64).sqrt() } else { 1.0 };
        let (el, em) = (cfg.eta_lambda * decay, cfg.eta_mu * decay);
        for i in 0..n {
            state.lambda[i] += el * sg.d_lambda[i];
            state.mu[i] = (state.mu[i] + em * sg.d_mu[i]).max(cfg.mu_floor);
        }
        state.t = t + 1;
    }
    if state.lambda.iter().chain(&state.mu).any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "dual variables diverged after {} iterations",
            cfg.iters
        )));
    }
    let field = problem.field(state.lambda.clone())?;
    Ok(FitResult { state, field })
}

/// Writes `t,g_estimate,grad_norm,max_violation` rows.
pub fn write_trace_csv(state: &DualState, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,g_estimate,grad_norm,max_violation")?;
    for p in &state.g_trace {
        writeln!(f, "{},{},{},{}", p.t, p.g_estimate, p.grad_norm, p.max_violation)?;
    }
    f.flush()?;
    Ok(())
}

/// Largest constraint value `c(h(x_i), y_i)` of a field under `integrator`.
pub fn max_constraint_violation(field: &AlphaField, loss: &Loss, integrator: &Integrator) -> Result<f64> {
    let s = field.samples();
    let pred = field.predict_many(s.x(), integrator)?;
    Ok(pred
        .iter()
        .zip(s.y())
        .map(|(p, y)| loss_value(loss, *p, *y))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DomainBox;
    use crate::losses::LossKind;
    use rand::Rng;

    fn tiny_problem(gamma: f64, variant: ProblemVariant) -> DualProblem {
        let b = DomainBox::cube(1, 0.0, 3.0).unwrap();
        let s = SampleSet::new(1, vec![0.5, 1.2, 1.9, 2.6], vec![0.3, 1.0, 0.8, -0.2], b.clone()).unwrap();
        let k = KernelSpec::gaussian(0.2, 1.0, b).unwrap();
        let l = Loss::new(LossKind::QuadraticEps, 1e-3, 5.0).unwrap();
        DualProblem::new(s, k, l, variant, gamma).unwrap()
    }

    #[test]
    fn origin_of_the_dual() {
        let p = tiny_problem(0.5, ProblemVariant::Full);
        let st = DualState::new(vec![0.0; 4], vec![0.0; 4]);
        assert_eq!(dual_objective(&st, &p, QuadratureSpec::new(64, 16)).unwrap(), 0.0);
        let sg = supergradient(&st, &p, &Integrator::Quadrature(QuadratureSpec::new(64, 16))).unwrap();
        assert_eq!(sg.d_lambda, p.samples.y().to_vec());
        assert!(sg.d_mu.iter().all(|d| (*d + 1e-3).abs() < 1e-15));
    }

    #[test]
    fn negative_mu_is_rejected() {
        let p = tiny_problem(0.5, ProblemVariant::Full);
        let st = DualState::new(vec![0.0; 4], vec![1.0, -1.0, 0.0, 0.0]);
        assert!(dual_objective(&st, &p, QuadratureSpec::new(8, 8)).is_err());
    }

    #[test]
    fn large_gamma_kills_the_integral() {
        let p = tiny_problem(1e6, ProblemVariant::Full);
        let st = DualState::new(vec![3.0, -2.0, 1.0, 4.0], vec![1.0; 4]);
        let sg = supergradient(&st, &p, &Integrator::Quadrature(QuadratureSpec::new(32, 8))).unwrap();
        assert!(sg.fitted.iter().all(|f| *f == 0.0));
    }

    #[test]
    fn fixed_point_has_zero_supergradient() {
        // gamma = 0 and lambda = 0 give alpha_d = 0; with y = 0 and eps = 0 the
        // inner minimizer is y, so both constraint residuals vanish
        let b = DomainBox::cube(1, 0.0, 1.0).unwrap();
        let s = SampleSet::new(1, vec![0.2, 0.8], vec![0.0, 0.0], b.clone()).unwrap();
        let k = KernelSpec::gaussian(0.2, 1.0, b).unwrap();
        let l = Loss::new(LossKind::QuadraticEps, 0.0, 1.0).unwrap();
        let p = DualProblem::new(s, k, l, ProblemVariant::Full, 0.0).unwrap();
        let st = DualState::new(vec![0.0; 2], vec![1.0; 2]);
        let sg = supergradient(&st, &p, &Integrator::Quadrature(QuadratureSpec::new(16, 8))).unwrap();
        assert!(sg.d_lambda.iter().chain(&sg.d_mu).all(|v| *v == 0.0));
    }

    #[test]
    fn supergradient_inequality_on_tiny_problem() {
        let p = tiny_problem(0.05, ProblemVariant::Full);
        let spec = QuadratureSpec::new(48, 12);
        let ev = p.evaluator(&Integrator::Quadrature(spec)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut dummy = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let l1: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let m1: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..3.0)).collect();
            let l2: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let m2: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..3.0)).collect();
            let sg = ev.supergradient(&l1, &m1, &mut dummy).unwrap();
            let g2 = ev.dual_objective(&l2, &m2, &mut dummy).unwrap();
            let mut lin = sg.g;
            for i in 0..4 {
                lin += sg.d_lambda[i] * (l2[i] - l1[i]) + sg.d_mu[i] * (m2[i] - m1[i]);
            }
            assert!(g2 <= lin + 1e-8, "slack {}", lin - g2);
        }
    }

    #[test]
    fn fit_is_deterministic_and_projects_mu() {
        let p = tiny_problem(0.05, ProblemVariant::FixedWidth { w0: 0.5 });
        let cfg = SolverConfig {
            gamma: 0.05,
            iters: 60,
            integrator: IntegratorKind::MonteCarlo,
            batch: 64,
            seed: 42,
            trace_every: 1,
            ..Default::default()
        };
        let a = fit_problem(&p, &cfg).unwrap();
        let b = fit_problem(&p, &cfg).unwrap();
        let bits = |s: &DualState| s.lambda.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.state), bits(&b.state));
        assert_eq!(a.state.g_trace, b.state.g_trace);
        assert!(a.state.mu.iter().all(|m| *m >= cfg.mu_floor));
        assert_eq!(a.state.t, 60);
        assert_eq!(a.state.g_trace.len(), 60);
    }

    #[test]
    fn zero_function_is_feasible_for_zero_labels() {
        let b = DomainBox::cube(1, 0.0, 1.0).unwrap();
        let s = SampleSet::new(1, vec![0.5], vec![0.0], b.clone()).unwrap();
        let k = KernelSpec::gaussian(0.2, 1.0, b).unwrap();
        let l = Loss::for_labels(LossKind::QuadraticEps, 1e-2, s.y()).unwrap();
        let cfg = SolverConfig {
            gamma: 0.1,
            iters: 200,
            quadrature: QuadratureSpec::new(64, 16),
            ..Default::default()
        };
        let r = fit(&s, &k, &l, &ProblemVariant::Full, &cfg).unwrap();
        assert!(r.state.lambda[0].abs() < 1e-6, "{:?}", r.state.lambda);
        let q = Integrator::Quadrature(cfg.quadrature);
        assert!(max_constraint_violation(&r.field, &l, &q).unwrap() <= 0.0);
    }

    #[test]
    fn divergence_is_reported() {
        let p = tiny_problem(0.0, ProblemVariant::Full);
        let cfg = SolverConfig {
            gamma: 0.0,
            eta_lambda: 1e300,
            eta_mu: 1e300,
            iters: 50,
            quadrature: QuadratureSpec::new(16, 4),
            ..Default::default()
        };
        match fit_problem(&p, &cfg) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("iteration")),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_round_trips_json() {
        let cfg = SolverConfig {
            integrator: IntegratorKind::MonteCarlo,
            step_decay: true,
            ..Default::default()
        };
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<SolverConfig>(&s).unwrap(), cfg);
        assert!(SolverConfig { iters: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { eta_mu: 0.0, ..Default::default() }.validate().is_err());
    }
}
