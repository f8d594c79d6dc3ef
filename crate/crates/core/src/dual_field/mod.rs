//! The functional solution of the sparse program.
//!
//! For multipliers `lambda`, the dual minimizer over `alpha` is the hard
//! threshold of `abar(z, w) = sum_i lambda_i k(x_i, z; w)` at `sqrt(2 gamma)`.
//! [`AlphaField`] stores what is needed to evaluate it anywhere and to form
//! predictions `h(x) = integral alpha(z, w) k(x, z; w) dz dw`.

mod bump;
mod quadrature;

pub use bump::{bump_field, BumpField};
pub use quadrature::{DomainSampler, KernelTable, Nodes, QuadratureSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::SampleSet;
use crate::error::{config, domain, Error, Result};
use crate::kernels::{sq_dist, KernelSpec};

/// Which part of `(center, width)` space the representation integrates over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemVariant {
    /// Centers and widths are both free.
    Full,
    /// Single known width; centers are free.
    FixedWidth { w0: f64 },
    /// Candidate centers are given; one width profile per center.
    FixedCenters { centers: Vec<Vec<f64>> },
}

impl ProblemVariant {
    pub fn validate(&self, kernel: &KernelSpec) -> Result<()> {
        match self {
            ProblemVariant::Full => Ok(()),
            ProblemVariant::FixedWidth { w0 } => kernel.check_width(*w0),
            ProblemVariant::FixedCenters { centers } => {
                if centers.is_empty() {
                    return config("fixed_centers needs at least one candidate center");
                }
                for (j, z) in centers.iter().enumerate() {
                    if !kernel.center_box.contains(z) {
                        return domain(format!("candidate center {j} ({z:?}) lies outside the box"));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemVariant::Full => "full",
            ProblemVariant::FixedWidth { .. } => "fixed_width",
            ProblemVariant::FixedCenters { .. } => "fixed_centers",
        }
    }
}

/// How the integral over the variant's domain is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrator {
    Quadrature(QuadratureSpec),
    MonteCarlo { batch: usize, seed: u64 },
}

impl Integrator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Integrator::Quadrature(q) => q.validate(),
            Integrator::MonteCarlo { batch, .. } if *batch == 0 => config("Monte-Carlo batch size must be positive"),
            Integrator::MonteCarlo { .. } => Ok(()),
        }
    }
}

/// Hard threshold: `v` if `|v| > threshold`, else 0.
#[inline]
pub fn hard_threshold(v: f64, threshold: f64) -> f64 {
    if v.abs() > threshold {
        v
    } else {
        0.0
    }
}

/// Functional solution built from dual multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlphaFieldRepr", into = "AlphaFieldRepr")]
pub struct AlphaField {
    samples: SampleSet,
    lambda: Vec<f64>,
    gamma: f64,
    kernel: KernelSpec,
    variant: ProblemVariant,
}

#[derive(Serialize, Deserialize)]
struct AlphaFieldRepr {
    samples: SampleSet,
    lambda: Vec<f64>,
    gamma: f64,
    kernel: KernelSpec,
    variant: ProblemVariant,
}

impl TryFrom<AlphaFieldRepr> for AlphaField {
    type Error = Error;
    fn try_from(r: AlphaFieldRepr) -> Result<Self> {
        AlphaField::new(r.samples, r.lambda, r.gamma, r.kernel, r.variant)
    }
}

impl From<AlphaField> for AlphaFieldRepr {
    fn from(f: AlphaField) -> Self {
        AlphaFieldRepr {
            samples: f.samples,
            lambda: f.lambda,
            gamma: f.gamma,
            kernel: f.kernel,
            variant: f.variant,
        }
    }
}

impl AlphaField {
    pub fn new(
        samples: SampleSet,
        lambda: Vec<f64>,
        gamma: f64,
        kernel: KernelSpec,
        variant: ProblemVariant,
    ) -> Result<Self> {
        kernel.validate()?;
        variant.validate(&kernel)?;
        if samples.dim() != kernel.dim() {
            return config("sample dimension differs from the kernel's center box");
        }
        if lambda.len() != samples.len() {
            return config(format!("{} multipliers for {} samples", lambda.len(), samples.len()));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return config(format!("gamma must be >= 0, got {gamma}"));
        }
        Ok(Self {
            samples,
            lambda,
            gamma,
            kernel,
            variant,
        })
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn variant(&self) -> &ProblemVariant {
        &self.variant
    }

    /// `sqrt(2 gamma)`.
    pub fn threshold(&self) -> f64 {
        (2.0 * self.gamma).sqrt()
    }

    fn check_query(&self, z: &[f64], w: f64) -> Result<()> {
        if z.len() != self.kernel.dim() {
            return domain(format!("query has dimension {}, expected {}", z.len(), self.kernel.dim()));
        }
        match &self.variant {
            ProblemVariant::Full => {
                self.kernel.check_width(w)?;
                if !self.kernel.center_box.contains(z) {
                    return domain(format!("center {z:?} lies outside the box"));
                }
            }
            ProblemVariant::FixedWidth { w0 } => {
                if (w - w0).abs() > 1e-12 * w0.abs().max(1.0) {
                    return domain(format!("width {w} differs from the fixed width {w0}"));
                }
                if !self.kernel.center_box.contains(z) {
                    return domain(format!("center {z:?} lies outside the box"));
                }
            }
            ProblemVariant::FixedCenters { centers } => {
                self.kernel.check_width(w)?;
                if !centers.iter().any(|c| sq_dist(c, z) <= 1e-24) {
                    return domain(format!("{z:?} is not a candidate center"));
                }
            }
        }
        Ok(())
    }

    /// `sum_i lambda_i k(x_i, z; w)`.
    pub fn abar(&self, z: &[f64], w: f64) -> Result<f64> {
        self.check_query(z, w)?;
        Ok(self.abar_unchecked(z, w))
    }

    pub(crate) fn abar_unchecked(&self, z: &[f64], w: f64) -> f64 {
        self.samples
            .rows()
            .zip(&self.lambda)
            .map(|(x, l)| l * self.kernel.eval_unchecked(x, z, w))
            .sum()
    }

    /// `abar` with its partials `(d/dz, d/dw)`.
    pub(crate) fn abar_with_grad(&self, z: &[f64], w: f64) -> (f64, Vec<f64>, f64) {
        let mut v = 0.0;
        let mut gz = vec![0.0; z.len()];
        let mut gw = 0.0;
        for (x, &l) in self.samples.rows().zip(&self.lambda) {
            if l == 0.0 {
                continue;
            }
            let k = self.kernel.eval_unchecked(x, z, w);
            let (dz, dw) = self.kernel.grad_from_value(x, z, w, k);
            v += l * k;
            for (g, d) in gz.iter_mut().zip(&dz) {
                *g += l * d;
            }
            gw += l * dw;
        }
        (v, gz, gw)
    }

    /// Thresholded field: `abar` where `|abar| > sqrt(2 gamma)`, else 0.
    pub fn alpha_d(&self, z: &[f64], w: f64) -> Result<f64> {
        Ok(hard_threshold(self.abar(z, w)?, self.threshold()))
    }

    /// `integral alpha_d(z, w) k(x, z; w)` over the variant's domain.
    pub fn predict(&self, x: &[f64], integrator: &Integrator) -> Result<f64> {
        Ok(self.predict_many(x, integrator)?[0])
    }

    /// Predictions for the rows of a row-major buffer.
    pub fn predict_many(&self, xs: &[f64], integrator: &Integrator) -> Result<Vec<f64>> {
        integrator.validate()?;
        let dim = self.kernel.dim();
        if xs.is_empty() || xs.len() % dim != 0 {
            return domain("query buffer is not a nonempty multiple of the dimension");
        }
        match integrator {
            Integrator::Quadrature(spec) => {
                let nodes = Nodes::midpoint(&self.kernel, &self.variant, *spec)?;
                let support = self.support_on(&nodes);
                Ok(xs
                    .par_chunks(dim)
                    .map(|x| {
                        support
                            .iter()
                            .map(|&(k, s)| s * self.kernel.eval_unchecked(x, nodes.z(k), nodes.w(k)))
                            .sum()
                    })
                    .collect())
            }
            Integrator::MonteCarlo { batch, seed } => {
                let sampler = DomainSampler::new(&self.kernel, &self.variant);
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let vol = sampler.volume();
                let mut draws = Vec::with_capacity(*batch);
                let mut z = Vec::with_capacity(dim);
                for _ in 0..*batch {
                    let w = sampler.draw(&mut rng, &mut z);
                    let a = hard_threshold(self.abar_unchecked(&z, w), self.threshold());
                    if a != 0.0 {
                        draws.push((z.clone(), w, a));
                    }
                }
                let scale = vol / *batch as f64;
                Ok(xs
                    .chunks(dim)
                    .map(|x| {
                        scale
                            * draws
                                .iter()
                                .map(|(z, w, a)| a * self.kernel.eval_unchecked(x, z, *w))
                                .sum::<f64>()
                    })
                    .collect())
            }
        }
    }

    /// `(node index, weight * alpha_d)` for nodes in the support.
    fn support_on(&self, nodes: &Nodes) -> Vec<(usize, f64)> {
        let t = self.threshold();
        let vals: Vec<f64> = (0..nodes.len())
            .into_par_iter()
            .map(|k| hard_threshold(self.abar_unchecked(nodes.z(k), nodes.w(k)), t))
            .collect();
        vals.into_iter()
            .enumerate()
            .filter(|(_, a)| *a != 0.0)
            .map(|(k, a)| (k, a * nodes.weight(k)))
            .collect()
    }

    /// Primal objective `1/2 |alpha_d|^2 + gamma |supp alpha_d|` by quadrature.
    pub fn primal_objective(&self, spec: QuadratureSpec) -> Result<f64> {
        let nodes = Nodes::midpoint(&self.kernel, &self.variant, spec)?;
        let t = self.threshold();
        let vals: Vec<f64> = (0..nodes.len())
            .into_par_iter()
            .map(|k| {
                let a = hard_threshold(self.abar_unchecked(nodes.z(k), nodes.w(k)), t);
                if a != 0.0 {
                    nodes.weight(k) * (0.5 * a * a + self.gamma)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(vals.iter().sum())
    }

    /// Fraction of the quadrature measure where `alpha_d` is nonzero.
    pub fn support_fraction(&self, spec: QuadratureSpec) -> Result<f64> {
        let nodes = Nodes::midpoint(&self.kernel, &self.variant, spec)?;
        let s: f64 = self.support_on(&nodes).iter().map(|&(k, _)| nodes.weight(k)).sum();
        Ok(s / nodes.total_weight())
    }
}
