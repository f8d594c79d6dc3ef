//! Solve, then extract: the end-to-end fit used by the CLI, the experiment
//! harness and the one-vs-one wrapper.

use serde::{Deserialize, Serialize};

use crate::datasets::SampleSet;
use crate::dual_field::ProblemVariant;
use crate::error::Result;
use crate::extraction::{extract, PeakConfig, DEFAULT_REFIT_RIDGE};
use crate::kernels::KernelSpec;
use crate::losses::Loss;
use crate::model::DiscreteModel;
use crate::solver::{fit, FitResult, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub solver: SolverConfig,
    pub peaks: PeakConfig,
    pub refit_ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            peaks: PeakConfig::default(),
            refit_ridge: DEFAULT_REFIT_RIDGE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub fit: FitResult,
    pub model: DiscreteModel,
}

pub fn fit_extract(
    samples: &SampleSet,
    kernel: &KernelSpec,
    loss: &Loss,
    variant: &ProblemVariant,
    opts: &FitOptions,
) -> Result<Fitted> {
    opts.peaks.validate()?;
    let fit = fit(samples, kernel, loss, variant, &opts.solver)?;
    let model = extract(&fit.field, &opts.peaks, opts.refit_ridge)?;
    Ok(Fitted { fit, model })
}
