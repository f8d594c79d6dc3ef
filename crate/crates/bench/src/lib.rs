//! Shared fixtures for benchmarks.

use sparsekern::datasets::{gen_mixed_gauss, MixedGauss, DEFAULT_NOISE_SD};
use sparsekern::losses::DEFAULT_REGRESSION_EPSILON;
use sparsekern::solver::DualProblem;
use sparsekern::{KernelSpec, Loss, LossKind, ProblemVariant, SampleSet};

/// Mixed-Gaussian training set with `n` samples on `[0, 3]`.
pub fn mixed_samples(n: usize, seed: u64) -> SampleSet {
    gen_mixed_gauss(&MixedGauss::new(10, 0.453, n, DEFAULT_NOISE_SD), seed)
        .expect("valid generator config")
        .0
}

/// Regression problem on [`mixed_samples`] with widths in `[0.1, 1]`.
pub fn mixed_problem(n: usize, variant: ProblemVariant, gamma: f64) -> DualProblem {
    let s = mixed_samples(n, 7);
    let kernel = KernelSpec::gaussian(0.1, 1.0, s.domain().clone()).expect("valid kernel");
    let loss = Loss::for_labels(LossKind::QuadraticEps, DEFAULT_REGRESSION_EPSILON, s.y()).expect("valid loss");
    DualProblem::new(s, kernel, loss, variant, gamma).expect("valid problem")
}
