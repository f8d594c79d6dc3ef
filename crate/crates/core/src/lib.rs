//! Sparse multi-kernel function estimation.
//!
//! Functions are represented as integrals `h(x) = integral alpha(z, w) k(x, z; w)`
//! over kernel centers `z` and widths `w`. Fitting minimizes
//! `1/2 |alpha|^2 + gamma |supp alpha|` subject to per-sample fit constraints
//! by ascending the dual, whose inner minimizer is a thresholded kernel
//! expansion. Peaks of that field are then turned into a finite kernel model.

pub mod baselines;
pub mod datasets;
pub mod dual_field;
pub mod error;
pub mod experiments;
pub mod extraction;
pub mod kernels;
pub mod losses;
pub mod model;
pub mod multiclass;
pub mod pipeline;
pub mod solver;

pub use datasets::SampleSet;
pub use dual_field::{AlphaField, Integrator, ProblemVariant, QuadratureSpec};
pub use error::{Error, Result};
pub use kernels::{DomainBox, Interval, KernelSpec};
pub use losses::{Loss, LossKind};
pub use model::{DiscreteModel, Term};
pub use solver::{DualState, SolverConfig};
