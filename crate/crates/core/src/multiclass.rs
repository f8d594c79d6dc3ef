//! One-vs-one classification on top of any binary model trainer.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::SampleSet;
use crate::dual_field::ProblemVariant;
use crate::error::{config, Error, Result};
use crate::kernels::KernelSpec;
use crate::losses::{Loss, LossKind, DEFAULT_HINGE_EPSILON};
use crate::model::DiscreteModel;
use crate::pipeline::{fit_extract, FitOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct PairModel {
    /// Lower label, mapped to `+1` during training.
    pub lo: f64,
    /// Higher label, mapped to `-1`.
    pub hi: f64,
    pub model: DiscreteModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OvoRepr", into = "OvoRepr")]
pub struct OvoEnsemble {
    classes: Vec<f64>,
    pairwise: Vec<PairModel>,
}

#[derive(Serialize, Deserialize)]
struct OvoRepr {
    classes: Vec<f64>,
    /// Keyed by `"lo,hi"`.
    pairwise: BTreeMap<String, DiscreteModel>,
}

fn pair_key(lo: f64, hi: f64) -> String {
    format!("{lo},{hi}")
}

impl From<OvoEnsemble> for OvoRepr {
    fn from(e: OvoEnsemble) -> Self {
        Self {
            classes: e.classes,
            pairwise: e.pairwise.into_iter().map(|p| (pair_key(p.lo, p.hi), p.model)).collect(),
        }
    }
}

impl TryFrom<OvoRepr> for OvoEnsemble {
    type Error = Error;

    fn try_from(r: OvoRepr) -> Result<Self> {
        let mut map = r.pairwise;
        let mut pairwise = Vec::new();
        for (a, &lo) in r.classes.iter().enumerate() {
            for &hi in &r.classes[a + 1..] {
                let model = map
                    .remove(&pair_key(lo, hi))
                    .ok_or_else(|| Error::Config(format!("missing pair model {lo},{hi}")))?;
                pairwise.push(PairModel { lo, hi, model });
            }
        }
        if !map.is_empty() {
            return config("ensemble has pair models for unknown classes");
        }
        OvoEnsemble::new(r.classes, pairwise)
    }
}

impl OvoEnsemble {
    /// `classes` strictly increasing; one model per pair in lexicographic order.
    pub fn new(classes: Vec<f64>, pairwise: Vec<PairModel>) -> Result<Self> {
        if classes.len() < 2 {
            return config("one-vs-one needs at least 2 classes");
        }
        if classes.windows(2).any(|w| !(w[0] < w[1])) {
            return config("classes must be strictly increasing");
        }
        let c = classes.len();
        if pairwise.len() != c * (c - 1) / 2 {
            return config("ensemble needs one model per class pair");
        }
        let mut k = 0;
        for a in 0..c {
            for b in a + 1..c {
                if pairwise[k].lo != classes[a] || pairwise[k].hi != classes[b] {
                    return config("pair models are not in class order");
                }
                k += 1;
            }
        }
        Ok(Self { classes, pairwise })
    }

    pub fn classes(&self) -> &[f64] {
        &self.classes
    }

    pub fn pairwise(&self) -> &[PairModel] {
        &self.pairwise
    }
}

/// Distinct labels in increasing order.
pub fn classes_of(y: &[f64]) -> Vec<f64> {
    let mut c = y.to_vec();
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// Trains one model per class pair on that pair's samples with labels
/// `+1` (lower class) and `-1` (higher class). Pairs train concurrently.
pub fn ovo_train<F>(samples: &SampleSet, trainer: F) -> Result<OvoEnsemble>
where
    F: Fn(&SampleSet) -> Result<DiscreteModel> + Sync,
{
    let classes = classes_of(samples.y());
    if classes.len() < 2 {
        return config("one-vs-one needs at least 2 classes");
    }
    let pairs: Vec<(f64, f64)> = classes
        .iter()
        .enumerate()
        .flat_map(|(a, &lo)| classes[a + 1..].iter().map(move |&hi| (lo, hi)))
        .collect();
    let pairwise = pairs
        .par_iter()
        .map(|&(lo, hi)| {
            let idx: Vec<usize> = (0..samples.len())
                .filter(|&i| samples.y()[i] == lo || samples.y()[i] == hi)
                .collect();
            let sub = samples.subset(&idx);
            let signs = sub.y().iter().map(|&v| if v == lo { 1.0 } else { -1.0 }).collect();
            let model = trainer(&sub.with_labels(signs)?)?;
            Ok(PairModel { lo, hi, model })
        })
        .collect::<Result<Vec<_>>>()?;
    OvoEnsemble::new(classes, pairwise)
}

/// Votes per class (in `classes()` order). A nonnegative prediction votes
/// for the lower label of the pair.
pub fn ovo_votes(ens: &OvoEnsemble, x: &[f64]) -> Vec<usize> {
    let mut votes = vec![0; ens.classes.len()];
    let pos = |v: f64| ens.classes.iter().position(|c| *c == v).expect("pair label is a class");
    for p in &ens.pairwise {
        let winner = if p.model.predict(x) >= 0.0 { p.lo } else { p.hi };
        votes[pos(winner)] += 1;
    }
    votes
}

/// Label with most votes; ties go to the lowest label.
pub fn ovo_predict(ens: &OvoEnsemble, x: &[f64]) -> f64 {
    let votes = ovo_votes(ens, x);
    let best = votes.iter().copied().max().unwrap_or(0);
    let k = votes.iter().position(|v| *v == best).unwrap_or(0);
    ens.classes[k]
}

pub fn accuracy(ens: &OvoEnsemble, samples: &SampleSet) -> f64 {
    let hits = samples
        .rows()
        .zip(samples.y())
        .filter(|(x, y)| ovo_predict(ens, x) == **y)
        .count();
    hits as f64 / samples.len() as f64
}

/// Binary trainer fitting a hinge-loss program and extracting its peaks.
#[derive(Debug, Clone)]
pub struct HingeTrainer {
    pub kernel: KernelSpec,
    pub variant: ProblemVariant,
    pub epsilon: f64,
    pub options: FitOptions,
}

impl HingeTrainer {
    pub fn new(kernel: KernelSpec, variant: ProblemVariant, options: FitOptions) -> Self {
        Self {
            kernel,
            variant,
            epsilon: DEFAULT_HINGE_EPSILON,
            options,
        }
    }

    pub fn train(&self, samples: &SampleSet) -> Result<DiscreteModel> {
        let loss = Loss::for_labels(LossKind::HingeEps, self.epsilon, samples.y())?;
        Ok(fit_extract(samples, &self.kernel, &loss, &self.variant, &self.options)?.model)
    }
}
