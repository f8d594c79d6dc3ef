//! Convex per-sample fit functionals `c(yhat, y)` and the scalar inner
//! minimization `argmin_yhat mu * c(yhat, y) + lambda * yhat` used when
//! evaluating the dual function.
//!
//! A sample's constraint is satisfied when `c <= 0`; `epsilon` is the slack.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `(yhat - y)^2 - eps`
    QuadraticEps,
    /// `|yhat - y| - eps`
    AbsoluteEps,
    /// `max(0, 1 - y * yhat) - eps`
    HingeEps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    pub kind: LossKind,
    pub epsilon: f64,
    /// Half-width of the box `[y - r, y + r]` that bounds inner minimizers.
    pub clamp_radius: f64,
}

pub const DEFAULT_REGRESSION_EPSILON: f64 = 1e-3;
pub const DEFAULT_HINGE_EPSILON: f64 = 0.05;

impl Loss {
    pub fn new(kind: LossKind, epsilon: f64, clamp_radius: f64) -> Result<Self> {
        let l = Self {
            kind,
            epsilon,
            clamp_radius,
        };
        l.validate()?;
        Ok(l)
    }

    /// Loss with the default clamp radius `10 * (max y - min y)`; a constant
    /// label vector falls back to a unit range.
    pub fn for_labels(kind: LossKind, epsilon: f64, y: &[f64]) -> Result<Self> {
        Self::new(kind, epsilon, default_clamp_radius(y))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return config(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.clamp_radius > 0.0 && self.clamp_radius.is_finite()) {
            return config(format!("clamp_radius must be > 0, got {}", self.clamp_radius));
        }
        Ok(())
    }

    pub fn value(&self, yhat: f64, y: f64) -> f64 {
        loss_value(self, yhat, y)
    }
}

pub fn default_clamp_radius(y: &[f64]) -> f64 {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    10.0 * if range.is_finite() && range > 0.0 { range } else { 1.0 }
}

pub fn loss_value(loss: &Loss, yhat: f64, y: f64) -> f64 {
    let raw = match loss.kind {
        LossKind::QuadraticEps => (yhat - y) * (yhat - y),
        LossKind::AbsoluteEps => (yhat - y).abs(),
        LossKind::HingeEps => (1.0 - y * yhat).max(0.0),
    };
    raw - loss.epsilon
}

/// `argmin_{yhat in [y - r, y + r]} mu * c(yhat, y) + lambda * yhat`.
///
/// The minimization is always carried out over the clamp box, which only
/// changes the answer when the unconstrained objective is unbounded below
/// (or its minimizer lies farther than `r` from `y`). Ties resolve to the
/// loss kink, then to `y`.
pub fn inner_minimize(loss: &Loss, lambda: f64, mu: f64, y: f64) -> Result<f64> {
    if mu < 0.0 || mu.is_nan() {
        return domain(format!("mu must be nonnegative, got {mu}"));
    }
    Ok(inner_minimize_unchecked(loss, lambda, mu, y))
}

#[inline]
pub(crate) fn inner_minimize_unchecked(loss: &Loss, lambda: f64, mu: f64, y: f64) -> f64 {
    if lambda == 0.0 && mu == 0.0 {
        return y;
    }
    let lo = y - loss.clamp_radius;
    let hi = y + loss.clamp_radius;
    match loss.kind {
        LossKind::QuadraticEps => {
            if mu > 0.0 {
                (y - lambda / (2.0 * mu)).clamp(lo, hi)
            } else {
                linear_end(lambda, y, lo, hi)
            }
        }
        LossKind::AbsoluteEps => piecewise_linear_min(loss, lambda, mu, y, Some(y), lo, hi),
        LossKind::HingeEps => {
            let kink = if y != 0.0 { Some(1.0 / y) } else { None };
            piecewise_linear_min(loss, lambda, mu, y, kink, lo, hi)
        }
    }
}

fn linear_end(lambda: f64, y: f64, lo: f64, hi: f64) -> f64 {
    if lambda > 0.0 {
        lo
    } else if lambda < 0.0 {
        hi
    } else {
        y
    }
}

/// Exact minimizer of a convex piecewise-linear objective with at most one
/// kink: the minimum is attained at the kink or at a box end.
fn piecewise_linear_min(
    loss: &Loss,
    lambda: f64,
    mu: f64,
    y: f64,
    kink: Option<f64>,
    lo: f64,
    hi: f64,
) -> f64 {
    let obj = |t: f64| mu * loss_value(loss, t, y) + lambda * t;
    let mut cands = Vec::with_capacity(4);
    if let Some(k) = kink.filter(|k| *k >= lo && *k <= hi) {
        cands.push(k);
    }
    cands.extend([y, lo, hi]);
    let mut best = cands[0];
    let mut best_val = obj(best);
    for &c in &cands[1..] {
        let v = obj(c);
        // Earlier candidates win ties up to rounding.
        if v < best_val - 1e-12 * (1.0 + best_val.abs()) {
            best = c;
            best_val = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const KINDS: [LossKind; 3] = [LossKind::QuadraticEps, LossKind::AbsoluteEps, LossKind::HingeEps];

    fn loss(kind: LossKind, eps: f64) -> Loss {
        Loss::new(kind, eps, 5.0).unwrap()
    }

    #[test]
    fn loss_values() {
        assert_eq!(loss(LossKind::QuadraticEps, 0.0).value(1.3, 1.3), 0.0);
        assert!((loss(LossKind::HingeEps, 0.1).value(1.0, 1.0) + 0.1).abs() < 1e-15);
        assert_eq!(loss(LossKind::QuadraticEps, 1.0).value(2.0, 0.0), 3.0);
        assert_eq!(loss(LossKind::AbsoluteEps, 0.5).value(-1.0, 1.0), 1.5);
    }

    #[test]
    fn validation() {
        assert!(Loss::new(LossKind::QuadraticEps, -1e-3, 1.0).is_err());
        assert!(Loss::new(LossKind::QuadraticEps, 0.0, 0.0).is_err());
        assert!(inner_minimize(&loss(LossKind::AbsoluteEps, 0.0), 0.0, -1.0, 0.0).is_err());
        assert_eq!(default_clamp_radius(&[0.0, 2.0, 1.0]), 20.0);
        assert_eq!(default_clamp_radius(&[3.0]), 10.0);
    }

    #[test]
    fn inner_examples() {
        let q = loss(LossKind::QuadraticEps, 1e-3);
        assert_eq!(inner_minimize(&q, 0.0, 1.0, 2.0).unwrap(), 2.0);
        assert_eq!(inner_minimize(&q, 1.0, 2.0, 0.0).unwrap(), -0.25);
        let h = loss(LossKind::HingeEps, 0.05);
        assert_eq!(inner_minimize(&h, 0.5, 1.0, 1.0).unwrap(), 1.0);
        // origin of the dual: any minimizer works, y is returned
        for kind in KINDS {
            assert_eq!(inner_minimize(&loss(kind, 0.0), 0.0, 0.0, 0.7).unwrap(), 0.7);
        }
    }

    #[test]
    fn unbounded_cases_are_clamped() {
        let q = loss(LossKind::QuadraticEps, 0.0);
        assert_eq!(inner_minimize(&q, 1.0, 0.0, 1.0).unwrap(), -4.0);
        assert_eq!(inner_minimize(&q, -1.0, 0.0, 1.0).unwrap(), 6.0);
        let a = loss(LossKind::AbsoluteEps, 0.0);
        assert_eq!(inner_minimize(&a, 2.0, 1.0, 0.0).unwrap(), -5.0);
        assert_eq!(inner_minimize(&a, 0.5, 1.0, 0.0).unwrap(), 0.0);
        let h = loss(LossKind::HingeEps, 0.0);
        // lambda * y < 0: push the margin up
        assert_eq!(inner_minimize(&h, -0.5, 1.0, 1.0).unwrap(), 6.0);
        // lambda * y > mu: push the margin down
        assert_eq!(inner_minimize(&h, 2.0, 1.0, 1.0).unwrap(), -4.0);
    }

    /// Grid oracle: 10 001 points on `[y - r, y + r]`.
    fn grid_min(l: &Loss, lambda: f64, mu: f64, y: f64) -> (f64, f64) {
        let n = 10_001;
        let (lo, hi) = (y - l.clamp_radius, y + l.clamp_radius);
        let step = (hi - lo) / (n - 1) as f64;
        let mut best = f64::INFINITY;
        for k in 0..n {
            let t = lo + step * k as f64;
            best = best.min(mu * l.value(t, y) + lambda * t);
        }
        (best, step)
    }

    #[test]
    fn inner_minimizer_beats_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for case in 0..10_000 {
            let kind = KINDS[case % 3];
            let y = match kind {
                LossKind::HingeEps => {
                    if rng.random_bool(0.5) { 1.0 } else { -1.0 }
                }
                _ => rng.random_range(-3.0..3.0),
            };
            let l = Loss::new(kind, rng.random_range(0.0..0.2), rng.random_range(0.5..4.0)).unwrap();
            let mu = rng.random_range(0.01..3.0);
            let lambda = rng.random_range(-3.0..3.0);
            let yd = inner_minimize(&l, lambda, mu, y).unwrap();
            assert!(yd >= y - l.clamp_radius && yd <= y + l.clamp_radius);
            let obj = mu * l.value(yd, y) + lambda * yd;
            let (g, _) = grid_min(&l, lambda, mu, y);
            assert!(obj <= g + 1e-9, "{kind:?} lambda={lambda} mu={mu} y={y}: {obj} > {g}");
        }
    }

    #[test]
    fn closed_forms_agree_with_grid_argmin() {
        // quadratic: y - lambda / (2 mu) whenever it lies inside the box
        let l = loss(LossKind::QuadraticEps, 0.0);
        let (lambda, mu, y) = (1.0, 2.0, 0.0);
        let (g, step) = grid_min(&l, lambda, mu, y);
        let yd = inner_minimize(&l, lambda, mu, y).unwrap();
        assert!((mu * l.value(yd, y) + lambda * yd - g).abs() <= mu * step * step);
    }

    proptest! {
        #[test]
        fn losses_are_midpoint_convex(
            k in 0usize..3, eps in 0.0f64..1.0, y in -2.0f64..2.0,
            a in -10.0f64..10.0, b in -10.0f64..10.0,
        ) {
            let l = loss(KINDS[k], eps);
            let mid = l.value(0.5 * (a + b), y);
            prop_assert!(mid <= 0.5 * l.value(a, y) + 0.5 * l.value(b, y) + 1e-12);
        }
    }
}
