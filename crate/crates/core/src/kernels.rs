//! Parametrized reproducing-kernel families.
//!
//! Only the Gaussian family `k(x, z; w) = exp(-|x - z|^2 / (2 w^2))` ships.
//! The width `w` plays the role of a standard deviation. Every function here
//! is pure; callers that need repeated evaluations own their own caches.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Axis-aligned box in feature space, serialized as `[[lo, hi], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct DomainBox {
    axes: Vec<Interval>,
}

impl From<Vec<[f64; 2]>> for DomainBox {
    fn from(v: Vec<[f64; 2]>) -> Self {
        Self {
            axes: v.into_iter().map(|[lo, hi]| Interval { lo, hi }).collect(),
        }
    }
}

impl From<DomainBox> for Vec<[f64; 2]> {
    fn from(b: DomainBox) -> Self {
        b.axes.iter().map(|a| [a.lo, a.hi]).collect()
    }
}

impl DomainBox {
    pub fn new(axes: Vec<Interval>) -> Result<Self> {
        let b = Self { axes };
        b.validate()?;
        Ok(b)
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![Interval::new(lo, hi); dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return config("domain box needs at least one axis");
        }
        for (k, a) in self.axes.iter().enumerate() {
            if !(a.lo.is_finite() && a.hi.is_finite() && a.hi > a.lo) {
                return config(format!("box axis {k} has non-positive extent [{}, {}]", a.lo, a.hi));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Interval] {
        &self.axes
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(Interval::len).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.axes.len() && self.axes.iter().zip(x).all(|(a, &v)| a.contains(v))
    }

    pub fn clamp_into(&self, x: &mut [f64]) {
        for (a, v) in self.axes.iter().zip(x.iter_mut()) {
            *v = a.clamp(*v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
}

/// A kernel family together with the compact width and center domains it
/// is integrated over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub w_lo: f64,
    pub w_hi: f64,
    #[serde(rename = "box")]
    pub center_box: DomainBox,
}

impl KernelSpec {
    pub fn gaussian(w_lo: f64, w_hi: f64, center_box: DomainBox) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::Gaussian,
            w_lo,
            w_hi,
            center_box,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_lo > 0.0 && self.w_lo.is_finite()) {
            return config(format!("w_lo must be positive, got {}", self.w_lo));
        }
        if !(self.w_hi >= self.w_lo && self.w_hi.is_finite()) {
            return config(format!("w_hi ({}) must be >= w_lo ({})", self.w_hi, self.w_lo));
        }
        self.center_box.validate()
    }

    pub fn widths(&self) -> Interval {
        Interval::new(self.w_lo, self.w_hi)
    }

    pub fn dim(&self) -> usize {
        self.center_box.dim()
    }

    pub fn check_width(&self, w: f64) -> Result<()> {
        if w >= self.w_lo && w <= self.w_hi {
            Ok(())
        } else {
            domain(format!("width {w} outside [{}, {}]", self.w_lo, self.w_hi))
        }
    }

    /// `k(x, z; w)`.
    pub fn eval(&self, x: &[f64], z: &[f64], w: f64) -> Result<f64> {
        self.check_width(w)?;
        if x.len() != z.len() {
            return domain(format!("dimension mismatch: {} vs {}", x.len(), z.len()));
        }
        Ok(self.eval_unchecked(x, z, w))
    }

    /// Kernel value without domain checks; used on hot paths whose
    /// arguments were validated up front.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], z: &[f64], w: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => gaussian(sq_dist(x, z), w),
        }
    }

    /// `k(x_i, z; w)` for every row of the row-major `points` (`n x p`).
    pub fn eval_batch(&self, points: &[f64], z: &[f64], w: f64) -> Result<Vec<f64>> {
        self.check_width(w)?;
        let p = z.len();
        if p == 0 || points.len() % p != 0 {
            return domain("point buffer is not a multiple of the center dimension");
        }
        Ok(points
            .chunks_exact(p)
            .map(|x| self.eval_unchecked(x, z, w))
            .collect())
    }

    /// Analytic partials `(dk/dz, dk/dw)` at `(x, z, w)`.
    pub fn grad(&self, x: &[f64], z: &[f64], w: f64) -> Result<(Vec<f64>, f64)> {
        let k = self.eval(x, z, w)?;
        Ok(self.grad_from_value(x, z, w, k))
    }

    /// Same as [`grad`](Self::grad) when `k(x, z; w)` is already known.
    pub fn grad_from_value(&self, x: &[f64], z: &[f64], w: f64, k: f64) -> (Vec<f64>, f64) {
        match self.family {
            KernelFamily::Gaussian => {
                let w2 = w * w;
                let dz = x.iter().zip(z).map(|(xi, zi)| k * (xi - zi) / w2).collect();
                let dw = k * sq_dist(x, z) / (w2 * w);
                (dz, dw)
            }
        }
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Gaussian kernel value without a [`KernelSpec`].
#[inline]
pub fn gaussian_kernel(x: &[f64], z: &[f64], w: f64) -> f64 {
    gaussian(sq_dist(x, z), w)
}

#[inline]
fn gaussian(d2: f64, w: f64) -> f64 {
    (-d2 / (2.0 * w * w)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(dim: usize) -> KernelSpec {
        KernelSpec::gaussian(0.05, 2.0, DomainBox::cube(dim, -3.0, 3.0).unwrap()).unwrap()
    }

    #[test]
    fn coincident_points_give_one() {
        let s = spec(2);
        for w in [0.05, 0.3, 2.0] {
            assert_eq!(s.eval(&[0.4, -1.0], &[0.4, -1.0], w).unwrap(), 1.0);
        }
    }

    #[test]
    fn distance_equal_to_width() {
        let s = spec(1);
        let v = s.eval(&[0.0], &[0.7], 0.7).unwrap();
        assert_relative_eq!(v, (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(v, 0.60653, epsilon = 1e-5);
    }

    #[test]
    fn unit_distance_mixed_signal_width() {
        let s = spec(1);
        let v = s.eval(&[1.0], &[0.0], 0.453).unwrap();
        let expected = (-1.0 / (2.0 * 0.453f64 * 0.453)).exp();
        assert_relative_eq!(v, expected, max_relative = 1e-15);
        assert_relative_eq!(v, 0.0874, epsilon = 1e-4);
    }

    #[test]
    fn width_outside_domain_is_rejected() {
        let s = spec(1);
        assert!(s.eval(&[0.0], &[0.0], 0.01).is_err());
        assert!(s.eval(&[0.0], &[0.0], 2.5).is_err());
        assert!(s.grad(&[0.0], &[0.0], 3.0).is_err());
        assert!(s.eval_batch(&[0.0, 1.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn invalid_specs() {
        let b = DomainBox::cube(1, 0.0, 1.0).unwrap();
        assert!(KernelSpec::gaussian(0.0, 1.0, b.clone()).is_err());
        assert!(KernelSpec::gaussian(0.5, 0.4, b).is_err());
        assert!(DomainBox::cube(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn batch_matches_scalar_loop() {
        let s = spec(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<f64> = (0..40).map(|_| rng.random_range(-3.0..3.0)).collect();
        let z = [0.2, -0.4];
        let batch = s.eval_batch(&pts, &z, 0.8).unwrap();
        assert_eq!(batch.len(), 20);
        for (x, b) in pts.chunks(2).zip(&batch) {
            assert_eq!(*b, s.eval(x, &z, 0.8).unwrap());
        }
        assert_eq!(s.eval_batch(&[0.2, -0.4], &z, 0.8).unwrap(), vec![1.0]);
        assert_eq!(s.eval_batch(&[0.2, -0.4, 0.2, -0.4], &z, 0.1).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn gradient_vanishes_at_center_and_width_derivative_positive() {
        let s = spec(2);
        let (dz, _) = s.grad(&[1.0, 1.0], &[1.0, 1.0], 0.5).unwrap();
        assert!(dz.iter().all(|v| *v == 0.0));
        let (_, dw) = s.grad(&[1.0, 0.0], &[0.2, 0.3], 0.5).unwrap();
        assert!(dw > 0.0);
    }

    /// Central finite differences with step 1e-5 on 1000 random inputs.
    #[test]
    fn gradient_matches_finite_differences() {
        let s = spec(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..1000 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let z = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let w = rng.random_range(0.3..1.8);
            let (dz, dw) = s.grad(&x, &z, w).unwrap();
            let f = |z: [f64; 2], w: f64| s.eval(&x, &z, w).unwrap();
            let fd_w = (f(z, w + h) - f(z, w - h)) / (2.0 * h);
            assert!(rel_err(dw, fd_w) <= 1e-6, "dw {dw} vs {fd_w}");
            for k in 0..2 {
                let (mut zp, mut zm) = (z, z);
                zp[k] += h;
                zm[k] -= h;
                let fd = (f(zp, w) - f(zm, w)) / (2.0 * h);
                assert!(rel_err(dz[k], fd) <= 1e-6, "dz[{k}] {} vs {fd}", dz[k]);
            }
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(a.abs()).max(1e-3)
    }

    #[test]
    fn gram_matrix_is_psd() {
        let s = spec(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let n = 1 + trial % 20;
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let w = rng.random_range(0.05..2.0);
            let g = DMatrix::from_fn(n, n, |i, j| s.eval(&pts[i], &pts[j], w).unwrap());
            let min = g.symmetric_eigenvalues().min();
            assert!(min >= -1e-9, "min eigenvalue {min}");
        }
    }

    #[test]
    fn continuity_in_center_and_width() {
        let s = spec(1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let x = [rng.random_range(-2.0..2.0)];
            let z = rng.random_range(-2.0..2.0);
            let w = rng.random_range(0.2..1.5);
            let mut prev = f64::INFINITY;
            for d in [1e-2, 1e-4, 1e-6, 1e-8] {
                let diff = (s.eval(&x, &[z], w).unwrap() - s.eval(&x, &[z + d], w + d).unwrap()).abs();
                assert!(diff <= prev + 1e-15);
                prev = diff;
            }
            assert!(prev < 1e-6);
        }
    }

    #[test]
    fn json_shape() {
        let s = KernelSpec::gaussian(0.1, 1.0, DomainBox::cube(1, 0.0, 3.0).unwrap()).unwrap();
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(
            j,
            serde_json::json!({"family":"gaussian","w_lo":0.1,"w_hi":1.0,"box":[[0.0,3.0]]})
        );
        let back: KernelSpec = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
    }
}
