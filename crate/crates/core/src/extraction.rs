//! Turning a dual field into a finite kernel model: peak search on
//! `|abar(z, w)|` followed by a least-squares amplitude refit.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::SampleSet;
use crate::dual_field::{AlphaField, ProblemVariant};
use crate::error::{config, Error, Result};
use crate::kernels::KernelSpec;
use crate::model::{DiscreteModel, Term};

/// Highest center dimension the grid scan supports.
pub const MAX_SCAN_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakConfig {
    /// Coarse-scan points per center axis.
    pub grid: usize,
    /// Coarse-scan points along the width axis.
    pub width_grid: usize,
    pub refine_steps: usize,
    /// Merge distance in units of the surviving peak's width.
    pub merge_radius: f64,
    /// Defaults to the field threshold `sqrt(2 gamma)`.
    pub threshold: Option<f64>,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            grid: 64,
            width_grid: 32,
            refine_steps: 50,
            merge_radius: 0.5,
            threshold: None,
        }
    }
}

impl PeakConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 || self.width_grid < 2 {
            return config("peak grid needs at least 2 points per axis");
        }
        if !(self.merge_radius > 0.0) {
            return config("merge_radius must be > 0");
        }
        if let Some(t) = self.threshold {
            if !(t >= 0.0) {
                return config("peak threshold must be >= 0");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub z: Vec<f64>,
    pub w: f64,
    /// `abar(z, w)` at the peak.
    pub value: f64,
    /// `|abar|` after each accepted refinement step, starting at the grid point.
    #[serde(skip)]
    pub trajectory: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || hi == lo {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Search coordinates: the free center axes (if any) followed by the width.
struct Space<'a> {
    field: &'a AlphaField,
    center: Option<Vec<f64>>,
    free_w: bool,
    w_fixed: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Space<'_> {
    fn split(&self, u: &[f64]) -> (Vec<f64>, f64) {
        match &self.center {
            Some(c) => (c.clone(), u[0]),
            None if self.free_w => (u[..u.len() - 1].to_vec(), u[u.len() - 1]),
            None => (u.to_vec(), self.w_fixed),
        }
    }

    fn value(&self, u: &[f64]) -> f64 {
        let (z, w) = self.split(u);
        self.field.abar_unchecked(&z, w)
    }

    /// `|abar|`, its gradient preconditioned by `w^2`, and the directional
    /// derivative along that direction.
    fn ascent_dir(&self, u: &[f64]) -> (f64, Vec<f64>, f64) {
        let (z, w) = self.split(u);
        let (v, gz, gw) = self.field.abar_with_grad(&z, w);
        let s = v.signum() * w * w;
        let mut d = Vec::with_capacity(u.len());
        if self.center.is_none() {
            d.extend(gz.iter().map(|g| s * g));
        }
        if self.free_w {
            d.push(s * gw);
        }
        for ((di, ui), (lo, hi)) in d.iter_mut().zip(u).zip(self.lo.iter().zip(&self.hi)) {
            if (*ui <= *lo && *di < 0.0) || (*ui >= *hi && *di > 0.0) {
                *di = 0.0;
            }
        }
        let slope = d.iter().map(|x| x * x).sum::<f64>() / (w * w);
        (v.abs(), d, slope)
    }

    fn project(&self, u: &mut [f64]) {
        for ((v, lo), hi) in u.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn refine(&self, start: Vec<f64>, steps: usize) -> (Vec<f64>, Vec<f64>) {
        let mut u = start;
        let (mut cur, mut dir, mut slope) = self.ascent_dir(&u);
        let mut traj = vec![cur];
        let mut step = 1.0;
        for _ in 0..steps {
            if !(slope > 0.0) {
                break;
            }
            let mut accepted = false;
            while step > 1e-12 {
                let mut cand: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                self.project(&mut cand);
                let v = self.value(&cand).abs();
                if v > cur + 1e-4 * step * slope {
                    u = cand;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            (cur, dir, slope) = self.ascent_dir(&u);
            traj.push(cur);
            step = (step * 2.0).min(4.0);
        }
        (u, traj)
    }
}

/// Indices of grid points whose `|value|` is at least that of every
/// neighbour (including diagonals) and above `thr`.
fn grid_local_maxima(values: &[f64], shape: &[usize], thr: f64) -> Vec<usize> {
    let d = shape.len();
    let mut strides = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    let neigh = 3usize.pow(d as u32);
    (0..values.len())
        .filter(|&flat| {
            let v = values[flat].abs();
            if !(v > thr) {
                return false;
            }
            let idx: Vec<usize> = (0..d).map(|k| (flat / strides[k]) % shape[k]).collect();
            for code in 0..neigh {
                let mut other = 0usize;
                let mut is_self = true;
                let mut valid = true;
                let mut c = code;
                for k in 0..d {
                    let off = (c % 3) as isize - 1;
                    c /= 3;
                    if off != 0 {
                        is_self = false;
                    }
                    let j = idx[k] as isize + off;
                    if j < 0 || j >= shape[k] as isize {
                        valid = false;
                        break;
                    }
                    other += j as usize * strides[k];
                }
                if valid && !is_self && values[other].abs() > v {
                    return false;
                }
            }
            true
        })
        .collect()
}

fn scan_space(space: &Space<'_>, axes: &[Vec<f64>], thr: f64, steps: usize) -> Vec<Peak> {
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();
    let point = |flat: usize| -> Vec<f64> {
        let mut rem = flat;
        let mut u = vec![0.0; axes.len()];
        for k in (0..axes.len()).rev() {
            u[k] = axes[k][rem % shape[k]];
            rem /= shape[k];
        }
        u
    };
    let values: Vec<f64> = (0..total).into_par_iter().map(|f| space.value(&point(f))).collect();
    grid_local_maxima(&values, &shape, thr)
        .into_par_iter()
        .map(|flat| {
            let (u, trajectory) = space.refine(point(flat), steps);
            let (z, w) = space.split(&u);
            let value = space.value(&u);
            Peak { z, w, value, trajectory }
        })
        .collect()
}

/// Local maxima of `|abar|` above the threshold, merged and sorted by
/// descending `|abar|`.
pub fn find_peaks(field: &AlphaField, cfg: &PeakConfig) -> Result<Vec<Peak>> {
    cfg.validate()?;
    let thr = cfg.threshold.unwrap_or_else(|| field.threshold());
    if field.lambda().iter().all(|l| *l == 0.0) {
        return Ok(Vec::new());
    }
    let kernel = field.kernel();
    let widths = kernel.widths();
    let dim = kernel.dim();
    let w_axis = linspace(widths.lo, widths.hi, if widths.len() > 0.0 { cfg.width_grid } else { 1 });
    let center_axes: Vec<Vec<f64>> = kernel
        .center_box
        .axes()
        .iter()
        .map(|a| linspace(a.lo, a.hi, cfg.grid))
        .collect();
    let mut raw = Vec::new();
    match field.variant() {
        ProblemVariant::FixedCenters { centers } => {
            for c in centers {
                let space = Space {
                    field,
                    center: Some(c.clone()),
                    free_w: true,
                    w_fixed: 0.0,
                    lo: vec![widths.lo],
                    hi: vec![widths.hi],
                };
                raw.extend(scan_space(&space, std::slice::from_ref(&w_axis), thr, cfg.refine_steps));
            }
        }
        variant => {
            if dim > MAX_SCAN_DIM {
                return config(format!(
                    "peak scan supports at most {MAX_SCAN_DIM} center dimensions, got {dim}"
                ));
            }
            let (free_w, w_fixed) = match variant {
                ProblemVariant::FixedWidth { w0 } => (false, *w0),
                _ => (true, 0.0),
            };
            let mut lo: Vec<f64> = kernel.center_box.axes().iter().map(|a| a.lo).collect();
            let mut hi: Vec<f64> = kernel.center_box.axes().iter().map(|a| a.hi).collect();
            let mut axes = center_axes;
            if free_w {
                lo.push(widths.lo);
                hi.push(widths.hi);
                axes.push(w_axis);
            }
            let space = Space {
                field,
                center: None,
                free_w,
                w_fixed,
                lo,
                hi,
            };
            raw = scan_space(&space, &axes, thr, cfg.refine_steps);
        }
    }
    raw.retain(|p| p.value.abs() > thr);
    raw.sort_by(|a, b| {
        b.value
            .abs()
            .total_cmp(&a.value.abs())
            .then_with(|| a.z.iter().zip(&b.z).fold(std::cmp::Ordering::Equal, |o, (x, y)| o.then(x.total_cmp(y))))
            .then_with(|| a.w.total_cmp(&b.w))
    });
    let fixed_centers = matches!(field.variant(), ProblemVariant::FixedCenters { .. });
    let mut kept: Vec<Peak> = Vec::new();
    for p in raw {
        let dup = kept.iter().any(|q| {
            let r = cfg.merge_radius * q.w;
            let dz = crate::kernels::sq_dist(&p.z, &q.z).sqrt();
            let same_center = if fixed_centers { p.z == q.z } else { dz <= r };
            same_center && (p.w - q.w).abs() <= r
        });
        if !dup {
            kept.push(p);
        }
    }
    Ok(kept)
}

/// Ridge used when the caller's system turns out rank deficient.
pub const FALLBACK_RIDGE: f64 = 1e-8;
pub const DEFAULT_REFIT_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Refit {
    pub model: DiscreteModel,
    /// Ridge actually used; larger than requested after a rank-deficient retry.
    pub ridge: f64,
}

fn design(peaks: &[(Vec<f64>, f64)], samples: &SampleSet, kernel: &KernelSpec) -> DMatrix<f64> {
    DMatrix::from_fn(samples.len(), peaks.len(), |i, j| {
        kernel.eval_unchecked(samples.row(i), &peaks[j].0, peaks[j].1)
    })
}

/// Solves `(A + ridge I) a = b` for symmetric positive semi-definite `A`,
/// escalating the ridge on failure.
pub(crate) fn ridge_solve(a: &DMatrix<f64>, b: &DVector<f64>, ridge: f64) -> Result<(DVector<f64>, f64)> {
    let n = a.nrows();
    let mut r = ridge;
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    loop {
        let m = a + DMatrix::identity(n, n) * r;
        if let Some(ch) = m.cholesky() {
            let l = ch.l_dirty();
            let min_pivot = (0..n).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
            let sol = ch.solve(b);
            if min_pivot > 1e-13 * scale && sol.iter().all(|v| v.is_finite()) {
                return Ok((sol, r));
            }
        }
        r = if r < FALLBACK_RIDGE { FALLBACK_RIDGE } else { r * 100.0 };
        if r > 1e-2 * scale {
            return Err(Error::Numeric("least-squares system is singular".into()));
        }
    }
}

/// `argmin_a sum_i (y_i - sum_j a_j k(x_i, z_j; w_j))^2 + ridge |a|^2`.
pub fn refit_amplitudes_detailed(
    peaks: &[(Vec<f64>, f64)],
    samples: &SampleSet,
    kernel: &KernelSpec,
    ridge: f64,
) -> Result<Refit> {
    if peaks.is_empty() {
        return config("refit needs at least one peak");
    }
    if !(ridge >= 0.0) {
        return config("ridge must be >= 0");
    }
    for (z, w) in peaks {
        if z.len() != kernel.dim() {
            return config("peak dimension differs from the kernel");
        }
        kernel.check_width(*w)?;
    }
    let phi = design(peaks, samples, kernel);
    let y = DVector::from_column_slice(samples.y());
    let (a, used) = ridge_solve(&(phi.transpose() * &phi), &(phi.transpose() * y), ridge)?;
    let terms = peaks
        .iter()
        .zip(a.iter())
        .map(|((z, w), a)| Term { a: *a, z: z.clone(), w: *w })
        .collect();
    Ok(Refit {
        model: DiscreteModel::new(terms),
        ridge: used,
    })
}

pub fn refit_amplitudes(
    peaks: &[(Vec<f64>, f64)],
    samples: &SampleSet,
    kernel: &KernelSpec,
    ridge: f64,
) -> Result<DiscreteModel> {
    Ok(refit_amplitudes_detailed(peaks, samples, kernel, ridge)?.model)
}

/// Peaks of `field` refit against its own samples; no peaks gives the zero model.
pub fn extract(field: &AlphaField, cfg: &PeakConfig, ridge: f64) -> Result<DiscreteModel> {
    let peaks: Vec<(Vec<f64>, f64)> = find_peaks(field, cfg)?.into_iter().map(|p| (p.z, p.w)).collect();
    if peaks.is_empty() {
        return Ok(DiscreteModel::default());
    }
    refit_amplitudes(&peaks, field.samples(), field.kernel(), ridge)
}
