//! Piecewise-constant approximations of a discrete model by bumps
//! `alpha_m(z, w) = sum_j a_j r_m(w - w_j) prod_k r_m(z_k - z_jk)`, with the
//! unit-mass box `r_m(t) = m 1[|t| < 1/(2m)]`.

use crate::error::{config, domain, Result};
use crate::kernels::KernelSpec;
use crate::model::DiscreteModel;

/// Evaluable bump field over centers and widths.
#[derive(Debug, Clone)]
pub struct BumpField {
    model: DiscreteModel,
    m: usize,
    kernel: KernelSpec,
}

/// Builds the bump field of `model` at resolution `m`. Every bump support
/// must lie inside the center box and the width interval.
pub fn bump_field(model: &DiscreteModel, m: usize, kernel: &KernelSpec) -> Result<BumpField> {
    if m == 0 {
        return config("bump resolution m must be >= 1");
    }
    let half = 0.5 / m as f64;
    for (j, t) in model.terms.iter().enumerate() {
        if t.z.len() != kernel.dim() {
            return domain(format!("term {j} has the wrong dimension"));
        }
        let inside_w = t.w - half >= kernel.w_lo && t.w + half <= kernel.w_hi;
        let inside_z = t
            .z
            .iter()
            .zip(kernel.center_box.axes())
            .all(|(&z, a)| z - half >= a.lo && z + half <= a.hi);
        if !(inside_w && inside_z) {
            return domain(format!("bump {j} of half-width {half} escapes the domain"));
        }
    }
    Ok(BumpField {
        model: model.clone(),
        m,
        kernel: kernel.clone(),
    })
}

impl BumpField {
    fn r(&self, t: f64) -> f64 {
        let m = self.m as f64;
        if t.abs() < 0.5 / m {
            m
        } else {
            0.0
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn eval(&self, z: &[f64], w: f64) -> f64 {
        self.model
            .terms
            .iter()
            .map(|t| {
                let mut v = t.a * self.r(w - t.w);
                for (zk, tk) in z.iter().zip(&t.z) {
                    v *= self.r(zk - tk);
                }
                v
            })
            .sum()
    }

    /// Integral of `alpha_m` over the whole domain (equals `sum_j a_j`).
    pub fn mass(&self) -> f64 {
        self.model.terms.iter().map(|t| t.a).sum()
    }

    /// `integral alpha_m(z, w) k(x, z; w) dz dw`, computed bump by bump with
    /// an `order`-point midpoint rule per axis on each support box.
    pub fn integrate(&self, x: &[f64], order: usize) -> f64 {
        let dim = self.kernel.dim();
        let m = self.m as f64;
        let side = 1.0 / m;
        let h = side / order as f64;
        let density = m.powi(dim as i32 + 1);
        let cell = h.powi(dim as i32 + 1);
        let mut total = 0.0;
        let mut idx = vec![0usize; dim + 1];
        let mut z = vec![0.0; dim];
        for t in &self.model.terms {
            let count = order.pow(dim as u32 + 1);
            let mut acc = 0.0;
            idx.iter_mut().for_each(|i| *i = 0);
            for _ in 0..count {
                for k in 0..dim {
                    z[k] = t.z[k] - 0.5 * side + (idx[k] as f64 + 0.5) * h;
                }
                let w = t.w - 0.5 * side + (idx[dim] as f64 + 0.5) * h;
                acc += self.kernel.eval_unchecked(x, &z, w);
                for k in (0..=dim).rev() {
                    idx[k] += 1;
                    if idx[k] < order {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            total += t.a * density * cell * acc;
        }
        total
    }

    fn disjoint(&self) -> bool {
        let side = 1.0 / self.m as f64;
        let terms = &self.model.terms;
        for (i, s) in terms.iter().enumerate() {
            for t in &terms[i + 1..] {
                let overlap_w = (s.w - t.w).abs() < side;
                let overlap_z = s.z.iter().zip(&t.z).all(|(a, b)| (a - b).abs() < side);
                if overlap_w && overlap_z {
                    return false;
                }
            }
        }
        true
    }

    /// `1/2 |alpha_m|_2^2 + gamma |supp alpha_m|` for disjoint bumps with
    /// nonzero amplitudes.
    pub fn primal_objective(&self, gamma: f64) -> Result<f64> {
        if !self.disjoint() {
            return config("bump supports overlap");
        }
        let dim = self.kernel.dim() as i32;
        let m = self.m as f64;
        let vol = m.powi(-(dim + 1));
        Ok(self
            .model
            .terms
            .iter()
            .filter(|t| t.a != 0.0)
            .map(|t| 0.5 * t.a * t.a * m.powi(dim + 1) + gamma * vol)
            .sum())
    }
}
