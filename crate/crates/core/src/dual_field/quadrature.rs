//! Integration nodes over the `(center, width)` domain of a problem variant,
//! and a cached kernel table for repeated dual evaluations on those nodes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ProblemVariant;
use crate::datasets::SampleSet;
use crate::error::{config, Result};
use crate::kernels::{Interval, KernelSpec};

/// Tensor midpoint rule resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Points per center axis.
    pub center_points: usize,
    pub width_points: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            center_points: 256,
            width_points: 64,
        }
    }
}

impl QuadratureSpec {
    pub fn new(center_points: usize, width_points: usize) -> Self {
        Self {
            center_points,
            width_points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.center_points == 0 || self.width_points == 0 {
            return config("quadrature grid sizes must be positive");
        }
        Ok(())
    }
}

fn midpoints(iv: Interval, n: usize) -> (Vec<f64>, f64) {
    let h = iv.len() / n as f64;
    ((0..n).map(|k| iv.lo + (k as f64 + 0.5) * h).collect(), h)
}

/// Weighted integration nodes `(z, w, weight)`.
#[derive(Debug, Clone)]
pub struct Nodes {
    dim: usize,
    z: Vec<f64>,
    w: Vec<f64>,
    weight: Vec<f64>,
}

impl Nodes {
    /// Midpoint-rule nodes for the domain of `variant`: `X x W` for the full
    /// problem, `X x {w0}` for a fixed width and `{z_j} x W` for fixed centers.
    pub fn midpoint(kernel: &KernelSpec, variant: &ProblemVariant, spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let dim = kernel.dim();
        let (ws, hw) = midpoints(kernel.widths(), spec.width_points);
        // a degenerate width interval carries unit measure
        let hw = if kernel.w_hi > kernel.w_lo { hw } else { 1.0 };
        let mut nodes = Nodes {
            dim,
            z: Vec::new(),
            w: Vec::new(),
            weight: Vec::new(),
        };
        match variant {
            ProblemVariant::Full => {
                let (grid, cell) = center_grid(kernel, spec.center_points)?;
                for z in grid.chunks_exact(dim) {
                    for &w in &ws {
                        nodes.push(z, w, cell * hw);
                    }
                }
            }
            ProblemVariant::FixedWidth { w0 } => {
                let (grid, cell) = center_grid(kernel, spec.center_points)?;
                for z in grid.chunks_exact(dim) {
                    nodes.push(z, *w0, cell);
                }
            }
            ProblemVariant::FixedCenters { centers } => {
                for z in centers {
                    for &w in &ws {
                        nodes.push(z, w, hw);
                    }
                }
            }
        }
        Ok(nodes)
    }

    fn push(&mut self, z: &[f64], w: f64, weight: f64) {
        self.z.extend_from_slice(z);
        self.w.push(w);
        self.weight.push(weight);
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn z(&self, k: usize) -> &[f64] {
        &self.z[k * self.dim..(k + 1) * self.dim]
    }

    pub fn w(&self, k: usize) -> f64 {
        self.w[k]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weight[k]
    }

    pub fn total_weight(&self) -> f64 {
        self.weight.iter().sum()
    }
}

fn center_grid(kernel: &KernelSpec, n: usize) -> Result<(Vec<f64>, f64)> {
    let dim = kernel.dim();
    let total = n
        .checked_pow(dim as u32)
        .filter(|t| *t <= 1 << 28)
        .ok_or_else(|| crate::Error::Config(format!("{n}^{dim} center nodes is too many")))?;
    let axes: Vec<(Vec<f64>, f64)> = kernel
        .center_box
        .axes()
        .iter()
        .map(|a| midpoints(*a, n))
        .collect();
    let cell: f64 = axes.iter().map(|(_, h)| h).product();
    let mut out = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        for (k, &i) in idx.iter().enumerate() {
            out.push(axes[k].0[i]);
        }
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok((out, cell))
}

/// Uniform sampler over the integration domain of a variant.
#[derive(Debug, Clone)]
pub struct DomainSampler<'a> {
    kernel: &'a KernelSpec,
    variant: &'a ProblemVariant,
}

impl<'a> DomainSampler<'a> {
    pub fn new(kernel: &'a KernelSpec, variant: &'a ProblemVariant) -> Self {
        Self { kernel, variant }
    }

    /// Measure of the domain; multiplies the batch mean.
    pub fn volume(&self) -> f64 {
        let wlen = if self.kernel.w_hi > self.kernel.w_lo {
            self.kernel.widths().len()
        } else {
            1.0
        };
        match self.variant {
            ProblemVariant::Full => self.kernel.center_box.volume() * wlen,
            ProblemVariant::FixedWidth { .. } => self.kernel.center_box.volume(),
            ProblemVariant::FixedCenters { centers } => centers.len() as f64 * wlen,
        }
    }

    /// Draws `(z, w)` into `z`, returning `w`.
    pub fn draw(&self, rng: &mut ChaCha8Rng, z: &mut Vec<f64>) -> f64 {
        z.clear();
        let draw_w = |rng: &mut ChaCha8Rng| {
            if self.kernel.w_hi > self.kernel.w_lo {
                rng.random_range(self.kernel.w_lo..self.kernel.w_hi)
            } else {
                self.kernel.w_lo
            }
        };
        match self.variant {
            ProblemVariant::Full => {
                for a in self.kernel.center_box.axes() {
                    z.push(rng.random_range(a.lo..a.hi));
                }
                draw_w(rng)
            }
            ProblemVariant::FixedWidth { w0 } => {
                for a in self.kernel.center_box.axes() {
                    z.push(rng.random_range(a.lo..a.hi));
                }
                *w0
            }
            ProblemVariant::FixedCenters { centers } => {
                let j = rng.random_range(0..centers.len());
                z.extend_from_slice(&centers[j]);
                draw_w(rng)
            }
        }
    }
}

/// Nodes per work chunk. Fixed so reductions do not depend on thread count.
const CHUNK: usize = 256;
/// Largest cached table (entries) before falling back to on-the-fly kernels.
const MAX_TABLE: usize = 1 << 26;

/// Kernel values `k(x_i, z_k; w_k)` for every sample `i` and node `k`,
/// cached when they fit in memory.
#[derive(Debug, Clone)]
pub struct KernelTable {
    nodes: Nodes,
    kernel: KernelSpec,
    x: Vec<f64>,
    n: usize,
    table: Option<Vec<f64>>,
}

impl KernelTable {
    pub fn new(nodes: Nodes, kernel: &KernelSpec, samples: &SampleSet) -> Self {
        let n = samples.len();
        let dim = samples.dim();
        let x = samples.x().to_vec();
        let table = (nodes.len().saturating_mul(n) <= MAX_TABLE).then(|| {
            let mut t = vec![0.0; nodes.len() * n];
            t.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
                let (z, w) = (nodes.z(k), nodes.w(k));
                for (i, v) in row.iter_mut().enumerate() {
                    *v = kernel.eval_unchecked(&x[i * dim..(i + 1) * dim], z, w);
                }
            });
            t
        });
        Self {
            nodes,
            kernel: kernel.clone(),
            x,
            n,
            table,
        }
    }

    pub fn nodes(&self) -> &Nodes {
        &self.nodes
    }

    /// Kernel row of node `k`, borrowed from the cache or computed into `buf`.
    #[inline]
    fn row<'b>(&'b self, k: usize, buf: &'b mut [f64]) -> &'b [f64] {
        match &self.table {
            Some(t) => &t[k * self.n..(k + 1) * self.n],
            None => {
                let dim = self.nodes.dim;
                let (z, w) = (self.nodes.z(k), self.nodes.w(k));
                for (i, v) in buf.iter_mut().enumerate() {
                    *v = self.kernel.eval_unchecked(&self.x[i * dim..(i + 1) * dim], z, w);
                }
                buf
            }
        }
    }

    /// `abar(z_k, w_k) = sum_i lambda_i k(x_i, z_k; w_k)` at every node.
    pub fn abar(&self, lambda: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let mut buf = vec![0.0; if self.table.is_some() { 0 } else { self.n }];
            for (off, v) in chunk.iter_mut().enumerate() {
                *v = dot(self.row(c * CHUNK + off, &mut buf), lambda);
            }
        });
        out
    }

    /// `sum_k weight_k alpha_k k(x_i, z_k; w_k)` for every sample `i`.
    pub fn integrate(&self, alpha: &[f64]) -> Vec<f64> {
        let partials: Vec<Vec<f64>> = alpha
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut acc = vec![0.0; self.n];
                let mut buf = vec![0.0; if self.table.is_some() { 0 } else { self.n }];
                for (off, &a) in chunk.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let k = c * CHUNK + off;
                    let s = a * self.nodes.weight(k);
                    let row = self.row(k, &mut buf);
                    for (o, r) in acc.iter_mut().zip(row) {
                        *o += s * r;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; self.n];
        for p in partials {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        out
    }
}

/// Dot product with four interleaved accumulators; the summation order is
/// fixed, so results are reproducible.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() - a.len() % 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}
