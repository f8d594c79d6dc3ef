//! Sample sets, synthetic signal generators, CSV ingestion, fold splitting
//! and k-means for candidate centers.
//!
//! All generators are pure functions of their parameters and seed.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::kernels::{sq_dist, DomainBox, Interval};
use crate::model::{DiscreteModel, Term};

/// Observations `x_i` (row-major, `n x dim`) with labels `y_i` and the
/// domain box they live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampleSetRepr", into = "SampleSetRepr")]
pub struct SampleSet {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    domain: DomainBox,
}

#[derive(Serialize, Deserialize)]
struct SampleSetRepr {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    #[serde(rename = "box")]
    domain: DomainBox,
}

impl TryFrom<SampleSetRepr> for SampleSet {
    type Error = Error;
    fn try_from(r: SampleSetRepr) -> Result<Self> {
        let dim = r.domain.dim();
        let mut x = Vec::with_capacity(r.x.len() * dim);
        for row in &r.x {
            if row.len() != dim {
                return config("sample row dimension does not match the box");
            }
            x.extend_from_slice(row);
        }
        SampleSet::new(dim, x, r.y, r.domain)
    }
}

impl From<SampleSet> for SampleSetRepr {
    fn from(s: SampleSet) -> Self {
        SampleSetRepr {
            x: s.x.chunks_exact(s.dim).map(<[f64]>::to_vec).collect(),
            y: s.y,
            domain: s.domain,
        }
    }
}

impl SampleSet {
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<f64>, domain: DomainBox) -> Result<Self> {
        domain.validate()?;
        if dim == 0 || dim != domain.dim() {
            return config(format!("dimension {dim} does not match box dimension {}", domain.dim()));
        }
        if y.is_empty() {
            return config("sample set needs at least one sample");
        }
        if x.len() != y.len() * dim {
            return config(format!("{} coordinates for {} samples of dim {dim}", x.len(), y.len()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return config(format!("label {i} is not finite"));
        }
        for (i, row) in x.chunks_exact(dim).enumerate() {
            if !domain.contains(row) {
                return config(format!("sample {i} ({row:?}) lies outside the domain box"));
            }
        }
        Ok(Self { dim, x, y, domain })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.dim)
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut x = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            x,
            y: idx.iter().map(|&i| self.y[i]).collect(),
            domain: self.domain.clone(),
        }
    }

    /// Same inputs with new labels.
    pub fn with_labels(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.dim, self.x.clone(), y, self.domain.clone())
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_point(rng: &mut ChaCha8Rng, domain: &DomainBox) -> Vec<f64> {
    domain.axes().iter().map(|a| rng.random_range(a.lo..=a.hi)).collect()
}

fn add_noise(rng: &mut ChaCha8Rng, y: &mut [f64], noise_sd: f64) {
    if noise_sd > 0.0 {
        let n = Normal::new(0.0, noise_sd).expect("finite noise level");
        for v in y {
            *v += n.sample(rng);
        }
    }
}

/// Mixture-of-Gaussians signal parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedGauss {
    /// Number of Gaussian bumps.
    pub m: usize,
    pub w0: f64,
    pub n: usize,
    pub noise_sd: f64,
    /// Box the samples are drawn from.
    pub domain: DomainBox,
    /// Range of the bump centers on every axis.
    pub center_range: Interval,
    pub amplitude_range: Interval,
}

/// Noise standard deviation matching a noise variance of 1e-3.
pub const DEFAULT_NOISE_SD: f64 = 0.031_622_776_601_683_79;

impl MixedGauss {
    /// One-dimensional signal on `[0, 3]` with centers and amplitudes in `U(1, 2)`.
    pub fn new(m: usize, w0: f64, n: usize, noise_sd: f64) -> Self {
        Self {
            m,
            w0,
            n,
            noise_sd,
            domain: DomainBox::cube(1, 0.0, 3.0).expect("static box"),
            center_range: Interval::new(1.0, 2.0),
            amplitude_range: Interval::new(1.0, 2.0),
        }
    }
}

/// Draws a mixture signal and `n` noisy samples of it. Returns the sample set
/// together with the noiseless ground-truth model.
pub fn gen_mixed_gauss(cfg: &MixedGauss, seed: u64) -> Result<(SampleSet, DiscreteModel)> {
    if cfg.m == 0 || cfg.n == 0 {
        return config("mixed-Gaussian generator needs m >= 1 and n >= 1");
    }
    if !(cfg.w0 > 0.0) || cfg.noise_sd < 0.0 {
        return config("w0 must be positive and noise_sd nonnegative");
    }
    let mut rng = rng_for(seed);
    let dim = cfg.domain.dim();
    let terms = (0..cfg.m)
        .map(|_| {
            let a = rng.random_range(cfg.amplitude_range.lo..=cfg.amplitude_range.hi);
            let z = (0..dim)
                .map(|_| rng.random_range(cfg.center_range.lo..=cfg.center_range.hi))
                .collect();
            Term { a, z, w: cfg.w0 }
        })
        .collect();
    let truth = DiscreteModel::new(terms);
    let set = sample_model(&truth, cfg.n, cfg.noise_sd, &cfg.domain, &mut rng)?;
    Ok((set, truth))
}

/// `n` uniform draws of `model` on `domain` with additive Gaussian noise.
pub fn sample_signal(
    model: &DiscreteModel,
    n: usize,
    noise_sd: f64,
    domain: &DomainBox,
    seed: u64,
) -> Result<SampleSet> {
    sample_model(model, n, noise_sd, domain, &mut rng_for(seed))
}

fn sample_model(
    model: &DiscreteModel,
    n: usize,
    noise_sd: f64,
    domain: &DomainBox,
    rng: &mut ChaCha8Rng,
) -> Result<SampleSet> {
    let dim = domain.dim();
    let mut x = Vec::with_capacity(n * dim);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let p = uniform_point(rng, domain);
        y.push(model.predict(&p));
        x.extend(p);
    }
    add_noise(rng, &mut y, noise_sd);
    SampleSet::new(dim, x, y, domain.clone())
}

pub fn sin_squared(x: f64) -> f64 {
    (0.5 * std::f64::consts::PI * x * x).sin()
}

fn sin_squared_box() -> DomainBox {
    DomainBox::cube(1, -5.0, 5.0).expect("static box")
}

/// Varying-smoothness signal `sin(pi x^2 / 2)` sampled on a uniform grid of
/// `n` points spanning `[-5, 5]`.
pub fn gen_sin_squared(n: usize, noise_sd: f64, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return config("sin-squared generator needs n >= 1");
    }
    let x: Vec<f64> = if n == 1 {
        vec![0.0]
    } else {
        (0..n).map(|i| -5.0 + 10.0 * i as f64 / (n - 1) as f64).collect()
    };
    let mut y: Vec<f64> = x.iter().map(|&v| sin_squared(v)).collect();
    add_noise(&mut rng_for(seed), &mut y, noise_sd);
    SampleSet::new(1, x, y, sin_squared_box())
}

/// Test draws of the varying-smoothness signal at uniform random locations.
pub fn sin_squared_test(n: usize, noise_sd: f64, seed: u64) -> Result<SampleSet> {
    let mut rng = rng_for(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..=5.0)).collect();
    let mut y: Vec<f64> = x.iter().map(|&v| sin_squared(v)).collect();
    add_noise(&mut rng, &mut y, noise_sd);
    SampleSet::new(1, x, y, sin_squared_box())
}

/// Center of the single-kernel counterexample signal.
pub const REMARK1_CENTER: f64 = 2.5;

pub fn remark1_signal(x: f64) -> f64 {
    (-(x - REMARK1_CENTER).powi(2) / 2.0).exp()
}

/// Noiseless samples of a unit-width Gaussian centered at 2.5, drawn
/// uniformly on `[0, 5]` and never exactly at the center.
pub fn gen_remark1(n: usize, seed: u64) -> Result<SampleSet> {
    if n < 2 {
        return config("remark-1 generator needs n >= 2");
    }
    let mut rng = rng_for(seed);
    let mut x = Vec::with_capacity(n);
    while x.len() < n {
        let v: f64 = rng.random_range(0.0..=5.0);
        if v != REMARK1_CENTER {
            x.push(v);
        }
    }
    let y = x.iter().map(|&v| remark1_signal(v)).collect();
    SampleSet::new(1, x, y, DomainBox::cube(1, 0.0, 5.0)?)
}

/// Lloyd's k-means with k-means++ seeding.
#[derive(Debug, Clone)]
pub struct KMeans {
    pub centers: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Sum of squared distances after seeding and after every Lloyd step.
    pub objective_trace: Vec<f64>,
}

pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    kmeans_with_limit(points, k, seed, 300)
}

pub fn kmeans_with_limit(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeans> {
    let m = points.len();
    if k == 0 || k > m {
        return config(format!("k-means needs 1 <= k <= {m}, got {k}"));
    }
    let mut rng = rng_for(seed);

    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..m)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut pick = m - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            // rounding can land on a zero-weight point
            if d2[pick] == 0.0 {
                pick = argmax(&d2);
            }
            pick
        } else {
            rng.random_range(0..m)
        };
        centers.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }

    let mut assignment = vec![usize::MAX; m];
    let mut trace = Vec::new();
    for _ in 0..max_iter {
        let mut changed = false;
        let mut obj = 0.0;
        let mut dist = vec![0.0; m];
        for (i, p) in points.iter().enumerate() {
            let (best, bd) = nearest(&centers, p);
            dist[i] = bd;
            obj += bd;
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        trace.push(obj);
        if !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // reseed an empty cluster at the point farthest from its center
                let far = argmax(&dist);
                centers[c] = points[far].clone();
                dist[far] = 0.0;
                assignment[far] = c;
            }
        }
    }
    let final_obj = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| sq_dist(p, &centers[a]))
        .sum();
    trace.push(final_obj);
    Ok(KMeans {
        centers,
        assignment,
        objective_trace: trace,
    })
}

fn nearest(centers: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Reads a CSV with header `x1,...,xp,y` (or `...,label`). The domain box is
/// the bounding box of the inputs, padded by 0.5 on degenerate axes.
pub fn load_csv(path: impl AsRef<Path>) -> Result<SampleSet> {
    let (dim, x, y) = read_csv_rows(path.as_ref())?;
    let mut axes = Vec::with_capacity(dim);
    for k in 0..dim {
        let (lo, hi) = x
            .iter()
            .skip(k)
            .step_by(dim)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        axes.push(if hi > lo { Interval::new(lo, hi) } else { Interval::new(lo - 0.5, hi + 0.5) });
    }
    SampleSet::new(dim, x, y, DomainBox::new(axes)?)
}

/// Reads a CSV into a sample set on an explicit domain box.
pub fn load_csv_with_box(path: impl AsRef<Path>, domain: DomainBox) -> Result<SampleSet> {
    let (dim, x, y) = read_csv_rows(path.as_ref())?;
    SampleSet::new(dim, x, y, domain)
}

fn read_csv_rows(path: &Path) -> Result<(usize, Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "header needs at least one feature column and a label column".into(),
        });
    }
    let dim = header.len() - 1;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        if rec.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", dim + 1, rec.len()),
            });
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("column {} is not a number: {field:?}", j + 1),
            })?;
            if j < dim {
                x.push(v);
            } else {
                y.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no data rows".into() });
    }
    Ok((dim, x, y))
}

pub fn save_csv(set: &SampleSet, path: impl AsRef<Path>) -> Result<()> {
    save_csv_named(set, path, "y")
}

/// Writes the set with the label column named `label_name` (`y` or `label`).
pub fn save_csv_named(set: &SampleSet, path: impl AsRef<Path>, label_name: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=set.dim()).map(|k| format!("x{k}")).collect();
    header.push(label_name.to_string());
    w.write_record(&header)?;
    for (row, y) in set.rows().zip(set.y()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Random train/test partition; `fraction` of the indices go to training.
pub fn split_fraction(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return config(format!("train fraction must lie in (0, 1), got {fraction}"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed));
    let cut = ((n as f64) * fraction).round() as usize;
    let test = idx.split_off(cut.min(n));
    Ok((idx, test))
}

/// Index sets of `k` folds. With `labels`, each class is dealt round-robin
/// so every fold holds its share of each class within one sample.
pub fn k_folds(n: usize, k: usize, seed: u64, labels: Option<&[f64]>) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return config(format!("fold count must lie in [2, {n}], got {k}"));
    }
    let mut rng = rng_for(seed);
    let groups: Vec<Vec<usize>> = match labels {
        None => vec![(0..n).collect()],
        Some(l) => {
            if l.len() != n {
                return config("label vector length differs from sample count");
            }
            let mut by: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
            for (i, &v) in l.iter().enumerate() {
                by.entry(label_key(v)).or_default().push(i);
            }
            by.into_values().collect()
        }
    };
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            folds[slot % k].push(i);
            slot += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Integer class key of a real-valued label.
pub fn label_key(v: f64) -> i64 {
    v.round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_gauss_noiseless_matches_truth() {
        let cfg = MixedGauss::new(10, 0.453, 50, 0.0);
        let (set, truth) = gen_mixed_gauss(&cfg, 1).unwrap();
        assert_eq!(set.len(), 50);
        assert_eq!(truth.len(), 10);
        for (x, y) in set.rows().zip(set.y()) {
            assert_eq!(*y, truth.predict(x));
        }
        for t in &truth.terms {
            assert!(t.a >= 1.0 && t.a <= 2.0 && t.z[0] >= 1.0 && t.z[0] <= 2.0);
            assert_eq!(t.w, 0.453);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let cfg = MixedGauss::new(3, 0.5, 20, DEFAULT_NOISE_SD);
        assert_eq!(gen_mixed_gauss(&cfg, 9).unwrap(), gen_mixed_gauss(&cfg, 9).unwrap());
        assert_ne!(gen_mixed_gauss(&cfg, 9).unwrap().0, gen_mixed_gauss(&cfg, 10).unwrap().0);
        assert_eq!(gen_remark1(20, 4).unwrap(), gen_remark1(20, 4).unwrap());
        assert_eq!(gen_sin_squared(51, 0.03, 2).unwrap(), gen_sin_squared(51, 0.03, 2).unwrap());
    }

    #[test]
    fn sin_squared_values_and_grid() {
        assert_eq!(sin_squared(0.0), 0.0);
        assert!((sin_squared(1.0) - 1.0).abs() < 1e-15);
        let s = gen_sin_squared(51, 0.0, 0).unwrap();
        assert_eq!(s.x()[0], -5.0);
        assert_eq!(s.x()[50], 5.0);
        for w in s.x().windows(2) {
            assert!((w[1] - w[0] - 0.2).abs() < 1e-12);
        }
        let t = sin_squared_test(1000, 0.0, 1).unwrap();
        assert!(t.x().iter().all(|v| (-5.0..=5.0).contains(v)));
    }

    #[test]
    fn remark1_properties() {
        let s = gen_remark1(200, 3).unwrap();
        assert!(s.x().iter().all(|&v| v != REMARK1_CENTER && (0.0..=5.0).contains(&v)));
        assert!(s.y().iter().all(|&v| v < 1.0));
        let x = 2.5 + 2f64.sqrt();
        assert!((remark1_signal(x) - (-1f64).exp()).abs() < 1e-15);
        assert!((remark1_signal(x) - 0.3679).abs() < 1e-4);
        assert!(gen_remark1(1, 0).is_err());
    }

    #[test]
    fn kmeans_identity_and_centroid() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![5.0, -1.0], vec![4.0, 4.0]];
        let km = kmeans(&pts, 4, 7).unwrap();
        let mut got = km.centers.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = pts.clone();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);

        let km = kmeans(&pts, 1, 7).unwrap();
        assert_eq!(km.centers[0], vec![2.75, 1.75]);
        assert!(kmeans(&pts, 5, 0).is_err());
    }

    #[test]
    fn kmeans_separates_blobs_and_objective_decreases() {
        let mut rng = rng_for(12);
        let mut pts = Vec::new();
        for c in [-10.0, 10.0] {
            for _ in 0..50 {
                pts.push(vec![c + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            }
        }
        let km = kmeans(&pts, 2, 3).unwrap();
        let mut xs: Vec<f64> = km.centers.iter().map(|c| c[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 10.0).abs() < 1.0 && (xs[1] - 10.0).abs() < 1.0);
        for w in km.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = MixedGauss::new(3, 0.5, 15, DEFAULT_NOISE_SD);
        let (set, _) = gen_mixed_gauss(&cfg, 5).unwrap();
        let p = dir.path().join("d.csv");
        save_csv(&set, &p).unwrap();
        assert_eq!(load_csv_with_box(&p, set.domain().clone()).unwrap(), set);
        let inferred = load_csv(&p).unwrap();
        assert_eq!(inferred.y(), set.y());

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "x1,y\n0.5,1.0\nabc,2.0\n").unwrap();
        match load_csv(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn folds_partition() {
        let folds = k_folds(100, 10, 1, None).unwrap();
        assert!(folds.iter().all(|f| f.len() == 10));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(k_folds(10, 1, 0, None).is_err());
    }

    #[test]
    fn stratified_folds_preserve_proportions() {
        let labels = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let folds = k_folds(10, 2, 4, Some(&labels)).unwrap();
        for f in &folds {
            let zeros = f.iter().filter(|&&i| labels[i] == 0.0).count();
            assert_eq!((zeros, f.len() - zeros), (3, 2));
        }
    }

    #[test]
    fn fraction_split() {
        let (tr, te) = split_fraction(10, 0.7, 0).unwrap();
        assert_eq!((tr.len(), te.len()), (7, 3));
        assert!(split_fraction(10, 1.0, 0).is_err());
    }

    #[test]
    fn sample_set_invariants() {
        let b = DomainBox::cube(1, 0.0, 1.0).unwrap();
        assert!(SampleSet::new(1, vec![], vec![], b.clone()).is_err());
        assert!(SampleSet::new(1, vec![2.0], vec![0.0], b.clone()).is_err());
        assert!(SampleSet::new(1, vec![0.5], vec![f64::NAN], b.clone()).is_err());
        let s = SampleSet::new(1, vec![0.5, 0.25], vec![1.0, 2.0], b).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SampleSet>(&j).unwrap(), s);
    }
}
