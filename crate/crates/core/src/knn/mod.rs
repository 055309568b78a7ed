//! Kozachenko–Leonenko nearest-neighbor entropy and the entropy-decomposition
//! mutual information estimator.
//!
//! For `n` samples in `R^d` with `eps_i` the Euclidean distance from sample
//! `i` to its `k`-th nearest neighbor,
//!
//! ```text
//! H = psi(n) - psi(k) + log(c_d) + (d / n) * sum_i log(eps_i)
//! ```
//!
//! where `c_d` is the volume of the unit ball. Everything is in nats. The MI
//! estimator is `H(X) + H(Y) - H(X, Y)`; it is not clipped at zero.
//!
//! One-dimensional neighbor search sorts the sample; higher dimensions use a
//! k-d tree. Per-point log distances are always summed in sample order so that
//! distance-preserving maps of the input (reflection, reordering of equal
//! values) give bit-identical results.

mod kdtree;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Result, SmiError};
use crate::sampling::{SampleMatrix, SeededRng};

#[cfg(test)]
use kdtree::sq_dist;

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_JITTER: f64 = 1e-10;

/// What to do when the nearest-neighbor geometry is degenerate: a zero k-th
/// neighbor distance (ties), or a two-dimensional sample lying on a line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DegeneracyPolicy {
    Error,
    /// Add Gaussian noise of standard deviation `rel_eps` times each
    /// column's scale, then re-estimate.
    Jitter { rel_eps: f64 },
}

impl Default for DegeneracyPolicy {
    fn default() -> Self {
        DegeneracyPolicy::Jitter { rel_eps: DEFAULT_JITTER }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnConfig {
    pub k: usize,
    pub policy: DegeneracyPolicy,
    /// Seed of the stream jitter noise is drawn from.
    pub jitter_seed: u64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K, policy: DegeneracyPolicy::default(), jitter_seed: 0 }
    }
}

impl KnnConfig {
    pub fn strict(k: usize) -> Self {
        Self { k, policy: DegeneracyPolicy::Error, jitter_seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(SmiError::InvalidConfig("k must be positive".into()));
        }
        if let DegeneracyPolicy::Jitter { rel_eps } = self.policy {
            if !(rel_eps > 0.0 && rel_eps.is_finite()) {
                return Err(SmiError::InvalidConfig(format!("jitter epsilon must be positive, got {rel_eps}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Differential entropy in nats.
    pub value: f64,
    pub n: usize,
    pub k: usize,
}

/// Log-volume of the unit Euclidean ball in `R^d`.
pub fn log_unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => std::f64::consts::LN_2,
        2 => std::f64::consts::PI.ln(),
        _ => {
            let h = d as f64 / 2.0;
            h * std::f64::consts::PI.ln() - ln_gamma(h + 1.0)
        }
    }
}

/// Distance from each point to its `k`-th nearest other point, in sample order.
pub fn kth_neighbor_distances(points: &[f64], dim: usize, k: usize) -> Vec<f64> {
    if dim == 1 {
        kth_distances_sorted(points, k)
    } else {
        kdtree::KdTree::build(points, dim).all_kth_distances(k)
    }
}

fn kth_distances_sorted(values: &[f64], k: usize) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut out = vec![0.0; n];
    for (pos, &idx) in order.iter().enumerate() {
        let v = sorted[pos];
        let (mut lo, mut hi) = (pos, pos + 1);
        let mut kth = 0.0;
        for _ in 0..k {
            let left = if lo > 0 { v - sorted[lo - 1] } else { f64::INFINITY };
            let right = if hi < n { sorted[hi] - v } else { f64::INFINITY };
            if left <= right {
                kth = left;
                lo -= 1;
            } else {
                kth = right;
                hi += 1;
            }
        }
        out[idx] = kth;
    }
    out
}

fn check_finite(points: &[f64], dim: usize) -> Result<()> {
    match points.iter().position(|v| !v.is_finite()) {
        Some(p) => Err(SmiError::NonFinite { row: p / dim, col: p % dim }),
        None => Ok(()),
    }
}

/// True when every point of a 2-D sample lies on one line.
fn collinear_2d(points: &[f64]) -> bool {
    let p0 = [points[0], points[1]];
    let Some(anchor) = points.chunks_exact(2).find(|p| p[0] != p0[0] || p[1] != p0[1]) else {
        return true;
    };
    let (ux, uy) = (anchor[0] - p0[0], anchor[1] - p0[1]);
    points.chunks_exact(2).all(|p| {
        let (vx, vy) = (p[0] - p0[0], p[1] - p0[1]);
        ux * vy - uy * vx == 0.0
    })
}

/// Entropy estimate without any degeneracy handling: fails on degenerate input.
fn entropy_strict(points: &[f64], dim: usize, k: usize) -> Result<f64> {
    let n = points.len() / dim;
    if n <= k {
        return Err(SmiError::InsufficientSamples { n, k });
    }
    if dim == 2 && collinear_2d(points) {
        return Err(SmiError::DegenerateDistance("two-dimensional sample lies on a line".into()));
    }
    let eps = kth_neighbor_distances(points, dim, k);
    let mut sum_log = 0.0;
    for (i, &e) in eps.iter().enumerate() {
        if e <= 0.0 {
            return Err(SmiError::DegenerateDistance(format!(
                "sample {i} has a zero distance to its {k}-th nearest neighbor"
            )));
        }
        sum_log += e.ln();
    }
    let nf = n as f64;
    Ok(digamma(nf) - digamma(k as f64) + log_unit_ball_volume(dim) + dim as f64 * sum_log / nf)
}

fn column_scale(points: &[f64], dim: usize, col: usize) -> f64 {
    let n = (points.len() / dim) as f64;
    let mean = points.iter().skip(col).step_by(dim).sum::<f64>() / n;
    let var = points.iter().skip(col).step_by(dim).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        var.sqrt()
    } else {
        mean.abs().max(1.0)
    }
}

fn jitter(points: &[f64], dim: usize, rel_eps: f64, rng: &mut SeededRng) -> Vec<f64> {
    let scales: Vec<f64> = (0..dim).map(|c| rel_eps * column_scale(points, dim, c)).collect();
    points
        .iter()
        .enumerate()
        .map(|(i, &v)| v + scales[i % dim] * rng.standard_normal())
        .collect()
}

/// General-dimension Kozachenko–Leonenko entropy on row-major `points`.
pub fn kl_entropy_points(points: &[f64], dim: usize, cfg: &KnnConfig) -> Result<EntropyEstimate> {
    cfg.validate()?;
    if dim == 0 || points.is_empty() || points.len() % dim != 0 {
        return Err(SmiError::InvalidDimension(format!("{} values do not form rows of width {dim}", points.len())));
    }
    check_finite(points, dim)?;
    let n = points.len() / dim;
    let value = match (entropy_strict(points, dim, cfg.k), cfg.policy) {
        (Err(SmiError::DegenerateDistance(_)), DegeneracyPolicy::Jitter { rel_eps }) => {
            let mut rng = SeededRng::new(cfg.jitter_seed);
            entropy_strict(&jitter(points, dim, rel_eps, &mut rng), dim, cfg.k)?
        }
        (r, _) => r?,
    };
    Ok(EntropyEstimate { value, n, k: cfg.k })
}

/// Kozachenko–Leonenko entropy of a 1-D or 2-D sample, in nats.
pub fn kl_entropy(samples: &SampleMatrix, cfg: &KnnConfig) -> Result<EntropyEstimate> {
    if !(1..=2).contains(&samples.cols()) {
        return Err(SmiError::InvalidDimension(format!(
            "kl_entropy supports d in {{1, 2}}, got {}; use kl_entropy_points for higher dimensions",
            samples.cols()
        )));
    }
    kl_entropy_points(samples.data(), samples.cols(), cfg)
}

fn interleave(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).flat_map(|(&a, &b)| [a, b]).collect()
}

fn mi_1d_strict(x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    let hx = entropy_strict(x, 1, k)?;
    let hy = entropy_strict(y, 1, k)?;
    let hxy = entropy_strict(&interleave(x, y), 2, k)?;
    Ok(hx + hy - hxy)
}

/// `H(x) + H(y) - H(x, y)` for two scalar samples of equal length.
pub fn kl_mi_1d(x: &[f64], y: &[f64], cfg: &KnnConfig) -> Result<f64> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(SmiError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() <= cfg.k {
        return Err(SmiError::InsufficientSamples { n: x.len(), k: cfg.k });
    }
    check_finite(x, 1)?;
    check_finite(y, 1)?;
    match (mi_1d_strict(x, y, cfg.k), cfg.policy) {
        (Err(SmiError::DegenerateDistance(_)), DegeneracyPolicy::Jitter { rel_eps }) => {
            let mut rng = SeededRng::new(cfg.jitter_seed);
            let xj = jitter(x, 1, rel_eps, &mut rng);
            let yj = jitter(y, 1, rel_eps, &mut rng);
            mi_1d_strict(&xj, &yj, cfg.k)
        }
        (r, _) => r,
    }
}

/// Entropy-decomposition MI between multivariate samples, any dimensions.
pub fn kl_mi(x: &SampleMatrix, y: &SampleMatrix, cfg: &KnnConfig) -> Result<f64> {
    if x.rows() != y.rows() {
        return Err(SmiError::DimensionMismatch { expected: x.rows(), got: y.rows() });
    }
    if x.cols() == 1 && y.cols() == 1 {
        return kl_mi_1d(x.data(), y.data(), cfg);
    }
    let joint = x.hstack(y)?;
    let strict = KnnConfig { policy: DegeneracyPolicy::Error, ..*cfg };
    let attempt = (|| {
        let hx = kl_entropy_points(x.data(), x.cols(), &strict)?.value;
        let hy = kl_entropy_points(y.data(), y.cols(), &strict)?.value;
        let hxy = kl_entropy_points(joint.data(), joint.cols(), &strict)?.value;
        Ok(hx + hy - hxy)
    })();
    match (attempt, cfg.policy) {
        (Err(SmiError::DegenerateDistance(_)), DegeneracyPolicy::Jitter { rel_eps }) => {
            let mut rng = SeededRng::new(cfg.jitter_seed);
            let xj = jitter(x.data(), x.cols(), rel_eps, &mut rng);
            let yj = jitter(y.data(), y.cols(), rel_eps, &mut rng);
            let xm = SampleMatrix::new(x.rows(), x.cols(), xj)?;
            let ym = SampleMatrix::new(y.rows(), y.cols(), yj)?;
            let joint = xm.hstack(&ym)?;
            let hx = kl_entropy_points(xm.data(), xm.cols(), &strict)?.value;
            let hy = kl_entropy_points(ym.data(), ym.cols(), &strict)?.value;
            let hxy = kl_entropy_points(joint.data(), joint.cols(), &strict)?.value;
            Ok(hx + hy - hxy)
        }
        (r, _) => r,
    }
}
