//! Monte-Carlo estimation of sliced mutual information and sliced entropy.
//!
//! `m` direction pairs `(θ_i, φ_i)` are drawn up front, in order, from one
//! seeded stream. Each slice projects both samples and runs the scalar
//! kNN estimator; slices are evaluated in parallel but written back by index
//! and reduced in a fixed order, so the result does not depend on the number
//! of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmiError};
use crate::knn::{kl_entropy_points, kl_mi_1d, KnnConfig};
use crate::sampling::{project, sample_unit_sphere, SampleMatrix, SeededRng, UnitDirection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmiConfig {
    /// Number of slices.
    pub m: usize,
    pub knn: KnnConfig,
    pub seed: u64,
    /// Clip each per-slice estimate at zero before averaging.
    pub clip_negative_slices: bool,
    /// Keep the sampled directions in the returned estimate.
    pub store_directions: bool,
}

impl Default for SmiConfig {
    fn default() -> Self {
        Self { m: 1000, knn: KnnConfig::default(), seed: 0, clip_negative_slices: false, store_directions: false }
    }
}

impl SmiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(SmiError::InvalidConfig("slice count m must be at least 1".into()));
        }
        self.knn.validate()
    }
}

/// A Monte-Carlo estimate over slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmiEstimate {
    /// Mean of `per_slice`, in nats.
    pub value: f64,
    pub per_slice: Vec<f64>,
    /// Sample standard deviation of `per_slice` over `sqrt(m)`. This treats
    /// slices as independent and ignores the correlation from reusing the same
    /// `n` data points for every slice.
    pub std_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<UnitDirection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phis: Option<Vec<UnitDirection>>,
}

impl SmiEstimate {
    pub(crate) fn from_slices(per_slice: Vec<f64>) -> Self {
        let (value, std_error) = mean_and_std_error(&per_slice);
        Self { value, per_slice, std_error, thetas: None, phis: None }
    }

    /// The largest per-slice value, a crude max-sliced statistic.
    pub fn max_slice(&self) -> f64 {
        self.per_slice.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_slice(&self) -> f64 {
        self.per_slice.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Empirical quantile of the per-slice values (linear interpolation).
    pub fn slice_quantile(&self, q: f64) -> f64 {
        let mut v = self.per_slice.clone();
        v.sort_by(f64::total_cmp);
        let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    }
}

/// Mean and MC standard error, reduced in index order.
///
/// The mean is accumulated as `v_0 + Σ (v_i - v_0) / m` and clamped to the
/// sample range, so a constant input returns that constant bit-for-bit and
/// the result always lies in `[min, max]`.
pub(crate) fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    let first = values[0];
    let shift: f64 = values.iter().map(|v| v - first).sum();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mean = (first + shift / m as f64).clamp(lo, hi);
    if m < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (m - 1) as f64).sqrt() / (m as f64).sqrt())
}

fn slice_knn(cfg: &KnnConfig, root: &SeededRng, slice: usize) -> KnnConfig {
    use rand::RngCore;
    KnnConfig { jitter_seed: cfg.jitter_seed ^ root.substream(slice as u64).next_u64(), ..*cfg }
}

/// Sliced mutual information between paired samples `x` (n × d_x) and
/// `y` (n × d_y).
///
/// For `d_x = d_y = 1` the spheres are `{±1}` and every slice reproduces
/// [`kl_mi_1d`] on the raw data exactly, so the estimate does too.
pub fn estimate_smi(x: &SampleMatrix, y: &SampleMatrix, cfg: &SmiConfig) -> Result<SmiEstimate> {
    cfg.validate()?;
    if x.rows() != y.rows() {
        return Err(SmiError::DimensionMismatch { expected: x.rows(), got: y.rows() });
    }
    if x.rows() <= cfg.knn.k {
        return Err(SmiError::InsufficientSamples { n: x.rows(), k: cfg.knn.k });
    }
    let mut rng = SeededRng::new(cfg.seed);
    let mut thetas = Vec::with_capacity(cfg.m);
    let mut phis = Vec::with_capacity(cfg.m);
    for _ in 0..cfg.m {
        thetas.push(sample_unit_sphere(x.cols(), &mut rng)?);
        phis.push(sample_unit_sphere(y.cols(), &mut rng)?);
    }
    let jitter_root = SeededRng::with_stream(cfg.seed, 1);
    let per_slice = (0..cfg.m)
        .into_par_iter()
        .map(|i| {
            let px = project(x, &thetas[i])?;
            let py = project(y, &phis[i])?;
            let mi = kl_mi_1d(&px, &py, &slice_knn(&cfg.knn, &jitter_root, i)).map_err(|e| e.at_slice(i))?;
            Ok(if cfg.clip_negative_slices { mi.max(0.0) } else { mi })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut est = SmiEstimate::from_slices(per_slice);
    if cfg.store_directions {
        est.thetas = Some(thetas);
        est.phis = Some(phis);
    }
    Ok(est)
}

/// Sliced entropy: the mean over `m` random slices of the kNN entropy of the
/// projection `θᵀX`.
pub fn estimate_sliced_entropy(x: &SampleMatrix, m: usize, knn: &KnnConfig, seed: u64) -> Result<SmiEstimate> {
    let cfg = SmiConfig { m, knn: *knn, seed, ..SmiConfig::default() };
    cfg.validate()?;
    if x.rows() <= knn.k {
        return Err(SmiError::InsufficientSamples { n: x.rows(), k: knn.k });
    }
    let mut rng = SeededRng::new(seed);
    let thetas = (0..m).map(|_| sample_unit_sphere(x.cols(), &mut rng)).collect::<Result<Vec<_>>>()?;
    let jitter_root = SeededRng::with_stream(seed, 1);
    let per_slice = thetas
        .par_iter()
        .enumerate()
        .map(|(i, theta)| {
            let p = project(x, theta)?;
            kl_entropy_points(&p, 1, &slice_knn(knn, &jitter_root, i))
                .map(|h| h.value)
                .map_err(|e| e.at_slice(i))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SmiEstimate::from_slices(per_slice))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian_matrix(rng: &mut SeededRng, n: usize, d: usize) -> SampleMatrix {
        SampleMatrix::new(n, d, (0..n * d).map(|_| rng.standard_normal()).collect()).unwrap()
    }

    #[test]
    fn scalar_case_matches_scalar_estimator() {
        let mut rng = SeededRng::new(3);
        let x = gaussian_matrix(&mut rng, 400, 1);
        let y = x.map(|v| v * 0.5).unwrap().hstack(&gaussian_matrix(&mut rng, 400, 1)).unwrap();
        let y = SampleMatrix::from_column(&y.iter_rows().map(|r| r[0] + r[1]).collect::<Vec<_>>()).unwrap();
        let cfg = SmiConfig { m: 50, ..SmiConfig::default() };
        let est = estimate_smi(&x, &y, &cfg).unwrap();
        let direct = kl_mi_1d(x.data(), y.data(), &cfg.knn).unwrap();
        assert_eq!(est.value, direct);
        assert!(est.per_slice.iter().all(|&v| v == direct));
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn row_mismatch_rejected() {
        let mut rng = SeededRng::new(1);
        let x = gaussian_matrix(&mut rng, 20, 2);
        let y = gaussian_matrix(&mut rng, 21, 2);
        assert!(matches!(estimate_smi(&x, &y, &SmiConfig::default()), Err(SmiError::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_slices_rejected() {
        let mut rng = SeededRng::new(1);
        let x = gaussian_matrix(&mut rng, 20, 2);
        let cfg = SmiConfig { m: 0, ..SmiConfig::default() };
        assert!(matches!(estimate_smi(&x, &x, &cfg), Err(SmiError::InvalidConfig(_))));
    }

    #[test]
    fn degenerate_slice_is_annotated() {
        // constant columns make every projection constant
        let x = SampleMatrix::new(20, 2, vec![1.0; 40]).unwrap();
        let cfg = SmiConfig { m: 3, knn: KnnConfig::strict(3), ..SmiConfig::default() };
        match estimate_smi(&x, &x, &cfg) {
            Err(SmiError::Slice { slice: 0, source }) => {
                assert!(matches!(*source, SmiError::DegenerateDistance(_)))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn directions_are_stored_on_request() {
        let mut rng = SeededRng::new(2);
        let x = gaussian_matrix(&mut rng, 50, 3);
        let y = gaussian_matrix(&mut rng, 50, 2);
        let cfg = SmiConfig { m: 4, store_directions: true, ..SmiConfig::default() };
        let est = estimate_smi(&x, &y, &cfg).unwrap();
        assert_eq!(est.thetas.as_ref().unwrap().len(), 4);
        assert_eq!(est.phis.as_ref().unwrap()[0].dim(), 2);
    }

    #[test]
    fn clipping_removes_negative_slices() {
        let mut rng = SeededRng::new(5);
        let x = gaussian_matrix(&mut rng, 200, 3);
        let y = gaussian_matrix(&mut rng, 200, 3);
        let raw = estimate_smi(&x, &y, &SmiConfig { m: 40, ..SmiConfig::default() }).unwrap();
        let clipped = estimate_smi(&x, &y, &SmiConfig { m: 40, clip_negative_slices: true, ..SmiConfig::default() }).unwrap();
        assert!(raw.per_slice.iter().any(|&v| v < 0.0));
        assert!(clipped.per_slice.iter().all(|&v| v >= 0.0));
        assert!(clipped.value >= raw.value);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let mut rng = SeededRng::new(8);
        let x = gaussian_matrix(&mut rng, 300, 4);
        let y = gaussian_matrix(&mut rng, 300, 2);
        let cfg = SmiConfig { m: 64, seed: 17, ..SmiConfig::default() };
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = single.install(|| estimate_smi(&x, &y, &cfg)).unwrap();
        let b = estimate_smi(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quantiles() {
        let est = SmiEstimate::from_slices(vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(est.slice_quantile(0.5), 2.0);
        assert_eq!(est.slice_quantile(0.125), 0.5);
        assert_eq!(est.min_slice(), 0.0);
        assert_eq!(est.max_slice(), 4.0);
    }

    proptest! {
        #[test]
        fn mean_is_bracketed(values in proptest::collection::vec(-1e3f64..1e3, 1..200)) {
            let (mean, se) = mean_and_std_error(&values);
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= mean && mean <= hi);
            prop_assert!(se >= 0.0);
            let naive = values.iter().sum::<f64>() / values.len() as f64;
            prop_assert!((mean - naive).abs() <= 1e-9 * (1.0 + naive.abs()));
        }

        #[test]
        fn constant_mean_is_exact(v in -1e6f64..1e6, m in 1usize..500) {
            let (mean, se) = mean_and_std_error(&vec![v; m]);
            prop_assert_eq!(mean, v);
            prop_assert_eq!(se, 0.0);
        }
    }
}
