//! Convergence-rate sweeps for the SMI estimator.
//!
//! The error of the estimator splits into a Monte-Carlo term that decays like
//! `m^{-1/2}` and a per-slice estimation term `δ(n)`. A sweep measures RMSE
//! against a Gaussian ground truth along one or both axes and fits log-log
//! slopes by ordinary least squares.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmiError};
use crate::gaussian::{cca_coefficient, gaussian_smi_mc, GaussianSpec, SliceEvaluator};
use crate::knn::KnnConfig;
use crate::sampling::{sample_unit_sphere, SampleMatrix, SeededRng};
use crate::smi::{estimate_smi, SmiConfig};
use crate::synthetic::{generate, Scenario, ScenarioKind};

/// Where sweep data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSource {
    Gaussian { spec: GaussianSpec },
    Scenario { scenario: ScenarioKind },
}

impl RateSource {
    fn gaussian_spec(&self) -> Result<Option<GaussianSpec>> {
        match self {
            RateSource::Gaussian { spec } => Ok(Some(spec.clone())),
            RateSource::Scenario { scenario } => scenario.gaussian_spec(),
        }
    }

    fn draw(&self, n: usize, seed: u64) -> Result<(SampleMatrix, SampleMatrix)> {
        match self {
            RateSource::Gaussian { spec } => spec.sample(n, &mut SeededRng::new(seed)),
            RateSource::Scenario { scenario } => generate(&Scenario { kind: *scenario, n, seed }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// `n = m`, both taken from `n_values`.
    Joint,
    /// `n` from `n_values`, `m = fixed_m`.
    N,
    /// `m` from `m_values`, `n = fixed_n`.
    M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateGrid {
    pub source: RateSource,
    #[serde(default)]
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub m_values: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_fixed")]
    pub fixed_n: usize,
    #[serde(default = "default_fixed")]
    pub fixed_m: usize,
    #[serde(default)]
    pub seed: u64,
    pub sweeps: Vec<SweepAxis>,
    /// Ground-truth SMI. When absent it is computed by [`gaussian_smi_mc`]
    /// with `truth_slices` slices.
    #[serde(default)]
    pub truth: Option<f64>,
    #[serde(default = "default_truth_slices")]
    pub truth_slices: usize,
    #[serde(default)]
    pub knn: KnnConfig,
}

fn default_trials() -> usize {
    10
}
fn default_fixed() -> usize {
    10_000
}
fn default_truth_slices() -> usize {
    1_000_000
}

impl RateGrid {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.sweeps.is_empty() {
            return Err(SmiError::InvalidConfig("trials and sweeps must be non-empty".into()));
        }
        let increasing = |v: &[usize]| !v.is_empty() && v.iter().all(|&x| x > 0) && v.windows(2).all(|w| w[0] < w[1]);
        for axis in &self.sweeps {
            let (name, values) = match axis {
                SweepAxis::Joint | SweepAxis::N => ("n_values", &self.n_values),
                SweepAxis::M => ("m_values", &self.m_values),
            };
            if !increasing(values) {
                return Err(SmiError::InvalidConfig(format!("{name} must be non-empty and strictly increasing")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub axis: SweepAxis,
    pub n: usize,
    pub m: usize,
    pub rmse: f64,
    pub trials: usize,
}

/// Least-squares line through `(ln x, ln rmse)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual_rms: f64,
    /// Whether the smallest grid point was dropped as a transient outlier.
    pub excluded_first: bool,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub truth: f64,
    pub rows: Vec<RateRow>,
    pub slope_n: Option<SlopeFit>,
    pub slope_m: Option<SlopeFit>,
    pub slope_joint: Option<SlopeFit>,
}

fn ols(points: &[(f64, f64)]) -> (f64, f64, Vec<f64>) {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = points.iter().map(|p| p.1 - (intercept + slope * p.0)).collect();
    (slope, intercept, residuals)
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|r| r * r).sum::<f64>() / v.len() as f64).sqrt()
}

/// Fits `ln y = a + b ln x`. The smallest `x` is dropped as a transient when,
/// measured against the line fitted to the remaining points, its residual is
/// more than three times their RMS residual. At least three points must remain.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(SmiError::InvalidConfig("slope fit needs at least two points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(SmiError::Numerical("log-log fit needs positive finite values".into()));
    }
    let mut pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() > 3 {
        let (slope, intercept, residuals) = ols(&pts[1..]);
        let rest_rms = rms(&residuals);
        let first = pts[0].1 - (intercept + slope * pts[0].0);
        if first.abs() > 3.0 * rest_rms.max(1e-9) {
            return Ok(SlopeFit { slope, intercept, residual_rms: rest_rms, excluded_first: true, points: pts.len() - 1 });
        }
    }
    let (slope, intercept, residuals) = ols(&pts);
    Ok(SlopeFit { slope, intercept, residual_rms: rms(&residuals), excluded_first: false, points: pts.len() })
}

fn cell_rmse(grid: &RateGrid, n: usize, m: usize, truth: f64, cell_rng: &SeededRng) -> Result<f64> {
    use rand::RngCore;
    let sq_errors = (0..grid.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = cell_rng.substream(t as u64);
            let (x, y) = grid.source.draw(n, rng.next_u64())?;
            let seed = rng.next_u64();
            let knn = KnnConfig { jitter_seed: seed, ..grid.knn };
            let est = estimate_smi(&x, &y, &SmiConfig { m, knn, seed, ..SmiConfig::default() })?;
            Ok((est.value - truth).powi(2))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((sq_errors.iter().sum::<f64>() / grid.trials as f64).sqrt())
}

/// Runs the requested sweeps. Every cell draws fresh data and fresh
/// directions from its own sub-stream.
pub fn run_rate_sweep(grid: &RateGrid) -> Result<RateReport> {
    grid.validate()?;
    let truth = match grid.truth {
        Some(t) => t,
        None => {
            let spec = grid.source.gaussian_spec()?.ok_or_else(|| {
                SmiError::InvalidConfig("rate sweeps need a Gaussian source or an explicit truth value".into())
            })?;
            gaussian_smi_mc(&spec, grid.truth_slices, grid.seed ^ 0x5EED)?.value
        }
    };
    let root = SeededRng::new(grid.seed);
    let mut report = RateReport { truth, rows: Vec::new(), slope_n: None, slope_m: None, slope_joint: None };
    for (a, &axis) in grid.sweeps.iter().enumerate() {
        let cells: Vec<(usize, usize)> = match axis {
            SweepAxis::Joint => grid.n_values.iter().map(|&n| (n, n)).collect(),
            SweepAxis::N => grid.n_values.iter().map(|&n| (n, grid.fixed_m)).collect(),
            SweepAxis::M => grid.m_values.iter().map(|&m| (grid.fixed_n, m)).collect(),
        };
        let axis_rng = root.substream(a as u64);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (c, &(n, m)) in cells.iter().enumerate() {
            let rmse = cell_rmse(grid, n, m, truth, &axis_rng.substream(c as u64))?;
            report.rows.push(RateRow { axis, n, m, rmse, trials: grid.trials });
            xs.push(if axis == SweepAxis::M { m } else { n } as f64);
            ys.push(rmse);
        }
        let fit = if xs.len() >= 2 { Some(fit_loglog(&xs, &ys)?) } else { None };
        match axis {
            SweepAxis::Joint => report.slope_joint = fit,
            SweepAxis::N => report.slope_n = fit,
            SweepAxis::M => report.slope_m = fit,
        }
    }
    Ok(report)
}

/// Outcome of comparing Gaussian slice MIs against the log-concave bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogConcaveCheck {
    pub holds: bool,
    /// `bound - max slice MI`.
    pub margin: f64,
    /// `½ log((π²/8) / (1 - ρ_CCA²))`.
    pub bound: f64,
    pub max_slice_mi: f64,
}

/// [`check_logconcave_bound_with`] over 10⁴ slices, seed 0.
pub fn check_logconcave_bound(spec: &GaussianSpec) -> Result<LogConcaveCheck> {
    check_logconcave_bound_with(spec, 10_000, 0)
}

/// Checks that every sampled slice MI is below the per-slice bound for
/// symmetric log-concave laws with canonical correlation `ρ_CCA`.
pub fn check_logconcave_bound_with(spec: &GaussianSpec, slices: usize, seed: u64) -> Result<LogConcaveCheck> {
    if slices == 0 {
        return Err(SmiError::InvalidConfig("need at least one slice".into()));
    }
    let rho = cca_coefficient(spec)?;
    if rho >= crate::gaussian::NEAR_SINGULAR {
        return Err(SmiError::NearSingular { rho });
    }
    let bound = 0.5 * ((std::f64::consts::PI.powi(2) / 8.0) / (1.0 - rho * rho)).ln();
    let eval = SliceEvaluator::new(spec)?;
    let mut rng = SeededRng::new(seed);
    let mut max_slice_mi: f64 = 0.0;
    for _ in 0..slices {
        let t = sample_unit_sphere(spec.dim_x(), &mut rng)?;
        let p = sample_unit_sphere(spec.dim_y(), &mut rng)?;
        max_slice_mi = max_slice_mi.max(eval.mutual_information(&t, &p)?);
    }
    Ok(LogConcaveCheck { holds: max_slice_mi <= bound, margin: bound - max_slice_mi, bound, max_slice_mi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_slope() {
        let xs = [250.0, 500.0, 1000.0, 2000.0, 4000.0];
        let ys: Vec<f64> = xs.iter().map(|n: &f64| 0.7 * n.powf(-0.5)).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-6);
        assert!(!fit.excluded_first);
    }

    #[test]
    fn transient_first_point_is_dropped() {
        let xs = [100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0];
        let mut ys: Vec<f64> = xs.iter().map(|n: &f64| n.powf(-0.5)).collect();
        ys[0] *= 20.0;
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!(fit.excluded_first);
        assert!((fit.slope + 0.5).abs() < 1e-9);
        assert_eq!(fit.points, 5);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_loglog(&[1.0], &[1.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn logconcave_bound_examples() {
        let eye = |d: usize| -> Vec<Vec<f64>> {
            (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
        };
        let indep = GaussianSpec::new(eye(3), eye(2), vec![vec![0.0; 2]; 3]).unwrap();
        let c = check_logconcave_bound(&indep).unwrap();
        assert!(c.holds);
        assert_eq!(c.max_slice_mi, 0.0);
        assert!((c.bound - 0.105_009_115_009_482_18).abs() < 1e-12);
        assert!((c.margin - 0.105_009_115_009_482_18).abs() < 1e-12);

        let scalar = GaussianSpec::scalar(0.5).unwrap();
        let c = check_logconcave_bound(&scalar).unwrap();
        assert!(c.holds);
        assert!((c.max_slice_mi - 0.143_841_036_225_890_45).abs() < 1e-12);
        assert!((c.bound - 0.248_850_151_235_372_66).abs() < 1e-12);
    }

    #[test]
    fn logconcave_bound_rejects_perfect_correlation() {
        let spec = GaussianSpec::overlap(4, 0..3, 1..4).unwrap();
        assert!(matches!(check_logconcave_bound(&spec), Err(SmiError::NearSingular { .. })));
    }

    #[test]
    fn grid_validation() {
        let grid = RateGrid {
            source: RateSource::Gaussian { spec: GaussianSpec::scalar(0.5).unwrap() },
            n_values: vec![100, 50],
            m_values: vec![],
            trials: 2,
            fixed_n: 100,
            fixed_m: 10,
            seed: 0,
            sweeps: vec![SweepAxis::Joint],
            truth: None,
            truth_slices: 10,
            knn: KnnConfig::default(),
        };
        assert!(matches!(run_rate_sweep(&grid), Err(SmiError::InvalidConfig(_))));
        let no_truth = RateGrid {
            source: RateSource::Scenario { scenario: ScenarioKind::OneFeatureSin { d: 2 } },
            n_values: vec![50, 100],
            ..grid
        };
        assert!(matches!(run_rate_sweep(&no_truth), Err(SmiError::InvalidConfig(_))));
    }

    #[test]
    fn small_sweep_is_deterministic() {
        let grid = RateGrid {
            source: RateSource::Gaussian { spec: GaussianSpec::scalar(0.6).unwrap() },
            n_values: vec![100, 200, 400],
            m_values: vec![],
            trials: 3,
            fixed_n: 0,
            fixed_m: 0,
            seed: 9,
            sweeps: vec![SweepAxis::Joint],
            truth: None,
            truth_slices: 10,
            knn: KnnConfig::default(),
        };
        let a = run_rate_sweep(&grid).unwrap();
        assert_eq!(a, run_rate_sweep(&grid).unwrap());
        assert_eq!(a.rows.len(), 3);
        assert!(a.rows.iter().all(|r| r.rmse >= 0.0));
        assert!(a.slope_joint.is_some() && a.slope_m.is_none());
    }
}
