//! Neural lower bound on SMI and SMI-maximizing linear features.
//!
//! A small network `g` is trained to maximize the Donsker–Varadhan objective
//! between sliced joint samples `(θ, φ, θᵀx, φᵀy)` and the same rows with
//! `y` permuted within the batch. The held-out objective is a lower bound on
//! SMI in expectation. [`feature_extract`] trains linear maps `A_x`, `A_y`
//! jointly with the network so that `SMI(A_x X; A_y Y)` is maximized.

mod io;
mod model;
mod optim;

pub use io::{read_tensors, write_tensors, Tensor};
pub use model::{dv_objective, log_mean_exp, model_gradient, softmax, DvModel, ModelGradient};
pub use optim::{Optimizer, Schedule};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmiError};
use crate::sampling::{dot, sample_unit_sphere, SampleMatrix, SeededRng};
use model::backprop;
use optim::Ascent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate for `A_x`, `A_y`; defaults to `learning_rate`.
    pub feature_learning_rate: Option<f64>,
    pub optimizer: Optimizer,
    pub schedule: Schedule,
    pub seed: u64,
    /// Draw fresh directions for every batch. When false each sample keeps
    /// the direction pair drawn for it at the start.
    pub resample_directions_per_batch: bool,
    /// Distinct direction pairs per batch, reused cyclically across rows.
    /// `None` means one pair per row.
    pub slices_per_batch: Option<usize>,
    /// When false the network sees `x ⊕ y` directly (plain MINE).
    pub slicing: bool,
    pub hidden: usize,
    /// The reported estimate averages the held-out objective over this many
    /// final epochs.
    pub smoothing_epochs: usize,
    /// How many of the five held-out fifths to train and evaluate on, each
    /// with its own model. The returned model and maps come from the first.
    pub folds: usize,
    /// Number of random pairings making up the held-out product batch.
    pub eval_pairings: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 256,
            learning_rate: 1e-3,
            feature_learning_rate: None,
            optimizer: Optimizer::Adam,
            schedule: Schedule::Constant,
            seed: 0,
            resample_directions_per_batch: true,
            slices_per_batch: None,
            slicing: true,
            hidden: 100,
            smoothing_epochs: 10,
            folds: 5,
            eval_pairings: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let lr_ok = |v: f64| v > 0.0 && v.is_finite();
        if self.epochs == 0 || self.batch_size < 2 || self.hidden == 0 || self.smoothing_epochs == 0 {
            return Err(SmiError::InvalidConfig("epochs, hidden and smoothing_epochs must be positive, batch_size at least 2".into()));
        }
        if !lr_ok(self.learning_rate) || !self.feature_learning_rate.is_none_or(lr_ok) {
            return Err(SmiError::InvalidConfig("learning rates must be positive and finite".into()));
        }
        if !(1..=5).contains(&self.folds) || self.eval_pairings == 0 {
            return Err(SmiError::InvalidConfig("folds must be in 1..=5 and eval_pairings positive".into()));
        }
        if self.slices_per_batch == Some(0) {
            return Err(SmiError::InvalidConfig("slices_per_batch must be positive".into()));
        }
        Ok(())
    }
}

/// A row-major matrix that may have zero rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Linear {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SmiError::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SmiError::Numerical("feature map entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Entries drawn i.i.d. from `N(0, 1/cols)`.
    pub fn gaussian(rows: usize, cols: usize, rng: &mut SeededRng) -> Self {
        let s = (1.0 / cols as f64).sqrt();
        Self { rows, cols, data: (0..rows * cols).map(|_| s * rng.standard_normal()).collect() }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }
}

/// Learned linear processing. An `a_y` with zero rows leaves `Y` unprocessed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMaps {
    pub a_x: Linear,
    pub a_y: Linear,
}

impl FeatureMaps {
    /// `|cos|` between each row of `a_x` and the basis vector `e_j` (0-based).
    pub fn row_alignment(&self, j: usize) -> Vec<f64> {
        (0..self.a_x.rows)
            .map(|i| {
                let r = self.a_x.row(i);
                r[j].abs() / dot(r, r).sqrt()
            })
            .collect()
    }

    /// 0-based index of the largest-magnitude entry in each row of `a_x`.
    pub fn dominant_coordinates(&self) -> Vec<usize> {
        (0..self.a_x.rows)
            .map(|i| {
                let r = self.a_x.row(i);
                (0..r.len()).max_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs())).unwrap_or(0)
            })
            .collect()
    }
}

/// A trained potential with its held-out objective curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmineRun {
    pub model: DvModel,
    /// Held-out DV value after each epoch, averaged over folds, in nats.
    pub curve: Vec<f64>,
    /// Mean of the last `smoothing_epochs` entries of `curve`.
    pub estimate: f64,
    /// Per-fold held-out estimates; `estimate` is their mean.
    pub fold_estimates: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<FeatureMaps>,
}

/// Direction pair for one row, or `None` when slicing is off.
struct Slices {
    theta: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
}

impl Slices {
    fn draw(count: usize, fx: usize, fy: usize, rng: &mut SeededRng) -> Result<Self> {
        let mut theta = Vec::with_capacity(count);
        let mut phi = Vec::with_capacity(count);
        for _ in 0..count {
            theta.push(sample_unit_sphere(fx, rng)?.coords().to_vec());
            phi.push(sample_unit_sphere(fy, rng)?.coords().to_vec());
        }
        Ok(Self { theta, phi })
    }
}

#[derive(Clone)]
struct Trainer<'a> {
    x: &'a SampleMatrix,
    y: &'a SampleMatrix,
    cfg: &'a TrainConfig,
    maps: Option<FeatureMaps>,
}

/// Rows of one batch: sample indices and the direction pair used by each row.
struct BatchPlan<'s> {
    idx: Vec<usize>,
    slices: Option<&'s Slices>,
    slice_of: Vec<usize>,
}

impl Trainer<'_> {
    fn fx(&self) -> usize {
        self.maps.as_ref().map_or(self.x.cols(), |m| m.a_x.rows)
    }

    fn fy(&self) -> usize {
        match &self.maps {
            Some(m) if m.a_y.rows > 0 => m.a_y.rows,
            _ => self.y.cols(),
        }
    }

    fn input_dim(&self) -> usize {
        if self.cfg.slicing {
            self.fx() + self.fy() + 2
        } else {
            self.fx() + self.fy()
        }
    }

    fn features(data: &SampleMatrix, map: Option<&Linear>, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter()
            .map(|&i| match map {
                Some(a) if a.rows > 0 => {
                    let mut out = vec![0.0; a.rows];
                    a.apply(data.row(i), &mut out);
                    out
                }
                _ => data.row(i).to_vec(),
            })
            .collect()
    }

    /// Network inputs for the rows of `plan`, pairing row `r` with the `y` of
    /// row `partner[r]`. The identity pairing gives the joint batch.
    fn inputs(&self, plan: &BatchPlan, fxs: &[Vec<f64>], fys: &[Vec<f64>], partner: &[usize]) -> Result<SampleMatrix> {
        let dim = self.input_dim();
        let mut rows = Vec::with_capacity(partner.len() * dim);
        for (r, &q) in partner.iter().enumerate() {
            match plan.slices {
                Some(s) => {
                    let (t, p) = (&s.theta[plan.slice_of[r]], &s.phi[plan.slice_of[r]]);
                    rows.extend_from_slice(t);
                    rows.extend_from_slice(p);
                    rows.push(dot(t, &fxs[r]));
                    rows.push(dot(p, &fys[q]));
                }
                None => {
                    rows.extend_from_slice(&fxs[r]);
                    rows.extend_from_slice(&fys[q]);
                }
            }
        }
        SampleMatrix::new(partner.len(), dim, rows)
    }

    fn batch_features(&self, plan: &BatchPlan) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let maps = self.maps.as_ref();
        (Self::features(self.x, maps.map(|m| &m.a_x), &plan.idx), Self::features(self.y, maps.map(|m| &m.a_y), &plan.idx))
    }

    /// Held-out objective: joint rows against `pairings.len()` product pairings.
    fn evaluate(&self, model: &DvModel, plan: &BatchPlan, pairings: &[Vec<usize>]) -> Result<f64> {
        let (fxs, fys) = self.batch_features(plan);
        let identity: Vec<usize> = (0..plan.idx.len()).collect();
        let pos = self.inputs(plan, &fxs, &fys, &identity)?;
        let negs: Vec<SampleMatrix> = pairings.iter().map(|p| self.inputs(plan, &fxs, &fys, p)).collect::<Result<_>>()?;
        let stacked = negs.iter().skip(1).try_fold(negs[0].clone(), |acc, m| acc.vstack(m))?;
        dv_objective(model, &pos, &stacked)
    }

    /// Gradient with respect to the feature vectors `A_x x` and `A_y y` of
    /// one input row, given the gradient `dz` with respect to that row.
    fn feature_grads(&self, dz: &[f64], plan: &BatchPlan, r: usize) -> (Vec<f64>, Vec<f64>) {
        let (fx, fy) = (self.fx(), self.fy());
        match plan.slices {
            Some(s) => {
                let (cu, cv) = (dz[fx + fy], dz[fx + fy + 1]);
                let k = plan.slice_of[r];
                (s.theta[k].iter().map(|t| cu * t).collect(), s.phi[k].iter().map(|p| cv * p).collect())
            }
            None => (dz[..fx].to_vec(), dz[fx..fx + fy].to_vec()),
        }
    }

    fn map_gradients(&self, maps: &FeatureMaps, dz_pos: &[f64], dz_neg: &[f64], plan: &BatchPlan, partner: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let dim = self.input_dim();
        let mut gx = vec![0.0; maps.a_x.data.len()];
        let mut gy = vec![0.0; maps.a_y.data.len()];
        let outer = |g: &mut [f64], cols: usize, coef: &[f64], input: &[f64]| {
            for (i, c) in coef.iter().enumerate() {
                for (gij, v) in g[i * cols..(i + 1) * cols].iter_mut().zip(input) {
                    *gij += c * v;
                }
            }
        };
        for r in 0..plan.idx.len() {
            let x = self.x.row(plan.idx[r]);
            for (dz, y_row) in [(dz_pos, plan.idx[r]), (dz_neg, plan.idx[partner[r]])] {
                let (cx, cy) = self.feature_grads(&dz[r * dim..(r + 1) * dim], plan, r);
                outer(&mut gx, maps.a_x.cols, &cx, x);
                if maps.a_y.rows > 0 {
                    outer(&mut gy, maps.a_y.cols, &cy, self.y.row(y_row));
                }
            }
        }
        (gx, gy)
    }

    /// Trains one model with the `fold`-th fifth of `order` held out.
    fn train_fold(&self, order: &[usize], fold: usize) -> Result<SmineRun> {
        let cfg = self.cfg;
        let n = order.len();
        let holdout = n / 5;
        let eval_idx = &order[fold * holdout..(fold + 1) * holdout];
        let train_idx: Vec<usize> = order[..fold * holdout].iter().chain(&order[(fold + 1) * holdout..]).copied().collect();
        let mut maps = self.maps.clone();
        let (fx, fy) = (self.fx(), self.fy());
        let sliced = cfg.slicing;

        let mut rng = SeededRng::with_stream(cfg.seed, 16 + fold as u64);
        let mut model = DvModel::init(self.input_dim(), cfg.hidden, &mut rng)?;
        let eval_slices = if sliced { Some(Slices::draw(holdout, fx, fy, &mut rng)?) } else { None };
        let pairings: Vec<Vec<usize>> = (0..cfg.eval_pairings)
            .map(|_| {
                let mut p: Vec<usize> = (0..holdout).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        let fixed_slices = if sliced && !cfg.resample_directions_per_batch { Some(Slices::draw(n, fx, fy, &mut rng)?) } else { None };
        let eval_plan = BatchPlan { idx: eval_idx.to_vec(), slices: eval_slices.as_ref(), slice_of: (0..holdout).collect() };

        let batch = cfg.batch_size.min(train_idx.len());
        let mut sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
        if let Some(m) = &maps {
            sizes.extend([m.a_x.data.len(), m.a_y.data.len()]);
        }
        let mut opt = Ascent::new(cfg.optimizer, &sizes);
        let feature_lr = cfg.feature_learning_rate.unwrap_or(cfg.learning_rate);
        let epochs_rng = rng.substream(0);
        let mut curve = Vec::with_capacity(cfg.epochs);
        let mut shuffled = train_idx;

        for epoch in 0..cfg.epochs {
            let mut rng = epochs_rng.substream(epoch as u64);
            let scale = cfg.schedule.factor(epoch, cfg.epochs);
            let diverged = |_| SmiError::TrainingDiverged { epoch };
            shuffled.shuffle(&mut rng);
            for chunk in shuffled.chunks_exact(batch) {
                let mut partner: Vec<usize> = (0..batch).collect();
                partner.shuffle(&mut rng);
                let fresh;
                let (slices, slice_of) = match (&fixed_slices, sliced) {
                    (_, false) => (None, Vec::new()),
                    (Some(f), true) => (Some(f), chunk.to_vec()),
                    (None, true) => {
                        let count = cfg.slices_per_batch.unwrap_or(batch).min(batch);
                        fresh = Slices::draw(count, fx, fy, &mut rng)?;
                        (Some(&fresh), (0..batch).map(|r| r % count).collect())
                    }
                };
                let plan = BatchPlan { idx: chunk.to_vec(), slices, slice_of };
                let trainer = Trainer { maps: maps.clone(), ..*self };
                let (fxs, fys) = trainer.batch_features(&plan);
                let identity: Vec<usize> = (0..batch).collect();
                let pos = trainer.inputs(&plan, &fxs, &fys, &identity).map_err(diverged)?;
                let neg = trainer.inputs(&plan, &fxs, &fys, &partner).map_err(diverged)?;
                let bp = backprop(&model, &pos, &neg, maps.is_some()).map_err(diverged)?;
                let map_grads = match (&maps, &bp.dz_pos, &bp.dz_neg) {
                    (Some(m), Some(dp), Some(dn)) => Some(trainer.map_gradients(m, dp, dn, &plan, &partner)),
                    _ => None,
                };
                opt.tick();
                for (slot, (p, g)) in model.tensors_mut().into_iter().zip(bp.grad.tensors()).enumerate() {
                    opt.update(slot, p, g, scale * cfg.learning_rate);
                }
                if let (Some(m), Some((gx, gy))) = (maps.as_mut(), map_grads) {
                    opt.update(4, &mut m.a_x.data, &gx, scale * feature_lr);
                    opt.update(5, &mut m.a_y.data, &gy, scale * feature_lr);
                }
                let maps_finite = maps.as_ref().is_none_or(|m| m.a_x.data.iter().chain(&m.a_y.data).all(|v| v.is_finite()));
                if !model.is_finite() || !maps_finite {
                    return Err(SmiError::TrainingDiverged { epoch });
                }
            }
            let trainer = Trainer { maps: maps.clone(), ..*self };
            curve.push(trainer.evaluate(&model, &eval_plan, &pairings).map_err(diverged)?);
        }
        let tail = &curve[curve.len().saturating_sub(cfg.smoothing_epochs)..];
        let estimate = tail.iter().sum::<f64>() / tail.len() as f64;
        Ok(SmineRun { model, curve, estimate, fold_estimates: vec![estimate], maps })
    }

    fn run(&self) -> Result<SmineRun> {
        let cfg = self.cfg;
        let n = self.x.rows();
        if n < cfg.batch_size || n / 5 < 2 {
            return Err(SmiError::InsufficientSamples { n, k: cfg.batch_size.max(10) });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut SeededRng::new(cfg.seed));
        let runs: Vec<SmineRun> = (0..cfg.folds)
            .into_par_iter()
            .map(|f| self.train_fold(&order, f))
            .collect::<Result<_>>()?;
        let k = runs.len() as f64;
        let curve = (0..cfg.epochs).map(|e| runs.iter().map(|r| r.curve[e]).sum::<f64>() / k).collect();
        let fold_estimates: Vec<f64> = runs.iter().map(|r| r.estimate).collect();
        let estimate = fold_estimates.iter().sum::<f64>() / k;
        let first = runs.into_iter().next().expect("at least one fold");
        Ok(SmineRun { model: first.model, curve, estimate, fold_estimates, maps: first.maps })
    }
}

fn check_pair(x: &SampleMatrix, y: &SampleMatrix) -> Result<()> {
    if x.rows() != y.rows() {
        return Err(SmiError::DimensionMismatch { expected: x.rows(), got: y.rows() });
    }
    Ok(())
}

/// Trains the potential network on paired samples and returns the held-out
/// lower-bound estimate.
pub fn train_smine(x: &SampleMatrix, y: &SampleMatrix, cfg: &TrainConfig) -> Result<SmineRun> {
    cfg.validate()?;
    check_pair(x, y)?;
    Trainer { x, y, cfg, maps: None }.run()
}

/// Jointly learns `A_x` (`r_x × d_x`), `A_y` (`r_y × d_y`, or none when
/// `r_y = 0`) and the potential network. Maps start from `N(0, 1/d)` entries.
pub fn feature_extract(x: &SampleMatrix, y: &SampleMatrix, r_x: usize, r_y: usize, cfg: &TrainConfig) -> Result<SmineRun> {
    if r_x == 0 || r_x > x.cols() || r_y > y.cols() {
        return Err(SmiError::InvalidConfig(format!(
            "feature ranks must satisfy 1 <= r_x <= {} and r_y <= {}",
            x.cols(),
            y.cols()
        )));
    }
    let mut rng = SeededRng::with_stream(cfg.seed, 2);
    let maps = FeatureMaps { a_x: Linear::gaussian(r_x, x.cols(), &mut rng), a_y: Linear::gaussian(r_y, y.cols(), &mut rng) };
    feature_extract_from(x, y, maps, cfg)
}

/// [`feature_extract`] starting from the given maps.
pub fn feature_extract_from(x: &SampleMatrix, y: &SampleMatrix, init: FeatureMaps, cfg: &TrainConfig) -> Result<SmineRun> {
    cfg.validate()?;
    check_pair(x, y)?;
    if init.a_x.cols != x.cols() || init.a_x.rows == 0 {
        return Err(SmiError::DimensionMismatch { expected: x.cols(), got: init.a_x.cols });
    }
    if init.a_y.rows > 0 && init.a_y.cols != y.cols() {
        return Err(SmiError::DimensionMismatch { expected: y.cols(), got: init.a_y.cols });
    }
    Trainer { x, y, cfg, maps: Some(init) }.run()
}
