use serde::{Deserialize, Serialize};

use crate::error::{Result, SmiError};
use crate::sampling::{SampleMatrix, SeededRng};

/// Two-layer potential network `g(z) = w2 · tanh(W1 z + b1) + b2`.
///
/// For sliced training the input is `θ ⊕ φ ⊕ θᵀx ⊕ φᵀy`; for the unsliced
/// variant it is `x ⊕ y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvModel {
    pub input_dim: usize,
    pub hidden: usize,
    /// `hidden × input_dim`, row-major.
    pub weights_1: Vec<f64>,
    pub bias_1: Vec<f64>,
    pub weights_2: Vec<f64>,
    pub bias_2: f64,
}

/// Gradient of the objective, shaped like the model.
pub type ModelGradient = DvModel;

impl DvModel {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            weights_1: vec![0.0; hidden * input_dim],
            bias_1: vec![0.0; hidden],
            weights_2: vec![0.0; hidden],
            bias_2: 0.0,
        }
    }

    /// Gaussian init with variance `1/fan_in` per layer, zero biases.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut SeededRng) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(SmiError::InvalidConfig("model dimensions must be positive".into()));
        }
        let mut m = Self::zeros(input_dim, hidden);
        let s1 = (1.0 / input_dim as f64).sqrt();
        let s2 = (1.0 / hidden as f64).sqrt();
        m.weights_1.iter_mut().for_each(|w| *w = s1 * rng.standard_normal());
        m.weights_2.iter_mut().for_each(|w| *w = s2 * rng.standard_normal());
        Ok(m)
    }

    pub fn parameter_count(&self) -> usize {
        self.weights_1.len() + self.bias_1.len() + self.weights_2.len() + 1
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.weights_1, &mut self.bias_1, &mut self.weights_2, std::slice::from_mut(&mut self.bias_2)]
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 4] {
        [&self.weights_1, &self.bias_1, &self.weights_2, std::slice::from_ref(&self.bias_2)]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn norms(&self) -> String {
        let n = |t: &[f64]| t.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w1, b1, w2, b2] = self.tensors();
        format!("|W1| = {:.3e}, |b1| = {:.3e}, |w2| = {:.3e}, |b2| = {:.3e}", n(w1), n(b1), n(w2), n(b2))
    }

    fn check_input(&self, batch: &SampleMatrix) -> Result<()> {
        if batch.cols() != self.input_dim {
            return Err(SmiError::DimensionMismatch { expected: self.input_dim, got: batch.cols() });
        }
        Ok(())
    }

    /// Writes the hidden activations into `hidden` and returns the output.
    fn forward_row(&self, z: &[f64], hidden: &mut [f64]) -> f64 {
        let mut out = self.bias_2;
        for (j, h) in hidden.iter_mut().enumerate() {
            let w = &self.weights_1[j * self.input_dim..(j + 1) * self.input_dim];
            let pre = self.bias_1[j] + crate::sampling::dot(w, z);
            *h = pre.tanh();
            out += self.weights_2[j] * *h;
        }
        out
    }

    /// Outputs and the `rows × hidden` activation matrix.
    fn activations(&self, batch: &SampleMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(batch)?;
        let mut hidden = vec![0.0; batch.rows() * self.hidden];
        let out: Vec<f64> = batch
            .iter_rows()
            .zip(hidden.chunks_exact_mut(self.hidden))
            .map(|(z, h)| self.forward_row(z, h))
            .collect();
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(SmiError::Numerical(format!("non-finite potential on row {i} ({})", self.norms())));
        }
        Ok((out, hidden))
    }

    pub fn forward(&self, batch: &SampleMatrix) -> Result<Vec<f64>> {
        Ok(self.activations(batch)?.0)
    }

    /// Accumulates `c · ∂g(z)/∂params` into `grad`, and `c · ∂g(z)/∂z` into
    /// `dz` when given. `hidden` holds the activations for `z`.
    fn backward_row(&self, z: &[f64], hidden: &[f64], c: f64, grad: &mut ModelGradient, mut dz: Option<&mut [f64]>) {
        grad.bias_2 += c;
        for (j, &h) in hidden.iter().enumerate() {
            grad.weights_2[j] += c * h;
            let dpre = c * self.weights_2[j] * (1.0 - h * h);
            grad.bias_1[j] += dpre;
            let row = j * self.input_dim..(j + 1) * self.input_dim;
            for (g, &zi) in grad.weights_1[row.clone()].iter_mut().zip(z) {
                *g += dpre * zi;
            }
            if let Some(dz) = dz.as_deref_mut() {
                for (d, &w) in dz.iter_mut().zip(&self.weights_1[row]) {
                    *d += dpre * w;
                }
            }
        }
    }
}

/// `log((1/n) Σ exp(v))` with max subtraction.
pub fn log_mean_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + (s / v.len() as f64).ln()
}

/// Softmax weights of `v`, summing to one.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn check_batches(pos: &SampleMatrix, neg: &SampleMatrix) -> Result<()> {
    if pos.cols() != neg.cols() {
        return Err(SmiError::DimensionMismatch { expected: pos.cols(), got: neg.cols() });
    }
    Ok(())
}

/// Donsker–Varadhan objective: mean potential on the joint batch minus the
/// log-mean-exp potential on the product batch.
pub fn dv_objective(model: &DvModel, batch_pos: &SampleMatrix, batch_neg: &SampleMatrix) -> Result<f64> {
    check_batches(batch_pos, batch_neg)?;
    let gp = model.forward(batch_pos)?;
    let gn = model.forward(batch_neg)?;
    let value = gp.iter().sum::<f64>() / gp.len() as f64 - log_mean_exp(&gn);
    if !value.is_finite() {
        return Err(SmiError::Numerical(format!("non-finite objective ({})", model.norms())));
    }
    Ok(value)
}

/// Parameter gradient, plus input gradients for both batches when asked.
pub(crate) struct Backprop {
    pub grad: ModelGradient,
    pub dz_pos: Option<Vec<f64>>,
    pub dz_neg: Option<Vec<f64>>,
}

pub(crate) fn backprop(model: &DvModel, pos: &SampleMatrix, neg: &SampleMatrix, input_grads: bool) -> Result<Backprop> {
    check_batches(pos, neg)?;
    let (gp, hp) = model.activations(pos)?;
    let (gn, hn) = model.activations(neg)?;
    let value = gp.iter().sum::<f64>() / gp.len() as f64 - log_mean_exp(&gn);
    if !value.is_finite() {
        return Err(SmiError::Numerical(format!("non-finite objective ({})", model.norms())));
    }
    let weights = softmax(&gn);
    let mut grad = DvModel::zeros(model.input_dim, model.hidden);
    let (d, hd) = (model.input_dim, model.hidden);
    let mut dz_pos = input_grads.then(|| vec![0.0; pos.rows() * d]);
    let mut dz_neg = input_grads.then(|| vec![0.0; neg.rows() * d]);
    let cp = 1.0 / pos.rows() as f64;
    for (i, z) in pos.iter_rows().enumerate() {
        let dz = dz_pos.as_mut().map(|v| &mut v[i * d..(i + 1) * d]);
        model.backward_row(z, &hp[i * hd..(i + 1) * hd], cp, &mut grad, dz);
    }
    for (i, z) in neg.iter_rows().enumerate() {
        let dz = dz_neg.as_mut().map(|v| &mut v[i * d..(i + 1) * d]);
        model.backward_row(z, &hn[i * hd..(i + 1) * hd], -weights[i], &mut grad, dz);
    }
    Ok(Backprop { grad, dz_pos, dz_neg })
}

/// Exact gradient of [`dv_objective`] with respect to every parameter.
pub fn model_gradient(model: &DvModel, batch_pos: &SampleMatrix, batch_neg: &SampleMatrix) -> Result<ModelGradient> {
    Ok(backprop(model, batch_pos, batch_neg, false)?.grad)
}
