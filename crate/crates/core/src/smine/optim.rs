use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    #[default]
    Adam,
}

/// Learning-rate multiplier over epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Constant,
    /// Decays linearly from 1 in the first epoch to `1/epochs` in the last.
    Linear,
}

impl Schedule {
    pub fn factor(&self, epoch: usize, epochs: usize) -> f64 {
        match self {
            Schedule::Constant => 1.0,
            Schedule::Linear => (epochs - epoch) as f64 / epochs as f64,
        }
    }
}

const BETA_1: f64 = 0.9;
const BETA_2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First-order ascent over a fixed list of tensors ("slots").
#[derive(Debug, Clone)]
pub(crate) struct Ascent {
    kind: Optimizer,
    t: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Ascent {
    pub fn new(kind: Optimizer, sizes: &[usize]) -> Self {
        Self {
            kind,
            t: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Starts a new step; call once before updating the slots.
    pub fn tick(&mut self) {
        self.t += 1;
    }

    pub fn update(&mut self, slot: usize, params: &mut [f64], grad: &[f64], lr: f64) {
        match self.kind {
            Optimizer::Sgd => params.iter_mut().zip(grad).for_each(|(p, g)| *p += lr * g),
            Optimizer::Adam => {
                let c1 = 1.0 - BETA_1.powi(self.t);
                let c2 = 1.0 - BETA_2.powi(self.t);
                let (m, v) = (&mut self.first[slot], &mut self.second[slot]);
                for i in 0..params.len() {
                    m[i] = BETA_1 * m[i] + (1.0 - BETA_1) * grad[i];
                    v[i] = BETA_2 * v[i] + (1.0 - BETA_2) * grad[i] * grad[i];
                    params[i] += lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}
