//! Helpers shared by the integration tests.
#![allow(dead_code)]

use serde::Deserialize;
use slicedmi::smine::{dv_objective, model_gradient, DvModel};
use slicedmi::{GaussianSpec, SampleMatrix, SeededRng};

#[derive(Debug, Deserialize)]
pub struct OverlapFixture {
    pub d_total: usize,
    pub x_range: [usize; 2],
    pub y_range: [usize; 2],
    pub slices: usize,
    pub seed: u64,
    pub value: f64,
    pub std_error: f64,
}

impl OverlapFixture {
    pub fn load() -> Self {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/overlap_d3.toml");
        toml::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    pub fn spec(&self) -> GaussianSpec {
        GaussianSpec::overlap(self.d_total, self.x_range[0] - 1..self.x_range[1], self.y_range[0] - 1..self.y_range[1])
            .unwrap()
    }
}

/// Random `d × d` orthogonal matrix by Gram–Schmidt on Gaussian columns.
pub fn random_orthogonal(d: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        for u in &q {
            let p: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= p * ui);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    q
}

/// Random joint covariance `A Aᵀ + 0.1 I` split into blocks, rejected until the
/// canonical correlation is at most `max_cca`.
pub fn random_spec(dx: usize, dy: usize, max_cca: f64, rng: &mut SeededRng) -> GaussianSpec {
    loop {
        let d = dx + dy;
        let a: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.standard_normal()).collect()).collect();
        let cov = |i: usize, j: usize| {
            (0..d).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 }
        };
        let block = |r: std::ops::Range<usize>, c: std::ops::Range<usize>| -> Vec<Vec<f64>> {
            r.map(|i| c.clone().map(|j| cov(i, j)).collect()).collect()
        };
        let spec = GaussianSpec::new(block(0..dx, 0..dx), block(dx..d, dx..d), block(0..dx, dx..d)).unwrap();
        if slicedmi::gaussian::cca_coefficient(&spec).unwrap() <= max_cca {
            return spec;
        }
    }
}

/// `|a - b| <= k * sqrt(se_a² + se_b²)`.
pub fn within_sigmas(a: f64, se_a: f64, b: f64, se_b: f64, k: f64) -> bool {
    (a - b).abs() <= k * (se_a * se_a + se_b * se_b).sqrt()
}

pub fn random_batch(rows: usize, cols: usize, rng: &mut SeededRng) -> SampleMatrix {
    SampleMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.standard_normal()).collect()).unwrap()
}

fn params(m: &DvModel) -> Vec<f64> {
    [&m.weights_1[..], &m.bias_1, &m.weights_2, &[m.bias_2]].concat()
}

fn with_params(m: &DvModel, p: &[f64]) -> DvModel {
    let (a, b, c) = (m.weights_1.len(), m.bias_1.len(), m.weights_2.len());
    DvModel {
        input_dim: m.input_dim,
        hidden: m.hidden,
        weights_1: p[..a].to_vec(),
        bias_1: p[a..a + b].to_vec(),
        weights_2: p[a + b..a + b + c].to_vec(),
        bias_2: p[a + b + c],
    }
}

/// Largest coordinate-wise relative error between the analytic gradient and
/// central differences. Coordinates below 1e-6 in both are compared absolutely.
pub fn max_gradient_error(model: &DvModel, pos: &SampleMatrix, neg: &SampleMatrix) -> f64 {
    let analytic = params(&model_gradient(model, pos, neg).unwrap());
    let p0 = params(model);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..p0.len() {
        let mut p = p0.clone();
        p[i] = p0[i] + h;
        let up = dv_objective(&with_params(model, &p), pos, neg).unwrap();
        p[i] = p0[i] - h;
        let down = dv_objective(&with_params(model, &p), pos, neg).unwrap();
        let fd = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((analytic[i] - fd).abs() / scale);
    }
    worst
}
