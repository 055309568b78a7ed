//! Seeded generators for the synthetic experiments.
//!
//! Scenario labels `a`–`e` follow the independence-testing list:
//!
//! | label | kind | construction |
//! |---|---|---|
//! | a | `one_feature_linear` | `Y = (1/√2)((1/√d)(1ᵀX)·1 + Z)` |
//! | b | `one_feature_sin` | `Y = (1/√2)((1/√d)sin(1ᵀX)·1 + Z)` |
//! | c | `two_features` | first `⌊d/2⌋` coordinates of `Y` see `(1/d)` × the sum of the first `⌊d/2⌋` coordinates of `X`, the rest see the sum of the last `⌈d/2⌉`; then noise and `1/√2` |
//! | d | `low_rank` | `X = P₁V + Z₁`, `Y = P₂V + Z₂`, `V ∼ N(0, I_rank)`, `P` entries i.i.d. `N(0,1)`, redrawn per call |
//! | e | `independent` | `Y = (X + Z)/√2` |
//!
//! plus `overlap` (index slices of one standard normal vector) and
//! `feature_needle` (`Y = X₁ + Z₀`, scalar).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmiError};
use crate::gaussian::GaussianSpec;
use crate::sampling::{SampleMatrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioKind {
    /// `X = Z[x_range]`, `Y = Z[y_range]`, `Z ∼ N(0, I_{d_total})`. Ranges are
    /// one-based and inclusive, e.g. `[1, 3]` and `[2, 4]`.
    Overlap { d_total: usize, x_range: [usize; 2], y_range: [usize; 2] },
    OneFeatureLinear { d: usize },
    OneFeatureSin { d: usize },
    TwoFeatures { d: usize },
    LowRank { d: usize, #[serde(default = "default_rank")] rank: usize },
    Independent { d: usize },
    FeatureNeedle { d: usize },
}

fn default_rank() -> usize {
    2
}

impl ScenarioKind {
    /// Looks up a scenario by its short label (`a`–`e`) or snake-case name.
    pub fn from_label(label: &str, d: usize) -> Result<Self> {
        let kind = match label {
            "a" | "one_feature_linear" => ScenarioKind::OneFeatureLinear { d },
            "b" | "one_feature_sin" => ScenarioKind::OneFeatureSin { d },
            "c" | "two_features" => ScenarioKind::TwoFeatures { d },
            "d" | "low_rank" => ScenarioKind::LowRank { d, rank: 2 },
            "e" | "independent" => ScenarioKind::Independent { d },
            "feature_needle" => ScenarioKind::FeatureNeedle { d },
            other => return Err(SmiError::InvalidConfig(format!("unknown scenario label {other:?}"))),
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Overlap { .. } => "overlap",
            ScenarioKind::OneFeatureLinear { .. } => "one_feature_linear",
            ScenarioKind::OneFeatureSin { .. } => "one_feature_sin",
            ScenarioKind::TwoFeatures { .. } => "two_features",
            ScenarioKind::LowRank { .. } => "low_rank",
            ScenarioKind::Independent { .. } => "independent",
            ScenarioKind::FeatureNeedle { .. } => "feature_needle",
        }
    }

    /// The same kind with its dimension replaced; `overlap` is returned as is.
    pub fn with_dim(&self, d: usize) -> Self {
        match *self {
            ScenarioKind::Overlap { .. } => *self,
            ScenarioKind::OneFeatureLinear { .. } => ScenarioKind::OneFeatureLinear { d },
            ScenarioKind::OneFeatureSin { .. } => ScenarioKind::OneFeatureSin { d },
            ScenarioKind::TwoFeatures { .. } => ScenarioKind::TwoFeatures { d },
            ScenarioKind::LowRank { rank, .. } => ScenarioKind::LowRank { d, rank },
            ScenarioKind::Independent { .. } => ScenarioKind::Independent { d },
            ScenarioKind::FeatureNeedle { .. } => ScenarioKind::FeatureNeedle { d },
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match *self {
            ScenarioKind::Overlap { x_range, y_range, .. } => {
                (x_range[1] + 1 - x_range[0], y_range[1] + 1 - y_range[0])
            }
            ScenarioKind::FeatureNeedle { d } => (d, 1),
            ScenarioKind::OneFeatureLinear { d }
            | ScenarioKind::OneFeatureSin { d }
            | ScenarioKind::TwoFeatures { d }
            | ScenarioKind::LowRank { d, .. }
            | ScenarioKind::Independent { d } => (d, d),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScenarioKind::Overlap { d_total, x_range, y_range } => {
                for r in [x_range, y_range] {
                    if r[0] < 1 || r[0] > r[1] || r[1] > d_total {
                        return Err(SmiError::InvalidConfig(format!(
                            "overlap range {r:?} must satisfy 1 <= start <= end <= {d_total}"
                        )));
                    }
                }
                Ok(())
            }
            ScenarioKind::TwoFeatures { d } if d < 2 => {
                Err(SmiError::InvalidConfig("two_features needs d >= 2".into()))
            }
            ScenarioKind::LowRank { rank: 0, .. } => Err(SmiError::InvalidConfig("low_rank needs rank >= 1".into())),
            _ if self.dims().0 == 0 => Err(SmiError::InvalidConfig("dimension must be >= 1".into())),
            _ => Ok(()),
        }
    }

    /// The exact joint Gaussian law, for kinds that have one (`b` is not
    /// Gaussian and `d` depends on the per-call projections).
    pub fn gaussian_spec(&self) -> Result<Option<GaussianSpec>> {
        self.validate()?;
        let eye = |d: usize| -> Vec<Vec<f64>> {
            (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect()
        };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let spec = match *self {
            ScenarioKind::Overlap { d_total, x_range, y_range } => {
                GaussianSpec::overlap(d_total, x_range[0] - 1..x_range[1], y_range[0] - 1..y_range[1])?
            }
            ScenarioKind::OneFeatureLinear { d } => {
                let c = h / (d as f64).sqrt();
                let sy = (0..d).map(|i| (0..d).map(|j| 0.5 + if i == j { 0.5 } else { 0.0 }).collect()).collect();
                GaussianSpec::new(eye(d), sy, vec![vec![c; d]; d])?
            }
            ScenarioKind::TwoFeatures { d } => {
                let half = d / 2;
                let group = |i: usize| usize::from(i >= half);
                let size = |g: usize| if g == 0 { half } else { d - half } as f64;
                let df = d as f64;
                let sxy = (0..d)
                    .map(|j| (0..d).map(|i| if group(i) == group(j) { h / df } else { 0.0 }).collect())
                    .collect();
                let sy = (0..d)
                    .map(|i| {
                        (0..d)
                            .map(|k| {
                                let shared = if group(i) == group(k) { size(group(i)) / (df * df) } else { 0.0 };
                                0.5 * (shared + if i == k { 1.0 } else { 0.0 })
                            })
                            .collect()
                    })
                    .collect();
                GaussianSpec::new(eye(d), sy, sxy)?
            }
            ScenarioKind::Independent { d } => {
                let sxy = (0..d).map(|i| (0..d).map(|j| if i == j { h } else { 0.0 }).collect()).collect();
                GaussianSpec::new(eye(d), eye(d), sxy)?
            }
            ScenarioKind::FeatureNeedle { d } => {
                let sxy = (0..d).map(|i| vec![if i == 0 { 1.0 } else { 0.0 }]).collect();
                GaussianSpec::new(eye(d), vec![vec![2.0]], sxy)?
            }
            ScenarioKind::OneFeatureSin { .. } | ScenarioKind::LowRank { .. } => return Ok(None),
        };
        Ok(Some(spec))
    }
}

/// A scenario kind together with a sample size and a seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub n: usize,
    pub seed: u64,
}

fn normal_block(rng: &mut SeededRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.standard_normal()).collect()
}

/// The `P₁`, `P₂` matrices (`d × rank`, row-major) that [`generate`] draws
/// first for a `low_rank` scenario with this seed.
pub fn low_rank_projections(d: usize, rank: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SeededRng::new(seed);
    let p1 = normal_block(&mut rng, d * rank);
    let p2 = normal_block(&mut rng, d * rank);
    (p1, p2)
}

/// Draws `(X, Y)` for a scenario.
pub fn generate(scenario: &Scenario) -> Result<(SampleMatrix, SampleMatrix)> {
    scenario.kind.validate()?;
    let n = scenario.n;
    if n == 0 {
        return Err(SmiError::InvalidConfig("sample count must be >= 1".into()));
    }
    let mut rng = SeededRng::new(scenario.seed);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (dx, dy) = scenario.kind.dims();
    let mut xs = Vec::with_capacity(n * dx);
    let mut ys = Vec::with_capacity(n * dy);
    match scenario.kind {
        ScenarioKind::Overlap { d_total, x_range, y_range } => {
            for _ in 0..n {
                let z = normal_block(&mut rng, d_total);
                xs.extend_from_slice(&z[x_range[0] - 1..x_range[1]]);
                ys.extend_from_slice(&z[y_range[0] - 1..y_range[1]]);
            }
        }
        ScenarioKind::OneFeatureLinear { d } | ScenarioKind::OneFeatureSin { d } => {
            let sinusoid = matches!(scenario.kind, ScenarioKind::OneFeatureSin { .. });
            let scale = 1.0 / (d as f64).sqrt();
            for _ in 0..n {
                let x = normal_block(&mut rng, d);
                let z = normal_block(&mut rng, d);
                let s: f64 = x.iter().sum();
                let feature = scale * if sinusoid { s.sin() } else { s };
                ys.extend(z.iter().map(|zi| h * (feature + zi)));
                xs.extend(x);
            }
        }
        ScenarioKind::TwoFeatures { d } => {
            let half = d / 2;
            let inv_d = 1.0 / d as f64;
            for _ in 0..n {
                let x = normal_block(&mut rng, d);
                let z = normal_block(&mut rng, d);
                let first = inv_d * x[..half].iter().sum::<f64>();
                let second = inv_d * x[half..].iter().sum::<f64>();
                ys.extend(z.iter().enumerate().map(|(i, zi)| h * (if i < half { first } else { second } + zi)));
                xs.extend(x);
            }
        }
        ScenarioKind::LowRank { d, rank } => {
            let p1 = normal_block(&mut rng, d * rank);
            let p2 = normal_block(&mut rng, d * rank);
            for _ in 0..n {
                let v = normal_block(&mut rng, rank);
                let z1 = normal_block(&mut rng, d);
                let z2 = normal_block(&mut rng, d);
                for i in 0..d {
                    let row = i * rank..(i + 1) * rank;
                    xs.push(crate::sampling::dot(&p1[row.clone()], &v) + z1[i]);
                    ys.push(crate::sampling::dot(&p2[row], &v) + z2[i]);
                }
            }
        }
        ScenarioKind::Independent { .. } => {
            for _ in 0..n {
                let x = normal_block(&mut rng, dx);
                let z = normal_block(&mut rng, dx);
                ys.extend(x.iter().zip(&z).map(|(a, b)| h * (a + b)));
                xs.extend(x);
            }
        }
        ScenarioKind::FeatureNeedle { d } => {
            for _ in 0..n {
                let x = normal_block(&mut rng, d);
                ys.push(x[0] + rng.standard_normal());
                xs.extend(x);
            }
        }
    }
    Ok((SampleMatrix::new(n, dx, xs)?, SampleMatrix::new(n, dy, ys)?))
}

/// Pairs `x` with a uniformly permuted copy of `y`, keeping both marginals and
/// destroying the dependence.
pub fn shuffle_pairing(x: &SampleMatrix, y: &SampleMatrix, rng: &mut SeededRng) -> Result<(SampleMatrix, SampleMatrix)> {
    if x.rows() != y.rows() {
        return Err(SmiError::DimensionMismatch { expected: x.rows(), got: y.rows() });
    }
    let mut perm: Vec<usize> = (0..y.rows()).collect();
    perm.shuffle(rng);
    Ok((x.clone(), y.permute_rows(&perm)))
}
