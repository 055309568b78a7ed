//! Closed-form references for jointly Gaussian `(X, Y)`.
//!
//! For Gaussian data every slice pair is a bivariate normal, so the per-slice
//! MI is `-½ log(1 - ρ²)` with
//! `ρ = θᵀΣ_XYφ / sqrt(θᵀΣ_Xθ · φᵀΣ_Yφ)`. The SMI is the average of that over
//! both spheres, which we integrate by Monte Carlo. The canonical correlation
//! `ρ_CCA` bounds every slice correlation and gives an upper bound on SMI.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmiError};
use crate::sampling::{sample_unit_sphere, SampleMatrix, SeededRng, UnitDirection};
use crate::smi::SmiEstimate;

/// Eigenvalues of the marginal covariances below this are rejected.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Slice correlations with `|ρ|` at or above this have no finite MI.
pub const NEAR_SINGULAR: f64 = 1.0 - 1e-12;

/// Mean and block covariance `[[Σ_X, Σ_XY], [Σ_XYᵀ, Σ_Y]]` of a Gaussian pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    pub sigma_x: Vec<Vec<f64>>,
    pub sigma_y: Vec<Vec<f64>>,
    pub sigma_xy: Vec<Vec<f64>>,
}

fn to_matrix(rows: &[Vec<f64>], r: usize, c: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(SmiError::InvalidSpec(format!("{name} must be {r}x{c}")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SmiError::InvalidSpec(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * scale))
}

/// `M^{-1/2}` of a symmetric positive definite matrix.
fn inv_sqrt(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l < EIGEN_FLOOR) {
        return Err(SmiError::InvalidSpec(format!("{name} is not positive definite (eigenvalue {bad:e})")));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

#[derive(Debug, Clone)]
struct Blocks {
    sx: DMatrix<f64>,
    sy: DMatrix<f64>,
    sxy: DMatrix<f64>,
}

impl GaussianSpec {
    /// Zero-mean spec from covariance blocks.
    pub fn new(sigma_x: Vec<Vec<f64>>, sigma_y: Vec<Vec<f64>>, sigma_xy: Vec<Vec<f64>>) -> Result<Self> {
        let spec = Self {
            mean_x: vec![0.0; sigma_x.len()],
            mean_y: vec![0.0; sigma_y.len()],
            sigma_x,
            sigma_y,
            sigma_xy,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Standardized scalar pair with correlation `rho`.
    pub fn scalar(rho: f64) -> Result<Self> {
        Self::new(vec![vec![1.0]], vec![vec![1.0]], vec![vec![rho]])
    }

    /// `X = Z[x_range]`, `Y = Z[y_range]` for `Z ~ N(0, I_total)`; ranges are
    /// zero-based and half-open.
    pub fn overlap(total: usize, x_range: std::ops::Range<usize>, y_range: std::ops::Range<usize>) -> Result<Self> {
        if x_range.is_empty() || y_range.is_empty() || x_range.end > total || y_range.end > total {
            return Err(SmiError::InvalidSpec(format!(
                "ranges {x_range:?}, {y_range:?} must be non-empty and within {total} coordinates"
            )));
        }
        let eye = |d: usize| DMatrix::<f64>::identity(d, d);
        let sxy = DMatrix::from_fn(x_range.len(), y_range.len(), |i, j| {
            if x_range.start + i == y_range.start + j {
                1.0
            } else {
                0.0
            }
        });
        Self::new(from_matrix(&eye(x_range.len())), from_matrix(&eye(y_range.len())), from_matrix(&sxy))
    }

    /// Joint spec of two independent pairs: `X = (X₁, X₂)`, `Y = (Y₁, Y₂)`.
    pub fn block_diagonal(a: &GaussianSpec, b: &GaussianSpec) -> Result<Self> {
        let (ba, bb) = (a.blocks()?, b.blocks()?);
        let diag = |p: &DMatrix<f64>, q: &DMatrix<f64>| {
            let mut m = DMatrix::zeros(p.nrows() + q.nrows(), p.ncols() + q.ncols());
            m.view_mut((0, 0), p.shape()).copy_from(p);
            m.view_mut((p.nrows(), p.ncols()), q.shape()).copy_from(q);
            m
        };
        let spec = Self {
            mean_x: [a.mean_x.as_slice(), &b.mean_x].concat(),
            mean_y: [a.mean_y.as_slice(), &b.mean_y].concat(),
            sigma_x: from_matrix(&diag(&ba.sx, &bb.sx)),
            sigma_y: from_matrix(&diag(&ba.sy, &bb.sy)),
            sigma_xy: from_matrix(&diag(&ba.sxy, &bb.sxy)),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The spec of `(U X, V Y)` for square matrices `U`, `V` (row-major).
    pub fn transformed(&self, u: &[Vec<f64>], v: &[Vec<f64>]) -> Result<Self> {
        let b = self.blocks()?;
        let um = to_matrix(u, self.dim_x(), self.dim_x(), "U")?;
        let vm = to_matrix(v, self.dim_y(), self.dim_y(), "V")?;
        let mx = &um * DVector::from_column_slice(&self.mean_x);
        let my = &vm * DVector::from_column_slice(&self.mean_y);
        let spec = Self {
            mean_x: mx.iter().copied().collect(),
            mean_y: my.iter().copied().collect(),
            sigma_x: from_matrix(&(&um * &b.sx * um.transpose())),
            sigma_y: from_matrix(&(&vm * &b.sy * vm.transpose())),
            sigma_xy: from_matrix(&(&um * &b.sxy * vm.transpose())),
        };
        Ok(spec.symmetrized())
    }

    fn symmetrized(mut self) -> Self {
        for s in [&mut self.sigma_x, &mut self.sigma_y] {
            let d = s.len();
            for i in 0..d {
                for j in 0..i {
                    let avg = 0.5 * (s[i][j] + s[j][i]);
                    s[i][j] = avg;
                    s[j][i] = avg;
                }
            }
        }
        self
    }

    pub fn dim_x(&self) -> usize {
        self.sigma_x.len()
    }

    pub fn dim_y(&self) -> usize {
        self.sigma_y.len()
    }

    fn blocks(&self) -> Result<Blocks> {
        let (dx, dy) = (self.dim_x(), self.dim_y());
        if dx == 0 || dy == 0 {
            return Err(SmiError::InvalidSpec("dimensions must be positive".into()));
        }
        if self.mean_x.len() != dx || self.mean_y.len() != dy {
            return Err(SmiError::InvalidSpec("mean lengths must match covariance sizes".into()));
        }
        Ok(Blocks {
            sx: to_matrix(&self.sigma_x, dx, dx, "sigma_x")?,
            sy: to_matrix(&self.sigma_y, dy, dy, "sigma_y")?,
            sxy: to_matrix(&self.sigma_xy, dx, dy, "sigma_xy")?,
        })
    }

    fn joint_covariance(b: &Blocks) -> DMatrix<f64> {
        let (dx, dy) = (b.sx.nrows(), b.sy.nrows());
        let mut full = DMatrix::zeros(dx + dy, dx + dy);
        full.view_mut((0, 0), (dx, dx)).copy_from(&b.sx);
        full.view_mut((dx, dx), (dy, dy)).copy_from(&b.sy);
        full.view_mut((0, dx), (dx, dy)).copy_from(&b.sxy);
        full.view_mut((dx, 0), (dy, dx)).copy_from(&b.sxy.transpose());
        full
    }

    /// Checks shapes, symmetry, positive definiteness of the marginals and
    /// positive semidefiniteness of the joint covariance.
    pub fn validate(&self) -> Result<()> {
        let b = self.blocks()?;
        if !is_symmetric(&b.sx) || !is_symmetric(&b.sy) {
            return Err(SmiError::InvalidSpec("marginal covariances must be symmetric".into()));
        }
        inv_sqrt(&b.sx, "sigma_x")?;
        inv_sqrt(&b.sy, "sigma_y")?;
        let full = Self::joint_covariance(&b);
        let tol = 1e-9 * full.amax().max(1.0);
        let min_eig = SymmetricEigen::new(full).eigenvalues.min();
        if min_eig < -tol {
            return Err(SmiError::InvalidSpec(format!(
                "joint covariance is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }

    /// Draws `n` paired samples using the symmetric square root of the joint
    /// covariance (which tolerates singular joints such as overlapping blocks).
    pub fn sample(&self, n: usize, rng: &mut SeededRng) -> Result<(SampleMatrix, SampleMatrix)> {
        let b = self.blocks()?;
        let (dx, dy) = (self.dim_x(), self.dim_y());
        let eig = SymmetricEigen::new(Self::joint_covariance(&b));
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
            * eig.eigenvectors.transpose();
        let mut xs = Vec::with_capacity(n * dx);
        let mut ys = Vec::with_capacity(n * dy);
        let mut z = vec![0.0; dx + dy];
        for _ in 0..n {
            z.iter_mut().for_each(|v| *v = rng.standard_normal());
            for i in 0..dx + dy {
                let v: f64 = root.row(i).iter().zip(&z).map(|(a, b)| a * b).sum();
                if i < dx {
                    xs.push(self.mean_x[i] + v);
                } else {
                    ys.push(self.mean_y[i - dx] + v);
                }
            }
        }
        Ok((SampleMatrix::new(n, dx, xs)?, SampleMatrix::new(n, dy, ys)?))
    }
}

/// Precomputed blocks for evaluating many slices of one spec.
#[derive(Debug, Clone)]
pub struct SliceEvaluator {
    blocks: Blocks,
}

impl SliceEvaluator {
    pub fn new(spec: &GaussianSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { blocks: spec.blocks()? })
    }

    fn check_dims(&self, theta: &UnitDirection, phi: &UnitDirection) -> Result<()> {
        if theta.dim() != self.blocks.sx.nrows() {
            return Err(SmiError::DimensionMismatch { expected: self.blocks.sx.nrows(), got: theta.dim() });
        }
        if phi.dim() != self.blocks.sy.nrows() {
            return Err(SmiError::DimensionMismatch { expected: self.blocks.sy.nrows(), got: phi.dim() });
        }
        Ok(())
    }

    pub fn correlation(&self, theta: &UnitDirection, phi: &UnitDirection) -> Result<f64> {
        self.check_dims(theta, phi)?;
        let t = DVector::from_column_slice(theta.coords());
        let p = DVector::from_column_slice(phi.coords());
        let vx = t.dot(&(&self.blocks.sx * &t));
        let vy = p.dot(&(&self.blocks.sy * &p));
        let cov = t.dot(&(&self.blocks.sxy * &p));
        Ok((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
    }

    pub fn mutual_information(&self, theta: &UnitDirection, phi: &UnitDirection) -> Result<f64> {
        mi_from_correlation(self.correlation(theta, phi)?)
    }
}

/// `-½ log(1 - ρ²)`, refusing `|ρ| >= 1 - 1e-12`.
pub fn mi_from_correlation(rho: f64) -> Result<f64> {
    if rho.abs() >= NEAR_SINGULAR {
        return Err(SmiError::NearSingular { rho });
    }
    Ok(-0.5 * (-rho * rho).ln_1p())
}

/// Correlation coefficient of `θᵀX` and `φᵀY`.
pub fn slice_correlation(spec: &GaussianSpec, theta: &UnitDirection, phi: &UnitDirection) -> Result<f64> {
    SliceEvaluator::new(spec)?.correlation(theta, phi)
}

/// Mutual information of the slice pair `(θᵀX, φᵀY)` in nats.
pub fn slice_mi(spec: &GaussianSpec, theta: &UnitDirection, phi: &UnitDirection) -> Result<f64> {
    SliceEvaluator::new(spec)?.mutual_information(theta, phi)
}

/// Monte-Carlo average of [`slice_mi`] over `m` uniform direction pairs.
///
/// Directions are drawn in the same order as [`crate::smi::estimate_smi`]
/// draws them for the same seed.
pub fn gaussian_smi_mc(spec: &GaussianSpec, m: usize, seed: u64) -> Result<SmiEstimate> {
    if m == 0 {
        return Err(SmiError::InvalidConfig("slice count m must be at least 1".into()));
    }
    let eval = SliceEvaluator::new(spec)?;
    let mut rng = SeededRng::new(seed);
    let mut pairs = Vec::with_capacity(m);
    for _ in 0..m {
        let t = sample_unit_sphere(spec.dim_x(), &mut rng)?;
        let p = sample_unit_sphere(spec.dim_y(), &mut rng)?;
        pairs.push((t, p));
    }
    let per_slice = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (t, p))| eval.mutual_information(t, p).map_err(|e| e.at_slice(i)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SmiEstimate::from_slices(per_slice))
}

/// Largest canonical correlation: the top singular value of
/// `Σ_X^{-1/2} Σ_XY Σ_Y^{-1/2}`, clamped to `[0, 1]`.
pub fn cca_coefficient(spec: &GaussianSpec) -> Result<f64> {
    spec.validate()?;
    let b = spec.blocks()?;
    let whitened = inv_sqrt(&b.sx, "sigma_x")? * &b.sxy * inv_sqrt(&b.sy, "sigma_y")?;
    let top = whitened.singular_values().max();
    Ok(top.clamp(0.0, 1.0))
}

/// `-½ log(1 - ρ_CCA²)`, an upper bound on the Gaussian SMI.
pub fn gaussian_smi_upper_bound(spec: &GaussianSpec) -> Result<f64> {
    mi_from_correlation(cca_coefficient(spec)?)
}
