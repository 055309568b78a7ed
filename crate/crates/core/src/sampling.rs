//! Deterministic random streams, uniform directions on the sphere, and
//! projection of sample matrices onto those directions.
//!
//! Every random quantity in the crate flows from a [`SeededRng`]. The
//! generator is ChaCha8 keyed by the 64-bit seed (expanded with
//! `rand_core`'s `seed_from_u64`), and sub-streams select a ChaCha stream id,
//! so a `(seed, stream)` pair names the same sequence on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmiError};

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Not meant to be shared between threads: parallel consumers take a
/// [`SeededRng::substream`] each, so results never depend on scheduling.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    /// Seeds from OS entropy. Only for callers that did not supply a seed.
    pub fn from_os_entropy() -> Self {
        Self::new(rand::rng().next_u64())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent child stream. Depends only on this stream's identity and
    /// `index`, never on how many values have been drawn from `self`.
    pub fn substream(&self, index: u64) -> SeededRng {
        SeededRng::with_stream(self.seed, splitmix64(self.stream ^ splitmix64(index)))
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A point on the unit sphere `S^{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitDirection {
    coords: Vec<f64>,
}

impl UnitDirection {
    /// Normalizes `coords`; fails on an empty or zero vector.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(SmiError::InvalidDimension("direction must have d >= 1".into()));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(SmiError::Numerical("cannot normalize a zero or non-finite vector".into()));
        }
        if coords.len() == 1 {
            return Ok(Self { coords: vec![coords[0].signum()] });
        }
        Ok(Self { coords: coords.into_iter().map(|c| c / norm).collect() })
    }

    /// The `i`-th standard basis vector of `R^d`.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(SmiError::InvalidDimension(format!("basis index {i} out of range for d = {d}")));
        }
        let mut coords = vec![0.0; d];
        coords[i] = 1.0;
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn negated(&self) -> Self {
        Self { coords: self.coords.iter().map(|c| -c).collect() }
    }
}

/// Draws a uniformly distributed direction on `S^{d-1}`.
///
/// For `d >= 2` this normalizes an isotropic Gaussian draw. For `d = 1` the
/// sphere is `{-1, +1}` and a fair sign is drawn instead.
pub fn sample_unit_sphere(d: usize, rng: &mut SeededRng) -> Result<UnitDirection> {
    match d {
        0 => Err(SmiError::InvalidDimension("sphere dimension must be >= 1".into())),
        1 => {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            Ok(UnitDirection { coords: vec![sign] })
        }
        _ => loop {
            let g: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
            let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-300 {
                return Ok(UnitDirection { coords: g.into_iter().map(|c| c / norm).collect() });
            }
        },
    }
}

/// `n` samples of dimension `d`, one sample per row, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(SmiError::InvalidDimension(format!(
                "sample matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(SmiError::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(SmiError::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(SmiError::DimensionMismatch { expected: cols, got: bad.len() });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// A single-column matrix.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }

    /// Keeps the columns in `cols`, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(SmiError::InvalidDimension(format!("column {bad} out of range for {} columns", self.cols)));
        }
        let data = self.iter_rows().flat_map(|r| cols.iter().map(move |&c| r[c])).collect();
        Self::new(self.rows, cols.len(), data)
    }

    /// Rows reordered so that row `i` of the result is row `perm[i]` of self.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        debug_assert_eq!(perm.len(), self.rows);
        let data = perm.iter().flat_map(|&p| self.row(p).iter().copied()).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Side-by-side concatenation `[self | other]`.
    pub fn hstack(&self, other: &SampleMatrix) -> Result<Self> {
        if self.rows != other.rows {
            return Err(SmiError::DimensionMismatch { expected: self.rows, got: other.rows });
        }
        let data = self
            .iter_rows()
            .zip(other.iter_rows())
            .flat_map(|(a, b)| a.iter().chain(b).copied())
            .collect();
        Self::new(self.rows, self.cols + other.cols, data)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn vstack(&self, other: &SampleMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(SmiError::DimensionMismatch { expected: self.cols, got: other.cols });
        }
        let data = self.data.iter().chain(&other.data).copied().collect();
        Ok(Self { rows: self.rows + other.rows, cols: self.cols, data })
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Each row `r` replaced by `A r` for a `out x cols` row-major matrix `A`.
    pub fn linear_map(&self, a: &[f64], out: usize) -> Result<Self> {
        if a.len() != out * self.cols {
            return Err(SmiError::DimensionMismatch { expected: out * self.cols, got: a.len() });
        }
        let mut data = Vec::with_capacity(self.rows * out);
        for r in self.iter_rows() {
            for arow in a.chunks_exact(self.cols) {
                data.push(dot(arow, r));
            }
        }
        Self::new(self.rows, out, data)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projects every row onto `direction`: entry `i` is `<row_i, direction>`.
pub fn project(samples: &SampleMatrix, direction: &UnitDirection) -> Result<Vec<f64>> {
    if samples.cols() != direction.dim() {
        return Err(SmiError::DimensionMismatch { expected: samples.cols(), got: direction.dim() });
    }
    let theta = direction.coords();
    Ok(samples.iter_rows().map(|r| dot(r, theta)).collect())
}
