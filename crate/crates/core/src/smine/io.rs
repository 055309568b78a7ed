//! Plain-text tensor format.
//!
//! ```text
//! # comment lines start with '#'
//! <name> <rows> <cols>
//! <row 0: cols whitespace-separated values>
//! ...
//! ```
//!
//! Values are written with Rust's shortest round-trip formatting, so reading
//! back is exact.

use std::fmt::Write as _;

use super::model::DvModel;
use super::{FeatureMaps, Linear};
use crate::error::{Result, SmiError};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    fn new(name: &str, rows: usize, cols: usize, data: &[f64]) -> Self {
        Self { name: name.to_string(), rows, cols, data: data.to_vec() }
    }
}

pub fn write_tensors(header: &str, tensors: &[Tensor]) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    for t in tensors {
        let _ = writeln!(out, "{} {} {}", t.name, t.rows, t.cols);
        for r in 0..t.rows {
            let row: Vec<String> = t.data[r * t.cols..(r + 1) * t.cols].iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

pub fn read_tensors(text: &str) -> Result<Vec<Tensor>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let mut tensors = Vec::new();
    while let Some((ln, header)) = lines.next() {
        let parse_err = |line: usize, message: String| SmiError::Parse { line: line + 1, message };
        let parts: Vec<&str> = header.split_whitespace().collect();
        let [name, rows, cols] = parts[..] else {
            return Err(parse_err(ln, format!("expected '<name> <rows> <cols>', got '{header}'")));
        };
        let dim = |s: &str| s.parse::<usize>().map_err(|e| parse_err(ln, format!("bad shape '{s}': {e}")));
        let (rows, cols) = (dim(rows)?, dim(cols)?);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (rl, row) = lines.next().ok_or_else(|| parse_err(ln, format!("tensor '{name}' is truncated")))?;
            let before = data.len();
            for tok in row.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|e| parse_err(rl, format!("bad value '{tok}': {e}")))?);
            }
            if data.len() - before != cols {
                return Err(parse_err(rl, format!("expected {cols} values, got {}", data.len() - before)));
            }
        }
        tensors.push(Tensor { name: name.to_string(), rows, cols, data });
    }
    Ok(tensors)
}

fn take<'a>(tensors: &'a [Tensor], name: &str) -> Result<&'a Tensor> {
    tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| SmiError::Parse { line: 0, message: format!("missing tensor '{name}'") })
}

impl DvModel {
    pub fn to_text(&self) -> String {
        write_tensors(
            "potential network g(z) = w2 . tanh(W1 z + b1) + b2",
            &[
                Tensor::new("weights_1", self.hidden, self.input_dim, &self.weights_1),
                Tensor::new("bias_1", 1, self.hidden, &self.bias_1),
                Tensor::new("weights_2", 1, self.hidden, &self.weights_2),
                Tensor::new("bias_2", 1, 1, &[self.bias_2]),
            ],
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let t = read_tensors(text)?;
        let w1 = take(&t, "weights_1")?;
        let (hidden, input_dim) = (w1.rows, w1.cols);
        let vec_of = |name: &str, len: usize| -> Result<Vec<f64>> {
            let v = take(&t, name)?;
            if v.data.len() != len {
                return Err(SmiError::DimensionMismatch { expected: len, got: v.data.len() });
            }
            Ok(v.data.clone())
        };
        let model = Self {
            input_dim,
            hidden,
            weights_1: w1.data.clone(),
            bias_1: vec_of("bias_1", hidden)?,
            weights_2: vec_of("weights_2", hidden)?,
            bias_2: vec_of("bias_2", 1)?[0],
        };
        if !model.is_finite() {
            return Err(SmiError::Numerical("model parameters must be finite".into()));
        }
        Ok(model)
    }
}

impl FeatureMaps {
    pub fn to_text(&self) -> String {
        write_tensors(
            "linear feature maps; a_y with zero rows means Y is used as is",
            &[
                Tensor::new("a_x", self.a_x.rows, self.a_x.cols, &self.a_x.data),
                Tensor::new("a_y", self.a_y.rows, self.a_y.cols, &self.a_y.data),
            ],
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let t = read_tensors(text)?;
        let lin = |name: &str| -> Result<Linear> {
            let v = take(&t, name)?;
            Linear::new(v.rows, v.cols, v.data.clone())
        };
        Ok(Self { a_x: lin("a_x")?, a_y: lin("a_y")? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SeededRng;

    #[test]
    fn model_round_trip_is_exact() {
        let mut rng = SeededRng::new(8);
        let mut m = DvModel::init(5, 7, &mut rng).unwrap();
        m.bias_2 = -1.0 / 3.0;
        m.bias_1[2] = 1e-300;
        assert_eq!(DvModel::from_text(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn maps_round_trip_with_empty_a_y() {
        let mut rng = SeededRng::new(9);
        let maps = FeatureMaps { a_x: Linear::gaussian(3, 4, &mut rng), a_y: Linear::gaussian(0, 1, &mut rng) };
        assert_eq!(FeatureMaps::from_text(&maps.to_text()).unwrap(), maps);
    }

    #[test]
    fn malformed_input_reports_line() {
        let err = read_tensors("w 2 2\n1 2\n3 x\n").unwrap_err();
        assert!(matches!(err, SmiError::Parse { line: 3, .. }), "{err}");
        assert!(matches!(read_tensors("w 2 2\n1 2\n"), Err(SmiError::Parse { line: 1, .. })));
        assert!(matches!(read_tensors("w 1 2\n1 2 3\n"), Err(SmiError::Parse { line: 2, .. })));
    }
}
