//! Plain-text tensor container.
//!
//! Each tensor is a header line `name d₁ … d_r` (rank 2, or rank 4 for
//! convolution kernels) followed by `d₁·…·d_{r−1}` lines of `d_r`
//! whitespace-separated values in row-major order. Values are written with 17
//! significant digits so reading them back is exact. UTF-8, LF line endings.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::gnn::{GnnModel, PerturbationDelta};
use crate::linalg::{DenseMatrix, EigBasis};
use crate::prune::ConvKernel;

#[derive(Debug, Error)]
pub enum TensorIoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing tensor `{0}`")]
    Missing(String),

    #[error("tensor `{name}`: expected shape {expected:?}, found {found:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid tensor name `{0}`")]
    BadName(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl NamedTensor {
    pub fn matrix(name: impl Into<String>, m: &DenseMatrix) -> Self {
        Self {
            name: name.into(),
            shape: vec![m.rows(), m.cols()],
            values: m.as_slice().to_vec(),
        }
    }

    pub fn row(name: impl Into<String>, v: &[f64]) -> Self {
        Self {
            name: name.into(),
            shape: vec![1, v.len()],
            values: v.to_vec(),
        }
    }

    pub fn kernel(name: impl Into<String>, k: &ConvKernel) -> Self {
        Self {
            name: name.into(),
            shape: vec![k.out_channels, k.in_channels, k.kernel_size, k.kernel_size],
            values: k.values.clone(),
        }
    }

    pub fn to_matrix(&self) -> Result<DenseMatrix, TensorIoError> {
        if self.shape.len() != 2 {
            return Err(TensorIoError::Shape {
                name: self.name.clone(),
                expected: vec![0, 0],
                found: self.shape.clone(),
            });
        }
        DenseMatrix::from_vec(self.shape[0], self.shape[1], self.values.clone()).map_err(|e| {
            TensorIoError::Parse {
                line: 0,
                msg: e.to_string(),
            }
        })
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(char::is_whitespace) && name.parse::<f64>().is_err()
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_tensors<W: Write>(mut w: W, tensors: &[NamedTensor]) -> Result<(), TensorIoError> {
    for t in tensors {
        if !valid_name(&t.name) {
            return Err(TensorIoError::BadName(t.name.clone()));
        }
        let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
        writeln!(w, "{} {}", t.name, dims.join(" "))?;
        let last = *t.shape.last().unwrap_or(&0);
        if last == 0 {
            continue;
        }
        for chunk in t.values.chunks(last) {
            let line: Vec<String> = chunk.iter().map(|&v| format_value(v)).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

pub fn read_tensors<R: BufRead>(r: R) -> Result<Vec<NamedTensor>, TensorIoError> {
    let mut out = Vec::new();
    let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((ln, header)) = lines.next() {
        let header = header?;
        if header.trim().is_empty() {
            continue;
        }
        let mut parts = header.split_whitespace();
        let name = parts.next().unwrap_or_default().to_string();
        if !valid_name(&name) {
            return Err(TensorIoError::Parse {
                line: ln,
                msg: format!("expected a tensor header, found `{header}`"),
            });
        }
        let shape: Vec<usize> = parts
            .map(|p| {
                p.parse().map_err(|_| TensorIoError::Parse {
                    line: ln,
                    msg: format!("bad dimension `{p}`"),
                })
            })
            .collect::<Result<_, _>>()?;
        if shape.len() != 2 && shape.len() != 4 {
            return Err(TensorIoError::Parse {
                line: ln,
                msg: format!("tensor `{name}` must have 2 or 4 dimensions, got {}", shape.len()),
            });
        }
        let last = shape[shape.len() - 1];
        let rows: usize = if last == 0 { 0 } else { shape[..shape.len() - 1].iter().product() };
        let mut values = Vec::with_capacity(rows * last);
        for _ in 0..rows {
            let (vl, line) = lines.next().ok_or_else(|| TensorIoError::Parse {
                line: ln,
                msg: format!("tensor `{name}` is truncated"),
            })?;
            let line = line?;
            let before = values.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| TensorIoError::Parse {
                    line: vl,
                    msg: format!("bad value `{tok}`"),
                })?;
                if !v.is_finite() {
                    return Err(TensorIoError::Parse {
                        line: vl,
                        msg: format!("non-finite value `{tok}`"),
                    });
                }
                values.push(v);
            }
            if values.len() - before != last {
                return Err(TensorIoError::Parse {
                    line: vl,
                    msg: format!("expected {last} values, found {}", values.len() - before),
                });
            }
        }
        out.push(NamedTensor { name, shape, values });
    }
    Ok(out)
}

fn take<'a>(tensors: &'a [NamedTensor], name: &str, shape: &[usize]) -> Result<&'a NamedTensor, TensorIoError> {
    let t = tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| TensorIoError::Missing(name.to_string()))?;
    if t.shape != shape {
        return Err(TensorIoError::Shape {
            name: name.to_string(),
            expected: shape.to_vec(),
            found: t.shape.clone(),
        });
    }
    Ok(t)
}

/// Layer tensors `layer{l}.w{i}`, `layer{l}.b`; with a perturbation also
/// `delta`, `basis.values` and `basis.vectors`.
pub fn model_tensors(model: &GnnModel) -> Vec<NamedTensor> {
    let mut out = Vec::new();
    for (l, layer) in model.layers.iter().enumerate() {
        for (i, w) in layer.weights.iter().enumerate() {
            out.push(NamedTensor::matrix(format!("layer{l}.w{i}"), w));
        }
        out.push(NamedTensor::row(format!("layer{l}.b"), &layer.bias));
    }
    if let Some(d) = &model.delta {
        out.push(NamedTensor::row("delta", &d.deltas));
        out.push(NamedTensor::row("basis.values", &d.basis.values));
        out.push(NamedTensor::matrix("basis.vectors", &d.basis.vectors));
    }
    out
}

/// Overwrites the parameters of a model built with the same architecture.
pub fn load_model_tensors(model: &mut GnnModel, tensors: &[NamedTensor]) -> Result<(), TensorIoError> {
    for (l, layer) in model.layers.iter_mut().enumerate() {
        for (i, w) in layer.weights.iter_mut().enumerate() {
            let t = take(tensors, &format!("layer{l}.w{i}"), &[w.rows(), w.cols()])?;
            w.as_mut_slice().copy_from_slice(&t.values);
        }
        let t = take(tensors, &format!("layer{l}.b"), &[1, layer.bias.len()])?;
        layer.bias.copy_from_slice(&t.values);
    }
    if let Some(d) = tensors.iter().find(|t| t.name == "delta") {
        let k = d.values.len();
        let vals = take(tensors, "basis.values", &[1, k])?;
        let vecs = tensors
            .iter()
            .find(|t| t.name == "basis.vectors")
            .ok_or_else(|| TensorIoError::Missing("basis.vectors".into()))?;
        let vectors = vecs.to_matrix()?;
        if vectors.cols() != k {
            return Err(TensorIoError::Shape {
                name: "basis.vectors".into(),
                expected: vec![vectors.rows(), k],
                found: vecs.shape.clone(),
            });
        }
        model.delta = Some(PerturbationDelta {
            basis: EigBasis {
                vectors,
                values: vals.values.clone(),
            },
            deltas: d.values.clone(),
        });
    } else {
        model.delta = None;
    }
    Ok(())
}

pub fn kernel_from_tensor(t: &NamedTensor, stride: usize, padding: usize) -> Result<ConvKernel, TensorIoError> {
    if t.shape.len() != 4 || t.shape[2] != t.shape[3] {
        return Err(TensorIoError::Shape {
            name: t.name.clone(),
            expected: vec![0, 0, 0, 0],
            found: t.shape.clone(),
        });
    }
    ConvKernel::new(t.shape[0], t.shape[1], t.shape[2], t.values.clone(), stride, padding).map_err(|e| {
        TensorIoError::Parse {
            line: 0,
            msg: e.to_string(),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_exact() {
        let m = DenseMatrix::from_rows(&[vec![0.1, -1.0 / 3.0], vec![1e-300, 12345.678901234567]]).unwrap();
        let k = ConvKernel::half_padded(2, 1, 1, vec![std::f64::consts::PI, -0.0]).unwrap();
        let tensors = vec![NamedTensor::matrix("w", &m), NamedTensor::kernel("conv1", &k), NamedTensor::row("empty", &[])];
        let mut buf = Vec::new();
        write_tensors(&mut buf, &tensors).unwrap();
        let back = read_tensors(buf.as_slice()).unwrap();
        assert_eq!(back, tensors);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "w 1 2\n1.0\n";
        match read_tensors(text.as_bytes()) {
            Err(TensorIoError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(write_tensors(Vec::new(), &[NamedTensor::row("1.5", &[1.0])]).is_err());
    }
}
