//! Feed-forward network evaluated from a flat parameter vector.
//!
//! Hidden layers use ReLU, the output layer is linear. Parameters are packed
//! layer by layer: the weight matrix in row-major order (one row per output
//! unit), followed by the bias vector. Keeping the network as a flat slice
//! lets it live inside a filter state vector.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MlpError {
    #[error("invalid layer sizes {0:?}: need at least two positive entries")]
    InvalidSpec(Vec<usize>),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Layer widths `[d_in, h_1, …, d_out]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self, MlpError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(MlpError::InvalidSpec(layer_sizes));
        }
        Ok(Self { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// `(inputs, outputs)` for each affine layer.
    pub fn layer_shapes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layer_sizes.windows(2).map(|w| (w[0], w[1]))
    }

    /// Total number of weights and biases.
    pub fn param_count(&self) -> usize {
        self.layer_shapes().map(|(a, b)| a * b + b).sum()
    }
}

/// Parameter vector validated against a spec.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    theta: Vec<f64>,
}

impl MlpParams {
    pub fn new(spec: &MlpSpec, theta: Vec<f64>) -> Result<Self, MlpError> {
        check_len("parameter vector", spec.param_count(), theta.len())?;
        Ok(Self { theta })
    }

    pub fn zeros(spec: &MlpSpec) -> Self {
        Self {
            theta: vec![0.0; spec.param_count()],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }
}

/// One affine layer; `weights` has one row per output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), MlpError> {
    if expected != got {
        return Err(MlpError::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

pub fn pack(layers: &[Layer]) -> Vec<f64> {
    let mut theta = Vec::new();
    for layer in layers {
        for row in layer.weights.row_iter() {
            theta.extend(row.iter());
        }
        theta.extend(layer.bias.iter());
    }
    theta
}

pub fn unpack(spec: &MlpSpec, theta: &[f64]) -> Result<Vec<Layer>, MlpError> {
    check_len("parameter vector", spec.param_count(), theta.len())?;
    let mut offset = 0;
    let layers = spec
        .layer_shapes()
        .map(|(inputs, outputs)| {
            let w = &theta[offset..offset + inputs * outputs];
            offset += inputs * outputs;
            let b = &theta[offset..offset + outputs];
            offset += outputs;
            Layer {
                weights: DMatrix::from_row_slice(outputs, inputs, w),
                bias: DVector::from_column_slice(b),
            }
        })
        .collect();
    Ok(layers)
}

/// Evaluates the network at `x` with parameters `theta`.
pub fn forward(spec: &MlpSpec, theta: &[f64], x: &[f64]) -> Result<Vec<f64>, MlpError> {
    check_len("parameter vector", spec.param_count(), theta.len())?;
    check_len("network input", spec.input_dim(), x.len())?;
    Ok(forward_unchecked(spec, theta, x))
}

pub(crate) fn forward_unchecked(spec: &MlpSpec, theta: &[f64], x: &[f64]) -> Vec<f64> {
    let last = spec.layer_sizes.len() - 2;
    let mut input = x.to_vec();
    let mut offset = 0;
    for (layer, (inputs, outputs)) in spec.layer_shapes().enumerate() {
        let weights = &theta[offset..offset + inputs * outputs];
        let bias = &theta[offset + inputs * outputs..offset + inputs * outputs + outputs];
        offset += inputs * outputs + outputs;
        let out: Vec<f64> = weights
            .chunks_exact(inputs)
            .zip(bias)
            .map(|(row, b)| {
                let z = row.iter().zip(&input).map(|(w, v)| w * v).sum::<f64>() + b;
                if layer < last {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect();
        input = out;
    }
    input
}
