//! Small feedforward networks (dense, 2-D convolution, relu/tanh) with exact
//! backpropagation and plain SGD, used as Q-function approximators.

mod format;
mod image;
mod network;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{parse_network, write_network};
pub use image::{to_image, ImageState};
pub use network::{ForwardCache, Gradients, QNetwork};

/// Number of candidate actions a per-action head must produce.
pub const ACTION_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    /// Dense layer without a bias term.
    Linear {
        inputs: usize,
        outputs: usize,
    },
    /// Valid (unpadded) square convolution over a channels × side × side input.
    Conv2d {
        filters: usize,
        kernel: usize,
        stride: usize,
    },
    Activation {
        function: Activation,
    },
    Flatten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Vector { len: usize },
    Image { channels: usize, side: usize },
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Vector { len } => len,
            Shape::Image { channels, side } => channels * side * side,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// One output: Q(s, a) with the action encoded in the input.
    Scalar,
    /// One output per candidate action.
    PerAction,
}

impl Head {
    pub fn width(self) -> usize {
        match self {
            Head::Scalar => 1,
            Head::PerAction => ACTION_COUNT,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("layer {layer}: {message}")]
    Incompatible { layer: usize, message: String },
    #[error("network produces {got} outputs but a {head:?} head needs {expected}")]
    Head {
        head: Head,
        expected: usize,
        got: usize,
    },
    #[error("expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("cache was produced by a different network state")]
    StaleCache,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("learning rate must be finite and non-negative, got {0}")]
    LearningRate(String),
    #[error("network text, line {line}: {message}")]
    Format { line: usize, message: String },
}
