//! Versioned plain-text parameter files.
//!
//! ```text
//! gridcascade-qnetwork 1
//! input vector 9            (or: input image <channels> <side>)
//! head scalar               (or: head per_action)
//! layers 3
//! dense 9 10
//! activation tanh
//! dense 10 1
//! params 0 90 10
//! <90 weights>
//! <10 biases>
//! ...
//! ```
//! Values use the shortest representation that parses back exactly.

use std::fmt::Write;

use super::{Activation, Head, LayerSpec, NeuralError, QNetwork, Shape};
use crate::scalar::Scalar;

const MAGIC: &str = "gridcascade-qnetwork";
const VERSION: u32 = 1;

fn join<T: Scalar>(v: &[T]) -> String {
    let mut s = String::with_capacity(v.len() * 8);
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{x}").unwrap();
    }
    s
}

pub fn write_network<T: Scalar>(net: &QNetwork<T>) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC} {VERSION}").unwrap();
    match net.input_shape() {
        Shape::Vector { len } => writeln!(out, "input vector {len}").unwrap(),
        Shape::Image { channels, side } => writeln!(out, "input image {channels} {side}").unwrap(),
    }
    let head = match net.head() {
        Head::Scalar => "scalar",
        Head::PerAction => "per_action",
    };
    writeln!(out, "head {head}").unwrap();
    writeln!(out, "layers {}", net.layers().len()).unwrap();
    for l in net.layers() {
        match *l {
            LayerSpec::Dense { inputs, outputs } => writeln!(out, "dense {inputs} {outputs}"),
            LayerSpec::Linear { inputs, outputs } => writeln!(out, "linear {inputs} {outputs}"),
            LayerSpec::Conv2d {
                filters,
                kernel,
                stride,
            } => {
                writeln!(out, "conv2d {filters} {kernel} {stride}")
            }
            LayerSpec::Activation {
                function: Activation::Relu,
            } => writeln!(out, "activation relu"),
            LayerSpec::Activation {
                function: Activation::Tanh,
            } => writeln!(out, "activation tanh"),
            LayerSpec::Flatten => writeln!(out, "flatten"),
        }
        .unwrap();
    }
    for i in 0..net.layers().len() {
        let (w, b) = (net.weights(i), net.biases(i));
        if w.is_empty() && b.is_empty() {
            continue;
        }
        writeln!(out, "params {i} {} {}", w.len(), b.len()).unwrap();
        writeln!(out, "{}", join(w)).unwrap();
        writeln!(out, "{}", join(b)).unwrap();
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, NeuralError> {
        let (i, l) = self.inner.next().ok_or(NeuralError::Format {
            line: self.line + 1,
            message: "unexpected end of file".into(),
        })?;
        self.line = i + 1;
        Ok(l)
    }

    fn err(&self, message: impl Into<String>) -> NeuralError {
        NeuralError::Format {
            line: self.line,
            message: message.into(),
        }
    }
}

fn words<'a>(lines: &mut Lines<'a>, key: &str) -> Result<Vec<&'a str>, NeuralError> {
    let l = lines.next()?;
    let mut w = l.split_whitespace();
    if w.next() != Some(key) {
        return Err(lines.err(format!("expected `{key}`")));
    }
    Ok(w.collect())
}

fn num<V: std::str::FromStr>(lines: &Lines<'_>, s: Option<&&str>) -> Result<V, NeuralError> {
    s.and_then(|s| s.parse().ok())
        .ok_or_else(|| lines.err("expected a number"))
}

pub fn parse_network<T: Scalar>(text: &str) -> Result<QNetwork<T>, NeuralError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let magic = words(&mut lines, MAGIC)?;
    if magic.first().and_then(|v| v.parse::<u32>().ok()) != Some(VERSION) {
        return Err(lines.err(format!("unsupported format version {:?}", magic.first())));
    }
    let input = words(&mut lines, "input")?;
    let input = match input.first().copied() {
        Some("vector") => Shape::Vector {
            len: num(&lines, input.get(1))?,
        },
        Some("image") => Shape::Image {
            channels: num(&lines, input.get(1))?,
            side: num(&lines, input.get(2))?,
        },
        _ => return Err(lines.err("input must be `vector` or `image`")),
    };
    let head = match words(&mut lines, "head")?.first().copied() {
        Some("scalar") => Head::Scalar,
        Some("per_action") => Head::PerAction,
        _ => return Err(lines.err("head must be `scalar` or `per_action`")),
    };
    let count = words(&mut lines, "layers")?;
    let count: usize = num(&lines, count.first())?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let l = lines.next()?;
        let w: Vec<&str> = l.split_whitespace().collect();
        let layer = match w.first().copied() {
            Some("dense") => LayerSpec::Dense {
                inputs: num(&lines, w.get(1))?,
                outputs: num(&lines, w.get(2))?,
            },
            Some("linear") => LayerSpec::Linear {
                inputs: num(&lines, w.get(1))?,
                outputs: num(&lines, w.get(2))?,
            },
            Some("conv2d") => LayerSpec::Conv2d {
                filters: num(&lines, w.get(1))?,
                kernel: num(&lines, w.get(2))?,
                stride: num(&lines, w.get(3))?,
            },
            Some("activation") => LayerSpec::Activation {
                function: match w.get(1).copied() {
                    Some("relu") => Activation::Relu,
                    Some("tanh") => Activation::Tanh,
                    _ => return Err(lines.err("unknown activation")),
                },
            },
            Some("flatten") => LayerSpec::Flatten,
            _ => return Err(lines.err(format!("unknown layer `{l}`"))),
        };
        layers.push(layer);
    }
    let mut net = QNetwork::<T>::new(input, layers, head)?;
    let parse_vals = |lines: &mut Lines<'_>, n: usize| -> Result<Vec<T>, NeuralError> {
        let l = lines.next()?;
        let vals: Vec<T> = l
            .split_whitespace()
            .map(|s| {
                s.parse::<T>()
                    .map_err(|_| lines.err(format!("bad value `{s}`")))
            })
            .collect::<Result<_, _>>()?;
        if vals.len() != n {
            return Err(lines.err(format!("expected {n} values, found {}", vals.len())));
        }
        Ok(vals)
    };
    let with_params: Vec<usize> = (0..net.layers().len())
        .filter(|&i| !(net.weights(i).is_empty() && net.biases(i).is_empty()))
        .collect();
    for i in with_params {
        let hdr = words(&mut lines, "params")?;
        let idx: usize = num(&lines, hdr.first())?;
        let nw: usize = num(&lines, hdr.get(1))?;
        let nb: usize = num(&lines, hdr.get(2))?;
        if idx != i || nw != net.weights(i).len() || nb != net.biases(i).len() {
            return Err(lines.err(format!("parameter block does not match layer {i}")));
        }
        let w = parse_vals(&mut lines, nw)?;
        let b = parse_vals(&mut lines, nb)?;
        net.weights_mut(i).copy_from_slice(&w);
        net.biases_mut(i).copy_from_slice(&b);
    }
    Ok(net)
}
