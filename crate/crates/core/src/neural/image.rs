use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A feature vector laid out row-major on the smallest square that holds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageState<T> {
    pub side: usize,
    pub pixels: Vec<T>,
}

pub fn to_image<T: Scalar>(v: &[T]) -> ImageState<T> {
    let mut side = (v.len() as f64).sqrt().floor() as usize;
    while side * side < v.len() {
        side += 1;
    }
    while side > 0 && (side - 1) * (side - 1) >= v.len() {
        side -= 1;
    }
    let mut pixels = v.to_vec();
    pixels.resize(side * side, T::zero());
    ImageState { side, pixels }
}
