//! World-image encoding: rendered RGB bytes to a `[H, W, 3]` float
//! tensor scaled into [0, 1].

use gridlu_env::{Image, IMAGE_HEIGHT, IMAGE_WIDTH};

use crate::tensor::{Scalar, Tensor};

/// Encodes a rendered image; byte value 255 maps to exactly 1.0.
pub fn encode_image<F: Scalar>(img: &Image) -> Tensor<F> {
    assert_eq!(img.data.len(), IMAGE_HEIGHT * IMAGE_WIDTH * 3);
    let data = img
        .data
        .iter()
        .map(|&b| F::from_f64(b as f64 / 255.0))
        .collect();
    Tensor::from_vec(&[IMAGE_HEIGHT, IMAGE_WIDTH, 3], data)
}
