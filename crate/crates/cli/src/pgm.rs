//! Binary PGM (P5, maxval 255) emission for mask planes and heatmaps.

use spnet_core::tensor::Tensor;

fn header(width: usize, height: usize) -> Vec<u8> {
    format!("P5\n{width} {height}\n255\n").into_bytes()
}

/// 0 -> 0, anything nonzero -> 255.
pub fn binary_mask_pgm(width: usize, height: usize, mask: &Tensor) -> Vec<u8> {
    let mut out = header(width, height);
    for i in 0..mask.len() {
        out.push(if mask.at(i) != 0.0 { 255 } else { 0 });
    }
    out
}

/// Min-max normalized per plane; a constant plane renders as all zeros.
pub fn normalized_pgm(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    let mut out = header(width, height);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    for &v in values {
        let byte = if span > 0.0 {
            ((v - min) / span * 255.0).round() as u8
        } else {
            0
        };
        out.push(byte);
    }
    out
}
