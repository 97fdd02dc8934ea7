#![allow(dead_code)]

use robustkit::ImageBuffer;

pub use robustkit::fixtures::*;

pub fn mean_abs_diff(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| f64::from((x - y).abs())).sum::<f64>()
        / a.as_slice().len() as f64
}
