use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::image::ImageBuffer;
use crate::rng::KeyedRng;

pub(super) fn gaussian(img: &ImageBuffer, sigma: f64, rng: &mut KeyedRng) -> ImageBuffer {
    let data = img
        .as_slice()
        .iter()
        .map(|&v| {
            let g: f64 = StandardNormal.sample(rng);
            (f64::from(v) + sigma * g) as f32
        })
        .collect();
    ImageBuffer::from_unclamped(img.width(), img.height(), img.channels(), data)
}

/// Poisson photon noise: `Poisson(x * photons) / photons`.
pub(super) fn shot(img: &ImageBuffer, photons: f64, rng: &mut KeyedRng) -> ImageBuffer {
    let data = img
        .as_slice()
        .iter()
        .map(|&v| {
            let lambda = f64::from(v) * photons;
            if lambda <= 0.0 {
                return 0.0;
            }
            let count: f64 = Poisson::new(lambda).expect("positive rate").sample(rng);
            (count / photons) as f32
        })
        .collect();
    ImageBuffer::from_unclamped(img.width(), img.height(), img.channels(), data)
}

/// Salt-and-pepper noise on a fraction `amount` of samples, half salt, half pepper.
pub(super) fn impulse(img: &ImageBuffer, amount: f64, rng: &mut KeyedRng) -> ImageBuffer {
    let data = img
        .as_slice()
        .iter()
        .map(|&v| {
            let flip = rng.random::<f64>() < amount;
            let salt = rng.random::<f64>() < 0.5;
            match (flip, salt) {
                (false, _) => v,
                (true, true) => 1.0,
                (true, false) => 0.0,
            }
        })
        .collect();
    ImageBuffer::from_unclamped(img.width(), img.height(), img.channels(), data)
}
