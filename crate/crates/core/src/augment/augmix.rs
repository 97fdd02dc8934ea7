use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::corruptions::CorruptionKind;
use crate::error::{Error, Result};
use crate::filter::{remap, Border};
use crate::image::{quantize_u8, ImageBuffer};
use crate::rng::{rng_from_key, KeyedRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmixConfig {
    /// Magnitude cap; levels are drawn from `[0.1, min(severity, 10)]`.
    pub severity: u32,
    /// Number of chains.
    pub width: usize,
    /// Ops per chain; 0 draws uniformly from 1..=3 per chain.
    pub depth: usize,
    pub dirichlet_alpha: f64,
    pub beta_alpha: f64,
}

impl Default for AugmixConfig {
    fn default() -> Self {
        Self { severity: 3, width: 3, depth: 0, dirichlet_alpha: 1.0, beta_alpha: 1.0 }
    }
}

impl AugmixConfig {
    pub fn validate(&self) -> Result<()> {
        if self.severity < 1 {
            return Err(Error::invalid("augmix severity must be at least 1"));
        }
        if self.width < 1 {
            return Err(Error::invalid("augmix width must be at least 1"));
        }
        if self.dirichlet_alpha.is_nan()
            || self.dirichlet_alpha <= 0.0
            || self.beta_alpha.is_nan()
            || self.beta_alpha <= 0.0
        {
            return Err(Error::invalid("augmix dirichlet_alpha and beta_alpha must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmixOp {
    Autocontrast,
    Equalize,
    Posterize,
    Rotate,
    Solarize,
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
}

impl AugmixOp {
    pub const ALL: [AugmixOp; 9] = [
        AugmixOp::Autocontrast,
        AugmixOp::Equalize,
        AugmixOp::Posterize,
        AugmixOp::Rotate,
        AugmixOp::Solarize,
        AugmixOp::ShearX,
        AugmixOp::ShearY,
        AugmixOp::TranslateX,
        AugmixOp::TranslateY,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            AugmixOp::Autocontrast => "autocontrast",
            AugmixOp::Equalize => "equalize",
            AugmixOp::Posterize => "posterize",
            AugmixOp::Rotate => "rotate",
            AugmixOp::Solarize => "solarize",
            AugmixOp::ShearX => "shear_x",
            AugmixOp::ShearY => "shear_y",
            AugmixOp::TranslateX => "translate_x",
            AugmixOp::TranslateY => "translate_y",
        }
    }
}

const fn str_eq(a: &str, b: &str) -> bool {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    if a.len() != b.len() {
        return false;
    }
    let mut i = 0;
    while i < a.len() {
        if a[i] != b[i] {
            return false;
        }
        i += 1;
    }
    true
}

const fn disjoint_from_corruptions() -> bool {
    let mut i = 0;
    while i < AugmixOp::ALL.len() {
        let mut j = 0;
        while j < CorruptionKind::ALL.len() {
            if str_eq(AugmixOp::ALL[i].name(), CorruptionKind::ALL[j].name()) {
                return false;
            }
            j += 1;
        }
        i += 1;
    }
    true
}

const _: () = assert!(disjoint_from_corruptions(), "augmix ops overlap the test corruptions");

fn int_parameter(level: f64, max: f64) -> f64 {
    (level * max / 10.0).floor()
}

fn float_parameter(level: f64, max: f64) -> f64 {
    level * max / 10.0
}

fn random_sign(v: f64, rng: &mut KeyedRng) -> f64 {
    if rng.random::<f64>() < 0.5 {
        -v
    } else {
        v
    }
}

/// Applies `f` to the 8-bit code values of each channel plane.
fn map_codes(img: &ImageBuffer, f: impl Fn(&[u8]) -> Vec<u8>) -> ImageBuffer {
    let planes: Vec<Vec<f32>> = img
        .planes()
        .iter()
        .map(|p| {
            let codes: Vec<u8> = p.iter().map(|&v| quantize_u8(v)).collect();
            f(&codes).into_iter().map(|c| f32::from(c) / 255.0).collect()
        })
        .collect();
    ImageBuffer::from_planes(img.width(), img.height(), &planes)
}

fn autocontrast(img: &ImageBuffer) -> ImageBuffer {
    map_codes(img, |codes| {
        let lo = codes.iter().copied().min().unwrap_or(0);
        let hi = codes.iter().copied().max().unwrap_or(255);
        if hi <= lo {
            return codes.to_vec();
        }
        let span = u32::from(hi - lo);
        codes.iter().map(|&c| ((2 * 255 * u32::from(c - lo) + span) / (2 * span)) as u8).collect()
    })
}

/// Histogram equalization; the last nonempty bin does not count towards the
/// step size.
fn equalize(img: &ImageBuffer) -> ImageBuffer {
    map_codes(img, |codes| {
        let mut hist = [0usize; 256];
        codes.iter().for_each(|&c| hist[c as usize] += 1);
        let last = hist.iter().rposition(|&n| n > 0).map_or(0, |i| hist[i]);
        let step = (codes.len() - last) / 255;
        if step == 0 {
            return codes.to_vec();
        }
        let mut lut = [0u8; 256];
        let mut n = step / 2;
        for (i, slot) in lut.iter_mut().enumerate() {
            *slot = (n / step).min(255) as u8;
            n += hist[i];
        }
        codes.iter().map(|&c| lut[c as usize]).collect()
    })
}

fn posterize(img: &ImageBuffer, bits: u32) -> ImageBuffer {
    let mask = !((1u32 << (8 - bits)) - 1) as u8;
    map_codes(img, |codes| codes.iter().map(|&c| c & mask).collect())
}

fn solarize(img: &ImageBuffer, threshold: u32) -> ImageBuffer {
    map_codes(img, |codes| codes.iter().map(|&c| if u32::from(c) >= threshold { 255 - c } else { c }).collect())
}

/// Resamples through `src = A * dst + t` in pixel-centre coordinates with a
/// black fill outside the image.
fn affine(img: &ImageBuffer, a: [f64; 4], t: [f64; 2]) -> ImageBuffer {
    remap(img, img.width(), img.height(), Border::Constant(0.0), |x, y| {
        let (x, y) = (x as f64, y as f64);
        (a[0] * x + a[1] * y + t[0], a[2] * x + a[3] * y + t[1])
    })
}

fn rotate(img: &ImageBuffer, degrees: f64) -> ImageBuffer {
    let (cx, cy) = ((f64::from(img.width()) - 1.0) / 2.0, (f64::from(img.height()) - 1.0) / 2.0);
    let (s, c) = degrees.to_radians().sin_cos();
    // Counter-clockwise rotation of the content; the map goes output -> input.
    let a = [c, -s, s, c];
    affine(img, a, [cx - a[0] * cx - a[1] * cy, cy - a[2] * cx - a[3] * cy])
}

pub(crate) fn apply_op(img: &ImageBuffer, op: AugmixOp, level: f64, rng: &mut KeyedRng) -> ImageBuffer {
    let (w, h) = (f64::from(img.width()), f64::from(img.height()));
    match op {
        AugmixOp::Autocontrast => autocontrast(img),
        AugmixOp::Equalize => equalize(img),
        AugmixOp::Posterize => posterize(img, 4 - int_parameter(level, 4.0).min(4.0) as u32),
        AugmixOp::Solarize => solarize(img, 256 - int_parameter(level, 256.0).min(256.0) as u32),
        AugmixOp::Rotate => {
            let degrees = random_sign(int_parameter(level, 30.0), rng);
            rotate(img, degrees)
        }
        AugmixOp::ShearX => {
            let s = random_sign(float_parameter(level, 0.3), rng);
            affine(img, [1.0, s, 0.0, 1.0], [0.0, 0.0])
        }
        AugmixOp::ShearY => {
            let s = random_sign(float_parameter(level, 0.3), rng);
            affine(img, [1.0, 0.0, s, 1.0], [0.0, 0.0])
        }
        AugmixOp::TranslateX => {
            let t = random_sign(int_parameter(level, (w / 3.0).floor()), rng);
            affine(img, [1.0, 0.0, 0.0, 1.0], [t, 0.0])
        }
        AugmixOp::TranslateY => {
            let t = random_sign(int_parameter(level, (h / 3.0).floor()), rng);
            affine(img, [1.0, 0.0, 0.0, 1.0], [0.0, t])
        }
    }
}

/// Dirichlet(alpha, ..., alpha) sample of length `n` from normalized Gamma draws.
pub fn sample_dirichlet(alpha: f64, n: usize, rng: &mut KeyedRng) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::invalid(format!("Gamma({alpha}): {e}")))?;
    loop {
        let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return Ok(draws.into_iter().map(|d| d / total).collect());
        }
    }
}

fn augmix_rng(img: &ImageBuffer, cfg: &AugmixConfig, forced_m: Option<f64>, rng: &mut KeyedRng) -> Result<ImageBuffer> {
    cfg.validate()?;
    let weights = sample_dirichlet(cfg.dirichlet_alpha, cfg.width, rng)?;
    let beta = Beta::new(cfg.beta_alpha, cfg.beta_alpha).map_err(|e| Error::invalid(e.to_string()))?;
    let drawn_m = beta.sample(rng);
    let m = forced_m.unwrap_or(drawn_m);
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::invalid(format!("augmix blend weight {m} outside [0, 1]")));
    }
    let max_level = f64::from(cfg.severity.min(10));
    let mut mix = vec![0.0f64; img.as_slice().len()];
    for &w in &weights {
        let depth = if cfg.depth > 0 { cfg.depth } else { rng.random_range(1..=3) };
        let mut chain = img.clone();
        for _ in 0..depth {
            let op = AugmixOp::ALL[rng.random_range(0..AugmixOp::ALL.len())];
            let level = if max_level > 0.1 { rng.random_range(0.1..max_level) } else { 0.1 };
            chain = apply_op(&chain, op, level, rng);
        }
        mix.iter_mut().zip(chain.as_slice()).for_each(|(acc, &v)| *acc += w * f64::from(v));
    }
    let data =
        img.as_slice().iter().zip(&mix).map(|(&x, &mixed)| (m * f64::from(x) + (1.0 - m) * mixed) as f32).collect();
    Ok(ImageBuffer::from_unclamped(img.width(), img.height(), img.channels(), data))
}

/// `m * image + (1 - m) * sum_i w_i chain_i(image)` with `w ~ Dirichlet` and
/// `m ~ Beta`, clamped to `[0, 1]`.
pub fn augmix(img: &ImageBuffer, cfg: &AugmixConfig, seed: u64) -> Result<ImageBuffer> {
    augmix_rng(img, cfg, None, &mut rng_from_key(seed))
}

/// [`augmix`] with the blend weight `m` fixed; all other draws are unchanged.
pub fn augmix_with_m(img: &ImageBuffer, cfg: &AugmixConfig, m: f64, seed: u64) -> Result<ImageBuffer> {
    augmix_rng(img, cfg, Some(m), &mut rng_from_key(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient() -> ImageBuffer {
        let data = (0..16 * 16 * 3).map(|i| ((i / 3) % 256) as f32 / 255.0).collect();
        ImageBuffer::new(16, 16, 3, data).unwrap()
    }

    #[test]
    fn posterize_and_solarize_codes() {
        let img = ImageBuffer::from_u8(2, 1, 1, &[0b1011_0111, 200]).unwrap();
        assert_eq!(posterize(&img, 2).to_u8(), vec![0b1000_0000, 0b1100_0000]);
        assert_eq!(solarize(&img, 190).to_u8(), vec![0b1011_0111, 55]);
    }

    #[test]
    fn autocontrast_stretches_to_full_range() {
        let img = ImageBuffer::from_u8(3, 1, 1, &[50, 100, 150]).unwrap();
        assert_eq!(autocontrast(&img).to_u8(), vec![0, 128, 255]);
    }

    #[test]
    fn zero_rotation_and_translation_are_identity() {
        let img = gradient();
        let out = rotate(&img, 0.0);
        assert!(out.as_slice().iter().zip(img.as_slice()).all(|(a, b)| (a - b).abs() < 1e-6));
        assert_eq!(affine(&img, [1.0, 0.0, 0.0, 1.0], [0.0, 0.0]), img);
    }

    #[test]
    fn dirichlet_weights_are_a_distribution() {
        let mut rng = rng_from_key(3);
        for alpha in [0.1, 1.0, 5.0] {
            let w = sample_dirichlet(alpha, 3, &mut rng).unwrap();
            assert!(w.iter().all(|&x| x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn output_in_range_and_deterministic() {
        let cfg = AugmixConfig { severity: 10, ..Default::default() };
        let a = augmix(&gradient(), &cfg, 9).unwrap();
        assert_eq!(a, augmix(&gradient(), &cfg, 9).unwrap());
        assert!(a.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
