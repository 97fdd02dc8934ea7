use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::rng::{rng_from_key, KeyedRng};

/// Class distribution of a mixed sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel {
    pub weights: Vec<f64>,
}

impl SoftLabel {
    pub fn one_hot(num_classes: usize, label: usize) -> Result<Self> {
        Self::mix(num_classes, label, label, 1.0)
    }

    /// `lambda * onehot(a) + (1 - lambda) * onehot(b)`.
    pub fn mix(num_classes: usize, a: usize, b: usize, lambda: f64) -> Result<Self> {
        for label in [a, b] {
            if label >= num_classes {
                return Err(Error::invalid(format!("label {label} outside {num_classes} classes")));
            }
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!("mixing weight {lambda} outside [0, 1]")));
        }
        let mut weights = vec![0.0; num_classes];
        weights[a] += lambda;
        weights[b] += 1.0 - lambda;
        Ok(Self { weights })
    }

    /// Nonzero `(class, weight)` pairs in class order.
    pub fn support(&self) -> Vec<(usize, f64)> {
        self.weights.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, &w)| (i, w)).collect()
    }

    /// `class:weight,class:weight` as in the sidecar file.
    pub fn to_sidecar(&self) -> String {
        self.support().iter().map(|(i, w)| format!("{i}:{w}")).collect::<Vec<_>>().join(",")
    }
}

fn check_pair(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.geometry() != b.geometry() {
        return Err(Error::GeometryMismatch { expected: a.geometry().to_string(), found: b.geometry().to_string() });
    }
    Ok(())
}

fn sample_beta(alpha: f64, rng: &mut KeyedRng) -> Result<f64> {
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::invalid(format!("Beta({alpha}, {alpha}): {e}")))?;
    Ok(beta.sample(rng))
}

/// Two labelled images sharing one geometry.
#[derive(Debug, Clone, Copy)]
pub struct MixPair<'a> {
    pub a: &'a ImageBuffer,
    pub label_a: usize,
    pub b: &'a ImageBuffer,
    pub label_b: usize,
    pub num_classes: usize,
}

/// Mixup with a given `lambda`; endpoints reproduce their input exactly.
pub fn mixup_with_lambda(pair: MixPair<'_>, lambda: f64) -> Result<(ImageBuffer, SoftLabel)> {
    check_pair(pair.a, pair.b)?;
    let label = SoftLabel::mix(pair.num_classes, pair.label_a, pair.label_b, lambda)?;
    let data = pair
        .a
        .as_slice()
        .iter()
        .zip(pair.b.as_slice())
        .map(|(&x, &y)| (lambda * f64::from(x) + (1.0 - lambda) * f64::from(y)) as f32)
        .collect();
    let g = pair.a.geometry();
    Ok((ImageBuffer::from_unclamped(g.width, g.height, g.channels, data), label))
}

pub fn mixup(pair: MixPair<'_>, alpha: f64, seed: u64) -> Result<(ImageBuffer, SoftLabel)> {
    let mut rng = rng_from_key(seed);
    mixup_rng(pair, alpha, &mut rng).map(|(img, label, _)| (img, label))
}

fn mixup_rng(pair: MixPair<'_>, alpha: f64, rng: &mut KeyedRng) -> Result<(ImageBuffer, SoftLabel, f64)> {
    check_pair(pair.a, pair.b)?;
    let lambda = sample_beta(alpha, rng)?;
    let (img, label) = mixup_with_lambda(pair, lambda)?;
    Ok((img, label, lambda))
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BoxRegion {
    pub fn area(&self) -> u64 {
        u64::from(self.x1.saturating_sub(self.x0)) * u64::from(self.y1.saturating_sub(self.y0))
    }

    /// Box of side `sqrt(1 - lambda)` times the image side centred at
    /// `(cx, cy)`, clipped to the image.
    pub fn centered(width: u32, height: u32, lambda: f64, cx: u32, cy: u32) -> Self {
        let cut = (1.0 - lambda).max(0.0).sqrt();
        let half_w = ((f64::from(width) * cut) as i64) / 2;
        let half_h = ((f64::from(height) * cut) as i64) / 2;
        let clip = |v: i64, hi: u32| v.clamp(0, i64::from(hi)) as u32;
        Self {
            x0: clip(i64::from(cx) - half_w, width),
            y0: clip(i64::from(cy) - half_h, height),
            x1: clip(i64::from(cx) + half_w, width),
            y1: clip(i64::from(cy) + half_h, height),
        }
    }
}

/// CutMix with a given box: pixels inside `region` come from `b`. The label
/// weight of `a` is the uncovered fraction of the image.
pub fn cutmix_with_box(pair: MixPair<'_>, region: BoxRegion) -> Result<(ImageBuffer, SoftLabel, f64)> {
    check_pair(pair.a, pair.b)?;
    let g = pair.a.geometry();
    let region = BoxRegion {
        x0: region.x0.min(g.width),
        y0: region.y0.min(g.height),
        x1: region.x1.min(g.width),
        y1: region.y1.min(g.height),
    };
    let c = g.channels as usize;
    let mut data = pair.a.as_slice().to_vec();
    let src = pair.b.as_slice();
    for y in region.y0..region.y1 {
        let start = (y as usize * g.width as usize + region.x0 as usize) * c;
        let end = (y as usize * g.width as usize + region.x1.max(region.x0) as usize) * c;
        data[start..end].copy_from_slice(&src[start..end]);
    }
    let lambda = 1.0 - region.area() as f64 / g.pixel_count() as f64;
    let label = SoftLabel::mix(pair.num_classes, pair.label_a, pair.label_b, lambda)?;
    Ok((ImageBuffer::from_unclamped(g.width, g.height, g.channels, data), label, lambda))
}

pub fn cutmix(pair: MixPair<'_>, alpha: f64, seed: u64) -> Result<(ImageBuffer, SoftLabel)> {
    let mut rng = rng_from_key(seed);
    cutmix_rng(pair, alpha, &mut rng).map(|(img, label, _)| (img, label))
}

fn cutmix_rng(pair: MixPair<'_>, alpha: f64, rng: &mut KeyedRng) -> Result<(ImageBuffer, SoftLabel, f64)> {
    check_pair(pair.a, pair.b)?;
    let lambda = sample_beta(alpha, rng)?;
    let (w, h) = (pair.a.width(), pair.a.height());
    let cx = rng.random_range(0..w);
    let cy = rng.random_range(0..h);
    cutmix_with_box(pair, BoxRegion::centered(w, h, lambda, cx, cy))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixBranch {
    Mixup,
    Cutmix,
}

/// Which branch [`cutmix_mixup_switch`] took and the effective label weight
/// of the first image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixAudit {
    pub branch: MixBranch,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchConfig {
    pub p_switch: f64,
    pub alpha_cutmix: f64,
    pub alpha_mixup: f64,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self { p_switch: 0.5, alpha_cutmix: 1.0, alpha_mixup: 0.8 }
    }
}

/// CutMix with probability `p_switch`, Mixup otherwise.
pub fn cutmix_mixup_switch(
    pair: MixPair<'_>,
    cfg: SwitchConfig,
    seed: u64,
) -> Result<(ImageBuffer, SoftLabel, MixAudit)> {
    if !(0.0..=1.0).contains(&cfg.p_switch) {
        return Err(Error::invalid(format!("switch probability {} outside [0, 1]", cfg.p_switch)));
    }
    let mut rng = rng_from_key(seed);
    let u: f64 = rng.random();
    let (branch, (img, label, lambda)) = if u < cfg.p_switch {
        (MixBranch::Cutmix, cutmix_rng(pair, cfg.alpha_cutmix, &mut rng)?)
    } else {
        (MixBranch::Mixup, mixup_rng(pair, cfg.alpha_mixup, &mut rng)?)
    };
    Ok((img, label, MixAudit { branch, lambda }))
}
