//! Snow, frost and fog. All three expect 3-channel input.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::blur::{clipped_zoom_plane, motion_plane};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::rng::KeyedRng;

pub(super) struct SnowParams {
    pub loc: f64,
    pub scale: f64,
    pub zoom: f64,
    pub threshold: f64,
    pub blur_radius: f64,
    pub blur_sigma: f64,
    pub blend: f64,
}

pub(super) fn snow(img: &ImageBuffer, p: &SnowParams, rng: &mut KeyedRng) -> ImageBuffer {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let normal = Normal::new(p.loc, p.scale).expect("finite snow parameters");
    let layer: Vec<f32> = (0..w * h).map(|_| normal.sample(rng) as f32).collect();
    let layer: Vec<f32> = clipped_zoom_plane(&layer, w, h, p.zoom)
        .into_iter()
        .map(|v| if f64::from(v) < p.threshold { 0.0 } else { v.clamp(0.0, 1.0) })
        .collect();
    let angle = rng.random_range(-135.0..-45.0);
    let layer = motion_plane(&layer, w, h, p.blur_radius, p.blur_sigma, angle);

    let blend = p.blend as f32;
    let src = img.as_slice();
    let mut data = Vec::with_capacity(src.len());
    for (i, px) in src.chunks_exact(3).enumerate() {
        let gray = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        let lifted = gray * 1.5 + 0.5;
        // rot90(k=2) of the layer: flip both axes.
        let flake = layer[i] + layer[w * h - 1 - i];
        for &v in px {
            let base = blend * v + (1.0 - blend) * v.max(lifted);
            data.push(base + flake);
        }
    }
    ImageBuffer::from_unclamped(img.width(), img.height(), 3, data)
}

/// Where frost overlays come from.
#[derive(Debug, Clone, Default)]
pub enum FrostSource {
    /// Seeded fractal ice pattern.
    #[default]
    Procedural,
    /// User-provided texture images; a random crop of one is composited.
    Textures(Vec<ImageBuffer>),
}

fn smoothstep(e0: f32, e1: f32, x: f32) -> f32 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Multi-octave value noise in `[0, 1]` on a `w x h` grid.
fn value_noise(w: usize, h: usize, base_cells: usize, octaves: u32, rng: &mut KeyedRng) -> Vec<f32> {
    let mut acc = vec![0.0f32; w * h];
    let mut amplitude = 1.0f32;
    let mut total = 0.0f32;
    let side = w.max(h) as f32;
    for octave in 0..octaves {
        let cells = base_cells << octave;
        let lattice: Vec<f32> = (0..(cells + 1) * (cells + 1)).map(|_| rng.random::<f32>()).collect();
        let at = |i: usize, j: usize| lattice[j * (cells + 1) + i];
        for y in 0..h {
            let fy = (y as f32 + 0.5) / side * cells as f32;
            let (j, ty) = (fy.floor() as usize, smoothstep(0.0, 1.0, fy.fract()));
            for x in 0..w {
                let fx = (x as f32 + 0.5) / side * cells as f32;
                let (i, tx) = (fx.floor() as usize, smoothstep(0.0, 1.0, fx.fract()));
                let top = at(i, j) + (at(i + 1, j) - at(i, j)) * tx;
                let bottom = at(i, j + 1) + (at(i + 1, j + 1) - at(i, j + 1)) * tx;
                acc[y * w + x] += amplitude * (top + (bottom - top) * ty);
            }
        }
        total += amplitude;
        amplitude *= 0.5;
    }
    acc.iter_mut().for_each(|v| *v /= total);
    acc
}

/// Ice overlay colour (interleaved RGB) and per-pixel coverage in `[0, 1]`:
/// ridged noise thresholded into crystal veins over a low-frequency haze.
pub(super) fn procedural_frost(w: usize, h: usize, rng: &mut KeyedRng) -> (Vec<f32>, Vec<f32>) {
    let detail = value_noise(w, h, 4, 5, rng);
    let haze = value_noise(w, h, 2, 3, rng);
    const TINT: [f32; 3] = [0.86, 0.93, 1.0];
    let mut color = Vec::with_capacity(w * h * 3);
    let mut coverage = Vec::with_capacity(w * h);
    for (d, hz) in detail.iter().zip(&haze) {
        let ridge = 1.0 - (2.0 * d - 1.0).abs();
        let crystal = smoothstep(0.72, 0.97, ridge);
        coverage.push((0.45 * smoothstep(0.25, 0.85, *hz) + 0.75 * crystal).min(1.0));
        color.extend_from_slice(&TINT);
    }
    (color, coverage)
}

/// Composites `x + opacity * coverage * (overlay - x)`. Texture overlays use
/// their own luminance as coverage.
pub(super) fn frost(img: &ImageBuffer, opacity: f64, source: &FrostSource, rng: &mut KeyedRng) -> Result<ImageBuffer> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (color, coverage) = match source {
        FrostSource::Procedural => procedural_frost(w, h, rng),
        FrostSource::Textures(textures) => {
            if textures.is_empty() {
                return Err(Error::invalid("frost texture list is empty"));
            }
            let tex = &textures[rng.random_range(0..textures.len())];
            let (tw, th) = (tex.width() as usize, tex.height() as usize);
            if tw < w || th < h {
                return Err(Error::GeometryMismatch {
                    expected: format!("frost texture of at least {w}x{h}"),
                    found: format!("{tw}x{th}"),
                });
            }
            let x0 = rng.random_range(0..=tw - w);
            let y0 = rng.random_range(0..=th - h);
            let tex = tex.to_rgb();
            let mut color = Vec::with_capacity(w * h * 3);
            for y in 0..h {
                let row = ((y0 + y) * tw + x0) * 3;
                color.extend_from_slice(&tex.as_slice()[row..row + w * 3]);
            }
            let coverage = color.chunks_exact(3).map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).collect();
            (color, coverage)
        }
    };
    let opacity = opacity as f32;
    let data = img
        .as_slice()
        .chunks_exact(3)
        .zip(color.chunks_exact(3))
        .zip(&coverage)
        .flat_map(|((px, c), a)| {
            let a = opacity * a;
            [0, 1, 2].map(|k| px[k] + a * (c[k] - px[k]))
        })
        .collect();
    Ok(ImageBuffer::from_unclamped(img.width(), img.height(), 3, data))
}

/// Diamond-square plasma on a toroidal `size x size` grid (power of two),
/// normalized to `[0, 1]`.
pub(super) fn plasma_fractal(size: usize, decay: f64, rng: &mut KeyedRng) -> Vec<f64> {
    debug_assert!(size.is_power_of_two());
    let mut map = vec![0.0f64; size * size];
    let idx = |r: usize, c: usize| (r % size) * size + (c % size);
    let mut step = size;
    let mut wibble = 100.0f64;
    while step >= 2 {
        let half = step / 2;
        let jitter = |rng: &mut KeyedRng, wibble: f64| wibble * rng.random_range(-wibble..wibble);
        // squares
        for r in (0..size).step_by(step) {
            for c in (0..size).step_by(step) {
                let sum = map[idx(r, c)] + map[idx(r + step, c)] + map[idx(r, c + step)] + map[idx(r + step, c + step)];
                map[idx(r + half, c + half)] = sum / 4.0 + jitter(rng, wibble);
            }
        }
        // diamonds on corner rows
        for r in (0..size).step_by(step) {
            for c in (half..size).step_by(step) {
                let up = (r + size - half) % size;
                let sum = map[idx(r + half, c)] + map[idx(up, c)] + map[idx(r, c - half)] + map[idx(r, c + half)];
                map[idx(r, c)] = sum / 4.0 + jitter(rng, wibble);
            }
        }
        // diamonds on center rows
        for r in (half..size).step_by(step) {
            for c in (0..size).step_by(step) {
                let left = (c + size - half) % size;
                let sum = map[idx(r, c + half)] + map[idx(r, left)] + map[idx(r - half, c)] + map[idx(r + half, c)];
                map[idx(r, c)] = sum / 4.0 + jitter(rng, wibble);
            }
        }
        step /= 2;
        wibble /= decay;
    }
    let min = map.iter().copied().fold(f64::INFINITY, f64::min);
    let max = map.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    map.iter().map(|v| if span > 0.0 { (v - min) / span } else { 0.0 }).collect()
}

pub(super) fn fog(img: &ImageBuffer, thickness: f64, decay: f64, rng: &mut KeyedRng) -> ImageBuffer {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let size = w.max(h).next_power_of_two().max(2);
    let plasma = plasma_fractal(size, decay, rng);
    let max_val = img.as_slice().iter().copied().fold(0.0f32, f32::max) as f64;
    let scale = if max_val > 0.0 { max_val / (max_val + thickness) } else { 1.0 };
    let data = img
        .as_slice()
        .chunks_exact(3)
        .enumerate()
        .flat_map(|(i, px)| {
            let fogged = thickness * plasma[(i / w) * size + i % w];
            px.iter().map(move |&v| ((f64::from(v) + fogged) * scale) as f32).collect::<Vec<_>>()
        })
        .collect();
    ImageBuffer::from_unclamped(img.width(), img.height(), 3, data)
}
