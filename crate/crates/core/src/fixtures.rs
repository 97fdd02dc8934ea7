//! Synthetic images and datasets for tests, benchmarks and smoke runs.
//!
//! Images are smooth gradients with soft blobs, a sinusoidal texture and
//! fine grain, so that blur, noise and compression all have visible effect.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::{Geometry, ImageBuffer};
use crate::manifest::{ClassDescriptor, DatasetManifest, ItemRecord, Source};

/// Deterministic synthetic image for `seed`.
pub fn fixture_image(seed: u64, width: u32, height: u32, channels: u8) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as usize, height as usize);
    let c = channels as usize;
    let top: Vec<f32> = (0..c).map(|_| rng.random_range(0.15..0.85)).collect();
    let bottom: Vec<f32> = (0..c).map(|_| rng.random_range(0.15..0.85)).collect();
    let mut data = vec![0.0f32; w * h * c];
    for y in 0..h {
        let t = y as f32 / (h - 1).max(1) as f32;
        for x in 0..w {
            for ch in 0..c {
                data[(y * w + x) * c + ch] = top[ch] * (1.0 - t) + bottom[ch] * t;
            }
        }
    }
    for _ in 0..6 {
        let cx = rng.random_range(0.0..w as f32);
        let cy = rng.random_range(0.0..h as f32);
        let rx = rng.random_range(3.0..(w as f32 / 3.0).max(3.5));
        let ry = rng.random_range(3.0..(h as f32 / 3.0).max(3.5));
        let color: Vec<f32> = (0..c).map(|_| rng.random_range(0.05..0.95)).collect();
        for y in 0..h {
            for x in 0..w {
                let d = ((x as f32 - cx) / rx).powi(2) + ((y as f32 - cy) / ry).powi(2);
                let a = (1.2 - d).clamp(0.0, 1.0).min(1.0);
                for ch in 0..c {
                    let v = &mut data[(y * w + x) * c + ch];
                    *v = *v * (1.0 - a) + color[ch] * a;
                }
            }
        }
    }
    let fx = rng.random_range(0.2..0.9);
    let fy = rng.random_range(0.2..0.9);
    for y in 0..h {
        for x in 0..w {
            let tex = 0.06 * ((x as f32 * fx).sin() * (y as f32 * fy).cos());
            for ch in 0..c {
                let v = &mut data[(y * w + x) * c + ch];
                *v += tex + rng.random_range(-0.02..0.02);
            }
        }
    }
    ImageBuffer::from_unclamped(width, height, channels, data)
}

pub fn fixture_set(n: usize, width: u32, height: u32, channels: u8, seed: u64) -> Vec<ImageBuffer> {
    (0..n).map(|i| fixture_image(seed * 1_000_003 + i as u64, width, height, channels)).collect()
}

/// `k` classes with keys `<prefix>0000`, `<prefix>0001`, ...
pub fn label_space(k: usize, prefix: &str) -> Vec<ClassDescriptor> {
    (0..k).map(|i| ClassDescriptor::new(i, format!("{prefix}{i:04}"), format!("class {i}"))).collect()
}

/// Writes `n` fixture PNGs under `dir/<class key>/`, items assigned to
/// classes round-robin, and saves their manifest at `dir/manifest.json`.
pub fn write_fixture_dataset(
    dir: &Path,
    name: &str,
    n: usize,
    classes: &[ClassDescriptor],
    geometry: Geometry,
    source: Source,
    seed: u64,
) -> Result<DatasetManifest> {
    let mut m = DatasetManifest::new(name, Some(geometry), classes.to_vec());
    m.base_dir = dir.to_path_buf();
    for i in 0..n {
        let label = i % classes.len();
        let rel = format!("{}/{name}_{i:05}.png", classes[label].key);
        let path = dir.join(&rel);
        fixture_image(seed + i as u64, geometry.width, geometry.height, geometry.channels).save_png(&path)?;
        m.items.push(ItemRecord { id: format!("{name}_{i:05}"), path: rel, label, source, provenance: None });
    }
    m.save(&dir.join("manifest.json"))?;
    Ok(m)
}

/// Writes `<root>/<dir>/<dir>_<j>.png` for each `(dir, count)`, with image
/// sizes varying between 40 and 96 pixels per side. Returns the file count.
pub fn write_class_tree(root: &Path, classes: &[(String, usize)], seed: u64) -> Result<usize> {
    let mut total = 0;
    for (c, (dir, count)) in classes.iter().enumerate() {
        for j in 0..*count {
            let s = seed.wrapping_mul(31).wrapping_add((c * 10_007 + j) as u64);
            let w = 40 + (s % 57) as u32;
            let h = 40 + ((s / 57) % 57) as u32;
            fixture_image(s, w, h, 3).save_png(&root.join(dir).join(format!("{dir}_{j}.png")))?;
            total += 1;
        }
    }
    Ok(total)
}
