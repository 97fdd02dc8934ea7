use rand::Rng;

use crate::filter::{self, bilinear, convolve2d, Border};
use crate::image::ImageBuffer;
use crate::rng::KeyedRng;

/// Disk kernel of the given radius, anti-aliased with a 3x3 Gaussian.
pub(super) fn disk_kernel(radius: f64, alias_sigma: f64) -> (Vec<f32>, usize) {
    let (half, blur_size) = if radius <= 8.0 { (8isize, 3usize) } else { (radius.ceil() as isize, 5usize) };
    let size = (2 * half + 1) as usize;
    let mut disk = vec![0.0f32; size * size];
    for y in -half..=half {
        for x in -half..=half {
            if ((x * x + y * y) as f64) <= radius * radius {
                disk[((y + half) as usize) * size + (x + half) as usize] = 1.0;
            }
        }
    }
    let total: f32 = disk.iter().sum();
    disk.iter_mut().for_each(|v| *v /= total);

    let r = (blur_size / 2) as isize;
    let taps: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * alias_sigma * alias_sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    let taps: Vec<f32> = taps.iter().map(|t| (t / sum) as f32).collect();
    let mut kernel = filter::separable(&disk, size, size, &taps, &taps, Border::Reflect101);
    let total: f32 = kernel.iter().sum();
    kernel.iter_mut().for_each(|v| *v /= total);
    (kernel, size)
}

pub(super) fn defocus(img: &ImageBuffer, radius: f64, alias_sigma: f64) -> ImageBuffer {
    let (kernel, size) = disk_kernel(radius, alias_sigma);
    let (w, h) = (img.width() as usize, img.height() as usize);
    let planes: Vec<Vec<f32>> =
        img.planes().iter().map(|p| convolve2d(p, w, h, &kernel, size, size, Border::Reflect101)).collect();
    ImageBuffer::from_planes(img.width(), img.height(), &planes)
}

/// Blur, locally shuffle pixels, blur again.
pub(super) fn glass(img: &ImageBuffer, sigma: f64, max_delta: i64, iterations: u32, rng: &mut KeyedRng) -> ImageBuffer {
    let blurred = filter::gaussian_blur(img, sigma);
    let (w, h, c) = (img.width() as i64, img.height() as i64, img.channels() as usize);
    let mut data = blurred.into_vec();
    for _ in 0..iterations {
        for y in (max_delta + 1..=h - max_delta).rev() {
            for x in (max_delta + 1..=w - max_delta).rev() {
                let dx = rng.random_range(-max_delta..max_delta);
                let dy = rng.random_range(-max_delta..max_delta);
                let (y2, x2) = (y + dy, x + dx);
                if y >= h || x >= w || y2 < 0 || x2 < 0 || y2 >= h || x2 >= w {
                    continue;
                }
                let a = ((y * w + x) as usize) * c;
                let b = ((y2 * w + x2) as usize) * c;
                for ch in 0..c {
                    data.swap(a + ch, b + ch);
                }
            }
        }
    }
    let shuffled = ImageBuffer::from_unclamped(img.width(), img.height(), img.channels(), data);
    filter::gaussian_blur(&shuffled, sigma)
}

/// One-sided Gaussian streak along `angle_deg`, `2 * radius + 1` taps.
pub(super) fn motion_plane(plane: &[f32], w: usize, h: usize, radius: f64, sigma: f64, angle_deg: f64) -> Vec<f32> {
    let taps = 2 * radius.round().max(0.0) as usize + 1;
    let weights: Vec<f64> = (0..taps).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f64;
            for (i, wt) in weights.iter().enumerate() {
                if *wt < 1e-12 {
                    break;
                }
                let sx = x as f64 - i as f64 * cos;
                let sy = y as f64 - i as f64 * sin;
                acc += wt * f64::from(bilinear(plane, w, h, sx, sy, Border::Clamp));
            }
            out[y * w + x] = (acc / total) as f32;
        }
    }
    out
}

pub(super) fn motion(img: &ImageBuffer, radius: f64, sigma: f64, angle_deg: f64) -> ImageBuffer {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let planes: Vec<Vec<f32>> = img.planes().iter().map(|p| motion_plane(p, w, h, radius, sigma, angle_deg)).collect();
    ImageBuffer::from_planes(img.width(), img.height(), &planes)
}

/// Magnifies the center of a plane by `zoom`, keeping its size.
pub(super) fn clipped_zoom_plane(plane: &[f32], w: usize, h: usize, zoom: f64) -> Vec<f32> {
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let sy = cy + (y as f64 + 0.5 - cy) / zoom - 0.5;
        for x in 0..w {
            let sx = cx + (x as f64 + 0.5 - cx) / zoom - 0.5;
            out.push(bilinear(plane, w, h, sx, sy, Border::Clamp));
        }
    }
    out
}

pub(super) fn zoom_factors(zoom_max: f64, step: f64) -> Vec<f64> {
    let n = ((zoom_max - 1.0) / step).round().max(0.0) as usize;
    (0..=n).map(|i| 1.0 + i as f64 * step).collect()
}

/// Averages the image with progressively zoomed copies of itself.
pub(super) fn zoom(img: &ImageBuffer, zoom_max: f64, step: f64) -> ImageBuffer {
    let zooms = zoom_factors(zoom_max, step);
    let (w, h) = (img.width() as usize, img.height() as usize);
    let planes: Vec<Vec<f32>> = img
        .planes()
        .iter()
        .map(|p| {
            let mut acc: Vec<f32> = p.clone();
            for &z in &zooms {
                for (a, v) in acc.iter_mut().zip(clipped_zoom_plane(p, w, h, z)) {
                    *a += v;
                }
            }
            let n = (zooms.len() + 1) as f32;
            acc.iter().map(|v| v / n).collect()
        })
        .collect();
    ImageBuffer::from_planes(img.width(), img.height(), &planes)
}
