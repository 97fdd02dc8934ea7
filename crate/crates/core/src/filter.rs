//! Plane-level filtering and resampling shared by the corruption kernels,
//! augmentation primitives and test-set builders.
//!
//! Continuous coordinates address pixel centers: sample `(x, y)` with
//! integral `x, y` hits pixel `(x, y)` exactly. Half-pixel-center resampling
//! maps output pixel `i` to source coordinate `(i + 0.5) * scale - 0.5`.

use crate::image::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Border {
    /// `dcb|abcd|cba`
    Reflect101,
    /// `cba|abcd|dcb`
    Reflect,
    /// `aaa|abcd|ddd`
    Clamp,
    Constant(f32),
}

/// Maps a possibly out-of-range index into `0..n`, or `None` for constant fill.
#[inline]
pub fn border_index(i: isize, n: usize, border: Border) -> Option<usize> {
    let n_i = n as isize;
    if (0..n_i).contains(&i) {
        return Some(i as usize);
    }
    match border {
        Border::Constant(_) => None,
        Border::Clamp => Some(i.clamp(0, n_i - 1) as usize),
        Border::Reflect => {
            if n == 1 {
                return Some(0);
            }
            let period = 2 * n_i;
            let mut m = i.rem_euclid(period);
            if m >= n_i {
                m = period - 1 - m;
            }
            Some(m as usize)
        }
        Border::Reflect101 => {
            if n == 1 {
                return Some(0);
            }
            let period = 2 * n_i - 2;
            let mut m = i.rem_euclid(period);
            if m >= n_i {
                m = period - m;
            }
            Some(m as usize)
        }
    }
}

#[inline]
fn fetch(plane: &[f32], w: usize, h: usize, x: isize, y: isize, border: Border) -> f32 {
    match (border_index(x, w, border), border_index(y, h, border)) {
        (Some(xi), Some(yi)) => plane[yi * w + xi],
        _ => match border {
            Border::Constant(v) => v,
            _ => unreachable!(),
        },
    }
}

/// Normalized 1-D Gaussian taps over `[-r, r]` with `r = ceil(truncate * sigma)`.
pub fn gaussian_kernel(sigma: f64, truncate: f64) -> Vec<f32> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (truncate * sigma).ceil().max(1.0) as isize;
    let weights: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = weights.iter().sum();
    weights.iter().map(|w| (w / sum) as f32).collect()
}

/// Separable convolution of one plane with a horizontal and a vertical
/// odd-length kernel.
pub fn separable(plane: &[f32], w: usize, h: usize, kx: &[f32], ky: &[f32], border: Border) -> Vec<f32> {
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (k, &wt) in kx.iter().enumerate() {
                acc += wt * fetch(plane, w, h, x as isize + k as isize - rx, y as isize, border);
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (k, &wt) in ky.iter().enumerate() {
                acc += wt * fetch(&tmp, w, h, x as isize, y as isize + k as isize - ry, border);
            }
            out[y * w + x] = acc;
        }
    }
    out
}

pub fn gaussian_plane(plane: &[f32], w: usize, h: usize, sigma_x: f64, sigma_y: f64, border: Border) -> Vec<f32> {
    let kx = gaussian_kernel(sigma_x, 4.0);
    let ky = gaussian_kernel(sigma_y, 4.0);
    separable(plane, w, h, &kx, &ky, border)
}

/// Gaussian blur of every channel (truncated at 4 sigma, reflecting border).
pub fn gaussian_blur(img: &ImageBuffer, sigma: f64) -> ImageBuffer {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let planes: Vec<Vec<f32>> =
        img.planes().iter().map(|p| gaussian_plane(p, w, h, sigma, sigma, Border::Reflect)).collect();
    ImageBuffer::from_planes(img.width(), img.height(), &planes)
}

/// Dense 2-D correlation with a `kw x kh` kernel centered on each pixel.
pub fn convolve2d(plane: &[f32], w: usize, h: usize, kernel: &[f32], kw: usize, kh: usize, border: Border) -> Vec<f32> {
    let (rx, ry) = ((kw / 2) as isize, (kh / 2) as isize);
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for ky in 0..kh {
                for kx in 0..kw {
                    let wt = kernel[ky * kw + kx];
                    if wt != 0.0 {
                        acc += wt
                            * fetch(plane, w, h, x as isize + kx as isize - rx, y as isize + ky as isize - ry, border);
                    }
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Bilinear sample at continuous pixel-center coordinates.
#[inline]
pub fn bilinear(plane: &[f32], w: usize, h: usize, x: f64, y: f64, border: Border) -> f32 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = (x - x0) as f32;
    let fy = (y - y0) as f32;
    let (xi, yi) = (x0 as isize, y0 as isize);
    let p00 = fetch(plane, w, h, xi, yi, border);
    let p10 = fetch(plane, w, h, xi + 1, yi, border);
    let p01 = fetch(plane, w, h, xi, yi + 1, border);
    let p11 = fetch(plane, w, h, xi + 1, yi + 1, border);
    let top = p00 + (p10 - p00) * fx;
    let bottom = p01 + (p11 - p01) * fx;
    top + (bottom - top) * fy
}

/// Resamples every channel through `map(out_x, out_y) -> (src_x, src_y)`.
pub fn remap(
    img: &ImageBuffer,
    out_w: u32,
    out_h: u32,
    border: Border,
    map: impl Fn(usize, usize) -> (f64, f64),
) -> ImageBuffer {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let planes: Vec<Vec<f32>> = img
        .planes()
        .iter()
        .map(|p| {
            let mut out = Vec::with_capacity(out_w as usize * out_h as usize);
            for y in 0..out_h as usize {
                for x in 0..out_w as usize {
                    let (sx, sy) = map(x, y);
                    out.push(bilinear(p, w, h, sx, sy, border));
                }
            }
            out
        })
        .collect();
    ImageBuffer::from_planes(out_w, out_h, &planes)
}

/// Bilinear resize with half-pixel centers. When an axis shrinks by more
/// than 2x the source is first blurred with `sigma = (scale - 1) / 2` along
/// that axis to suppress aliasing.
pub fn resize_bilinear(img: &ImageBuffer, out_w: u32, out_h: u32) -> ImageBuffer {
    if out_w == img.width() && out_h == img.height() {
        return img.clone();
    }
    let sx = f64::from(img.width()) / f64::from(out_w);
    let sy = f64::from(img.height()) / f64::from(out_h);
    let src = if sx > 2.0 || sy > 2.0 {
        let sigma_x = if sx > 2.0 { (sx - 1.0) / 2.0 } else { 0.0 };
        let sigma_y = if sy > 2.0 { (sy - 1.0) / 2.0 } else { 0.0 };
        let (w, h) = (img.width() as usize, img.height() as usize);
        let planes: Vec<Vec<f32>> =
            img.planes().iter().map(|p| gaussian_plane(p, w, h, sigma_x, sigma_y, Border::Reflect)).collect();
        ImageBuffer::from_planes(img.width(), img.height(), &planes)
    } else {
        img.clone()
    };
    remap(&src, out_w, out_h, Border::Clamp, |x, y| ((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5))
}
