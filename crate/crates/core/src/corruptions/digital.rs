use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageFormat};
use rand::Rng;

use crate::error::{Error, Result};
use crate::filter::{self, bilinear, Border};
use crate::image::ImageBuffer;
use crate::rng::KeyedRng;

fn rgb_to_hsv(r: f32, g: f32, b: f32) -> (f32, f32, f32) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if r == max {
        (g - b) / delta
    } else if g == max {
        2.0 + (b - r) / delta
    } else {
        4.0 + (r - g) / delta
    };
    ((h / 6.0).rem_euclid(1.0), s, max)
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> (f32, f32, f32) {
    let h6 = h * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - f * s);
    let t = v * (1.0 - (1.0 - f) * s);
    match (i as i32).rem_euclid(6) {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// Adds `delta` to the HSV value channel (plain offset for gray images).
pub(super) fn brightness(img: &ImageBuffer, delta: f64) -> ImageBuffer {
    let d = delta as f32;
    if img.channels() == 1 {
        return img.map(|v| v + d);
    }
    let data = img
        .as_slice()
        .chunks_exact(3)
        .flat_map(|px| {
            let (h, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
            let (r, g, b) = hsv_to_rgb(h, s, (v + d).clamp(0.0, 1.0));
            [r, g, b]
        })
        .collect();
    ImageBuffer::from_unclamped(img.width(), img.height(), 3, data)
}

/// Scales deviations from the per-channel spatial mean by `factor`.
pub(super) fn contrast(img: &ImageBuffer, factor: f64) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    let factor = factor as f32;
    let planes: Vec<Vec<f32>> = img
        .planes()
        .into_iter()
        .map(|p| {
            let mean = (p.iter().map(|&v| f64::from(v)).sum::<f64>() / p.len() as f64) as f32;
            p.iter().map(|&v| (v - mean) * factor + mean).collect()
        })
        .collect();
    ImageBuffer::from_planes(w, h, &planes)
}

/// 2x3 affine matrix mapping each `src[i]` onto `dst[i]`.
fn affine_from_points(src: [[f64; 2]; 3], dst: [[f64; 2]; 3]) -> [[f64; 3]; 2] {
    // Solve [x y 1] * coeffs = dst for each output coordinate (Cramer's rule).
    let m = [[src[0][0], src[0][1], 1.0], [src[1][0], src[1][1], 1.0], [src[2][0], src[2][1], 1.0]];
    let det3 = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let det = det3(m);
    let mut out = [[0.0; 3]; 2];
    for (row, coeffs) in out.iter_mut().enumerate() {
        for (col, coeff) in coeffs.iter_mut().enumerate() {
            let mut mm = m;
            for r in 0..3 {
                mm[r][col] = dst[r][row];
            }
            *coeff = det3(mm) / det;
        }
    }
    out
}

fn invert_affine(a: [[f64; 3]; 2]) -> [[f64; 3]; 2] {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let (i00, i01) = (a[1][1] / det, -a[0][1] / det);
    let (i10, i11) = (-a[1][0] / det, a[0][0] / det);
    [[i00, i01, -(i00 * a[0][2] + i01 * a[1][2])], [i10, i11, -(i10 * a[0][2] + i11 * a[1][2])]]
}

/// Random affine jitter of three control points followed by a smooth random
/// displacement field. Parameters are fractions of the shorter side.
pub(super) fn elastic(img: &ImageBuffer, alpha: f64, sigma: f64, affine: f64, rng: &mut KeyedRng) -> ImageBuffer {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let side = w.min(h) as f64;
    let (alpha, sigma, affine) = (alpha * side, sigma * side, affine * side);

    let (cx, cy) = ((w / 2) as f64, (h / 2) as f64);
    let sq = (w.min(h) / 3) as f64;
    let src = [[cx + sq, cy + sq], [cx + sq, cy - sq], [cx - sq, cy - sq]];
    let mut dst = src;
    for p in dst.iter_mut() {
        for v in p.iter_mut() {
            if affine > 0.0 {
                *v += rng.random_range(-affine..affine);
            }
        }
    }
    let inv = invert_affine(affine_from_points(src, dst));
    let warped = filter::remap(img, w as u32, h as u32, Border::Reflect101, |x, y| {
        let (x, y) = (x as f64, y as f64);
        (inv[0][0] * x + inv[0][1] * y + inv[0][2], inv[1][0] * x + inv[1][1] * y + inv[1][2])
    });

    let mut field = || {
        let noise: Vec<f32> = (0..w * h).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let kernel = filter::gaussian_kernel(sigma, 3.0);
        filter::separable(&noise, w, h, &kernel, &kernel, Border::Reflect)
            .into_iter()
            .map(|v| f64::from(v) * alpha)
            .collect::<Vec<f64>>()
    };
    let dx = field();
    let dy = field();

    let (ww, wh) = (warped.width() as usize, warped.height() as usize);
    let planes: Vec<Vec<f32>> = warped
        .planes()
        .iter()
        .map(|p| {
            (0..w * h)
                .map(|i| {
                    let (x, y) = ((i % w) as f64, (i / w) as f64);
                    bilinear(p, ww, wh, x + dx[i], y + dy[i], Border::Reflect)
                })
                .collect()
        })
        .collect();
    ImageBuffer::from_planes(img.width(), img.height(), &planes)
}

/// Area-weighted resampling matrix along one axis: `(first source index, weights)`
/// per output position.
fn area_weights(n_in: usize, n_out: usize) -> Vec<(usize, Vec<f32>)> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|i| {
            let (lo, hi) = (i as f64 * scale, (i + 1) as f64 * scale);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n_in);
            let weights = (first..last)
                .map(|j| {
                    let overlap = (hi.min((j + 1) as f64) - lo.max(j as f64)).max(0.0);
                    (overlap / scale) as f32
                })
                .collect();
            (first, weights)
        })
        .collect()
}

/// Box-filter resize: each output pixel averages the source area it covers.
fn resize_area(img: &ImageBuffer, out_w: u32, out_h: u32) -> ImageBuffer {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (ow, oh) = (out_w as usize, out_h as usize);
    let wx = area_weights(w, ow);
    let wy = area_weights(h, oh);
    let planes: Vec<Vec<f32>> = img
        .planes()
        .iter()
        .map(|p| {
            let mut tmp = vec![0.0f32; ow * h];
            for y in 0..h {
                for (x, (first, ws)) in wx.iter().enumerate() {
                    tmp[y * ow + x] = ws.iter().enumerate().map(|(k, wt)| wt * p[y * w + first + k]).sum();
                }
            }
            let mut out = vec![0.0f32; ow * oh];
            for (y, (first, ws)) in wy.iter().enumerate() {
                for x in 0..ow {
                    out[y * ow + x] = ws.iter().enumerate().map(|(k, wt)| wt * tmp[(first + k) * ow + x]).sum();
                }
            }
            out
        })
        .collect();
    ImageBuffer::from_planes(out_w, out_h, &planes)
}

pub(super) fn pixelate(img: &ImageBuffer, factor: f64) -> ImageBuffer {
    let small_w = ((f64::from(img.width()) * factor) as u32).max(1);
    let small_h = ((f64::from(img.height()) * factor) as u32).max(1);
    let small = resize_area(img, small_w, small_h);
    resize_area(&small, img.width(), img.height())
}

/// Encodes at the given JPEG quality and decodes again.
pub(super) fn jpeg(img: &ImageBuffer, quality: f64) -> Result<ImageBuffer> {
    let q = quality.round().clamp(1.0, 100.0) as u8;
    let mut buf = Vec::new();
    let color = if img.channels() == 1 { ExtendedColorType::L8 } else { ExtendedColorType::Rgb8 };
    JpegEncoder::new_with_quality(&mut buf, q)
        .encode(&img.to_u8(), img.width(), img.height(), color)
        .map_err(|e| Error::invalid(format!("jpeg encoding failed: {e}")))?;
    let decoded = image::load(Cursor::new(buf), ImageFormat::Jpeg)
        .map_err(|e| Error::invalid(format!("jpeg decoding failed: {e}")))?;
    Ok(ImageBuffer::from_dynamic(&decoded).with_channels(img.channels()))
}
