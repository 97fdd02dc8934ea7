//! Decoded raster images in normalized float form.

use std::fmt;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width, height and channel count of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
}

impl Geometry {
    pub fn new(width: u32, height: u32, channels: u8) -> Self {
        Self { width, height, channels }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid(format!("geometry {self} has a zero dimension")));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::invalid(format!("geometry {self}: channels must be 1 or 3")));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.width, self.height, self.channels)
    }
}

/// Interleaved, row-major image with intensities in `[0, 1]`.
///
/// Sample `(x, y, c)` lives at `(y * width + x) * channels + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<f32>) -> Result<Self> {
        Geometry::new(width, height, channels).validate()?;
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::invalid(format!("pixel buffer has {} samples, expected {expected}", data.len())));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds an image from unclamped samples, clamping every value to `[0, 1]`.
    /// NaNs map to 0.
    pub fn from_unclamped(width: u32, height: u32, channels: u8, mut data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width as usize * height as usize * channels as usize);
        clamp_unit(&mut data);
        Self { width, height, channels, data }
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: f32) -> Self {
        let n = width as usize * height as usize * channels as usize;
        Self::from_unclamped(width, height, channels, vec![value; n])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::new(self.width, self.height, self.channels)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u8) -> f32 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    fn index(&self, x: u32, y: u32, c: u8) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len() as f64
    }

    /// Splits into one plane per channel.
    pub fn planes(&self) -> Vec<Vec<f32>> {
        let c = self.channels as usize;
        (0..c).map(|ch| self.data.iter().skip(ch).step_by(c).copied().collect()).collect()
    }

    /// Inverse of [`ImageBuffer::planes`]; clamps.
    pub fn from_planes(width: u32, height: u32, planes: &[Vec<f32>]) -> Self {
        let c = planes.len();
        let n = width as usize * height as usize;
        let mut data = vec![0.0f32; n * c];
        for (ch, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                data[i * c + ch] = v;
            }
        }
        Self::from_unclamped(width, height, c as u8, data)
    }

    /// Applies `f` to every sample and clamps the result.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::from_unclamped(self.width, self.height, self.channels, data)
    }

    pub fn to_rgb(&self) -> Self {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self::from_unclamped(self.width, self.height, 3, data)
    }

    /// Rec. 601 luminance.
    pub fn to_luma(&self) -> Self {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self.data.chunks_exact(3).map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).collect();
        Self::from_unclamped(self.width, self.height, 1, data)
    }

    pub fn with_channels(&self, channels: u8) -> Self {
        if channels == 1 {
            self.to_luma()
        } else {
            self.to_rgb()
        }
    }

    /// Quantizes to 8 bits with round-to-nearest.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize_u8(v)).collect()
    }

    pub fn from_u8(width: u32, height: u32, channels: u8, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f32::from(b) / 255.0).collect();
        Self::new(width, height, channels, data)
    }

    pub fn to_dynamic(&self) -> DynamicImage {
        let bytes = self.to_u8();
        if self.channels == 1 {
            DynamicImage::ImageLuma8(GrayImage::from_raw(self.width, self.height, bytes).expect("buffer size"))
        } else {
            DynamicImage::ImageRgb8(RgbImage::from_raw(self.width, self.height, bytes).expect("buffer size"))
        }
    }

    /// Normalizes a decoded image. Gray (with or without alpha) stays 1-channel,
    /// everything else becomes RGB; alpha is dropped. 8-bit sources divide by
    /// 255 and 16-bit sources by 65535.
    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let gray = !img.color().has_color();
        let sixteen = img.color().bytes_per_pixel() / img.color().channel_count() >= 2;
        match (gray, sixteen) {
            (true, false) => {
                let data = img.to_luma8().into_raw().iter().map(|&b| f32::from(b) / 255.0).collect();
                Self::from_unclamped(w, h, 1, data)
            }
            (true, true) => {
                let data = img.to_luma16().into_raw().iter().map(|&b| f32::from(b) / 65535.0).collect();
                Self::from_unclamped(w, h, 1, data)
            }
            (false, false) => {
                let data = img.to_rgb8().into_raw().iter().map(|&b| f32::from(b) / 255.0).collect();
                Self::from_unclamped(w, h, 3, data)
            }
            (false, true) => {
                let data = img.to_rgb16().into_raw().iter().map(|&b| f32::from(b) / 65535.0).collect();
                Self::from_unclamped(w, h, 3, data)
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, image::ImageError> {
        let img = image::load_from_memory(bytes)?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn open(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| Error::Decode { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        self.to_dynamic().write_to(&mut out, ImageFormat::Png).expect("PNG encoding into memory cannot fail");
        out.into_inner()
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, &self.encode_png())
    }
}

#[inline]
pub fn quantize_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub(crate) fn clamp_unit(data: &mut [f32]) {
    for v in data.iter_mut() {
        *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    }
}
