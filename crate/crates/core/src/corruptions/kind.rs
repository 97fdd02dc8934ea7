use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Noise,
    Blur,
    Weather,
    Digital,
}

/// The 15 common corruptions, in benchmark order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    DefocusBlur,
    GlassBlur,
    MotionBlur,
    ZoomBlur,
    Snow,
    Frost,
    Fog,
    Brightness,
    Contrast,
    ElasticTransform,
    Pixelate,
    JpegCompression,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 15] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::ShotNoise,
        CorruptionKind::ImpulseNoise,
        CorruptionKind::DefocusBlur,
        CorruptionKind::GlassBlur,
        CorruptionKind::MotionBlur,
        CorruptionKind::ZoomBlur,
        CorruptionKind::Snow,
        CorruptionKind::Frost,
        CorruptionKind::Fog,
        CorruptionKind::Brightness,
        CorruptionKind::Contrast,
        CorruptionKind::ElasticTransform,
        CorruptionKind::Pixelate,
        CorruptionKind::JpegCompression,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::ShotNoise => "shot_noise",
            CorruptionKind::ImpulseNoise => "impulse_noise",
            CorruptionKind::DefocusBlur => "defocus_blur",
            CorruptionKind::GlassBlur => "glass_blur",
            CorruptionKind::MotionBlur => "motion_blur",
            CorruptionKind::ZoomBlur => "zoom_blur",
            CorruptionKind::Snow => "snow",
            CorruptionKind::Frost => "frost",
            CorruptionKind::Fog => "fog",
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::Contrast => "contrast",
            CorruptionKind::ElasticTransform => "elastic_transform",
            CorruptionKind::Pixelate => "pixelate",
            CorruptionKind::JpegCompression => "jpeg_compression",
        }
    }

    pub const fn category(self) -> Category {
        use CorruptionKind::*;
        match self {
            GaussianNoise | ShotNoise | ImpulseNoise => Category::Noise,
            DefocusBlur | GlassBlur | MotionBlur | ZoomBlur => Category::Blur,
            Snow | Frost | Fog => Category::Weather,
            Brightness | Contrast | ElasticTransform | Pixelate | JpegCompression => Category::Digital,
        }
    }

    pub const fn is_weather(self) -> bool {
        matches!(self.category(), Category::Weather)
    }

    /// Whether the output depends on the seed.
    pub const fn is_stochastic(self) -> bool {
        use CorruptionKind::*;
        matches!(self, GaussianNoise | ShotNoise | ImpulseNoise | GlassBlur | Snow | Frost | Fog | ElasticTransform)
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown corruption kind {s:?}")))
    }
}

/// Which corruption suite a test set receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// All 15 kinds.
    Natural,
    /// The 12 non-weather kinds.
    Medical,
}

impl Profile {
    pub fn kinds(self) -> Vec<CorruptionKind> {
        CorruptionKind::ALL.into_iter().filter(|k| self == Profile::Natural || !k.is_weather()).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Natural => "natural",
            Profile::Medical => "medical",
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "natural" => Ok(Profile::Natural),
            "medical" => Ok(Profile::Medical),
            other => Err(Error::invalid(format!("unknown profile {other:?} (expected natural or medical)"))),
        }
    }
}

/// One deterministic corruption application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8, seed: u64) -> Self {
        Self { kind, severity, seed }
    }
}

pub const SEVERITIES: [u8; 5] = [1, 2, 3, 4, 5];
