//! The 15 common corruptions at five severities, and the builder that
//! materializes corrupted copies of a test set.

mod blur;
mod builder;
mod digital;
mod kind;
mod noise;
mod params;
mod weather;

pub use builder::{build_corrupted_testset, BuildOptions, CorruptedTree, INDEX_FILE};
pub use kind::{Category, CorruptionKind, CorruptionSpec, Profile, SEVERITIES};
pub use params::{primary_parameter, ResolutionProfile, SeverityParams, SeverityTable, Trend};
pub use weather::FrostSource;

use crate::error::Result;
use crate::image::ImageBuffer;
use crate::rng::rng_from_key;

/// Applies corruptions under a parameter table and frost source.
#[derive(Debug, Clone)]
pub struct Corruptor {
    table: SeverityTable,
    frost: FrostSource,
}

impl Default for Corruptor {
    fn default() -> Self {
        Self::new(SeverityTable::builtin().clone())
    }
}

impl Corruptor {
    pub fn new(table: SeverityTable) -> Self {
        Self { table, frost: FrostSource::Procedural }
    }

    pub fn with_frost(mut self, frost: FrostSource) -> Self {
        self.frost = frost;
        self
    }

    pub fn table(&self) -> &SeverityTable {
        &self.table
    }

    /// Corrupts `image` according to `spec`. The output keeps the input
    /// geometry, is clamped to `[0, 1]` and depends only on `(image, spec)`.
    pub fn apply(&self, image: &ImageBuffer, spec: &CorruptionSpec) -> Result<ImageBuffer> {
        let profile = ResolutionProfile::for_size(image.width(), image.height());
        let p = self.table.params(spec.kind, spec.severity, profile)?;
        let mut rng = rng_from_key(spec.seed);
        let rng = &mut rng;

        if spec.kind.is_weather() && image.channels() == 1 {
            let rgb = image.to_rgb();
            return Ok(self.apply(&rgb, spec)?.to_luma());
        }

        use CorruptionKind::*;
        let out = match spec.kind {
            GaussianNoise => noise::gaussian(image, p.get("sigma")?, rng),
            ShotNoise => noise::shot(image, p.get("photons")?, rng),
            ImpulseNoise => noise::impulse(image, p.get("amount")?, rng),
            DefocusBlur => blur::defocus(image, p.get("radius")?, p.get("alias_sigma")?),
            GlassBlur => blur::glass(
                image,
                p.get("sigma")?,
                p.get("max_delta")?.round() as i64,
                p.get("iterations")?.round() as u32,
                rng,
            ),
            MotionBlur => blur::motion(image, p.get("radius")?, p.get("sigma")?, p.get("angle")?),
            ZoomBlur => blur::zoom(image, p.get("zoom_max")?, p.get("zoom_step")?),
            Snow => weather::snow(
                image,
                &weather::SnowParams {
                    loc: p.get("loc")?,
                    scale: p.get("scale")?,
                    zoom: p.get("zoom")?,
                    threshold: p.get("threshold")?,
                    blur_radius: p.get("blur_radius")?,
                    blur_sigma: p.get("blur_sigma")?,
                    blend: p.get("blend")?,
                },
                rng,
            ),
            Frost => weather::frost(image, p.get("opacity")?, &self.frost, rng)?,
            Fog => weather::fog(image, p.get("thickness")?, p.get("decay")?, rng),
            Brightness => digital::brightness(image, p.get("delta")?),
            Contrast => digital::contrast(image, p.get("factor")?),
            ElasticTransform => digital::elastic(image, p.get("alpha")?, p.get("sigma")?, p.get("affine")?, rng),
            Pixelate => digital::pixelate(image, p.get("factor")?),
            JpegCompression => digital::jpeg(image, p.get("quality")?)?,
        };
        debug_assert_eq!(out.geometry(), image.geometry());
        Ok(out)
    }
}

/// [`Corruptor::apply`] with the builtin table and procedural frost.
pub fn apply_corruption(image: &ImageBuffer, spec: &CorruptionSpec) -> Result<ImageBuffer> {
    static DEFAULT: std::sync::OnceLock<Corruptor> = std::sync::OnceLock::new();
    DEFAULT.get_or_init(Corruptor::default).apply(image, spec)
}
