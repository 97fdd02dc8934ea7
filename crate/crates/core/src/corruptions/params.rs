//! Severity parameter tables.
//!
//! The shipped table is embedded from `severity_params.toml`; a user file in
//! the same layout can override any subset of `(profile, kind, parameter)`
//! entries.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::kind::{CorruptionKind, SEVERITIES};
use crate::error::{Error, Result};

const DEFAULT_TABLE: &str = include_str!("severity_params.toml");

/// Parameter table chosen by image resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResolutionProfile {
    P28,
    P32,
    P64,
}

impl ResolutionProfile {
    pub const ALL: [ResolutionProfile; 3] = [ResolutionProfile::P28, ResolutionProfile::P32, ResolutionProfile::P64];

    /// Nearest table by the shorter image side.
    pub fn for_size(width: u32, height: u32) -> Self {
        match width.min(height) {
            0..=30 => ResolutionProfile::P28,
            31..=48 => ResolutionProfile::P32,
            _ => ResolutionProfile::P64,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            ResolutionProfile::P28 => "p28",
            ResolutionProfile::P32 => "p32",
            ResolutionProfile::P64 => "p64",
        }
    }
}

/// Direction in which a kind's primary intensity parameter moves as
/// severity grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    Decreasing,
}

pub fn primary_parameter(kind: CorruptionKind) -> (&'static str, Trend) {
    use CorruptionKind::*;
    use Trend::*;
    match kind {
        GaussianNoise => ("sigma", Increasing),
        ShotNoise => ("photons", Decreasing),
        ImpulseNoise => ("amount", Increasing),
        DefocusBlur => ("radius", Increasing),
        GlassBlur => ("max_delta", Increasing),
        MotionBlur => ("sigma", Increasing),
        ZoomBlur => ("zoom_max", Increasing),
        Snow => ("loc", Increasing),
        Frost => ("opacity", Increasing),
        Fog => ("thickness", Increasing),
        Brightness => ("delta", Increasing),
        Contrast => ("factor", Decreasing),
        ElasticTransform => ("alpha", Increasing),
        Pixelate => ("factor", Decreasing),
        JpegCompression => ("quality", Decreasing),
    }
}

type KindTable = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableFile {
    #[serde(default)]
    version: Option<String>,
    #[serde(flatten)]
    profiles: BTreeMap<String, BTreeMap<String, KindTable>>,
}

/// Named numeric parameters of one `(kind, severity, profile)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityParams {
    kind: CorruptionKind,
    values: BTreeMap<String, f64>,
}

impl SeverityParams {
    pub fn get(&self, name: &str) -> Result<f64> {
        self.values
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(format!("severity table lacks parameter {name:?} for {}", self.kind)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeverityTable {
    version: String,
    profiles: BTreeMap<String, BTreeMap<String, KindTable>>,
}

impl SeverityTable {
    pub fn builtin() -> &'static SeverityTable {
        static TABLE: OnceLock<SeverityTable> = OnceLock::new();
        TABLE.get_or_init(|| SeverityTable::parse(DEFAULT_TABLE, "builtin").expect("shipped table is valid"))
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let file: TableFile =
            toml::from_str(text).map_err(|e| Error::Parse { context: context.to_string(), message: e.to_string() })?;
        let table =
            SeverityTable { version: file.version.unwrap_or_else(|| "unversioned".into()), profiles: file.profiles };
        table.validate()?;
        Ok(table)
    }

    /// Builtin table with entries from `path` layered on top.
    pub fn with_overrides(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: TableFile = toml::from_str(&text)
            .map_err(|e| Error::Parse { context: path.display().to_string(), message: e.to_string() })?;
        let mut table = Self::builtin().clone();
        for (profile, kinds) in file.profiles {
            let slot = table
                .profiles
                .get_mut(&profile)
                .ok_or_else(|| Error::invalid(format!("{}: unknown profile {profile:?}", path.display())))?;
            for (kind, params) in kinds {
                kind.parse::<CorruptionKind>()?;
                slot.entry(kind).or_default().extend(params);
            }
        }
        table.version = match file.version {
            Some(v) => format!("{}+{v}", table.version),
            None => format!("{}+override", table.version),
        };
        table.validate()?;
        Ok(table)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn params(&self, kind: CorruptionKind, severity: u8, profile: ResolutionProfile) -> Result<SeverityParams> {
        if !SEVERITIES.contains(&severity) {
            return Err(Error::InvalidSeverity(severity));
        }
        let table = self
            .profiles
            .get(profile.key())
            .and_then(|p| p.get(kind.name()))
            .ok_or_else(|| Error::invalid(format!("no parameters for {kind} in profile {}", profile.key())))?;
        let values = table.iter().map(|(name, vals)| (name.clone(), vals[usize::from(severity - 1)])).collect();
        Ok(SeverityParams { kind, values })
    }

    fn validate(&self) -> Result<()> {
        for profile in ResolutionProfile::ALL {
            let kinds = self
                .profiles
                .get(profile.key())
                .ok_or_else(|| Error::invalid(format!("severity table lacks profile {}", profile.key())))?;
            for name in kinds.keys() {
                name.parse::<CorruptionKind>()?;
            }
            for kind in CorruptionKind::ALL {
                let params = kinds.get(kind.name()).ok_or_else(|| {
                    Error::invalid(format!("severity table lacks {kind} in profile {}", profile.key()))
                })?;
                for (name, values) in params {
                    if values.len() != SEVERITIES.len() || values.iter().any(|v| !v.is_finite()) {
                        return Err(Error::invalid(format!(
                            "{}.{kind}.{name}: expected five finite values",
                            profile.key()
                        )));
                    }
                }
                let (primary, _) = primary_parameter(kind);
                if !params.contains_key(primary) {
                    return Err(Error::invalid(format!(
                        "{}.{kind} lacks its primary parameter {primary}",
                        profile.key()
                    )));
                }
            }
        }
        Ok(())
    }
}
