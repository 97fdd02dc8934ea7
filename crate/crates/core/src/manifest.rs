//! The dataset manifest: label space, item records and image geometry of one
//! dataset split, serialized as a single JSON document.

use std::collections::{BTreeMap, HashSet};
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{path_to_slash, relative_path, resolve_dir, write_atomic};
use crate::image::{Geometry, ImageBuffer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDescriptor {
    pub index: usize,
    pub key: String,
    pub display_name: String,
}

impl ClassDescriptor {
    pub fn new(index: usize, key: impl Into<String>, display_name: impl Into<String>) -> Self {
        Self { index, key: key.into(), display_name: display_name.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Real,
    Generated,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Real => "real",
            Source::Generated => "generated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    pub path: String,
    pub label: usize,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

/// How much checking [`load_manifest`] performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validation {
    /// Label space, ids, labels and path syntax.
    Structure,
    /// Additionally decodes every image and checks its geometry.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    /// Image root, relative to the directory holding the manifest file.
    pub root: String,
    /// `None` for raw source trees whose images have heterogeneous sizes.
    pub geometry: Option<Geometry>,
    pub label_space: Vec<ClassDescriptor>,
    pub items: Vec<ItemRecord>,
    /// Directory that `root` is resolved against; set on load and save.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, geometry: Option<Geometry>, label_space: Vec<ClassDescriptor>) -> Self {
        Self {
            name: name.into(),
            root: ".".into(),
            geometry,
            label_space,
            items: Vec::new(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.label_space.len()
    }

    pub fn count_source(&self, source: Source) -> usize {
        self.items.iter().filter(|i| i.source == source).count()
    }

    pub fn n_real(&self) -> usize {
        self.count_source(Source::Real)
    }

    pub fn n_generated(&self) -> usize {
        self.count_source(Source::Generated)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for item in &self.items {
            if let Some(c) = counts.get_mut(item.label) {
                *c += 1;
            }
        }
        counts
    }

    /// Per-class counts keyed by class key, for reporting.
    pub fn class_count_report(&self) -> BTreeMap<String, usize> {
        self.label_space.iter().zip(self.class_counts()).map(|(c, n)| (c.key.clone(), n)).collect()
    }

    pub fn image_root(&self) -> PathBuf {
        self.base_dir.join(&self.root)
    }

    pub fn item_path(&self, item: &ItemRecord) -> PathBuf {
        self.image_root().join(&item.path)
    }

    pub fn load_image(&self, item: &ItemRecord) -> Result<ImageBuffer> {
        ImageBuffer::open(&self.item_path(item))
    }

    pub fn key_index(&self) -> BTreeMap<&str, usize> {
        self.label_space.iter().map(|c| (c.key.as_str(), c.index)).collect()
    }

    pub fn same_label_space(&self, other: &DatasetManifest) -> bool {
        self.label_space.len() == other.label_space.len()
            && self.label_space.iter().zip(&other.label_space).all(|(a, b)| a.key == b.key)
    }

    pub fn validate_structure(&self) -> Result<()> {
        validate_label_space(&self.label_space)?;
        if let Some(g) = self.geometry {
            g.validate()?;
        }
        let k = self.num_classes();
        let mut ids = HashSet::with_capacity(self.items.len());
        for item in &self.items {
            if !ids.insert(item.id.as_str()) {
                return Err(Error::DuplicateItemId(item.id.clone()));
            }
            if item.label >= k {
                return Err(Error::LabelOutOfRange { id: item.id.clone(), label: item.label, num_classes: k });
            }
            check_relative(&item.path).map_err(|m| Error::invalid(format!("item {:?}: {m}", item.id)))?;
        }
        Ok(())
    }

    /// Decodes every item and checks it against `geometry`.
    pub fn validate_images(&self) -> Result<()> {
        for item in &self.items {
            let img = self.load_image(item)?;
            if let Some(g) = self.geometry {
                if img.geometry() != g {
                    return Err(Error::GeometryMismatch {
                        expected: g.to_string(),
                        found: format!("{} for item {:?}", img.geometry(), item.id),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { context: context.to_string(), message: e.to_string() })
    }

    /// Writes the manifest atomically. `root` is rewritten relative to the
    /// destination directory so the images stay reachable from the new file.
    pub fn save(&mut self, path: &Path) -> Result<()> {
        self.validate_structure()?;
        let new_base = parent_dir(path);
        std::fs::create_dir_all(&new_base).map_err(|e| Error::io(&new_base, e))?;
        let image_root = resolve_dir(&self.image_root());
        let rel = relative_path(&image_root, &resolve_dir(&new_base));
        self.root = path_to_slash(&rel);
        self.base_dir = new_base;
        write_atomic(path, self.to_json().as_bytes())
    }
}

pub(crate) fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn validate_label_space(space: &[ClassDescriptor]) -> Result<()> {
    let mut keys = HashSet::with_capacity(space.len());
    for (i, class) in space.iter().enumerate() {
        if class.index != i {
            return Err(Error::invalid(format!(
                "label space indices must be dense: position {i} holds index {}",
                class.index
            )));
        }
        if !keys.insert(class.key.as_str()) {
            return Err(Error::invalid(format!("duplicate class key {:?}", class.key)));
        }
    }
    Ok(())
}

fn check_relative(path: &str) -> std::result::Result<(), String> {
    let p = Path::new(path);
    if path.is_empty() {
        return Err("empty path".into());
    }
    for comp in p.components() {
        match comp {
            Component::Normal(_) | Component::CurDir => {}
            _ => return Err(format!("path {path:?} must be relative and stay under the root")),
        }
    }
    Ok(())
}

pub fn load_manifest(path: &Path, validation: Validation) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest = DatasetManifest::from_json(&text, &path.display().to_string())?;
    manifest.base_dir = parent_dir(path);
    manifest.validate_structure()?;
    if validation == Validation::Full {
        manifest.validate_images()?;
    }
    Ok(manifest)
}

/// Reads a label space from either a manifest file (`.json`) or a plain
/// list with one class key per line, optionally followed by a tab and a
/// display name.
pub fn load_label_space(path: &Path) -> Result<Vec<ClassDescriptor>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(DatasetManifest::from_json(&text, &path.display().to_string())?.label_space);
    }
    let space: Vec<ClassDescriptor> = text
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| match line.split_once('\t') {
            Some((key, name)) => ClassDescriptor::new(i, key.trim(), name.trim()),
            None => ClassDescriptor::new(i, line.trim(), line.trim()),
        })
        .collect();
    validate_label_space(&space)?;
    Ok(space)
}
