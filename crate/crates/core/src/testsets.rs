//! Shifted test sets ported to a small label space: restriction of a large
//! dataset to the classes it shares with the target, and the subset of a
//! validation split that a reference model gets wrong.
//!
//! Classes are matched by stable key (WNID for ImageNet-family data), never
//! by index or display name. Builders are deterministic and write their
//! output tree through a staging directory, so re-running replaces the
//! previous result.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{scan_class_tree, strip_extension};
use crate::error::{Error, Result};
use crate::eval::PredictionSet;
use crate::filter::resize_bilinear;
use crate::fsutil::{file_stem_for_id, StagedDir};
use crate::image::Geometry;
use crate::manifest::{validate_label_space, ClassDescriptor, DatasetManifest, ItemRecord, Source};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct ClassIntersection {
    pub source_space: Vec<ClassDescriptor>,
    pub target_space: Vec<ClassDescriptor>,
    /// `(source key, target index)` in source label order.
    pub mapping: Vec<(String, usize)>,
}

impl ClassIntersection {
    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// Target index of each source index, `None` outside the intersection.
    pub fn source_to_target(&self) -> Vec<Option<usize>> {
        let map: BTreeMap<&str, usize> = self.mapping.iter().map(|(k, t)| (k.as_str(), *t)).collect();
        self.source_space.iter().map(|c| map.get(c.key.as_str()).copied()).collect()
    }
}

pub fn intersect_classes(source_space: &[ClassDescriptor], target_space: &[ClassDescriptor]) -> ClassIntersection {
    let target: BTreeMap<&str, usize> = target_space.iter().map(|c| (c.key.as_str(), c.index)).collect();
    let mapping: Vec<(String, usize)> =
        source_space.iter().filter_map(|c| target.get(c.key.as_str()).map(|&t| (c.key.clone(), t))).collect();
    if mapping.is_empty() {
        log::warn!("source and target label spaces share no class keys");
    }
    ClassIntersection { source_space: source_space.to_vec(), target_space: target_space.to_vec(), mapping }
}

/// Manifest over a `<root>/<class dir>/<image files>` tree. Class keys are
/// the directory names, or their entry in `dir_to_key` when given (for
/// trees whose directories are numeric indices). Geometry is left unset.
pub fn scan_source_tree(
    root: &Path,
    name: &str,
    dir_to_key: Option<&BTreeMap<String, String>>,
) -> Result<DatasetManifest> {
    let entries = scan_class_tree(root)?;
    let key_of = |dir: &str| -> Result<String> {
        match dir_to_key {
            None => Ok(dir.to_string()),
            Some(map) => map
                .get(dir)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("class directory {dir:?} has no entry in the key map"))),
        }
    };
    let mut keys: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    let mut dirs: Vec<&str> = entries.iter().map(|(_, d)| d.as_str()).collect();
    dirs.dedup();
    for dir in dirs {
        let key = key_of(dir)?;
        if seen.insert(key.clone()) {
            keys.push(key);
        }
    }
    keys.sort();
    let space: Vec<ClassDescriptor> = keys.iter().enumerate().map(|(i, k)| ClassDescriptor::new(i, k, k)).collect();
    let index: BTreeMap<&str, usize> = keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();

    let mut manifest = DatasetManifest::new(name, None, space);
    manifest.base_dir = root.to_path_buf();
    manifest.items = entries
        .iter()
        .map(|(rel, dir)| {
            let key = key_of(dir)?;
            Ok(ItemRecord {
                id: strip_extension(rel).to_string(),
                path: rel.clone(),
                label: index[key.as_str()],
                source: Source::Real,
                provenance: Some(name.to_string()),
            })
        })
        .collect::<Result<_>>()?;
    manifest.validate_structure()?;
    Ok(manifest)
}

fn check_stems(items: &[ItemRecord]) -> Result<Vec<String>> {
    let stems: Vec<String> = items.iter().map(|i| file_stem_for_id(&i.id)).collect();
    let mut seen = HashSet::with_capacity(stems.len());
    for (stem, item) in stems.iter().zip(items) {
        if !seen.insert(stem.as_str()) {
            return Err(Error::invalid(format!(
                "item id {:?} collides with another id after mapping to file name {stem:?}",
                item.id
            )));
        }
    }
    Ok(stems)
}

fn log_counts(manifest: &DatasetManifest) {
    let counts = manifest.class_counts();
    let populated: Vec<usize> = counts.iter().copied().filter(|&n| n > 0).collect();
    log::info!(
        "{}: {} items over {}/{} classes (min {}, max {} per populated class)",
        manifest.name,
        manifest.len(),
        populated.len(),
        counts.len(),
        populated.iter().min().unwrap_or(&0),
        populated.iter().max().unwrap_or(&0)
    );
}

/// Keeps every source item whose class is in the intersection, relabels it
/// to the target index and resamples it to `target` geometry (bilinear with
/// half-pixel centers, antialiased when shrinking by more than 2x). The
/// output label space is the full target space; items keep source order and
/// land in `out/<class key>/<item>.png` with `out/manifest.json`.
pub fn build_intersection_testset(
    source: &DatasetManifest,
    intersection: &ClassIntersection,
    target: Geometry,
    name: &str,
    out: &Path,
) -> Result<DatasetManifest> {
    target.validate()?;
    validate_label_space(&intersection.target_space)?;
    if source.label_space != intersection.source_space {
        return Err(Error::invalid(format!(
            "intersection was computed for a different label space than {}",
            source.name
        )));
    }
    let to_target = intersection.source_to_target();
    let kept: Vec<(&ItemRecord, usize)> =
        source.items.iter().filter_map(|item| to_target[item.label].map(|t| (item, t))).collect();
    if intersection.is_empty() {
        log::warn!("empty class intersection: {name} will have no items");
    }
    let records: Vec<ItemRecord> = kept.iter().map(|(item, _)| (*item).clone()).collect();
    let stems = check_stems(&records)?;

    let staged = StagedDir::create(out)?;
    let items: Vec<ItemRecord> = kept
        .par_iter()
        .zip(stems.par_iter())
        .map(|(&(item, t), stem)| {
            let img = source.load_image(item)?;
            let img = resize_bilinear(&img, target.width, target.height).with_channels(target.channels);
            let key = &intersection.target_space[t].key;
            let path = format!("{}/{stem}.png", file_stem_for_id(key));
            img.save_png(&staged.path().join(&path))?;
            Ok(ItemRecord {
                id: item.id.clone(),
                path,
                label: t,
                source: item.source,
                provenance: Some(item.provenance.clone().unwrap_or_else(|| source.name.clone())),
            })
        })
        .collect::<Result<_>>()?;

    let mut manifest = DatasetManifest::new(name, Some(target), intersection.target_space.clone());
    manifest.base_dir = staged.path().to_path_buf();
    manifest.items = items;
    manifest.save(&staged.path().join(MANIFEST_FILE))?;
    let root = staged.commit()?;
    manifest.base_dir = root;
    log_counts(&manifest);
    Ok(manifest)
}

/// Keeps exactly the items of `val` whose prediction differs from the true
/// label; images are copied byte for byte and the label space is unchanged.
pub fn build_adversarial_filter_testset(
    val: &DatasetManifest,
    preds: &PredictionSet,
    name: &str,
    out: &Path,
) -> Result<DatasetManifest> {
    val.validate_structure()?;
    preds.check_coverage(val)?;
    let wrong: Vec<&ItemRecord> = val.items.iter().filter(|item| preds.records[&item.id].pred != item.label).collect();

    let staged = StagedDir::create(out)?;
    wrong.par_iter().try_for_each(|item| -> Result<()> {
        let from = val.item_path(item);
        let to = staged.path().join(&item.path);
        if let Some(parent) = to.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::copy(&from, &to).map_err(|e| Error::io(&from, e))?;
        Ok(())
    })?;

    let mut manifest = DatasetManifest::new(name, val.geometry, val.label_space.clone());
    manifest.base_dir = staged.path().to_path_buf();
    manifest.items = wrong.into_iter().cloned().collect();
    manifest.save(&staged.path().join(MANIFEST_FILE))?;
    manifest.base_dir = staged.commit()?;
    if manifest.is_empty() {
        log::warn!("{name}: every prediction is correct, the filtered set is empty");
    }
    log_counts(&manifest);
    Ok(manifest)
}
