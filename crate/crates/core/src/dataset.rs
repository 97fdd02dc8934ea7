//! Operations over whole datasets: channel statistics, stratified
//! subsetting, ingestion of generated images and real/generated mixing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{common_ancestor, path_to_slash, relative_path, resolve_dir};
use crate::image::{Geometry, ImageBuffer};
use crate::manifest::{validate_label_space, ClassDescriptor, DatasetManifest, ItemRecord, Source};
use crate::rng::{rng_from_key, KeyHasher};

/// Round half to even, used for every count derived from a fraction.
pub fn round_count(x: f64) -> usize {
    x.round_ties_even().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Count, mean and sum of squared deviations per channel.
#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn of_image(img: &ImageBuffer) -> Self {
        let c = img.channels() as usize;
        let n = img.geometry().pixel_count() as f64;
        let mut mean = vec![0.0; c];
        for px in img.as_slice().chunks_exact(c) {
            for (m, &v) in mean.iter_mut().zip(px) {
                *m += f64::from(v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut m2 = vec![0.0; c];
        for px in img.as_slice().chunks_exact(c) {
            for ((acc, &v), m) in m2.iter_mut().zip(px).zip(&mean) {
                let d = f64::from(v) - m;
                *acc += d * d;
            }
        }
        Self { n, mean, m2 }
    }

    fn merge(a: &Moments, b: &Moments) -> Moments {
        let n = a.n + b.n;
        let mut mean = Vec::with_capacity(a.mean.len());
        let mut m2 = Vec::with_capacity(a.mean.len());
        for c in 0..a.mean.len() {
            let delta = b.mean[c] - a.mean[c];
            mean.push(a.mean[c] + delta * b.n / n);
            m2.push(a.m2[c] + b.m2[c] + delta * delta * a.n * b.n / n);
        }
        Moments { n, mean, m2 }
    }
}

/// Fixed-shape pairwise reduction, so the result never depends on how the
/// per-item work was scheduled.
fn pairwise(parts: &[Moments]) -> Moments {
    match parts.len() {
        1 => parts[0].clone(),
        n => {
            let (l, r) = parts.split_at(n / 2);
            Moments::merge(&pairwise(l), &pairwise(r))
        }
    }
}

/// Population mean and standard deviation per channel over every pixel of
/// every image.
pub fn channel_stats_of_images(images: &[ImageBuffer]) -> Result<ChannelStats> {
    let first = images.first().ok_or_else(|| Error::invalid("cannot compute statistics of an empty dataset"))?;
    let channels = first.channels();
    if let Some(bad) = images.iter().find(|i| i.channels() != channels) {
        return Err(Error::GeometryMismatch {
            expected: format!("{channels} channels"),
            found: format!("{} channels", bad.channels()),
        });
    }
    let parts: Vec<Moments> = images.par_iter().map(Moments::of_image).collect();
    Ok(finish(pairwise(&parts)))
}

fn finish(m: Moments) -> ChannelStats {
    ChannelStats { std: m.m2.iter().map(|s| (s / m.n).max(0.0).sqrt()).collect(), mean: m.mean }
}

pub fn compute_channel_stats(manifest: &DatasetManifest) -> Result<ChannelStats> {
    if manifest.is_empty() {
        return Err(Error::invalid(format!(
            "manifest {:?} is empty; statistics need at least one item",
            manifest.name
        )));
    }
    let parts: Vec<Moments> = manifest
        .items
        .par_iter()
        .map(|item| {
            let img = manifest.load_image(item)?;
            if let Some(g) = manifest.geometry {
                if img.geometry() != g {
                    return Err(Error::GeometryMismatch {
                        expected: g.to_string(),
                        found: format!("{} for item {:?}", img.geometry(), item.id),
                    });
                }
            }
            Ok(Moments::of_image(&img))
        })
        .collect::<Result<_>>()?;
    let channels = parts[0].mean.len();
    if parts.iter().any(|p| p.mean.len() != channels) {
        return Err(Error::invalid("images disagree on channel count"));
    }
    Ok(finish(pairwise(&parts)))
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction {fraction} outside (0, 1]")));
    }
    Ok(())
}

fn sample_sorted(key: u64, n: usize, k: usize) -> Vec<usize> {
    let mut rng = rng_from_key(key);
    let mut picked = index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Groups item positions by label, preserving manifest order within a class.
fn positions_by_class(manifest: &DatasetManifest) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); manifest.num_classes()];
    for (pos, item) in manifest.items.iter().enumerate() {
        groups[item.label].push(pos);
    }
    groups
}

/// Random subset keeping `round(fraction * n_c)` items of every class.
/// With `stratify = false` the subset is drawn uniformly over all items.
pub fn stratified_subset(
    manifest: &DatasetManifest,
    fraction: f64,
    seed: u64,
    stratify: bool,
) -> Result<DatasetManifest> {
    check_fraction(fraction)?;
    let mut keep: Vec<usize> = if stratify {
        let mut keep = Vec::new();
        for (class, positions) in manifest.label_space.iter().zip(positions_by_class(manifest)) {
            if positions.is_empty() {
                return Err(Error::invalid(format!(
                    "class {:?} has no items; stratified subsetting needs every class populated",
                    class.key
                )));
            }
            let k = round_count(fraction * positions.len() as f64);
            if k == 0 {
                return Err(Error::invalid(format!(
                    "class {:?} emptied by rounding ({} items x {fraction})",
                    class.key,
                    positions.len()
                )));
            }
            let key = KeyHasher::new(seed).str("subset").str(&class.key).finish();
            keep.extend(sample_sorted(key, positions.len(), k).into_iter().map(|i| positions[i]));
        }
        keep
    } else {
        let k = round_count(fraction * manifest.len() as f64);
        let key = KeyHasher::new(seed).str("subset-uniform").finish();
        sample_sorted(key, manifest.len(), k)
    };
    keep.sort_unstable();
    let mut out = manifest.clone();
    out.name = format!("{}@{fraction}", manifest.name);
    out.items = keep.into_iter().map(|p| manifest.items[p].clone()).collect();
    Ok(out)
}

/// Where the class of each generated image comes from.
#[derive(Debug, Clone)]
pub enum Labeling {
    /// `<dir>/<class_key>/<image files>`
    Subdirectories,
    /// Lines of `relative/path<TAB>class_key`.
    MapFile(PathBuf),
}

fn is_image_file(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    Ok(entries)
}

/// Lists `(relative path, class key)` pairs of a per-class directory tree.
pub fn scan_class_tree(root: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for class_dir in sorted_entries(root)? {
        if !class_dir.is_dir() {
            continue;
        }
        let key = class_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let mut stack = vec![class_dir.clone()];
        while let Some(dir) = stack.pop() {
            for entry in sorted_entries(&dir)? {
                if entry.is_dir() {
                    stack.push(entry);
                } else if is_image_file(&entry) {
                    let rel = relative_path(&entry, root);
                    out.push((path_to_slash(&rel), key.clone()));
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_label_map(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            line.split_once('\t').map(|(p, k)| (p.trim().to_string(), k.trim().to_string())).ok_or_else(|| {
                Error::Parse {
                    context: format!("{}:{}", path.display(), n + 1),
                    message: "expected `relative/path<TAB>class_key`".into(),
                }
            })
        })
        .collect()
}

pub(crate) fn strip_extension(path: &str) -> &str {
    match path.rfind('.') {
        Some(dot) if !path[dot..].contains('/') => &path[..dot],
        _ => path,
    }
}

/// Builds a manifest of generated images, resolving every label key against
/// the downstream label space. Any key outside that space rejects the whole
/// ingest.
pub fn ingest_generated(
    image_dir: &Path,
    labeling: &Labeling,
    target_space: &[ClassDescriptor],
    name: &str,
    provenance: Option<&str>,
) -> Result<DatasetManifest> {
    validate_label_space(target_space)?;
    let entries = match labeling {
        Labeling::Subdirectories => scan_class_tree(image_dir)?,
        Labeling::MapFile(map) => read_label_map(map)?,
    };
    let keys: BTreeMap<&str, usize> = target_space.iter().map(|c| (c.key.as_str(), c.index)).collect();
    if let Some((_, bad)) = entries.iter().find(|(_, k)| !keys.contains_key(k.as_str())) {
        return Err(Error::UnknownClassKey(bad.clone()));
    }

    let geometries: Vec<Geometry> = entries
        .par_iter()
        .map(|(rel, _)| ImageBuffer::open(&image_dir.join(rel)).map(|img| img.geometry()))
        .collect::<Result<_>>()?;
    let geometry = geometries.first().copied();
    if let Some(g) = geometry {
        if let Some((pos, other)) = geometries.iter().enumerate().find(|(_, o)| **o != g) {
            return Err(Error::GeometryMismatch {
                expected: g.to_string(),
                found: format!("{other} for {}", entries[pos].0),
            });
        }
    }

    let mut manifest = DatasetManifest::new(name, geometry, target_space.to_vec());
    manifest.base_dir = image_dir.to_path_buf();
    manifest.items = entries
        .iter()
        .map(|(rel, key)| ItemRecord {
            id: strip_extension(rel).to_string(),
            path: rel.clone(),
            label: keys[key.as_str()],
            source: Source::Generated,
            provenance: provenance.map(str::to_string),
        })
        .collect();
    manifest.validate_structure()?;
    if manifest.is_empty() {
        log::warn!("no generated images found under {}", image_dir.display());
    } else {
        let populated = manifest.class_counts().iter().filter(|&&n| n > 0).count();
        log::info!("ingested {} generated images over {populated}/{} classes", manifest.len(), manifest.num_classes());
    }
    Ok(manifest)
}

/// Amount of generated data added by [`mix_datasets`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Take {
    Count(usize),
    /// Fraction of the real set size.
    Ratio(f64),
}

/// Splits `total` across classes proportionally to `counts` by largest
/// remainder; ties go to the lower class index.
fn proportional_quotas(counts: &[usize], total: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    if n == 0 || total == 0 {
        return vec![0; counts.len()];
    }
    let mut quotas: Vec<usize> = counts.iter().map(|&c| c * total / n).collect();
    let mut remainders: Vec<(usize, usize)> = counts.iter().enumerate().map(|(i, &c)| ((c * total) % n, i)).collect();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let missing = total - quotas.iter().sum::<usize>();
    for &(_, i) in remainders.iter().take(missing) {
        quotas[i] += 1;
    }
    quotas
}

/// Concatenates every real item with `take` class-stratified generated items.
/// Item ids are prefixed with `real/` or `gen/`.
pub fn mix_datasets(
    real: &DatasetManifest,
    generated: &DatasetManifest,
    take: Take,
    seed: u64,
) -> Result<DatasetManifest> {
    if !real.same_label_space(generated) {
        return Err(Error::invalid(
            "label spaces differ: real and generated manifests must list the same keys in the same order",
        ));
    }
    if !generated.is_empty() && real.geometry != generated.geometry {
        return Err(Error::GeometryMismatch {
            expected: fmt_geometry(real.geometry),
            found: fmt_geometry(generated.geometry),
        });
    }
    let n_gen = generated.len();
    let take = match take {
        Take::Count(n) => n,
        Take::Ratio(r) => {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::invalid(format!("ratio {r} must be a non-negative number")));
            }
            round_count(r * real.len() as f64)
        }
    };
    if take > n_gen {
        return Err(Error::invalid(format!("take {take} exceeds the {n_gen} available generated items")));
    }

    let groups = positions_by_class(generated);
    let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
    let quotas = proportional_quotas(&counts, take);
    let mut chosen = Vec::with_capacity(take);
    for ((class, positions), quota) in generated.label_space.iter().zip(&groups).zip(quotas) {
        let key = KeyHasher::new(seed).str("mix").str(&class.key).finish();
        chosen.extend(sample_sorted(key, positions.len(), quota).into_iter().map(|i| positions[i]));
    }
    chosen.sort_unstable();

    let real_root = resolve_dir(&real.image_root());
    let gen_root = resolve_dir(&generated.image_root());
    let root = if chosen.is_empty() { real_root.clone() } else { common_ancestor(&real_root, &gen_root) };
    let real_prefix = relative_path(&real_root, &root);
    let gen_prefix = relative_path(&gen_root, &root);
    let rebase = |prefix: &Path, path: &str| path_to_slash(&prefix.join(path));

    let mut out =
        DatasetManifest::new(format!("{}+{}", real.name, generated.name), real.geometry, real.label_space.clone());
    out.base_dir = root;
    out.items.reserve(real.len() + take);
    out.items.extend(real.items.iter().map(|item| ItemRecord {
        id: format!("real/{}", item.id),
        path: rebase(&real_prefix, &item.path),
        ..item.clone()
    }));
    out.items.extend(chosen.into_iter().map(|p| {
        let item = &generated.items[p];
        ItemRecord { id: format!("gen/{}", item.id), path: rebase(&gen_prefix, &item.path), ..item.clone() }
    }));
    out.validate_structure()?;
    Ok(out)
}

fn fmt_geometry(g: Option<Geometry>) -> String {
    g.map_or_else(|| "unconstrained".to_string(), |g| g.to_string())
}
