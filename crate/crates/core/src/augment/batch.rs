use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use super::augmix::{augmix, AugmixConfig};
use super::mixing::{cutmix, cutmix_mixup_switch, mixup, MixAudit, MixBranch, MixPair, SoftLabel, SwitchConfig};
use crate::error::{Error, Result};
use crate::fsutil::{file_stem_for_id, write_atomic, StagedDir};
use crate::manifest::{DatasetManifest, ItemRecord};
use crate::rng::{item_key, rng_from_key, KeyHasher};

pub const SOFT_LABEL_FILE: &str = "soft_labels.tsv";
pub const AUDIT_FILE: &str = "mix_audit.tsv";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentOp {
    Mixup { alpha: f64 },
    Cutmix { alpha: f64 },
    Switch(SwitchConfig),
    Augmix(AugmixConfig),
}

impl AugmentOp {
    pub fn name(&self) -> &'static str {
        match self {
            AugmentOp::Mixup { .. } => "mixup",
            AugmentOp::Cutmix { .. } => "cutmix",
            AugmentOp::Switch(_) => "switch",
            AugmentOp::Augmix(_) => "augmix",
        }
    }

    fn pairs(&self) -> bool {
        !matches!(self, AugmentOp::Augmix(_))
    }
}

/// Augmented copy of a dataset: the new manifest, one soft label per item
/// (one-hot for AugMix) and, for the switched op, the branch audit.
#[derive(Debug, Clone)]
pub struct AugmentedSet {
    pub manifest: DatasetManifest,
    pub soft_labels: Vec<(String, SoftLabel)>,
    pub audits: Vec<(String, MixAudit)>,
}

/// Partner of item `index` for pairwise ops, never the item itself.
fn partner(seed: u64, id: &str, index: usize, n: usize) -> usize {
    let mut rng = rng_from_key(KeyHasher::new(seed).str(id).str("partner").finish());
    let j = rng.random_range(0..n - 1);
    if j >= index {
        j + 1
    } else {
        j
    }
}

/// Writes `out/<item>.png` for every item plus `manifest.json`,
/// `soft_labels.tsv` and, for the switched op, `mix_audit.tsv`. Item `i` uses
/// key `hash64(seed, id)`; pairwise ops draw its partner from the same set.
/// The manifest keeps each item's own label in the integer label field.
pub fn augment_dataset(
    manifest: &DatasetManifest,
    op: AugmentOp,
    seed: u64,
    name: &str,
    out: &Path,
) -> Result<AugmentedSet> {
    manifest.validate_structure()?;
    let n = manifest.len();
    if op.pairs() && n < 2 {
        return Err(Error::invalid(format!("{} needs at least two items to pair", op.name())));
    }
    if op.pairs() && manifest.geometry.is_none() {
        return Err(Error::invalid(format!("{} needs a dataset with one fixed geometry", op.name())));
    }
    let stems: Vec<String> = manifest.items.iter().map(|i| file_stem_for_id(&i.id)).collect();
    let mut unique = std::collections::HashSet::new();
    if let Some(dup) = stems.iter().find(|s| !unique.insert(s.as_str())) {
        return Err(Error::invalid(format!("two item ids map to file name {dup:?}")));
    }
    let k = manifest.num_classes();
    let staged = StagedDir::create(out)?;

    let results: Vec<(SoftLabel, Option<MixAudit>)> = manifest
        .items
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let key = item_key(seed, &item.id);
            let a = manifest.load_image(item)?;
            let (img, label, audit) = if op.pairs() {
                let other = &manifest.items[partner(seed, &item.id, i, n)];
                let b = manifest.load_image(other)?;
                let pair = MixPair { a: &a, label_a: item.label, b: &b, label_b: other.label, num_classes: k };
                match op {
                    AugmentOp::Mixup { alpha } => {
                        let (img, label) = mixup(pair, alpha, key)?;
                        (img, label, None)
                    }
                    AugmentOp::Cutmix { alpha } => {
                        let (img, label) = cutmix(pair, alpha, key)?;
                        (img, label, None)
                    }
                    AugmentOp::Switch(cfg) => {
                        let (img, label, audit) = cutmix_mixup_switch(pair, cfg, key)?;
                        (img, label, Some(audit))
                    }
                    AugmentOp::Augmix(_) => unreachable!("augmix is not pairwise"),
                }
            } else {
                let AugmentOp::Augmix(cfg) = op else { unreachable!("pairwise ops handled above") };
                (augmix(&a, &cfg, key)?, SoftLabel::one_hot(k, item.label)?, None)
            };
            img.save_png(&staged.path().join(format!("{}.png", stems[i])))?;
            Ok((label, audit))
        })
        .collect::<Result<_>>()?;

    let mut out_manifest = DatasetManifest::new(name, manifest.geometry, manifest.label_space.clone());
    out_manifest.base_dir = staged.path().to_path_buf();
    out_manifest.items = manifest
        .items
        .iter()
        .zip(&stems)
        .map(|(item, stem)| ItemRecord {
            path: format!("{stem}.png"),
            provenance: Some(format!("{}:{}", op.name(), item.provenance.as_deref().unwrap_or(&manifest.name))),
            ..item.clone()
        })
        .collect();

    let mut sidecar = String::new();
    let mut audit_file = String::new();
    let mut soft_labels = Vec::with_capacity(n);
    let mut audits = Vec::new();
    for (item, (label, audit)) in manifest.items.iter().zip(results) {
        let _ = writeln!(sidecar, "{}\t{}", item.id, label.to_sidecar());
        if let Some(a) = audit {
            let branch = match a.branch {
                MixBranch::Mixup => "mixup",
                MixBranch::Cutmix => "cutmix",
            };
            let _ = writeln!(audit_file, "{}\t{branch}\t{}", item.id, a.lambda);
            audits.push((item.id.clone(), a));
        }
        soft_labels.push((item.id.clone(), label));
    }
    write_atomic(&staged.path().join(SOFT_LABEL_FILE), sidecar.as_bytes())?;
    if matches!(op, AugmentOp::Switch(_)) {
        write_atomic(&staged.path().join(AUDIT_FILE), audit_file.as_bytes())?;
    }
    out_manifest.save(&staged.path().join("manifest.json"))?;
    out_manifest.base_dir = staged.commit()?;
    Ok(AugmentedSet { manifest: out_manifest, soft_labels, audits })
}

/// Parses a sidecar file back into `(item id, soft label)` pairs.
pub fn read_soft_labels(text: &str, num_classes: usize) -> Result<Vec<(String, SoftLabel)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, line)| {
            let bad =
                |m: &str| Error::Parse { context: format!("{SOFT_LABEL_FILE}:{}", n + 1), message: m.to_string() };
            let (id, rest) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            let mut weights = vec![0.0; num_classes];
            for part in rest.split(',') {
                let (c, w) = part.split_once(':').ok_or_else(|| bad("expected class:weight"))?;
                let c: usize = c.parse().map_err(|_| bad("bad class index"))?;
                let w: f64 = w.parse().map_err(|_| bad("bad weight"))?;
                *weights.get_mut(c).ok_or_else(|| bad("class index out of range"))? += w;
            }
            Ok((id.to_string(), SoftLabel { weights }))
        })
        .collect()
}
