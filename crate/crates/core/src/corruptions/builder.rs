use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kind::{CorruptionKind, CorruptionSpec, Profile, SEVERITIES};
use super::Corruptor;
use crate::error::{Error, Result};
use crate::fsutil::{file_stem_for_id, write_atomic, StagedDir};
use crate::manifest::{load_manifest, DatasetManifest, ItemRecord, Validation};
use crate::rng::cell_key;

pub const INDEX_FILE: &str = "index.json";
const CELL_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub profile: Profile,
    pub seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

/// Descriptor of a corrupted test-set tree, stored as `index.json` at its root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptedTree {
    #[serde(skip)]
    pub root: PathBuf,
    pub source_name: String,
    pub profile: Profile,
    pub seed: u64,
    pub kinds: Vec<CorruptionKind>,
    pub severities: Vec<u8>,
    pub item_count: usize,
    pub image_count: usize,
    pub params_version: String,
    pub toolkit_version: String,
}

impl CorruptedTree {
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(INDEX_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut tree: CorruptedTree = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { context: path.display().to_string(), message: e.to_string() })?;
        tree.root = root.to_path_buf();
        Ok(tree)
    }

    pub fn cell_dir(&self, kind: CorruptionKind, severity: u8) -> PathBuf {
        self.root.join(kind.name()).join(severity.to_string())
    }

    pub fn cell_manifest_path(&self, kind: CorruptionKind, severity: u8) -> PathBuf {
        self.cell_dir(kind, severity).join(CELL_MANIFEST)
    }

    pub fn load_cell(&self, kind: CorruptionKind, severity: u8) -> Result<DatasetManifest> {
        load_manifest(&self.cell_manifest_path(kind, severity), Validation::Structure)
    }

    pub fn cells(&self) -> impl Iterator<Item = (CorruptionKind, u8)> + '_ {
        self.kinds.iter().flat_map(move |&k| self.severities.iter().map(move |&s| (k, s)))
    }
}

/// Writes `out/<kind>/<severity>/<item>.png` for every item, kind of the
/// profile and severity, plus a manifest per cell and `index.json`.
///
/// Each image is corrupted with seed `hash64(seed, item id, kind, severity)`,
/// so the tree is identical for any thread count or processing order. The
/// tree is assembled in `<out>.partial` and moved into place at the end.
pub fn build_corrupted_testset(
    manifest: &DatasetManifest,
    corruptor: &Corruptor,
    options: BuildOptions,
    out: &Path,
) -> Result<CorruptedTree> {
    manifest.validate_structure()?;
    let stems: Vec<String> = manifest.items.iter().map(|i| file_stem_for_id(&i.id)).collect();
    let mut seen = HashSet::with_capacity(stems.len());
    for (stem, item) in stems.iter().zip(&manifest.items) {
        if !seen.insert(stem.as_str()) {
            return Err(Error::invalid(format!(
                "item id {:?} collides with another id after mapping to file name {stem:?}",
                item.id
            )));
        }
    }

    let kinds = options.profile.kinds();
    let staged = StagedDir::create(out)?;
    for kind in &kinds {
        for s in SEVERITIES {
            let dir = staged.path().join(kind.name()).join(s.to_string());
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        manifest.items.par_iter().zip(stems.par_iter()).try_for_each(|(item, stem)| -> Result<()> {
            let clean = manifest.load_image(item)?;
            if let Some(g) = manifest.geometry {
                if clean.geometry() != g {
                    return Err(Error::GeometryMismatch {
                        expected: g.to_string(),
                        found: format!("{} for item {:?}", clean.geometry(), item.id),
                    });
                }
            }
            for &kind in &kinds {
                for severity in SEVERITIES {
                    let spec =
                        CorruptionSpec::new(kind, severity, cell_key(options.seed, &item.id, kind.name(), severity));
                    let img = corruptor.apply(&clean, &spec)?;
                    let path = staged.path().join(kind.name()).join(severity.to_string()).join(format!("{stem}.png"));
                    img.save_png(&path)?;
                }
            }
            Ok(())
        })
    })?;

    for &kind in &kinds {
        for severity in SEVERITIES {
            let dir = staged.path().join(kind.name()).join(severity.to_string());
            let mut cell = DatasetManifest::new(
                format!("{}-{}-{severity}", manifest.name, kind.name()),
                manifest.geometry,
                manifest.label_space.clone(),
            );
            cell.base_dir = dir.clone();
            cell.items = manifest
                .items
                .iter()
                .zip(&stems)
                .map(|(item, stem)| ItemRecord { path: format!("{stem}.png"), ..item.clone() })
                .collect();
            cell.save(&dir.join(CELL_MANIFEST))?;
        }
    }

    let mut tree = CorruptedTree {
        root: PathBuf::new(),
        source_name: manifest.name.clone(),
        profile: options.profile,
        seed: options.seed,
        kinds: kinds.clone(),
        severities: SEVERITIES.to_vec(),
        item_count: manifest.len(),
        image_count: manifest.len() * kinds.len() * SEVERITIES.len(),
        params_version: corruptor.table().version().to_string(),
        toolkit_version: crate::VERSION.to_string(),
    };
    let mut index = serde_json::to_string_pretty(&tree).expect("index serializes");
    index.push('\n');
    write_atomic(&staged.path().join(INDEX_FILE), index.as_bytes())?;
    tree.root = staged.commit()?;
    // Cell manifests were saved with their staging location as base.
    Ok(tree)
}
