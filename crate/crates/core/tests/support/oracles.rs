//! Brute-force reference implementations and random instance generators.
//! Shared by the core property tests and the acceptance target.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, RngCore};
use robustkit::corruptions::{CorruptedTree, CorruptionKind, Profile};
use robustkit::eval::{AttentionDump, AttentionMeta, Prediction, PredictionSet};
use robustkit::fixtures::label_space;
use robustkit::{DatasetManifest, ImageBuffer, ItemRecord, Source};

/// Mean of every grid entry, summed cell by cell.
pub fn naive_mce(errors: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for row in errors {
        for &e in row {
            sum += e;
            count += 1;
        }
    }
    sum / count as f64
}

/// Mean over kinds of the ratio of severity sums.
pub fn naive_normalized_mce(errors: &[Vec<f64>], baseline: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for k in 0..errors.len() {
        let mut num = 0.0;
        let mut den = 0.0;
        for s in 0..errors[k].len() {
            num += errors[k][s];
            den += baseline[k][s];
        }
        acc += num / den;
    }
    acc / errors.len() as f64
}

pub fn naive_error(labels: &[usize], preds: &[usize]) -> f64 {
    let mut wrong = 0;
    for i in 0..labels.len() {
        if labels[i] != preds[i] {
            wrong += 1;
        }
    }
    100.0 * wrong as f64 / labels.len() as f64
}

/// Per-head distance from explicit token coordinates, without shared tables.
pub fn naive_attention_distance(dump: &AttentionDump) -> Vec<Vec<f64>> {
    let m = &dump.meta;
    let off = usize::from(m.cls_present);
    let t = m.tokens;
    let mut coords = Vec::new();
    for r in 0..m.rows {
        for c in 0..m.cols {
            coords.push((r as f64 * m.patch, c as f64 * m.patch));
        }
    }
    let mut out = Vec::new();
    for layer in &dump.layers {
        let mut heads = Vec::new();
        for h in 0..m.heads {
            let mut per_query = Vec::new();
            for (qi, q) in coords.iter().enumerate() {
                let mut mass = 0.0;
                let mut weighted = 0.0;
                for (ki, k) in coords.iter().enumerate() {
                    let w = f64::from(layer[h * t * t + (qi + off) * t + (ki + off)]);
                    mass += w;
                    weighted += w * ((q.0 - k.0).powi(2) + (q.1 - k.1).powi(2)).sqrt();
                }
                per_query.push(weighted / mass);
            }
            heads.push(per_query.iter().sum::<f64>() / per_query.len() as f64);
        }
        out.push(heads);
    }
    out
}

/// Two-pass population mean and std per channel over all pixels of all images.
pub fn naive_channel_stats(images: &[ImageBuffer]) -> (Vec<f64>, Vec<f64>) {
    let c = images[0].channels() as usize;
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); c];
    for img in images {
        for (i, &v) in img.as_slice().iter().enumerate() {
            values[i % c].push(f64::from(v));
        }
    }
    let mean: Vec<f64> = values.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let std = values
        .iter()
        .zip(&mean)
        .map(|(v, m)| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt())
        .collect();
    (mean, std)
}

/// Random error grid over the first `kinds` kinds and `sevs` severities.
pub fn random_grid(rng: &mut impl Rng, kinds: usize, sevs: usize) -> (Vec<CorruptionKind>, Vec<u8>, Vec<Vec<f64>>) {
    let k = CorruptionKind::ALL[..kinds].to_vec();
    let s: Vec<u8> = (1..=sevs as u8).collect();
    let errors = (0..kinds).map(|_| (0..sevs).map(|_| rng.random_range(0.5..100.0)).collect()).collect();
    (k, s, errors)
}

/// Random attention dump with strictly positive rows summing to 1.
pub fn random_dump(
    rng: &mut impl Rng,
    layers: usize,
    heads: usize,
    rows: usize,
    cols: usize,
    cls: bool,
) -> AttentionDump {
    let t = rows * cols + usize::from(cls);
    let meta = AttentionMeta {
        layers,
        heads,
        tokens: t,
        rows,
        cols,
        patch: [4.0, 8.0, 16.0][rng.random_range(0..3)],
        cls_present: cls,
        dtype: "f32le".into(),
    };
    let data = (0..layers)
        .map(|_| {
            let mut layer = Vec::with_capacity(heads * t * t);
            for _ in 0..heads * t {
                // Some rows concentrate mass on a single key.
                let peaked = rng.random_bool(0.2);
                let hot = rng.random_range(0..t);
                let raw: Vec<f64> = (0..t)
                    .map(|k| {
                        let w = rng.random_range(0.01..1.0);
                        if peaked && k == hot {
                            w * 50.0
                        } else {
                            w
                        }
                    })
                    .collect();
                let total: f64 = raw.iter().sum();
                layer.extend(raw.iter().map(|w| (w / total) as f32));
            }
            layer
        })
        .collect();
    AttentionDump::new(meta, data).expect("generated dump is valid")
}

/// Manifest of `n` image-less items over `k` classes with random labels.
pub fn random_cell_manifest(rng: &mut impl Rng, name: &str, n: usize, k: usize) -> DatasetManifest {
    let mut m = DatasetManifest::new(name, None, label_space(k, "c"));
    for i in 0..n {
        m.items.push(ItemRecord {
            id: format!("item_{i:04}"),
            path: format!("item_{i:04}.png"),
            label: rng.random_range(0..k),
            source: Source::Real,
            provenance: None,
        });
    }
    m
}

/// Predictions for `m` where each item is wrong with probability `p_wrong`.
pub fn random_preds(rng: &mut impl Rng, m: &DatasetManifest, p_wrong: f64) -> PredictionSet {
    let k = m.num_classes();
    let mut preds = PredictionSet::new("model", &m.name);
    for item in &m.items {
        let pred =
            if k > 1 && rng.random_bool(p_wrong) { (item.label + rng.random_range(1..k)) % k } else { item.label };
        preds.insert(&item.id, Prediction::new(pred)).unwrap();
    }
    preds
}

pub fn labels_and_preds(m: &DatasetManifest, p: &PredictionSet) -> (Vec<usize>, Vec<usize>) {
    let labels = m.items.iter().map(|i| i.label).collect();
    let preds = m.items.iter().map(|i| p.records[&i.id].pred).collect();
    (labels, preds)
}

pub type CellPredictions = BTreeMap<(CorruptionKind, u8), PredictionSet>;

/// Writes an image-less corrupted tree (index plus per-cell manifests) at
/// `root` and returns it with random predictions and the brute-force grid.
pub fn random_tree_on_disk(rng: &mut impl RngCore, root: &Path) -> (CorruptedTree, CellPredictions, Vec<Vec<f64>>) {
    let kinds: Vec<CorruptionKind> = {
        let n = rng.random_range(1..=4);
        let mut all = CorruptionKind::ALL.to_vec();
        let mut picked = Vec::new();
        for _ in 0..n {
            picked.push(all.remove(rng.random_range(0..all.len())));
        }
        picked.sort();
        picked
    };
    let severities: Vec<u8> = (1..=rng.random_range(1..=5u8)).collect();
    let n_items = rng.random_range(1..=30);
    let k = rng.random_range(2..=6);
    let p_wrong = rng.random_range(0.0..1.0);
    let tree = CorruptedTree {
        root: root.to_path_buf(),
        source_name: "fixture".into(),
        profile: Profile::Natural,
        seed: 0,
        kinds: kinds.clone(),
        severities: severities.clone(),
        item_count: n_items,
        image_count: 0,
        params_version: "test".into(),
        toolkit_version: robustkit::VERSION.into(),
    };
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(root.join("index.json"), serde_json::to_string(&tree).unwrap()).unwrap();
    let mut preds = BTreeMap::new();
    let mut expected = Vec::new();
    for &kind in &kinds {
        let mut row = Vec::new();
        for &s in &severities {
            let mut cell = random_cell_manifest(rng, &format!("{kind}_{s}"), n_items, k);
            cell.save(&tree.cell_manifest_path(kind, s)).unwrap();
            let p = random_preds(rng, &cell, p_wrong);
            let (labels, ps) = labels_and_preds(&cell, &p);
            row.push(naive_error(&labels, &ps));
            preds.insert((kind, s), p);
        }
        expected.push(row);
    }
    (CorruptedTree::load(root).unwrap(), preds, expected)
}
