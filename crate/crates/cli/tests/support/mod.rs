//! Helpers for driving the `robustkit` binary from tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::ffi::OsStr;
use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

use robustkit::corruptions::CorruptedTree;
use robustkit::filter::resize_bilinear;
use robustkit::{DatasetManifest, ImageBuffer};
use sha2::{Digest, Sha256};

pub fn robustkit<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_robustkit"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("robustkit binary runs")
}

/// Runs the binary and returns stdout, or an error naming the exit code and
/// stderr.
pub fn robustkit_ok<I, S>(args: I) -> Result<String, String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    let args: Vec<_> = args.into_iter().map(|a| a.as_ref().to_os_string()).collect();
    let out = robustkit(&args);
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "robustkit {:?} exited with {:?}: {}",
            args,
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// SHA-256 of every file below `root`, keyed by its relative path.
pub fn tree_digest(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                let mut h = Sha256::new();
                h.update(std::fs::read(&p).unwrap());
                out.insert(rel, format!("{:x}", h.finalize()));
            }
        }
    }
    out
}

/// Nearest-class-mean classifier on 4x4 thumbnails: a stand-in model whose
/// predictions depend on image content.
pub struct Centroids {
    means: Vec<Vec<f64>>,
}

fn features(img: &ImageBuffer) -> Vec<f64> {
    resize_bilinear(&img.to_rgb(), 4, 4).as_slice().iter().map(|&v| f64::from(v)).collect()
}

impl Centroids {
    pub fn fit(train: &DatasetManifest) -> Self {
        let k = train.num_classes();
        let mut sums = vec![vec![0.0; 48]; k];
        let mut counts = vec![0usize; k];
        for item in &train.items {
            let f = features(&train.load_image(item).unwrap());
            for (s, v) in sums[item.label].iter_mut().zip(f) {
                *s += v;
            }
            counts[item.label] += 1;
        }
        let means =
            sums.into_iter().zip(counts).map(|(s, n)| s.into_iter().map(|v| v / n.max(1) as f64).collect()).collect();
        Self { means }
    }

    pub fn predict(&self, img: &ImageBuffer) -> usize {
        let f = features(img);
        let dist = |m: &Vec<f64>| m.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        (0..self.means.len()).min_by(|&a, &b| dist(&self.means[a]).total_cmp(&dist(&self.means[b]))).unwrap()
    }
}

/// `item_id,label,pred` CSV for every model over one manifest; the images
/// are decoded once.
pub fn write_predictions(m: &DatasetManifest, models: &[(&Centroids, &Path)]) {
    let mut texts: Vec<String> = models.iter().map(|_| String::from("item_id,label,pred\n")).collect();
    for item in &m.items {
        let img = m.load_image(item).unwrap();
        for ((model, _), text) in models.iter().zip(&mut texts) {
            let _ = writeln!(text, "{},{},{}", item.id, item.label, model.predict(&img));
        }
    }
    for ((_, path), text) in models.iter().zip(texts) {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, text).unwrap();
    }
}

/// Clean and per-cell prediction files for each model: `<dir>/clean.csv` and
/// `<dir>/cells/<kind>/<severity>.csv`.
pub fn predict_tree(clean: &DatasetManifest, tree: &CorruptedTree, models: &[(&Centroids, &Path)]) {
    let clean_targets: Vec<_> = models.iter().map(|(m, d)| (*m, d.join("clean.csv"))).collect();
    write_predictions(clean, &clean_targets.iter().map(|(m, p)| (*m, p.as_path())).collect::<Vec<_>>());
    for (kind, s) in tree.cells() {
        let cell = tree.load_cell(kind, s).unwrap();
        let targets: Vec<_> =
            models.iter().map(|(m, d)| (*m, d.join("cells").join(kind.name()).join(format!("{s}.csv")))).collect();
        write_predictions(&cell, &targets.iter().map(|(m, p)| (*m, p.as_path())).collect::<Vec<_>>());
    }
}
