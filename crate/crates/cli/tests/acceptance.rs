//! Acceptance suite. Prints one PASS / FAIL / SKIP line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Criteria 1 and 2 need the real source datasets, located through
//! environment variables:
//!
//! * `ROBUSTKIT_TINY_WNIDS`: target label space, one class key per line.
//! * `ROBUSTKIT_IMAGENETV2` and `ROBUSTKIT_IMAGENETV2_KEYMAP`: the
//!   `<class index>/<images>` tree and its `index<TAB>wnid` map.
//! * `ROBUSTKIT_IMAGENET_R`: the `<wnid>/<images>` tree.
//! * `ROBUSTKIT_TINY_VAL` and `ROBUSTKIT_RESNET18_PREDS`: validation
//!   manifest and the reference model's prediction CSV.
//!
//! Without them those parts are reported as SKIP and scaled fixture
//! versions of the same checks run instead.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;
mod support;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustkit::augment::{
    augmix_with_m, cutmix_mixup_switch, cutmix_with_box, mixup_with_lambda, AugmixConfig, BoxRegion, MixBranch,
    MixPair, SwitchConfig,
};
use robustkit::corruptions::{apply_corruption, CorruptedTree, CorruptionKind, CorruptionSpec, SEVERITIES};
use robustkit::eval::{
    clean_error, corruption_error_matrix, delta_row, mce, mean_attention_distance, AttentionDump, AttentionMeta,
    CorruptionErrorMatrix, EvalReport,
};
use robustkit::fixtures::{fixture_image, fixture_set, label_space, write_class_tree, write_fixture_dataset};
use robustkit::manifest::{load_manifest, Validation};
use robustkit::rng::cell_key;
use robustkit::{ChannelStats, DatasetManifest, Geometry, ImageBuffer, Source};

use support::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Verdict {
    status: Status,
    detail: String,
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn env_path(name: &str) -> Option<PathBuf> {
    std::env::var_os(name).map(PathBuf::from).filter(|p| p.exists())
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

/// `(items, populated classes, min, max)` over populated classes.
fn shape(m: &DatasetManifest) -> (usize, usize, usize, usize) {
    let populated: Vec<usize> = m.class_counts().into_iter().filter(|&n| n > 0).collect();
    (
        m.len(),
        populated.len(),
        populated.iter().copied().min().unwrap_or(0),
        populated.iter().copied().max().unwrap_or(0),
    )
}

fn check_shape(what: &str, m: &DatasetManifest, want: (usize, usize, usize, usize)) -> Check {
    let got = shape(m);
    ensure(got == want, || format!("{what}: (items, classes, min, max) = {got:?}, expected {want:?}"))?;
    Ok(format!("{what} {}/{}/{}-{}", got.0, got.1, got.2, got.3))
}

// ---- Criterion 1 and 2: test-set builders and channel statistics ----------

struct RealSources {
    wnids: PathBuf,
    v2: Option<(PathBuf, PathBuf)>,
    r: Option<PathBuf>,
    a: Option<(PathBuf, PathBuf)>,
}

fn real_sources() -> Option<RealSources> {
    let wnids = env_path("ROBUSTKIT_TINY_WNIDS")?;
    Some(RealSources {
        wnids,
        v2: env_path("ROBUSTKIT_IMAGENETV2").zip(env_path("ROBUSTKIT_IMAGENETV2_KEYMAP")),
        r: env_path("ROBUSTKIT_IMAGENET_R"),
        a: env_path("ROBUSTKIT_TINY_VAL").zip(env_path("ROBUSTKIT_RESNET18_PREDS")),
    })
}

fn timed_build(args: &[&std::ffi::OsStr], limit: Duration, out: &Path) -> Result<(DatasetManifest, Duration), String> {
    let start = Instant::now();
    robustkit_ok(args)?;
    let took = start.elapsed();
    ensure(took < limit, || format!("took {}, limit {}", secs(took), secs(limit)))?;
    let m = load_manifest(&out.join("manifest.json"), Validation::Structure).map_err(|e| e.to_string())?;
    Ok((m, took))
}

fn build_v2_args<'a>(
    source: &'a Path,
    key_map: Option<&'a Path>,
    target: &'a Path,
    out: &'a Path,
) -> Vec<&'a std::ffi::OsStr> {
    let mut args: Vec<&std::ffi::OsStr> = vec!["build-v2".as_ref(), "--source".as_ref(), source.as_os_str()];
    if let Some(k) = key_map {
        args.extend(["--key-map".as_ref(), k.as_os_str()]);
    }
    args.extend([
        "--target".as_ref(),
        target.as_os_str(),
        "--geometry".as_ref(),
        "64x64x3".as_ref(),
        "--out".as_ref(),
        out.as_os_str(),
    ]);
    args
}

/// Runs the real-data builders that have their inputs available.
/// Returns per-part results, `None` for parts whose inputs are missing.
fn real_builders(src: &RealSources, scratch: &Path) -> Vec<(&'static str, Option<Check>)> {
    let limit = Duration::from_secs(300);
    let v2 = src.v2.as_ref().map(|(tree, map)| {
        let out = scratch.join("real-v2");
        let (m, took) = timed_build(&build_v2_args(tree, Some(map), &src.wnids, &out), limit, &out)?;
        Ok(format!("{} in {}", check_shape("V2", &m, (2000, 200, 10, 10))?, secs(took)))
    });
    let r = src.r.as_ref().map(|tree| {
        let out = scratch.join("real-r");
        let (m, took) = timed_build(&build_v2_args(tree, None, &src.wnids, &out), limit, &out)?;
        Ok(format!("{} in {}", check_shape("R", &m, (10456, 62, 61, 430))?, secs(took)))
    });
    let a = src.a.as_ref().map(|(val, preds)| {
        let out = scratch.join("real-a");
        let args: Vec<&std::ffi::OsStr> = vec![
            "build-a".as_ref(),
            "--manifest".as_ref(),
            val.as_os_str(),
            "--preds".as_ref(),
            preds.as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ];
        let (m, took) = timed_build(&args, limit, &out)?;
        let (n, _, min, max) = shape(&m);
        ensure((n, min, max) == (3374, 3, 36), || format!("A: {n} items, min {min}, max {max}; expected 3374, 3, 36"))?;
        Ok(format!("A {n} items, min {min}, max {max} in {}", secs(took)))
    });
    vec![("V2", v2), ("R", r), ("A", a)]
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) {
    let mut text = String::new();
    for l in lines {
        let _ = writeln!(text, "{l}");
    }
    std::fs::write(path, text).unwrap();
}

/// Scaled-down versions of the three builders with independently known
/// outcomes.
fn fixture_builders(scratch: &Path) -> Check {
    let dir = scratch.join("c1");
    std::fs::create_dir_all(&dir).unwrap();
    // Target space of 25 keys; source keys n1000 + 7i.
    let target: Vec<String> = (0..25).map(|i| format!("n{}", 1000 + 7 * (i * 2))).collect();
    let wnids = dir.join("wnids.txt");
    write_lines(&wnids, target.iter().cloned());
    let in_target = |key: &str| target.iter().any(|t| t == key);

    // V2 layout: 60 numeric directories of 10 images, every other one shared.
    let v2_src = dir.join("v2-src");
    let dirs: Vec<(String, usize)> = (0..60).map(|i| (i.to_string(), 10)).collect();
    write_class_tree(&v2_src, &dirs, 1).map_err(|e| e.to_string())?;
    let keymap = dir.join("v2-keymap.tsv");
    write_lines(&keymap, (0..60).map(|i| format!("{i}\tn{}", 1000 + 7 * i)));
    let shared = (0..60).filter(|i| in_target(&format!("n{}", 1000 + 7 * i))).count();
    let out = dir.join("v2");
    let (v2, _) = timed_build(&build_v2_args(&v2_src, Some(&keymap), &wnids, &out), Duration::from_secs(300), &out)?;
    let v2_detail = check_shape("V2", &v2, (shared * 10, shared, 10, 10))?;
    load_manifest(&out.join("manifest.json"), Validation::Full).map_err(|e| e.to_string())?;

    // R layout: wnid directories with uneven counts.
    let r_src = dir.join("r-src");
    let r_dirs: Vec<(String, usize)> = (0..30).map(|i| (format!("n{}", 1000 + 7 * i), 1 + (i * 11) % 17)).collect();
    write_class_tree(&r_src, &r_dirs, 2).map_err(|e| e.to_string())?;
    let kept: Vec<usize> = r_dirs.iter().filter(|(k, _)| in_target(k)).map(|(_, n)| *n).collect();
    let want = (kept.iter().sum(), kept.len(), *kept.iter().min().unwrap(), *kept.iter().max().unwrap());
    let out = dir.join("r");
    let (r, _) = timed_build(&build_v2_args(&r_src, None, &wnids, &out), Duration::from_secs(300), &out)?;
    let r_detail = check_shape("R", &r, want)?;

    // A: 10 items, 4 misclassified.
    let val = write_fixture_dataset(
        &dir.join("val"),
        "val",
        10,
        &label_space(5, "n"),
        Geometry::new(16, 16, 3),
        Source::Real,
        3,
    )
    .map_err(|e| e.to_string())?;
    let wrong = [1usize, 4, 5, 8];
    let preds = dir.join("resnet18.csv");
    write_lines(
        &preds,
        std::iter::once("item_id,label,pred".to_string()).chain(val.items.iter().enumerate().map(|(i, it)| {
            let pred = if wrong.contains(&i) { (it.label + 1) % 5 } else { it.label };
            format!("{},{},{pred}", it.id, it.label)
        })),
    );
    let out = dir.join("a");
    robustkit_ok([
        "build-a".as_ref(),
        "--manifest".as_ref(),
        dir.join("val/manifest.json").as_os_str(),
        "--preds".as_ref(),
        preds.as_os_str(),
        "--out".as_ref(),
        out.as_os_str(),
    ] as [&std::ffi::OsStr; 7])?;
    let a = load_manifest(&out.join("manifest.json"), Validation::Full).map_err(|e| e.to_string())?;
    let ids: Vec<&str> = a.items.iter().map(|i| i.id.as_str()).collect();
    let want_ids: Vec<String> = wrong.iter().map(|i| val.items[*i].id.clone()).collect();
    ensure(ids == want_ids, || format!("A kept {ids:?}, expected {want_ids:?}"))?;
    Ok(format!("{v2_detail}, {r_detail}, A 10-item fixture kept 4/4"))
}

fn criterion_1(scratch: &Path) -> Verdict {
    let fixture = fixture_builders(scratch);
    let mut parts = Vec::new();
    let mut status = Status::Pass;
    match real_sources() {
        None => {
            status = Status::Skip;
            parts.push("real data: SKIP (ROBUSTKIT_TINY_WNIDS unset)".to_string());
        }
        Some(src) => {
            for (name, res) in real_builders(&src, scratch) {
                match res {
                    None => {
                        status = if status == Status::Fail { status } else { Status::Skip };
                        parts.push(format!("{name}: SKIP (inputs unset)"));
                    }
                    Some(Ok(d)) => parts.push(d),
                    Some(Err(e)) => {
                        status = Status::Fail;
                        parts.push(format!("{name}: {e}"));
                    }
                }
            }
        }
    }
    match fixture {
        Ok(d) => parts.push(format!("fixture substitute ok: {d}")),
        Err(e) => {
            status = Status::Fail;
            parts.push(format!("fixture substitute failed: {e}"));
        }
    }
    Verdict { status, detail: parts.join("; ") }
}

fn stats_via_cli(manifest: &Path, out: &Path) -> Result<ChannelStats, String> {
    robustkit_ok(["stats".as_ref(), "--manifest".as_ref(), manifest.as_os_str(), "--out".as_ref(), out.as_os_str()]
        as [&std::ffi::OsStr; 5])?;
    serde_json::from_str(&std::fs::read_to_string(out).unwrap()).map_err(|e| e.to_string())
}

fn criterion_2(scratch: &Path) -> Verdict {
    let within = |got: &[f64], want: &[f64], tol: f64| got.iter().zip(want).all(|(a, b)| (a - b).abs() <= tol);
    let substitute = (|| -> Check {
        let manifest = scratch.join("c1/v2/manifest.json");
        let m = load_manifest(&manifest, Validation::Structure).map_err(|e| format!("no fixture V2 set: {e}"))?;
        let s = stats_via_cli(&manifest, &scratch.join("c2-fixture-stats.json"))?;
        let images: Vec<ImageBuffer> = m.items.iter().map(|i| m.load_image(i).unwrap()).collect();
        let (mean, std) = oracles::naive_channel_stats(&images);
        ensure(within(&s.mean, &mean, 1e-6) && within(&s.std, &std, 1e-6), || {
            format!("stats {:?}/{:?} vs two-pass {mean:?}/{std:?}", s.mean, s.std)
        })?;
        Ok(format!("fixture V2 stats match two-pass oracle over {} images", images.len()))
    })();
    let real = scratch.join("real-v2/manifest.json");
    let real_result = real.exists().then(|| -> Check {
        let s = stats_via_cli(&real, &scratch.join("c2-real-stats.json"))?;
        let (mean, std) = ([0.4705, 0.4415, 0.3913], [0.2803, 0.2739, 0.2814]);
        ensure(within(&s.mean, &mean, 1e-3) && within(&s.std, &std, 1e-3), || {
            format!("mean {:.4?} std {:.4?}, expected {mean:?} / {std:?}", s.mean, s.std)
        })?;
        Ok(format!("V2 mean {:.4?} std {:.4?}", s.mean, s.std))
    });
    let (status, mut detail) = match real_result {
        None => (Status::Skip, "real V2 set not built (see criterion 1)".to_string()),
        Some(Ok(d)) => (Status::Pass, d),
        Some(Err(e)) => (Status::Fail, e),
    };
    match substitute {
        Ok(d) => detail.push_str(&format!("; {d}")),
        Err(e) => return Verdict { status: Status::Fail, detail: format!("{detail}; fixture substitute failed: {e}") },
    }
    Verdict { status, detail }
}

// ---- Criterion 3: corruption determinism ----------------------------------

fn corrupt_run(manifest: &Path, profile: &str, threads: usize, out: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    robustkit_ok([
        "corrupt",
        "--manifest",
        manifest.to_str().unwrap(),
        "--profile",
        profile,
        "--seed",
        "2024",
        "--threads",
        &threads.to_string(),
        "--out",
        out.to_str().unwrap(),
    ])?;
    Ok(start.elapsed())
}

fn criterion_3(scratch: &Path) -> Check {
    let dir = scratch.join("c3");
    write_fixture_dataset(
        &dir.join("clean"),
        "clean",
        200,
        &label_space(10, "n"),
        Geometry::new(64, 64, 3),
        Source::Real,
        5,
    )
    .map_err(|e| e.to_string())?;
    let manifest = dir.join("clean/manifest.json");
    let weather: BTreeSet<&str> = ["snow", "frost", "fog"].into();
    let mut slowest = Duration::ZERO;
    let mut details = Vec::new();
    for (profile, kinds) in [("natural", 15usize), ("medical", 12)] {
        let mut digests = Vec::new();
        for (run, threads) in [(0, 1usize), (1, 1), (2, 8)] {
            let out = dir.join(format!("{profile}-{run}"));
            slowest = slowest.max(corrupt_run(&manifest, profile, threads, &out)?);
            digests.push(tree_digest(&out));
            if run > 0 {
                std::fs::remove_dir_all(&out).unwrap();
            }
        }
        ensure(digests[0] == digests[1], || format!("{profile}: two single-thread runs differ"))?;
        ensure(digests[0] == digests[2], || format!("{profile}: 1 vs 8 threads differ"))?;
        let root = dir.join(format!("{profile}-0"));
        let dirs: BTreeSet<String> = std::fs::read_dir(&root)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_dir())
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        ensure(dirs.len() == kinds, || format!("{profile}: {} corruption directories", dirs.len()))?;
        if profile == "medical" {
            ensure(dirs.iter().all(|d| !weather.contains(d.as_str())), || {
                format!("medical tree has weather directories: {dirs:?}")
            })?;
        }
        let pngs = digests[0].keys().filter(|k| k.ends_with(".png")).count();
        ensure(pngs == 200 * kinds * 5, || format!("{profile}: {pngs} images, expected {}", 200 * kinds * 5))?;
        let tree = CorruptedTree::load(&root).map_err(|e| e.to_string())?;
        ensure(tree.image_count == pngs, || "index.json image count disagrees".into())?;
        details.push(format!("{profile} {kinds} dirs / {pngs} images"));
        std::fs::remove_dir_all(&root).unwrap();
    }
    ensure(slowest < Duration::from_secs(60), || format!("slowest build took {}", secs(slowest)))?;
    Ok(format!("{}; identical across 2 runs and 1 vs 8 threads; slowest build {}", details.join(", "), secs(slowest)))
}

// ---- Criterion 4: severity monotonicity -----------------------------------

fn mad(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| f64::from((x - y).abs())).sum::<f64>()
        / a.as_slice().len() as f64
}

fn criterion_4() -> Check {
    let mut worst_margin = f64::INFINITY;
    for (w, c) in [(64u32, 3u8), (32, 3), (28, 1)] {
        let images = fixture_set(32, w, w, c, 404);
        for kind in CorruptionKind::ALL {
            let curve: Vec<f64> = SEVERITIES
                .iter()
                .map(|&s| {
                    images
                        .iter()
                        .enumerate()
                        .map(|(i, img)| {
                            let seed = cell_key(17, &format!("fixture_{i:05}"), kind.name(), s);
                            mad(img, &apply_corruption(img, &CorruptionSpec::new(kind, s, seed)).unwrap())
                        })
                        .sum::<f64>()
                        / images.len() as f64
                })
                .collect();
            for pair in curve.windows(2) {
                ensure(pair[1] >= pair[0], || format!("{kind} at {w}x{w}x{c}: {curve:.5?}"))?;
                worst_margin = worst_margin.min(pair[1] - pair[0]);
            }
        }
    }
    Ok(format!("15 kinds non-decreasing at 64x64x3, 32x32x3 and 28x28x1; smallest step {worst_margin:.5}"))
}

// ---- Criterion 5: metric oracles ------------------------------------------

fn criterion_5(scratch: &Path) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 150;
    let mut worst = [0.0f64; 4];
    for _ in 0..trials {
        let (kinds, sevs) = (rng.random_range(1..=15), rng.random_range(1..=5));
        let (k, s, errors) = oracles::random_grid(&mut rng, kinds, sevs);
        let (_, _, base) = oracles::random_grid(&mut rng, kinds, sevs);
        let m = CorruptionErrorMatrix::new(k.clone(), s.clone(), errors.clone()).unwrap();
        let b = CorruptionErrorMatrix::new(k, s, base.clone()).unwrap();
        let (plain, norm) = mce(&m, Some(&b)).map_err(|e| e.to_string())?;
        worst[0] = worst[0]
            .max((plain - oracles::naive_mce(&errors)).abs())
            .max((norm.unwrap() - oracles::naive_normalized_mce(&errors, &base)).abs());

        let n = rng.random_range(1..150);
        let cls = rng.random_range(2..20);
        let manifest = oracles::random_cell_manifest(&mut rng, "clean", n, cls);
        let p_wrong = rng.random_range(0.0..1.0);
        let preds = oracles::random_preds(&mut rng, &manifest, p_wrong);
        let (labels, ps) = oracles::labels_and_preds(&manifest, &preds);
        let e = clean_error(&manifest, &preds).map_err(|e| e.to_string())?;
        worst[2] = worst[2].max((e - oracles::naive_error(&labels, &ps)).abs());

        let (layers, heads, rows, cols) =
            (rng.random_range(1..3), rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..5));
        let with_cls = rng.random_bool(0.5);
        let dump = oracles::random_dump(&mut rng, layers, heads, rows, cols, with_cls);
        let got = mean_attention_distance(&dump).map_err(|e| e.to_string())?;
        for (gl, wl) in got.per_head.iter().zip(oracles::naive_attention_distance(&dump)) {
            for (g, w) in gl.iter().zip(wl) {
                worst[3] = worst[3].max((g - w).abs());
            }
        }
    }
    let trees = scratch.join("c5");
    for t in 0..trials {
        let (tree, preds, expected) = oracles::random_tree_on_disk(&mut rng, &trees.join(t.to_string()));
        let m = corruption_error_matrix(&tree, &preds).map_err(|e| e.to_string())?;
        for (row, exp) in m.errors.iter().zip(&expected) {
            for (a, b) in row.iter().zip(exp) {
                worst[1] = worst[1].max((a - b).abs());
            }
        }
    }
    ensure(worst[0] <= 1e-12, || format!("mCE off by {:e}", worst[0]))?;
    ensure(worst[1] <= 1e-12, || format!("corruption_error_matrix off by {:e}", worst[1]))?;
    ensure(worst[2] <= 1e-12, || format!("clean_error off by {:e}", worst[2]))?;
    ensure(worst[3] <= 1e-6, || format!("mean_attention_distance off by {:e}", worst[3]))?;

    let meta = AttentionMeta {
        layers: 1,
        heads: 1,
        tokens: 4,
        rows: 2,
        cols: 2,
        patch: 16.0,
        cls_present: false,
        dtype: "f32le".into(),
    };
    let uniform = AttentionDump::new(meta, vec![vec![0.25; 16]]).unwrap();
    let d = mean_attention_distance(&uniform).unwrap().per_head[0][0];
    let want = 16.0 * (2.0 + 2f64.sqrt()) / 4.0;
    ensure((d - want).abs() <= 1e-4, || format!("uniform 2x2 case gave {d}, expected {want}"))?;
    Ok(format!(
        "{trials} instances each; max errors mCE {:.1e}, matrix {:.1e}, clean {:.1e}, attention {:.1e}; uniform 2x2 = {d:.4} px",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

// ---- Criterion 6: delta annotations ---------------------------------------

fn report(clean: f64, mce_value: f64) -> EvalReport {
    let matrix = CorruptionErrorMatrix::new(vec![CorruptionKind::Fog], vec![1], vec![vec![mce_value]]).unwrap();
    EvalReport::new("deit-ti", "tiny-imagenet", clean).with_matrix(matrix, None).unwrap()
}

fn criterion_6(scratch: &Path) -> Check {
    let a = delta_row("clean_error", 50.3, 44.1).rendered;
    let b = delta_row("mce", 80.6, 77.7).rendered;
    ensure(a == "-6.2" && b == "-2.9", || format!("rendered {a:?} and {b:?}"))?;
    let dir = scratch.join("c6");
    std::fs::create_dir_all(&dir).unwrap();
    report(50.3, 80.6).save(&dir.join("before.json")).unwrap();
    report(44.1, 77.7).save(&dir.join("after.json")).unwrap();
    let out = robustkit_ok([
        "delta",
        "--before",
        dir.join("before.json").to_str().unwrap(),
        "--after",
        dir.join("after.json").to_str().unwrap(),
    ])?;
    ensure(out.contains("44.1 (-6.2)") && out.contains("77.7 (-2.9)"), || format!("CLI table:\n{out}"))?;
    Ok("library and CLI render -6.2 and -2.9".into())
}

// ---- Criterion 7: augmentation properties ---------------------------------

fn pair<'a>(a: &'a ImageBuffer, b: &'a ImageBuffer) -> MixPair<'a> {
    MixPair { a, label_a: 0, b, label_b: 1, num_classes: 2 }
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for t in 0..100u64 {
        let (w, h) = (rng.random_range(1..20), rng.random_range(1..20));
        let a = fixture_image(t, w, h, 3);
        let b = fixture_image(t + 1000, w, h, 3);
        ensure(mixup_with_lambda(pair(&a, &b), 1.0).unwrap().0 == a, || "mixup(lambda=1) != a".into())?;
        ensure(mixup_with_lambda(pair(&a, &b), 0.0).unwrap().0 == b, || "mixup(lambda=0) != b".into())?;
        let empty = BoxRegion { x0: 0, y0: 0, x1: 0, y1: h };
        let full = BoxRegion { x0: 0, y0: 0, x1: w, y1: h };
        ensure(cutmix_with_box(pair(&a, &b), empty).unwrap().0 == a, || "empty cutmix box != a".into())?;
        ensure(cutmix_with_box(pair(&a, &b), full).unwrap().0 == b, || "full cutmix box != b".into())?;
    }
    for t in 0..1000u64 {
        let (w, h) = (rng.random_range(1..32), rng.random_range(1..32));
        let a = fixture_image(t, w, h, 1).map(|v| v * 0.4);
        let b = a.map(|v| v + 0.5);
        let lambda = rng.random_range(0.0..1.0);
        let region = BoxRegion::centered(w, h, lambda, rng.random_range(0..w), rng.random_range(0..h));
        let (out, _, _) = cutmix_with_box(pair(&a, &b), region).unwrap();
        let replaced = a.as_slice().iter().zip(out.as_slice()).filter(|(x, y)| x != y).count() as u64;
        let mut area = 0;
        for y in 0..h {
            for x in 0..w {
                area += u64::from(x >= region.x0 && x < region.x1 && y >= region.y0 && y < region.y1);
            }
        }
        ensure(replaced == area, || format!("trial {t}: replaced {replaced}, box area {area}"))?;
    }
    let (a, b) = (fixture_image(1, 8, 8, 3), fixture_image(2, 8, 8, 3));
    let cut = (0..10_000u64)
        .filter(|&s| {
            cutmix_mixup_switch(pair(&a, &b), SwitchConfig::default(), s).unwrap().2.branch == MixBranch::Cutmix
        })
        .count();
    let rate = cut as f64 / 10_000.0;
    ensure((rate - 0.5).abs() <= 0.02, || format!("switch rate {rate}"))?;
    for t in 0..50u64 {
        let img = fixture_image(t, 16, 16, if t % 2 == 0 { 3 } else { 1 });
        let cfg = AugmixConfig { severity: 1 + (t % 10) as u32, ..AugmixConfig::default() };
        ensure(augmix_with_m(&img, &cfg, 1.0, t).unwrap() == img, || "augmix m=1 changed the input".into())?;
    }
    Ok(format!("endpoints exact, 1000 cutmix boxes exact, switch rate {rate:.4}, augmix m=1 exact"))
}

// ---- Criterion 8: pipeline smoke test -------------------------------------

fn criterion_8(scratch: &Path) -> Check {
    let dir = scratch.join("c8");
    let space = label_space(10, "n");
    let g = Geometry::new(32, 32, 3);
    write_fixture_dataset(&dir.join("real"), "real", 200, &space, g, Source::Real, 100).map_err(|e| e.to_string())?;
    write_fixture_dataset(&dir.join("gen"), "gen", 200, &space, g, Source::Generated, 900)
        .map_err(|e| e.to_string())?;
    std::fs::remove_file(dir.join("gen/manifest.json")).unwrap();
    let test = write_fixture_dataset(&dir.join("test"), "test", 60, &space, g, Source::Real, 5000)
        .map_err(|e| e.to_string())?;
    let p = |rel: &str| dir.join(rel).to_string_lossy().into_owned();

    let start = Instant::now();
    robustkit_ok([
        "ingest-gen",
        "--images",
        &p("gen"),
        "--label-space",
        &p("real/manifest.json"),
        "--out",
        &p("gen.json"),
    ])?;
    robustkit_ok([
        "mix",
        "--real",
        &p("real/manifest.json"),
        "--gen",
        &p("gen.json"),
        "--ratio",
        "1.0",
        "--seed",
        "1",
        "--out",
        &p("mixed.json"),
    ])?;
    robustkit_ok(["corrupt", "--manifest", &p("test/manifest.json"), "--seed", "3", "--out", &p("tree")])?;

    let real = load_manifest(&dir.join("real/manifest.json"), Validation::Structure).map_err(|e| e.to_string())?;
    let mixed = load_manifest(&dir.join("mixed.json"), Validation::Full).map_err(|e| e.to_string())?;
    let tree = CorruptedTree::load(&dir.join("tree")).map_err(|e| e.to_string())?;
    let (real_model, mixed_model) = (Centroids::fit(&real), Centroids::fit(&mixed));
    predict_tree(&test, &tree, &[(&real_model, &dir.join("preds-real")), (&mixed_model, &dir.join("preds-mixed"))]);

    for model in ["real", "mixed"] {
        robustkit_ok([
            "eval",
            "--manifest",
            &p("test/manifest.json"),
            "--preds",
            &p(&format!("preds-{model}/clean.csv")),
            "--tree",
            &p("tree"),
            "--preds-dir",
            &p(&format!("preds-{model}/cells")),
            "--model",
            model,
            "--out",
            &p(&format!("{model}.json")),
        ])?;
    }
    let table =
        robustkit_ok(["delta", "--before", &p("real.json"), "--after", &p("mixed.json"), "--out", &p("delta.json")])?;
    let took = start.elapsed();

    ensure(mixed.len() == 400 && mixed.n_real() == 200 && mixed.n_generated() == 200, || {
        format!("mixed manifest has {} items ({} generated)", mixed.len(), mixed.n_generated())
    })?;
    let after = EvalReport::load(&dir.join("mixed.json")).map_err(|e| e.to_string())?;
    after.validate().map_err(|e| e.to_string())?;
    let matrix = after.matrix.as_ref().ok_or("EvalReport has no error matrix")?;
    ensure(matrix.entries().count() == 75 && after.mce.is_some(), || "EvalReport grid is incomplete".into())?;
    for f in ["gen.json.run.json", "mixed.json.run.json", "tree.run.json", "mixed.json.run.json", "delta.json.run.json"]
    {
        ensure(dir.join(f).exists(), || format!("missing run record {f}"))?;
    }
    ensure(took < Duration::from_secs(120), || format!("pipeline took {}", secs(took)))?;
    let first = table.lines().nth(1).unwrap_or("").trim().to_string();
    Ok(format!("400-item mix, 75-cell EvalReport, delta row `{first}`, {}", secs(took)))
}

fn run(number: u32, title: &str, f: impl FnOnce() -> Verdict) -> Status {
    let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| Verdict {
        status: Status::Fail,
        detail: format!(
            "panicked: {}",
            e.downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default()
        ),
    });
    let tag = match v.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skip => "SKIP",
    };
    println!("[{tag}] criterion {number}: {title}: {}", v.detail);
    v.status
}

fn verdict(check: Check) -> Verdict {
    match check {
        Ok(detail) => Verdict { status: Status::Pass, detail },
        Err(detail) => Verdict { status: Status::Fail, detail },
    }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let scratch = tempfile::tempdir().expect("scratch directory");
    let s = scratch.path();
    println!("acceptance suite");
    let statuses = [
        run(1, "test-set builders", || criterion_1(s)),
        run(2, "channel statistics", || criterion_2(s)),
        run(3, "corruption determinism", || verdict(criterion_3(s))),
        run(4, "severity monotonicity", || verdict(criterion_4())),
        run(5, "metric oracles", || verdict(criterion_5(s))),
        run(6, "delta annotations", || verdict(criterion_6(s))),
        run(7, "augmentation properties", || verdict(criterion_7())),
        run(8, "pipeline smoke test", || verdict(criterion_8(s))),
    ];
    let failed = statuses.iter().filter(|&&st| st == Status::Fail).count();
    let skipped = statuses.iter().filter(|&&st| st == Status::Skip).count();
    println!("acceptance: {} passed, {failed} failed, {skipped} skipped", statuses.len() - failed - skipped);
    if failed > 0 {
        std::process::exit(1);
    }
}
