use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use robustkit::augment::{augment_dataset, AugmentOp, AugmixConfig, SwitchConfig};
use robustkit::corruptions::{
    build_corrupted_testset, BuildOptions, CorruptedTree, Corruptor, FrostSource, Profile, SeverityTable,
};
use robustkit::eval::{
    clean_error, corruption_error_matrix, delta_report, display1, mce, mean_attention_distance, render_delta_table,
    AttentionDump, CorruptionErrorMatrix, EvalReport, PredictionSet,
};
use robustkit::fsutil::write_atomic;
use robustkit::manifest::{load_label_space, load_manifest, Validation};
use robustkit::testsets::{
    build_adversarial_filter_testset, build_intersection_testset, intersect_classes, scan_source_tree,
};
use robustkit::{
    compute_channel_stats, ingest_generated, mix_datasets, stratified_subset, DatasetManifest, Geometry, ImageBuffer,
    Labeling, Take,
};

use crate::config::ToolConfig;
use crate::record::RunRecord;
use crate::{AugmentArgs, Cli, Command, EvalArgs, Failure, OpArg, ProfileArg};

struct Context {
    config: ToolConfig,
    threads: usize,
}

impl Context {
    fn seed(&self, flag: Option<u64>, command: &str) -> Result<u64, Failure> {
        flag.or(self.config.seed).ok_or_else(|| {
            Failure::usage(format!("{command} is stochastic: pass --seed or set `seed` in the config file"))
        })
    }

    fn params_version(&self) -> String {
        SeverityTable::builtin().version().to_string()
    }
}

fn load(path: &Path) -> Result<DatasetManifest, Failure> {
    Ok(load_manifest(path, Validation::Structure)?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    Ok(write_atomic(path, text.as_bytes())?)
}

fn class_summary(m: &DatasetManifest) -> String {
    let counts = m.class_counts();
    let populated: Vec<usize> = counts.iter().copied().filter(|&n| n > 0).collect();
    format!(
        "{}: {} items, {}/{} classes populated, min {} / max {} per populated class",
        m.name,
        m.len(),
        populated.len(),
        counts.len(),
        populated.iter().min().unwrap_or(&0),
        populated.iter().max().unwrap_or(&0)
    )
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(path) => ToolConfig::load(path)?,
        None => ToolConfig::default(),
    };
    let threads = cli.threads.or(config.threads).unwrap_or(0);
    if threads > 0 {
        // Only fails when a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let ctx = Context { config, threads };
    let Some(command) = cli.command else {
        return Err(Failure::usage("no subcommand given; see --help"));
    };
    match command {
        Command::Stats { manifest, out } => stats(&ctx, &manifest, out.as_deref()),
        Command::Subset { manifest, fraction, seed, no_stratify, name, out } => {
            let seed = ctx.seed(seed, "subset")?;
            let m = load(&manifest)?;
            let mut sub = stratified_subset(&m, fraction, seed, !no_stratify)?;
            if let Some(name) = name {
                sub.name = name;
            }
            sub.save(&out)?;
            println!("{}", class_summary(&sub));
            RunRecord::new("subset", &ctx.params_version(), Some(seed))
                .option("fraction", fraction)
                .option("stratify", !no_stratify)
                .input(&manifest)?
                .write(&[&out])
        }
        Command::IngestGen { images, label_space, label_map, name, provenance, out } => {
            let space = load_label_space(&label_space)?;
            let labeling = match &label_map {
                Some(p) => Labeling::MapFile(p.clone()),
                None => Labeling::Subdirectories,
            };
            let mut m = ingest_generated(&images, &labeling, &space, &name, provenance.as_deref())?;
            m.save(&out)?;
            println!("{}", class_summary(&m));
            let mut record = RunRecord::new("ingest-gen", &ctx.params_version(), None)
                .option("name", &name)
                .option("provenance", &provenance)
                .input(&images)?
                .input(&label_space)?;
            if let Some(p) = &label_map {
                record = record.input(p)?;
            }
            record.write(&[&out])
        }
        Command::Mix { real, gen, ratio, count, seed, name, out } => {
            let seed = ctx.seed(seed, "mix")?;
            let take = match (ratio, count) {
                (Some(r), None) => Take::Ratio(r),
                (None, Some(n)) => Take::Count(n),
                _ => return Err(Failure::usage("pass exactly one of --ratio and --count")),
            };
            let (r, g) = (load(&real)?, load(&gen)?);
            let mut mixed = mix_datasets(&r, &g, take, seed)?;
            if let Some(name) = name {
                mixed.name = name;
            }
            mixed.save(&out)?;
            println!(
                "{}: {} items ({} real, {} generated)",
                mixed.name,
                mixed.len(),
                mixed.n_real(),
                mixed.n_generated()
            );
            RunRecord::new("mix", &ctx.params_version(), Some(seed))
                .option("ratio", ratio)
                .option("count", count)
                .input(&real)?
                .input(&gen)?
                .write(&[&out])
        }
        Command::Corrupt { manifest, profile, seed, params, frost_textures, out } => {
            corrupt(&ctx, &manifest, profile, seed, params, frost_textures, &out)
        }
        Command::BuildV2 { source, key_map, target, geometry, name, out } => {
            build_v2(&ctx, &source, key_map.as_deref(), &target, &geometry, name, &out)
        }
        Command::BuildA { manifest, preds, name, out } => {
            let val = load(&manifest)?;
            let p = PredictionSet::load(&preds)?;
            let name = name.unwrap_or_else(|| format!("{}-misclassified", val.name));
            let built = build_adversarial_filter_testset(&val, &p, &name, &out)?;
            println!("{}", class_summary(&built));
            RunRecord::new("build-a", &ctx.params_version(), None).input(&manifest)?.input(&preds)?.write(&[&out])
        }
        Command::Augment(args) => augment(&ctx, args),
        Command::Eval(args) => eval(&ctx, args),
        Command::Mce { matrix, baseline } => {
            let m = CorruptionErrorMatrix::from_csv(&read(&matrix)?, &matrix.display().to_string())?;
            let b = baseline
                .as_ref()
                .map(|p| CorruptionErrorMatrix::from_csv(&read(p)?, &p.display().to_string()).map_err(Failure::from))
                .transpose()?;
            let (plain, normalized) = mce(&m, b.as_ref())?;
            println!("mCE: {}", display1(plain));
            if let Some(n) = normalized {
                println!("normalized mCE: {n:.4}");
            }
            Ok(())
        }
        Command::Delta { before, after, out } => {
            let rows = delta_report(&EvalReport::load(&before)?, &EvalReport::load(&after)?)?;
            print!("{}", render_delta_table(&rows));
            if let Some(out) = out {
                write_json(&out, &rows)?;
                RunRecord::new("delta", &ctx.params_version(), None).input(&before)?.input(&after)?.write(&[&out])?;
            }
            Ok(())
        }
        Command::AttnDist { dump, out } => {
            let d = mean_attention_distance(&AttentionDump::load(&dump)?)?;
            for (l, mean) in d.per_layer_mean.iter().enumerate() {
                println!("layer {l}: {mean:.3} px");
            }
            if let Some(out) = out {
                write_atomic(&out, d.to_csv().as_bytes())?;
                RunRecord::new("attn-dist", &ctx.params_version(), None).input(&dump)?.write(&[&out])?;
            }
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::from(robustkit::Error::io(path, e)))
}

fn stats(ctx: &Context, manifest: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let m = load(manifest)?;
    let s = compute_channel_stats(&m)?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    println!("{}: {} items", m.name, m.len());
    println!("mean: ({})", fmt(&s.mean));
    println!("std:  ({})", fmt(&s.std));
    if let Some(out) = out {
        write_json(out, &s)?;
        RunRecord::new("stats", &ctx.params_version(), None).input(manifest)?.write(&[out])?;
    }
    Ok(())
}

fn corrupt(
    ctx: &Context,
    manifest: &Path,
    profile: Option<ProfileArg>,
    seed: Option<u64>,
    params: Option<PathBuf>,
    frost_textures: Option<PathBuf>,
    out: &Path,
) -> Result<(), Failure> {
    let seed = ctx.seed(seed, "corrupt")?;
    let profile = match (profile, &ctx.config.profile) {
        (Some(ProfileArg::Natural), _) => Profile::Natural,
        (Some(ProfileArg::Medical), _) => Profile::Medical,
        (None, Some(p)) => p.parse()?,
        (None, None) => Profile::Natural,
    };
    let params = params.or_else(|| ctx.config.params.clone());
    let table = match &params {
        Some(p) => SeverityTable::with_overrides(p)?,
        None => SeverityTable::builtin().clone(),
    };
    let textures = frost_textures.or_else(|| ctx.config.frost_textures.clone());
    let frost = match &textures {
        None => FrostSource::Procedural,
        Some(dir) => FrostSource::Textures(load_textures(dir)?),
    };
    let corruptor = Corruptor::new(table).with_frost(frost);
    let m = load(manifest)?;
    let tree = build_corrupted_testset(&m, &corruptor, BuildOptions { profile, seed, threads: ctx.threads }, out)?;
    println!(
        "{}: {} kinds x {} severities, {} images under {}",
        tree.source_name,
        tree.kinds.len(),
        tree.severities.len(),
        tree.image_count,
        out.display()
    );
    let mut record = RunRecord::new("corrupt", corruptor.table().version(), Some(seed))
        .option("profile", profile)
        .input(manifest)?;
    for p in [&params, &textures].into_iter().flatten() {
        record = record.input(p)?;
    }
    record.write(&[out])
}

fn load_textures(dir: &Path) -> Result<Vec<ImageBuffer>, Failure> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::from(robustkit::Error::io(dir, e)))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::from(robustkit::Error::invalid(format!("no frost textures found in {}", dir.display()))));
    }
    paths.iter().map(|p| ImageBuffer::open(p).map_err(Failure::from)).collect()
}

fn parse_geometry(text: &str) -> Result<Geometry, Failure> {
    let parts: Vec<&str> = text.split('x').collect();
    let bad = || Failure::usage(format!("geometry {text:?} must look like 64x64x3"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let g = Geometry::new(
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    );
    g.validate()?;
    Ok(g)
}

fn build_v2(
    ctx: &Context,
    source: &Path,
    key_map: Option<&Path>,
    target: &Path,
    geometry: &str,
    name: Option<String>,
    out: &Path,
) -> Result<(), Failure> {
    let geometry = parse_geometry(geometry)?;
    let target_space = load_label_space(target)?;
    let source_manifest = if source.is_dir() {
        let map: Option<BTreeMap<String, String>> = key_map
            .map(|p| robustkit::dataset::read_label_map(p).map(|pairs| pairs.into_iter().collect()))
            .transpose()?;
        let source_name =
            source.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "source".into());
        scan_source_tree(source, &source_name, map.as_ref())?
    } else {
        if key_map.is_some() {
            return Err(Failure::usage("--key-map only applies to directory sources"));
        }
        load(source)?
    };
    let intersection = intersect_classes(&source_manifest.label_space, &target_space);
    println!(
        "{} of {} source classes are in the target label space",
        intersection.len(),
        source_manifest.num_classes()
    );
    let name = name.unwrap_or_else(|| format!("{}-ported", source_manifest.name));
    let built = build_intersection_testset(&source_manifest, &intersection, geometry, &name, out)?;
    println!("{}", class_summary(&built));
    let mut record = RunRecord::new("build-v2", &ctx.params_version(), None)
        .option("geometry", geometry.to_string())
        .input(source)?
        .input(target)?;
    if let Some(p) = key_map {
        record = record.input(p)?;
    }
    record.write(&[out])
}

fn augment(ctx: &Context, a: AugmentArgs) -> Result<(), Failure> {
    let seed = ctx.seed(a.seed, "augment")?;
    let op = match a.op {
        OpArg::Mixup => AugmentOp::Mixup { alpha: a.alpha_mixup },
        OpArg::Cutmix => AugmentOp::Cutmix { alpha: a.alpha_cutmix },
        OpArg::Switch => AugmentOp::Switch(SwitchConfig {
            p_switch: a.p_switch,
            alpha_cutmix: a.alpha_cutmix,
            alpha_mixup: a.alpha_mixup,
        }),
        OpArg::Augmix => AugmentOp::Augmix(AugmixConfig {
            severity: a.severity,
            width: a.width,
            depth: a.depth,
            dirichlet_alpha: a.dirichlet_alpha,
            beta_alpha: a.beta_alpha,
        }),
    };
    let m = load(&a.manifest)?;
    let name = a.name.unwrap_or_else(|| format!("{}-{}", m.name, op.name()));
    let set = augment_dataset(&m, op, seed, &name, &a.out)?;
    println!("{}: {} augmented items under {}", name, set.manifest.len(), a.out.display());
    let mut record = RunRecord::new("augment", &ctx.params_version(), Some(seed)).option("op", op.name());
    record = match op {
        AugmentOp::Mixup { alpha } => record.option("alpha_mixup", alpha),
        AugmentOp::Cutmix { alpha } => record.option("alpha_cutmix", alpha),
        AugmentOp::Switch(c) => record
            .option("p_switch", c.p_switch)
            .option("alpha_cutmix", c.alpha_cutmix)
            .option("alpha_mixup", c.alpha_mixup),
        AugmentOp::Augmix(c) => record.option("augmix", c),
    };
    record.input(&a.manifest)?.write(&[&a.out])
}

fn eval(ctx: &Context, a: EvalArgs) -> Result<(), Failure> {
    let clean = load(&a.manifest)?;
    let clean_preds = PredictionSet::load(&a.preds)?;
    let model = a.model.clone().unwrap_or_else(|| clean_preds.model_id.clone());
    let mut report = EvalReport::new(&model, &clean.name, clean_error(&clean, &clean_preds)?);
    let mut record = RunRecord::new("eval", &ctx.params_version(), None)
        .option("model", &model)
        .input(&a.manifest)?
        .input(&a.preds)?;

    if let (Some(tree_dir), Some(preds_dir)) = (&a.tree, &a.preds_dir) {
        let tree = CorruptedTree::load(tree_dir)?;
        let mut cell_preds = BTreeMap::new();
        for (kind, severity) in tree.cells() {
            let path = preds_dir.join(kind.name()).join(format!("{severity}.csv"));
            if !path.exists() {
                return Err(Failure::from(robustkit::Error::MissingCell { kind: kind.name().to_string(), severity }));
            }
            cell_preds.insert((kind, severity), PredictionSet::load(&path)?);
        }
        let matrix = corruption_error_matrix(&tree, &cell_preds)?;
        let baseline = a
            .baseline
            .as_ref()
            .map(|p| CorruptionErrorMatrix::from_csv(&read(p)?, &p.display().to_string()).map_err(Failure::from))
            .transpose()?;
        report.profile = Some(tree.profile.name().to_string());
        report = report.with_matrix(matrix, baseline.as_ref())?;
        record = record.input(tree_dir)?.input(preds_dir)?;
        if let Some(p) = &a.baseline {
            record = record.input(p)?;
        }
    }

    for spec in &a.shifted {
        let (name, rest) = spec
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--shifted {spec:?} must look like name=manifest,preds")))?;
        let (m_path, p_path) = rest
            .split_once(',')
            .ok_or_else(|| Failure::usage(format!("--shifted {spec:?} must look like name=manifest,preds")))?;
        let (m_path, p_path) = (Path::new(m_path), Path::new(p_path));
        let err = clean_error(&load(m_path)?, &PredictionSet::load(p_path)?)?;
        if report.shifted.insert(name.to_string(), err).is_some() {
            return Err(Failure::usage(format!("shifted test set {name:?} given twice")));
        }
        record = record.input(m_path)?.input(p_path)?;
    }

    report.save(&a.out)?;
    for (metric, v) in report.metrics() {
        println!("{metric}: {}", display1(v));
    }
    let mut outputs: Vec<&Path> = vec![&a.out];
    if let Some(csv) = &a.matrix_csv {
        let matrix =
            report.matrix.as_ref().ok_or_else(|| Failure::usage("--matrix-csv needs --tree and --preds-dir"))?;
        write_atomic(csv, matrix.to_csv().as_bytes())?;
        outputs.push(csv);
    }
    record.write(&outputs)
}
