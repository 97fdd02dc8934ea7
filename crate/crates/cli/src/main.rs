//! `robustkit` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation or precondition
//! failure, 3 IO failure.

mod commands;
mod config;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<robustkit::Error> for Failure {
    fn from(e: robustkit::Error) -> Self {
        Self { code: if e.is_io() { EXIT_IO } else { EXIT_VALIDATION }, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "robustkit", about = "Dataset mixing, corruption benchmarks and robustness metrics")]
#[command(disable_version_flag = true)]
pub struct Cli {
    /// TOML config with seed, threads, profile, params and frost_textures.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log verbosity; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Print toolkit and severity-table versions.
    #[arg(short = 'V', long)]
    pub version: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-channel mean and std of a dataset.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
        /// Write the statistics as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded class-stratified subset.
    Subset {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Sample uniformly over all items instead of per class.
        #[arg(long)]
        no_stratify: bool,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Manifest for a directory of generated images.
    IngestGen {
        #[arg(long)]
        images: PathBuf,
        /// Downstream label space: a manifest or a list of class keys.
        #[arg(long)]
        label_space: PathBuf,
        /// `relative/path<TAB>class_key` lines; default is one directory per class.
        #[arg(long)]
        label_map: Option<PathBuf>,
        #[arg(long, default_value = "generated")]
        name: String,
        #[arg(long)]
        provenance: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Real set plus a class-stratified draw of generated items.
    Mix {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        gen: PathBuf,
        /// Generated items as a multiple of the real set size.
        #[arg(long, conflicts_with = "count", required_unless_present = "count")]
        ratio: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corrupted test-set tree `out/<kind>/<severity>/`.
    Corrupt {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        profile: Option<ProfileArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Severity parameter overrides (TOML).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Directory of frost texture images; default is procedural frost.
        #[arg(long)]
        frost_textures: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Restriction of a large dataset to the classes of a target label space.
    #[command(name = "build-v2")]
    BuildV2 {
        /// `<root>/<class dir>/<images>` tree or a manifest.
        #[arg(long)]
        source: PathBuf,
        /// `class_dir<TAB>class_key` lines for trees with non-key directory names.
        #[arg(long)]
        key_map: Option<PathBuf>,
        /// Target label space: a manifest or a list of class keys.
        #[arg(long)]
        target: PathBuf,
        /// Output geometry `WxHxC`.
        #[arg(long)]
        geometry: String,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Items of a validation set that a reference model misclassifies.
    #[command(name = "build-a")]
    BuildA {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Offline Mixup, CutMix, switched CutMix/Mixup or AugMix.
    Augment(AugmentArgs),
    /// Clean error, corruption error grid and mCE into an EvalReport.
    Eval(EvalArgs),
    /// mCE of an error matrix CSV.
    Mce {
        #[arg(long)]
        matrix: PathBuf,
        /// Baseline matrix for the normalized variant.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Signed one-decimal deltas between two EvalReports.
    Delta {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        /// Write the delta rows as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean attention distance per layer and head.
    #[command(name = "attn-dist")]
    AttnDist {
        /// Directory with meta.json and layer_<i>.bin.
        #[arg(long)]
        dump: PathBuf,
        /// Write `layer,head,distance_px` CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    Natural,
    Medical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OpArg {
    Mixup,
    Cutmix,
    Switch,
    Augmix,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub op: OpArg,
    #[arg(long, default_value_t = 0.8)]
    pub alpha_mixup: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_cutmix: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p_switch: f64,
    /// AugMix magnitude cap (10 is the strongest).
    #[arg(long, default_value_t = 3)]
    pub severity: u32,
    /// AugMix chains.
    #[arg(long, default_value_t = 3)]
    pub width: usize,
    /// AugMix ops per chain; 0 samples 1..=3.
    #[arg(long, default_value_t = 0)]
    pub depth: usize,
    #[arg(long, default_value_t = 1.0)]
    pub dirichlet_alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta_alpha: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Clean test-set manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Predictions on the clean test set.
    #[arg(long)]
    pub preds: PathBuf,
    /// Corrupted tree built by `corrupt`.
    #[arg(long, requires = "preds_dir")]
    pub tree: Option<PathBuf>,
    /// Per-cell predictions `<dir>/<kind>/<severity>.csv`.
    #[arg(long, requires = "tree")]
    pub preds_dir: Option<PathBuf>,
    /// Baseline error matrix CSV for normalized mCE.
    #[arg(long, requires = "tree")]
    pub baseline: Option<PathBuf>,
    /// Extra shifted test set as `name=manifest,preds`; repeatable.
    #[arg(long)]
    pub shifted: Vec<String>,
    /// Model id; defaults to the clean prediction file stem.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the error matrix as `kind,severity,error` CSV here.
    #[arg(long)]
    pub matrix_csv: Option<PathBuf>,
}

fn version_line() -> String {
    format!(
        "robustkit {} (severity parameters {})",
        robustkit::VERSION,
        robustkit::corruptions::SeverityTable::builtin().version()
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .parse_default_env()
        .init();
    if cli.version {
        println!("{}", version_line());
        return ExitCode::SUCCESS;
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
