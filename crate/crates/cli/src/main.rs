use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use segfuse::FusionPolicy;
use segfuse_cli::commands::{eval, fuse, pseudo, simulate};

#[derive(Parser)]
#[command(
    name = "segfuse",
    version,
    about = "Fuse instance and semantic segmentation outputs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Dataset manifest (JSON).
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// cityscapes19, camvid11 or custom:<path.toml>; defaults to the manifest's.
    #[arg(long)]
    catalog: Option<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct Policy {
    /// Skip segments scoring below this.
    #[arg(long)]
    policy_score_threshold: Option<f64>,
    /// Drop segments keeping less than this fraction of their pixels.
    #[arg(long)]
    policy_min_fraction: Option<f64>,
}

impl Policy {
    fn get(&self) -> FusionPolicy {
        FusionPolicy {
            score_threshold: self.policy_score_threshold,
            min_remaining_fraction: self.policy_min_fraction,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticArg {
    Probs,
    Labels,
}

#[derive(Subcommand)]
enum Command {
    /// Write fused label maps.
    Fuse {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policy: Policy,
    },
    /// Write pseudo ground truth with ignore pixels and per-image sidecars.
    PseudoGt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        policy: Policy,
    },
    /// Score predictions against the manifest's ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Directory of `<image_id>.png` predictions.
        #[arg(long)]
        pred: PathBuf,
        /// TOML file of `rules = [{ from, to }]` applied to predictions.
        #[arg(long)]
        remap: Option<PathBuf>,
        /// Class (name or id) that must have a defined IoU. Repeatable.
        #[arg(long)]
        require: Vec<String>,
    },
    /// Generate a synthetic dataset with simulated network outputs.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        n_scenes: usize,
        /// Defaults to the scene spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, conflicts_with = "scene_preset")]
        scene: Option<PathBuf>,
        /// cityscapes or table1.
        #[arg(long, default_value = "cityscapes")]
        scene_preset: String,
        #[arg(long, conflicts_with = "corruption_preset")]
        corruption: Option<PathBuf>,
        /// cityscapes or identity.
        #[arg(long, default_value = "cityscapes")]
        corruption_preset: String,
        #[arg(long, default_value = "cityscapes19")]
        catalog: String,
        #[arg(long, value_enum, default_value = "probs")]
        semantic: SemanticArg,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn source(file: Option<PathBuf>, preset: String) -> simulate::SpecSource {
    match file {
        Some(p) => simulate::SpecSource::File(p),
        None => simulate::SpecSource::Preset(preset),
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    Ok(match cli.command {
        Command::Fuse { common, policy } => {
            let s = fuse::run(&fuse::FuseOptions {
                manifest: common.manifest,
                out_dir: common.out,
                catalog: common.catalog,
                policy: policy.get(),
                jobs: common.jobs,
            })?;
            eprintln!(
                "fused {}/{} images, mean hole fraction {}",
                s.images.len(),
                s.entries,
                s.mean_hole_fraction.map_or("n/a".into(), |v| format!("{v:.4}"))
            );
            s.failed()
        }
        Command::PseudoGt { common, policy } => {
            let s = pseudo::run(&pseudo::PseudoOptions {
                manifest: common.manifest,
                out_dir: common.out,
                catalog: common.catalog,
                policy: policy.get(),
                jobs: common.jobs,
            })?;
            eprintln!(
                "pseudo ground truth for {}/{} images, ignore fraction {:.4}",
                s.images.len(),
                s.entries,
                s.ignore_fraction
            );
            s.failed()
        }
        Command::Eval {
            common,
            pred,
            remap,
            require,
        } => {
            let s = eval::run(&eval::EvalOptions {
                manifest: common.manifest,
                pred_dir: pred,
                out_dir: common.out,
                catalog: common.catalog,
                remap,
                require,
                jobs: common.jobs,
            })?;
            match &s.report {
                Some(r) => print!("{}", r.to_table()),
                None => println!("no pixels evaluated"),
            }
            if !s.missing.is_empty() {
                eprintln!("missing predictions: {}", s.missing.join(", "));
            }
            if !s.undefined_required.is_empty() {
                eprintln!(
                    "required classes without IoU: {}",
                    s.undefined_required.join(", ")
                );
            }
            s.failed()
        }
        Command::Simulate {
            out,
            n_scenes,
            seed,
            scene,
            scene_preset,
            corruption,
            corruption_preset,
            catalog,
            semantic,
            jobs,
        } => {
            let s = simulate::run(&simulate::SimulateOptions {
                out_dir: out,
                n_scenes,
                seed,
                scene: source(scene, scene_preset),
                corruption: source(corruption, corruption_preset),
                catalog,
                semantic_format: match semantic {
                    SemanticArg::Probs => simulate::SemanticFormat::Probs,
                    SemanticArg::Labels => simulate::SemanticFormat::Labels,
                },
                jobs,
            })?;
            eprintln!("simulated {} scenes (seed {})", s.scenes, s.seed);
            false
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
