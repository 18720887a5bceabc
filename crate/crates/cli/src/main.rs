//! `manifool` command-line driver.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use manifool::geodesic::{curve_to_csv, RobustnessReport};
use manifool::pipeline::augment::craft_dataset;
use manifool::pipeline::experiment::{
    build_training_set, error_record, evaluate_model, load_splits, train_crafter, with_threads,
};
use manifool::pipeline::io::{load_model, save_dataset, save_image, save_model, write_file};
use manifool::pipeline::{run_and_write, AugmentMode, CraftOutcome, ExperimentConfig};
use manifool::seeds::{task_seed, Domain};
use manifool::classifier::train;
use manifool::{Error, Result};

#[derive(Parser)]
#[command(name = "manifool", version, about = "Geometric augmentation by boundary search on transformation groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic dataset (train and test splits) as PGM files.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train a classifier on the (optionally augmented) training split.
    Train {
        #[command(flatten)]
        common: Common,
        /// Augmentation applied before training.
        #[arg(long, default_value = "none")]
        mode: String,
        /// Crafting classifier directory, required for `--mode manifool`.
        #[arg(long)]
        crafter: Option<PathBuf>,
        /// Train with the crafter settings instead of the evaluated-model settings.
        #[arg(long)]
        as_crafter: bool,
    },
    /// Craft boundary samples for every training image against a classifier.
    Craft {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Write an augmented copy of the dataset.
    Augment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: String,
        #[arg(long)]
        crafter: Option<PathBuf>,
    },
    /// Accuracy, random-transform robustness and the robustness score of a classifier.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the full comparison across augmentation modes.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn crafter_for(mode: AugmentMode, crafter: Option<&Path>) -> Result<Option<manifool::Model64>> {
    match (mode, crafter) {
        (AugmentMode::Manifool, Some(dir)) => Ok(Some(load_model(dir)?)),
        (AugmentMode::Manifool, None) => Err(Error::Config("--mode manifool needs --crafter <dir>".into())),
        _ => Ok(None),
    }
}

fn gen_data(cfg: &ExperimentConfig) -> Result<String> {
    let (train_set, test_set) = load_splits(cfg)?;
    let manifest = save_dataset(&cfg.out_dir, &[("train", &train_set), ("test", &test_set)])?;
    Ok(format!("wrote {} images to {}", manifest.entries.len(), cfg.out_dir.display()))
}

fn train_cmd(cfg: &ExperimentConfig, mode: &str, crafter: Option<&Path>, as_crafter: bool) -> Result<String> {
    let mode: AugmentMode = mode.parse()?;
    let (train_set, _) = load_splits(cfg)?;
    let (model, acc) = if as_crafter {
        if mode != AugmentMode::None {
            return Err(Error::Config("crafters are trained without augmentation".into()));
        }
        train_crafter(cfg, &train_set)?
    } else {
        let crafter = crafter_for(mode, crafter)?;
        let (augmented, _) = build_training_set(cfg, mode, &train_set, crafter.as_ref())?;
        let tc = manifool::TrainConfig { seed: task_seed(cfg.seed, Domain::ModelTraining, 0), ..cfg.model_train.clone() };
        let trained = train(&augmented.dataset, cfg.model_arch, &tc)?;
        (trained.model, trained.train_accuracy)
    };
    save_model(&model, &cfg.out_dir)?;
    Ok(format!("train accuracy {acc:.4}; model written to {}", cfg.out_dir.display()))
}

fn craft_cmd(cfg: &ExperimentConfig, model_dir: &Path) -> Result<String> {
    let model = load_model(model_dir)?;
    let (train_set, _) = load_splits(cfg)?;
    let outcomes = craft_dataset(&train_set, &model, &cfg.craft)?;
    let mut csv = String::from("index,label,status,target_class,boundary_class,iterations,stuck_steps,distance,file\n");
    let mut crafted = 0;
    for (i, o) in outcomes.iter().enumerate() {
        let label = train_set.labels[i];
        match o {
            CraftOutcome::Misclassified => {
                let _ = writeln!(csv, "{i},{label},misclassified,,,,,,");
            }
            CraftOutcome::Crafted(r) | CraftOutcome::Failed(r) => {
                let status = if r.success { "crafted" } else { "failed" };
                let file = if r.success {
                    crafted += 1;
                    let name = format!("images/crafted_{i:05}.{}", if r.warped.channels() == 1 { "pgm" } else { "ppm" });
                    save_image(&r.warped, &cfg.out_dir.join(&name))?;
                    name
                } else {
                    String::new()
                };
                let _ = writeln!(
                    csv,
                    "{i},{label},{status},{},{},{},{},{:.6},{file}",
                    r.target_class, r.boundary_class, r.iterations, r.stuck_steps, r.distance
                );
            }
        }
    }
    write_file(&cfg.out_dir.join("crafted.csv"), csv.as_bytes())?;
    Ok(format!("crafted {crafted} of {} images", outcomes.len()))
}

fn augment_cmd(cfg: &ExperimentConfig, mode: &str, crafter: Option<&Path>) -> Result<String> {
    let mode: AugmentMode = mode.parse()?;
    let (train_set, test_set) = load_splits(cfg)?;
    let crafter = crafter_for(mode, crafter)?;
    let (augmented, _) = build_training_set(cfg, mode, &train_set, crafter.as_ref())?;
    save_dataset(&cfg.out_dir, &[("train", &augmented.dataset), ("test", &test_set)])?;
    let mut csv = String::from("index,source,provenance\n");
    for (i, (src, tag)) in augmented.source.iter().zip(&augmented.provenance).enumerate() {
        let _ = writeln!(csv, "{i},{src},{}", tag.name());
    }
    write_file(&cfg.out_dir.join("provenance.csv"), csv.as_bytes())?;
    Ok(format!("{} training images written to {}", augmented.dataset.len(), cfg.out_dir.display()))
}

fn evaluate_cmd(cfg: &ExperimentConfig, model_dir: &Path) -> Result<String> {
    let model = load_model(model_dir)?;
    let (_, test_set) = load_splits(cfg)?;
    let (clean, affine, projective, report, successes, attempts) = evaluate_model(cfg, &model, &test_set)?;
    let mut acc = String::from("mode,split,transform_kind,distance,accuracy,n\n");
    let _ = writeln!(acc, "model,test,none,0,{clean:.6},{}", test_set.len());
    for (kind, counts) in [("affine", &affine), ("projective", &projective)] {
        for (d, c) in cfg.eval_distances.iter().zip(counts) {
            let a = if c.trials == 0 { 0.0 } else { c.correct as f64 / c.trials as f64 };
            let _ = writeln!(acc, "model,test,{kind},{d},{a:.6},{}", c.trials);
        }
    }
    write_file(&cfg.out_dir.join("accuracy.csv"), acc.as_bytes())?;
    write_file(&cfg.out_dir.join("curve.csv"), curve_to_csv(&report.curve).as_bytes())?;
    write_file(&cfg.out_dir.join("robustness.csv"), robustness_line(&report, successes, attempts).as_bytes())?;
    Ok(format!("clean accuracy {clean:.4}; results in {}", cfg.out_dir.display()))
}

fn robustness_line(r: &RobustnessReport, successes: usize, attempts: usize) -> String {
    let rho = r.rho.map(|v| format!("{v:.6}")).unwrap_or_default();
    let r_tau = r.r_tau.map(|v| format!("{v:.6}")).unwrap_or_else(|| "not_reached".into());
    format!("rho,rho_successes,rho_attempts,r_tau,threshold\n{rho},{successes},{attempts},{r_tau},{}\n", r.threshold)
}

fn dispatch(command: Command) -> (Result<String>, Option<PathBuf>) {
    let common = match &command {
        Command::GenData { common }
        | Command::Train { common, .. }
        | Command::Craft { common, .. }
        | Command::Augment { common, .. }
        | Command::Evaluate { common, .. }
        | Command::Report { common } => common.clone(),
    };
    let cfg = match load_config(&common) {
        Ok(c) => c,
        Err(e) => return (Err(e), common.out),
    };
    let out = Some(cfg.out_dir.clone());
    let result = match command {
        Command::Report { .. } => run_and_write(&cfg).map(|r| {
            let mut s = String::new();
            for m in &r.modes {
                let _ = writeln!(s, "{:>9}: clean accuracy {:.4}, rho {:?}", m.mode.name(), m.clean_accuracy, m.robustness.rho);
            }
            let _ = write!(s, "results in {}", cfg.out_dir.display());
            s
        }),
        command => with_threads(cfg.threads, || match command {
            Command::GenData { .. } => gen_data(&cfg),
            Command::Train { mode, crafter, as_crafter, .. } => train_cmd(&cfg, &mode, crafter.as_deref(), as_crafter),
            Command::Craft { model, .. } => craft_cmd(&cfg, &model),
            Command::Augment { mode, crafter, .. } => augment_cmd(&cfg, &mode, crafter.as_deref()),
            Command::Evaluate { model, .. } => evaluate_cmd(&cfg, &model),
            Command::Report { .. } => unreachable!("handled above"),
        }),
    };
    (result, out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        (Ok(msg), _) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        (Err(e), out) => {
            let record = error_record(&e);
            eprint!("{record}");
            if let Some(dir) = out {
                if std::fs::create_dir_all(&dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.txt"), &record);
                }
            }
            ExitCode::FAILURE
        }
    }
}
