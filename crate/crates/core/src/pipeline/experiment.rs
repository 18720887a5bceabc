//! The end-to-end experiment: augment, train, evaluate, report.

use std::fmt::Write as _;
use std::path::Path;

use crate::classifier::{accuracy, train, Architecture, LabeledDataset, Model, TrainConfig};
use crate::error::{Error, Result};
use crate::geodesic::{curve_from_counts, curve_to_csv, evaluate_random_transforms, robustness_score, CurvePoint, RobustnessReport, TrialCounts};
use crate::group::{GeneratorSet, GroupKind};
use crate::manifool::{CraftConfig, ManiFoolResult};
use crate::pipeline::augment::{augment_erasing, augment_manifool, augment_random, AugmentMode, Augmented, CraftOutcome, Provenance};
use crate::pipeline::config::ExperimentConfig;
use crate::pipeline::io::{load_dataset, write_file};
use crate::pipeline::synthetic::{generate_synthetic_dataset, generate_synthetic_test_set};
use crate::seeds::{task_seed, Domain};

/// One row of the accuracy table.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyRow {
    pub mode: AugmentMode,
    pub split: &'static str,
    /// `none`, `affine` or `projective`.
    pub transform_kind: &'static str,
    pub distance: f64,
    pub accuracy: f64,
    pub n: usize,
}

/// Crafting statistics of the `manifool` training set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AugmentSummary {
    pub crafted: usize,
    pub failed: usize,
    pub misclassified: usize,
    pub crafter_train_accuracy: f64,
}

/// Results for one augmentation mode.
#[derive(Clone, Debug)]
pub struct ModeReport {
    pub mode: AugmentMode,
    pub train_size: usize,
    pub train_accuracy: f64,
    pub clean_accuracy: f64,
    pub affine: Vec<TrialCounts>,
    pub projective: Vec<TrialCounts>,
    pub robustness: RobustnessReport,
    /// Crafting successes behind `robustness.rho`.
    pub rho_successes: usize,
    pub rho_attempts: usize,
    pub augment: Option<AugmentSummary>,
}

impl ModeReport {
    pub fn accuracy_rows(&self, distances: &[f64], test_size: usize) -> Vec<AccuracyRow> {
        let mut rows = vec![
            AccuracyRow { mode: self.mode, split: "train", transform_kind: "none", distance: 0.0, accuracy: self.train_accuracy, n: self.train_size },
            AccuracyRow { mode: self.mode, split: "test", transform_kind: "none", distance: 0.0, accuracy: self.clean_accuracy, n: test_size },
        ];
        for (kind, counts) in [("affine", &self.affine), ("projective", &self.projective)] {
            for (&distance, c) in distances.iter().zip(counts) {
                let accuracy = if c.trials == 0 { 0.0 } else { c.correct as f64 / c.trials as f64 };
                rows.push(AccuracyRow { mode: self.mode, split: "test", transform_kind: kind, distance, accuracy, n: c.trials });
            }
        }
        rows
    }
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub train_size: usize,
    pub test_size: usize,
    pub modes: Vec<ModeReport>,
}

impl ExperimentReport {
    pub fn mode(&self, mode: AugmentMode) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    pub fn accuracy_csv(&self) -> String {
        let mut out = String::from("mode,split,transform_kind,distance,accuracy,n\n");
        for m in &self.modes {
            for r in m.accuracy_rows(&self.config.eval_distances, self.test_size) {
                let _ = writeln!(out, "{},{},{},{},{:.6},{}", r.mode, r.split, r.transform_kind, r.distance, r.accuracy, r.n);
            }
        }
        out
    }

    pub fn robustness_csv(&self) -> String {
        let mut out = String::from("mode,rho,rho_successes,rho_attempts,r_tau,threshold\n");
        for m in &self.modes {
            let rho = m.robustness.rho.map(|v| format!("{v:.6}")).unwrap_or_default();
            let r_tau = m.robustness.r_tau.map(|v| format!("{v:.6}")).unwrap_or_else(|| "not_reached".into());
            let _ = writeln!(out, "{},{rho},{},{},{r_tau},{}", m.mode, m.rho_successes, m.rho_attempts, m.robustness.threshold);
        }
        out
    }

    pub fn augmentation_csv(&self) -> String {
        let mut out = String::from("mode,train_size,crafted,failed,misclassified,crafter_train_accuracy\n");
        for m in &self.modes {
            let a = m.augment.unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{:.6}", m.mode, m.train_size, a.crafted, a.failed, a.misclassified, a.crafter_train_accuracy);
        }
        out
    }

    /// Write every CSV plus the run manifest into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("accuracy.csv"), self.accuracy_csv().as_bytes())?;
        write_file(&dir.join("robustness.csv"), self.robustness_csv().as_bytes())?;
        write_file(&dir.join("augmentation.csv"), self.augmentation_csv().as_bytes())?;
        for m in &self.modes {
            write_file(&dir.join(format!("curve_{}.csv", m.mode)), curve_to_csv(&m.robustness.curve).as_bytes())?;
        }
        let mut manifest = String::from("# run manifest; re-running with this file as --config reproduces every CSV\n");
        let _ = writeln!(manifest, "# manifool {}", env!("CARGO_PKG_VERSION"));
        manifest.push_str(&self.config.to_config_string());
        write_file(&dir.join("run_manifest.txt"), manifest.as_bytes())
    }
}

/// Machine-readable record of a failed run.
pub fn error_record(err: &Error) -> String {
    let message = err.to_string().replace('\n', " ");
    format!("status = error\nkind = {}\nmessage = {message}\n", err.kind())
}

/// Train and test splits for `cfg`: from `data_dir` when set, synthetic otherwise.
pub fn load_splits(cfg: &ExperimentConfig) -> Result<(LabeledDataset<f64>, LabeledDataset<f64>)> {
    match &cfg.data_dir {
        Some(dir) => {
            let train = load_dataset(dir, "train")?;
            let test = load_dataset(dir, "test")?;
            Ok((train, test))
        }
        None => Ok((generate_synthetic_dataset(&cfg.synthetic)?, generate_synthetic_test_set(&cfg.synthetic)?)),
    }
}

fn train_with(dataset: &LabeledDataset<f64>, arch: Architecture, base: &TrainConfig, seed: u64) -> Result<(Model<f64>, f64)> {
    let cfg = TrainConfig { seed, ..base.clone() };
    let trained = train(dataset, arch, &cfg)?;
    Ok((trained.model, trained.train_accuracy))
}

/// Train the crafting classifier on the training split.
pub fn train_crafter(cfg: &ExperimentConfig, train_set: &LabeledDataset<f64>) -> Result<(Model<f64>, f64)> {
    train_with(train_set, cfg.crafter_arch, &cfg.crafter_train, task_seed(cfg.seed, Domain::CrafterTraining, 0))
}

/// Build the augmented training set of one mode.
pub fn build_training_set(
    cfg: &ExperimentConfig,
    mode: AugmentMode,
    train_set: &LabeledDataset<f64>,
    crafter: Option<&Model<f64>>,
) -> Result<(Augmented<f64>, Vec<CraftOutcome<f64>>)> {
    Ok(match mode {
        AugmentMode::None => (Augmented::unchanged(train_set), Vec::new()),
        AugmentMode::Random => (augment_random(train_set, cfg.seed)?, Vec::new()),
        AugmentMode::Erasing => (augment_erasing(train_set, cfg.seed)?, Vec::new()),
        AugmentMode::Manifool => {
            let crafter = crafter.ok_or_else(|| Error::Precondition("manifool augmentation needs a crafter".into()))?;
            augment_manifool(train_set, crafter, &cfg.craft, cfg.seed)?
        }
    })
}

/// Craft against `model` on (a prefix of) the test images and average the distances.
pub fn robustness_against(
    model: &Model<f64>,
    test: &LabeledDataset<f64>,
    craft: &CraftConfig,
    samples: usize,
) -> Result<(Option<f64>, usize, usize)> {
    let n = if samples == 0 { test.len() } else { samples.min(test.len()) };
    let subset = LabeledDataset::new(test.images[..n].to_vec(), test.labels[..n].to_vec(), test.class_names.clone())?;
    let outcomes = crate::pipeline::augment::craft_dataset(&subset, model, craft)?;
    let results: Vec<ManiFoolResult<f64>> = outcomes.iter().filter_map(|o| o.result().cloned()).collect();
    let attempts = results.len();
    let successes = results.iter().filter(|r| r.success).count();
    let rho = match robustness_score(&results) {
        Ok(v) => Some(v),
        Err(Error::NoSamples) => None,
        Err(e) => return Err(e),
    };
    Ok((rho, successes, attempts))
}

/// Evaluate a trained model: clean, random affine, random projective, curve, ρ̃.
pub fn evaluate_model(
    cfg: &ExperimentConfig,
    model: &Model<f64>,
    test: &LabeledDataset<f64>,
) -> Result<(f64, Vec<TrialCounts>, Vec<TrialCounts>, RobustnessReport, usize, usize)> {
    let (h, w, _) = test.image_shape()?;
    let clean = accuracy(model, test);
    let affine_basis = GeneratorSet::for_image(GroupKind::Affine, h, w)?;
    let projective_basis = GeneratorSet::for_image(GroupKind::Projective, h, w)?;
    let d = &cfg.eval_distances;
    let affine = evaluate_random_transforms(model, &test.images, &test.labels, &affine_basis, d, cfg.trials, cfg.seed, Domain::AffineEvaluation)?;
    let projective =
        evaluate_random_transforms(model, &test.images, &test.labels, &projective_basis, d, cfg.trials, cfg.seed, Domain::ProjectiveEvaluation)?;
    let curve: Vec<CurvePoint> = curve_from_counts(d, &affine);
    let (rho, successes, attempts) = robustness_against(model, test, &cfg.craft, cfg.rho_samples)?;
    Ok((clean, affine, projective, RobustnessReport::new(rho, curve, cfg.threshold), successes, attempts))
}

fn summarize(outcomes: &[CraftOutcome<f64>], crafter_train_accuracy: f64) -> AugmentSummary {
    let mut s = AugmentSummary { crafter_train_accuracy, ..AugmentSummary::default() };
    for o in outcomes {
        match o {
            CraftOutcome::Crafted(_) => s.crafted += 1,
            CraftOutcome::Failed(_) => s.failed += 1,
            CraftOutcome::Misclassified => s.misclassified += 1,
        }
    }
    s
}

fn run_inner(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (train_set, test_set) = load_splits(cfg)?;
    let crafter = if cfg.modes.contains(&AugmentMode::Manifool) { Some(train_crafter(cfg, &train_set)?) } else { None };
    let model_seed = task_seed(cfg.seed, Domain::ModelTraining, 0);
    let mut modes = Vec::with_capacity(cfg.modes.len());
    for &mode in &cfg.modes {
        let (augmented, outcomes) = build_training_set(cfg, mode, &train_set, crafter.as_ref().map(|c| &c.0))?;
        debug_assert!(mode == AugmentMode::None || augmented.count(Provenance::Original) * 2 == augmented.dataset.len());
        let (model, train_accuracy) = train_with(&augmented.dataset, cfg.model_arch, &cfg.model_train, model_seed)?;
        let (clean, affine, projective, robustness, rho_successes, rho_attempts) = evaluate_model(cfg, &model, &test_set)?;
        modes.push(ModeReport {
            mode,
            train_size: augmented.dataset.len(),
            train_accuracy,
            clean_accuracy: clean,
            affine,
            projective,
            robustness,
            rho_successes,
            rho_attempts,
            augment: crafter.as_ref().filter(|_| mode == AugmentMode::Manifool).map(|c| summarize(&outcomes, c.1)),
        });
    }
    Ok(ExperimentReport { config: cfg.clone(), train_size: train_set.len(), test_size: test_set.len(), modes })
}

/// Run `cfg` on a thread pool of `cfg.threads` workers. Results do not depend on the
/// thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    with_threads(cfg.threads, || run_inner(cfg))
}

/// Run `f` inside a rayon pool of `threads` workers (0: rayon's default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(f)
}

/// Run and write outputs into `cfg.out_dir`; on failure write `error.txt` there too.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let result = run_experiment(cfg).and_then(|report| {
        report.write(&cfg.out_dir)?;
        Ok(report)
    });
    if let Err(e) = &result {
        if std::fs::create_dir_all(&cfg.out_dir).is_ok() {
            let _ = std::fs::write(cfg.out_dir.join("error.txt"), error_record(e));
        }
    }
    result
}
