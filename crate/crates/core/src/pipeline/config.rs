//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::classifier::{Architecture, TrainConfig};
use crate::error::{Error, Result};
use crate::group::GroupKind;
use crate::manifool::{CraftConfig, TargetPolicy};
use crate::pipeline::augment::AugmentMode;
use crate::pipeline::synthetic::SyntheticSpec;

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Dataset directory with a manifest; synthetic data is generated when absent.
    pub data_dir: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
    pub crafter_arch: Architecture,
    pub crafter_train: TrainConfig,
    pub model_arch: Architecture,
    pub model_train: TrainConfig,
    pub craft: CraftConfig,
    pub modes: Vec<AugmentMode>,
    pub eval_distances: Vec<f64>,
    /// Random transforms per test image and distance.
    pub trials: usize,
    pub threshold: f64,
    /// Test images crafted for the robustness score; 0 means all.
    pub rho_samples: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        ExperimentConfig {
            data_dir: None,
            synthetic: SyntheticSpec::default(),
            crafter_arch: Architecture::Mlp { hidden: 32 },
            crafter_train: train.clone(),
            model_arch: Architecture::Mlp { hidden: 32 },
            model_train: train,
            craft: CraftConfig::default(),
            modes: AugmentMode::ALL.to_vec(),
            eval_distances: vec![0.5, 1.0, 2.0, 3.0],
            trials: 5,
            threshold: crate::geodesic::DEFAULT_THRESHOLD,
            rho_samples: 0,
            seed: 42,
            out_dir: PathBuf::from("out"),
            threads: 0,
        }
    }
}

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value.parse().map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list<V: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<V>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

fn join<V: ToString>(values: &[V]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn set_train(cfg: &mut TrainConfig, field: &str, key: &str, value: &str) -> Result<bool> {
    match field {
        "epochs" => cfg.epochs = parse(key, value)?,
        "batch_size" => cfg.batch_size = parse(key, value)?,
        "learning_rate" => cfg.learning_rate = parse(key, value)?,
        "momentum" => cfg.momentum = parse(key, value)?,
        "weight_decay" => cfg.weight_decay = parse(key, value)?,
        "weighting" => cfg.weighting = value.parse()?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn write_train(out: &mut String, prefix: &str, arch: Architecture, cfg: &TrainConfig) {
    let _ = writeln!(out, "{prefix}_arch = {arch}");
    let _ = writeln!(out, "{prefix}_epochs = {}", cfg.epochs);
    let _ = writeln!(out, "{prefix}_batch_size = {}", cfg.batch_size);
    let _ = writeln!(out, "{prefix}_learning_rate = {}", cfg.learning_rate);
    let _ = writeln!(out, "{prefix}_momentum = {}", cfg.momentum);
    let _ = writeln!(out, "{prefix}_weight_decay = {}", cfg.weight_decay);
    let _ = writeln!(out, "{prefix}_weighting = {}", cfg.weighting);
}

impl ExperimentConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.synthetic;
        match key {
            "data_dir" => self.data_dir = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "classes" => s.classes = parse(key, value)?,
            "samples_per_class" => s.samples_per_class = parse(key, value)?,
            "test_per_class" => s.test_per_class = parse(key, value)?,
            "image_size" => s.size = parse(key, value)?,
            "max_rotation_deg" => s.max_rotation_deg = parse(key, value)?,
            "max_offset" => s.max_offset = parse(key, value)?,
            "scale_min" => s.scale_range.0 = parse(key, value)?,
            "scale_max" => s.scale_range.1 = parse(key, value)?,
            "noise" => s.noise = parse(key, value)?,
            "stroke" => s.stroke = parse(key, value)?,
            "crafter_arch" => self.crafter_arch = value.parse()?,
            "model_arch" => self.model_arch = value.parse()?,
            "craft_max_iter" => self.craft.max_iter = parse(key, value)?,
            "craft_momentum" => self.craft.momentum = parse(key, value)?,
            "craft_step_init" => self.craft.step_init = parse(key, value)?,
            "craft_shrink" => self.craft.shrink = parse(key, value)?,
            "craft_line_search_tries" => self.craft.line_search_tries = parse(key, value)?,
            "craft_backtrack_bisections" => self.craft.backtrack_bisections = parse(key, value)?,
            "craft_group" => self.craft.group = value.parse::<GroupKind>()?,
            "craft_targets" => self.craft.target_policy = value.parse::<TargetPolicy>()?,
            "path_segments" => self.craft.path_segments = parse(key, value)?,
            "modes" => self.modes = parse_list::<AugmentMode>(key, value)?,
            "eval_distances" => self.eval_distances = parse_list(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "rho_samples" => self.rho_samples = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "threads" => self.threads = parse(key, value)?,
            _ => {
                let handled = if let Some(field) = key.strip_prefix("crafter_") {
                    set_train(&mut self.crafter_train, field, key, value)?
                } else if let Some(field) = key.strip_prefix("model_") {
                    set_train(&mut self.model_train, field, key, value)?
                } else {
                    false
                };
                if !handled {
                    return Err(Error::Config(format!("unknown key `{key}`")));
                }
            }
        }
        Ok(())
    }

    /// Parse config text on top of the defaults. `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_dir.is_none() {
            self.synthetic.validate()?;
        }
        self.crafter_train.validate()?;
        self.model_train.validate()?;
        self.craft.validate()?;
        if self.modes.is_empty() {
            return Err(Error::Config("at least one augmentation mode is required".into()));
        }
        if self.eval_distances.iter().any(|&r| !(r > 0.0)) || self.eval_distances.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("eval_distances must be positive and strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1]", self.threshold)));
        }
        Ok(())
    }

    /// Render as config text that parses back to `self`.
    pub fn to_config_string(&self) -> String {
        let s = &self.synthetic;
        let mut out = String::new();
        let _ = writeln!(out, "data_dir = {}", self.data_dir.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        let _ = writeln!(out, "classes = {}", s.classes);
        let _ = writeln!(out, "samples_per_class = {}", s.samples_per_class);
        let _ = writeln!(out, "test_per_class = {}", s.test_per_class);
        let _ = writeln!(out, "image_size = {}", s.size);
        let _ = writeln!(out, "max_rotation_deg = {}", s.max_rotation_deg);
        let _ = writeln!(out, "max_offset = {}", s.max_offset);
        let _ = writeln!(out, "scale_min = {}", s.scale_range.0);
        let _ = writeln!(out, "scale_max = {}", s.scale_range.1);
        let _ = writeln!(out, "noise = {}", s.noise);
        let _ = writeln!(out, "stroke = {}", s.stroke);
        write_train(&mut out, "crafter", self.crafter_arch, &self.crafter_train);
        write_train(&mut out, "model", self.model_arch, &self.model_train);
        let c = &self.craft;
        let _ = writeln!(out, "craft_max_iter = {}", c.max_iter);
        let _ = writeln!(out, "craft_momentum = {}", c.momentum);
        let _ = writeln!(out, "craft_step_init = {}", c.step_init);
        let _ = writeln!(out, "craft_shrink = {}", c.shrink);
        let _ = writeln!(out, "craft_line_search_tries = {}", c.line_search_tries);
        let _ = writeln!(out, "craft_backtrack_bisections = {}", c.backtrack_bisections);
        let _ = writeln!(out, "craft_group = {}", c.group);
        let _ = writeln!(out, "craft_targets = {}", c.target_policy);
        let _ = writeln!(out, "path_segments = {}", c.path_segments);
        let _ = writeln!(out, "modes = {}", join(&self.modes));
        let _ = writeln!(out, "eval_distances = {}", join(&self.eval_distances));
        let _ = writeln!(out, "trials = {}", self.trials);
        let _ = writeln!(out, "threshold = {}", self.threshold);
        let _ = writeln!(out, "rho_samples = {}", self.rho_samples);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "out = {}", self.out_dir.display());
        let _ = writeln!(out, "threads = {}", self.threads);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ClassWeighting;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse_str(&cfg.to_config_string()).unwrap(), cfg);
    }

    #[test]
    fn settings_apply() {
        let cfg = ExperimentConfig::parse_str(
            "# comment\nclasses = 4\nmodel_arch = linear\ncrafter_epochs = 5  # trailing\nmodes = none, manifool\neval_distances = 1,2\ncraft_targets = top:1\n",
        )
        .unwrap();
        assert_eq!(cfg.synthetic.classes, 4);
        assert_eq!(cfg.model_arch, Architecture::Linear);
        assert_eq!(cfg.crafter_train.epochs, 5);
        assert_eq!(cfg.modes, vec![AugmentMode::None, AugmentMode::Manifool]);
        assert_eq!(cfg.eval_distances, vec![1.0, 2.0]);
        assert_eq!(cfg.craft.target_policy, TargetPolicy::TopK(1));
        assert_eq!(cfg.model_train.weighting, ClassWeighting::MedianFrequency);
    }

    #[test]
    fn unknown_and_malformed_keys_fail() {
        assert!(matches!(ExperimentConfig::parse_str("colour = red"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse_str("model_colour = red"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse_str("trials"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse_str("trials = many"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse_str("modes = none,dcgan"), Err(Error::Config(_))));
    }

    #[test]
    fn validation_catches_bad_distances() {
        let mut cfg = ExperimentConfig::default();
        cfg.eval_distances = vec![2.0, 1.0];
        assert!(cfg.validate().is_err());
        cfg.eval_distances = vec![1.0];
        cfg.craft.group = GroupKind::Projective;
        assert!(cfg.validate().is_err());
    }
}
