//! Run settings from `key = value` files and command-line flags. Keys are the
//! flag names with `_` for `-`.

use std::path::{Path, PathBuf};

use cvrnet_core::blocks::Width;
use cvrnet_core::data::{AugmentConfig, WeightMode};
use cvrnet_core::train::TrainConfig;
use cvrnet_core::ModelConfig;

use crate::{fs, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub fixed_split: bool,
    pub task: String,
    pub plan: Option<PathBuf>,
    pub fold: usize,
    pub out: Option<PathBuf>,
    pub input_h: usize,
    pub input_w: usize,
    pub width: Width,
    /// Drives weight initialization, batch shuffling and augmentation.
    pub seed: u64,
    pub train: TrainConfig,
    pub augment: bool,
    pub aug: AugmentConfig,
    pub preload: bool,
    /// Checkpoint whose name-matching entries seed the model before training.
    pub init: Option<PathBuf>,
    /// When false, epoch wall times are written as zero so that repeated
    /// runs produce byte-identical logs.
    pub record_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            fixed_split: false,
            task: "task".into(),
            plan: None,
            fold: 0,
            out: None,
            input_h: 224,
            input_w: 224,
            width: Width::ONE,
            seed: 0,
            train: TrainConfig::default(),
            augment: true,
            aug: AugmentConfig::default(),
            preload: false,
            init: None,
            record_time: true,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Usage(format!("{}: cannot parse `{}`", key, value)))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Usage(format!("{}: expected true or false, got `{}`", key, value))),
    }
}

/// `N` or `H×W` written as `HxW`.
fn parse_size(value: &str) -> Result<(usize, usize)> {
    let (h, w) = value.split_once('x').unwrap_or((value, value));
    Ok((parse("input_size", h.trim())?, parse("input_size", w.trim())?))
}

/// `n` or `n/d`.
pub fn parse_width(value: &str) -> Result<Width> {
    let (n, d) = value.split_once('/').unwrap_or((value, "1"));
    Ok(Width::new(parse("width", n.trim())?, parse("width", d.trim())?)?)
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    pub const KEYS: [&'static str; 30] = [
        "data", "fixed_split", "task", "plan", "fold", "out", "input_size", "width", "seed", "epochs", "batch_size", "lr", "beta1",
        "beta2", "epsilon", "amsgrad", "patience", "factor", "min_lr", "min_delta", "weight_mode", "augment", "rotation", "shift",
        "hflip", "vflip", "freeze", "preload", "init", "record_time",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "data" => self.data = path(value),
            "fixed_split" => self.fixed_split = parse_bool(key, value)?,
            "task" => self.task = value.to_string(),
            "plan" => self.plan = path(value),
            "fold" => self.fold = parse(key, value)?,
            "out" => self.out = path(value),
            "input_size" => (self.input_h, self.input_w) = parse_size(value)?,
            "width" => self.width = parse_width(value)?,
            "seed" => self.seed = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "lr" => t.lr0 = parse(key, value)?,
            "beta1" => t.beta1 = parse(key, value)?,
            "beta2" => t.beta2 = parse(key, value)?,
            "epsilon" => t.epsilon = parse(key, value)?,
            "amsgrad" => t.amsgrad = parse_bool(key, value)?,
            "patience" => t.plateau_patience = parse(key, value)?,
            "factor" => t.plateau_factor = parse(key, value)?,
            "min_lr" => t.min_lr = parse(key, value)?,
            "min_delta" => t.min_delta = parse(key, value)?,
            "weight_mode" => {
                t.weight_mode = match value {
                    "inverse_frequency" => WeightMode::InverseFrequency,
                    "proportional" => WeightMode::Proportional,
                    _ => return Err(Error::Usage(format!("weight_mode: expected inverse_frequency or proportional, got `{}`", value))),
                }
            }
            "augment" => self.augment = parse_bool(key, value)?,
            "rotation" => self.aug.rotation_deg_max = parse(key, value)?,
            "shift" => self.aug.shift_frac_max = parse(key, value)?,
            "hflip" => self.aug.hflip_prob = parse(key, value)?,
            "vflip" => self.aug.vflip_prob = parse(key, value)?,
            "freeze" => t.freeze_prefixes = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
            "preload" => self.preload = parse_bool(key, value)?,
            "init" => self.init = path(value),
            "record_time" => self.record_time = parse_bool(key, value)?,
            _ => return Err(Error::Usage(format!("unknown key `{}`", key))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        Some(match key {
            "data" => show(&self.data),
            "fixed_split" => self.fixed_split.to_string(),
            "task" => self.task.clone(),
            "plan" => show(&self.plan),
            "fold" => self.fold.to_string(),
            "out" => show(&self.out),
            "input_size" => format!("{}x{}", self.input_h, self.input_w),
            "width" => self.width.to_string(),
            "seed" => self.seed.to_string(),
            "epochs" => t.epochs.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "lr" => format!("{:e}", t.lr0),
            "beta1" => t.beta1.to_string(),
            "beta2" => t.beta2.to_string(),
            "epsilon" => format!("{:e}", t.epsilon),
            "amsgrad" => t.amsgrad.to_string(),
            "patience" => t.plateau_patience.to_string(),
            "factor" => t.plateau_factor.to_string(),
            "min_lr" => format!("{:e}", t.min_lr),
            "min_delta" => format!("{:e}", t.min_delta),
            "weight_mode" => match t.weight_mode {
                WeightMode::InverseFrequency => "inverse_frequency".into(),
                WeightMode::Proportional => "proportional".into(),
            },
            "augment" => self.augment.to_string(),
            "rotation" => self.aug.rotation_deg_max.to_string(),
            "shift" => self.aug.shift_frac_max.to_string(),
            "hflip" => self.aug.hflip_prob.to_string(),
            "vflip" => self.aug.vflip_prob.to_string(),
            "freeze" => t.freeze_prefixes.join(","),
            "preload" => self.preload.to_string(),
            "init" => show(&self.init),
            "record_time" => self.record_time.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines; blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("{}:{}: expected key = value", origin, i + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Usage(format!("{}:{}: `{}` set twice", origin, i + 1, key)));
            }
            self.set(key, value.trim()).map_err(|e| Error::Usage(format!("{}:{}: {}", origin, i + 1, e)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(&fs::read_text(path)?, &path.display().to_string())?;
        Ok(c)
    }

    /// Every key with its resolved value, in a form [`RunConfig::apply_text`] reads back.
    pub fn render(&self) -> String {
        Self::KEYS.iter().map(|k| format!("{} = {}\n", k, self.get(k).unwrap_or_default())).collect()
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut t = self.train.clone();
        t.seed = self.seed;
        t.augment = self.augment.then_some(AugmentConfig { seed: self.seed, ..self.aug });
        t
    }

    pub fn model_config(&self, num_classes: usize) -> ModelConfig {
        ModelConfig::scaled(self.input_h, self.input_w, num_classes, self.width)
    }
}
