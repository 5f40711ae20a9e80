//! Training configuration: loss mixing weights, schedules and sizes.
//! Every field is addressable through a flat key=value file or CLI flags.

use crate::data::PickMode;
use crate::error::{Error, Result};
use crate::models::Arch;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub arch: Arch,
    pub lambda_k: f64,
    pub lambda_i: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch: usize,
    /// Batch updates per task (sequence/grid/sentiment models).
    pub iters: usize,
    /// Total epochs (memory network).
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub strong: bool,
    pub aux_mse: bool,
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
    /// Memory iterations J.
    pub j_iterations: usize,
    pub invariants: usize,
    /// Cap on training examples per task after the fold split.
    pub train_size: Option<usize>,
    /// Embedding size; 0 means the architecture default.
    pub d: usize,
    pub log_every: usize,
    pub pick_mode: PickMode,
}

impl TrainConfig {
    pub fn new(arch: Arch) -> Self {
        let (lambda_k, lambda_i) = match arch {
            // Unified-only output for the feed-forward models.
            Arch::Umlp | Arch::Ucnn => (0.0, 1.0),
            Arch::Urnn => (1.0, 1.0),
            Arch::Umn => (1.0, 1.0),
        };
        TrainConfig {
            arch,
            lambda_k,
            lambda_i,
            tau: 0.1,
            lr: 0.001,
            batch: 64,
            iters: 2000,
            epochs: 300,
            pretrain_epochs: 40,
            strong: false,
            aux_mse: matches!(arch, Arch::Umn),
            weight_decay: 0.0,
            dropout: arch.default_dropout(),
            seed: 42,
            j_iterations: 3,
            invariants: 1,
            train_size: None,
            d: arch.default_dim(),
            log_every: 10,
            pick_mode: PickMode::Random,
        }
    }

    /// Plain (non-unifying) counterpart: swap the loss onto the original
    /// output only.
    pub fn plain(mut self) -> Self {
        self.lambda_k = 1.0;
        self.lambda_i = 0.0;
        self
    }

    pub fn unified(&self) -> bool {
        self.lambda_i > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_k", self.lambda_k),
            ("lambda_i", self.lambda_i),
            ("tau", self.tau),
            ("lr", self.lr),
            ("weight_decay", self.weight_decay),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::config(format!("{name} = {v} must be a nonnegative number")));
            }
        }
        if self.batch == 0 {
            return Err(Error::config("batch must be >= 1".to_string()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.j_iterations == 0 {
            return Err(Error::config("j_iterations must be >= 1".to_string()));
        }
        if self.invariants == 0 {
            return Err(Error::config("invariants must be >= 1".to_string()));
        }
        Ok(())
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("arch".into(), self.arch.name().to_string());
        m.insert("lambda_k".into(), self.lambda_k.to_string());
        m.insert("lambda_i".into(), self.lambda_i.to_string());
        m.insert("tau".into(), self.tau.to_string());
        m.insert("lr".into(), self.lr.to_string());
        m.insert("batch".into(), self.batch.to_string());
        m.insert("iters".into(), self.iters.to_string());
        m.insert("epochs".into(), self.epochs.to_string());
        m.insert("pretrain_epochs".into(), self.pretrain_epochs.to_string());
        m.insert("strong".into(), self.strong.to_string());
        m.insert("aux_mse".into(), self.aux_mse.to_string());
        m.insert("weight_decay".into(), self.weight_decay.to_string());
        m.insert("dropout".into(), self.dropout.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("j_iterations".into(), self.j_iterations.to_string());
        m.insert("invariants".into(), self.invariants.to_string());
        m.insert(
            "train_size".into(),
            self.train_size.map(|v| v.to_string()).unwrap_or_else(|| "none".into()),
        );
        m.insert("d".into(), self.d.to_string());
        m.insert("log_every".into(), self.log_every.to_string());
        m.insert(
            "pick_mode".into(),
            match self.pick_mode {
                PickMode::Random => "random".to_string(),
                PickMode::Dissimilar => "dissimilar".to_string(),
            },
        );
        m
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |k: &str, v: &str| Error::config(format!("bad value {v:?} for {k}"));
        match key {
            "arch" => self.arch = Arch::parse(value).ok_or_else(|| bad(key, value))?,
            "lambda_k" => self.lambda_k = value.parse().map_err(|_| bad(key, value))?,
            "lambda_i" => self.lambda_i = value.parse().map_err(|_| bad(key, value))?,
            "tau" => self.tau = value.parse().map_err(|_| bad(key, value))?,
            "lr" => self.lr = value.parse().map_err(|_| bad(key, value))?,
            "batch" => self.batch = value.parse().map_err(|_| bad(key, value))?,
            "iters" => self.iters = value.parse().map_err(|_| bad(key, value))?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad(key, value))?,
            "pretrain_epochs" => self.pretrain_epochs = value.parse().map_err(|_| bad(key, value))?,
            "strong" => self.strong = value.parse().map_err(|_| bad(key, value))?,
            "aux_mse" => self.aux_mse = value.parse().map_err(|_| bad(key, value))?,
            "weight_decay" => self.weight_decay = value.parse().map_err(|_| bad(key, value))?,
            "dropout" => self.dropout = value.parse().map_err(|_| bad(key, value))?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key, value))?,
            "j_iterations" => self.j_iterations = value.parse().map_err(|_| bad(key, value))?,
            "invariants" => self.invariants = value.parse().map_err(|_| bad(key, value))?,
            "train_size" => {
                self.train_size = if value == "none" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad(key, value))?)
                }
            }
            "d" => self.d = value.parse().map_err(|_| bad(key, value))?,
            "log_every" => self.log_every = value.parse().map_err(|_| bad(key, value))?,
            "pick_mode" => {
                self.pick_mode = PickMode::parse(value).ok_or_else(|| bad(key, value))?
            }
            other => return Err(Error::config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parse a flat key=value file over these defaults.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        self.to_map().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
