//! `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use evokg::model::{Dims, Numerics};
use evokg::train::TrainConfig;

use crate::CliError;

/// Every setting of a run, with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub events: Option<PathBuf>,
    pub has_header: bool,
    pub split_time: Option<f64>,
    pub split_fraction: f64,
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,

    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub relation_dim: usize,
    pub window_steps: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub weight_scale: f64,
    pub max_iter: usize,
    pub gap_floor: f64,
    pub score_clamp: f64,
    pub expectation_offset: bool,

    pub n_slides: usize,
    pub subject_slot: bool,

    pub n_entities: usize,
    pub n_relations: usize,
    pub n_events: usize,
    pub truth_scale: f64,

    pub gc_entities: usize,
    pub gc_relations: usize,
    pub gc_dim: usize,
    pub gc_history: usize,
    pub gc_window: usize,
    pub gc_scale: f64,
    pub fd_step: f64,
    pub threshold: f64,
    pub zero_params: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            events: None,
            has_header: false,
            split_time: None,
            split_fraction: 0.8,
            checkpoint: None,
            out: PathBuf::from("out"),
            seed: 0,
            embed_dim: train.dims.embed,
            hidden_dim: train.dims.hidden,
            relation_dim: train.dims.relation,
            window_steps: train.window_steps,
            learning_rate: train.learning_rate,
            clip_norm: train.clip_norm,
            weight_scale: train.weight_scale,
            max_iter: train.max_iter,
            gap_floor: train.numerics.gap_floor,
            score_clamp: train.numerics.score_clamp,
            expectation_offset: train.numerics.expectation_offset,
            n_slides: 12,
            subject_slot: false,
            n_entities: 10,
            n_relations: 2,
            n_events: 1000,
            truth_scale: 1.0,
            gc_entities: 4,
            gc_relations: 2,
            gc_dim: 3,
            gc_history: 3,
            gc_window: 6,
            gc_scale: 0.5,
            fd_step: 1e-5,
            threshold: 1e-4,
            zero_params: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: cannot parse {value:?}")))
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "events",
        "has_header",
        "split_time",
        "split_fraction",
        "checkpoint",
        "out",
        "seed",
        "embed_dim",
        "hidden_dim",
        "relation_dim",
        "window_steps",
        "learning_rate",
        "clip_norm",
        "weight_scale",
        "max_iter",
        "gap_floor",
        "score_clamp",
        "expectation_offset",
        "n_slides",
        "subject_slot",
        "n_entities",
        "n_relations",
        "n_events",
        "truth_scale",
        "gc_entities",
        "gc_relations",
        "gc_dim",
        "gc_history",
        "gc_window",
        "gc_scale",
        "fd_step",
        "threshold",
        "zero_params",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "events" => self.events = opt_path(v),
            "has_header" => self.has_header = parse(key, v)?,
            "split_time" => {
                self.split_time = if v.is_empty() {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "split_fraction" => self.split_fraction = parse(key, v)?,
            "checkpoint" => self.checkpoint = opt_path(v),
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            "embed_dim" => self.embed_dim = parse(key, v)?,
            "hidden_dim" => self.hidden_dim = parse(key, v)?,
            "relation_dim" => self.relation_dim = parse(key, v)?,
            "window_steps" => self.window_steps = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "clip_norm" => self.clip_norm = parse(key, v)?,
            "weight_scale" => self.weight_scale = parse(key, v)?,
            "max_iter" => self.max_iter = parse(key, v)?,
            "gap_floor" => self.gap_floor = parse(key, v)?,
            "score_clamp" => self.score_clamp = parse(key, v)?,
            "expectation_offset" => self.expectation_offset = parse(key, v)?,
            "n_slides" => self.n_slides = parse(key, v)?,
            "subject_slot" => self.subject_slot = parse(key, v)?,
            "n_entities" => self.n_entities = parse(key, v)?,
            "n_relations" => self.n_relations = parse(key, v)?,
            "n_events" => self.n_events = parse(key, v)?,
            "truth_scale" => self.truth_scale = parse(key, v)?,
            "gc_entities" => self.gc_entities = parse(key, v)?,
            "gc_relations" => self.gc_relations = parse(key, v)?,
            "gc_dim" => self.gc_dim = parse(key, v)?,
            "gc_history" => self.gc_history = parse(key, v)?,
            "gc_window" => self.gc_window = parse(key, v)?,
            "gc_scale" => self.gc_scale = parse(key, v)?,
            "fd_step" => self.fd_step = parse(key, v)?,
            "threshold" => self.threshold = parse(key, v)?,
            "zero_params" => self.zero_params = parse(key, v)?,
            _ => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "events" => show_path(&self.events),
            "has_header" => self.has_header.to_string(),
            "split_time" => self.split_time.map(|t| t.to_string()).unwrap_or_default(),
            "split_fraction" => self.split_fraction.to_string(),
            "checkpoint" => show_path(&self.checkpoint),
            "out" => self.out.display().to_string(),
            "seed" => self.seed.to_string(),
            "embed_dim" => self.embed_dim.to_string(),
            "hidden_dim" => self.hidden_dim.to_string(),
            "relation_dim" => self.relation_dim.to_string(),
            "window_steps" => self.window_steps.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "clip_norm" => self.clip_norm.to_string(),
            "weight_scale" => self.weight_scale.to_string(),
            "max_iter" => self.max_iter.to_string(),
            "gap_floor" => self.gap_floor.to_string(),
            "score_clamp" => self.score_clamp.to_string(),
            "expectation_offset" => self.expectation_offset.to_string(),
            "n_slides" => self.n_slides.to_string(),
            "subject_slot" => self.subject_slot.to_string(),
            "n_entities" => self.n_entities.to_string(),
            "n_relations" => self.n_relations.to_string(),
            "n_events" => self.n_events.to_string(),
            "truth_scale" => self.truth_scale.to_string(),
            "gc_entities" => self.gc_entities.to_string(),
            "gc_relations" => self.gc_relations.to_string(),
            "gc_dim" => self.gc_dim.to_string(),
            "gc_history" => self.gc_history.to_string(),
            "gc_window" => self.gc_window.to_string(),
            "gc_scale" => self.gc_scale.to_string(),
            "fd_step" => self.fd_step.to_string(),
            "threshold" => self.threshold.to_string(),
            "zero_params" => self.zero_params.to_string(),
            _ => unreachable!("key list and getter out of sync: {key}"),
        }
    }

    /// Parses `key = value` lines. `#` starts a comment.
    pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
        let mut pairs = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected `key = value`", i + 1))
            })?;
            pairs.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(pairs)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("reading config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        for (k, v) in Self::parse_pairs(&text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    /// Resolved config in the same `key = value` format it is read from.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# resolved run configuration\n");
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    pub fn dims(&self) -> Result<Dims, CliError> {
        Dims::new(self.embed_dim, self.hidden_dim, self.relation_dim).map_err(CliError::from_config)
    }

    pub fn numerics(&self) -> Numerics {
        Numerics {
            gap_floor: self.gap_floor,
            score_clamp: self.score_clamp,
            expectation_offset: self.expectation_offset,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let cfg = TrainConfig {
            window_steps: self.window_steps,
            learning_rate: self.learning_rate,
            clip_norm: self.clip_norm,
            weight_scale: self.weight_scale,
            max_iter: self.max_iter,
            seed: self.seed,
            dims: self.dims()?,
            numerics: self.numerics(),
        };
        cfg.validate().map_err(CliError::from_config)?;
        Ok(cfg)
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(m.to_string()));
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad("split_fraction must lie in (0, 1)");
        }
        if self.n_slides == 0 {
            return bad("n_slides must be at least 1");
        }
        if !(self.fd_step > 0.0) {
            return bad("fd_step must be positive");
        }
        if !(self.threshold > 0.0) {
            return bad("threshold must be positive");
        }
        if !(self.truth_scale >= 0.0) || !(self.gc_scale >= 0.0) {
            return bad("truth_scale and gc_scale must be non-negative");
        }
        if let Some(p) = &self.events {
            if !p.exists() {
                return Err(CliError::Usage(format!(
                    "events file {} does not exist",
                    p.display()
                )));
            }
        }
        if let Some(p) = &self.checkpoint {
            if !p.exists() {
                return Err(CliError::Usage(format!(
                    "checkpoint {} does not exist",
                    p.display()
                )));
            }
        }
        self.train_config().map(|_| ())
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join("checkpoint.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("learning_rate", "0.01").unwrap();
        cfg.set("split_time", "12.5").unwrap();
        let text = cfg.to_text();
        let mut back = RunConfig::default();
        for (k, v) in RunConfig::parse_pairs(&text).unwrap() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_blank_lines() {
        let pairs =
            RunConfig::parse_pairs("# header\n\nseed = 7 # trailing\nout=runs/a\n").unwrap();
        assert_eq!(pairs["seed"], "7");
        assert_eq!(pairs["out"], "runs/a");
        assert!(RunConfig::parse_pairs("no equals sign").is_err());
    }

    #[test]
    fn defaults_echo_training_settings() {
        let text = RunConfig::default().to_text();
        assert!(text.contains("\nwindow_steps = 200\n"));
        assert!(text.contains("\nlearning_rate = 0.0005\n"));
        assert!(text.contains("\nweight_scale = 0.1\n"));
        assert!(text.contains("\nn_slides = 12\n"));
    }

    #[test]
    fn unknown_key_is_a_usage_error() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("batch", "3"), Err(CliError::Usage(_))));
        assert!(matches!(cfg.set("seed", "x"), Err(CliError::Usage(_))));
    }
}
