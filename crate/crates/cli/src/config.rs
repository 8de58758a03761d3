//! Run configuration: one JSON document with every default embedded.

use std::path::{Path, PathBuf};

use molvae::gpbo::BoConfig;
use molvae::latentopt::{AscentConfig, PredictorConfig};
use molvae::scores::RingPenaltyMode;
use molvae::vae::{TrainConfig, VaeConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "MOLVAE_WORKERS";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    #[default]
    Logp,
    External,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    pub property: PropertyKind,
    /// Atom-contribution table; the bundled one when absent.
    pub logp_table: Option<PathBuf>,
    /// Required for `external`.
    pub property_table: Option<PathBuf>,
    pub ring_mode: RingPenaltyMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoSettings {
    #[serde(flatten)]
    pub run: BoConfig,
    /// Corpus molecules encoded as the initial GP data; 0 means all.
    pub init_points: usize,
}

impl Default for BoSettings {
    fn default() -> Self {
        BoSettings { run: BoConfig::default(), init_points: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreSettings {
    pub samples: usize,
    pub perturbations: usize,
    /// Perturbation scale; half the mean posterior std over the corpus
    /// when absent.
    pub perturb_scale: Option<f64>,
    pub grid_resolution: usize,
    pub walk_displacements: Vec<f64>,
    pub histogram_bins: usize,
    pub predictor: PredictorConfig,
    pub ascent: AscentConfig,
}

impl Default for ExploreSettings {
    fn default() -> Self {
        ExploreSettings {
            samples: 100,
            perturbations: 100,
            perturb_scale: None,
            grid_resolution: 5,
            walk_displacements: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            histogram_bins: 40,
            predictor: PredictorConfig::default(),
            ascent: AscentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    /// Held-out corpus; without it the corpus is split 90/10 by hash.
    pub heldout: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub model: VaeConfig,
    pub training: TrainConfig,
    pub scorer: ScorerConfig,
    pub bo: BoSettings,
    pub explore: ExploreSettings,
    /// Stochastic decodes per latent point.
    pub decode_attempts: usize,
    /// Master seed, copied into every stage.
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            heldout: None,
            checkpoint: None,
            model: VaeConfig::default(),
            training: TrainConfig::default(),
            scorer: ScorerConfig::default(),
            bo: BoSettings::default(),
            explore: ExploreSettings::default(),
            decode_attempts: 100,
            seed: 0,
            workers: 1,
        }
    }
}

/// Sets `a.b.c = value` inside a JSON object, creating objects on the way.
fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::ConfigInvalid(format!("`{key}`: `{p}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(p.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Parses `key=value`; the value is JSON when it parses as JSON and a
/// string otherwise.
pub fn parse_override(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::ConfigInvalid(format!("override `{s}` is not key=value")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

impl RunConfig {
    /// Loads `path` (or the defaults), applies overrides, resolves relative
    /// paths against the config file's directory and validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)], seed: Option<u64>) -> Result<Self, CliError> {
        let (mut doc, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", p.display())))?;
                let doc: Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", p.display())))?;
                (doc, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (Value::Object(Default::default()), PathBuf::new()),
        };
        for (k, v) in overrides {
            set_path(&mut doc, k, v.clone())?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Ok(w) = std::env::var(WORKERS_ENV) {
            cfg.workers = w
                .parse()
                .map_err(|_| CliError::ConfigInvalid(format!("{WORKERS_ENV}={w} is not a count")))?;
        }
        cfg.resolve(&base);
        cfg.sync_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() && !base.as_os_str().is_empty() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.heldout);
        fix(&mut self.checkpoint);
        fix(&mut self.scorer.logp_table);
        fix(&mut self.scorer.property_table);
    }

    fn sync_seeds(&mut self) {
        self.training.seed = self.seed;
        self.training.workers = self.workers;
        self.bo.run.seed = self.seed;
        self.explore.predictor.seed = self.seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        for (name, p) in [
            ("corpus", &self.corpus),
            ("heldout", &self.heldout),
            ("scorer.logp_table", &self.scorer.logp_table),
            ("scorer.property_table", &self.scorer.property_table),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(CliError::ConfigInvalid(format!("{name}: {} does not exist", p.display())));
                }
            }
        }
        if self.scorer.property == PropertyKind::External && self.scorer.property_table.is_none() {
            return Err(CliError::ConfigInvalid("scorer.property = external needs scorer.property_table".into()));
        }
        if self.workers == 0 {
            return Err(CliError::ConfigInvalid("workers must be at least 1".into()));
        }
        if self.decode_attempts == 0 {
            return Err(CliError::ConfigInvalid("decode_attempts must be at least 1".into()));
        }
        if self.bo.run.batch_size == 0 || self.bo.run.inducing == 0 {
            return Err(CliError::ConfigInvalid("bo.batch_size and bo.inducing must be positive".into()));
        }
        Ok(())
    }

    pub fn corpus_path(&self) -> Result<&Path, CliError> {
        self.corpus.as_deref().ok_or_else(|| CliError::ConfigInvalid("corpus is required".into()))
    }

    pub fn checkpoint_path(&self) -> Result<&Path, CliError> {
        let p = self.checkpoint.as_deref().ok_or_else(|| CliError::ConfigInvalid("checkpoint is required".into()))?;
        if !p.is_file() {
            return Err(CliError::CheckpointMissing(p.to_path_buf()));
        }
        Ok(p)
    }
}
