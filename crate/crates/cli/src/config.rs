//! The run configuration document and its command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use geofuse::association::{AssocConfig, ScoreConfig};
use geofuse::evaluation::EvalConfig;
use geofuse::optimizer::{PipelineConfig, SolverConfig, Variant};
use geofuse::relations::RelationConfig;
use geofuse::sim::{DatasetSpec, NoiseSpec};

pub const CONFIG_SCHEMA: &str = "geofuse-config/1";

/// A usage or configuration problem; the process exits with code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Gen,
    Run,
    Eval,
    Bench,
    All,
}

/// Everything a command needs, as one JSON document. Missing fields take
/// their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    /// Set from the subcommand; informational in files.
    pub command: Command,
    /// Dataset directory; defaults to `<out>/dataset`.
    pub dataset: Option<PathBuf>,
    pub out: PathBuf,
    pub variant: Variant,
    /// Seeds both scene generation and measurement noise.
    pub seed: u64,
    /// Scene, trajectory, camera and noise used by `gen`. Its own seeds are
    /// replaced by `seed`.
    pub generate: DatasetSpec,
    pub score: ScoreConfig,
    /// Derived from the dataset's noise model when absent.
    pub assoc: Option<AssocConfig>,
    pub relations: RelationConfig,
    /// Derived from the dataset's noise model when absent.
    pub solver: Option<SolverConfig>,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA.into(),
            command: Command::All,
            dataset: None,
            out: PathBuf::from("geofuse-out"),
            variant: Variant::GeoFusion,
            seed: 0,
            generate: DatasetSpec::default(),
            score: ScoreConfig::default(),
            assoc: None,
            relations: RelationConfig::default(),
            solver: None,
            eval: EvalConfig::default(),
        }
    }
}

/// Values given on the command line; each replaces the document's field.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub variant: Option<Variant>,
    pub objects: Option<usize>,
    pub frames: Option<usize>,
    pub out: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(config_error(format!(
                "{}: schema {:?}, expected {CONFIG_SCHEMA:?}",
                path.display(),
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(v) = o.variant {
            self.variant = v;
        }
        if let Some(n) = o.objects {
            self.generate.n_objects = n;
        }
        if let Some(n) = o.frames {
            self.generate.n_frames = n;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(p) = &o.dataset {
            self.dataset = Some(p.clone());
        }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out.join("dataset"))
    }

    pub fn run_dir(&self, variant: Variant) -> PathBuf {
        self.out.join("runs").join(variant.name())
    }

    /// The `DatasetSpec` with both seeds set from `seed`.
    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            scene_seed: self.seed,
            noise: NoiseSpec {
                rng_seed: self.seed,
                ..self.generate.noise.clone()
            },
            ..self.generate.clone()
        }
    }

    /// Pipeline settings for a dataset with the given noise model.
    pub fn pipeline(&self, noise: &NoiseSpec) -> PipelineConfig {
        let derived = PipelineConfig::for_noise(noise);
        PipelineConfig {
            score: self.score,
            assoc: self.assoc.clone().unwrap_or(derived.assoc),
            relations: self.relations.clone(),
            solver: self.solver.clone().unwrap_or(derived.solver),
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let spec = self.dataset_spec();
        if spec.n_objects == 0 || spec.n_frames < 2 {
            return Err(config_error("need at least 1 object and 2 frames"));
        }
        spec.noise.validate().map_err(|e| config_error(e.to_string()))?;
        self.pipeline(&spec.noise).validate().map_err(|e| config_error(e.to_string()))?;
        self.eval.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(())
    }
}
