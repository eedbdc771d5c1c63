//! Run configuration: the JSON file users write, and the fully resolved form
//! that is echoed back as `effective-config.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use fedhdc::datasets::{DatasetKind, PartitionMode};
use fedhdc::features::NormalizationMode;
use fedhdc::pipeline::{self, PipelineConfig, RffmSettings};
use fedhdc::seed::GENERATOR_NAME;
use fedhdc::{FederationConfig, Method};
use serde::{Deserialize, Serialize};

pub const DEFAULT_DIM: usize = 5000;
pub const DEFAULT_CLIENTS: usize = 20;
pub const DEFAULT_GLOBAL_EPOCHS: usize = 100;
pub const DEFAULT_LOCAL_EPOCHS: usize = 5;
pub const DEFAULT_ALPHA: f64 = 0.035;
pub const DEFAULT_RFFM_FEATURES: usize = 3200;

/// The user-facing config document. Every field except `method` and
/// `dataset` may be omitted.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Option<Method>,
    pub dataset: Option<DatasetKind>,
    /// Dataset manifest; relative paths are taken from the config file's directory.
    pub manifest: Option<PathBuf>,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub out_dir: Option<PathBuf>,

    pub clients: Option<usize>,
    pub dim: Option<usize>,
    pub submodels: Option<usize>,
    pub refine_dim: Option<usize>,
    pub global_epochs: Option<usize>,
    pub train_epochs: Option<usize>,
    pub local_epochs: Option<usize>,
    pub alpha: Option<f64>,
    pub master_seed: Option<u64>,
    pub partition: Option<PartitionMode>,
    pub classes_per_client: Option<usize>,

    pub normalization: Option<NormalizationMode>,
    pub rffm: Option<RffmConfig>,

    pub traffic_bytes_per_element: Option<u64>,
    pub storage_bytes_per_element: Option<u64>,
    pub save_model: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RffmConfig {
    pub enabled: Option<bool>,
    pub features: Option<usize>,
    pub sigma: Option<f64>,
}

/// A config with every default filled in and checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub method: Method,
    pub dataset: DatasetKind,
    pub manifest: Option<PathBuf>,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub federation: FederationConfig,
    pub pipeline: PipelineConfig,
    pub storage_bytes_per_element: u64,
    pub save_model: bool,
    pub derived: Derived,
}

/// Values implied by the config, recorded for reproduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub sub_dim: usize,
    pub refine_epochs: usize,
    pub basis_seed: u64,
    pub rffm_seed: Option<u64>,
    pub generator: String,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.manifest, &mut config.out_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    /// Fill in defaults and validate. Errors list every offending field.
    pub fn resolve(&self) -> anyhow::Result<ResolvedConfig> {
        let mut problems = Vec::new();
        let method = self.method.unwrap_or_else(|| {
            problems.push("method: required (\"baseline\" or \"refhdc\")".to_string());
            Method::Baseline
        });
        let dataset = self.dataset.unwrap_or_else(|| {
            problems.push("dataset: required".to_string());
            DatasetKind::Mnist
        });

        let dim = self.dim.unwrap_or(DEFAULT_DIM);
        let global_epochs = self.global_epochs.unwrap_or(DEFAULT_GLOBAL_EPOCHS);
        let (submodels, train_epochs, refine_dim) = match method {
            Method::Baseline => (1, global_epochs, dim),
            Method::Refhdc => {
                let m = self.submodels.unwrap_or(5);
                let sub_dim = dim.checked_div(m).unwrap_or(dim);
                (m, self.train_epochs.unwrap_or(m), self.refine_dim.unwrap_or(sub_dim))
            }
        };
        let federation = FederationConfig {
            clients: self.clients.unwrap_or(DEFAULT_CLIENTS),
            dim,
            submodels,
            refine_dim,
            global_epochs,
            train_epochs,
            local_epochs: self.local_epochs.unwrap_or(DEFAULT_LOCAL_EPOCHS),
            alpha: self.alpha.unwrap_or(DEFAULT_ALPHA),
            master_seed: self.master_seed.unwrap_or(0),
            partition: self.partition.unwrap_or(PartitionMode::Iid),
            classes_per_client: self.classes_per_client.unwrap_or(2),
            traffic_bytes_per_element: self.traffic_bytes_per_element.unwrap_or(8),
        };
        if let Err(e) = federation.validate(method) {
            problems.push(e.to_string());
        }

        let normalization = self.normalization.unwrap_or(if dataset.is_image() {
            NormalizationMode::PixelScale
        } else {
            NormalizationMode::None
        });
        let rffm_cfg = self.rffm.clone().unwrap_or_default();
        let rffm = if rffm_cfg.enabled.unwrap_or(true) {
            let sigma = rffm_cfg
                .sigma
                .unwrap_or(if dataset.is_image() { 1.0 } else { 2.5 });
            let features = rffm_cfg.features.unwrap_or(DEFAULT_RFFM_FEATURES);
            if !(sigma > 0.0 && sigma.is_finite()) {
                problems.push(format!("rffm.sigma: must be positive, got {sigma}"));
            }
            if features == 0 {
                problems.push("rffm.features: must be at least 1".to_string());
            }
            Some(RffmSettings { features, sigma })
        } else {
            None
        };
        let storage = self.storage_bytes_per_element.unwrap_or(4);
        if storage == 0 {
            problems.push("storage_bytes_per_element: must be positive".to_string());
        }
        if self.train_limit == Some(0) {
            problems.push("train_limit: must be at least 1".to_string());
        }
        if self.test_limit == Some(0) {
            problems.push("test_limit: must be at least 1".to_string());
        }
        if !problems.is_empty() {
            bail!("invalid config: {}", problems.join("; "));
        }

        let seed = federation.master_seed;
        Ok(ResolvedConfig {
            method,
            dataset,
            manifest: self.manifest.clone(),
            train_limit: self.train_limit,
            test_limit: self.test_limit,
            derived: Derived {
                sub_dim: federation.sub_dim(),
                refine_epochs: federation.refine_epochs(),
                basis_seed: pipeline::basis_seed(seed),
                rffm_seed: rffm.map(|_| pipeline::rffm_seed(seed)),
                generator: GENERATOR_NAME.to_string(),
            },
            federation,
            pipeline: PipelineConfig { normalization, rffm },
            storage_bytes_per_element: storage,
            save_model: self.save_model.unwrap_or(false),
        })
    }
}

impl ResolvedConfig {
    /// Encoder input width for the dataset's published shape.
    pub fn published_input_dim(&self) -> usize {
        pipeline::encoder_input_dim(&self.pipeline, self.dataset.published_shape().features)
    }

    /// Training points implied by the published shape and `train_limit`.
    pub fn published_points(&self) -> usize {
        let n = self.dataset.published_shape().train;
        self.train_limit.map_or(n, |l| l.min(n))
    }

    /// Width uploaded by each client in 1-based round `round`.
    pub fn round_width(&self, round: usize) -> usize {
        let f = &self.federation;
        match self.method {
            Method::Baseline => f.dim,
            Method::Refhdc if round <= f.train_epochs => f.sub_dim(),
            Method::Refhdc => f.refine_dim,
        }
    }
}
