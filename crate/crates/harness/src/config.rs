use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use spectral_impute::diffusion::{DEFAULT_ETA, DEFAULT_MAX_ITER};
use spectral_impute::gnn::Schedule;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lsi,
    Mlp,
    Gcn,
    Sgc,
    Chebynet,
    Appnp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    /// The dataset's own edges if it has any, otherwise `mst_knn` with δ = 8.
    #[default]
    Auto,
    Given,
    MstKnn { delta: usize },
    AnchorKnn { delta: usize, m: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Chain3,
    TwoCluster {
        #[serde(default = "default_two_cluster_n")]
        n: usize,
        #[serde(default)]
        seed: u64,
    },
    Sbm {
        #[serde(default = "default_sbm_n")]
        n: usize,
        #[serde(default = "default_p_in")]
        p_in: f64,
        #[serde(default = "default_p_out")]
        p_out: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Features and (partial) embeddings keyed by token.
    Embeddings {
        features: PathBuf,
        embeddings: PathBuf,
        labels: Option<PathBuf>,
        edges: Option<PathBuf>,
    },
    /// Node classification from features, labels and edges.
    Graph {
        features: PathBuf,
        labels: PathBuf,
        edges: PathBuf,
    },
    Cora { dir: PathBuf },
}

fn default_two_cluster_n() -> usize {
    500
}
fn default_sbm_n() -> usize {
    200
}
fn default_p_in() -> f64 {
    0.08
}
fn default_p_out() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    /// Training nodes per class (classification).
    pub per_class: usize,
    pub validation: usize,
    pub test: usize,
    /// Known rows (imputation); `None` uses the dataset's fixed set or n/5.
    pub known: Option<usize>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            per_class: 20,
            validation: 500,
            test: 1000,
            known: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedSpec {
    /// Split seeds are `base .. base + splits`.
    pub splits: usize,
    /// Initialization seeds per split.
    pub inits: usize,
    pub base: u64,
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self {
            splits: 20,
            inits: 10,
            base: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub hidden: usize,
    pub dropout: f64,
    pub sgc_power: usize,
    pub cheb_order: usize,
    pub appnp_alpha: f64,
    pub appnp_steps: usize,
    pub schedule: Schedule,
    pub lsi_eta: f64,
    pub lsi_max_iter: usize,
    /// Neighbours for the kNN accuracy of imputed embeddings.
    pub knn_k: usize,
    /// Scale every feature row to unit L1 mass.
    pub normalize_features: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            hidden: 16,
            dropout: 0.0,
            sgc_power: 2,
            cheb_order: 2,
            appnp_alpha: 0.1,
            appnp_steps: 10,
            schedule: Schedule::default(),
            lsi_eta: DEFAULT_ETA,
            lsi_max_iter: DEFAULT_MAX_ITER,
            knn_k: 5,
            normalize_features: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub data: DataSpec,
    pub method: Method,
    /// Adds the second training stage that fits eigenvalue perturbations.
    #[serde(default)]
    pub eiglearn: bool,
    #[serde(default)]
    pub graph: GraphSpec,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub hyper: HyperParams,
    /// Where the JSON report goes; stdout when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Include imputed rows in each run record.
    #[serde(default)]
    pub report_imputed: bool,
}

fn default_name() -> String {
    "experiment".into()
}

impl ExperimentConfig {
    /// Static checks that need no data: seeds, hyperparameters and paths.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.splits == 0 || self.seeds.inits == 0 {
            return Err(HarnessError::Config("need at least one split seed and one init seed".into()));
        }
        let h = &self.hyper;
        if !(h.appnp_alpha > 0.0 && h.appnp_alpha <= 1.0) {
            return Err(HarnessError::Config(format!("appnp_alpha must lie in (0, 1], got {}", h.appnp_alpha)));
        }
        if !(0.0..1.0).contains(&h.dropout) {
            return Err(HarnessError::Config(format!("dropout must lie in [0, 1), got {}", h.dropout)));
        }
        if !(h.lsi_eta > 0.0) {
            return Err(HarnessError::Config(format!("lsi_eta must be positive, got {}", h.lsi_eta)));
        }
        if self.method != Method::Lsi && h.hidden == 0 {
            return Err(HarnessError::Config("hidden width must be positive".into()));
        }
        match &self.graph {
            GraphSpec::MstKnn { delta } | GraphSpec::AnchorKnn { delta, .. } if *delta == 0 => {
                return Err(HarnessError::Config("graph delta must be positive".into()))
            }
            _ => {}
        }
        for p in self.data_paths() {
            if !p.exists() {
                return Err(HarnessError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    fn data_paths(&self) -> Vec<&Path> {
        match &self.data {
            DataSpec::Embeddings {
                features,
                embeddings,
                labels,
                edges,
            } => [Some(features), Some(embeddings), labels.as_ref(), edges.as_ref()]
                .into_iter()
                .flatten()
                .map(PathBuf::as_path)
                .collect(),
            DataSpec::Graph { features, labels, edges } => vec![features, labels, edges],
            DataSpec::Cora { dir } => vec![dir],
            _ => Vec::new(),
        }
    }
}

/// Parses TOML, or JSON when the extension is `.json`.
pub fn read_config_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }
}

/// Applies `a.b.c=value` overrides; the value is read as JSON when it
/// parses, otherwise as a plain string.
pub fn apply_overrides(mut value: Value, overrides: &[String]) -> Result<Value> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("override `{item}` is not key=value")))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut slot = &mut value;
        for part in key.split('.') {
            if part.is_empty() {
                return Err(HarnessError::Config(format!("override key `{key}` has an empty segment")));
            }
            if !slot.is_object() {
                *slot = Value::Object(Default::default());
            }
            slot = slot
                .as_object_mut()
                .expect("just made an object")
                .entry(part)
                .or_insert(Value::Null);
        }
        *slot = parsed;
    }
    Ok(value)
}

/// Reads a config file, fills defaults, then applies overrides on top of the
/// fully resolved value so nested defaults survive partial overrides.
pub fn load_config<T: DeserializeOwned + Serialize>(path: &Path, overrides: &[String]) -> Result<T> {
    let raw = read_config_value(path)?;
    resolve(raw, overrides)
}

pub fn resolve<T: DeserializeOwned + Serialize>(raw: Value, overrides: &[String]) -> Result<T> {
    let cfg_err = |e: serde_json::Error| HarnessError::Config(e.to_string());
    let typed: T = match serde_json::from_value(raw.clone()) {
        Ok(t) => t,
        Err(_) => serde_json::from_value(apply_overrides(raw, overrides)?).map_err(cfg_err)?,
    };
    let full = serde_json::to_value(&typed).map_err(cfg_err)?;
    serde_json::from_value(apply_overrides(full, overrides)?).map_err(cfg_err)
}
