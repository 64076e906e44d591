//! Run configuration for `vcmesh train`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use vcmesh::model::{BasisPlan, ModelConfig, TrainConfig};
use vcmesh::sampling::LevelSpec;

use crate::Failure;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub hierarchy: HierarchySection,
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Base mesh; defaults to the first dataset file.
    pub mesh: Option<PathBuf>,
    pub dataset: String,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub validation_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    /// Distance below which disconnected components of the base mesh are joined.
    pub bridge: Option<f64>,
}

fn default_train_fraction() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchySection {
    /// Level specs `"s:r"` or `"s:r:p1,p2,..."`.
    pub levels: Option<Vec<String>>,
    /// A prebuilt hierarchy file, instead of `levels`.
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BasisValue {
    Name(String),
    Uniform(usize),
    PerBlock(Vec<usize>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub channels: Vec<usize>,
    #[serde(default = "default_basis")]
    pub basis: BasisValue,
    #[serde(default = "default_true")]
    pub residual: bool,
    #[serde(default)]
    pub normalize_basis: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_basis() -> BasisValue {
    BasisValue::Name("auto".into())
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub epochs: usize,
    pub max_steps: Option<usize>,
    pub l1_weight: f64,
    pub laplacian_weight: f64,
    pub seed: u64,
    /// Write a checkpoint every this many epochs; 0 writes only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            decay: t.decay,
            epochs: t.epochs,
            max_steps: t.max_steps,
            l1_weight: t.l1_weight,
            laplacian_weight: t.laplacian_weight,
            seed: t.seed,
            checkpoint_every: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// Parses `s:r` or `s:r:p1,p2,...`.
pub fn parse_level(text: &str) -> Result<LevelSpec, Failure> {
    let bad = || Failure::Input(format!("bad level `{text}`, expected s:r or s:r:p1,p2,..."));
    let mut parts = text.trim().splitn(3, ':');
    let stride = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
    let radius = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
    let pinned = match parts.next() {
        None => Vec::new(),
        Some(list) => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<Vec<usize>, _>>()?,
    };
    Ok(LevelSpec::new(stride, radius).pinned(pinned))
}

impl RunConfig {
    /// Reads the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::Input(format!("config {}: {e}", path.display())))?;
        let root = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = root.join(&*p);
            }
        };
        if let Some(m) = cfg.data.mesh.as_mut() {
            resolve(m);
        }
        if let Some(f) = cfg.hierarchy.file.as_mut() {
            resolve(f);
        }
        resolve(&mut cfg.output.dir);
        if Path::new(&cfg.data.dataset).is_relative() {
            cfg.data.dataset = root.join(&cfg.data.dataset).to_string_lossy().into_owned();
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), Failure> {
        let d = &self.data;
        let fractions_ok = (0.0..=1.0).contains(&d.train_fraction)
            && (0.0..=1.0).contains(&d.validation_fraction)
            && d.train_fraction + d.validation_fraction <= 1.0 + 1e-12;
        if !fractions_ok {
            return Err(Failure::Input(
                "data.train_fraction and data.validation_fraction must lie in [0, 1] and sum to at most 1".into(),
            ));
        }
        if d.bridge.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
            return Err(Failure::Input("data.bridge must be a non-negative distance".into()));
        }
        match (&self.hierarchy.levels, &self.hierarchy.file) {
            (Some(_), Some(_)) => {
                return Err(Failure::Input("set either hierarchy.levels or hierarchy.file, not both".into()))
            }
            (None, None) => return Err(Failure::Input("hierarchy.levels or hierarchy.file is required".into())),
            (Some(levels), None) => {
                for l in levels {
                    parse_level(l)?;
                }
            }
            _ => {}
        }
        self.basis_plan()?;
        if self.train.batch_size == 0 {
            return Err(Failure::Input("train.batch_size must be positive".into()));
        }
        Ok(())
    }

    /// Checks that every referenced input exists before any work starts.
    pub fn dataset_files(&self) -> Result<Vec<PathBuf>, Failure> {
        if let Some(m) = &self.data.mesh {
            require_file(m)?;
        }
        if let Some(f) = &self.hierarchy.file {
            require_file(f)?;
        }
        let files = glob_files(&self.data.dataset)?;
        if let Some(parent) = self.output.dir.parent() {
            if !parent.as_os_str().is_empty() && !parent.is_dir() {
                return Err(Failure::Input(format!(
                    "output directory parent {} does not exist",
                    parent.display()
                )));
            }
        }
        Ok(files)
    }

    pub fn level_specs(&self) -> Result<Vec<LevelSpec>, Failure> {
        self.hierarchy.levels.iter().flatten().map(|l| parse_level(l)).collect()
    }

    pub fn basis_plan(&self) -> Result<BasisPlan, Failure> {
        match &self.model.basis {
            BasisValue::Name(n) if n == "auto" => Ok(BasisPlan::Auto),
            BasisValue::Name(n) => Err(Failure::Input(format!(
                "model.basis must be \"auto\", an integer or a list, got \"{n}\""
            ))),
            BasisValue::Uniform(m) => Ok(BasisPlan::Uniform(*m)),
            BasisValue::PerBlock(v) => Ok(BasisPlan::PerBlock(v.clone())),
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig, Failure> {
        Ok(ModelConfig {
            channels: self.model.channels.clone(),
            basis: self.basis_plan()?,
            residual: self.model.residual,
            normalize_basis: self.model.normalize_basis,
            seed: self.model.seed,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            decay: t.decay,
            epochs: t.epochs,
            max_steps: t.max_steps,
            l1_weight: t.l1_weight,
            laplacian_weight: t.laplacian_weight,
            seed: t.seed,
        }
    }
}

pub fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Input(format!("file not found: {}", path.display())))
    }
}

/// Sorted files matching `pattern`; at least one.
pub fn glob_files(pattern: &str) -> Result<Vec<PathBuf>, Failure> {
    let paths = glob::glob(pattern).map_err(|e| Failure::Input(format!("bad glob `{pattern}`: {e}")))?;
    let mut files: Vec<PathBuf> = paths.filter_map(|p| p.ok()).filter(|p| p.is_file()).collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::Input(format!("no files match `{pattern}`")));
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[data]
dataset = "samples/*.obj"

[hierarchy]
levels = ["2:2", "2:2:0,5"]

[model]
channels = [3, 16, 32, 16, 3]

[output]
dir = "run"
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.check().unwrap();
        let t = cfg.train_config();
        assert_eq!((t.batch_size, t.learning_rate, t.decay), (16, 1e-4, 0.9));
        assert_eq!(cfg.basis_plan().unwrap(), BasisPlan::Auto);
        let levels = cfg.level_specs().unwrap();
        assert_eq!(levels[1].pinned, vec![0, 5]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("[output]", "[output]\ncolour = 3");
        assert!(toml::from_str::<RunConfig>(&text).is_err());
        let text = MINIMAL.replace("[model]", "[model]\nlearning_rate = 3");
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn basis_forms() {
        let cfg: RunConfig = toml::from_str(&MINIMAL.replace("[model]", "[model]\nbasis = 7")).unwrap();
        assert_eq!(cfg.basis_plan().unwrap(), BasisPlan::Uniform(7));
        let cfg: RunConfig = toml::from_str(&MINIMAL.replace("[model]", "[model]\nbasis = [1, 2, 3, 4]")).unwrap();
        assert_eq!(cfg.basis_plan().unwrap(), BasisPlan::PerBlock(vec![1, 2, 3, 4]));
        let cfg: RunConfig = toml::from_str(&MINIMAL.replace("[model]", "[model]\nbasis = \"many\"")).unwrap();
        assert!(cfg.basis_plan().is_err());
    }

    #[test]
    fn level_syntax() {
        assert_eq!(parse_level("3:1").unwrap(), LevelSpec::new(3, 1));
        assert_eq!(parse_level("2:2:4").unwrap().pinned, vec![4]);
        assert!(parse_level("2").is_err());
        assert!(parse_level("a:1").is_err());
        assert!(parse_level("2:1:x").is_err());
    }
}
