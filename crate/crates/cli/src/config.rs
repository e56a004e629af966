use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use subtyper_core::pipeline::{ArchitectureConfig, TrainingConfig};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SUBTYPER_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "subtyper-out";

/// Everything a run needs. Every field has a default; unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Tab-separated expression matrix, samples in rows unless `transpose`.
    pub expression: Option<PathBuf>,
    /// Two-column `sample_id<TAB>subtype` file.
    pub labels: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Model file; defaults to `model.ae4s` in the output directory.
    pub checkpoint: Option<PathBuf>,
    /// Expression file has genes in rows.
    pub transpose: bool,
    pub seed: u64,
    pub folds: usize,
    /// Worker threads for cross-validation folds.
    pub jobs: usize,
    pub test_frac: f64,
    /// Share of the training partition held out for early stopping.
    pub val_frac: f64,
    pub architecture: ArchitectureConfig,
    pub training: TrainingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            expression: None,
            labels: None,
            out_dir: None,
            checkpoint: None,
            transpose: false,
            seed: 0,
            folds: 10,
            jobs: 1,
            test_frac: 0.1,
            val_frac: 0.1,
            architecture: ArchitectureConfig::default(),
            training: TrainingConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        for (key, v) in [("test_frac", self.test_frac), ("val_frac", self.val_frac)] {
            if !(0.0..1.0).contains(&v) {
                return Err(CliError::Usage(format!("{key} = {v} outside [0, 1)")));
            }
        }
        if self.jobs == 0 {
            return Err(CliError::Usage("jobs must be at least 1".into()));
        }
        self.architecture.validate()?;
        self.training.validate()?;
        Ok(())
    }

    /// Output directory: the configured one, else `$SUBTYPER_OUT_DIR`, else
    /// `subtyper-out`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.resolved_out_dir().join("model.ae4s"))
    }
}

/// What every command records in `manifest.json`. Passing a manifest back
/// as `--config` reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        crate::commands::write_file(&dir.join("manifest.json"), json.as_bytes())
    }
}

/// Reads a TOML config, or a JSON config or manifest (by `.json` extension).
fn read_file(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        let v: Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
        match v {
            Value::Object(mut m) if m.contains_key("command") && m.contains_key("config") => {
                Ok(m.remove("config").unwrap_or(Value::Null))
            }
            v => Ok(v),
        }
    } else {
        let t: toml::Table = toml::from_str(&text).map_err(|e| bad(&e))?;
        serde_json::to_value(t).map_err(|e| bad(&e))
    }
}

/// Parses the right-hand side of `key=value` as a TOML value, so numbers,
/// booleans, and arrays keep their types; anything else is a string.
fn parse_scalar(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .and_then(|v| serde_json::to_value(v).ok())
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets a dotted `key` (e.g. `training.lr`) in a JSON object tree.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> CliResult<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("malformed key `{key}`")));
    }
    let mut node = root;
    for p in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(CliError::Usage(format!("`{key}`: `{p}` is not a table")));
        }
        node = node
            .as_object_mut()
            .map(|m| m.entry(p.to_string()).or_insert_with(|| Value::Object(Map::new())))
            .ok_or_else(|| CliError::Usage(format!("`{key}` is not a table path")))?;
    }
    match node.as_object_mut() {
        Some(m) => {
            m.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(CliError::Usage(format!("`{key}` is not a table path"))),
    }
}

/// Builds a config from an optional file, then `key=value` overrides, then
/// already-typed overrides from command-line flags.
pub fn load(file: Option<&Path>, sets: &[String], flags: Vec<(&str, Value)>) -> CliResult<RunConfig> {
    let mut root = match file {
        Some(p) => read_file(p)?,
        None => Value::Object(Map::new()),
    };
    if !root.is_object() {
        return Err(CliError::Usage("config must be a table of keys".into()));
    }
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{s}`")))?;
        set_path(&mut root, k.trim(), parse_scalar(v.trim()))?;
    }
    for (k, v) in flags {
        set_path(&mut root, k, v)?;
    }
    let cfg: RunConfig = serde_json::from_value(root).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = load(None, &[], vec![]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.training.lr, 0.0006);
        assert_eq!(c.training.batch_size, 32);
        assert_eq!((c.architecture.ae_dropout, c.architecture.clf_dropout), (0.2, 0.5));
        assert_eq!((c.folds, c.test_frac, c.val_frac), (10, 0.1, 0.1));
    }

    #[test]
    fn overrides_keep_types() {
        let sets = vec![
            "training.lr=0.001".to_string(),
            "seed=7".into(),
            "architecture.encoder_widths=[32, 16, 8]".into(),
            "training.smote_space=raw".into(),
            "expression=data/x.tsv".into(),
        ];
        let c = load(None, &sets, vec![("jobs", Value::from(3))]).unwrap();
        assert_eq!(c.training.lr, 0.001);
        assert_eq!(c.seed, 7);
        assert_eq!(c.architecture.encoder_widths, vec![32, 16, 8]);
        assert_eq!(c.jobs, 3);
        assert_eq!(c.expression, Some(PathBuf::from("data/x.tsv")));
    }

    #[test]
    fn bad_keys_and_values_are_usage_errors() {
        for s in ["colour=red", "training.nope=1", "architecture.ae_dropout=1.5", "seed", "test_frac=1.0"] {
            let e = load(None, &[s.to_string()], vec![]).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{s}: {e}");
        }
        let e = load(None, &["architecture.ae_dropout=1.5".into()], vec![]).unwrap_err();
        assert!(e.to_string().contains("ae_dropout"), "{e}");
    }

    #[test]
    fn toml_and_manifest_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(&p, "seed = 5\nfolds = 4\n[training]\nmax_epochs = 12\n").unwrap();
        let c = load(Some(&p), &[], vec![]).unwrap();
        assert_eq!((c.seed, c.folds, c.training.max_epochs), (5, 4, 12));

        Manifest::new("cv", &c).write(dir.path()).unwrap();
        let back = load(Some(&dir.path().join("manifest.json")), &[], vec![]).unwrap();
        assert_eq!(back, c);

        fs::write(&p, "seed = 5\nunknown = true\n").unwrap();
        assert!(load(Some(&p), &[], vec![]).is_err());
        assert!(load(Some(&dir.path().join("absent.toml")), &[], vec![]).is_err());
    }
}
