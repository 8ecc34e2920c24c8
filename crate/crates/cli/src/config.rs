//! Run configuration: one JSON document; relative data paths resolve against the
//! directory that holds it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use inet_core::basis::BasisLibrary;
use inet_core::forms::{AxisRef, INet};
use inet_core::interpret::{Family, Interpretation};
use inet_core::phenomenology::FitConfig;
use inet_core::pipeline::{EvalConfig, RegionSpec};
use inet_core::search::SearchConfig;
use inet_core::topology::{AxisKind, AxisSpec, Orientation};
use inet_core::Dataset64;

use crate::error::CliError;
use crate::ingest::ingest;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub name: String,
    pub kind: AxisKind,
    /// Vertices of the primary complex along this axis.
    pub extent: usize,
    pub spacing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredConfig {
    pub name: String,
    /// Cell dimension per axis (0 or 1).
    pub dims: Vec<u8>,
    pub orientations: Vec<Orientation>,
    pub data: PathBuf,
    #[serde(default)]
    pub units: BTreeMap<String, i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextConfig {
    pub axes: Vec<AxisConfig>,
    pub measured: Vec<MeasuredConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub context: ContextConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub interpretation: Interpretation,
    #[serde(default = "default_split")]
    pub split: f64,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default = "BasisLibrary::standard")]
    pub basis: BasisLibrary,
    #[serde(default)]
    pub regions: Option<RegionSpec>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_split() -> f64 {
    0.7
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Loads a config and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for m in &mut cfg.context.measured {
            if m.data.is_relative() {
                m.data = base.join(&m.data);
            }
        }
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let c = |m: String| Err(CliError::Config(m));
        if !(self.split > 0.0 && self.split < 1.0) {
            return c(format!("split {} is not in (0, 1)", self.split));
        }
        if self.context.axes.is_empty() {
            return c("context has no axes".into());
        }
        for a in &self.context.axes {
            if a.extent < 2 || !(a.spacing > 0.0) {
                return c(format!("axis {} needs extent >= 2 and spacing > 0", a.name));
            }
        }
        if self.context.measured.is_empty() {
            return c("context has no measured variables".into());
        }
        let n = self.context.axes.len();
        for m in &self.context.measured {
            if m.dims.len() != n || m.orientations.len() != n || m.dims.iter().any(|&d| d > 1) {
                return c(format!("measured variable {} must give {n} dims (0/1) and orientations", m.name));
            }
            if !m.data.exists() {
                return c(format!("data file {} for {} does not exist", m.data.display(), m.name));
            }
        }
        self.search.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.interpretation.validate(n).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(r) = &self.regions {
            if !self.context.axes.iter().any(|a| a.name == r.axis) {
                return c(format!("region axis {} is not a context axis", r.axis));
            }
        }
        Ok(())
    }

    pub fn axes(&self) -> Vec<AxisSpec> {
        self.context.axes.iter().map(|a| AxisSpec::new(a.name.clone(), a.extent, a.spacing, a.kind)).collect()
    }

    /// Symbolic context with the measured variables.
    pub fn context(&self) -> Result<INet, CliError> {
        let axes = self.context.axes.iter().map(|a| AxisRef { name: a.name.clone(), kind: a.kind }).collect();
        let mut inet = INet::new(axes);
        for m in &self.context.measured {
            inet.add_measured(&m.name, &m.dims, &m.orientations, m.units.clone()).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(inet)
    }

    /// Reads every measured variable's CSV.
    pub fn dataset(&self) -> Result<Dataset64, CliError> {
        let axes = self.axes();
        let names: Vec<String> = axes.iter().map(|a| a.name.clone()).collect();
        let mut data = Dataset64::new(axes.clone());
        for m in &self.context.measured {
            let family = Family::new(m.orientations.clone(), m.dims.clone());
            let extents: Vec<usize> = (0..axes.len()).map(|a| family.count(a, axes[a].extent)).collect();
            let values = ingest(&m.data, &names, &extents)?;
            data.insert(&m.name, family, values).map_err(|e| CliError::Ingest { path: m.data.display().to_string(), message: e.to_string() })?;
        }
        Ok(data)
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            basis: self.basis.clone(),
            interpretation: self.interpretation.clone(),
            split: self.split,
            fit: self.fit.clone(),
            regions: self.regions.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let text = r#"{"context": {"axes": [{"name": "t", "kind": "time", "extent": 4, "spacing": 0.1}],
            "measured": [{"name": "theta", "dims": [0], "orientations": ["primary"], "data": "theta.csv"}]}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert_eq!(cfg.split, 0.7);
        assert_eq!(cfg.search, SearchConfig::default());
        assert_eq!(cfg.basis, BasisLibrary::standard());
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_fields_and_bad_split_are_config_errors() {
        assert_eq!(RunConfig::from_json(r#"{"context": {"axes": [], "measured": []}, "bogus": 1}"#).unwrap_err().exit_code(), 2);
        let text = r#"{"context": {"axes": [{"name": "t", "kind": "time", "extent": 4, "spacing": 0.1}],
            "measured": [{"name": "theta", "dims": [0], "orientations": ["primary"], "data": "/nonexistent.csv"}]}, "split": 1.5}"#;
        let e = RunConfig::from_json(text).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("split"));
        assert_eq!(e.exit_code(), 2);
    }
}
