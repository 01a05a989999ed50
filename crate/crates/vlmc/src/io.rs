//! Run configuration and JSON input with field-level diagnostics.

use crate::error::{Result, VlmcError};
use crate::prob::ProbabilisedTree;
use crate::qmatrix::{IndexOrder, QParams};
use crate::smc::SemiMarkovKernel;
use crate::stationary::StationaryConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Tolerances, truncations, seed and output format shared by every command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub series_tol: f64,
    pub solver_tol: f64,
    pub levels: usize,
    pub trunc: usize,
    /// Length up to which alpha-LIS and fibers are enumerated.
    pub fiber_depth: usize,
    pub seed: u64,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { series_tol: 1e-10, solver_tol: 1e-12, levels: 64, trunc: 256, fiber_depth: 64, seed: 0, format: OutputFormat::Csv }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("series_tol", self.series_tol), ("solver_tol", self.solver_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(VlmcError::Param(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("levels", self.levels), ("trunc", self.trunc), ("fiber_depth", self.fiber_depth)] {
            if v == 0 {
                return Err(VlmcError::Param(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn q_params(&self, order: IndexOrder) -> QParams {
        QParams { trunc: self.trunc, levels: self.levels, depth: self.fiber_depth, order, series_tol: self.series_tol }
    }

    pub fn stationary(&self) -> StationaryConfig {
        StationaryConfig { q: self.q_params(IndexOrder::LengthLex), solver_tol: self.solver_tol, ..StationaryConfig::default() }
    }
}

/// Parses JSON, naming the path of the first offending field on failure.
pub fn from_json_str<T: DeserializeOwned>(s: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(s);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            VlmcError::Json(inner.to_string())
        } else {
            VlmcError::Json(format!("at `{path}`: {inner}"))
        }
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| VlmcError::Json(format!("{}: {e}", path.display())))
}

pub fn load_tree(path: &Path) -> Result<ProbabilisedTree> {
    from_json_str(&read(path)?).map_err(|e| prefix(path, e))
}

pub fn load_kernel(path: &Path) -> Result<SemiMarkovKernel> {
    from_json_str(&read(path)?).map_err(|e| prefix(path, e))
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let c: RunConfig = from_json_str(&read(path)?).map_err(|e| prefix(path, e))?;
    c.validate()?;
    Ok(c)
}

fn prefix(path: &Path, e: VlmcError) -> VlmcError {
    match e {
        VlmcError::Json(m) => VlmcError::Json(format!("{}: {m}", path.display())),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::QRule;
    use crate::tree::ContextTree;

    #[test]
    fn offending_field_is_named() {
        let e = from_json_str::<ProbabilisedTree>(r#"{"alphabet": 2, "kind": "explicit", "contexts": ["0", "1"], "q": {"rule": "random", "seed": -1}}"#)
            .unwrap_err();
        assert!(e.to_string().contains("q"), "{e}");
        let e = from_json_str::<RunConfig>(r#"{"levels": 3, "trunk": 3}"#).unwrap_err();
        assert!(e.to_string().contains("trunk"), "{e}");
        let e = from_json_str::<ProbabilisedTree>(r#"{"alphabet": 2, "kind": "explicit", "contexts": ["0", "2"]}"#).unwrap_err();
        assert!(e.to_string().contains('2'), "{e}");
    }

    #[test]
    fn emitted_json_reparses() {
        let trees = [
            ProbabilisedTree::random(ContextTree::zoo("b_comb").unwrap(), 3),
            ProbabilisedTree::new(ContextTree::zoo("left_comb").unwrap(), QRule::CombHarmonic).unwrap(),
            ProbabilisedTree::random(ContextTree::explicit(3, &["0", "1", "20", "21", "22"]).unwrap(), 1),
        ];
        for pt in trees {
            let back: ProbabilisedTree = from_json_str(&serde_json::to_string(&pt).unwrap()).unwrap();
            assert_eq!(back, pt);
        }
        let c = RunConfig { seed: 9, format: OutputFormat::Json, ..RunConfig::default() };
        assert_eq!(from_json_str::<RunConfig>(&serde_json::to_string(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { series_tol: 0.0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { trunc: 0, ..RunConfig::default() }.validate().is_err());
    }
}
