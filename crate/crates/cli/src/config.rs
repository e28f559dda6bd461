use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use semdde::collocation::NewtonSettings;
use semdde::nodes::NodeKind;
use semdde::piecewise::Mesh;
use semdde::FORMAT_VERSION;

use crate::CliError;

/// Mesh as a number of uniform intervals or explicit breaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshSpec {
    Uniform(usize),
    Breaks(Vec<f64>),
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh, CliError> {
        let mesh = match self {
            MeshSpec::Uniform(l) => Mesh::uniform(*l),
            MeshSpec::Breaks(b) => Mesh::new(b.clone()),
        };
        mesh.map_err(CliError::config)
    }
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec::Uniform(11)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GuessSpec {
    /// Sinusoid around the equilibrium at the problem's Hopf point.
    Hopf {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        /// Parameter distance from the Hopf point; negative for subcritical
        /// branches.
        #[serde(default = "default_offset")]
        offset: f64,
    },
    /// A solution file written by `solve` or `continue`.
    File { path: PathBuf },
    /// Constant profile.
    Constant { value: Vec<f64>, period: f64 },
    /// The guess shipped with the library (sd_quadratic only).
    Bundled,
}

fn default_amplitude() -> f64 {
    semdde::continuation::DEFAULT_HOPF_AMPLITUDE
}

fn default_offset() -> f64 {
    semdde::continuation::DEFAULT_HOPF_OFFSET
}

impl Default for GuessSpec {
    fn default() -> Self {
        GuessSpec::Hopf {
            amplitude: default_amplitude(),
            offset: default_offset(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResumeSpec {
    pub branch: PathBuf,
    pub solution: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationSpec {
    /// Defaults to the parameter of the first solved point.
    #[serde(default)]
    pub from: Option<f64>,
    pub to: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub resume: Option<ResumeSpec>,
}

fn default_steps() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleMapSpec {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_map_grid")]
    pub grid: usize,
    /// Orbit whose delay defines the map.
    #[serde(default)]
    pub solution: Option<PathBuf>,
    /// Constant rescaled delay instead of an orbit.
    #[serde(default)]
    pub constant_delay: Option<f64>,
}

fn default_k_max() -> usize {
    5
}

fn default_map_grid() -> usize {
    20000
}

impl Default for CircleMapSpec {
    fn default() -> Self {
        CircleMapSpec {
            k_max: default_k_max(),
            grid: default_map_grid(),
            solution: None,
            constant_delay: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodesSpec {
    #[serde(default = "all_kinds")]
    pub kinds: Vec<NodeKind>,
    #[serde(default = "default_node_degrees")]
    pub degrees: Vec<usize>,
    #[serde(default = "default_lebesgue_samples")]
    pub samples: usize,
}

fn all_kinds() -> Vec<NodeKind> {
    NodeKind::ALL.to_vec()
}

fn default_node_degrees() -> Vec<usize> {
    vec![4, 8, 16, 32, 64]
}

fn default_lebesgue_samples() -> usize {
    10001
}

impl Default for NodesSpec {
    fn default() -> Self {
        NodesSpec {
            kinds: all_kinds(),
            degrees: default_node_degrees(),
            samples: default_lebesgue_samples(),
        }
    }
}

/// Everything a run needs. Commands read the sections they use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "current_version")]
    pub format_version: u32,
    #[serde(default)]
    pub problem: Option<String>,
    /// Collocation node family.
    #[serde(default = "default_kind")]
    pub collocation: NodeKind,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Interval counts of a convergence study.
    #[serde(default)]
    pub intervals: Vec<usize>,
    /// Degrees of a convergence study.
    #[serde(default)]
    pub degrees: Vec<usize>,
    #[serde(default)]
    pub parameter: Option<f64>,
    /// Parameter values of a convergence study.
    #[serde(default)]
    pub parameters: Vec<f64>,
    #[serde(default)]
    pub guess: GuessSpec,
    #[serde(default)]
    pub newton: NewtonSettings,
    #[serde(default)]
    pub continuation: Option<ContinuationSpec>,
    #[serde(default)]
    pub circle_map: CircleMapSpec,
    #[serde(default)]
    pub nodes: NodesSpec,
    /// Points of the uniform grid on which `err` is measured.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn current_version() -> u32 {
    FORMAT_VERSION
}

fn default_kind() -> NodeKind {
    NodeKind::GaussLegendre
}

fn default_degree() -> usize {
    4
}

fn default_grid() -> usize {
    semdde::analysis::DEFAULT_ERR_GRID
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(CliError::config)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.format_version == 0 || self.format_version > FORMAT_VERSION {
            return Err(CliError::config(semdde::Error::UnsupportedVersion {
                found: self.format_version,
                supported: FORMAT_VERSION,
            }));
        }
        self.newton.validate().map_err(CliError::config)?;
        if self.degree < 1 {
            return Err(CliError::Config("degree must be >= 1".into()));
        }
        if self.grid < 2 {
            return Err(CliError::Config("grid must be >= 2".into()));
        }
        if let Some(c) = &self.continuation {
            if c.steps == 0 {
                return Err(CliError::Config("continuation.steps must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn problem_name(&self) -> Result<&str, CliError> {
        self.problem
            .as_deref()
            .ok_or_else(|| CliError::Config("config has no `problem`".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let c = RunConfig::default();
        assert_eq!(c.mesh, MeshSpec::Uniform(11));
        assert_eq!(c.collocation, NodeKind::GaussLegendre);
        assert!(RunConfig::from_json(r#"{"problme": "x"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"format_version": 99}"#).is_err());
        assert!(RunConfig::from_json(r#"{"newton": {"tol_residual": -1}}"#).is_err());
    }

    #[test]
    fn mesh_forms() {
        let c = RunConfig::from_json(r#"{"mesh": [0.0, 0.25, 1.0]}"#).unwrap();
        assert_eq!(c.mesh.build().unwrap().intervals(), 2);
        let c = RunConfig::from_json(r#"{"mesh": 3, "guess": {"kind": "bundled"}}"#).unwrap();
        assert_eq!(c.mesh.build().unwrap().intervals(), 3);
        assert_eq!(c.guess, GuessSpec::Bundled);
    }
}
