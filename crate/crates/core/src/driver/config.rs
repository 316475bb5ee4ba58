use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::swe::Scheme;
use crate::timestepping::{Integrator, NewtonConfig, StepConfig, SupgConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    KelvinDisk,
    ChannelJet,
    DiskSolidRotation,
    TorusVortexPair,
    CustomExpression,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::KelvinDisk => "kelvin_disk",
            ScenarioKind::ChannelJet => "channel_jet",
            ScenarioKind::DiskSolidRotation => "disk_solid_rotation",
            ScenarioKind::TorusVortexPair => "torus_vortex_pair",
            ScenarioKind::CustomExpression => "custom_expression",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    /// Unit disk, refined `refinement` times.
    Disk,
    /// Doubly periodic rectangle.
    Torus,
    /// Periodic in x with walls at y = 0 and y = ly.
    Channel,
    /// A swemesh file.
    File,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<MeshKind>,
    /// Cells per side for rectangles; `2^refinement` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ly: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// Gravity and the Coriolis parameter `f = f0 + beta·y`. Unset values take
/// scenario defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

/// Scenario constants. Each scenario reads the ones it needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    /// Kelvin wave amplitude, or peak vorticity of the vortex pair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_depth: Option<f64>,
    /// Angular velocity of solid rotation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Peak jet speed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jet_speed: Option<f64>,
    /// Gaussian radius of each vortex.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vortex_width: Option<f64>,
}

/// Initial data as expressions in `x`, `y` (and the constant `pi`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomConfig {
    pub u: String,
    pub v: String,
    pub depth: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    /// Write a VTK snapshot every this many steps (0 disables).
    pub vtk_every: usize,
    pub vtk_dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            csv_path: None,
            vtk_every: 0,
            vtk_dir: PathBuf::from("vtk"),
        }
    }
}

fn default_refinement() -> usize {
    2
}
fn default_degree() -> usize {
    2
}
fn default_integrator() -> Integrator {
    Integrator::Poisson
}
fn default_picard_iters() -> usize {
    4
}

/// A complete run description, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioKind,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Defaults to `no_boundary` on periodic meshes and `prognostic_z`
    /// otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "default_picard_iters")]
    pub picard_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_exactness: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub supg: SupgConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub params: ScenarioParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Config {
    /// A configuration with every optional field at its default.
    pub fn new(scenario: ScenarioKind, refinement: usize, dt: f64, t_end: f64) -> Self {
        Config {
            scenario,
            refinement,
            dt,
            t_end,
            degree: default_degree(),
            scheme: None,
            integrator: default_integrator(),
            picard_iters: default_picard_iters(),
            h_ref: None,
            quad_exactness: None,
            seed: 0,
            newton: NewtonConfig::default(),
            supg: SupgConfig::default(),
            mesh: MeshConfig::default(),
            physics: PhysicsConfig::default(),
            params: ScenarioParams::default(),
            custom: None,
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            dt: self.dt,
            integrator: self.integrator,
            newton: self.newton,
            picard_iters: self.picard_iters,
            supg: self.supg,
            h_ref: self.h_ref,
        }
    }

    /// Number of steps to reach `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.step_config().validate()?;
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if !(2..=3).contains(&self.degree) {
            return Err(Error::Config(format!("degree must be 2 or 3, got {}", self.degree)));
        }
        if let Some(g) = self.physics.g {
            if !(g > 0.0) {
                return Err(Error::Config(format!("physics.g must be positive, got {g}")));
            }
        }
        if self.scenario == ScenarioKind::CustomExpression && self.custom.is_none() {
            return Err(Error::Config(
                "scenario custom_expression needs a [custom] table".into(),
            ));
        }
        if self.mesh.kind == Some(MeshKind::File) && self.mesh.path.is_none() {
            return Err(Error::Config("mesh.kind = \"file\" needs mesh.path".into()));
        }
        if self.mesh.cells == Some(0) {
            return Err(Error::Config("mesh.cells must be positive".into()));
        }
        Ok(())
    }
}

/// Reads and validates a TOML configuration file.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = Config::from_toml_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        e => e,
    })?;
    // a relative mesh path is taken from the config's directory
    if let Some(dir) = path.parent() {
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let Some(p) = cfg.mesh.path.as_mut() {
            rebase(p);
        }
    }
    log::info!("configuration {}:\n{}", path.display(), cfg.to_toml_string()?);
    Ok(cfg)
}

pub fn save_config(cfg: &Config, path: &Path) -> Result<()> {
    std::fs::write(path, cfg.to_toml_string()?)?;
    Ok(())
}
