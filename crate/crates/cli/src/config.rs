use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sinai_core::geometry::{build_surface, BoundaryCondition, SurfaceDraft, SurfaceSpec};
use sinai_core::spectral::TestFunction;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Dynamics,
    Spectrum,
    Nodal,
    Kuznecov,
    Qer,
    Certificates,
    Density,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Dynamics,
        Check::Spectrum,
        Check::Nodal,
        Check::Kuznecov,
        Check::Qer,
        Check::Certificates,
        Check::Density,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Dynamics => "dynamics",
            Check::Spectrum => "spectrum",
            Check::Nodal => "nodal",
            Check::Kuznecov => "kuznecov",
            Check::Qer => "qer",
            Check::Certificates => "certificates",
            Check::Density => "density",
        }
    }

    fn requires(self) -> &'static [Check] {
        match self {
            Check::Nodal | Check::Kuznecov | Check::Qer => &[Check::Spectrum],
            // Sign-change medians come from the nodal rows.
            Check::Certificates => &[Check::Spectrum, Check::Nodal],
            _ => &[],
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| CliError::Config(format!("unknown check `{s}`")))
    }
}

/// Add the stages every enabled check depends on.
pub fn close_checks(checks: impl IntoIterator<Item = Check>) -> BTreeSet<Check> {
    let mut set: BTreeSet<Check> = checks.into_iter().collect();
    let extra: Vec<Check> = set.iter().flat_map(|c| c.requires().iter().copied()).collect();
    for c in extra {
        if set.insert(c) {
            log::info!("enabling `{c}`, required by another check");
        }
    }
    set
}

/// Arc of a boundary component, in fractions of its length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcConfig {
    pub component: usize,
    pub start: f64,
    pub length: f64,
    #[serde(default = "default_profile")]
    pub profile: String,
}

fn default_profile() -> String {
    "bump".into()
}

impl ArcConfig {
    pub fn test_function(&self, spec: &SurfaceSpec) -> Result<TestFunction> {
        let comp = spec
            .atlas
            .components
            .get(self.component)
            .ok_or_else(|| CliError::Config(format!("arc on unknown component {}", self.component)))?;
        if !(self.length > 0.0 && self.length <= 1.0) {
            return Err(CliError::Config(format!(
                "arc length fraction {} not in (0, 1]",
                self.length
            )));
        }
        let (s, l) = (self.start * comp.length, self.length * comp.length);
        match self.profile.as_str() {
            "bump" => Ok(TestFunction::bump(comp.id, s, l)),
            "flat" => Ok(TestFunction::arc_constant(comp.id, s, l, 1.0)),
            other => Err(CliError::Config(format!("unknown profile `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Surface TOML, relative to the experiment file.
    pub surface: PathBuf,
    /// Overrides the surface's boundary condition.
    #[serde(default)]
    pub bc: Option<BoundaryCondition>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Number of modes; ignored when `lambda_cut` is set.
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default)]
    pub lambda_cut: Option<f64>,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default, rename = "arc")]
    pub arcs: Vec<ArcConfig>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Random launches for the dynamics stage.
    #[serde(default = "default_launches")]
    pub launches: usize,
}

fn default_resolution() -> usize {
    sinai_core::geometry::DEFAULT_RESOLUTION
}

fn default_modes() -> usize {
    200
}

fn default_launches() -> usize {
    100
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if cfg.surface.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.surface = dir.join(&cfg.surface);
            }
        }
        Ok(cfg)
    }

    pub fn draft(&self) -> Result<SurfaceDraft> {
        let draft = SurfaceDraft::from_file(&self.surface).map_err(|e| CliError::stage("geometry", e))?;
        Ok(match self.bc {
            Some(bc) => draft.with_bc(bc),
            None => draft,
        })
    }

    pub fn surface_spec(&self) -> Result<SurfaceSpec> {
        build_surface(&self.draft()?).map_err(|e| CliError::stage("geometry", e))
    }

    pub fn enabled(&self) -> BTreeSet<Check> {
        let base = if self.checks.is_empty() {
            Check::ALL.to_vec()
        } else {
            self.checks.clone()
        };
        close_checks(base)
    }

    /// Arcs from the file, or three default bumps on the first component.
    pub fn test_functions(&self, spec: &SurfaceSpec) -> Result<Vec<TestFunction>> {
        if self.arcs.is_empty() {
            return default_arcs().iter().map(|a| a.test_function(spec)).collect();
        }
        self.arcs.iter().map(|a| a.test_function(spec)).collect()
    }
}

pub fn default_arcs() -> Vec<ArcConfig> {
    [(0.0, 0.4), (0.3, 0.6), (0.7, 0.25)]
        .into_iter()
        .map(|(start, length)| ArcConfig {
            component: 0,
            start,
            length,
            profile: default_profile(),
        })
        .collect()
}
