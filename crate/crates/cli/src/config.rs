//! Experiment configuration: strict TOML, every table rejects unknown keys.

use std::path::{Path, PathBuf};

use burgers_fbsde::oracle::OracleConfig;
use burgers_fbsde::picard::{McConfig, PicardConfig};
use burgers_fbsde::presets::{Preset, SineTerm};
use burgers_fbsde::sde::NoiseMode;
use burgers_fbsde::torus::{load_spacetime, read_header, SpaceTimeField};
use burgers_fbsde::{GridSpec, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Data for `h` or `F`: a named preset or a field file written by this tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant { value: f64 },
    Sine { amplitude: f64, wavenumber: u32 },
    SineSum { terms: Vec<SineTerm> },
    /// JSON header of a saved field (static, or in time for the forcing).
    Tabulated { file: PathBuf },
}

impl FieldSpec {
    pub fn preset(&self) -> Option<Preset> {
        match self {
            FieldSpec::Zero => Some(Preset::Zero),
            FieldSpec::Constant { value } => Some(Preset::Constant { value: *value }),
            FieldSpec::Sine { amplitude, wavenumber } => Some(Preset::sine(*amplitude, *wavenumber)),
            FieldSpec::SineSum { terms } => Some(Preset::SineSum { terms: terms.clone() }),
            FieldSpec::Tabulated { .. } => None,
        }
    }
}

fn default_alpha() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// Spatial dimension.
    pub n: usize,
    pub nu: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub h: FieldSpec,
    #[serde(rename = "F")]
    pub forcing: FieldSpec,
    /// Sobolev order for the reported norms.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Points per axis.
    #[serde(rename = "N")]
    pub points: usize,
    /// Time steps on `[0, T]`.
    #[serde(rename = "J")]
    pub steps: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(rename = "M")]
    pub paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: NoiseMode,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default = "default_stride")]
    pub restart_stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Bin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Monte Carlo paths `M`.
    Paths,
    /// Oracle step, against a reference at a quarter of the smallest step.
    OracleDt,
    /// Grid points per axis `N`.
    Points,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// Sizes and thresholds of the diagnostics suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    pub enabled: bool,
    pub probes: usize,
    pub restart_paths: usize,
    pub composition_paths: usize,
    pub composition_tol: f64,
    pub bsde_paths: usize,
    pub bsde_starts: usize,
    pub bsde_rms_tol: f64,
    pub determinism_paths: Vec<usize>,
    pub determinism_seeds: usize,
    pub regularity_paths: usize,
    pub regularity_max_failure: f64,
    pub terminal_tol: f64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            enabled: false,
            probes: 5,
            restart_paths: 10_000,
            composition_paths: 4,
            composition_tol: 1e-3,
            bsde_paths: 200,
            bsde_starts: 8,
            bsde_rms_tol: 0.05,
            determinism_paths: vec![250, 1000, 4000],
            determinism_seeds: 16,
            regularity_paths: 2000,
            regularity_max_failure: 1e-3,
            terminal_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub mc: McSection,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub outputs: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        // Tabulated files are relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        for spec in [&mut config.problem.h, &mut config.problem.forcing] {
            if let FieldSpec::Tabulated { file } = spec {
                if file.is_relative() {
                    *file = base.join(&*file);
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    pub fn validate(&self) -> CliResult<()> {
        let p = &self.problem;
        if p.n == 0 {
            return Err(invalid("problem.n", "dimension must be >= 1"));
        }
        if !(p.nu > 0.0 && p.nu.is_finite()) {
            return Err(invalid("problem.nu", "viscosity must be positive"));
        }
        if !(p.horizon > 0.0 && p.horizon.is_finite()) {
            return Err(invalid("problem.T", "horizon must be positive"));
        }
        if !(p.alpha >= 0.0) {
            return Err(invalid("problem.alpha", "Sobolev order must be >= 0"));
        }
        GridSpec::new(p.n, self.grid.points).map_err(|e| invalid("grid.N", e))?;
        if self.grid.steps < 2 {
            return Err(invalid("grid.J", "need at least 2 time steps"));
        }
        self.mc_config().validate().map_err(|e| invalid("mc", e))?;
        if !(self.picard.tol > 0.0) {
            return Err(invalid("picard.tol", "tolerance must be positive"));
        }
        if self.picard.max_iter == 0 {
            return Err(invalid("picard.max_iter", "need at least one iteration"));
        }
        if !(self.oracle.dt > 0.0) {
            return Err(invalid("oracle.dt", "step must be positive"));
        }
        if let Some(s) = &self.sweep {
            if s.values.iter().any(|v| !(*v > 0.0)) {
                return Err(invalid("sweep.values", "sweep values must be positive"));
            }
        }
        let d = &self.diagnostics;
        if d.determinism_paths.len() < 2 || d.determinism_seeds < 8 {
            return Err(invalid("diagnostics", "determinism needs >= 2 path counts and >= 8 seeds"));
        }
        if d.probes == 0 || d.restart_paths == 0 || d.composition_paths == 0 || d.bsde_paths == 0 || d.bsde_starts == 0 || d.regularity_paths == 0 {
            return Err(invalid("diagnostics", "sample sizes must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.problem.n, self.grid.points).expect("validated")
    }

    pub fn mc_config(&self) -> McConfig {
        McConfig {
            paths: self.mc.paths,
            seed: self.mc.seed,
            mode: self.mc.mode,
            antithetic: self.mc.antithetic,
            restart_stride: self.mc.restart_stride,
        }
    }

    /// Builds `h`, `F` and `ν` on the configured grids.
    pub fn problem(&self) -> CliResult<Problem> {
        let grid = self.grid();
        let times = SpaceTimeField::uniform_times(0.0, self.problem.horizon, self.grid.steps).map_err(|e| invalid("grid.J", e))?;
        let terminal = match self.problem.h.preset() {
            Some(p) => p.sample(grid)?,
            None => {
                let field = load_tabulated(&self.problem.h, "problem.h")?;
                if field.times().len() != 1 {
                    return Err(invalid("problem.h", "terminal data must be a single field"));
                }
                field.terminal().clone()
            }
        };
        if terminal.grid() != grid || terminal.components() != grid.dim() {
            return Err(invalid("problem.h", "tabulated grid does not match grid.N and problem.n"));
        }
        let forcing = match self.problem.forcing.preset() {
            Some(p) => p.sample_in_time(grid, times)?,
            None => {
                let field = load_tabulated(&self.problem.forcing, "problem.F")?;
                if field.grid() != grid || field.components() != grid.dim() {
                    return Err(invalid("problem.F", "tabulated grid does not match grid.N and problem.n"));
                }
                if field.times().len() == 1 {
                    SpaceTimeField::constant_in_time(times, field.terminal().clone())?
                } else {
                    let slices = times
                        .iter()
                        .map(|&s| field.slice_at(s))
                        .collect::<burgers_fbsde::Result<Vec<_>>>()
                        .map_err(|e| invalid("problem.F", e))?;
                    SpaceTimeField::new(times, slices)?
                }
            }
        };
        Ok(Problem::new(terminal, forcing, self.problem.nu)?)
    }
}

/// A static field is returned as a single-slice space-time field.
fn load_tabulated(spec: &FieldSpec, key: &str) -> CliResult<SpaceTimeField<f64>> {
    let FieldSpec::Tabulated { file } = spec else {
        unreachable!("presets are sampled directly")
    };
    let header = read_header(file).map_err(|e| invalid(key, e))?;
    if header.times.is_some() {
        load_spacetime(file).map_err(|e| invalid(key, e))
    } else {
        let field = burgers_fbsde::torus::load_field(file).map_err(|e| invalid(key, e))?;
        Ok(SpaceTimeField::new(vec![0.0], vec![field])?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const REFERENCE: &str = r#"
[problem]
n = 1
nu = 0.1
T = 0.5
h = { kind = "sine", amplitude = 0.5, wavenumber = 1 }
F = { kind = "zero" }

[grid]
N = 32
J = 16

[mc]
M = 100
seed = 7

[outputs]
directory = "out"
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = ExperimentConfig::parse(REFERENCE).unwrap();
        assert_eq!(c.picard, PicardConfig::default());
        assert_eq!(c.mc.restart_stride, 1);
        let again = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_toml(), c.to_toml());
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = REFERENCE.replace("seed = 7", "seed = 7\nsede = 3");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("sede"), "{err}");
        let text = REFERENCE.replace("wavenumber = 1 }", "wavenumber = 1, phase = 2 }");
        assert!(ExperimentConfig::parse(&text).unwrap_err().to_string().contains("phase"));
    }

    #[test]
    fn invalid_values_name_their_path() {
        let err = ExperimentConfig::parse(&REFERENCE.replace("N = 32", "N = 31")).unwrap_err();
        assert!(err.to_string().contains("grid.N"), "{err}");
        let err = ExperimentConfig::parse(&REFERENCE.replace("nu = 0.1", "nu = -1.0")).unwrap_err();
        assert!(err.to_string().contains("problem.nu"));
    }
}
