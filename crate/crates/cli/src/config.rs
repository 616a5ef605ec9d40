//! Flat JSON run configuration with strict validation: unknown keys are
//! rejected and every numeric field is range-checked at load time.

use serde::Deserialize;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Sod1d,
    Advection2d,
    AdvectionSteady,
    SodLagrangianStrip,
    CornerFvPeriodic,
    FluxRecoverySelftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeId {
    Rusanov,
    Roe,
    N,
    Lxf,
    Blended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GclId {
    HalfStep,
    TimeN,
}

fn default_cfl() -> f64 {
    0.5
}
fn default_gamma() -> f64 {
    1.4
}
fn default_resolution() -> usize {
    100
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_gcl() -> GclId {
    GclId::HalfStep
}

/// One run: problem, scheme, discretization and output controls.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    pub scheme: Option<SchemeId>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub t_end: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Cells per direction for the built-in generators.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Optional mesh file (triangulations for the advection problems).
    #[serde(default)]
    pub mesh: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Snapshot cadence in steps; 0 writes only the final state.
    #[serde(default)]
    pub output_every: usize,
    #[serde(default)]
    pub entropy_correction: bool,
    #[serde(default = "default_gcl")]
    pub gcl_convention: GclId,
    #[serde(default)]
    pub seed: u64,
    /// Optional gradient-jump stabilization weight for the blended scheme.
    #[serde(default)]
    pub theta_jump: f64,
}

#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn bad(message: impl Into<String>) -> ConfigError {
    ConfigError { message: message.into() }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| bad(format!("invalid JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return Err(bad(format!("field 'gamma' must be > 1, got {}", self.gamma)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(bad(format!("field 'cfl' must lie in (0, 1], got {}", self.cfl)));
        }
        let needs_time = !matches!(self.problem, Problem::FluxRecoverySelftest);
        if needs_time && !(self.t_end > 0.0 && self.t_end.is_finite()) {
            if self.problem == Problem::AdvectionSteady && self.t_end == 0.0 {
                // pseudo-time marches to steady state; no end time needed
            } else {
                return Err(bad(format!("field 't_end' must be > 0, got {}", self.t_end)));
            }
        }
        if self.resolution < 2 {
            return Err(bad(format!(
                "field 'resolution' must be >= 2, got {}",
                self.resolution
            )));
        }
        if self.theta_jump < 0.0 {
            return Err(bad(format!(
                "field 'theta_jump' must be >= 0, got {}",
                self.theta_jump
            )));
        }
        // scheme compatibility
        let ok = match self.problem {
            Problem::Sod1d => matches!(self.scheme, None | Some(SchemeId::Rusanov) | Some(SchemeId::Roe)),
            Problem::Advection2d | Problem::AdvectionSteady => matches!(
                self.scheme,
                None | Some(SchemeId::N) | Some(SchemeId::Lxf) | Some(SchemeId::Blended)
            ),
            _ => self.scheme.is_none(),
        };
        if !ok {
            return Err(bad(format!(
                "field 'scheme' {:?} is not valid for problem {:?}",
                self.scheme, self.problem
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let cfg =
            RunConfig::from_json(r#"{"problem": "sod1d", "t_end": 0.2, "resolution": 50}"#)
                .unwrap();
        assert_eq!(cfg.problem, Problem::Sod1d);
        assert_eq!(cfg.cfl, 0.5);
        assert_eq!(cfg.gamma, 1.4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json(
            r#"{"problem": "sod1d", "t_end": 0.2, "wibble": 3}"#,
        )
        .unwrap_err();
        assert!(err.message.contains("wibble"), "{}", err.message);
    }

    #[test]
    fn invalid_gamma_names_the_field() {
        let err = RunConfig::from_json(
            r#"{"problem": "sod1d", "t_end": 0.2, "gamma": 1.0}"#,
        )
        .unwrap_err();
        assert!(err.message.contains("gamma"));
    }

    #[test]
    fn scheme_problem_mismatch_is_rejected() {
        let err = RunConfig::from_json(
            r#"{"problem": "sod1d", "t_end": 0.2, "scheme": "n"}"#,
        )
        .unwrap_err();
        assert!(err.message.contains("scheme"));
    }
}
