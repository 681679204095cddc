//! Simulation configuration file parsing and validation.

use peskin3d_core::bie::QuadratureScheme;
use peskin3d_core::sim::{InitialShape, SimConfig, Stepping};
use peskin3d_core::tension::{LawKind, TensionLaw};
use serde::Deserialize;

fn default_lambda_lo() -> f64 {
    1e-3
}
fn default_lambda_hi() -> f64 {
    1e3
}

/// Flat law description as written in config files.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub kind: String,
    pub k0: Option<f64>,
    pub lambda0: Option<f64>,
    pub c: Option<f64>,
    pub points: Option<Vec<(f64, f64)>>,
    #[serde(default = "default_lambda_lo")]
    pub lambda_lo: f64,
    #[serde(default = "default_lambda_hi")]
    pub lambda_hi: f64,
    #[serde(default)]
    pub experimental: bool,
}

impl LawConfig {
    pub fn build(&self) -> Result<TensionLaw, String> {
        let kind = match self.kind.as_str() {
            "hookean" => LawKind::Hookean {
                k0: self.k0.ok_or("hookean law requires k0")?,
            },
            "affine" => LawKind::Affine {
                k0: self.k0.ok_or("affine law requires k0")?,
                lambda0: self.lambda0.unwrap_or(0.0),
                c: self.c.ok_or("affine law requires c")?,
            },
            "tabulated" => LawKind::Tabulated {
                points: self
                    .points
                    .clone()
                    .ok_or("tabulated law requires points")?,
            },
            other => {
                return Err(format!(
                    "unknown law kind `{other}`, expected one of hookean, affine, tabulated"
                ))
            }
        };
        TensionLaw::new(kind, self.lambda_lo, self.lambda_hi, self.experimental)
            .map_err(|e| e.to_string())
    }
}

fn default_snapshot_every() -> usize {
    0
}
fn default_output_dir() -> String {
    "out".to_string()
}

/// Top-level config file schema; unknown keys are rejected with the list of
/// accepted ones.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub initial: InitialShape,
    pub law: LawConfig,
    pub degree: usize,
    pub scheme: Option<QuadratureScheme>,
    pub stepping: Stepping,
    pub t_end: f64,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

impl CliConfig {
    /// Build the validated simulation config; collects every violation.
    pub fn to_sim_config(&self) -> Result<SimConfig, String> {
        let law = self.law.build()?;
        let scheme = self.scheme.unwrap_or(QuadratureScheme::PolarRotated {
            resolution: self.degree + 5,
        });
        let config = SimConfig {
            initial: self.initial.clone(),
            law,
            degree: self.degree,
            scheme,
            stepping: self.stepping,
            t_end: self.t_end,
            snapshot_every: self.snapshot_every,
        };
        let violations = config.violations();
        if violations.is_empty() {
            Ok(config)
        } else {
            Err(format!("invalid configuration: {}", violations.join("; ")))
        }
    }
}

/// Parse a config file from text.
pub fn parse_config(text: &str) -> Result<CliConfig, String> {
    serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))
}
