//! Run configuration: one JSON file with the model plus per-command blocks.
//! Validation failures carry the offending field path.

use serde::Deserialize;
use volterra_ldp::asymptotics::Regime;
use volterra_ldp::{ModelSpec, SolverConfig};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub kernel_check: Option<KernelCheckConfig>,
    #[serde(default)]
    pub rate: Option<RateConfig>,
    #[serde(default)]
    pub smile: Option<SmileConfig>,
    #[serde(default)]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub smalltime: Option<SmalltimeConfig>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub eigen: Option<EigenConfig>,
}

fn default_out_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckConfig {
    /// Modulus steps for the Hölder-slope regression; must span two decades.
    pub h_grid: Vec<f64>,
    /// Side length of the covariance comparison grid (fBm families only).
    #[serde(default = "default_cov_points")]
    pub cov_points: usize,
    /// Single step at which the fBm modulus is compared against h^{2H}.
    #[serde(default = "default_modulus_h")]
    pub modulus_h: f64,
}

fn default_cov_points() -> usize {
    20
}
fn default_modulus_h() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub x_grid: Vec<f64>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmileConfig {
    pub y_grid: Vec<f64>,
    pub regime: Regime,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub y: f64,
    pub eps_grid: Vec<f64>,
    pub paths: usize,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_true")]
    pub include_drift: bool,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmalltimeConfig {
    pub y: f64,
    pub t_grid: Vec<f64>,
    pub paths: usize,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub paths: usize,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    #[serde(default = "default_eigen_n")]
    pub grid_n: usize,
    pub count: usize,
    /// Exponent weight in the moment bound E[exp(a ε ∫ B̂²)].
    #[serde(default)]
    pub a: Option<f64>,
    /// ε as a fraction of the bound's validity threshold (4aλ₁)⁻¹.
    #[serde(default = "default_eps_factor")]
    pub eps_factor: f64,
    /// Monte Carlo paths for the bound check; 0 disables the check.
    #[serde(default)]
    pub mc_paths: usize,
}

fn default_grid_n() -> usize {
    256
}
fn default_true() -> bool {
    true
}
fn default_eigen_n() -> usize {
    512
}
fn default_eps_factor() -> f64 {
    0.5
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| format!("config parse: {e}"))?;
        cfg.model
            .validate()
            .map_err(|e| format!("config model: {e}"))?;
        Ok(cfg)
    }
}
