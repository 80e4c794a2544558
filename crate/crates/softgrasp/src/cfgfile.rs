//! Plain-text `key = value` controller configuration files.

use std::fs;
use std::path::Path;

use softgrasp_core::ControllerConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CfgError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("controller config line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("controller config: {0}")]
    Invalid(String),
}

/// Parses a controller config file; unspecified keys keep their defaults.
pub fn parse_controller_config(text: &str) -> Result<ControllerConfig, CfgError> {
    let mut config = ControllerConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CfgError::Parse {
            line: lineno + 1,
            reason: "expected key = value".to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad_number = || CfgError::Parse {
            line: lineno + 1,
            reason: format!("bad number {value:?} for {key}"),
        };
        let num: f64 = value.parse().map_err(|_| bad_number())?;
        match key {
            "setpoint" => config.setpoint = num,
            "contact_threshold" => config.contact_threshold = num,
            "kp_position" => config.kp_position = num,
            "kp_mu" => config.kp_mu = num,
            "ki_mu" => config.ki_mu = num,
            "closure_setpoint" => config.closure_setpoint = num,
            "u_max" => config.u_max = num,
            "tick_period_s" => config.tick_period_s = num,
            "settle_band" => config.settle_band = num,
            "settle_dwell_s" => config.settle_dwell_s = num,
            "integrator_limit" => config.integrator_limit = num,
            "slew_bound" => config.slew_bound = num,
            "staleness_limit_ms" => config.staleness_limit_ms = num as u64,
            other => {
                return Err(CfgError::Parse {
                    line: lineno + 1,
                    reason: format!("unknown key {other:?}"),
                })
            }
        }
    }
    config
        .validate()
        .map_err(|e| CfgError::Invalid(e.to_string()))?;
    Ok(config)
}

pub fn load_controller_config(path: &Path) -> Result<ControllerConfig, CfgError> {
    parse_controller_config(&fs::read_to_string(path)?)
}
