//! Run configuration: parameter presets, JSON config files and complex inputs.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use ruij_core::params::Params;
use ruij_core::quadrature::QuadratureSpec;
use serde::Deserialize;

use crate::CliError;

/// A named parameter set shipped with the tool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub omega1: C64,
    pub omega2: C64,
    pub g: C64,
}

impl Preset {
    pub fn params(&self) -> Params {
        Params::validate(self.omega1, self.omega2, self.g).expect("shipped presets are valid")
    }
}

pub const REAL_SYMM: Preset = Preset {
    name: "REAL-SYMM",
    omega1: C64::new(1.0, 0.0),
    omega2: C64::new(1.0, 0.0),
    g: C64::new(0.5, 0.0),
};

/// Asymmetric periods where the Macdonald shift contours stay clear of poles.
pub const REAL_ASYMM: Preset = Preset {
    name: "REAL-ASYMM",
    omega1: C64::new(0.3, 0.0),
    omega2: C64::new(1.0, 0.0),
    g: C64::new(0.4, 0.0),
};

pub const COMPLEX: Preset = Preset {
    name: "COMPLEX",
    omega1: C64::new(1.0, 0.2),
    omega2: C64::new(1.0, 0.0),
    g: C64::new(0.5, 0.1),
};

pub const PRESETS: [Preset; 3] = [REAL_SYMM, REAL_ASYMM, COMPLEX];

pub fn preset(name: &str) -> Option<Preset> {
    PRESETS.iter().copied().find(|p| p.name.eq_ignore_ascii_case(name))
}

/// A number or a [re, im] pair.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ComplexInput {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexInput {
    pub fn value(self) -> C64 {
        match self {
            ComplexInput::Real(r) => C64::new(r, 0.0),
            ComplexInput::Pair([re, im]) => C64::new(re, im),
        }
    }
}

/// Parameters either by preset name or by explicit values.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ParamsInput {
    Preset(String),
    Explicit {
        omega1: ComplexInput,
        omega2: ComplexInput,
        g: ComplexInput,
    },
}

impl ParamsInput {
    pub fn resolve(&self) -> Result<Params, CliError> {
        match self {
            ParamsInput::Preset(name) => preset(name)
                .map(|p| p.params())
                .ok_or_else(|| CliError::Config(format!("unknown parameter preset {name:?}"))),
            ParamsInput::Explicit { omega1, omega2, g } => {
                Params::validate(omega1.value(), omega2.value(), g.value()).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }
}

/// Contents of a `--config` file; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When absent each suite uses its own shipped parameter sets.
    pub params: Option<ParamsInput>,
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default)]
    pub suites: Vec<String>,
    pub output_path: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(p) = &cfg.params {
            p.resolve()?;
        }
        if let Some(q) = &cfg.quadrature {
            q.check().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(cfg)
    }
}

/// Parses "re" or "re,im".
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected \"re\" or \"re,im\", got {s:?}")),
    }
}

/// Parses a comma-separated list of reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            let params = p.params();
            assert!(params.nu_g > 0.0);
        }
        assert_eq!(preset("real-asymm"), Some(REAL_ASYMM));
        assert!(preset("nope").is_none());
    }

    #[test]
    fn config_forms() {
        let a: RunConfig = serde_json::from_str(r#"{"params": "COMPLEX", "seed": 3}"#).unwrap();
        assert_eq!(a.params.unwrap().resolve().unwrap(), COMPLEX.params());
        let b: RunConfig =
            serde_json::from_str(r#"{"params": {"omega1": 1.0, "omega2": [1.3, 0.0], "g": 0.5}}"#).unwrap();
        assert_eq!(b.params.unwrap().resolve().unwrap(), Params::real(1.0, 1.3, 0.5).unwrap());
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
        let bad: RunConfig = serde_json::from_str(r#"{"params": {"omega1": 1, "omega2": 1, "g": 2.5}}"#).unwrap();
        assert!(bad.params.unwrap().resolve().is_err());
    }

    #[test]
    fn complex_arguments() {
        assert_eq!(parse_complex("0.5").unwrap(), C64::new(0.5, 0.0));
        assert_eq!(parse_complex("1,-0.2").unwrap(), C64::new(1.0, -0.2));
        assert!(parse_complex("1,2,3").is_err());
        assert_eq!(parse_list("0.1, -0.2").unwrap(), vec![0.1, -0.2]);
    }
}
