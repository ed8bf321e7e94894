//! Scenario configuration: a flat key-value text format with dotted section
//! prefixes. Every field has a default matching the pendulum benchmark
//! parameters, so an empty file is a valid scenario.
//!
//! ```text
//! # plant
//! plant.grav = 10
//! plant.mass = 2
//! compensation.variant = robust_bound
//! compensation.p_hat = 1
//! sim.x0 = 0,0
//! ```

use std::fmt;
use std::path::PathBuf;

use nalgebra::Vector2;
use thiserror::Error;

use crate::barrier::{LinearClassKe, QuadraticBarrier};
use crate::compensation::CompensationTerm;
use crate::dynamics::{PendulumParams, StepDisturbance};
use crate::sim::Scenario;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value', got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: field {field}: {message}")]
    Invalid {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("field {field}: {message}")]
    Validation { field: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompensationKind {
    None,
    RobustBound,
    Issf,
}

impl fmt::Display for CompensationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::RobustBound => "robust_bound",
            Self::Issf => "issf",
        })
    }
}

/// A parsed and validated scenario configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grav: f64,
    pub mass: f64,
    pub length: f64,
    pub f_bar: f64,
    pub kp: f64,
    pub kd: f64,
    pub step_times: [f64; 3],
    pub q1: f64,
    pub q2: f64,
    pub alpha_c: f64,
    pub variant: CompensationKind,
    pub p_hat: Option<f64>,
    pub eps0: f64,
    pub lambda: f64,
    pub x0: [f64; 2],
    pub dt: f64,
    pub horizon: f64,
    pub out_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            grav: 10.0,
            mass: 2.0,
            length: 1.0,
            f_bar: 2.0,
            kp: 0.6,
            kd: 0.6,
            step_times: [5.0, 10.0, 15.0],
            q1: 4.0,
            q2: 2.0,
            alpha_c: 8.0,
            variant: CompensationKind::RobustBound,
            p_hat: None,
            eps0: 1.0,
            lambda: 0.0,
            x0: [0.0, 0.0],
            dt: 1e-3,
            horizon: 20.0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::Malformed {
                line,
                text: stripped.to_string(),
            })?;
            cfg.assign(line, key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn assign(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let num = |field: &'static str| -> Result<f64, ConfigError> {
            value.parse::<f64>().map_err(|_| ConfigError::Invalid {
                line,
                field,
                message: format!("not a number: {value:?}"),
            })
        };
        match key {
            "plant.grav" => self.grav = num("plant.grav")?,
            "plant.mass" => self.mass = num("plant.mass")?,
            "plant.length" => self.length = num("plant.length")?,
            "plant.f_bar" => self.f_bar = num("plant.f_bar")?,
            "plant.kp" => self.kp = num("plant.kp")?,
            "plant.kd" => self.kd = num("plant.kd")?,
            "disturbance.f_bar" => self.f_bar = num("disturbance.f_bar")?,
            "disturbance.step_times" => {
                let parts = parse_list(value).ok_or_else(|| ConfigError::Invalid {
                    line,
                    field: "disturbance.step_times",
                    message: format!("expected three comma-separated numbers, got {value:?}"),
                })?;
                if parts.len() != 3 {
                    return Err(ConfigError::Invalid {
                        line,
                        field: "disturbance.step_times",
                        message: format!("expected exactly 3 step times, got {}", parts.len()),
                    });
                }
                self.step_times = [parts[0], parts[1], parts[2]];
            }
            "barrier.q1" => self.q1 = num("barrier.q1")?,
            "barrier.q2" => self.q2 = num("barrier.q2")?,
            "class_k.alpha_c" => self.alpha_c = num("class_k.alpha_c")?,
            "compensation.variant" => {
                self.variant = match value {
                    "none" => CompensationKind::None,
                    "robust_bound" => CompensationKind::RobustBound,
                    "issf" => CompensationKind::Issf,
                    other => {
                        return Err(ConfigError::Invalid {
                            line,
                            field: "compensation.variant",
                            message: format!(
                                "expected none | robust_bound | issf, got {other:?}"
                            ),
                        })
                    }
                }
            }
            "compensation.p_hat" => self.p_hat = Some(num("compensation.p_hat")?),
            "compensation.eps0" => self.eps0 = num("compensation.eps0")?,
            "compensation.lambda" => self.lambda = num("compensation.lambda")?,
            "sim.x0" => {
                let parts = parse_list(value).ok_or_else(|| ConfigError::Invalid {
                    line,
                    field: "sim.x0",
                    message: format!("expected two comma-separated numbers, got {value:?}"),
                })?;
                if parts.len() != 2 {
                    return Err(ConfigError::Invalid {
                        line,
                        field: "sim.x0",
                        message: format!("expected 2 components, got {}", parts.len()),
                    });
                }
                self.x0 = [parts[0], parts[1]];
            }
            "sim.dt" => self.dt = num("sim.dt")?,
            "sim.horizon" => self.horizon = num("sim.horizon")?,
            "outputs.dir" => self.out_dir = PathBuf::from(value),
            other => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: other.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &'static str, message: String| ConfigError::Validation { field, message };
        let finite = [
            ("plant.grav", self.grav),
            ("plant.mass", self.mass),
            ("plant.length", self.length),
            ("plant.f_bar", self.f_bar),
            ("plant.kp", self.kp),
            ("plant.kd", self.kd),
            ("barrier.q1", self.q1),
            ("barrier.q2", self.q2),
            ("class_k.alpha_c", self.alpha_c),
            ("compensation.eps0", self.eps0),
            ("compensation.lambda", self.lambda),
            ("sim.dt", self.dt),
            ("sim.horizon", self.horizon),
            ("sim.x0", self.x0[0]),
            ("sim.x0", self.x0[1]),
        ];
        for (field, value) in finite {
            if !value.is_finite() {
                return Err(err(field, format!("must be finite, got {value}")));
            }
        }
        if self.mass <= 0.0 {
            return Err(err("plant.mass", format!("must be > 0, got {}", self.mass)));
        }
        if self.length <= 0.0 {
            return Err(err("plant.length", format!("must be > 0, got {}", self.length)));
        }
        if self.f_bar < 0.0 {
            return Err(err("plant.f_bar", format!("must be >= 0, got {}", self.f_bar)));
        }
        if self.q1 <= 0.0 || self.q2 <= 0.0 {
            return Err(err("barrier.q1", "barrier weights must be > 0".into()));
        }
        if self.alpha_c <= 0.0 {
            return Err(err(
                "class_k.alpha_c",
                format!("must be > 0, got {}", self.alpha_c),
            ));
        }
        if self.eps0 <= 0.0 {
            return Err(err(
                "compensation.eps0",
                format!("epsilon must be > 0, got {}", self.eps0),
            ));
        }
        if self.lambda < 0.0 {
            return Err(err(
                "compensation.lambda",
                format!("must be >= 0, got {}", self.lambda),
            ));
        }
        if let Some(p_hat) = self.p_hat {
            if !p_hat.is_finite() || p_hat < 0.0 {
                return Err(err(
                    "compensation.p_hat",
                    format!("must be finite and >= 0, got {p_hat}"),
                ));
            }
        }
        if self.dt <= 0.0 {
            return Err(err("sim.dt", format!("must be > 0, got {}", self.dt)));
        }
        if self.horizon <= 0.0 {
            return Err(err(
                "sim.horizon",
                format!("must be > 0, got {}", self.horizon),
            ));
        }
        StepDisturbance::new(self.f_bar, self.step_times).map_err(|e| {
            err("disturbance.step_times", e.to_string())
        })?;
        Ok(())
    }

    /// True uncertainty bound p = F_bar / (m l) implied by the plant.
    pub fn uncertainty_bound(&self) -> f64 {
        self.f_bar / (self.mass * self.length)
    }

    /// Estimated bound used by the robust compensation; defaults to the true
    /// bound when not set.
    pub fn p_hat(&self) -> f64 {
        self.p_hat.unwrap_or_else(|| self.uncertainty_bound())
    }

    pub fn compensation(&self) -> CompensationTerm {
        match self.variant {
            CompensationKind::None => CompensationTerm::none(),
            CompensationKind::RobustBound => {
                CompensationTerm::robust_bound(self.p_hat()).expect("validated")
            }
            CompensationKind::Issf => {
                CompensationTerm::issf(self.eps0, self.lambda).expect("validated")
            }
        }
    }

    pub fn to_scenario(&self, name: &str) -> Scenario {
        let params = PendulumParams {
            grav: self.grav,
            mass: self.mass,
            length: self.length,
            f_bar: self.f_bar,
            kp: self.kp,
            kd: self.kd,
        };
        Scenario {
            name: name.to_string(),
            params,
            disturbance: StepDisturbance::new(self.f_bar, self.step_times).expect("validated"),
            barrier: QuadraticBarrier::from_weights(self.q1, self.q2).expect("validated"),
            class_k: LinearClassKe::new(self.alpha_c).expect("validated"),
            compensation: self.compensation(),
            x0: Vector2::new(self.x0[0], self.x0[1]),
            dt: self.dt,
            horizon: self.horizon,
        }
    }
}

fn parse_list(value: &str) -> Option<Vec<f64>> {
    value
        .split(',')
        .map(|p| p.trim().parse::<f64>().ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_benchmark_defaults() {
        let cfg = ScenarioConfig::parse_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.uncertainty_bound(), 1.0);
        assert_eq!(cfg.p_hat(), 1.0);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let text = "\
# a scenario
plant.mass = 3.0
compensation.variant = issf   # tunable
compensation.eps0 = 0.5
compensation.lambda = 4
sim.x0 = 0.1, -0.2
disturbance.step_times = 1, 2, 3
";
        let cfg = ScenarioConfig::parse_str(text).unwrap();
        assert_eq!(cfg.mass, 3.0);
        assert_eq!(cfg.variant, CompensationKind::Issf);
        assert_eq!(cfg.eps0, 0.5);
        assert_eq!(cfg.lambda, 4.0);
        assert_eq!(cfg.x0, [0.1, -0.2]);
        assert_eq!(cfg.step_times, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_unknown_keys_with_line_numbers() {
        let err = ScenarioConfig::parse_str("\nplant.spin = 3\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "plant.spin");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_values_naming_the_field() {
        let err = ScenarioConfig::parse_str("class_k.alpha_c = -1").unwrap_err();
        assert!(err.to_string().contains("class_k.alpha_c"));
        let err = ScenarioConfig::parse_str("compensation.eps0 = 0").unwrap_err();
        assert!(err.to_string().contains("epsilon must be > 0"));
        let err = ScenarioConfig::parse_str("compensation.lambda = -0.5").unwrap_err();
        assert!(err.to_string().contains("compensation.lambda"));
        let err = ScenarioConfig::parse_str("sim.dt = 0").unwrap_err();
        assert!(err.to_string().contains("sim.dt"));
        let err = ScenarioConfig::parse_str("plant.mass = nope").unwrap_err();
        assert!(err.to_string().contains("not a number"));
    }

    #[test]
    fn malformed_lines_are_reported() {
        let err = ScenarioConfig::parse_str("plant.mass 2").unwrap_err();
        assert!(matches!(err, ConfigError::Malformed { line: 1, .. }));
    }

    #[test]
    fn scenario_round_trip() {
        let cfg = ScenarioConfig::parse_str("compensation.p_hat = 0.5").unwrap();
        let sc = cfg.to_scenario("s");
        assert_eq!(
            sc.compensation,
            CompensationTerm::robust_bound(0.5).unwrap()
        );
        assert_eq!(sc.params.mass, 2.0);
        assert_eq!(sc.dt, 1e-3);
    }
}
