use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::direct::COMMON_REL_TOL;
use crate::error::{Error, Result};
use crate::inverse::{SolveOptions, DEFAULT_BETAS, DEFAULT_CAP, VERIFY_REL_TOL};
use crate::par::Execution;

/// Named tolerances that a run may override.
pub const TOLERANCE_NAMES: [&str; 2] = ["common_rel", "verify_rel"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub truncation_size: usize,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub candidate_cap: usize,
    #[serde(default = "default_betas")]
    pub beta_samples: Vec<f64>,
    #[serde(default)]
    pub execution: Execution,
}

fn default_cap() -> usize {
    DEFAULT_CAP
}

fn default_betas() -> Vec<f64> {
    DEFAULT_BETAS.to_vec()
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            truncation_size: 10,
            tolerances: BTreeMap::new(),
            seed: 0,
            candidate_cap: DEFAULT_CAP,
            beta_samples: default_betas(),
            execution: Execution::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.truncation_size < 2 {
            return Err(Error::InvalidInput(format!("truncation size {} is below 2", self.truncation_size)));
        }
        for (name, &v) in &self.tolerances {
            if !TOLERANCE_NAMES.contains(&name.as_str()) {
                return Err(Error::InvalidInput(format!("unknown tolerance '{name}'; known: {}", TOLERANCE_NAMES.join(", "))));
            }
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("tolerance '{name}' must be positive, got {v}")));
            }
        }
        if let Some(b) = self.beta_samples.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::InvalidInput(format!("beta sample {b} is not inside (0, 1)")));
        }
        if self.candidate_cap == 0 {
            return Err(Error::InvalidInput("candidate cap must be at least 1".into()));
        }
        Ok(())
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(match name {
            "common_rel" => COMMON_REL_TOL,
            "verify_rel" => VERIFY_REL_TOL,
            _ => f64::NAN,
        })
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            cap: self.candidate_cap,
            beta_samples: self.beta_samples.clone(),
            common_rel: self.tolerance("common_rel"),
            verify_rel: self.tolerance("verify_rel"),
            execution: self.execution,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        let c: RunConfig = serde_json::from_str(r#"{"truncation_size": 4}"#).unwrap();
        assert_eq!(c.candidate_cap, 64);
        assert_eq!(c.solve_options().verify_rel, VERIFY_REL_TOL);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |f: fn(&mut RunConfig)| {
            let mut c = RunConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.truncation_size = 1));
        assert!(bad(|c| c.beta_samples = vec![1.0]));
        assert!(bad(|c| {
            c.tolerances.insert("verify_rel".into(), 0.0);
        }));
        assert!(bad(|c| {
            c.tolerances.insert("nonsense".into(), 1.0);
        }));
    }

    #[test]
    fn override_reaches_solver_options() {
        let mut c = RunConfig::default();
        c.tolerances.insert("common_rel".into(), 1e-6);
        assert_eq!(c.solve_options().common_rel, 1e-6);
    }
}
