//! Run configuration: a JSON file with fixed field names. Unknown fields
//! are rejected and every seed must be given explicitly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::{Budget, DictSpec};
use crate::decomposer::StageDict;
use crate::error::{Error, Result};
use crate::measure::SchemeRegistry;
use crate::netcore::DomainSpec;
use crate::zoo::{Params, Zoo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub n: usize,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictConfig {
    pub d: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub scheme: String,
    pub size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "defaults::restarts")]
    pub restarts: usize,
    #[serde(default = "defaults::iterations")]
    pub iterations: usize,
    #[serde(default = "defaults::step0")]
    pub step0: f64,
    #[serde(default = "defaults::decay")]
    pub decay: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

/// Output file names, resolved against the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "defaults::report")]
    pub report: String,
    #[serde(default = "defaults::trace")]
    pub trace: String,
    #[serde(default = "defaults::witness")]
    pub witness: String,
    #[serde(default = "defaults::sweep")]
    pub sweep: String,
    #[serde(default = "defaults::adversary")]
    pub adversary: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            report: defaults::report(),
            trace: defaults::trace(),
            witness: defaults::witness(),
            sweep: defaults::sweep(),
            adversary: defaults::adversary(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub dict: DictConfig,
    pub epsilon: f64,
    pub quadrature: QuadratureConfig,
    pub solver: SolverConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub stage_dict: StageDict,
    /// Tolerance added to ε when re-verifying the audit value.
    #[serde(default = "defaults::audit_slack")]
    pub audit_slack: f64,
    #[serde(default)]
    pub output: OutputConfig,
}

mod defaults {
    pub fn restarts() -> usize {
        64
    }
    pub fn iterations() -> usize {
        400
    }
    pub fn step0() -> f64 {
        0.5
    }
    pub fn decay() -> f64 {
        0.97
    }
    pub fn audit_slack() -> f64 {
        0.05
    }
    pub fn report() -> String {
        "report.json".into()
    }
    pub fn trace() -> String {
        "trace.csv".into()
    }
    pub fn witness() -> String {
        "witness.json".into()
    }
    pub fn sweep() -> String {
        "sweep.csv".into()
    }
    pub fn adversary() -> String {
        "adversary.json".into()
    }
}

fn field(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.domain.n == 0 {
            return Err(field("domain.n", "must be at least 1"));
        }
        if !(self.domain.q.is_finite() && self.domain.q >= 1.0) {
            return Err(field(
                "domain.q",
                format!("must be finite and >= 1, got {}", self.domain.q),
            ));
        }
        if self.dict.d == 0 {
            return Err(field("dict.d", "must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(field(
                "epsilon",
                format!("must lie in (0, 1], got {}", self.epsilon),
            ));
        }
        let schemes = SchemeRegistry::with_builtins();
        if schemes.get(&self.quadrature.scheme).is_err() {
            return Err(field(
                "quadrature.scheme",
                format!(
                    "unknown scheme `{}` (known: {:?})",
                    self.quadrature.scheme,
                    schemes.names().collect::<Vec<_>>()
                ),
            ));
        }
        if self.quadrature.size == 0 {
            return Err(field("quadrature.size", "must be positive"));
        }
        if self.solver.restarts == 0 {
            return Err(field("solver.restarts", "must be positive"));
        }
        if self.solver.iterations == 0 {
            return Err(field("solver.iterations", "must be positive"));
        }
        if !(self.solver.step0.is_finite() && self.solver.step0 > 0.0) {
            return Err(field("solver.step0", "must be positive"));
        }
        if !(self.solver.decay > 0.0 && self.solver.decay <= 1.0) {
            return Err(field("solver.decay", "must lie in (0, 1]"));
        }
        if !(self.audit_slack.is_finite() && self.audit_slack >= 0.0) {
            return Err(field("audit_slack", "must be a non-negative number"));
        }
        if !Zoo::with_builtins().contains(&self.target.name) {
            return Err(field(
                "target.name",
                format!("`{}` is not in the zoo", self.target.name),
            ));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        DomainSpec::new(self.domain.n, self.domain.q)
    }

    pub fn dict_spec(&self) -> Result<DictSpec> {
        DictSpec::new(self.dict.d, self.dict.r, self.domain()?)
    }

    pub fn budget(&self) -> Budget {
        Budget {
            restarts: self.solver.restarts,
            iterations: self.solver.iterations,
            step0: self.solver.step0,
            decay: self.solver.decay,
        }
    }
}
