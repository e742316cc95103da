//! Lower-bound estimates of the observer metric σ_(d|r).
//!
//! The supremum of `|⟨h, t⟩|` over all `(d|r)`-representable `h` is
//! approximated by multi-start projected subgradient ascent over the
//! parameters of a full-width architecture (`r` hidden layers of width `d`),
//! which contains every smaller `(d|r)` network. Every reported value is
//! achieved by a stored witness network and is therefore a lower bound.

mod engine;

pub use engine::optimal_lambda;
pub(crate) use engine::{Arch, Objective, Problem};

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Difference, FunctionOracle, Oracle, Quadrature};
use crate::netcore::{DomainSpec, RepCert, RepNet};

/// The dictionary `F(d,r)` over a domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictSpec {
    pub d: usize,
    pub r: usize,
    pub domain: DomainSpec,
}

impl DictSpec {
    pub fn new(d: usize, r: usize, domain: DomainSpec) -> Result<Self> {
        let spec = Self { d, r, domain };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.d == 0 {
            return Err(Error::InvalidNetwork(
                "dictionary width d must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn cert(&self) -> RepCert {
        RepCert::new(self.d, self.r)
    }

    pub(crate) fn arch(&self) -> Arch {
        Arch::new(self.domain.n, self.domain.q, &vec![self.d; self.r])
    }
}

/// Search effort: restarts, steps per restart, and the geometric step
/// schedule `step_t = step0·decay^t` applied to normalized subgradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub restarts: usize,
    pub iterations: usize,
    pub step0: f64,
    pub decay: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            restarts: 64,
            iterations: 400,
            step0: 0.5,
            decay: 0.97,
        }
    }
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidBudget("restarts must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidBudget("iterations must be positive".into()));
        }
        if !(self.step0.is_finite() && self.step0 > 0.0) {
            return Err(Error::InvalidBudget(format!(
                "step0 must be positive, got {}",
                self.step0
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::InvalidBudget(format!(
                "decay must lie in (0, 1], got {}",
                self.decay
            )));
        }
        Ok(())
    }

    pub fn with_restarts(self, restarts: usize) -> Self {
        Self { restarts, ..self }
    }
}

/// Best correlation found, with the network achieving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryResult {
    /// Always `"lower-bound"`: the value is achieved by `witness`, the true
    /// supremum may be larger.
    pub estimate: String,
    /// `⟨witness, target⟩ ≥ 0` on the quadrature.
    pub value: f64,
    pub witness: RepNet,
    pub dict: DictSpec,
    pub restarts_run: usize,
    pub per_restart_values: Vec<f64>,
    pub seed: u64,
    pub budget: Budget,
}

/// Outcome of an invisibility audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditOutcome {
    /// True iff no witness with correlation above `epsilon` was found at this
    /// budget. This is not a proof of invisibility.
    pub invisible_up_to_budget: bool,
    pub epsilon: f64,
    pub verdict: String,
    pub result: AdversaryResult,
}

/// `⟨h, target⟩` on the quadrature.
pub fn correlation(quad: &Quadrature, h: &RepNet, target: &dyn Oracle) -> Result<f64> {
    crate::measure::inner(quad, h, target)
}

pub(crate) struct SearchOutcome {
    pub arch: Arch,
    /// Best parameters of each restart.
    pub thetas: Vec<Vec<f64>>,
}

/// Runs every restart of the multi-start search on sampled target values.
/// The first `inits.len()` restarts start from the given networks.
pub(crate) fn search(
    quad: &Quadrature,
    spec: &DictSpec,
    target: &[f64],
    budget: &Budget,
    seed: u64,
    inits: &[RepNet],
    objective: Objective,
) -> Result<SearchOutcome> {
    spec.validate()?;
    budget.validate()?;
    if quad.dim() != spec.domain.n || target.len() != quad.len() {
        return Err(Error::DimensionMismatch {
            expected: quad.dim(),
            got: spec.domain.n,
        });
    }
    let arch = spec.arch();
    let injected = inits
        .iter()
        .take(budget.restarts)
        .map(|net| arch.theta_of(net))
        .collect::<Result<Vec<_>>>()?;
    let weighted: Vec<f64> = target
        .iter()
        .zip(quad.weights())
        .map(|(t, m)| t * m)
        .collect();
    let problem = Problem {
        arch: &arch,
        quad,
        weighted_target: &weighted,
        objective,
    };
    let thetas = (0..budget.restarts)
        .into_par_iter()
        .map(|k| {
            let init = match injected.get(k) {
                Some(theta) => theta.clone(),
                None => arch.init(&mut engine::restart_rng(seed, k)),
            };
            problem.restart(&init, budget).1
        })
        .collect();
    Ok(SearchOutcome { arch, thetas })
}

/// Index of the best value; ties go to the lower index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// Maximizes `|⟨h, target⟩|` over `h ∈ F(d,r)`.
pub fn ascend(
    quad: &Quadrature,
    spec: &DictSpec,
    target: &dyn Oracle,
    budget: &Budget,
    seed: u64,
) -> Result<AdversaryResult> {
    let values = quad.sample(target)?;
    ascend_values(quad, spec, &values, budget, seed, &[])
}

/// [`ascend`] on pre-sampled target values, with optional initial networks
/// for the first restarts.
pub fn ascend_values(
    quad: &Quadrature,
    spec: &DictSpec,
    target: &[f64],
    budget: &Budget,
    seed: u64,
    inits: &[RepNet],
) -> Result<AdversaryResult> {
    let outcome = search(
        quad,
        spec,
        target,
        budget,
        seed,
        inits,
        Objective::Correlation,
    )?;
    let arch = &outcome.arch;
    let mut per_restart = Vec::with_capacity(outcome.thetas.len());
    let mut witnesses = Vec::with_capacity(outcome.thetas.len());
    for theta in &outcome.thetas {
        let mut theta = theta.clone();
        let net = arch.to_net(&theta, spec.cert())?;
        let c = quad.inner_values(&quad.sample(&net)?, target);
        // Orient every witness so its correlation is non-negative.
        let net = if c < 0.0 {
            arch.negate_output(&mut theta);
            arch.to_net(&theta, spec.cert())?
        } else {
            net
        };
        per_restart.push(c.abs());
        witnesses.push(net);
    }
    let best = argmax(&per_restart);
    Ok(AdversaryResult {
        estimate: "lower-bound".into(),
        value: per_restart[best],
        witness: witnesses.swap_remove(best),
        dict: *spec,
        restarts_run: budget.restarts,
        per_restart_values: per_restart,
        seed,
        budget: *budget,
    })
}

/// Lower bound on `σ_(d|r)(f, g)`: [`ascend`] on `f − g`.
pub fn sigma_dr(
    quad: &Quadrature,
    spec: &DictSpec,
    f: FunctionOracle,
    g: FunctionOracle,
    budget: &Budget,
    seed: u64,
) -> Result<AdversaryResult> {
    let diff = Difference { a: f, b: g };
    ascend(quad, spec, &diff, budget, seed)
}

/// Searches for a dictionary element correlating with `h` by more than
/// `epsilon`.
pub fn invisibility_audit(
    quad: &Quadrature,
    spec: &DictSpec,
    h: &dyn Oracle,
    epsilon: f64,
    budget: &Budget,
    seed: u64,
) -> Result<AuditOutcome> {
    let values = quad.sample(h)?;
    audit_values(quad, spec, &values, epsilon, budget, seed)
}

pub fn audit_values(
    quad: &Quadrature,
    spec: &DictSpec,
    values: &[f64],
    epsilon: f64,
    budget: &Budget,
    seed: u64,
) -> Result<AuditOutcome> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    let result = ascend_values(quad, spec, values, budget, seed, &[])?;
    let invisible = result.value <= epsilon;
    let verdict = if invisible {
        format!("no witness above {epsilon} found at this budget (not a proof of invisibility)")
    } else {
        format!(
            "witness found with correlation {} > {epsilon}",
            result.value
        )
    };
    Ok(AuditOutcome {
        invisible_up_to_budget: invisible,
        epsilon,
        verdict,
        result,
    })
}

/// Wraps a network as a shareable oracle.
pub fn net_oracle(net: &RepNet) -> FunctionOracle {
    Arc::new(net.clone())
}
