//! Energy-increment decomposition `f = g + (f − g)`.
//!
//! Each stage picks one dictionary element `h ∈ F(d,r)` and coefficient
//! `λ ∈ [-q,q]` maximizing the decrease `2λ⟨h,res⟩ − λ²‖h‖²` of the squared
//! residual, and accepts it only if that decrease exceeds `ε²`. Since the
//! squared residual starts at `‖f‖² ≤ 1`, at most `⌈1/ε²⌉` stages are ever
//! accepted. The accepted elements are assembled into one network
//! `g = clip(Σ λ_k f_k)` and the residual `f − g` is audited for correlation
//! with the dictionary.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adversary::{
    self, argmax, audit_values, optimal_lambda, AuditOutcome, Budget, DictSpec, Objective,
};
use crate::error::{Error, Result};
use crate::measure::{Oracle, Quadrature, QuadratureSpec};
use crate::netcore::{compose_parallel, RepCert, RepNet};
use crate::seeds::derive_seed;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

const AUDIT_STREAM: u64 = 0xa0d1_7000;

/// `⌈1/ε²⌉`, treating values within 1e-9 of an integer as that integer.
pub fn m_budget(epsilon: f64) -> usize {
    let x = 1.0 / (epsilon * epsilon);
    (x - 1e-9).ceil().max(1.0) as usize
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::EpsilonOutOfRange(epsilon))
    }
}

/// Which dictionary each stage searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageDict {
    /// Every stage searches `F(d,r)`.
    #[default]
    Fixed,
    /// Stage `k` searches `F(2^{k-1}·d, r+k-1)`.
    Growing,
}

impl StageDict {
    pub fn at_stage(self, base: &DictSpec, k: usize) -> Result<DictSpec> {
        match self {
            StageDict::Fixed => Ok(*base),
            StageDict::Growing => {
                let factor = 1usize
                    .checked_shl((k - 1) as u32)
                    .filter(|f| base.d.checked_mul(*f).is_some_and(|w| w <= 1024))
                    .ok_or_else(|| {
                        Error::InvalidNetwork(format!("growing dictionary too wide at stage {k}"))
                    })?;
                DictSpec::new(base.d * factor, base.r + k - 1, base.domain)
            }
        }
    }
}

/// One accepted stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StagePick {
    pub k: usize,
    pub element: RepNet,
    pub lambda: f64,
    pub gain: f64,
    /// Squared residual after subtracting `λ·element`.
    pub t_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyTrace {
    /// `‖f‖²` on the quadrature.
    pub t0: f64,
    pub picks: Vec<StagePick>,
}

impl EnergyTrace {
    /// Squared residual after the last accepted stage.
    pub fn t_last(&self) -> f64 {
        self.picks.last().map_or(self.t0, |p| p.t_after)
    }

    /// Violations of `1 ≥ t0 ≥ t_1 > t_2 > … ≥ 0` with every gain above `ε²`.
    pub fn violations(&self, epsilon: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.t0 > 1.0 + 1e-9 {
            out.push(format!("t0 = {} exceeds 1", self.t0));
        }
        let mut prev = self.t0;
        for p in &self.picks {
            if p.t_after >= prev {
                out.push(format!(
                    "stage {}: t_after {} not below {prev}",
                    p.k, p.t_after
                ));
            }
            if p.t_after < 0.0 {
                out.push(format!("stage {}: negative energy {}", p.k, p.t_after));
            }
            if p.gain <= epsilon * epsilon {
                out.push(format!(
                    "stage {}: gain {} not above ε² = {}",
                    p.k,
                    p.gain,
                    epsilon * epsilon
                ));
            }
            prev = p.t_after;
        }
        out
    }

    /// `k,t_after,lambda,gain`, with a `k = 0` row for `t0`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,t_after,lambda,gain")?;
        writeln!(out, "0,{:?},0,0", self.t0)?;
        for p in &self.picks {
            writeln!(out, "{},{:?},{:?},{:?}", p.k, p.t_after, p.lambda, p.gain)?;
        }
        Ok(())
    }
}

/// Result of a single greedy stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub element: RepNet,
    pub lambda: f64,
    pub gain: f64,
    pub correlation: f64,
    pub norm_sq: f64,
}

/// Best single-element improvement of `residual` within `F(d,r)`.
pub fn stage_solve(
    quad: &Quadrature,
    spec: &DictSpec,
    residual: &dyn Oracle,
    budget: &Budget,
    seed: u64,
) -> Result<StageSolution> {
    let values = quad.sample(residual)?;
    stage_solve_values(quad, spec, &values, budget, seed)
}

pub fn stage_solve_values(
    quad: &Quadrature,
    spec: &DictSpec,
    residual: &[f64],
    budget: &Budget,
    seed: u64,
) -> Result<StageSolution> {
    let outcome = adversary::search(quad, spec, residual, budget, seed, &[], Objective::Gain)?;
    let q = spec.domain.q;
    let mut candidates = Vec::with_capacity(outcome.thetas.len());
    for theta in &outcome.thetas {
        let element = outcome.arch.to_net(theta, spec.cert())?;
        let h = quad.sample(&element)?;
        let correlation = quad.inner_values(&h, residual);
        let norm_sq = quad.norm_sq_values(&h);
        let lambda = optimal_lambda(correlation, norm_sq, q);
        let gain = 2.0 * lambda * correlation - lambda * lambda * norm_sq;
        candidates.push(StageSolution {
            element,
            lambda,
            gain,
            correlation,
            norm_sq,
        });
    }
    let gains: Vec<f64> = candidates.iter().map(|c| c.gain).collect();
    Ok(candidates.swap_remove(argmax(&gains)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionReport {
    pub schema_version: u32,
    pub epsilon: f64,
    pub dict: DictSpec,
    pub stage_dict: StageDict,
    pub m_prime: usize,
    pub m_budget: usize,
    /// True when the loop stopped at `m_budget` without a rejected stage.
    pub budget_exhausted: bool,
    /// `clip(Σ λ_k f_k)`.
    pub g: RepNet,
    /// Certificate produced by parallel composition.
    pub cert_constructive: RepCert,
    /// The conservative `(2^{m'}·d | r + m')` certificate.
    pub cert_bound: RepCert,
    pub trace: EnergyTrace,
    /// `‖f − g‖²` against the clipped `g`.
    pub residual_l2_sq: f64,
    /// `‖f − Σ λ_k f_k‖²`, before clipping.
    pub residual_l2_sq_unclipped: f64,
    pub residual_l1: f64,
    pub audit: AuditOutcome,
    pub solver: Budget,
    pub seed: u64,
    pub quadrature: QuadratureSpec,
}

/// `(2^{m'}·d | r + m')`, saturating.
pub fn bound_cert(dict: &DictSpec, m_prime: usize) -> RepCert {
    let factor = 1usize.checked_shl(m_prime as u32).unwrap_or(usize::MAX);
    RepCert::new(dict.d.saturating_mul(factor), dict.r + m_prime)
}

/// Greedy energy-increment decomposition of `f` at precision `epsilon`.
pub fn decompose(
    quad: &Quadrature,
    spec: &DictSpec,
    f: &dyn Oracle,
    epsilon: f64,
    budget: &Budget,
    seed: u64,
    stage_dict: StageDict,
) -> Result<DecompositionReport> {
    check_epsilon(epsilon)?;
    spec.validate()?;
    budget.validate()?;
    let f_vals = quad.sample(f)?;
    let m_budget = m_budget(epsilon);
    let eps_sq = epsilon * epsilon;

    let t0 = quad.norm_sq_values(&f_vals);
    let mut residual = f_vals.clone();
    let mut picks: Vec<StagePick> = Vec::new();
    let mut budget_exhausted = true;
    for k in 1..=m_budget {
        let stage_spec = stage_dict.at_stage(spec, k)?;
        let sol = stage_solve_values(
            quad,
            &stage_spec,
            &residual,
            budget,
            derive_seed(seed, k as u64),
        )?;
        // Equality rejects: the counting argument needs a strict increment.
        if sol.gain.is_nan() || sol.gain <= eps_sq {
            budget_exhausted = false;
            break;
        }
        let h = quad.sample(&sol.element)?;
        for (r, hv) in residual.iter_mut().zip(&h) {
            *r -= sol.lambda * hv;
        }
        picks.push(StagePick {
            k,
            element: sol.element,
            lambda: sol.lambda,
            gain: sol.gain,
            t_after: quad.norm_sq_values(&residual),
        });
    }
    let trace = EnergyTrace { t0, picks };

    let g = assemble(spec, &trace)?;
    let g_vals = quad.sample(&g)?;
    let diff: Vec<f64> = f_vals.iter().zip(&g_vals).map(|(a, b)| a - b).collect();
    let audit = audit_values(
        quad,
        spec,
        &diff,
        epsilon,
        budget,
        derive_seed(seed, AUDIT_STREAM),
    )?;

    let m_prime = trace.picks.len();
    Ok(DecompositionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        epsilon,
        dict: *spec,
        stage_dict,
        m_prime,
        m_budget,
        budget_exhausted,
        cert_constructive: g.cert(),
        cert_bound: bound_cert(spec, m_prime),
        residual_l2_sq: quad.norm_sq_values(&diff),
        residual_l2_sq_unclipped: trace.t_last(),
        residual_l1: quad.l1_distance_values(&f_vals, &g_vals),
        g,
        trace,
        audit,
        solver: *budget,
        seed,
        quadrature: quad.spec().clone(),
    })
}

/// `clip(Σ λ_k f_k)` over the accepted picks; the zero network when none.
pub fn assemble(spec: &DictSpec, trace: &EnergyTrace) -> Result<RepNet> {
    if trace.picks.is_empty() {
        return RepNet::constant(spec.domain.n, spec.domain.q, 0.0);
    }
    let nets: Vec<RepNet> = trace.picks.iter().map(|p| p.element.clone()).collect();
    let lambdas: Vec<f64> = trace.picks.iter().map(|p| p.lambda).collect();
    compose_parallel(&nets, &lambdas)
}

/// Outcome of [`certify_split`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub ok: bool,
    pub details: Vec<String>,
}

/// Re-verifies a report against `f` on `quad`: the split identity at every
/// node, the stage-count bound, certificate arithmetic, the energy trace,
/// recomputed residual norms, and the audit value against `ε + slack`.
pub fn certify_split(
    report: &DecompositionReport,
    quad: &Quadrature,
    f: &dyn Oracle,
    slack: f64,
) -> Result<Certification> {
    let mut bad = Vec::new();
    let eps = report.epsilon;
    let dict = &report.dict;

    if quad.spec() != &report.quadrature {
        bad.push(format!(
            "quadrature {:?} differs from the report's {:?}",
            quad.spec(),
            report.quadrature
        ));
    }
    if report.schema_version != REPORT_SCHEMA_VERSION {
        bad.push(format!(
            "unsupported schema version {}",
            report.schema_version
        ));
    }
    if check_epsilon(eps).is_err() {
        bad.push(format!("epsilon {eps} outside (0, 1]"));
    }

    // stage count
    let expected_budget = m_budget(eps);
    if report.m_budget != expected_budget {
        bad.push(format!(
            "m_budget {} but ⌈1/ε²⌉ = {expected_budget}",
            report.m_budget
        ));
    }
    if report.m_prime > expected_budget {
        bad.push(format!(
            "m' = {} exceeds ⌈1/ε²⌉ = {expected_budget}",
            report.m_prime
        ));
    }
    if report.trace.picks.len() != report.m_prime {
        bad.push(format!(
            "trace has {} picks but m' = {}",
            report.trace.picks.len(),
            report.m_prime
        ));
    }
    bad.extend(report.trace.violations(eps));

    // certificates
    match assemble(dict, &report.trace) {
        Ok(g) if g == report.g => {}
        Ok(_) => bad.push("g does not match the composition of the traced picks".into()),
        Err(e) => bad.push(format!("traced picks do not compose: {e}")),
    }
    if report.g.cert() != report.cert_constructive {
        bad.push(format!(
            "g carries {} but the report claims {}",
            report.g.cert(),
            report.cert_constructive
        ));
    }
    if report.m_prime > 0 {
        let certs: Vec<RepCert> = report
            .trace
            .picks
            .iter()
            .map(|p| p.element.cert())
            .collect();
        let composed = RepCert::new(
            certs.iter().map(|c| c.d).sum(),
            1 + certs.iter().map(|c| c.r).max().unwrap_or(0),
        );
        if composed != report.cert_constructive {
            bad.push(format!(
                "composition gives {composed}, report has {}",
                report.cert_constructive
            ));
        }
    }
    for p in &report.trace.picks {
        let allowed = report.stage_dict.at_stage(dict, p.k).map(|s| s.cert());
        if !allowed.is_ok_and(|c| p.element.satisfies(&c)) {
            bad.push(format!(
                "stage {} element {} outside its dictionary",
                p.k,
                p.element.cert()
            ));
        }
        if p.lambda.abs() > dict.domain.q {
            bad.push(format!(
                "stage {} coefficient {} outside [-q,q]",
                p.k, p.lambda
            ));
        }
    }
    let bound = bound_cert(dict, report.m_prime);
    if report.cert_bound != bound {
        bad.push(format!(
            "bound certificate {} should be {bound}",
            report.cert_bound
        ));
    }
    if !bound.covers(&report.cert_constructive) {
        bad.push(format!(
            "bound certificate {bound} does not dominate {}",
            report.cert_constructive
        ));
    }

    // pointwise split and norms
    let f_vals = quad.sample(f)?;
    let g_vals = quad.sample(&report.g)?;
    let h_vals: Vec<f64> = f_vals.iter().zip(&g_vals).map(|(a, b)| a - b).collect();
    let worst = f_vals
        .iter()
        .zip(g_vals.iter().zip(&h_vals))
        .map(|(f, (g, h))| (g + h - f).abs())
        .fold(0.0, f64::max);
    if worst > 1e-12 {
        bad.push(format!("f ≠ g + (f − g) at some node (gap {worst})"));
    }
    let l2 = quad.norm_sq_values(&h_vals);
    if (l2 - report.residual_l2_sq).abs() > 1e-10 {
        bad.push(format!(
            "residual_l2_sq {} but recomputed {l2}",
            report.residual_l2_sq
        ));
    }
    let l1 = quad.l1_distance_values(&f_vals, &g_vals);
    if (l1 - report.residual_l1).abs() > 1e-10 {
        bad.push(format!(
            "residual_l1 {} but recomputed {l1}",
            report.residual_l1
        ));
    }
    if (quad.norm_sq_values(&f_vals) - report.trace.t0).abs() > 1e-10 {
        bad.push("t0 does not match ‖f‖²".into());
    }
    if report.residual_l2_sq > report.residual_l2_sq_unclipped + 1e-12 {
        bad.push(format!(
            "clipping increased the residual: {} > {}",
            report.residual_l2_sq, report.residual_l2_sq_unclipped
        ));
    }

    // audit
    let audit = &report.audit.result;
    if !audit.witness.satisfies(&dict.cert()) {
        bad.push(format!(
            "audit witness {} outside {}",
            audit.witness.cert(),
            dict.cert()
        ));
    }
    let w_vals = quad.sample(&audit.witness)?;
    let c = quad.inner_values(&w_vals, &h_vals);
    if (c - audit.value).abs() > 1e-10 {
        bad.push(format!(
            "audit witness correlates {c} with f − g, report says {}",
            audit.value
        ));
    }
    if audit.value > eps + slack {
        bad.push(format!(
            "audit witness {} {} correlates {} with f − g, above ε + slack = {}",
            audit.witness.describe(),
            serde_json::to_string(&audit.witness)?,
            audit.value,
            eps + slack
        ));
    }

    Ok(Certification {
        ok: bad.is_empty(),
        details: bad,
    })
}
