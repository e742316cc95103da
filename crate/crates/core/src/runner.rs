//! Batch driver behind the CLI: builds the quadrature and target from a
//! [`RunConfig`], runs the decomposition or the adversary, and writes the
//! output files.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adversary::{ascend, AdversaryResult};
use crate::config::RunConfig;
use crate::decomposer::{certify_split, decompose, m_budget, Certification, DecompositionReport};
use crate::error::{Error, Result};
use crate::measure::{build_quadrature, Bounded, Quadrature};
use crate::zoo::Zoo;

/// Contents of `report.json`: the config echo plus the decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub config: RunConfig,
    /// Nodes at which the target left `[-1,1]` and was clamped.
    pub target_range_violations: usize,
    pub report: DecompositionReport,
}

/// Everything a config determines before any search runs.
pub struct Prepared {
    pub quad: Quadrature,
    pub target: Arc<Bounded>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let domain = cfg.domain()?;
    let quad = build_quadrature(
        &domain,
        &cfg.quadrature.scheme,
        cfg.quadrature.size,
        cfg.quadrature.seed,
    )?;
    let target = Zoo::with_builtins().build(&cfg.target.name, &cfg.target.params, &domain)?;
    Ok(Prepared { quad, target })
}

pub fn run_decompose(cfg: &RunConfig) -> Result<RunReport> {
    let Prepared { quad, target } = prepare(cfg)?;
    let report = decompose(
        &quad,
        &cfg.dict_spec()?,
        target.as_ref(),
        cfg.epsilon,
        &cfg.budget(),
        cfg.solver.seed,
        cfg.stage_dict,
    )?;
    Ok(RunReport {
        config: cfg.clone(),
        target_range_violations: target.violations(),
        report,
    })
}

/// Rebuilds quadrature and target from the config echo and re-checks the
/// report.
pub fn verify(run: &RunReport) -> Result<Certification> {
    let p = prepare(&run.config)?;
    let mut cert = certify_split(
        &run.report,
        &p.quad,
        p.target.as_ref(),
        run.config.audit_slack,
    )?;
    if run.report.epsilon != run.config.epsilon {
        cert.ok = false;
        cert.details.push(format!(
            "report epsilon {} differs from config epsilon {}",
            run.report.epsilon, run.config.epsilon
        ));
    }
    Ok(cert)
}

pub fn run_adversary(cfg: &RunConfig) -> Result<AdversaryResult> {
    let p = prepare(cfg)?;
    ascend(
        &p.quad,
        &cfg.dict_spec()?,
        p.target.as_ref(),
        &cfg.budget(),
        cfg.solver.seed,
    )
}

/// Pretty JSON with a trailing newline; float formatting round-trips.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes report, trace and witness files into `dir`.
pub fn write_run(run: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let out = &run.config.output;
    fs::write(dir.join(&out.report), to_json(run)?)?;
    let mut trace = Vec::new();
    run.report.trace.write_csv(&mut trace)?;
    fs::write(dir.join(&out.trace), trace)?;
    fs::write(dir.join(&out.witness), to_json(&run.report.audit.result)?)?;
    Ok(())
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub m_prime: usize,
    pub residual_l2_sq: f64,
    pub audit_value: f64,
    pub m_budget: usize,
}

/// Repeats the decomposition over `ns`, replacing only `domain.n`.
pub fn run_sweep(cfg: &RunConfig, ns: &[usize]) -> Result<Vec<SweepRow>> {
    if ns.is_empty() {
        return Err(Error::Config {
            field: "--n".into(),
            message: "no dimensions given".into(),
        });
    }
    ns.iter()
        .map(|&n| {
            let mut c = cfg.clone();
            c.domain.n = n;
            let run = run_decompose(&c)?;
            Ok(SweepRow {
                n,
                m_prime: run.report.m_prime,
                residual_l2_sq: run.report.residual_l2_sq,
                audit_value: run.report.audit.result.value,
                m_budget: m_budget(c.epsilon),
            })
        })
        .collect()
}

/// `n,m_prime,residual_l2_sq,audit_value,m_budget`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "n,m_prime,residual_l2_sq,audit_value,m_budget")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:?},{:?},{}",
            r.n, r.m_prime, r.residual_l2_sq, r.audit_value, r.m_budget
        )?;
    }
    Ok(())
}
