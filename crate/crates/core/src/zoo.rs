//! Named target functions `W_n → [-1,1]`, selected at runtime by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::measure::{Bounded, FnOracle, FunctionOracle};
use crate::netcore::{ClipUnit, DomainSpec, RepNet};
use crate::seeds::splitmix64;

pub type Params = BTreeMap<String, Value>;

/// A family of targets sharing one construction rule.
pub trait TargetFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    /// Accepted parameter names.
    fn param_names(&self) -> &'static [&'static str];
    fn build(&self, params: &ParamReader<'_>, domain: &DomainSpec) -> Result<FunctionOracle>;
}

/// Typed, range-checked access to a target's parameter map.
pub struct ParamReader<'a> {
    target: &'static str,
    params: &'a Params,
}

impl ParamReader<'_> {
    fn err(&self, param: &str, message: impl Into<String>) -> Error {
        Error::TargetParam {
            target: self.target.to_string(),
            param: param.to_string(),
            message: message.into(),
        }
    }

    pub fn f64_in(&self, name: &str, default: f64, lo: f64, hi: f64) -> Result<f64> {
        let v = match self.params.get(name) {
            None => default,
            Some(v) => v
                .as_f64()
                .ok_or_else(|| self.err(name, "expected a number"))?,
        };
        if !(v.is_finite() && v >= lo && v <= hi) {
            return Err(self.err(name, format!("{v} outside [{lo}, {hi}]")));
        }
        Ok(v)
    }

    pub fn u64(&self, name: &str, default: u64) -> Result<u64> {
        match self.params.get(name) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .ok_or_else(|| self.err(name, "expected a non-negative integer")),
        }
    }

    /// Seeds have no default: every stream must be named in the config.
    pub fn seed(&self) -> Result<u64> {
        if !self.params.contains_key("seed") {
            return Err(self.err("seed", "required"));
        }
        self.u64("seed", 0)
    }

    pub fn usize_in(&self, name: &str, default: usize, lo: usize, hi: usize) -> Result<usize> {
        let v = self.u64(name, default as u64)?;
        if v < lo as u64 || v > hi as u64 {
            return Err(self.err(name, format!("{v} outside [{lo}, {hi}]")));
        }
        Ok(v as usize)
    }

    pub fn f64_list(&self, name: &str) -> Result<Option<Vec<f64>>> {
        match self.params.get(name) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| self.err(name, "expected numbers")))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.err(name, "expected an array of numbers")),
        }
    }
}

/// Name → target family lookup.
#[derive(Clone)]
pub struct Zoo {
    families: BTreeMap<&'static str, Arc<dyn TargetFamily>>,
}

impl Default for Zoo {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl Zoo {
    pub fn empty() -> Self {
        Self {
            families: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut zoo = Self::empty();
        zoo.register(Arc::new(Linear));
        zoo.register(Arc::new(Step));
        zoo.register(Arc::new(Ball));
        zoo.register(Arc::new(SignProduct));
        zoo.register(Arc::new(RandomGrid));
        zoo.register(Arc::new(PlantedNet));
        zoo.register(Arc::new(Sine));
        zoo
    }

    pub fn register(&mut self, family: Arc<dyn TargetFamily>) {
        self.families.insert(family.name(), family);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.families.contains_key(name)
    }

    pub fn families(&self) -> impl Iterator<Item = &Arc<dyn TargetFamily>> + '_ {
        self.families.values()
    }

    /// Builds the named target; the result clamps into `[-1,1]` and counts
    /// any violation.
    pub fn build(&self, name: &str, params: &Params, domain: &DomainSpec) -> Result<Arc<Bounded>> {
        domain.validate()?;
        let family = self
            .families
            .get(name)
            .ok_or_else(|| Error::UnknownTarget(name.to_string()))?;
        if let Some(unknown) = params
            .keys()
            .find(|k| !family.param_names().contains(&k.as_str()))
        {
            return Err(Error::TargetParam {
                target: name.to_string(),
                param: unknown.clone(),
                message: format!("unknown parameter (accepted: {:?})", family.param_names()),
            });
        }
        let reader = ParamReader {
            target: family.name(),
            params,
        };
        Ok(Arc::new(Bounded::new(family.build(&reader, domain)?)))
    }
}

/// Builds a target with the built-in zoo.
pub fn zoo(name: &str, params: &Params, domain: &DomainSpec) -> Result<FunctionOracle> {
    Ok(Zoo::with_builtins().build(name, params, domain)?)
}

fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

struct Linear;

impl TargetFamily for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn summary(&self) -> &'static str {
        "a planted clipped affine unit; explicit `weights`/`bias` or seeded"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["seed", "weights", "bias"]
    }
    fn build(&self, p: &ParamReader<'_>, dom: &DomainSpec) -> Result<FunctionOracle> {
        let explicit = p.params.contains_key("weights") && p.params.contains_key("bias");
        let mut rng = ChaCha8Rng::seed_from_u64(if explicit { 0 } else { p.seed()? });
        let weights = match p.f64_list("weights")? {
            Some(w) if w.len() != dom.n => {
                return Err(p.err(
                    "weights",
                    format!("expected {} entries, got {}", dom.n, w.len()),
                ))
            }
            Some(w) => w,
            None => (0..dom.n).map(|_| rng.gen_range(-dom.q..=dom.q)).collect(),
        };
        let bias = match p.params.get("bias") {
            Some(_) => p.f64_in("bias", 0.0, f64::MIN, f64::MAX)?,
            None => rng.gen_range(-1.0..=1.0),
        };
        let unit =
            ClipUnit::new(weights, bias, dom.q).map_err(|e| p.err("weights", e.to_string()))?;
        Ok(Arc::new(RepNet::single(dom.n, dom.q, unit)?))
    }
}

struct Step;

impl TargetFamily for Step {
    fn name(&self) -> &'static str {
        "step"
    }
    fn summary(&self) -> &'static str {
        "sign(w1 - theta), with sign(0) = 1"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["theta"]
    }
    fn build(&self, p: &ParamReader<'_>, dom: &DomainSpec) -> Result<FunctionOracle> {
        let theta = p.f64_in("theta", 0.0, -1.0, 1.0)?;
        Ok(Arc::new(FnOracle::new(
            dom.n,
            format!("step(theta={theta})"),
            move |w: &[f64]| sign(w[0] - theta),
        )))
    }
}

struct Ball;

impl TargetFamily for Ball {
    fn name(&self) -> &'static str {
        "ball"
    }
    fn summary(&self) -> &'static str {
        "2*indicator(|w|_2 <= rho) - 1"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["rho"]
    }
    fn build(&self, p: &ParamReader<'_>, dom: &DomainSpec) -> Result<FunctionOracle> {
        let rho = p.f64_in("rho", 1.0, 0.0, f64::MAX)?;
        let rho_sq = rho * rho;
        Ok(Arc::new(FnOracle::new(
            dom.n,
            format!("ball(rho={rho})"),
            move |w: &[f64]| {
                if w.iter().map(|x| x * x).sum::<f64>() <= rho_sq {
                    1.0
                } else {
                    -1.0
                }
            },
        )))
    }
}

struct SignProduct;

impl TargetFamily for SignProduct {
    fn name(&self) -> &'static str {
        "sign-product"
    }
    fn summary(&self) -> &'static str {
        "product of sign(w_i) over all coordinates"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &[]
    }
    fn build(&self, _p: &ParamReader<'_>, dom: &DomainSpec) -> Result<FunctionOracle> {
        Ok(Arc::new(FnOracle::new(
            dom.n,
            "sign-product",
            |w: &[f64]| w.iter().map(|&x| sign(x)).product(),
        )))
    }
}

struct RandomGrid;

impl TargetFamily for RandomGrid {
    fn name(&self) -> &'static str {
        "random-grid"
    }
    fn summary(&self) -> &'static str {
        "piecewise constant on 2^k cells per axis, seeded values in [-1,1]"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["k", "seed"]
    }
    fn build(&self, p: &ParamReader<'_>, dom: &DomainSpec) -> Result<FunctionOracle> {
        let k = p.usize_in("k", 1, 1, 16)?;
        let seed = p.seed()?;
        let cells = 1u64 << k;
        Ok(Arc::new(FnOracle::new(
            dom.n,
            format!("random-grid(k={k},seed={seed})"),
            move |w: &[f64]| {
                let mut h = splitmix64(seed);
                for &x in w {
                    let cell = (((x + 1.0) * 0.5 * cells as f64) as u64).min(cells - 1);
                    h = splitmix64(h ^ cell);
                }
                // 53 random bits → [0,1] → [-1,1]
                2.0 * ((h >> 11) as f64 / ((1u64 << 53) - 1) as f64) - 1.0
            },
        )))
    }
}

struct PlantedNet;

impl TargetFamily for PlantedNet {
    fn name(&self) -> &'static str {
        "planted-net"
    }
    fn summary(&self) -> &'static str {
        "seeded random network with r hidden layers of width d"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["seed", "d", "r"]
    }
    fn build(&self, p: &ParamReader<'_>, dom: &DomainSpec) -> Result<FunctionOracle> {
        let d = p.usize_in("d", 1, 1, 64)?;
        let r = p.usize_in("r", 0, 0, 8)?;
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed()?);
        Ok(Arc::new(RepNet::random(
            dom.n,
            dom.q,
            &vec![d; r],
            &mut rng,
        )?))
    }
}

struct Sine;

impl TargetFamily for Sine {
    fn name(&self) -> &'static str {
        "sine"
    }
    fn summary(&self) -> &'static str {
        "sin(pi * kappa * w1)"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["kappa"]
    }
    fn build(&self, p: &ParamReader<'_>, dom: &DomainSpec) -> Result<FunctionOracle> {
        let kappa = p.f64_in("kappa", 1.0, -1e6, 1e6)?;
        Ok(Arc::new(FnOracle::new(
            dom.n,
            format!("sine(kappa={kappa})"),
            move |w: &[f64]| (std::f64::consts::PI * kappa * w[0]).sin(),
        )))
    }
}
