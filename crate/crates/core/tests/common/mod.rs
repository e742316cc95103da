//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's evaluation or summation code.
#![allow(dead_code)]

use clipreg::config::RunConfig;
use clipreg::decomposer::EnergyTrace;
use clipreg::measure::{Oracle, Quadrature};
use clipreg::netcore::RepNet;
use rand::Rng;
use serde_json::{json, Value};

pub fn clamp1(z: f64) -> f64 {
    z.clamp(-1.0, 1.0)
}

/// Layer-by-layer evaluation from the public weights, written out longhand.
pub fn straight_line_eval(net: &RepNet, w: &[f64]) -> f64 {
    let mut act: Vec<f64> = w.to_vec();
    for layer in net.layers() {
        let mut next = Vec::with_capacity(layer.len());
        for unit in layer {
            let mut dot = 0.0;
            for (a, b) in unit.weights().iter().zip(&act) {
                dot += a * b;
            }
            next.push(clamp1(dot + unit.bias()));
        }
        act = next;
    }
    assert_eq!(act.len(), 1, "output layer must have width 1");
    act[0]
}

/// Plain left-to-right `Σ μ_i a(x_i) b(x_i)`.
pub fn naive_inner(quad: &Quadrature, a: &dyn Oracle, b: &dyn Oracle) -> f64 {
    let mut s = 0.0;
    for (x, mu) in quad.nodes().zip(quad.weights()) {
        s += mu * a.eval(x) * b.eval(x);
    }
    s
}

pub fn naive_norm_sq(quad: &Quadrature, a: &dyn Oracle) -> f64 {
    naive_inner(quad, a, a)
}

pub fn naive_l1(quad: &Quadrature, a: &dyn Oracle, b: &dyn Oracle) -> f64 {
    let mut s = 0.0;
    for (x, mu) in quad.nodes().zip(quad.weights()) {
        s += mu * (a.eval(x) - b.eval(x)).abs();
    }
    s
}

/// Random hidden widths: `r` layers of width in `1..=max_width`.
pub fn random_hidden<R: Rng>(rng: &mut R, max_depth: usize, max_width: usize) -> Vec<usize> {
    let r = rng.gen_range(0..=max_depth);
    (0..r).map(|_| rng.gen_range(1..=max_width)).collect()
}

pub fn uniform_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Monotone-trace conditions, checked without the library's helper.
pub fn trace_problems(trace: &EnergyTrace, epsilon: f64) -> Vec<String> {
    let mut out = Vec::new();
    if trace.t0 > 1.0 + 1e-9 {
        out.push(format!("t0 = {} above 1 + 1e-9", trace.t0));
    }
    let mut prev = trace.t0;
    for p in &trace.picks {
        if p.t_after.is_nan() || p.t_after >= prev {
            out.push(format!(
                "stage {}: t_after {} not below {}",
                p.k, p.t_after, prev
            ));
        }
        if p.gain.is_nan() || p.gain <= epsilon * epsilon {
            out.push(format!("stage {}: gain {} not above eps^2", p.k, p.gain));
        }
        if p.t_after < 0.0 {
            out.push(format!("stage {}: negative t_after", p.k));
        }
        prev = p.t_after;
    }
    out
}

pub struct RunSpec<'a> {
    pub target: &'a str,
    pub params: Value,
    pub n: usize,
    pub epsilon: f64,
    pub size: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub decay: f64,
    pub seed: u64,
}

impl RunSpec<'_> {
    pub fn config(&self) -> RunConfig {
        RunConfig::from_json(
            &json!({
                "domain": {"n": self.n, "q": 1.0},
                "dict": {"d": 1, "r": 0},
                "epsilon": self.epsilon,
                "quadrature": {"scheme": "low-discrepancy", "size": self.size, "seed": 1},
                "solver": {
                    "restarts": self.restarts,
                    "iterations": self.iterations,
                    "step0": 0.5,
                    "decay": self.decay,
                    "seed": self.seed
                },
                "target": {"name": self.target, "params": self.params}
            })
            .to_string(),
        )
        .expect("valid config")
    }
}
