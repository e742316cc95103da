//! The normalized Lebesgue measure on `W_n`, realized by a fixed node set.
//!
//! One [`Quadrature`] is shared by every norm, inner product and distance in
//! a run, so inequalities that hold exactly for the true measure also hold
//! exactly (up to rounding) for the discrete one.

mod oracle;
mod scheme;
mod sobol;

pub use oracle::{Bounded, Combination, Constant, Difference, FnOracle, FunctionOracle, Oracle};
pub use scheme::{
    gauss_legendre, LowDiscrepancy, NodeSet, QuadratureScheme, SchemeRegistry, SeededUniform,
    TensorGrid, TENSOR_GRID_MAX_DIM,
};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::DomainSpec;

/// How a quadrature was (or should be) built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub scheme: String,
    pub size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Quadrature {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spec: QuadratureSpec,
}

/// Builds a quadrature with one of the built-in schemes.
pub fn build_quadrature(
    domain: &DomainSpec,
    scheme: &str,
    size: usize,
    seed: u64,
) -> Result<Quadrature> {
    build_quadrature_with(&SchemeRegistry::with_builtins(), domain, scheme, size, seed)
}

pub fn build_quadrature_with(
    registry: &SchemeRegistry,
    domain: &DomainSpec,
    scheme: &str,
    size: usize,
    seed: u64,
) -> Result<Quadrature> {
    domain.validate()?;
    if size == 0 {
        return Err(Error::Quadrature("size must be at least 1".into()));
    }
    let built = registry.get(scheme)?.build(domain.n, size, seed)?;
    Quadrature::from_parts(
        domain.n,
        built.nodes,
        built.weights,
        QuadratureSpec {
            scheme: scheme.to_string(),
            size,
            seed,
        },
    )
}

impl Quadrature {
    pub fn from_parts(
        n: usize,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        spec: QuadratureSpec,
    ) -> Result<Self> {
        if nodes.len() != n * weights.len() || weights.is_empty() {
            return Err(Error::Quadrature(format!(
                "{} coordinates do not form {} nodes in dimension {n}",
                nodes.len(),
                weights.len()
            )));
        }
        if !nodes.iter().all(|x| (-1.0..=1.0).contains(x)) {
            return Err(Error::Quadrature("node outside the hypercube".into()));
        }
        if !weights.iter().all(|w| w.is_finite() && *w > 0.0) {
            return Err(Error::Quadrature("weights must be positive".into()));
        }
        let total = pairwise_sum(&weights);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Quadrature(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            n,
            nodes,
            weights,
            spec,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.n..(i + 1) * self.n]
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.n)
    }

    pub fn raw_nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    fn check_dim(&self, f: &dyn Oracle) -> Result<()> {
        if f.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: f.dim(),
            });
        }
        Ok(())
    }

    /// Values of `f` at every node, in node order. Evaluation may run in
    /// parallel; the output order is fixed.
    pub fn sample(&self, f: &dyn Oracle) -> Result<Vec<f64>> {
        self.check_dim(f)?;
        Ok(self
            .nodes
            .par_chunks_exact(self.n)
            .with_min_len(256)
            .map(|w| f.eval(w))
            .collect())
    }

    /// `Σ μ_i·a_i·b_i` over sampled values.
    pub fn inner_values(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(m, (x, y))| m * (x * y))
            .collect();
        pairwise_sum(&terms)
    }

    pub fn norm_sq_values(&self, a: &[f64]) -> f64 {
        self.inner_values(a, a)
    }

    /// `Σ μ_i·|a_i − b_i|`.
    pub fn l1_distance_values(&self, a: &[f64], b: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(m, (x, y))| m * (x - y).abs())
            .collect();
        pairwise_sum(&terms)
    }

    /// Writes `x1,…,xn,weight` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        writeln!(out, "{},weight", header.join(","))?;
        for (w, mu) in self.nodes().zip(&self.weights) {
            let row: Vec<String> = w.iter().map(|x| format!("{x:?}")).collect();
            writeln!(out, "{},{mu:?}", row.join(","))?;
        }
        Ok(())
    }
}

/// `⟨a, b⟩` in `L²(W_n, μ)`.
pub fn inner(quad: &Quadrature, a: &dyn Oracle, b: &dyn Oracle) -> Result<f64> {
    let va = quad.sample(a)?;
    let vb = quad.sample(b)?;
    Ok(quad.inner_values(&va, &vb))
}

/// `‖f‖²` in `L²(W_n, μ)`.
pub fn l2_norm_sq(quad: &Quadrature, f: &dyn Oracle) -> Result<f64> {
    let v = quad.sample(f)?;
    Ok(quad.norm_sq_values(&v))
}

/// Normalized L¹ distance `∫|f − g| dμ`.
pub fn sigma_l1(quad: &Quadrature, f: &dyn Oracle, g: &dyn Oracle) -> Result<f64> {
    let vf = quad.sample(f)?;
    let vg = quad.sample(g)?;
    Ok(quad.l1_distance_values(&vf, &vg))
}

/// Pairwise summation with a topology fixed by the slice length alone.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        let mut acc = 0.0;
        for x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn dom(n: usize) -> DomainSpec {
        DomainSpec::new(n, 1.0).unwrap()
    }

    fn id1() -> FnOracle<impl Fn(&[f64]) -> f64 + Send + Sync> {
        FnOracle::new(1, "w", |w: &[f64]| w[0])
    }

    #[test]
    fn tensor_grid_weights_sum_to_one() {
        let q = build_quadrature(&dom(1), "tensor-grid", 16, 0).unwrap();
        assert_eq!(q.len(), 16);
        assert!((q.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = build_quadrature(&dom(3), "tensor-grid", 5, 0).unwrap();
        assert_eq!(q.len(), 125);
        assert!((q.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tensor_grid_second_moment() {
        let q = build_quadrature(&dom(1), "tensor-grid", 32, 0).unwrap();
        let got = l2_norm_sq(&q, &id1()).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn tensor_grid_rejects_high_dimension() {
        assert!(matches!(
            build_quadrature(&dom(5), "tensor-grid", 4, 0),
            Err(Error::Quadrature(_))
        ));
    }

    #[test]
    fn zero_size_rejected() {
        assert!(build_quadrature(&dom(2), "seeded-uniform", 0, 1).is_err());
    }

    #[test]
    fn low_discrepancy_is_deterministic() {
        let a = build_quadrature(&dom(8), "low-discrepancy", 1 << 14, 7).unwrap();
        let b = build_quadrature(&dom(8), "low-discrepancy", 1 << 14, 7).unwrap();
        assert_eq!(a.raw_nodes(), b.raw_nodes());
        assert_eq!(a.weights(), b.weights());
        let c = build_quadrature(&dom(8), "seeded-uniform", 1000, 7).unwrap();
        let d = build_quadrature(&dom(8), "seeded-uniform", 1000, 7).unwrap();
        assert_eq!(c.raw_nodes(), d.raw_nodes());
    }

    #[test]
    fn inner_examples() {
        let q = build_quadrature(&dom(1), "tensor-grid", 32, 0).unwrap();
        let one = Constant { n: 1, value: 1.0 };
        let zero = Constant { n: 1, value: 0.0 };
        assert!((inner(&q, &one, &one).unwrap() - 1.0).abs() < 1e-12);
        assert!((inner(&q, &id1(), &id1()).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(inner(&q, &id1(), &zero).unwrap(), 0.0);
        let two = Constant { n: 2, value: 1.0 };
        assert!(inner(&q, &one, &two).is_err());
    }

    #[test]
    fn norm_examples() {
        let q = build_quadrature(&dom(2), "low-discrepancy", 1024, 3).unwrap();
        assert_eq!(l2_norm_sq(&q, &Constant { n: 2, value: 0.0 }).unwrap(), 0.0);
        assert!((l2_norm_sq(&q, &Constant { n: 2, value: 1.0 }).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_examples() {
        let q = build_quadrature(&dom(1), "tensor-grid", 64, 0).unwrap();
        let f = id1();
        assert_eq!(sigma_l1(&q, &f, &f).unwrap(), 0.0);
        let p = Constant { n: 1, value: 1.0 };
        let m = Constant { n: 1, value: -1.0 };
        assert!((sigma_l1(&q, &p, &m).unwrap() - 2.0).abs() < 1e-12);
        // |w| has a kink at 0, so Gauss nodes only get close.
        let z = Constant { n: 1, value: 0.0 };
        assert!((sigma_l1(&q, &f, &z).unwrap() - 0.5).abs() < 1e-3);
        let ld = build_quadrature(&dom(1), "low-discrepancy", 1 << 14, 0).unwrap();
        assert!((sigma_l1(&ld, &f, &z).unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn inner_symmetric_bitwise() {
        let q = build_quadrature(&dom(3), "seeded-uniform", 4096, 11).unwrap();
        let a = FnOracle::new(3, "a", |w: &[f64]| (w[0] * 3.1).sin() * w[2]);
        let b = FnOracle::new(3, "b", |w: &[f64]| w[1] - 0.3 * w[0]);
        assert_eq!(inner(&q, &a, &b).unwrap(), inner(&q, &b, &a).unwrap());
    }

    #[test]
    fn tensor_grid_convergence_smooth() {
        // ∫ cos(2w) dμ = sin(2)/2
        let f = FnOracle::new(1, "cos2w", |w: &[f64]| (2.0 * w[0]).cos());
        let one = Constant { n: 1, value: 1.0 };
        let q = build_quadrature(&dom(1), "tensor-grid", 64, 0).unwrap();
        let got = inner(&q, &f, &one).unwrap();
        assert!((got - 2f64.sin() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn low_discrepancy_smoke_lipschitz() {
        // ∫ |w_1 - w_2| dμ on [-1,1]^2 = 2/3
        let f = FnOracle::new(2, "gap", |w: &[f64]| (w[0] - w[1]).abs());
        let one = Constant { n: 2, value: 1.0 };
        let q = build_quadrature(&dom(2), "low-discrepancy", 1 << 14, 5).unwrap();
        assert!((inner(&q, &f, &one).unwrap() - 2.0 / 3.0).abs() < 1e-2);
    }

    #[test]
    fn csv_export() {
        let q = build_quadrature(&dom(2), "tensor-grid", 2, 0).unwrap();
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x1,x2,weight");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].ends_with(",0.25"));
    }

    #[test]
    fn sample_rejects_wrong_dimension() {
        let q = build_quadrature(&dom(2), "tensor-grid", 3, 0).unwrap();
        let f: FunctionOracle = Arc::new(id1());
        assert!(q.sample(f.as_ref()).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sqrt()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
