use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sobol;
use crate::error::{Error, Result};

/// Raw node set: row-major coordinates in `[-1,1]^n` plus weights.
pub struct NodeSet {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// A rule for placing quadrature nodes on the hypercube.
pub trait QuadratureScheme: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    /// Deterministic in `(n, size, seed)`.
    fn build(&self, n: usize, size: usize, seed: u64) -> Result<NodeSet>;
}

/// Name → scheme lookup.
#[derive(Clone)]
pub struct SchemeRegistry {
    schemes: BTreeMap<&'static str, Arc<dyn QuadratureScheme>>,
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        Self {
            schemes: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(TensorGrid));
        reg.register(Arc::new(LowDiscrepancy));
        reg.register(Arc::new(SeededUniform));
        reg
    }

    pub fn register(&mut self, scheme: Arc<dyn QuadratureScheme>) {
        self.schemes.insert(scheme.name(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn QuadratureScheme>> {
        self.schemes
            .get(name)
            .ok_or_else(|| Error::UnknownScheme(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.schemes.keys().copied()
    }
}

/// Tensorized Gauss–Legendre rule; `size` is the node count per axis.
pub struct TensorGrid;

pub const TENSOR_GRID_MAX_DIM: usize = 4;
const TENSOR_GRID_MAX_NODES: usize = 1 << 24;

impl QuadratureScheme for TensorGrid {
    fn name(&self) -> &'static str {
        "tensor-grid"
    }

    fn summary(&self) -> &'static str {
        "Gauss-Legendre product rule, `size` nodes per axis (n <= 4)"
    }

    fn build(&self, n: usize, size: usize, _seed: u64) -> Result<NodeSet> {
        if n > TENSOR_GRID_MAX_DIM {
            return Err(Error::Quadrature(format!(
                "tensor-grid supports n <= {TENSOR_GRID_MAX_DIM}, got n = {n}"
            )));
        }
        let total = size
            .checked_pow(n as u32)
            .filter(|&t| t <= TENSOR_GRID_MAX_NODES)
            .ok_or_else(|| {
                Error::Quadrature(format!("{size}^{n} tensor nodes exceeds the node cap"))
            })?;
        let (x, w) = gauss_legendre(size);
        let mut nodes = Vec::with_capacity(total * n);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            let mut wt = 1.0;
            for &i in &idx {
                nodes.push(x[i]);
                wt *= w[i];
            }
            weights.push(wt);
            // odometer, last axis fastest
            for k in (0..n).rev() {
                idx[k] += 1;
                if idx[k] < size {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(NodeSet { nodes, weights })
    }
}

/// Gauss–Legendre nodes on `[-1,1]` with weights normalized to sum to 1.
/// Nodes are exactly antisymmetric and weights exactly symmetric.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    let total: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= total;
    }
    (x, w)
}

/// `(P_m(z), P_m'(z))` by the three-term recurrence.
fn legendre(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// First `size` Sobol' points with a seeded random digital shift (seed 0
/// leaves the sequence unshifted), uniform weights.
pub struct LowDiscrepancy;

impl QuadratureScheme for LowDiscrepancy {
    fn name(&self) -> &'static str {
        "low-discrepancy"
    }

    fn summary(&self) -> &'static str {
        "digitally shifted base-2 Sobol' points, uniform weights (n <= 32)"
    }

    fn build(&self, n: usize, size: usize, seed: u64) -> Result<NodeSet> {
        if n > sobol::MAX_DIMS {
            return Err(Error::Quadrature(format!(
                "low-discrepancy supports n <= {}, got n = {n}",
                sobol::MAX_DIMS
            )));
        }
        if size > u32::MAX as usize {
            return Err(Error::Quadrature("too many low-discrepancy points".into()));
        }
        let shift: Vec<u32> = if seed == 0 {
            vec![0; n]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.gen()).collect()
        };
        let raw = sobol::points(n, size);
        let nodes = raw
            .chunks_exact(n.max(1))
            .flat_map(|p| {
                p.iter()
                    .zip(&shift)
                    .map(|(&x, &s)| 2.0 * ((x ^ s) as f64 / 4294967296.0) - 1.0)
            })
            .collect();
        Ok(NodeSet {
            nodes,
            weights: vec![1.0 / size as f64; size],
        })
    }
}

/// Pseudo-random uniform points from a seeded ChaCha stream.
pub struct SeededUniform;

impl QuadratureScheme for SeededUniform {
    fn name(&self) -> &'static str {
        "seeded-uniform"
    }

    fn summary(&self) -> &'static str {
        "i.i.d. uniform points from a seeded ChaCha8 stream, uniform weights"
    }

    fn build(&self, n: usize, size: usize, seed: u64) -> Result<NodeSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = (0..n * size).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Ok(NodeSet {
            nodes,
            weights: vec![1.0 / size as f64; size],
        })
    }
}
