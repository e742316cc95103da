use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{affine, clip, ClipUnit};
use crate::error::{Error, Result};

/// A `(d|r)` representability certificate: at most `r` hidden layers, each
/// of width at most `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepCert {
    pub d: usize,
    pub r: usize,
}

impl RepCert {
    pub fn new(d: usize, r: usize) -> Self {
        Self { d, r }
    }

    /// True when every `other`-representable function is also
    /// representable under `self`.
    pub fn covers(&self, other: &RepCert) -> bool {
        other.d <= self.d && other.r <= self.r
    }
}

impl std::fmt::Display for RepCert {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}|{})", self.d, self.r)
    }
}

/// A layered clipped affine network `W_n → W_{d_1} → … → W_{d_r} → [-1,1]`.
///
/// `layers[i]` holds the units of map `i`; the last layer always has exactly
/// one unit. The type signature `(d_1, …, d_r)` is the list of widths of all
/// layers but the last. The stored certificate may be looser than the
/// structural one (it is what composition bookkeeping produces) but never
/// tighter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RepNetRepr", into = "RepNetRepr")]
pub struct RepNet {
    n: usize,
    q: f64,
    layers: Vec<Vec<ClipUnit>>,
    cert: RepCert,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RepNetRepr {
    n: usize,
    q: f64,
    layers: Vec<Vec<ClipUnit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cert: Option<RepCert>,
}

impl TryFrom<RepNetRepr> for RepNet {
    type Error = Error;

    fn try_from(repr: RepNetRepr) -> Result<Self> {
        RepNet::new(repr.n, repr.q, repr.layers, repr.cert)
    }
}

impl From<RepNet> for RepNetRepr {
    fn from(net: RepNet) -> Self {
        RepNetRepr {
            n: net.n,
            q: net.q,
            layers: net.layers,
            cert: Some(net.cert),
        }
    }
}

impl RepNet {
    /// Validates the layer chain and box constraints. `cert` defaults to the
    /// structural certificate and must cover it when given.
    pub fn new(
        n: usize,
        q: f64,
        layers: Vec<Vec<ClipUnit>>,
        cert: Option<RepCert>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidNetwork("input width must be positive".into()));
        }
        if !q.is_finite() || q < 1.0 {
            return Err(Error::InvalidNetwork(format!("q must be ≥ 1, got {q}")));
        }
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        }
        if layers.last().map(Vec::len) != Some(1) {
            return Err(Error::InvalidNetwork(
                "output layer must have exactly one unit".into(),
            ));
        }
        let mut width = n;
        for (i, layer) in layers.iter().enumerate() {
            if layer.is_empty() {
                return Err(Error::InvalidNetwork(format!("layer {i} is empty")));
            }
            for unit in layer {
                if unit.input_width() != width {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {i}: unit reads {} inputs but the previous width is {width}",
                        unit.input_width()
                    )));
                }
                unit.check(q)?;
            }
            width = layer.len();
        }
        let mut net = Self {
            n,
            q,
            layers,
            cert: RepCert::new(1, 0),
        };
        let structural = net.structural_cert();
        net.cert = match cert {
            None => structural,
            Some(c) if c.d >= 1 && c.covers(&structural) => c,
            Some(c) => {
                return Err(Error::InvalidNetwork(format!(
                    "certificate {c} does not cover the structural certificate {structural}"
                )))
            }
        };
        Ok(net)
    }

    /// A single constant unit.
    pub fn constant(n: usize, q: f64, value: f64) -> Result<Self> {
        let unit = ClipUnit::new(vec![0.0; n], value, q)?;
        Self::new(n, q, vec![vec![unit]], None)
    }

    /// A depth-0 network made of one unit.
    pub fn single(n: usize, q: f64, unit: ClipUnit) -> Result<Self> {
        Self::new(n, q, vec![vec![unit]], None)
    }

    /// Random network with hidden widths `hidden` (type signature) and a
    /// width-1 output layer. Weights are uniform in `[-q,q]`, biases in `[-1,1]`.
    pub fn random<R: Rng + ?Sized>(
        n: usize,
        q: f64,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut width = n;
        for &out in hidden.iter().chain(std::iter::once(&1)) {
            let layer = (0..out)
                .map(|_| {
                    let w = (0..width).map(|_| rng.gen_range(-q..=q)).collect();
                    ClipUnit::new(w, rng.gen_range(-1.0..=1.0), q)
                })
                .collect::<Result<Vec<_>>>()?;
            layers.push(layer);
            width = out;
        }
        Self::new(n, q, layers, None)
    }

    pub fn input_width(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn layers(&self) -> &[Vec<ClipUnit>] {
        &self.layers
    }

    /// Number of hidden layers `r`.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    /// The type signature `(d_1, …, d_r)`.
    pub fn widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Vec::len)
            .collect()
    }

    pub fn cert(&self) -> RepCert {
        self.cert
    }

    /// Tightest certificate read off the architecture.
    pub fn structural_cert(&self) -> RepCert {
        let d = self.widths().into_iter().max().unwrap_or(1).max(1);
        RepCert::new(d, self.depth())
    }

    pub fn satisfies(&self, cert: &RepCert) -> bool {
        cert.covers(&self.cert)
    }

    pub fn eval(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: w.len(),
            });
        }
        Ok(self.eval_unchecked(w))
    }

    pub(crate) fn eval_unchecked(&self, w: &[f64]) -> f64 {
        let mut cur: Vec<f64> = w.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            next.clear();
            next.extend(layer.iter().map(|u| u.eval_unchecked(&cur)));
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    /// Outputs of every layer, the input included at index 0.
    pub fn eval_layers(&self, w: &[f64]) -> Result<Vec<Vec<f64>>> {
        if w.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: w.len(),
            });
        }
        let mut out = vec![w.to_vec()];
        for layer in &self.layers {
            let prev = out.last().unwrap();
            let vals = layer
                .iter()
                .map(|u| clip(affine(u.weights(), u.bias(), prev)))
                .collect();
            out.push(vals);
        }
        Ok(out)
    }

    /// Upper bound on the Lipschitz constant w.r.t. ‖·‖∞: the product over
    /// layers of the largest row ℓ¹ norm.
    pub fn lipschitz_bound(&self) -> f64 {
        self.layers
            .iter()
            .map(|layer| layer.iter().map(ClipUnit::l1_norm).fold(0.0, f64::max))
            .product()
    }

    /// Appends `extra` width-1 identity layers after the output unit. The
    /// output already lies in `[-1,1]`, where the identity unit is exact, so
    /// the function is unchanged and the certificate depth grows by `extra`.
    pub fn pad_depth(&self, extra: usize) -> RepNet {
        let mut layers = self.layers.clone();
        layers.extend((0..extra).map(|_| vec![ClipUnit::identity()]));
        RepNet {
            n: self.n,
            q: self.q,
            layers,
            cert: RepCert::new(self.cert.d, self.cert.r + extra),
        }
    }

    /// Re-embeds the network into hidden widths `widths` (same depth, each
    /// width at least the current one). Extra units are zero and read by
    /// zero weights, so the function is unchanged.
    pub fn embed_widths(&self, widths: &[usize]) -> Result<RepNet> {
        let current = self.widths();
        if widths.len() != current.len() || widths.iter().zip(&current).any(|(w, c)| w < c) {
            return Err(Error::InvalidNetwork(format!(
                "cannot embed signature {current:?} into {widths:?}"
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut in_width = self.n;
        for (i, layer) in self.layers.iter().enumerate() {
            let out_width = widths.get(i).copied().unwrap_or(1);
            let mut units: Vec<ClipUnit> = layer
                .iter()
                .map(|u| {
                    let mut w = u.weights().to_vec();
                    w.resize(in_width, 0.0);
                    ClipUnit::from_raw(w, u.bias())
                })
                .collect();
            units.resize(out_width, ClipUnit::constant(in_width, 0.0));
            layers.push(units);
            in_width = out_width;
        }
        let cert = RepCert::new(
            self.cert.d.max(widths.iter().copied().max().unwrap_or(1)),
            self.cert.r,
        );
        RepNet::new(self.n, self.q, layers, Some(cert))
    }
}

/// Builds one network computing `w ↦ clip(Σ_i λ_i f_i(w))`.
///
/// All nets are padded to a common depth, stacked side by side with zero
/// cross-block weights, and topped with a unit whose weights are the
/// coefficients. The certificate is `(Σ d_i | 1 + max r_i)`.
pub fn compose_parallel(nets: &[RepNet], lambdas: &[f64]) -> Result<RepNet> {
    if nets.is_empty() {
        return Err(Error::InvalidNetwork("nothing to compose".into()));
    }
    if nets.len() != lambdas.len() {
        return Err(Error::DimensionMismatch {
            expected: nets.len(),
            got: lambdas.len(),
        });
    }
    let n = nets[0].n;
    let q = nets[0].q;
    for net in nets {
        if net.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: net.n,
            });
        }
        if net.q != q {
            return Err(Error::InvalidNetwork(format!(
                "mixed weight bounds {q} and {}",
                net.q
            )));
        }
    }
    for &l in lambdas {
        if !l.is_finite() {
            return Err(Error::NonFinite(l));
        }
        if l.abs() > q {
            return Err(Error::CoefficientOutOfBox { value: l, q });
        }
    }

    let depth = nets.iter().map(RepNet::depth).max().unwrap();
    let padded: Vec<RepNet> = nets
        .iter()
        .map(|f| f.pad_depth(depth - f.depth()))
        .collect();

    let mut layers = Vec::with_capacity(depth + 2);
    for level in 0..=depth {
        let prev_widths: Vec<usize> = padded
            .iter()
            .map(|f| {
                if level == 0 {
                    n
                } else {
                    f.layers[level - 1].len()
                }
            })
            .collect();
        let in_width: usize = if level == 0 {
            n
        } else {
            prev_widths.iter().sum()
        };
        let mut offset = 0;
        let mut units = Vec::new();
        for (f, &block) in padded.iter().zip(&prev_widths) {
            for u in &f.layers[level] {
                let w = if level == 0 {
                    u.weights().to_vec()
                } else {
                    let mut w = vec![0.0; in_width];
                    w[offset..offset + block].copy_from_slice(u.weights());
                    w
                };
                units.push(ClipUnit::from_raw(w, u.bias()));
            }
            if level > 0 {
                offset += block;
            }
        }
        layers.push(units);
    }
    layers.push(vec![ClipUnit::from_raw(lambdas.to_vec(), 0.0)]);

    let cert = RepCert::new(
        nets.iter().map(|f| f.cert.d).sum(),
        1 + nets.iter().map(|f| f.cert.r).max().unwrap(),
    );
    RepNet::new(n, q, layers, Some(cert))
}
