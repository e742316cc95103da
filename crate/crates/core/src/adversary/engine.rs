//! Projected subgradient ascent over the parameters of a fixed architecture.
//!
//! Parameters are flattened layer by layer, unit by unit, as
//! `[w_1 … w_{d_in}, b]`. Weights live in `[-q,q]`, biases in
//! `±(d_in·q + 1)`; every step is followed by a projection onto that box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::Quadrature;
use crate::netcore::{affine, bias_bound, clip, clip_slope, ClipUnit, RepCert, RepNet};

use super::Budget;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Objective {
    /// `s·⟨h, t⟩`.
    Correlation,
    /// `max_{λ ∈ s·[0,q]} 2λ⟨h,t⟩ − λ²‖h‖²`, the decrease of `‖t − λh‖²`.
    Gain,
}

#[derive(Debug, Clone)]
pub(crate) struct Arch {
    n: usize,
    q: f64,
    /// Widths of every layer, the output layer (width 1) included.
    widths: Vec<usize>,
    param_offsets: Vec<usize>,
    unit_offsets: Vec<usize>,
    n_params: usize,
    n_units: usize,
}

impl Arch {
    pub(crate) fn new(n: usize, q: f64, hidden: &[usize]) -> Self {
        let widths: Vec<usize> = hidden.iter().copied().chain(std::iter::once(1)).collect();
        let mut param_offsets = Vec::with_capacity(widths.len());
        let mut unit_offsets = Vec::with_capacity(widths.len());
        let (mut p, mut u, mut d_in) = (0, 0, n);
        for &w in &widths {
            param_offsets.push(p);
            unit_offsets.push(u);
            p += w * (d_in + 1);
            u += w;
            d_in = w;
        }
        Self {
            n,
            q,
            widths,
            param_offsets,
            unit_offsets,
            n_params: p,
            n_units: u,
        }
    }

    fn layer_in(&self, layer: usize) -> usize {
        if layer == 0 {
            self.n
        } else {
            self.widths[layer - 1]
        }
    }

    fn max_width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(1).max(self.n)
    }

    pub(crate) fn hidden(&self) -> &[usize] {
        &self.widths[..self.widths.len() - 1]
    }

    pub(crate) fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.n_params);
        for (l, &w) in self.widths.iter().enumerate() {
            let d_in = self.layer_in(l);
            for _ in 0..w {
                theta.extend((0..d_in).map(|_| rng.gen_range(-self.q..=self.q)));
                theta.push(rng.gen_range(-1.0..=1.0));
            }
        }
        theta
    }

    fn project(&self, theta: &mut [f64]) {
        for (l, &w) in self.widths.iter().enumerate() {
            let d_in = self.layer_in(l);
            let bb = bias_bound(d_in, self.q);
            let base = self.param_offsets[l];
            for u in 0..w {
                let unit = &mut theta[base + u * (d_in + 1)..base + (u + 1) * (d_in + 1)];
                for x in &mut unit[..d_in] {
                    *x = x.clamp(-self.q, self.q);
                }
                unit[d_in] = unit[d_in].clamp(-bb, bb);
            }
        }
    }

    /// Negates the output unit, which negates the computed function exactly.
    pub(crate) fn negate_output(&self, theta: &mut [f64]) {
        let last = self.widths.len() - 1;
        for x in &mut theta[self.param_offsets[last]..] {
            *x = -*x;
        }
    }

    pub(crate) fn to_net(&self, theta: &[f64], cert: RepCert) -> Result<RepNet> {
        let mut layers = Vec::with_capacity(self.widths.len());
        for (l, &w) in self.widths.iter().enumerate() {
            let d_in = self.layer_in(l);
            let base = self.param_offsets[l];
            let units = (0..w)
                .map(|u| {
                    let p = &theta[base + u * (d_in + 1)..base + (u + 1) * (d_in + 1)];
                    ClipUnit::new(p[..d_in].to_vec(), p[d_in], self.q)
                })
                .collect::<Result<Vec<_>>>()?;
            layers.push(units);
        }
        RepNet::new(self.n, self.q, layers, Some(cert))
    }

    /// Parameters of `net` re-embedded into this architecture: padded in
    /// depth with identity layers, then in width with inert units.
    pub(crate) fn theta_of(&self, net: &RepNet) -> Result<Vec<f64>> {
        let depth = self.widths.len() - 1;
        if net.input_width() != self.n || net.q() != self.q || net.depth() > depth {
            return Err(Error::InvalidNetwork(format!(
                "network of depth {} over n = {} does not fit the search architecture",
                net.depth(),
                net.input_width()
            )));
        }
        let net = net
            .pad_depth(depth - net.depth())
            .embed_widths(self.hidden())?;
        let mut theta = Vec::with_capacity(self.n_params);
        for layer in net.layers() {
            for u in layer {
                theta.extend_from_slice(u.weights());
                theta.push(u.bias());
            }
        }
        debug_assert_eq!(theta.len(), self.n_params);
        Ok(theta)
    }
}

/// Per-restart scratch buffers.
struct Workspace {
    /// Pre-activations of every unit at the current node.
    z: Vec<f64>,
    act: Vec<f64>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    /// `Σ_i μ_i t_i ∇h(x_i)`.
    grad_corr: Vec<f64>,
    /// `Σ_i μ_i h(x_i) ∇h(x_i)`, the gradient of `½‖h‖²`.
    grad_norm: Vec<f64>,
    step: Vec<f64>,
}

pub(crate) struct Problem<'a> {
    pub arch: &'a Arch,
    pub quad: &'a Quadrature,
    /// `μ_i·t_i`.
    pub weighted_target: &'a [f64],
    pub objective: Objective,
}

impl Problem<'_> {
    fn workspace(&self) -> Workspace {
        let m = self.arch.max_width();
        Workspace {
            z: vec![0.0; self.arch.n_units],
            act: vec![0.0; self.arch.n_units],
            delta: vec![0.0; m],
            delta_prev: vec![0.0; m],
            grad_corr: vec![0.0; self.arch.n_params],
            grad_norm: vec![0.0; self.arch.n_params],
            step: vec![0.0; self.arch.n_params],
        }
    }

    fn wants_norm_grad(&self) -> bool {
        self.objective == Objective::Gain
    }

    /// One pass over the nodes: returns `(⟨h,t⟩, ‖h‖²)` and fills both
    /// gradient accumulators (`grad_norm` only for the gain objective).
    fn evaluate(&self, theta: &[f64], ws: &mut Workspace) -> (f64, f64) {
        ws.grad_corr.iter_mut().for_each(|g| *g = 0.0);
        ws.grad_norm.iter_mut().for_each(|g| *g = 0.0);
        if self.arch.widths.len() == 1 {
            if let Some(out) = self.evaluate_unit(theta, ws) {
                return out;
            }
        }
        self.evaluate_layered(theta, ws)
    }

    /// Depth-0 fast path; `None` when `n` has no specialized kernel.
    fn evaluate_unit(&self, theta: &[f64], ws: &mut Workspace) -> Option<(f64, f64)> {
        macro_rules! dispatch {
            ($($n:literal)*) => {
                match (self.arch.n, self.wants_norm_grad()) {
                    $(
                        ($n, false) => Some(self.unit_kernel::<$n, false>(theta, ws)),
                        ($n, true) => Some(self.unit_kernel::<$n, true>(theta, ws)),
                    )*
                    _ => None,
                }
            };
        }
        dispatch!(1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16)
    }

    /// One clipped unit on `N`-dimensional nodes. Accumulators live in
    /// registers and the kink test is a select rather than a branch; nodes
    /// outside the active band contribute exact zeros.
    fn unit_kernel<const N: usize, const NORM_GRAD: bool>(
        &self,
        theta: &[f64],
        ws: &mut Workspace,
    ) -> (f64, f64) {
        let w: [f64; N] = theta[..N].try_into().expect("weight count");
        let b = theta[N];
        let mut gcw = [0.0; N];
        let mut gnw = [0.0; N];
        let (mut gcb, mut gnb) = (0.0, 0.0);
        let (mut corr, mut norm) = (0.0, 0.0);
        let nodes = self.quad.raw_nodes().chunks_exact(N);
        for ((x, &m), &a) in nodes.zip(self.quad.weights()).zip(self.weighted_target) {
            let x: &[f64; N] = x.try_into().expect("node width");
            let mut z = 0.0;
            for j in 0..N {
                z += w[j] * x[j];
            }
            z += b;
            let h = clip(z);
            let active = if (-1.0..=1.0).contains(&z) { 1.0 } else { 0.0 };
            corr += a * h;
            norm += m * (h * h);
            let sa = active * a;
            for j in 0..N {
                gcw[j] += sa * x[j];
            }
            gcb += sa;
            if NORM_GRAD {
                let sm = active * (m * h);
                for j in 0..N {
                    gnw[j] += sm * x[j];
                }
                gnb += sm;
            }
        }
        ws.grad_corr[..N].copy_from_slice(&gcw);
        ws.grad_corr[N] = gcb;
        if NORM_GRAD {
            ws.grad_norm[..N].copy_from_slice(&gnw);
            ws.grad_norm[N] = gnb;
        }
        (corr, norm)
    }

    fn evaluate_layered(&self, theta: &[f64], ws: &mut Workspace) -> (f64, f64) {
        let arch = self.arch;
        let last = arch.widths.len() - 1;
        let norm_grad = self.wants_norm_grad();
        let mu = self.quad.weights();
        let mut corr = 0.0;
        let mut norm = 0.0;
        for (i, x) in self.quad.nodes().enumerate() {
            for (l, &w) in arch.widths.iter().enumerate() {
                let d_in = arch.layer_in(l);
                let base = arch.param_offsets[l];
                let uo = arch.unit_offsets[l];
                for u in 0..w {
                    let p = &theta[base + u * (d_in + 1)..base + (u + 1) * (d_in + 1)];
                    let z = if l == 0 {
                        affine(&p[..d_in], p[d_in], x)
                    } else {
                        let po = arch.unit_offsets[l - 1];
                        affine(&p[..d_in], p[d_in], &ws.act[po..po + d_in])
                    };
                    ws.z[uo + u] = z;
                    ws.act[uo + u] = clip(z);
                }
            }
            let h = ws.act[arch.unit_offsets[last]];
            let a = self.weighted_target[i];
            let m = mu[i] * h;
            corr += a * h;
            norm += mu[i] * (h * h);

            // Backpropagate ∂h/∂θ; both accumulators scale the same sensitivities.
            ws.delta[0] = clip_slope(ws.z[arch.unit_offsets[last]]);
            if ws.delta[0] == 0.0 {
                continue;
            }
            for l in (0..=last).rev() {
                let w = arch.widths[l];
                let d_in = arch.layer_in(l);
                let base = arch.param_offsets[l];
                if l > 0 {
                    ws.delta_prev[..d_in].iter_mut().for_each(|d| *d = 0.0);
                }
                for u in 0..w {
                    let du = ws.delta[u];
                    if du == 0.0 {
                        continue;
                    }
                    let off = base + u * (d_in + 1);
                    let input = if l == 0 {
                        x
                    } else {
                        let po = arch.unit_offsets[l - 1];
                        &ws.act[po..po + d_in]
                    };
                    for (g, xi) in ws.grad_corr[off..off + d_in].iter_mut().zip(input) {
                        *g += a * du * xi;
                    }
                    ws.grad_corr[off + d_in] += a * du;
                    if norm_grad {
                        for (g, xi) in ws.grad_norm[off..off + d_in].iter_mut().zip(input) {
                            *g += m * du * xi;
                        }
                        ws.grad_norm[off + d_in] += m * du;
                    }
                    if l > 0 {
                        for j in 0..d_in {
                            ws.delta_prev[j] += du * theta[off + j];
                        }
                    }
                }
                if l > 0 {
                    let po = arch.unit_offsets[l - 1];
                    for j in 0..d_in {
                        ws.delta[j] = ws.delta_prev[j] * clip_slope(ws.z[po + j]);
                    }
                }
            }
        }
        (corr, norm)
    }

    fn value(&self, corr: f64, norm: f64, sign: f64) -> (f64, f64) {
        match self.objective {
            Objective::Correlation => (sign * corr, 0.0),
            Objective::Gain => {
                let lambda = optimal_lambda(corr, norm, self.arch.q);
                let lambda = if lambda * sign > 0.0 { lambda } else { 0.0 };
                (2.0 * lambda * corr - lambda * lambda * norm, lambda)
            }
        }
    }

    /// One signed ascent from `init`; returns the best iterate seen.
    ///
    /// The step direction is `sign·∇⟨h, t − λh⟩` normalized, a positive
    /// multiple of the gain gradient when `λ ≠ 0` and the signed correlation
    /// gradient otherwise.
    fn ascend_signed(
        &self,
        init: &[f64],
        sign: f64,
        budget: &Budget,
        ws: &mut Workspace,
    ) -> (f64, Vec<f64>) {
        let mut theta = init.to_vec();
        self.arch.project(&mut theta);
        let mut best = (f64::NEG_INFINITY, theta.clone());
        let mut step = budget.step0;
        for t in 0..=budget.iterations {
            let (corr, norm) = self.evaluate(&theta, ws);
            let (val, lambda) = self.value(corr, norm, sign);
            if val > best.0 {
                best = (val, theta.clone());
            }
            if t == budget.iterations {
                break;
            }
            for ((s, gc), gn) in ws.step.iter_mut().zip(&ws.grad_corr).zip(&ws.grad_norm) {
                *s = sign * (gc - lambda * gn);
            }
            let len = ws.step.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !(len > 0.0 && len.is_finite()) {
                break;
            }
            for (p, g) in theta.iter_mut().zip(&ws.step) {
                *p += step * g / len;
            }
            self.arch.project(&mut theta);
            step *= budget.decay;
        }
        best
    }

    /// Runs both sign objectives from `init` and keeps the better one
    /// (the positive sign on ties).
    pub(crate) fn restart(&self, init: &[f64], budget: &Budget) -> (f64, Vec<f64>) {
        let mut ws = self.workspace();
        let plus = self.ascend_signed(init, 1.0, budget, &mut ws);
        let minus = self.ascend_signed(init, -1.0, budget, &mut ws);
        if minus.0 > plus.0 {
            minus
        } else {
            plus
        }
    }
}

/// Coefficient minimizing `‖t − λh‖²` over `λ ∈ [-q,q]`; zero for a
/// numerically vanishing `h`.
pub fn optimal_lambda(corr: f64, norm_sq: f64, q: f64) -> f64 {
    if norm_sq < 1e-14 {
        0.0
    } else {
        (corr / norm_sq).clamp(-q, q)
    }
}

pub(crate) fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ restart as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::build_quadrature;
    use crate::netcore::DomainSpec;

    fn finite_difference_check(hidden: &[usize], objective: Objective, lambda: f64) {
        let dom = DomainSpec::new(3, 1.0).unwrap();
        let quad = build_quadrature(&dom, "seeded-uniform", 64, 5).unwrap();
        let arch = Arch::new(3, 1.0, hidden);
        let target: Vec<f64> = quad
            .nodes()
            .map(|w| (2.0 * w[0]).sin() * w[1] + 0.3)
            .collect();
        let wt: Vec<f64> = target
            .iter()
            .zip(quad.weights())
            .map(|(t, m)| t * m)
            .collect();
        let prob = Problem {
            arch: &arch,
            quad: &quad,
            weighted_target: &wt,
            objective,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // Small weights keep every unit well inside its linear region.
        let theta: Vec<f64> = arch.init(&mut rng).iter().map(|x| 0.2 * x).collect();
        let mut ws = prob.workspace();
        let f = |th: &[f64], ws: &mut Workspace| {
            let (c, n) = prob.evaluate(th, ws);
            c - 0.5 * lambda * n
        };
        f(&theta, &mut ws);
        let grad: Vec<f64> = ws
            .grad_corr
            .iter()
            .zip(&ws.grad_norm)
            .map(|(gc, gn)| gc - lambda * gn)
            .collect();
        let h = 1e-6;
        for k in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let fd = (f(&tp, &mut ws) - f(&tm, &mut ws)) / (2.0 * h);
            assert!(
                (fd - grad[k]).abs() < 1e-7,
                "param {k}: fd {fd} vs {}",
                grad[k]
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences_single_unit() {
        finite_difference_check(&[], Objective::Correlation, 0.0);
        finite_difference_check(&[], Objective::Gain, 0.6);
    }

    #[test]
    fn gradient_matches_finite_differences_deep() {
        finite_difference_check(&[3, 2], Objective::Correlation, 0.0);
        finite_difference_check(&[2], Objective::Gain, 0.7);
    }

    #[test]
    fn to_net_round_trip() {
        let arch = Arch::new(2, 1.0, &[3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = arch.init(&mut rng);
        let net = arch.to_net(&theta, RepCert::new(3, 1)).unwrap();
        assert_eq!(arch.theta_of(&net).unwrap(), theta);
    }

    #[test]
    fn projection_clamps_into_box() {
        let arch = Arch::new(2, 1.0, &[]);
        let mut theta = vec![3.0, -5.0, 10.0];
        arch.project(&mut theta);
        assert_eq!(theta, vec![1.0, -1.0, 3.0]);
    }

    #[test]
    fn lambda_clamps_to_box() {
        assert_eq!(optimal_lambda(0.6, 0.2, 1.0), 1.0);
        assert_eq!(optimal_lambda(-0.6, 0.2, 1.0), -1.0);
        assert_eq!(optimal_lambda(0.1, 0.2, 1.0), 0.5);
        assert_eq!(optimal_lambda(0.1, 1e-15, 1.0), 0.0);
    }
}
