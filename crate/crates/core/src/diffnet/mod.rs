//! Small differentiable network ansatz on the interval (-1, 1).
//!
//! A network of width `n` and depth `L` produces `n` generator functions
//! `phi_j(x) = z_L(x)_j * xi(x)`, where `z_1` is either a sinusoidal Fourier
//! feature layer `sin(kappa_j (w_j x + b_j))` or an affine layer followed by the
//! hidden activation, `z_l = sigma(W_l z_{l-1} + b_l)` for `l = 2..L`, and `xi` is
//! an optional boundary cutoff. The network output is `w_out . phi(x)`.
//!
//! Values and the first two spatial derivatives are propagated exactly through
//! every layer. Hidden-parameter gradients are obtained by a hand-written
//! reverse sweep over the same forward quantities (see [`grad`]).

mod act;
pub mod grad;

pub use act::Activation;
pub use grad::{param_sensitivities, HiddenParam, Sensitivities};

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{bail, Error, Result};
use crate::rng;
use crate::spectral::{self, InitPlan};

/// Boundary cutoff multiplied onto every generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Cutoff {
    None,
    /// `xi(x) = 1 - x^2`, vanishing at both endpoints of (-1, 1).
    OneMinusXSquared,
}

impl Cutoff {
    /// `(xi, xi', xi'')` at `x`.
    #[inline]
    pub fn eval(self, x: f64) -> [f64; 3] {
        match self {
            Cutoff::None => [1.0, 0.0, 0.0],
            Cutoff::OneMinusXSquared => [1.0 - x * x, -2.0 * x, -2.0],
        }
    }
}

/// Architecture of one ansatz. The input dimension is always one.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkSpec {
    /// Number of generators `n`.
    pub width: usize,
    /// Number of layers `L`; `L = 1` is the first layer only.
    pub depth: usize,
    /// Sinusoidal Fourier first layer; otherwise affine followed by `activation`.
    pub fourier: bool,
    pub activation: Activation,
    pub cutoff: Cutoff,
}

impl NetworkSpec {
    /// Fourier layer only, the "tunable Fourier basis" configuration.
    pub fn shallow_fourier(width: usize) -> Self {
        Self {
            width,
            depth: 1,
            fourier: true,
            activation: Activation::Tanh,
            cutoff: Cutoff::OneMinusXSquared,
        }
    }

    /// Fourier layer followed by `depth - 1` hidden layers.
    pub fn deep_fourier(width: usize, depth: usize, activation: Activation) -> Self {
        Self {
            width,
            depth,
            fourier: true,
            activation,
            cutoff: Cutoff::OneMinusXSquared,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            bail!(Config, "network width must be positive");
        }
        if self.depth == 0 {
            bail!(Config, "network depth must be positive");
        }
        Ok(())
    }

    /// Length of the flat hidden-parameter vector (see [`NetworkParams::hidden_flat`]).
    pub fn hidden_len(&self) -> usize {
        let n = self.width;
        2 * n + (self.depth - 1) * (n * n + n)
    }
}

/// Weights and bias of one hidden layer; `weights` is `n x n`, row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HiddenLayer {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// All trainable state of one ansatz (plus the fixed frequencies `kappa`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkParams {
    /// Frequency scalars of the Fourier layer (all ones when it is disabled).
    pub kappa: Vec<f64>,
    pub w_spatial: Vec<f64>,
    pub b_spatial: Vec<f64>,
    pub hidden: Vec<HiddenLayer>,
    pub w_out: Vec<f64>,
}

impl NetworkParams {
    pub fn width(&self) -> usize {
        self.w_out.len()
    }

    /// Checks dimensions against `spec` and positivity of `kappa`.
    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        spec.validate()?;
        let n = spec.width;
        let ok = self.kappa.len() == n
            && self.w_spatial.len() == n
            && self.b_spatial.len() == n
            && self.w_out.len() == n
            && self.hidden.len() == spec.depth - 1
            && self
                .hidden
                .iter()
                .all(|l| l.weights.len() == n * n && l.bias.len() == n);
        if !ok {
            bail!(Contract, "parameter dimensions do not match the network spec");
        }
        if self.kappa.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            bail!(Contract, "frequencies must be positive and finite");
        }
        Ok(())
    }

    /// Hidden parameters flattened as `[w_spatial, b_spatial, W_2, b_2, ..., W_L, b_L]`.
    pub fn hidden_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.width());
        out.extend_from_slice(&self.w_spatial);
        out.extend_from_slice(&self.b_spatial);
        for layer in &self.hidden {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    /// Inverse of [`hidden_flat`](Self::hidden_flat).
    pub fn set_hidden_flat(&mut self, flat: &[f64]) {
        let n = self.width();
        let (w, rest) = flat.split_at(n);
        let (b, mut rest) = rest.split_at(n);
        self.w_spatial.copy_from_slice(w);
        self.b_spatial.copy_from_slice(b);
        for layer in &mut self.hidden {
            let (lw, r) = rest.split_at(n * n);
            let (lb, r) = r.split_at(n);
            layer.weights.copy_from_slice(lw);
            layer.bias.copy_from_slice(lb);
            rest = r;
        }
    }
}

/// Builds and initializes a network.
///
/// Frequencies are drawn log-uniformly on the plan's band, spatial weights from
/// U(-1, 1), spatial biases from U(-pi, pi), hidden layers Glorot-uniform (tanh)
/// or He-uniform (cubic ReLU) with zero biases, and output weights are zero.
pub fn build_network(spec: &NetworkSpec, init: &InitPlan, seed: u64) -> Result<NetworkParams> {
    spec.validate()?;
    let n = spec.width;
    let kappa = if spec.fourier {
        spectral::sample_frequencies(init.omega_min, init.omega_max, n, rng::mix(seed, 0))?
    } else {
        vec![1.0; n]
    };

    let mut r = rng::substream(seed, 1);
    let w_spatial: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let b_spatial: Vec<f64> = (0..n)
        .map(|_| r.random_range(-core::f64::consts::PI..core::f64::consts::PI))
        .collect();

    let limit = match spec.activation {
        Activation::Tanh => crate::math::sqrt(6.0 / (2 * n) as f64),
        Activation::ReluCubed => crate::math::sqrt(6.0 / n as f64),
    };
    let hidden = (1..spec.depth)
        .map(|l| {
            let mut r = rng::substream(seed, 1 + l as u64);
            HiddenLayer {
                weights: (0..n * n).map(|_| r.random_range(-limit..limit)).collect(),
                bias: vec![0.0; n],
            }
        })
        .collect();

    Ok(NetworkParams {
        kappa,
        w_spatial,
        b_spatial,
        hidden,
        w_out: vec![0.0; n],
    })
}

/// Highest spatial derivative an evaluation computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value = 0,
    First = 1,
    Second = 2,
}

impl TryFrom<usize> for Order {
    type Error = Error;
    fn try_from(order: usize) -> Result<Self> {
        match order {
            0 => Ok(Order::Value),
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            k => Err(Error::UnsupportedOrder(k)),
        }
    }
}

/// Generator values and network outputs on a set of points.
///
/// Generator matrices are `points x n`, row-major. Matrices for derivative
/// orders that were not requested are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalBatch {
    pub points: Vec<f64>,
    pub width: usize,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
    pub output: Vec<f64>,
    pub doutput: Vec<f64>,
    pub d2output: Vec<f64>,
}

impl EvalBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Generator row `i` for derivative order `k`.
    pub fn row(&self, k: Order, i: usize) -> &[f64] {
        let m = match k {
            Order::Value => &self.phi,
            Order::First => &self.dphi,
            Order::Second => &self.d2phi,
        };
        &m[i * self.width..(i + 1) * self.width]
    }
}

/// Evaluates generators and output (with derivatives up to `order`) at `points`.
pub fn eval(
    params: &NetworkParams,
    spec: &NetworkSpec,
    points: &[f64],
    order: usize,
) -> Result<EvalBatch> {
    let order = Order::try_from(order)?;
    params.check(spec)?;
    let n = spec.width;
    let m = points.len();
    let sized = |k: Order| if order >= k { vec![0.0; m * n] } else { Vec::new() };
    let mut batch = EvalBatch {
        points: points.to_vec(),
        width: n,
        phi: vec![0.0; m * n],
        dphi: sized(Order::First),
        d2phi: sized(Order::Second),
        output: vec![0.0; m],
        doutput: if order >= Order::First { vec![0.0; m] } else { Vec::new() },
        d2output: if order >= Order::Second { vec![0.0; m] } else { Vec::new() },
    };
    let mut ws = Workspace::new(spec);
    for (i, &x) in points.iter().enumerate() {
        ws.forward(params, spec, x, order);
        let g = ws.generators();
        batch.phi[i * n..(i + 1) * n].copy_from_slice(g[0]);
        batch.output[i] = dot(&params.w_out, g[0]);
        if order >= Order::First {
            batch.dphi[i * n..(i + 1) * n].copy_from_slice(g[1]);
            batch.doutput[i] = dot(&params.w_out, g[1]);
        }
        if order >= Order::Second {
            batch.d2phi[i * n..(i + 1) * n].copy_from_slice(g[2]);
            batch.d2output[i] = dot(&params.w_out, g[2]);
        }
    }
    Ok(batch)
}

/// Network output and its derivatives at a single point.
pub fn eval_point(params: &NetworkParams, spec: &NetworkSpec, x: f64) -> [f64; 3] {
    let mut ws = Workspace::new(spec);
    ws.forward(params, spec, x, Order::Second);
    ws.output(&params.w_out)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-layer forward quantities for one point; reused across points.
///
/// `pre[l]` holds pre-activations (and their x-derivatives) and `post[l]` the
/// layer outputs. For the Fourier layer `pre[0]` holds the phase `a_j` and the
/// chain factor `kappa_j w_j`.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub(crate) order: Order,
    pub(crate) x: f64,
    pub(crate) xi: [f64; 3],
    pub(crate) pre: Vec<[Vec<f64>; 3]>,
    pub(crate) post: Vec<[Vec<f64>; 3]>,
    pub(crate) gen: [Vec<f64>; 3],
}

impl Workspace {
    pub fn new(spec: &NetworkSpec) -> Self {
        let n = spec.width;
        let triple = || [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        Self {
            order: Order::Second,
            x: 0.0,
            xi: [1.0, 0.0, 0.0],
            pre: (0..spec.depth).map(|_| triple()).collect(),
            post: (0..spec.depth).map(|_| triple()).collect(),
            gen: triple(),
        }
    }

    /// Generator values `[phi, phi', phi'']` from the last forward pass.
    pub fn generators(&self) -> [&[f64]; 3] {
        [&self.gen[0], &self.gen[1], &self.gen[2]]
    }

    /// `[u, u', u'']` for output weights `w_out` from the last forward pass.
    pub fn output(&self, w_out: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            if k <= self.order as usize {
                *o = dot(w_out, &self.gen[k]);
            }
        }
        out
    }

    /// Forward pass at `x`. Derivative slots above `order` are left stale.
    pub fn forward(&mut self, params: &NetworkParams, spec: &NetworkSpec, x: f64, order: Order) {
        self.order = order;
        self.x = x;
        let d1 = order >= Order::First;
        let d2 = order >= Order::Second;
        let n = spec.width;

        {
            let [a, c, _] = &mut self.pre[0];
            let [z0, z1, z2] = &mut self.post[0];
            for j in 0..n {
                if spec.fourier {
                    let kw = params.kappa[j] * params.w_spatial[j];
                    let phase = params.kappa[j] * (params.w_spatial[j] * x + params.b_spatial[j]);
                    let (s, co) = crate::math::sin_cos(phase);
                    a[j] = phase;
                    c[j] = kw;
                    z0[j] = s;
                    if d1 {
                        z1[j] = kw * co;
                    }
                    if d2 {
                        z2[j] = -kw * kw * s;
                    }
                } else {
                    let w = params.w_spatial[j];
                    let pre = w * x + params.b_spatial[j];
                    a[j] = pre;
                    c[j] = w;
                    let s = spec.activation.eval(pre);
                    z0[j] = s[0];
                    if d1 {
                        z1[j] = s[1] * w;
                    }
                    if d2 {
                        z2[j] = s[2] * w * w;
                    }
                }
            }
        }

        for l in 1..spec.depth {
            let layer = &params.hidden[l - 1];
            let (prev, cur) = self.post.split_at_mut(l);
            let [zp0, zp1, zp2] = &prev[l - 1];
            let [p0, p1, p2] = &mut self.pre[l];
            for i in 0..n {
                let row = &layer.weights[i * n..(i + 1) * n];
                p0[i] = dot(row, zp0) + layer.bias[i];
                if d1 {
                    p1[i] = dot(row, zp1);
                }
                if d2 {
                    p2[i] = dot(row, zp2);
                }
            }
            let [z0, z1, z2] = &mut cur[0];
            for i in 0..n {
                let s = spec.activation.eval(p0[i]);
                z0[i] = s[0];
                if d1 {
                    z1[i] = s[1] * p1[i];
                }
                if d2 {
                    z2[i] = s[2] * p1[i] * p1[i] + s[1] * p2[i];
                }
            }
        }

        let xi = spec.cutoff.eval(x);
        self.xi = xi;
        let [z0, z1, z2] = &self.post[spec.depth - 1];
        let [g0, g1, g2] = &mut self.gen;
        for j in 0..n {
            g0[j] = z0[j] * xi[0];
            if d1 {
                g1[j] = z1[j] * xi[0] + z0[j] * xi[1];
            }
            if d2 {
                g2[j] = z2[j] * xi[0] + 2.0 * z1[j] * xi[1] + z0[j] * xi[2];
            }
        }
    }
}
