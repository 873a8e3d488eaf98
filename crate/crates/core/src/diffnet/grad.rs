//! Exact hidden-parameter derivatives.
//!
//! [`Workspace::backward`] is the reverse sweep used by training: it maps
//! adjoint seeds on `(u, u', u'')` at one point to the gradient over every
//! hidden parameter. [`param_sensitivities`] is the forward-mode counterpart
//! returning per-generator tangents for a chosen set of parameters.

use alloc::vec;
use alloc::vec::Vec;

use super::{NetworkParams, NetworkSpec, Order, Workspace};
use crate::error::{bail, Result};

/// One trainable scalar of the network, addressed structurally.
///
/// `layer` indexes [`NetworkParams::hidden`], so `layer = 0` is `W_2, b_2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenParam {
    SpatialWeight(usize),
    SpatialBias(usize),
    LayerWeight { layer: usize, row: usize, col: usize },
    LayerBias { layer: usize, row: usize },
    /// Output weights are fitted by least squares and have no sensitivities here.
    OutputWeight(usize),
}

impl HiddenParam {
    /// Position in the flat layout of [`NetworkParams::hidden_flat`].
    pub fn flat_index(self, spec: &NetworkSpec) -> Result<usize> {
        let n = spec.width;
        let idx = match self {
            HiddenParam::SpatialWeight(j) if j < n => j,
            HiddenParam::SpatialBias(j) if j < n => n + j,
            HiddenParam::LayerWeight { layer, row, col }
                if layer + 1 < spec.depth && row < n && col < n =>
            {
                2 * n + layer * (n * n + n) + row * n + col
            }
            HiddenParam::LayerBias { layer, row } if layer + 1 < spec.depth && row < n => {
                2 * n + layer * (n * n + n) + n * n + row
            }
            HiddenParam::OutputWeight(_) => {
                bail!(Contract, "output weights are not hidden parameters")
            }
            other => bail!(Contract, "parameter {:?} out of range for this network", other),
        };
        Ok(idx)
    }

    /// Every hidden parameter in flat order.
    pub fn all(spec: &NetworkSpec) -> Vec<HiddenParam> {
        let n = spec.width;
        let mut out: Vec<HiddenParam> = (0..n).map(HiddenParam::SpatialWeight).collect();
        out.extend((0..n).map(HiddenParam::SpatialBias));
        for layer in 0..spec.depth - 1 {
            for row in 0..n {
                for col in 0..n {
                    out.push(HiddenParam::LayerWeight { layer, row, col });
                }
            }
            out.extend((0..n).map(|row| HiddenParam::LayerBias { layer, row }));
        }
        out
    }
}

/// Reverse-sweep scratch buffers.
#[derive(Debug, Clone)]
pub struct Backprop {
    zbar: [Vec<f64>; 3],
    pbar: [Vec<f64>; 3],
}

impl Backprop {
    pub fn new(spec: &NetworkSpec) -> Self {
        let n = spec.width;
        Self {
            zbar: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            pbar: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }
}

/// Derivatives of `(z, z', z'')` of the first layer with respect to `(w_j, b_j)`.
#[inline]
fn first_layer_partials(
    params: &NetworkParams,
    spec: &NetworkSpec,
    ws: &Workspace,
    j: usize,
) -> ([f64; 3], [f64; 3]) {
    let x = ws.x;
    if spec.fourier {
        let k = params.kappa[j];
        let c = ws.pre[0][1][j];
        let (s, co) = crate::math::sin_cos(ws.pre[0][0][j]);
        (
            [
                co * k * x,
                k * co - c * s * k * x,
                -2.0 * c * k * s - c * c * co * k * x,
            ],
            [co * k, -c * s * k, -c * c * co * k],
        )
    } else {
        let w = ws.pre[0][1][j];
        let [_, s1, s2, s3] = spec.activation.derivs(ws.pre[0][0][j]);
        (
            [s1 * x, s2 * x * w + s1, s3 * x * w * w + 2.0 * s2 * w],
            [s1, s2 * w, s3 * w * w],
        )
    }
}

impl Workspace {
    /// Accumulates into `grad` (flat hidden layout) the gradient of
    /// `seed[0] * u + seed[1] * u' + seed[2] * u''` at the point of the last
    /// forward pass. Seeds above the forward order must be zero.
    pub fn backward(
        &self,
        params: &NetworkParams,
        spec: &NetworkSpec,
        seed: [f64; 3],
        grad: &mut [f64],
        bp: &mut Backprop,
    ) {
        let n = spec.width;
        let d1 = self.order >= Order::First;
        let d2 = self.order >= Order::Second;
        let xi = self.xi;
        {
            let [zb0, zb1, zb2] = &mut bp.zbar;
            for j in 0..n {
                let w = params.w_out[j];
                let (g0, g1, g2) = (w * seed[0], w * seed[1], w * seed[2]);
                zb0[j] = g0 * xi[0] + g1 * xi[1] + g2 * xi[2];
                zb1[j] = g1 * xi[0] + 2.0 * g2 * xi[1];
                zb2[j] = g2 * xi[0];
            }
        }

        for l in (1..spec.depth).rev() {
            let layer = &params.hidden[l - 1];
            let [p0, p1, p2] = &self.pre[l];
            let [zp0, zp1, zp2] = &self.post[l - 1];
            let offset = 2 * n + (l - 1) * (n * n + n);
            {
                let [zb0, zb1, zb2] = &bp.zbar;
                let [pb0, pb1, pb2] = &mut bp.pbar;
                for i in 0..n {
                    let [_, s1, s2, s3] = spec.activation.derivs(p0[i]);
                    let mut a0 = zb0[i] * s1;
                    let mut a1 = 0.0;
                    let mut a2 = 0.0;
                    if d1 {
                        a0 += zb1[i] * s2 * p1[i];
                        a1 = zb1[i] * s1;
                    }
                    if d2 {
                        a0 += zb2[i] * (s3 * p1[i] * p1[i] + s2 * p2[i]);
                        a1 += zb2[i] * 2.0 * s2 * p1[i];
                        a2 = zb2[i] * s1;
                    }
                    pb0[i] = a0;
                    pb1[i] = a1;
                    pb2[i] = a2;
                }
            }
            let [pb0, pb1, pb2] = &bp.pbar;
            let (gw, gb) = grad[offset..offset + n * n + n].split_at_mut(n * n);
            for i in 0..n {
                let row = &mut gw[i * n..(i + 1) * n];
                let (a0, a1, a2) = (pb0[i], pb1[i], pb2[i]);
                if d2 {
                    for k in 0..n {
                        row[k] += a0 * zp0[k] + a1 * zp1[k] + a2 * zp2[k];
                    }
                } else if d1 {
                    for k in 0..n {
                        row[k] += a0 * zp0[k] + a1 * zp1[k];
                    }
                } else {
                    for k in 0..n {
                        row[k] += a0 * zp0[k];
                    }
                }
                gb[i] += a0;
            }
            let [zb0, zb1, zb2] = &mut bp.zbar;
            zb0.iter_mut().for_each(|v| *v = 0.0);
            zb1.iter_mut().for_each(|v| *v = 0.0);
            zb2.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..n {
                let row = &layer.weights[i * n..(i + 1) * n];
                let (a0, a1, a2) = (pb0[i], pb1[i], pb2[i]);
                for k in 0..n {
                    zb0[k] += row[k] * a0;
                    zb1[k] += row[k] * a1;
                    zb2[k] += row[k] * a2;
                }
            }
        }

        let [zb0, zb1, zb2] = &bp.zbar;
        for j in 0..n {
            let (dw, db) = first_layer_partials(params, spec, self, j);
            let mut gw = zb0[j] * dw[0];
            let mut gb = zb0[j] * db[0];
            if d1 {
                gw += zb1[j] * dw[1];
                gb += zb1[j] * db[1];
            }
            if d2 {
                gw += zb2[j] * dw[2];
                gb += zb2[j] * db[2];
            }
            grad[j] += gw;
            grad[n + j] += gb;
        }
    }
}

/// Per-point tangents of `(phi, phi', phi'')` for each selected parameter.
///
/// `d[p][k]` is a `points x n` row-major matrix holding the derivative of the
/// order-`k` generator values with respect to `params[p]`.
#[derive(Debug, Clone)]
pub struct Sensitivities {
    pub params: Vec<HiddenParam>,
    pub width: usize,
    pub points: Vec<f64>,
    pub d: Vec<[Vec<f64>; 3]>,
}

/// Forward-mode derivatives of the generators with respect to hidden parameters.
pub fn param_sensitivities(
    params: &NetworkParams,
    spec: &NetworkSpec,
    points: &[f64],
    wrt: &[HiddenParam],
) -> Result<Sensitivities> {
    params.check(spec)?;
    for p in wrt {
        p.flat_index(spec)?;
    }
    let n = spec.width;
    let m = points.len();
    let mut d: Vec<[Vec<f64>; 3]> = wrt
        .iter()
        .map(|_| [vec![0.0; m * n], vec![0.0; m * n], vec![0.0; m * n]])
        .collect();

    let mut ws = Workspace::new(spec);
    let mut tan = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut next = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, &x) in points.iter().enumerate() {
        ws.forward(params, spec, x, Order::Second);
        for (pi, &p) in wrt.iter().enumerate() {
            tan.iter_mut().for_each(|t| t.iter_mut().for_each(|v| *v = 0.0));
            match p {
                HiddenParam::SpatialWeight(j) | HiddenParam::SpatialBias(j) => {
                    let (dw, db) = first_layer_partials(params, spec, &ws, j);
                    let src = if matches!(p, HiddenParam::SpatialWeight(_)) { dw } else { db };
                    for k in 0..3 {
                        tan[k][j] = src[k];
                    }
                }
                _ => {}
            }
            for l in 1..spec.depth {
                let layer = &params.hidden[l - 1];
                let [zp0, zp1, zp2] = &ws.post[l - 1];
                let [p0, p1, p2] = &ws.pre[l];
                let mut pd = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
                for (r, row) in layer.weights.chunks_exact(n).enumerate() {
                    for (k, t) in tan.iter().enumerate() {
                        pd[k][r] = super::dot(row, t);
                    }
                }
                match p {
                    HiddenParam::LayerWeight { layer: ly, row, col } if ly == l - 1 => {
                        pd[0][row] += zp0[col];
                        pd[1][row] += zp1[col];
                        pd[2][row] += zp2[col];
                    }
                    HiddenParam::LayerBias { layer: ly, row } if ly == l - 1 => {
                        pd[0][row] += 1.0;
                    }
                    _ => {}
                }
                for r in 0..n {
                    let [_, s1, s2, s3] = spec.activation.derivs(p0[r]);
                    next[0][r] = s1 * pd[0][r];
                    next[1][r] = s2 * pd[0][r] * p1[r] + s1 * pd[1][r];
                    next[2][r] = s3 * pd[0][r] * p1[r] * p1[r]
                        + 2.0 * s2 * p1[r] * pd[1][r]
                        + s2 * pd[0][r] * p2[r]
                        + s1 * pd[2][r];
                }
                core::mem::swap(&mut tan, &mut next);
            }
            let xi = ws.xi;
            let [t0, t1, t2] = &tan;
            let [o0, o1, o2] = &mut d[pi];
            for j in 0..n {
                o0[i * n + j] = t0[j] * xi[0];
                o1[i * n + j] = t1[j] * xi[0] + t0[j] * xi[1];
                o2[i * n + j] = t2[j] * xi[0] + 2.0 * t1[j] * xi[1] + t0[j] * xi[2];
            }
        }
    }
    Ok(Sensitivities {
        params: wrt.to_vec(),
        width: n,
        points: points.to_vec(),
        d,
    })
}
