//! Hybrid least-squares / Adam training of one network against a quadratic loss.
//!
//! Each epoch draws a fresh quadrature sample, solves the diagonally scaled and
//! Tikhonov-regularized normal equations for the output weights, then takes one
//! Adam step on the hidden parameters using the gradient of the discretized loss
//! at the new output weights. The same sample serves both sub-steps.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::diffnet::grad::Backprop;
use crate::diffnet::{self, NetworkParams, NetworkSpec, Order, Workspace};
use crate::error::{bail, Result};
use crate::formulations::{self, Field, NodeData, ProblemSpec, QuadraticForm};
use crate::math;
use crate::quadrature::{self, QuadratureSample, RuleTag};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Optimizer {
    /// Least-squares output weights, Adam on hidden parameters.
    LsAdam,
    /// Adam on all parameters, output weights included.
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Quadrature nodes per epoch.
    pub n_points: usize,
    pub lambda: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub resample_each_epoch: bool,
    pub rule: RuleTag,
    pub optimizer: Optimizer,
    /// Epoch stride of the monitor callback (the last epoch is always monitored).
    pub monitor_every: usize,
    /// Trapezoid nodes for the final loss.
    pub eval_points: usize,
}

impl TrainConfig {
    pub fn new(epochs: usize, learning_rate: f64, n_points: usize) -> Self {
        Self {
            epochs,
            learning_rate,
            n_points,
            lambda: 1e-8,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            resample_each_epoch: true,
            rule: RuleTag::P3,
            optimizer: Optimizer::LsAdam,
            monitor_every: 10,
            eval_points: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bail!(Config, "learning rate must be positive, got {}", self.learning_rate);
        }
        if !(self.lambda >= 0.0) {
            bail!(Config, "lambda must be nonnegative, got {}", self.lambda);
        }
        let (b1, b2) = self.adam_betas;
        if !(b1 > 0.0 && b1 < 1.0 && b2 > 0.0 && b2 < 1.0) {
            bail!(Config, "Adam betas must lie in (0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            bail!(Config, "Adam epsilon must be positive");
        }
        if self.n_points == 0 || (self.rule == RuleTag::P3 && !self.n_points.is_multiple_of(3)) {
            bail!(Config, "{} quadrature nodes do not fit the {} rule", self.n_points, self.rule.name());
        }
        if self.monitor_every == 0 || self.eval_points < 2 {
            bail!(Config, "monitor stride and evaluation grid must be positive");
        }
        Ok(())
    }
}

/// Adam moments for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != grads.len() {
        bail!(Contract, "Adam state, parameters and gradients differ in length");
    }
    if grads.iter().any(|g| !g.is_finite()) {
        bail!(Numeric, "non-finite gradient");
    }
    let (b1, b2) = betas;
    state.t += 1;
    let c1 = 1.0 - math::powf(b1, state.t as f64);
    let c2 = 1.0 - math::powf(b2, state.t as f64);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (math::sqrt(vh) + eps);
    }
    Ok(())
}

/// Diagonal scale `s_j = sqrt(max(H_jj, floor))` and the scaled matrix
/// `S^-1 H S^-1`. The floor is `1e-12 max_j H_jj` (or `1e-30`).
pub fn scaled_hessian(qf: &QuadraticForm) -> (Vec<f64>, DMatrix<f64>) {
    let n = qf.n;
    let dmax = (0..n).map(|j| qf.h[j * n + j]).fold(0.0, f64::max);
    let floor = if dmax > 0.0 { 1e-12 * dmax } else { 1e-30 };
    let s: Vec<f64> = (0..n).map(|j| math::sqrt(qf.h[j * n + j].max(floor))).collect();
    let m = DMatrix::from_fn(n, n, |i, j| qf.h[i * n + j] / (s[i] * s[j]));
    (s, m)
}

/// Output weights minimizing the scaled, regularized quadratic:
/// `(S^-1 H S^-1 + lambda I) w~ = S^-1 f`, `w = S^-1 w~`.
pub fn ls_step(qf: &QuadraticForm, lambda: f64) -> Result<Vec<f64>> {
    if qf.h.iter().chain(&qf.f).any(|v| !v.is_finite()) {
        bail!(Numeric, "non-finite entry in the normal equations");
    }
    let n = qf.n;
    let (s, mut m) = scaled_hessian(qf);
    for j in 0..n {
        m[(j, j)] += lambda;
    }
    let rhs = DVector::from_fn(n, |i, _| qf.f[i] / s[i]);
    let sol = match m.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => match m.lu().solve(&rhs) {
            Some(x) => x,
            None => bail!(Solver, "scaled normal equations are singular"),
        },
    };
    if sol.iter().any(|v| !v.is_finite()) {
        bail!(Solver, "scaled normal equations are singular");
    }
    Ok(sol.iter().zip(&s).map(|(w, s)| w / s).collect())
}

/// Generator derivatives at the origin, when the loss has a point term.
fn origin_slopes(problem: &ProblemSpec, params: &NetworkParams, spec: &NetworkSpec) -> Result<Option<Vec<f64>>> {
    if formulations::point_term_weight(problem) == 0.0 {
        return Ok(None);
    }
    Ok(Some(diffnet::eval(params, spec, &[0.0], 1)?.dphi))
}

/// Quadratic form of the discretized loss in the output weights.
pub fn assemble(
    problem: &ProblemSpec,
    data: &NodeData,
    params: &NetworkParams,
    spec: &NetworkSpec,
    sample: &QuadratureSample,
) -> Result<QuadraticForm> {
    let ord = problem.formulation.candidate_order();
    let gens = diffnet::eval(params, spec, &sample.nodes, ord as usize)?;
    let origin = origin_slopes(problem, params, spec)?;
    formulations::assemble_quadratic(problem, data, &gens, origin.as_deref(), sample)
}

/// Discretized loss of the network output.
pub fn loss(
    problem: &ProblemSpec,
    data: &NodeData,
    params: &NetworkParams,
    spec: &NetworkSpec,
    sample: &QuadratureSample,
) -> Result<f64> {
    let ord = problem.formulation.candidate_order();
    let b = diffnet::eval(params, spec, &sample.nodes, ord as usize)?;
    let pw = formulations::point_term_weight(problem);
    let slope = if pw != 0.0 {
        diffnet::eval(params, spec, &[0.0], 1)?.doutput[0]
    } else {
        0.0
    };
    formulations::loss_value(problem, data, &[b.output, b.doutput, b.d2output], slope, sample)
}

/// Discretized loss and its gradient in the flat hidden layout, followed by the
/// output weights when `with_output` is set.
pub fn loss_and_gradient(
    problem: &ProblemSpec,
    data: &NodeData,
    params: &NetworkParams,
    spec: &NetworkSpec,
    sample: &QuadratureSample,
    with_output: bool,
) -> Result<(f64, Vec<f64>)> {
    params.check(spec)?;
    let form = problem.formulation;
    let ord = form.candidate_order();
    let n = spec.width;
    let nh = spec.hidden_len();
    let mut grad = vec![0.0; nh + if with_output { n } else { 0 }];
    let (gh, go) = grad.split_at_mut(nh);
    let mut ws = Workspace::new(spec);
    let mut bp = Backprop::new(spec);
    let mut total = 0.0;
    for (i, &x) in sample.nodes.iter().enumerate() {
        ws.forward(params, spec, x, ord);
        let r = ws.output(&params.w_out);
        let (l, seed) = formulations::integrand(form, data.source[i], data.frozen[i], r);
        let w = sample.weights[i];
        total += w * l;
        let seed = [w * seed[0], w * seed[1], w * seed[2]];
        ws.backward(params, spec, seed, gh, &mut bp);
        if with_output {
            accumulate_output(go, &ws, seed);
        }
    }
    let pw = formulations::point_term_weight(problem);
    if pw != 0.0 {
        ws.forward(params, spec, 0.0, Order::First);
        total += pw * ws.output(&params.w_out)[1];
        let seed = [0.0, pw, 0.0];
        ws.backward(params, spec, seed, gh, &mut bp);
        if with_output {
            accumulate_output(go, &ws, seed);
        }
    }
    Ok((total, grad))
}

/// Spread of the stochastic gradient over independent quadrature draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientStats {
    /// Mean of the estimated loss.
    pub mean_loss: f64,
    /// Trace of the covariance of the gradient estimator (all parameters,
    /// output weights included).
    pub variance: f64,
}

/// Gradient variance of the `rule` estimator with `n_points` nodes over
/// `resamples` draws.
#[allow(clippy::too_many_arguments)]
pub fn gradient_variance(
    problem: &ProblemSpec,
    params: &NetworkParams,
    spec: &NetworkSpec,
    u_prev: &dyn Field,
    rule: RuleTag,
    n_points: usize,
    resamples: usize,
    seed: u64,
) -> Result<GradientStats> {
    if resamples < 2 {
        bail!(Config, "gradient variance needs at least two resamples, got {resamples}");
    }
    let mut losses = Vec::with_capacity(resamples);
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(resamples);
    for k in 0..resamples {
        let sample = quadrature::sample_rule(rule, n_points, rng::mix(seed, k as u64))?;
        let data = NodeData::gather(problem, u_prev, &sample.nodes)?;
        let (l, g) = loss_and_gradient(problem, &data, params, spec, &sample, true)?;
        losses.push(l);
        grads.push(g);
    }
    let variance = (0..grads[0].len())
        .map(|j| {
            let col: Vec<f64> = grads.iter().map(|g| g[j]).collect();
            quadrature::sample_variance(&col)
        })
        .sum();
    Ok(GradientStats {
        mean_loss: losses.iter().sum::<f64>() / resamples as f64,
        variance,
    })
}

fn accumulate_output(go: &mut [f64], ws: &Workspace, seed: [f64; 3]) {
    let g = ws.generators();
    for (k, &s) in seed.iter().enumerate() {
        if s != 0.0 {
            go.iter_mut().zip(g[k]).for_each(|(o, p)| *o += s * p);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    /// Discretized loss after both sub-steps, on the epoch's sample.
    pub loss: f64,
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PhaseOutcome {
    pub params: NetworkParams,
    pub history: Vec<EpochRecord>,
    /// Loss on the dense trapezoid grid at the end of the phase.
    pub final_loss: f64,
    /// Reason training stopped early, if it did.
    pub diverged: Option<String>,
}

/// Per-epoch callback receiving the current parameters; returns a relative error.
pub type Monitor<'a> = &'a mut dyn FnMut(&NetworkParams) -> Result<f64>;

/// Trains `net` on the loss of `problem` with frozen iterate `u_prev`.
pub fn train_phase(
    problem: &ProblemSpec,
    net: NetworkParams,
    spec: &NetworkSpec,
    u_prev: &dyn Field,
    cfg: &TrainConfig,
    seed: u64,
    mut monitor: Option<Monitor<'_>>,
) -> Result<PhaseOutcome> {
    cfg.validate()?;
    net.check(spec)?;
    let mut params = net;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut diverged = None;
    let nh = spec.hidden_len();
    let n = spec.width;
    let mut adam = AdamState::new(match cfg.optimizer {
        Optimizer::LsAdam => nh,
        Optimizer::Adam => nh + n,
    });
    let mut cached: Option<(QuadratureSample, NodeData)> = None;
    let mut flat = params.hidden_flat();

    for epoch in 0..cfg.epochs {
        if cfg.resample_each_epoch || cached.is_none() {
            let sample = quadrature::sample_rule(cfg.rule, cfg.n_points, rng::mix(seed, epoch as u64))?;
            let data = NodeData::gather(problem, u_prev, &sample.nodes)?;
            cached = Some((sample, data));
        }
        let (sample, data) = cached.as_ref().expect("sample drawn above");
        let last_good = params.clone();

        let step = (|| -> Result<()> {
            if cfg.optimizer == Optimizer::LsAdam {
                let qf = assemble(problem, data, &params, spec, sample)?;
                params.w_out = ls_step(&qf, cfg.lambda)?;
            }
            let with_output = cfg.optimizer == Optimizer::Adam;
            let (_, grad) = loss_and_gradient(problem, data, &params, spec, sample, with_output)?;
            if with_output {
                flat.extend_from_slice(&params.w_out);
            }
            let res = adam_step(&mut flat, &grad, &mut adam, cfg.learning_rate, cfg.adam_betas, cfg.adam_eps);
            if with_output {
                params.w_out.copy_from_slice(&flat[nh..]);
                flat.truncate(nh);
            }
            res?;
            params.set_hidden_flat(&flat);
            Ok(())
        })();
        let l = match step {
            Ok(()) => loss(problem, data, &params, spec, sample)?,
            Err(e) => {
                params = last_good;
                diverged = Some(e.to_string());
                break;
            }
        };
        if !l.is_finite() {
            params = last_good;
            diverged = Some(alloc::format!("non-finite loss at epoch {epoch}"));
            break;
        }
        let relative_error = match monitor.as_mut() {
            Some(m) if (epoch + 1) % cfg.monitor_every == 0 || epoch + 1 == cfg.epochs => Some(m(&params)?),
            _ => None,
        };
        history.push(EpochRecord {
            epoch,
            loss: l,
            relative_error,
        });
    }

    let grid = quadrature::trapezoid_sample(crate::DOMAIN.0, crate::DOMAIN.1, cfg.eval_points)?;
    let data = NodeData::gather(problem, u_prev, &grid.nodes)?;
    let final_loss = loss(problem, &data, &params, spec, &grid)?;
    Ok(PhaseOutcome {
        params,
        history,
        final_loss,
        diverged,
    })
}

#[cfg(test)]
mod tests;
