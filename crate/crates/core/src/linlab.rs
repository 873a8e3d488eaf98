//! Uzawa iterations on square matrix operators.
//!
//! For `B u = f` with `B` invertible, the iteration
//! `u <- u + rho B^T (f - B u)` has error map `e <- (I - rho B^T B) e`, with
//! `e = u* - u`. The inexact variants perturb the residual `r = f - B u` and the
//! update `delta = B^T r` by relative amounts `epsilon`; the second variant also
//! perturbs the new iterate by `epsilon * |rho delta|`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{bail, Result};
use crate::{math, rng};

/// A square invertible system with its known solution.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub b: DMatrix<f64>,
    pub f: DVector<f64>,
    pub u_star: DVector<f64>,
    /// `|B|`, the largest singular value.
    pub norm_b: f64,
    /// `|B^-1|`, the reciprocal of the smallest singular value.
    pub inv_norm: f64,
    singular_values: Vec<f64>,
}

impl LinearProblem {
    pub fn new(b: DMatrix<f64>, u_star: DVector<f64>) -> Result<Self> {
        if !b.is_square() || b.nrows() == 0 || b.nrows() != u_star.len() {
            bail!(Config, "B must be square and match the solution length");
        }
        if b.iter().chain(u_star.iter()).any(|v| !v.is_finite()) {
            bail!(Numeric, "non-finite entry in B or u*");
        }
        let sv = b.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 1e-13 * smax) {
            bail!(Numeric, "B is singular to working precision");
        }
        let f = &b * &u_star;
        Ok(Self {
            f,
            u_star,
            norm_b: smax,
            inv_norm: 1.0 / smin,
            singular_values: sv.iter().copied().collect(),
            b,
        })
    }

    /// `B = diag(d)`.
    pub fn diagonal(d: &[f64], u_star: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            DVector::from_column_slice(u_star),
        )
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// `|I - rho B^T B|` from the singular values.
    pub fn iteration_norm(&self, rho: f64) -> f64 {
        self.singular_values
            .iter()
            .map(|s| (1.0 - rho * s * s).abs())
            .fold(0.0, f64::max)
    }

    fn check_rho(&self, rho: f64) -> Result<()> {
        let limit = 2.0 / (self.norm_b * self.norm_b);
        if !(rho > 0.0 && rho < limit) {
            bail!(Config, "rho = {rho} is outside the contraction range (0, {limit})");
        }
        Ok(())
    }
}

/// `rho* = 2 / (s_max^2 + s_min^2)` and the contraction rate it achieves.
pub fn optimal_rho(problem: &LinearProblem) -> (f64, f64) {
    let hi = problem.norm_b * problem.norm_b;
    let lo = 1.0 / (problem.inv_norm * problem.inv_norm);
    (2.0 / (hi + lo), (hi - lo) / (hi + lo))
}

/// Norm histories of one run. `errors[k] = |e^k|`; the residual and update
/// norms are those of step `k` (exact, before perturbation), and
/// `factors[k] = errors[k + 1] / errors[k]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UzawaRun {
    pub errors: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub update_norms: Vec<f64>,
    pub factors: Vec<f64>,
}

impl UzawaRun {
    pub fn final_ratio(&self) -> f64 {
        self.errors.last().copied().unwrap_or(0.0) / self.errors[0]
    }

    /// Geometric mean contraction per step, taken up to the first step where the
    /// error falls below `1e-13 |e^0|` (beyond that rounding dominates).
    pub fn mean_rate(&self) -> f64 {
        let e0 = self.errors[0];
        if self.factors.is_empty() || e0 == 0.0 {
            return 0.0;
        }
        let k = self
            .errors
            .iter()
            .skip(1)
            .position(|&e| e <= 1e-13 * e0)
            .map_or(self.errors.len() - 1, |i| i + 1);
        math::powf(self.errors[k] / e0, 1.0 / k as f64)
    }
}

/// Exact iteration from `u0`.
pub fn run_exact_uzawa(problem: &LinearProblem, rho: f64, iters: usize, u0: &DVector<f64>) -> Result<UzawaRun> {
    run_inexact_uzawa(problem, rho, &PerturbationModel::exact(), Approach::One, iters, u0, 0)
}

/// Asymptotic contraction of the error map, measured by `iters` renormalized
/// steps from `e0`.
pub fn measured_rate(problem: &LinearProblem, rho: f64, iters: usize, e0: &DVector<f64>) -> f64 {
    let bt = problem.b.transpose();
    let mut e = e0.normalize();
    let mut ratio = 0.0;
    for _ in 0..iters {
        let next = &e - rho * (&bt * (&problem.b * &e));
        ratio = next.norm();
        if ratio == 0.0 {
            return 0.0;
        }
        e = next / ratio;
    }
    ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Approach {
    /// Perturbed residual and update.
    One,
    /// Additionally perturbed iterate.
    Two,
}

impl Approach {
    /// Growth of the relative perturbation in the step bound:
    /// `(1+eps)^2 - 1` or `(1+eps)^3 - 1`.
    pub fn growth(self, eps: f64) -> f64 {
        match self {
            Approach::One => eps * eps + 2.0 * eps,
            Approach::Two => eps * eps * eps + 3.0 * eps * eps + 3.0 * eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PerturbationMode {
    /// Each perturbation is aligned to maximize the next error.
    WorstCase,
    /// Directions uniform on the unit sphere.
    RandomSphere,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerturbationModel {
    pub epsilon: f64,
    pub mode: PerturbationMode,
}

impl PerturbationModel {
    pub fn exact() -> Self {
        Self {
            epsilon: 0.0,
            mode: PerturbationMode::RandomSphere,
        }
    }
}

/// `c = (1 - |I - rho B^T B|) / (rho |B|^2)`.
fn slack(problem: &LinearProblem, rho: f64) -> f64 {
    (1.0 - problem.iteration_norm(rho)) / (rho * problem.norm_b * problem.norm_b)
}

/// Largest relative accuracy for which the inexact scheme provably contracts.
pub fn tolerance_bound(problem: &LinearProblem, rho: f64, approach: Approach) -> Result<f64> {
    problem.check_rho(rho)?;
    let c = slack(problem, rho);
    Ok(match approach {
        Approach::One => math::sqrt(1.0 + c) - 1.0,
        Approach::Two => math::cbrt(1.0 + c) - 1.0,
    })
}

/// Per-step contraction bound `|I - rho B^T B| + rho |B|^2 g(eps)`.
pub fn step_bound(problem: &LinearProblem, rho: f64, eps: f64, approach: Approach) -> f64 {
    problem.iteration_norm(rho) + rho * problem.norm_b * problem.norm_b * approach.growth(eps)
}

fn unit_or(v: DVector<f64>, fallback: &DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        let m = fallback.norm();
        if m > 0.0 {
            fallback / m
        } else {
            let mut e = DVector::zeros(fallback.len());
            e[0] = 1.0;
            e
        }
    }
}

fn sphere(dim: usize, r: &mut rng::Stream) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| r.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            return v / n;
        }
    }
}

/// Inexact iteration from `u0`. With `epsilon = 0` this is the exact scheme.
pub fn run_inexact_uzawa(
    problem: &LinearProblem,
    rho: f64,
    perturb: &PerturbationModel,
    approach: Approach,
    iters: usize,
    u0: &DVector<f64>,
    seed: u64,
) -> Result<UzawaRun> {
    if iters == 0 {
        bail!(Config, "at least one iteration is required");
    }
    if !(perturb.epsilon >= 0.0) {
        bail!(Config, "epsilon must be nonnegative");
    }
    if u0.len() != problem.dim() {
        bail!(Config, "initial iterate has the wrong length");
    }
    let eps = perturb.epsilon;
    let b = &problem.b;
    let bt = b.transpose();
    let mut r_stream = rng::stream(seed);
    let mut run = UzawaRun::default();
    // The error is propagated directly (`r = B e` since `f = B u*`), so factors
    // stay accurate once `u` agrees with `u*` to many digits.
    let mut e = &problem.u_star - u0;
    run.errors.push(e.norm());
    for _ in 0..iters {
        let r = b * &e;
        let delta_exact = &bt * &r;
        run.residual_norms.push(r.norm());
        run.update_norms.push(delta_exact.norm());

        let e_next = if eps == 0.0 {
            &e - rho * &delta_exact
        } else {
            let base = &e - rho * &delta_exact;
            let d_r = match perturb.mode {
                PerturbationMode::WorstCase => unit_or(-(b * &base), &e),
                PerturbationMode::RandomSphere => sphere(problem.dim(), &mut r_stream),
            };
            let r_eps = &r + eps * r.norm() * d_r;
            let delta = &bt * &r_eps;
            let partial = &e - rho * &delta;
            let d_delta = match perturb.mode {
                PerturbationMode::WorstCase => unit_or(-partial.clone(), &e),
                PerturbationMode::RandomSphere => sphere(problem.dim(), &mut r_stream),
            };
            let delta_eps = &delta + eps * delta.norm() * d_delta;
            let mut next = &e - rho * &delta_eps;
            if approach == Approach::Two {
                let d_u = match perturb.mode {
                    PerturbationMode::WorstCase => unit_or(next.clone(), &e),
                    PerturbationMode::RandomSphere => sphere(problem.dim(), &mut r_stream),
                };
                next += eps * rho * delta_eps.norm() * d_u;
            }
            next
        };
        let prev = e.norm();
        let cur = e_next.norm();
        run.factors.push(if prev > 0.0 { cur / prev } else { 0.0 });
        run.errors.push(cur);
        e = e_next;
    }
    Ok(run)
}

/// Random `m x m` problem with singular values log-uniform in
/// `[s0, s0 * cond_max]` (both ends attained), random orthogonal factors and a
/// Gaussian solution.
pub fn random_problem(m: usize, cond_max: f64, seed: u64) -> Result<LinearProblem> {
    if m == 0 || !(cond_max >= 1.0) {
        bail!(Config, "need m >= 1 and cond_max >= 1");
    }
    let mut r = rng::stream(seed);
    let gauss = |r: &mut rng::Stream| DMatrix::from_fn(m, m, |_, _| r.sample::<f64, _>(StandardNormal));
    let u = gauss(&mut r).qr().q();
    let v = gauss(&mut r).qr().q();
    let s0 = math::exp(r.random_range(math::ln(0.5)..math::ln(2.0)));
    let lc = math::ln(cond_max);
    let sv = DVector::from_fn(m, |i, _| {
        let t = if i == 0 {
            0.0
        } else if i == m - 1 {
            1.0
        } else {
            r.random_range(0.0..1.0)
        };
        s0 * math::exp(t * lc)
    });
    let b = &u * DMatrix::from_diagonal(&sv) * v.transpose();
    let u_star = DVector::from_fn(m, |_, _| r.sample::<f64, _>(StandardNormal));
    LinearProblem::new(b, u_star)
}

/// One row of an epsilon sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub epsilon: f64,
    pub rho: f64,
    pub measured_rate: f64,
    pub bound_rate: f64,
    pub converged: bool,
}

/// Runs the inexact scheme at `epsilon = fraction * epsilon_max` for each
/// fraction, from `u0 = 0`. A run converges when `|e^N| < 1e-8 |e^0|`.
pub fn epsilon_sweep(
    problem: &LinearProblem,
    rho: f64,
    approach: Approach,
    mode: PerturbationMode,
    fractions: &[f64],
    iters: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let eps_max = tolerance_bound(problem, rho, approach)?;
    let u0 = DVector::zeros(problem.dim());
    fractions
        .iter()
        .map(|&frac| {
            let epsilon = frac * eps_max;
            let model = PerturbationModel { epsilon, mode };
            let run = run_inexact_uzawa(problem, rho, &model, approach, iters, &u0, seed)?;
            let ratio = run.final_ratio();
            Ok(SweepRow {
                epsilon,
                rho,
                measured_rate: run.mean_rate(),
                bound_rate: step_bound(problem, rho, epsilon, approach),
                converged: ratio.is_finite() && ratio < 1e-8,
            })
        })
        .collect()
}
