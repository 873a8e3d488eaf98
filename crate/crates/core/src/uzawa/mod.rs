//! Outer Uzawa loop: an initial approximation followed by trained corrections.
//!
//! The iterate is `u^k = u^0 + sum_j rho c_j`, where the component `c_j` is the
//! correction network itself (weak and strong) or minus its second derivative
//! (ultra-weak, where the trained network is a test function). With the graph
//! inner product on the trial space the step is `rho = 1`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::diffnet::{build_network, NetworkParams, NetworkSpec, Order, Workspace};
use crate::error::{bail, Error, Result};
use crate::formulations::{self, ExactSolution, Field, FieldValues, Formulation, ProblemSpec, ZeroField};
use crate::quadrature::{self, QuadratureSample};
use crate::spectral::{
    self, InitPlan, Phase, PhaseDescriptor, SignalArtifacts, SourceTag, SpectrumCurve, UniformGrid,
};
use crate::trainer::{self, EpochRecord, TrainConfig};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Role {
    /// `u^0` trained directly (weak, strong).
    InitialU0,
    /// Adjoint network `v` with `u^0 = -v''` (ultra-weak).
    InitialAdjoint,
    WeakResidual,
    StrongCorrection,
    UltraweakTest,
}

impl Role {
    /// Whether the component enters the iterate as `-c''` instead of `c`.
    pub fn uses_negative_second(self) -> bool {
        matches!(self, Role::InitialAdjoint | Role::UltraweakTest)
    }

    fn for_phase(formulation: Formulation, phase: Phase) -> Self {
        match (formulation, phase) {
            (Formulation::UltraWeak, Phase::Initial) => Role::InitialAdjoint,
            (_, Phase::Initial) => Role::InitialU0,
            (Formulation::Weak, _) => Role::WeakResidual,
            (Formulation::Strong, _) => Role::StrongCorrection,
            (Formulation::UltraWeak, _) => Role::UltraweakTest,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Component {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    pub scale: f64,
    pub role: Role,
}

impl Component {
    /// Adds `scale * contribution` (and its derivatives up to `order`) into `out`.
    fn accumulate(&self, points: &[f64], order: Order, out: &mut FieldValues) -> Result<()> {
        let neg2 = self.role.uses_negative_second();
        if neg2 && order > Order::Value {
            bail!(Unsupported, "derivatives of an ultra-weak iterate are not available");
        }
        let eval_order = if neg2 { Order::Second } else { order };
        let mut ws = Workspace::new(&self.spec);
        for (i, &x) in points.iter().enumerate() {
            ws.forward(&self.params, &self.spec, x, eval_order);
            let v = ws.output(&self.params.w_out);
            if neg2 {
                out.u[i] -= self.scale * v[2];
            } else {
                out.u[i] += self.scale * v[0];
                if order >= Order::First {
                    out.du[i] += self.scale * v[1];
                }
                if order >= Order::Second {
                    out.d2u[i] += self.scale * v[2];
                }
            }
        }
        Ok(())
    }

    /// The component's own contribution on `points` (values only).
    pub fn values(&self, points: &[f64]) -> Result<Vec<f64>> {
        let mut out = zeros(points.len(), Order::Value);
        let unit = Component {
            scale: 1.0,
            ..self.clone()
        };
        unit.accumulate(points, Order::Value, &mut out)?;
        Ok(out.u)
    }
}

fn zeros(m: usize, order: Order) -> FieldValues {
    let z = |k: Order| if order >= k { vec![0.0; m] } else { Vec::new() };
    FieldValues {
        u: vec![0.0; m],
        du: z(Order::First),
        d2u: z(Order::Second),
    }
}

/// What happened in one phase.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseRecord {
    pub phase: Phase,
    pub plan: InitPlan,
    /// `None` when the analyzed signal had no power.
    pub spectrum: Option<SpectrumCurve>,
    pub epochs: usize,
    pub history: Vec<EpochRecord>,
    pub final_loss: f64,
    /// Dense-grid relative error of the iterate after the phase, when the exact
    /// solution is known.
    pub relative_error: Option<f64>,
}

/// Iterate of the outer loop.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UzawaState {
    pub formulation: Formulation,
    pub components: Vec<Component>,
    pub history: Vec<PhaseRecord>,
    /// Set when a phase stopped early; the state then holds the phases before it.
    pub failure: Option<String>,
}

impl UzawaState {
    pub fn new(formulation: Formulation) -> Self {
        Self {
            formulation,
            components: Vec::new(),
            history: Vec::new(),
            failure: None,
        }
    }
}

impl Field for UzawaState {
    fn sample(&self, points: &[f64], order: Order) -> Result<FieldValues> {
        let mut out = zeros(points.len(), order);
        for c in &self.components {
            c.accumulate(points, order, &mut out)?;
        }
        Ok(out)
    }
}

/// The iterate on `points`, with its derivative when `with_derivative` is set
/// (not available for the ultra-weak formulation).
pub fn evaluate_solution(state: &UzawaState, points: &[f64], with_derivative: bool) -> Result<FieldValues> {
    if with_derivative && state.formulation == Formulation::UltraWeak {
        bail!(Unsupported, "the ultra-weak iterate is only defined in L2");
    }
    if points.iter().any(|x| !(crate::DOMAIN.0..=crate::DOMAIN.1).contains(x)) {
        bail!(Contract, "evaluation point outside the domain");
    }
    state.sample(points, if with_derivative { Order::First } else { Order::Value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ErrorNorm {
    L2,
    H1Semi,
}

impl ErrorNorm {
    /// Norm in which a formulation's errors are reported.
    pub fn for_formulation(f: Formulation) -> Self {
        match f {
            Formulation::UltraWeak => ErrorNorm::L2,
            _ => ErrorNorm::H1Semi,
        }
    }
}

/// Trapezoid grid, or a midpoint grid (no node at the jump) for the step solution.
fn report_grid(exact: &ExactSolution, n: usize) -> Result<QuadratureSample> {
    if exact.has_weak_derivative() {
        quadrature::trapezoid_sample(crate::DOMAIN.0, crate::DOMAIN.1, n)
    } else {
        if n < 2 {
            bail!(Config, "grid needs at least two points");
        }
        let (a, b) = crate::DOMAIN;
        let h = (b - a) / n as f64;
        Ok(QuadratureSample {
            nodes: (0..n).map(|i| a + (i as f64 + 0.5) * h).collect(),
            weights: vec![h; n],
            rule: quadrature::RuleTag::Trapezoid,
            partition: None,
            seed: 0,
        })
    }
}

fn norm_pair(u: &dyn Field, exact: &ExactSolution, norm: ErrorNorm, grid_size: usize) -> Result<(f64, f64)> {
    if norm == ErrorNorm::H1Semi && !exact.has_weak_derivative() {
        bail!(Unsupported, "H1 seminorm of a discontinuous solution");
    }
    let grid = report_grid(exact, grid_size)?;
    let order = match norm {
        ErrorNorm::L2 => Order::Value,
        ErrorNorm::H1Semi => Order::First,
    };
    let v = u.sample(&grid.nodes, order)?;
    let mut diff = 0.0;
    let mut base = 0.0;
    for (i, &x) in grid.nodes.iter().enumerate() {
        let e = exact.eval(x);
        let (a, b) = match norm {
            ErrorNorm::L2 => (v.u[i], e[0]),
            ErrorNorm::H1Semi => (v.du[i], e[1]),
        };
        diff += grid.weights[i] * (a - b) * (a - b);
        base += grid.weights[i] * b * b;
    }
    Ok((crate::math::sqrt(diff), crate::math::sqrt(base)))
}

/// `|u - u*| / |u*|` on a dense deterministic grid of `grid_size` points.
pub fn error_report(u: &dyn Field, exact: &ExactSolution, norm: ErrorNorm, grid_size: usize) -> Result<f64> {
    let (d, b) = norm_pair(u, exact, norm, grid_size)?;
    if !(b > 0.0) {
        bail!(Numeric, "exact solution has zero norm");
    }
    Ok(d / b)
}

/// `|u*|` on the same grid as [`error_report`].
pub fn exact_norm(exact: &ExactSolution, norm: ErrorNorm, grid_size: usize) -> Result<f64> {
    Ok(norm_pair(&ZeroField, exact, norm, grid_size)?.0)
}

/// Network and training budget for one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhasePlan {
    pub spec: NetworkSpec,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UzawaOptions {
    pub alpha: f64,
    /// Points of the periodic spectral-analysis grid.
    pub spectral_grid: usize,
    /// Points of the grid used for per-epoch error monitoring.
    pub monitor_grid: usize,
    /// Points of the grid used for the per-phase error.
    pub report_grid: usize,
}

impl Default for UzawaOptions {
    fn default() -> Self {
        Self {
            alpha: spectral::DEFAULT_ALPHA,
            spectral_grid: spectral::DEFAULT_GRID,
            monitor_grid: 2001,
            report_grid: 10_001,
        }
    }
}

fn artifacts_for(
    problem: &ProblemSpec,
    state: &UzawaState,
    tag: SourceTag,
    grid: &UniformGrid,
) -> Result<SignalArtifacts> {
    let mut a = SignalArtifacts::default();
    match tag {
        SourceTag::SourceTerm => {
            a.source = Some(if problem.source.is_distribution() {
                spectral::dirac_prime_proxy(grid)?
            } else {
                grid.points()
                    .iter()
                    .map(|&x| problem.source.value(x).unwrap_or(0.0))
                    .collect()
            });
        }
        SourceTag::StrongResidual => {
            a.strong_residual = Some(formulations::strong_residual_grid(problem, state, grid)?);
        }
        SourceTag::PriorWeakResidual => {
            a.prior_weak_residual = Some(last_component(state)?.values(grid.points())?);
        }
        SourceTag::PriorCorrectionProxy => {
            a.prior_correction_proxy = Some(last_component(state)?.values(grid.points())?);
        }
    }
    Ok(a)
}

/// Band used when the analyzed signal is identically zero: the lowest grid
/// frequency.
fn fallback_plan(desc: PhaseDescriptor, grid: &UniformGrid, alpha: f64) -> InitPlan {
    let (source_tag, s_used) = spectral::strategy(desc);
    let w = 2.0 * core::f64::consts::PI / grid.length();
    InitPlan {
        omega_min: w,
        omega_max: w,
        alpha,
        s_used,
        source_tag,
    }
}

fn last_component(state: &UzawaState) -> Result<&Component> {
    match state.components.last() {
        Some(c) => Ok(c),
        None => bail!(Sequencing, "no previous correction to analyze"),
    }
}

/// Approach 1: train `u^0` (or the adjoint network giving `u^0 = -v''`), then one
/// correction per further schedule entry, each initialized from the spectrum of
/// the signal prescribed for its phase.
pub fn run_approach1(
    problem: &ProblemSpec,
    schedule: &[PhasePlan],
    opts: &UzawaOptions,
    seed: u64,
) -> Result<UzawaState> {
    if schedule.is_empty() {
        bail!(Config, "the schedule needs at least the initial phase");
    }
    for p in schedule {
        p.spec.validate()?;
        p.train.validate()?;
    }
    let grid = UniformGrid::domain(opts.spectral_grid);
    let norm = ErrorNorm::for_formulation(problem.formulation);
    let mut state = UzawaState::new(problem.formulation);

    for (k, plan) in schedule.iter().enumerate() {
        let phase = Phase::from_index(k);
        let desc = PhaseDescriptor {
            formulation: problem.formulation,
            phase,
        };
        let (tag, _) = spectral::strategy(desc);
        let arts = artifacts_for(problem, &state, tag, &grid)?;
        let (init, curve) = match spectral::init_plan_for_phase(desc, &arts, &grid, opts.alpha) {
            Ok((p, c)) => (p, Some(c)),
            Err(Error::DegenerateSpectrum) => (fallback_plan(desc, &grid, opts.alpha), None),
            Err(e) => return Err(e),
        };
        let net = build_network(&plan.spec, &init, rng::mix(seed, 2 * k as u64))?;
        let role = Role::for_phase(problem.formulation, phase);

        let outcome = {
            let spec = plan.spec;
            let exact = problem.exact;
            let base = &state;
            let mut monitor = |p: &NetworkParams| -> Result<f64> {
                let mut trial = UzawaState::new(base.formulation);
                trial.components = base.components.clone();
                trial.components.push(Component {
                    spec,
                    params: p.clone(),
                    scale: 1.0,
                    role,
                });
                error_report(&trial, exact.as_ref().expect("checked"), norm, opts.monitor_grid)
            };
            let mon: Option<trainer::Monitor<'_>> = if exact.is_some() { Some(&mut monitor) } else { None };
            let u_prev: &dyn Field = if k == 0 { &ZeroField } else { &state };
            trainer::train_phase(problem, net, &plan.spec, u_prev, &plan.train, rng::mix(seed, 2 * k as u64 + 1), mon)?
        };

        if let Some(reason) = outcome.diverged {
            state.failure = Some(alloc::format!("phase {k}: {reason}"));
            state.history.push(PhaseRecord {
                phase,
                plan: init,
                spectrum: curve,
                epochs: outcome.history.len(),
                history: outcome.history,
                final_loss: outcome.final_loss,
                relative_error: None,
            });
            return Ok(state);
        }
        state.components.push(Component {
            spec: plan.spec,
            params: outcome.params,
            scale: 1.0,
            role,
        });
        let relative_error = match &problem.exact {
            Some(e) => Some(error_report(&state, e, norm, opts.report_grid)?),
            None => None,
        };
        state.history.push(PhaseRecord {
            phase,
            plan: init,
            spectrum: curve,
            epochs: outcome.history.len(),
            history: outcome.history,
            final_loss: outcome.final_loss,
            relative_error,
        });
    }
    Ok(state)
}

/// Deep Ritz: a single weak-form energy minimization.
pub fn run_deep_ritz_baseline(
    problem: &ProblemSpec,
    plan: &PhasePlan,
    opts: &UzawaOptions,
    seed: u64,
) -> Result<UzawaState> {
    if problem.formulation != Formulation::Weak {
        bail!(Config, "the Ritz baseline needs the weak formulation");
    }
    run_approach1(problem, core::slice::from_ref(plan), opts, seed)
}
