//! Experiment roster, default schedules and the artifact-producing driver.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use runn_core::diffnet::{Activation, Cutoff, NetworkSpec};
use runn_core::formulations::{ExactSolution, ProblemSpec, Source};
use runn_core::linlab::{self, Approach, LinearProblem, PerturbationMode};
use runn_core::quadrature::{self, RuleTag};
use runn_core::trainer::{Optimizer, TrainConfig};
use runn_core::uzawa::{self, PhasePlan, UzawaOptions, UzawaState};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, LabeledSweepRow};
use crate::reference::{self, ReferenceReport};
use crate::{state, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    WeakSmoothAdam,
    WeakSmoothLsadam,
    WeakHighfreq,
    UltraweakDiracPrime,
    LinlabSweep,
    QuadratureVariance,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::WeakSmoothAdam => "weak_smooth_adam",
            Experiment::WeakSmoothLsadam => "weak_smooth_lsadam",
            Experiment::WeakHighfreq => "weak_highfreq",
            Experiment::UltraweakDiracPrime => "ultraweak_dirac_prime",
            Experiment::LinlabSweep => "linlab_sweep",
            Experiment::QuadratureVariance => "quadrature_variance",
        }
    }

    /// Model problem solved by the training experiments.
    pub fn problem(self) -> Option<ProblemSpec> {
        use runn_core::formulations::Formulation::Weak;
        match self {
            Experiment::WeakSmoothAdam | Experiment::WeakSmoothLsadam => Some(ProblemSpec::sine(Weak, PI)),
            Experiment::WeakHighfreq => Some(ProblemSpec::sine(Weak, 40.0 * PI)),
            Experiment::UltraweakDiracPrime => Some(ProblemSpec::dirac_prime()),
            _ => None,
        }
    }

    /// Published training schedule for the experiment.
    pub fn default_schedule(self) -> Vec<PhasePlan> {
        let plan = |spec: NetworkSpec, epochs: usize, lr: f64, n: usize, opt: Optimizer| {
            let mut train = TrainConfig::new(epochs, lr, n);
            train.optimizer = opt;
            PhasePlan { spec, train }
        };
        let shallow = NetworkSpec::shallow_fourier(30);
        match self {
            Experiment::WeakSmoothAdam => [(1000, 9e-3), (2000, 1e-4), (3000, 1e-5)]
                .iter()
                .map(|&(e, lr)| plan(shallow, e, lr, 9000, Optimizer::Adam))
                .collect(),
            Experiment::WeakSmoothLsadam => [(1000, 1e-2), (1000, 1e-3), (1000, 1e-3)]
                .iter()
                .map(|&(e, lr)| plan(shallow, e, lr, 9000, Optimizer::LsAdam))
                .collect(),
            Experiment::WeakHighfreq => {
                let deep = NetworkSpec::deep_fourier(30, 2, Activation::Tanh);
                [300, 1000, 1000]
                    .iter()
                    .map(|&e| plan(deep, e, 1e-3, 9000, Optimizer::LsAdam))
                    .collect()
            }
            Experiment::UltraweakDiracPrime => {
                let adjoint = NetworkSpec {
                    width: 30,
                    depth: 1,
                    fourier: false,
                    activation: Activation::ReluCubed,
                    cutoff: Cutoff::OneMinusXSquared,
                };
                let corr = NetworkSpec::deep_fourier(30, 2, Activation::ReluCubed);
                vec![
                    plan(adjoint, 100, 8e-5, 3000, Optimizer::LsAdam),
                    plan(corr, 2500, 8e-5, 4500, Optimizer::LsAdam),
                    plan(corr, 2500, 8e-5, 6000, Optimizer::LsAdam),
                ]
            }
            Experiment::LinlabSweep | Experiment::QuadratureVariance => Vec::new(),
        }
    }
}

/// Per-phase changes to the default schedule. Absent fields keep the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Optimizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Keyed by phase index (0 is the initial phase).
    #[serde(default)]
    pub overrides: BTreeMap<usize, PhaseOverride>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Keep only the first `phases` phases of the schedule.
    #[serde(default)]
    pub phases: Option<usize>,
}

fn default_output() -> PathBuf {
    PathBuf::from("runn-out")
}

fn default_alpha() -> f64 {
    runn_core::spectral::DEFAULT_ALPHA
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            experiment,
            seed,
            output_dir: output_dir.into(),
            overrides: BTreeMap::new(),
            alpha: default_alpha(),
            phases: None,
        }
    }

    /// Default schedule with overrides applied.
    pub fn schedule(&self) -> Result<Vec<PhasePlan>, Error> {
        let mut s = self.experiment.default_schedule();
        if let Some(n) = self.phases {
            if n == 0 || n > s.len() {
                return Err(Error::Usage(format!("phases must lie in 1..={}", s.len())));
            }
            s.truncate(n);
        }
        for (&k, o) in &self.overrides {
            let Some(p) = s.get_mut(k) else {
                return Err(Error::Usage(format!("override for phase {k}, which is not scheduled")));
            };
            if let Some(v) = o.epochs {
                p.train.epochs = v;
            }
            if let Some(v) = o.learning_rate {
                p.train.learning_rate = v;
            }
            if let Some(v) = o.n_points {
                p.train.n_points = v;
            }
            if let Some(v) = o.lambda {
                p.train.lambda = v;
            }
            if let Some(v) = o.width {
                p.spec.width = v;
            }
            if let Some(v) = o.optimizer {
                p.train.optimizer = v;
            }
            if let Some(v) = o.rule {
                p.train.rule = v;
            }
            if let Some(v) = o.monitor_every {
                p.train.monitor_every = v;
            }
        }
        for (k, p) in s.iter().enumerate() {
            p.spec.validate().map_err(|e| Error::Usage(format!("phase {k}: {e}")))?;
            p.train.validate().map_err(|e| Error::Usage(format!("phase {k}: {e}")))?;
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Usage(format!("alpha must lie in (0, 0.5), got {}", self.alpha)));
        }
        self.schedule().map(|_| ())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseSummary {
    pub phase: usize,
    pub network_seed: u64,
    pub train_seed: u64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub s: i32,
    pub source: runn_core::spectral::SourceTag,
    pub epochs: usize,
    pub final_loss: f64,
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub schedule: Vec<PhasePlan>,
    pub phases: Vec<PhaseSummary>,
    pub failure: Option<String>,
    pub reference: Option<ReferenceReport>,
    pub jump: Option<f64>,
    pub variance_slopes: BTreeMap<String, Option<f64>>,
    pub files: Vec<String>,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub state: Option<UzawaState>,
    pub failure: Option<String>,
}

/// `u(-h) - u(h)` of an iterate, `h = 1e-3`.
pub fn jump_at_origin(state: &UzawaState) -> Result<f64, Error> {
    let v = uzawa::evaluate_solution(state, &[-1e-3, 1e-3], false)?.u;
    Ok(v[0] - v[1])
}

/// Runs the configured experiment and writes its artifacts to `output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, Error> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let mut manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        schedule: cfg.schedule()?,
        phases: Vec::new(),
        failure: None,
        reference: None,
        jump: None,
        variance_slopes: BTreeMap::new(),
        files: Vec::new(),
    };
    let mut report = RunReport {
        dir: dir.clone(),
        state: None,
        failure: None,
    };
    match cfg.experiment {
        Experiment::LinlabSweep => {
            let rows = linlab_sweep(cfg.seed)?;
            artifacts::write_sweep(&dir.join("linlab_sweep.csv"), &rows)?;
            manifest.files.push("linlab_sweep.csv".into());
        }
        Experiment::QuadratureVariance => {
            let tables = variance_tables(cfg.seed)?;
            for t in &tables {
                let name = t.rows.first().map_or("empty", |r| r.rule.name());
                manifest.variance_slopes.insert(name.to_string(), t.slope);
            }
            artifacts::write_variance(&dir.join("quadrature_variance.csv"), &tables)?;
            manifest.files.push("quadrature_variance.csv".into());
        }
        exp => {
            let problem = exp.problem().expect("training experiment");
            let opts = UzawaOptions {
                alpha: cfg.alpha,
                ..Default::default()
            };
            let state = uzawa::run_approach1(&problem, &manifest.schedule, &opts, cfg.seed)?;
            write_training_artifacts(&dir, &problem, &state, &mut manifest)?;
            manifest.phases = state
                .history
                .iter()
                .enumerate()
                .map(|(k, h)| PhaseSummary {
                    phase: k,
                    network_seed: runn_core::rng::mix(cfg.seed, 2 * k as u64),
                    train_seed: runn_core::rng::mix(cfg.seed, 2 * k as u64 + 1),
                    omega_min: h.plan.omega_min,
                    omega_max: h.plan.omega_max,
                    s: h.plan.s_used,
                    source: h.plan.source_tag,
                    epochs: h.epochs,
                    final_loss: h.final_loss,
                    relative_error: h.relative_error,
                })
                .collect();
            if let Source::Sine { amplitude, omega } = problem.source {
                manifest.reference = Some(reference::reference_check(
                    |x| amplitude * (omega * x).sin(),
                    |x| (omega * x).sin(),
                    100_000,
                ));
            }
            if matches!(problem.exact, Some(ExactSolution::StepJump)) && !state.components.is_empty() {
                manifest.jump = Some(jump_at_origin(&state)?);
            }
            manifest.failure = state.failure.clone();
            report.failure = state.failure.clone();
            report.state = Some(state);
        }
    }
    manifest.files.push("manifest.json".into());
    artifacts::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(report)
}

fn write_training_artifacts(
    dir: &Path,
    problem: &ProblemSpec,
    state: &UzawaState,
    manifest: &mut Manifest,
) -> Result<(), Error> {
    artifacts::write_convergence(&dir.join("convergence.csv"), state)?;
    manifest.files.push("convergence.csv".into());
    for (k, h) in state.history.iter().enumerate() {
        let name = format!("spectrum_{k}.csv");
        artifacts::write_spectrum(&dir.join(&name), h.spectrum.as_ref())?;
        manifest.files.push(name);
    }
    artifacts::write_solution(&dir.join("solution.csv"), state, problem.exact.as_ref())?;
    manifest.files.push("solution.csv".into());
    state::save_state(state, &dir.join("state"))?;
    manifest.files.push("state/".into());
    Ok(())
}

/// Outer iterations per sweep run.
pub const SWEEP_ITERS: usize = 2000;

/// Fractions of the tolerance bound covered by the sweep.
pub const SWEEP_FRACTIONS: [f64; 6] = [0.0, 0.25, 0.5, 0.75, 0.9, 1.1];

/// Both inexact schemes and both perturbation modes on a few random problems
/// (plus `diag(1, 2)`), at the optimal step.
pub fn linlab_sweep(seed: u64) -> Result<Vec<LabeledSweepRow>, Error> {
    let mut problems = vec![LinearProblem::diagonal(&[1.0, 2.0], &[1.0, 1.0])?];
    for i in 0..4 {
        problems.push(linlab::random_problem(6, 1.2, runn_core::rng::mix(seed, i))?);
    }
    let mut rows = Vec::new();
    for (pi, p) in problems.iter().enumerate() {
        let (rho, _) = linlab::optimal_rho(p);
        for (approach, a) in [(Approach::One, 1u8), (Approach::Two, 2u8)] {
            for (mode, m) in [(PerturbationMode::WorstCase, "worst_case"), (PerturbationMode::RandomSphere, "random_sphere")] {
                let sweep = linlab::epsilon_sweep(p, rho, approach, mode, &SWEEP_FRACTIONS, SWEEP_ITERS, runn_core::rng::mix(seed, 100 + pi as u64))?;
                rows.extend(sweep.into_iter().zip(SWEEP_FRACTIONS).map(|(row, fraction)| LabeledSweepRow {
                    problem: pi,
                    approach: a,
                    mode: m,
                    fraction,
                    row,
                }));
            }
        }
    }
    Ok(rows)
}

/// Elements of the variance probe.
pub const VARIANCE_ELEMENTS: [usize; 5] = [4, 8, 16, 32, 64];

/// Estimator variance of `exp(x)` for the P3 rule and vanilla Monte Carlo.
pub fn variance_tables(seed: u64) -> Result<Vec<quadrature::VarianceTable>, Error> {
    [RuleTag::P3, RuleTag::Vanilla]
        .iter()
        .map(|&rule| Ok(quadrature::variance_probe(f64::exp, rule, &VARIANCE_ELEMENTS, 2000, seed)?))
        .collect()
}
