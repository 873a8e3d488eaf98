use super::*;
use crate::diffnet::{build_network, Activation, HiddenParam};
use crate::formulations::{FnField, Formulation, ZeroField};
use crate::quadrature::p3_sample;
use crate::quadrature::Partition;
use crate::spectral::InitPlan;
use core::f64::consts::PI;
use rand::Rng;

fn form(h: Vec<f64>, f: Vec<f64>) -> QuadraticForm {
    QuadraticForm { n: f.len(), h, f, q: 0.0 }
}

fn random_spd(n: usize, seed: u64) -> QuadraticForm {
    let mut r = rng::stream(seed);
    let a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    let h = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
    let f = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut flat = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            flat[i * n + j] = h[(i, j)];
        }
    }
    form(flat, f)
}

#[test]
fn ls_identity_system() {
    let mut h = vec![0.0; 9];
    h[0] = 1.0;
    h[4] = 1.0;
    h[8] = 1.0;
    let w = ls_step(&form(h, vec![1.0, 2.0, 3.0]), 0.0).unwrap();
    assert_eq!(w, vec![1.0, 2.0, 3.0]);
}

#[test]
fn ls_regularization_shrinks() {
    let w = ls_step(&form(vec![4.0], vec![8.0]), 1.0).unwrap();
    assert!((w[0] - 1.0).abs() < 1e-15);
    let w = ls_step(&form(vec![4.0], vec![8.0]), 0.0).unwrap();
    assert!((w[0] - 2.0).abs() < 1e-15);
}

#[test]
fn ls_solves_normal_equations() {
    for seed in 0..10 {
        let qf = random_spd(12, seed);
        let w = ls_step(&qf, 0.0).unwrap();
        let res: f64 = qf.gradient(&w).iter().map(|v| v * v).sum::<f64>().sqrt();
        let fnorm: f64 = qf.f.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-8 * fnorm);
    }
}

#[test]
fn scaled_spectrum_is_bounded_by_width() {
    for seed in 0..10 {
        let qf = random_spd(9, 100 + seed);
        let (_, m) = scaled_hessian(&qf);
        assert!((m.trace() - 9.0).abs() < 1e-10);
        let top = m.symmetric_eigen().eigenvalues.max();
        assert!(top <= 9.0 + 1e-10);
    }
}

#[test]
fn dead_generator_is_floored() {
    // second generator identically zero
    let qf = form(vec![2.0, 0.0, 0.0, 0.0], vec![2.0, 0.0]);
    let w = ls_step(&qf, 1e-8).unwrap();
    assert!((w[0] - 1.0).abs() < 1e-6 && w[1] == 0.0);
}

#[test]
fn ls_rejects_non_finite() {
    assert!(ls_step(&form(vec![f64::NAN], vec![1.0]), 0.0).is_err());
}

#[test]
fn adam_zero_gradient_is_inert() {
    let mut p = vec![0.3, -1.2];
    let mut s = AdamState::new(2);
    for _ in 0..20 {
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1, (0.9, 0.999), 1e-8).unwrap();
    }
    assert_eq!(p, vec![0.3, -1.2]);
}

#[test]
fn adam_first_step_is_about_lr() {
    let mut p = vec![0.0];
    let mut s = AdamState::new(1);
    adam_step(&mut p, &[1.0], &mut s, 0.01, (0.9, 0.999), 1e-8).unwrap();
    assert!(p[0] <= -0.009 && p[0] >= -0.01);
}

#[test]
fn adam_matches_reference_trace() {
    let n = 4;
    let mut r = rng::stream(5);
    let trace: Vec<Vec<f64>> = (0..100).map(|_| (0..n).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let mut p = vec![0.5; n];
    let mut s = AdamState::new(n);
    for g in &trace {
        adam_step(&mut p, g, &mut s, 1e-3, (0.9, 0.999), 1e-8).unwrap();
    }
    // textbook form with explicit powers
    let mut q = vec![0.5; n];
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    for (t, g) in trace.iter().enumerate() {
        let t = (t + 1) as i32;
        for i in 0..n {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            let mh = m[i] / (1.0 - 0.9f64.powi(t));
            let vh = v[i] / (1.0 - 0.999f64.powi(t));
            q[i] -= 1e-3 * mh / (vh.sqrt() + 1e-8);
        }
    }
    for i in 0..n {
        assert!((p[i] - q[i]).abs() < 1e-12);
    }
}

#[test]
fn adam_rejects_non_finite_gradient() {
    let mut s = AdamState::new(1);
    assert!(adam_step(&mut [0.0], &[f64::INFINITY], &mut s, 0.1, (0.9, 0.999), 1e-8).is_err());
}

fn setup(formulation: Formulation, depth: usize, act: Activation) -> (ProblemSpec, NetworkSpec, NetworkParams) {
    let problem = if formulation == Formulation::UltraWeak {
        ProblemSpec::dirac_prime()
    } else {
        ProblemSpec::sine(formulation, 2.0 * PI)
    };
    let spec = NetworkSpec::deep_fourier(4, depth, act);
    let mut p = build_network(&spec, &InitPlan::with_band(1.0, 6.0), 3).unwrap();
    p.w_out = vec![0.4, -0.3, 0.2, 0.1];
    (problem, spec, p)
}

fn frozen(x: f64) -> [f64; 3] {
    [0.3 * (PI * x).sin(), 0.3 * PI * (PI * x).cos(), -0.3 * PI * PI * (PI * x).sin()]
}

#[test]
fn loss_gradient_matches_finite_differences() {
    for formulation in [Formulation::Weak, Formulation::Strong, Formulation::UltraWeak] {
        let (problem, spec, p) = setup(formulation, 2, Activation::Tanh);
        let s = p3_sample(&Partition::domain(40).unwrap(), 2);
        let data = NodeData::gather(&problem, &FnField(frozen), &s.nodes).unwrap();
        let (l0, g) = loss_and_gradient(&problem, &data, &p, &spec, &s, true).unwrap();
        assert!((l0 - loss(&problem, &data, &p, &spec, &s).unwrap()).abs() < 1e-12 * l0.abs().max(1.0));
        let nh = spec.hidden_len();
        let mut params: Vec<HiddenParam> = HiddenParam::all(&spec);
        params.extend((0..4).map(HiddenParam::OutputWeight));
        for (idx, par) in params.iter().enumerate() {
            let h = 1e-3;
            let shift = |d: f64| {
                let mut q = p.clone();
                if idx < nh {
                    let mut f = q.hidden_flat();
                    f[idx] += d;
                    q.set_hidden_flat(&f);
                } else {
                    q.w_out[idx - nh] += d;
                }
                loss(&problem, &data, &q, &spec, &s).unwrap()
            };
            let fd = (8.0 * (shift(h) - shift(-h)) - (shift(2.0 * h) - shift(-2.0 * h))) / (12.0 * h);
            assert!(
                (fd - g[idx]).abs() <= 1e-5 * g[idx].abs().max(1e-2),
                "{formulation:?} {par:?}: fd {fd} vs {}",
                g[idx]
            );
        }
    }
}

#[test]
fn ls_step_does_not_increase_loss() {
    for formulation in [Formulation::Weak, Formulation::Strong, Formulation::UltraWeak] {
        let (problem, spec, mut p) = setup(formulation, 1, Activation::Tanh);
        let s = p3_sample(&Partition::domain(300).unwrap(), 4);
        let data = NodeData::gather(&problem, &ZeroField, &s.nodes).unwrap();
        let before = loss(&problem, &data, &p, &spec, &s).unwrap();
        let qf = assemble(&problem, &data, &p, &spec, &s).unwrap();
        p.w_out = ls_step(&qf, 0.0).unwrap();
        let after = loss(&problem, &data, &p, &spec, &s).unwrap();
        assert!(after <= before + 1e-12, "{formulation:?}: {before} -> {after}");
        let g: f64 = qf.gradient(&p.w_out).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(g < 1e-8, "{formulation:?}: stationarity {g}");
    }
}

#[test]
fn zero_epochs_leave_parameters() {
    let (problem, spec, p) = setup(Formulation::Weak, 1, Activation::Tanh);
    let out = train_phase(&problem, p.clone(), &spec, &ZeroField, &TrainConfig::new(0, 1e-3, 300), 1, None).unwrap();
    assert_eq!(out.params, p);
    assert!(out.history.is_empty());
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let problem = ProblemSpec::sine(Formulation::Weak, PI);
    let spec = NetworkSpec::shallow_fourier(8);
    let p = build_network(&spec, &InitPlan::with_band(1.0, 10.0), 9).unwrap();
    let mut cfg = TrainConfig::new(40, 1e-2, 600);
    cfg.eval_points = 2001;
    let a = train_phase(&problem, p.clone(), &spec, &ZeroField, &cfg, 4, None).unwrap();
    let b = train_phase(&problem, p, &spec, &ZeroField, &cfg, 4, None).unwrap();
    assert_eq!(a.params, b.params);
    assert!(a.diverged.is_none());
    // Ritz minimum is -|u*|^2_{H1} / 2 = -pi^2 / 2
    assert!(a.final_loss < -0.99 * PI * PI / 2.0, "{}", a.final_loss);
}

#[test]
fn pure_adam_moves_output_weights() {
    let problem = ProblemSpec::sine(Formulation::Weak, PI);
    let spec = NetworkSpec::shallow_fourier(6);
    let p = build_network(&spec, &InitPlan::with_band(1.0, 4.0), 2).unwrap();
    let mut cfg = TrainConfig::new(30, 1e-2, 300);
    cfg.optimizer = Optimizer::Adam;
    cfg.eval_points = 1001;
    let mut calls = 0;
    let mut mon = |_: &NetworkParams| -> Result<f64> {
        calls += 1;
        Ok(0.0)
    };
    let out = train_phase(&problem, p, &spec, &ZeroField, &cfg, 1, Some(&mut mon)).unwrap();
    assert!(out.params.w_out.iter().any(|w| *w != 0.0));
    assert!(out.history.first().unwrap().loss > out.history.last().unwrap().loss);
    assert_eq!(calls, 3);
}

fn bump_source(x: f64) -> f64 {
    // -phi'' for phi = (1 - x^2) sin(pi x)
    let (s, c) = (PI * x).sin_cos();
    2.0 * s + 4.0 * PI * x * c + (1.0 - x * x) * PI * PI * s
}

#[test]
fn weak_gradient_variance_matches_vanilla_formula() {
    let problem = ProblemSpec::new(Formulation::Weak, crate::formulations::Source::Custom(bump_source), None).unwrap();
    let spec = NetworkSpec::shallow_fourier(1);
    let params = NetworkParams {
        kappa: vec![PI],
        w_spatial: vec![1.0],
        b_spatial: vec![0.0],
        hidden: vec![],
        w_out: vec![0.0],
    };
    let n = 64;
    let st = gradient_variance(&problem, &params, &spec, &ZeroField, RuleTag::Vanilla, n, 4000, 5).unwrap();
    // Var = (4 / N) Var_U[f phi] for U uniform on (-1, 1).
    let g = |x: f64| bump_source(x) * (1.0 - x * x) * (PI * x).sin();
    let m = 20_000;
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..m {
        let x = -1.0 + (i as f64 + 0.5) * 2.0 / m as f64;
        m1 += g(x) / m as f64;
        m2 += g(x) * g(x) / m as f64;
    }
    let exact = 4.0 / n as f64 * (m2 - m1 * m1);
    assert!((st.variance / exact - 1.0).abs() < 0.1, "{} vs {exact}", st.variance);
    assert!(st.mean_loss.abs() < 1e-14);
}
