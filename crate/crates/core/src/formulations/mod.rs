//! Correction losses for `-u'' = f` on (-1, 1) with homogeneous Dirichlet data.
//!
//! With the sign convention `B u = -u''`, the loss minimized by a candidate `r`
//! given the frozen iterate `u` is
//!
//! | formulation | integrand                       | point term |
//! |-------------|---------------------------------|------------|
//! | weak        | `r'^2/2 + u' r' - f r`          |            |
//! | ultra-weak  | `r''^2/2 + u r''`               | `+r'(0)`   |
//! | strong      | `(r'' + u'' + f)^2 / 2`         |            |
//!
//! The ultra-weak point term is `-<delta', r>` for the source `delta'`. The
//! initial phase uses the same losses with `u = 0` (Ritz, adjoint Ritz and
//! least-squares respectively). Every loss is quadratic in the output weights:
//! `L(w) = w^T H w / 2 - f^T w + q`.

mod field;

pub use field::{ExactSolution, Field, FieldValues, FnField, NetworkField, ZeroField};

use alloc::vec;
use alloc::vec::Vec;

use crate::diffnet::{EvalBatch, Order};
use crate::error::{bail, Result};
use crate::quadrature::QuadratureSample;
use crate::spectral::{self, UniformGrid};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Formulation {
    Strong,
    Weak,
    UltraWeak,
}

impl Formulation {
    /// Highest derivative of the candidate that enters the loss.
    pub fn candidate_order(self) -> Order {
        match self {
            Formulation::Weak => Order::First,
            Formulation::Strong | Formulation::UltraWeak => Order::Second,
        }
    }

    /// Derivative of the frozen iterate that enters the loss.
    pub fn frozen_order(self) -> Order {
        match self {
            Formulation::Weak => Order::First,
            Formulation::Strong => Order::Second,
            Formulation::UltraWeak => Order::Value,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Formulation::Strong => "strong",
            Formulation::Weak => "weak",
            Formulation::UltraWeak => "ultraweak",
        }
    }
}

/// Right-hand side of `-u'' = f`.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Source {
    Zero,
    /// `amplitude * sin(omega x)`.
    Sine { amplitude: f64, omega: f64 },
    /// The distribution `delta'` at the origin, `<delta', v> = -v'(0)`.
    DiracPrime,
    /// Arbitrary pointwise source.
    #[cfg_attr(feature = "serde", serde(skip))]
    Custom(fn(f64) -> f64),
}

impl Source {
    /// Pointwise value; `None` for distributions.
    pub fn value(&self, x: f64) -> Option<f64> {
        match *self {
            Source::Zero => Some(0.0),
            Source::Sine { amplitude, omega } => Some(amplitude * math::sin(omega * x)),
            Source::DiracPrime => None,
            Source::Custom(f) => Some(f(x)),
        }
    }

    pub fn is_distribution(&self) -> bool {
        matches!(self, Source::DiracPrime)
    }
}

/// A model problem: formulation, source and (optionally) the exact solution.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProblemSpec {
    pub formulation: Formulation,
    pub source: Source,
    pub exact: Option<ExactSolution>,
}

impl ProblemSpec {
    pub fn new(formulation: Formulation, source: Source, exact: Option<ExactSolution>) -> Result<Self> {
        if source.is_distribution() && formulation != Formulation::UltraWeak {
            bail!(Config, "a delta' source requires the ultra-weak formulation");
        }
        Ok(Self {
            formulation,
            source,
            exact,
        })
    }

    /// `f = omega^2 sin(omega x)` with exact solution `sin(omega x)`; `omega` must
    /// be a multiple of pi for the boundary conditions to hold.
    pub fn sine(formulation: Formulation, omega: f64) -> Self {
        Self {
            formulation,
            source: Source::Sine {
                amplitude: omega * omega,
                omega,
            },
            exact: Some(ExactSolution::Sine { omega }),
        }
    }

    /// `-u'' = delta'` with solution `(x + 1)/2 - H(x)`.
    pub fn dirac_prime() -> Self {
        Self {
            formulation: Formulation::UltraWeak,
            source: Source::DiracPrime,
            exact: Some(ExactSolution::StepJump),
        }
    }

    fn source_at(&self, x: f64) -> f64 {
        self.source.value(x).unwrap_or(0.0)
    }
}

/// `w^T H w / 2 - f^T w + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub n: usize,
    /// Row-major `n x n`.
    pub h: Vec<f64>,
    pub f: Vec<f64>,
    pub q: f64,
}

impl QuadraticForm {
    pub fn value(&self, w: &[f64]) -> f64 {
        let n = self.n;
        let mut quad = 0.0;
        for i in 0..n {
            let row = &self.h[i * n..(i + 1) * n];
            quad += w[i] * row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        }
        0.5 * quad - self.f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + self.q
    }

    /// `H w - f`.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let row = &self.h[i * n..(i + 1) * n];
                row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - self.f[i]
            })
            .collect()
    }
}

/// Source and frozen-iterate values at the quadrature nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeData {
    pub source: Vec<f64>,
    /// The derivative of the frozen iterate selected by
    /// [`Formulation::frozen_order`].
    pub frozen: Vec<f64>,
}

impl NodeData {
    pub fn gather(problem: &ProblemSpec, u_prev: &dyn Field, nodes: &[f64]) -> Result<Self> {
        let order = problem.formulation.frozen_order();
        let v = u_prev.sample(nodes, order)?;
        let frozen = match order {
            Order::Value => v.u,
            Order::First => v.du,
            Order::Second => v.d2u,
        };
        Ok(Self {
            source: nodes.iter().map(|&x| problem.source_at(x)).collect(),
            frozen,
        })
    }
}

/// Pointwise loss integrand and its partials with respect to `(r, r', r'')`.
#[inline]
pub fn integrand(formulation: Formulation, f: f64, frozen: f64, r: [f64; 3]) -> (f64, [f64; 3]) {
    match formulation {
        Formulation::Weak => (
            0.5 * r[1] * r[1] + frozen * r[1] - f * r[0],
            [-f, r[1] + frozen, 0.0],
        ),
        // b(u, r) = (u, -r'')
        Formulation::UltraWeak => (
            0.5 * r[2] * r[2] - frozen * r[2] - f * r[0],
            [-f, 0.0, r[2] - frozen],
        ),
        Formulation::Strong => {
            let res = r[2] + frozen + f;
            (0.5 * res * res, [0.0, 0.0, res])
        }
    }
}

/// Coefficient of `r'(0)` in the loss: 1 for the `delta'` source, else 0.
pub fn point_term_weight(problem: &ProblemSpec) -> f64 {
    if problem.source.is_distribution() {
        1.0
    } else {
        0.0
    }
}

/// Quadratic form of the loss in the output weights for fixed generators.
///
/// `dphi_origin` holds the generator derivatives at `x = 0` and is required for
/// the `delta'` source; the duality term is added once, outside the quadrature.
pub fn assemble_quadratic(
    problem: &ProblemSpec,
    data: &NodeData,
    gens: &EvalBatch,
    dphi_origin: Option<&[f64]>,
    sample: &QuadratureSample,
) -> Result<QuadraticForm> {
    let form = problem.formulation;
    let n = gens.width;
    let m = sample.len();
    if gens.len() != m || data.source.len() != m || data.frozen.len() != m {
        bail!(Contract, "generators, node data and sample are not aligned");
    }
    let ord = form.candidate_order();
    let deriv = match ord {
        Order::First => &gens.dphi,
        _ => &gens.d2phi,
    };
    if deriv.len() != m * n || (form == Formulation::Weak && gens.phi.len() != m * n) {
        bail!(Contract, "generators lack the derivative order the {} loss needs", form.name());
    }

    let mut h = vec![0.0; n * n];
    let mut f = vec![0.0; n];
    let mut q = 0.0;
    for i in 0..m {
        let w = sample.weights[i];
        let d = &deriv[i * n..(i + 1) * n];
        for a in 0..n {
            let wa = w * d[a];
            let row = &mut h[a * n..(a + 1) * n];
            for b in a..n {
                row[b] += wa * d[b];
            }
        }
        let (src, frz) = (data.source[i], data.frozen[i]);
        match form {
            Formulation::Weak => {
                let p = &gens.phi[i * n..(i + 1) * n];
                for a in 0..n {
                    f[a] += w * (src * p[a] - frz * d[a]);
                }
            }
            Formulation::UltraWeak => {
                let p = &gens.phi[i * n..(i + 1) * n];
                for a in 0..n {
                    f[a] += w * (src * p[a] + frz * d[a]);
                }
            }
            Formulation::Strong => {
                let res = src + frz;
                for a in 0..n {
                    f[a] -= w * res * d[a];
                }
                q += 0.5 * w * res * res;
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            h[a * n + b] = h[b * n + a];
        }
    }
    let pw = point_term_weight(problem);
    if pw != 0.0 {
        let Some(d0) = dphi_origin else {
            bail!(Contract, "the delta' source needs generator derivatives at the origin");
        };
        for a in 0..n {
            f[a] -= pw * d0[a];
        }
    }
    Ok(QuadraticForm { n, h, f, q })
}

/// Discretized loss of a candidate given its values at the nodes (`r[k][i]` is
/// the order-`k` derivative at node `i`) and its slope at the origin.
pub fn loss_value(
    problem: &ProblemSpec,
    data: &NodeData,
    candidate: &[Vec<f64>; 3],
    slope_at_origin: f64,
    sample: &QuadratureSample,
) -> Result<f64> {
    let m = sample.len();
    let ord = problem.formulation.candidate_order() as usize;
    if (0..=ord).any(|k| candidate[k].len() != m) {
        bail!(Contract, "candidate values are not aligned with the sample");
    }
    let mut total = 0.0;
    for i in 0..m {
        let r = [
            candidate[0][i],
            candidate[1].get(i).copied().unwrap_or(0.0),
            candidate[2].get(i).copied().unwrap_or(0.0),
        ];
        total += sample.weights[i] * integrand(problem.formulation, data.source[i], data.frozen[i], r).0;
    }
    Ok(total + point_term_weight(problem) * slope_at_origin)
}

/// `<delta', r> = -r'(0)`.
pub fn duality_pairing_delta_prime(candidate: &dyn Field) -> Result<f64> {
    let v = candidate.sample(&[0.0], Order::First)?;
    Ok(-v.du[0])
}

/// `f + u''` on the grid. For the ultra-weak formulation `u''` is a centered
/// second difference of the grid values, and for the `delta'` source the grid
/// dipole proxy stands in for `f`.
pub fn strong_residual_grid(problem: &ProblemSpec, u: &dyn Field, grid: &UniformGrid) -> Result<Vec<f64>> {
    let pts = grid.points();
    if problem.formulation == Formulation::UltraWeak {
        // The iterate is only a value field here.
        let vals = u.sample(pts, Order::Value)?.u;
        let mut res = if problem.source.is_distribution() {
            spectral::dirac_prime_proxy(grid)?
        } else {
            pts.iter().map(|&x| problem.source_at(x)).collect()
        };
        let d2 = second_difference(&vals, grid.spacing());
        res.iter_mut().zip(&d2).for_each(|(r, d)| *r += d);
        Ok(res)
    } else {
        let v = u.sample(pts, Order::Second)?;
        Ok(pts
            .iter()
            .zip(&v.d2u)
            .map(|(&x, d2)| problem.source_at(x) + d2)
            .collect())
    }
}

/// Centered second difference; end values are copied from their neighbours.
pub fn second_difference(vals: &[f64], h: f64) -> Vec<f64> {
    let m = vals.len();
    let mut out = vec![0.0; m];
    if m < 3 {
        return out;
    }
    for i in 1..m - 1 {
        out[i] = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (h * h);
    }
    out[0] = out[1];
    out[m - 1] = out[m - 2];
    out
}
