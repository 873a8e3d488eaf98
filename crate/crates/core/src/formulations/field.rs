use alloc::vec::Vec;

use crate::diffnet::{self, NetworkParams, NetworkSpec, Order};
use crate::error::{bail, Result};
use crate::math;

/// Values of a function and its first two derivatives on a set of points.
/// Vectors above the requested order may be empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldValues {
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub d2u: Vec<f64>,
}

/// Anything that can be evaluated with derivatives on the domain: networks,
/// accumulated iterates and analytic functions.
pub trait Field {
    fn sample(&self, points: &[f64], order: Order) -> Result<FieldValues>;
}

/// The zero function.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl Field for ZeroField {
    fn sample(&self, points: &[f64], _order: Order) -> Result<FieldValues> {
        let z = alloc::vec![0.0; points.len()];
        Ok(FieldValues {
            u: z.clone(),
            du: z.clone(),
            d2u: z,
        })
    }
}

/// Closure returning `[u, u', u'']`.
pub struct FnField<F>(pub F);

impl<F: Fn(f64) -> [f64; 3]> Field for FnField<F> {
    fn sample(&self, points: &[f64], _order: Order) -> Result<FieldValues> {
        let mut out = FieldValues::default();
        for &x in points {
            let [a, b, c] = (self.0)(x);
            out.u.push(a);
            out.du.push(b);
            out.d2u.push(c);
        }
        Ok(out)
    }
}

/// A network output `w_out . phi(x)` viewed as a field.
#[derive(Debug, Clone, Copy)]
pub struct NetworkField<'a> {
    pub spec: &'a NetworkSpec,
    pub params: &'a NetworkParams,
}

impl Field for NetworkField<'_> {
    fn sample(&self, points: &[f64], order: Order) -> Result<FieldValues> {
        let b = diffnet::eval(self.params, self.spec, points, order as usize)?;
        Ok(FieldValues {
            u: b.output,
            du: b.doutput,
            d2u: b.d2output,
        })
    }
}

/// Closed-form exact solutions of the model problems.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ExactSolution {
    Zero,
    /// `sin(omega x)`.
    Sine { omega: f64 },
    /// `(x + 1)/2 - H(x)`, with a unit downward jump at 0 (`H(0) = 1`).
    StepJump,
}

impl ExactSolution {
    /// `[u, u', u'']`; at the jump the one-sided derivatives are returned.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        match *self {
            ExactSolution::Zero => [0.0; 3],
            ExactSolution::Sine { omega } => {
                let (s, c) = math::sin_cos(omega * x);
                [s, omega * c, -omega * omega * s]
            }
            ExactSolution::StepJump => {
                let h = if x >= 0.0 { 1.0 } else { 0.0 };
                [0.5 * (x + 1.0) - h, 0.5, 0.0]
            }
        }
    }

    pub fn has_weak_derivative(&self) -> bool {
        !matches!(self, ExactSolution::StepJump)
    }
}

impl Field for ExactSolution {
    fn sample(&self, points: &[f64], order: Order) -> Result<FieldValues> {
        if order >= Order::First && !self.has_weak_derivative() {
            bail!(Unsupported, "the step solution has no derivative in L2");
        }
        FnField(|x| self.eval(x)).sample(points, order)
    }
}
