use crate::math;

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Tanh,
    /// `max(0, z)^3`, twice continuously differentiable.
    ReluCubed,
}

impl Activation {
    /// `(sigma, sigma', sigma'')` at `z`.
    #[inline]
    pub fn eval(self, z: f64) -> [f64; 3] {
        let d = self.derivs(z);
        [d[0], d[1], d[2]]
    }

    /// `(sigma, sigma', sigma'', sigma''')` at `z`. The third derivative of the
    /// cubic ReLU jumps at zero; the right limit is never used there since all
    /// terms it multiplies vanish with `z`.
    #[inline]
    pub fn derivs(self, z: f64) -> [f64; 4] {
        match self {
            Activation::Tanh => {
                let t = math::tanh(z);
                let s = 1.0 - t * t;
                [t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)]
            }
            Activation::ReluCubed => {
                if z > 0.0 {
                    [z * z * z, 3.0 * z * z, 6.0 * z, 6.0]
                } else {
                    [0.0; 4]
                }
            }
        }
    }
}
