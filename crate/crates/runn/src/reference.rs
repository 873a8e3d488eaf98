//! Second-order finite differences for `-u'' = f`, `u(-1) = u(1) = 0`.

/// Grid nodes (including both ends) and nodal values of the discrete solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSolution {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

/// Solves the centered three-point scheme on `cells` uniform cells with the
/// Thomas algorithm.
pub fn solve_poisson(f: impl Fn(f64) -> f64, cells: usize) -> FdSolution {
    assert!(cells >= 2, "need at least two cells");
    let (a, b) = runn_core::DOMAIN;
    let h = (b - a) / cells as f64;
    let x: Vec<f64> = (0..=cells).map(|i| a + h * i as f64).collect();
    let m = cells - 1;
    // tridiag(-1, 2, -1) u = h^2 f on the interior
    let mut c = vec![0.0; m];
    let mut d: Vec<f64> = (1..=m).map(|i| h * h * f(x[i])).collect();
    let mut beta = 2.0;
    c[0] = -1.0 / beta;
    d[0] /= beta;
    for i in 1..m {
        beta = 2.0 + c[i - 1];
        c[i] = -1.0 / beta;
        d[i] = (d[i] + d[i - 1]) / beta;
    }
    for i in (0..m - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    let mut u = vec![0.0; cells + 1];
    u[1..=m].copy_from_slice(&d);
    FdSolution { x, u }
}

/// Discrepancy between the finite-difference solution and a closed form.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ReferenceReport {
    pub cells: usize,
    pub max_error: f64,
    pub l2_error: f64,
}

/// Solves on `cells` cells and compares against `exact` at the nodes.
pub fn reference_check(f: impl Fn(f64) -> f64, exact: impl Fn(f64) -> f64, cells: usize) -> ReferenceReport {
    let sol = solve_poisson(f, cells);
    let h = 2.0 / cells as f64;
    let mut max_error: f64 = 0.0;
    let mut l2 = 0.0;
    for (i, (&x, &u)) in sol.x.iter().zip(&sol.u).enumerate() {
        let e = (u - exact(x)).abs();
        max_error = max_error.max(e);
        let w = if i == 0 || i == cells { 0.5 * h } else { h };
        l2 += w * e * e;
    }
    ReferenceReport {
        cells,
        max_error,
        l2_error: l2.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quadratic_is_exact() {
        // -u'' = 2 with u = 1 - x^2
        let r = reference_check(|_| 2.0, |x| 1.0 - x * x, 50);
        assert!(r.max_error < 1e-12);
    }

    #[test]
    fn zero_source() {
        let s = solve_poisson(|_| 0.0, 1000);
        assert!(s.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn smooth_sine() {
        let r = reference_check(|x| PI * PI * (PI * x).sin(), |x| (PI * x).sin(), 100_000);
        assert!(r.max_error < 1e-6, "{r:?}");
    }

    #[test]
    fn oscillatory_sine() {
        let w = 40.0 * PI;
        let r = reference_check(|x| w * w * (w * x).sin(), |x| (w * x).sin(), 100_000);
        assert!(r.max_error < 1e-3, "{r:?}");
    }
}
