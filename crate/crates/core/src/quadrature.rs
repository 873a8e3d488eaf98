//! Unbiased stochastic quadrature on an interval.
//!
//! Two rules: vanilla Monte Carlo with i.i.d. uniform nodes, and the stratified
//! three-node rule `P3`. On the reference element (-1, 1), `P3` draws `t` with
//! density `3 t^2` on (0, 1) and uses
//!
//! ```text
//! int L ~= (L(t) - 2 L(0) + L(-t)) / (3 t^2) + 2 L(0)
//! ```
//!
//! which integrates every cubic exactly. The middle weight is negative when
//! `t < 1/sqrt(3)`, so weights are stored signed.

use alloc::vec::Vec;
use rand::Rng;

use crate::error::{bail, Result};
use crate::{math, rng};

/// Uniform partition of `[a, b]` into `elements` subintervals.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Partition {
    pub a: f64,
    pub b: f64,
    pub elements: usize,
}

impl Partition {
    pub fn new(a: f64, b: f64, elements: usize) -> Result<Self> {
        if elements == 0 {
            bail!(Config, "partition needs at least one element");
        }
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            bail!(Config, "invalid interval [{a}, {b}]");
        }
        Ok(Self { a, b, elements })
    }

    /// Partition of the computational domain.
    pub fn domain(elements: usize) -> Result<Self> {
        Self::new(crate::DOMAIN.0, crate::DOMAIN.1, elements)
    }

    pub fn width(&self) -> f64 {
        (self.b - self.a) / self.elements as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RuleTag {
    Vanilla,
    P3,
    /// Deterministic composite trapezoid rule.
    Trapezoid,
}

impl RuleTag {
    pub fn name(self) -> &'static str {
        match self {
            RuleTag::Vanilla => "vanilla",
            RuleTag::P3 => "p3",
            RuleTag::Trapezoid => "trapezoid",
        }
    }
}

/// Nodes and signed weights of one stochastic integration draw.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSample {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub rule: RuleTag,
    pub partition: Option<Partition>,
    pub seed: u64,
}

impl QuadratureSample {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i f(x_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// The same nodes with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= factor);
        out
    }
}

/// `n` i.i.d. uniform nodes on `[a, b]`, each weighted `(b - a) / n`.
pub fn vanilla_sample(a: f64, b: f64, n: usize, seed: u64) -> Result<QuadratureSample> {
    if n == 0 {
        bail!(Config, "vanilla Monte Carlo needs at least one node");
    }
    if !(b > a) {
        bail!(Config, "invalid interval [{a}, {b}]");
    }
    let mut r = rng::stream(seed);
    let w = (b - a) / n as f64;
    let nodes: Vec<f64> = (0..n).map(|_| a + (b - a) * r.random::<f64>()).collect();
    Ok(QuadratureSample {
        nodes,
        weights: alloc::vec![w; n],
        rule: RuleTag::Vanilla,
        partition: None,
        seed,
    })
}

/// Composite trapezoid rule on `n >= 2` equispaced nodes including both ends.
pub fn trapezoid_sample(a: f64, b: f64, n: usize) -> Result<QuadratureSample> {
    if n < 2 || !(b > a) {
        bail!(Config, "trapezoid rule needs n >= 2 on a nonempty interval");
    }
    let h = (b - a) / (n - 1) as f64;
    let nodes = (0..n).map(|i| a + h * i as f64).collect();
    let mut weights = alloc::vec![h; n];
    weights[0] = 0.5 * h;
    weights[n - 1] = 0.5 * h;
    Ok(QuadratureSample {
        nodes,
        weights,
        rule: RuleTag::Trapezoid,
        partition: None,
        seed: 0,
    })
}

/// One draw of the stratified `P3` rule: three nodes per element.
pub fn p3_sample(partition: &Partition, seed: u64) -> QuadratureSample {
    let k = partition.elements;
    let h = partition.width();
    let half = 0.5 * h;
    let mut r = rng::stream(seed);
    let mut nodes = Vec::with_capacity(3 * k);
    let mut weights = Vec::with_capacity(3 * k);
    for i in 0..k {
        let c = partition.center(i);
        let mut u: f64 = r.random();
        while u == 0.0 {
            u = r.random();
        }
        let t = math::cbrt(u);
        let side = half / (3.0 * t * t);
        nodes.extend_from_slice(&[c + half * t, c, c - half * t]);
        weights.extend_from_slice(&[side, h - 2.0 * side, side]);
    }
    QuadratureSample {
        nodes,
        weights,
        rule: RuleTag::P3,
        partition: Some(*partition),
        seed,
    }
}

/// Draws a sample of `rule` with about `n_points` nodes on the domain. For `P3`,
/// `n_points` must be a multiple of three.
pub fn sample_rule(rule: RuleTag, n_points: usize, seed: u64) -> Result<QuadratureSample> {
    match rule {
        RuleTag::Vanilla => vanilla_sample(crate::DOMAIN.0, crate::DOMAIN.1, n_points, seed),
        RuleTag::P3 => {
            if n_points == 0 || !n_points.is_multiple_of(3) {
                bail!(Config, "P3 needs a positive multiple of three nodes, got {n_points}");
            }
            Ok(p3_sample(&Partition::domain(n_points / 3)?, seed))
        }
        RuleTag::Trapezoid => trapezoid_sample(crate::DOMAIN.0, crate::DOMAIN.1, n_points),
    }
}

/// `sum_i w_i v_i`.
pub fn estimate(sample: &QuadratureSample, values: &[f64]) -> Result<f64> {
    if values.len() != sample.weights.len() {
        bail!(
            Contract,
            "{} integrand values for {} nodes",
            values.len(),
            sample.weights.len()
        );
    }
    Ok(sample.weights.iter().zip(values).map(|(w, v)| w * v).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceRow {
    pub rule: RuleTag,
    pub elements: usize,
    pub nodes: usize,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTable {
    pub rows: Vec<VarianceRow>,
    /// Least-squares slope of `ln variance` against `ln nodes`; `None` when some
    /// variance is zero.
    pub slope: Option<f64>,
}

/// Empirical variance of the estimator over `reps` independent draws for each
/// element count in `elements`. Vanilla Monte Carlo uses `3K` nodes so both
/// rules are compared at equal cost.
pub fn variance_probe(
    integrand: impl Fn(f64) -> f64,
    rule: RuleTag,
    elements: &[usize],
    reps: usize,
    seed: u64,
) -> Result<VarianceTable> {
    if reps < 100 {
        bail!(Config, "variance probe needs at least 100 repetitions, got {reps}");
    }
    let mut rows = Vec::with_capacity(elements.len());
    for (ki, &k) in elements.iter().enumerate() {
        let n = 3 * k;
        let estimates: Vec<f64> = (0..reps)
            .map(|rep| {
                let s = rng::mix(rng::mix(seed, ki as u64), rep as u64);
                let sample = sample_rule(rule, n, s)?;
                Ok(sample.integrate(&integrand))
            })
            .collect::<Result<_>>()?;
        rows.push(VarianceRow {
            rule,
            elements: k,
            nodes: n,
            variance: sample_variance(&estimates),
        });
    }
    let slope = if rows.len() >= 2 && rows.iter().all(|r| r.variance > 0.0) {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (math::ln(r.nodes as f64), math::ln(r.variance)))
            .collect();
        Some(fit_slope(&pts))
    } else {
        None
    };
    Ok(VarianceTable { rows, slope })
}

/// Unbiased sample variance (denominator `n - 1`).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Least-squares slope through `(x, y)` pairs.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_vanilla_node_weighs_domain_length() {
        let s = vanilla_sample(-1.0, 1.0, 1, 3).unwrap();
        assert_eq!(s.weights, alloc::vec![2.0]);
        assert!(vanilla_sample(-1.0, 1.0, 0, 3).is_err());
    }

    #[test]
    fn constants_are_exact_for_every_draw() {
        for seed in 0..20 {
            let v = vanilla_sample(-1.0, 1.0, 17, seed).unwrap();
            assert!((v.integrate(|_| 3.5) - 7.0).abs() < 1e-13);
            let p = p3_sample(&Partition::domain(5).unwrap(), seed);
            assert!((p.integrate(|_| 1.0) - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn p3_layout_and_weights() {
        let part = Partition::domain(8).unwrap();
        let s = p3_sample(&part, 11);
        assert_eq!(s.len(), 24);
        for (e, w) in s.weights.chunks(3).enumerate() {
            assert!((w.iter().sum::<f64>() - part.width()).abs() < 1e-15);
            assert!(w[0] > 0.0 && w[2] > 0.0 && w[0] == w[2]);
            let x = &s.nodes[3 * e..3 * e + 3];
            assert_eq!(x[1], part.center(e));
            assert!((x[0] - x[1] + (x[2] - x[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn p3_cubic_on_symmetric_domain_integrates_to_zero() {
        for k in [1usize, 3, 8, 32] {
            for seed in 0..10 {
                let s = p3_sample(&Partition::domain(k).unwrap(), seed);
                assert!(s.integrate(|x| x * x * x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn p3_quadratic_is_exact() {
        // (t^2 + t^2) / (3 t^2) = 2/3 on the reference element for every t
        let s = p3_sample(&Partition::domain(1).unwrap(), 99);
        assert!((s.integrate(|x| x * x) - 2.0 / 3.0).abs() < 1e-15);
        let s = p3_sample(&Partition::domain(7).unwrap(), 5);
        assert!((s.integrate(|x| x * x) - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn estimate_checks_lengths() {
        let s = QuadratureSample {
            nodes: alloc::vec![0.0, 1.0],
            weights: alloc::vec![1.0, 1.0],
            rule: RuleTag::Vanilla,
            partition: None,
            seed: 0,
        };
        assert_eq!(estimate(&s, &[2.0, 3.0]).unwrap(), 5.0);
        assert!(estimate(&s, &[2.0]).is_err());
    }

    #[test]
    fn vanilla_mean_of_x_squared_is_unbiased() {
        let est: Vec<f64> = (0..10_000)
            .map(|seed| vanilla_sample(-1.0, 1.0, 10, seed).unwrap().integrate(|x| x * x))
            .collect();
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        let se = math::sqrt(sample_variance(&est) / est.len() as f64);
        assert!((mean - 2.0 / 3.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn p3_sine_mean_is_unbiased() {
        let part = Partition::domain(8).unwrap();
        let f = |x: f64| math::sin(core::f64::consts::PI * x);
        let est: Vec<f64> = (0..10_000).map(|seed| p3_sample(&part, seed).integrate(f)).collect();
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        let se = math::sqrt(sample_variance(&est) / est.len() as f64);
        assert!(mean.abs() < 3.0 * se + 1e-15, "mean {mean} se {se}");
    }

    #[test]
    fn constant_integrand_has_no_variance_and_no_slope() {
        let t = variance_probe(|_| 2.0, RuleTag::P3, &[2, 4, 8], 100, 1).unwrap();
        assert!(t.rows.iter().all(|r| r.variance < 1e-28));
        let t = variance_probe(|_| 0.0, RuleTag::P3, &[2, 4], 100, 1).unwrap();
        assert_eq!(t.slope, None);
        assert!(variance_probe(|_| 0.0, RuleTag::P3, &[2], 99, 1).is_err());
    }

    #[test]
    fn abs_integrand_decays_slower_than_smooth() {
        let ks = [4, 8, 16, 32, 64];
        let t = variance_probe(f64::abs, RuleTag::P3, &ks, 400, 9).unwrap();
        assert!(t.slope.unwrap() > -9.0, "slope {:?}", t.slope);
    }

    proptest! {
        #[test]
        fn p3_is_exact_for_cubics(
            c in proptest::array::uniform4(-5.0f64..5.0),
            a in -3.0f64..0.0,
            len in 0.1f64..4.0,
            k in 1usize..32,
            seed in any::<u64>(),
        ) {
            let b = a + len;
            let s = p3_sample(&Partition::new(a, b, k).unwrap(), seed);
            let f = |x: f64| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x;
            let prim = |x: f64| c[0] * x + c[1] * x * x / 2.0 + c[2] * x * x * x / 3.0 + c[3] * x * x * x * x / 4.0;
            let exact = prim(b) - prim(a);
            prop_assert!((s.integrate(f) - exact).abs() < 1e-10 * (1.0 + exact.abs()));
            prop_assert!((s.weights.iter().sum::<f64>() - len).abs() < 1e-12);
        }

        #[test]
        fn estimate_matches_fold(vals in proptest::collection::vec(-10.0f64..10.0, 1..40), seed in any::<u64>()) {
            let s = vanilla_sample(-1.0, 1.0, vals.len(), seed).unwrap();
            let direct = s.weights.iter().zip(&vals).fold(0.0, |acc, (w, v)| acc + w * v);
            prop_assert_eq!(estimate(&s, &vals).unwrap(), direct);
        }
    }
}
