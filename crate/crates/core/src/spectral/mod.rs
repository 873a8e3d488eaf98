//! Sobolev-weighted cumulative power spectra and frequency-band initialization.
//!
//! A signal sampled on a periodic uniform grid is transformed with a DFT; bin
//! `m` has angular frequency `omega_m = 2 pi m / length` and weighted power
//! `(1 + omega_m^2)^s |g_m|^2`. Interior bins count twice (the `+-omega_m`
//! pair of the two-sided spectrum). The normalized cumulative sum is the
//! curve from which `[omega_min, omega_max]` is cut at the `alpha` and
//! `1 - alpha` levels.

mod fft;

pub use fft::power_spectrum;

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{bail, Error, Result};
use crate::formulations::Formulation;
use crate::{math, rng};

/// Grid size used for spectral analysis unless configured otherwise.
pub const DEFAULT_GRID: usize = 4096;

/// Default tail fraction cut from each side of the cumulative spectrum.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Periodic uniform grid `x_i = start + i * h`, `i = 0..M`, `h = length / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    points: Vec<f64>,
    length: f64,
}

impl UniformGrid {
    /// `m` points covering `[a, b)`.
    pub fn periodic(a: f64, b: f64, m: usize) -> Self {
        let h = (b - a) / m as f64;
        Self {
            points: (0..m).map(|i| a + i as f64 * h).collect(),
            length: b - a,
        }
    }

    /// The default analysis grid on the computational domain.
    pub fn domain(m: usize) -> Self {
        Self::periodic(crate::DOMAIN.0, crate::DOMAIN.1, m)
    }

    /// Wraps explicit points, which must be equispaced; the grid is treated as
    /// periodic with length `M * h`.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        if points.len() < 2 {
            bail!(Contract, "grid needs at least two points");
        }
        let h = points[1] - points[0];
        if !(h > 0.0) {
            bail!(Contract, "grid must be increasing");
        }
        let uniform = points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
        if !uniform {
            bail!(Contract, "grid is not uniform");
        }
        Ok(Self {
            points: points.to_vec(),
            length: h * points.len() as f64,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points.len() as f64
    }

    pub fn length(&self) -> f64 {
        self.length
    }
}

/// Discrete frequencies, weighted power and their normalized cumulative sum.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectrumCurve {
    pub omegas: Vec<f64>,
    pub power: Vec<f64>,
    pub ncpsd: Vec<f64>,
    pub s: i32,
    pub sample_count: usize,
}

impl SpectrumCurve {
    /// Cumulative value at the largest bin not exceeding `omega`.
    pub fn at(&self, omega: f64) -> f64 {
        match self.omegas.iter().rposition(|&w| w <= omega) {
            Some(i) => self.ncpsd[i],
            None => 0.0,
        }
    }
}

/// Normalized cumulative Sobolev-weighted power spectral density of `values`.
pub fn ncpsd(grid: &UniformGrid, values: &[f64], s: i32) -> Result<SpectrumCurve> {
    let m = grid.len();
    if values.len() != m {
        bail!(Contract, "{} values for a grid of {} points", values.len(), m);
    }
    if m < 16 || !m.is_multiple_of(2) {
        bail!(Contract, "spectral grid needs an even number of at least 16 points, got {m}");
    }
    if values.iter().any(|v| !v.is_finite()) {
        bail!(Numeric, "non-finite sample in spectral input");
    }
    let raw = power_spectrum(values);
    let half = m / 2;
    let omegas: Vec<f64> = (0..=half)
        .map(|k| 2.0 * core::f64::consts::PI * k as f64 / grid.length())
        .collect();
    let power: Vec<f64> = raw
        .iter()
        .zip(&omegas)
        .enumerate()
        .map(|(k, (p, w))| {
            let mult = if k == 0 || k == half { 1.0 } else { 2.0 };
            mult * math::powf(1.0 + w * w, s as f64) * p
        })
        .collect();
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    let mut acc = 0.0;
    let mut ncpsd: Vec<f64> = power
        .iter()
        .map(|p| {
            acc += p;
            (acc / total).min(1.0)
        })
        .collect();
    ncpsd[half] = 1.0;
    Ok(SpectrumCurve {
        omegas,
        power,
        ncpsd,
        s,
        sample_count: m,
    })
}

/// Smallest frequencies at which the cumulative spectrum reaches `alpha` and
/// `1 - alpha`. A zero lower edge is moved up to the first positive bin.
pub fn select_bandwidth(curve: &SpectrumCurve, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 0.5) {
        bail!(Config, "alpha must lie in (0, 0.5), got {alpha}");
    }
    let quantile = |level: f64| {
        let idx = curve
            .ncpsd
            .iter()
            .position(|&c| c >= level)
            .unwrap_or(curve.ncpsd.len() - 1);
        curve.omegas[idx]
    };
    let first_positive = curve.omegas[1];
    let mut lo = quantile(alpha);
    let mut hi = quantile(1.0 - alpha);
    if lo <= 0.0 {
        lo = first_positive;
    }
    if hi < lo {
        hi = lo;
    }
    Ok((lo, hi))
}

/// `n` frequencies with `ln kappa ~ U(ln omega_min, ln omega_max)`.
pub fn sample_frequencies(omega_min: f64, omega_max: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(omega_min > 0.0 && omega_min.is_finite() && omega_max.is_finite()) {
        bail!(Config, "frequency band must be positive and finite, got [{omega_min}, {omega_max}]");
    }
    if omega_min > omega_max {
        bail!(Config, "empty frequency band [{omega_min}, {omega_max}]");
    }
    if omega_min == omega_max {
        return Ok(vec![omega_min; n]);
    }
    let (lo, hi) = (math::ln(omega_min), math::ln(omega_max));
    let mut r = rng::stream(seed);
    Ok((0..n)
        .map(|_| math::exp(r.random_range(lo..hi)).clamp(omega_min, omega_max))
        .collect())
}

/// Which signal an initialization analyzed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SourceTag {
    SourceTerm,
    StrongResidual,
    PriorWeakResidual,
    PriorCorrectionProxy,
}

/// Frequency band and provenance for initializing one network.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InitPlan {
    pub omega_min: f64,
    pub omega_max: f64,
    pub alpha: f64,
    pub s_used: i32,
    pub source_tag: SourceTag,
}

impl InitPlan {
    /// A plan with an explicit band (no spectral analysis behind it).
    pub fn with_band(omega_min: f64, omega_max: f64) -> Self {
        Self {
            omega_min,
            omega_max,
            alpha: DEFAULT_ALPHA,
            s_used: 0,
            source_tag: SourceTag::SourceTerm,
        }
    }
}

/// Position of a training phase in the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Phase {
    /// The initial approximation `u^0` (or the adjoint network for ultra-weak).
    Initial,
    /// The `k`-th correction, `k = 0, 1, ...`.
    Correction(usize),
}

impl Phase {
    /// Running phase number: 0 for the initial phase, `k + 1` for correction `k`.
    pub fn index(self) -> usize {
        match self {
            Phase::Initial => 0,
            Phase::Correction(k) => k + 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Phase::Initial
        } else {
            Phase::Correction(i - 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseDescriptor {
    pub formulation: Formulation,
    pub phase: Phase,
}

/// Signal analyzed and regularity index for a phase.
pub fn strategy(desc: PhaseDescriptor) -> (SourceTag, i32) {
    use Formulation::*;
    use Phase::*;
    match (desc.formulation, desc.phase) {
        (Weak, Initial) => (SourceTag::SourceTerm, -1),
        (Weak, Correction(0)) => (SourceTag::StrongResidual, -1),
        (Weak, Correction(_)) => (SourceTag::PriorWeakResidual, 1),
        (UltraWeak, Initial) => (SourceTag::SourceTerm, -2),
        (UltraWeak, Correction(0)) => (SourceTag::StrongResidual, -2),
        (UltraWeak, Correction(_)) => (SourceTag::PriorCorrectionProxy, 0),
        (Strong, Initial) => (SourceTag::SourceTerm, 0),
        (Strong, Correction(0)) => (SourceTag::StrongResidual, 0),
        (Strong, Correction(_)) => (SourceTag::PriorCorrectionProxy, 2),
    }
}

/// Grid-sampled signals available when planning a phase. All vectors live on
/// the same analysis grid.
#[derive(Debug, Clone, Default)]
pub struct SignalArtifacts {
    pub source: Option<Vec<f64>>,
    pub strong_residual: Option<Vec<f64>>,
    pub prior_weak_residual: Option<Vec<f64>>,
    pub prior_correction_proxy: Option<Vec<f64>>,
}

impl SignalArtifacts {
    fn get(&self, tag: SourceTag) -> Option<&[f64]> {
        match tag {
            SourceTag::SourceTerm => self.source.as_deref(),
            SourceTag::StrongResidual => self.strong_residual.as_deref(),
            SourceTag::PriorWeakResidual => self.prior_weak_residual.as_deref(),
            SourceTag::PriorCorrectionProxy => self.prior_correction_proxy.as_deref(),
        }
    }
}

/// Analyzes the signal prescribed for `desc` and returns the band plan together
/// with the spectrum it was cut from.
pub fn init_plan_for_phase(
    desc: PhaseDescriptor,
    artifacts: &SignalArtifacts,
    grid: &UniformGrid,
    alpha: f64,
) -> Result<(InitPlan, SpectrumCurve)> {
    let (tag, s) = strategy(desc);
    let Some(signal) = artifacts.get(tag) else {
        bail!(Sequencing, "phase {:?} needs the {:?} signal", desc.phase, tag);
    };
    let curve = ncpsd(grid, signal, s)?;
    let (omega_min, omega_max) = select_bandwidth(&curve, alpha)?;
    Ok((
        InitPlan {
            omega_min,
            omega_max,
            alpha,
            s_used: s,
            source_tag: tag,
        },
        curve,
    ))
}

/// Grid proxy for the distribution `delta'` at 0: spikes `+1/h^2` at `x = 0` and
/// `-1/h^2` at `x = h`, so that `sum_i h g_i phi(x_i) = -(phi(h) - phi(0)) / h`.
pub fn dirac_prime_proxy(grid: &UniformGrid) -> Result<Vec<f64>> {
    let h = grid.spacing();
    let pts = grid.points();
    let i0 = pts
        .iter()
        .position(|x| x.abs() <= 1e-9 * h)
        .filter(|&i| i + 1 < pts.len());
    let Some(i0) = i0 else {
        bail!(Contract, "grid does not contain an interior node at the origin");
    };
    let mut g = vec![0.0; pts.len()];
    g[i0] = 1.0 / (h * h);
    g[i0 + 1] = -1.0 / (h * h);
    Ok(g)
}

#[cfg(test)]
mod tests;
