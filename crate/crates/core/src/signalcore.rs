//! Signal carrier, seeded noise, and unit tags shared by every other module.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Physical unit attached to a channel. Checked at operation boundaries only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Meter,
    MeterPerS,
    MeterPerS2,
    Newton,
    Volt,
    Dimensionless,
}

impl Unit {
    /// Number of time derivatives relative to displacement, for motion units.
    pub fn motion_order(self) -> Option<i32> {
        match self {
            Unit::Meter => Some(0),
            Unit::MeterPerS => Some(1),
            Unit::MeterPerS2 => Some(2),
            _ => None,
        }
    }

    pub fn from_motion_order(order: i32) -> Option<Unit> {
        match order {
            0 => Some(Unit::Meter),
            1 => Some(Unit::MeterPerS),
            2 => Some(Unit::MeterPerS2),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Meter => "meter",
            Unit::MeterPerS => "meter_per_s",
            Unit::MeterPerS2 => "meter_per_s2",
            Unit::Newton => "newton",
            Unit::Volt => "volt",
            Unit::Dimensionless => "dimensionless",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meter" | "m" | "disp" => Ok(Unit::Meter),
            "meter_per_s" | "mps" | "vel" => Ok(Unit::MeterPerS),
            "meter_per_s2" | "mps2" | "acc" => Ok(Unit::MeterPerS2),
            "newton" | "N" => Ok(Unit::Newton),
            "volt" | "V" => Ok(Unit::Volt),
            "dimensionless" => Ok(Unit::Dimensionless),
            other => Err(Error::Config(format!("unknown unit '{other}'"))),
        }
    }
}

/// Uniformly sampled, finite, real-valued channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    sample_rate_hz: f64,
    samples: Vec<f64>,
    unit: Unit,
    t0_s: f64,
}

impl TimeSeries {
    pub fn new(sample_rate_hz: f64, samples: Vec<f64>, unit: Unit) -> Result<Self> {
        Self::with_start(sample_rate_hz, samples, unit, 0.0)
    }

    pub fn with_start(sample_rate_hz: f64, samples: Vec<f64>, unit: Unit, t0_s: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Construction(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::Construction("time series needs at least one sample".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Construction(format!("sample {i} is not finite")));
        }
        if !t0_s.is_finite() {
            return Err(Error::Construction("start time must be finite".into()));
        }
        Ok(Self { sample_rate_hz, samples, unit, t0_s })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn t0_s(&self) -> f64 {
        self.t0_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `i`, computed directly so there is no accumulated drift.
    pub fn time_at(&self, i: usize) -> f64 {
        self.t0_s + i as f64 / self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// New series on the same grid with different values.
    pub fn with_samples(&self, samples: Vec<f64>, unit: Unit) -> Result<Self> {
        Self::with_start(self.sample_rate_hz, samples, unit, self.t0_s)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn peak_to_peak(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// Same rate, length and start time.
    pub fn same_grid(&self, other: &TimeSeries) -> bool {
        self.sample_rate_hz == other.sample_rate_hz
            && self.samples.len() == other.samples.len()
            && self.t0_s == other.t0_s
    }
}

pub fn make_series(sample_rate_hz: f64, values: Vec<f64>, unit: Unit) -> Result<TimeSeries> {
    TimeSeries::new(sample_rate_hz, values, unit)
}

/// Root mean square of all samples.
pub fn rms(ts: &TimeSeries) -> f64 {
    rms_of(ts.samples())
}

pub(crate) fn rms_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    GaussianWhite,
}

/// Seeded white-noise description. Draws come from [`NoiseStream`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSource {
    pub seed: u64,
    #[serde(default)]
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseSource {
    pub fn new(seed: u64, sigma: f64) -> Self {
        Self { seed, kind: NoiseKind::GaussianWhite, sigma }
    }

    pub fn silent() -> Self {
        Self::new(0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config(format!("noise sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Same sigma, seed replaced. Used to give each channel or iteration its own stream.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }

    pub fn stream(&self) -> NoiseStream {
        NoiseStream::new(*self)
    }
}

/// Stateful Gaussian generator.
///
/// Algorithm: ChaCha8 keyed by `ChaCha8Rng::seed_from_u64(seed)`. Each uniform is
/// `((next_u64() >> 11) + 1) * 2^-53`, which lies in (0, 1]. Normal deviates come in
/// pairs from the basic Box-Muller transform, `r = sqrt(-2 ln u1)`,
/// `z0 = r cos(2 pi u2)` then `z1 = r sin(2 pi u2)`, each scaled by sigma.
/// A zero sigma short-circuits to exact zeros without advancing the generator.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    sigma: f64,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NoiseStream {
    pub fn new(source: NoiseSource) -> Self {
        Self {
            sigma: source.sigma,
            rng: ChaCha8Rng::seed_from_u64(source.seed),
            spare: None,
        }
    }

    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn next_sample(&mut self) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        self.sigma * self.standard_normal()
    }

    pub fn take(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_sample()).collect()
    }
}

/// `n` Gaussian draws with the source's sigma. Deterministic per seed.
pub fn gaussian_noise(source: &NoiseSource, n: usize) -> Vec<f64> {
    source.stream().take(n)
}
