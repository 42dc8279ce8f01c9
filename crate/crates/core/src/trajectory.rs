//! Nominal sinusoidal excitation and the stroke/frequency/acceleration envelope.
//!
//! Amplitudes are half of peak-to-peak travel throughout, so that
//! `peak_acceleration = (2 pi f)^2 * amplitude`.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;

use crate::error::{Error, Result};
use crate::signalcore::{TimeSeries, Unit};

/// Samples per fundamental period used when no rate is given.
pub const DEFAULT_SAMPLES_PER_PERIOD: f64 = 1000.0;
/// Minimum samples per period: keeps the 10th harmonic below Nyquist.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineProfile {
    pub frequency_hz: f64,
    pub amplitude_m: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub offset_m: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
}

impl SineProfile {
    /// Profile covering exactly `periods` periods at the default 1000 samples per period.
    pub fn with_periods(frequency_hz: f64, amplitude_m: f64, periods: u32) -> Result<Self> {
        if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
            return Err(Error::Domain(format!("frequency must be > 0, got {frequency_hz}")));
        }
        let p = Self {
            frequency_hz,
            amplitude_m,
            phase_rad: 0.0,
            offset_m: 0.0,
            duration_s: periods as f64 / frequency_hz,
            sample_rate_hz: DEFAULT_SAMPLES_PER_PERIOD * frequency_hz,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Construction(m));
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return bad(format!("frequency must be > 0, got {}", self.frequency_hz));
        }
        if !(self.amplitude_m.is_finite() && self.amplitude_m >= 0.0) {
            return bad(format!("amplitude must be >= 0, got {}", self.amplitude_m));
        }
        if !self.phase_rad.is_finite() || !self.offset_m.is_finite() {
            return bad("phase and offset must be finite".into());
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration must be > 0, got {}", self.duration_s));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad(format!("sample rate must be > 0, got {}", self.sample_rate_hz));
        }
        if self.sample_rate_hz < MIN_SAMPLES_PER_PERIOD * self.frequency_hz {
            return bad(format!(
                "sample rate {} Hz is below 20 x {} Hz",
                self.sample_rate_hz, self.frequency_hz
            ));
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        TAU * self.frequency_hz
    }

    pub fn peak_velocity(&self) -> f64 {
        self.omega() * self.amplitude_m
    }

    pub fn peak_acceleration(&self) -> f64 {
        self.omega().powi(2) * self.amplitude_m
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.frequency_hz
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn position_at(&self, t: f64) -> f64 {
        self.offset_m + self.amplitude_m * (self.omega() * t + self.phase_rad).sin()
    }

    pub fn velocity_at(&self, t: f64) -> f64 {
        self.peak_velocity() * (self.omega() * t + self.phase_rad).cos()
    }

    pub fn acceleration_at(&self, t: f64) -> f64 {
        -self.peak_acceleration() * (self.omega() * t + self.phase_rad).sin()
    }
}

fn check_frequency(f: f64) -> Result<()> {
    if f.is_finite() && f > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("frequency must be > 0, got {f}")))
    }
}

/// Amplitude (half stroke) that produces `a_peak` at frequency `f`.
pub fn required_amplitude(a_peak: f64, f: f64) -> Result<f64> {
    check_frequency(f)?;
    if !(a_peak.is_finite() && a_peak >= 0.0) {
        return Err(Error::Domain(format!("peak acceleration must be >= 0, got {a_peak}")));
    }
    Ok(a_peak / (TAU * f).powi(2))
}

pub fn peak_acceleration(amplitude_m: f64, f: f64) -> Result<f64> {
    check_frequency(f)?;
    if !(amplitude_m.is_finite() && amplitude_m >= 0.0) {
        return Err(Error::Domain(format!("amplitude must be >= 0, got {amplitude_m}")));
    }
    Ok((TAU * f).powi(2) * amplitude_m)
}

/// Position, velocity and acceleration sampled on the profile grid.
pub fn generate_profile(p: &SineProfile) -> Result<(TimeSeries, TimeSeries, TimeSeries)> {
    p.validate()?;
    let n = p.sample_count().max(1);
    let w = p.omega();
    let a = p.amplitude_m;
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    let mut acc = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / p.sample_rate_hz;
        let (s, c) = (w * t + p.phase_rad).sin_cos();
        let disp = a * s;
        pos.push(p.offset_m + disp);
        vel.push(w * a * c);
        acc.push(-w * w * disp);
    }
    Ok((
        TimeSeries::new(p.sample_rate_hz, pos, Unit::Meter)?,
        TimeSeries::new(p.sample_rate_hz, vel, Unit::MeterPerS)?,
        TimeSeries::new(p.sample_rate_hz, acc, Unit::MeterPerS2)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub freq_hz: f64,
    pub amplitude_m: f64,
}

pub fn envelope_table(a_peak: f64, freqs: &[f64]) -> Result<Vec<EnvelopePoint>> {
    freqs
        .iter()
        .map(|&f| {
            Ok(EnvelopePoint { freq_hz: f, amplitude_m: required_amplitude(a_peak, f)? })
        })
        .collect()
}

/// Writes `freq_hz,amplitude_m` rows. Amplitudes use 5 significant digits.
pub fn write_envelope_csv<W: Write>(mut out: W, table: &[EnvelopePoint]) -> Result<()> {
    writeln!(out, "freq_hz,amplitude_m")?;
    for p in table {
        writeln!(out, "{},{:.4e}", p.freq_hz, p.amplitude_m)?;
    }
    Ok(())
}
