//! Measurement chain: optical scale with Abbe error, laser Doppler vibrometer,
//! and the device under test (accelerometer or geophone behind an ADC).

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::signalcore::{NoiseSource, NoiseStream, TimeSeries, Unit};

pub const DEFAULT_ENCODER_RESOLUTION_M: f64 = 2.5e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub resolution_m: f64,
    /// Lateral offset between the scale and the motion axis.
    pub abbe_offset_m: f64,
    pub tilt_amplitude_rad: f64,
    pub tilt_period_m: f64,
    pub noise: NoiseSource,
}

impl Default for EncoderModel {
    fn default() -> Self {
        Self {
            resolution_m: DEFAULT_ENCODER_RESOLUTION_M,
            abbe_offset_m: 0.0,
            tilt_amplitude_rad: 0.0,
            tilt_period_m: 0.01,
            noise: NoiseSource::silent(),
        }
    }
}

impl EncoderModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution_m.is_finite() && self.resolution_m > 0.0) {
            return Err(Error::Config("encoder: resolution_m must be > 0".into()));
        }
        if !self.abbe_offset_m.is_finite() {
            return Err(Error::Config("encoder: abbe_offset_m must be finite".into()));
        }
        if !(self.tilt_amplitude_rad.is_finite() && self.tilt_amplitude_rad >= 0.0) {
            return Err(Error::Config("encoder: tilt_amplitude_rad must be >= 0".into()));
        }
        if !(self.tilt_period_m.is_finite() && self.tilt_period_m > 0.0) {
            return Err(Error::Config("encoder: tilt_period_m must be > 0".into()));
        }
        self.noise.validate()
    }

    /// Pitch-induced Abbe error at `true_pos`: offset times instantaneous tilt.
    pub fn abbe_error(&self, true_pos: f64) -> f64 {
        self.abbe_offset_m * self.tilt_amplitude_rad * (TAU * true_pos / self.tilt_period_m).sin()
    }
}

/// Scale reading for one sample, with `noise_m` already drawn by the caller.
/// Rounds half away from zero.
pub fn encoder_read(true_pos: f64, model: &EncoderModel, noise_m: f64) -> f64 {
    let sensed = true_pos + model.abbe_error(true_pos) + noise_m;
    model.resolution_m * (sensed / model.resolution_m).round()
}

/// Encoder with its own noise stream.
#[derive(Debug, Clone)]
pub struct Encoder {
    model: EncoderModel,
    noise: NoiseStream,
}

impl Encoder {
    pub fn new(model: EncoderModel) -> Self {
        Self { noise: model.noise.stream(), model }
    }

    pub fn read(&mut self, true_pos: f64) -> f64 {
        let n = self.noise.next_sample();
        encoder_read(true_pos, &self.model, n)
    }
}

/// One least-significant bit of an N-bit converter, in parts per million of full range.
pub fn lsb_resolution_ppm(bits: u32) -> f64 {
    1e6 / 2f64.powi(bits as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrometerModel {
    pub gain_error: f64,
    pub noise: NoiseSource,
    pub bandwidth_hz: f64,
}

impl Default for VibrometerModel {
    fn default() -> Self {
        Self { gain_error: 0.0, noise: NoiseSource::silent(), bandwidth_hz: 1e9 }
    }
}

impl VibrometerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::Config("vibrometer: bandwidth_hz must be > 0".into()));
        }
        if !self.gain_error.is_finite() {
            return Err(Error::Config("vibrometer: gain_error must be finite".into()));
        }
        self.noise.validate()
    }
}

/// First-order low-pass, bilinear with pre-warping at `cutoff_hz`:
/// `c = tan(pi fc / fs)`, `y[n] = (c (x[n] + x[n-1]) - (c - 1) y[n-1]) / (1 + c)`.
/// The state starts at rest on `x[0]`. A cutoff at or above Nyquist passes the input through.
pub fn first_order_lowpass(x: &[f64], cutoff_hz: f64, rate_hz: f64) -> Vec<f64> {
    if cutoff_hz >= rate_hz / 2.0 || x.is_empty() {
        return x.to_vec();
    }
    let c = (PI * cutoff_hz / rate_hz).tan();
    let mut out = Vec::with_capacity(x.len());
    let (mut x_prev, mut y_prev) = (x[0], x[0]);
    for &xi in x {
        let y = (c * (xi + x_prev) - (c - 1.0) * y_prev) / (1.0 + c);
        out.push(y);
        x_prev = xi;
        y_prev = y;
    }
    out
}

pub fn vibrometer_read(true_vel: &TimeSeries, model: &VibrometerModel) -> Result<TimeSeries> {
    if true_vel.unit() != Unit::MeterPerS {
        return Err(Error::Mismatch(format!("vibrometer expects meter_per_s, got {}", true_vel.unit())));
    }
    let filtered = first_order_lowpass(true_vel.samples(), model.bandwidth_hz, true_vel.sample_rate_hz());
    let mut noise = model.noise.stream();
    let out = filtered
        .into_iter()
        .map(|v| (1.0 + model.gain_error) * v + noise.next_sample())
        .collect();
    true_vel.with_samples(out, Unit::MeterPerS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DutKind {
    Accelerometer,
    Geophone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutModel {
    pub kind: DutKind,
    pub natural_freq_hz: f64,
    pub damping_ratio: f64,
    pub sensitivity: f64,
    /// Quadratic coefficient, per unit of the sensed quantity.
    pub c2: f64,
    pub c3: f64,
    pub adc_bits: u32,
    /// Full scale in input units, before sensitivity.
    pub full_scale: f64,
    pub noise: NoiseSource,
}

impl DutModel {
    pub fn accelerometer() -> Self {
        Self {
            kind: DutKind::Accelerometer,
            natural_freq_hz: 2000.0,
            damping_ratio: 0.7,
            sensitivity: 1.0,
            c2: 0.0,
            c3: 0.0,
            adc_bits: 24,
            full_scale: 20.0,
            noise: NoiseSource::silent(),
        }
    }

    pub fn geophone() -> Self {
        Self {
            kind: DutKind::Geophone,
            natural_freq_hz: 10.0,
            damping_ratio: 0.7,
            full_scale: 0.1,
            ..Self::accelerometer()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.natural_freq_hz.is_finite() && self.natural_freq_hz > 0.0) {
            return Err(Error::Config("dut: natural_freq_hz must be > 0".into()));
        }
        if !(self.damping_ratio.is_finite() && self.damping_ratio > 0.0) {
            return Err(Error::Config("dut: damping_ratio must be > 0".into()));
        }
        if !(self.sensitivity.is_finite() && self.sensitivity > 0.0) {
            return Err(Error::Config("dut: sensitivity must be > 0".into()));
        }
        if !(8..=32).contains(&self.adc_bits) {
            return Err(Error::Config(format!("dut: adc_bits must be in [8, 32], got {}", self.adc_bits)));
        }
        if !(self.full_scale.is_finite() && self.full_scale > 0.0) {
            return Err(Error::Config("dut: full_scale must be > 0".into()));
        }
        if !self.c2.is_finite() || !self.c3.is_finite() {
            return Err(Error::Config("dut: c2 and c3 must be finite".into()));
        }
        self.noise.validate()
    }

    /// Unit of the sensed quantity and of the output.
    pub fn unit(&self) -> Unit {
        match self.kind {
            DutKind::Accelerometer => Unit::MeterPerS2,
            DutKind::Geophone => Unit::MeterPerS,
        }
    }

    /// ADC step in output units.
    pub fn adc_lsb(&self) -> f64 {
        2.0 * self.full_scale * self.sensitivity / 2f64.powi(self.adc_bits as i32)
    }

    /// Static polynomial nonlinearity `x + c2 x^2 + c3 x^3`.
    pub fn nonlinearity(&self, x: f64) -> f64 {
        x + self.c2 * x * x + self.c3 * x * x * x
    }

    /// Mid-tread uniform converter with clamping at `full_scale * sensitivity`.
    pub fn adc(&self, v: f64) -> f64 {
        let fs = self.full_scale * self.sensitivity;
        let lsb = self.adc_lsb();
        let half = 2f64.powi(self.adc_bits as i32 - 1);
        let code = (v.clamp(-fs, fs) / lsb).round().clamp(-half, half - 1.0);
        code * lsb
    }
}

/// Second-order section in transposed direct form II.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Bilinear transform of `num(s) / (s^2 + 2 zeta wn s + wn^2)` pre-warped at `wn`,
    /// where `num` is `wn^2` for the low-pass and `s^2` for the high-pass.
    fn second_order(fn_hz: f64, zeta: f64, rate_hz: f64, highpass: bool) -> Self {
        let wn = TAU * fn_hz;
        let k = wn / (PI * fn_hz / rate_hz).tan();
        let (ka, kb, kc) = (k * k, 2.0 * zeta * wn * k, wn * wn);
        let a0 = ka + kb + kc;
        let a = [(2.0 * kc - 2.0 * ka) / a0, (ka - kb + kc) / a0];
        let b = if highpass {
            [ka / a0, -2.0 * ka / a0, ka / a0]
        } else {
            [kc / a0, 2.0 * kc / a0, kc / a0]
        };
        Self { b, a }
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Filters `x` with the state initialised to steady state on `x[0]`.
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let Some(&x0) = x.first() else { return Vec::new() };
        let y0 = self.dc_gain() * x0;
        let mut z2 = self.b[2] * x0 - self.a[1] * y0;
        let mut z1 = self.b[1] * x0 - self.a[0] * y0 + z2;
        x.iter()
            .map(|&xi| {
                let y = self.b[0] * xi + z1;
                z1 = self.b[1] * xi - self.a[0] * y + z2;
                z2 = self.b[2] * xi - self.a[1] * y;
                y
            })
            .collect()
    }
}

/// Linear sensor dynamics only (stage 1 of [`dut_read`]).
///
/// An accelerometer whose natural frequency is at or above Nyquist is treated
/// as ideal within the sampled band. A geophone needs its corner below Nyquist.
pub fn dut_dynamics(input: &[f64], model: &DutModel, rate_hz: f64) -> Result<Vec<f64>> {
    let above_nyquist = model.natural_freq_hz >= rate_hz / 2.0;
    match model.kind {
        DutKind::Accelerometer if above_nyquist => Ok(input.to_vec()),
        DutKind::Geophone if above_nyquist => Err(Error::Config(format!(
            "dut: geophone natural frequency {} Hz is not below Nyquist ({} Hz)",
            model.natural_freq_hz,
            rate_hz / 2.0
        ))),
        kind => {
            let highpass = kind == DutKind::Geophone;
            Ok(Biquad::second_order(model.natural_freq_hz, model.damping_ratio, rate_hz, highpass).run(input))
        }
    }
}

/// Cumulative trapezoidal integral starting from zero.
fn integrate(x: &[f64], rate_hz: f64) -> Vec<f64> {
    let dt = 1.0 / rate_hz;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(x.len());
    out.push(0.0);
    for w in x.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * dt;
        out.push(acc);
    }
    out
}

/// Full DUT chain: dynamics, polynomial nonlinearity, sensitivity and noise, ADC.
///
/// Accelerometers take acceleration. Geophones take velocity; an acceleration
/// input is integrated (trapezoidal, from zero) first.
pub fn dut_read(input: &TimeSeries, model: &DutModel) -> Result<TimeSeries> {
    let rate = input.sample_rate_hz();
    let sensed: Vec<f64> = match (model.kind, input.unit()) {
        (DutKind::Accelerometer, Unit::MeterPerS2) | (DutKind::Geophone, Unit::MeterPerS) => {
            input.samples().to_vec()
        }
        (DutKind::Geophone, Unit::MeterPerS2) => integrate(input.samples(), rate),
        (kind, unit) => {
            return Err(Error::Mismatch(format!("{kind:?} cannot sense a {unit} channel")));
        }
    };
    let dynamic = dut_dynamics(&sensed, model, rate)?;
    let mut noise = model.noise.stream();
    let out = dynamic
        .into_iter()
        .map(|x| model.adc(model.sensitivity * model.nonlinearity(x) + noise.next_sample()))
        .collect();
    input.with_samples(out, model.unit())
}
