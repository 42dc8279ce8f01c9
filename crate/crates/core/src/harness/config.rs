//! Scenario files: flat `[section]` blocks of `key = value` lines, `#` comments.
//!
//! Sections: `run`, `profile`, `plant`, `friction` (optional, frictionless when
//! absent), `servo`, `encoder`, `vibrometer`, `dut` (optional), `ilc` (optional).
//! Unknown sections or keys are rejected. See the README for every key.

use serde::Deserialize;

use super::{StageScenario, DEFAULT_CAPTURE_PERIODS, DEFAULT_SETTLE_PERIODS};
use crate::error::{Error, Result};
use crate::plant::{FrictionParams, StageParams, DEFAULT_DT_S};
use crate::sensors::{DutKind, DutModel, EncoderModel, VibrometerModel, DEFAULT_ENCODER_RESOLUTION_M};
use crate::servo::{IlcConfig, ServoConfig};
use crate::signalcore::NoiseSource;
use crate::trajectory::SineProfile;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: StageScenario,
    pub ilc: Option<IlcConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(default = "default_dt")]
    sim_dt_s: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_settle")]
    settle_periods: u32,
}

fn default_dt() -> f64 {
    DEFAULT_DT_S
}
fn default_settle() -> u32 {
    DEFAULT_SETTLE_PERIODS
}
fn default_capture() -> u32 {
    DEFAULT_CAPTURE_PERIODS
}
fn default_resolution() -> f64 {
    DEFAULT_ENCODER_RESOLUTION_M
}
fn default_tilt_period() -> f64 {
    0.01
}
fn one() -> f64 {
    1.0
}
fn default_bits() -> u32 {
    24
}

impl Default for RunSection {
    fn default() -> Self {
        Self { sim_dt_s: DEFAULT_DT_S, seed: 0, settle_periods: DEFAULT_SETTLE_PERIODS }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileSection {
    frequency_hz: f64,
    amplitude_m: f64,
    #[serde(default)]
    phase_rad: f64,
    #[serde(default)]
    offset_m: f64,
    #[serde(default = "default_capture")]
    capture_periods: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EncoderSection {
    #[serde(default = "default_resolution")]
    resolution_m: f64,
    #[serde(default)]
    abbe_offset_m: f64,
    #[serde(default)]
    tilt_amplitude_rad: f64,
    #[serde(default = "default_tilt_period")]
    tilt_period_m: f64,
    #[serde(default)]
    noise_seed: u64,
    #[serde(default)]
    noise_sigma: f64,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            resolution_m: DEFAULT_ENCODER_RESOLUTION_M,
            abbe_offset_m: 0.0,
            tilt_amplitude_rad: 0.0,
            tilt_period_m: 0.01,
            noise_seed: 0,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VibrometerSection {
    #[serde(default)]
    gain_error: f64,
    bandwidth_hz: f64,
    #[serde(default)]
    noise_seed: u64,
    #[serde(default)]
    noise_sigma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DutSection {
    kind: DutKind,
    natural_freq_hz: f64,
    damping_ratio: f64,
    #[serde(default = "one")]
    sensitivity: f64,
    #[serde(default)]
    c2: f64,
    #[serde(default)]
    c3: f64,
    #[serde(default = "default_bits")]
    adc_bits: u32,
    full_scale: f64,
    #[serde(default)]
    noise_seed: u64,
    #[serde(default)]
    noise_sigma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileLayout {
    #[serde(default)]
    run: Option<RunSection>,
    profile: ProfileSection,
    plant: StageParams,
    #[serde(default)]
    friction: Option<FrictionParams>,
    servo: ServoConfig,
    #[serde(default)]
    encoder: Option<EncoderSection>,
    vibrometer: Option<VibrometerSection>,
    #[serde(default)]
    dut: Option<DutSection>,
    #[serde(default)]
    ilc: Option<IlcConfig>,
}

/// Parses and validates a scenario file.
pub fn parse_scenario_file(text: &str) -> Result<ScenarioFile> {
    let raw: FileLayout = toml::from_str(text)?;
    let run = raw.run.unwrap_or_default();
    let rate = raw.servo.control_rate_hz;
    let p = raw.profile;
    if p.capture_periods < 1 {
        return Err(Error::Config("profile: capture_periods must be >= 1".into()));
    }
    if !(p.frequency_hz.is_finite() && p.frequency_hz > 0.0) {
        return Err(Error::Config(format!("profile: frequency_hz must be > 0, got {}", p.frequency_hz)));
    }
    let profile = SineProfile {
        frequency_hz: p.frequency_hz,
        amplitude_m: p.amplitude_m,
        phase_rad: p.phase_rad,
        offset_m: p.offset_m,
        duration_s: p.capture_periods as f64 / p.frequency_hz,
        sample_rate_hz: rate,
    };
    let enc = raw.encoder.unwrap_or_default();
    let encoder = EncoderModel {
        resolution_m: enc.resolution_m,
        abbe_offset_m: enc.abbe_offset_m,
        tilt_amplitude_rad: enc.tilt_amplitude_rad,
        tilt_period_m: enc.tilt_period_m,
        noise: NoiseSource::new(enc.noise_seed, enc.noise_sigma),
    };
    let vibrometer = match raw.vibrometer {
        Some(v) => VibrometerModel {
            gain_error: v.gain_error,
            noise: NoiseSource::new(v.noise_seed, v.noise_sigma),
            bandwidth_hz: v.bandwidth_hz,
        },
        None => VibrometerModel::default(),
    };
    let dut = raw.dut.map(|d| DutModel {
        kind: d.kind,
        natural_freq_hz: d.natural_freq_hz,
        damping_ratio: d.damping_ratio,
        sensitivity: d.sensitivity,
        c2: d.c2,
        c3: d.c3,
        adc_bits: d.adc_bits,
        full_scale: d.full_scale,
        noise: NoiseSource::new(d.noise_seed, d.noise_sigma),
    });
    let scenario = StageScenario {
        profile,
        plant: raw.plant,
        friction: raw.friction.unwrap_or_else(FrictionParams::frictionless),
        servo: raw.servo,
        encoder,
        vibrometer,
        dut,
        sim_dt_s: run.sim_dt_s,
        seed: run.seed,
        settle_periods: run.settle_periods,
    };
    scenario.validate()?;
    if let Some(ilc) = &raw.ilc {
        ilc.validate(rate)?;
    }
    Ok(ScenarioFile { scenario, ilc: raw.ilc })
}
