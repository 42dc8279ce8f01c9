//! End-to-end orchestration: scenario validation, the closed-loop simulation,
//! run records, presets and stick-slip detection.

mod config;
mod presets;
mod record;

pub use config::{parse_scenario_file, ScenarioFile};
pub use presets::{preset_file, run_preset, PresetMetrics, PresetName, PresetRun, PRESET_NAMES};
pub use record::{read_channel_table, ChannelTable, RunRecord, RUN_CSV_HEADER};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::plant::{clamp_force, step_detailed, FrictionParams, StageParams, StageState};
use crate::sensors::{dut_read, vibrometer_read, DutKind, DutModel, Encoder, EncoderModel, VibrometerModel};
use crate::servo::{servo_step, ServoConfig, ServoState};
use crate::signalcore::{TimeSeries, Unit};
use crate::trajectory::{SineProfile, MIN_SAMPLES_PER_PERIOD};

pub const DEFAULT_SETTLE_PERIODS: u32 = 2;
pub const DEFAULT_CAPTURE_PERIODS: u32 = 2;

/// Everything needed for one simulated run.
///
/// `profile.sample_rate_hz` is the control and recording rate, and
/// `profile.duration_s` is the captured window (a whole number of periods).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageScenario {
    pub profile: SineProfile,
    pub plant: StageParams,
    pub friction: FrictionParams,
    pub servo: ServoConfig,
    pub encoder: EncoderModel,
    pub vibrometer: VibrometerModel,
    pub dut: Option<DutModel>,
    pub sim_dt_s: f64,
    pub seed: u64,
    pub settle_periods: u32,
}

fn near_integer(x: f64) -> Option<usize> {
    let r = x.round();
    ((x - r).abs() <= 1e-6 * r.max(1.0)).then_some(r as usize)
}

impl StageScenario {
    pub fn validate(&self) -> Result<()> {
        self.profile.validate().map_err(|e| Error::Config(format!("profile: {e}")))?;
        self.plant.validate()?;
        self.friction.validate()?;
        self.servo.validate()?;
        self.encoder.validate()?;
        self.vibrometer.validate()?;
        if let Some(d) = &self.dut {
            d.validate()?;
        }
        let p = &self.profile;
        if p.amplitude_m + p.offset_m.abs() > self.plant.stroke_limit_m {
            return Err(Error::Config(format!(
                "profile exceeds stroke: amplitude {} m + |offset| {} m > limit {} m",
                p.amplitude_m,
                p.offset_m.abs(),
                self.plant.stroke_limit_m
            )));
        }
        if !(self.sim_dt_s > 0.0 && self.sim_dt_s <= crate::plant::MAX_DT_S) {
            return Err(Error::Config(format!(
                "sim_dt_s must be in (0, {}], got {}",
                crate::plant::MAX_DT_S,
                self.sim_dt_s
            )));
        }
        let rate = self.servo.control_rate_hz;
        if (p.sample_rate_hz - rate).abs() > 1e-9 * rate {
            return Err(Error::Config(format!(
                "profile sample rate {} Hz must equal the control rate {rate} Hz",
                p.sample_rate_hz
            )));
        }
        if near_integer(1.0 / (self.sim_dt_s * rate)).is_none_or(|d| d < 1) {
            return Err(Error::Config(format!(
                "simulation rate {} Hz is not an integer multiple of the control rate {rate} Hz",
                1.0 / self.sim_dt_s
            )));
        }
        if rate < MIN_SAMPLES_PER_PERIOD * p.frequency_hz {
            return Err(Error::Config(format!("control rate {rate} Hz is below 20 x {} Hz", p.frequency_hz)));
        }
        if near_integer(p.duration_s * p.frequency_hz).is_none_or(|n| n < 1) {
            return Err(Error::Config("profile duration must span a whole number of periods".into()));
        }
        if near_integer(p.duration_s * rate).is_none() {
            return Err(Error::Config(
                "profile duration must hold a whole number of control samples".into(),
            ));
        }
        Ok(())
    }

    pub fn decimation(&self) -> usize {
        (1.0 / (self.sim_dt_s * self.servo.control_rate_hz)).round() as usize
    }

    pub fn capture_samples(&self) -> usize {
        (self.profile.duration_s * self.servo.control_rate_hz).round() as usize
    }

    pub fn capture_periods(&self) -> usize {
        (self.profile.duration_s * self.profile.frequency_hz).round() as usize
    }

    pub fn settle_ticks(&self) -> usize {
        (self.settle_periods as f64 * self.servo.control_rate_hz / self.profile.frequency_hz).round() as usize
    }

    /// Magnitude of `m s^2 + c s + k + C(s)` at the excitation frequency, with
    /// `C(s) = kp + ki / s + kd s`: the force needed per metre of position
    /// correction when the loop is closed.
    pub fn loop_dynamic_stiffness(&self) -> f64 {
        let w = self.profile.omega();
        let s = &self.servo;
        let p = &self.plant;
        let re = p.cable_stiffness_n_per_m + s.kp - p.moving_mass_kg * w * w;
        let im = (p.viscous_damping_n_s_per_m + s.kd) * w - s.ki / w;
        re.hypot(im)
    }

    /// First 16 hex digits of SHA-256 over the scenario's JSON form (seed included).
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-channel seed derived from the run seed, the channel's own seed and a tag.
fn channel_seed(run_seed: u64, model_seed: u64, tag: u64) -> u64 {
    splitmix64(run_seed ^ splitmix64(model_seed ^ tag))
}

pub fn simulate(scenario: &StageScenario) -> Result<RunRecord> {
    simulate_with_command(scenario, None)
}

/// Closed-loop run with an optional periodic feedforward force.
///
/// The command spans the capture window and is applied at control tick `j`
/// as `command[(j - settle_ticks) mod len]`, so it repeats through the
/// settling periods as well.
pub fn simulate_with_command(scenario: &StageScenario, command: Option<&TimeSeries>) -> Result<RunRecord> {
    scenario.validate()?;
    let n_cap = scenario.capture_samples();
    if let Some(c) = command {
        if c.len() != n_cap {
            return Err(Error::Mismatch(format!(
                "feedforward command has {} samples, capture window has {n_cap}",
                c.len()
            )));
        }
    }
    let rate = scenario.servo.control_rate_hz;
    let dt_ctrl = 1.0 / rate;
    let decim = scenario.decimation();
    let settle = scenario.settle_ticks();
    let total = settle + n_cap;
    let profile = &scenario.profile;

    let mut enc_model = scenario.encoder;
    enc_model.noise = enc_model.noise.reseeded(channel_seed(scenario.seed, enc_model.noise.seed, 1));
    let mut encoder = Encoder::new(enc_model);

    let mut state = StageState {
        position_m: profile.position_at(0.0),
        velocity_mps: profile.velocity_at(0.0),
        stuck: false,
    };
    let mut servo = ServoState::default();
    let mut contact_tick = None;

    let mut ref_pos = Vec::with_capacity(total);
    let mut true_pos = Vec::with_capacity(total);
    let mut enc_pos = Vec::with_capacity(total);
    let mut true_vel = Vec::with_capacity(total);
    let mut true_acc = Vec::with_capacity(total);
    let mut force = Vec::with_capacity(total);

    for j in 0..total {
        let t = j as f64 * dt_ctrl;
        let r = profile.position_at(t);
        let meas = encoder.read(state.position_m);
        let (f_servo, next) = servo_step(r, profile.acceleration_at(t), meas, servo, &scenario.servo, dt_ctrl);
        servo = next;
        let ff = command.map_or(0.0, |c| {
            let idx = (j as i64 - settle as i64).rem_euclid(n_cap as i64) as usize;
            c.samples()[idx]
        });
        let f_total = clamp_force(f_servo + ff, &scenario.plant);

        ref_pos.push(r);
        true_pos.push(state.position_m);
        enc_pos.push(meas);
        true_vel.push(state.velocity_mps);
        force.push(f_total);

        let v_start = state.velocity_mps;
        for _ in 0..decim {
            let out = step_detailed(state, f_total, &scenario.plant, &scenario.friction, scenario.sim_dt_s)?;
            if out.hit_stop && contact_tick.is_none() {
                contact_tick = Some(j);
            }
            state = out.state;
        }
        // mean acceleration over the control interval that starts at tick j
        true_acc.push((state.velocity_mps - v_start) / dt_ctrl);
    }

    let full = |v: Vec<f64>, unit: Unit| TimeSeries::new(rate, v, unit);
    let crop = |ts: TimeSeries| -> Result<TimeSeries> {
        let unit = ts.unit();
        TimeSeries::with_start(rate, ts.into_samples().split_off(settle), unit, settle as f64 * dt_ctrl)
    };

    let vel_series = full(true_vel, Unit::MeterPerS)?;
    let mut ldv_model = scenario.vibrometer;
    ldv_model.noise = ldv_model.noise.reseeded(channel_seed(scenario.seed, ldv_model.noise.seed, 2));
    let ldv = vibrometer_read(&vel_series, &ldv_model)?;

    let dut_out = match scenario.dut {
        Some(mut dut) => {
            dut.noise = dut.noise.reseeded(channel_seed(scenario.seed, dut.noise.seed, 3));
            let input = match dut.kind {
                DutKind::Accelerometer => full(true_acc, Unit::MeterPerS2)?,
                DutKind::Geophone => vel_series.clone(),
            };
            crop(dut_read(&input, &dut)?)?
        }
        None => crop(full(vec![0.0; total], Unit::Dimensionless)?)?,
    };

    let mut warnings = Vec::new();
    if let Some(j) = contact_tick {
        warnings.push(format!("stroke limit contact at t = {:.6} s", j as f64 * dt_ctrl));
    }

    Ok(RunRecord {
        ref_pos: crop(full(ref_pos, Unit::Meter)?)?,
        true_pos: crop(full(true_pos, Unit::Meter)?)?,
        enc_pos: crop(full(enc_pos, Unit::Meter)?)?,
        ldv_vel: crop(ldv)?,
        dut_out,
        force: crop(full(force, Unit::Newton)?)?,
        true_vel: crop(vel_series)?,
        fingerprint: scenario.fingerprint(),
        stroke_contact: contact_tick.is_some(),
        warnings,
    })
}

/// Runs where the encoder reads the same count on consecutive samples while the
/// reference moves faster than `min_ref_fraction` of its peak velocity.
/// Only runs of at least `min_len` zero-velocity samples are counted.
pub fn stuck_intervals(record: &RunRecord, profile: &SineProfile, min_ref_fraction: f64, min_len: usize) -> Vec<(usize, usize)> {
    let enc = record.enc_pos.samples();
    let peak = profile.peak_velocity();
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for i in 1..enc.len() {
        let t = record.enc_pos.time_at(i);
        let stuck = enc[i] == enc[i - 1] && profile.velocity_at(t).abs() > min_ref_fraction * peak;
        match (stuck, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s >= min_len {
                    runs.push((s, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if enc.len() - s >= min_len {
            runs.push((s, enc.len()));
        }
    }
    runs
}

/// Stuck intervals per fundamental period with the acceptance thresholds
/// (10 % of peak reference velocity, at least 2 samples).
pub fn stuck_intervals_per_period(record: &RunRecord, scenario: &StageScenario) -> f64 {
    let runs = stuck_intervals(record, &scenario.profile, 0.1, 2);
    runs.len() as f64 / scenario.capture_periods() as f64
}
