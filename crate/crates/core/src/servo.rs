//! Position loop (PID + acceleration feedforward) and P-type iterative learning control.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::harness::{simulate_with_command, StageScenario};
use crate::signalcore::{rms_of, TimeSeries, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServoConfig {
    /// N/m
    pub kp: f64,
    /// N/(m s)
    pub ki: f64,
    /// N s/m
    pub kd: f64,
    /// N per m/s^2 of reference acceleration
    pub accel_ff: f64,
    pub control_rate_hz: f64,
    pub output_limit_n: f64,
}

impl ServoConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd), ("accel_ff", self.accel_ff)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("servo: {name} must be >= 0, got {v}")));
            }
        }
        if !(self.control_rate_hz.is_finite() && self.control_rate_hz > 0.0) {
            return Err(Error::Config("servo: control_rate_hz must be > 0".into()));
        }
        if !(self.output_limit_n.is_finite() && self.output_limit_n > 0.0) {
            return Err(Error::Config("servo: output_limit_n must be > 0".into()));
        }
        Ok(())
    }
}

/// Integrator and previous error carried between control ticks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ServoState {
    /// Integral of position error, m s.
    pub integral: f64,
    pub prev_error: Option<f64>,
    pub saturated: bool,
}

/// One control tick. Returns the clamped force and the next state.
///
/// Anti-windup is conditional integration: the integral is not advanced on a
/// tick whose output saturates, and it is additionally bounded so that
/// `|ki * integral| <= output_limit`.
pub fn servo_step(
    ref_pos: f64,
    ref_acc: f64,
    meas_pos: f64,
    state: ServoState,
    cfg: &ServoConfig,
    dt: f64,
) -> (f64, ServoState) {
    let e = ref_pos - meas_pos;
    let derivative = state.prev_error.map_or(0.0, |p| (e - p) / dt);
    let mut integral = state.integral + e * dt;
    if cfg.ki > 0.0 {
        let bound = cfg.output_limit_n / cfg.ki;
        integral = integral.clamp(-bound, bound);
    }
    let raw = cfg.kp * e + cfg.ki * integral + cfg.kd * derivative + cfg.accel_ff * ref_acc;
    let saturated = raw.abs() > cfg.output_limit_n;
    let force = raw.clamp(-cfg.output_limit_n, cfg.output_limit_n);
    let next = ServoState {
        integral: if saturated { state.integral } else { integral },
        prev_error: Some(e),
        saturated,
    };
    (force, next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlcConfig {
    pub learning_gain: f64,
    #[serde(default)]
    pub lead_samples: usize,
    /// Cutoff of the zero-phase Q filter. `None` disables filtering.
    pub q_cutoff_hz: Option<f64>,
    pub max_iterations: usize,
    #[serde(default)]
    pub stop_rms_m: f64,
    /// Force per metre of error used by the update. When absent the harness
    /// uses the loop's dynamic stiffness at the excitation frequency.
    #[serde(default)]
    pub plant_gain_n_per_m: Option<f64>,
}

impl IlcConfig {
    /// `learning_gain = 0` is accepted here so a null update can be exercised.
    pub fn validate(&self, control_rate_hz: f64) -> Result<()> {
        if !(self.learning_gain.is_finite() && (0.0..=2.0).contains(&self.learning_gain)) {
            return Err(Error::Config(format!(
                "ilc: learning_gain must be in [0, 2], got {}",
                self.learning_gain
            )));
        }
        if let Some(fc) = self.q_cutoff_hz {
            if !(fc.is_finite() && fc > 0.0 && fc < control_rate_hz / 2.0) {
                return Err(Error::Config(format!(
                    "ilc: q_cutoff_hz must be in (0, {}), got {fc}",
                    control_rate_hz / 2.0
                )));
            }
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("ilc: max_iterations must be >= 1".into()));
        }
        if !(self.stop_rms_m.is_finite() && self.stop_rms_m >= 0.0) {
            return Err(Error::Config("ilc: stop_rms_m must be >= 0".into()));
        }
        if let Some(g) = self.plant_gain_n_per_m {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Config("ilc: plant_gain_n_per_m must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Squared magnitude of a 2nd-order Butterworth low-pass (bilinear, pre-warped
/// at `cutoff_hz`) at normalized frequency `f_hz / rate_hz`. Applying the section
/// forward and then backward over a periodic signal multiplies every DFT bin by
/// exactly this value, which is how [`zero_phase_lowpass`] evaluates it.
pub fn q_filter_gain(f_hz: f64, cutoff_hz: f64, rate_hz: f64) -> f64 {
    let wd = (PI * f_hz / rate_hz).tan();
    let wc = (PI * cutoff_hz / rate_hz).tan();
    1.0 / (1.0 + (wd / wc).powi(4))
}

/// Circular forward-backward Butterworth filtering of one period-aligned record.
pub fn zero_phase_lowpass(x: &[f64], cutoff_hz: f64, rate_hz: f64) -> Vec<f64> {
    use rustfft::{num_complex::Complex, FftPlanner};
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for (j, c) in buf.iter_mut().enumerate() {
        let bin = j.min(n - j) as f64;
        *c *= q_filter_gain(bin * rate_hz / n as f64, cutoff_hz, rate_hz);
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// `u_next = Q(u + L * gain * advance(e, lead))`, with a circular advance.
pub fn ilc_update(
    u_k: &TimeSeries,
    e_k: &TimeSeries,
    cfg: &IlcConfig,
    plant_gain_estimate: f64,
) -> Result<TimeSeries> {
    if !u_k.same_grid(e_k) {
        return Err(Error::Mismatch(format!(
            "command ({} samples @ {} Hz) and error ({} samples @ {} Hz) differ",
            u_k.len(),
            u_k.sample_rate_hz(),
            e_k.len(),
            e_k.sample_rate_hz()
        )));
    }
    let n = u_k.len();
    let e = e_k.samples();
    let scale = cfg.learning_gain * plant_gain_estimate;
    let updated: Vec<f64> = u_k
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &u)| u + scale * e[(i + cfg.lead_samples) % n])
        .collect();
    let filtered = match cfg.q_cutoff_hz {
        Some(fc) => zero_phase_lowpass(&updated, fc, u_k.sample_rate_hz()),
        None => updated,
    };
    u_k.with_samples(filtered, Unit::Newton)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlcIteration {
    pub iteration: usize,
    pub rms_error_m: f64,
    pub p2p_error_m: f64,
    /// Feedforward force applied during this iteration.
    pub command: TimeSeries,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IlcHistory {
    pub iterations: Vec<IlcIteration>,
    pub plant_gain_estimate: f64,
}

impl IlcHistory {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn rms_series(&self) -> Vec<f64> {
        self.iterations.iter().map(|it| it.rms_error_m).collect()
    }

    pub fn last(&self) -> Option<&IlcIteration> {
        self.iterations.last()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,rms_error_m,p2p_error_m")?;
        for it in &self.iterations {
            writeln!(out, "{},{:.16e},{:.16e}", it.iteration, it.rms_error_m, it.p2p_error_m)?;
        }
        Ok(())
    }
}

fn diverging(rms: &[f64]) -> bool {
    let n = rms.len();
    n >= 4
        && rms[n - 3..].windows(2).all(|w| w[1] > w[0])
        && rms[n - 4] > 0.0
        && rms[n - 1] >= 10.0 * rms[n - 4]
}

/// Repeats simulate / measure / update until `max_iterations` runs have been
/// made or the tracking RMS reaches `stop_rms_m` (0 disables early stopping).
///
/// The update learns from the encoder error `ref - enc`. The recorded metrics
/// are the true tracking error `ref - true_pos` over the capture window.
/// Iteration `i` reseeds every noise channel with `seed + i`.
pub fn ilc_train(scenario: &StageScenario, cfg: &IlcConfig) -> Result<IlcHistory> {
    scenario.validate()?;
    cfg.validate(scenario.servo.control_rate_hz)?;
    let gain = cfg.plant_gain_n_per_m.unwrap_or_else(|| scenario.loop_dynamic_stiffness());
    let n = scenario.capture_samples();
    let mut command = TimeSeries::new(scenario.servo.control_rate_hz, vec![0.0; n], Unit::Newton)?;
    let mut history = IlcHistory { iterations: Vec::new(), plant_gain_estimate: gain };

    for k in 0..cfg.max_iterations {
        let mut run = scenario.clone();
        run.seed = scenario.seed.wrapping_add(k as u64);
        let record = simulate_with_command(&run, Some(&command))?;
        let true_err: Vec<f64> = record
            .ref_pos
            .samples()
            .iter()
            .zip(record.true_pos.samples())
            .map(|(r, x)| r - x)
            .collect();
        let rms = rms_of(&true_err);
        let p2p = TimeSeries::new(1.0, true_err, Unit::Meter)?.peak_to_peak();
        history.iterations.push(IlcIteration { iteration: k, rms_error_m: rms, p2p_error_m: p2p, command: command.clone() });

        if diverging(&history.rms_series()) {
            return Err(Error::Divergence(format!(
                "tracking rms grew from {:.3e} m to {:.3e} m over 3 iterations (iteration {k})",
                history.iterations[k - 3].rms_error_m, rms
            )));
        }
        if rms <= cfg.stop_rms_m || k + 1 == cfg.max_iterations {
            break;
        }
        let enc_err: Vec<f64> = record
            .ref_pos
            .samples()
            .iter()
            .zip(record.enc_pos.samples())
            .map(|(r, x)| r - x)
            .collect();
        let enc_err = command.with_samples(enc_err, Unit::Meter)?;
        command = ilc_update(&command, &enc_err, cfg, gain)?;
    }
    Ok(history)
}
