//! Single-axis air-bearing stage: rigid mass, motor force, viscous damping,
//! cable spring, Karnopp stick-slip friction, hard stops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest integration step accepted by [`step_dynamics`].
pub const MAX_DT_S: f64 = 1e-4;
pub const DEFAULT_DT_S: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageParams {
    pub moving_mass_kg: f64,
    pub viscous_damping_n_s_per_m: f64,
    pub cable_stiffness_n_per_m: f64,
    /// Half travel; 0.05 for a 100 mm stage.
    pub stroke_limit_m: f64,
    pub max_force_n: f64,
}

impl Default for StageParams {
    fn default() -> Self {
        Self {
            moving_mass_kg: 3.0,
            viscous_damping_n_s_per_m: 2.0,
            cable_stiffness_n_per_m: 20.0,
            stroke_limit_m: 0.05,
            max_force_n: 100.0,
        }
    }
}

impl StageParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !pos(self.moving_mass_kg) {
            return Err(Error::Config("plant: moving_mass_kg must be > 0".into()));
        }
        if !nonneg(self.viscous_damping_n_s_per_m) || !nonneg(self.cable_stiffness_n_per_m) {
            return Err(Error::Config("plant: damping and cable stiffness must be >= 0".into()));
        }
        if !pos(self.stroke_limit_m) || !pos(self.max_force_n) {
            return Err(Error::Config("plant: stroke_limit_m and max_force_n must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionParams {
    pub coulomb_n: f64,
    pub breakaway_n: f64,
    pub stribeck_velocity_mps: f64,
    /// Half width of the Karnopp zero-velocity band.
    pub stick_band_mps: f64,
}

impl FrictionParams {
    pub fn frictionless() -> Self {
        Self { coulomb_n: 0.0, breakaway_n: 0.0, stribeck_velocity_mps: 1e-3, stick_band_mps: 1e-6 }
    }

    pub fn is_frictionless(&self) -> bool {
        self.breakaway_n == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coulomb_n.is_finite() && self.coulomb_n >= 0.0) {
            return Err(Error::Config("friction: coulomb_n must be >= 0".into()));
        }
        if !(self.breakaway_n.is_finite() && self.breakaway_n >= self.coulomb_n) {
            return Err(Error::Config("friction: breakaway_n must be >= coulomb_n".into()));
        }
        if !(self.stribeck_velocity_mps.is_finite() && self.stribeck_velocity_mps > 0.0) {
            return Err(Error::Config("friction: stribeck_velocity_mps must be > 0".into()));
        }
        if !(self.stick_band_mps.is_finite() && self.stick_band_mps > 0.0) {
            return Err(Error::Config("friction: stick_band_mps must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageState {
    pub position_m: f64,
    pub velocity_mps: f64,
    pub stuck: bool,
}

impl StageState {
    pub fn at_rest(position_m: f64) -> Self {
        Self { position_m, velocity_mps: 0.0, stuck: false }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Karnopp friction with a Stribeck slip curve.
///
/// Inside the stick band the returned force balances `f_applied` up to the
/// breakaway level; outside it follows `-sign(v) (Fc + (Fs - Fc) exp(-(v/vs)^2))`.
pub fn friction_force(v: f64, f_applied: f64, p: &FrictionParams) -> f64 {
    if v.abs() < p.stick_band_mps {
        if f_applied.abs() <= p.breakaway_n {
            -f_applied
        } else {
            -p.breakaway_n * sign(f_applied)
        }
    } else {
        let r = v / p.stribeck_velocity_mps;
        -sign(v) * (p.coulomb_n + (p.breakaway_n - p.coulomb_n) * (-r * r).exp())
    }
}

/// Motor force after the actuator clamp.
pub fn clamp_force(f_motor: f64, params: &StageParams) -> f64 {
    f_motor.clamp(-params.max_force_n, params.max_force_n)
}

/// Outcome of one step, with the forces that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: StageState,
    /// Net force on the mass during the step.
    pub net_force_n: f64,
    pub friction_n: f64,
    /// True when the hard stop was engaged.
    pub hit_stop: bool,
}

/// One semi-implicit Euler step of `m a = f_motor + friction - c v - k x`.
pub fn step_dynamics(
    s: StageState,
    f_motor: f64,
    params: &StageParams,
    fric: &FrictionParams,
    dt: f64,
) -> Result<StageState> {
    Ok(step_detailed(s, f_motor, params, fric, dt)?.state)
}

pub fn step_detailed(
    s: StageState,
    f_motor: f64,
    params: &StageParams,
    fric: &FrictionParams,
    dt: f64,
) -> Result<StepOutcome> {
    if !(dt > 0.0 && dt <= MAX_DT_S) {
        return Err(Error::Domain(format!("dt must be in (0, {MAX_DT_S}], got {dt}")));
    }
    let applied = clamp_force(f_motor, params)
        - params.viscous_damping_n_s_per_m * s.velocity_mps
        - params.cable_stiffness_n_per_m * s.position_m;

    let in_band = s.velocity_mps.abs() < fric.stick_band_mps;
    if in_band && applied.abs() <= fric.breakaway_n && !fric.is_frictionless() {
        let state = StageState { position_m: s.position_m, velocity_mps: 0.0, stuck: true };
        return Ok(StepOutcome { state, net_force_n: 0.0, friction_n: -applied, hit_stop: false });
    }

    let friction = if fric.is_frictionless() { 0.0 } else { friction_force(s.velocity_mps, applied, fric) };
    let net = applied + friction;
    let mut velocity = s.velocity_mps + net / params.moving_mass_kg * dt;
    let mut position = s.position_m + velocity * dt;
    let mut hit_stop = false;
    if position.abs() > params.stroke_limit_m {
        position = params.stroke_limit_m * sign(position);
        velocity = 0.0;
        hit_stop = true;
    }
    Ok(StepOutcome {
        state: StageState { position_m: position, velocity_mps: velocity, stuck: false },
        net_force_n: net,
        friction_n: friction,
        hit_stop,
    })
}
