//! Built-in scenarios reproducing the reference runs.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{parse_scenario_file, simulate, simulate_with_command, stuck_intervals_per_period, RunRecord, StageScenario};
use crate::analysis::{analyze_converted, deviation, DEFAULT_HARMONICS};
use crate::error::{Error, Result};
use crate::servo::{ilc_train, IlcHistory};
use crate::signalcore::Unit;

pub const PRESET_NAMES: [&str; 3] = ["fig2a_untuned", "fig2b_tuned", "fig3_ilc"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    /// Default gains against a sticky guide: stick-slip at every reversal.
    Fig2aUntuned,
    /// Stiff loop with acceleration feedforward.
    Fig2bTuned,
    /// The tuned loop plus learned feedforward.
    Fig3Ilc,
}

impl PresetName {
    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Fig2aUntuned => PRESET_NAMES[0],
            PresetName::Fig2bTuned => PRESET_NAMES[1],
            PresetName::Fig3Ilc => PRESET_NAMES[2],
        }
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2a_untuned" => Ok(PresetName::Fig2aUntuned),
            "fig2b_tuned" => Ok(PresetName::Fig2bTuned),
            "fig3_ilc" => Ok(PresetName::Fig3Ilc),
            _ => Err(Error::Config(format!("unknown preset '{s}'; valid: {}", PRESET_NAMES.join(", ")))),
        }
    }
}

/// Scenario file text of a preset.
pub fn preset_file(name: PresetName) -> &'static str {
    match name {
        PresetName::Fig2aUntuned => include_str!("../../presets/fig2a_untuned.toml"),
        PresetName::Fig2bTuned => include_str!("../../presets/fig2b_tuned.toml"),
        PresetName::Fig3Ilc => include_str!("../../presets/fig3_ilc.toml"),
    }
}

#[derive(Debug, Clone)]
pub struct PresetRun {
    pub scenario: StageScenario,
    /// Run with the final learned command applied, or the plain run.
    pub record: RunRecord,
    pub history: Option<IlcHistory>,
}

pub fn run_preset(name: PresetName) -> Result<PresetRun> {
    let file = parse_scenario_file(preset_file(name))?;
    let scenario = file.scenario;
    match file.ilc {
        Some(cfg) => {
            let history = ilc_train(&scenario, &cfg)?;
            let command = &history.last().expect("at least one iteration").command;
            let record = simulate_with_command(&scenario, Some(command))?;
            Ok(PresetRun { scenario, record, history: Some(history) })
        }
        None => {
            let record = simulate(&scenario)?;
            Ok(PresetRun { scenario, record, history: None })
        }
    }
}

/// Summary numbers of a preset run; the shipped `expected_metrics.json` holds these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetMetrics {
    pub fingerprint: String,
    /// Encoder minus reference.
    pub deviation_rms_m: f64,
    pub deviation_p2p_m: f64,
    pub harmonic_power_fraction: f64,
    /// True position minus reference.
    pub tracking_rms_m: f64,
    pub stuck_intervals_per_period: f64,
    /// DUT channel in the velocity domain.
    pub dut_thd_percent: Option<f64>,
    pub ilc_iterations: Option<usize>,
    pub ilc_first_rms_m: Option<f64>,
    pub ilc_final_rms_m: Option<f64>,
    pub ilc_final_p2p_m: Option<f64>,
}

impl PresetRun {
    pub fn metrics(&self) -> Result<PresetMetrics> {
        let rec = &self.record;
        let f0 = self.scenario.profile.frequency_hz;
        let dev = deviation(&rec.enc_pos, &rec.ref_pos, f0, DEFAULT_HARMONICS)?;
        let track = deviation(&rec.true_pos, &rec.ref_pos, f0, DEFAULT_HARMONICS)?;
        let dut_thd_percent = match self.scenario.dut {
            Some(_) => Some(analyze_converted(&rec.dut_out, f0, DEFAULT_HARMONICS, Unit::MeterPerS)?.thd_percent),
            None => None,
        };
        let h = self.history.as_ref();
        Ok(PresetMetrics {
            fingerprint: rec.fingerprint.clone(),
            deviation_rms_m: dev.rms_m,
            deviation_p2p_m: dev.p2p_m,
            harmonic_power_fraction: dev.harmonic_power_fraction,
            tracking_rms_m: track.rms_m,
            stuck_intervals_per_period: stuck_intervals_per_period(rec, &self.scenario),
            dut_thd_percent,
            ilc_iterations: h.map(IlcHistory::len),
            ilc_first_rms_m: h.and_then(|h| h.iterations.first()).map(|it| it.rms_error_m),
            ilc_final_rms_m: h.and_then(IlcHistory::last).map(|it| it.rms_error_m),
            ilc_final_p2p_m: h.and_then(IlcHistory::last).map(|it| it.p2p_error_m),
        })
    }
}
