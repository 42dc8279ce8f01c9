//! End-to-end acceptance criteria A1-A8. One PASS/FAIL line per criterion;
//! exits nonzero if any fails.

use std::f64::consts::TAU;
use std::process::{Command, ExitCode};

use airbench::analysis::{analyze_converted, coherent_spectrum, deviation, harmonic_scaling, ScalingDirection};
use airbench::harness::{parse_scenario_file, preset_file, run_preset, simulate, PresetName, PresetRun};
use airbench::plant::{friction_force, step_dynamics, FrictionParams, StageParams, StageState, DEFAULT_DT_S};
use airbench::sensors::{encoder_read, lsb_resolution_ppm, EncoderModel};
use airbench::signalcore::{gaussian_noise, rms, NoiseSource};
use airbench::trajectory::required_amplitude;
use airbench::{TimeSeries, Unit};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn a1() -> Outcome {
    let low = required_amplitude(20.0, 1.0).unwrap();
    let high = required_amplitude(20.0, 5000.0).unwrap();
    let pass = rel(low, 0.5066) < 5e-3 && rel(high, 2.026e-8) < 5e-3 && rel(low, 0.507) < 5e-3 && rel(high, 2.03e-8) < 5e-3;
    check(pass, format!("1 Hz -> {low:.4e} m, 5 kHz -> {high:.4e} m"))
}

fn a2() -> Outcome {
    let ppm = lsb_resolution_ppm(24);
    check((ppm - 5.96e-2).abs() < 5e-4, format!("24 bit LSB = {ppm:.4e} ppm"))
}

fn synthetic_a3() -> TimeSeries {
    let (f0, rate, amp) = (12.0, 12_000.0, 118.5e-6);
    let n = 20 * 1000;
    let sigma = amp / 2f64.sqrt() * 10f64.powf(-110.0 / 20.0);
    let noise = gaussian_noise(&NoiseSource::new(2024, sigma), n);
    let x = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            amp * (TAU * f0 * t).sin() + amp * 1e-5 * (2.0 * TAU * f0 * t + 0.4).sin() + noise[i]
        })
        .collect();
    TimeSeries::new(rate, x, Unit::Meter).unwrap()
}

fn cli_analyze(csv: &std::path::Path, convert: Option<&str>) -> serde_json::Value {
    let json = csv.with_extension(format!("{}.json", convert.unwrap_or("raw")));
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_airbench"));
    cmd.args(["analyze", "--in"]).arg(csv).args(["--channel", "x_m", "--f0", "12", "--json"]).arg(&json);
    if let Some(c) = convert {
        cmd.args(["--convert", c]);
    }
    let out = cmd.output().expect("run airbench");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap()
}

fn a3() -> Outcome {
    let ts = synthetic_a3();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("synthetic.csv");
    let mut text = String::from("time_s,x_m\n");
    for (i, v) in ts.samples().iter().enumerate() {
        text.push_str(&format!("{:.16e},{:.16e}\n", ts.time_at(i), v));
    }
    std::fs::write(&csv, text).unwrap();
    let raw = cli_analyze(&csv, None);
    let vel = cli_analyze(&csv, Some("vel"));
    let dbc2 = raw["harmonics"][0]["dbc"].as_f64().unwrap();
    let snr = raw["snr_db"].as_f64().unwrap();
    let vdbc2 = vel["harmonics"][0]["dbc"].as_f64().unwrap();
    let pass = (dbc2 + 100.0).abs() <= 0.5 && (snr - 110.0).abs() <= 2.0 && (vdbc2 + 94.0).abs() <= 0.5;
    check(pass, format!("dbc2 {dbc2:.2} dB, snr {snr:.2} dB, velocity dbc2 {vdbc2:.2} dB"))
}

fn a4(tuned: &PresetRun) -> Outcome {
    let rec = &tuned.record;
    let f0 = tuned.scenario.profile.frequency_hz;
    let dut = analyze_converted(&rec.dut_out, f0, 10, Unit::MeterPerS).unwrap();
    let dbc2 = dut.harmonic(2).unwrap().dbc;
    let others = dut.harmonics.iter().filter(|h| h.k != 2).map(|h| h.dbc).fold(f64::NEG_INFINITY, f64::max);
    let ldv = coherent_spectrum(&rec.ldv_vel, f0, 10).unwrap().worst_dbc();
    let enc = analyze_converted(&rec.enc_pos, f0, 10, Unit::MeterPerS).unwrap().worst_dbc();
    let pass = rel(dut.thd_percent, 0.0052) <= 0.1 && dbc2 >= others + 10.0 && ldv <= -94.0 && enc <= -94.0;
    check(
        pass,
        format!(
            "DUT THD {:.5} %, dbc2 {dbc2:.1} dB vs others {others:.1} dB; stage worst: LDV {ldv:.1} dB, encoder {enc:.1} dB",
            dut.thd_percent
        ),
    )
}

fn a5(untuned: &PresetRun, tuned: &PresetRun) -> Outcome {
    let ma = untuned.metrics().unwrap();
    let mb = tuned.metrics().unwrap();
    let pass = ma.stuck_intervals_per_period >= 2.0
        && mb.stuck_intervals_per_period == 0.0
        && mb.deviation_p2p_m <= ma.deviation_p2p_m / 5.0;
    check(
        pass,
        format!(
            "stuck/period untuned {} tuned {}; p2p untuned {:.3e} m tuned {:.3e} m",
            ma.stuck_intervals_per_period, mb.stuck_intervals_per_period, ma.deviation_p2p_m, mb.deviation_p2p_m
        ),
    )
}

fn a6(ilc: &PresetRun) -> Outcome {
    let h = ilc.history.as_ref().unwrap();
    let rms = h.rms_series();
    let monotone = rms.iter().take(10).collect::<Vec<_>>().windows(2).all(|w| w[1] <= w[0]);
    let last = h.last().unwrap();
    let pass = monotone && last.rms_error_m <= rms[0] / 10.0 && last.p2p_error_m <= 10e-9;
    check(
        pass,
        format!(
            "monotone first 10: {monotone}; rms {:.3e} -> {:.3e} m ({:.1}x); final p2p {:.3e} m",
            rms[0],
            last.rms_error_m,
            rms[0] / last.rms_error_m,
            last.p2p_error_m
        ),
    )
}

fn a7(tuned: &PresetRun) -> Outcome {
    let rec = &tuned.record;
    let d = deviation(&rec.enc_pos, &rec.ref_pos, tuned.scenario.profile.frequency_hz, 10).unwrap();
    check(d.harmonic_power_fraction >= 0.8, format!("harmonic power fraction {:.3}", d.harmonic_power_fraction))
}

fn a8() -> Outcome {
    let mut failures = Vec::new();

    // Parseval: harmonic powers plus residual equal the AC power
    for seed in 0..20u64 {
        let n = 3000;
        let noise = gaussian_noise(&NoiseSource::new(seed, 1e-3), n);
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / 3000.0;
                0.2 + (TAU * 10.0 * t + seed as f64).sin()
                    + 0.01 * (TAU * 20.0 * t).cos()
                    + 0.003 * (TAU * 70.0 * t + 1.0).sin()
                    + noise[i]
            })
            .collect();
        let ts = TimeSeries::new(3000.0, x, Unit::Meter).unwrap();
        let r = coherent_spectrum(&ts, 10.0, 10).unwrap();
        let mean = ts.mean();
        let ac = rms(&ts.with_samples(ts.samples().iter().map(|v| v - mean).collect(), Unit::Meter).unwrap()).powi(2);
        let parts = r.fundamental_amplitude.powi(2) / 2.0
            + r.harmonics.iter().map(|h| h.amplitude.powi(2) / 2.0).sum::<f64>()
            + r.residual_rms.powi(2);
        if rel(parts, ac) >= 1e-9 {
            failures.push(format!("parseval seed {seed}: {:.2e}", rel(parts, ac)));
        }
    }

    // dBc scaling round trips
    for k in 2..=10 {
        for dir in [ScalingDirection::DispToVel, ScalingDirection::VelToAcc, ScalingDirection::AccToVel, ScalingDirection::VelToDisp] {
            let back = harmonic_scaling(harmonic_scaling(-100.0, k, dir), k, dir.inverse());
            if (back + 100.0).abs() > 1e-12 {
                failures.push(format!("scaling k={k}"));
            }
        }
    }

    // quantization idempotence
    let enc = EncoderModel::default();
    for i in 0..10_000 {
        let x = (i as f64 * 0.618_033_988_7).sin() * 1e-4;
        let q = encoder_read(x, &enc, 0.0);
        if encoder_read(q, &enc, 0.0) != q {
            failures.push(format!("quantization at {x:e}"));
            break;
        }
    }

    // stick and breakaway
    let fr = FrictionParams { coulomb_n: 0.05, breakaway_n: 0.12, stribeck_velocity_mps: 1e-4, stick_band_mps: 1e-6 };
    if friction_force(0.0, 0.1, &fr) != -0.1 || friction_force(0.0, 0.5, &fr) != -0.12 {
        failures.push("stick/breakaway force".into());
    }
    let params = StageParams { cable_stiffness_n_per_m: 0.0, ..StageParams::default() };
    let held = step_dynamics(StageState::at_rest(0.0), 0.1, &params, &fr, 1e-5).unwrap();
    let freed = step_dynamics(StageState::at_rest(0.0), 0.2, &params, &fr, 1e-5).unwrap();
    if !(held.stuck && held.velocity_mps == 0.0 && !freed.stuck && freed.velocity_mps > 0.0) {
        failures.push("stick/breakaway motion".into());
    }

    // energy drift of a 5 Hz oscillator over 1000 periods
    let m = 3.0;
    let k = m * (TAU * 5.0).powi(2);
    let osc = StageParams {
        moving_mass_kg: m,
        viscous_damping_n_s_per_m: 0.0,
        cable_stiffness_n_per_m: k,
        stroke_limit_m: 1.0,
        max_force_n: 100.0,
    };
    let none = FrictionParams::frictionless();
    let energy = |s: &StageState| 0.5 * m * s.velocity_mps.powi(2) + 0.5 * k * s.position_m.powi(2);
    let mut s = StageState::at_rest(1e-3);
    let e0 = energy(&s);
    let steps = (0.2 / DEFAULT_DT_S).round() as usize;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        for _ in 0..steps {
            s = step_dynamics(s, 0.0, &osc, &none, DEFAULT_DT_S).unwrap();
        }
        worst = worst.max(rel(energy(&s), e0));
    }
    if worst >= 1e-3 {
        failures.push(format!("energy drift {worst:.2e}"));
    }

    // seed determinism
    let sc = parse_scenario_file(preset_file(PresetName::Fig2bTuned)).unwrap().scenario;
    if simulate(&sc).unwrap() != simulate(&sc).unwrap() {
        failures.push("reruns differ".into());
    }

    let detail = if failures.is_empty() {
        format!("parseval, scaling, quantization, friction, energy drift {worst:.1e}, determinism")
    } else {
        failures.join("; ")
    };
    check(failures.is_empty(), detail)
}

fn main() -> ExitCode {
    let untuned = run_preset(PresetName::Fig2aUntuned).unwrap();
    let tuned = run_preset(PresetName::Fig2bTuned).unwrap();
    let ilc = run_preset(PresetName::Fig3Ilc).unwrap();
    let results = [
        ("A1 envelope endpoints", a1()),
        ("A2 ADC resolution", a2()),
        ("A3 analyzer floor", a3()),
        ("A4 DUT THD discrimination", a4(&tuned)),
        ("A5 stick-slip phenomenology", a5(&untuned, &tuned)),
        ("A6 ILC convergence", a6(&ilc)),
        ("A7 error periodicity", a7(&tuned)),
        ("A8 property suites", a8()),
    ];
    let mut all = true;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        all &= o.pass;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
