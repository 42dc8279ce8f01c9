//! Coherent harmonic analysis: per-harmonic dBc, THD, SNR, domain conversion,
//! tracking deviation statistics and deviation magnification.
//!
//! Every measurement here assumes the record spans an integer number of
//! fundamental periods. Harmonic `k` then sits exactly on DFT bin `k * P`
//! (P = period count), so no window is applied and nothing leaks between bins.
//! Records that are not coherent are rejected rather than windowed.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Serialize, Serializer};
use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::signalcore::{rms, rms_of, TimeSeries, Unit};

pub const DEFAULT_HARMONICS: usize = 10;

/// Non-finite values (e.g. -inf dBc for an exactly zero harmonic) serialize as null.
fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Harmonic {
    pub k: usize,
    pub amplitude: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub dbc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub f0_hz: f64,
    pub fundamental_amplitude: f64,
    pub harmonics: Vec<Harmonic>,
    pub thd_percent: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub snr_db: f64,
    pub residual_rms: f64,
    pub n_harmonics: usize,
    #[serde(skip)]
    pub unit: Unit,
}

impl SpectrumReport {
    fn assemble(f0_hz: f64, unit: Unit, amplitudes: &[f64], residual_rms: f64) -> Self {
        let fundamental = amplitudes[0];
        let harmonics = amplitudes
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &a)| Harmonic { k: i + 1, amplitude: a, dbc: 20.0 * (a / fundamental).log10() })
            .collect::<Vec<_>>();
        let mut report = Self {
            f0_hz,
            fundamental_amplitude: fundamental,
            harmonics,
            thd_percent: 0.0,
            snr_db: 20.0 * ((fundamental / 2f64.sqrt()) / residual_rms).log10(),
            residual_rms,
            n_harmonics: amplitudes.len(),
            unit,
        };
        report.thd_percent = thd_percent(&report);
        report
    }

    pub fn harmonic(&self, k: usize) -> Option<&Harmonic> {
        self.harmonics.iter().find(|h| h.k == k)
    }

    /// Largest harmonic level, dBc, over k = 2..n.
    pub fn worst_dbc(&self) -> f64 {
        self.harmonics.iter().map(|h| h.dbc).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text table; THD shown with two significant figures.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "f0            {:>14.6} Hz", self.f0_hz);
        let _ = writeln!(s, "fundamental   {:>14.6e} {}", self.fundamental_amplitude, self.unit);
        let _ = writeln!(s, "THD           {:>14} %", two_significant(self.thd_percent));
        let _ = writeln!(s, "SNR           {:>14.2} dB", self.snr_db);
        let _ = writeln!(s, "residual rms  {:>14.6e} {}", self.residual_rms, self.unit);
        let _ = writeln!(s, "{:>3}  {:>14}  {:>9}", "k", "amplitude", "dBc");
        for h in &self.harmonics {
            let _ = writeln!(s, "{:>3}  {:>14.6e}  {:>9.2}", h.k, h.amplitude, h.dbc);
        }
        s
    }
}

/// Formats a non-negative value to two significant figures, e.g. 0.0052.
pub fn two_significant(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let decimals = (1 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{:.*}", decimals, v)
}

/// `100 * sqrt(sum of harmonic amplitudes^2) / fundamental`, k = 2..n.
pub fn thd_percent(report: &SpectrumReport) -> f64 {
    let sum_sq: f64 = report.harmonics.iter().map(|h| h.amplitude * h.amplitude).sum();
    100.0 * sum_sq.sqrt() / report.fundamental_amplitude
}

/// Coherent layout of a record: period count and the exact fundamental frequency
/// of bin `periods`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    pub periods: usize,
    pub n: usize,
    pub bin_f0_hz: f64,
}

pub fn coherence(ts: &TimeSeries, f0: f64) -> Result<Coherence> {
    if !(f0.is_finite() && f0 > 0.0) {
        return Err(Error::Analysis(format!("f0 must be > 0, got {f0}")));
    }
    let n = ts.len();
    let fs = ts.sample_rate_hz();
    let exact = n as f64 * f0 / fs;
    let periods = exact.round();
    if periods < 2.0 {
        return Err(Error::Analysis(format!(
            "record spans {exact:.3} periods of {f0} Hz; at least 2 are required"
        )));
    }
    // distance, in samples, between the record length and the nearest whole-period length
    let slip = (n as f64 - periods * fs / f0).abs();
    if slip > 0.5 {
        return Err(Error::Analysis(format!(
            "record spans {exact:.4} periods of {f0} Hz, not an integer count (off by {slip:.2} samples)"
        )));
    }
    let periods = periods as usize;
    Ok(Coherence { periods, n, bin_f0_hz: periods as f64 * fs / n as f64 })
}

/// Cosine and sine coefficients of the harmonics of a coherent record.
#[derive(Debug, Clone)]
struct Projection {
    mean: f64,
    /// (cos, sin) coefficient pairs for k = 1..=n_harmonics
    coeffs: Vec<(f64, f64)>,
    coh: Coherence,
}

struct TrigTable {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigTable {
    fn new(n: usize) -> Self {
        let (sin, cos) = (0..n).map(|j| (TAU * j as f64 / n as f64).sin_cos()).unzip();
        Self { cos, sin }
    }
}

fn project(ts: &TimeSeries, f0: f64, n_harmonics: usize) -> Result<(Projection, TrigTable)> {
    let coh = coherence(ts, f0)?;
    if n_harmonics < 1 {
        return Err(Error::Analysis("at least one harmonic is required".into()));
    }
    let nyquist = ts.sample_rate_hz() / 2.0;
    if n_harmonics as f64 * f0 >= nyquist || 2 * n_harmonics * coh.periods >= coh.n {
        return Err(Error::Analysis(format!(
            "harmonic {n_harmonics} of {f0} Hz is not below Nyquist ({nyquist} Hz)"
        )));
    }
    let x = ts.samples();
    let n = coh.n;
    let mean = ts.mean();
    let table = TrigTable::new(n);
    let coeffs = (1..=n_harmonics)
        .map(|k| {
            let bin = k * coh.periods;
            let (mut c, mut s) = (0.0, 0.0);
            for (i, &v) in x.iter().enumerate() {
                let j = (bin * i) % n;
                c += (v - mean) * table.cos[j];
                s += (v - mean) * table.sin[j];
            }
            (2.0 * c / n as f64, 2.0 * s / n as f64)
        })
        .collect();
    Ok((Projection { mean, coeffs, coh }, table))
}

impl Projection {
    fn amplitudes(&self) -> Vec<f64> {
        self.coeffs.iter().map(|(c, s)| c.hypot(*s)).collect()
    }

    /// Sum of the harmonic components with the given coefficients (no mean).
    fn synthesize(&self, coeffs: &[(f64, f64)], table: &TrigTable) -> Vec<f64> {
        let n = self.coh.n;
        (0..n)
            .map(|i| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(idx, (c, s))| {
                        let j = ((idx + 1) * self.coh.periods * i) % n;
                        c * table.cos[j] + s * table.sin[j]
                    })
                    .sum()
            })
            .collect()
    }

    fn residual(&self, ts: &TimeSeries, table: &TrigTable) -> Vec<f64> {
        let fitted = self.synthesize(&self.coeffs, table);
        ts.samples().iter().zip(fitted).map(|(v, f)| v - self.mean - f).collect()
    }
}

/// Single-bin projections at `k * f0` for k = 1..=n_harmonics, plus SNR against
/// what is left after removing the mean and all of those harmonics.
pub fn coherent_spectrum(ts: &TimeSeries, f0: f64, n_harmonics: usize) -> Result<SpectrumReport> {
    if n_harmonics < 2 {
        return Err(Error::Analysis("n_harmonics must be >= 2".into()));
    }
    let (proj, table) = project(ts, f0, n_harmonics)?;
    let residual = proj.residual(ts, &table);
    Ok(SpectrumReport::assemble(f0, ts.unit(), &proj.amplitudes(), rms_of(&residual)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingDirection {
    DispToVel,
    VelToAcc,
    AccToVel,
    VelToDisp,
}

impl ScalingDirection {
    /// +1 for differentiation, -1 for integration.
    pub fn order(self) -> i32 {
        match self {
            ScalingDirection::DispToVel | ScalingDirection::VelToAcc => 1,
            ScalingDirection::AccToVel | ScalingDirection::VelToDisp => -1,
        }
    }

    pub fn inverse(self) -> Self {
        match self {
            ScalingDirection::DispToVel => ScalingDirection::VelToDisp,
            ScalingDirection::VelToDisp => ScalingDirection::DispToVel,
            ScalingDirection::VelToAcc => ScalingDirection::AccToVel,
            ScalingDirection::AccToVel => ScalingDirection::VelToAcc,
        }
    }
}

/// dBc of harmonic `k` after one differentiation or integration.
pub fn harmonic_scaling(dbc_k: f64, k: usize, direction: ScalingDirection) -> f64 {
    dbc_k + direction.order() as f64 * 20.0 * (k as f64).log10()
}

fn order_change(from: Unit, to: Unit) -> Result<i32> {
    match (from.motion_order(), to.motion_order()) {
        (Some(a), Some(b)) => Ok(b - a),
        _ => Err(Error::Analysis(format!("cannot convert {from} to {to}"))),
    }
}

/// Rotates and scales one harmonic's (cos, sin) pair by `(j w)^order`.
fn convert_coeffs(c: f64, s: f64, w: f64, order: i32) -> (f64, f64) {
    let (mut c, mut s) = (c, s);
    if order >= 0 {
        for _ in 0..order {
            (c, s) = (w * s, -w * c);
        }
    } else {
        for _ in 0..-order {
            (c, s) = (-s / w, c / w);
        }
    }
    (c, s)
}

/// Converts between displacement, velocity and acceleration by scaling each
/// harmonic k by `(2 pi k f0)^order` with the matching 90 degree phase turns.
/// The output holds only harmonics 1..=n_harmonics: the mean and any content
/// between harmonic bins are dropped.
pub fn convert_domain(ts: &TimeSeries, to: Unit, f0: f64, n_harmonics: usize) -> Result<TimeSeries> {
    let order = order_change(ts.unit(), to)?;
    let (proj, table) = project(ts, f0, n_harmonics)?;
    let w0 = TAU * proj.coh.bin_f0_hz;
    let coeffs: Vec<(f64, f64)> = proj
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &(c, s))| convert_coeffs(c, s, (i + 1) as f64 * w0, order))
        .collect();
    ts.with_samples(proj.synthesize(&coeffs, &table), to)
}

/// RMS of `x` after applying `(j 2 pi f)^order` to every DFT bin. The DC bin
/// is dropped, as is the Nyquist bin of an even-length record.
fn spectral_rms(x: &[f64], rate_hz: f64, order: i32) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let mut power = 0.0;
    for (j, c) in buf.iter().enumerate().skip(1) {
        if 2 * j == n {
            continue;
        }
        let f = j.min(n - j) as f64 * rate_hz / n as f64;
        power += c.norm_sqr() * (TAU * f).powi(2 * order);
    }
    (power).sqrt() / n as f64
}

/// Analyses `ts` in its own domain, then expresses the report in `to`.
///
/// Harmonics are rescaled bin by bin (so dBc shifts by `20 log10(k)` per order
/// of differentiation) and the residual is carried through the same spectral
/// weighting, giving an SNR for the converted domain.
pub fn analyze_converted(ts: &TimeSeries, f0: f64, n_harmonics: usize, to: Unit) -> Result<SpectrumReport> {
    let order = order_change(ts.unit(), to)?;
    if order == 0 {
        return coherent_spectrum(ts, f0, n_harmonics);
    }
    if n_harmonics < 2 {
        return Err(Error::Analysis("n_harmonics must be >= 2".into()));
    }
    let (proj, table) = project(ts, f0, n_harmonics)?;
    let residual = proj.residual(ts, &table);
    let w0 = TAU * proj.coh.bin_f0_hz;
    let amplitudes: Vec<f64> = proj
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| a * ((i + 1) as f64 * w0).powi(order))
        .collect();
    let residual_rms = spectral_rms(&residual, ts.sample_rate_hz(), order);
    Ok(SpectrumReport::assemble(f0, to, &amplitudes, residual_rms))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub error: TimeSeries,
    pub rms_m: f64,
    pub p2p_m: f64,
    /// Share of total error power (mean square, DC included) carried by harmonics 1..=n of f0.
    pub harmonic_power_fraction: f64,
}

impl DeviationReport {
    pub fn to_table(&self) -> String {
        let unit = self.error.unit();
        format!(
            "rms                      {:>14.6e} {unit}\np2p                      {:>14.6e} {unit}\nharmonic power fraction  {:>14.6}\n",
            self.rms_m, self.p2p_m, self.harmonic_power_fraction
        )
    }
}

fn check_same_grid(a: &TimeSeries, b: &TimeSeries) -> Result<()> {
    if !a.same_grid(b) {
        return Err(Error::Mismatch(format!(
            "series differ in grid: {} samples @ {} Hz vs {} samples @ {} Hz",
            a.len(),
            a.sample_rate_hz(),
            b.len(),
            b.sample_rate_hz()
        )));
    }
    if a.unit() != b.unit() {
        return Err(Error::Mismatch(format!("units differ: {} vs {}", a.unit(), b.unit())));
    }
    Ok(())
}

pub fn deviation(measured: &TimeSeries, nominal: &TimeSeries, f0: f64, n_harmonics: usize) -> Result<DeviationReport> {
    check_same_grid(measured, nominal)?;
    let err: Vec<f64> = measured.samples().iter().zip(nominal.samples()).map(|(m, n)| m - n).collect();
    let error = measured.with_samples(err, measured.unit())?;
    let (proj, _) = project(&error, f0, n_harmonics)?;
    let total = rms(&error).powi(2);
    let harmonic: f64 = proj.amplitudes().iter().map(|a| a * a / 2.0).sum();
    let fraction = if total > 0.0 { (harmonic / total).min(1.0) } else { 0.0 };
    Ok(DeviationReport {
        rms_m: rms(&error),
        p2p_m: error.peak_to_peak(),
        harmonic_power_fraction: fraction,
        error,
    })
}

/// `nominal + k (measured - nominal)`: the deviation-magnified plotting trace.
pub fn magnify_deviation(nominal: &TimeSeries, measured: &TimeSeries, k: f64) -> Result<TimeSeries> {
    check_same_grid(measured, nominal)?;
    let out = nominal
        .samples()
        .iter()
        .zip(measured.samples())
        .map(|(n, m)| n + k * (m - n))
        .collect();
    nominal.with_samples(out, nominal.unit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalcore::{gaussian_noise, NoiseSource};

    const RATE: f64 = 12_000.0;
    const F0: f64 = 12.0;

    fn tones(periods: usize, parts: &[(usize, f64, f64)], unit: Unit) -> TimeSeries {
        let n = periods * 1000;
        let v = (0..n)
            .map(|i| {
                let t = i as f64 / RATE;
                parts.iter().map(|&(k, a, ph)| a * (TAU * k as f64 * F0 * t + ph).sin()).sum()
            })
            .collect();
        TimeSeries::new(RATE, v, unit).unwrap()
    }

    #[test]
    fn pure_sine_is_exact() {
        let a = 118.5e-6;
        let r = coherent_spectrum(&tones(4, &[(1, a, 0.3)], Unit::Meter), F0, 10).unwrap();
        assert!((r.fundamental_amplitude - a).abs() <= 1e-9 * a);
        assert!(r.thd_percent < 1e-7);
        assert!(r.harmonics.iter().all(|h| h.dbc < -140.0));
        assert_eq!(r.harmonics.len(), 9);
        assert_eq!(r.harmonics[0].k, 2);
    }

    #[test]
    fn injected_second_harmonic_at_minus_94() {
        let a = 1.0;
        let ratio = 10f64.powf(-94.0 / 20.0);
        let ts = tones(4, &[(1, a, 0.0), (2, a * ratio, 1.0)], Unit::MeterPerS);
        let r = coherent_spectrum(&ts, F0, 10).unwrap();
        assert!((r.harmonic(2).unwrap().dbc + 94.0).abs() < 0.1);
    }

    #[test]
    fn snr_with_white_noise() {
        let a = 118.5e-6;
        let sigma = a / 2f64.sqrt() * 10f64.powf(-110.0 / 20.0);
        let clean = tones(20, &[(1, a, 0.0)], Unit::Meter);
        let noise = gaussian_noise(&NoiseSource::new(3, sigma), clean.len());
        let noisy: Vec<f64> = clean.samples().iter().zip(&noise).map(|(x, n)| x + n).collect();
        let r = coherent_spectrum(&clean.with_samples(noisy, Unit::Meter).unwrap(), F0, 10).unwrap();
        assert!((r.snr_db - 110.0).abs() < 2.0, "{}", r.snr_db);
    }

    #[test]
    fn rejects_incoherent_records() {
        let ts = TimeSeries::new(RATE, vec![0.0; 2500], Unit::Meter).unwrap();
        assert!(matches!(coherent_spectrum(&ts, F0, 10), Err(Error::Analysis(_))));
        let one = TimeSeries::new(RATE, vec![0.0; 1000], Unit::Meter).unwrap();
        assert!(coherent_spectrum(&one, F0, 10).is_err());
        // within half a sample is accepted
        let near = tones(2, &[(1, 1.0, 0.0)], Unit::Meter);
        assert!(coherent_spectrum(&near, F0 * (1.0 + 1e-4), 10).is_ok());
    }

    #[test]
    fn rejects_harmonics_above_nyquist() {
        let ts = tones(2, &[(1, 1.0, 0.0)], Unit::Meter);
        assert!(coherent_spectrum(&ts, F0, 500).is_err());
        assert!(coherent_spectrum(&ts, F0, 499).is_ok());
    }

    #[test]
    fn thd_examples() {
        let mk = |amps: &[f64]| SpectrumReport::assemble(F0, Unit::Meter, amps, 1e-9);
        assert!((mk(&[1.0, 5.2e-5]).thd_percent - 0.0052).abs() < 1e-12);
        assert!((mk(&[1.0, 3e-5, 4e-5]).thd_percent - 0.005).abs() < 1e-12);
        assert!(mk(&[1.0, 0.0, 0.0]).thd_percent == 0.0);
    }

    #[test]
    fn dbc_definition() {
        let r = SpectrumReport::assemble(F0, Unit::Meter, &[2.0, 2e-3, 2e-5], 1e-9);
        assert!((r.harmonics[0].dbc + 60.0).abs() < 1e-12);
        assert!((r.harmonics[1].dbc + 100.0).abs() < 1e-12);
    }

    #[test]
    fn two_sig_figs() {
        assert_eq!(two_significant(0.0052), "0.0052");
        assert_eq!(two_significant(0.005213), "0.0052");
        assert_eq!(two_significant(12.34), "12");
        assert_eq!(two_significant(1.234), "1.2");
    }

    #[test]
    fn displacement_to_velocity_amplitude() {
        let a = 118.5e-6;
        let x = tones(2, &[(1, a, 0.0)], Unit::Meter);
        let v = convert_domain(&x, Unit::MeterPerS, F0, 10).unwrap();
        assert_eq!(v.unit(), Unit::MeterPerS);
        let expect: Vec<f64> = (0..x.len()).map(|i| TAU * F0 * a * (TAU * F0 * i as f64 / RATE).cos()).collect();
        for (got, want) in v.samples().iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12 * TAU * F0 * a);
        }
    }

    #[test]
    fn round_trip_meter_velocity_meter() {
        let x = tones(3, &[(1, 1e-4, 0.2), (2, 3e-7, 1.0), (5, 1e-8, -0.4)], Unit::Meter);
        let v = convert_domain(&x, Unit::MeterPerS, F0, 10).unwrap();
        let back = convert_domain(&v, Unit::Meter, F0, 10).unwrap();
        let scale = rms(&x);
        for (a, b) in back.samples().iter().zip(x.samples()) {
            assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn unsupported_conversion() {
        let f = TimeSeries::new(RATE, vec![0.0; 2000], Unit::Newton).unwrap();
        assert!(convert_domain(&f, Unit::Meter, F0, 10).is_err());
    }

    #[test]
    fn converted_report_shifts_dbc() {
        let ratio = 10f64.powf(-100.0 / 20.0);
        let x = tones(4, &[(1, 1e-4, 0.0), (2, 1e-4 * ratio, 0.0)], Unit::Meter);
        let r = analyze_converted(&x, F0, 10, Unit::MeterPerS).unwrap();
        assert!((r.harmonic(2).unwrap().dbc + 93.9794).abs() < 1e-3);
        assert!((r.fundamental_amplitude - 1e-4 * TAU * F0).abs() < 1e-12);
        assert_eq!(r.unit, Unit::MeterPerS);
    }

    #[test]
    fn harmonic_scaling_pairs() {
        let v = harmonic_scaling(-100.0, 2, ScalingDirection::DispToVel);
        assert!((v + 93.98).abs() < 0.005);
        let d = harmonic_scaling(-94.0, 2, ScalingDirection::VelToDisp);
        assert!((d + 100.02).abs() < 0.005);
        assert_eq!(harmonic_scaling(-70.0, 1, ScalingDirection::VelToAcc), -70.0);
    }

    #[test]
    fn deviation_examples() {
        let nominal = tones(2, &[(1, 1e-4, 0.0)], Unit::Meter);
        let same = deviation(&nominal, &nominal, F0, 10).unwrap();
        assert_eq!(same.rms_m, 0.0);
        assert_eq!(same.p2p_m, 0.0);

        let measured = tones(2, &[(1, 1e-4, 0.0), (2, 3e-9, 0.7)], Unit::Meter);
        let d = deviation(&measured, &nominal, F0, 10).unwrap();
        assert!((d.harmonic_power_fraction - 1.0).abs() < 1e-6);
    }

    #[test]
    fn deviation_of_white_noise() {
        // flat spectrum: 10 of N/2 bins carry the harmonic share
        let nominal = tones(10, &[(1, 1e-4, 0.0)], Unit::Meter);
        let noise = gaussian_noise(&NoiseSource::new(11, 1e-9), nominal.len());
        let m: Vec<f64> = nominal.samples().iter().zip(&noise).map(|(a, b)| a + b).collect();
        let d = deviation(&nominal.with_samples(m, Unit::Meter).unwrap(), &nominal, F0, 10).unwrap();
        let expect = 10.0 / (nominal.len() as f64 / 2.0);
        assert!((d.harmonic_power_fraction - expect).abs() <= 0.5 * expect, "{}", d.harmonic_power_fraction);
    }

    #[test]
    fn deviation_mismatch() {
        let a = tones(2, &[(1, 1.0, 0.0)], Unit::Meter);
        let b = tones(3, &[(1, 1.0, 0.0)], Unit::Meter);
        assert!(matches!(deviation(&a, &b, F0, 10), Err(Error::Mismatch(_))));
        let c = tones(2, &[(1, 1.0, 0.0)], Unit::MeterPerS);
        assert!(matches!(deviation(&a, &c, F0, 10), Err(Error::Mismatch(_))));
    }

    #[test]
    fn magnify_examples() {
        let nominal = tones(2, &[(1, 1e-4, 0.0)], Unit::Meter);
        let measured: Vec<f64> = nominal.samples().iter().map(|v| v + 1e-9).collect();
        let measured = nominal.with_samples(measured, Unit::Meter).unwrap();
        assert_eq!(magnify_deviation(&nominal, &measured, 1.0).unwrap(), measured);
        assert_eq!(magnify_deviation(&nominal, &measured, 0.0).unwrap(), nominal);
        let big = magnify_deviation(&nominal, &measured, 200.0).unwrap();
        for (b, n) in big.samples().iter().zip(nominal.samples()) {
            assert!((b - n - 200e-9).abs() < 1e-15);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        #[test]
        fn parseval_audit(a1 in 1e-6f64..1.0, r2 in 0.0f64..0.1, r3 in 0.0f64..0.1,
                          ph in 0.0f64..TAU, sigma in 0.0f64..1e-2, seed in 0u64..1000, dc in -1.0f64..1.0) {
            let clean = tones(3, &[(1, a1, ph), (2, a1 * r2, 0.3), (7, a1 * r3, 2.0)], Unit::Meter);
            let noise = gaussian_noise(&NoiseSource::new(seed, sigma * a1), clean.len());
            let x: Vec<f64> = clean.samples().iter().zip(&noise).map(|(c, n)| c + n + dc).collect();
            let ts = clean.with_samples(x, Unit::Meter).unwrap();
            let r = coherent_spectrum(&ts, F0, 10).unwrap();
            let mean = ts.mean();
            let total = rms_of(&ts.samples().iter().map(|v| v - mean).collect::<Vec<_>>()).powi(2);
            let parts = r.fundamental_amplitude.powi(2) / 2.0
                + r.harmonics.iter().map(|h| h.amplitude.powi(2) / 2.0).sum::<f64>()
                + r.residual_rms.powi(2);
            proptest::prop_assert!(((parts - total) / total).abs() < 1e-9);
        }

        #[test]
        fn scale_invariance(c in 1e-6f64..1e6, r2 in 1e-6f64..1e-2) {
            let ts = tones(2, &[(1, 1.0, 0.1), (2, r2, 0.5), (3, r2 / 3.0, 0.0)], Unit::Meter);
            let noise = gaussian_noise(&NoiseSource::new(1, 1e-6), ts.len());
            let x: Vec<f64> = ts.samples().iter().zip(&noise).map(|(a, b)| a + b).collect();
            let base = ts.with_samples(x.clone(), Unit::Meter).unwrap();
            let scaled = ts.with_samples(x.iter().map(|v| v * c).collect(), Unit::Meter).unwrap();
            let r0 = coherent_spectrum(&base, F0, 10).unwrap();
            let r1 = coherent_spectrum(&scaled, F0, 10).unwrap();
            proptest::prop_assert!((r1.fundamental_amplitude / r0.fundamental_amplitude / c - 1.0).abs() < 1e-9);
            proptest::prop_assert!((r1.thd_percent - r0.thd_percent).abs() <= 1e-9 * r0.thd_percent);
            proptest::prop_assert!((r1.snr_db - r0.snr_db).abs() < 1e-6);
            for (h0, h1) in r0.harmonics.iter().zip(&r1.harmonics) {
                proptest::prop_assert!((h0.dbc - h1.dbc).abs() < 1e-6);
            }
        }

        #[test]
        fn scaling_round_trip(dbc in -200.0f64..0.0, k in 1usize..50) {
            for d in [ScalingDirection::DispToVel, ScalingDirection::VelToAcc,
                      ScalingDirection::AccToVel, ScalingDirection::VelToDisp] {
                let back = harmonic_scaling(harmonic_scaling(dbc, k, d), k, d.inverse());
                proptest::prop_assert!((back - dbc).abs() < 1e-12);
            }
        }

        #[test]
        fn analyzer_linearity(log_r in -7.0f64..-1.0, k in 2usize..10, ph in 0.0f64..TAU) {
            let r = 10f64.powf(log_r);
            let ts = tones(2, &[(1, 0.37, 0.4), (k, 0.37 * r, ph)], Unit::Meter);
            let rep = coherent_spectrum(&ts, F0, 10).unwrap();
            proptest::prop_assert!((rep.harmonic(k).unwrap().dbc - 20.0 * log_r).abs() < 0.1);
        }
    }
}
