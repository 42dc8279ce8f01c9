use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::signalcore::{TimeSeries, Unit};

pub const RUN_CSV_HEADER: [&str; 7] =
    ["time_s", "ref_pos_m", "true_pos_m", "enc_pos_m", "ldv_vel_mps", "dut_out", "force_N"];

/// Captured window of one closed-loop run, all channels on the control-rate grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub ref_pos: TimeSeries,
    pub true_pos: TimeSeries,
    pub enc_pos: TimeSeries,
    pub ldv_vel: TimeSeries,
    pub dut_out: TimeSeries,
    pub force: TimeSeries,
    /// Simulation truth, kept for diagnostics; not part of the CSV.
    pub true_vel: TimeSeries,
    pub fingerprint: String,
    pub stroke_contact: bool,
    pub warnings: Vec<String>,
}

impl RunRecord {
    /// CSV channels in column order, without the time column.
    pub fn channels(&self) -> [(&'static str, &TimeSeries); 6] {
        [
            ("ref_pos_m", &self.ref_pos),
            ("true_pos_m", &self.true_pos),
            ("enc_pos_m", &self.enc_pos),
            ("ldv_vel_mps", &self.ldv_vel),
            ("dut_out", &self.dut_out),
            ("force_N", &self.force),
        ]
    }

    /// Header row then one row per sample; values carry 17 significant digits,
    /// '.' decimal separator, '\n' line ends.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", RUN_CSV_HEADER.join(","))?;
        let chans = self.channels();
        for i in 0..self.ref_pos.len() {
            write!(out, "{:.16e}", self.ref_pos.time_at(i))?;
            for (_, ts) in &chans {
                write!(out, ",{:.16e}", ts.samples()[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Any CSV with a leading `time_s` column and uniformly sampled channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTable {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub sample_rate_hz: f64,
    pub t0_s: f64,
}

/// Unit implied by a column-name suffix.
fn unit_from_name(name: &str) -> Unit {
    if name.ends_with("_mps2") {
        Unit::MeterPerS2
    } else if name.ends_with("_mps") {
        Unit::MeterPerS
    } else if name.ends_with("_m") {
        Unit::Meter
    } else if name.ends_with("_N") {
        Unit::Newton
    } else if name.ends_with("_V") {
        Unit::Volt
    } else {
        Unit::Dimensionless
    }
}

impl ChannelTable {
    /// Channel as a series. The unit comes from `unit` if given, else from the name suffix.
    pub fn channel(&self, name: &str, unit: Option<Unit>) -> Result<TimeSeries> {
        let idx = self.names.iter().position(|n| n == name).ok_or_else(|| {
            Error::Config(format!("no channel '{name}'; available: {}", self.names.join(", ")))
        })?;
        TimeSeries::with_start(
            self.sample_rate_hz,
            self.columns[idx].clone(),
            unit.unwrap_or_else(|| unit_from_name(name)),
            self.t0_s,
        )
    }
}

pub fn read_channel_table<R: Read>(input: R) -> Result<ChannelTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if headers.first().map(String::as_str) != Some("time_s") {
        return Err(Error::Config("first CSV column must be time_s".into()));
    }
    let mut time = Vec::new();
    let mut columns = vec![Vec::new(); headers.len() - 1];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Config(format!("row {}: missing column {}", row + 2, headers[i])))?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("row {}: column {}: {e}", row + 2, headers[i])))
        };
        time.push(parse(0)?);
        for (c, col) in columns.iter_mut().enumerate() {
            col.push(parse(c + 1)?);
        }
    }
    if time.len() < 2 {
        return Err(Error::Config("CSV needs at least two rows".into()));
    }
    let span = time[time.len() - 1] - time[0];
    if span.is_nan() || span <= 0.0 {
        return Err(Error::Config("time_s must increase".into()));
    }
    let mut rate = (time.len() - 1) as f64 / span;
    // rows carry 17 significant digits, so an integral rate is recovered to ~1e-12
    if (rate - rate.round()).abs() < 1e-6 * rate {
        rate = rate.round();
    }
    Ok(ChannelTable { names: headers[1..].to_vec(), columns, sample_rate_hz: rate, t0_s: time[0] })
}
