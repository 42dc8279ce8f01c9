use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use airbench::analysis::{analyze_converted, coherent_spectrum, deviation, magnify_deviation, DEFAULT_HARMONICS};
use airbench::harness::{parse_scenario_file, read_channel_table, run_preset, simulate, PresetName, RunRecord};
use airbench::servo::ilc_train;
use airbench::harness::simulate_with_command;
use airbench::trajectory::{envelope_table, write_envelope_csv};
use airbench::{Error, Result, Unit};

#[derive(Parser)]
#[command(name = "airbench", version, about = "Air-bearing sine exciter simulator and distortion analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Domain {
    Disp,
    Vel,
    Acc,
}

impl Domain {
    fn unit(self) -> Unit {
        match self {
            Domain::Disp => Unit::Meter,
            Domain::Vel => Unit::MeterPerS,
            Domain::Acc => Unit::MeterPerS2,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Amplitude needed for a peak acceleration at each frequency (CSV to stdout).
    Envelope {
        #[arg(long)]
        accel: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        freqs: Vec<f64>,
    },
    /// Run one scenario file and write the run CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a built-in scenario: fig2a_untuned, fig2b_tuned or fig3_ilc.
    Preset {
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
        /// Iteration history CSV (fig3_ilc only).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Train learned feedforward, then write the history and the final run.
    Ilc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Harmonic report for one channel of a CSV.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        channel: String,
        #[arg(long)]
        f0: f64,
        #[arg(long, default_value_t = DEFAULT_HARMONICS)]
        harmonics: usize,
        /// Report in another motion domain.
        #[arg(long, value_enum)]
        convert: Option<Domain>,
        /// Override the unit implied by the column name (m, mps, mps2, N, V).
        #[arg(long)]
        unit: Option<Unit>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Tracking deviation between two channels.
    Deviation {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        measured: String,
        #[arg(long)]
        nominal: String,
        #[arg(long)]
        f0: f64,
        #[arg(long, default_value_t = DEFAULT_HARMONICS)]
        harmonics: usize,
        /// Magnification for the plot-data CSV.
        #[arg(long)]
        magnify: Option<f64>,
        /// Plot-data CSV (time, nominal, measured, magnified); needs --magnify.
        #[arg(long)]
        plot_out: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_record(record: &RunRecord, out: &Path) -> Result<()> {
    let mut w = create(out)?;
    record.write_csv(&mut w)?;
    w.flush()?;
    for warning in &record.warnings {
        eprintln!("warning: {warning}");
    }
    println!("fingerprint {}", record.fingerprint);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Envelope { accel, freqs } => {
            let table = envelope_table(accel, &freqs)?;
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_envelope_csv(&mut lock, &table)?;
        }
        Command::Simulate { config, out } => {
            let file = parse_scenario_file(&read_text(&config)?)?;
            write_record(&simulate(&file.scenario)?, &out)?;
        }
        Command::Preset { name, out, history } => {
            let name: PresetName = name.parse()?;
            let result = run_preset(name)?;
            write_record(&result.record, &out)?;
            println!("{}", serde_json::to_string_pretty(&result.metrics()?)?);
            match (history, &result.history) {
                (Some(path), Some(h)) => {
                    let mut w = create(&path)?;
                    h.write_csv(&mut w)?;
                    w.flush()?;
                }
                (Some(_), None) => {
                    return Err(Error::Config(format!("preset {} has no learning history", name.as_str())))
                }
                _ => {}
            }
        }
        Command::Ilc { config, history, out } => {
            let file = parse_scenario_file(&read_text(&config)?)?;
            let cfg = file.ilc.ok_or_else(|| Error::Config("config has no [ilc] section".into()))?;
            let h = ilc_train(&file.scenario, &cfg)?;
            let mut w = create(&history)?;
            h.write_csv(&mut w)?;
            w.flush()?;
            let command = &h.last().expect("at least one iteration").command;
            write_record(&simulate_with_command(&file.scenario, Some(command))?, &out)?;
        }
        Command::Analyze { input, channel, f0, harmonics, convert, unit, json } => {
            let table = read_channel_table(File::open(&input)?)?;
            let ts = table.channel(&channel, unit)?;
            let report = match convert {
                Some(d) => analyze_converted(&ts, f0, harmonics, d.unit())?,
                None => coherent_spectrum(&ts, f0, harmonics)?,
            };
            print!("{}", report.to_table());
            if let Some(path) = json {
                let mut w = create(&path)?;
                writeln!(w, "{}", report.to_json()?)?;
                w.flush()?;
            }
        }
        Command::Deviation { input, measured, nominal, f0, harmonics, magnify, plot_out } => {
            let table = read_channel_table(File::open(&input)?)?;
            let m = table.channel(&measured, None)?;
            let n = table.channel(&nominal, None)?;
            let report = deviation(&m, &n, f0, harmonics)?;
            print!("{}", report.to_table());
            if let Some(path) = plot_out {
                let k = magnify.ok_or_else(|| Error::Config("--plot-out needs --magnify".into()))?;
                let mag = magnify_deviation(&n, &m, k)?;
                let mut w = create(&path)?;
                writeln!(w, "time_s,nominal,measured,magnified")?;
                for i in 0..n.len() {
                    writeln!(
                        w,
                        "{:.16e},{:.16e},{:.16e},{:.16e}",
                        n.time_at(i),
                        n.samples()[i],
                        m.samples()[i],
                        mag.samples()[i]
                    )?;
                }
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
