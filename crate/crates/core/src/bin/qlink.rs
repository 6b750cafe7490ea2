use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qlink::analysis::{cross_correlate, fit_gaussian_peak, CoincidenceMode};
use qlink::harness::{self, AnalysisSettings, CalibrationTargets, LinkConfig, Report};
use qlink::metrics::write_key_values;
use qlink::timetag::TimeTagStream;
use qlink::units::parse_time_ps;
use qlink::Error;

fn time_arg(s: &str) -> Result<f64, String> {
    parse_time_ps(s).map_err(|e| e.to_string())
}

#[derive(Parser)]
#[command(name = "qlink", version, about = "Entanglement-distribution link simulator and time-tag analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Greedy,
    Histogram,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a run and write tag files, schedule and manifest.
    Simulate {
        /// TOML link configuration; the calibrated reference link if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the number of schedule repetitions.
        #[arg(long)]
        cycles: Option<u32>,
    },
    /// Analyze two tag files against a schedule.
    Analyze {
        #[arg(long)]
        tags_a: PathBuf,
        #[arg(long)]
        tags_b: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, value_parser = time_arg, default_value = "823ps")]
        window: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Greedy)]
        mode: Mode,
        /// Source fidelity used for the fidelity ceiling.
        #[arg(long, default_value_t = 0.98)]
        local_fidelity: f64,
    },
    /// Cross-correlation histogram of two tag files, written as CSV.
    Correlate {
        #[arg(long)]
        tags_a: PathBuf,
        #[arg(long)]
        tags_b: PathBuf,
        #[arg(long, value_parser = time_arg, allow_hyphen_values = true)]
        min: f64,
        #[arg(long, value_parser = time_arg, allow_hyphen_values = true)]
        max: f64,
        #[arg(long, value_parser = time_arg)]
        bin: f64,
        /// CSV destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also fit a Gaussian peak and print its parameters to stderr.
        #[arg(long)]
        fit: bool,
    },
    /// Fit pair rate and couplings to target count rates.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2.1e6)]
        local_singles: f64,
        #[arg(long, default_value_t = 55.0)]
        remote_singles: f64,
        #[arg(long, default_value_t = 4.3)]
        coincidences: f64,
        #[arg(long, value_parser = time_arg, default_value = "823ps")]
        window: f64,
        /// Write the calibrated configuration here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the summary of an earlier analysis and optionally re-emit its series.
    Report {
        /// Directory written by `analyze`.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        series: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. } | Error::Io { .. } => 1,
        _ => 2,
    }
}

fn print_kv(pairs: Vec<(String, String)>) {
    write_key_values(std::io::stdout().lock(), pairs).expect("stdout");
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Simulate { config, seed, out, cycles } => {
            let mut cfg = match config {
                Some(path) => LinkConfig::load(&path)?,
                None => LinkConfig::reference(),
            };
            if let Some(n) = cycles {
                cfg.cycles = n;
            }
            let manifest = harness::run_simulation(&cfg, seed, &out)?;
            let coinc: u64 = manifest.blocks.iter().map(|b| b.pair_coincidences).sum();
            print_kv(vec![
                ("out".into(), out.display().to_string()),
                ("seed".into(), seed.to_string()),
                ("blocks".into(), manifest.blocks.len().to_string()),
                ("pair_coincidences".into(), coinc.to_string()),
            ]);
        }
        Command::Analyze {
            tags_a,
            tags_b,
            schedule,
            window,
            out,
            mode,
            local_fidelity,
        } => {
            let a = TimeTagStream::load(&tags_a)?;
            let b = TimeTagStream::load(&tags_b)?;
            let sched = harness::read_schedule(&schedule)?;
            let settings = AnalysisSettings {
                window_ps: window,
                mode: match mode {
                    Mode::Greedy => CoincidenceMode::Greedy,
                    Mode::Histogram => CoincidenceMode::Histogram,
                },
                local_fidelity,
                ..Default::default()
            };
            let report = harness::analyze(&a, &b, &sched, &settings)?;
            report.write_to_dir(&out)?;
            print_kv(report.key_values());
        }
        Command::Correlate {
            tags_a,
            tags_b,
            min,
            max,
            bin,
            out,
            fit,
        } => {
            let a = TimeTagStream::load(&tags_a)?;
            let b = TimeTagStream::load(&tags_b)?;
            let h = cross_correlate(&a, &b, min, max, bin)?;
            match &out {
                Some(path) => {
                    let f = std::fs::File::create(path).map_err(|e| Error::io(path.clone(), e))?;
                    h.write_csv(std::io::BufWriter::new(f)).map_err(|e| Error::io(path.clone(), e))?;
                }
                None => h.write_csv(std::io::stdout().lock()).map_err(|e| Error::io("<stdout>", e))?,
            }
            if fit {
                let p = fit_gaussian_peak(&h)?;
                eprintln!("center_ps={}\ncenter_stderr_ps={}\nfwhm_ps={}\nfwhm_stderr_ps={}", p.center, p.center_stderr, p.fwhm, p.fwhm_stderr);
            }
        }
        Command::Calibrate {
            config,
            local_singles,
            remote_singles,
            coincidences,
            window,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => LinkConfig::load(&path)?,
                None => LinkConfig::default(),
            };
            let targets = CalibrationTargets {
                local_singles,
                remote_singles,
                coincidences,
                window_ps: window,
            };
            let cal = harness::calibrate_rates(&targets, &cfg)?;
            print_kv(vec![
                ("pair_rate".into(), cal.source.pair_rate.to_string()),
                ("local_coupling".into(), cal.source.local_coupling.to_string()),
                ("remote_coupling".into(), cal.source.remote_coupling.to_string()),
                ("window_fraction".into(), cal.window_fraction.to_string()),
                ("joint_pass".into(), cal.joint_pass.to_string()),
            ]);
            if let Some(path) = out {
                cfg.source = cal.source;
                cfg.save(&path)?;
            }
        }
        Command::Report { dir, series } => {
            let report = Report::load_json(&dir.join("report.json"))?;
            print_kv(report.key_values());
            if let Some(path) = series {
                let f = std::fs::File::create(&path).map_err(|e| Error::io(path.clone(), e))?;
                qlink::metrics::write_series_csv(std::io::BufWriter::new(f), &report.series)
                    .map_err(|e| Error::io(path.clone(), e))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
