//! `han-sim` command line.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::comms::Delivery;
use crate::config::parse_config;
use crate::exec::Mode;
use crate::metrics::MetricsSummary;
use crate::model::{validate_config, DeviceId, SimConfig, SimTime};
use crate::report::{emit_csv, emit_summary, ReportError};
use crate::scheduler::Schedule;
use crate::sim::{run_simulation_with, run_sweep, RunOptions, SimObserver};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "han-sim", about = "Coordinated vs. free-running duty-cycle load simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One simulation: trace.csv and summary.txt.
    Run(RunArgs),
    /// K consecutive seeds: one trace per seed plus an aggregate summary.
    Sweep(SweepArgs),
    /// Same as `run`, and prints the coordinated-vs-baseline comparison.
    Compare(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    traces: TraceFlags,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seeds: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Default)]
struct TraceFlags {
    /// Write rounds.csv with every (sender, receiver) delivery draw.
    #[arg(long)]
    round_trace: bool,
    /// Write schedules.csv with every schedule adopted by the lowest-id node.
    #[arg(long)]
    schedule_trace: bool,
    /// Write devices_coord.csv and devices_base.csv with per-device ON state.
    #[arg(long)]
    device_trace: bool,
}

enum Failure {
    Invalid(Vec<String>),
    Io(String),
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Io(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load_config(path: &Path) -> Result<SimConfig<f64>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let cfg = parse_config::<f64>(&text)
        .map_err(|errs| Failure::Invalid(errs.iter().map(|e| e.to_string()).collect()))?;
    validate_config(cfg).map_err(|errs| Failure::Invalid(errs.iter().map(|e| e.to_string()).collect()))
}

fn ensure_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

struct CsvSink {
    path: PathBuf,
    out: BufWriter<File>,
    error: Option<std::io::Error>,
}

impl CsvSink {
    fn create(path: PathBuf, header: &str) -> Result<Self, Failure> {
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut sink = CsvSink { path, out: BufWriter::new(file), error: None };
        sink.line(header);
        Ok(sink)
    }

    fn line(&mut self, line: &str) {
        if self.error.is_none() {
            if let Err(e) = writeln!(self.out, "{line}") {
                self.error = Some(e);
            }
        }
    }

    fn finish(mut self) -> Result<(), Failure> {
        if let Some(e) = self.error.take() {
            return Err(io_err(&self.path, e));
        }
        self.out.flush().map_err(|e| io_err(&self.path, e))
    }
}

#[derive(Default)]
struct TraceWriter {
    rounds: Option<CsvSink>,
    schedules: Option<(DeviceId, CsvSink)>,
    devices: Option<(CsvSink, CsvSink)>,
}

impl TraceWriter {
    fn open(flags: &TraceFlags, dir: &Path, first_node: Option<DeviceId>) -> Result<Self, Failure> {
        let mut w = TraceWriter::default();
        if flags.round_trace {
            w.rounds = Some(CsvSink::create(dir.join("rounds.csv"), Delivery::CSV_HEADER)?);
        }
        if let (true, Some(node)) = (flags.schedule_trace, first_node) {
            let sink = CsvSink::create(dir.join("schedules.csv"), Schedule::<f64>::CSV_HEADER)?;
            w.schedules = Some((node, sink));
        }
        if flags.device_trace {
            let header = "t_s,device_id,on";
            w.devices = Some((
                CsvSink::create(dir.join("devices_coord.csv"), header)?,
                CsvSink::create(dir.join("devices_base.csv"), header)?,
            ));
        }
        Ok(w)
    }

    fn finish(self) -> Result<(), Failure> {
        if let Some(s) = self.rounds {
            s.finish()?;
        }
        if let Some((_, s)) = self.schedules {
            s.finish()?;
        }
        if let Some((c, b)) = self.devices {
            c.finish()?;
            b.finish()?;
        }
        Ok(())
    }
}

impl SimObserver<f64> for TraceWriter {
    fn on_delivery(&mut self, d: Delivery) {
        if let Some(s) = &mut self.rounds {
            s.line(&d.csv_line());
        }
    }

    fn on_schedule(&mut self, node: DeviceId, schedule: &Schedule<f64>) {
        if let Some((watched, s)) = &mut self.schedules {
            if *watched == node {
                for row in schedule.csv_rows() {
                    s.line(&row);
                }
            }
        }
    }

    fn on_device(&mut self, t: SimTime, device: DeviceId, mode: Mode, on: bool) {
        if let Some((c, b)) = &mut self.devices {
            let sink = if mode == Mode::Coordinated { c } else { b };
            sink.line(&format!("{},{},{}", t.0, device, on as u8));
        }
    }
}

fn summarize(result: &crate::sim::SimResult<f64>) -> MetricsSummary<f64> {
    MetricsSummary::from_result(result).expect("validated runs have at least one tick")
}

fn cmd_run(args: &RunArgs, print_comparison: bool) -> Result<(), Failure> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    ensure_dir(&args.out)?;
    let first = cfg.devices.iter().map(|d| d.device_id).min();
    let mut traces = TraceWriter::open(&args.traces, &args.out, first)?;
    let result = run_simulation_with(&cfg, &RunOptions::default(), &mut traces)
        .map_err(|errs| Failure::Invalid(errs.iter().map(|e| e.to_string()).collect()))?;
    traces.finish()?;

    emit_csv(&result, &args.out.join("trace.csv"))?;
    let summary = summarize(&result);
    emit_summary(std::slice::from_ref(&summary), &args.out.join("summary.txt"))?;

    if print_comparison {
        let (c, b) = (&summary.coordinated, &summary.baseline);
        let pct = |v: Option<f64>| v.map_or("na".to_string(), |x| format!("{x:.1}%"));
        println!("{:<10} {:>10} {:>10} {:>10}", "mode", "peak_kw", "mean_kw", "stddev_kw");
        println!("{:<10} {:>10.3} {:>10.3} {:>10.3}", "coord", c.peak_kw, c.mean_kw, c.stddev_kw);
        println!("{:<10} {:>10.3} {:>10.3} {:>10.3}", "baseline", b.peak_kw, b.mean_kw, b.stddev_kw);
        println!("peak reduction   {}", pct(summary.peak_reduction_pct));
        println!("stddev reduction {}", pct(summary.stddev_reduction_pct));
        println!("mean delta       {}", pct(summary.mean_delta_pct));
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    if args.seeds == 0 {
        return Err(Failure::Invalid(vec!["--seeds must be at least 1".into()]));
    }
    let cfg = load_config(&args.config)?;
    ensure_dir(&args.out)?;
    let results = run_sweep(&cfg, args.seeds)
        .map_err(|errs| Failure::Invalid(errs.iter().map(|e| e.to_string()).collect()))?;
    let mut summaries = Vec::with_capacity(results.len());
    for r in &results {
        emit_csv(r, &args.out.join(format!("trace_seed{}.csv", r.seed)))?;
        summaries.push(summarize(r));
    }
    emit_summary(&summaries, &args.out.join("summary.txt"))?;
    Ok(())
}

/// Entry point shared by the binary and tests. `args[0]` is the program name.
pub fn cli_main<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a, false),
        Command::Compare(a) => cmd_run(a, true),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(errors)) => {
            eprintln!("invalid configuration:");
            for e in errors {
                eprintln!("  {e}");
            }
            EXIT_INVALID
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            EXIT_IO
        }
    }
}
