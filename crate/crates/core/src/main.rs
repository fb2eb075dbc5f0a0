use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cornercase::io::config_file::{load_config, render_config};
use cornercase::io::{calibrate, read_log, replay, write_events, write_log, write_metrics};
use cornercase::model::{validate_config, DetectorConfig};
use cornercase::sim::scenario::{bundled_names, Scenario};
use cornercase::sim::simulate;

#[derive(Parser)]
#[command(
    name = "cornercase",
    version,
    about = "Corner-case detection from planner disagreement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its log.
    Simulate {
        /// Bundled scenario name or path to a scenario file.
        scenario: String,
        /// Output log path, `-` for stdout.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Feed detector responses back into the ego's speed.
        #[arg(long)]
        closed_loop: bool,
        #[command(flatten)]
        detector: DetectorArgs,
    },
    /// Run the detectors over a log.
    Replay {
        /// Log path, `-` for stdin.
        log: PathBuf,
        /// Events output (JSON lines), `-` for stdout. Defaults to stdout.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Per-frame metrics CSV output.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        detector: DetectorArgs,
    },
    /// Suggest thresholds from a nominal log.
    Calibrate {
        /// Log path, `-` for stdin.
        log: PathBuf,
        #[command(flatten)]
        detector: DetectorArgs,
    },
    /// Bundled scenarios.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// List bundled scenario names.
    List,
}

/// Detector settings. Flags override the config file, which overrides the
/// log header (or the defaults when simulating).
#[derive(Args)]
struct DetectorArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    w_m: Option<f64>,
    #[arg(long)]
    w_avg: Option<f64>,
    #[arg(long)]
    lat_threshold: Option<f64>,
    #[arg(long)]
    long_persistence: Option<usize>,
    #[arg(long)]
    v_deadband: Option<f64>,
    #[arg(long)]
    align_tolerance: Option<f64>,
    #[arg(long)]
    smoothing_window: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Print the effective config to stderr.
    #[arg(long)]
    show_config: bool,
}

type Error = Box<dyn std::error::Error>;

impl DetectorArgs {
    fn resolve(&self, base: DetectorConfig) -> Result<DetectorConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => load_config(base, path)?,
            None => base,
        };
        macro_rules! flag {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        flag!(
            n_points,
            w_m,
            w_avg,
            lat_threshold,
            long_persistence,
            v_deadband,
            align_tolerance,
            smoothing_window,
            horizon
        );
        let cfg = validate_config(cfg)?;
        if self.show_config {
            eprint!("{}", render_config(&cfg));
        }
        Ok(cfg)
    }
}

fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn open_input(path: &Path) -> Result<Box<dyn io::BufRead>, Error> {
    if is_stdio(path) {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf)?;
        Ok(Box::new(io::Cursor::new(buf)))
    } else {
        let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Box::new(BufReader::new(file)))
    }
}

fn open_output(path: &Path) -> Result<Box<dyn Write>, Error> {
    if is_stdio(path) {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Box::new(BufWriter::new(file)))
    }
}

/// Exit status: 0 without events, 2 with.
fn events_status(n: usize) -> ExitCode {
    if n == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate {
            scenario,
            out,
            seed,
            closed_loop,
            detector,
        } => {
            let mut sc = Scenario::resolve(&scenario)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            sc.sim.closed_loop |= closed_loop;
            let cfg = detector.resolve(DetectorConfig::default())?;
            let log = simulate(&sc, &cfg)?;
            write_log(&log, open_output(&out)?)?;
            let n = log.events().count();
            eprintln!("{}: {} records, {n} events", sc.name, log.records.len());
            Ok(events_status(n))
        }
        Command::Replay {
            log,
            events,
            metrics,
            detector,
        } => {
            let log = read_log(open_input(&log)?)?;
            let cfg = detector.resolve(log.header.config)?;
            let out = replay(&log, &cfg)?;
            let events_path = events.unwrap_or_else(|| PathBuf::from("-"));
            write_events(out.events(), open_output(&events_path)?)?;
            if let Some(path) = metrics {
                write_metrics(&out, open_output(&path)?)?;
            }
            eprintln!(
                "{} frames aligned, {} of {} modular samples dropped, {} lateral comparisons skipped, {} events",
                out.detection.frames.len(),
                out.dropped,
                out.modular_total,
                out.detection.skipped_frames,
                out.events().len()
            );
            Ok(events_status(out.events().len()))
        }
        Command::Calibrate { log, detector } => {
            let log = read_log(open_input(&log)?)?;
            let cfg = detector.resolve(log.header.config)?;
            let c = calibrate(&log, &cfg)?;
            println!("frames = {}", c.frames);
            println!("max_smoothed_lat = {}", c.max_smoothed_lat);
            println!("p99_smoothed_lat = {}", c.p99_smoothed_lat);
            println!("v_jitter = {}", c.v_jitter);
            println!("# suggested settings");
            println!("lat_threshold = {}", c.suggested_lat_threshold);
            println!("v_deadband = {}", c.suggested_v_deadband);
            if let Some(w) = &c.warning {
                eprintln!("warning: {w}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Scenarios {
            action: ScenarioAction::List,
        } => {
            for name in bundled_names() {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
