use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use omniteleop::config::{Config, COCKPIT_ENV, LISTEN_ENV};
use omniteleop::gateway::{encode_frame, read_frames, Gateway};
use omniteleop::metrics::compute_metrics;
use omniteleop::scenario::valve_mission;
use omniteleop::session::{run_session, JsonLinesSink, NullSink, RecordSink};

#[derive(Parser)]
#[command(version, about = "Hand-based teleoperation engine and simulator for omnidirectional aerial robots")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Control loop rate, Hz.
    #[arg(long, global = true)]
    rate: Option<f64>,
    /// Transport delay applied to operator frames, seconds.
    #[arg(long, global = true, allow_hyphen_values = true)]
    latency: Option<f64>,
    /// Seed for randomized scenario inputs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Datagram listen address for operator frames.
    #[arg(long, global = true, env = LISTEN_ENV)]
    listen: Option<String>,
    /// Cockpit stream listen address.
    #[arg(long, global = true, env = COCKPIT_ENV)]
    cockpit_listen: Option<String>,
    /// Do not open the cockpit endpoint.
    #[arg(long, global = true)]
    headless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the live gateway and simulator.
    Sim {
        /// Stop after this many seconds of wall time.
        #[arg(long)]
        duration: Option<f64>,
        /// Session log (JSON Lines); defaults to `session.record_path`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run a session over a frame recording and print summary and metrics.
    Replay {
        frames: PathBuf,
        /// Session log (JSON Lines).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Record incoming operator frames without running a session.
    Record {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Validate a configuration file.
    CheckConfig { file: PathBuf },
    /// Print the default configuration.
    DefaultConfig,
    /// Write the scripted valve mission as a frame recording.
    Mission {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Run(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.to_string())
    }
}

fn load_config(opts: &GlobalOpts) -> Result<Config, Failure> {
    let mut cfg = match &opts.config {
        Some(p) => Config::load(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => Config::default(),
    };
    if let Some(r) = opts.rate {
        cfg.session.tick_rate = r;
    }
    if let Some(l) = opts.latency {
        cfg.session.latency = l;
    }
    if let Some(s) = opts.seed {
        cfg.session.seed = s;
    }
    if let Some(l) = &opts.listen {
        cfg.gateway.listen = l.clone();
    }
    if let Some(l) = &opts.cockpit_listen {
        cfg.gateway.cockpit_listen = l.clone();
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn seconds(s: Option<f64>) -> Result<Option<Duration>, Failure> {
    s.map(|s| Duration::try_from_secs_f64(s).map_err(|_| Failure::Config(format!("invalid duration {s}")))).transpose()
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Run(format!("cannot create {}: {e}", path.display())))
}

fn stop_on_interrupt(gw: &Gateway) -> Result<(), Failure> {
    let handle = gw.handle();
    ctrlc::set_handler(move || handle.stop())?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Command::CheckConfig { file } => {
            Config::load(&file).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
            eprintln!("{}: ok", file.display());
        }
        Command::DefaultConfig => print!("{}", Config::default().to_toml_string()),
        Command::Mission { out } => {
            let cfg = load_config(&cli.opts)?;
            let mission = valve_mission(&cfg)?;
            let mut w = create(&out)?;
            for f in &mission.frames {
                w.write_all(&encode_frame(f))?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            eprintln!("wrote {} frames to {}", mission.frames.len(), out.display());
        }
        Command::Replay { frames, log } => {
            let cfg = load_config(&cli.opts)?;
            let text = std::fs::read_to_string(&frames)
                .map_err(|e| Failure::Run(format!("cannot read {}: {e}", frames.display())))?;
            let frames = read_frames(&text).map_err(|(line, e)| Failure::Run(format!("line {line}: {e}")))?;
            let mut records = Vec::new();
            let summary = run_session(&cfg, frames, &mut records)?;
            if let Some(path) = log {
                let mut sink = JsonLinesSink::new(create(&path)?);
                for r in &records {
                    sink.record(r)?;
                }
                sink.flush()?;
            }
            let metrics = compute_metrics(&records).ok();
            let report = serde_json::json!({ "summary": summary, "metrics": metrics });
            println!("{report}");
        }
        Command::Record { out, duration } => {
            let cfg = load_config(&cli.opts)?;
            let gw = Gateway::bind(cfg, true)?;
            stop_on_interrupt(&gw)?;
            eprintln!("recording frames from {}", gw.udp_addr()?);
            let mut w = create(&out)?;
            let n = gw.record(seconds(duration)?, &mut w)?;
            eprintln!("wrote {n} frames to {}", out.display());
        }
        Command::Sim { duration, log } => {
            let cfg = load_config(&cli.opts)?;
            let log = log.or_else(|| cfg.session.record_path.clone());
            let gw = Gateway::bind(cfg, cli.opts.headless)?;
            stop_on_interrupt(&gw)?;
            log::info!("operator frames on {}", gw.udp_addr()?);
            if let Some(a) = gw.cockpit_addr() {
                log::info!("cockpit stream on {a}");
            }
            let duration = seconds(duration)?;
            let summary = match log {
                Some(path) => gw.run(duration, &mut JsonLinesSink::new(create(&path)?))?,
                None => gw.run(duration, &mut NullSink)?,
            };
            println!("{}", serde_json::to_string(&summary)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            let _ = io::stderr().flush();
            ExitCode::FAILURE
        }
    }
}
