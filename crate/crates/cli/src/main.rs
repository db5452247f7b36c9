use std::fs::{self, OpenOptions};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use cvkit::{cmd_bench, cmd_density, cmd_generate, cmd_simulate};
use cvkit_core::bench::BenchConfig;
use cvkit_core::datagen::{GenConfig, TimeframeCount, DEFAULT_MAX_FILE_KB};
use cvkit_core::geo::GeoRect;
use cvkit_core::DEFAULT_RANGE_M;
use cvkit_spat::cycle::CycleSpec;
use cvkit_spat::emulator::{
    emulate_controller, read_transition_log, EmulatorConfig, TransitionLog,
};
use cvkit_spat::server::{start_gateway, ServerConfig, DEFAULT_HTTP_PORT, DEFAULT_UDP_PORT};
use cvkit_spat::watch::watch_client;

#[derive(Parser)]
#[command(
    name = "cvkit",
    version,
    about = "Connected-vehicle connectivity and SPaT toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition every timeframe of a BSM CSV and write a timeline.
    Simulate {
        /// BSM CSV input.
        #[arg(long, short)]
        input: PathBuf,
        /// DSRC range in meters.
        #[arg(long, default_value_t = DEFAULT_RANGE_M)]
        range: f64,
        /// Timeline output (line-delimited JSON).
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Generate a synthetic BSM dataset.
    Generate {
        /// Vehicles per timeframe.
        #[arg(long, short = 'n')]
        vehicles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Timeframe count, or "auto" to fill the file cap.
        #[arg(long, default_value = "auto")]
        timeframes: String,
        /// File cap in KB for automatic timeframe counts.
        #[arg(long, default_value_t = DEFAULT_MAX_FILE_KB)]
        max_kb: u64,
        /// Output CSV; standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Time the distance, closure, and extraction stages per vehicle count.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,400,800")]
        ns: Vec<usize>,
        #[command(flatten)]
        common: SweepArgs,
        /// Cap on timed timeframes per vehicle count.
        #[arg(long)]
        max_timeframes: Option<usize>,
    },
    /// Mean partition count versus vehicle density.
    Density {
        #[arg(long, value_delimiter = ',', default_value = "17,35,70,174,348")]
        ns: Vec<usize>,
        #[command(flatten)]
        common: SweepArgs,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Run trials on all cores.
        #[arg(long)]
        parallel: bool,
    },
    /// SPaT gateway, controller emulator, and watch client.
    #[command(subcommand)]
    Spat(SpatCommand),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_RANGE_M)]
    range: f64,
    /// Results CSV output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl SweepArgs {
    fn config(&self) -> BenchConfig {
        BenchConfig {
            seed: self.seed,
            range_m: self.range,
            rect: GeoRect::ANN_ARBOR,
            ..BenchConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum SpatCommand {
    /// Ingest SPaT datagrams over UDP and serve snapshots over HTTP.
    Serve {
        #[arg(long, default_value = "0.0.0.0")]
        bind: IpAddr,
        #[arg(long, default_value_t = DEFAULT_UDP_PORT)]
        udp_port: u16,
        #[arg(long, default_value_t = DEFAULT_HTTP_PORT)]
        http_port: u16,
    },
    /// Send a signal cycle as SPaT datagrams.
    Emulate {
        /// Gateway UDP address.
        #[arg(long, default_value = "127.0.0.1:5010")]
        target: SocketAddr,
        #[arg(long, default_value_t = 10.0)]
        rate_hz: f64,
        /// JSON cycle file; defaults to the phase-pair cycle.
        #[arg(long)]
        cycle_file: Option<PathBuf>,
        /// Seconds to run; runs until interrupted when omitted.
        #[arg(long)]
        duration: Option<f64>,
        /// Send 245-byte frames.
        #[arg(long)]
        pedestrian: bool,
        /// Append transitions as JSON lines to this file.
        #[arg(long)]
        transition_log: Option<PathBuf>,
    },
    /// Long-poll the gateway and report change latency.
    Watch {
        /// Gateway base URL.
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        target: String,
        /// Seconds to watch.
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
        /// Emulator transition log for end-to-end latency.
        #[arg(long)]
        transition_log: Option<PathBuf>,
    },
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn seconds(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).with_context(|| format!("invalid duration {s}"))
}

async fn run_spat(cmd: SpatCommand) -> Result<()> {
    match cmd {
        SpatCommand::Serve {
            bind,
            udp_port,
            http_port,
        } => {
            let cfg = ServerConfig {
                udp_addr: SocketAddr::new(bind, udp_port),
                http_addr: SocketAddr::new(bind, http_port),
                ..ServerConfig::default()
            };
            let handle = start_gateway(&cfg).await?;
            eprintln!("udp {} http {}", handle.udp_addr, handle.http_addr);
            tokio::select! {
                r = handle.wait() => r?,
                _ = tokio::signal::ctrl_c() => {}
            }
            Ok(())
        }
        SpatCommand::Emulate {
            target,
            rate_hz,
            cycle_file,
            duration,
            pedestrian,
            transition_log,
        } => {
            let cycle = match cycle_file {
                Some(p) => CycleSpec::from_json(
                    &fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?,
                )?,
                None => CycleSpec::default(),
            };
            let cfg = EmulatorConfig {
                cycle,
                rate_hz,
                pedestrian,
                duration: duration.map(seconds).transpose()?,
                ..EmulatorConfig::new(target)
            };
            let mut sink = transition_log
                .map(|p| OpenOptions::new().create(true).append(true).open(&p))
                .transpose()
                .context("opening transition log")?;
            let (stop_tx, stop_rx) = tokio::sync::watch::channel(false);
            tokio::spawn(async move {
                let _ = tokio::signal::ctrl_c().await;
                let _ = stop_tx.send(true);
            });
            let report = emulate_controller(
                &cfg,
                &TransitionLog::default(),
                sink.as_mut().map(|f| f as &mut (dyn std::io::Write + Send)),
                stop_rx,
            )
            .await?;
            println!(
                "packets_sent={} transitions={} send_errors={}",
                report.packets_sent,
                report.transitions.len(),
                report.send_errors
            );
            Ok(())
        }
        SpatCommand::Watch {
            target,
            duration,
            transition_log,
        } => {
            let load = || {
                transition_log
                    .as_ref()
                    .and_then(|p| fs::read_to_string(p).ok())
                    .map(|t| read_transition_log(&t))
                    .unwrap_or_default()
            };
            let (stats, _) = watch_client(&target, seconds(duration)?, load, |obs, latency| {
                println!(
                    "seq={} state={} latency_ms={latency:.2}",
                    obs.sequence, obs.state
                );
            })
            .await?;
            println!(
                "samples={} median_ms={:.2} p95_ms={:.2} max_ms={:.2}",
                stats.samples, stats.median_ms, stats.p95_ms, stats.max_ms
            );
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            input,
            range,
            output,
        } => {
            let summary = cmd_simulate(&input, range, &output)?;
            println!("{summary}");
        }
        Command::Generate {
            vehicles,
            seed,
            timeframes,
            max_kb,
            output,
        } => {
            let n_timeframes = if timeframes == "auto" {
                TimeframeCount::Auto
            } else {
                TimeframeCount::Fixed(timeframes.parse().with_context(|| {
                    format!("--timeframes: expected a count or auto, got {timeframes}")
                })?)
            };
            let cfg = GenConfig {
                n_timeframes,
                max_file_kb: max_kb,
                ..GenConfig::new(vehicles, seed)
            };
            let bytes = cmd_generate(&cfg, output.as_deref())?;
            eprintln!("wrote {bytes} bytes");
        }
        Command::Bench {
            ns,
            common,
            max_timeframes,
        } => {
            let cfg = BenchConfig {
                max_timeframes,
                ..common.config()
            };
            let outcome = cmd_bench(&ns, &cfg)?;
            write_or_print(common.output.as_ref(), &outcome.csv)?;
            let fmt = |s: Option<f64>| s.map_or("n/a".to_owned(), |v| format!("{v:.3}"));
            println!(
                "distance_slope={} closure_slope={}",
                fmt(outcome.distance_slope),
                fmt(outcome.closure_slope)
            );
        }
        Command::Density {
            ns,
            common,
            trials,
            parallel,
        } => {
            let (_, csv) = cmd_density(&ns, trials, &common.config(), parallel)?;
            write_or_print(common.output.as_ref(), &csv)?;
        }
        Command::Spat(cmd) => {
            tokio::runtime::Runtime::new()?.block_on(run_spat(cmd))?;
        }
    }
    Ok(())
}

fn main() {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
