use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use headzoom::metrics::MetricsOptions;
use headzoom::{CalibrationProfile, Mode};
use headzoom_cli::commands::{self, EmptyInput};
use headzoom_cli::config::{self, Overrides, CONFIG_ENV};
use headzoom_cli::serve::{self, ServeOptions};

#[derive(Parser)]
#[command(name = "headzoom", version, about = "Head-pose driven zoom and pan for image viewing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Engine config file (TOML).
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    zoom_min: Option<f64>,
    #[arg(long)]
    zoom_max: Option<f64>,
}

impl EngineArgs {
    fn resolve(&self) -> Result<headzoom::EngineConfig> {
        config::resolve(
            self.config.as_deref(),
            Overrides {
                mode: self.mode,
                zoom_min: self.zoom_min,
                zoom_max: self.zoom_max,
            },
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a calibration profile from neutral, forward and backward lean traces.
    Calibrate {
        #[arg(long)]
        neutral: PathBuf,
        #[arg(long)]
        forward: PathBuf,
        #[arg(long)]
        backward: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run a pose trace through the engine and write the view stream.
    Replay {
        trace: PathBuf,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Generate a pose trace from a motion script.
    Synth {
        script: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the calibration profile the script implies.
        #[arg(long)]
        profile_out: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compute the results table for trials and their view streams.
    Metrics {
        /// Trial sidecar files; pair each with a --views file in order.
        #[arg(long = "trial", required = true)]
        trials: Vec<PathBuf>,
        #[arg(long = "views", required = true)]
        views: Vec<PathBuf>,
        /// Absolute zoom change that counts as one zoom movement (default: 2% of the zoom span).
        #[arg(long)]
        epsilon_zoom: Option<f64>,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Repeated-measures ANOVA and pairwise tests over a results table.
    Stats {
        table: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Print a readable summary as well.
        #[arg(long)]
        summary: bool,
    },
    /// Serve the live stream over WebSocket.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Print the filter noise schedule in effect.
    Schedule {
        #[command(flatten)]
        engine: EngineArgs,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Calibrate {
            neutral,
            forward,
            backward,
            out,
        } => {
            let p = commands::calibrate_cmd(&neutral, &forward, &backward, &out)?;
            println!(
                "forward_limit {} m, backward_limit {} m; wrote {}",
                p.forward_limit(),
                p.backward_limit(),
                out.display()
            );
        }
        Command::Replay {
            trace,
            profile,
            engine,
            out,
        } => {
            let n = commands::replay(&trace, profile.as_deref(), engine.resolve()?, &out)?;
            println!("{n} views written to {}", out.display());
        }
        Command::Synth {
            script,
            seed,
            profile_out,
            out,
        } => {
            let n = commands::synth(&script, seed, &out, profile_out.as_deref())?;
            println!("{n} samples written to {}", out.display());
        }
        Command::Metrics {
            trials,
            views,
            epsilon_zoom,
            engine,
            out,
        } => {
            if trials.len() != views.len() {
                bail!("{} --trial files but {} --views files", trials.len(), views.len());
            }
            let mut opts = MetricsOptions::for_zoom_range(&engine.resolve()?.zoom);
            if let Some(e) = epsilon_zoom {
                if !(e.is_finite() && e >= 0.0) {
                    bail!("--epsilon-zoom must be a non-negative number");
                }
                opts.zoom_epsilon = e;
            }
            let pairs: Vec<_> = trials.into_iter().zip(views).collect();
            let n = commands::metrics(&pairs, &opts, &out)?;
            println!("{n} rows written to {}", out.display());
        }
        Command::Stats { table, out, summary } => {
            let r = commands::stats(&table, &out)?;
            if summary {
                print!("{}", r.summary());
            }
            println!("report written to {}", out.display());
        }
        Command::Serve { port, profile, engine } => {
            let profile = profile
                .map(|p| CalibrationProfile::load(&p).with_context(|| format!("loading profile {}", p.display())))
                .transpose()?;
            let opts = ServeOptions {
                config: engine.resolve()?,
                profile,
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
                    .await
                    .with_context(|| format!("binding port {port}"))?;
                serve::run(listener, opts).await
            })?;
        }
        Command::Schedule { engine } => print!("{}", commands::schedule_table(&engine.resolve()?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<EmptyInput>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
