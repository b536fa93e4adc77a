mod api;
mod commands;
mod config;
mod daemon;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use questd_core::engine::{StateView, Store, StoreOptions};
use questd_core::events::Timestamp;
use questd_core::ingestion::{watch, WatchItem};

use commands::{ApproximationArg, Failure, Outcome, StatsArgs};
use config::Config;
use daemon::{now_ms, spawn_consumer, Command, Shared};

/// Achievements for testing: watches a project's test and coverage reports
/// and source edits, and awards levels.
#[derive(Parser)]
#[command(name = "questd", version)]
struct Cli {
    /// TOML configuration file. `QUESTD_*` environment variables override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Where the event log and the state checkpoint live.
    #[arg(long, global = true, value_name = "DIR")]
    state_dir: Option<PathBuf>,
    /// Use the five-minute idle threshold for encouragements.
    #[arg(long, global = true)]
    experiment: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Watch a project directory and serve the API until SIGTERM.
    Watch {
        /// Defaults to `project_root` from the configuration.
        root: Option<PathBuf>,
        /// API port; 0 picks a free one.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        no_api: bool,
    },
    /// Serve the API (posted events only) until SIGTERM.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
    /// Ingest JUnit/JaCoCo/LCOV reports or a recorded event log.
    Ingest {
        paths: Vec<PathBuf>,
        /// Recorded NDJSON event log to feed through the engine.
        #[arg(long, value_name = "FILE")]
        log: Option<PathBuf>,
        #[arg(long, default_value = "cli")]
        session: String,
        /// Event timestamp in ms since the epoch (default: now).
        #[arg(long)]
        ts: Option<Timestamp>,
    },
    /// Print every achievement with level, progress and next target.
    Status {
        #[arg(long)]
        json: bool,
    },
    /// Clear all progress.
    Reset {
        #[arg(long)]
        confirm: bool,
    },
    /// Replace the stored state with the replay of an event log.
    Replay {
        log: PathBuf,
        /// Do not print the notifications of the replay.
        #[arg(long)]
        quiet: bool,
    },
    /// Compare groups of recorded sessions.
    Stats {
        /// JSON object mapping group name to a list of log files.
        #[arg(long)]
        groups: PathBuf,
        /// Base directory of relative log paths (default: next to --groups).
        #[arg(long)]
        logs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-minute CSV tables into this directory.
        #[arg(long, value_name = "DIR")]
        csv: Option<PathBuf>,
        /// Allow an approximate Wilcoxon test for samples too large to count exactly.
        #[arg(long, value_enum)]
        approximation: Option<ApproximationArg>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        sequential: bool,
    },
    /// List the achievement catalog.
    Achievements {
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Operation(m)) => {
            eprintln!("questd: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("questd: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut config =
        Config::load(cli.config.as_deref(), std::env::vars()).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(dir) = cli.state_dir {
        config.state_dir = dir;
    }
    config.experiment_mode |= cli.experiment;
    let crash_after_append = match std::env::var("QUESTD_CRASH_AFTER_APPEND") {
        Ok(v) => Some(v.parse().map_err(|_| Failure::Usage(format!("QUESTD_CRASH_AFTER_APPEND: bad count `{v}`")))?),
        Err(_) => None,
    };
    let options = StoreOptions { engine: config.engine(), crash_after_append, ..StoreOptions::new(&config.state_dir) };

    match cli.command {
        Cmd::Watch { root, port, no_api } => {
            if let Some(p) = port {
                config.api_port = p;
            }
            config.api &= !no_api;
            let root = root.unwrap_or_else(|| config.project_root.clone());
            run_daemon(&config, &options, Some(&root))
        }
        Cmd::Serve { port } => {
            if let Some(p) = port {
                config.api_port = p;
            }
            config.api = true;
            run_daemon(&config, &options, None)
        }
        Cmd::Ingest { paths, log, session, ts } => {
            commands::ingest(&config, &options, &paths, log.as_deref(), &session, ts)
        }
        Cmd::Status { json } => commands::status(&config, json),
        Cmd::Reset { confirm } => commands::reset(&options, confirm),
        Cmd::Replay { log, quiet } => commands::replay(&options, &log, quiet),
        Cmd::Stats { groups, logs, out, csv, approximation, seed, sequential } => commands::stats(
            &config,
            &StatsArgs {
                groups: &groups,
                logs: logs.as_deref(),
                out: &out,
                csv: csv.as_deref(),
                approximation,
                seed,
                sequential,
            },
        ),
        Cmd::Achievements { json } => commands::achievements(json),
    }
}

fn run_daemon(config: &Config, options: &StoreOptions, root: Option<&Path>) -> Outcome {
    if let Some(root) = root {
        if !root.is_dir() {
            return Err(Failure::Usage(format!(
                "project root {} does not exist or is not a directory",
                root.display()
            )));
        }
    }
    let (store, recovery) = Store::open(options)?;
    if let Some(reason) = &recovery.fallback_reason {
        eprintln!("questd: state checkpoint unusable ({reason}); rebuilt from the event log");
    }
    if recovery.replayed > 0 {
        eprintln!("questd: recovered {} log entries past the last checkpoint", recovery.replayed);
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::op(format!("cannot start runtime: {e}")))?;
    runtime.block_on(serve(config, store, root))
}

async fn serve(config: &Config, store: Store, root: Option<&Path>) -> Outcome {
    let listener = if config.api {
        let addr = ("127.0.0.1", config.api_port);
        match tokio::net::TcpListener::bind(addr).await {
            Ok(l) => Some(l),
            Err(e) if e.kind() == std::io::ErrorKind::AddrInUse => {
                return Err(Failure::op(format!("PortInUse: port {} is already in use", config.api_port)))
            }
            Err(e) => return Err(Failure::op(format!("cannot listen on port {}: {e}", config.api_port))),
        }
    } else {
        None
    };

    let (tx, rx) = crossbeam_channel::unbounded();
    let shared = Shared::new(&StateView::new(store.state()));
    let consumer = spawn_consumer(store, Arc::clone(&shared), rx);

    let _watcher = match root {
        Some(root) => {
            let handle = match watch(root, &config.ingest, "watch") {
                Ok(h) => h,
                Err(e) => {
                    let _ = tx.send(Command::Shutdown);
                    let _ = consumer.join();
                    return Err(Failure::op(e));
                }
            };
            let events = handle.events().clone();
            let tx = tx.clone();
            std::thread::spawn(move || {
                for item in events {
                    let cmd = match item {
                        WatchItem::Event(event) => Command::Event { event, reply: None },
                        WatchItem::Warning(w) => {
                            eprintln!("[WARN] {w}");
                            continue;
                        }
                    };
                    if tx.send(cmd).is_err() {
                        break;
                    }
                }
            });
            eprintln!("questd: watching {}", root.display());
            Some(handle)
        }
        None => None,
    };

    if config.tick_seconds > 0 {
        let tx = tx.clone();
        let period = Duration::from_secs(config.tick_seconds);
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(period);
            loop {
                interval.tick().await;
                if tx.send(Command::Tick(now_ms())).is_err() {
                    break;
                }
            }
        });
    }

    if let Some(listener) = listener {
        let addr = listener.local_addr().map_err(Failure::op)?;
        let app = api::router(Arc::clone(&shared), tx.clone(), config.static_dir.clone());
        tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).await {
                eprintln!("questd: server stopped: {e}");
            }
        });
        eprintln!("questd: listening on http://{addr}");
    }
    eprintln!("questd: ready");

    shutdown_signal().await;
    let _ = tx.send(Command::Shutdown);
    let saved = tokio::task::spawn_blocking(move || consumer.join()).await;
    match saved {
        Ok(Ok(Ok(()))) => {
            eprintln!("questd: state saved");
            Ok(())
        }
        Ok(Ok(Err(e))) => Err(Failure::op(e)),
        _ => Err(Failure::op("engine thread panicked")),
    }
}

async fn shutdown_signal() {
    use tokio::signal::unix::{signal, SignalKind};
    let mut term = signal(SignalKind::terminate()).expect("install SIGTERM handler");
    tokio::select! {
        _ = term.recv() => {}
        _ = tokio::signal::ctrl_c() => {}
    }
}
