use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use roverlink::ground_station::mission::{mission_config, run_mission_in};
use roverlink::ground_station::{load_mission, parse_latency, replay_file, Session, SessionConfig};
use roverlink::world::load_scene;

use crate::server::{router, run_clock, Station};

#[derive(Debug, Parser)]
#[command(name = "roverlink", version, about = "Rover teleoperation ground station")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the simulated rover in real time and serve the operator console.
    Serve {
        #[arg(long)]
        scene: PathBuf,
        /// One-way link delay: 0, 410ms, or seconds.
        #[arg(long, default_value = "0", value_parser = parse_latency)]
        latency: f64,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Directory with the console assets.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Record the session to this log, written on shutdown.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Disable the camera image topic.
        #[arg(long)]
        no_camera: bool,
        /// Simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Run a scripted mission headless and write a JSON report.
    Mission {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Overrides the script's link delay.
        #[arg(long, value_parser = parse_latency)]
        latency: Option<f64>,
        /// Simulation step, s.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Re-run a recorded session and check it reproduces exactly.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Serve { scene, latency, port, bind, static_dir, record, no_camera, speed } => {
            anyhow::ensure!(speed > 0.0, "speed must be positive");
            let scene = load_scene(&scene)?;
            let mut cfg = SessionConfig::default().with_latency(latency);
            if no_camera {
                cfg.onboard.camera = None;
            }
            let mut session = Session::new(scene, cfg)?;
            if record.is_some() {
                session.record();
            }
            let addr: SocketAddr = format!("{bind}:{port}").parse().context("bad bind address")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(session, addr, static_dir, record, speed))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Mission { scene, script, report, latency, dt, record } => {
            let scene = load_scene(&scene)?;
            let mut script = load_mission(&script)?;
            if let Some(l) = latency {
                script.latency = l;
            }
            let mut base = SessionConfig::default();
            if let Some(dt) = dt {
                base.onboard.dt = dt;
            }
            let mut session = Session::new(scene, mission_config(&script, base))?;
            if record.is_some() {
                session.record();
            }
            let result = run_mission_in(&mut session, &script)?;
            let log = session.take_log();
            std::fs::write(&report, result.to_json()).with_context(|| format!("writing {}", report.display()))?;
            if let (Some(path), Some(log)) = (record, log) {
                log.write(&path)?;
            }
            print!("{}", result.summary());
            print!("{}", result.budget.to_text());
            Ok(if result.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Replay { log } => match replay_file(&log)? {
            None => {
                println!("{}: empty log, nothing to replay", log.display());
                Ok(ExitCode::SUCCESS)
            }
            Some(out) => {
                println!(
                    "replayed {} commands over {:.2} s: final pose ({}, {}, {})",
                    out.commands, out.duration, out.final_state.pose.x, out.final_state.pose.y,
                    out.final_state.pose.theta
                );
                if out.identical {
                    println!("replay identical to the recording");
                    Ok(ExitCode::SUCCESS)
                } else {
                    println!(
                        "replay DIVERGED: {} frame mismatches, recorded final {:?}",
                        out.frame_mismatches, out.recorded_final
                    );
                    Ok(ExitCode::from(1))
                }
            }
        },
    }
}

async fn serve(
    session: Session,
    addr: SocketAddr,
    static_dir: Option<PathBuf>,
    record: Option<PathBuf>,
    speed: f64,
) -> anyhow::Result<()> {
    let station = Station::new(session);
    let clock = tokio::spawn(run_clock(station.clone(), speed));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(station.clone(), static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    clock.abort();
    if let Some(path) = record {
        let mut s = station.session.lock().unwrap();
        s.finish();
        if let Some(log) = s.take_log() {
            log.write(&path)?;
            tracing::info!("session log written to {}", path.display());
        }
    }
    Ok(())
}
