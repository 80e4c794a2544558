//! Standalone fingertip sensor node service: captures frames at the camera
//! rate, computes deformation in the background, serves latest-value
//! snapshots over TCP.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use softgrasp::node::{
    FrameSource, NodeConfig, ReplaySource, SensorNode, SimProfileSource,
};
use softgrasp::pgm;
use softgrasp_core::sim::SimConfig;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Source {
    /// Synthetic frames from a local plant render (press/release profile).
    Sim,
    /// Loop over a directory of PGM frames.
    Replay,
}

#[derive(Parser)]
#[command(
    name = "softgrasp-node",
    about = "One tactile fingertip sensor service",
    version
)]
struct Cli {
    /// Sensor index n in 0..5.
    #[arg(long)]
    id: u8,
    /// host:port to serve the wire protocol on.
    #[arg(long, default_value = "127.0.0.1:7450")]
    listen: String,
    /// Capture period in milliseconds (33.3 = 30 fps).
    #[arg(long, default_value_t = 100.0 / 3.0)]
    period_ms: f64,
    /// Contact threshold on the deformation score.
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = Source::Sim)]
    source: Source,
    /// Frame directory for --source replay.
    #[arg(long)]
    replay_dir: Option<PathBuf>,
    /// Seed for the synthetic frame profile.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = NodeConfig::new(cli.id);
    config.capture_period_ms = cli.period_ms;
    config.contact_threshold = cli.threshold;

    let source: Box<dyn FrameSource + Send> = match cli.source {
        Source::Sim => Box::new(SimProfileSource::new(SimConfig::default(), cli.seed)),
        Source::Replay => {
            let Some(dir) = &cli.replay_dir else {
                eprintln!("error: --source replay needs --replay-dir");
                return ExitCode::from(2);
            };
            match pgm::read_pgm_dir(dir) {
                Ok(frames) if !frames.is_empty() => Box::new(ReplaySource::new(frames, true)),
                Ok(_) => {
                    eprintln!("error: no .pgm frames in {}", dir.display());
                    return ExitCode::from(2);
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
        }
    };

    let node = match SensorNode::new(config) {
        Ok(node) => node,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let listener = match SensorNode::bind(&cli.listen) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (addr, server) = node.spawn_server(listener);
    let _capture = node.spawn_capture(source);
    println!("sensor node {} serving on {addr}", cli.id);
    // Runs until killed.
    let _ = server.join();
    ExitCode::SUCCESS
}
