//! Loop-rate benchmark: measures the achieved controller tick rate and hub
//! poll latency against live sensor nodes capturing at the camera rate,
//! plus the sequential-read diagnostic showing why concurrent polling is
//! required.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use softgrasp_core::controller::{self, ControllerConfig, ControllerState};
use softgrasp_core::sim::{HandSim, SimConfig};
use softgrasp_core::SENSOR_COUNT;
use thiserror::Error;

use crate::hub::{HubConfig, SensorHub};
use crate::node::{NodeConfig, SimProfileSource, DEFAULT_CAPTURE_PERIOD_MS};
use crate::runner::LocalStack;
use crate::wire::{self, Request, Response};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Measurement window per phase, seconds.
    pub duration_s: f64,
    /// Remote node endpoints; `None` spawns the loopback stack.
    pub endpoints: Option<[String; SENSOR_COUNT]>,
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    pub capture_period_ms: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl BenchConfig {
    pub fn new(out_dir: PathBuf) -> Self {
        Self {
            duration_s: 10.0,
            endpoints: None,
            controller: ControllerConfig::default(),
            sim: SimConfig::default(),
            capture_period_ms: DEFAULT_CAPTURE_PERIOD_MS,
            seed: 1,
            out_dir,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bench setup: {0}")]
    Setup(String),
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub tick_rate_hz: f64,
    /// Full five-node fan-out-and-join latency.
    pub mean_poll_ms: f64,
    pub p99_poll_ms: f64,
    /// Tick rate with the capture period doubled; `None` in remote mode.
    pub doubled_tick_rate_hz: Option<f64>,
    pub rate_delta_pct: Option<f64>,
    pub sequential_cycle_ms: f64,
    /// One LATEST request round trip while capture runs.
    pub single_read_ms: f64,
    pub single_read_p99_ms: f64,
    pub csv_path: PathBuf,
}

impl BenchReport {
    /// Ratio of a frame-synchronous sequential sweep to one decoupled read.
    pub fn seq_over_single(&self) -> f64 {
        self.sequential_cycle_ms / self.single_read_ms
    }
}

struct PhaseResult {
    tick_rate_hz: f64,
    mean_poll_ms: f64,
    p99_poll_ms: f64,
    endpoints: [String; SENSOR_COUNT],
    // Keeps the loopback stack alive for the sequential diagnostic.
    _stack: Option<LocalStack>,
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    fs::create_dir_all(&config.out_dir)?;

    let phase_a = run_phase(config, config.capture_period_ms)?;
    let (sequential_cycle_ms, single_read_ms, single_read_p99_ms) =
        sequential_diagnostic(&phase_a.endpoints)?;
    let (doubled_tick_rate_hz, rate_delta_pct) = if config.endpoints.is_none() {
        drop(phase_a._stack);
        let phase_b = run_phase(config, config.capture_period_ms * 2.0)?;
        let delta =
            (phase_b.tick_rate_hz - phase_a.tick_rate_hz).abs() / phase_a.tick_rate_hz * 100.0;
        (Some(phase_b.tick_rate_hz), Some(delta))
    } else {
        (None, None)
    };

    let csv_path = config.out_dir.join("bench.csv");
    let mut csv = String::from("metric,value\n");
    let _ = writeln!(csv, "tick_rate_hz,{:.3}", phase_a.tick_rate_hz);
    let _ = writeln!(csv, "mean_poll_ms,{:.4}", phase_a.mean_poll_ms);
    let _ = writeln!(csv, "p99_poll_ms,{:.4}", phase_a.p99_poll_ms);
    if let Some(rate) = doubled_tick_rate_hz {
        let _ = writeln!(csv, "doubled_capture_tick_rate_hz,{rate:.3}");
    }
    if let Some(delta) = rate_delta_pct {
        let _ = writeln!(csv, "rate_delta_pct,{delta:.3}");
    }
    let _ = writeln!(csv, "sequential_cycle_ms,{sequential_cycle_ms:.4}");
    let _ = writeln!(csv, "single_read_ms,{single_read_ms:.4}");
    let _ = writeln!(csv, "single_read_p99_ms,{single_read_p99_ms:.4}");
    let _ = writeln!(
        csv,
        "sequential_over_single,{:.3}",
        sequential_cycle_ms / single_read_ms
    );
    fs::write(&csv_path, &csv)?;

    Ok(BenchReport {
        tick_rate_hz: phase_a.tick_rate_hz,
        mean_poll_ms: phase_a.mean_poll_ms,
        p99_poll_ms: phase_a.p99_poll_ms,
        doubled_tick_rate_hz,
        rate_delta_pct,
        sequential_cycle_ms,
        single_read_ms,
        single_read_p99_ms,
        csv_path,
    })
}

/// Runs the unthrottled control loop against live nodes for the window and
/// measures tick rate and poll latency.
fn run_phase(config: &BenchConfig, capture_period_ms: f64) -> Result<PhaseResult, BenchError> {
    let mut stack = match &config.endpoints {
        Some(_) => None,
        None => {
            let sim_cfg = config.sim;
            let seed = config.seed;
            let sources: Vec<Box<dyn crate::node::FrameSource + Send>> = (0..SENSOR_COUNT)
                .map(|i| {
                    Box::new(SimProfileSource::new(sim_cfg, seed.wrapping_add(i as u64)))
                        as Box<dyn crate::node::FrameSource + Send>
                })
                .collect();
            Some(LocalStack::spawn_with_capture(
                |id| {
                    let mut cfg = NodeConfig::new(id);
                    cfg.capture_period_ms = capture_period_ms;
                    cfg
                },
                sources,
            ))
        }
    };
    let endpoints = match (&stack, &config.endpoints) {
        (Some(stack), _) => stack.endpoints.clone(),
        (None, Some(endpoints)) => endpoints.clone(),
        (None, None) => unreachable!(),
    };
    let mut remote_hub;
    let hub: &mut SensorHub = match &mut stack {
        Some(stack) => &mut stack.hub,
        None => {
            remote_hub = Some(SensorHub::connect(&HubConfig::new(endpoints.clone())));
            remote_hub.as_mut().unwrap()
        }
    };
    wait_for_references(hub)?;
    let stats = measure_loop(config, hub)?;
    Ok(PhaseResult {
        tick_rate_hz: stats.0,
        mean_poll_ms: stats.1,
        p99_poll_ms: stats.2,
        endpoints,
        _stack: stack,
    })
}

/// Returns (tick rate, mean poll ms, p99 poll ms) over the window.
fn measure_loop(config: &BenchConfig, hub: &mut SensorHub) -> Result<(f64, f64, f64), BenchError> {
    let mut sim = HandSim::new(config.sim).map_err(|e| BenchError::Setup(e.to_string()))?;
    let mut state = ControllerState::new(0.0);
    let ctl = config.controller;
    let started = Instant::now();
    let window = Duration::from_secs_f64(config.duration_s);
    let mut poll_ns: Vec<u64> = Vec::with_capacity(200_000);
    let mut ticks: u64 = 0;

    while started.elapsed() < window {
        let now_ms = started.elapsed().as_millis() as u64;
        let t0 = Instant::now();
        let vector = match hub.poll(now_ms) {
            Ok(v) => v,
            Err(_) => continue,
        };
        poll_ns.push(t0.elapsed().as_nanos() as u64);
        let encoder = sim.state().motor_position;
        let now_s = started.elapsed().as_secs_f64();
        if let Ok(out) = controller::step(&ctl, &mut state, &vector, encoder, now_s, ctl.tick_period_s)
        {
            let _ = sim.step(out.command, ctl.tick_period_s);
        }
        ticks += 1;
    }

    let elapsed = started.elapsed().as_secs_f64();
    poll_ns.sort_unstable();
    let mean_ns = poll_ns.iter().sum::<u64>() as f64 / poll_ns.len().max(1) as f64;
    let p99_ns = percentile(&poll_ns, 0.99);
    Ok((ticks as f64 / elapsed, mean_ns / 1e6, p99_ns / 1e6))
}

fn percentile(sorted: &[u64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() as f64 * q).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx] as f64
}

/// References must exist before deltas mean anything; nodes may not have
/// captured their first frame yet when the bench starts.
fn wait_for_references(hub: &mut SensorHub) -> Result<(), BenchError> {
    let deadline = Instant::now() + Duration::from_secs(3);
    loop {
        match hub.set_all_references() {
            Ok(()) => return Ok(()),
            Err(e) => {
                if Instant::now() > deadline {
                    return Err(BenchError::Setup(format!("set references: {e}")));
                }
                std::thread::sleep(Duration::from_millis(25));
            }
        }
    }
}

/// The diagnostic the asynchronous architecture exists to avoid: reading
/// the five sensors one after another, each waiting for a fresh frame.
/// Returns (mean sequential cycle, mean single read, p99 single read), ms.
fn sequential_diagnostic(
    endpoints: &[String; SENSOR_COUNT],
) -> Result<(f64, f64, f64), BenchError> {
    let mut conns: Vec<NodeClient> = endpoints
        .iter()
        .map(|e| NodeClient::connect(e))
        .collect::<Result<_, _>>()?;

    // Decoupled read cost: latest-value requests on one connection while
    // the node's capture loop runs.
    let reads = 2000;
    let mut read_ns: Vec<u64> = Vec::with_capacity(reads);
    for _ in 0..reads {
        let t0 = Instant::now();
        conns[0].latest()?;
        read_ns.push(t0.elapsed().as_nanos() as u64);
    }
    read_ns.sort_unstable();
    let single_read_ms = read_ns.iter().sum::<u64>() as f64 / reads as f64 / 1e6;
    let single_read_p99_ms = percentile(&read_ns, 0.99) / 1e6;

    // Frame-synchronous sweep: per sensor, wait until a frame newer than
    // the last seen one arrives before moving to the next sensor.
    let cycles = 30;
    let mut last_seq = [0u64; SENSOR_COUNT];
    for (i, conn) in conns.iter_mut().enumerate() {
        last_seq[i] = conn.latest()?.seq;
    }
    let t0 = Instant::now();
    for _ in 0..cycles {
        for (i, conn) in conns.iter_mut().enumerate() {
            loop {
                let snap = conn.latest()?;
                if snap.seq > last_seq[i] {
                    last_seq[i] = snap.seq;
                    break;
                }
                std::thread::sleep(Duration::from_micros(300));
            }
        }
    }
    let sequential_cycle_ms = t0.elapsed().as_secs_f64() * 1000.0 / cycles as f64;
    Ok((sequential_cycle_ms, single_read_ms, single_read_p99_ms))
}

struct NodeClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl NodeClient {
    fn connect(endpoint: &str) -> Result<Self, BenchError> {
        let stream = TcpStream::connect(endpoint)
            .map_err(|e| BenchError::Setup(format!("connect {endpoint}: {e}")))?;
        stream.set_nodelay(true).map_err(BenchError::Io)?;
        let reader = BufReader::new(stream.try_clone().map_err(BenchError::Io)?);
        Ok(Self { reader, writer: stream })
    }

    fn latest(&mut self) -> Result<softgrasp_core::SensorSnapshot, BenchError> {
        self.writer
            .write_all(wire::encode_request(Request::Latest).as_bytes())
            .map_err(BenchError::Io)?;
        let mut line = String::new();
        self.reader.read_line(&mut line).map_err(BenchError::Io)?;
        match wire::parse_response(&line) {
            Ok(Response::Snap(snap)) => Ok(snap),
            other => Err(BenchError::Setup(format!("unexpected reply {other:?}"))),
        }
    }
}

