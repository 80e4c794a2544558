//! One service process (or in-process object) per fingertip sensor.
//!
//! The node holds the undeformed reference frame, turns incoming frames
//! into deformation snapshots in its capture pipeline, and serves the
//! latest snapshot over TCP. Capture and request handling are decoupled:
//! the capture path only takes the publish lock for a pointer-sized swap,
//! so readers never wait on SSIM processing and the capture loop never
//! waits on readers.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use softgrasp_core::image::TactileImage;
use softgrasp_core::sim::{render_tactile, SimConfig};
use softgrasp_core::ssim::{deformation, is_contact, SsimParams, DEFAULT_CONTACT_THRESHOLD};
use softgrasp_core::{SensorSnapshot, SplitMix64};
use thiserror::Error;

use crate::wire::{self, ErrorKind, Request, Response};

/// Default capture cadence: 30 fps.
pub const DEFAULT_CAPTURE_PERIOD_MS: f64 = 100.0 / 3.0;

#[derive(Debug, Clone)]
pub struct NodeConfig {
    pub sensor_id: u8,
    pub capture_period_ms: f64,
    pub ssim_params: SsimParams,
    pub contact_threshold: f64,
}

impl NodeConfig {
    pub fn new(sensor_id: u8) -> Self {
        Self {
            sensor_id,
            capture_period_ms: DEFAULT_CAPTURE_PERIOD_MS,
            ssim_params: SsimParams::default(),
            contact_threshold: DEFAULT_CONTACT_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        if !(self.capture_period_ms > 0.0) {
            return Err(NodeError::InvalidConfig("capture period must be positive"));
        }
        if !(self.contact_threshold > 0.0 && self.contact_threshold < 1.0) {
            return Err(NodeError::InvalidConfig("contact threshold must be in (0, 1)"));
        }
        self.ssim_params
            .validate()
            .map_err(|_| NodeError::InvalidConfig("invalid ssim params"))?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("invalid node config: {0}")]
    InvalidConfig(&'static str),
    #[error("no frame captured yet")]
    NotReady,
    #[error("bind failed: {0}")]
    Bind(std::io::Error),
}

struct NodeShared {
    config: NodeConfig,
    published: Mutex<SensorSnapshot>,
    last_frame: Mutex<Option<TactileImage>>,
    reference: Mutex<Option<TactileImage>>,
    seq: AtomicU64,
    dropped_frames: AtomicU64,
    stop: AtomicBool,
}

/// Handle to one sensor node. Clones share the same node.
#[derive(Clone)]
pub struct SensorNode {
    shared: Arc<NodeShared>,
}

impl SensorNode {
    pub fn new(config: NodeConfig) -> Result<Self, NodeError> {
        config.validate()?;
        let initial = SensorSnapshot::initial(config.sensor_id);
        Ok(Self {
            shared: Arc::new(NodeShared {
                config,
                published: Mutex::new(initial),
                last_frame: Mutex::new(None),
                reference: Mutex::new(None),
                seq: AtomicU64::new(0),
                dropped_frames: AtomicU64::new(0),
                stop: AtomicBool::new(false),
            }),
        })
    }

    pub fn sensor_id(&self) -> u8 {
        self.shared.config.sensor_id
    }

    /// The most recent published snapshot; never blocks on processing.
    pub fn latest(&self) -> SensorSnapshot {
        *self.shared.published.lock().unwrap()
    }

    pub fn dropped_frames(&self) -> u64 {
        self.shared.dropped_frames.load(Ordering::Relaxed)
    }

    /// Runs one frame through the capture pipeline: computes the
    /// deformation against the stored reference and atomically publishes
    /// the resulting snapshot. Frames that cannot be compared against the
    /// reference are dropped and the previous snapshot stays published.
    pub fn push_frame(&self, frame: TactileImage, timestamp_ms: u64) {
        let shared = &self.shared;
        let reference = shared.reference.lock().unwrap().clone();
        let (delta, reference_set) = match &reference {
            Some(reference) => {
                match deformation(&frame, reference, &shared.config.ssim_params) {
                    Ok(delta) => (delta, true),
                    Err(_) => {
                        shared.dropped_frames.fetch_add(1, Ordering::Relaxed);
                        *shared.last_frame.lock().unwrap() = Some(frame);
                        return;
                    }
                }
            }
            None => (0.0, false),
        };
        *shared.last_frame.lock().unwrap() = Some(frame);
        self.publish(delta, reference_set, timestamp_ms);
    }

    fn publish(&self, delta: f64, reference_set: bool, timestamp_ms: u64) {
        let shared = &self.shared;
        let seq = shared.seq.fetch_add(1, Ordering::Relaxed) + 1;
        let snapshot = SensorSnapshot {
            sensor_id: shared.config.sensor_id,
            seq,
            timestamp_ms,
            delta,
            contact: reference_set && is_contact(delta, shared.config.contact_threshold),
            reference_set,
        };
        *shared.published.lock().unwrap() = snapshot;
    }

    /// Stores the current frame as the undeformed reference and publishes
    /// a zero-deformation snapshot against it.
    pub fn set_reference(&self) -> Result<(), NodeError> {
        let shared = &self.shared;
        let frame = shared.last_frame.lock().unwrap().clone();
        let Some(frame) = frame else {
            return Err(NodeError::NotReady);
        };
        let timestamp = self.latest().timestamp_ms;
        *shared.reference.lock().unwrap() = Some(frame);
        self.publish(0.0, true, timestamp);
        Ok(())
    }

    pub fn reference_set(&self) -> bool {
        self.shared.reference.lock().unwrap().is_some()
    }

    /// Spawns the wall-clock capture loop at the configured period.
    pub fn spawn_capture(&self, mut source: Box<dyn FrameSource + Send>) -> JoinHandle<()> {
        let node = self.clone();
        std::thread::spawn(move || {
            let started = Instant::now();
            let period = Duration::from_secs_f64(node.shared.config.capture_period_ms / 1000.0);
            let mut next = started;
            while !node.shared.stop.load(Ordering::Relaxed) {
                let t_ms = started.elapsed().as_millis() as u64;
                if let Some(frame) = source.frame_at(t_ms) {
                    node.push_frame(frame, t_ms);
                }
                next += period;
                let now = Instant::now();
                if next > now {
                    std::thread::sleep(next - now);
                } else {
                    // Fell behind; resynchronise instead of bursting.
                    next = now;
                }
            }
        })
    }

    /// Binds the listener for [`SensorNode::spawn_server`].
    pub fn bind(addr: &str) -> Result<TcpListener, NodeError> {
        TcpListener::bind(addr).map_err(NodeError::Bind)
    }

    /// Serves the wire protocol; one thread per connection. Request
    /// handling reads only the published snapshot, independent of the
    /// capture cadence.
    pub fn spawn_server(&self, listener: TcpListener) -> (SocketAddr, JoinHandle<()>) {
        let addr = listener.local_addr().expect("listener has a local addr");
        let node = self.clone();
        let handle = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if node.shared.stop.load(Ordering::Relaxed) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let node = node.clone();
                std::thread::spawn(move || node.serve_connection(conn));
            }
        });
        (addr, handle)
    }

    fn serve_connection(&self, stream: TcpStream) {
        let _ = stream.set_nodelay(true);
        let Ok(read_half) = stream.try_clone() else { return };
        let mut reader = BufReader::new(read_half);
        let mut writer = stream;
        let mut line = String::new();
        loop {
            line.clear();
            match reader.read_line(&mut line) {
                Ok(0) | Err(_) => return,
                Ok(_) => {}
            }
            let response = match wire::parse_request(&line) {
                Some(Request::Latest) => Response::Snap(self.latest()),
                Some(Request::Ping) => Response::Pong(self.sensor_id()),
                Some(Request::SetRef) => match self.set_reference() {
                    Ok(()) => Response::Ok,
                    Err(_) => Response::Err(ErrorKind::NotReady),
                },
                None => Response::Err(ErrorKind::BadRequest),
            };
            if writer.write_all(wire::encode_response(&response).as_bytes()).is_err() {
                return;
            }
        }
    }

    /// Signals capture and accept loops to exit.
    pub fn stop(&self) {
        self.shared.stop.store(true, Ordering::Relaxed);
    }
}

/// Produces frames for a node's capture loop.
pub trait FrameSource {
    /// The frame visible at `t_ms` on the node clock, or `None` when the
    /// source is exhausted.
    fn frame_at(&mut self, t_ms: u64) -> Option<TactileImage>;
}

/// Synthetic frames from a local plant render: a slow sinusoidal press and
/// release, deterministic in the node clock. Used by standalone nodes and
/// the loop-rate benchmark, where realistic per-frame SSIM load matters but
/// no experiment plant is attached.
pub struct SimProfileSource {
    sim_config: SimConfig,
    seed: u64,
    peak_force_n: f64,
    period_ms: f64,
    frame_index: u64,
}

impl SimProfileSource {
    pub fn new(sim_config: SimConfig, seed: u64) -> Self {
        Self {
            sim_config,
            seed,
            peak_force_n: 2.0,
            period_ms: 4000.0,
            frame_index: 0,
        }
    }
}

impl FrameSource for SimProfileSource {
    fn frame_at(&mut self, t_ms: u64) -> Option<TactileImage> {
        let phase = (t_ms as f64 / self.period_ms) * std::f64::consts::TAU;
        let force = self.peak_force_n * 0.5 * (1.0 - phase.cos());
        let seed = SplitMix64::new(self.seed).fork(self.frame_index).next_u64();
        self.frame_index += 1;
        Some(render_tactile(force, &self.sim_config, seed))
    }
}

/// Replays a fixed frame sequence, looping when `loop_frames` is set.
pub struct ReplaySource {
    frames: Vec<TactileImage>,
    index: usize,
    loop_frames: bool,
}

impl ReplaySource {
    pub fn new(frames: Vec<TactileImage>, loop_frames: bool) -> Self {
        Self { frames, index: 0, loop_frames }
    }
}

impl FrameSource for ReplaySource {
    fn frame_at(&mut self, _t_ms: u64) -> Option<TactileImage> {
        if self.frames.is_empty() {
            return None;
        }
        if self.index >= self.frames.len() {
            if !self.loop_frames {
                return None;
            }
            self.index = 0;
        }
        let frame = self.frames[self.index].clone();
        self.index += 1;
        Some(frame)
    }
}
