//! The control loop: polls the hub, steps the controller, commands the
//! plant, and records every tick.
//!
//! Experiments run on a virtual clock. Each tick advances simulated time by
//! the controller period; when virtual time crosses a capture boundary the
//! plant renders all five fingertip frames and pushes them through the
//! in-process nodes' capture pipelines synchronously. The hub still reads
//! over real TCP, but every value it can observe is a function of virtual
//! time alone, so identical seeds replay byte-identically regardless of
//! wall-clock jitter. Polls wait for all live nodes (no timeout
//! substitution) for the same reason.

use std::net::TcpStream;
use std::thread::JoinHandle;

use softgrasp_core::controller::{self, ControllerConfig, ControllerState, Epsilon};
use softgrasp_core::sim::{render_tactile, HandSim};
use softgrasp_core::{SplitMix64, SENSOR_COUNT};
use thiserror::Error;

use crate::hub::{HubConfig, HubError, SensorHub};
use crate::node::{FrameSource, NodeConfig, SensorNode, DEFAULT_CAPTURE_PERIOD_MS};
use crate::record::{RunRecord, Tick};

#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub controller: ControllerConfig,
    pub capture_period_ms: f64,
    /// Trial budget in simulated seconds.
    pub max_duration_s: f64,
    pub render_seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            controller: ControllerConfig::default(),
            capture_period_ms: DEFAULT_CAPTURE_PERIOD_MS,
            max_duration_s: 8.0,
            render_seed: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("hub: {0}")]
    Hub(#[from] HubError),
    #[error("plant: {0}")]
    Sim(#[from] softgrasp_core::sim::SimError),
    #[error("controller: {0}")]
    Controller(#[from] softgrasp_core::controller::ControllerError),
}

/// Simulated-time clock shared across the trials of one experiment so hub
/// age bookkeeping stays monotonic.
#[derive(Debug, Clone)]
pub struct VirtualClock {
    now_ms: f64,
    next_capture_ms: f64,
    frame_index: u64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self { now_ms: 0.0, next_capture_ms: 0.0, frame_index: 0 }
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms as u64
    }
}

impl Default for VirtualClock {
    fn default() -> Self {
        Self::new()
    }
}

/// Runs one grasp against the simulated plant through the node/hub stack.
pub struct GraspRunner<'a> {
    sim: &'a mut HandSim,
    nodes: &'a [SensorNode],
    hub: &'a mut SensorHub,
    cfg: LoopConfig,
    clock: &'a mut VirtualClock,
    state: ControllerState,
    record: RunRecord,
    trial_start_ms: f64,
    pending_event: String,
    contact_seen: bool,
}

/// Result of a grasp run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspOutcome {
    pub settled: bool,
    /// Seconds from first contact to the final band entry, when settled.
    pub settle_time_s: Option<f64>,
    pub duration_s: f64,
}

impl<'a> GraspRunner<'a> {
    pub fn new(
        sim: &'a mut HandSim,
        nodes: &'a [SensorNode],
        hub: &'a mut SensorHub,
        clock: &'a mut VirtualClock,
        cfg: LoopConfig,
    ) -> Self {
        assert_eq!(nodes.len(), SENSOR_COUNT);
        let initial_command = sim.state().motor_position;
        let trial_start_ms = clock.now_ms;
        Self {
            sim,
            nodes,
            hub,
            cfg,
            clock,
            state: ControllerState::new(initial_command),
            record: RunRecord::default(),
            trial_start_ms,
            pending_event: String::new(),
            contact_seen: false,
        }
    }

    /// Captures the undeformed frames and stores them as references on all
    /// five nodes, then primes the hub with one complete poll.
    pub fn prime_references(&mut self) -> Result<(), RunError> {
        // Re-image now: a new trial must never inherit the previous
        // trial's last frame as its reference.
        self.clock.next_capture_ms = self.clock.now_ms;
        self.capture_frames();
        // Frames travelled through the nodes synchronously; the reference
        // command goes over the wire like any other request.
        self.hub.set_all_references()?;
        self.hub.poll_complete(self.clock.now_ms())?;
        self.mark_event("reference_set");
        Ok(())
    }

    /// Attaches a marker to the next recorded tick.
    pub fn mark_event(&mut self, event: &str) {
        if !self.pending_event.is_empty() {
            self.pending_event.push(';');
        }
        self.pending_event.push_str(event);
    }

    pub fn t_rel_s(&self) -> f64 {
        (self.clock.now_ms - self.trial_start_ms) / 1000.0
    }

    pub fn controller_state(&self) -> &ControllerState {
        &self.state
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn into_record(self) -> RunRecord {
        self.record
    }

    pub fn sim(&mut self) -> &mut HandSim {
        self.sim
    }

    pub fn settled(&self) -> bool {
        controller::settled(&self.state, &self.cfg.controller)
    }

    fn capture_frames(&mut self) {
        while self.clock.next_capture_ms <= self.clock.now_ms + 1e-9 {
            let timestamp = self.clock.next_capture_ms as u64;
            for (finger, node) in self.nodes.iter().enumerate() {
                let force = self.sim.tactile_force(finger);
                let seed = SplitMix64::new(self.cfg.render_seed)
                    .fork(finger as u64)
                    .fork(self.clock.frame_index)
                    .next_u64();
                let frame = render_tactile(force, self.sim.config(), seed);
                node.push_frame(frame, timestamp);
            }
            self.clock.frame_index += 1;
            self.clock.next_capture_ms += self.cfg.capture_period_ms;
        }
    }

    /// One controller tick: capture if due, poll, step, actuate, record.
    pub fn tick(&mut self) -> Result<Epsilon, RunError> {
        self.capture_frames();
        let dt = self.cfg.controller.tick_period_s;
        let now_s = self.t_rel_s();
        let vector = self.hub.poll_complete(self.clock.now_ms())?;
        let encoder = self.sim.state().motor_position;
        let out = controller::step(
            &self.cfg.controller,
            &mut self.state,
            &vector,
            encoder,
            now_s,
            dt,
        )?;
        self.sim.step(out.command, dt)?;

        if out.epsilon == Epsilon::Contact && !self.contact_seen {
            self.contact_seen = true;
            self.mark_event("first_contact");
        }
        let event = std::mem::take(&mut self.pending_event);
        self.record.push(Tick {
            t_s: now_s,
            mu: vector.mean,
            deltas: vector.deltas,
            epsilon: out.epsilon,
            command: out.command,
            encoder,
            current_ma: self.sim.state().motor_current,
            event,
        });
        self.clock.now_ms += dt * 1000.0;
        Ok(out.epsilon)
    }

    /// Ticks until the grasp settles (band held for the dwell) or the trial
    /// budget runs out.
    pub fn run_grasp(&mut self) -> Result<GraspOutcome, RunError> {
        loop {
            self.tick()?;
            if self.settled() {
                self.mark_event("settled");
                // Attach the marker to a final recorded tick.
                self.tick()?;
                let settle_time = self.settle_time_s();
                return Ok(GraspOutcome {
                    settled: true,
                    settle_time_s: settle_time,
                    duration_s: self.t_rel_s(),
                });
            }
            if self.t_rel_s() >= self.cfg.max_duration_s {
                return Ok(GraspOutcome {
                    settled: false,
                    settle_time_s: None,
                    duration_s: self.t_rel_s(),
                });
            }
        }
    }

    /// Seconds from first contact to the final entry into the band.
    pub fn settle_time_s(&self) -> Option<f64> {
        let first_contact = self.record.first_contact_s()?;
        let entry = self.record.band_entry_s(&self.cfg.controller)?;
        Some((entry - first_contact).max(0.0))
    }
}

/// Five in-process sensor nodes served over loopback TCP plus a connected
/// hub: the `--local` deployment.
pub struct LocalStack {
    // Hub first: its workers disconnect before the nodes shut down.
    pub hub: SensorHub,
    pub nodes: Vec<SensorNode>,
    pub endpoints: [String; SENSOR_COUNT],
    server_handles: Vec<JoinHandle<()>>,
    capture_handles: Vec<JoinHandle<()>>,
}

impl LocalStack {
    /// Spawns the five node servers on ephemeral loopback ports. Frames are
    /// pushed by the caller (virtual clock mode).
    pub fn spawn(node_config: impl Fn(u8) -> NodeConfig) -> Self {
        Self::spawn_inner(node_config, None)
    }

    /// Same, but with wall-clock capture loops pulling from per-node frame
    /// sources (live/benchmark mode).
    pub fn spawn_with_capture(
        node_config: impl Fn(u8) -> NodeConfig,
        mut sources: Vec<Box<dyn FrameSource + Send>>,
    ) -> Self {
        assert_eq!(sources.len(), SENSOR_COUNT);
        let mut drained: Vec<Option<Box<dyn FrameSource + Send>>> =
            sources.drain(..).map(Some).collect();
        Self::spawn_inner(node_config, Some(&mut drained))
    }

    fn spawn_inner(
        node_config: impl Fn(u8) -> NodeConfig,
        sources: Option<&mut Vec<Option<Box<dyn FrameSource + Send>>>>,
    ) -> Self {
        let mut nodes = Vec::with_capacity(SENSOR_COUNT);
        let mut endpoints: [String; SENSOR_COUNT] = Default::default();
        let mut server_handles = Vec::new();
        let mut capture_handles = Vec::new();
        for (i, endpoint) in endpoints.iter_mut().enumerate() {
            let node = SensorNode::new(node_config(i as u8)).expect("valid node config");
            let listener = SensorNode::bind("127.0.0.1:0").expect("loopback bind");
            let (addr, handle) = node.spawn_server(listener);
            *endpoint = addr.to_string();
            server_handles.push(handle);
            nodes.push(node);
        }
        if let Some(sources) = sources {
            for (i, source) in sources.iter_mut().enumerate() {
                let source = source.take().expect("one source per node");
                capture_handles.push(nodes[i].spawn_capture(source));
            }
        }
        let hub = SensorHub::connect(&HubConfig::new(endpoints.clone()));
        Self { hub, nodes, endpoints, server_handles, capture_handles }
    }
}

impl Drop for LocalStack {
    fn drop(&mut self) {
        for node in &self.nodes {
            node.stop();
        }
        // Wake the accept loops so they observe the stop flag.
        for endpoint in &self.endpoints {
            let _ = TcpStream::connect(endpoint);
        }
        for handle in self.capture_handles.drain(..) {
            let _ = handle.join();
        }
        for handle in self.server_handles.drain(..) {
            let _ = handle.join();
        }
    }
}

