//! Controller-side aggregator: polls all five sensor nodes concurrently and
//! assembles the per-tick deformation vector.
//!
//! Each node gets a dedicated worker thread owning one persistent
//! connection; a poll fans a request out to every worker and joins the
//! replies, either within a timeout (live operation) or to completion
//! (deterministic experiment replay). A node that misses the deadline
//! contributes its last known snapshot with increased age rather than a
//! zeroed deformation, so a dead sensor can never read as "no contact".

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::mpsc::{Receiver, Sender};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use softgrasp_core::{DeformationVector, SensorSnapshot, SENSOR_COUNT};
use thiserror::Error;

use crate::wire::{self, Request, Response};

pub const DEFAULT_POLL_TIMEOUT_MS: u64 = 5;

const CONNECT_TIMEOUT: Duration = Duration::from_millis(150);
const SOCKET_TIMEOUT: Duration = Duration::from_millis(1000);
const SETREF_WAIT: Duration = Duration::from_millis(2000);
const CONNECT_PING_WAIT: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HubConfig {
    pub endpoints: [String; SENSOR_COUNT],
    pub poll_timeout_ms: u64,
}

impl HubConfig {
    pub fn new(endpoints: [String; SENSOR_COUNT]) -> Self {
        Self { endpoints, poll_timeout_ms: DEFAULT_POLL_TIMEOUT_MS }
    }

    /// Parses the plain-text `key = value` hub config: `node0`..`node4`
    /// endpoints plus an optional `poll_timeout_ms`.
    pub fn parse(text: &str) -> Result<Self, HubError> {
        let mut values = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HubError::Config(format!("line {}: expected key=value", lineno + 1)))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut endpoints: [String; SENSOR_COUNT] = Default::default();
        for (i, endpoint) in endpoints.iter_mut().enumerate() {
            *endpoint = values
                .remove(&format!("node{i}"))
                .ok_or_else(|| HubError::Config(format!("missing node{i} endpoint")))?;
        }
        let poll_timeout_ms = match values.remove("poll_timeout_ms") {
            Some(v) => v
                .parse()
                .map_err(|_| HubError::Config(format!("bad poll_timeout_ms: {v}")))?,
            None => DEFAULT_POLL_TIMEOUT_MS,
        };
        Ok(Self { endpoints, poll_timeout_ms })
    }
}

#[derive(Debug, Error)]
pub enum HubError {
    #[error("no sensor node has ever answered")]
    NotReady,
    #[error("set-reference failed on node(s) {}", format_failures(.0))]
    SetRefFailed(Vec<(usize, String)>),
    #[error("hub config: {0}")]
    Config(String),
}

fn format_failures(failures: &[(usize, String)]) -> String {
    failures
        .iter()
        .map(|(node, reason)| format!("{node} ({reason})"))
        .collect::<Vec<_>>()
        .join(", ")
}

enum Cmd {
    Ping(u64),
    Poll(u64),
    SetRef(u64),
    Shutdown,
}

enum ReplyBody {
    Pong,
    Snapshot(SensorSnapshot),
    SetRefOk,
    Failure(String),
}

struct Reply {
    generation: u64,
    node: usize,
    body: ReplyBody,
}

struct Worker {
    sender: Sender<Cmd>,
    handle: Option<JoinHandle<()>>,
}

/// Poll completion policy.
#[derive(Debug, Clone, Copy)]
pub enum PollMode {
    /// Wait at most this long; missing nodes contribute stale data.
    Timeout(Duration),
    /// Wait for every live node to answer. Used by the deterministic
    /// experiment loop, where wall-clock jitter must not change results.
    Complete,
}

pub struct SensorHub {
    workers: Vec<Worker>,
    replies: Receiver<Reply>,
    last_known: [Option<(SensorSnapshot, u64)>; SENSOR_COUNT],
    alive: [bool; SENSOR_COUNT],
    generation: u64,
    poll_timeout: Duration,
}

impl SensorHub {
    /// Spawns the five workers and marks nodes answering PING as live.
    /// Unreachable nodes leave the hub degraded, not failed.
    pub fn connect(config: &HubConfig) -> Self {
        let (reply_tx, reply_rx) = std::sync::mpsc::channel();
        let workers = config
            .endpoints
            .iter()
            .enumerate()
            .map(|(node, endpoint)| {
                let (cmd_tx, cmd_rx) = std::sync::mpsc::channel();
                let endpoint = endpoint.clone();
                let replies = reply_tx.clone();
                let handle = std::thread::spawn(move || worker_loop(node, endpoint, cmd_rx, replies));
                Worker { sender: cmd_tx, handle: Some(handle) }
            })
            .collect();
        let mut hub = Self {
            workers,
            replies: reply_rx,
            last_known: [None; SENSOR_COUNT],
            alive: [false; SENSOR_COUNT],
            generation: 0,
            poll_timeout: Duration::from_millis(config.poll_timeout_ms),
        };
        let generation = hub.broadcast(Cmd::Ping);
        hub.collect_replies(generation, SENSOR_COUNT, Some(CONNECT_PING_WAIT), 0);
        hub
    }

    pub fn live_nodes(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    /// Polls with the configured timeout.
    pub fn poll(&mut self, now_ms: u64) -> Result<DeformationVector, HubError> {
        self.poll_with(now_ms, PollMode::Timeout(self.poll_timeout))
    }

    /// Polls waiting for every live node.
    pub fn poll_complete(&mut self, now_ms: u64) -> Result<DeformationVector, HubError> {
        self.poll_with(now_ms, PollMode::Complete)
    }

    pub fn poll_with(&mut self, now_ms: u64, mode: PollMode) -> Result<DeformationVector, HubError> {
        let expected = match mode {
            PollMode::Timeout(_) => SENSOR_COUNT,
            PollMode::Complete => self.live_nodes().max(1),
        };
        let generation = self.broadcast(Cmd::Poll);
        let timeout = match mode {
            PollMode::Timeout(t) => Some(t),
            PollMode::Complete => None,
        };
        self.collect_replies(generation, expected, timeout, now_ms);
        self.assemble(now_ms)
    }

    /// Issues SETREF to all nodes; succeeds only if all five acknowledge.
    pub fn set_all_references(&mut self) -> Result<(), HubError> {
        let generation = self.broadcast(Cmd::SetRef);
        let deadline = Instant::now() + SETREF_WAIT;
        let mut outcomes: [Option<Result<(), String>>; SENSOR_COUNT] = Default::default();
        let mut answered = 0;
        while answered < SENSOR_COUNT {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                break;
            }
            let Ok(reply) = self.replies.recv_timeout(remaining) else { break };
            self.note_alive(&reply);
            if reply.generation != generation {
                continue;
            }
            outcomes[reply.node] = Some(match reply.body {
                ReplyBody::SetRefOk => Ok(()),
                ReplyBody::Failure(reason) => Err(reason),
                _ => Err("unexpected reply".to_string()),
            });
            answered += 1;
        }
        let failures: Vec<(usize, String)> = outcomes
            .iter()
            .enumerate()
            .filter_map(|(node, outcome)| match outcome {
                Some(Ok(())) => None,
                Some(Err(reason)) => Some((node, reason.clone())),
                None => Some((node, "no response".to_string())),
            })
            .collect();
        if failures.is_empty() {
            Ok(())
        } else {
            Err(HubError::SetRefFailed(failures))
        }
    }

    fn broadcast(&mut self, cmd: impl Fn(u64) -> Cmd) -> u64 {
        self.generation += 1;
        for worker in &self.workers {
            let _ = worker.sender.send(cmd(self.generation));
        }
        self.generation
    }

    /// Collects replies for `generation`, updating freshness bookkeeping.
    /// Replies from older generations still carry valid node data and are
    /// folded in, but only current-generation replies count toward
    /// completion.
    fn collect_replies(
        &mut self,
        generation: u64,
        expected: usize,
        timeout: Option<Duration>,
        now_ms: u64,
    ) {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut answered = 0;
        while answered < expected {
            let reply = match deadline {
                Some(deadline) => {
                    let remaining = deadline.saturating_duration_since(Instant::now());
                    if remaining.is_zero() {
                        break;
                    }
                    match self.replies.recv_timeout(remaining) {
                        Ok(reply) => reply,
                        Err(_) => break,
                    }
                }
                None => match self.replies.recv() {
                    Ok(reply) => reply,
                    Err(_) => break,
                },
            };
            self.note_alive(&reply);
            if let ReplyBody::Snapshot(snapshot) = &reply.body {
                self.last_known[reply.node] = Some((*snapshot, now_ms));
            }
            if reply.generation == generation {
                answered += 1;
            }
        }
    }

    fn note_alive(&mut self, reply: &Reply) {
        self.alive[reply.node] = !matches!(reply.body, ReplyBody::Failure(_));
    }

    fn assemble(&self, now_ms: u64) -> Result<DeformationVector, HubError> {
        if self.last_known.iter().all(|k| k.is_none()) {
            return Err(HubError::NotReady);
        }
        let mut deltas = [0.0; SENSOR_COUNT];
        let mut contacts = [false; SENSOR_COUNT];
        let mut max_age = 0u64;
        let mut complete = true;
        for (i, known) in self.last_known.iter().enumerate() {
            match known {
                Some((snapshot, received_at)) => {
                    deltas[i] = snapshot.delta;
                    contacts[i] = snapshot.contact;
                    max_age = max_age.max(now_ms.saturating_sub(*received_at));
                }
                None => {
                    complete = false;
                    max_age = max_age.max(now_ms);
                }
            }
        }
        Ok(DeformationVector::new(deltas, contacts, max_age, complete))
    }
}

impl Drop for SensorHub {
    fn drop(&mut self) {
        for worker in &self.workers {
            let _ = worker.sender.send(Cmd::Shutdown);
        }
        for worker in &mut self.workers {
            if let Some(handle) = worker.handle.take() {
                let _ = handle.join();
            }
        }
    }
}

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

fn worker_loop(node: usize, endpoint: String, cmds: Receiver<Cmd>, replies: Sender<Reply>) {
    let mut conn: Option<Conn> = None;
    'outer: while let Ok(first) = cmds.recv() {
        // Coalesce queued polls so a slow reconnect cannot build a backlog;
        // pings and setrefs are answered individually.
        let mut batch = vec![first];
        while let Ok(extra) = cmds.try_recv() {
            batch.push(extra);
        }
        let mut newest_poll: Option<u64> = None;
        for cmd in batch {
            match cmd {
                Cmd::Shutdown => break 'outer,
                Cmd::Poll(generation) => newest_poll = Some(generation),
                Cmd::Ping(generation) => {
                    let body = match request(&mut conn, &endpoint, Request::Ping) {
                        Ok(Response::Pong(_)) => ReplyBody::Pong,
                        Ok(other) => ReplyBody::Failure(format!("unexpected reply {other:?}")),
                        Err(e) => ReplyBody::Failure(e),
                    };
                    let _ = replies.send(Reply { generation, node, body });
                }
                Cmd::SetRef(generation) => {
                    let body = match request(&mut conn, &endpoint, Request::SetRef) {
                        Ok(Response::Ok) => ReplyBody::SetRefOk,
                        Ok(Response::Err(kind)) => ReplyBody::Failure(format!("{kind:?}")),
                        Ok(other) => ReplyBody::Failure(format!("unexpected reply {other:?}")),
                        Err(e) => ReplyBody::Failure(e),
                    };
                    let _ = replies.send(Reply { generation, node, body });
                }
            }
        }
        if let Some(generation) = newest_poll {
            let body = match request(&mut conn, &endpoint, Request::Latest) {
                Ok(Response::Snap(snapshot)) => ReplyBody::Snapshot(snapshot),
                Ok(other) => ReplyBody::Failure(format!("unexpected reply {other:?}")),
                Err(e) => ReplyBody::Failure(e),
            };
            let _ = replies.send(Reply { generation, node, body });
        }
    }
}

/// One request/response over the persistent connection, reconnecting once
/// on failure so a restarted node is picked up on its first answered poll.
fn request(conn: &mut Option<Conn>, endpoint: &str, req: Request) -> Result<Response, String> {
    for attempt in 0..2 {
        if conn.is_none() {
            *conn = Some(connect(endpoint)?);
        }
        match try_request(conn.as_mut().unwrap(), req) {
            Ok(response) => return Ok(response),
            Err(e) => {
                *conn = None;
                if attempt == 1 {
                    return Err(e);
                }
            }
        }
    }
    unreachable!()
}

fn connect(endpoint: &str) -> Result<Conn, String> {
    let addr = endpoint
        .to_socket_addrs()
        .map_err(|e| format!("resolve {endpoint}: {e}"))?
        .next()
        .ok_or_else(|| format!("no address for {endpoint}"))?;
    let stream = TcpStream::connect_timeout(&addr, CONNECT_TIMEOUT)
        .map_err(|e| format!("connect {endpoint}: {e}"))?;
    stream.set_nodelay(true).map_err(|e| e.to_string())?;
    stream
        .set_read_timeout(Some(SOCKET_TIMEOUT))
        .map_err(|e| e.to_string())?;
    stream
        .set_write_timeout(Some(SOCKET_TIMEOUT))
        .map_err(|e| e.to_string())?;
    let reader = BufReader::new(stream.try_clone().map_err(|e| e.to_string())?);
    Ok(Conn { reader, writer: stream })
}

fn try_request(conn: &mut Conn, req: Request) -> Result<Response, String> {
    conn.writer
        .write_all(wire::encode_request(req).as_bytes())
        .map_err(|e| format!("write: {e}"))?;
    let mut line = String::new();
    let n = conn.reader.read_line(&mut line).map_err(|e| format!("read: {e}"))?;
    if n == 0 {
        return Err("connection closed".to_string());
    }
    wire::parse_response(&line).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_endpoints_and_timeout() {
        let text = "\
# five fingertip nodes
node0 = 127.0.0.1:7400
node1 = 127.0.0.1:7401
node2 = 127.0.0.1:7402
node3 = 127.0.0.1:7403
node4 = 127.0.0.1:7404
poll_timeout_ms = 8
";
        let cfg = HubConfig::parse(text).unwrap();
        assert_eq!(cfg.endpoints[4], "127.0.0.1:7404");
        assert_eq!(cfg.poll_timeout_ms, 8);
    }

    #[test]
    fn config_defaults_poll_timeout() {
        let text = (0..5)
            .map(|i| format!("node{i} = 127.0.0.1:{}\n", 7400 + i))
            .collect::<String>();
        let cfg = HubConfig::parse(&text).unwrap();
        assert_eq!(cfg.poll_timeout_ms, DEFAULT_POLL_TIMEOUT_MS);
    }

    #[test]
    fn config_rejects_missing_node() {
        let text = "node0 = 127.0.0.1:7400\n";
        assert!(matches!(HubConfig::parse(text), Err(HubError::Config(_))));
        assert!(matches!(HubConfig::parse("garbage line"), Err(HubError::Config(_))));
    }
}
