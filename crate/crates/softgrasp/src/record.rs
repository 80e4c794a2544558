//! Per-tick run records of a control run: the authoritative flat-file
//! artifact every trial produces.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use softgrasp_core::{ControllerConfig, Epsilon, SENSOR_COUNT};
use thiserror::Error;

pub const RUN_RECORD_HEADER: &str = "t_s,mu,d0,d1,d2,d3,d4,epsilon,command,encoder,current_mA,event";

/// One controller tick as recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    /// Seconds since trial start (virtual time).
    pub t_s: f64,
    pub mu: f64,
    pub deltas: [f64; SENSOR_COUNT],
    pub epsilon: Epsilon,
    /// Motor command emitted this tick.
    pub command: f64,
    /// Encoder feedback the tick was computed from.
    pub encoder: f64,
    pub current_ma: f64,
    /// Phase or disturbance marker, empty for plain ticks.
    pub event: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    pub ticks: Vec<Tick>,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("run record line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl RunRecord {
    pub fn push(&mut self, tick: Tick) {
        self.ticks.push(tick);
    }

    /// Peak motor current over the run, mA.
    pub fn peak_current(&self) -> f64 {
        self.ticks.iter().fold(0.0, |acc, t| acc.max(t.current_ma))
    }

    /// Time of the first tick in contact state.
    pub fn first_contact_s(&self) -> Option<f64> {
        self.ticks
            .iter()
            .find(|t| t.epsilon == Epsilon::Contact)
            .map(|t| t.t_s)
    }

    /// Start of the final run of ticks whose μ stays inside the settling
    /// band through the end of the record.
    pub fn band_entry_s(&self, config: &ControllerConfig) -> Option<f64> {
        let (lo, hi) = config.band();
        let mut entry = None;
        for tick in &self.ticks {
            if tick.mu >= lo && tick.mu <= hi {
                if entry.is_none() {
                    entry = Some(tick.t_s);
                }
            } else {
                entry = None;
            }
        }
        entry
    }

    /// Ticks where ε changed from the previous tick.
    pub fn epsilon_transitions(&self) -> Vec<usize> {
        self.ticks
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].epsilon != w[1].epsilon)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Largest one-tick command change at an ε transition; the bumpless
    /// transfer figure of merit.
    pub fn max_transition_jump(&self) -> f64 {
        self.epsilon_transitions()
            .iter()
            .map(|&i| (self.ticks[i].command - self.ticks[i - 1].command).abs())
            .fold(0.0, f64::max)
    }

    /// Largest one-tick command change anywhere in the run.
    pub fn max_command_step(&self) -> f64 {
        self.ticks
            .windows(2)
            .map(|w| (w[1].command - w[0].command).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.ticks.len() * 96 + 64);
        out.push_str(RUN_RECORD_HEADER);
        out.push('\n');
        for t in &self.ticks {
            let _ = writeln!(
                out,
                "{:.4},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{},{:.4},{:.4},{:.4},{}",
                t.t_s,
                t.mu,
                t.deltas[0],
                t.deltas[1],
                t.deltas[2],
                t.deltas[3],
                t.deltas[4],
                t.epsilon.as_u8(),
                t.command,
                t.encoder,
                t.current_ma,
                t.event
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), RecordError> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<Self, RecordError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == RUN_RECORD_HEADER => {}
            _ => {
                return Err(RecordError::Parse {
                    line: 1,
                    reason: "missing or wrong header".to_string(),
                })
            }
        }
        let mut record = RunRecord::default();
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 12 {
                return Err(RecordError::Parse {
                    line: lineno + 1,
                    reason: format!("expected 12 fields, got {}", fields.len()),
                });
            }
            let num = |idx: usize| -> Result<f64, RecordError> {
                fields[idx].parse().map_err(|_| RecordError::Parse {
                    line: lineno + 1,
                    reason: format!("bad number {:?}", fields[idx]),
                })
            };
            let epsilon = match fields[7] {
                "0" => Epsilon::NoContact,
                "1" => Epsilon::Contact,
                other => {
                    return Err(RecordError::Parse {
                        line: lineno + 1,
                        reason: format!("bad epsilon {other:?}"),
                    })
                }
            };
            record.push(Tick {
                t_s: num(0)?,
                mu: num(1)?,
                deltas: [num(2)?, num(3)?, num(4)?, num(5)?, num(6)?],
                epsilon,
                command: num(8)?,
                encoder: num(9)?,
                current_ma: num(10)?,
                event: fields[11].to_string(),
            });
        }
        Ok(record)
    }

    pub fn read_csv(path: &Path) -> Result<Self, RecordError> {
        Self::parse_csv(&fs::read_to_string(path)?)
    }
}
