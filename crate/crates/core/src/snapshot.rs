//! Published sensor samples and the aggregated five-finger feedback vector.

use core::fmt;

/// Number of fingertip sensors on the hand.
pub const SENSOR_COUNT: usize = 5;

/// The latest processed result of one sensor node. This is the only data
/// that crosses the wire: scalar deformation, never frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSnapshot {
    /// Sensor index n in 0..5.
    pub sensor_id: u8,
    /// Strictly increasing frame counter.
    pub seq: u64,
    /// Capture time in milliseconds on the node's clock.
    pub timestamp_ms: u64,
    /// Deformation score against the stored reference, in [0, 1].
    pub delta: f64,
    /// Whether `delta` exceeded the node's contact threshold.
    pub contact: bool,
    /// Whether an undeformed reference frame has been stored.
    pub reference_set: bool,
}

impl SensorSnapshot {
    /// The state published before any frame has been processed.
    pub fn initial(sensor_id: u8) -> Self {
        Self {
            sensor_id,
            seq: 0,
            timestamp_ms: 0,
            delta: 0.0,
            contact: false,
            reference_set: false,
        }
    }
}

/// The controller's per-tick feedback: all five deformation scores, their
/// mean, contact flags, and freshness bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationVector {
    pub deltas: [f64; SENSOR_COUNT],
    /// Arithmetic mean of `deltas`.
    pub mean: f64,
    pub contacts: [bool; SENSOR_COUNT],
    /// Age of the oldest contributing snapshot, in milliseconds.
    pub max_age_ms: u64,
    /// True once every node has contributed at least one real snapshot.
    pub complete: bool,
}

impl DeformationVector {
    pub fn new(
        deltas: [f64; SENSOR_COUNT],
        contacts: [bool; SENSOR_COUNT],
        max_age_ms: u64,
        complete: bool,
    ) -> Self {
        let mean = deltas.iter().sum::<f64>() / SENSOR_COUNT as f64;
        Self { deltas, mean, contacts, max_age_ms, complete }
    }

    pub fn any_contact(&self) -> bool {
        self.contacts.iter().any(|&c| c)
    }
}

impl fmt::Display for DeformationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mu={:.4} deltas=[{:.4} {:.4} {:.4} {:.4} {:.4}] age={}ms",
            self.mean,
            self.deltas[0],
            self.deltas[1],
            self.deltas[2],
            self.deltas[3],
            self.deltas[4],
            self.max_age_ms
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_is_arithmetic_mean() {
        let v = DeformationVector::new([0.06, 0.0, 0.0, 0.0, 0.0], [true; 5], 0, true);
        assert!((v.mean - 0.012).abs() < 1e-12);
        let v = DeformationVector::new([0.1; 5], [true; 5], 0, true);
        assert!((v.mean - 0.1).abs() < 1e-12);
    }

    #[test]
    fn any_contact_reflects_flags() {
        let none = DeformationVector::new([0.0; 5], [false; 5], 0, true);
        assert!(!none.any_contact());
        let one = DeformationVector::new([0.06, 0.0, 0.0, 0.0, 0.0], [true, false, false, false, false], 0, true);
        assert!(one.any_contact());
    }
}
