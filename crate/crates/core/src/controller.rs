//! State-dependent switching grasp controller.
//!
//! While no fingertip is in contact (ε = 0) the hand is driven toward full
//! closure by a proportional law on the motor encoder position. Once any
//! fingertip contacts (ε = 1) control switches to a PI law on the mean
//! deformation μ toward its setpoint. Both feedback variables are tracked
//! every tick regardless of the occupied mode, and the PI output bias is
//! re-initialised from the actuation point at each switch, so the emitted
//! command is continuous across transitions. A per-tick slew bound and the
//! actuation range are enforced on every output.

use alloc::collections::VecDeque;
use core::fmt;

use crate::snapshot::DeformationVector;

/// Contact state variable ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Epsilon {
    /// No fingertip in contact; position-P drive toward full closure.
    NoContact,
    /// At least one fingertip in contact; PI on mean deformation.
    Contact,
}

impl Epsilon {
    pub fn as_u8(&self) -> u8 {
        match self {
            Epsilon::NoContact => 0,
            Epsilon::Contact => 1,
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Controller gains and operating limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    /// Target mean deformation μ.
    pub setpoint: f64,
    /// Per-sensor deformation threshold for the contact state.
    pub contact_threshold: f64,
    /// State-0 proportional gain, per second.
    pub kp_position: f64,
    /// State-1 proportional gain, encoder units per unit of μ error.
    pub kp_mu: f64,
    /// State-1 integral gain, encoder units per unit of μ error per second.
    pub ki_mu: f64,
    /// State-0 target: maximum closure.
    pub closure_setpoint: f64,
    /// Upper actuation bound.
    pub u_max: f64,
    /// Control loop period in seconds.
    pub tick_period_s: f64,
    /// Half-width of the settling band as a fraction of the setpoint.
    pub settle_band: f64,
    /// Time μ must stay inside the band before the grasp counts as settled.
    pub settle_dwell_s: f64,
    /// Anti-windup clamp on the integrator magnitude, encoder units.
    pub integrator_limit: f64,
    /// Maximum commanded change per tick, encoder units.
    pub slew_bound: f64,
    /// Feedback older than this holds the previous command.
    pub staleness_limit_ms: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            setpoint: 0.5,
            contact_threshold: 0.05,
            kp_position: 1.0,
            kp_mu: 10.0,
            ki_mu: 250.0,
            closure_setpoint: 1000.0,
            u_max: 1000.0,
            tick_period_s: 1.0 / 286.0,
            settle_band: 0.05,
            settle_dwell_s: 0.5,
            integrator_limit: 400.0,
            slew_bound: 15.0,
            staleness_limit_ms: 67,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.setpoint > 0.0 && self.setpoint < 1.0) {
            return Err(ControllerError::InvalidConfig("setpoint must be in (0, 1)"));
        }
        if !(self.contact_threshold > 0.0 && self.contact_threshold < 1.0) {
            return Err(ControllerError::InvalidConfig("contact_threshold must be in (0, 1)"));
        }
        if self.kp_position < 0.0 || self.kp_mu < 0.0 || self.ki_mu < 0.0 {
            return Err(ControllerError::InvalidConfig("gains must be non-negative"));
        }
        if !(self.tick_period_s > 0.0) {
            return Err(ControllerError::InvalidConfig("tick_period must be positive"));
        }
        if !(self.u_max > 0.0) || !(self.slew_bound > 0.0) {
            return Err(ControllerError::InvalidConfig("u_max and slew_bound must be positive"));
        }
        Ok(())
    }

    /// Lower and upper edge of the settling band.
    pub fn band(&self) -> (f64, f64) {
        (
            self.setpoint * (1.0 - self.settle_band),
            self.setpoint * (1.0 + self.settle_band),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerError {
    InvalidConfig(&'static str),
    /// `step` was called with a non-positive dt.
    InvalidTimestep,
}

impl fmt::Display for ControllerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerError::InvalidConfig(msg) => write!(f, "invalid controller config: {msg}"),
            ControllerError::InvalidTimestep => write!(f, "controller timestep must be positive"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ControllerError {}

/// Mutable controller state carried between ticks.
#[derive(Debug, Clone)]
pub struct ControllerState {
    pub epsilon: Epsilon,
    /// Accumulated PI integral term, encoder units.
    pub integrator: f64,
    /// The command emitted on the previous tick.
    pub last_command: f64,
    /// PI output bias captured at the most recent 0 -> 1 switch.
    pub pi_bias: f64,
    /// Recent (t_s, μ) samples, newest at the back.
    mu_history: VecDeque<(f64, f64)>,
    /// Time of the first tick with any contact.
    pub first_contact_s: Option<f64>,
    /// Number of ticks held due to stale feedback.
    pub stale_holds: u64,
}

impl ControllerState {
    pub fn new(initial_command: f64) -> Self {
        Self {
            epsilon: Epsilon::NoContact,
            integrator: 0.0,
            last_command: initial_command,
            pi_bias: initial_command,
            mu_history: VecDeque::new(),
            first_contact_s: None,
            stale_holds: 0,
        }
    }

    pub fn mu_history(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.mu_history.iter().copied()
    }

    fn push_mu(&mut self, now_s: f64, mu: f64, retain_s: f64) {
        self.mu_history.push_back((now_s, mu));
        while let Some(&(t, _)) = self.mu_history.front() {
            if now_s - t > retain_s {
                self.mu_history.pop_front();
            } else {
                break;
            }
        }
    }
}

/// One tick's result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    /// Motor command in encoder units, within [0, u_max].
    pub command: f64,
    pub epsilon: Epsilon,
    /// True when stale feedback forced the previous command to be held.
    pub stale_hold: bool,
}

/// The contact state of a feedback vector: 1 if any per-sensor deformation
/// strictly exceeds the threshold.
pub fn classify_state(vector: &DeformationVector, config: &ControllerConfig) -> Epsilon {
    if vector
        .deltas
        .iter()
        .any(|&d| d > config.contact_threshold)
    {
        Epsilon::Contact
    } else {
        Epsilon::NoContact
    }
}

/// Advances the controller by one tick.
///
/// Stale feedback (older than the staleness limit) holds the previous
/// command without a mode change; the hold is counted and flagged.
pub fn step(
    config: &ControllerConfig,
    state: &mut ControllerState,
    vector: &DeformationVector,
    encoder_u: f64,
    now_s: f64,
    dt: f64,
) -> Result<StepOutput, ControllerError> {
    if !(dt > 0.0) {
        return Err(ControllerError::InvalidTimestep);
    }
    if vector.max_age_ms > config.staleness_limit_ms {
        state.stale_holds += 1;
        return Ok(StepOutput {
            command: state.last_command,
            epsilon: state.epsilon,
            stale_hold: true,
        });
    }

    let epsilon = classify_state(vector, config);
    let raw = match epsilon {
        Epsilon::NoContact => {
            state.last_command + config.kp_position * (config.closure_setpoint - encoder_u) * dt
        }
        Epsilon::Contact => {
            let error = config.setpoint - vector.mean;
            if state.epsilon == Epsilon::NoContact {
                // Bumpless transfer: bias the PI output so the command at
                // the switch tick equals the current actuation point.
                state.pi_bias = state.last_command - config.kp_mu * error;
                state.integrator = 0.0;
            }
            state.integrator = (state.integrator + config.ki_mu * error * dt)
                .clamp(-config.integrator_limit, config.integrator_limit);
            state.pi_bias + config.kp_mu * error + state.integrator
        }
    };

    let step_change = (raw - state.last_command).clamp(-config.slew_bound, config.slew_bound);
    let command = (state.last_command + step_change).clamp(0.0, config.u_max);

    state.last_command = command;
    state.epsilon = epsilon;
    if epsilon == Epsilon::Contact && state.first_contact_s.is_none() {
        state.first_contact_s = Some(now_s);
    }
    state.push_mu(now_s, vector.mean, config.settle_dwell_s * 2.0 + 0.1);

    Ok(StepOutput { command, epsilon, stale_hold: false })
}

/// True once every μ sample over the trailing dwell window lies within the
/// settling band, with enough history to cover the dwell. Requires a
/// contact to have occurred.
pub fn settled(state: &ControllerState, config: &ControllerConfig) -> bool {
    if state.first_contact_s.is_none() {
        return false;
    }
    let Some(&(newest, _)) = state.mu_history.back() else {
        return false;
    };
    let window_start = newest - config.settle_dwell_s;
    if !state.mu_history.iter().any(|&(t, _)| t <= window_start) {
        return false;
    }
    let (lo, hi) = config.band();
    state
        .mu_history
        .iter()
        .filter(|&&(t, _)| t >= window_start)
        .all(|&(_, mu)| mu >= lo && mu <= hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::DeformationVector;

    fn vector(deltas: [f64; 5], threshold: f64) -> DeformationVector {
        let mut contacts = [false; 5];
        for (c, &d) in contacts.iter_mut().zip(&deltas) {
            *c = d > threshold;
        }
        DeformationVector::new(deltas, contacts, 0, true)
    }

    fn uniform(mu: f64) -> DeformationVector {
        vector([mu; 5], 0.05)
    }

    #[test]
    fn classify_no_contact_when_all_zero() {
        let cfg = ControllerConfig::default();
        assert_eq!(classify_state(&uniform(0.0), &cfg), Epsilon::NoContact);
    }

    #[test]
    fn classify_contact_on_single_sensor() {
        let cfg = ControllerConfig::default();
        let v = vector([0.06, 0.0, 0.0, 0.0, 0.0], cfg.contact_threshold);
        assert_eq!(classify_state(&v, &cfg), Epsilon::Contact);
    }

    #[test]
    fn classify_is_strict_at_the_threshold() {
        let cfg = ControllerConfig::default();
        assert_eq!(classify_state(&uniform(0.05), &cfg), Epsilon::NoContact);
        assert_eq!(classify_state(&uniform(0.0501), &cfg), Epsilon::Contact);
    }

    #[test]
    fn no_contact_drives_toward_closure() {
        let cfg = ControllerConfig { slew_bound: 1000.0, ..ControllerConfig::default() };
        let mut state = ControllerState::new(0.0);
        let out = step(&cfg, &mut state, &uniform(0.0), 0.0, 0.0, cfg.tick_period_s).unwrap();
        assert!(out.command > 0.0);
        assert_eq!(out.epsilon, Epsilon::NoContact);
    }

    /// Ten-tick trace of the control law with round-number gains, checked
    /// against a hand-computed spreadsheet of the same recurrence.
    #[test]
    fn scripted_trajectory_matches_hand_computed_trace() {
        let cfg = ControllerConfig {
            setpoint: 0.5,
            contact_threshold: 0.05,
            kp_position: 0.2,
            kp_mu: 40.0,
            ki_mu: 20.0,
            closure_setpoint: 100.0,
            u_max: 100.0,
            tick_period_s: 1.0,
            settle_band: 0.05,
            settle_dwell_s: 2.0,
            integrator_limit: 50.0,
            slew_bound: 1000.0,
            staleness_limit_ms: 1_000_000,
        };
        let mus = [0.0, 0.0, 0.0, 0.0, 0.0, 0.06, 0.2, 0.35, 0.5, 0.5];
        let expected = [
            20.0, 36.0, 48.8, 59.04, 67.232, 76.032, 76.432, 73.432, 67.432, 67.432,
        ];
        let mut state = ControllerState::new(0.0);
        let mut encoder = 0.0;
        for (tick, (&mu, &want)) in mus.iter().zip(&expected).enumerate() {
            let out = step(&cfg, &mut state, &uniform(mu), encoder, tick as f64, 1.0).unwrap();
            assert!(
                (out.command - want).abs() < 1e-9,
                "tick {tick}: command {} expected {want}",
                out.command
            );
            encoder = out.command; // plant follows exactly for this trace
        }
    }

    #[test]
    fn switch_is_bumpless_and_within_slew_bound() {
        let cfg = ControllerConfig::default();
        let mut state = ControllerState::new(0.0);
        let mut last = 0.0;
        for tick in 0..200 {
            // Contact appears at tick 100 with a large μ jump.
            let mu = if tick < 100 { 0.0 } else { 0.3 };
            let out = step(
                &cfg,
                &mut state,
                &uniform(mu),
                last,
                tick as f64 * cfg.tick_period_s,
                cfg.tick_period_s,
            )
            .unwrap();
            assert!(
                (out.command - last).abs() <= cfg.slew_bound + 1e-9,
                "tick {tick} jumped by {}",
                out.command - last
            );
            last = out.command;
        }
    }

    #[test]
    fn proportional_term_is_zero_at_setpoint() {
        let cfg = ControllerConfig { slew_bound: 1000.0, ..ControllerConfig::default() };
        let mut state = ControllerState::new(500.0);
        // Enter contact with μ at the setpoint exactly: bias init makes the
        // command continuous, and with zero error the integrator is the only
        // source of change.
        let v = uniform(cfg.setpoint);
        let a = step(&cfg, &mut state, &v, 500.0, 0.0, cfg.tick_period_s).unwrap();
        assert!((a.command - 500.0).abs() < 1e-12);
        let b = step(&cfg, &mut state, &v, 500.0, 1.0, cfg.tick_period_s).unwrap();
        assert!((b.command - a.command).abs() < 1e-12);
    }

    #[test]
    fn integrator_respects_anti_windup_clamp() {
        let cfg = ControllerConfig { integrator_limit: 50.0, ..ControllerConfig::default() };
        let mut state = ControllerState::new(0.0);
        for tick in 0..50_000 {
            let _ = step(
                &cfg,
                &mut state,
                &uniform(0.06), // persistent large positive error
                0.0,
                tick as f64 * cfg.tick_period_s,
                cfg.tick_period_s,
            )
            .unwrap();
            assert!(state.integrator.abs() <= cfg.integrator_limit + 1e-12);
        }
    }

    #[test]
    fn command_stays_within_actuation_range() {
        let cfg = ControllerConfig::default();
        let mut state = ControllerState::new(0.0);
        for tick in 0..5_000 {
            let mu = if tick % 97 < 40 { 0.0 } else { 0.9 };
            let encoder = state.last_command;
            let out = step(
                &cfg,
                &mut state,
                &uniform(mu),
                encoder,
                tick as f64 * cfg.tick_period_s,
                cfg.tick_period_s,
            )
            .unwrap();
            assert!(out.command >= 0.0 && out.command <= cfg.u_max);
        }
    }

    #[test]
    fn stale_vector_holds_command_without_mode_change() {
        let cfg = ControllerConfig::default();
        let mut state = ControllerState::new(200.0);
        let mut v = uniform(0.3);
        v.max_age_ms = cfg.staleness_limit_ms + 1;
        let out = step(&cfg, &mut state, &v, 200.0, 0.0, cfg.tick_period_s).unwrap();
        assert!(out.stale_hold);
        assert_eq!(out.command, 200.0);
        assert_eq!(out.epsilon, Epsilon::NoContact);
        assert_eq!(state.stale_holds, 1);
    }

    #[test]
    fn settled_requires_contact_history() {
        let cfg = ControllerConfig::default();
        let state = ControllerState::new(0.0);
        assert!(!settled(&state, &cfg));
    }

    #[test]
    fn settled_on_constant_history_at_setpoint() {
        let cfg = ControllerConfig::default();
        let mut state = ControllerState::new(0.0);
        for tick in 0..500 {
            let _ = step(
                &cfg,
                &mut state,
                &uniform(0.5),
                0.0,
                tick as f64 * cfg.tick_period_s,
                cfg.tick_period_s,
            )
            .unwrap();
        }
        assert!(settled(&state, &cfg));
    }

    #[test]
    fn sample_outside_band_prevents_settling() {
        let cfg = ControllerConfig::default();
        let mut state = ControllerState::new(0.0);
        let mut t = 0.0;
        for _ in 0..300 {
            let _ = step(&cfg, &mut state, &uniform(0.5), 0.0, t, cfg.tick_period_s).unwrap();
            t += cfg.tick_period_s;
        }
        assert!(settled(&state, &cfg));
        // 0.56 is outside [0.475, 0.525].
        let _ = step(&cfg, &mut state, &uniform(0.56), 0.0, t, cfg.tick_period_s).unwrap();
        assert!(!settled(&state, &cfg));
    }

    #[test]
    fn settles_at_first_qualifying_tick_after_dwell() {
        let cfg = ControllerConfig::default();
        let dt = cfg.tick_period_s;
        let mut state = ControllerState::new(0.0);
        let mut t = 0.0;
        // Out of band first, then in band from t_entry on.
        for _ in 0..100 {
            let _ = step(&cfg, &mut state, &uniform(0.3), 0.0, t, dt).unwrap();
            t += dt;
        }
        let t_entry = t;
        let mut first_settled = None;
        for _ in 0..400 {
            let _ = step(&cfg, &mut state, &uniform(0.5), 0.0, t, dt).unwrap();
            if settled(&state, &cfg) && first_settled.is_none() {
                first_settled = Some(t);
            }
            t += dt;
        }
        let settled_at = first_settled.expect("must settle");
        assert!(
            (settled_at - (t_entry + cfg.settle_dwell_s)).abs() <= 2.0 * dt,
            "settled at {settled_at}, entry {t_entry}"
        );
    }
}
