//! Deterministic plant model: a single-motor underactuated five-finger hand
//! closing on parametric objects, with per-finger contact forces, synthetic
//! fingertip tactile images and a motor-current model.
//!
//! The model is deliberately minimal. Fingers close linearly with motor
//! position at per-finger synergy rates and saturate where they meet the
//! object; contact force is a linear spring on the commanded overshoot with
//! the fingertip skin in series; the rendered pin array displaces radially
//! with contact force. There is no rigid-body dynamics and no friction cone,
//! only what the controller feedback path needs: a monotone, deterministic
//! force-to-deformation coupling.

use core::fmt;

use crate::image::TactileImage;
use crate::rng::SplitMix64;
use crate::snapshot::SENSOR_COUNT;

/// Object categories of the simulated grasp set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Soft,
    Rigid,
    Small,
    Large,
    Irregular,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Soft,
        Category::Rigid,
        Category::Small,
        Category::Large,
        Category::Irregular,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Soft => "soft",
            Category::Rigid => "rigid",
            Category::Small => "small",
            Category::Large => "large",
            Category::Irregular => "irregular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "soft" => Category::Soft,
            "rigid" => Category::Rigid,
            "small" => Category::Small,
            "large" => Category::Large,
            "irregular" => Category::Irregular,
            _ => return None,
        })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One entry of the grasp object set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub id: u32,
    pub category: Category,
    /// Characteristic grasp aperture in millimetres.
    pub size_mm: f64,
    /// Contact stiffness in N/mm.
    pub stiffness_n_per_mm: f64,
    pub mass_g: f64,
    /// Resistance to slip under reorientation; 1 never slips.
    pub slip_coefficient: f64,
}

impl ObjectSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.size_mm > 0.0) {
            return Err(SimError::InvalidObject("size_mm must be positive"));
        }
        if !(self.stiffness_n_per_mm > 0.0) {
            return Err(SimError::InvalidObject("stiffness must be positive"));
        }
        if !(self.mass_g >= 0.0) {
            return Err(SimError::InvalidObject("mass must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.slip_coefficient) {
            return Err(SimError::InvalidObject("slip_coefficient must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Motor, finger and contact state of the hand at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandState {
    /// Motor encoder position u in [0, u_max].
    pub motor_position: f64,
    /// Per-finger closure fraction in [0, 1].
    pub finger_closure: [f64; SENSOR_COUNT],
    /// Per-finger contact normal force in newtons.
    pub finger_force: [f64; SENSOR_COUNT],
    /// Motor current draw in milliamps.
    pub motor_current: f64,
    pub contact_set: [bool; SENSOR_COUNT],
}

impl HandState {
    pub fn open() -> Self {
        Self {
            motor_position: 0.0,
            finger_closure: [0.0; SENSOR_COUNT],
            finger_force: [0.0; SENSOR_COUNT],
            motor_current: 0.0,
            contact_set: [false; SENSOR_COUNT],
        }
    }

    pub fn total_force(&self) -> f64 {
        self.finger_force.iter().sum()
    }
}

/// Plant parameters. Defaults are calibrated so a grasp at the deformation
/// setpoint draws well under the 350 mA gentle-grasp current bound and
/// soft objects draw less than rigid ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Encoder units at full closure.
    pub u_max: f64,
    /// Per-finger closure fraction per encoder unit.
    pub synergy_weights: [f64; SENSOR_COUNT],
    /// Maximum motor travel in encoder units per second.
    pub motor_rate: f64,
    /// Grasp aperture spanned by closure 0..1, in millimetres.
    pub aperture_mm: f64,
    /// Fingertip skin stiffness in series with the object, N/mm.
    pub skin_stiffness: f64,
    /// Extra current per unit closure fraction beyond the knee, mA.
    pub elastic_link_gain: f64,
    /// Closure fraction where the elastic-link term engages.
    pub closure_knee: f64,
    /// Milliamps per newton of total fingertip force.
    pub current_per_force: f64,
    /// Synthetic tactile image edge length in pixels.
    pub image_size: usize,
    /// Pins per row of the synthetic fingertip.
    pub pin_grid: usize,
    /// Pixels of radial pin displacement per newton of tactile force.
    pub force_to_displacement: f64,
    /// Full-scale pin displacement; harder presses saturate the image.
    pub max_displacement_px: f64,
    /// Gaussian radius of a rendered pin dot, pixels.
    pub dot_sigma: f64,
    /// Border kept clear of pin rest positions, as a fraction of the edge.
    pub pin_margin_frac: f64,
    /// Per-pin brightness jitter per newton, seeded; 0 at zero force.
    pub pin_noise_per_newton: f64,
    /// Stiffness at which the contact-spread gain is 1.
    pub spread_reference_stiffness: f64,
    /// Exponent of the contact-spread gain (soft objects spread load over
    /// more pins, raising deformation per newton).
    pub spread_exponent: f64,
    pub spread_gain_min: f64,
    pub spread_gain_max: f64,
    /// Effective force scale while the hand is being reoriented.
    pub reorient_force_scale: f64,
    /// Slip decay exponent scale per second of reorientation.
    pub slip_rate_per_s: f64,
    /// Default integration step in seconds.
    pub timestep_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            u_max: 1000.0,
            synergy_weights: [1.05e-3, 1.00e-3, 0.98e-3, 0.95e-3, 0.92e-3],
            motor_rate: 2500.0,
            aperture_mm: 120.0,
            skin_stiffness: 0.8,
            elastic_link_gain: 400.0,
            closure_knee: 0.8,
            current_per_force: 22.0,
            image_size: 64,
            pin_grid: 7,
            force_to_displacement: 1.1,
            max_displacement_px: 5.0,
            dot_sigma: 1.1,
            pin_margin_frac: 0.12,
            pin_noise_per_newton: 0.01,
            spread_reference_stiffness: 2.0,
            spread_exponent: 0.3,
            spread_gain_min: 0.6,
            spread_gain_max: 3.0,
            reorient_force_scale: 1.1,
            slip_rate_per_s: 2.5,
            timestep_s: 1.0 / 286.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.u_max > 0.0)
            || !(self.motor_rate > 0.0)
            || !(self.aperture_mm > 0.0)
            || !(self.skin_stiffness > 0.0)
            || !(self.elastic_link_gain >= 0.0)
            || !(self.current_per_force > 0.0)
            || !(self.force_to_displacement > 0.0)
            || !(self.max_displacement_px > 0.0)
            || !(self.dot_sigma > 0.0)
            || !(self.timestep_s > 0.0)
        {
            return Err(SimError::InvalidConfig("gains and rates must be positive"));
        }
        if self.pin_grid < 3 {
            return Err(SimError::InvalidConfig("pin_grid must be at least 3"));
        }
        if self.image_size < 16 {
            return Err(SimError::InvalidConfig("image_size must be at least 16"));
        }
        if self.synergy_weights.iter().any(|&w| !(w > 0.0)) {
            return Err(SimError::InvalidConfig("synergy weights must be positive"));
        }
        Ok(())
    }

    /// Closure fraction at which fingers meet an object of the given size.
    pub fn contact_closure(&self, size_mm: f64) -> f64 {
        (1.0 - size_mm / self.aperture_mm).clamp(0.0, 0.98)
    }

    /// Series stiffness of object and fingertip skin, N/mm.
    pub fn effective_stiffness(&self, object_stiffness: f64) -> f64 {
        object_stiffness * self.skin_stiffness / (object_stiffness + self.skin_stiffness)
    }

    /// Deformation-per-newton gain modelling contact spread: compliant
    /// objects conform to the fingertip and move more pins per newton.
    pub fn spread_gain(&self, object_stiffness: f64) -> f64 {
        libm::pow(
            self.spread_reference_stiffness / object_stiffness,
            self.spread_exponent,
        )
        .clamp(self.spread_gain_min, self.spread_gain_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimError {
    CommandOutOfRange,
    InvalidTimestep,
    InvalidConfig(&'static str),
    InvalidObject(&'static str),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::CommandOutOfRange => write!(f, "motor command outside [0, u_max]"),
            SimError::InvalidTimestep => write!(f, "timestep must be positive"),
            SimError::InvalidConfig(msg) => write!(f, "invalid sim config: {msg}"),
            SimError::InvalidObject(msg) => write!(f, "invalid object spec: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SimError {}

/// External disturbances applied to a grasp in progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Disturbance {
    /// Reorienting the hand for `dt_s`: scales effective contact forces and
    /// decays grip on slippery objects geometrically.
    Reorientation { dt_s: f64 },
    /// Reorientation finished; the force scale returns to 1 (grip lost to
    /// slip does not recover).
    ReorientationEnd,
    /// Object weight borne by the fingertips, newtons per finger.
    AddedLoad { newtons_per_finger: f64 },
    /// The object leaves the hand.
    Release,
}

/// The deterministic hand plant.
#[derive(Debug, Clone)]
pub struct HandSim {
    config: SimConfig,
    state: HandState,
    object: Option<ObjectSpec>,
    /// Fraction of grip retained after slip decay, in [0, 1].
    slip_retention: f64,
    external_load_n: f64,
    reorient_scale: f64,
}

impl HandSim {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        Ok(Self {
            config,
            state: HandState::open(),
            object: None,
            slip_retention: 1.0,
            external_load_n: 0.0,
            reorient_scale: 1.0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &HandState {
        &self.state
    }

    pub fn object(&self) -> Option<&ObjectSpec> {
        self.object.as_ref()
    }

    /// Places an object in the grasp envelope and resets grip bookkeeping.
    pub fn set_object(&mut self, object: Option<ObjectSpec>) -> Result<(), SimError> {
        if let Some(o) = &object {
            o.validate()?;
        }
        self.object = object;
        self.slip_retention = 1.0;
        self.external_load_n = 0.0;
        self.reorient_scale = 1.0;
        self.refresh_contacts();
        Ok(())
    }

    /// Reopens the hand fully and clears any object.
    pub fn reset(&mut self) {
        self.state = HandState::open();
        self.object = None;
        self.slip_retention = 1.0;
        self.external_load_n = 0.0;
        self.reorient_scale = 1.0;
    }

    /// Advances the motor toward `command` for `dt` seconds and recomputes
    /// finger closures, contact forces and motor current.
    pub fn step(&mut self, command: f64, dt: f64) -> Result<&HandState, SimError> {
        if !(command.is_finite() && (0.0..=self.config.u_max).contains(&command)) {
            return Err(SimError::CommandOutOfRange);
        }
        if !(dt > 0.0) {
            return Err(SimError::InvalidTimestep);
        }
        let max_travel = self.config.motor_rate * dt;
        let delta = (command - self.state.motor_position).clamp(-max_travel, max_travel);
        self.state.motor_position += delta;
        self.refresh_contacts();
        Ok(&self.state)
    }

    fn refresh_contacts(&mut self) {
        let cfg = &self.config;
        let u = self.state.motor_position;
        for i in 0..SENSOR_COUNT {
            let commanded = (cfg.synergy_weights[i] * u).clamp(0.0, 1.0);
            match &self.object {
                Some(object) => {
                    let limit = cfg.contact_closure(object.size_mm);
                    let closure = commanded.min(limit);
                    let penetration_mm = (commanded - limit).max(0.0) * cfg.aperture_mm;
                    let grip = cfg.effective_stiffness(object.stiffness_n_per_mm)
                        * penetration_mm
                        * self.slip_retention;
                    let force = if grip > 0.0 {
                        grip * self.reorient_scale + self.external_load_n
                    } else {
                        0.0
                    };
                    self.state.finger_closure[i] = closure;
                    self.state.finger_force[i] = force;
                    self.state.contact_set[i] = force > 0.0;
                }
                None => {
                    self.state.finger_closure[i] = commanded;
                    self.state.finger_force[i] = 0.0;
                    self.state.contact_set[i] = false;
                }
            }
        }
        self.state.motor_current = motor_current(&self.state, cfg);
    }

    /// Grip force actually holding the object (excludes the object's own
    /// weight pressing on the fingertips), newtons.
    pub fn total_grip(&self) -> f64 {
        let cfg = &self.config;
        let u = self.state.motor_position;
        let Some(object) = &self.object else { return 0.0 };
        let limit = cfg.contact_closure(object.size_mm);
        let k = cfg.effective_stiffness(object.stiffness_n_per_mm);
        (0..SENSOR_COUNT)
            .map(|i| {
                let commanded = (cfg.synergy_weights[i] * u).clamp(0.0, 1.0);
                k * (commanded - limit).max(0.0) * cfg.aperture_mm * self.slip_retention
            })
            .sum()
    }

    /// Force as felt by the tactile sensor on finger `i`: the contact force
    /// amplified by the object's contact-spread gain.
    pub fn tactile_force(&self, finger: usize) -> f64 {
        match &self.object {
            Some(object) => {
                self.state.finger_force[finger] * self.config.spread_gain(object.stiffness_n_per_mm)
            }
            None => 0.0,
        }
    }

    pub fn apply_disturbance(&mut self, disturbance: Disturbance) {
        match disturbance {
            Disturbance::Reorientation { dt_s } => {
                if let Some(object) = &self.object {
                    let dt = dt_s.max(0.0);
                    self.slip_retention *= libm::pow(
                        object.slip_coefficient,
                        self.config.slip_rate_per_s * dt,
                    );
                }
                self.reorient_scale = self.config.reorient_force_scale;
            }
            Disturbance::ReorientationEnd => {
                self.reorient_scale = 1.0;
            }
            Disturbance::AddedLoad { newtons_per_finger } => {
                self.external_load_n = newtons_per_finger.max(0.0);
            }
            Disturbance::Release => {
                self.object = None;
                self.slip_retention = 1.0;
                self.external_load_n = 0.0;
                self.reorient_scale = 1.0;
            }
        }
        self.refresh_contacts();
    }
}

/// Motor current model: a force-proportional term plus an elastic-link term
/// that only engages near full closure, where the hand's elastic tendons are
/// stretched furthest.
pub fn motor_current(state: &HandState, config: &SimConfig) -> f64 {
    let closure = state.motor_position / config.u_max;
    config.current_per_force * state.total_force()
        + config.elastic_link_gain * (closure - config.closure_knee).max(0.0)
}

/// Renders the synthetic fingertip image for a given tactile force: a
/// `pin_grid` x `pin_grid` array of bright dots on a dark background, each
/// dot displaced radially outward from the image centre by
/// `force_to_displacement * force` pixels and clipped at the borders.
///
/// Zero force reproduces the canonical reference image exactly for every
/// seed; intensities are quantized to 1/256 steps so renders are
/// bit-reproducible across platforms.
pub fn render_tactile(force_n: f64, config: &SimConfig, noise_seed: u64) -> TactileImage {
    let n = config.image_size;
    let g = config.pin_grid;
    let margin = n as f64 * config.pin_margin_frac;
    let pitch = (n as f64 - 1.0 - 2.0 * margin) / (g as f64 - 1.0);
    let centre = (n as f64 - 1.0) / 2.0;
    // Presses beyond full scale saturate the sensor: the image stops
    // changing once pins have displaced by max_displacement_px.
    let full_scale_n = config.max_displacement_px / config.force_to_displacement;
    let force_n = force_n.clamp(0.0, full_scale_n);
    let displacement = config.force_to_displacement * force_n;
    let rng_root = SplitMix64::new(noise_seed);

    let mut pixels = alloc::vec![0.0f64; n * n];
    let sigma2 = config.dot_sigma * config.dot_sigma;
    let reach = libm::ceil(config.dot_sigma * 3.5) as i64;

    for row in 0..g {
        for col in 0..g {
            let rest_x = margin + col as f64 * pitch;
            let rest_y = margin + row as f64 * pitch;
            let dx = rest_x - centre;
            let dy = rest_y - centre;
            let dist = libm::sqrt(dx * dx + dy * dy);
            let (px, py) = if dist < 1e-9 {
                (rest_x, rest_y)
            } else {
                (
                    rest_x + dx / dist * displacement,
                    rest_y + dy / dist * displacement,
                )
            };
            // Clip displaced dots so they remain inside the frame.
            let px = px.clamp(0.0, n as f64 - 1.0);
            let py = py.clamp(0.0, n as f64 - 1.0);

            let pin_index = (row * g + col) as u64;
            let jitter = rng_root.fork(pin_index).next_signed();
            let brightness =
                255.0 * (1.0 + config.pin_noise_per_newton * force_n * jitter).clamp(0.25, 1.0);

            let cx = libm::round(px) as i64;
            let cy = libm::round(py) as i64;
            for iy in (cy - reach).max(0)..=(cy + reach).min(n as i64 - 1) {
                for ix in (cx - reach).max(0)..=(cx + reach).min(n as i64 - 1) {
                    let ddx = ix as f64 - px;
                    let ddy = iy as f64 - py;
                    let v = brightness * libm::exp(-(ddx * ddx + ddy * ddy) / (2.0 * sigma2));
                    let cell = &mut pixels[iy as usize * n + ix as usize];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        }
    }

    // Quantize to 1/256 intensity steps for exact reproducibility.
    for p in &mut pixels {
        *p = libm::floor(*p * 256.0 + 0.5) / 256.0;
        if *p > 255.0 {
            *p = 255.0;
        }
    }
    TactileImage::new(n, n, pixels).expect("renderer produces valid images")
}

/// The canonical undeformed fingertip image for this configuration.
pub fn reference_image(config: &SimConfig) -> TactileImage {
    render_tactile(0.0, config, 0)
}
