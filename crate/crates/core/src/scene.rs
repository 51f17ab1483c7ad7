//! Synthetic indoor scenes: walking humans, static clutter and multipath ghosts.
//!
//! Coordinates: boresight along +y, x to the right, azimuth positive
//! clockwise from boresight, so `x = r sin θ` and `y = r cos θ`.
//!
//! A human is decomposed into a torso scatterer plus a handful of limb
//! scatterers whose radial velocity is the torso's plus a sinusoidal gait
//! term. A ghost mirrors every scatterer of its target across a reflecting
//! plane and attenuates it.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::params::RadarParams;

/// A point scatterer in polar radar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatterer {
    pub range_m: f64,
    pub azimuth_rad: f64,
    pub radial_velocity_mps: f64,
    pub amplitude: f64,
}

impl Scatterer {
    /// Static scatterer at a Cartesian position.
    pub fn fixed(x: f64, y: f64, amplitude: f64) -> Self {
        let (range_m, azimuth_rad) = cartesian_to_polar(x, y);
        Self {
            range_m,
            azimuth_rad,
            radial_velocity_mps: 0.0,
            amplitude,
        }
    }

    pub fn x(&self) -> f64 {
        self.range_m * self.azimuth_rad.sin()
    }

    pub fn y(&self) -> f64 {
        self.range_m * self.azimuth_rad.cos()
    }
}

pub fn cartesian_to_polar(x: f64, y: f64) -> (f64, f64) {
    (x.hypot(y), x.atan2(y))
}

pub fn polar_to_cartesian(range: f64, azimuth: f64) -> (f64, f64) {
    (range * azimuth.sin(), range * azimuth.cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    /// Arrival time at this waypoint (s).
    pub t: f64,
}

/// One limb: a scatterer riding on the torso with a sinusoidal radial velocity offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limb {
    pub rcs_fraction: f64,
    pub velocity_amplitude_mps: f64,
    pub gait_frequency_hz: f64,
    pub phase_rad: f64,
    pub offset_x_m: f64,
    pub offset_y_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanTarget {
    pub waypoints: Vec<Waypoint>,
    /// Nominal walking speed; informational once waypoint times are set.
    #[serde(default)]
    pub walking_speed_mps: f64,
    pub torso_rcs: f64,
    #[serde(default)]
    pub limbs: Vec<Limb>,
}

/// Two legs and two arms in anti-phase.
pub fn default_limbs() -> Vec<Limb> {
    use std::f64::consts::PI;
    let leg = |phase: f64, side: f64| Limb {
        rcs_fraction: 0.25,
        velocity_amplitude_mps: 1.0,
        gait_frequency_hz: 1.0,
        phase_rad: phase,
        offset_x_m: 0.1 * side,
        offset_y_m: 0.0,
    };
    let arm = |phase: f64, side: f64| Limb {
        rcs_fraction: 0.1,
        velocity_amplitude_mps: 0.6,
        gait_frequency_hz: 1.0,
        phase_rad: phase,
        offset_x_m: 0.22 * side,
        offset_y_m: 0.0,
    };
    vec![leg(0.0, -1.0), leg(PI, 1.0), arm(PI, -1.0), arm(0.0, 1.0)]
}

impl HumanTarget {
    /// Walker that starts at the first point at `start_t` and follows the
    /// polyline at constant `speed`.
    pub fn walking(path: &[(f64, f64)], speed: f64, start_t: f64, torso_rcs: f64) -> Self {
        let mut t = start_t;
        let mut waypoints = Vec::with_capacity(path.len());
        for (i, &(x, y)) in path.iter().enumerate() {
            if i > 0 {
                let (px, py) = path[i - 1];
                t += (x - px).hypot(y - py) / speed;
            }
            waypoints.push(Waypoint { x, y, t });
        }
        Self {
            waypoints,
            walking_speed_mps: speed,
            torso_rcs,
            limbs: default_limbs(),
        }
    }

    /// Walks from `a` to `b` and back at `speed`, braking to a stop over the
    /// last `ramp_m` before `b` and speeding up again over the first `ramp_m`
    /// of the way back. The ramps are sampled every 50 ms.
    pub fn out_and_back(a: (f64, f64), b: (f64, f64), speed: f64, ramp_m: f64, torso_rcs: f64) -> Self {
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let ramp = ramp_m.clamp(0.0, len);
        let at = |s: f64| (a.0 + (b.0 - a.0) * s / len, a.1 + (b.1 - a.1) * s / len);
        let cruise = (len - ramp) / speed;
        let brake = 2.0 * ramp / speed;
        let steps = (brake / 0.05).ceil().max(1.0) as usize;
        let mut out: Vec<(f64, f64)> = vec![(0.0, 0.0), (len - ramp, cruise)];
        for k in 1..=steps {
            let tau = brake * k as f64 / steps as f64;
            let s = speed * tau - speed * speed * tau * tau / (4.0 * ramp.max(f64::MIN_POSITIVE));
            out.push((len - ramp + s.min(ramp), cruise + tau));
        }
        let turn = cruise + brake;
        let back: Vec<(f64, f64)> = out.iter().rev().skip(1).map(|&(s, t)| (s, 2.0 * turn - t)).collect();
        out.extend(back);
        let waypoints = out
            .into_iter()
            .map(|(s, t)| {
                let (x, y) = at(s);
                Waypoint { x, y, t }
            })
            .collect();
        Self {
            waypoints,
            walking_speed_mps: speed,
            torso_rcs,
            limbs: default_limbs(),
        }
    }

    pub fn with_limbs(mut self, limbs: Vec<Limb>) -> Self {
        self.limbs = limbs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::invalid("waypoints", "at least one waypoint required"));
        }
        if self.waypoints.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::invalid("waypoints", "arrival times must be non-decreasing"));
        }
        if !(self.torso_rcs >= 0.0) {
            return Err(Error::invalid("torso_rcs", "must be >= 0"));
        }
        if self.limbs.iter().any(|l| !(l.rcs_fraction >= 0.0)) {
            return Err(Error::invalid("limbs", "rcs fractions must be >= 0"));
        }
        Ok(())
    }

    /// Torso position and velocity at time `t`; held still outside the waypoint span.
    pub fn kinematics(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let w = &self.waypoints;
        let first = w[0];
        let last = w[w.len() - 1];
        if t <= first.t {
            return ([first.x, first.y], [0.0, 0.0]);
        }
        if t >= last.t {
            return ([last.x, last.y], [0.0, 0.0]);
        }
        let i = w.partition_point(|p| p.t <= t);
        let (a, b) = (w[i - 1], w[i]);
        let dt = b.t - a.t;
        if dt <= 0.0 {
            return ([b.x, b.y], [0.0, 0.0]);
        }
        let s = (t - a.t) / dt;
        let vel = [(b.x - a.x) / dt, (b.y - a.y) / dt];
        ([a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)], vel)
    }
}

/// Reflecting plane given by a point on it and its normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorPlane {
    pub point: [f64; 2],
    pub normal: [f64; 2],
}

impl MirrorPlane {
    fn unit_normal(&self) -> [f64; 2] {
        let n = self.normal[0].hypot(self.normal[1]);
        [self.normal[0] / n, self.normal[1] / n]
    }

    pub fn reflect_point(&self, p: [f64; 2]) -> [f64; 2] {
        let n = self.unit_normal();
        let d = (p[0] - self.point[0]) * n[0] + (p[1] - self.point[1]) * n[1];
        [p[0] - 2.0 * d * n[0], p[1] - 2.0 * d * n[1]]
    }

    pub fn reflect_vector(&self, v: [f64; 2]) -> [f64; 2] {
        let n = self.unit_normal();
        let d = v[0] * n[0] + v[1] * n[1];
        [v[0] - 2.0 * d * n[0], v[1] - 2.0 * d * n[1]]
    }
}

fn default_ghost_attenuation() -> f64 {
    12.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhostSpec {
    /// Index into `Scene::humans`.
    pub target: usize,
    #[serde(default = "default_true")]
    pub enabled: bool,
    pub plane: MirrorPlane,
    #[serde(default = "default_ghost_attenuation")]
    pub attenuation_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default)]
    pub humans: Vec<HumanTarget>,
    #[serde(default)]
    pub clutter: Vec<Scatterer>,
    #[serde(default)]
    pub ghosts: Vec<GhostSpec>,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Torso truth for one target in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub frame: usize,
    pub time_s: f64,
    pub target_id: usize,
    pub x: f64,
    pub y: f64,
    pub radial_velocity: f64,
}

impl TruthRow {
    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn azimuth(&self) -> f64 {
        self.x.atan2(self.y)
    }
}

fn radial_velocity(p: [f64; 2], v: [f64; 2]) -> f64 {
    let r = p[0].hypot(p[1]);
    if r > 0.0 {
        (p[0] * v[0] + p[1] * v[1]) / r
    } else {
        0.0
    }
}

impl Scene {
    pub fn new(duration_s: f64, seed: u64) -> Self {
        Self {
            humans: Vec::new(),
            clutter: Vec::new(),
            ghosts: Vec::new(),
            duration_s,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid("duration_s", "must be > 0"));
        }
        for h in &self.humans {
            h.validate()?;
        }
        for c in &self.clutter {
            if !(c.range_m > 0.0) {
                return Err(Error::invalid("clutter", "scatterer range must be > 0"));
            }
        }
        for g in &self.ghosts {
            if g.target >= self.humans.len() {
                return Err(Error::invalid("ghosts", format!("target {} does not exist", g.target)));
            }
            if g.plane.normal[0].hypot(g.plane.normal[1]) == 0.0 {
                return Err(Error::invalid("ghosts", "mirror plane normal must be non-zero"));
            }
        }
        Ok(())
    }

    pub fn n_frames(&self, params: &RadarParams) -> usize {
        (self.duration_s * params.frame_rate_hz + 1e-9).floor() as usize
    }

    pub fn frame_time(&self, params: &RadarParams, frame: usize) -> f64 {
        frame as f64 / params.frame_rate_hz
    }

    /// Every scatterer present at time `t`, ghosts included, without any
    /// field-of-view clipping.
    pub fn scatterers_at(&self, t: f64) -> Result<Vec<Scatterer>> {
        if !(0.0..=self.duration_s).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t_s: t,
                duration_s: self.duration_s,
            });
        }
        let mut out = self.clutter.clone();
        let mut per_target: Vec<Vec<(f64, f64, [f64; 2], f64, f64)>> = Vec::new();
        for h in &self.humans {
            let (pos, vel) = h.kinematics(t);
            let torso_vr = radial_velocity(pos, vel);
            // (x, y, velocity, gait offset, amplitude)
            let mut parts = vec![(pos[0], pos[1], vel, 0.0, h.torso_rcs.sqrt())];
            for l in &h.limbs {
                let modulation =
                    l.velocity_amplitude_mps * (TAU * l.gait_frequency_hz * t + l.phase_rad).sin();
                parts.push((
                    pos[0] + l.offset_x_m,
                    pos[1] + l.offset_y_m,
                    vel,
                    modulation,
                    (h.torso_rcs * l.rcs_fraction).sqrt(),
                ));
            }
            for &(x, y, _, m, a) in &parts {
                let (range_m, azimuth_rad) = cartesian_to_polar(x, y);
                out.push(Scatterer {
                    range_m,
                    azimuth_rad,
                    radial_velocity_mps: torso_vr + m,
                    amplitude: a,
                });
            }
            per_target.push(parts);
        }
        for g in self.ghosts.iter().filter(|g| g.enabled) {
            let gain = 10f64.powf(-g.attenuation_db / 20.0);
            for &(x, y, vel, m, a) in &per_target[g.target] {
                let p = g.plane.reflect_point([x, y]);
                let v = g.plane.reflect_vector(vel);
                let (range_m, azimuth_rad) = cartesian_to_polar(p[0], p[1]);
                out.push(Scatterer {
                    range_m,
                    azimuth_rad,
                    radial_velocity_mps: radial_velocity(p, v) + m,
                    amplitude: a * gain,
                });
            }
        }
        Ok(out)
    }

    /// Torso position of every target at every frame timestamp.
    pub fn ground_truth(&self, params: &RadarParams) -> Vec<Vec<TruthRow>> {
        (0..self.n_frames(params))
            .map(|f| {
                let t = self.frame_time(params, f);
                self.humans
                    .iter()
                    .enumerate()
                    .map(|(id, h)| {
                        let (p, v) = h.kinematics(t);
                        TruthRow {
                            frame: f,
                            time_s: t,
                            target_id: id,
                            x: p[0],
                            y: p[1],
                            radial_velocity: radial_velocity(p, v),
                        }
                    })
                    .collect()
            })
            .collect()
    }
}
