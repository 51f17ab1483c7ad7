//! Multi-target tracking: JPDA association, EKF update and M-of-N track
//! management.
//!
//! One [`Tracker::step`] per frame: predict every live track, gate and
//! associate the frame's measurements, update, then confirm, delete and
//! spawn tracks.

pub mod ekf;
pub mod jpda;

use nalgebra::{Matrix2, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::params::RadarParams;
use ekf::{Linearization, MeasCov, MeasVec, State, StateCov};
use jpda::{Gating, JpdaParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub range: f64,
    pub azimuth: f64,
    pub rdot: f64,
    pub power: f64,
}

impl Measurement {
    pub fn vector(&self) -> MeasVec {
        MeasVec::new(self.range, self.azimuth, self.rdot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

impl TrackStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrackStatus::Tentative => "tentative",
            TrackStatus::Confirmed => "confirmed",
            TrackStatus::Deleted => "deleted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// White-acceleration intensity ((m/s²)²).
    pub process_noise: f64,
    pub sigma_range: f64,
    pub sigma_azimuth: f64,
    pub sigma_rdot: f64,
    /// χ² gate on d² (3 degrees of freedom).
    pub gate_threshold: f64,
    pub p_detection: f64,
    /// Clutter density per unit measurement-space volume (m · rad · m/s).
    pub clutter_density: f64,
    pub confirm_m: usize,
    pub confirm_n: usize,
    pub delete_misses: usize,
    pub frame_period: f64,
    /// Tangential velocity std of a freshly spawned track (m/s).
    pub init_tangential_std: f64,
    /// A track counts a hit when its detection probability 1 − β_j0 reaches
    /// this.
    pub hit_threshold: f64,
    /// A measurement whose association probability summed over tracks stays
    /// below this is unassociated and spawns a tentative track.
    pub association_threshold: f64,
    /// Measurements closer than this to a track spawned in the same frame
    /// do not spawn another (m).
    pub spawn_separation_m: f64,
    /// Two tracks closer than this are duplicates; the younger is deleted (m).
    pub duplicate_distance_m: f64,
    pub event_cap: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self::for_radar(&RadarParams::default(), RadarParams::default().n_virtual_channels)
    }
}

impl TrackerConfig {
    /// Measurement noise tied to the resolution cells of the radar with
    /// `n_channels` used for angle estimation.
    pub fn for_radar(params: &RadarParams, n_channels: usize) -> Self {
        let res = params.resolutions().unwrap_or(crate::params::Resolutions {
            range_res_m: 0.6,
            velocity_res_mps: 0.14,
            angle_res_rad_boresight: 0.13,
        });
        Self {
            process_noise: 1.0,
            sigma_range: res.range_res_m / 2.0,
            sigma_azimuth: params.angle_resolution(n_channels.max(1), 0.0) / 2.0,
            sigma_rdot: res.velocity_res_mps / 2.0,
            gate_threshold: 11.34,
            p_detection: 0.9,
            clutter_density: 0.01,
            confirm_m: 3,
            confirm_n: 5,
            delete_misses: 5,
            frame_period: params.frame_period(),
            init_tangential_std: 1.0,
            hit_threshold: 0.5,
            association_threshold: 0.5,
            spawn_separation_m: 0.4,
            duplicate_distance_m: 0.25,
            event_cap: 1_000_000,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        let pos = [
            ("process_noise", self.process_noise),
            ("sigma_range", self.sigma_range),
            ("sigma_azimuth", self.sigma_azimuth),
            ("sigma_rdot", self.sigma_rdot),
            ("gate_threshold", self.gate_threshold),
            ("frame_period", self.frame_period),
            ("init_tangential_std", self.init_tangential_std),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be > 0"));
            }
        }
        if !(self.p_detection > 0.0 && self.p_detection < 1.0) {
            return Err(Error::invalid("p_detection", "must lie in (0, 1)"));
        }
        if !(self.clutter_density >= 0.0) {
            return Err(Error::invalid("clutter_density", "must be >= 0"));
        }
        if self.confirm_m == 0 || self.confirm_m > self.confirm_n {
            return Err(Error::invalid("confirm_m", "need 1 <= M <= N"));
        }
        if !(self.hit_threshold > 0.0 && self.hit_threshold <= 1.0) {
            return Err(Error::invalid("hit_threshold", "must lie in (0, 1]"));
        }
        if !(self.association_threshold > 0.0 && self.association_threshold <= 1.0) {
            return Err(Error::invalid("association_threshold", "must lie in (0, 1]"));
        }
        if !(self.spawn_separation_m >= 0.0) || !(self.duplicate_distance_m >= 0.0) {
            return Err(Error::invalid("duplicate_distance_m", "distances must be >= 0"));
        }
        if self.delete_misses == 0 {
            return Err(Error::invalid("delete_misses", "must be >= 1"));
        }
        Ok(())
    }

    pub fn measurement_cov(&self) -> MeasCov {
        MeasCov::from_diagonal(&Vector3::new(
            self.sigma_range.powi(2),
            self.sigma_azimuth.powi(2),
            self.sigma_rdot.powi(2),
        ))
    }

    pub fn jpda(&self) -> JpdaParams {
        JpdaParams {
            p_detection: self.p_detection,
            clutter_density: self.clutter_density,
            gate_threshold: self.gate_threshold,
            event_cap: self.event_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: State,
    pub cov: StateCov,
    pub status: TrackStatus,
    /// Hit flags of the most recent frames, newest last (at most N).
    pub hits: VecDeque<bool>,
    pub consecutive_misses: usize,
    pub last_update_frame: usize,
}

impl Track {
    /// Tentative track at a polar measurement; velocity along the line of
    /// sight from ṙ, tangential component zero with a wide prior.
    pub fn spawn(id: u64, m: &Measurement, cfg: &TrackerConfig, frame: usize) -> Self {
        let (s, c) = m.azimuth.sin_cos();
        let radial = [s, c];
        let tangential = [c, -s];
        let rot = Matrix2::new(radial[0], tangential[0], radial[1], tangential[1]);
        let pos_var = Matrix2::new(
            (2.0 * cfg.sigma_range).powi(2),
            0.0,
            0.0,
            (2.0 * m.range.max(0.5) * cfg.sigma_azimuth).powi(2),
        );
        let vel_var = Matrix2::new(
            (2.0 * cfg.sigma_rdot).powi(2) + 0.25,
            0.0,
            0.0,
            cfg.init_tangential_std.powi(2),
        );
        let pp = rot * pos_var * rot.transpose();
        let vv = rot * vel_var * rot.transpose();
        let mut cov = StateCov::zeros();
        cov.fixed_view_mut::<2, 2>(0, 0).copy_from(&pp);
        cov.fixed_view_mut::<2, 2>(2, 2).copy_from(&vv);
        let mut hits = VecDeque::with_capacity(cfg.confirm_n);
        hits.push_back(true);
        Self {
            id,
            state: State::new(m.range * s, m.range * c, m.rdot * s, m.rdot * c),
            cov,
            status: TrackStatus::Tentative,
            hits,
            consecutive_misses: 0,
            last_update_frame: frame,
        }
    }

    fn record(&mut self, hit: bool, n: usize) {
        self.hits.push_back(hit);
        while self.hits.len() > n {
            self.hits.pop_front();
        }
        if hit {
            self.consecutive_misses = 0;
        } else {
            self.consecutive_misses += 1;
        }
    }

    pub fn recent_hits(&self) -> usize {
        self.hits.iter().filter(|h| **h).count()
    }

    pub fn predict(&self, q: f64, dt: f64) -> Self {
        let (state, cov) = ekf::predict(&self.state, &self.cov, q, dt);
        Self { state, cov, ..self.clone() }
    }
}

/// Per-frame track output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSnapshot {
    pub frame: usize,
    pub time_s: f64,
    pub id: u64,
    pub status: TrackStatus,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    /// Measurements inside this track's gate.
    pub gate_count: usize,
    /// Missed-detection association probability.
    pub beta0: f64,
}

/// JPDA-weighted EKF update of one track against a frame's measurements.
pub fn update(track: &Track, measurements: &[Measurement], betas: &[f64], cfg: &TrackerConfig) -> crate::Result<Track> {
    let lin = Linearization::new(&track.state, &track.cov, &cfg.measurement_cov())?;
    let zs: Vec<MeasVec> = measurements.iter().map(Measurement::vector).collect();
    let (state, cov) = ekf::jpda_update(&track.state, &track.cov, &lin, &zs, betas);
    Ok(Track { state, cov, ..track.clone() })
}

/// Applies M-of-N confirmation and K-miss deletion to one track.
pub fn apply_rules(track: &mut Track, hit: bool, cfg: &TrackerConfig) {
    if track.status == TrackStatus::Deleted {
        return;
    }
    track.record(hit, cfg.confirm_n);
    if track.consecutive_misses >= cfg.delete_misses {
        track.status = TrackStatus::Deleted;
    } else if track.status == TrackStatus::Tentative && track.recent_hits() >= cfg.confirm_m {
        track.status = TrackStatus::Confirmed;
    }
}

/// Track management for one frame: hit/miss bookkeeping for existing tracks
/// (`None` leaves a track untouched), duplicate pruning, then a tentative
/// track per unclaimed measurement. Unclaimed measurements are taken
/// strongest first; one lying within `spawn_separation_m` of a track spawned
/// earlier in the same frame does not spawn another.
pub fn manage_tracks(
    tracks: &mut Vec<Track>,
    hits: &[Option<bool>],
    unclaimed: &[Measurement],
    cfg: &TrackerConfig,
    frame: usize,
    next_id: &mut u64,
) {
    for (t, h) in tracks.iter_mut().zip(hits) {
        if let Some(h) = *h {
            apply_rules(t, h, cfg);
        }
    }
    prune_duplicates(tracks, cfg.duplicate_distance_m);
    let first_new = tracks.len();
    let mut order: Vec<&Measurement> = unclaimed.iter().collect();
    order.sort_by(|a, b| b.power.total_cmp(&a.power));
    for m in order {
        if m.range <= ekf::MIN_RANGE_M {
            continue;
        }
        let (x, y) = crate::scene::polar_to_cartesian(m.range, m.azimuth);
        let absorbed = tracks[first_new..]
            .iter()
            .any(|t| (t.state[0] - x).hypot(t.state[1] - y) < cfg.spawn_separation_m);
        if absorbed {
            continue;
        }
        tracks.push(Track::spawn(*next_id, m, cfg, frame));
        *next_id += 1;
    }
}

/// Deletes the younger of any two live tracks closer than `distance`;
/// a confirmed track always outranks a tentative one.
fn prune_duplicates(tracks: &mut [Track], distance: f64) {
    let rank = |t: &Track| (t.status != TrackStatus::Confirmed, t.id);
    let mut order: Vec<usize> = (0..tracks.len()).collect();
    order.sort_by_key(|&i| rank(&tracks[i]));
    for a in 0..order.len() {
        let i = order[a];
        if tracks[i].status == TrackStatus::Deleted {
            continue;
        }
        for &j in &order[a + 1..] {
            if tracks[j].status == TrackStatus::Deleted {
                continue;
            }
            let d = (tracks[i].state[0] - tracks[j].state[0]).hypot(tracks[i].state[1] - tracks[j].state[1]);
            if d < distance {
                tracks[j].status = TrackStatus::Deleted;
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StepDiagnostics {
    pub jpda_fallbacks: usize,
    pub degenerate_tracks: usize,
}

/// Sequential multi-target tracker state.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub cfg: TrackerConfig,
    pub tracks: Vec<Track>,
    next_id: u64,
    frame: usize,
    started: bool,
    pub diagnostics: StepDiagnostics,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Self {
        Self {
            cfg,
            tracks: Vec::new(),
            next_id: 1,
            frame: 0,
            started: false,
            diagnostics: StepDiagnostics::default(),
        }
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    /// Processes one frame of measurements; returns snapshots of every track
    /// alive during the frame, including those deleted in it.
    pub fn step(&mut self, measurements: &[Measurement]) -> Vec<TrackSnapshot> {
        let cfg = self.cfg;
        let frame = if self.started { self.frame + 1 } else { 0 };
        self.started = true;
        self.frame = frame;

        if frame > 0 {
            for t in self.tracks.iter_mut() {
                *t = t.predict(cfg.process_noise, cfg.frame_period);
            }
        }
        let r = cfg.measurement_cov();
        let zs: Vec<MeasVec> = measurements.iter().map(Measurement::vector).collect();
        let lins: Vec<Option<Linearization>> = self
            .tracks
            .iter()
            .map(|t| Linearization::new(&t.state, &t.cov, &r).ok())
            .collect();
        self.diagnostics.degenerate_tracks += lins.iter().filter(|l| l.is_none()).count();
        let gated: Gating = jpda::gate_all(&lins, &zs, cfg.gate_threshold);
        let assoc = jpda::jpda_associate(&gated, zs.len(), &cfg.jpda());
        if assoc.fell_back {
            self.diagnostics.jpda_fallbacks += 1;
        }

        let mut claim = vec![0.0; zs.len()];
        let mut hits = Vec::with_capacity(self.tracks.len());
        let mut diag = Vec::with_capacity(self.tracks.len());
        for (j, track) in self.tracks.iter_mut().enumerate() {
            for &(t, _, _) in &gated[j] {
                claim[t] += assoc.betas[j][t + 1];
            }
            let hit = 1.0 - assoc.betas[j][0] >= cfg.hit_threshold;
            if let (Some(lin), false) = (&lins[j], gated[j].is_empty()) {
                let (x, p) = ekf::jpda_update(&track.state, &track.cov, lin, &zs, &assoc.betas[j]);
                track.state = x;
                track.cov = p;
                track.last_update_frame = frame;
            }
            // degenerate geometry: the track sits this frame out
            hits.push(lins[j].as_ref().map(|_| hit));
            diag.push((gated[j].len(), assoc.betas[j][0]));
        }
        let unclaimed: Vec<Measurement> = measurements
            .iter()
            .zip(&claim)
            .filter(|(_, c)| **c < cfg.association_threshold)
            .map(|(m, _)| *m)
            .collect();
        manage_tracks(&mut self.tracks, &hits, &unclaimed, &cfg, frame, &mut self.next_id);
        let time_s = frame as f64 * cfg.frame_period;
        let snaps = self
            .tracks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let (gc, b0) = diag.get(i).copied().unwrap_or((0, 1.0));
                snapshot(t, frame, time_s, gc, b0)
            })
            .collect();
        self.tracks.retain(|t| t.status != TrackStatus::Deleted);
        snaps
    }
}

fn snapshot(t: &Track, frame: usize, time_s: f64, gate_count: usize, beta0: f64) -> TrackSnapshot {
    TrackSnapshot {
        frame,
        time_s,
        id: t.id,
        status: t.status,
        x: t.state[0],
        y: t.state[1],
        vx: t.state[2],
        vy: t.state[3],
        gate_count,
        beta0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meas(x: f64, y: f64, rdot: f64) -> Measurement {
        Measurement {
            range: x.hypot(y),
            azimuth: x.atan2(y),
            rdot,
            power: 1.0,
        }
    }

    #[test]
    fn first_measurement_spawns_tentative() {
        let mut tr = Tracker::new(TrackerConfig::default());
        let s = tr.step(&[meas(0.0, 4.0, 1.0)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].status, TrackStatus::Tentative);
        assert!((s[0].vy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn m_of_n_confirmation() {
        let cfg = TrackerConfig::default();
        let mut t = Track::spawn(1, &meas(0.0, 4.0, 0.0), &cfg, 0);
        // spawn counts as the first hit; pattern over frames: hit, miss, hit
        apply_rules(&mut t, false, &cfg);
        assert_eq!(t.status, TrackStatus::Tentative);
        apply_rules(&mut t, true, &cfg);
        assert_eq!(t.status, TrackStatus::Tentative);
        apply_rules(&mut t, true, &cfg);
        assert_eq!(t.status, TrackStatus::Confirmed);
    }

    #[test]
    fn deleted_on_kth_miss() {
        let cfg = TrackerConfig::default();
        let mut t = Track::spawn(1, &meas(0.0, 4.0, 0.0), &cfg, 0);
        for _ in 0..3 {
            apply_rules(&mut t, true, &cfg);
        }
        assert_eq!(t.status, TrackStatus::Confirmed);
        for i in 1..=5 {
            apply_rules(&mut t, false, &cfg);
            let expect = if i < 5 { TrackStatus::Confirmed } else { TrackStatus::Deleted };
            assert_eq!(t.status, expect, "after miss {i}");
        }
        apply_rules(&mut t, true, &cfg);
        assert_eq!(t.status, TrackStatus::Deleted);
    }

    #[test]
    fn no_measurements_no_tracks() {
        let mut tr = Tracker::new(TrackerConfig::default());
        for _ in 0..20 {
            assert!(tr.step(&[]).is_empty());
        }
    }

    #[test]
    fn nearby_second_target_gets_its_own_track() {
        let mut tr = Tracker::new(TrackerConfig::default());
        tr.step(&[meas(-0.3, 3.0, 0.0)]);
        tr.step(&[meas(-0.3, 3.0, 0.0), meas(0.3, 3.0, 0.0)]);
        assert_eq!(tr.tracks.len(), 2);
    }

    #[test]
    fn duplicate_tracks_are_pruned() {
        let cfg = TrackerConfig::default();
        let mut tracks = vec![
            Track::spawn(1, &meas(0.0, 4.0, 0.0), &cfg, 0),
            Track::spawn(2, &meas(0.05, 4.0, 0.0), &cfg, 0),
            Track::spawn(3, &meas(1.0, 4.0, 0.0), &cfg, 0),
        ];
        tracks[1].status = TrackStatus::Confirmed;
        prune_duplicates(&mut tracks, 0.25);
        let st: Vec<_> = tracks.iter().map(|t| t.status).collect();
        assert_eq!(st, [TrackStatus::Deleted, TrackStatus::Confirmed, TrackStatus::Tentative]);
    }

    #[test]
    fn same_frame_duplicates_are_absorbed() {
        let mut tr = Tracker::new(TrackerConfig::default());
        let s = tr.step(&[meas(0.0, 4.0, 1.0), meas(0.05, 4.1, 1.0)]);
        assert_eq!(s.len(), 1);
    }
}
