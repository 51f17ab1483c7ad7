//! The two end-to-end chains from radar cube to confirmed tracks.
//!
//! Both share range FFT, MTI and Doppler FFT; they differ only in the map
//! the CFAR detector runs on. Per-frame detection and clustering run in
//! parallel, tracking runs sequentially.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::Instant;

use crate::cfar::{cfar_2d, peak_cells, CfarConfig, DetectionMask};
use crate::cluster::{cells_to_points, centroids, dbscan, mask_to_points, DbscanParams, PointMeasurement};
use crate::dsp::{DspConfig, MapGrid, MapKind, Preprocessor};
use crate::error::{Error, Result};
use crate::params::RadarParams;
use crate::synth::RadarCube;
use crate::tracker::{Measurement, TrackSnapshot, TrackStatus, Tracker, TrackerConfig};

/// Soft per-frame budget; exceeding it only logs a warning.
pub const FRAME_BUDGET_MS: f64 = 100.0;

/// DBSCAN radius used together with peak grouping (m). Below the 0.6 m
/// spacing of two people walking side by side.
pub const PEAK_GROUPED_EPS_M: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PipelineKind {
    #[serde(rename = "RA")]
    Ra,
    #[serde(rename = "RD")]
    Rd,
}

impl PipelineKind {
    pub fn name(self) -> &'static str {
        match self {
            PipelineKind::Ra => "RA",
            PipelineKind::Rd => "RD",
        }
    }

    pub fn map_kind(self) -> MapKind {
        match self {
            PipelineKind::Ra => MapKind::RangeAzimuth,
            PipelineKind::Rd => MapKind::RangeDoppler,
        }
    }
}

impl std::fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub kind: PipelineKind,
    /// Number of leading virtual channels used.
    pub channels: usize,
    #[serde(default)]
    pub dsp: DspConfig,
    #[serde(default)]
    pub cfar: CfarConfig,
    /// Keep only detections that are local maxima of the map before
    /// clustering.
    #[serde(default)]
    pub peak_grouping: bool,
    #[serde(default)]
    pub cluster: DbscanParams,
    pub tracker: TrackerConfig,
}

impl PipelineConfig {
    /// Default configuration for `kind` on the full array of `params`.
    pub fn new(kind: PipelineKind, params: &RadarParams) -> Self {
        Self {
            kind,
            channels: params.n_virtual_channels,
            dsp: DspConfig::default(),
            cfar: CfarConfig::default(),
            peak_grouping: false,
            cluster: DbscanParams::default(),
            tracker: TrackerConfig::for_radar(params, params.n_virtual_channels),
        }
    }

    /// Clusters only local maxima of the CFAR mask, one point per target
    /// lobe, with a small DBSCAN radius and single-point clusters allowed.
    /// Resolves targets that share one detection blob.
    pub fn peak_grouped(mut self) -> Self {
        self.peak_grouping = true;
        self.cluster.eps = PEAK_GROUPED_EPS_M;
        self.cluster.min_pts = 1;
        self
    }

    /// Same configuration on a channel subset; the tracker's azimuth noise
    /// follows the subset's angular resolution.
    pub fn with_channels(&self, channels: usize, params: &RadarParams) -> Self {
        let mut c = *self;
        c.channels = channels;
        c.tracker.sigma_azimuth = params.angle_resolution(channels.max(1), 0.0) / 2.0;
        c
    }

    pub fn validate(&self, params: &RadarParams) -> Result<()> {
        if self.channels < 2 {
            return Err(Error::TooFewChannels(self.channels));
        }
        if self.channels > params.n_virtual_channels {
            return Err(Error::invalid(
                "channels",
                format!("{} exceeds the {} virtual channels", self.channels, params.n_virtual_channels),
            ));
        }
        self.cfar.validate()?;
        if !(self.cluster.eps > 0.0) || self.cluster.min_pts == 0 || !(self.cluster.velocity_weight >= 0.0) {
            return Err(Error::invalid("cluster", "need eps > 0, min_pts >= 1, velocity_weight >= 0"));
        }
        self.tracker.validate()
    }
}

/// Everything produced for one frame.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame_index: usize,
    pub time_s: f64,
    /// Hash of the shared range/Doppler cube, identical across pipelines.
    pub preprocess_checksum: u64,
    /// The map the detector ran on.
    pub map: MapGrid,
    pub mask: DetectionMask,
    pub points: Vec<PointMeasurement>,
    /// DBSCAN cluster of every point, `None` for noise.
    pub labels: Vec<Option<usize>>,
    pub centroids: Vec<PointMeasurement>,
    /// Every live track after this frame's update, tentative ones included.
    pub tracks: Vec<TrackSnapshot>,
}

impl FrameResult {
    pub fn confirmed(&self) -> impl Iterator<Item = &TrackSnapshot> {
        self.tracks.iter().filter(|t| t.status == TrackStatus::Confirmed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StageTimes {
    pub frame: usize,
    pub preprocess_ms: f64,
    pub detect_ms: f64,
    pub cluster_ms: f64,
    pub track_ms: f64,
}

impl StageTimes {
    pub fn total_ms(&self) -> f64 {
        self.preprocess_ms + self.detect_ms + self.cluster_ms + self.track_ms
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub config: PipelineConfig,
    pub frames: Vec<FrameResult>,
    pub runtimes: Vec<StageTimes>,
    pub jpda_fallbacks: usize,
}

impl PipelineResult {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    /// Every track snapshot of the run, frame by frame.
    pub fn snapshots(&self) -> impl Iterator<Item = &TrackSnapshot> {
        self.frames.iter().flat_map(|f| f.tracks.iter())
    }

    /// Confirmed snapshots per frame.
    pub fn confirmed_per_frame(&self) -> Vec<Vec<TrackSnapshot>> {
        self.frames.iter().map(|f| f.confirmed().copied().collect()).collect()
    }
}

fn checksum(data: &[num_complex::Complex64]) -> u64 {
    let mut h = Sha256::new();
    for v in data {
        h.update(v.re.to_le_bytes());
        h.update(v.im.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

struct Detected {
    frame: FrameResult,
    times: StageTimes,
}

fn detect_frame(cube: &RadarCube, idx: usize, pre: &Preprocessor, cfg: &PipelineConfig) -> Result<Detected> {
    let t0 = Instant::now();
    let pf = pre
        .process(&cube.frames[idx], cfg.channels, idx)
        .map_err(|e| e.in_stage("preprocess"))?;
    let preprocess_checksum = checksum(&pf.cube.data);
    let preprocess_ms = ms(t0);

    let t1 = Instant::now();
    let map = match cfg.kind {
        PipelineKind::Ra => pf.ra.clone(),
        PipelineKind::Rd => pf.rd.clone(),
    };
    let mut mask = cfar_2d(&map, &cfg.cfar).map_err(|e| e.in_stage("cfar"))?;
    if cfg.kind == PipelineKind::Rd {
        mask.clear_column(pre.zero_doppler_bin());
    }
    let detect_ms = ms(t1);

    let t2 = Instant::now();
    let points = if cfg.peak_grouping {
        cells_to_points(mask.kind, &peak_cells(&mask, &map), &pf, pre)
    } else {
        mask_to_points(&mask, &pf, pre)
    }
    .map_err(|e| e.in_stage("points"))?;
    let clustering = dbscan(&points, &cfg.cluster);
    let cents = centroids(&clustering.clusters);
    let cluster_ms = ms(t2);

    Ok(Detected {
        frame: FrameResult {
            frame_index: idx,
            time_s: cube.timestamps_s.get(idx).copied().unwrap_or(idx as f64 * cube.params.frame_period()),
            preprocess_checksum,
            map,
            mask,
            points,
            labels: clustering.labels,
            centroids: cents,
            tracks: Vec::new(),
        },
        times: StageTimes {
            frame: idx,
            preprocess_ms,
            detect_ms,
            cluster_ms,
            track_ms: 0.0,
        },
    })
}

/// Runs detection and clustering only, without tracking. Used by the ROC
/// harness, which needs masks but no tracks.
pub fn run_detection(cube: &RadarCube, cfg: &PipelineConfig) -> Result<Vec<FrameResult>> {
    Ok(detect_all(cube, cfg)?.into_iter().map(|d| d.frame).collect())
}

fn detect_all(cube: &RadarCube, cfg: &PipelineConfig) -> Result<Vec<Detected>> {
    cfg.validate(&cube.params)?;
    let pre = Preprocessor::new(&cube.params, &cfg.dsp)?;
    (0..cube.n_frames())
        .into_par_iter()
        .map(|i| detect_frame(cube, i, &pre, cfg))
        .collect()
}

fn run(cube: &RadarCube, cfg: &PipelineConfig) -> Result<PipelineResult> {
    let detected = detect_all(cube, cfg)?;
    let mut tracker = Tracker::new(cfg.tracker);
    let mut frames = Vec::with_capacity(detected.len());
    let mut runtimes = Vec::with_capacity(detected.len());
    let mut over_budget = 0usize;
    for Detected { mut frame, mut times } in detected {
        let t = Instant::now();
        let meas: Vec<Measurement> = frame
            .centroids
            .iter()
            .map(|c| Measurement {
                range: c.range(),
                azimuth: c.azimuth(),
                rdot: c.radial_velocity,
                power: c.power,
            })
            .collect();
        frame.tracks = tracker.step(&meas);
        times.track_ms = ms(t);
        if times.total_ms() > FRAME_BUDGET_MS {
            over_budget += 1;
        }
        frames.push(frame);
        runtimes.push(times);
    }
    if over_budget > 0 {
        warn!(
            "{} pipeline: {over_budget} of {} frames exceeded the {FRAME_BUDGET_MS} ms budget",
            cfg.kind,
            frames.len()
        );
    }
    Ok(PipelineResult {
        config: *cfg,
        frames,
        runtimes,
        jpda_fallbacks: tracker.diagnostics.jpda_fallbacks,
    })
}

/// Detection on range-azimuth maps with a Doppler lookup per detected cell.
pub fn run_ra_pipeline(cube: &RadarCube, cfg: &PipelineConfig) -> Result<PipelineResult> {
    if cfg.kind != PipelineKind::Ra {
        return Err(Error::invalid("kind", "run_ra_pipeline needs kind RA"));
    }
    run(cube, cfg)
}

/// Detection on range-Doppler maps with one beamformed angle per cell.
pub fn run_rd_pipeline(cube: &RadarCube, cfg: &PipelineConfig) -> Result<PipelineResult> {
    if cfg.kind != PipelineKind::Rd {
        return Err(Error::invalid("kind", "run_rd_pipeline needs kind RD"));
    }
    run(cube, cfg)
}

/// Dispatches on `cfg.kind`.
pub fn run_pipeline(cube: &RadarCube, cfg: &PipelineConfig) -> Result<PipelineResult> {
    match cfg.kind {
        PipelineKind::Ra => run_ra_pipeline(cube, cfg),
        PipelineKind::Rd => run_rd_pipeline(cube, cfg),
    }
}
