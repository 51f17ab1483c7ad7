//! 2D CFAR detectors over [`MapGrid`]s: CA, GO, SO, OS and OSCA.
//!
//! The training ring of a cell is the square window of half-width
//! `guard + training` minus the `(2·guard+1)²` guard block. Near map borders
//! the window is truncated and the threshold factor is re-derived for the
//! truncated ring.
//!
//! Threshold factors assume a square-law (exponential) background:
//! CA is closed form, OS is solved by bisection on the order-statistic
//! false-alarm expression, and GO/SO/OSCA are calibrated by Monte-Carlo.
//! Calibration draws the background statistic `g` for unit exponential
//! training cells and solves `E[exp(-α g)] = P_FA`, which is exactly the
//! false-alarm rate of an exponential cell under test.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::dsp::{MapGrid, MapKind};
use crate::error::{Error, Result};
use crate::synth::{derive_seed, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CfarKind {
    #[serde(rename = "CA")]
    Ca,
    #[serde(rename = "GO")]
    Go,
    #[serde(rename = "SO")]
    So,
    #[serde(rename = "OS")]
    Os,
    #[serde(rename = "OSCA")]
    Osca,
}

impl CfarKind {
    pub const ALL: [CfarKind; 5] = [CfarKind::Ca, CfarKind::Go, CfarKind::So, CfarKind::Os, CfarKind::Osca];

    pub fn name(self) -> &'static str {
        match self {
            CfarKind::Ca => "CA",
            CfarKind::Go => "GO",
            CfarKind::So => "SO",
            CfarKind::Os => "OS",
            CfarKind::Osca => "OSCA",
        }
    }
}

impl std::fmt::Display for CfarKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Axis along which OSCA averages before ranking across the other axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OscaAverageAxis {
    /// Average along azimuth/Doppler within each range row, rank across range.
    Cross,
    /// Average along range within each column, rank across azimuth/Doppler.
    Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CfarConfig {
    pub kind: CfarKind,
    /// Training cells per side, applied on both axes.
    pub training_cells: usize,
    /// Guard cells per side, applied on both axes.
    pub guard_cells: usize,
    pub design_pfa: f64,
    /// Order-statistic rank as a fraction of the ranked population (OS, OSCA).
    pub os_rank_fraction: f64,
    pub osca_average_axis: OscaAverageAxis,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            kind: CfarKind::Os,
            training_cells: 4,
            guard_cells: 1,
            design_pfa: 1e-3,
            os_rank_fraction: 0.75,
            osca_average_axis: OscaAverageAxis::Cross,
        }
    }
}

impl CfarConfig {
    pub fn new(kind: CfarKind, training_cells: usize, guard_cells: usize, design_pfa: f64) -> Self {
        Self {
            kind,
            training_cells,
            guard_cells,
            design_pfa,
            ..Self::default()
        }
    }

    pub fn half_window(&self) -> usize {
        self.guard_cells + self.training_cells
    }

    pub fn validate(&self) -> Result<()> {
        if self.training_cells < 1 {
            return Err(Error::invalid("training_cells", "must be >= 1"));
        }
        if !(self.design_pfa > 0.0 && self.design_pfa < 1.0) {
            return Err(Error::invalid("design_pfa", "must lie in (0, 1)"));
        }
        if matches!(self.kind, CfarKind::Os | CfarKind::Osca)
            && !(self.os_rank_fraction > 0.0 && self.os_rank_fraction < 1.0)
        {
            return Err(Error::invalid("os_rank_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Truncated window extents around a cell: how many window rows/columns
/// exist above, below, left and right of it (each at most guard + training).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RingGeometry {
    pub up: usize,
    pub down: usize,
    pub left: usize,
    pub right: usize,
    pub guard: usize,
}

impl RingGeometry {
    pub fn full(guard: usize, training: usize) -> Self {
        let w = guard + training;
        Self { up: w, down: w, left: w, right: w, guard }
    }

    /// Edge policy: the window of cell (row, col) clipped to the map.
    pub fn at(row: usize, col: usize, rows: usize, cols: usize, guard: usize, training: usize) -> Self {
        let w = guard + training;
        Self {
            up: row.min(w),
            down: (rows - 1 - row).min(w),
            left: col.min(w),
            right: (cols - 1 - col).min(w),
            guard,
        }
    }

    fn is_guard(&self, dr: isize, dc: isize) -> bool {
        let g = self.guard as isize;
        dr.abs() <= g && dc.abs() <= g
    }

    /// Ring offsets in row-major order.
    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        let (u, d, l, r) = (self.up as isize, self.down as isize, self.left as isize, self.right as isize);
        (-u..=d).flat_map(move |dr| (-l..=r).map(move |dc| (dr, dc))).filter(move |&(dr, dc)| !self.is_guard(dr, dc))
    }

    pub fn n_cells(&self) -> usize {
        self.offsets().count()
    }
}

/// Ordered side bands used by GO/SO: 0 top, 1 bottom, 2 left, 3 right.
fn band(dr: isize, dc: isize, guard: isize) -> usize {
    if dr < -guard {
        0
    } else if dr > guard {
        1
    } else if dc < 0 {
        2
    } else {
        3
    }
}

fn rank_index(len: usize, fraction: f64) -> usize {
    ((fraction * len as f64).ceil() as usize).clamp(1, len) - 1
}

/// Background statistic of one ring; `values[i]` pairs with `geom.offsets()`.
fn statistic(cfg: &CfarConfig, geom: &RingGeometry, offsets: &[(isize, isize)], values: &mut [f64]) -> f64 {
    let n = values.len();
    match cfg.kind {
        CfarKind::Ca => values.iter().sum::<f64>() / n as f64,
        CfarKind::Go | CfarKind::So => {
            let mut sum = [0.0; 4];
            let mut cnt = [0usize; 4];
            let g = geom.guard as isize;
            for (&(dr, dc), &v) in offsets.iter().zip(values.iter()) {
                let b = band(dr, dc, g);
                sum[b] += v;
                cnt[b] += 1;
            }
            let means = (0..4).filter(|&b| cnt[b] > 0).map(|b| sum[b] / cnt[b] as f64);
            if cfg.kind == CfarKind::Go {
                means.fold(f64::NEG_INFINITY, f64::max)
            } else {
                means.fold(f64::INFINITY, f64::min)
            }
        }
        CfarKind::Os => {
            let k = rank_index(n, cfg.os_rank_fraction);
            let (_, v, _) = values.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
            *v
        }
        CfarKind::Osca => {
            // one running mean per line of the window along the averaging axis
            let lines = match cfg.osca_average_axis {
                OscaAverageAxis::Cross => geom.up + geom.down + 1,
                OscaAverageAxis::Range => geom.left + geom.right + 1,
            };
            let mut sum = vec![0.0; lines];
            let mut cnt = vec![0usize; lines];
            for (&(dr, dc), &v) in offsets.iter().zip(values.iter()) {
                let line = match cfg.osca_average_axis {
                    OscaAverageAxis::Cross => (dr + geom.up as isize) as usize,
                    OscaAverageAxis::Range => (dc + geom.left as isize) as usize,
                };
                sum[line] += v;
                cnt[line] += 1;
            }
            let mut avgs: Vec<f64> = (0..lines).filter(|&i| cnt[i] > 0).map(|i| sum[i] / cnt[i] as f64).collect();
            let k = rank_index(avgs.len(), cfg.os_rank_fraction);
            let (_, v, _) = avgs.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
            *v
        }
    }
}

/// CA factor for a mean background over `n` exponential cells.
pub fn ca_threshold_factor(n: usize, pfa: f64) -> f64 {
    let n = n as f64;
    n * (pfa.powf(-1.0 / n) - 1.0)
}

/// False-alarm probability of OS-CFAR with the `k`-th (1-based) of `n`
/// exponential cells: ∏_{i<k} (n−i)/(n−i+α).
pub fn os_false_alarm(n: usize, k: usize, alpha: f64) -> f64 {
    (0..k).map(|i| {
        let m = (n - i) as f64;
        m / (m + alpha)
    }).product()
}

fn bisect_decreasing(f: impl Fn(f64) -> f64, target: f64, what: &str) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while f(hi) > target {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::ThresholdNotConverged(format!("{what}: no upper bracket for P_FA {target}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1e-12) {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::ThresholdNotConverged(format!("{what}: bisection did not converge for P_FA {target}")))
}

pub fn os_threshold_factor(n: usize, k: usize, pfa: f64) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::invalid("os_rank_fraction", format!("rank {k} invalid for {n} cells")));
    }
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::invalid("design_pfa", "must lie in (0, 1)"));
    }
    bisect_decreasing(|a| os_false_alarm(n, k, a), pfa, "OS")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CalibrationKey {
    kind: CfarKind,
    geom: RingGeometry,
    rank_bits: u64,
    axis: OscaAverageAxis,
}

/// Monte-Carlo trials per calibrated ring geometry.
pub const CALIBRATION_TRIALS: usize = 40_000;

type SampleCache = RwLock<HashMap<CalibrationKey, Arc<Vec<f64>>>>;

fn sample_cache() -> &'static SampleCache {
    static CACHE: OnceLock<SampleCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn key_seed(key: &CalibrationKey) -> u64 {
    let g = key.geom;
    let packed = (g.up as u64)
        | (g.down as u64) << 8
        | (g.left as u64) << 16
        | (g.right as u64) << 24
        | (g.guard as u64) << 32
        | (key.kind as u64) << 40
        | (key.axis as u64) << 48;
    derive_seed(packed ^ key.rank_bits, streams::CFAR_CALIBRATION, 0)
}

/// Background statistic samples for unit exponential training cells.
fn calibration_samples(cfg: &CfarConfig, geom: &RingGeometry) -> Arc<Vec<f64>> {
    let key = CalibrationKey {
        kind: cfg.kind,
        geom: *geom,
        rank_bits: cfg.os_rank_fraction.to_bits(),
        axis: cfg.osca_average_axis,
    };
    if let Some(s) = sample_cache().read().expect("calibration cache poisoned").get(&key) {
        return s.clone();
    }
    let offsets: Vec<(isize, isize)> = geom.offsets().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(key_seed(&key));
    let mut values = vec![0.0; offsets.len()];
    let samples: Vec<f64> = (0..CALIBRATION_TRIALS)
        .map(|_| {
            for v in values.iter_mut() {
                *v = Exp1.sample(&mut rng);
            }
            statistic(cfg, geom, &offsets, &mut values)
        })
        .collect();
    let samples = Arc::new(samples);
    sample_cache()
        .write()
        .expect("calibration cache poisoned")
        .entry(key)
        .or_insert(samples)
        .clone()
}

/// Monte-Carlo threshold factor for any detector kind and ring geometry.
pub fn monte_carlo_threshold_factor(cfg: &CfarConfig, geom: &RingGeometry) -> Result<f64> {
    cfg.validate()?;
    let samples = calibration_samples(cfg, geom);
    let inv = 1.0 / samples.len() as f64;
    bisect_decreasing(
        |a| samples.iter().map(|g| (-a * g).exp()).sum::<f64>() * inv,
        cfg.design_pfa,
        cfg.kind.name(),
    )
}

/// Threshold multiplier α for the given ring, so that an exponential cell
/// under test exceeds α·g with probability `design_pfa`.
pub fn threshold_factor(cfg: &CfarConfig, geom: &RingGeometry) -> Result<f64> {
    cfg.validate()?;
    match cfg.kind {
        CfarKind::Ca => Ok(ca_threshold_factor(geom.n_cells(), cfg.design_pfa)),
        CfarKind::Os => {
            let n = geom.n_cells();
            os_threshold_factor(n, rank_index(n, cfg.os_rank_fraction) + 1, cfg.design_pfa)
        }
        CfarKind::Go | CfarKind::So | CfarKind::Osca => monte_carlo_threshold_factor(cfg, geom),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub row: usize,
    pub col: usize,
    pub power: f64,
}

/// Binary detection image aligned to a map, plus the detected cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMask {
    pub kind: MapKind,
    pub rows: usize,
    pub cols: usize,
    pub frame_index: usize,
    pub bits: Vec<bool>,
    pub detections: Vec<Detection>,
}

impl DetectionMask {
    pub fn empty_like(map: &MapGrid) -> Self {
        Self {
            kind: map.kind,
            rows: map.rows,
            cols: map.cols,
            frame_index: map.frame_index,
            bits: vec![false; map.rows * map.cols],
            detections: Vec::new(),
        }
    }

    #[inline]
    pub fn is_set(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn count(&self) -> usize {
        self.detections.len()
    }

    /// Clears every detection in column `col`.
    pub fn clear_column(&mut self, col: usize) {
        for r in 0..self.rows {
            self.bits[r * self.cols + col] = false;
        }
        self.detections.retain(|d| d.col != col);
    }
}

/// Runs the configured detector over every cell of `map`.
pub fn cfar_2d(map: &MapGrid, cfg: &CfarConfig) -> Result<DetectionMask> {
    cfg.validate()?;
    check_window(map, cfg)?;
    // Every distinct truncated ring shares one factor.
    let mut factors: HashMap<RingGeometry, f64> = HashMap::new();
    for r in 0..map.rows {
        for c in 0..map.cols {
            let g = RingGeometry::at(r, c, map.rows, map.cols, cfg.guard_cells, cfg.training_cells);
            if let std::collections::hash_map::Entry::Vacant(e) = factors.entry(g) {
                e.insert(threshold_factor(cfg, &g)?);
            }
        }
    }
    Ok(detect(map, cfg, |g| factors[g]))
}

/// Same detector with one fixed threshold factor for every cell.
pub fn cfar_2d_with_factor(map: &MapGrid, cfg: &CfarConfig, alpha: f64) -> Result<DetectionMask> {
    cfg.validate()?;
    check_window(map, cfg)?;
    Ok(detect(map, cfg, |_| alpha))
}

fn check_window(map: &MapGrid, cfg: &CfarConfig) -> Result<()> {
    let win = 2 * cfg.half_window() + 1;
    if map.rows < win || map.cols < win {
        return Err(Error::WindowTooLarge {
            window_rows: win,
            window_cols: win,
            rows: map.rows,
            cols: map.cols,
        });
    }
    Ok(())
}

fn detect(map: &MapGrid, cfg: &CfarConfig, factor: impl Fn(&RingGeometry) -> f64 + Sync) -> DetectionMask {
    let rows: Vec<Vec<Detection>> = (0..map.rows)
        .into_par_iter()
        .map(|r| {
            let mut found = Vec::new();
            let mut offsets = Vec::new();
            let mut values = Vec::new();
            for c in 0..map.cols {
                let cut = map.at(r, c);
                if cut <= 0.0 {
                    continue;
                }
                let g = RingGeometry::at(r, c, map.rows, map.cols, cfg.guard_cells, cfg.training_cells);
                offsets.clear();
                values.clear();
                for (dr, dc) in g.offsets() {
                    offsets.push((dr, dc));
                    values.push(map.at((r as isize + dr) as usize, (c as isize + dc) as usize));
                }
                let bg = statistic(cfg, &g, &offsets, &mut values);
                if cut > factor(&g) * bg {
                    found.push(Detection { row: r, col: c, power: cut });
                }
            }
            found
        })
        .collect();
    let mut mask = DetectionMask::empty_like(map);
    for d in rows.into_iter().flatten() {
        mask.bits[d.row * mask.cols + d.col] = true;
        mask.detections.push(d);
    }
    mask
}

/// Detections that are local maxima of the map over their 8 neighbours.
/// Ties go to the earlier cell in row-major order.
pub fn peak_cells(mask: &DetectionMask, map: &MapGrid) -> Vec<Detection> {
    let (rows, cols) = (map.rows as isize, map.cols as isize);
    mask.detections
        .iter()
        .filter(|d| {
            let (r, c) = (d.row as isize, d.col as isize);
            let v = map.at(d.row, d.col);
            let here = r * cols + c;
            (-1..=1).flat_map(|dr| (-1..=1).map(move |dc| (dr, dc))).all(|(dr, dc)| {
                let (rr, cc) = (r + dr, c + dc);
                if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= rows || cc >= cols {
                    return true;
                }
                let w = map.at(rr as usize, cc as usize);
                if rr * cols + cc < here {
                    v > w
                } else {
                    v >= w
                }
            })
        })
        .copied()
        .collect()
}

/// Cell-under-test values and background statistics of every cell of a map,
/// row-major. The statistic does not depend on the design P_FA, so one
/// evaluation serves a whole threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStatistics {
    pub rows: usize,
    pub cols: usize,
    pub cut: Vec<f64>,
    pub background: Vec<f64>,
    pub geometry: Vec<RingGeometry>,
}

impl CellStatistics {
    /// Detection bits for one design P_FA (`cfg.design_pfa`).
    pub fn detect(&self, cfg: &CfarConfig) -> Result<Vec<bool>> {
        let mut factors: HashMap<RingGeometry, f64> = HashMap::new();
        for g in &self.geometry {
            if let std::collections::hash_map::Entry::Vacant(e) = factors.entry(*g) {
                e.insert(threshold_factor(cfg, g)?);
            }
        }
        Ok((0..self.cut.len())
            .map(|i| self.cut[i] > 0.0 && self.cut[i] > factors[&self.geometry[i]] * self.background[i])
            .collect())
    }
}

pub fn cell_statistics(map: &MapGrid, cfg: &CfarConfig) -> Result<CellStatistics> {
    cfg.validate()?;
    check_window(map, cfg)?;
    let per_row: Vec<Vec<(f64, RingGeometry)>> = (0..map.rows)
        .into_par_iter()
        .map(|r| {
            let mut offsets = Vec::new();
            let mut values = Vec::new();
            (0..map.cols)
                .map(|c| {
                    let g = RingGeometry::at(r, c, map.rows, map.cols, cfg.guard_cells, cfg.training_cells);
                    offsets.clear();
                    values.clear();
                    for (dr, dc) in g.offsets() {
                        offsets.push((dr, dc));
                        values.push(map.at((r as isize + dr) as usize, (c as isize + dc) as usize));
                    }
                    (statistic(cfg, &g, &offsets, &mut values), g)
                })
                .collect()
        })
        .collect();
    let (background, geometry) = per_row.into_iter().flatten().unzip();
    Ok(CellStatistics {
        rows: map.rows,
        cols: map.cols,
        cut: map.data.clone(),
        background,
        geometry,
    })
}

/// Map of i.i.d. unit-mean exponential cells (square-law detected noise).
pub fn exponential_noise_map(rows: usize, cols: usize, seed: u64) -> MapGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MapGrid {
        kind: MapKind::RangeDoppler,
        rows,
        cols,
        data: (0..rows * cols).map(|_| Exp1.sample(&mut rng)).collect(),
        range_axis: (0..rows).map(|r| r as f64).collect(),
        cross_axis: (0..cols).map(|c| c as f64).collect(),
        frame_index: 0,
    }
}
