//! Evaluation harness: CFAR ROC sweeps, track metrics and channel ablation.
//!
//! ROC protocol: P_D is per target (a truth counts as detected when any cell
//! of its positive block fires), P_FA is per cell over negative cells. Cells
//! within `tolerance` of a truth cell (Chebyshev distance) are positive, the
//! next `guard` rings are excluded, the rest are negative.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cfar::{cell_statistics, CfarConfig, CfarKind};
use crate::dsp::{DspConfig, MapGrid, MapKind, Preprocessor};
use crate::error::{Error, Result};
use crate::params::RadarParams;
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineKind, PipelineResult};
use crate::scene::{Scene, TruthRow};
use crate::synth::{synthesize_cube, synthesize_frame, RadarCube};

pub const DEFAULT_TOLERANCE_CELLS: usize = 1;
pub const DEFAULT_GUARD_CELLS: usize = 2;
/// Match gate between a confirmed track and a truth (m).
pub const MATCH_GATE_M: f64 = 1.5;
/// Channel subsets of the ablation study.
pub const ABLATION_SUBSETS: [usize; 5] = [15, 12, 8, 6, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellLabel {
    /// Inside the positive block of the given truth target.
    Positive(usize),
    Excluded,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthLabels {
    pub rows: usize,
    pub cols: usize,
    pub labels: Vec<CellLabel>,
    /// Cell indices of every target's positive block; empty for targets
    /// outside the map.
    pub blocks: Vec<Vec<usize>>,
}

impl TruthLabels {
    pub fn count(&self, pred: impl Fn(&CellLabel) -> bool) -> usize {
        self.labels.iter().filter(|l| pred(l)).count()
    }

    pub fn n_negative(&self) -> usize {
        self.count(|l| *l == CellLabel::Negative)
    }

    /// Marks a whole column as excluded.
    pub fn exclude_column(&mut self, col: usize) {
        for r in 0..self.rows {
            let i = r * self.cols + col;
            if self.labels[i] == CellLabel::Negative {
                self.labels[i] = CellLabel::Excluded;
            }
        }
    }
}

/// Map cell of a truth row, or `None` when it lies outside the map axes.
pub fn truth_cell(map: &MapGrid, t: &TruthRow) -> Option<(usize, usize)> {
    let cross = match map.kind {
        MapKind::RangeAzimuth => t.azimuth(),
        MapKind::RangeDoppler => t.radial_velocity,
    };
    let inside = |axis: &[f64], v: f64| {
        let (lo, hi) = (axis[0].min(axis[axis.len() - 1]), axis[0].max(axis[axis.len() - 1]));
        v >= lo && v <= hi
    };
    if !inside(&map.range_axis, t.range()) || !inside(&map.cross_axis, cross) {
        return None;
    }
    Some((map.nearest_row(t.range()), map.nearest_col(cross)))
}

pub fn truth_labels(map: &MapGrid, truth: &[TruthRow], tolerance: usize, guard: usize) -> TruthLabels {
    let (rows, cols) = (map.rows, map.cols);
    let mut labels = vec![CellLabel::Negative; rows * cols];
    let cells: Vec<Option<(usize, usize)>> = truth.iter().map(|t| truth_cell(map, t)).collect();
    let around = |(r, c): (usize, usize), reach: usize| {
        let (r0, r1) = (r.saturating_sub(reach), (r + reach).min(rows - 1));
        let (c0, c1) = (c.saturating_sub(reach), (c + reach).min(cols - 1));
        (r0..=r1).flat_map(move |i| (c0..=c1).map(move |j| i * cols + j))
    };
    for cell in cells.iter().flatten() {
        for i in around(*cell, tolerance + guard) {
            labels[i] = CellLabel::Excluded;
        }
    }
    let mut blocks = vec![Vec::new(); truth.len()];
    for (k, cell) in cells.iter().enumerate() {
        if let Some(cell) = cell {
            for i in around(*cell, tolerance) {
                labels[i] = CellLabel::Positive(k);
                blocks[k].push(i);
            }
        }
    }
    TruthLabels { rows, cols, labels, blocks }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub pipeline: PipelineKind,
    pub cfar: CfarKind,
    pub training_cells: usize,
    pub guard_cells: usize,
    pub design_pfa: f64,
    pub emp_pfa: f64,
    pub emp_pd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RocOptions {
    pub channels: usize,
    pub tolerance_cells: usize,
    pub guard_cells: usize,
    pub os_rank_fraction: f64,
    pub dsp: DspConfig,
}

impl Default for RocOptions {
    fn default() -> Self {
        Self {
            channels: RadarParams::default().n_virtual_channels,
            tolerance_cells: DEFAULT_TOLERANCE_CELLS,
            guard_cells: DEFAULT_GUARD_CELLS,
            os_rank_fraction: CfarConfig::default().os_rank_fraction,
            dsp: DspConfig::default(),
        }
    }
}

/// Detection maps of every frame of a scene, with their truth labels.
#[derive(Debug, Clone)]
pub struct LabeledMaps {
    pub kind: PipelineKind,
    pub maps: Vec<MapGrid>,
    pub labels: Vec<TruthLabels>,
}

/// Synthesizes and pre-processes every frame of `scene` without keeping the
/// raw cube, returning the detection-domain map of each frame.
pub fn labeled_maps(scene: &Scene, params: &RadarParams, kind: PipelineKind, opts: &RocOptions) -> Result<LabeledMaps> {
    params.validate()?;
    scene.validate()?;
    let pre = Preprocessor::new(params, &opts.dsp)?;
    let truth = scene.ground_truth(params);
    let zero = pre.zero_doppler_bin();
    let out: Vec<(MapGrid, TruthLabels)> = (0..scene.n_frames(params))
        .into_par_iter()
        .map(|f| {
            let frame = synthesize_frame(scene, params, f)?;
            let rd = pre.range_doppler(&frame);
            let map = match kind {
                PipelineKind::Ra => pre.make_ra_map(&rd, opts.channels, f)?,
                PipelineKind::Rd => pre.make_rd_map(&rd, opts.channels, f)?,
            };
            let mut labels = truth_labels(&map, &truth[f], opts.tolerance_cells, opts.guard_cells);
            if kind == PipelineKind::Rd {
                labels.exclude_column(zero);
            }
            Ok((map, labels))
        })
        .collect::<Result<_>>()?;
    let (maps, labels) = out.into_iter().unzip();
    Ok(LabeledMaps { kind, maps, labels })
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    hits: usize,
    targets: usize,
    false_alarms: usize,
    negatives: usize,
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            hits: self.hits + o.hits,
            targets: self.targets + o.targets,
            false_alarms: self.false_alarms + o.false_alarms,
            negatives: self.negatives + o.negatives,
        }
    }
}

/// ROC points of one detector over pre-computed maps: one point per
/// `(training, guard)` pair and design P_FA, in grid order.
pub fn roc_from_maps(lm: &LabeledMaps, cfar: CfarKind, grid: &[(usize, usize)], pfa_grid: &[f64], os_rank_fraction: f64) -> Result<Vec<RocPoint>> {
    let zero = match lm.kind {
        PipelineKind::Rd => lm.maps.first().map(|m| m.cols / 2),
        PipelineKind::Ra => None,
    };
    let mut out = Vec::with_capacity(grid.len() * pfa_grid.len());
    for &(training, guard) in grid {
        let cfgs: Vec<CfarConfig> = pfa_grid
            .iter()
            .map(|&p| CfarConfig {
                os_rank_fraction,
                ..CfarConfig::new(cfar, training, guard, p)
            })
            .collect();
        for c in &cfgs {
            c.validate()?;
        }
        let per_frame: Vec<Vec<Counts>> = lm
            .maps
            .par_iter()
            .zip(&lm.labels)
            .map(|(map, labels)| {
                let stats = cell_statistics(map, &cfgs[0])?;
                cfgs.iter()
                    .map(|cfg| {
                        let mut bits = stats.detect(cfg)?;
                        if let Some(z) = zero {
                            for r in 0..map.rows {
                                bits[r * map.cols + z] = false;
                            }
                        }
                        let mut c = Counts::default();
                        for (b, l) in bits.iter().zip(&labels.labels) {
                            if *l == CellLabel::Negative {
                                c.negatives += 1;
                                c.false_alarms += *b as usize;
                            }
                        }
                        for block in labels.blocks.iter().filter(|b| !b.is_empty()) {
                            c.targets += 1;
                            c.hits += block.iter().any(|&i| bits[i]) as usize;
                        }
                        Ok(c)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for (k, cfg) in cfgs.iter().enumerate() {
            let total = per_frame.iter().map(|v| v[k]).fold(Counts::default(), |a, b| a + b);
            out.push(RocPoint {
                pipeline: lm.kind,
                cfar,
                training_cells: training,
                guard_cells: guard,
                design_pfa: cfg.design_pfa,
                emp_pfa: ratio(total.false_alarms, total.negatives),
                emp_pd: ratio(total.hits, total.targets),
            });
        }
    }
    Ok(out)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn roc_sweep(
    scene: &Scene,
    params: &RadarParams,
    pipeline: PipelineKind,
    cfar: CfarKind,
    grid: &[(usize, usize)],
    pfa_grid: &[f64],
    opts: &RocOptions,
) -> Result<Vec<RocPoint>> {
    if grid.is_empty() || pfa_grid.is_empty() {
        return Err(Error::invalid("grid", "ROC grids must be non-empty"));
    }
    let lm = labeled_maps(scene, params, pipeline, opts)?;
    roc_from_maps(&lm, cfar, grid, pfa_grid, opts.os_rank_fraction)
}

/// Log-spaced design P_FA grid from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

/// Trapezoidal area under `(P_FA, P_D)` points over their P_FA span,
/// divided by that span. Input order does not matter.
pub fn auc(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let span = p[p.len() - 1].0 - p[0].0;
    if !(span > 0.0) {
        return Err(Error::invalid("points", "P_FA values span a zero-width interval"));
    }
    let area: f64 = p.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    Ok(area / span)
}

pub fn roc_auc(points: &[RocPoint]) -> Result<f64> {
    auc(&points.iter().map(|p| (p.emp_pfa, p.emp_pd)).collect::<Vec<_>>())
}

/// Assignment of one frame: `matches[k]` is the confirmed track id matched
/// to truth k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameMatch {
    pub frame: usize,
    pub matches: Vec<Option<u64>>,
    pub errors_m: Vec<Option<f64>>,
    pub truth_ranges: Vec<f64>,
    pub n_confirmed: usize,
    /// Two truths explained by one confirmed track in this frame.
    pub merged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackMetrics {
    pub rmse_m: f64,
    pub matched_pairs: usize,
    pub id_switches: usize,
    /// Largest mean truth range over runs of at least 3 merged frames; 0
    /// when the truths never merge.
    pub merge_range_m: f64,
    /// Smallest mean truth range over the same runs, `None` when the truths
    /// never merge.
    pub merge_onset_m: Option<f64>,
    pub miss_rate: f64,
    /// Fraction of frames in which each truth is matched.
    pub matched_fraction: Vec<f64>,
    pub track_count: Vec<usize>,
    pub per_frame: Vec<FrameMatch>,
}

impl TrackMetrics {
    /// Fraction of frames satisfying `pred` among those satisfying `within`.
    pub fn fraction_where(&self, within: impl Fn(&FrameMatch) -> bool, pred: impl Fn(&FrameMatch) -> bool) -> f64 {
        let sel: Vec<&FrameMatch> = self.per_frame.iter().filter(|f| within(f)).collect();
        ratio(sel.iter().filter(|f| pred(f)).count(), sel.len())
    }
}

/// Minimum-cost assignment of truths to track positions; an unmatched truth
/// costs `gate`, pairs farther than `gate` are not allowed.
pub fn assign(truth: &[(f64, f64)], tracks: &[(f64, f64)], gate: f64) -> Vec<Option<usize>> {
    fn go(k: usize, truth: &[(f64, f64)], tracks: &[(f64, f64)], gate: f64, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, cost: f64, best: &mut (f64, Vec<Option<usize>>)) {
        if cost >= best.0 {
            return;
        }
        if k == truth.len() {
            *best = (cost, cur.clone());
            return;
        }
        for j in 0..tracks.len() {
            if used[j] {
                continue;
            }
            let d = (truth[k].0 - tracks[j].0).hypot(truth[k].1 - tracks[j].1);
            if d <= gate {
                used[j] = true;
                cur[k] = Some(j);
                go(k + 1, truth, tracks, gate, used, cur, cost + d, best);
                used[j] = false;
            }
        }
        cur[k] = None;
        go(k + 1, truth, tracks, gate, used, cur, cost + gate, best);
    }
    let mut best = (f64::INFINITY, vec![None; truth.len()]);
    go(0, truth, tracks, gate, &mut vec![false; tracks.len()], &mut vec![None; truth.len()], 0.0, &mut best);
    best.1
}

/// Track metrics against per-frame truth. Only confirmed tracks count.
pub fn track_metrics(result: &PipelineResult, truth: &[Vec<TruthRow>]) -> TrackMetrics {
    metrics_from_snapshots(&result.confirmed_per_frame(), truth, MATCH_GATE_M)
}

/// [`track_metrics`] on raw per-frame confirmed snapshots.
pub fn metrics_from_snapshots(confirmed: &[Vec<crate::tracker::TrackSnapshot>], truth: &[Vec<TruthRow>], gate: f64) -> TrackMetrics {
    let n = confirmed.len().min(truth.len());
    let n_truth = truth.iter().map(Vec::len).max().unwrap_or(0);
    let mut per_frame = Vec::with_capacity(n);
    let mut sq = 0.0;
    let mut pairs = 0usize;
    let mut truth_frames = 0usize;
    let mut matched_count = vec![0usize; n_truth];
    let mut present = vec![0usize; n_truth];
    let mut last_id: Vec<Option<u64>> = vec![None; n_truth];
    let mut switches = 0;
    for f in 0..n {
        let tr: Vec<(f64, f64)> = truth[f].iter().map(|t| (t.x, t.y)).collect();
        let tk: Vec<(f64, f64)> = confirmed[f].iter().map(|s| (s.x, s.y)).collect();
        let a = assign(&tr, &tk, gate);
        let mut matches = vec![None; tr.len()];
        let mut errors = vec![None; tr.len()];
        for (k, m) in a.iter().enumerate() {
            truth_frames += 1;
            present[k] += 1;
            if let Some(j) = *m {
                let e = (tr[k].0 - tk[j].0).hypot(tr[k].1 - tk[j].1);
                sq += e * e;
                pairs += 1;
                matched_count[k] += 1;
                let id = confirmed[f][j].id;
                if let Some(prev) = last_id[k] {
                    if prev != id {
                        switches += 1;
                    }
                }
                last_id[k] = Some(id);
                matches[k] = Some(id);
                errors[k] = Some(e);
            }
        }
        let merged = tr.len() == 2
            && a.iter().filter(|m| m.is_some()).count() <= 1
            && tk.iter().any(|p| tr.iter().all(|t| (t.0 - p.0).hypot(t.1 - p.1) <= gate));
        per_frame.push(FrameMatch {
            frame: f,
            matches,
            errors_m: errors,
            truth_ranges: truth[f].iter().map(TruthRow::range).collect(),
            n_confirmed: tk.len(),
            merged,
        });
    }
    let mut merge_range: f64 = 0.0;
    let mut merge_onset: Option<f64> = None;
    let mut run: Vec<&FrameMatch> = Vec::new();
    let mut flush = |run: &mut Vec<&FrameMatch>| {
        if run.len() >= 3 {
            for fm in run.iter() {
                let r = fm.truth_ranges.iter().sum::<f64>() / fm.truth_ranges.len() as f64;
                merge_range = merge_range.max(r);
                merge_onset = Some(merge_onset.map_or(r, |o| o.min(r)));
            }
        }
        run.clear();
    };
    for fm in &per_frame {
        if fm.merged {
            run.push(fm);
        } else {
            flush(&mut run);
        }
    }
    flush(&mut run);
    TrackMetrics {
        rmse_m: if pairs > 0 { (sq / pairs as f64).sqrt() } else { 0.0 },
        matched_pairs: pairs,
        id_switches: switches,
        merge_range_m: merge_range,
        merge_onset_m: merge_onset,
        miss_rate: ratio(truth_frames - pairs, truth_frames),
        matched_fraction: matched_count.iter().zip(&present).map(|(&m, &p)| ratio(m, p)).collect(),
        track_count: per_frame.iter().map(|f| f.n_confirmed).collect(),
        per_frame,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub channels: usize,
    pub metrics: TrackMetrics,
}

/// Re-runs one pipeline on the same cube for each channel subset.
pub fn channel_ablation_on_cube(cube: &RadarCube, truth: &[Vec<TruthRow>], cfg: &PipelineConfig, subsets: &[usize]) -> Result<Vec<AblationRow>> {
    subsets
        .iter()
        .map(|&n| {
            let r = run_pipeline(cube, &cfg.with_channels(n, &cube.params))?;
            Ok(AblationRow {
                channels: n,
                metrics: track_metrics(&r, truth),
            })
        })
        .collect()
}

pub fn channel_ablation(scene: &Scene, params: &RadarParams, cfg: &PipelineConfig, subsets: &[usize]) -> Result<Vec<AblationRow>> {
    let cube = synthesize_cube(scene, params)?;
    channel_ablation_on_cube(&cube, &scene.ground_truth(params), cfg, subsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::{TrackSnapshot, TrackStatus};

    fn grid(kind: MapKind) -> MapGrid {
        MapGrid {
            kind,
            rows: 20,
            cols: 30,
            data: vec![1.0; 600],
            range_axis: (0..20).map(|i| i as f64 * 0.6).collect(),
            cross_axis: (0..30).map(|i| -1.0 + i as f64 * 2.0 / 29.0).collect(),
            frame_index: 0,
        }
    }

    fn truth(x: f64, y: f64) -> TruthRow {
        TruthRow { frame: 0, time_s: 0.0, target_id: 0, x, y, radial_velocity: 0.0 }
    }

    #[test]
    fn labels_partition_every_cell() {
        let m = grid(MapKind::RangeAzimuth);
        let l = truth_labels(&m, &[truth(0.0, 5.0)], 1, 2);
        let pos = l.count(|c| matches!(c, CellLabel::Positive(_)));
        let exc = l.count(|c| *c == CellLabel::Excluded);
        assert_eq!(pos, 9);
        assert_eq!(exc, 49 - 9);
        assert_eq!(pos + exc + l.n_negative(), 600);
        let empty = truth_labels(&m, &[], 1, 2);
        assert_eq!(empty.n_negative(), 600);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[(0.0, 0.0), (1.0, 1.0)]).unwrap(), 0.5);
        assert_eq!(auc(&[(1.0, 1.0), (0.0, 0.0)]).unwrap(), 0.5);
        assert_eq!(auc(&[(1e-4, 1.0), (1e-2, 1.0), (1e-3, 1.0)]).unwrap(), 1.0);
        assert!(matches!(auc(&[(0.1, 0.5)]), Err(Error::TooFewPoints(1))));
    }

    fn snap(frame: usize, id: u64, x: f64, y: f64) -> TrackSnapshot {
        TrackSnapshot { frame, time_s: 0.0, id, status: TrackStatus::Confirmed, x, y, vx: 0.0, vy: 0.0, gate_count: 1, beta0: 0.0 }
    }

    #[test]
    fn metrics_identity_offset_and_swap() {
        let tr: Vec<Vec<TruthRow>> = (0..100).map(|f| vec![truth(-1.0, 2.0 + 0.05 * f as f64), truth(1.0, 2.0 + 0.05 * f as f64)]).collect();
        let exact: Vec<Vec<TrackSnapshot>> = tr.iter().enumerate().map(|(f, t)| vec![snap(f, 1, t[0].x, t[0].y), snap(f, 2, t[1].x, t[1].y)]).collect();
        let m = metrics_from_snapshots(&exact, &tr, 1.5);
        assert_eq!((m.rmse_m, m.id_switches), (0.0, 0));
        assert_eq!(m.matched_fraction, vec![1.0, 1.0]);

        let shifted: Vec<Vec<TrackSnapshot>> = exact.iter().map(|v| v.iter().map(|s| TrackSnapshot { x: s.x + 0.1, ..*s }).collect()).collect();
        assert!((metrics_from_snapshots(&shifted, &tr, 1.5).rmse_m - 0.1).abs() < 1e-12);

        let single: Vec<Vec<TruthRow>> = tr.iter().map(|t| vec![t[0]]).collect();
        let relabeled: Vec<Vec<TrackSnapshot>> = exact
            .iter()
            .enumerate()
            .map(|(f, v)| vec![TrackSnapshot { id: if f >= 50 { 7 } else { 1 }, ..v[0] }])
            .collect();
        assert_eq!(metrics_from_snapshots(&relabeled, &single, 1.5).id_switches, 1);
    }

    #[test]
    fn merge_range_from_single_track() {
        let tr: Vec<Vec<TruthRow>> = (0..10).map(|f| vec![truth(-0.3, 2.0 + f as f64), truth(0.3, 2.0 + f as f64)]).collect();
        let one: Vec<Vec<TrackSnapshot>> = tr.iter().enumerate().map(|(f, t)| if f >= 5 { vec![snap(f, 1, 0.0, t[0].y)] } else { vec![snap(f, 1, -0.3, t[0].y), snap(f, 2, 0.3, t[0].y)] }).collect();
        let m = metrics_from_snapshots(&one, &tr, 1.5);
        assert!((m.merge_range_m - (0.3f64).hypot(11.0)).abs() < 1e-9);
        assert!((m.merge_onset_m.unwrap() - (0.3f64).hypot(7.0)).abs() < 1e-9);
        assert_eq!(metrics_from_snapshots(&tr.iter().enumerate().map(|(f, t)| vec![snap(f, 1, t[0].x, t[0].y), snap(f, 2, t[1].x, t[1].y)]).collect::<Vec<_>>(), &tr, 1.5).merge_onset_m, None);
    }
}
