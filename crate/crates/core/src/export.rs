//! CSV and PGM artifact writers.
//!
//! Floats are written with fixed precision so that identical runs produce
//! identical bytes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::cfar::DetectionMask;
use crate::dsp::MapGrid;
use crate::eval::{AblationRow, RocPoint, TrackMetrics};
use crate::pipeline::{FrameResult, StageTimes};
use crate::tracker::TrackSnapshot;

/// Dynamic range of exported map images (dB below the map maximum).
pub const PGM_FLOOR_DB: f64 = 60.0;

pub const TRACKS_HEADER: &str = "frame,time_s,id,status,x,y,vx,vy,gate_count,beta0";
pub const POINTS_HEADER: &str = "frame,cluster,x,y,range,azimuth,radial_velocity,power";
pub const RUNTIME_HEADER: &str = "frame,preprocess_ms,detect_ms,cluster_ms,track_ms,total_ms";
pub const ROC_HEADER: &str = "pipeline,cfar,N_TC,N_G,design_pfa,emp_pfa,emp_pd";
pub const METRICS_HEADER: &str =
    "label,pipeline,channels,frames,rmse_m,id_switches,merge_range_m,merge_onset_m,miss_rate,mean_track_count,matched_fraction";
pub const ABLATION_HEADER: &str =
    "label,pipeline,channels,rmse_m,id_switches,merge_range_m,merge_onset_m,miss_rate,mean_track_count,matched_fraction";

pub fn write_tracks_csv<W: Write>(mut w: W, snaps: impl IntoIterator<Item = TrackSnapshot>) -> io::Result<()> {
    writeln!(w, "{TRACKS_HEADER}")?;
    for s in snaps {
        writeln!(
            w,
            "{},{:.3},{},{},{:.4},{:.4},{:.4},{:.4},{},{:.6}",
            s.frame,
            s.time_s,
            s.id,
            s.status.as_str(),
            s.x,
            s.y,
            s.vx,
            s.vy,
            s.gate_count,
            s.beta0
        )?;
    }
    Ok(())
}

pub fn write_points_csv<'a, W: Write>(mut w: W, frames: impl IntoIterator<Item = &'a FrameResult>) -> io::Result<()> {
    writeln!(w, "{POINTS_HEADER}")?;
    for f in frames {
        for (p, l) in f.points.iter().zip(&f.labels) {
            let cluster = l.map(|c| c.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{:.4},{:.4},{:.4},{:.5},{:.4},{:.6e}",
                f.frame_index,
                cluster,
                p.x,
                p.y,
                p.range(),
                p.azimuth(),
                p.radial_velocity,
                p.power
            )?;
        }
    }
    Ok(())
}

pub fn write_runtime_csv<W: Write>(mut w: W, times: &[StageTimes]) -> io::Result<()> {
    writeln!(w, "{RUNTIME_HEADER}")?;
    for t in times {
        writeln!(
            w,
            "{},{:.3},{:.3},{:.3},{:.3},{:.3}",
            t.frame,
            t.preprocess_ms,
            t.detect_ms,
            t.cluster_ms,
            t.track_ms,
            t.total_ms()
        )?;
    }
    Ok(())
}

pub fn write_roc_csv<W: Write>(mut w: W, points: &[RocPoint]) -> io::Result<()> {
    writeln!(w, "{ROC_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{:.6e},{:.6e},{:.6}",
            p.pipeline,
            p.cfar.name(),
            p.training_cells,
            p.guard_cells,
            p.design_pfa,
            p.emp_pfa,
            p.emp_pd
        )?;
    }
    Ok(())
}

fn metric_fields(m: &TrackMetrics) -> String {
    let mean_count = if m.track_count.is_empty() {
        0.0
    } else {
        m.track_count.iter().sum::<usize>() as f64 / m.track_count.len() as f64
    };
    let onset = m.merge_onset_m.map(|v| format!("{v:.3}")).unwrap_or_default();
    let matched: Vec<String> = m.matched_fraction.iter().map(|f| format!("{f:.4}")).collect();
    format!(
        "{:.4},{},{:.3},{},{:.4},{:.3},{}",
        m.rmse_m,
        m.id_switches,
        m.merge_range_m,
        onset,
        m.miss_rate,
        mean_count,
        matched.join(";")
    )
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone)]
pub struct MetricsRow<'a> {
    pub label: &'a str,
    pub pipeline: &'a str,
    pub channels: usize,
    pub metrics: &'a TrackMetrics,
}

pub fn write_metrics_csv<'a, W: Write>(mut w: W, rows: impl IntoIterator<Item = MetricsRow<'a>>) -> io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.label,
            r.pipeline,
            r.channels,
            r.metrics.per_frame.len(),
            metric_fields(r.metrics)
        )?;
    }
    Ok(())
}

/// Rows of `(label, pipeline, row)`.
pub fn write_ablation_csv<'a, W: Write>(mut w: W, rows: impl IntoIterator<Item = (&'a str, &'a str, &'a AblationRow)>) -> io::Result<()> {
    writeln!(w, "{ABLATION_HEADER}")?;
    for (label, pipeline, r) in rows {
        writeln!(w, "{label},{pipeline},{},{}", r.channels, metric_fields(&r.metrics))?;
    }
    Ok(())
}

/// 16-bit binary PGM of a power map on a log scale: the map maximum is
/// white and everything [`PGM_FLOOR_DB`] or more below it is black. Rows run
/// from far range at the top to near range at the bottom.
pub fn map_to_pgm(map: &MapGrid) -> Vec<u8> {
    let peak = map.max();
    let mut out = format!("P5\n{} {}\n65535\n", map.cols, map.rows).into_bytes();
    out.reserve(map.rows * map.cols * 2);
    for r in (0..map.rows).rev() {
        for c in 0..map.cols {
            let v = map.at(r, c);
            let db = if peak > 0.0 && v > 0.0 { 10.0 * (v / peak).log10() } else { -PGM_FLOOR_DB };
            let level = ((db.clamp(-PGM_FLOOR_DB, 0.0) + PGM_FLOOR_DB) / PGM_FLOOR_DB * 65535.0).round() as u16;
            out.extend_from_slice(&level.to_be_bytes());
        }
    }
    out
}

/// 8-bit binary PGM of a detection mask, same orientation as [`map_to_pgm`].
pub fn mask_to_pgm(mask: &DetectionMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.cols, mask.rows).into_bytes();
    for r in (0..mask.rows).rev() {
        for c in 0..mask.cols {
            out.push(if mask.is_set(r, c) { 255 } else { 0 });
        }
    }
    out
}

/// Linear map values with the range axis as first column and the cross
/// axis as header.
pub fn write_map_csv<W: Write>(mut w: W, map: &MapGrid) -> io::Result<()> {
    let head: Vec<String> = map.cross_axis.iter().map(|v| format!("{v:.5}")).collect();
    writeln!(w, "range_m,{}", head.join(","))?;
    for r in 0..map.rows {
        let row: Vec<String> = (0..map.cols).map(|c| format!("{:.6e}", map.at(r, c))).collect();
        writeln!(w, "{:.4},{}", map.range_axis[r], row.join(","))?;
    }
    Ok(())
}

/// Writes `maps/frame_NNNN.pgm` and `masks/frame_NNNN.pgm` for every frame.
pub fn write_frame_images(dir: &Path, frames: &[FrameResult]) -> io::Result<()> {
    let maps = dir.join("maps");
    let masks = dir.join("masks");
    fs::create_dir_all(&maps)?;
    fs::create_dir_all(&masks)?;
    for f in frames {
        fs::write(maps.join(format!("frame_{:04}.pgm", f.frame_index)), map_to_pgm(&f.map))?;
        fs::write(masks.join(format!("frame_{:04}.pgm", f.frame_index)), mask_to_pgm(&f.mask))?;
    }
    Ok(())
}

/// Column documentation written as `README.md` beside every run's outputs.
pub const RUN_README: &str = "# Run directory

- `spec.json`: the fully resolved run specification. `fmcw-track run spec.json` reproduces every CSV except `runtime.csv`.
- `manifest.json`: config hash (SHA-256 of `spec.json` with `output_dir` blanked), seed, crate version, wall-clock seconds per stage, list of written files.

## tracks.csv
One row per track per frame, tentative and deleted tracks included.
`frame`, `time_s`, `id`, `status` (tentative | confirmed | deleted), `x`, `y` (m), `vx`, `vy` (m/s),
`gate_count` (measurements inside the track's gate), `beta0` (missed-detection association probability).

## points.csv
Detected cells after polar to Cartesian conversion.
`frame`, `cluster` (DBSCAN label, empty for noise), `x`, `y`, `range` (m), `azimuth` (rad, positive towards +x),
`radial_velocity` (m/s, positive receding), `power` (map value of the cell).

## runtime.csv
Wall-clock milliseconds per frame and stage: `preprocess_ms`, `detect_ms`, `cluster_ms`, `track_ms`, `total_ms`.

## roc.csv
One row per detector configuration and design false-alarm probability.
`pipeline` (RA | RD), `cfar` (CA | GO | SO | OS | OSCA), `N_TC` training cells, `N_G` guard cells, `design_pfa`,
`emp_pfa` (detected negative cells / negative cells), `emp_pd` (targets with a detection in their positive block / targets).
Cells within the positive tolerance of a truth cell are positive, the guard band around them is excluded,
and in RD maps the zero-Doppler column is excluded.

## metrics.csv and ablation.csv
`rmse_m` over confirmed tracks matched to truth (1.5 m gate, minimum-cost assignment), `id_switches`,
`merge_range_m` (largest truth range of a run of at least 3 frames in which two truths share one confirmed track, 0 if never),
`merge_onset_m` (smallest truth range of such a run, empty if never), `miss_rate` (unmatched truth-frames / truth-frames),
`mean_track_count` (confirmed tracks per frame), `matched_fraction` (per truth, `;`-separated).

## maps/ and masks/
`frame_NNNN.pgm`: 16-bit log-scale detection map (white = map maximum, black = 60 dB below) and 8-bit CFAR mask.
Far range at the top. `export-maps` also writes the linear map values as `frame_NNNN.csv`.
";
