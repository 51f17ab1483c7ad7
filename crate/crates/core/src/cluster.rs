//! Detection masks to Cartesian point clouds, DBSCAN grouping and
//! power-weighted centroids.
//!
//! DBSCAN runs on `(x, y, w·ṙ)` with Euclidean distance. Seeds are taken in
//! input order and each cluster is fully expanded before the next seed, so a
//! border point reachable from two clusters belongs to the one whose seed
//! comes first.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};

use crate::cfar::{Detection, DetectionMask};
use crate::dsp::{MapKind, Preprocessor, ProcessedFrame};
use crate::error::Result;
use crate::scene::polar_to_cartesian;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMeasurement {
    pub x: f64,
    pub y: f64,
    pub radial_velocity: f64,
    pub power: f64,
}

impl PointMeasurement {
    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn azimuth(&self) -> f64 {
        self.x.atan2(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbscanParams {
    /// Neighborhood radius in the weighted (x, y, w·ṙ) space.
    pub eps: f64,
    pub min_pts: usize,
    /// Metres per (m/s) of radial velocity.
    pub velocity_weight: f64,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self {
            eps: 0.9,
            min_pts: 3,
            velocity_weight: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Indices into the clustered point list.
    pub members: Vec<usize>,
    pub points: Vec<PointMeasurement>,
    pub centroid: PointMeasurement,
}

impl Cluster {
    pub fn count(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    pub noise: Vec<usize>,
    /// Cluster index per input point, `None` for noise.
    pub labels: Vec<Option<usize>>,
}

/// Converts every detected cell to a Cartesian point. RA cells take their
/// radial velocity from the Doppler lookup; RD cells take their azimuth from
/// beamforming the cell's channel snapshot.
pub fn mask_to_points(mask: &DetectionMask, pf: &ProcessedFrame, pre: &Preprocessor) -> Result<Vec<PointMeasurement>> {
    cells_to_points(mask.kind, &mask.detections, pf, pre)
}

/// [`mask_to_points`] for an explicit list of detected cells.
pub fn cells_to_points(kind: MapKind, cells: &[Detection], pf: &ProcessedFrame, pre: &Preprocessor) -> Result<Vec<PointMeasurement>> {
    let mut out = Vec::with_capacity(cells.len());
    for d in cells {
        let (range, azimuth, rdot) = match kind {
            MapKind::RangeAzimuth => {
                let az = pf.ra.cross_axis[d.col];
                (pf.ra.range_axis[d.row], az, pre.doppler_at(pf, d.row, az))
            }
            MapKind::RangeDoppler => {
                let az = pre.angle_at(pf, d.row, d.col)?;
                (pf.rd.range_axis[d.row], az, pf.rd.cross_axis[d.col])
            }
        };
        let (x, y) = polar_to_cartesian(range, azimuth);
        out.push(PointMeasurement {
            x,
            y,
            radial_velocity: rdot,
            power: d.power,
        });
    }
    Ok(out)
}

fn feature(p: &PointMeasurement, w: f64) -> [f64; 3] {
    [p.x, p.y, w * p.radial_velocity]
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Uniform hash grid with cell size eps; neighbors come from the 27 adjacent cells.
struct GridIndex {
    eps: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    feats: Vec<[f64; 3]>,
}

impl GridIndex {
    fn new(feats: Vec<[f64; 3]>, eps: f64) -> Self {
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, f) in feats.iter().enumerate() {
            cells.entry(Self::key(f, eps)).or_default().push(i);
        }
        Self { eps, cells, feats }
    }

    fn key(f: &[f64; 3], eps: f64) -> [i64; 3] {
        [(f[0] / eps).floor() as i64, (f[1] / eps).floor() as i64, (f[2] / eps).floor() as i64]
    }

    /// Points within eps of point `i` (itself included), in index order.
    fn neighbors(&self, i: usize) -> Vec<usize> {
        let f = &self.feats[i];
        let k = Self::key(f, self.eps);
        let e2 = self.eps * self.eps;
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(v) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        out.extend(v.iter().copied().filter(|&j| dist2(f, &self.feats[j]) <= e2));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

pub fn dbscan(points: &[PointMeasurement], params: &DbscanParams) -> Clustering {
    let n = points.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    if n == 0 {
        return Clustering::default();
    }
    let index = GridIndex::new(points.iter().map(|p| feature(p, params.velocity_weight)).collect(), params.eps);
    let mut visited = vec![false; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let nb = index.neighbors(seed);
        if nb.len() < params.min_pts {
            continue;
        }
        visited[seed] = true;
        let id = members.len();
        labels[seed] = Some(id);
        let mut cluster = vec![seed];
        let mut queue: VecDeque<usize> = nb.into_iter().collect();
        while let Some(q) = queue.pop_front() {
            if labels[q].is_none() {
                labels[q] = Some(id);
                cluster.push(q);
            }
            if visited[q] {
                continue;
            }
            visited[q] = true;
            let qn = index.neighbors(q);
            if qn.len() >= params.min_pts {
                queue.extend(qn.into_iter().filter(|&j| !visited[j] || labels[j].is_none()));
            }
        }
        cluster.sort_unstable();
        members.push(cluster);
    }
    let clusters = members
        .into_iter()
        .map(|m| {
            let pts: Vec<PointMeasurement> = m.iter().map(|&i| points[i]).collect();
            let centroid = weighted_centroid(&pts);
            Cluster {
                members: m,
                points: pts,
                centroid,
            }
        })
        .collect();
    let noise = (0..n).filter(|&i| labels[i].is_none()).collect();
    Clustering { clusters, noise, labels }
}

fn weighted_centroid(pts: &[PointMeasurement]) -> PointMeasurement {
    let total: f64 = pts.iter().map(|p| p.power).sum();
    let (w, norm): (Box<dyn Fn(&PointMeasurement) -> f64>, f64) = if total > 0.0 {
        (Box::new(|p: &PointMeasurement| p.power), total)
    } else {
        (Box::new(|_: &PointMeasurement| 1.0), pts.len() as f64)
    };
    let mut c = PointMeasurement {
        x: 0.0,
        y: 0.0,
        radial_velocity: 0.0,
        power: total,
    };
    for p in pts {
        let wi = w(p) / norm;
        c.x += wi * p.x;
        c.y += wi * p.y;
        c.radial_velocity += wi * p.radial_velocity;
    }
    c
}

/// Power-weighted centroid of every cluster; power is the members' sum.
pub fn centroids(clusters: &[Cluster]) -> Vec<PointMeasurement> {
    clusters.iter().map(|c| weighted_centroid(&c.points)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(x: f64, y: f64) -> PointMeasurement {
        PointMeasurement { x, y, radial_velocity: 0.0, power: 1.0 }
    }

    #[test]
    fn empty_input() {
        let c = dbscan(&[], &DbscanParams::default());
        assert!(c.clusters.is_empty() && c.noise.is_empty());
    }

    #[test]
    fn isolated_point_is_noise() {
        let c = dbscan(&[pt(1.0, 1.0)], &DbscanParams { eps: 0.5, min_pts: 3, velocity_weight: 0.5 });
        assert_eq!(c.noise, vec![0]);
        assert!(c.clusters.is_empty());
    }

    #[test]
    fn two_blobs_two_clusters() {
        let mut pts = Vec::new();
        for i in 0..10 {
            let a = i as f64 * 0.628;
            pts.push(pt(0.1 * a.cos(), 3.0 + 0.1 * a.sin()));
            pts.push(pt(2.0 + 0.1 * a.cos(), 3.0 + 0.1 * a.sin()));
        }
        let c = dbscan(&pts, &DbscanParams { eps: 0.5, min_pts: 3, velocity_weight: 0.5 });
        assert_eq!(c.clusters.len(), 2);
        assert!(c.noise.is_empty());
        assert!(c.clusters.iter().all(|k| k.count() == 10));
    }

    #[test]
    fn velocity_separates_colocated_points() {
        let mut pts = Vec::new();
        for i in 0..5 {
            let d = i as f64 * 0.05;
            pts.push(PointMeasurement { x: d, y: 4.0, radial_velocity: 1.5, power: 1.0 });
            pts.push(PointMeasurement { x: d, y: 4.0, radial_velocity: -1.5, power: 1.0 });
        }
        let c = dbscan(&pts, &DbscanParams::default());
        assert_eq!(c.clusters.len(), 2);
    }

    #[test]
    fn centroid_rules() {
        let single = dbscan(&[pt(1.0, 2.0)], &DbscanParams { eps: 0.1, min_pts: 1, velocity_weight: 0.0 });
        assert_eq!(centroids(&single.clusters)[0], pt(1.0, 2.0));

        let two = dbscan(&[pt(0.0, 2.0), pt(0.4, 2.0)], &DbscanParams { eps: 0.5, min_pts: 1, velocity_weight: 0.0 });
        assert_relative_eq!(centroids(&two.clusters)[0].x, 0.2);

        let weighted = [
            PointMeasurement { x: 0.0, y: 2.0, radial_velocity: 0.0, power: 3.0 },
            PointMeasurement { x: 0.4, y: 2.0, radial_velocity: 1.0, power: 1.0 },
        ];
        let c = dbscan(&weighted, &DbscanParams { eps: 0.5, min_pts: 1, velocity_weight: 0.0 });
        let cen = centroids(&c.clusters)[0];
        assert_relative_eq!(cen.x, 0.1);
        assert_relative_eq!(cen.radial_velocity, 0.25);
        assert_relative_eq!(cen.power, 4.0);
    }
}
