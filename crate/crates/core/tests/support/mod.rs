#![allow(dead_code)]

use std::collections::BTreeSet;

use fmcw_track::cluster::{DbscanParams, PointMeasurement};
use fmcw_track::tracker::ekf::State;
use fmcw_track::tracker::jpda::Gating;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Textbook O(n²) DBSCAN: seeds in input order, border points go to the
/// first cluster that reaches them.
pub fn reference_dbscan(points: &[PointMeasurement], p: &DbscanParams) -> Vec<Option<usize>> {
    let n = points.len();
    let f = |a: &PointMeasurement| [a.x, a.y, p.velocity_weight * a.radial_velocity];
    let near = |i: usize| -> Vec<usize> {
        let a = f(&points[i]);
        (0..n)
            .filter(|&j| {
                let b = f(&points[j]);
                (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2) <= p.eps * p.eps
            })
            .collect()
    };
    let mut label = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if label[i].is_some() || near(i).len() < p.min_pts {
            continue;
        }
        let id = next;
        next += 1;
        let mut stack = vec![i];
        label[i] = Some(id);
        while let Some(q) = stack.pop() {
            let nb = near(q);
            if nb.len() < p.min_pts {
                continue;
            }
            for j in nb {
                if label[j].is_none() {
                    label[j] = Some(id);
                    stack.push(j);
                }
            }
        }
    }
    label
}

pub fn partition(labels: &[Option<usize>]) -> BTreeSet<Vec<usize>> {
    let mut groups: std::collections::BTreeMap<Option<usize>, Vec<usize>> = Default::default();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(*l).or_default().push(i);
    }
    groups.into_values().collect()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<PointMeasurement> {
    let blobs: Vec<(f64, f64, f64)> = (0..3).map(|_| (rng.random_range(-3.0..3.0), rng.random_range(0.5..8.0), rng.random_range(-2.0..2.0))).collect();
    (0..n)
        .map(|_| {
            let (bx, by, bv) = blobs[rng.random_range(0..blobs.len())];
            let spread = if rng.random_bool(0.2) { 3.0 } else { 0.5 };
            PointMeasurement {
                x: bx + rng.random_range(-spread..spread),
                y: by + rng.random_range(-spread..spread),
                radial_velocity: bv + rng.random_range(-0.5..0.5),
                power: rng.random_range(0.1..10.0),
            }
        })
        .collect()
}

pub fn random_state(rng: &mut ChaCha8Rng) -> State {
    let r = rng.random_range(0.5..10.0);
    let th: f64 = rng.random_range(-1.2..1.2);
    State::new(r * th.sin(), r * th.cos(), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
}

/// Marginals from listing every joint event of the whole problem at once.
pub fn brute_force_betas(gated: &Gating, n_meas: usize, pd: f64, beta: f64) -> Vec<Vec<f64>> {
    let n_tracks = gated.len();
    let mut acc = vec![vec![0.0; n_meas + 1]; n_tracks];
    let mut total = 0.0;
    let mut choice = vec![0usize; n_tracks];
    loop {
        let mut used = vec![false; n_meas];
        let mut ok = true;
        let mut w = 1.0;
        for (j, &c) in choice.iter().enumerate() {
            if c == 0 {
                w *= 1.0 - pd;
            } else {
                let (t, g, _) = gated[j][c - 1];
                if used[t] {
                    ok = false;
                    break;
                }
                used[t] = true;
                w *= pd * g;
            }
        }
        if ok {
            w *= beta.powi(used.iter().filter(|u| !**u).count() as i32);
            total += w;
            for (j, &c) in choice.iter().enumerate() {
                let col = if c == 0 { 0 } else { gated[j][c - 1].0 + 1 };
                acc[j][col] += w;
            }
        }
        let mut j = 0;
        loop {
            if j == n_tracks {
                return acc.into_iter().map(|row| row.into_iter().map(|v| v / total).collect()).collect();
            }
            choice[j] += 1;
            if choice[j] <= gated[j].len() {
                break;
            }
            choice[j] = 0;
            j += 1;
        }
    }
}
