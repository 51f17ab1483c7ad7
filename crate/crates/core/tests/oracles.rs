//! Independent reference implementations checked against the library.

use fmcw_track::cfar::{cfar_2d, exponential_noise_map, CfarConfig, CfarKind};
use fmcw_track::cluster::{dbscan, DbscanParams};
use fmcw_track::eval::metrics_from_snapshots;
use fmcw_track::scene::TruthRow;
use fmcw_track::tracker::ekf::{measure_h, measure_jacobian, wrap_angle, Linearization, MeasCov, MeasVec, State, StateCov};
use fmcw_track::tracker::jpda::{jpda_associate, Gating, JpdaParams};
use fmcw_track::tracker::{update, Measurement, Track, TrackSnapshot, TrackStatus, TrackerConfig};
use nalgebra::Matrix4x3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod support;
use support::{brute_force_betas, partition, random_points, random_state, reference_dbscan};

#[test]
fn dbscan_matches_quadratic_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..100 {
        let n = rng.random_range(0..=50);
        let pts = random_points(&mut rng, n);
        let params = DbscanParams {
            eps: rng.random_range(0.2..1.2),
            min_pts: rng.random_range(1..=5),
            velocity_weight: 0.5,
        };
        let got = dbscan(&pts, &params);
        let want = reference_dbscan(&pts, &params);
        assert_eq!(partition(&got.labels), partition(&want), "case {case}");
        assert_eq!(got.noise.len(), want.iter().filter(|l| l.is_none()).count());
    }
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let delta = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random_state(&mut rng);
        let h = measure_jacobian(&x).unwrap();
        for c in 0..4 {
            let mut up = x;
            let mut dn = x;
            up[c] += delta;
            dn[c] -= delta;
            let d = measure_h(&up).unwrap() - measure_h(&dn).unwrap();
            for r in 0..3 {
                let fd = if r == 1 { wrap_angle(d[r]) } else { d[r] } / (2.0 * delta);
                let err = (fd - h[(r, c)]).abs() / h[(r, c)].abs().max(1.0);
                worst = worst.max(err);
            }
        }
    }
    assert!(worst <= 1e-6, "max relative error {worst:e}");
}

fn params(pd: f64, beta: f64) -> JpdaParams {
    JpdaParams {
        p_detection: pd,
        clutter_density: beta,
        gate_threshold: 11.34,
        event_cap: 1_000_000,
    }
}

#[test]
fn jpda_enumeration_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..200 {
        let n_tracks = rng.random_range(1..=4);
        let n_meas = rng.random_range(0..=5);
        let gated: Gating = (0..n_tracks)
            .map(|_| {
                let mut row = Vec::new();
                for t in 0..n_meas {
                    if rng.random_bool(0.6) {
                        row.push((t, rng.random_range(0.01..5.0), 1.0));
                    }
                }
                row
            })
            .collect();
        let pd = rng.random_range(0.5..0.99);
        let beta = rng.random_range(0.01..2.0);
        let got = jpda_associate(&gated, n_meas, &params(pd, beta));
        let want = brute_force_betas(&gated, n_meas, pd, beta);
        for (g, w) in got.betas.iter().zip(&want) {
            for (a, b) in g.iter().zip(w) {
                assert!((a - b).abs() < 1e-12, "case {case}: {g:?} vs {w:?}");
            }
            assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn jpda_single_track_closed_form() {
    for l in [0.05, 1.0, 3.7, 40.0] {
        let gated: Gating = vec![vec![(0, l, 2.0)]];
        let got = jpda_associate(&gated, 1, &params(0.9, 1.0));
        let closed = 0.9 * l / (0.9 * l + 0.1);
        assert!((got.betas[0][1] - closed).abs() < 1e-12);
        assert!((got.betas[0][0] - (1.0 - closed)).abs() < 1e-12);
    }
}

#[test]
fn jpda_two_separated_tracks_are_diagonal() {
    let cfg = TrackerConfig::default();
    let r = cfg.measurement_cov();
    let p = StateCov::identity() * 0.05;
    let xs = [State::new(-1.5, 4.0, 0.0, 1.0), State::new(1.5, 4.0, 0.0, 1.0)];
    let lins: Vec<Option<Linearization>> = xs.iter().map(|x| Linearization::new(x, &p, &r).ok()).collect();
    let zs: Vec<MeasVec> = xs.iter().map(|x| measure_h(x).unwrap() + MeasVec::new(0.05, 0.01, 0.02)).collect();
    let gated = fmcw_track::tracker::jpda::gate_all(&lins, &zs, 11.34);
    assert_eq!(gated.iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 1]);
    let a = jpda_associate(&gated, 2, &params(0.9, 0.0));
    assert!(a.betas[0][1] >= 0.99 && a.betas[1][2] >= 0.99, "{:?}", a.betas);
    for row in &a.betas {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

/// JPDA-EKF update written out from the textbook equations.
fn reference_update(x: &State, p: &StateCov, r: &MeasCov, zs: &[MeasVec], betas: &[f64]) -> (State, StateCov) {
    let z_hat = measure_h(x).unwrap();
    let h = measure_jacobian(x).unwrap();
    let s = h * p * h.transpose() + r;
    let k: Matrix4x3<f64> = p * h.transpose() * s.try_inverse().unwrap();
    let nus: Vec<MeasVec> = zs
        .iter()
        .map(|z| {
            let mut v = z - z_hat;
            v[1] = wrap_angle(v[1]);
            v
        })
        .collect();
    let nu: MeasVec = nus.iter().zip(&betas[1..]).map(|(v, b)| v * *b).sum();
    let spread: MeasCov = nus.iter().zip(&betas[1..]).map(|(v, b)| v * v.transpose() * *b).sum::<MeasCov>() - nu * nu.transpose();
    let pc = p - k * s * k.transpose();
    let pn = p * betas[0] + pc * (1.0 - betas[0]) + k * spread * k.transpose();
    (x + k * nu, (pn + pn.transpose()) * 0.5)
}

#[test]
fn jpda_update_matches_reference() {
    let cfg = TrackerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let x = random_state(&mut rng);
        let a = nalgebra::Matrix4::from_fn(|_, _| rng.random_range(-0.3..0.3));
        let p = a * a.transpose() + StateCov::identity() * 0.05;
        let z0 = measure_h(&x).unwrap();
        let ms: Vec<Measurement> = (0..2)
            .map(|_| Measurement {
                range: z0[0] + rng.random_range(-0.3..0.3),
                azimuth: z0[1] + rng.random_range(-0.05..0.05),
                rdot: z0[2] + rng.random_range(-0.2..0.2),
                power: 1.0,
            })
            .collect();
        let b1 = rng.random_range(0.0..0.6);
        let b2 = rng.random_range(0.0..(1.0 - b1));
        let betas = [1.0 - b1 - b2, b1, b2];
        let track = Track {
            id: 1,
            state: x,
            cov: p,
            status: TrackStatus::Confirmed,
            hits: Default::default(),
            consecutive_misses: 0,
            last_update_frame: 0,
        };
        let got = update(&track, &ms, &betas, &cfg).unwrap();
        let zs: Vec<MeasVec> = ms.iter().map(Measurement::vector).collect();
        let (xw, pw) = reference_update(&x, &p, &cfg.measurement_cov(), &zs, &betas);
        assert!((got.state - xw).amax() < 1e-10);
        assert!((got.cov - pw).amax() < 1e-10);
    }
}

fn empirical_pfa(cfg: &CfarConfig, size: usize, seed: u64, interior_only: bool) -> f64 {
    let map = exponential_noise_map(size, size, seed);
    let mask = cfar_2d(&map, cfg).unwrap();
    let w = cfg.half_window();
    let inside = |r: usize, c: usize| r >= w && c >= w && r + w < size && c + w < size;
    let (mut hits, mut cells) = (0usize, 0usize);
    for r in 0..size {
        for c in 0..size {
            if inside(r, c) == interior_only {
                cells += 1;
                hits += mask.is_set(r, c) as usize;
            }
        }
    }
    hits as f64 / cells as f64
}

#[test]
fn os_rank_18_of_24_hits_design_pfa() {
    let cfg = CfarConfig::new(CfarKind::Os, 1, 2, 1e-3);
    let pfa = empirical_pfa(&cfg, 1000, 21, true);
    assert!((0.5e-3..=2e-3).contains(&pfa), "OS empirical P_FA {pfa:e}");
}

#[test]
fn border_band_stays_calibrated() {
    for kind in [CfarKind::Ca, CfarKind::Os] {
        let cfg = CfarConfig::new(kind, 4, 1, 1e-2);
        let mut pfa = 0.0;
        for seed in 0..20 {
            pfa += empirical_pfa(&cfg, 200, 100 + seed, false) / 20.0;
        }
        assert!(pfa >= 1e-2 / 3.0 && pfa <= 3e-2, "{kind:?} border P_FA {pfa:e}");
    }
}

fn snap(frame: usize, id: u64, x: f64, y: f64) -> TrackSnapshot {
    TrackSnapshot {
        frame,
        time_s: frame as f64 * 0.1,
        id,
        status: TrackStatus::Confirmed,
        x,
        y,
        vx: 0.0,
        vy: 0.0,
        gate_count: 1,
        beta0: 0.0,
    }
}

#[test]
fn metrics_ignore_id_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let truth: Vec<Vec<TruthRow>> = (0..80)
        .map(|f| {
            (0..2)
                .map(|k| TruthRow {
                    frame: f,
                    time_s: f as f64 * 0.1,
                    target_id: k,
                    x: if k == 0 { -1.0 } else { 1.0 },
                    y: 2.0 + 0.05 * f as f64,
                    radial_velocity: 0.5,
                })
                .collect()
        })
        .collect();
    let tracks: Vec<Vec<TrackSnapshot>> = truth
        .iter()
        .map(|rows| {
            let mut out = Vec::new();
            for t in rows {
                if rng.random_bool(0.9) {
                    let id = if t.frame < 40 { 1 + t.target_id as u64 } else { 2 - t.target_id as u64 };
                    out.push(snap(t.frame, id, t.x + rng.random_range(-0.2..0.2), t.y + rng.random_range(-0.2..0.2)));
                }
            }
            out
        })
        .collect();
    let relabeled: Vec<Vec<TrackSnapshot>> = tracks
        .iter()
        .map(|f| f.iter().map(|s| TrackSnapshot { id: 100 - s.id * 7, ..*s }).collect())
        .collect();
    let a = metrics_from_snapshots(&tracks, &truth, 1.5);
    let b = metrics_from_snapshots(&relabeled, &truth, 1.5);
    assert_eq!(a.rmse_m, b.rmse_m);
    assert_eq!(a.id_switches, b.id_switches);
    assert_eq!(a.id_switches, 2);
}
