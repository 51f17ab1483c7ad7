//! Built-in scene library.

use crate::error::{Error, Result};
use crate::scene::{default_limbs, GhostSpec, HumanTarget, Limb, MirrorPlane, Scatterer, Scene};

/// Torso RCS of a walking person relative to unit noise power per sample.
pub const PERSON_RCS: f64 = 0.05;
/// Walking speed used by every built-in walker (m/s).
pub const WALK_SPEED: f64 = 1.0;
/// Distance over which a walker brakes before turning back (m).
pub const TURN_RAMP_M: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub description: &'static str,
}

const LIBRARY: [ScenarioInfo; 7] = [
    ScenarioInfo {
        name: "1T_AB",
        description: "one person walking from marker A (1.5 m) out to marker B (8 m) and back",
    },
    ScenarioInfo {
        name: "1T_AB_multipath",
        description: "1T_AB in a furnished room with back-wall and side-wall ghosts",
    },
    ScenarioInfo {
        name: "2T_parallel_0p6m",
        description: "two people side by side 0.6 m apart walking out to 8 m and back",
    },
    ScenarioInfo {
        name: "2T_tangential_4m",
        description: "two people crossing tangentially at 4 m, 0.3 m apart at closest approach",
    },
    ScenarioInfo {
        name: "empty_room",
        description: "static furniture only, no people",
    },
    ScenarioInfo {
        name: "masking_pair",
        description: "a strong and a 20 dB weaker walker 1.8 m apart in range, inside one CFAR window",
    },
    ScenarioInfo {
        name: "1T_static",
        description: "one person standing still at 4 m among static furniture",
    },
];

/// Names and one-line descriptions of every built-in scene.
pub fn builtin_scenarios() -> &'static [ScenarioInfo] {
    &LIBRARY
}

/// Builds the named scene with the given noise seed.
pub fn scenario(name: &str, seed: u64) -> Result<Scene> {
    let scene = match name {
        "1T_AB" => one_target_ab(seed),
        "1T_AB_multipath" => one_target_multipath(seed),
        "2T_parallel_0p6m" => parallel_pair(seed),
        "2T_tangential_4m" => tangential_pair(seed),
        "empty_room" => empty_room(seed),
        "masking_pair" => masking_pair(seed),
        "1T_static" => standing(seed),
        _ => return Err(Error::UnknownScenario(name.to_string())),
    };
    Ok(scene)
}

fn furniture() -> Vec<Scatterer> {
    vec![
        Scatterer::fixed(-1.8, 2.5, 2.0),
        Scatterer::fixed(2.2, 3.6, 3.0),
        Scatterer::fixed(-2.5, 6.0, 1.5),
        Scatterer::fixed(1.5, 7.5, 2.0),
        Scatterer::fixed(0.0, 10.0, 8.0),
    ]
}

/// Limb set with every phase shifted, so two walkers do not step in sync.
fn shifted_limbs(shift: f64) -> Vec<Limb> {
    default_limbs()
        .into_iter()
        .map(|l| Limb {
            phase_rad: l.phase_rad + shift,
            ..l
        })
        .collect()
}

fn duration_of(humans: &[HumanTarget]) -> f64 {
    humans
        .iter()
        .filter_map(|h| h.waypoints.last().map(|w| w.t))
        .fold(0.0, f64::max)
}

fn one_target_ab(seed: u64) -> Scene {
    let h = HumanTarget::out_and_back((0.3, 1.5), (-0.3, 8.0), WALK_SPEED, TURN_RAMP_M, PERSON_RCS);
    let mut s = Scene::new(duration_of(std::slice::from_ref(&h)), seed);
    s.humans.push(h);
    s
}

fn one_target_multipath(seed: u64) -> Scene {
    let mut s = one_target_ab(seed);
    s.clutter = furniture();
    s.ghosts = vec![
        GhostSpec {
            target: 0,
            enabled: true,
            plane: MirrorPlane {
                point: [0.0, 10.0],
                normal: [0.0, 1.0],
            },
            attenuation_db: 6.0,
        },
        GhostSpec {
            target: 0,
            enabled: true,
            plane: MirrorPlane {
                point: [3.0, 0.0],
                normal: [1.0, 0.0],
            },
            attenuation_db: 6.0,
        },
    ];
    s
}

fn parallel_pair(seed: u64) -> Scene {
    let walker = |x: f64| HumanTarget::out_and_back((x, 1.5), (x, 8.0), WALK_SPEED, TURN_RAMP_M, PERSON_RCS);
    let a = walker(-0.3);
    let b = walker(0.3).with_limbs(shifted_limbs(1.3));
    let humans = vec![a, b];
    let mut s = Scene::new(duration_of(&humans), seed);
    s.humans = humans;
    s
}

fn tangential_pair(seed: u64) -> Scene {
    let a = HumanTarget::walking(&[(-2.5, 3.85), (2.5, 3.85)], WALK_SPEED, 0.0, PERSON_RCS);
    let b = HumanTarget::walking(&[(2.5, 4.15), (-2.5, 4.15)], WALK_SPEED, 0.0, PERSON_RCS).with_limbs(shifted_limbs(1.3));
    let humans = vec![a, b];
    let mut s = Scene::new(duration_of(&humans), seed);
    s.humans = humans;
    s
}

fn empty_room(seed: u64) -> Scene {
    let mut s = Scene::new(10.0, seed);
    s.clutter = furniture();
    s
}

fn masking_pair(seed: u64) -> Scene {
    let strong = HumanTarget::walking(&[(0.0, 2.0), (0.0, 8.0)], WALK_SPEED, 0.0, 100.0 * PERSON_RCS);
    let weak = HumanTarget::walking(&[(0.4, 3.8), (0.4, 9.8)], WALK_SPEED, 0.0, PERSON_RCS).with_limbs(shifted_limbs(1.3));
    let humans = vec![strong, weak];
    let mut s = Scene::new(duration_of(&humans), seed);
    s.humans = humans;
    s
}

fn standing(seed: u64) -> Scene {
    let h = HumanTarget::walking(&[(0.5, 4.0)], WALK_SPEED, 0.0, PERSON_RCS).with_limbs(Vec::new());
    let mut s = Scene::new(5.0, seed);
    s.clutter = furniture();
    s.humans.push(h);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RadarParams;

    #[test]
    fn every_builtin_builds_and_validates() {
        for info in builtin_scenarios() {
            let s = scenario(info.name, 1).unwrap();
            s.validate().unwrap();
            assert!(s.n_frames(&RadarParams::default()) > 0, "{}", info.name);
        }
        assert!(matches!(scenario("nope", 1), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn empty_room_has_no_targets() {
        let s = scenario("empty_room", 0).unwrap();
        assert!(s.humans.is_empty());
        assert!(s.ground_truth(&RadarParams::default()).iter().all(|f| f.is_empty()));
    }

    #[test]
    fn tangential_minimum_spacing() {
        let s = scenario("2T_tangential_4m", 0).unwrap();
        let min = s
            .ground_truth(&RadarParams::default())
            .iter()
            .map(|f| (f[0].x - f[1].x).hypot(f[0].y - f[1].y))
            .fold(f64::INFINITY, f64::min);
        assert!((min - 0.3).abs() < 0.05, "{min}");
    }

    #[test]
    fn parallel_spacing_is_constant() {
        let s = scenario("2T_parallel_0p6m", 0).unwrap();
        for f in s.ground_truth(&RadarParams::default()) {
            assert!(((f[1].x - f[0].x) - 0.6).abs() < 1e-12);
            assert!((f[1].y - f[0].y).abs() < 1e-12);
        }
    }

    #[test]
    fn masking_pair_shares_one_cfar_window() {
        let p = RadarParams::default();
        let s = scenario("masking_pair", 0).unwrap();
        let half = crate::cfar::CfarConfig::default().half_window() as f64;
        for f in s.ground_truth(&p) {
            let bins = (f[1].range() - f[0].range()) / p.range_bin_spacing();
            assert!(bins > 1.0 && bins <= half, "{bins}");
        }
    }
}
