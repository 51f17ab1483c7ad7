//! Raw MIMO FMCW radar cube synthesis.
//!
//! Each scatterer contributes, after de-chirping, the separable phasor
//!
//! ```text
//! A · exp(j2π (f_b k / f_s + f_D m T_r + n (d/λ) sin θ + 2 r / λ))
//! ```
//!
//! over fast-time sample `k`, chirp `m` and virtual channel `n`, with beat
//! frequency `f_b = 2 μ r / c` and Doppler `f_D = 2 v_r / λ`. The last term is
//! the carrier round-trip phase at the start of the frame. Complex circular
//! Gaussian noise of the configured power is added per sample.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::params::RadarParams;
use crate::scene::{Scatterer, Scene};

/// splitmix64 finalizer over (seed, stream, index).
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03)
        ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed stream identifiers.
pub mod streams {
    pub const FRAME_NOISE: u64 = 1;
    pub const CFAR_CALIBRATION: u64 = 2;
    pub const MONTE_CARLO: u64 = 3;
}

/// One frame of raw samples, laid out `[chirp][channel][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCube {
    pub n_chirps: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    pub data: Vec<Complex64>,
}

impl FrameCube {
    pub fn zeros(n_chirps: usize, n_channels: usize, n_samples: usize) -> Self {
        Self {
            n_chirps,
            n_channels,
            n_samples,
            data: vec![Complex64::new(0.0, 0.0); n_chirps * n_channels * n_samples],
        }
    }

    #[inline]
    pub fn index(&self, chirp: usize, channel: usize, sample: usize) -> usize {
        (chirp * self.n_channels + channel) * self.n_samples + sample
    }

    pub fn get(&self, chirp: usize, channel: usize, sample: usize) -> Complex64 {
        self.data[self.index(chirp, channel, sample)]
    }

    pub fn mean_power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }

    pub fn total_power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Complex raw data indexed `[frame][chirp][channel][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCube {
    pub params: RadarParams,
    pub frames: Vec<FrameCube>,
    pub timestamps_s: Vec<f64>,
}

impl RadarCube {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    /// Dimensions `(frames, chirps, channels, samples)`.
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (
            self.frames.len(),
            self.params.chirps_per_frame,
            self.params.n_virtual_channels,
            self.params.adc_samples,
        )
    }

    pub fn get(&self, frame: usize, chirp: usize, channel: usize, sample: usize) -> Complex64 {
        self.frames[frame].get(chirp, channel, sample)
    }
}

/// Adds the noiseless response of `scatterers` to `cube`.
pub fn add_scatterers(cube: &mut FrameCube, params: &RadarParams, scatterers: &[Scatterer]) {
    let lambda = params.wavelength();
    let half_fov = params.half_fov_rad();
    let (nc, nan, ns) = (cube.n_chirps, cube.n_channels, cube.n_samples);
    let mut fast = vec![Complex64::new(0.0, 0.0); ns];
    let mut slow = vec![Complex64::new(0.0, 0.0); nc];
    let mut spatial = vec![Complex64::new(0.0, 0.0); nan];
    for s in scatterers {
        if s.azimuth_rad.abs() > half_fov || s.amplitude == 0.0 {
            continue;
        }
        let fb = params.beat_frequency(s.range_m) / params.adc_rate_sps;
        let fd = params.doppler_frequency(s.radial_velocity_mps) * params.chirp_repetition_interval_s;
        let u = params.element_spacing_wavelengths * s.azimuth_rad.sin();
        let carrier = (2.0 * s.range_m / lambda).fract();
        let a0 = Complex64::from_polar(s.amplitude, TAU * carrier);
        for (k, v) in fast.iter_mut().enumerate() {
            *v = Complex64::from_polar(1.0, TAU * (fb * k as f64).fract());
        }
        for (m, v) in slow.iter_mut().enumerate() {
            *v = Complex64::from_polar(1.0, TAU * (fd * m as f64).fract());
        }
        for (n, v) in spatial.iter_mut().enumerate() {
            *v = Complex64::from_polar(1.0, TAU * (u * n as f64).fract());
        }
        for m in 0..nc {
            for n in 0..nan {
                let w = a0 * slow[m] * spatial[n];
                let base = (m * nan + n) * ns;
                for (d, f) in cube.data[base..base + ns].iter_mut().zip(&fast) {
                    *d += w * f;
                }
            }
        }
    }
}

/// Adds complex circular Gaussian noise of power `noise_power` per sample.
pub fn add_noise(cube: &mut FrameCube, noise_power: f64, seed: u64) {
    if noise_power <= 0.0 {
        return;
    }
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in cube.data.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(sigma * re, sigma * im);
    }
}

/// Synthesizes one frame of the scene.
pub fn synthesize_frame(scene: &Scene, params: &RadarParams, frame_index: usize) -> Result<FrameCube> {
    let n_frames = scene.n_frames(params);
    if frame_index >= n_frames {
        return Err(Error::FrameOutOfRange {
            index: frame_index,
            n_frames,
        });
    }
    let t = scene.frame_time(params, frame_index);
    let scatterers = scene.scatterers_at(t)?;
    let mut cube = FrameCube::zeros(params.chirps_per_frame, params.n_virtual_channels, params.adc_samples);
    add_scatterers(&mut cube, params, &scatterers);
    add_noise(
        &mut cube,
        params.noise_power,
        derive_seed(scene.seed, streams::FRAME_NOISE, frame_index as u64),
    );
    Ok(cube)
}

/// Synthesizes every frame of the scene; frames are generated in parallel.
pub fn synthesize_cube(scene: &Scene, params: &RadarParams) -> Result<RadarCube> {
    params.validate()?;
    scene.validate()?;
    let n = scene.n_frames(params);
    let frames = (0..n)
        .into_par_iter()
        .map(|f| synthesize_frame(scene, params, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(RadarCube {
        params: params.clone(),
        frames,
        timestamps_s: (0..n).map(|f| scene.frame_time(params, f)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> RadarParams {
        RadarParams {
            noise_power: 0.0,
            ..RadarParams::default()
        }
    }

    #[test]
    fn empty_scene_noise_power() {
        let scene = Scene::new(1.0, 11);
        let f = synthesize_frame(&scene, &RadarParams::default(), 0).unwrap();
        assert_eq!(f.data.len(), 90 * 15 * 56);
        let p = f.mean_power();
        assert!((p - 1.0).abs() < 0.05, "mean power {p}");
    }

    #[test]
    fn deterministic_under_seed() {
        let mut scene = Scene::new(1.0, 5);
        scene.clutter.push(Scatterer::fixed(1.0, 4.0, 0.3));
        let p = RadarParams::default();
        let a = synthesize_cube(&scene, &p).unwrap();
        let b = synthesize_cube(&scene, &p).unwrap();
        assert_eq!(a, b);
        scene.seed = 6;
        let c = synthesize_cube(&scene, &p).unwrap();
        assert_ne!(a.frames[0], c.frames[0]);
    }

    #[test]
    fn linear_in_scatterers() {
        let p = quiet();
        let s1 = Scatterer { range_m: 3.3, azimuth_rad: 0.2, radial_velocity_mps: 0.7, amplitude: 1.0 };
        let s2 = Scatterer { range_m: 6.1, azimuth_rad: -0.4, radial_velocity_mps: -1.2, amplitude: 0.5 };
        let mut a = FrameCube::zeros(90, 15, 56);
        let mut b = a.clone();
        let mut ab = a.clone();
        add_scatterers(&mut a, &p, &[s1]);
        add_scatterers(&mut b, &p, &[s2]);
        add_scatterers(&mut ab, &p, &[s1, s2]);
        for i in 0..ab.data.len() {
            let sum = a.data[i] + b.data[i];
            assert!((ab.data[i] - sum).norm() <= 1e-12 * sum.norm().max(1.0));
        }
    }

    #[test]
    fn power_scales_with_squared_amplitudes() {
        let p = quiet();
        let s1 = Scatterer { range_m: 3.0, azimuth_rad: -0.3, radial_velocity_mps: 1.0, amplitude: 1.0 };
        let s2 = Scatterer { range_m: 9.0, azimuth_rad: 0.3, radial_velocity_mps: -2.0, amplitude: 2.0 };
        let mut c = FrameCube::zeros(90, 15, 56);
        add_scatterers(&mut c, &p, &[s1, s2]);
        let expected = (1.0 + 4.0) * c.data.len() as f64;
        assert!((c.total_power() / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn outside_fov_is_dropped() {
        let p = quiet();
        let s = Scatterer { range_m: 3.0, azimuth_rad: 1.0, radial_velocity_mps: 0.0, amplitude: 1.0 };
        let mut c = FrameCube::zeros(90, 15, 56);
        add_scatterers(&mut c, &p, &[s]);
        assert_eq!(c.total_power(), 0.0);
    }

    #[test]
    fn frame_out_of_range() {
        let scene = Scene::new(1.0, 0);
        assert!(matches!(
            synthesize_frame(&scene, &RadarParams::default(), 10),
            Err(Error::FrameOutOfRange { .. })
        ));
    }
}
